use std::collections::BTreeMap;

use crate::beat::{to_f64, Beat};
use crate::score::{Articulation, MarkingKind, NoteEvent, PartScore};

use super::id::BasisId;

/// Basis values of one onset. Absent entries are exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteBasisRow {
    pub onset: Beat,
    pub values: BTreeMap<BasisId, f64>,
}

impl NoteBasisRow {
    pub fn get(&self, id: &BasisId) -> f64 {
        self.values.get(id).copied().unwrap_or(0.0)
    }
}

/// One row per distinct onset of `part`, keyed under the part's instrument class.
///
/// Notes that share an onset within the part are averaged for pitch and
/// duration, so the row describes the chord as a whole.
pub fn extract_part_basis(part: &PartScore) -> Vec<NoteBasisRow> {
    let class = part.instrument_class.as_str();
    let id = |f: &str| BasisId::new(class, f);
    let onsets = part.onsets();
    let impulses = impulse_targets(part, &onsets);

    let mut rows = Vec::with_capacity(onsets.len());
    let mut prev: Option<Beat> = None;
    let mut start = 0;
    for &t in &onsets {
        let chord: Vec<&NoteEvent> = part.notes[start..]
            .iter()
            .take_while(|n| n.onset == t)
            .collect();
        start += chord.len();
        let count = chord.len() as f64;

        let mut values = BTreeMap::new();
        let pitch = chord
            .iter()
            .map(|n| f64::from(n.pitch.midi()) / 127.0)
            .sum::<f64>()
            / count;
        let duration = chord.iter().map(|n| to_f64(n.duration)).sum::<f64>() / count;
        values.insert(id("pitch"), pitch);
        values.insert(id("duration"), duration);
        values.insert(id("ioi"), prev.map_or(0.0, |p| to_f64(t - p)));
        let sounding = part.notes.iter().filter(|n| n.sounds_at(t)).count();
        values.insert(id("polyphony"), sounding as f64);

        if let Some(b) = part.beat_in_bar(t) {
            values.insert(id(&format!("beat.{b}")), 1.0);
        }
        for (art, name) in [
            (Articulation::Accent, "accent"),
            (Articulation::Staccato, "staccato"),
            (Articulation::Fermata, "fermata"),
        ] {
            if chord.iter().any(|n| n.articulations.contains(&art)) {
                values.insert(id(name), 1.0);
            }
        }
        if part.repeat_signs.contains(&t) {
            values.insert(id("repeat"), 1.0);
        }
        for (feature, v) in dynamic_values(part, t) {
            values.insert(id(&feature), v);
        }
        for (feature, _) in impulses.iter().filter(|(_, at)| *at == t) {
            values.insert(id(feature), 1.0);
        }

        rows.push(NoteBasisRow { onset: t, values });
        prev = Some(t);
    }
    rows
}

/// Step and ramp features of `part` that are active at `t`, with their values.
///
/// These are functions of time, so they can be evaluated between onsets.
pub(crate) fn dynamic_values(part: &PartScore, t: Beat) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for m in &part.markings {
        match m.kind {
            MarkingKind::Constant(_) if m.covers(t) => {
                out.insert(m.kind.feature(), 1.0);
            }
            MarkingKind::Gradual(_) => {
                if let Some(v) = m.ramp_at(t) {
                    let slot = out.entry(m.kind.feature()).or_insert(v);
                    *slot = slot.max(v);
                }
            }
            _ => {}
        }
    }
    out
}

/// Onset at which each impulsive marking fires: the first onset at or after
/// the anchor within the same bar. Markings over rests until the next bar
/// are dropped.
fn impulse_targets(part: &PartScore, onsets: &[Beat]) -> Vec<(String, Beat)> {
    part.markings
        .iter()
        .filter(|m| matches!(m.kind, MarkingKind::Impulsive(_)))
        .filter_map(|m| {
            let i = onsets.partition_point(|&o| o < m.anchor);
            let &at = onsets.get(i)?;
            (at == m.anchor || part.bar_start(at) == part.bar_start(m.anchor))
                .then(|| (m.kind.feature(), at))
        })
        .collect()
}
