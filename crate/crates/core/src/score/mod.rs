//! Symbolic score model on a quarter-note beat timeline.

mod dump;
mod instrument;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;

use crate::beat::{whole, Beat};
use crate::error::{Error, Result};

pub use dump::{read_dump, write_dump};
pub use instrument::instrument_class;
pub use parse::parse_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Step {
    fn semitone(self) -> i32 {
        match self {
            Step::C => 0,
            Step::D => 2,
            Step::E => 4,
            Step::F => 5,
            Step::G => 7,
            Step::A => 9,
            Step::B => 11,
        }
    }

    pub fn from_letter(s: &str) -> Option<Step> {
        Some(match s.trim() {
            "C" => Step::C,
            "D" => Step::D,
            "E" => Step::E,
            "F" => Step::F,
            "G" => Step::G,
            "A" => Step::A,
            "B" => Step::B,
            _ => return None,
        })
    }

    pub fn letter(self) -> char {
        match self {
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
            Step::A => 'A',
            Step::B => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pitch {
    step: Step,
    alter: i8,
    octave: i8,
    midi: u8,
}

impl Pitch {
    pub fn new(step: Step, alter: i8, octave: i8) -> Result<Pitch> {
        if !(-2..=2).contains(&alter) {
            return Err(Error::InvalidScore(format!("alter {alter} outside -2..=2")));
        }
        let midi = 12 * (octave as i32 + 1) + step.semitone() + alter as i32;
        if !(0..=127).contains(&midi) {
            return Err(Error::InvalidScore(format!(
                "pitch {}{}{} outside the MIDI range",
                step.letter(),
                alter,
                octave
            )));
        }
        Ok(Pitch {
            step,
            alter,
            octave,
            midi: midi as u8,
        })
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn alter(&self) -> i8 {
        self.alter
    }

    pub fn octave(&self) -> i8 {
        self.octave
    }

    pub fn midi(&self) -> u8 {
        self.midi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Articulation {
    Accent,
    Staccato,
    Fermata,
    Marcato,
}

impl Articulation {
    pub fn name(self) -> &'static str {
        match self {
            Articulation::Accent => "accent",
            Articulation::Staccato => "staccato",
            Articulation::Fermata => "fermata",
            Articulation::Marcato => "marcato",
        }
    }

    pub fn from_name(s: &str) -> Option<Articulation> {
        Some(match s {
            "accent" => Articulation::Accent,
            "staccato" => Articulation::Staccato,
            "fermata" => Articulation::Fermata,
            "marcato" => Articulation::Marcato,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteEvent {
    pub onset: Beat,
    pub duration: Beat,
    pub pitch: Pitch,
    pub voice: u32,
    pub articulations: BTreeSet<Articulation>,
    /// Set only when a tie stop had no matching start to merge into.
    pub tied_from_previous: bool,
}

impl NoteEvent {
    pub fn end(&self) -> Beat {
        self.onset + self.duration
    }

    pub fn sounds_at(&self, t: Beat) -> bool {
        self.onset <= t && t < self.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Ppp,
    Pp,
    P,
    Mp,
    Mf,
    F,
    Ff,
    Fff,
}

impl Level {
    pub const ALL: [Level; 8] = [
        Level::Ppp,
        Level::Pp,
        Level::P,
        Level::Mp,
        Level::Mf,
        Level::F,
        Level::Ff,
        Level::Fff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Level::Ppp => "ppp",
            Level::Pp => "pp",
            Level::P => "p",
            Level::Mp => "mp",
            Level::Mf => "mf",
            Level::F => "f",
            Level::Ff => "ff",
            Level::Fff => "fff",
        }
    }

    pub fn from_name(s: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Crescendo,
    Diminuendo,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Crescendo => "crescendo",
            Direction::Diminuendo => "diminuendo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ImpulseSymbol {
    Sfz,
    Fp,
    Accent,
    Marcato,
}

impl ImpulseSymbol {
    pub fn name(self) -> &'static str {
        match self {
            ImpulseSymbol::Sfz => "sfz",
            ImpulseSymbol::Fp => "fp",
            ImpulseSymbol::Accent => "accent",
            ImpulseSymbol::Marcato => "marcato",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MarkingKind {
    Constant(Level),
    Gradual(Direction),
    Impulsive(ImpulseSymbol),
}

impl MarkingKind {
    /// Feature name under which the marking appears in a basis matrix.
    pub fn feature(self) -> String {
        match self {
            MarkingKind::Constant(l) => format!("dyn.{}", l.name()),
            MarkingKind::Gradual(d) => format!("dyn.{}", d.name()),
            MarkingKind::Impulsive(s) => format!("dyn.{}", s.name()),
        }
    }

    pub fn from_name(s: &str) -> Option<MarkingKind> {
        if let Some(l) = Level::from_name(s) {
            return Some(MarkingKind::Constant(l));
        }
        Some(match s {
            "crescendo" => MarkingKind::Gradual(Direction::Crescendo),
            "diminuendo" => MarkingKind::Gradual(Direction::Diminuendo),
            "sfz" => MarkingKind::Impulsive(ImpulseSymbol::Sfz),
            "fp" => MarkingKind::Impulsive(ImpulseSymbol::Fp),
            "accent" => MarkingKind::Impulsive(ImpulseSymbol::Accent),
            "marcato" => MarkingKind::Impulsive(ImpulseSymbol::Marcato),
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MarkingKind::Constant(l) => l.name(),
            MarkingKind::Gradual(d) => d.name(),
            MarkingKind::Impulsive(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicMarking {
    pub kind: MarkingKind,
    pub anchor: Beat,
    /// Constant: next constant marking of the part or the piece end.
    /// Gradual: end of the wedge or word span. Impulsive: equal to `anchor`.
    pub extent_end: Beat,
}

impl DynamicMarking {
    /// Step membership `[anchor, extent_end)`.
    pub fn covers(&self, t: Beat) -> bool {
        self.anchor <= t && t < self.extent_end
    }

    /// Ramp value rising 0 → 1 over `[anchor, extent_end]`; `None` outside the span.
    pub fn ramp_at(&self, t: Beat) -> Option<f64> {
        if t < self.anchor || t > self.extent_end {
            return None;
        }
        let span = self.extent_end - self.anchor;
        if span.is_zero() {
            return Some(1.0);
        }
        Some(crate::beat::to_f64((t - self.anchor) / span))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub position: Beat,
    pub numerator: u32,
    pub denominator: u32,
}

impl TimeSignature {
    pub fn beat_length(&self) -> Beat {
        Beat::new(4, self.denominator as i64)
    }

    pub fn bar_length(&self) -> Beat {
        self.beat_length() * self.numerator as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartScore {
    pub part_id: String,
    pub part_name: String,
    pub instrument_class: String,
    pub notes: Vec<NoteEvent>,
    pub markings: Vec<DynamicMarking>,
    pub time_signatures: Vec<TimeSignature>,
    pub repeat_signs: Vec<Beat>,
    /// Start of every notated measure; empty when the part was built by hand,
    /// in which case bars are derived from the time signatures.
    pub measure_starts: Vec<Beat>,
    /// Notated end of the part.
    pub end: Beat,
}

impl PartScore {
    /// Time signature in force at `t`.
    pub fn meter_at(&self, t: Beat) -> Option<&TimeSignature> {
        self.time_signatures.iter().rev().find(|ts| ts.position <= t)
    }

    /// Start of the bar containing `t`.
    pub fn bar_start(&self, t: Beat) -> Option<Beat> {
        if !self.measure_starts.is_empty() {
            return self.measure_starts.iter().rev().find(|&&m| m <= t).copied();
        }
        let ts = self.meter_at(t)?;
        let bar = ts.bar_length();
        if bar.is_zero() {
            return None;
        }
        let bars = ((t - ts.position) / bar).floor();
        Some(ts.position + bars * bar)
    }

    /// 1-based metrical beat index when `t` falls exactly on a beat of the bar.
    pub fn beat_in_bar(&self, t: Beat) -> Option<u32> {
        let ts = self.meter_at(t)?;
        let offset = t - self.bar_start(t)?;
        let q = offset / ts.beat_length();
        if !q.is_integer() {
            return None;
        }
        let index = q.to_integer() + 1;
        (1..=ts.numerator as i64)
            .contains(&index)
            .then_some(index as u32)
    }

    /// Bar starts up to `end`, measured or derived from the meter.
    pub fn bar_lines(&self) -> Vec<Beat> {
        if !self.measure_starts.is_empty() {
            return self.measure_starts.clone();
        }
        let mut bars = Vec::new();
        for (i, ts) in self.time_signatures.iter().enumerate() {
            let until = self
                .time_signatures
                .get(i + 1)
                .map(|n| n.position)
                .unwrap_or(self.end);
            let mut t = ts.position;
            let len = ts.bar_length();
            if len.is_zero() {
                continue;
            }
            while t < until {
                bars.push(t);
                t += len;
            }
        }
        bars
    }

    pub fn onsets(&self) -> Vec<Beat> {
        let mut v: Vec<Beat> = self.notes.iter().map(|n| n.onset).collect();
        v.dedup();
        v
    }

    pub(crate) fn sort_notes(&mut self) {
        self.notes
            .sort_by(|a, b| (a.onset, a.pitch.midi()).cmp(&(b.onset, b.pitch.midi())));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub title: String,
    pub parts: Vec<PartScore>,
    onset_grid: Vec<Beat>,
}

impl Score {
    pub fn new(title: impl Into<String>, mut parts: Vec<PartScore>) -> Score {
        for p in &mut parts {
            p.sort_notes();
        }
        let grid: BTreeSet<Beat> = parts
            .iter()
            .flat_map(|p| p.notes.iter().map(|n| n.onset))
            .collect();
        Score {
            title: title.into(),
            parts,
            onset_grid: grid.into_iter().collect(),
        }
    }

    /// Sorted distinct onsets of all parts.
    pub fn onset_grid(&self) -> &[Beat] {
        &self.onset_grid
    }

    pub fn end(&self) -> Beat {
        self.parts.iter().map(|p| p.end).max().unwrap_or_else(|| whole(0))
    }

    /// Bar lines of the first part, used for axis labels.
    pub fn bar_lines(&self) -> Vec<Beat> {
        self.parts.first().map(|p| p.bar_lines()).unwrap_or_default()
    }
}

/// Strictly increasing union of every part's note onsets.
pub fn score_onsets(score: &Score) -> Result<Vec<Beat>> {
    if score.onset_grid.is_empty() {
        return Err(Error::InvalidScore("no notes".into()));
    }
    Ok(score.onset_grid.clone())
}

/// Resolves constant-marking extents to the next constant marking of the part
/// (or `piece_end`), and open-ended gradual markings to the next constant or
/// gradual anchor.
///
/// `open_gradual` flags gradual markings whose end is not yet known.
pub(crate) fn resolve_extents(
    markings: &mut Vec<DynamicMarking>,
    open_gradual: &[bool],
    piece_end: Beat,
) -> Result<()> {
    debug_assert_eq!(markings.len(), open_gradual.len());
    let mut tagged: Vec<(DynamicMarking, bool)> =
        markings.drain(..).zip(open_gradual.iter().copied()).collect();
    tagged.sort_by(|a, b| (a.0.anchor, a.0.kind).cmp(&(b.0.anchor, b.0.kind)));
    tagged.dedup_by(|a, b| a.0.kind == b.0.kind && a.0.anchor == b.0.anchor);

    let constants: Vec<Beat> = tagged
        .iter()
        .filter(|(m, _)| matches!(m.kind, MarkingKind::Constant(_)))
        .map(|(m, _)| m.anchor)
        .collect();
    if let Some(w) = constants.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidScore(format!(
            "conflicting constant dynamic markings at beat {}",
            crate::beat::format_beat(w[0])
        )));
    }
    let boundaries: Vec<Beat> = tagged
        .iter()
        .filter(|(m, _)| !matches!(m.kind, MarkingKind::Impulsive(_)))
        .map(|(m, _)| m.anchor)
        .collect();

    for (m, open) in &mut tagged {
        match m.kind {
            MarkingKind::Constant(_) => {
                m.extent_end = constants
                    .iter()
                    .find(|&&a| a > m.anchor)
                    .copied()
                    .unwrap_or(piece_end)
                    .max(m.anchor);
            }
            MarkingKind::Gradual(_) if *open => {
                m.extent_end = boundaries
                    .iter()
                    .find(|&&a| a > m.anchor)
                    .copied()
                    .unwrap_or(piece_end)
                    .max(m.anchor);
            }
            MarkingKind::Gradual(_) => m.extent_end = m.extent_end.max(m.anchor),
            MarkingKind::Impulsive(_) => m.extent_end = m.anchor,
        }
    }
    markings.extend(tagged.into_iter().map(|(m, _)| m));
    Ok(())
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}{}", self.step.letter(), self.alter, self.octave)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::beat::whole;

    pub fn note(onset: Beat, duration: Beat, midi_step: Step, octave: i8) -> NoteEvent {
        NoteEvent {
            onset,
            duration,
            pitch: Pitch::new(midi_step, 0, octave).unwrap(),
            voice: 1,
            articulations: BTreeSet::new(),
            tied_from_previous: false,
        }
    }

    pub fn part(name: &str, notes: Vec<NoteEvent>, end: Beat) -> PartScore {
        PartScore {
            part_id: name.to_lowercase().replace(' ', "_"),
            part_name: name.into(),
            instrument_class: instrument_class(name),
            notes,
            markings: Vec::new(),
            time_signatures: vec![TimeSignature {
                position: whole(0),
                numerator: 4,
                denominator: 4,
            }],
            repeat_signs: Vec::new(),
            measure_starts: Vec::new(),
            end,
        }
    }
}
