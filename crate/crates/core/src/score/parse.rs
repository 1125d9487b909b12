//! Partwise MusicXML subset reader.

use std::collections::{BTreeSet, HashMap};

use log::warn;
use roxmltree::{Document, Node};

use super::{
    instrument_class, resolve_extents, Articulation, Direction, DynamicMarking, ImpulseSymbol,
    Level, MarkingKind, NoteEvent, PartScore, Pitch, Score, Step, TimeSignature,
};
use crate::beat::{whole, Beat};
use crate::error::{Error, Result};

/// Parses a `score-partwise` document into a [`Score`].
///
/// Tick counts are converted to quarter-note beats with exact rational
/// arithmetic. Tied notes are merged, grace notes are skipped with a warning,
/// and constant dynamic markings are given their resolved extents.
pub fn parse_score(document: &str) -> Result<Score> {
    let doc = Document::parse(document).map_err(|e| Error::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    match root.tag_name().name() {
        "score-partwise" => {}
        "score-timewise" => {
            return Err(unsupported(
                "score-timewise",
                "only partwise documents are read",
            ))
        }
        other => return Err(unsupported(other, "not a MusicXML score")),
    }

    let title = child(root, "work")
        .and_then(|w| child_text(w, "work-title"))
        .or_else(|| child_text(root, "movement-title"))
        .unwrap_or_default()
        .trim()
        .to_string();

    let part_list =
        child(root, "part-list").ok_or_else(|| unsupported("part-list", "required element missing"))?;
    let names: HashMap<String, String> = part_list
        .children()
        .filter(|n| n.has_tag_name("score-part"))
        .filter_map(|sp| {
            let id = sp.attribute("id")?.to_string();
            let name = child_text(sp, "part-name")
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| id.clone());
            Some((id, name))
        })
        .collect();

    let mut raw_parts = Vec::new();
    for part in root.children().filter(|n| n.has_tag_name("part")) {
        let id = part
            .attribute("id")
            .ok_or_else(|| unsupported("part", "missing id attribute"))?
            .to_string();
        let name = names.get(&id).cloned().unwrap_or_else(|| id.clone());
        raw_parts.push(PartReader::new(id, name).read(part)?);
    }
    if raw_parts.is_empty() {
        return Err(unsupported("part", "document has no parts"));
    }

    let piece_end = raw_parts.iter().map(|p| p.part.end).max().unwrap_or_else(|| whole(0));
    let mut parts = Vec::with_capacity(raw_parts.len());
    for mut raw in raw_parts {
        resolve_extents(&mut raw.part.markings, &raw.open_gradual, piece_end).map_err(|e| {
            Error::InvalidScore(format!("part {}: {e}", raw.part.part_id))
        })?;
        parts.push(raw.part);
    }
    Ok(Score::new(title, parts))
}

fn unsupported(element: &str, message: &str) -> Error {
    Error::UnsupportedScore {
        element: element.to_string(),
        message: message.to_string(),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|n| n.text())
}

fn line_of(node: Node) -> u32 {
    node.document().text_pos_at(node.range().start).row
}

struct RawPart {
    part: PartScore,
    open_gradual: Vec<bool>,
}

struct PartReader {
    part: PartScore,
    open_gradual: Vec<bool>,
    divisions: Option<i64>,
    cursor: Beat,
    last_onset: Option<Beat>,
    /// Notes whose tie has been started but not yet stopped.
    open_ties: Vec<usize>,
    open_wedges: HashMap<String, (Direction, Beat)>,
}

impl PartReader {
    fn new(id: String, name: String) -> Self {
        let class = instrument_class(&name);
        PartReader {
            part: PartScore {
                part_id: id,
                part_name: name,
                instrument_class: class,
                notes: Vec::new(),
                markings: Vec::new(),
                time_signatures: Vec::new(),
                repeat_signs: Vec::new(),
                measure_starts: Vec::new(),
                end: whole(0),
            },
            open_gradual: Vec::new(),
            divisions: None,
            cursor: whole(0),
            last_onset: None,
            open_ties: Vec::new(),
            open_wedges: HashMap::new(),
        }
    }

    fn read(mut self, part: Node) -> Result<RawPart> {
        let mut measure_start = whole(0);
        for measure in part.children().filter(|n| n.has_tag_name("measure")) {
            self.part.measure_starts.push(measure_start);
            self.cursor = measure_start;
            self.last_onset = None;
            let mut furthest = measure_start;
            let mut right_repeat = false;

            for el in measure.children().filter(|n| n.is_element()) {
                match el.tag_name().name() {
                    "attributes" => self.attributes(el)?,
                    "note" => self.note(el)?,
                    "backup" => {
                        let d = self.duration_of(el)?;
                        self.cursor -= d;
                        self.last_onset = None;
                    }
                    "forward" => {
                        let d = self.duration_of(el)?;
                        self.cursor += d;
                        self.last_onset = None;
                    }
                    "direction" => self.direction(el)?,
                    "barline" => {
                        if let Some(rep) = child(el, "repeat") {
                            let left = el.attribute("location") == Some("left");
                            let forward = rep.attribute("direction") == Some("forward");
                            if left || forward {
                                self.part.repeat_signs.push(measure_start);
                            } else {
                                right_repeat = true;
                            }
                        }
                    }
                    _ => {}
                }
                furthest = furthest.max(self.cursor);
            }

            let mut end = furthest;
            if end == measure_start {
                if let Some(ts) = self.part.meter_at(measure_start) {
                    end = measure_start + ts.bar_length();
                }
            }
            if right_repeat {
                self.part.repeat_signs.push(end);
            }
            measure_start = end;
        }

        let note_end = self.part.notes.iter().map(|n| n.end()).max();
        self.part.end = note_end.map_or(measure_start, |e| e.max(measure_start));

        for (_, (dir, start)) in self.open_wedges.drain() {
            self.part.markings.push(DynamicMarking {
                kind: MarkingKind::Gradual(dir),
                anchor: start,
                extent_end: self.part.end,
            });
            self.open_gradual.push(false);
        }

        if self.part.time_signatures.first().map(|t| t.position) != Some(whole(0)) {
            warn!(
                "part {}: no time signature at the start, assuming 4/4",
                self.part.part_id
            );
            self.part.time_signatures.insert(
                0,
                TimeSignature {
                    position: whole(0),
                    numerator: 4,
                    denominator: 4,
                },
            );
        }
        self.part.repeat_signs.sort();
        self.part.repeat_signs.dedup();
        self.part.sort_notes();
        Ok(RawPart {
            part: self.part,
            open_gradual: self.open_gradual,
        })
    }

    fn ticks(&self, el: Node, what: &str) -> Result<Beat> {
        let divisions = self
            .divisions
            .ok_or_else(|| unsupported("divisions", &format!("{what} before any divisions (line {})", line_of(el))))?;
        let text = el.text().unwrap_or("").trim();
        let ticks: i64 = text.parse().map_err(|_| {
            Error::InvalidScore(format!("line {}: bad {what} value {text:?}", line_of(el)))
        })?;
        Ok(Beat::new(ticks, divisions))
    }

    fn duration_of(&self, el: Node) -> Result<Beat> {
        let d = child(el, "duration")
            .ok_or_else(|| unsupported("duration", &format!("missing at line {}", line_of(el))))?;
        self.ticks(d, "duration")
    }

    fn attributes(&mut self, el: Node) -> Result<()> {
        if let Some(div) = child(el, "divisions") {
            let text = div.text().unwrap_or("").trim();
            let value: f64 = text.parse().map_err(|_| {
                unsupported("divisions", &format!("unreadable value {text:?} at line {}", line_of(div)))
            })?;
            if value <= 0.0 || value.fract() != 0.0 {
                return Err(unsupported(
                    "divisions",
                    &format!("non-positive or fractional value {text:?} at line {}", line_of(div)),
                ));
            }
            self.divisions = Some(value as i64);
        }
        for time in el.children().filter(|n| n.has_tag_name("time")) {
            let beats = child_text(time, "beats").unwrap_or("");
            let beat_type = child_text(time, "beat-type").unwrap_or("");
            let numerator: Option<u32> = beats
                .split('+')
                .map(|b| b.trim().parse::<u32>().ok())
                .sum();
            let denominator = beat_type.trim().parse::<u32>().ok();
            match (numerator, denominator) {
                (Some(n), Some(d)) if n > 0 && d > 0 => {
                    let ts = TimeSignature {
                        position: self.cursor,
                        numerator: n,
                        denominator: d,
                    };
                    if self.part.time_signatures.last().map(|t| t.position) == Some(self.cursor) {
                        self.part.time_signatures.pop();
                    }
                    self.part.time_signatures.push(ts);
                }
                _ => warn!(
                    "part {}: skipping unreadable time signature {beats:?}/{beat_type:?}",
                    self.part.part_id
                ),
            }
        }
        Ok(())
    }

    fn note(&mut self, el: Node) -> Result<()> {
        if child(el, "grace").is_some() {
            warn!(
                "part {}: skipping grace note at line {}",
                self.part.part_id,
                line_of(el)
            );
            return Ok(());
        }
        let duration = self.duration_of(el)?;
        let chord = child(el, "chord").is_some();
        let onset = if chord {
            self.last_onset.unwrap_or(self.cursor)
        } else {
            let onset = self.cursor;
            self.cursor += duration;
            self.last_onset = Some(onset);
            onset
        };
        if child(el, "rest").is_some() || child(el, "cue").is_some() {
            return Ok(());
        }
        if duration <= whole(0) {
            warn!(
                "part {}: skipping zero-duration note at line {}",
                self.part.part_id,
                line_of(el)
            );
            return Ok(());
        }
        let pitch = self.pitch(el)?;
        let voice = child_text(el, "voice")
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(1);

        let notations: Vec<Node> = el.children().filter(|n| n.has_tag_name("notations")).collect();
        let mut tie_start = false;
        let mut tie_stop = false;
        let tie_nodes = el
            .children()
            .filter(|n| n.has_tag_name("tie"))
            .chain(notations.iter().flat_map(|n| n.children().filter(|c| c.has_tag_name("tied"))));
        for t in tie_nodes {
            match t.attribute("type") {
                Some("start") => tie_start = true,
                Some("stop") => tie_stop = true,
                _ => {}
            }
        }

        let mut articulations = BTreeSet::new();
        for n in &notations {
            for c in n.children().filter(|c| c.is_element()) {
                match c.tag_name().name() {
                    "fermata" => {
                        articulations.insert(Articulation::Fermata);
                    }
                    "articulations" => {
                        for a in c.children().filter(|a| a.is_element()) {
                            match a.tag_name().name() {
                                "accent" => {
                                    articulations.insert(Articulation::Accent);
                                }
                                "strong-accent" => {
                                    articulations.insert(Articulation::Marcato);
                                }
                                "staccato" | "staccatissimo" | "spiccato" => {
                                    articulations.insert(Articulation::Staccato);
                                }
                                _ => {}
                            }
                        }
                    }
                    _ => {}
                }
            }
        }

        if tie_stop {
            let found = self.open_ties.iter().rposition(|&i| {
                let n = &self.part.notes[i];
                n.pitch.midi() == pitch.midi() && n.end() == onset
            });
            if let Some(pos) = found {
                let idx = self.open_ties[pos];
                self.part.notes[idx].duration += duration;
                if !tie_start {
                    self.open_ties.remove(pos);
                }
                return Ok(());
            }
        }

        if articulations.contains(&Articulation::Marcato) {
            self.part.markings.push(DynamicMarking {
                kind: MarkingKind::Impulsive(ImpulseSymbol::Marcato),
                anchor: onset,
                extent_end: onset,
            });
            self.open_gradual.push(false);
        }
        self.part.notes.push(NoteEvent {
            onset,
            duration,
            pitch,
            voice,
            articulations,
            tied_from_previous: tie_stop,
        });
        if tie_start {
            self.open_ties.push(self.part.notes.len() - 1);
        }
        Ok(())
    }

    fn pitch(&self, el: Node) -> Result<Pitch> {
        let (p, step_tag, octave_tag) = if let Some(p) = child(el, "pitch") {
            (p, "step", "octave")
        } else if let Some(p) = child(el, "unpitched") {
            (p, "display-step", "display-octave")
        } else {
            return Err(unsupported(
                "pitch",
                &format!("note without pitch at line {}", line_of(el)),
            ));
        };
        let step = child_text(p, step_tag)
            .and_then(Step::from_letter)
            .ok_or_else(|| unsupported(step_tag, &format!("missing or invalid at line {}", line_of(p))))?;
        let octave: i8 = child_text(p, octave_tag)
            .and_then(|o| o.trim().parse().ok())
            .ok_or_else(|| unsupported(octave_tag, &format!("missing or invalid at line {}", line_of(p))))?;
        let alter = match child_text(p, "alter") {
            Some(a) => {
                let v: f64 = a.trim().parse().map_err(|_| {
                    Error::InvalidScore(format!("line {}: bad alter {a:?}", line_of(p)))
                })?;
                v.round() as i8
            }
            None => 0,
        };
        Pitch::new(step, alter, octave)
            .map_err(|e| Error::InvalidScore(format!("line {}: {e}", line_of(p))))
    }

    fn direction(&mut self, el: Node) -> Result<()> {
        let mut anchor = self.cursor;
        if let Some(off) = child(el, "offset") {
            if self.divisions.is_some() {
                anchor += self.ticks(off, "offset")?;
            }
        }
        for dt in el.children().filter(|n| n.has_tag_name("direction-type")) {
            for item in dt.children().filter(|n| n.is_element()) {
                match item.tag_name().name() {
                    "dynamics" => {
                        for d in item.children().filter(|n| n.is_element()) {
                            match dynamics_kind(d.tag_name().name()) {
                                Some(kind) => self.push_marking(kind, anchor, anchor, false),
                                None => warn!(
                                    "part {}: ignoring dynamics <{}>",
                                    self.part.part_id,
                                    d.tag_name().name()
                                ),
                            }
                        }
                    }
                    "wedge" => {
                        let number = item.attribute("number").unwrap_or("1").to_string();
                        match item.attribute("type") {
                            Some("crescendo") => {
                                self.open_wedges.insert(number, (Direction::Crescendo, anchor));
                            }
                            Some("diminuendo") => {
                                self.open_wedges.insert(number, (Direction::Diminuendo, anchor));
                            }
                            Some("stop") => match self.open_wedges.remove(&number) {
                                Some((dir, start)) => self.push_marking(
                                    MarkingKind::Gradual(dir),
                                    start.min(anchor),
                                    anchor.max(start),
                                    false,
                                ),
                                None => warn!(
                                    "part {}: wedge stop without start at line {}",
                                    self.part.part_id,
                                    line_of(item)
                                ),
                            },
                            _ => {}
                        }
                    }
                    "words" => {
                        let text = item.text().unwrap_or("").trim().to_lowercase();
                        let dir = if text.starts_with("cresc") {
                            Some(Direction::Crescendo)
                        } else if text.starts_with("dim") || text.starts_with("decresc") {
                            Some(Direction::Diminuendo)
                        } else {
                            None
                        };
                        if let Some(dir) = dir {
                            self.push_marking(MarkingKind::Gradual(dir), anchor, anchor, true);
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn push_marking(&mut self, kind: MarkingKind, anchor: Beat, end: Beat, open: bool) {
        self.part.markings.push(DynamicMarking {
            kind,
            anchor,
            extent_end: end,
        });
        self.open_gradual.push(open);
    }
}

fn dynamics_kind(tag: &str) -> Option<MarkingKind> {
    if let Some(level) = Level::from_name(tag) {
        return Some(MarkingKind::Constant(level));
    }
    Some(match tag {
        "pppp" | "ppppp" | "pppppp" => MarkingKind::Constant(Level::Ppp),
        "ffff" | "fffff" | "ffffff" => MarkingKind::Constant(Level::Fff),
        "sfz" | "sf" | "sffz" | "fz" | "rfz" | "rf" | "sfzp" => {
            MarkingKind::Impulsive(ImpulseSymbol::Sfz)
        }
        "fp" | "sfp" | "sfpp" | "pf" => MarkingKind::Impulsive(ImpulseSymbol::Fp),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beat::beat;

    fn doc(parts: &[(&str, &str, &str)]) -> String {
        let mut list = String::new();
        let mut body = String::new();
        for (id, name, measures) in parts {
            list.push_str(&format!(
                "<score-part id=\"{id}\"><part-name>{name}</part-name></score-part>"
            ));
            body.push_str(&format!("<part id=\"{id}\">{measures}</part>"));
        }
        format!(
            "<?xml version=\"1.0\"?>\n<score-partwise version=\"3.1\">\n<work><work-title>Test</work-title></work>\n<part-list>{list}</part-list>\n{body}\n</score-partwise>"
        )
    }

    const ATTRS: &str = "<attributes><divisions>2</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>";

    fn note(step: &str, octave: i32, dur: i32, extra: &str) -> String {
        format!(
            "<note><pitch><step>{step}</step><octave>{octave}</octave></pitch><duration>{dur}</duration><voice>1</voice>{extra}</note>"
        )
    }

    #[test]
    fn single_quarter_note() {
        let xml = doc(&[(
            "P1",
            "Flute",
            &format!("<measure number=\"1\">{ATTRS}{}</measure>", note("C", 4, 2, "")),
        )]);
        let score = parse_score(&xml).unwrap();
        assert_eq!(score.title, "Test");
        assert_eq!(score.parts.len(), 1);
        let n = &score.parts[0].notes;
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].onset, whole(0));
        assert_eq!(n[0].duration, whole(1));
        assert_eq!(n[0].pitch.midi(), 60);
        assert_eq!(score.parts[0].end, whole(1));
    }

    #[test]
    fn tied_half_and_quarter_become_one_note() {
        let m = format!(
            "<measure number=\"1\">{ATTRS}{}{}</measure>",
            note("G", 4, 4, "<tie type=\"start\"/><notations><tied type=\"start\"/></notations>"),
            note("G", 4, 2, "<tie type=\"stop\"/><notations><tied type=\"stop\"/></notations>"),
        );
        let score = parse_score(&doc(&[("P1", "Oboe", &m)])).unwrap();
        let n = &score.parts[0].notes;
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].duration, whole(3));
        assert!(!n[0].tied_from_previous);
    }

    #[test]
    fn ties_across_barlines_merge() {
        let m1 = format!("<measure number=\"1\">{ATTRS}{}{}</measure>", note("C", 5, 6, ""), note("E", 5, 2, "<tie type=\"start\"/>"));
        let m2 = format!("<measure number=\"2\">{}{}</measure>", note("E", 5, 4, "<tie type=\"stop\"/>"), note("D", 5, 4, ""));
        let score = parse_score(&doc(&[("P1", "Oboe", &(m1 + &m2))])).unwrap();
        let n = &score.parts[0].notes;
        assert_eq!(n.len(), 3);
        assert_eq!((n[1].onset, n[1].duration), (whole(3), whole(3)));
        assert_eq!(n[2].onset, whole(6));
    }

    #[test]
    fn chords_backup_and_triplets_use_exact_beats() {
        let m = format!(
            "<measure number=\"1\"><attributes><divisions>3</divisions></attributes>{}{}{}{}{}<backup><duration>3</duration></backup>{}</measure>",
            note("C", 4, 3, ""),
            note("E", 4, 3, "<chord/>"),
            note("D", 4, 1, ""),
            note("E", 4, 1, ""),
            note("F", 4, 1, ""),
            note("A", 3, 3, ""),
        );
        let score = parse_score(&doc(&[("P1", "Piano", &m)])).unwrap();
        let onsets: Vec<Beat> = score.parts[0].notes.iter().map(|n| n.onset).collect();
        assert_eq!(
            onsets,
            vec![whole(0), whole(0), whole(1), whole(1), beat(4, 3), beat(5, 3)]
        );
        assert_eq!(score.onset_grid(), &[whole(0), whole(1), beat(4, 3), beat(5, 3)]);
    }

    #[test]
    fn dynamics_wedges_and_words() {
        let dir = |inner: &str| format!("<direction><direction-type>{inner}</direction-type></direction>");
        let m1 = format!(
            "<measure number=\"1\">{ATTRS}{}{}{}{}{}</measure>",
            dir("<dynamics><f/></dynamics>"),
            note("C", 5, 4, ""),
            dir("<wedge type=\"diminuendo\"/>"),
            note("C", 5, 2, ""),
            note("C", 5, 2, ""),
        );
        let m2 = format!(
            "<measure number=\"2\">{}{}{}{}{}</measure>",
            dir("<wedge type=\"stop\"/>"),
            dir("<dynamics><p/></dynamics>"),
            note("C", 5, 4, ""),
            dir("<words>cresc.</words>"),
            note("C", 5, 4, "<notations><articulations><accent/></articulations></notations>"),
        );
        let m3 = format!("<measure number=\"3\">{}{}</measure>", dir("<dynamics><sfz/></dynamics>"), note("C", 5, 8, ""));
        let score = parse_score(&doc(&[("P1", "Violin I", &(m1 + &m2 + &m3))])).unwrap();
        let p = &score.parts[0];
        assert_eq!(p.instrument_class, "violin");
        let got: Vec<(String, Beat, Beat)> = p
            .markings
            .iter()
            .map(|m| (m.kind.name().to_string(), m.anchor, m.extent_end))
            .collect();
        assert_eq!(
            got,
            vec![
                ("f".into(), whole(0), whole(4)),
                ("diminuendo".into(), whole(2), whole(4)),
                ("p".into(), whole(4), whole(12)),
                ("crescendo".into(), whole(6), whole(12)),
                ("sfz".into(), whole(8), whole(8)),
            ]
        );
        assert!(p.notes[4].articulations.contains(&Articulation::Accent));
    }

    #[test]
    fn repeats_and_meter_changes() {
        let m1 = format!(
            "<measure number=\"1\"><attributes><divisions>1</divisions><time><beats>3</beats><beat-type>4</beat-type></time></attributes><barline location=\"left\"><repeat direction=\"forward\"/></barline>{}</measure>",
            note("C", 4, 3, "")
        );
        let m2 = format!(
            "<measure number=\"2\"><attributes><time><beats>2</beats><beat-type>4</beat-type></time></attributes>{}<barline location=\"right\"><repeat direction=\"backward\"/></barline></measure>",
            note("D", 4, 2, "")
        );
        let score = parse_score(&doc(&[("P1", "Horn in F", &(m1 + &m2))])).unwrap();
        let p = &score.parts[0];
        assert_eq!(p.repeat_signs, vec![whole(0), whole(5)]);
        assert_eq!(p.time_signatures.len(), 2);
        assert_eq!(p.time_signatures[1].position, whole(3));
        assert_eq!(p.measure_starts, vec![whole(0), whole(3)]);
        assert_eq!(p.beat_in_bar(whole(4)), Some(2));
    }

    #[test]
    fn grace_notes_are_skipped() {
        let m = format!(
            "<measure number=\"1\">{ATTRS}<note><grace/><pitch><step>D</step><octave>5</octave></pitch><voice>1</voice></note>{}</measure>",
            note("C", 5, 2, "")
        );
        let score = parse_score(&doc(&[("P1", "Flute", &m)])).unwrap();
        assert_eq!(score.parts[0].notes.len(), 1);
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_score("<score-partwise>\n<part-list>\n<oops></part-list>").unwrap_err();
        match err {
            Error::Xml { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_divisions_is_unsupported() {
        let m = format!("<measure number=\"1\">{}</measure>", note("C", 4, 2, ""));
        match parse_score(&doc(&[("P1", "Flute", &m)])).unwrap_err() {
            Error::UnsupportedScore { element, .. } => assert_eq!(element, "divisions"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timewise_is_rejected() {
        let err = parse_score("<score-timewise><part-list/></score-timewise>").unwrap_err();
        assert!(matches!(err, Error::UnsupportedScore { element, .. } if element == "score-timewise"));
    }

    #[test]
    fn conflicting_dynamics_at_one_beat_fail() {
        let m = format!(
            "<measure number=\"1\">{ATTRS}<direction><direction-type><dynamics><f/></dynamics></direction-type></direction><direction><direction-type><dynamics><p/></dynamics></direction-type></direction>{}</measure>",
            note("C", 5, 8, "")
        );
        assert!(matches!(
            parse_score(&doc(&[("P1", "Flute", &m)])).unwrap_err(),
            Error::InvalidScore(_)
        ));
    }

    #[test]
    fn two_oboe_parts_share_class() {
        let m = format!(
            "<measure number=\"1\">{ATTRS}<direction><direction-type><dynamics><f/></dynamics></direction-type></direction>{}{}</measure>",
            note("C", 5, 4, ""),
            note("E", 5, 4, "")
        );
        let score = parse_score(&doc(&[("P1", "Oboe 1", &m), ("P2", "Oboe 2", &m)])).unwrap();
        assert_eq!(score.parts.len(), 2);
        assert!(score.parts.iter().all(|p| p.instrument_class == "oboe"));
    }
}
