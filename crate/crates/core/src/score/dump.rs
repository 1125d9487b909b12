//! Line-oriented text dump of a [`Score`], one record per line, tab separated.
//!
//! ```text
//! score   <title>
//! part    <id>  <name>  <class>  <end>
//! time    <position>  <numerator>  <denominator>
//! measures <start> <start> ...
//! repeat  <position>
//! note    <onset>  <duration>  <step>  <alter>  <octave>  <voice>  <articulations|->  <tied 0|1>
//! mark    <kind>  <anchor>  <extent_end>
//! ```
//!
//! Beats are written as exact rationals (`n` or `n/d`).

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{
    Articulation, DynamicMarking, MarkingKind, NoteEvent, PartScore, Pitch, Score, Step,
    TimeSignature,
};
use crate::beat::{format_beat, parse_beat, whole, Beat};
use crate::error::{Error, Result};

pub fn write_dump(score: &Score) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "score\t{}", escape(&score.title));
    for p in &score.parts {
        let _ = writeln!(
            out,
            "part\t{}\t{}\t{}\t{}",
            escape(&p.part_id),
            escape(&p.part_name),
            escape(&p.instrument_class),
            format_beat(p.end)
        );
        for ts in &p.time_signatures {
            let _ = writeln!(
                out,
                "time\t{}\t{}\t{}",
                format_beat(ts.position),
                ts.numerator,
                ts.denominator
            );
        }
        if !p.measure_starts.is_empty() {
            let starts: Vec<String> = p.measure_starts.iter().map(|b| format_beat(*b)).collect();
            let _ = writeln!(out, "measures\t{}", starts.join(" "));
        }
        for r in &p.repeat_signs {
            let _ = writeln!(out, "repeat\t{}", format_beat(*r));
        }
        for n in &p.notes {
            let arts: Vec<&str> = n.articulations.iter().map(|a| a.name()).collect();
            let _ = writeln!(
                out,
                "note\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                format_beat(n.onset),
                format_beat(n.duration),
                n.pitch.step().letter(),
                n.pitch.alter(),
                n.pitch.octave(),
                n.voice,
                if arts.is_empty() { "-".to_string() } else { arts.join(",") },
                u8::from(n.tied_from_previous)
            );
        }
        for m in &p.markings {
            let _ = writeln!(
                out,
                "mark\t{}\t{}\t{}",
                m.kind.name(),
                format_beat(m.anchor),
                format_beat(m.extent_end)
            );
        }
    }
    out
}

pub fn read_dump(text: &str) -> Result<Score> {
    let mut title = None;
    let mut parts: Vec<PartScore> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let bad = |what: &str| Error::InvalidScore(format!("dump line {lineno}: {what}"));
        let fields: Vec<&str> = line.split('\t').collect();
        let beat_at = |idx: usize| -> Result<Beat> {
            fields
                .get(idx)
                .and_then(|s| parse_beat(s))
                .ok_or_else(|| bad("bad beat value"))
        };
        let int_at = |idx: usize| -> Result<i64> {
            fields
                .get(idx)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad integer"))
        };
        match fields[0] {
            "score" => title = Some(unescape(fields.get(1).copied().unwrap_or(""))),
            "part" => {
                if fields.len() != 5 {
                    return Err(bad("part record needs 4 fields"));
                }
                parts.push(PartScore {
                    part_id: unescape(fields[1]),
                    part_name: unescape(fields[2]),
                    instrument_class: unescape(fields[3]),
                    notes: Vec::new(),
                    markings: Vec::new(),
                    time_signatures: Vec::new(),
                    repeat_signs: Vec::new(),
                    measure_starts: Vec::new(),
                    end: beat_at(4)?,
                });
            }
            tag => {
                let part = parts.last_mut().ok_or_else(|| bad("record before any part"))?;
                match tag {
                    "time" => part.time_signatures.push(TimeSignature {
                        position: beat_at(1)?,
                        numerator: int_at(2)? as u32,
                        denominator: int_at(3)? as u32,
                    }),
                    "measures" => {
                        part.measure_starts = fields
                            .get(1)
                            .unwrap_or(&"")
                            .split(' ')
                            .map(|s| parse_beat(s).ok_or_else(|| bad("bad measure start")))
                            .collect::<Result<_>>()?;
                    }
                    "repeat" => part.repeat_signs.push(beat_at(1)?),
                    "note" => {
                        if fields.len() != 9 {
                            return Err(bad("note record needs 8 fields"));
                        }
                        let step = Step::from_letter(fields[3]).ok_or_else(|| bad("bad step"))?;
                        let pitch = Pitch::new(step, int_at(4)? as i8, int_at(5)? as i8)?;
                        let articulations: BTreeSet<Articulation> = if fields[7] == "-" {
                            BTreeSet::new()
                        } else {
                            fields[7]
                                .split(',')
                                .map(|a| Articulation::from_name(a).ok_or_else(|| bad("bad articulation")))
                                .collect::<Result<_>>()?
                        };
                        part.notes.push(NoteEvent {
                            onset: beat_at(1)?,
                            duration: beat_at(2)?,
                            pitch,
                            voice: int_at(6)? as u32,
                            articulations,
                            tied_from_previous: fields[8] == "1",
                        });
                    }
                    "mark" => part.markings.push(DynamicMarking {
                        kind: fields
                            .get(1)
                            .and_then(|k| MarkingKind::from_name(k))
                            .ok_or_else(|| bad("bad marking kind"))?,
                        anchor: beat_at(2)?,
                        extent_end: beat_at(3)?,
                    }),
                    _ => return Err(bad("unknown record")),
                }
            }
        }
    }
    let title = title.ok_or_else(|| Error::InvalidScore("dump has no score record".into()))?;
    for p in &parts {
        if p.time_signatures.first().map(|t| t.position) != Some(whole(0)) {
            return Err(Error::InvalidScore(format!(
                "part {}: first time signature must sit at beat 0",
                p.part_id
            )));
        }
    }
    Ok(Score::new(title, parts))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beat::beat;
    use crate::score::{Direction, ImpulseSymbol, Level};
    use proptest::prelude::*;

    fn arb_beat() -> impl Strategy<Value = Beat> {
        (0i64..400, 1i64..=12).prop_map(|(n, d)| beat(n, d))
    }

    fn arb_note() -> impl Strategy<Value = NoteEvent> {
        (
            arb_beat(),
            (1i64..50, 1i64..=8),
            0usize..7,
            -2i8..=2,
            1i8..=7,
            1u32..4,
            proptest::collection::btree_set(0usize..4, 0..3),
            any::<bool>(),
        )
            .prop_map(|(onset, (dn, dd), step, alter, octave, voice, arts, tied)| {
                let steps = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B];
                let all = [
                    Articulation::Accent,
                    Articulation::Staccato,
                    Articulation::Fermata,
                    Articulation::Marcato,
                ];
                NoteEvent {
                    onset,
                    duration: beat(dn, dd),
                    pitch: Pitch::new(steps[step], alter, octave).unwrap(),
                    voice,
                    articulations: arts.into_iter().map(|i| all[i]).collect(),
                    tied_from_previous: tied,
                }
            })
    }

    fn arb_marking() -> impl Strategy<Value = DynamicMarking> {
        let kinds = vec![
            MarkingKind::Constant(Level::Pp),
            MarkingKind::Constant(Level::Ff),
            MarkingKind::Gradual(Direction::Crescendo),
            MarkingKind::Gradual(Direction::Diminuendo),
            MarkingKind::Impulsive(ImpulseSymbol::Sfz),
            MarkingKind::Impulsive(ImpulseSymbol::Accent),
        ];
        (proptest::sample::select(kinds), arb_beat(), arb_beat()).prop_map(|(kind, a, len)| {
            DynamicMarking {
                kind,
                anchor: a,
                extent_end: a + len,
            }
        })
    }

    fn arb_part() -> impl Strategy<Value = PartScore> {
        (
            "[A-Za-z]{1,8}( [0-9])?",
            "[ -~\t]{0,12}",
            proptest::collection::vec(arb_note(), 0..8),
            proptest::collection::vec(arb_marking(), 0..4),
            proptest::collection::vec(arb_beat(), 0..3),
            proptest::collection::vec(arb_beat(), 0..4),
            arb_beat(),
        )
            .prop_map(|(id, name, notes, markings, repeats, mut measures, end)| {
                measures.sort();
                measures.dedup();
                PartScore {
                    part_id: id,
                    instrument_class: crate::score::instrument_class(&name),
                    part_name: name,
                    notes,
                    markings,
                    time_signatures: vec![
                        TimeSignature { position: whole(0), numerator: 3, denominator: 4 },
                        TimeSignature { position: whole(9), numerator: 6, denominator: 8 },
                    ],
                    repeat_signs: repeats,
                    measure_starts: measures,
                    end,
                }
            })
    }

    proptest! {
        #[test]
        fn dump_round_trips(title in "[ -~\\t\\n\\\\]{0,20}", parts in proptest::collection::vec(arb_part(), 1..4)) {
            let score = Score::new(title, parts);
            let text = write_dump(&score);
            let back = read_dump(&text).unwrap();
            prop_assert_eq!(back, score);
        }
    }

    #[test]
    fn rejects_unknown_records() {
        assert!(read_dump("score\tx\nbogus\t1\n").is_err());
        assert!(read_dump("part\ta\tb\tc\t4\n").is_err());
    }
}
