//! Synthetic corpora with known structure, used by tests, benchmarks and
//! the examples in the README.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::{build_basis_matrix, BasisId, BasisMatrix, FusionSpec};
use crate::beat::{whole, Beat};
use crate::error::Result;
use crate::eval::LooPiece;
use crate::loudness::TargetCurve;
use crate::score::{
    instrument_class, DynamicMarking, Level, MarkingKind, NoteEvent, PartScore, Pitch, Score, Step, TimeSignature,
};

fn numeric_columns(k: usize) -> Vec<BasisId> {
    (1..=k).map(|j| BasisId::new("synth", format!("x{j:02}"))).collect()
}

fn unit_grid(n: usize) -> Vec<Beat> {
    (0..n as i64).map(whole).collect()
}

fn piece(id: String, columns: Vec<BasisId>, data: Array2<f64>, target: Array1<f64>) -> LooPiece {
    let times = unit_grid(data.nrows());
    let matrix = BasisMatrix::new(times.clone(), columns, data, FusionSpec::default()).expect("valid synthetic matrix");
    LooPiece { id, matrix, target: TargetCurve { times, values: target.to_vec() } }
}

fn gaussian(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Array2::from_shape_fn(shape, |_| normal.sample(rng))
}

/// Pieces whose targets are one exact linear function of five numeric
/// inputs. Without noise a linear model can explain them completely.
pub fn linear_corpus(pieces: usize, steps: usize, seed: u64) -> Vec<LooPiece> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 5;
    let w = Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0));
    let b = rng.random_range(-0.5..0.5);
    (0..pieces)
        .map(|i| {
            let x = gaussian((steps, k), &mut rng);
            let y = x.dot(&w) + b;
            piece(format!("linear{:02}", i + 1), numeric_columns(k), x, y)
        })
        .collect()
}

/// One piece with `k` numeric inputs and a noisy linear target.
pub fn regression_piece(steps: usize, k: usize, seed: u64) -> (BasisMatrix, TargetCurve) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0));
    let x = gaussian((steps, k), &mut rng);
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    let y = x.dot(&w) + Array1::from_shape_fn(steps, |_| noise.sample(&mut rng));
    let p = piece("regression".into(), numeric_columns(k), x, y);
    (p.matrix, p.target)
}

/// Piecewise-constant signal with levels from `levels`, segments of 4 to 16 steps.
fn segments(steps: usize, levels: &[f64], rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut out = Array1::zeros(steps);
    let mut t = 0;
    while t < steps {
        let len = rng.random_range(4..=16);
        let v = levels[rng.random_range(0..levels.len())];
        for s in t..(t + len).min(steps) {
            out[s] = v;
        }
        t += len;
    }
    out
}

/// Centred moving average over `2·radius + 1` steps, truncated at the ends.
fn smooth(x: &Array1<f64>, radius: usize) -> Array1<f64> {
    let n = x.len();
    Array1::from_shape_fn(n, |t| {
        let lo = t.saturating_sub(radius);
        let hi = (t + radius + 1).min(n);
        x.slice(ndarray::s![lo..hi]).mean().expect("non-empty window")
    })
}

/// Pieces whose target is driven by the product of two step-like inputs,
/// then smoothed over neighbouring steps, plus Gaussian noise. The product
/// is uncorrelated with either factor, so a linear model cannot use it; the
/// smoothing rewards models that see neighbouring steps.
pub fn interaction_corpus(pieces: usize, steps: usize, noise: f64, seed: u64) -> Vec<LooPiece> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise).expect("valid sigma");
    (0..pieces)
        .map(|i| {
            let a = segments(steps, &[-1.0, 1.0], &mut rng);
            let b = segments(steps, &[-1.0, 1.0], &mut rng);
            let c = Array1::from_shape_fn(steps, |_| rng.random_range(-1.0..1.0));
            let raw = &a * &b + c.mapv(|v| 0.3 * v);
            let y = smooth(&raw, 2) + Array1::from_shape_fn(steps, |_| noise.sample(&mut rng));
            let mut x = Array2::zeros((steps, 3));
            x.column_mut(0).assign(&a);
            x.column_mut(1).assign(&b);
            x.column_mut(2).assign(&c);
            piece(format!("interaction{:02}", i + 1), numeric_columns(3), x, y)
        })
        .collect()
}

const SCALE: [Step; 7] = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B];

fn level_loudness(level: Level) -> f64 {
    match level {
        Level::Ppp => -1.6,
        Level::Pp => -1.2,
        Level::P => -0.8,
        Level::Mp => -0.3,
        Level::Mf => 0.1,
        Level::F => 0.6,
        Level::Ff => 1.1,
        Level::Fff => 1.5,
    }
}

/// A single 4/4 violin part with one quarter note per beat and constant
/// dynamics given as `(start beat, level)` pairs.
pub fn dynamics_score(title: &str, sections: &[(i64, Level)], bars: i64, rng: &mut ChaCha8Rng) -> Score {
    let end = whole(4 * bars);
    let notes = (0..4 * bars)
        .map(|b| NoteEvent {
            onset: whole(b),
            duration: whole(1),
            pitch: Pitch::new(SCALE[rng.random_range(0..SCALE.len())], 0, rng.random_range(4..=5)).expect("valid pitch"),
            voice: 1,
            articulations: BTreeSet::new(),
            tied_from_previous: false,
        })
        .collect();
    let markings = sections
        .iter()
        .enumerate()
        .map(|(i, &(start, level))| DynamicMarking {
            kind: MarkingKind::Constant(level),
            anchor: whole(start),
            extent_end: sections.get(i + 1).map_or(end, |n| whole(n.0)),
        })
        .collect();
    let part = PartScore {
        part_id: "P1".into(),
        part_name: "Violin 1".into(),
        instrument_class: instrument_class("Violin 1"),
        notes,
        markings,
        time_signatures: vec![TimeSignature { position: whole(0), numerator: 4, denominator: 4 }],
        repeat_signs: Vec::new(),
        measure_starts: Vec::new(),
        end,
    };
    Score::new(title, vec![part])
}

/// Loudness implied by the marked levels, with a downbeat lift and a little
/// smoothing across section boundaries.
fn rendition(sections: &[(i64, Level)], steps: usize) -> Array1<f64> {
    let raw = Array1::from_shape_fn(steps, |t| {
        let level = sections.iter().rev().find(|(s, _)| *s as usize <= t).map_or(Level::Mf, |(_, l)| *l);
        level_loudness(level) + if t % 4 == 0 { 0.2 } else { 0.0 }
    });
    smooth(&raw, 1)
}

/// Two renditions of one passage marked p, ff, p: one plays the ff louder
/// than a typical performance, the other softer. A pretraining corpus of
/// similar violin pieces comes with it.
#[derive(Debug, Clone)]
pub struct FfScenario {
    pub score: Score,
    pub matrix: BasisMatrix,
    /// Beats where the ff is in force.
    pub ff_span: (Beat, Beat),
    pub louder: TargetCurve,
    pub softer: TargetCurve,
    pub corpus: Vec<LooPiece>,
}

impl FfScenario {
    pub fn ff_column() -> BasisId {
        BasisId::new("violin", "dyn.ff")
    }
}

pub fn ff_scenario(seed: u64) -> Result<FfScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    let bars = 16;
    let steps = 4 * bars as usize;
    let levels = [Level::Pp, Level::P, Level::Mf, Level::F, Level::Ff];
    let mut corpus = Vec::new();
    for i in 0..8 {
        let mut sections = vec![(0, Level::P)];
        let mut t = 0;
        loop {
            t += 4 * rng.random_range(2..=4);
            if t >= 4 * bars {
                break;
            }
            let prev = sections.last().expect("non-empty").1;
            let next = loop {
                let l = levels[rng.random_range(0..levels.len())];
                if l != prev {
                    break l;
                }
            };
            sections.push((t, next));
        }
        if !sections.iter().any(|s| s.1 == Level::Ff) {
            sections.push((4 * bars - 8, Level::Ff));
        }
        let score = dynamics_score(&format!("study {}", i + 1), &sections, bars, &mut rng);
        let matrix = build_basis_matrix(&score, &FusionSpec::default())?;
        let y = rendition(&sections, steps) + Array1::from_shape_fn(steps, |_| noise.sample(&mut rng));
        let target = TargetCurve { times: matrix.times().to_vec(), values: y.to_vec() };
        corpus.push(LooPiece { id: format!("study{:02}", i + 1), matrix, target });
    }

    let sections = [(0, Level::P), (24, Level::Ff), (40, Level::P)];
    let score = dynamics_score("ff passage", &sections, bars, &mut rng);
    let matrix = build_basis_matrix(&score, &FusionSpec::default())?;
    let base = rendition(&sections, steps);
    let ff_span = (whole(24), whole(40));
    let shifted = |delta: f64| {
        let values = (0..steps).map(|t| base[t] + if (24..40).contains(&t) { delta } else { 0.0 }).collect();
        TargetCurve { times: matrix.times().to_vec(), values }
    };
    Ok(FfScenario { louder: shifted(0.6), softer: shifted(-0.6), score, matrix, ff_span, corpus })
}
