//! Prediction metrics and leave-one-out cross-validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::BasisMatrix;
use crate::beat::fmt_f64;
use crate::error::{Error, Result};
use crate::loudness::TargetCurve;
use crate::models::{train_with_rng, ModelKind, PieceRef, TrainConfig};

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Metric(format!("prediction has {} steps, target {}", pred.len(), target.len())));
    }
    if pred.len() < 2 {
        return Err(Error::Metric("need at least two steps".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Coefficient of determination `1 − SS_res/SS_tot`. Negative when the
/// residual varies more than the target.
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let m = mean(target);
    let ss_tot: f64 = target.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("target has zero variance".into()));
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Pearson correlation, clamped to [−1, 1] against rounding.
pub fn pearson_r(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let (mp, mt) = (mean(pred), mean(target));
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let (dp, dt) = (p - mp, t - mt);
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::Metric(format!(
            "{} has zero variance",
            if vp == 0.0 { "prediction" } else { "target" }
        )));
    }
    Ok((cov / (vp * vt).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub piece_id: String,
    pub model: ModelKind,
    pub r_squared: f64,
    pub pearson_r: f64,
}

/// Result of one leave-one-out fold.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldOutcome {
    Done(MetricReport),
    Failed { piece_id: String, model: ModelKind, reason: String },
}

impl FoldOutcome {
    pub fn piece_id(&self) -> &str {
        match self {
            FoldOutcome::Done(r) => &r.piece_id,
            FoldOutcome::Failed { piece_id, .. } => piece_id,
        }
    }

    pub fn model(&self) -> ModelKind {
        match self {
            FoldOutcome::Done(r) => r.model,
            FoldOutcome::Failed { model, .. } => *model,
        }
    }

    pub fn report(&self) -> Option<&MetricReport> {
        match self {
            FoldOutcome::Done(r) => Some(r),
            FoldOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LooPiece {
    pub id: String,
    pub matrix: BasisMatrix,
    pub target: TargetCurve,
}

/// Which pieces serve which role in one fold, as indices into the
/// id-sorted piece list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub test: usize,
    pub validation: Vec<usize>,
    pub train: Vec<usize>,
}

const TRAIN_STREAM: usize = 1 << 31;

fn fold_rng(seed: u64, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64);
    rng
}

/// Holds out each piece in turn and draws `validation_count` validation
/// pieces from the rest with a per-fold seeded stream.
pub fn plan_folds(pieces: usize, validation_count: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    if pieces < 3 {
        return Err(Error::Config(format!("leave-one-out needs at least 3 pieces, got {pieces}")));
    }
    if validation_count >= pieces - 1 {
        return Err(Error::Config(format!(
            "validation_count {validation_count} leaves no training piece out of {pieces}"
        )));
    }
    Ok((0..pieces)
        .map(|test| {
            let mut rest: Vec<usize> = (0..pieces).filter(|&i| i != test).collect();
            rest.shuffle(&mut fold_rng(seed, test));
            let mut validation = rest.split_off(rest.len() - validation_count);
            validation.sort_unstable();
            rest.sort_unstable();
            FoldPlan { test, validation, train: rest }
        })
        .collect())
}

/// Runs leave-one-out for `kind`. Folds run in parallel on the current rayon
/// pool; the output is ordered by piece id. A fold whose training fails
/// numerically is reported as failed; any other error aborts.
pub fn loo_cross_validation(
    pieces: &[LooPiece],
    kind: ModelKind,
    config: &TrainConfig,
    validation_count: usize,
) -> Result<Vec<FoldOutcome>> {
    config.validate()?;
    let mut sorted: Vec<&LooPiece> = pieces.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Metric(format!("duplicate piece id {:?}", w[0].id)));
    }
    let plans = plan_folds(sorted.len(), validation_count, config.seed)?;
    plans
        .par_iter()
        .map(|plan| {
            let refs = |idx: &[usize]| -> Vec<PieceRef<'_>> {
                idx.iter().map(|&i| PieceRef::new(&sorted[i].matrix, &sorted[i].target)).collect()
            };
            let test = sorted[plan.test];
            let mut rng = fold_rng(config.seed, TRAIN_STREAM | plan.test);
            let trained = train_with_rng(kind, &refs(&plan.train), &refs(&plan.validation), config, &mut rng);
            let model = match trained {
                Ok((model, _)) => model,
                Err(e) if e.is_numerical() => {
                    log::warn!("fold {}: {e}", test.id);
                    return Ok(FoldOutcome::Failed { piece_id: test.id.clone(), model: kind, reason: e.to_string() });
                }
                Err(e) => return Err(e),
            };
            let pred = model.predict(&test.matrix)?;
            let pred = pred.as_slice().expect("contiguous prediction");
            Ok(FoldOutcome::Done(MetricReport {
                piece_id: test.id.clone(),
                model: kind,
                r_squared: r_squared(pred, &test.target.values)?,
                pearson_r: pearson_r(pred, &test.target.values)?,
            }))
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 4] = ["piece_id", "model", "r2", "r"];

/// CSV text with one row per fold; failed folds carry `NaN` metrics.
pub fn report_csv(outcomes: &[FoldOutcome]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Metric(format!("writing report: {e}"));
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for o in outcomes {
        let (r2, r) = o.report().map_or((f64::NAN, f64::NAN), |m| (m.r_squared, m.pearson_r));
        w.write_record([o.piece_id(), o.model().name(), &fmt_f64(r2), &fmt_f64(r)]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Metric(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

pub fn write_report_csv(path: &Path, outcomes: &[FoldOutcome]) -> Result<()> {
    std::fs::write(path, report_csv(outcomes)?).map_err(|e| Error::io(path, e))
}

/// Pieces as rows, R² then r for each model as columns, plus a mean row.
pub fn format_table(outcomes: &[FoldOutcome]) -> String {
    let models: Vec<ModelKind> = outcomes.iter().map(FoldOutcome::model).collect::<BTreeSet<_>>().into_iter().collect();
    let mut cells: BTreeMap<&str, BTreeMap<ModelKind, Option<(f64, f64)>>> = BTreeMap::new();
    for o in outcomes {
        let v = o.report().map(|m| (m.r_squared, m.pearson_r));
        cells.entry(o.piece_id()).or_default().insert(o.model(), v);
    }
    let id_width = cells.keys().map(|k| k.len()).chain(["piece".len(), "mean".len()]).max().unwrap_or(5);
    let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |x| format!("{x:.3}"));
    let col = 8;

    let mut out = String::new();
    let _ = write!(out, "{:<id_width$}", "");
    for metric in ["R2", "r"] {
        let span = col * models.len();
        let _ = write!(out, "  {metric:^span$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<id_width$}", "piece");
    for _ in 0..2 {
        out.push_str("  ");
        for m in &models {
            let _ = write!(out, "{:>col$}", m.name());
        }
    }
    out.push('\n');

    let mut sums: BTreeMap<ModelKind, (f64, f64, usize)> = BTreeMap::new();
    for (id, row) in &cells {
        let _ = write!(out, "{id:<id_width$}");
        for pick in [0, 1] {
            out.push_str("  ");
            for m in &models {
                let v = row.get(m).copied().flatten();
                if let (Some((r2, r)), 0) = (v, pick) {
                    let s = sums.entry(*m).or_default();
                    s.0 += r2;
                    s.1 += r;
                    s.2 += 1;
                }
                let shown = match row.get(m) {
                    None => "-".to_string(),
                    Some(_) => cell(v.map(|(r2, r)| if pick == 0 { r2 } else { r })),
                };
                let _ = write!(out, "{shown:>col$}");
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<id_width$}", "mean");
    for pick in [0, 1] {
        out.push_str("  ");
        for m in &models {
            let v = sums.get(m).filter(|s| s.2 > 0).map(|s| if pick == 0 { s.0 } else { s.1 } / s.2 as f64);
            let _ = write!(out, "{:>col$}", cell(v));
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_squared_examples() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0; 3], &t).unwrap(), 0.0);
        assert_eq!(r_squared(&[2.0, 1.0, 0.0], &t).unwrap(), -3.0);
        assert!(r_squared(&t, &[1.0; 3]).is_err());
        assert!(r_squared(&[1.0], &[1.0]).is_err());
        assert!(r_squared(&[1.0, 2.0], &t).is_err());
    }

    #[test]
    fn pearson_examples() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(pearson_r(&t, &t).unwrap(), 1.0);
        assert_eq!(pearson_r(&[-0.0, -1.0, -2.0], &t).unwrap(), -1.0);
        let r = pearson_r(&[0.0, 2.0, 3.0], &t).unwrap();
        assert!((r - (27.0f64 / 28.0).sqrt()).abs() < 1e-15, "{r}");
        assert!(pearson_r(&[1.0; 3], &t).is_err());
    }

    #[test]
    fn offset_prediction_separates_the_metrics() {
        let t = [0.3, -1.0, 2.0, 0.7];
        let p: Vec<f64> = t.iter().map(|v| v + 0.5).collect();
        assert!((pearson_r(&p, &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(r_squared(&p, &t).unwrap() < 1.0);
        let scaled: Vec<f64> = t.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_ne!(r_squared(&scaled, &t).unwrap(), r_squared(&t, &t).unwrap());
    }

    proptest! {
        #[test]
        fn metric_ranges_and_affine_invariance(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
            a in 0.1f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(r), Ok(r2)) = (pearson_r(&p, &t), r_squared(&p, &t)) {
                prop_assert!((-1.0..=1.0).contains(&r));
                prop_assert!(r2 <= 1.0);
                let pa: Vec<f64> = p.iter().map(|v| a * v + b).collect();
                let ta: Vec<f64> = t.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson_r(&pa, &t).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson_r(&p, &ta).unwrap() - r).abs() < 1e-9);
                prop_assert!((r_squared(&pa, &ta).unwrap() - r2).abs() < 1e-9);
            }
        }

        #[test]
        fn folds_are_disjoint(n in 3usize..12, v in 0usize..10, seed in any::<u64>()) {
            prop_assume!(v < n - 1);
            let plans = plan_folds(n, v, seed).unwrap();
            prop_assert_eq!(plans.len(), n);
            for (i, p) in plans.iter().enumerate() {
                prop_assert_eq!(p.test, i);
                prop_assert_eq!(p.validation.len(), v);
                prop_assert!(!p.train.is_empty());
                let mut all: Vec<usize> = p.train.iter().chain(&p.validation).copied().collect();
                prop_assert!(!all.contains(&i));
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), n - 1);
            }
            prop_assert_eq!(plans, plan_folds(n, v, seed).unwrap());
        }
    }

    #[test]
    fn fold_preconditions() {
        assert!(plan_folds(2, 0, 0).is_err());
        assert!(plan_folds(5, 4, 0).is_err());
        assert!(plan_folds(5, 3, 0).is_ok());
    }

    #[test]
    fn report_formats() {
        let outcomes = vec![
            FoldOutcome::Done(MetricReport { piece_id: "a".into(), model: ModelKind::Lin, r_squared: 0.5, pearson_r: 0.75 }),
            FoldOutcome::Failed { piece_id: "b".into(), model: ModelKind::Lin, reason: "diverged".into() },
        ];
        let csv = report_csv(&outcomes).unwrap();
        assert_eq!(
            csv,
            "piece_id,model,r2,r\na,lin,5.0000000000000000e-1,7.5000000000000000e-1\nb,lin,NaN,NaN\n"
        );
        let table = format_table(&outcomes);
        assert!(table.contains("failed"));
        assert!(table.lines().last().unwrap().starts_with("mean"));
        assert!(table.contains("0.500"));
    }
}
