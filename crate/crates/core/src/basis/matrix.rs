use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::beat::Beat;
use crate::error::{Error, Result};
use crate::score::{score_onsets, PartScore, Score};

use super::extract::{dynamic_values, extract_part_basis, NoteBasisRow};
use super::fusion::{combine, fuse, merge_instrument_class};
use super::id::{BasisId, FeatureKind, FusionSpec};

/// Features every class carries, whether or not they fire in a given piece.
const BASE_FEATURES: [&str; 8] = [
    "accent", "duration", "fermata", "ioi", "pitch", "polyphony", "repeat", "staccato",
];

/// The basis functions of a piece sampled on its onset grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    times: Vec<Beat>,
    columns: Vec<BasisId>,
    data: Array2<f64>,
    fusion: FusionSpec,
}

impl BasisMatrix {
    pub fn new(
        times: Vec<Beat>,
        columns: Vec<BasisId>,
        data: Array2<f64>,
        fusion: FusionSpec,
    ) -> Result<Self> {
        if data.dim() != (times.len(), columns.len()) {
            return Err(Error::Basis(format!(
                "data is {:?} but there are {} times and {} columns",
                data.dim(),
                times.len(),
                columns.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Basis("times must be strictly increasing".into()));
        }
        let unique: BTreeSet<&BasisId> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Basis("duplicate column ids".into()));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Basis(format!(
                "non-finite value {v} in column {} at row {i}",
                columns[j]
            )));
        }
        Ok(BasisMatrix {
            times,
            columns,
            data,
            fusion,
        })
    }

    pub fn times(&self) -> &[Beat] {
        &self.times
    }

    pub fn columns(&self) -> &[BasisId] {
        &self.columns
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn fusion(&self) -> &FusionSpec {
        &self.fusion
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn column_index(&self, id: &BasisId) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }

    pub fn column(&self, id: &BasisId) -> Option<ArrayView1<'_, f64>> {
        self.column_index(id).map(|j| self.data.column(j))
    }

    /// Re-expresses the matrix over `columns`: missing ones become zero,
    /// columns not listed are dropped and returned.
    pub fn project(&self, columns: &[BasisId]) -> (BasisMatrix, Vec<BasisId>) {
        let index: HashMap<&BasisId, usize> =
            self.columns.iter().enumerate().map(|(j, c)| (c, j)).collect();
        let mut data = Array2::zeros((self.rows(), columns.len()));
        for (k, c) in columns.iter().enumerate() {
            if let Some(&j) = index.get(c) {
                data.column_mut(k).assign(&self.data.column(j));
            }
        }
        let wanted: BTreeSet<&BasisId> = columns.iter().collect();
        let dropped = self
            .columns
            .iter()
            .filter(|c| !wanted.contains(c))
            .cloned()
            .collect();
        (
            BasisMatrix {
                times: self.times.clone(),
                columns: columns.to_vec(),
                data,
                fusion: self.fusion.clone(),
            },
            dropped,
        )
    }
}

/// Extracts, merges and fuses every instrument class of `score` and lays the
/// result on the global onset grid.
pub fn build_basis_matrix(score: &Score, spec: &FusionSpec) -> Result<BasisMatrix> {
    spec.validate()?;
    let grid = score_onsets(score)?;
    let mut classes: BTreeMap<&str, Vec<&PartScore>> = BTreeMap::new();
    for p in &score.parts {
        classes.entry(p.instrument_class.as_str()).or_default().push(p);
    }

    let mut columns: Vec<BasisId> = Vec::new();
    let mut blocks: Vec<Array2<f64>> = Vec::new();
    for (class, parts) in classes {
        let (ids, block) = class_block(class, &parts, &grid, spec)?;
        columns.extend(ids);
        blocks.push(block);
    }

    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let data = ndarray::concatenate(ndarray::Axis(1), &views)
        .map_err(|e| Error::Basis(format!("assembling blocks: {e}")))?;
    BasisMatrix::new(grid, columns, data, spec.clone())
}

fn class_block(
    class: &str,
    parts: &[&PartScore],
    grid: &[Beat],
    spec: &FusionSpec,
) -> Result<(Vec<BasisId>, Array2<f64>)> {
    let extracted: Vec<Vec<NoteBasisRow>> = parts.iter().map(|p| extract_part_basis(p)).collect();
    let merged = merge_instrument_class(&extracted, class)?;
    let fused = fuse(&merged, spec)?;

    let mut features: BTreeSet<String> = BASE_FEATURES.iter().map(|f| f.to_string()).collect();
    features.extend(fused.iter().flat_map(|r| r.values.keys().map(|k| k.feature.clone())));
    for p in parts {
        features.extend(p.markings.iter().map(|m| m.kind.feature()));
        for ts in &p.time_signatures {
            features.extend((1..=ts.numerator).map(|b| format!("beat.{b}")));
        }
    }
    let ids: Vec<BasisId> = features.into_iter().map(|f| BasisId::new(class, f)).collect();
    let time_features: Vec<(usize, &BasisId)> = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| matches!(id.kind(), FeatureKind::Step | FeatureKind::Ramp))
        .collect();

    let by_onset: BTreeMap<Beat, &NoteBasisRow> = fused.iter().map(|r| (r.onset, r)).collect();
    let mut block = Array2::zeros((grid.len(), ids.len()));
    for (i, t) in grid.iter().enumerate() {
        if let Some(row) = by_onset.get(t) {
            for (j, id) in ids.iter().enumerate() {
                block[[i, j]] = row.get(id);
            }
            continue;
        }
        let active: Vec<BTreeMap<String, f64>> =
            parts.iter().map(|p| dynamic_values(p, *t)).collect();
        for &(j, id) in &time_features {
            let present: Vec<f64> = active
                .iter()
                .filter_map(|vals| vals.get(&id.feature).copied())
                .collect();
            block[[i, j]] = combine(spec.op_for(&id.feature), true, &present, parts.len());
        }
    }
    Ok((ids, block))
}

/// Per-column mean and standard deviation of the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisStats {
    pub columns: Vec<BasisId>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BasisStats {
    pub const STD_FLOOR: f64 = 1e-8;

    /// Pooled population statistics over matrices that share one column list.
    pub fn fit(matrices: &[&BasisMatrix]) -> Result<BasisStats> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Basis("no matrices to fit statistics on".into()))?;
        let columns = first.columns.clone();
        if let Some(m) = matrices.iter().find(|m| m.columns != columns) {
            return Err(Error::Basis(format!(
                "column lists differ ({} vs {} columns)",
                m.columns.len(),
                columns.len()
            )));
        }
        let n: usize = matrices.iter().map(|m| m.rows()).sum();
        if n == 0 {
            return Err(Error::Basis("no rows to fit statistics on".into()));
        }
        let k = columns.len();
        let mut mean = vec![0.0; k];
        for m in matrices {
            for (j, col) in m.data.columns().into_iter().enumerate() {
                mean[j] += col.sum();
            }
        }
        mean.iter_mut().for_each(|s| *s /= n as f64);
        let mut var = vec![0.0; k];
        for m in matrices {
            for (j, col) in m.data.columns().into_iter().enumerate() {
                var[j] += col.iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>();
            }
        }
        let std = var
            .into_iter()
            .map(|v| (v / n as f64).sqrt().max(Self::STD_FLOOR))
            .collect();
        Ok(BasisStats { columns, mean, std })
    }

    /// Identity statistics (mean 0, std 1) for `columns`.
    pub fn identity(columns: &[BasisId]) -> BasisStats {
        BasisStats {
            columns: columns.to_vec(),
            mean: vec![0.0; columns.len()],
            std: vec![1.0; columns.len()],
        }
    }

    pub fn index_of(&self, id: &BasisId) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }

    /// Divisor applied to column `id`, 1 for impulse columns.
    pub fn scale_of(&self, id: &BasisId) -> Option<f64> {
        let j = self.index_of(id)?;
        Some(if id.kind() == FeatureKind::Impulse { 1.0 } else { self.std[j].max(Self::STD_FLOOR) })
    }
}

/// `(x - mean) / std` per column, impulse columns passed through.
pub fn standardize(matrix: &BasisMatrix, stats: &BasisStats) -> Result<BasisMatrix> {
    let index: HashMap<&BasisId, usize> =
        stats.columns.iter().enumerate().map(|(j, c)| (c, j)).collect();
    let mut data = matrix.data.clone();
    for (j, id) in matrix.columns.iter().enumerate() {
        let &s = index
            .get(id)
            .ok_or_else(|| Error::Basis(format!("statistics have no column {id}")))?;
        if id.kind() == FeatureKind::Impulse {
            continue;
        }
        let (mu, sd) = (stats.mean[s], stats.std[s].max(BasisStats::STD_FLOOR));
        data.column_mut(j).mapv_inplace(|x| (x - mu) / sd);
    }
    BasisMatrix::new(
        matrix.times.clone(),
        matrix.columns.clone(),
        data,
        matrix.fusion.clone(),
    )
}
