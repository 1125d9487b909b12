use std::collections::{BTreeMap, BTreeSet};

use crate::beat::Beat;
use crate::error::{Error, Result};

use super::extract::NoteBasisRow;
use super::id::{BasisId, FusionOp, FusionSpec};

/// Multiset union of the rows of several instances, relabelled under `class`.
pub fn merge_instrument_class(
    parts: &[Vec<NoteBasisRow>],
    class: &str,
) -> Result<Vec<NoteBasisRow>> {
    if parts.is_empty() {
        return Err(Error::Basis(format!("no instances to merge for class {class:?}")));
    }
    let mut merged: Vec<NoteBasisRow> = parts
        .iter()
        .flatten()
        .map(|row| NoteBasisRow {
            onset: row.onset,
            values: row
                .values
                .iter()
                .map(|(id, &v)| (BasisId::new(class, id.feature.clone()), v))
                .collect(),
        })
        .collect();
    merged.sort_by_key(|r| r.onset);
    Ok(merged)
}

/// Collapses coinciding rows into one row per onset using the operator of
/// each feature.
pub fn fuse(merged: &[NoteBasisRow], spec: &FusionSpec) -> Result<Vec<NoteBasisRow>> {
    spec.validate()?;
    let mut groups: BTreeMap<Beat, Vec<&NoteBasisRow>> = BTreeMap::new();
    for row in merged {
        groups.entry(row.onset).or_default().push(row);
    }
    Ok(groups
        .into_iter()
        .map(|(onset, rows)| NoteBasisRow {
            onset,
            values: fuse_group(&rows, spec),
        })
        .collect())
}

fn fuse_group(rows: &[&NoteBasisRow], spec: &FusionSpec) -> BTreeMap<BasisId, f64> {
    let ids: BTreeSet<&BasisId> = rows.iter().flat_map(|r| r.values.keys()).collect();
    ids.into_iter()
        .map(|id| {
            let present: Vec<f64> = rows.iter().filter_map(|r| r.values.get(id).copied()).collect();
            let v = combine(
                spec.op_for(&id.feature),
                id.kind().presence_sparse(),
                &present,
                rows.len(),
            );
            (id.clone(), v)
        })
        .collect()
}

/// `present` holds the explicit entries out of `total` candidate rows.
pub(crate) fn combine(op: FusionOp, sparse: bool, present: &[f64], total: usize) -> f64 {
    let sum: f64 = present.iter().sum();
    match op {
        FusionOp::Sum => sum,
        FusionOp::Average => {
            let n = if sparse { present.len() } else { total };
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        }
    }
}
