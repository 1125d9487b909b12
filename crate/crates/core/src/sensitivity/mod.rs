//! Gradient-times-input sensitivity of a trained model, differences between
//! two fitted models, ranking and heatmap rendering.

mod heatmap;

use std::path::Path;

use ndarray::Array2;

use crate::basis::{BasisId, BasisMatrix, FeatureKind};
use crate::beat::{beat_from_f64, format_beat, to_f64, Beat};
use crate::error::{Error, Result};
use crate::models::{Model, Params};
use crate::table::{read_table, write_table};

pub use heatmap::{render_heatmap, Heatmap, HeatmapOptions, NEGATIVE_RGB, NEUTRAL_RGB, POSITIVE_RGB};

/// One value per (grid point, basis function).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGraph {
    pub times: Vec<Beat>,
    pub columns: Vec<BasisId>,
    pub data: Array2<f64>,
}

/// `s^A − s^B` for two performances of one score.
#[derive(Debug, Clone, PartialEq)]
pub struct SdGraph {
    pub graph: SensitivityGraph,
    pub label_a: String,
    pub label_b: String,
}

impl SensitivityGraph {
    pub fn new(times: Vec<Beat>, columns: Vec<BasisId>, data: Array2<f64>) -> Result<Self> {
        if data.dim() != (times.len(), columns.len()) {
            return Err(Error::Sensitivity(format!(
                "data is {:?} but there are {} times and {} columns",
                data.dim(),
                times.len(),
                columns.len()
            )));
        }
        Ok(SensitivityGraph { times, columns, data })
    }

    pub fn column_index(&self, id: &BasisId) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }
}

/// The model's view of `matrix`: raw values projected onto the vocabulary.
fn raw_inputs(model: &Model, matrix: &BasisMatrix) -> Result<BasisMatrix> {
    let columns = model.vocabulary.columns();
    if !matrix.columns().iter().any(|c| columns.contains(c)) {
        return Err(Error::Sensitivity("score shares no basis function with the model vocabulary".into()));
    }
    let (projected, dropped) = matrix.project(columns);
    if !dropped.is_empty() {
        let names: Vec<String> = dropped.iter().map(|c| c.to_string()).collect();
        log::warn!("ignoring {} column(s) unknown to the model: {}", names.len(), names.join(", "));
    }
    Ok(projected)
}

/// `∂y_t/∂φ_{t,k}` in raw basis units, N×K over the model vocabulary.
/// For the BiRNN this is the same-step partial.
pub fn input_gradients(model: &Model, matrix: &BasisMatrix) -> Result<Array2<f64>> {
    let raw = raw_inputs(model, matrix)?;
    let x = model.vocabulary.prepare(&raw)?;
    let mut g = model.params.input_gradients(x.view());
    let stats = model.vocabulary.stats();
    for (j, id) in stats.columns.iter().enumerate() {
        let scale = stats.scale_of(id).expect("vocabulary column");
        if scale != 1.0 {
            g.column_mut(j).mapv_inplace(|v| v / scale);
        }
    }
    Ok(g)
}

/// Gradient times input. Cells with a zero input are exactly zero.
pub fn sensitivity_graph(model: &Model, matrix: &BasisMatrix) -> Result<SensitivityGraph> {
    let raw = raw_inputs(model, matrix)?;
    let grads = input_gradients(model, &raw)?;
    let mut data = grads;
    ndarray::Zip::from(&mut data).and(raw.data()).for_each(|s, &phi| {
        *s = if phi == 0.0 { 0.0 } else { *s * phi };
    });
    SensitivityGraph::new(raw.times().to_vec(), raw.columns().to_vec(), data)
}

/// Raw-unit intercept of a linear model: predictions equal the row sums of
/// its sensitivity graph plus this value.
pub fn linear_intercept(model: &Model) -> Option<f64> {
    let Params::Lin(p) = &model.params else {
        return None;
    };
    let stats = model.vocabulary.stats();
    let shift: f64 = stats
        .columns
        .iter()
        .enumerate()
        .filter(|(_, id)| id.kind() != FeatureKind::Impulse)
        .map(|(j, id)| p.w[j] * stats.mean[j] / stats.scale_of(id).expect("vocabulary column"))
        .sum();
    Some(p.b - shift)
}

/// Sensitivity difference of two models sharing one vocabulary on one score.
pub fn sd_graph(
    model_a: &Model,
    model_b: &Model,
    matrix: &BasisMatrix,
    label_a: impl Into<String>,
    label_b: impl Into<String>,
) -> Result<SdGraph> {
    if model_a.vocabulary != model_b.vocabulary {
        return Err(Error::Sensitivity("the two models do not share one vocabulary".into()));
    }
    let a = sensitivity_graph(model_a, matrix)?;
    let b = sensitivity_graph(model_b, matrix)?;
    let mut data = a.data;
    // Adding +0 turns a −0 difference into +0.
    data.zip_mut_with(&b.data, |x, &y| *x = (*x - y) + 0.0);
    Ok(SdGraph {
        graph: SensitivityGraph { data, ..a },
        label_a: label_a.into(),
        label_b: label_b.into(),
    })
}

/// Columns by mean absolute value over grid points in `[start, end)`,
/// descending, ties in column order; at most `top_k` entries.
pub fn rank_influential(graph: &SensitivityGraph, window: (Beat, Beat), top_k: usize) -> Result<Vec<(BasisId, f64)>> {
    if top_k == 0 {
        return Err(Error::Sensitivity("top_k must be at least 1".into()));
    }
    let rows: Vec<usize> = (0..graph.times.len())
        .filter(|&t| graph.times[t] >= window.0 && graph.times[t] < window.1)
        .collect();
    if rows.is_empty() {
        return Err(Error::Sensitivity(format!(
            "window [{}, {}) contains no grid point",
            format_beat(window.0),
            format_beat(window.1)
        )));
    }
    let mut scored: Vec<(BasisId, f64)> = graph
        .columns
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let sum: f64 = rows.iter().map(|&t| graph.data[[t, k]].abs()).sum();
            (id.clone(), sum / rows.len() as f64)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(top_k);
    Ok(scored)
}

pub fn write_graph_csv(graph: &SensitivityGraph, path: &Path) -> Result<()> {
    let mut header = vec!["beat".to_string()];
    header.extend(graph.columns.iter().map(|c| c.to_string()));
    let rows = graph.times.iter().zip(graph.data.rows()).map(|(&t, row)| {
        let mut r = vec![to_f64(t)];
        r.extend(row.iter().copied());
        r
    });
    write_table(path, &[], &header, rows)
}

pub fn read_graph_csv(path: &Path) -> Result<SensitivityGraph> {
    let table = read_table(path)?;
    table.expect_header(path, &["beat"])?;
    let columns = table.header[1..]
        .iter()
        .map(|h| h.parse::<BasisId>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let times = table
        .rows
        .iter()
        .map(|r| beat_from_f64(r[0]).ok_or_else(|| Error::format(path, format!("bad beat {}", r[0]))))
        .collect::<Result<Vec<_>>>()?;
    let k = columns.len();
    let data = Array2::from_shape_fn((table.rows.len(), k), |(t, j)| table.rows[t][j + 1]);
    SensitivityGraph::new(times, columns, data).map_err(|e| Error::format(path, e.to_string()))
}
