use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::basis::{standardize, BasisId, BasisMatrix, BasisStats, FusionSpec};
use crate::beat::{fmt_f64, format_beat};
use crate::error::{Error, Result};
use crate::loudness::TargetCurve;

use super::params::{ModelKind, Params};
use super::train::{fit_params, train_params, Piece, TrainConfig, TrainingLog};

/// Column list fixed at training time together with its standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    stats: BasisStats,
}

impl Vocabulary {
    pub fn new(stats: BasisStats) -> Result<Self> {
        let k = stats.columns.len();
        if stats.mean.len() != k || stats.std.len() != k {
            return Err(Error::Model("statistics do not match the column list".into()));
        }
        let unique: BTreeSet<&BasisId> = stats.columns.iter().collect();
        if unique.len() != k {
            return Err(Error::Model("duplicate vocabulary columns".into()));
        }
        Ok(Vocabulary { stats })
    }

    pub fn columns(&self) -> &[BasisId] {
        &self.stats.columns
    }

    pub fn stats(&self) -> &BasisStats {
        &self.stats
    }

    /// Projects `matrix` onto the vocabulary (zeros for missing columns,
    /// unknown columns dropped with a warning), then standardizes.
    pub fn prepare(&self, matrix: &BasisMatrix) -> Result<Array2<f64>> {
        let (projected, dropped) = matrix.project(self.columns());
        if !dropped.is_empty() {
            let names: Vec<String> = dropped.iter().map(|c| c.to_string()).collect();
            log::warn!("dropping {} column(s) unknown to the model: {}", names.len(), names.join(", "));
        }
        Ok(standardize(&projected, &self.stats)?.data().clone())
    }
}

/// A trained predictor with everything needed to apply it to a new score.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: Params,
    pub vocabulary: Vocabulary,
    pub fusion: FusionSpec,
    pub config: TrainConfig,
}

/// A basis matrix with its target, as used for training and fitting.
#[derive(Debug, Clone, Copy)]
pub struct PieceRef<'a> {
    pub matrix: &'a BasisMatrix,
    pub target: &'a TargetCurve,
}

impl<'a> PieceRef<'a> {
    pub fn new(matrix: &'a BasisMatrix, target: &'a TargetCurve) -> Self {
        PieceRef { matrix, target }
    }

    fn check(&self) -> Result<()> {
        if self.matrix.times() != self.target.times.as_slice() {
            let n = (self.matrix.rows(), self.target.times.len());
            let first = self
                .matrix
                .times()
                .iter()
                .zip(&self.target.times)
                .find(|(a, b)| a != b)
                .map(|(a, _)| format!(" (first difference at beat {})", format_beat(*a)))
                .unwrap_or_default();
            return Err(Error::Model(format!(
                "target grid ({} steps) does not match basis grid ({} steps){first}",
                n.1, n.0
            )));
        }
        Ok(())
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn predict(&self, matrix: &BasisMatrix) -> Result<Array1<f64>> {
        let x = self.vocabulary.prepare(matrix)?;
        Ok(self.params.predict(x.view()))
    }

    fn prepare_piece(&self, piece: PieceRef<'_>) -> Result<Piece> {
        prepare_piece(&self.vocabulary, piece)
    }

    /// SHA-256 of the canonical serialization without the hash field.
    pub fn content_hash(&self) -> String {
        let doc = self.document(None);
        let text = serde_json::to_string(&doc).expect("model document serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

fn prepare_piece(vocabulary: &Vocabulary, piece: PieceRef<'_>) -> Result<Piece> {
    piece.check()?;
    Ok((vocabulary.prepare(piece.matrix)?, Array1::from(piece.target.values.clone())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains a model of `kind`. The vocabulary is the sorted union of the
/// training columns and the statistics come from training data only.
pub fn train(
    kind: ModelKind,
    pieces: &[PieceRef<'_>],
    validation: &[PieceRef<'_>],
    config: &TrainConfig,
) -> Result<(Model, TrainingLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_with_rng(kind, pieces, validation, config, &mut rng)
}

pub fn train_with_rng(
    kind: ModelKind,
    pieces: &[PieceRef<'_>],
    validation: &[PieceRef<'_>],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Model, TrainingLog)> {
    config.validate()?;
    if pieces.is_empty() {
        return Err(Error::Model("empty training set".into()));
    }
    let columns: Vec<BasisId> = pieces
        .iter()
        .flat_map(|p| p.matrix.columns().iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let projected: Vec<BasisMatrix> = pieces.iter().map(|p| p.matrix.project(&columns).0).collect();
    let stats = BasisStats::fit(&projected.iter().collect::<Vec<_>>())?;
    let fusion = pieces[0].matrix.fusion().clone();
    if pieces.iter().any(|p| p.matrix.fusion() != &fusion) {
        log::warn!("training pieces were built with different fusion operators");
    }

    let vocabulary = Vocabulary::new(stats)?;
    let prepare = |p: &PieceRef<'_>| prepare_piece(&vocabulary, *p);
    let train_set = pieces.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let val_set = validation.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let (params, log) = train_params(kind, &train_set, &val_set, config, rng)?;
    Ok((Model { params, vocabulary, fusion, config: config.clone() }, log))
}

/// Fine-tunes a pretrained model to one performance, keeping its vocabulary.
pub fn fit_to_performance(
    pretrained: &Model,
    piece: PieceRef<'_>,
    config: &TrainConfig,
) -> Result<(Model, TrainingLog)> {
    let prepared = pretrained.prepare_piece(piece)?;
    let (params, log) = fit_params(&pretrained.params, &prepared, config)?;
    Ok((
        Model {
            params,
            vocabulary: pretrained.vocabulary.clone(),
            fusion: pretrained.fusion.clone(),
            config: pretrained.config.clone(),
        },
        log,
    ))
}

const FORMAT: &str = "expressdyn-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    version: u32,
    kind: ModelKind,
    hidden: usize,
    columns: Vec<BasisId>,
    mean: Box<RawValue>,
    std: Box<RawValue>,
    fusion: FusionSpec,
    config: TrainConfig,
    params: Vec<TensorDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    data: Box<RawValue>,
}

/// JSON array with every value written to 17 significant digits.
fn raw_array(values: &[f64]) -> Box<RawValue> {
    let items: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
    RawValue::from_string(format!("[{}]", items.join(","))).expect("finite numbers form valid JSON")
}

fn parse_array(raw: &RawValue, what: &str) -> Result<Vec<f64>> {
    serde_json::from_str(raw.get()).map_err(|e| Error::Model(format!("{what}: {e}")))
}

impl Model {
    fn document(&self, hash: Option<String>) -> ModelDoc {
        let stats = self.vocabulary.stats();
        ModelDoc {
            format: FORMAT.into(),
            version: VERSION,
            kind: self.kind(),
            hidden: self.params.hidden(),
            columns: stats.columns.clone(),
            mean: raw_array(&stats.mean),
            std: raw_array(&stats.std),
            fusion: self.fusion.clone(),
            config: self.config.clone(),
            params: self
                .params
                .tensors()
                .into_iter()
                .map(|t| TensorDoc { name: t.name.into(), shape: t.shape, data: raw_array(&t.data) })
                .collect(),
            hash,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.params.is_finite() {
            return Err(Error::Model("refusing to save non-finite parameters".into()));
        }
        let doc = self.document(Some(self.content_hash()));
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Model(format!("bad model file: {e}")))?;
        if doc.format != FORMAT {
            return Err(Error::Model(format!("not a model file (format {:?})", doc.format)));
        }
        if doc.version != VERSION {
            return Err(Error::Model(format!("unsupported model version {}", doc.version)));
        }
        let stats = BasisStats {
            columns: doc.columns.clone(),
            mean: parse_array(&doc.mean, "mean")?,
            std: parse_array(&doc.std, "std")?,
        };
        let tensors = doc
            .params
            .iter()
            .map(|t| Ok((t.name.clone(), t.shape.clone(), parse_array(&t.data, &t.name)?)))
            .collect::<Result<Vec<_>>>()?;
        let params = Params::from_tensors(doc.kind, &tensors)?;
        if params.inputs() != stats.columns.len() {
            return Err(Error::Model(format!(
                "parameters expect {} inputs but the vocabulary has {} columns",
                params.inputs(),
                stats.columns.len()
            )));
        }
        if params.hidden() != doc.hidden {
            return Err(Error::Model("hidden size disagrees with parameter shapes".into()));
        }
        doc.fusion.validate()?;
        let model = Model { params, vocabulary: Vocabulary::new(stats)?, fusion: doc.fusion, config: doc.config };
        if let Some(h) = doc.hash {
            let actual = model.content_hash();
            if h != actual {
                return Err(Error::Model(format!("content hash mismatch: file says {h}, content is {actual}")));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// `epoch,train_loss,val_loss`, with `NaN` when there was no validation set.
pub fn write_training_log(log: &TrainingLog, path: &Path) -> Result<()> {
    let header = ["epoch", "train_loss", "val_loss"].map(String::from);
    let rows = log
        .epochs
        .iter()
        .map(|e| vec![e.epoch as f64, e.train_loss, e.val_loss.unwrap_or(f64::NAN)]);
    let meta = [("best_epoch", log.best_epoch.to_string()), ("stopped_epoch", log.stopped_epoch.to_string())];
    crate::table::write_table(path, &meta, &header, rows)
}
