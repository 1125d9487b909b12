//! Project files: which pieces make up a corpus, how to build their inputs
//! and targets, and the training settings. Stored as TOML.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis_matrix, read_basis_csv, FusionOp, FusionSpec};
use crate::error::{Error, Result};
use crate::eval::LooPiece;
use crate::loudness::{
    momentary_loudness, normalize_curve, read_alignment_csv, read_loudness_csv, read_target_csv, read_wav,
    sample_at_score_times, LoudnessCurve, TargetCurve, DEFAULT_BLOCK,
};
use crate::models::{ModelKind, TrainConfig};
use crate::score::{parse_score, read_dump, score_onsets, Score};

/// Where one piece's inputs and target come from. Either `basis` and
/// `target` CSVs, or a `score` with an `alignment` and one of `loudness`
/// (CSV) or `audio` (WAV). Relative paths are taken from the directory of
/// the file that names them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loudness: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySettings {
    pub top_k: usize,
    /// Heatmap window as beats, `"start"` and `"end"` (e.g. `"24"`, `"97/2"`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_end: Option<String>,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        SensitivitySettings { top_k: 12, window_start: None, window_end: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Model trained by `train`.
    pub model: ModelKind,
    /// Models evaluated by `loo`.
    pub models: Vec<ModelKind>,
    pub validation_count: usize,
    /// Fusion operator overrides by feature name.
    pub fusion: BTreeMap<String, FusionOp>,
    pub train: TrainConfig,
    pub fit: TrainConfig,
    pub sensitivity: SensitivitySettings,
    pub pieces: Vec<PieceSpec>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            output_dir: PathBuf::from("out"),
            jobs: None,
            model: ModelKind::Birnn,
            models: ModelKind::ALL.to_vec(),
            validation_count: 4,
            fusion: BTreeMap::new(),
            train: TrainConfig::default(),
            fit: TrainConfig { max_epochs: 200, patience: 10, ..TrainConfig::default() },
            sensitivity: SensitivitySettings::default(),
            pieces: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ProjectConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: PathBuf) {
        self.base_dir = dir;
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    pub fn fusion_spec(&self) -> Result<FusionSpec> {
        let mut spec = FusionSpec::default();
        for (feature, &op) in &self.fusion {
            spec.set(feature, op)?;
        }
        Ok(spec)
    }

    /// Fails on the first referenced file that does not exist.
    pub fn check_paths(&self) -> Result<()> {
        for piece in &self.pieces {
            piece.check(&self.base_dir)?;
        }
        Ok(())
    }

    pub fn load_pieces(&self) -> Result<Vec<LooPiece>> {
        let fusion = self.fusion_spec()?;
        self.pieces.iter().map(|p| p.load(&self.base_dir, &fusion)).collect()
    }
}

impl PieceSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.score, &self.audio, &self.loudness, &self.alignment, &self.basis, &self.target]
            .into_iter()
            .flatten()
    }

    pub fn check(&self, base: &Path) -> Result<()> {
        for p in self.paths() {
            let full = base.join(p);
            if !full.exists() {
                return Err(Error::io(&full, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
        }
        Ok(())
    }

    /// Builds the basis matrix and the target on its onset grid.
    pub fn load(&self, base: &Path, fusion: &FusionSpec) -> Result<LooPiece> {
        self.check(base)?;
        let at = |p: &PathBuf| base.join(p);
        let (matrix, target) = match (&self.basis, &self.target, &self.score) {
            (Some(basis), Some(target), None) => (read_basis_csv(&at(basis))?, read_target_csv(&at(target))?),
            (None, None, Some(score)) => {
                let score = load_score(&at(score))?;
                let matrix = build_basis_matrix(&score, fusion)?;
                let align = self
                    .alignment
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("piece {:?}: a score needs an alignment", self.id)))?;
                let curve = match (&self.loudness, &self.audio) {
                    (Some(l), None) => read_loudness_csv(&at(l))?,
                    (None, Some(a)) => momentary_loudness(&read_wav(&at(a))?, DEFAULT_BLOCK, DEFAULT_BLOCK)?,
                    _ => {
                        return Err(Error::Config(format!(
                            "piece {:?}: give exactly one of loudness and audio",
                            self.id
                        )))
                    }
                };
                let target = score_target(&curve, &read_alignment_csv(&at(align))?, &score)?;
                (matrix, target)
            }
            _ => {
                return Err(Error::Config(format!(
                    "piece {:?}: give either basis and target, or score with alignment",
                    self.id
                )))
            }
        };
        Ok(LooPiece { id: self.id.clone(), matrix, target })
    }
}

/// Normalized loudness sampled at the score's onsets.
pub fn score_target(
    curve: &LoudnessCurve,
    align: &crate::loudness::AlignmentMap,
    score: &Score,
) -> Result<TargetCurve> {
    let curve = if curve.normalized { curve.clone() } else { normalize_curve(curve)? };
    sample_at_score_times(&curve, align, &score_onsets(score)?)
}

/// MusicXML, or the text dump written by `parse`.
pub fn load_score(path: &Path) -> Result<Score> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let score = if text.trim_start().starts_with('<') { parse_score(&text) } else { read_dump(&text) };
    score.map_err(|e| match e {
        Error::Xml { .. } | Error::UnsupportedScore { .. } | Error::InvalidScore(_) => e,
        other => Error::format(path, other.to_string()),
    })
}
