use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Level;

/// One basis-function column: an instrument class and a feature of it.
///
/// Ordered by `(class, feature)`, which is the canonical column order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisId {
    pub class: String,
    pub feature: String,
}

impl BasisId {
    pub fn new(class: impl Into<String>, feature: impl Into<String>) -> Self {
        BasisId {
            class: class.into(),
            feature: feature.into(),
        }
    }

    pub fn kind(&self) -> FeatureKind {
        feature_kind(&self.feature).unwrap_or(FeatureKind::Numeric)
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.feature)
    }
}

impl FromStr for BasisId {
    type Err = Error;

    /// Splits at the first dot; class names never contain one.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('.') {
            Some((c, f)) if !c.is_empty() && !f.is_empty() => Ok(BasisId::new(c, f)),
            _ => Err(Error::Basis(format!("column name {s:?} is not class.feature"))),
        }
    }
}

impl Serialize for BasisId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Note attribute: pitch, duration, ioi, polyphony.
    Numeric,
    /// Unit impulse in {0, 1}.
    Impulse,
    /// Region indicator in {0, 1}, a function of time.
    Step,
    /// Transition in [0, 1], a function of time.
    Ramp,
}

impl FeatureKind {
    /// Absent entries are skipped (not counted as zeros) when averaging.
    pub fn presence_sparse(self) -> bool {
        !matches!(self, FeatureKind::Numeric)
    }
}

/// Kind of a known feature name, `None` for names the extractor never emits.
pub fn feature_kind(feature: &str) -> Option<FeatureKind> {
    match feature {
        "pitch" | "duration" | "ioi" | "polyphony" => Some(FeatureKind::Numeric),
        "accent" | "staccato" | "fermata" | "repeat" => Some(FeatureKind::Impulse),
        "dyn.crescendo" | "dyn.diminuendo" => Some(FeatureKind::Ramp),
        "dyn.sfz" | "dyn.fp" | "dyn.accent" | "dyn.marcato" => Some(FeatureKind::Impulse),
        f => {
            if let Some(b) = f.strip_prefix("beat.") {
                return b
                    .parse::<u32>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .map(|_| FeatureKind::Impulse);
            }
            f.strip_prefix("dyn.")
                .and_then(Level::from_name)
                .map(|_| FeatureKind::Step)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionOp {
    Average,
    Sum,
}

impl FusionOp {
    pub fn name(self) -> &'static str {
        match self {
            FusionOp::Average => "average",
            FusionOp::Sum => "sum",
        }
    }
}

impl FromStr for FusionOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "average" | "avg" | "mean" => Ok(FusionOp::Average),
            "sum" => Ok(FusionOp::Sum),
            other => Err(Error::Basis(format!("unknown fusion operator {other:?}"))),
        }
    }
}

/// Fusion operator per feature: average by default, sum for polyphony,
/// plus user overrides. Only overrides that differ from the default are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    overrides: BTreeMap<String, FusionOp>,
}

impl FusionSpec {
    pub fn default_op(feature: &str) -> FusionOp {
        if feature == "polyphony" {
            FusionOp::Sum
        } else {
            FusionOp::Average
        }
    }

    /// Fails for features the extractor does not know.
    pub fn set(&mut self, feature: &str, op: FusionOp) -> Result<()> {
        if feature_kind(feature).is_none() {
            return Err(Error::Basis(format!(
                "fusion spec names unknown feature {feature:?}"
            )));
        }
        if op == Self::default_op(feature) {
            self.overrides.remove(feature);
        } else {
            self.overrides.insert(feature.to_string(), op);
        }
        Ok(())
    }

    pub fn with(mut self, feature: &str, op: FusionOp) -> Result<Self> {
        self.set(feature, op)?;
        Ok(self)
    }

    pub fn op_for(&self, feature: &str) -> FusionOp {
        self.overrides
            .get(feature)
            .copied()
            .unwrap_or_else(|| Self::default_op(feature))
    }

    pub fn overrides(&self) -> &BTreeMap<String, FusionOp> {
        &self.overrides
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self.overrides.keys().find(|f| feature_kind(f).is_none()) {
            Some(f) => Err(Error::Basis(format!(
                "fusion spec names unknown feature {f:?}"
            ))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_of_known_features() {
        assert_eq!(feature_kind("pitch"), Some(FeatureKind::Numeric));
        assert_eq!(feature_kind("beat.3"), Some(FeatureKind::Impulse));
        assert_eq!(feature_kind("beat.0"), None);
        assert_eq!(feature_kind("dyn.ff"), Some(FeatureKind::Step));
        assert_eq!(feature_kind("dyn.crescendo"), Some(FeatureKind::Ramp));
        assert_eq!(feature_kind("dyn.sfz"), Some(FeatureKind::Impulse));
        assert_eq!(feature_kind("timbre"), None);
    }

    #[test]
    fn fusion_defaults_and_overrides() {
        let spec = FusionSpec::default();
        assert_eq!(spec.op_for("polyphony"), FusionOp::Sum);
        assert_eq!(spec.op_for("pitch"), FusionOp::Average);
        let spec = spec.with("pitch", FusionOp::Sum).unwrap();
        assert_eq!(spec.op_for("pitch"), FusionOp::Sum);
        let spec = spec.with("pitch", FusionOp::Average).unwrap();
        assert!(spec.overrides().is_empty());
        assert!(FusionSpec::default().with("colour", FusionOp::Sum).is_err());
    }

    #[test]
    fn column_names_split_at_first_dot() {
        let id: BasisId = "violin.dyn.ff".parse().unwrap();
        assert_eq!(id, BasisId::new("violin", "dyn.ff"));
        assert_eq!(id.to_string(), "violin.dyn.ff");
        assert!("nodot".parse::<BasisId>().is_err());
    }
}
