use crate::beat::{format_beat, to_f64, Beat};
use crate::error::{Error, Result};

use super::LoudnessCurve;

/// Piecewise-linear map from score beats to performance seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    breakpoints: Vec<(Beat, f64)>,
}

impl AlignmentMap {
    pub fn new(breakpoints: Vec<(Beat, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Alignment("need at least 2 breakpoints".into()));
        }
        if let Some((_, s)) = breakpoints.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::Alignment(format!("non-finite time {s}")));
        }
        if let Some(w) = breakpoints
            .windows(2)
            .find(|w| !(w[0].0 < w[1].0 && w[0].1 < w[1].1))
        {
            return Err(Error::Alignment(format!(
                "breakpoints not strictly increasing at beat {}",
                format_beat(w[1].0)
            )));
        }
        Ok(AlignmentMap { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(Beat, f64)] {
        &self.breakpoints
    }

    pub fn seconds_at(&self, b: Beat) -> Result<f64> {
        let (first, last) = (self.breakpoints[0].0, self.breakpoints[self.breakpoints.len() - 1].0);
        if b < first || b > last {
            return Err(Error::Alignment(format!(
                "onset at beat {} lies outside the alignment range [{}, {}]",
                format_beat(b),
                format_beat(first),
                format_beat(last)
            )));
        }
        let i = self.breakpoints.partition_point(|(x, _)| *x <= b);
        if i == self.breakpoints.len() {
            return Ok(self.breakpoints[i - 1].1);
        }
        let ((b0, s0), (b1, s1)) = (self.breakpoints[i - 1], self.breakpoints[i]);
        Ok(s0 + (s1 - s0) * to_f64((b - b0) / (b1 - b0)))
    }
}

/// Loudness sampled at score onsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCurve {
    pub times: Vec<Beat>,
    pub values: Vec<f64>,
}

pub fn sample_at_score_times(
    curve: &LoudnessCurve,
    align: &AlignmentMap,
    onsets: &[Beat],
) -> Result<TargetCurve> {
    let values = onsets
        .iter()
        .map(|&b| align.seconds_at(b).map(|s| curve.value_at(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetCurve {
        times: onsets.to_vec(),
        values,
    })
}
