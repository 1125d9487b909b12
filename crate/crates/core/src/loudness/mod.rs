//! Block-wise K-weighted loudness of recordings and its projection onto
//! score time.

mod align;
mod io;
mod kweight;

pub use align::{sample_at_score_times, AlignmentMap, TargetCurve};
pub use io::{
    read_alignment_csv, read_loudness_csv, read_target_csv, read_wav, write_alignment_csv,
    write_loudness_csv, write_target_csv, write_wav,
};
pub use kweight::{k_weighting, Biquad, KWeighting, MAX_RATE, MIN_RATE};

use crate::error::{Error, Result};

/// Loudness assigned to blocks whose weighted power is zero.
pub const SILENCE_FLOOR: f64 = -100.0;
pub const DEFAULT_BLOCK: usize = 1024;

/// De-interleaved audio, samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        let Some(first) = channels.first() else {
            return Err(Error::Audio("no channels".into()));
        };
        if channels.iter().any(|c| c.len() != first.len()) {
            return Err(Error::Audio("channels differ in length".into()));
        }
        Ok(AudioBuffer { sample_rate, channels })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    /// Splits interleaved frames into channels.
    pub fn from_interleaved(sample_rate: u32, channels: usize, samples: &[f64]) -> Result<Self> {
        if channels == 0 || samples.len() % channels != 0 {
            return Err(Error::Audio(format!(
                "{} samples do not divide into {channels} channels",
                samples.len()
            )));
        }
        let chans = (0..channels)
            .map(|c| samples.iter().skip(c).step_by(channels).copied().collect())
            .collect();
        Self::new(sample_rate, chans)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Channel weight: 1.0 for the front channels, 1.41 for surrounds.
fn channel_weight(index: usize) -> f64 {
    if index < 3 {
        1.0
    } else {
        1.41
    }
}

/// Loudness per block, indexed by block start time.
#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessCurve {
    pub block_times: Vec<f64>,
    pub block_duration: f64,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl LoudnessCurve {
    pub fn new(block_times: Vec<f64>, block_duration: f64, values: Vec<f64>, normalized: bool) -> Result<Self> {
        if block_times.len() != values.len() {
            return Err(Error::Loudness("times and values differ in length".into()));
        }
        if block_times.is_empty() {
            return Err(Error::Loudness("empty loudness curve".into()));
        }
        if block_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Loudness("block times must be strictly increasing".into()));
        }
        if !(block_duration.is_finite() && block_duration >= 0.0) {
            return Err(Error::Loudness(format!("bad block duration {block_duration}")));
        }
        if let Some(v) = values.iter().chain(&block_times).find(|v| !v.is_finite()) {
            return Err(Error::Loudness(format!("non-finite value {v}")));
        }
        Ok(LoudnessCurve { block_times, block_duration, values, normalized })
    }

    pub fn block_centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.block_times.iter().map(|t| t + self.block_duration / 2.0)
    }

    /// Linear interpolation between block centers, ends held constant.
    pub fn value_at(&self, seconds: f64) -> f64 {
        let centers: Vec<f64> = self.block_centers().collect();
        let i = centers.partition_point(|&c| c <= seconds);
        if i == 0 {
            return self.values[0];
        }
        if i == centers.len() {
            return self.values[centers.len() - 1];
        }
        let (c0, c1) = (centers[i - 1], centers[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (seconds - c0) / (c1 - c0)
    }
}

/// Ungated K-weighted loudness of consecutive blocks; a trailing partial
/// block is discarded.
pub fn momentary_loudness(audio: &AudioBuffer, block: usize, hop: usize) -> Result<LoudnessCurve> {
    if block == 0 || hop == 0 {
        return Err(Error::Loudness("block and hop must be positive".into()));
    }
    if audio.len() < block {
        return Err(Error::Loudness(format!(
            "audio has {} samples, shorter than one block of {block}",
            audio.len()
        )));
    }
    let weighted = k_weighting(audio)?;
    let n_blocks = (audio.len() - block) / hop + 1;
    let rate = f64::from(audio.sample_rate());
    let mut times = Vec::with_capacity(n_blocks);
    let mut values = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let start = b * hop;
        let power: f64 = weighted
            .channels()
            .iter()
            .enumerate()
            .map(|(c, x)| {
                let ms = x[start..start + block].iter().map(|v| v * v).sum::<f64>() / block as f64;
                channel_weight(c) * ms
            })
            .sum();
        let l = if power > 0.0 {
            (-0.691 + 10.0 * power.log10()).max(SILENCE_FLOOR)
        } else {
            SILENCE_FLOOR
        };
        times.push(start as f64 / rate);
        values.push(l);
    }
    LoudnessCurve::new(times, block as f64 / rate, values, false)
}

/// Z-scores the curve with its own mean and population standard deviation.
pub fn normalize_curve(curve: &LoudnessCurve) -> Result<LoudnessCurve> {
    let n = curve.values.len();
    if n < 2 {
        return Err(Error::Loudness("need at least 2 blocks to normalize".into()));
    }
    let mean = curve.values.iter().sum::<f64>() / n as f64;
    let var = curve.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Loudness("constant loudness".into()));
    }
    Ok(LoudnessCurve {
        block_times: curve.block_times.clone(),
        block_duration: curve.block_duration,
        values: curve.values.iter().map(|v| (v - mean) / std).collect(),
        normalized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, rate: u32, secs: f64) -> Vec<f64> {
        let n = (f64::from(rate) * secs) as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
            .collect()
    }

    #[test]
    fn full_scale_sine_reads_the_weighted_sine_power() {
        let audio = AudioBuffer::mono(44_100, sine(1000.0, 1.0, 44_100, 2.0)).unwrap();
        let curve = momentary_loudness(&audio, 1024, 1024).unwrap();
        let gain = KWeighting::new(44_100).unwrap().gain_db(1000.0);
        let expected = -0.691 + 10.0 * 0.5f64.log10() + gain;
        let steady = &curve.values[10..];
        let mean = steady.iter().sum::<f64>() / steady.len() as f64;
        assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
        assert!(steady.iter().all(|v| (v - expected).abs() < 0.05));
    }

    #[test]
    fn amplitude_tenth_is_twenty_lu_lower() {
        let loud = AudioBuffer::mono(44_100, sine(1000.0, 1.0, 44_100, 1.0)).unwrap();
        let quiet = AudioBuffer::mono(44_100, sine(1000.0, 0.1, 44_100, 1.0)).unwrap();
        let a = momentary_loudness(&loud, 1024, 1024).unwrap();
        let b = momentary_loudness(&quiet, 1024, 1024).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stereo_duplicate_adds_three_db() {
        let x = sine(440.0, 0.3, 48_000, 0.5);
        let mono = AudioBuffer::mono(48_000, x.clone()).unwrap();
        let stereo = AudioBuffer::new(48_000, vec![x.clone(), x]).unwrap();
        let a = momentary_loudness(&mono, 1024, 1024).unwrap();
        let b = momentary_loudness(&stereo, 1024, 1024).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - 10.0 * 2f64.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn silence_hits_the_floor_and_partial_block_is_dropped() {
        let audio = AudioBuffer::mono(44_100, vec![0.0; 1024 * 3 + 500]).unwrap();
        let curve = momentary_loudness(&audio, 1024, 1024).unwrap();
        assert_eq!(curve.values, vec![SILENCE_FLOOR; 3]);
        assert_eq!(curve.block_times[1], 1024.0 / 44_100.0);
        let short = AudioBuffer::mono(44_100, vec![0.0; 1000]).unwrap();
        assert!(momentary_loudness(&short, 1024, 1024).is_err());
    }

    #[test]
    fn normalization_examples() {
        let c = LoudnessCurve::new(vec![0.0, 1.0, 2.0], 1.0, vec![-10.0, -20.0, -30.0], false).unwrap();
        let z = normalize_curve(&c).unwrap();
        let e = 1.224_744_871_391_589;
        for (got, want) in z.values.iter().zip([e, 0.0, -e]) {
            assert!((got - want).abs() < 1e-12);
        }
        let again = normalize_curve(&z).unwrap();
        for (a, b) in again.values.iter().zip(&z.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = LoudnessCurve::new(vec![0.0, 1.0], 1.0, vec![-5.0, -5.0], false).unwrap();
        assert!(normalize_curve(&flat).unwrap_err().to_string().contains("constant loudness"));
    }

    #[test]
    fn interpolates_between_block_centers() {
        let c = LoudnessCurve::new(vec![-0.5, 0.5], 1.0, vec![-10.0, -20.0], false).unwrap();
        assert_eq!(c.value_at(0.25), -12.5);
        assert_eq!(c.value_at(-3.0), -10.0);
        assert_eq!(c.value_at(7.0), -20.0);
    }

    #[test]
    fn interleaved_split() {
        let a = AudioBuffer::from_interleaved(8000, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.channels(), &[vec![1.0, 3.0], vec![2.0, 4.0]]);
        assert!(AudioBuffer::from_interleaved(8000, 2, &[1.0]).is_err());
        assert!(AudioBuffer::new(8000, vec![vec![0.0], vec![]]).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gain_shifts_every_block(g in 0.01f64..4.0, f in 60.0f64..8000.0) {
            let x = sine(f, 0.25, 22_050, 0.3);
            let y: Vec<f64> = x.iter().map(|v| v * g).collect();
            let a = momentary_loudness(&AudioBuffer::mono(22_050, x).unwrap(), 1024, 512).unwrap();
            let b = momentary_loudness(&AudioBuffer::mono(22_050, y).unwrap(), 1024, 512).unwrap();
            for (p, q) in a.values.iter().zip(&b.values) {
                prop_assert!((q - p - 20.0 * g.log10()).abs() < 1e-9);
            }
        }

        #[test]
        fn normalized_has_zero_mean_unit_std(values in prop::collection::vec(-80.0f64..0.0, 2..200)) {
            let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
            let c = LoudnessCurve::new(times, 1.0, values, false).unwrap();
            if let Ok(z) = normalize_curve(&c) {
                let n = z.values.len() as f64;
                let mean = z.values.iter().sum::<f64>() / n;
                let var = z.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}
