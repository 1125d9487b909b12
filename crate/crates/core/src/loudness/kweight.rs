use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::AudioBuffer;

pub const MIN_RATE: u32 = 8_000;
pub const MAX_RATE: u32 = 192_000;

/// Second-order IIR section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Filters `x` from zero state (transposed direct form II).
    pub fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = b0 * v + s1;
                s1 = b1 * v - a1 * y + s2;
                s2 = b2 * v - a2 * y;
                y
            })
            .collect()
    }

    /// Magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * freq / rate;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -(c[1] * w.sin() + c[2] * (2.0 * w).sin());
            re.hypot(im)
        };
        eval(&self.b) / eval(&self.a)
    }
}

/// The two K-weighting stages (high shelf, then high pass) for `rate`,
/// derived from the analog prototype by the bilinear transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KWeighting {
    pub shelf: Biquad,
    pub highpass: Biquad,
    pub rate: u32,
}

impl KWeighting {
    pub fn new(rate: u32) -> Result<Self> {
        if !(MIN_RATE..=MAX_RATE).contains(&rate) {
            return Err(Error::Audio(format!(
                "unsupported sample rate {rate} Hz (expected {MIN_RATE}..={MAX_RATE})"
            )));
        }
        let fs = f64::from(rate);

        let (f0, gain_db, q) = (1681.974_450_955_531_9, 3.999_843_853_97, 0.707_175_236_955_419_3);
        let k = (PI * f0 / fs).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_155);
        let a0 = 1.0 + k / q + k * k;
        let shelf = Biquad {
            b: [
                (vh + vb * k / q + k * k) / a0,
                2.0 * (k * k - vh) / a0,
                (vh - vb * k / q + k * k) / a0,
            ],
            a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        };

        let (f0, q) = (38.135_470_876_139_82, 0.500_327_037_325_395_3);
        let k = (PI * f0 / fs).tan();
        let a0 = 1.0 + k / q + k * k;
        let highpass = Biquad {
            b: [1.0, -2.0, 1.0],
            a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        };
        Ok(KWeighting { shelf, highpass, rate })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.highpass.run(&self.shelf.run(x))
    }

    /// Combined gain in dB at `freq` Hz.
    pub fn gain_db(&self, freq: f64) -> f64 {
        let fs = f64::from(self.rate);
        20.0 * (self.shelf.magnitude(freq, fs) * self.highpass.magnitude(freq, fs)).log10()
    }
}

/// K-weights every channel of `audio` from zero state.
pub fn k_weighting(audio: &AudioBuffer) -> Result<AudioBuffer> {
    let kw = KWeighting::new(audio.sample_rate())?;
    AudioBuffer::new(
        audio.sample_rate(),
        audio.channels().iter().map(|c| kw.apply(c)).collect(),
    )
}
