//! Exact score time and the decimal formatting shared by every CSV writer.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

/// Score time in quarter-note beats.
pub type Beat = Ratio<i64>;

pub fn beat(numer: i64, denom: i64) -> Beat {
    Ratio::new(numer, denom)
}

pub fn whole(n: i64) -> Beat {
    Ratio::from_integer(n)
}

pub fn to_f64(b: Beat) -> f64 {
    b.to_f64().unwrap_or(f64::NAN)
}

/// Renders `n` or `n/d`.
pub fn format_beat(b: Beat) -> String {
    if b.is_integer() {
        b.numer().to_string()
    } else {
        format!("{}/{}", b.numer(), b.denom())
    }
}

pub fn parse_beat(s: &str) -> Option<Beat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            if d == 0 {
                None
            } else {
                Some(Ratio::new(n, d))
            }
        }
        None => s.parse::<i64>().ok().map(Ratio::from_integer),
    }
}

/// Recovers a rational beat from a decimal value written with [`fmt_f64`].
///
/// Continued-fraction expansion, denominators capped at 2^16.
pub fn beat_from_f64(x: f64) -> Option<Beat> {
    if !x.is_finite() {
        return None;
    }
    const MAX_DENOM: i64 = 1 << 16;
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut frac = x;
    for _ in 0..64 {
        let a = frac.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOM {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-9 * x.abs().max(1.0) {
            return Some(Ratio::new(h1, k1));
        }
        let rem = frac - a as f64;
        if rem.is_zero() {
            break;
        }
        frac = 1.0 / rem;
    }
    if k1 == 0 {
        return None;
    }
    let approx = h1 as f64 / k1 as f64;
    ((approx - x).abs() <= 1e-9 * x.abs().max(1.0)).then(|| Ratio::new(h1, k1))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_and_parses_rationals() {
        assert_eq!(format_beat(beat(3, 2)), "3/2");
        assert_eq!(format_beat(whole(4)), "4");
        assert_eq!(parse_beat("3/2"), Some(beat(3, 2)));
        assert_eq!(parse_beat(" 7 "), Some(whole(7)));
        assert_eq!(parse_beat("1/0"), None);
    }

    #[test]
    fn recovers_thirds_from_decimal() {
        let third = beat(1, 3);
        let text = fmt_f64(to_f64(third));
        let back: f64 = text.parse().unwrap();
        assert_eq!(beat_from_f64(back), Some(third));
        assert_eq!(beat_from_f64(0.0), Some(whole(0)));
        assert_eq!(beat_from_f64(-2.5), Some(beat(-5, 2)));
    }

    proptest! {
        #[test]
        fn decimal_round_trip_is_exact(x in proptest::num::f64::NORMAL) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }

        #[test]
        fn tick_beats_survive_decimal(n in 0i64..100_000, d in 1i64..=960) {
            let b = beat(n, d);
            let back: f64 = fmt_f64(to_f64(b)).parse().unwrap();
            prop_assert_eq!(beat_from_f64(back), Some(b));
        }
    }
}
