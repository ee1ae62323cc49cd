//! Accuracy statistics: Wilson score intervals, relative-change arithmetic,
//! token multipliers, and the half-even display rounding used in reports.

use core::fmt;

/// z for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_964;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsError {
    /// n = 0 or correct > n.
    BadCounts,
    /// relative change undefined for a zero baseline.
    ZeroBaseline,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::BadCounts => write!(f, "invalid correct/n counts"),
            StatsError::ZeroBaseline => write!(f, "relative change undefined for zero baseline"),
        }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(correct: usize, n: usize, z: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || correct > n {
        return Err(StatsError::BadCounts);
    }
    let nf = n as f64;
    let p = correct as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Signed percentage change from `before` to `after`, unrounded.
pub fn relative_change(before: f64, after: f64) -> Result<f64, StatsError> {
    if before <= 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok((after - before) / before * 100.0)
}

/// Round to `decimals` places, ties to even.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, decimals as f64);
    let y = x * scale;
    let floor = libm::floor(y);
    let frac = y - floor;
    let rounded = if frac > 0.5 {
        floor + 1.0
    } else if frac < 0.5 {
        floor
    } else if libm::fmod(floor, 2.0) == 0.0 {
        floor
    } else {
        floor + 1.0
    };
    rounded / scale
}

/// Percentage formatted the way reports print it: half-even to one decimal,
/// explicit sign, e.g. "+78.6%".
pub fn format_signed_pct(pct: f64) -> alloc::string::String {
    let rounded = round_half_even(pct, 1);
    if rounded >= 0.0 {
        alloc::format!("+{rounded:.1}%")
    } else {
        alloc::format!("{rounded:.1}%")
    }
}

/// Ratio of a fact-scaled dataset's token total to the token-scaled 1x total
/// for the same document.
pub fn token_multiplier(fact_total: usize, token_1x_total: usize) -> Result<f64, StatsError> {
    if token_1x_total == 0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok(fact_total as f64 / token_1x_total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_zero_of_ten() {
        let (lo, hi) = wilson_interval(0, 10, Z_95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3, "{hi}");
    }

    #[test]
    fn wilson_ten_of_ten_hits_one() {
        let (lo, hi) = wilson_interval(10, 10, Z_95).unwrap();
        assert!((hi - 1.0).abs() < 1e-12, "{hi}");
        assert!(lo < 1.0);
    }

    #[test]
    fn wilson_five_of_ten_closed_form() {
        // center = (0.5 + z^2/20) / (1 + z^2/10), half = z*sqrt(0.025 + z^2/400)/(1 + z^2/10)
        let z = Z_95;
        let denom = 1.0 + z * z / 10.0;
        let center = (0.5 + z * z / 20.0) / denom;
        let half = z * libm::sqrt(0.025 + z * z / 400.0) / denom;
        let (lo, hi) = wilson_interval(5, 10, z).unwrap();
        assert!((lo - (center - half)).abs() < 1e-12);
        assert!((hi - (center + half)).abs() < 1e-12);
    }

    #[test]
    fn wilson_rejects_bad_counts() {
        assert_eq!(wilson_interval(1, 0, Z_95), Err(StatsError::BadCounts));
        assert_eq!(wilson_interval(5, 4, Z_95), Err(StatsError::BadCounts));
    }

    #[test]
    fn relative_change_basics() {
        assert_eq!(relative_change(0.5, 0.5).unwrap(), 0.0);
        assert!((relative_change(0.2, 0.3).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(relative_change(0.0, 0.3), Err(StatsError::ZeroBaseline));
    }

    #[test]
    fn ncaa_pair_rounds_to_28_1() {
        let pct = relative_change(0.242, 0.310).unwrap();
        assert_eq!(format_signed_pct(pct), "+28.1%");
    }

    #[test]
    fn half_even_ties() {
        assert_eq!(round_half_even(0.25, 1), 0.2);
        assert_eq!(round_half_even(0.35, 1), 0.4);
        assert_eq!(round_half_even(2.675, 2), 2.68); // 267.5 tie, odd floor rounds up
        assert_eq!(round_half_even(-0.25, 1), -0.2); // -2.5 ties to even -2
    }

    #[test]
    fn token_multiplier_arithmetic() {
        assert_eq!(token_multiplier(200, 100).unwrap(), 2.0);
        assert_eq!(token_multiplier(100, 100).unwrap(), 1.0);
        assert_eq!(token_multiplier(1, 0), Err(StatsError::ZeroBaseline));
    }

    proptest! {
        #[test]
        fn wilson_contains_point_estimate(n in 1usize..500, frac in 0.0f64..1.0) {
            let correct = ((n as f64) * frac) as usize;
            let (lo, hi) = wilson_interval(correct, n, Z_95).unwrap();
            let p = correct as f64 / n as f64;
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }

        #[test]
        fn relative_change_is_reciprocal_consistent(a in 0.001f64..1.0, b in 0.001f64..1.0) {
            let r_ab = relative_change(a, b).unwrap();
            let r_ba = relative_change(b, a).unwrap();
            let product = (1.0 + r_ab / 100.0) * (1.0 + r_ba / 100.0);
            prop_assert!((product - 1.0).abs() < 1e-9);
        }
    }
}
