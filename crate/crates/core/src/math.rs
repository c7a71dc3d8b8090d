//! Scalar math shims (std vs `libm`) and small statistics helpers.

use alloc::vec::Vec;

macro_rules! shim {
    ($name:ident, $libm:ident, $($arg:ident),+) => {
        #[inline]
        pub(crate) fn $name($($arg: f64),+) -> f64 {
            #[cfg(feature = "std")]
            {
                shim!(@std $name, $($arg),+)
            }
            #[cfg(not(feature = "std"))]
            {
                libm::$libm($($arg),+)
            }
        }
    };
    (@std $name:ident, $x:ident) => { $x.$name() };
    (@std $name:ident, $x:ident, $y:ident) => { $x.$name($y) };
}

shim!(sqrt, sqrt, x);
shim!(abs, fabs, x);
shim!(exp, exp, x);
shim!(round, round, x);
shim!(atan2, atan2, y, x);
shim!(hypot, hypot, x, y);

/// Arithmetic mean; 0 for an empty slice.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation; 0 for slices shorter than 1.
pub(crate) fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    sqrt(var)
}

/// Population skewness (third standardized moment).
///
/// Defined as 0 when the standard deviation falls below `std_guard`.
pub(crate) fn population_skewness(xs: &[f64], std_guard: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let sd = population_std(xs);
    if sd < std_guard {
        return 0.0;
    }
    let m3 = xs.iter().map(|x| (x - m) * (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    m3 / (sd * sd * sd)
}

/// Centered moving average with the window truncated at the borders.
///
/// `width` must be odd and at least 1. Each output value averages the input
/// over `[i - width/2, i + width/2]` clipped to the signal, dividing by the
/// actual number of samples in the clipped window, so constant signals are
/// preserved exactly.
pub(crate) fn moving_average(xs: &[f64], width: usize) -> Vec<f64> {
    debug_assert!(width % 2 == 1 && width >= 1);
    let n = xs.len();
    let half = width / 2;
    let mut out = Vec::with_capacity(n);
    // Prefix sums keep this O(n) even for wide windows.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in xs {
        acc += x;
        prefix.push(acc);
    }
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        out.push((prefix[hi] - prefix[lo]) / (hi - lo) as f64);
    }
    out
}

/// Central finite difference, with one-sided differences at the borders.
pub(crate) fn central_difference(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if n == 1 {
            0.0
        } else if i == 0 {
            xs[1] - xs[0]
        } else if i == n - 1 {
            xs[n - 1] - xs[n - 2]
        } else {
            (xs[i + 1] - xs[i - 1]) / 2.0
        };
        out.push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_preserves_constants() {
        let xs = [3.5; 40];
        let out = moving_average(&xs, 7);
        assert!(out.iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn moving_average_spreads_impulse() {
        let mut xs = [0.0; 101];
        xs[50] = 1.0;
        let out = moving_average(&xs, 5);
        for (i, &v) in out.iter().enumerate() {
            if (48..=52).contains(&i) {
                assert!((v - 0.2).abs() < 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn central_difference_of_ramp_is_one() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let d = central_difference(&xs);
        assert!(d.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn skewness_guard_kicks_in() {
        assert_eq!(population_skewness(&[2.0, 2.0, 2.0], 1e-8), 0.0);
    }
}
