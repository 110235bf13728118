//! Small statistics toolkit: moments, percentile bootstrap and the
//! two-sample Kolmogorov–Smirnov statistic.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{error::input, Result};

/// A point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            lo: value,
            hi: value,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    sort_floats(&mut v);
    quantile_sorted(&v, 0.5)
}

/// Percentile interval from a set of bootstrap replicates.
pub fn percentile_interval(mut replicates: Vec<f64>, level: f64) -> (f64, f64) {
    sort_floats(&mut replicates);
    let tail = 0.5 * (1.0 - level);
    (
        quantile_sorted(&replicates, tail),
        quantile_sorted(&replicates, 1.0 - tail),
    )
}

/// Mean of `xs` with a percentile-bootstrap 95% interval.
pub fn bootstrap_mean<R: Rng + ?Sized>(xs: &[f64], n_boot: usize, rng: &mut R) -> Result<Estimate> {
    if xs.is_empty() {
        return Err(input("bootstrap of an empty sample"));
    }
    let n = xs.len();
    let reps = (0..n_boot)
        .map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let (lo, hi) = percentile_interval(reps, 0.95);
    Ok(Estimate {
        value: mean(xs),
        lo,
        hi,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_floats(&mut a);
    sort_floats(&mut b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.63 * ((na + nb) / (na * nb)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&xs), 2.5);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[5.0, 6.0]), 1.0);
        // F_a - F_b peaks at x = 0.2: 2/3 - 0
        assert!((ks_two_sample(&a, &[0.25, 0.9, 1.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_handles_ties() {
        let a = [1.0, 1.0, 2.0, 2.0];
        let b = [1.0, 2.0];
        assert_eq!(ks_two_sample(&a, &b), 0.0);
    }

    #[test]
    fn bootstrap_of_constant_is_degenerate() {
        let mut rng = stream(1, 0);
        let e = bootstrap_mean(&[3.0; 10], 200, &mut rng).unwrap();
        assert_eq!((e.value, e.lo, e.hi), (3.0, 3.0, 3.0));
        assert!(bootstrap_mean(&[], 10, &mut rng).is_err());
    }
}
