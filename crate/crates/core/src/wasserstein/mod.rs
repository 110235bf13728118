//! Transport distances between equal-weight point clouds.
//!
//! Costs are the Euclidean distance and the bounded Hölder cost
//! `|x - y|^γ ∧ 1`. Exact values come from the assignment problem; on the
//! line the sorted pairing gives an upper bound (exact for the Euclidean
//! cost) and the test function `φ(x) = 2 sin(x)/x` a dual lower bound.

pub mod assignment;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::{input, param},
    exec::par_map,
    measure::EmpiricalMeasure,
    rng::{derive_seed, stream},
    stats::{percentile_interval, sort_floats, Estimate},
    Error, Result,
};

/// Largest problem handed to the assignment solver.
pub const ASSIGNMENT_CAP: usize = 2048;

/// Largest problem the permutation oracle accepts.
pub const BRUTE_FORCE_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Euclidean,
    HoelderCut { gamma: f64 },
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CostSpec::Euclidean => Ok(()),
            CostSpec::HoelderCut { gamma } if gamma > 0.0 && gamma <= 1.0 => Ok(()),
            CostSpec::HoelderCut { gamma } => Err(param(alloc::format!("gamma must lie in (0, 1], got {gamma}"))),
        }
    }

    /// Cost as a function of the Euclidean distance `r`.
    #[inline]
    pub fn of_distance(&self, r: f64) -> f64 {
        match *self {
            CostSpec::Euclidean => r,
            CostSpec::HoelderCut { gamma } => {
                if r >= 1.0 {
                    1.0
                } else {
                    r.powf(gamma)
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        self.of_distance(r)
    }

    pub fn label(&self) -> String {
        match *self {
            CostSpec::Euclidean => "euclidean".into(),
            CostSpec::HoelderCut { gamma } => alloc::format!("hoelder_cut(gamma={gamma})"),
        }
    }
}

/// Refuses the Euclidean cost for laws without a first moment.
pub fn check_cost_for_alpha(cost: &CostSpec, alpha: f64) -> Result<()> {
    cost.validate()?;
    if matches!(cost, CostSpec::Euclidean) && alpha <= 1.0 {
        return Err(param(alloc::format!(
            "W1 is infinite for alpha = {alpha} <= 1; use the hoelder_cut cost instead"
        )));
    }
    Ok(())
}

fn check_pair(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.len() != b.len() {
        return Err(input(alloc::format!("sample counts differ: {} vs {}", a.len(), b.len())));
    }
    if a.dim() != b.dim() {
        return Err(input(alloc::format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

fn check_line(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    check_pair(a, b)?;
    if a.dim() != 1 {
        return Err(input("this distance is only defined on the line (dim = 1)"));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    sort_floats(&mut v);
    v
}

/// Exact `W_1` between two equal-size samples on the line.
pub fn w1_line(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    check_line(a, b)?;
    Ok(sorted_pairing(&sorted(a.as_flat()), &sorted(b.as_flat()), &CostSpec::Euclidean))
}

fn sorted_pairing(xa: &[f64], xb: &[f64], cost: &CostSpec) -> f64 {
    xa.iter().zip(xb).map(|(x, y)| cost.of_distance((x - y).abs())).sum::<f64>() / xa.len() as f64
}

/// Cost of the monotone pairing on the line; never below the optimum.
pub fn wd_sorted_upper(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cost: &CostSpec) -> Result<f64> {
    check_line(a, b)?;
    cost.validate()?;
    Ok(sorted_pairing(&sorted(a.as_flat()), &sorted(b.as_flat()), cost))
}

/// Exact transport cost between the two empirical measures.
pub fn wd_assignment(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cost: &CostSpec) -> Result<f64> {
    wd_assignment_capped(a, b, cost, ASSIGNMENT_CAP)
}

pub fn wd_assignment_capped(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cost: &CostSpec, cap: usize) -> Result<f64> {
    check_pair(a, b)?;
    cost.validate()?;
    let n = a.len();
    if n > cap {
        return Err(input(alloc::format!(
            "{n} points exceed the assignment cap {cap}; subsample or use distance_with_ci"
        )));
    }
    let mut m = Vec::with_capacity(n * n);
    for p in a.points() {
        for q in b.points() {
            m.push(cost.eval(p, q));
        }
    }
    Ok(assignment::solve(n, &m).0 / n as f64)
}

/// Minimum average cost over all bijections, by enumeration.
pub fn brute_force_ot(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cost: &CostSpec) -> Result<f64> {
    check_pair(a, b)?;
    cost.validate()?;
    let n = a.len();
    if n > BRUTE_FORCE_MAX {
        return Err(input(alloc::format!("brute force is limited to n <= {BRUTE_FORCE_MAX}, got {n}")));
    }
    let c: Vec<f64> = a.points().flat_map(|p| b.points().map(move |q| cost.eval(p, q))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum::<f64>();
    let mut best = total(&perm);
    // Heap's algorithm
    let mut counter = alloc::vec![0usize; n];
    let mut i = 0;
    while i < n {
        if counter[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counter[i], i);
            }
            best = best.min(total(&perm));
            counter[i] += 1;
            i = 0;
        } else {
            counter[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// Named dual witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `φ(x) = ∫_{-1}^{1} cos(rx) dr = 2 sin(x)/x` of the first coordinate.
    Phi,
}

/// `φ(x) = 2 sin(x)/x`, `φ(0) = 2`. Its slope is at most 0.87.
#[inline]
pub fn phi(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // 2 (1 - x^2/6 + x^4/120)
        let x2 = x * x;
        2.0 - x2 / 3.0 + x2 * x2 / 60.0
    } else {
        2.0 * x.sin() / x
    }
}

/// `sup φ - inf φ`, rounded up. Dividing by it keeps `φ` inside `Lip(d)`
/// for the cut cost, whose values never exceed 1.
pub const PHI_CUT_NORMALISER: f64 = 2.5;

impl TestFunction {
    /// Evaluation scaled so the function is 1-Lipschitz for `cost`.
    pub fn eval(&self, x: &[f64], cost: &CostSpec) -> f64 {
        match self {
            TestFunction::Phi => match cost {
                CostSpec::Euclidean => phi(x[0]),
                CostSpec::HoelderCut { .. } => phi(x[0]) / PHI_CUT_NORMALISER,
            },
        }
    }
}

/// `|mean_a(h) - mean_b(h)|` for the witness `h`; at most the transport
/// cost under `cost`.
pub fn dual_lower_bound(a: &EmpiricalMeasure, b: &EmpiricalMeasure, test_fn: TestFunction, cost: &CostSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(input("dimensions differ"));
    }
    cost.validate()?;
    let m = |s: &EmpiricalMeasure| s.points().map(|p| test_fn.eval(p, cost)).sum::<f64>() / s.len() as f64;
    Ok((m(a) - m(b)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub n_boot: usize,
    pub cap: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            n_boot: 200,
            cap: ASSIGNMENT_CAP,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub estimate: Estimate,
    pub cost: CostSpec,
    pub n: usize,
    /// Points per assignment block (`n` when solved in one piece).
    pub block_size: usize,
    pub blocks: usize,
    pub dual_lower: f64,
    /// Sorted-pairing bound; only on the line.
    pub sorted_upper: Option<f64>,
    pub method: String,
}

/// Distance estimate with a percentile bootstrap interval.
///
/// * 1-D Euclidean: exact `W_1` by sorting; the bootstrap resamples index
///   pairs, so coupled inputs keep their pairing.
/// * otherwise, `n <= cap`: one assignment problem; each bootstrap
///   replicate re-solves a resampled problem.
/// * otherwise: after a seeded shuffle (the same for both inputs) the
///   points are cut into disjoint blocks of at most `cap` and the estimate
///   is the mean block optimum. Blocks overstate the distance of the full
///   clouds, by less as blocks grow; the interval resamples blocks.
///
/// The dual and sorted bounds are computed on the same pieces as the
/// estimate, so `dual_lower <= estimate <= sorted_upper` always holds.
pub fn distance_with_ci(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cost: &CostSpec, opts: &DistanceOptions) -> Result<DistanceReport> {
    check_pair(a, b)?;
    cost.validate()?;
    if !(opts.level > 0.0 && opts.level < 1.0) || opts.cap == 0 {
        return Err(param("confidence level must lie in (0, 1) and the cap must be positive"));
    }
    let n = a.len();
    let line = a.dim() == 1;
    let witness = TestFunction::Phi;

    if line && matches!(cost, CostSpec::Euclidean) {
        let value = w1_line(a, b)?;
        let (xa, xb) = (a.as_flat(), b.as_flat());
        let reps = par_map(opts.n_boot, |r| {
            let mut rng = stream(derive_seed(opts.seed, 0xb007), r as u64);
            let mut ra = Vec::with_capacity(n);
            let mut rb = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rand::Rng::random_range(&mut rng, 0..n);
                ra.push(xa[i]);
                rb.push(xb[i]);
            }
            sort_floats(&mut ra);
            sort_floats(&mut rb);
            sorted_pairing(&ra, &rb, cost)
        });
        return Ok(DistanceReport {
            estimate: interval(value, reps, opts.level),
            cost: *cost,
            n,
            block_size: n,
            blocks: 1,
            dual_lower: dual_lower_bound(a, b, witness, cost)?,
            sorted_upper: Some(value),
            method: "sorted_line".into(),
        });
    }

    if n <= opts.cap {
        let value = wd_assignment_capped(a, b, cost, opts.cap)?;
        let reps = par_map(opts.n_boot, |r| {
            let mut rng = stream(derive_seed(opts.seed, 0xb007), r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect();
            wd_assignment_capped(&a.select(&idx), &b.select(&idx), cost, opts.cap).unwrap_or(f64::NAN)
        });
        if reps.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("bootstrap replicate failed".into()));
        }
        return Ok(DistanceReport {
            estimate: interval(value, reps, opts.level),
            cost: *cost,
            n,
            block_size: n,
            blocks: 1,
            dual_lower: dual_lower_bound(a, b, witness, cost)?,
            sorted_upper: if line { Some(wd_sorted_upper(a, b, cost)?) } else { None },
            method: "assignment".into(),
        });
    }

    let blocks = n.div_ceil(opts.cap);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(derive_seed(opts.seed, 0x5ca1e), 0));
    let bounds: Vec<(usize, usize)> = (0..blocks).map(|k| (k * n / blocks, (k + 1) * n / blocks)).collect();
    let pieces = par_map(blocks, |k| -> Result<(f64, f64, Option<f64>)> {
        let (lo, hi) = bounds[k];
        let idx = &order[lo..hi];
        let (pa, pb) = (a.select(idx), b.select(idx));
        Ok((
            wd_assignment_capped(&pa, &pb, cost, opts.cap)?,
            dual_lower_bound(&pa, &pb, witness, cost)?,
            if line { Some(wd_sorted_upper(&pa, &pb, cost)?) } else { None },
        ))
    });
    let pieces = pieces.into_iter().collect::<Result<Vec<_>>>()?;
    // blocks differ in size by at most one point; weight by size
    let weights: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) as f64 / n as f64).collect();
    let wmean = |xs: &mut dyn Iterator<Item = f64>| xs.zip(&weights).map(|(x, w)| w * x).sum::<f64>();
    let value = wmean(&mut pieces.iter().map(|p| p.0));
    let dual = wmean(&mut pieces.iter().map(|p| p.1));
    let upper = if line { Some(wmean(&mut pieces.iter().map(|p| p.2.unwrap_or(f64::NAN)))) } else { None };
    let block_values: Vec<f64> = pieces.iter().map(|p| p.0).collect();
    let reps = par_map(opts.n_boot, |r| {
        let mut rng = stream(derive_seed(opts.seed, 0xb10c), r as u64);
        (0..blocks)
            .map(|_| block_values[rand::Rng::random_range(&mut rng, 0..blocks)])
            .sum::<f64>()
            / blocks as f64
    });
    Ok(DistanceReport {
        estimate: interval(value, reps, opts.level),
        cost: *cost,
        n,
        block_size: n / blocks,
        blocks,
        dual_lower: dual,
        sorted_upper: upper,
        method: "blocked_assignment".into(),
    })
}

fn interval(value: f64, reps: Vec<f64>, level: f64) -> Estimate {
    if reps.is_empty() {
        return Estimate::exact(value);
    }
    let (lo, hi) = percentile_interval(reps, level);
    Estimate {
        value,
        lo: lo.min(value),
        hi: hi.max(value),
    }
}
