//! Drift/diffusion models and their assumption constants.
//!
//! A model is the pair `(b, σ)` of `dX = b(X) dt + σ(X-) dL`, together with
//! [`ThetaParams`]: the Hölder order `γ`, the ellipticity/regularity constant
//! `κ0`, and the dissipativity pair `(κ1, κ2)`. The builtins are constructed
//! so that their constants can be verified by hand:
//!
//! * [`SdeModel::ou`]: `b(x) = -x`, `σ = I`.
//! * [`SdeModel::monotone_lipschitz`]: `b(x) = -a x + c sin(x)`
//!   (componentwise sine), monotone with `κ1 = a - c`.
//! * [`SdeModel::hoelder_dissipative`]: `b(x) = -x + c x min(|x|^{γ-1}, 1)`
//!   and `σ(x) = (1 + min(|x|^γ, 1) / 2) I`.
//!
//! [`check_assumptions`] is a sampled falsifier: it can report violations
//! found on a grid and on random pairs, never certify the assumptions.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{error::param, rng::stream, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipativityKind {
    /// `<x, b(x)> <= -κ1 |x|^2 + κ2`
    Dissipative,
    /// `<x - y, b(x) - b(y)> <= -κ1 |x - y|^2 + κ2`
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub alpha: f64,
    pub gamma: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kind: DissipativityKind,
}

impl ThetaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(param(alloc::format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        let floor = (1.0 - self.alpha).max(0.0);
        if !(self.gamma > floor && self.gamma <= 1.0) {
            return Err(param(alloc::format!(
                "gamma must lie in ({floor}, 1], got {}",
                self.gamma
            )));
        }
        if !(self.kappa0 > 1.0) {
            return Err(param("kappa0 must exceed 1"));
        }
        if !(self.kappa1 > 0.0 && self.kappa2 > 0.0) {
            return Err(param("kappa1 and kappa2 must be positive"));
        }
        Ok(())
    }
}

/// Drift writes `b(x)` into its output; diffusion writes the `dim × dim`
/// matrix `σ(x)` row-major.
pub type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum ModelKind {
    Ou,
    MonotoneLipschitz { a: f64, c: f64 },
    HoelderDissipative { gamma: f64, c: f64 },
    Custom { drift: Arc<VectorFn>, diffusion: Arc<VectorFn> },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Ou => write!(f, "Ou"),
            ModelKind::MonotoneLipschitz { a, c } => write!(f, "MonotoneLipschitz {{ a: {a}, c: {c} }}"),
            ModelKind::HoelderDissipative { gamma, c } => {
                write!(f, "HoelderDissipative {{ gamma: {gamma}, c: {c} }}")
            }
            ModelKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdeModel {
    name: String,
    dim: usize,
    theta: ThetaParams,
    kind: ModelKind,
}

impl SdeModel {
    /// Stable Ornstein–Uhlenbeck model `dX = -X dt + dL`.
    pub fn ou(dim: usize, alpha: f64) -> Result<Self> {
        Self::build(
            "ou",
            dim,
            ThetaParams {
                alpha,
                gamma: 1.0,
                kappa0: 2.0,
                kappa1: 1.0,
                kappa2: 1.0,
                kind: DissipativityKind::Monotone,
            },
            ModelKind::Ou,
        )
    }

    pub fn monotone_lipschitz(dim: usize, alpha: f64, a: f64, c: f64) -> Result<Self> {
        if !(a >= 2.0 && (0.0..=1.0).contains(&c)) {
            return Err(param(alloc::format!("need a >= 2 and c in [0, 1], got a = {a}, c = {c}")));
        }
        if a - c < 1.0 {
            return Err(param(alloc::format!("need a - c >= 1, got {}", a - c)));
        }
        // γ = 1: |b(x) - b(y)| <= (a + c)|x - y| <= κ0 (|x - y| + |x - y|)
        Self::build(
            "monotone_lipschitz",
            dim,
            ThetaParams {
                alpha,
                gamma: 1.0,
                kappa0: (0.5 * (a + c)).max(2.0),
                kappa1: a - c,
                kappa2: 1.0,
                kind: DissipativityKind::Monotone,
            },
            ModelKind::MonotoneLipschitz { a, c },
        )
    }

    pub fn hoelder_dissipative(dim: usize, alpha: f64, gamma: f64, c: f64) -> Result<Self> {
        let floor = (1.0 - alpha).max(0.0);
        if !(gamma > floor && gamma < 1.0) {
            return Err(param(alloc::format!("gamma must lie in ({floor}, 1), got {gamma}")));
        }
        if !(c.abs() <= 1.0) {
            return Err(param(alloc::format!("need |c| <= 1, got {c}")));
        }
        let (kappa1, kappa2) = hoelder_dissipativity_constants(gamma, c.abs());
        Self::build(
            "hoelder_dissipative",
            dim,
            ThetaParams {
                alpha,
                gamma,
                kappa0: (1.0 + c.abs()).max(2.0),
                kappa1,
                kappa2,
                kind: DissipativityKind::Dissipative,
            },
            ModelKind::HoelderDissipative { gamma, c },
        )
    }

    /// User-supplied coefficients. `theta` is taken on trust; use
    /// [`check_assumptions`] to look for counterexamples.
    pub fn custom<D, S>(name: &str, dim: usize, theta: ThetaParams, drift: D, diffusion: S) -> Result<Self>
    where
        D: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::build(
            name,
            dim,
            theta,
            ModelKind::Custom {
                drift: Arc::new(drift),
                diffusion: Arc::new(diffusion),
            },
        )
    }

    fn build(name: &str, dim: usize, theta: ThetaParams, kind: ModelKind) -> Result<Self> {
        if dim == 0 {
            return Err(param("dimension must be at least 1"));
        }
        theta.validate()?;
        Ok(Self {
            name: name.to_string(),
            dim,
            theta,
            kind,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &ThetaParams {
        &self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.theta.alpha
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn is_ou(&self) -> bool {
        matches!(self.kind, ModelKind::Ou)
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Ou => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi;
                }
            }
            ModelKind::MonotoneLipschitz { a, c } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -a * xi + c * xi.sin();
                }
            }
            ModelKind::HoelderDissipative { gamma, c } => {
                let r = norm(x);
                let damp = if r > 1.0 { r.powf(gamma - 1.0) } else { 1.0 };
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi + c * xi * damp;
                }
            }
            ModelKind::Custom { drift, .. } => drift(x, out),
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    /// `σ(x)` as a row-major `dim × dim` matrix.
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        match &self.kind {
            ModelKind::Custom { diffusion, .. } => diffusion(x, &mut m),
            _ => {
                let s = self.scalar_diffusion(x).unwrap_or(1.0);
                for i in 0..d {
                    m[i * d + i] = s;
                }
            }
        }
        m
    }

    /// The factor `s(x)` when `σ(x) = s(x) I`, `None` for custom models.
    pub fn scalar_diffusion(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            ModelKind::Ou | ModelKind::MonotoneLipschitz { .. } => Some(1.0),
            ModelKind::HoelderDissipative { gamma, .. } => Some(1.0 + 0.5 * norm(x).powf(*gamma).min(1.0)),
            ModelKind::Custom { .. } => None,
        }
    }

    /// `out = σ(x) ξ`.
    pub fn apply_diffusion(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        if let Some(s) = self.scalar_diffusion(x) {
            for (o, v) in out.iter_mut().zip(xi) {
                *o = s * v;
            }
            return;
        }
        let m = self.diffusion(x);
        let d = self.dim;
        for i in 0..d {
            out[i] = (0..d).map(|j| m[i * d + j] * xi[j]).sum();
        }
    }

    /// Runs `kernel` with monomorphised scalar coefficients. Only for
    /// `dim = 1`.
    pub fn with_scalar<K: ScalarKernel>(&self, kernel: K) -> Result<K::Output> {
        if self.dim != 1 {
            return Err(param("scalar kernels need a one-dimensional model"));
        }
        Ok(match &self.kind {
            ModelKind::Ou => kernel.run(OuCoeffs),
            ModelKind::MonotoneLipschitz { a, c } => kernel.run(MonotoneCoeffs { a: *a, c: *c }),
            ModelKind::HoelderDissipative { gamma, c } => kernel.run(HoelderCoeffs {
                gamma: *gamma,
                c: *c,
            }),
            ModelKind::Custom { .. } => kernel.run(CustomCoeffs { model: self }),
        })
    }
}

/// Dissipativity constants for `b(x) = -x + c ψ_γ(x)`, `|c| <= 1`.
///
/// With `|c| < 1` the drift satisfies `<x, b(x)> <= -(1 - |c|)|x|^2`, so
/// any positive `κ2` works. For `|c| = 1` the contraction vanishes near the
/// origin and the pair `(1/2, sup_r (r^2 min(r^{γ-1}, 1) - r^2/2))` is used.
fn hoelder_dissipativity_constants(gamma: f64, c_abs: f64) -> (f64, f64) {
    if c_abs < 1.0 {
        return (1.0 - c_abs, 1.0);
    }
    let k1 = 0.5;
    // r <= 1: (1 - k1) r^2 peaks at r = 1; r > 1: r^{1+γ} - k1 r^2
    let r_star = ((1.0 + gamma) / (2.0 * k1)).powf(1.0 / (1.0 - gamma));
    let outer = if r_star > 1.0 {
        r_star.powf(1.0 + gamma) - k1 * r_star * r_star
    } else {
        0.0
    };
    (k1, (1.0 - k1).max(outer) + 1e-12)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scalar drift/diffusion pair for the 1-D hot loops.
pub trait ScalarCoefficients: Sync {
    fn drift(&self, x: f64) -> f64;
    fn sigma(&self, x: f64) -> f64;
}

pub trait ScalarKernel {
    type Output;
    fn run<C: ScalarCoefficients>(self, coeffs: C) -> Self::Output;
}

pub struct OuCoeffs;

impl ScalarCoefficients for OuCoeffs {
    #[inline(always)]
    fn drift(&self, x: f64) -> f64 {
        -x
    }
    #[inline(always)]
    fn sigma(&self, _x: f64) -> f64 {
        1.0
    }
}

pub struct MonotoneCoeffs {
    a: f64,
    c: f64,
}

impl ScalarCoefficients for MonotoneCoeffs {
    #[inline(always)]
    fn drift(&self, x: f64) -> f64 {
        -self.a * x + self.c * x.sin()
    }
    #[inline(always)]
    fn sigma(&self, _x: f64) -> f64 {
        1.0
    }
}

pub struct HoelderCoeffs {
    gamma: f64,
    c: f64,
}

impl ScalarCoefficients for HoelderCoeffs {
    #[inline(always)]
    fn drift(&self, x: f64) -> f64 {
        let r = x.abs();
        let damp = if r > 1.0 { r.powf(self.gamma - 1.0) } else { 1.0 };
        -x + self.c * x * damp
    }
    #[inline(always)]
    fn sigma(&self, x: f64) -> f64 {
        let r = x.abs();
        1.0 + 0.5 * if r >= 1.0 { 1.0 } else { r.powf(self.gamma) }
    }
}

pub struct CustomCoeffs<'a> {
    model: &'a SdeModel,
}

impl ScalarCoefficients for CustomCoeffs<'_> {
    fn drift(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.model.drift_into(&[x], &mut out);
        out[0]
    }
    fn sigma(&self, x: f64) -> f64 {
        self.model.diffusion(&[x])[0]
    }
}

/// Lattice plus random pairs on which [`check_assumptions`] evaluates the
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -50.0,
            hi: 50.0,
            points_per_axis: 201,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub what: String,
    pub measured: f64,
    pub bound: f64,
}

/// Worst-case empirical constants over the sampled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `max |σ(x)ξ| / min |σ(x)ξ|` over unit directions, worst grid point.
    pub ellipticity_ratio: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `max ||σ(x) - σ(y)|| / |x - y|^γ` over pairs with `|x - y| <= 1`.
    pub sigma_hoelder: f64,
    pub drift_at_zero: f64,
    /// `max |b(x) - b(y)| / (|x - y|^γ + |x - y|)`.
    pub drift_hoelder: f64,
    /// `min -<x, b(x)> / |x|^2` over the grid (without `κ2`).
    pub dissipativity_rate: f64,
    /// `min -<x - y, b(x) - b(y)> / |x - y|^2` over random pairs.
    pub monotonicity_rate: f64,
    pub violations: Vec<Violation>,
    pub points_checked: usize,
    pub pairs_checked: usize,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const SLACK: f64 = 1.05;

/// Spot-checks ellipticity, Hölder regularity and dissipativity (or
/// monotonicity) of `model` against its own `theta`, with slack 1.05.
pub fn check_assumptions(model: &SdeModel, grid: &GridSpec, pair_count: usize) -> Result<DiagnosticsReport> {
    let d = model.dim();
    let th = *model.theta();
    if grid.points_per_axis < 2 || !(grid.hi > grid.lo) {
        return Err(param("grid needs hi > lo and at least two points per axis"));
    }
    let mut rng = stream(grid.seed, 0);
    let directions: Vec<Vec<f64>> = (0..16.max(4 * d))
        .map(|k| {
            if k < d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            } else {
                let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
                let n = norm(&v).max(1e-12);
                v.iter_mut().for_each(|x| *x /= n);
                v
            }
        })
        .collect();

    let eval = |x: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let b = model.drift(x);
        let s = model.diffusion(x);
        if b.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::Diagnostic {
                point: x.to_vec(),
                reason: "non-finite drift or diffusion".to_string(),
            });
        }
        Ok((b, s))
    };

    let mut report = DiagnosticsReport {
        ellipticity_ratio: 1.0,
        sigma_min: f64::INFINITY,
        sigma_max: 0.0,
        sigma_hoelder: 0.0,
        drift_at_zero: 0.0,
        drift_hoelder: 0.0,
        dissipativity_rate: f64::INFINITY,
        monotonicity_rate: f64::INFINITY,
        violations: Vec::new(),
        points_checked: 0,
        pairs_checked: 0,
    };

    let zero = vec![0.0; d];
    report.drift_at_zero = norm(&eval(&zero)?.0);

    let mut dissipative_excess: Option<(f64, Vec<f64>)> = None;
    let n_axis = grid.points_per_axis;
    let total = n_axis.checked_pow(d as u32).ok_or_else(|| param("grid too large"))?;
    let mut x = vec![0.0; d];
    let mut out = vec![0.0; d];
    for idx in 0..total {
        let mut k = idx;
        for xi in x.iter_mut() {
            let j = k % n_axis;
            k /= n_axis;
            *xi = grid.lo + (grid.hi - grid.lo) * j as f64 / (n_axis - 1) as f64;
        }
        let (b, s) = eval(&x)?;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for dir in &directions {
            for i in 0..d {
                out[i] = (0..d).map(|j| s[i * d + j] * dir[j]).sum();
            }
            let n = norm(&out);
            lo = lo.min(n);
            hi = hi.max(n);
        }
        report.sigma_min = report.sigma_min.min(lo);
        report.sigma_max = report.sigma_max.max(hi);
        report.ellipticity_ratio = report.ellipticity_ratio.max(hi / lo);

        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > 0.0 {
            let inner: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            report.dissipativity_rate = report.dissipativity_rate.min(-inner / r2);
            if th.kind == DissipativityKind::Dissipative {
                let excess = inner + th.kappa1 * r2 / SLACK - th.kappa2 * SLACK;
                if excess > 0.0 && dissipative_excess.as_ref().is_none_or(|(e, _)| excess > *e) {
                    dissipative_excess = Some((excess, x.clone()));
                }
            }
        }
        report.points_checked += 1;
    }

    let mut monotone_excess: Option<f64> = None;
    for p in 0..pair_count {
        let x: Vec<f64> = (0..d).map(|_| grid.lo + (grid.hi - grid.lo) * rng.random::<f64>()).collect();
        // alternate short pairs (Hölder quotients) and long pairs (monotonicity)
        let radius = if p % 2 == 0 { 1.0 } else { grid.hi - grid.lo };
        let mut u: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let un = norm(&u).max(1e-12);
        let len = radius * rng.random::<f64>().max(1e-9);
        u.iter_mut().for_each(|v| *v *= len / un);
        let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
        let (bx, sx) = eval(&x)?;
        let (by, sy) = eval(&y)?;
        let dist = len;
        let db: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        let drift_q = norm(&db) / (dist.powf(th.gamma) + dist);
        report.drift_hoelder = report.drift_hoelder.max(drift_q);
        if dist <= 1.0 {
            let ds = frobenius_diff(&sx, &sy);
            report.sigma_hoelder = report.sigma_hoelder.max(ds / dist.powf(th.gamma));
        }
        let inner: f64 = u.iter().zip(&db).map(|(du, dbv)| -du * dbv).sum();
        // inner = <x - y, b(x) - b(y)>
        report.monotonicity_rate = report.monotonicity_rate.min(-inner / (dist * dist));
        if th.kind == DissipativityKind::Monotone {
            let excess = inner + th.kappa1 * dist * dist / SLACK - th.kappa2 * SLACK;
            if excess > 0.0 {
                monotone_excess = Some(monotone_excess.map_or(excess, |e: f64| e.max(excess)));
            }
        }
        report.pairs_checked += 1;
    }

    let k0 = th.kappa0;
    let mut flag = |what: &str, measured: f64, bound: f64, bad: bool| {
        if bad {
            report.violations.push(Violation {
                what: what.to_string(),
                measured,
                bound,
            });
        }
    };
    let (smax, smin, eratio, sh, bz, dh) = (
        report.sigma_max,
        report.sigma_min,
        report.ellipticity_ratio,
        report.sigma_hoelder,
        report.drift_at_zero,
        report.drift_hoelder,
    );
    flag("sigma upper ellipticity", smax, k0, smax > k0 * SLACK);
    flag("sigma lower ellipticity", smin, 1.0 / k0, smin < 1.0 / (k0 * SLACK));
    flag("ellipticity ratio", eratio, k0 * k0, eratio > k0 * k0 * SLACK);
    flag("sigma hoelder quotient", sh, k0, sh > k0 * SLACK);
    flag("drift at zero", bz, k0, bz > k0 * SLACK);
    flag("drift hoelder quotient", dh, k0, dh > k0 * SLACK);
    if let Some((e, _)) = dissipative_excess {
        flag("dissipativity", e, 0.0, true);
    }
    if let Some(e) = monotone_excess {
        flag("monotonicity", e, 0.0, true);
    }
    Ok(report)
}

fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
