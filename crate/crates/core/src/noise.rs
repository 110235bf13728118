//! Symmetric and rotationally invariant α-stable sampling.
//!
//! Laws are parameterised by their characteristic function:
//! `E exp(i<ξ, X>) = exp(-scale^α |ξ|^α)`. With `scale = 1` the 1-D law is
//! the standard symmetric stable law with characteristic function
//! `exp(-|z|^α)`; at `α = 2` it is `N(0, 2)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::{input, param},
    math::{gamma, PI},
    Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub scale: f64,
    pub dim: usize,
}

impl StableSpec {
    pub fn new(alpha: f64, scale: f64, dim: usize) -> Result<Self> {
        let spec = Self { alpha, scale, dim };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit-scale law in `dim` dimensions.
    pub fn standard(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(alpha, 1.0, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(param(alloc::format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(param(alloc::format!("scale must be positive, got {}", self.scale)));
        }
        if self.dim == 0 {
            return Err(param("dimension must be at least 1"));
        }
        Ok(())
    }

    /// Analytic characteristic function at frequency norm `|ξ|`.
    pub fn cf(&self, xi_norm: f64) -> f64 {
        (-(self.scale * xi_norm).powf(self.alpha)).exp()
    }
}

/// Standard symmetric stable draw (`scale = 1`), Chambers–Mallows–Stuck.
#[inline]
pub(crate) fn standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 2.0 {
        let g: f64 = rng.sample(StandardNormal);
        return core::f64::consts::SQRT_2 * g;
    }
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable draw with Laplace transform `E exp(-λA) = exp(-λ^β)`,
/// `β ∈ (0, 1)` (Kanter's representation).
#[inline]
pub(crate) fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = rng.sample(Exp1);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta);
    a * b
}

/// One draw of the 1-D symmetric law with characteristic function
/// `exp(-scale^α |z|^α)`.
pub fn sample_sas_1d<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(param("sample_sas_1d needs dim = 1"));
    }
    Ok(spec.scale * standard_sas(spec.alpha, rng))
}

/// Fills `out` with an isotropic draw: `sqrt(A) G` with `G ~ N(0, 2I)` and
/// `A` positive `(α/2)`-stable, so that `E exp(i<ξ,X>) = exp(-|ξ|^α)`.
#[inline]
pub(crate) fn standard_isotropic_into<R: Rng + ?Sized>(alpha: f64, rng: &mut R, out: &mut [f64]) {
    let mix = if alpha == 2.0 {
        1.0
    } else {
        positive_stable(0.5 * alpha, rng)
    };
    let s = (2.0 * mix).sqrt();
    for o in out.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *o = s * g;
    }
}

/// Rotation-invariant draw with characteristic function
/// `exp(-scale^α |ξ|^α)`.
pub fn sample_isotropic<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = vec![0.0; spec.dim];
    standard_isotropic_into(spec.alpha, rng, &mut out);
    for o in &mut out {
        *o *= spec.scale;
    }
    Ok(out)
}

/// Increment `L_{t+dt} - L_t` of the Lévy process whose time-one law is
/// `spec`: `dt^{1/α}` times an isotropic draw.
pub fn sample_increment<R: Rng + ?Sized>(spec: &StableSpec, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(param(alloc::format!("time step must be positive, got {dt}")));
    }
    let mut x = sample_isotropic(spec, rng)?;
    let f = dt.powf(1.0 / spec.alpha);
    for v in &mut x {
        *v *= f;
    }
    Ok(x)
}

/// Fills `out` with a Pareto vector: radius `U^{-1/α}` (density
/// `∝ r^{-α-1}` on `[1, ∞)`), direction uniform on the sphere.
#[inline]
pub(crate) fn pareto_into<R: Rng + ?Sized>(alpha: f64, rng: &mut R, out: &mut [f64]) {
    let u: f64 = 1.0 - rng.random::<f64>();
    let r = u.powf(-1.0 / alpha);
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { r } else { -r };
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *o = g;
            norm2 += g * g;
        }
        if norm2 > 1e-300 {
            let k = r / norm2.sqrt();
            for o in out.iter_mut() {
                *o *= k;
            }
            return;
        }
    }
}

pub fn sample_pareto<R: Rng + ?Sized>(alpha: f64, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(param(alloc::format!("Pareto index must be positive, got {alpha}")));
    }
    if dim == 0 {
        return Err(param("dimension must be at least 1"));
    }
    let mut out = vec![0.0; dim];
    pareto_into(alpha, rng, &mut out);
    Ok(out)
}

/// Surface area of the unit sphere in `R^d`: `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    let h = 0.5 * dim as f64;
    2.0 * PI.powf(h) / gamma(h)
}

/// `(1/n) Σ_j exp(i<z, X_j>)` for each frequency `z`. `samples` is row-major
/// with `dim` columns; each `z` must have length `dim`.
pub fn empirical_cf(samples: &[f64], dim: usize, zs: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
        return Err(input("empirical_cf needs a non-empty sample set"));
    }
    if let Some(z) = zs.iter().find(|z| z.len() != dim) {
        return Err(input(alloc::format!("frequency of length {} for dim {dim}", z.len())));
    }
    let n = (samples.len() / dim) as f64;
    Ok(zs
        .iter()
        .map(|z| {
            let (mut re, mut im) = (0.0, 0.0);
            for x in samples.chunks_exact(dim) {
                let t: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                let (s, c) = t.sin_cos();
                re += c;
                im += s;
            }
            Complex64::new(re / n, im / n)
        })
        .collect())
}
