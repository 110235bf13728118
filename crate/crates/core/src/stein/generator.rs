use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::NonlocalIntegrand;
#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::param,
    math::stable_kernel_constant,
    models::SdeModel,
    quadrature::GaussLegendre,
    Error, Result,
};

/// Layout of the split quadrature for the nonlocal integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre order per piece; half of it gives the error estimate.
    pub order: usize,
    /// Radius of the analytic core (capped by the smooth radius of `f`).
    pub core: f64,
    /// Split between the inner and the outer zone.
    pub r0: f64,
    /// Start of the analytic tail (pushed past the grid when needed).
    pub r_max: f64,
    /// Largest `hi / lo` ratio of one piece (pieces are log-spaced).
    pub max_ratio: f64,
    /// Refused when the error estimate exceeds this.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 16,
            core: 1e-3,
            r0: 1.0,
            r_max: 1e3,
            max_ratio: 1.5,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// `|Q_order - Q_{order/2}|` summed over pieces.
    pub error: f64,
}

/// `½ ∫ [f(x+az) + f(x-az) - 2 f(x)] |z|^{-1-α} dz`.
pub fn frac_generator_1d<F: NonlocalIntegrand + ?Sized>(f: &F, x: f64, a: f64, alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    frac_generator_1d_with_error(f, x, a, alpha, quad).map(|g| g.value)
}

/// [`frac_generator_1d`] with its quadrature error estimate.
///
/// The integral over `z > 0` is split into an analytic core `[0, ε]`
/// built from the local expansion of `f`, log-spaced Gauss–Legendre
/// pieces on `[ε, R]` cut at every breakpoint of `f`, and the analytic
/// tail beyond `R`.
pub fn frac_generator_1d_with_error<F: NonlocalIntegrand + ?Sized>(
    f: &F,
    x: f64,
    a: f64,
    alpha: f64,
    quad: &QuadratureSpec,
) -> Result<GeneratorValue> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(param(alloc::format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(param(alloc::format!("the diffusion scale must be positive, got {a}")));
    }
    if quad.order < 2 || !(quad.max_ratio > 1.0) {
        return Err(param("quadrature order must be >= 2 and the piece ratio > 1"));
    }
    f.check_domain(x)?;

    let loc = f.local_expansion(x);
    let eps = quad.core.min(loc.radius / a).min(0.5 * quad.r0);
    let core = loc.second * a * a * eps.powf(2.0 - alpha) / (2.0 - alpha)
        + loc.third_jump * a * a * a * eps.powf(3.0 - alpha) / (6.0 * (3.0 - alpha));

    let r_max = quad.r_max.max(1.0001 * f.tail_start(x) / a);
    let mut cuts: Vec<f64> = Vec::with_capacity(f.breakpoints().len() + 3);
    cuts.push(eps);
    cuts.push(quad.r0);
    cuts.push(r_max);
    cuts.extend(
        f.breakpoints()
            .iter()
            .map(|k| (x - k).abs() / a)
            .filter(|&z| z > eps && z < r_max),
    );
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * q.abs());

    let fine = GaussLegendre::new(quad.order);
    let coarse = GaussLegendre::new(quad.order / 2);
    let fx = f.value(x);
    // substitution z = e^u: dz / z^{1+α} = e^{-αu} du
    let integrand = |u: f64| {
        let z = u.exp();
        let h = a * z;
        (f.value(x + h) + f.value(x - h) - 2.0 * fx) * (-alpha * u).exp()
    };
    let log_ratio = quad.max_ratio.ln();
    let (mut body, mut err) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (ul, uh) = (w[0].ln(), w[1].ln());
        let pieces = ((uh - ul) / log_ratio).ceil().max(1.0) as usize;
        let qf = fine.composite(integrand, ul, uh, pieces);
        let qc = coarse.composite(integrand, ul, uh, pieces);
        body += qf;
        err += (qf - qc).abs();
    }
    let tail = f.tail_integral(x, a, alpha, r_max)?;
    let value = core + body + tail;
    if !value.is_finite() {
        return Err(Error::Domain(alloc::format!("generator is not finite at x = {x}")));
    }
    if err > quad.tol {
        return Err(Error::Accuracy {
            coarse: value - err,
            fine: value,
        });
    }
    Ok(GeneratorValue { value, error: err })
}

/// `ℒf(x) = c(α) · frac(f, x, σ(x), α) + b(x) f'(x)` for a 1-D model.
///
/// `c(α) = Γ(1+α) sin(πα/2)/π` turns the raw kernel `|z|^{-1-α}` into the
/// generator of the noise with `E e^{iξL_t} = e^{-t|ξ|^α}`.
pub fn full_generator_1d<F: NonlocalIntegrand + ?Sized>(model: &SdeModel, f: &F, x: f64, quad: &QuadratureSpec) -> Result<f64> {
    full_generator_1d_with_error(model, f, x, quad).map(|g| g.value)
}

pub fn full_generator_1d_with_error<F: NonlocalIntegrand + ?Sized>(
    model: &SdeModel,
    f: &F,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<GeneratorValue> {
    if model.dim() != 1 {
        return Err(param("the generator quadrature is one-dimensional"));
    }
    let alpha = model.alpha();
    let sigma = model
        .scalar_diffusion(&[x])
        .ok_or_else(|| param("model diffusion is not scalar"))?
        .abs();
    let c = stable_kernel_constant(alpha);
    let frac = frac_generator_1d_with_error(f, x, sigma, alpha, quad)?;
    let b = model.drift(&[x])[0];
    Ok(GeneratorValue {
        value: c * frac.value + b * f.derivative(x),
        error: c * frac.error,
    })
}
