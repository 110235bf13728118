//! Closed forms for the 1-D stable Ornstein–Uhlenbeck process
//! `dX = -X dt + dL` and its Euler chain `Y' = (1 - η) Y + η^{1/α} ξ`.
//!
//! Both invariant laws are scaled copies of the standard symmetric stable
//! law: `μ ~ α^{-1/α} L_1` and `μ_η ~ (η / (1 - (1-η)^α))^{1/α} L_1`.

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::param,
    math::{gamma, PI},
    quadrature::GaussLegendre,
    Error, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuMeasure {
    /// The invariant law `μ` of the continuous process.
    Invariant,
    /// The invariant law `μ_η` of the Euler chain.
    EmInvariant,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(param(alloc::format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(param(alloc::format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

/// `(scale of μ, scale of μ_η)`.
pub fn ou_scales(alpha: f64, eta: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    check_eta(eta)?;
    Ok((ou_scale(OuMeasure::Invariant, alpha, eta)?, ou_scale(OuMeasure::EmInvariant, alpha, eta)?))
}

pub fn ou_scale(which: OuMeasure, alpha: f64, eta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    match which {
        OuMeasure::Invariant => Ok(alpha.powf(-1.0 / alpha)),
        OuMeasure::EmInvariant => {
            check_eta(eta)?;
            Ok(em_scale_alpha(alpha, eta).powf(1.0 / alpha))
        }
    }
}

/// `η / (1 - (1-η)^α)`, computed without cancellation for small `η`.
fn em_scale_alpha(alpha: f64, eta: f64) -> f64 {
    let denom = -(alpha * (-eta).ln_1p()).exp_m1();
    eta / denom
}

/// Characteristic function of `μ` or `μ_η` at `z`.
pub fn ou_cf(which: OuMeasure, alpha: f64, eta: f64, z: f64) -> Result<f64> {
    let s = ou_scale(which, alpha, eta)?;
    Ok((-(s * z.abs()).powf(alpha)).exp())
}

/// `∫_{-1}^{1} cf(r) dr`, the mean of `φ(x) = 2 sin(x)/x` under the law.
pub fn ou_phi_mean(which: OuMeasure, alpha: f64, eta: f64) -> Result<f64> {
    let s = ou_scale(which, alpha, eta)?;
    let gl = GaussLegendre::new(20);
    let (v, _) = gl.converge(|r| (-(s * r).powf(alpha)).exp(), 0.0, 1.0, 1e-14)?;
    Ok(2.0 * v)
}

/// Density of the standard symmetric law (`cf = e^{-|z|^α}`) by cosine
/// inversion, `p(x) = (1/π) ∫_0^∞ cos(xz) e^{-z^α} dz`.
pub fn sas_density(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(density(alpha, x.abs(), &GaussLegendre::new(16)))
}

fn density(alpha: f64, x: f64, gl: &GaussLegendre) -> f64 {
    // e^{-z^α} < 1e-17 beyond z_max
    let z_max = 39.2f64.powf(1.0 / alpha);
    let f = |z: f64| (x * z).cos() * (-z.powf(alpha)).exp();
    if x <= 2.0 {
        return gl.composite(f, 0.0, z_max, 64) / PI;
    }
    // integrate between consecutive zeros of cos(xz)
    let half = PI / x;
    let mut sum = gl.apply(f, 0.0, 0.5 * half);
    let mut lo = 0.5 * half;
    while lo < z_max {
        sum += gl.apply(f, lo, lo + half);
        lo += half;
    }
    sum / PI
}

/// `E|L_1|` for the standard symmetric law, `1 < α <= 2`.
///
/// `2 ∫_0^X x p(x) dx` by quadrature of the inverted density, plus the
/// tail `∫_X^∞` from the large-`x` expansion
/// `p(x) ~ (1/π) Σ_k (-1)^{k+1} Γ(αk+1)/k! sin(παk/2) x^{-αk-1}`.
pub fn sas_abs_moment(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::Domain(alloc::format!(
            "E|L_1| is infinite for alpha = {alpha} <= 1"
        )));
    }
    let x_max = 50.0;
    let inner = GaussLegendre::new(16);
    let outer = GaussLegendre::new(20);
    let (body, _) = outer.converge(|x| x * density(alpha, x, &inner), 0.0, x_max, 1e-9)?;
    Ok(2.0 * (body + abs_moment_tail(alpha, x_max)))
}

/// `∫_X^∞ x p(x) dx` from the asymptotic series, truncated at its
/// smallest term.
fn abs_moment_tail(alpha: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let ak = alpha * kf;
        let coeff = gamma(ak + 1.0) / gamma(kf + 1.0) * (PI * ak / 2.0).sin();
        let term = coeff * x.powf(1.0 - ak) / (ak - 1.0) / PI;
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        sum += if k % 2 == 1 { term } else { -term };
        if prev < 1e-18 {
            break;
        }
    }
    sum
}

/// Reference value `E|L_1| = (2/π) Γ(1 - 1/α)`.
pub fn sas_abs_moment_closed_form(alpha: f64) -> f64 {
    2.0 / PI * gamma(1.0 - 1.0 / alpha)
}

/// `W_1(μ, μ_η) = |s_η - s| E|L_1|`: both laws are scalings of `L_1`, and
/// the quantile coupling of two scalings is optimal on the line.
pub fn ou_w1_exact(alpha: f64, eta: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(param(alloc::format!("exact W1 needs alpha in (1, 2), got {alpha}")));
    }
    let (s, s_eta) = ou_scales(alpha, eta)?;
    Ok((s_eta - s).abs() * sas_abs_moment(alpha)?)
}

/// Bracket `(lower, upper)` for `lim W_1(μ, μ_η) / η`:
/// `lower = ((α-1)/α) ∫_0^1 r^α e^{-r^α/α} dr`,
/// `upper = (α-1) / (2 α^{(1+α)/α}) E|L_1|`.
pub fn syy2_bounds(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(param(alloc::format!("bounds need alpha in (1, 2), got {alpha}")));
    }
    let gl = GaussLegendre::new(20);
    let (integral, _) = gl.converge(|r| r.powf(alpha) * (-r.powf(alpha) / alpha).exp(), 0.0, 1.0, 1e-13)?;
    let lower = (alpha - 1.0) / alpha * integral;
    Ok((lower, upper_slope(alpha)? * sas_abs_moment(alpha)?))
}

/// `(α-1) / (2 α^{(1+α)/α})`, the first-order coefficient of `s_η - s`.
pub fn upper_slope(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((alpha - 1.0) / (2.0 * alpha.powf((1.0 + alpha) / alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_at_alpha_one_coincide() {
        for eta in [0.01, 0.3, 0.9] {
            let (s, se) = ou_scales(1.0, eta).unwrap();
            assert!((s - 1.0).abs() < 1e-14 && (se - 1.0).abs() < 1e-14);
            let c = ou_cf(OuMeasure::EmInvariant, 1.0, eta, 1.7).unwrap();
            assert!((c - (-1.7f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn scale_formulas() {
        let (_, se) = ou_scales(2.0, 1e-9).unwrap();
        assert!((se - 0.5f64.sqrt()).abs() < 1e-8);
        let (_, se) = ou_scales(1.5, 0.5).unwrap();
        let direct = (0.5 / (1.0 - 0.5f64.powf(1.5))).powf(2.0 / 3.0);
        assert!((se - direct).abs() < 1e-14);
        assert_eq!(ou_cf(OuMeasure::Invariant, 1.5, 0.1, 0.0).unwrap(), 1.0);
        assert!((ou_cf(OuMeasure::Invariant, 1.0, 0.1, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(ou_scales(1.5, 1.0).is_err());
        assert!(ou_scales(2.5, 0.1).is_err());
    }

    #[test]
    fn density_is_normalised_for_gaussian() {
        // N(0, 2)
        for x in [0.0, 1.0, 3.0] {
            let p = sas_density(2.0, x).unwrap();
            let exact = (-x * x / 4.0).exp() / (4.0 * PI).sqrt();
            assert!((p - exact).abs() < 1e-12, "{x}: {p} vs {exact}");
        }
        // Cauchy
        let p = sas_density(1.0, 5.0).unwrap();
        assert!((p - 1.0 / (PI * 26.0)).abs() < 1e-12);
    }

    #[test]
    fn abs_moment_matches_gamma_formula() {
        assert!((sas_abs_moment(2.0).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-6);
        for alpha in [1.1, 1.3, 1.5, 1.8] {
            let q = sas_abs_moment(alpha).unwrap();
            let c = sas_abs_moment_closed_form(alpha);
            assert!((q - c).abs() < 1e-6, "alpha {alpha}: {q} vs {c}");
        }
        assert!(matches!(sas_abs_moment(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_mean_limits() {
        // cf of μ at α = 2 is e^{-r^2/2}
        let v = ou_phi_mean(OuMeasure::Invariant, 2.0, 0.1).unwrap();
        let gl = GaussLegendre::new(30);
        let exact = 2.0 * gl.apply(|r| (-r * r / 2.0).exp(), 0.0, 1.0);
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn bracket_is_ordered() {
        for alpha in [1.1, 1.3, 1.5, 1.7, 1.9] {
            let (lo, hi) = syy2_bounds(alpha).unwrap();
            assert!(0.0 < lo && lo < hi, "alpha {alpha}: {lo} {hi}");
        }
    }
}
