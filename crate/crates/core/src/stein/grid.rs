use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::{input, param},
    Error, Result,
};

/// Second-order behaviour of `h -> f(x+h) + f(x-h) - 2 f(x)` near zero:
/// `second * h^2 + third_jump * h^3 / 6`, exact for `h <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpansion {
    pub second: f64,
    pub third_jump: f64,
    pub radius: f64,
}

/// A function the nonlocal operator can be applied to.
pub trait NonlocalIntegrand: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn local_expansion(&self, x: f64) -> LocalExpansion;

    /// Points where the function is less smooth.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    fn check_domain(&self, _x: f64) -> Result<()> {
        Ok(())
    }

    /// Radius beyond which `x ± r` lies in the region described by
    /// [`NonlocalIntegrand::tail_integral`].
    fn tail_start(&self, _x: f64) -> f64 {
        0.0
    }

    /// `∫_R^∞ [f(x+az) + f(x-az) - 2f(x)] z^{-1-α} dz`.
    fn tail_integral(&self, x: f64, a: f64, alpha: f64, r: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// End values continued as constants.
    ConstantTails,
    /// End values continued along the end slopes.
    LinearTails,
}

/// Natural cubic spline through `(knots, values)` with a declared
/// extension outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    knots: Vec<f64>,
    values: Vec<f64>,
    m: Vec<f64>,
    extension: Extension,
    se: Option<Vec<f64>>,
}

impl GridFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, extension: Extension) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(input("a grid function needs at least three knots and one value per knot"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(input("knots must be strictly increasing"));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(input("knots and values must be finite"));
        }
        let m = natural_second_derivatives(&knots, &values);
        Ok(Self {
            knots,
            values,
            m,
            extension,
            se: None,
        })
    }

    /// `g` sampled at `knots`.
    pub fn sample<G: Fn(f64) -> f64>(g: G, knots: Vec<f64>, extension: Extension) -> Result<Self> {
        let values = knots.iter().map(|&x| g(x)).collect();
        Self::new(knots, values, extension)
    }

    pub fn with_se(mut self, se: Vec<f64>) -> Result<Self> {
        if se.len() != self.knots.len() {
            return Err(input("one standard error per knot"));
        }
        self.se = Some(se);
        Ok(self)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn se(&self) -> Option<&[f64]> {
        self.se.as_deref()
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Index `i` with `knots[i] <= x < knots[i+1]`, clamped to valid
    /// segments.
    fn segment(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    fn coeffs(&self, i: usize) -> (f64, f64, f64, f64, f64) {
        let h = self.knots[i + 1] - self.knots[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let b = (self.values[i + 1] - self.values[i]) / h - h * (2.0 * m0 + m1) / 6.0;
        (self.values[i], b, m0 / 2.0, (m1 - m0) / (6.0 * h), h)
    }

    fn end_slope(&self, right: bool) -> f64 {
        match self.extension {
            Extension::ConstantTails => 0.0,
            Extension::LinearTails => {
                if right {
                    self.spline_derivative(self.hi())
                } else {
                    self.spline_derivative(self.lo())
                }
            }
        }
    }

    fn spline_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (_, b, c, d, _) = self.coeffs(i);
        let t = x - self.knots[i];
        b + 2.0 * c * t + 3.0 * d * t * t
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo() {
            return self.values[0] + self.end_slope(false) * (x - self.lo());
        }
        if x > self.hi() {
            return self.values[self.values.len() - 1] + self.end_slope(true) * (x - self.hi());
        }
        let i = self.segment(x);
        let (a, b, c, d, _) = self.coeffs(i);
        let t = x - self.knots[i];
        a + t * (b + t * (c + t * d))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.lo() {
            return self.end_slope(false);
        }
        if x > self.hi() {
            return self.end_slope(true);
        }
        self.spline_derivative(x)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        let i = self.segment(x);
        let t = (x - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.m[i] + (self.m[i + 1] - self.m[i]) * t
    }

    fn third(&self, i: usize) -> f64 {
        (self.m[i + 1] - self.m[i]) / (self.knots[i + 1] - self.knots[i])
    }
}

/// Tridiagonal solve for the spline moments with `M_0 = M_{n-1} = 0`.
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    let mut upper = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        diag[j] = 2.0 * (h0 + h1);
        upper[j] = h1;
        rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // Thomas algorithm; sub-diagonal entry j is h_{j} = x[j+1] - x[j]
    for j in 1..k {
        let lower = x[j + 1] - x[j];
        let w = lower / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    for j in (0..k).rev() {
        let next = if j + 1 < k { m[j + 2] } else { 0.0 };
        m[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
    }
    m
}

impl NonlocalIntegrand for GridFn {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        GridFn::derivative(self, x)
    }

    fn local_expansion(&self, x: f64) -> LocalExpansion {
        let i = self.segment(x);
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let scale = 1e-12 * (1.0 + x.abs());
        if (x - k0).abs() <= scale && i > 0 {
            return LocalExpansion {
                second: self.m[i],
                third_jump: self.third(i) - self.third(i - 1),
                radius: (k1 - k0).min(k0 - self.knots[i - 1]),
            };
        }
        if (x - k1).abs() <= scale && i + 2 < self.knots.len() {
            return LocalExpansion {
                second: self.m[i + 1],
                third_jump: self.third(i + 1) - self.third(i),
                radius: (k1 - k0).min(self.knots[i + 2] - k1),
            };
        }
        LocalExpansion {
            second: self.second_derivative(x),
            third_jump: 0.0,
            radius: (x - k0).min(k1 - x),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        &self.knots
    }

    /// At least one knot spacing away from either end.
    fn check_domain(&self, x: f64) -> Result<()> {
        let n = self.knots.len();
        let lo = self.knots[1];
        let hi = self.knots[n - 2];
        let tol = 1e-12 * (1.0 + x.abs());
        if x < lo - tol || x > hi + tol {
            return Err(Error::Domain(alloc::format!(
                "x = {x} is too close to the grid boundary; need {lo} <= x <= {hi}"
            )));
        }
        Ok(())
    }

    fn tail_start(&self, x: f64) -> f64 {
        (x - self.lo()).max(self.hi() - x)
    }

    fn tail_integral(&self, x: f64, a: f64, alpha: f64, r: f64) -> Result<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        let (v_l, v_r) = (self.values[0], self.values[self.values.len() - 1]);
        let fx = self.eval(x);
        let r_a = r.powf(-alpha) / alpha;
        match self.extension {
            Extension::ConstantTails => Ok((v_r + v_l - 2.0 * fx) * r_a),
            Extension::LinearTails => {
                let (s_l, s_r) = (self.end_slope(false), self.end_slope(true));
                let k = v_r - s_r * hi + v_l - s_l * lo + (s_r + s_l) * x - 2.0 * fx;
                let growth = s_r - s_l;
                if growth.abs() <= 1e-12 * (1.0 + s_l.abs() + s_r.abs()) {
                    return Ok(k * r_a);
                }
                if alpha <= 1.0 {
                    return Err(Error::Domain(alloc::format!(
                        "linear tails with unequal slopes are not integrable against |z|^(-1-alpha) for alpha = {alpha}"
                    )));
                }
                Ok(k * r_a + growth * a * r.powf(1.0 - alpha) / (alpha - 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `ρ_m(x) = (1 + |x|^2)^{m/2}`.
    PolyM { m: f64 },
    /// `ρ_log(x) = 1 / log(e + |x|^2)`.
    Log,
}

pub fn weight_eval(weight: &WeightSpec, x: f64) -> f64 {
    match *weight {
        WeightSpec::PolyM { m } => (1.0 + x * x).powf(m / 2.0),
        WeightSpec::Log => 1.0 / (core::f64::consts::E + x * x).ln(),
    }
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::PolyM { m } if !m.is_finite() => Err(param("weight exponent must be finite")),
            _ => Ok(()),
        }
    }
}

/// Cuts graded around the origin, where both weights bend on a unit scale.
const WEIGHT_CUTS: [f64; 13] = [-16.0, -8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

impl NonlocalIntegrand for WeightSpec {
    fn value(&self, x: f64) -> f64 {
        weight_eval(self, x)
    }

    fn breakpoints(&self) -> &[f64] {
        &WEIGHT_CUTS
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            WeightSpec::PolyM { m } => m * x * (1.0 + x * x).powf(m / 2.0 - 1.0),
            WeightSpec::Log => {
                let s = core::f64::consts::E + x * x;
                let l = s.ln();
                -(2.0 * x / s) / (l * l)
            }
        }
    }

    fn local_expansion(&self, x: f64) -> LocalExpansion {
        let second = match *self {
            WeightSpec::PolyM { m } => {
                let s = 1.0 + x * x;
                m * s.powf(m / 2.0 - 2.0) * (1.0 + (m - 1.0) * x * x)
            }
            WeightSpec::Log => {
                let s = core::f64::consts::E + x * x;
                let l = s.ln();
                let d1 = 2.0 * x / s;
                let d2 = (2.0 * core::f64::consts::E - 2.0 * x * x) / (s * s);
                -d2 / (l * l) + 2.0 * d1 * d1 / (l * l * l)
            }
        };
        // smooth: the cubic term cancels and the quartic one is negligible
        // on the core radius used by the generator
        LocalExpansion {
            second,
            third_jump: 0.0,
            radius: 0.5,
        }
    }

    fn tail_start(&self, x: f64) -> f64 {
        x.abs()
    }

    /// Large-`z` expansions: `ρ_m(x ± az) ≈ (az)^m (1 + (m(m-1)x^2 + m)/(2(az)^2))`
    /// and `ρ_log(y) ≈ 1/(2 log|y|)`.
    fn tail_integral(&self, x: f64, a: f64, alpha: f64, r: f64) -> Result<f64> {
        let own = 2.0 * weight_eval(self, x) * r.powf(-alpha) / alpha;
        match *self {
            WeightSpec::PolyM { m } => {
                if m >= alpha {
                    return Err(Error::Domain(alloc::format!(
                        "rho_m with m = {m} >= alpha = {alpha} has an infinite nonlocal integral"
                    )));
                }
                let lead = 2.0 * a.powf(m) * r.powf(m - alpha) / (alpha - m);
                let next = (m * (m - 1.0) * x * x + m) * a.powf(m - 2.0) * r.powf(m - 2.0 - alpha) / (alpha + 2.0 - m);
                Ok(lead + next - own)
            }
            WeightSpec::Log => Ok(r.powf(-alpha) / (alpha * (a * r).ln()) - own),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_and_lines() {
        let knots: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let g = GridFn::sample(|x| 3.0 - 2.0 * x, knots.clone(), Extension::LinearTails).unwrap();
        for x in [-2.0, 0.3, 2.75, 7.0] {
            assert!((g.eval(x) - (3.0 - 2.0 * x)).abs() < 1e-12);
            assert!((g.derivative(x) + 2.0).abs() < 1e-12);
        }
        let c = GridFn::sample(|x| x.sin(), knots, Extension::ConstantTails).unwrap();
        assert!((c.eval(2.6) - 2.6f64.sin()).abs() < 2e-3);
        assert_eq!(c.eval(100.0), 5.0f64.sin());
    }

    #[test]
    fn local_expansion_is_exact_on_segments() {
        let knots: Vec<f64> = (0..9).map(|i| (i as f64 - 4.0) * 0.7).collect();
        let g = GridFn::sample(|x| (x * 1.3).cos(), knots, Extension::ConstantTails).unwrap();
        for x in [0.0, 0.7, 0.2] {
            let e = g.local_expansion(x);
            let h = 0.9 * e.radius;
            let d2 = g.eval(x + h) + g.eval(x - h) - 2.0 * g.eval(x);
            let model = e.second * h * h + e.third_jump * h * h * h / 6.0;
            assert!((d2 - model).abs() < 1e-13, "x {x}: {d2} vs {model}");
        }
    }

    #[test]
    fn domain_margin() {
        let g = GridFn::sample(|x| x, vec![0.0, 1.0, 2.0, 3.0], Extension::ConstantTails).unwrap();
        assert!(g.check_domain(1.5).is_ok());
        assert!(matches!(g.check_domain(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn weights() {
        assert_eq!(weight_eval(&WeightSpec::PolyM { m: 0.0 }, 7.0), 1.0);
        assert_eq!(weight_eval(&WeightSpec::Log, 0.0), 1.0);
        assert!((weight_eval(&WeightSpec::PolyM { m: 2.0 }, 3f64.sqrt()) - 4.0).abs() < 1e-14);
        for w in [WeightSpec::PolyM { m: 0.7 }, WeightSpec::Log] {
            let x = 1.3;
            let h = 1e-4;
            let fd1 = (weight_eval(&w, x + h) - weight_eval(&w, x - h)) / (2.0 * h);
            let fd2 = (weight_eval(&w, x + h) + weight_eval(&w, x - h) - 2.0 * weight_eval(&w, x)) / (h * h);
            assert!((w.derivative(x) - fd1).abs() < 1e-7);
            assert!((w.local_expansion(x).second - fd2).abs() < 1e-5);
        }
    }
}
