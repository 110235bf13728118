//! One-dimensional nonlocal generator, Monte Carlo Stein solutions and
//! weighted Hölder diagnostics.

mod generator;
mod grid;
mod holder;
mod solver;

pub use generator::{
    frac_generator_1d, frac_generator_1d_with_error, full_generator_1d, full_generator_1d_with_error, GeneratorValue,
    QuadratureSpec,
};
pub use grid::{weight_eval, Extension, GridFn, LocalExpansion, NonlocalIntegrand, WeightSpec};
pub use holder::weighted_holder_seminorm;
pub use solver::{
    padded_knots, stein_check, stein_residual, stein_solution_mc, ResidualReport, SteinCheckReport, SteinConfig,
    SteinRow, SteinSolution, TailFit,
};

/// Right-hand side of the weight bound for `frac(ρ_m)`:
/// `2 (m/(2-α) + 2^{1+α}/(α-m)) a^α ρ_{m-α}(x)`.
pub fn weight_bound_rhs(x: f64, a: f64, alpha: f64, m: f64) -> f64 {
    #[allow(unused_imports)]
    use crate::math::Float;
    2.0 * (m / (2.0 - alpha) + 2f64.powf(1.0 + alpha) / (alpha - m)) * a.powf(alpha) * weight_eval(&WeightSpec::PolyM { m: m - alpha }, x)
}
