//! Float helpers that work with and without `std`.
//!
//! With `std` the inherent `f64` methods win method resolution; without it
//! the `num_traits::Float` impls (backed by `libm`) fill in.

#[allow(unused_imports)]
pub(crate) use num_traits::Float;

pub(crate) const PI: f64 = core::f64::consts::PI;

pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Lévy-measure normalisation: the operator
/// `c(α) ∫ [f(x+z) - f(x) - 1_{|z|≤1} z f'(x)] dz / |z|^{1+α}` has symbol
/// `-|ξ|^α` exactly when `c(α) = Γ(1+α) sin(πα/2) / π`.
pub(crate) fn stable_kernel_constant(alpha: f64) -> f64 {
    gamma(1.0 + alpha) * (PI * alpha / 2.0).sin() / PI
}
