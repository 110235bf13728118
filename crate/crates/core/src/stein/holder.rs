use super::grid::{weight_eval, GridFn, WeightSpec};
#[allow(unused_imports)]
use crate::math::Float;
use crate::{error::param, Error, Result};

/// `max ρ(x) |δ^m_v f(x)| / |v|^order` over knots `x` and offsets `v`,
/// with `m = ceil(order)` and `δ^m_v f(x) = Σ_i (-1)^{m-i} C(m,i) f(x + iv)`.
///
/// Only knots with `x + m v` inside the grid contribute. Finite sampling
/// makes this a lower bound on the seminorm.
pub fn weighted_holder_seminorm(f: &GridFn, order: f64, weight: &WeightSpec, v_set: &[f64]) -> Result<f64> {
    if !(order > 0.0 && order < 3.0) {
        return Err(param(alloc::format!("order must lie in (0, 3), got {order}")));
    }
    if v_set.is_empty() || v_set.iter().any(|v| *v == 0.0 || v.abs() > 1.0 || !v.is_finite()) {
        return Err(param("offsets must be non-zero with |v| <= 1"));
    }
    weight.validate()?;
    let m = order.ceil() as usize;
    let binom: [f64; 4] = match m {
        1 => [-1.0, 1.0, 0.0, 0.0],
        2 => [1.0, -2.0, 1.0, 0.0],
        _ => [-1.0, 3.0, -3.0, 1.0],
    };
    let (lo, hi) = (f.lo(), f.hi());
    let span = hi - lo;
    let mut best = 0.0f64;
    for &v in v_set {
        if (m as f64) * v.abs() > span {
            return Err(Error::Domain(alloc::format!("offset {v} exceeds the grid span {span}")));
        }
        for &x in f.knots() {
            let end = x + m as f64 * v;
            if end < lo || end > hi {
                continue;
            }
            let d: f64 = (0..=m).map(|i| binom[i] * f.eval(x + i as f64 * v)).sum();
            best = best.max(weight_eval(weight, x) * d.abs() / v.abs().powf(order));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stein::grid::Extension;
    use alloc::vec::Vec;

    fn knots() -> Vec<f64> {
        (0..41).map(|i| -5.0 + 0.25 * i as f64).collect()
    }

    #[test]
    fn zero_and_linear() {
        let z = GridFn::sample(|_| 0.0, knots(), Extension::ConstantTails).unwrap();
        let l = GridFn::sample(|x| 2.0 * x - 1.0, knots(), Extension::LinearTails).unwrap();
        let v = [0.25, 0.5, -1.0];
        assert_eq!(weighted_holder_seminorm(&z, 1.0, &WeightSpec::Log, &v).unwrap(), 0.0);
        assert!(weighted_holder_seminorm(&l, 1.5, &WeightSpec::PolyM { m: 1.0 }, &v).unwrap() < 1e-12);
        // first differences of a line: |2v| / |v|
        let s = weighted_holder_seminorm(&l, 1.0, &WeightSpec::PolyM { m: 0.0 }, &v).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn offsets_are_checked() {
        let short = GridFn::sample(|x| x, alloc::vec![0.0, 0.5, 1.0], Extension::LinearTails).unwrap();
        assert!(matches!(
            weighted_holder_seminorm(&short, 2.5, &WeightSpec::Log, &[0.5]),
            Err(Error::Domain(_))
        ));
        assert!(weighted_holder_seminorm(&short, 1.0, &WeightSpec::Log, &[2.0]).is_err());
    }
}
