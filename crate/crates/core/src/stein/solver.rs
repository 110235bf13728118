//! Monte Carlo solution of the Poisson equation `ℒf = -(g - μ(g))` and the
//! residual check of the Stein identity.
//!
//! `f(x) = ∫_0^T P_t ḡ(x) dt` is estimated with fine Euler chains started at
//! every knot. All knots share the noise of a path (common random numbers),
//! which keeps the differences of `f` across knots, and hence `ℒf`, far less
//! noisy than `f` itself.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::generator::{full_generator_1d_with_error, QuadratureSpec};
use super::grid::{Extension, GridFn};
use crate::{
    em::{dispatch, Dynamics, DynamicsKernel},
    error::{input, param},
    exec::par_map,
    math::stable_kernel_constant,
    models::SdeModel,
    noise::standard_sas,
    rng::{derive_seed, stream},
    stats::{mean, std_dev, Estimate},
    Error, Result,
};
#[allow(unused_imports)]
use crate::math::Float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinConfig {
    /// Knots where the residual is checked; `f` is also computed on a
    /// geometric padding out to `pad_extent`.
    pub knots: Vec<f64>,
    pub horizon: f64,
    pub fine_eta: f64,
    pub n_paths: usize,
    /// Paths are split into this many batches for standard errors.
    pub batches: usize,
    pub seed: u64,
    pub pad_growth: f64,
    pub pad_extent: f64,
    /// Width of the time blocks used by the tail fit.
    pub block_time: f64,
    /// Residual tolerance the run is meant to certify.
    pub target_tol: f64,
}

impl SteinConfig {
    pub fn new(knots: Vec<f64>, n_paths: usize, seed: u64) -> Self {
        Self {
            knots,
            horizon: 15.0,
            fine_eta: 1e-3,
            n_paths,
            batches: 20,
            seed,
            pad_growth: 2.0,
            pad_extent: 1000.0,
            block_time: 0.25,
            target_tol: 5e-2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.knots.len() < 3 || self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(input("need at least three strictly increasing knots"));
        }
        if !(self.horizon > 0.0 && self.fine_eta > 0.0 && self.fine_eta < 1.0 && self.fine_eta < self.horizon) {
            return Err(param("horizon and fine step must be positive with fine_eta < min(1, horizon)"));
        }
        if self.batches < 2 || self.n_paths < self.batches {
            return Err(param("need at least two batches and one path per batch"));
        }
        if !(self.pad_growth > 1.0) || !(self.block_time >= self.fine_eta) || !(self.target_tol > 0.0) {
            return Err(param("pad growth must exceed 1, blocks must span at least one step, tolerance must be positive"));
        }
        Ok(())
    }
}

/// Knots plus geometric padding on both sides, out to `extent`.
pub fn padded_knots(knots: &[f64], growth: f64, extent: f64) -> Vec<f64> {
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let h = knots[1] - knots[0];
    let mut offsets = Vec::new();
    let mut d = growth * h;
    while hi + d < extent || lo - d > -extent {
        offsets.push(d);
        d *= growth;
    }
    offsets.push(d);
    let mut out: Vec<f64> = offsets.iter().rev().map(|d| lo - d).collect();
    out.extend_from_slice(knots);
    out.extend(offsets.iter().map(|d| hi + d));
    out
}

/// Exponential fit `|P_t ḡ| ≈ A e^{-λt}` to the knot-wise envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `None` when fewer than three blocks rise above the noise.
    pub rate: Option<f64>,
    pub amplitude: Option<f64>,
    /// Bound on `sup_x |∫_T^∞ P_t ḡ(x) dt|`.
    pub bound: f64,
    /// Bound on `sup_x |P_T ḡ(x)|`.
    pub envelope_at_horizon: f64,
    /// Block midpoints used by the fit.
    pub fit_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinSolution {
    /// Estimate on the padded grid, with per-knot standard errors.
    pub f: GridFn,
    /// Per-batch estimates on the padded grid.
    pub batch_values: Vec<Vec<f64>>,
    /// Indices of the requested knots inside the padded grid.
    pub requested: Vec<usize>,
    pub tail: TailFit,
    pub mu_g: Estimate,
}

impl SteinSolution {
    pub fn requested_knots(&self) -> Vec<f64> {
        self.requested.iter().map(|&i| self.f.knots()[i]).collect()
    }
}

struct BatchOut {
    f: Vec<f64>,
    /// `blocks x knots` sums of ḡ over steps and paths.
    blocks: Vec<f64>,
}

struct SteinKernel<'a, G> {
    g: &'a G,
    mu: f64,
    knots: &'a [f64],
    alpha: f64,
    eta: f64,
    steps: usize,
    steps_per_block: usize,
    n_blocks: usize,
    batch_bounds: &'a [(usize, usize)],
    seed: u64,
}

impl<G: Fn(f64) -> f64 + Sync> DynamicsKernel for SteinKernel<'_, G> {
    type Output = Vec<BatchOut>;

    fn run<D: Dynamics>(self, dynamics: D) -> Vec<BatchOut> {
        let k = self.knots.len();
        let factor = self.eta.powf(1.0 / self.alpha);
        par_map(self.batch_bounds.len(), |b| {
            let (p0, p1) = self.batch_bounds[b];
            let mut f = vec![0.0; k];
            let mut blocks = vec![0.0; self.n_blocks * k];
            let mut x = vec![0.0; k];
            let mut scratch = [0.0; 2];
            for p in p0..p1 {
                let mut rng = stream(self.seed, p as u64);
                x.copy_from_slice(self.knots);
                for step in 0..=self.steps {
                    // trapezoid weights in time
                    let w = if step == 0 || step == self.steps { 0.5 } else { 1.0 };
                    let row = &mut blocks[(step / self.steps_per_block).min(self.n_blocks - 1) * k..][..k];
                    for j in 0..k {
                        let v = (self.g)(x[j]) - self.mu;
                        f[j] += w * v;
                        row[j] += v;
                    }
                    if step == self.steps {
                        break;
                    }
                    let inc = [factor * standard_sas(self.alpha, &mut rng)];
                    for xj in x.iter_mut() {
                        let mut y = [*xj];
                        dynamics.step(&mut y, self.eta, &inc, &mut scratch);
                        *xj = y[0];
                    }
                }
            }
            let n = (p1 - p0) as f64;
            f.iter_mut().for_each(|v| *v *= self.eta / n);
            BatchOut { f, blocks }
        })
    }
}

/// Monte Carlo `f(x) = ∫_0^T P_t ḡ(x) dt` on the padded grid of `config`.
///
/// The time integral uses the trapezoid rule on the fine Euler chain. The
/// truncation beyond `T` is bounded by fitting `A e^{-λt}` to the largest
/// block mean of `|P_t ḡ|` over the knots, using blocks in the last quarter
/// of the horizon whose signal exceeds three standard errors; if there are
/// fewer than three, the last quarter of the signal-dominated range is used.
pub fn stein_solution_mc<G: Fn(f64) -> f64 + Sync>(model: &SdeModel, g: &G, mu_g: Estimate, config: &SteinConfig) -> Result<SteinSolution> {
    config.validate()?;
    if model.dim() != 1 {
        return Err(param("the Stein solver is one-dimensional"));
    }
    if mu_g.half_width() > 0.5 * config.target_tol {
        return Err(input(alloc::format!(
            "the interval for mu(g) has half-width {} > half the target tolerance {}",
            mu_g.half_width(),
            config.target_tol
        )));
    }
    let knots = padded_knots(&config.knots, config.pad_growth, config.pad_extent);
    let first = knots.iter().position(|&k| k == config.knots[0]).expect("requested knots are embedded");
    let requested: Vec<usize> = (first..first + config.knots.len()).collect();
    let k = knots.len();

    let steps = (config.horizon / config.fine_eta).round() as usize;
    let steps_per_block = ((config.block_time / config.fine_eta).round() as usize).max(1);
    let n_blocks = steps / steps_per_block + usize::from(!steps.is_multiple_of(steps_per_block));
    let nb = config.batches;
    let batch_bounds: Vec<(usize, usize)> = (0..nb).map(|b| (b * config.n_paths / nb, (b + 1) * config.n_paths / nb)).collect();

    let outs = dispatch(
        model,
        SteinKernel {
            g,
            mu: mu_g.value,
            knots: &knots,
            alpha: model.alpha(),
            eta: config.fine_eta,
            steps,
            steps_per_block,
            n_blocks,
            batch_bounds: &batch_bounds,
            seed: derive_seed(config.seed, 0x57e1),
        },
    );
    if outs.iter().any(|o| o.f.iter().any(|v| !v.is_finite())) {
        return Err(Error::Divergence {
            diverged: 1,
            replicas: config.n_paths,
            first_step: 0,
        });
    }

    let batch_values: Vec<Vec<f64>> = outs.iter().map(|o| o.f.clone()).collect();
    let mut values = vec![0.0; k];
    let mut se = vec![0.0; k];
    for j in 0..k {
        let col: Vec<f64> = batch_values.iter().map(|v| v[j]).collect();
        values[j] = mean(&col);
        se[j] = std_dev(&col) / (nb as f64).sqrt();
    }

    // block means of P_t ḡ per batch
    let mut env = Vec::with_capacity(n_blocks);
    let mut env_se = Vec::with_capacity(n_blocks);
    let mut times = Vec::with_capacity(n_blocks);
    for blk in 0..n_blocks {
        let s0 = blk * steps_per_block;
        let s1 = ((blk + 1) * steps_per_block).min(steps + 1);
        let len = (s1 - s0) as f64;
        let (mut e, mut es) = (0.0f64, 0.0f64);
        for j in 0..k {
            let per_batch: Vec<f64> = outs
                .iter()
                .zip(&batch_bounds)
                .map(|(o, (p0, p1))| o.blocks[blk * k + j] / (len * (p1 - p0) as f64))
                .collect();
            e = e.max(mean(&per_batch).abs());
            es = es.max(std_dev(&per_batch) / (nb as f64).sqrt());
        }
        env.push(e);
        env_se.push(es);
        times.push(config.fine_eta * 0.5 * (s0 + s1 - 1) as f64);
    }
    let tail = fit_tail(&times, &env, &env_se, config.horizon)?;

    let f = GridFn::new(knots, values, Extension::ConstantTails)?.with_se(se)?;
    Ok(SteinSolution {
        f,
        batch_values,
        requested,
        tail,
        mu_g,
    })
}

fn fit_tail(times: &[f64], env: &[f64], env_se: &[f64], horizon: f64) -> Result<TailFit> {
    let n = env.len();
    let signal: Vec<usize> = (0..n).filter(|&i| env[i] > 3.0 * env_se[i] && env[i] > 0.0).collect();
    let late: Vec<usize> = signal.iter().copied().filter(|&i| times[i] >= 0.75 * horizon).collect();
    let chosen: Vec<usize> = if late.len() >= 3 {
        late
    } else if signal.len() >= 3 {
        let take = (signal.len() / 4).max(3);
        signal[signal.len() - take..].to_vec()
    } else {
        Vec::new()
    };
    let last = n - 1;
    if chosen.is_empty() {
        let envelope = env[last] + 3.0 * env_se[last];
        return Ok(TailFit {
            rate: None,
            amplitude: None,
            bound: 0.0,
            envelope_at_horizon: envelope,
            fit_times: Vec::new(),
        });
    }
    let ts: Vec<f64> = chosen.iter().map(|&i| times[i]).collect();
    let ls: Vec<f64> = chosen.iter().map(|&i| env[i].ln()).collect();
    let (tm, lm) = (mean(&ts), mean(&ls));
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Horizon(alloc::format!(
            "|P_t g| shows no decay (fitted log-slope {slope:.3e}); increase the horizon"
        )));
    }
    let rate = -slope;
    let amplitude = (lm + rate * tm).exp();
    let at_t = amplitude * (-rate * horizon).exp();
    Ok(TailFit {
        rate: Some(rate),
        amplitude: Some(amplitude),
        bound: at_t / rate,
        envelope_at_horizon: at_t,
        fit_times: ts,
    })
}

/// `r(x) = ℒf(x) + g(x) - μ(g)` at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub quad_error: Vec<f64>,
    pub max_abs: f64,
}

pub fn stein_residual<G: Fn(f64) -> f64>(
    model: &SdeModel,
    f: &GridFn,
    g: &G,
    mu_g: f64,
    points: &[f64],
    quad: &QuadratureSpec,
) -> Result<ResidualReport> {
    let mut residual = Vec::with_capacity(points.len());
    let mut quad_error = Vec::with_capacity(points.len());
    for &x in points {
        let lf = full_generator_1d_with_error(model, f, x, quad)?;
        residual.push(lf.value + g(x) - mu_g);
        quad_error.push(lf.error);
    }
    let max_abs = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ResidualReport {
        x: points.to_vec(),
        residual,
        quad_error,
        max_abs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinRow {
    pub x: f64,
    pub f: f64,
    pub f_se: f64,
    pub residual: f64,
    pub residual_se: f64,
    pub quad_err: f64,
    pub interp_err: f64,
    /// Constant continuation of `f` beyond the outermost knots.
    pub far_field: f64,
    pub tail_envelope: f64,
    pub discretisation: f64,
    pub tol_budget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinCheckReport {
    pub rows: Vec<SteinRow>,
    pub max_abs_residual: f64,
    pub within_budget: bool,
    pub tail: TailFit,
    pub mu_g: Estimate,
}

/// Residual of the Monte Carlo solution at the requested knots, with the
/// per-knot budget
/// `3 SE(r) + quadrature + interpolation + far field + |P_T ḡ| + (η/2)|ℒg| + CI(μ(g))`.
///
/// `SE(r)` comes from the batch spread of the residual. The interpolation
/// term compares with the spline through every other requested knot
/// (divided by 3, the refinement gain of a second-order error) and adds
/// the full change from dropping every other padding knot. The far-field
/// term assumes `f` keeps growing at most like `B log|y - x|` past the
/// outermost knots, with `B` read off the last two knots on each side.
/// The last two terms cover the Euler time discretisation and the
/// uncertainty of the supplied `μ(g)`.
pub fn stein_check<G: Fn(f64) -> f64 + Sync>(
    model: &SdeModel,
    g: &G,
    sol: &SteinSolution,
    config: &SteinConfig,
    quad: &QuadratureSpec,
) -> Result<SteinCheckReport> {
    let xs = sol.requested_knots();
    let mu = sol.mu_g.value;
    let main = stein_residual(model, &sol.f, g, mu, &xs, quad)?;

    let knots = sol.f.knots().to_vec();
    let per_batch = sol
        .batch_values
        .iter()
        .map(|v| {
            let fb = GridFn::new(knots.clone(), v.clone(), Extension::ConstantTails)?;
            stein_residual(model, &fb, g, mu, &xs, quad).map(|r| r.residual)
        })
        .collect::<Result<Vec<_>>>()?;
    let nb = per_batch.len() as f64;

    // every other requested knot, same padding
    let keep: Vec<usize> = (0..knots.len())
        .filter(|i| match sol.requested.iter().position(|r| r == i) {
            Some(p) => p % 2 == 0 || p + 1 == sol.requested.len(),
            None => true,
        })
        .collect();
    let coarse = GridFn::new(
        keep.iter().map(|&i| knots[i]).collect(),
        keep.iter().map(|&i| sol.f.values()[i]).collect(),
        Extension::ConstantTails,
    )?;
    let coarse_r = stein_residual(model, &coarse, g, mu, &xs, quad)?;

    // every other padding knot, counted outwards; the outermost ones stay
    let (first, last) = (sol.requested[0], sol.requested[sol.requested.len() - 1]);
    let sparse: Vec<usize> = (0..knots.len())
        .filter(|&i| {
            let out = first.saturating_sub(i) + i.saturating_sub(last);
            out % 2 == 0 || i == 0 || i + 1 == knots.len()
        })
        .collect();
    let sparse_pad = GridFn::new(
        sparse.iter().map(|&i| knots[i]).collect(),
        sparse.iter().map(|&i| sol.f.values()[i]).collect(),
        Extension::ConstantTails,
    )?;
    let sparse_r = stein_residual(model, &sparse_pad, g, mu, &xs, quad)?;
    let alpha = model.alpha();
    let kernel = stable_kernel_constant(alpha);
    let fv = sol.f.values();
    let nk = knots.len();

    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let g_knots: Vec<f64> = {
        let n = ((hi - lo) / 0.02).ceil() as usize;
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    };
    let g_grid = GridFn::sample(g, g_knots, Extension::ConstantTails)?;

    let se = sol.f.se().expect("solver attaches standard errors");
    let mut rows = Vec::with_capacity(xs.len());
    let mut within = true;
    for (i, &x) in xs.iter().enumerate() {
        let col: Vec<f64> = per_batch.iter().map(|r| r[i]).collect();
        let r_se = std_dev(&col) / nb.sqrt();
        let interp = (main.residual[i] - coarse_r.residual[i]).abs() / 3.0 + (main.residual[i] - sparse_r.residual[i]).abs();
        let sigma = model.scalar_diffusion(&[x]).map_or(1.0, f64::abs);
        let side = |outer: usize, inner: usize| {
            let (d_out, d_in) = ((knots[outer] - x).abs(), (knots[inner] - x).abs());
            let b = (fv[outer] - fv[inner]).abs() / (d_out / d_in).ln();
            b * d_out.powf(-alpha)
        };
        let far = kernel * sigma.powf(alpha) * (side(0, 1) + side(nk - 1, nk - 2)) / (alpha * alpha);
        let lg = full_generator_1d_with_error(model, &g_grid, x, quad)?.value;
        let disc = 0.5 * config.fine_eta * lg.abs();
        let budget = 3.0 * r_se + main.quad_error[i] + interp + far + sol.tail.envelope_at_horizon + disc + sol.mu_g.half_width();
        within &= main.residual[i].abs() <= budget;
        let j = sol.requested[i];
        rows.push(SteinRow {
            x,
            f: sol.f.values()[j],
            f_se: se[j],
            residual: main.residual[i],
            residual_se: r_se,
            quad_err: main.quad_error[i],
            interp_err: interp,
            far_field: far,
            tail_envelope: sol.tail.envelope_at_horizon,
            discretisation: disc,
            tol_budget: budget,
        });
    }
    Ok(SteinCheckReport {
        rows,
        max_abs_residual: main.max_abs,
        within_budget: within,
        tail: sol.tail.clone(),
        mu_g: sol.mu_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wasserstein::phi;

    fn knots() -> Vec<f64> {
        (0..9).map(|i| -2.0 + 0.5 * i as f64).collect()
    }

    #[test]
    fn padding_is_symmetric_and_reaches_extent() {
        let k = padded_knots(&knots(), 2.0, 30.0);
        assert!(k[0] <= -30.0 && k[k.len() - 1] >= 30.0);
        for (a, b) in k.iter().zip(k.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(k.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_g_gives_zero() {
        let ou = SdeModel::ou(1, 1.5).unwrap();
        let mut cfg = SteinConfig::new(knots(), 40, 1);
        cfg.horizon = 2.0;
        cfg.fine_eta = 0.01;
        cfg.batches = 4;
        let sol = stein_solution_mc(&ou, &|_| 0.7, Estimate::exact(0.7), &cfg).unwrap();
        assert!(sol.f.values().iter().all(|v| v.abs() < 1e-12));
        let rep = stein_check(&ou, &|_| 0.7, &sol, &cfg, &QuadratureSpec::default()).unwrap();
        assert!(rep.max_abs_residual < 1e-10);
    }

    #[test]
    fn wide_mu_interval_is_refused() {
        let ou = SdeModel::ou(1, 1.5).unwrap();
        let cfg = SteinConfig::new(knots(), 40, 1);
        let mu = Estimate {
            value: 1.0,
            lo: 0.9,
            hi: 1.1,
        };
        assert!(matches!(stein_solution_mc(&ou, &phi, mu, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn small_run_is_even_and_reproducible() {
        let ou = SdeModel::ou(1, 1.5).unwrap();
        let mut cfg = SteinConfig::new(knots(), 400, 3);
        // far knots would not decay within this horizon
        cfg.pad_extent = 30.0;
        cfg.horizon = 4.0;
        cfg.fine_eta = 0.01;
        cfg.batches = 8;
        let mu = crate::ou::ou_phi_mean(crate::ou::OuMeasure::Invariant, 1.5, 0.1).unwrap();
        let a = stein_solution_mc(&ou, &phi, Estimate::exact(mu), &cfg).unwrap();
        let b = stein_solution_mc(&ou, &phi, Estimate::exact(mu), &cfg).unwrap();
        assert_eq!(a.f, b.f);
        let se = a.f.se().unwrap();
        let v = a.f.values();
        let n = v.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            assert!((v[i] - v[j]).abs() <= 4.0 * (se[i] + se[j]) + 1e-9);
        }
    }
}
