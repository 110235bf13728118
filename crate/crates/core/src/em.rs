//! Euler–Maruyama chains and invariant-measure sampling.
//!
//! The stable scheme is
//! `Y_{k+1} = Y_k + η b(Y_k) + σ(Y_k) (L_{η(k+1)} - L_{ηk})`, the Pareto
//! scheme replaces the stable increment by `(η/β)^{1/α} Z_{k+1}` with `Z`
//! Pareto-tailed and `β = α Γ(d/2) / (2 π^{d/2})`.
//!
//! `μ_η` is sampled with independent replicas: replica `r` runs its own
//! chain on `rng::stream(seed, r)` for `burn_in_steps` steps and contributes
//! its final state (plus optional thinned post-burn-in states). Only
//! non-finite states count as divergence; large heavy-tailed excursions are
//! kept.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    error::param,
    exec::par_map,
    measure::{EmpiricalMeasure, Provenance},
    models::{ScalarCoefficients, ScalarKernel, SdeModel},
    noise::{pareto_into, sphere_area, standard_isotropic_into, standard_sas},
    rng::{derive_seed, stream},
    stats::{bootstrap_mean, Estimate},
    Error, Result,
};

/// Time (in model units) covered by the default burn-in.
pub const DEFAULT_BURN_IN_TIME: f64 = 20.0;

/// Fraction of diverged replicas above which a run is aborted.
pub const MAX_DIVERGENCE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    StableEm,
    ParetoEm,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::StableEm => "stable_em",
            Scheme::ParetoEm => "pareto_em",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub eta: f64,
    pub burn_in_steps: usize,
    pub n_replicas: usize,
    /// 0: each replica contributes only its post-burn-in state.
    pub post_burn_steps_per_replica: usize,
    /// Keep every `thin`-th post-burn-in state (and trajectory state).
    pub thin: usize,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl EmConfig {
    /// Stable scheme with the default burn-in of `ceil(20 / η)` steps.
    pub fn new(eta: f64, n_replicas: usize, x0: Vec<f64>, seed: u64) -> Self {
        Self {
            eta,
            burn_in_steps: default_burn_in(eta),
            n_replicas,
            post_burn_steps_per_replica: 0,
            thin: 1,
            x0,
            seed,
            scheme: Scheme::StableEm,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(param(alloc::format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.n_replicas == 0 {
            return Err(param("need at least one replica"));
        }
        if self.burn_in_steps == 0 {
            return Err(param("burn-in must be at least one step"));
        }
        if self.thin == 0 {
            return Err(param("thinning stride must be at least 1"));
        }
        if self.x0.len() != dim {
            return Err(param(alloc::format!(
                "x0 has length {}, model dimension is {dim}",
                self.x0.len()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(param("x0 must be finite"));
        }
        Ok(())
    }
}

pub fn default_burn_in(eta: f64) -> usize {
    (DEFAULT_BURN_IN_TIME / eta).ceil().max(1.0) as usize
}

/// Pareto inverse temperature `β = α Γ(d/2) / (2 π^{d/2})`.
pub fn pareto_beta(alpha: f64, dim: usize) -> f64 {
    alpha / sphere_area(dim)
}

/// `y + η b(y) + σ(y) increment`.
pub fn em_step(model: &SdeModel, y: &[f64], eta: f64, increment: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    let mut scratch = vec![0.0; 2 * y.len()];
    em_step_in_place(model, &mut out, eta, increment, &mut scratch);
    out
}

fn em_step_in_place(model: &SdeModel, y: &mut [f64], eta: f64, increment: &[f64], scratch: &mut [f64]) {
    let d = y.len();
    let (b, s) = scratch.split_at_mut(d);
    model.drift_into(y, b);
    model.apply_diffusion(y, increment, &mut s[..d]);
    for i in 0..d {
        y[i] = y[i] + eta * b[i] + s[i];
    }
}

/// `y + η b(y) + (η/β)^{1/α} σ(y) z`.
pub fn pareto_em_step(model: &SdeModel, y: &[f64], eta: f64, z: &[f64]) -> Vec<f64> {
    let f = pareto_factor(model.alpha(), model.dim(), eta);
    let inc: Vec<f64> = z.iter().map(|v| f * v).collect();
    em_step(model, y, eta, &inc)
}

fn pareto_factor(alpha: f64, dim: usize, eta: f64) -> f64 {
    (eta / pareto_beta(alpha, dim)).powf(1.0 / alpha)
}

/// Source of the per-step noise term fed to [`em_step`].
pub trait IncrementSource {
    fn fill(&mut self, out: &mut [f64]);
}

/// `L_{t+η} - L_t` for the unit-scale isotropic law.
pub struct StableIncrements<R> {
    alpha: f64,
    factor: f64,
    rng: R,
}

impl<R: Rng> StableIncrements<R> {
    pub fn new(alpha: f64, eta: f64, rng: R) -> Self {
        Self {
            alpha,
            factor: eta.powf(1.0 / alpha),
            rng,
        }
    }
}

impl<R: Rng> IncrementSource for StableIncrements<R> {
    fn fill(&mut self, out: &mut [f64]) {
        draw_standard(self.alpha, &mut self.rng, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// `(η/β)^{1/α} Z` with `Z` Pareto.
pub struct ParetoIncrements<R> {
    alpha: f64,
    factor: f64,
    rng: R,
}

impl<R: Rng> ParetoIncrements<R> {
    pub fn new(alpha: f64, dim: usize, eta: f64, rng: R) -> Self {
        Self {
            alpha,
            factor: pareto_factor(alpha, dim, eta),
            rng,
        }
    }
}

impl<R: Rng> IncrementSource for ParetoIncrements<R> {
    fn fill(&mut self, out: &mut [f64]) {
        pareto_into(self.alpha, &mut self.rng, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// Deterministic chains, for testing the drift part alone.
pub struct ZeroIncrements;

impl IncrementSource for ZeroIncrements {
    fn fill(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[inline]
fn draw_standard<R: Rng + ?Sized>(alpha: f64, rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = standard_sas(alpha, rng);
    } else {
        standard_isotropic_into(alpha, rng, out);
    }
}

/// Recorded chain states (every `thin`-th, starting with `x0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub states: Vec<f64>,
    pub steps_taken: usize,
    /// Step index at which a non-finite state appeared; the chain stops.
    pub divergence: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

/// Runs `burn_in_steps + post_burn_steps_per_replica` steps of the
/// configured scheme from `x0`.
pub fn simulate_chain<R: Rng>(model: &SdeModel, config: &EmConfig, rng: R) -> Result<Trajectory> {
    config.validate(model.dim())?;
    let traj = match config.scheme {
        Scheme::StableEm => simulate_chain_with(
            model,
            config,
            &mut StableIncrements::new(model.alpha(), config.eta, rng),
        ),
        Scheme::ParetoEm => simulate_chain_with(
            model,
            config,
            &mut ParetoIncrements::new(model.alpha(), model.dim(), config.eta, rng),
        ),
    };
    Ok(traj)
}

/// Like [`simulate_chain`] with an arbitrary increment source.
pub fn simulate_chain_with<S: IncrementSource>(model: &SdeModel, config: &EmConfig, source: &mut S) -> Trajectory {
    let d = model.dim();
    let total = config.burn_in_steps + config.post_burn_steps_per_replica;
    let mut y = config.x0.clone();
    let mut inc = vec![0.0; d];
    let mut scratch = vec![0.0; 2 * d];
    let mut states = y.clone();
    for step in 0..total {
        source.fill(&mut inc);
        em_step_in_place(model, &mut y, config.eta, &inc, &mut scratch);
        if y.iter().any(|v| !v.is_finite()) {
            return Trajectory {
                dim: d,
                states,
                steps_taken: step + 1,
                divergence: Some(step),
            };
        }
        if (step + 1) % config.thin == 0 {
            states.extend_from_slice(&y);
        }
    }
    Trajectory {
        dim: d,
        states,
        steps_taken: total,
        divergence: None,
    }
}

/// One step of a chain with fixed coefficients; `y` and `inc` have the
/// model's dimension.
pub(crate) trait Dynamics: Sync {
    fn step(&self, y: &mut [f64], eta: f64, inc: &[f64], scratch: &mut [f64]);
}

pub(crate) struct ScalarDynamics<C>(pub C);

impl<C: ScalarCoefficients> Dynamics for ScalarDynamics<C> {
    #[inline(always)]
    fn step(&self, y: &mut [f64], eta: f64, inc: &[f64], _scratch: &mut [f64]) {
        let x = y[0];
        y[0] = x + eta * self.0.drift(x) + self.0.sigma(x) * inc[0];
    }
}

pub(crate) struct VectorDynamics<'a>(pub &'a SdeModel);

impl Dynamics for VectorDynamics<'_> {
    fn step(&self, y: &mut [f64], eta: f64, inc: &[f64], scratch: &mut [f64]) {
        em_step_in_place(self.0, y, eta, inc, scratch);
    }
}

pub(crate) trait DynamicsKernel {
    type Output;
    fn run<D: Dynamics>(self, dynamics: D) -> Self::Output;
}

struct ScalarAdapter<K>(K);

impl<K: DynamicsKernel> ScalarKernel for ScalarAdapter<K> {
    type Output = K::Output;
    fn run<C: ScalarCoefficients>(self, coeffs: C) -> K::Output {
        self.0.run(ScalarDynamics(coeffs))
    }
}

/// Runs `kernel` with the fastest available dynamics for `model`.
pub(crate) fn dispatch<K: DynamicsKernel>(model: &SdeModel, kernel: K) -> K::Output {
    if model.dim() == 1 {
        model
            .with_scalar(ScalarAdapter(kernel))
            .expect("dimension checked")
    } else {
        kernel.run(VectorDynamics(model))
    }
}

enum Replica {
    Done(Vec<f64>),
    Diverged(usize),
}

struct ReplicaKernel<'a> {
    config: &'a EmConfig,
    alpha: f64,
    dim: usize,
}

impl DynamicsKernel for ReplicaKernel<'_> {
    type Output = Vec<Replica>;

    fn run<D: Dynamics>(self, dynamics: D) -> Vec<Replica> {
        let cfg = self.config;
        let (alpha, d) = (self.alpha, self.dim);
        let factor = match cfg.scheme {
            Scheme::StableEm => cfg.eta.powf(1.0 / alpha),
            Scheme::ParetoEm => pareto_factor(alpha, d, cfg.eta),
        };
        par_map(cfg.n_replicas, |r| {
            let mut rng = stream(cfg.seed, r as u64);
            let mut y = cfg.x0.clone();
            let mut inc = vec![0.0; d];
            let mut scratch = vec![0.0; 2 * d];
            let total = cfg.burn_in_steps + cfg.post_burn_steps_per_replica;
            let mut kept = Vec::with_capacity(d * (1 + cfg.post_burn_steps_per_replica / cfg.thin));
            for step in 0..total {
                match cfg.scheme {
                    Scheme::StableEm => draw_standard(alpha, &mut rng, &mut inc),
                    Scheme::ParetoEm => pareto_into(alpha, &mut rng, &mut inc),
                }
                for v in inc.iter_mut() {
                    *v *= factor;
                }
                dynamics.step(&mut y, cfg.eta, &inc, &mut scratch);
                if !y.iter().all(|v| v.is_finite()) {
                    return Replica::Diverged(step);
                }
                let after = step + 1;
                if after == cfg.burn_in_steps
                    || (after > cfg.burn_in_steps && (after - cfg.burn_in_steps).is_multiple_of(cfg.thin))
                {
                    kept.extend_from_slice(&y);
                }
            }
            Replica::Done(kept)
        })
    }
}

/// Approximately i.i.d. draws from `μ_η`: one post-burn-in state per
/// replica, plus thinned extras when `post_burn_steps_per_replica > 0`.
/// Points are in replica order, so the output does not depend on the
/// number of workers.
pub fn sample_invariant(model: &SdeModel, config: &EmConfig) -> Result<EmpiricalMeasure> {
    config.validate(model.dim())?;
    let outcomes = dispatch(
        model,
        ReplicaKernel {
            config,
            alpha: model.alpha(),
            dim: model.dim(),
        },
    );
    let mut points = Vec::new();
    let mut diverged = 0usize;
    let mut first_step = usize::MAX;
    for o in outcomes {
        match o {
            Replica::Done(p) => points.extend(p),
            Replica::Diverged(s) => {
                diverged += 1;
                first_step = first_step.min(s);
            }
        }
    }
    check_divergence(diverged, config.n_replicas, first_step)?;
    let meta = Provenance {
        model: model.name().to_string(),
        alpha: model.alpha(),
        eta: config.eta,
        seed: config.seed,
        scheme: config.scheme.label().to_string(),
        burn_in_steps: config.burn_in_steps,
        n_replicas: config.n_replicas,
        n_points: points.len() / model.dim(),
        diverged,
    };
    EmpiricalMeasure::new(model.dim(), points, meta)
}

fn check_divergence(diverged: usize, replicas: usize, first_step: usize) -> Result<()> {
    if diverged as f64 > MAX_DIVERGENCE_FRACTION * replicas as f64 || diverged == replicas {
        return Err(Error::Divergence {
            diverged,
            replicas,
            first_step,
        });
    }
    Ok(())
}

/// `(1/n) Σ |Y_j|^m` with a 1000-resample bootstrap 95% interval.
/// Requires `0 < m < α`: stable moments of order `>= α` are infinite.
pub fn estimate_fractional_moment(measure: &EmpiricalMeasure, m: f64, alpha: f64, seed: u64) -> Result<Estimate> {
    if !(m > 0.0 && m < alpha) {
        return Err(param(alloc::format!(
            "moment order must satisfy 0 < m < alpha = {alpha}; got m = {m} (moments of order >= alpha are infinite)"
        )));
    }
    let values: Vec<f64> = measure
        .points()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt().powf(m))
        .collect();
    let mut rng = stream(seed, 0);
    bootstrap_mean(&values, 1000, &mut rng)
}

/// Fine-step surrogate for `μ`: `μ_{η_ref}` sampled with the same burn-in
/// time as `config`. Requires `η_ref <= config.eta / 8`.
pub fn fine_reference_measure(model: &SdeModel, eta_ref: f64, config: &EmConfig) -> Result<EmpiricalMeasure> {
    if !(eta_ref > 0.0 && eta_ref <= config.eta / 8.0) {
        return Err(param(alloc::format!(
            "reference step {eta_ref} must be at most eta / 8 = {}",
            config.eta / 8.0
        )));
    }
    let burn_in_time = config.burn_in_steps as f64 * config.eta;
    let cfg = EmConfig {
        eta: eta_ref,
        burn_in_steps: (burn_in_time / eta_ref).ceil() as usize,
        seed: derive_seed(config.seed, 0x7265_6665),
        ..config.clone()
    };
    sample_invariant(model, &cfg)
}

/// How the reference sample in a coupled run is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoupledReference {
    /// Exact OU transition `X' = e^{-η} X + ((1 - e^{-αη})/α)^{1/α} ξ`,
    /// driven by the same standard draws `ξ` as the Euler chain.
    OuAnalytic,
    /// A fine Euler chain; each coarse increment is the sum of the fine
    /// increments it spans.
    FineEm { eta_ref: f64 },
}

/// Study and reference samples for one step size, paired by replica.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub eta: f64,
    pub study: EmpiricalMeasure,
    pub reference: EmpiricalMeasure,
}

/// Draws `n` replica pairs `(Y_η, X_ref)` for every `η` in `etas`, both
/// chains driven by one Lévy path and run for `burn_in_time`. The pairing
/// keeps the two marginals exact while making their empirical distance a
/// low-variance estimate of the distance between the laws.
pub fn coupled_invariant_pairs(
    model: &SdeModel,
    etas: &[f64],
    reference: CoupledReference,
    n: usize,
    burn_in_time: f64,
    x0: &[f64],
    seed: u64,
) -> Result<Vec<CoupledPair>> {
    if etas.is_empty() || n == 0 {
        return Err(param("need at least one step size and one replica"));
    }
    if x0.len() != model.dim() {
        return Err(param("x0 length does not match the model dimension"));
    }
    if etas.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(param("step sizes must lie in (0, 1)"));
    }
    if !(burn_in_time > 0.0) {
        return Err(param("burn-in time must be positive"));
    }
    match reference {
        CoupledReference::OuAnalytic => {
            if !model.is_ou() {
                return Err(param("the analytic reference exists only for the OU model"));
            }
            etas.iter()
                .enumerate()
                .map(|(j, &eta)| {
                    let steps = (burn_in_time / eta).ceil() as usize;
                    let out = dispatch(
                        model,
                        OuCoupledKernel {
                            alpha: model.alpha(),
                            dim: model.dim(),
                            eta,
                            steps,
                            n,
                            x0,
                            seed: derive_seed(seed, j as u64),
                        },
                    );
                    assemble(model, eta, steps, derive_seed(seed, j as u64), n, out, 1)
                        .map(|mut v| v.remove(0))
                })
                .collect()
        }
        CoupledReference::FineEm { eta_ref } => {
            let mut ratios = Vec::with_capacity(etas.len());
            for &eta in etas {
                let r = eta / eta_ref;
                if !(r >= 1.0) || (r - r.round()).abs() > 1e-9 {
                    return Err(param(alloc::format!(
                        "eta {eta} is not an integer multiple of the reference step {eta_ref}"
                    )));
                }
                ratios.push(r.round() as u64);
            }
            let l = ratios.iter().fold(1u64, |acc, &r| lcm(acc, r));
            let fine_steps = ((burn_in_time / eta_ref).ceil() as u64).div_ceil(l) * l;
            let out = dispatch(
                model,
                FineCoupledKernel {
                    alpha: model.alpha(),
                    dim: model.dim(),
                    eta_ref,
                    etas,
                    ratios: &ratios,
                    fine_steps,
                    n,
                    x0,
                    seed,
                },
            );
            assemble(model, eta_ref, fine_steps as usize, seed, n, out, etas.len()).map(|pairs| {
                pairs
                    .into_iter()
                    .zip(etas)
                    .map(|(mut p, &eta)| {
                        p.eta = eta;
                        p.study.meta.eta = eta;
                        p.study.meta.burn_in_steps = (fine_steps / (eta / eta_ref).round() as u64) as usize;
                        p
                    })
                    .collect()
            })
        }
    }
}

/// Per replica: `k` study states followed by the reference state, each of
/// length `dim`; `None` if any chain diverged.
type CoupledOut = Vec<core::result::Result<Vec<f64>, usize>>;

fn assemble(
    model: &SdeModel,
    eta: f64,
    steps: usize,
    seed: u64,
    n: usize,
    out: CoupledOut,
    k: usize,
) -> Result<Vec<CoupledPair>> {
    let d = model.dim();
    let mut study = vec![Vec::with_capacity(n * d); k];
    let mut reference = Vec::with_capacity(n * d);
    let mut diverged = 0;
    let mut first = usize::MAX;
    for o in out {
        match o {
            Ok(v) => {
                for (j, s) in study.iter_mut().enumerate() {
                    s.extend_from_slice(&v[j * d..(j + 1) * d]);
                }
                reference.extend_from_slice(&v[k * d..(k + 1) * d]);
            }
            Err(step) => {
                diverged += 1;
                first = first.min(step);
            }
        }
    }
    check_divergence(diverged, n, first)?;
    let meta = |label: &str, e: f64| Provenance {
        model: model.name().to_string(),
        alpha: model.alpha(),
        eta: e,
        seed,
        scheme: label.to_string(),
        burn_in_steps: steps,
        n_replicas: n,
        n_points: n - diverged,
        diverged,
    };
    let reference = EmpiricalMeasure::new(d, reference, meta("reference", eta))?;
    study
        .into_iter()
        .map(|pts| {
            Ok(CoupledPair {
                eta,
                study: EmpiricalMeasure::new(d, pts, meta("stable_em", eta))?,
                reference: reference.clone(),
            })
        })
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

struct OuCoupledKernel<'a> {
    alpha: f64,
    dim: usize,
    eta: f64,
    steps: usize,
    n: usize,
    x0: &'a [f64],
    seed: u64,
}

impl DynamicsKernel for OuCoupledKernel<'_> {
    type Output = CoupledOut;

    fn run<D: Dynamics>(self, dynamics: D) -> CoupledOut {
        let (alpha, d, eta) = (self.alpha, self.dim, self.eta);
        let em_factor = eta.powf(1.0 / alpha);
        let decay = (-eta).exp();
        let exact_factor = ((1.0 - (-alpha * eta).exp()) / alpha).powf(1.0 / alpha);
        par_map(self.n, |r| {
            let mut rng = stream(self.seed, r as u64);
            let mut y = self.x0.to_vec();
            let mut x = self.x0.to_vec();
            let mut xi = vec![0.0; d];
            let mut inc = vec![0.0; d];
            let mut scratch = vec![0.0; 2 * d];
            for step in 0..self.steps {
                draw_standard(alpha, &mut rng, &mut xi);
                for i in 0..d {
                    inc[i] = em_factor * xi[i];
                    x[i] = decay * x[i] + exact_factor * xi[i];
                }
                dynamics.step(&mut y, eta, &inc, &mut scratch);
                if !y.iter().chain(&x).all(|v| v.is_finite()) {
                    return Err(step);
                }
            }
            y.extend_from_slice(&x);
            Ok(y)
        })
    }
}

struct FineCoupledKernel<'a> {
    alpha: f64,
    dim: usize,
    eta_ref: f64,
    etas: &'a [f64],
    ratios: &'a [u64],
    fine_steps: u64,
    n: usize,
    x0: &'a [f64],
    seed: u64,
}

impl DynamicsKernel for FineCoupledKernel<'_> {
    type Output = CoupledOut;

    fn run<D: Dynamics>(self, dynamics: D) -> CoupledOut {
        let (alpha, d) = (self.alpha, self.dim);
        let k = self.etas.len();
        let fine_factor = self.eta_ref.powf(1.0 / alpha);
        par_map(self.n, |r| {
            let mut rng = stream(self.seed, r as u64);
            let mut fine = self.x0.to_vec();
            let mut coarse: Vec<f64> = self.x0.iter().cycle().take(k * d).copied().collect();
            let mut acc = vec![0.0; k * d];
            let mut inc = vec![0.0; d];
            let mut scratch = vec![0.0; 2 * d];
            for step in 0..self.fine_steps {
                draw_standard(alpha, &mut rng, &mut inc);
                for v in inc.iter_mut() {
                    *v *= fine_factor;
                }
                for j in 0..k {
                    for i in 0..d {
                        acc[j * d + i] += inc[i];
                    }
                }
                dynamics.step(&mut fine, self.eta_ref, &inc, &mut scratch);
                let next = step + 1;
                for j in 0..k {
                    if next % self.ratios[j] == 0 {
                        let (y, a) = (&mut coarse[j * d..(j + 1) * d], &mut acc[j * d..(j + 1) * d]);
                        dynamics.step(y, self.etas[j], a, &mut scratch);
                        a.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                if !fine.iter().all(|v| v.is_finite()) || !coarse.iter().all(|v| v.is_finite()) {
                    return Err(step as usize);
                }
            }
            coarse.extend_from_slice(&fine);
            Ok(coarse)
        })
    }
}
