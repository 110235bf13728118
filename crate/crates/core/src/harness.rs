//! Step-size sweeps: distance to the reference measure per `η`, log-log
//! slope fit and a verdict against the theoretical rate.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::math::Float;
use crate::{
    em::{coupled_invariant_pairs, CoupledPair, CoupledReference},
    error::param,
    models::SdeModel,
    ou,
    rng::{derive_seed, stream},
    stats::{bootstrap_mean, Estimate},
    wasserstein::{check_cost_for_alpha, distance_with_ci, CostSpec, DistanceOptions},
    Error, Result,
};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone)]
pub struct RateStudyConfig {
    pub model: SdeModel,
    pub cost: CostSpec,
    /// Strictly decreasing, all in `(0, 1)`.
    pub etas: Vec<f64>,
    pub samples_per_eta: usize,
    pub reference: CoupledReference,
    pub seed: u64,
    pub n_boot: usize,
    pub burn_in_time: f64,
    pub x0: Vec<f64>,
    pub assignment_cap: usize,
    /// Rate-loss parameter of the `α <= 1` rate; reported, not fitted.
    pub epsilon: f64,
}

impl RateStudyConfig {
    pub fn new(model: SdeModel, cost: CostSpec, etas: Vec<f64>, samples_per_eta: usize, reference: CoupledReference, seed: u64) -> Self {
        let dim = model.dim();
        Self {
            model,
            cost,
            etas,
            samples_per_eta,
            reference,
            seed,
            n_boot: 200,
            burn_in_time: crate::em::DEFAULT_BURN_IN_TIME,
            x0: alloc::vec![0.0; dim],
            assignment_cap: crate::wasserstein::ASSIGNMENT_CAP,
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_cost_for_alpha(&self.cost, self.model.alpha())?;
        if self.etas.len() < 3 {
            return Err(param("a rate study needs at least three step sizes"));
        }
        if self.etas.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || self.etas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(param("step sizes must be strictly decreasing and lie in (0, 1)"));
        }
        if self.samples_per_eta < 1000 {
            return Err(param("need at least 1000 samples per step size"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(param("epsilon must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub eta: f64,
    pub distance: Estimate,
    pub n: usize,
    pub dual_lower: f64,
    pub sorted_upper: Option<f64>,
    pub blocks: usize,
    pub method: String,
    /// Closed-form distance, when one exists (OU with Euclidean cost).
    pub exact: Option<f64>,
    /// Mean cost of the synchronous coupling, `E d(Y_η, Y_ref)`: an upper
    /// bound on the distance that carries no sampling floor.
    pub coupling: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub se: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    FasterThanBound,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub schema: u32,
    pub model: String,
    pub alpha: f64,
    pub cost: CostSpec,
    pub reference: CoupledReference,
    pub seed: u64,
    pub samples_per_eta: usize,
    pub epsilon: f64,
    pub results: Vec<EtaResult>,
    pub fit: SlopeFit,
    pub theoretical_rate: f64,
    pub verdict: Verdict,
    /// Fit and verdict for the coupling upper bound.
    pub coupling_fit: SlopeFit,
    pub coupling_verdict: Verdict,
}

/// Exponent of the upper bound: `1/α` for the Euclidean cost; for
/// `|x-y|^γ ∧ 1`, `γ ∧ (2α - 1 - ε)` when `α ∈ (1/2, 1]` and `γ/α` when
/// `α > 1`.
pub fn theoretical_rate(alpha: f64, cost: &CostSpec, epsilon: f64) -> Result<f64> {
    cost.validate()?;
    match *cost {
        CostSpec::Euclidean => {
            if !(alpha > 1.0 && alpha < 2.0) {
                return Err(param(alloc::format!("the Euclidean rate needs alpha in (1, 2), got {alpha}")));
            }
            Ok(1.0 / alpha)
        }
        CostSpec::HoelderCut { gamma } => {
            if alpha > 0.5 && alpha <= 1.0 {
                Ok(gamma.min(2.0 * alpha - 1.0 - epsilon))
            } else if alpha > 1.0 && alpha < 2.0 {
                Ok(gamma / alpha)
            } else {
                Err(param(alloc::format!("no rate is available for alpha = {alpha}")))
            }
        }
    }
}

/// `Violation` iff `slope < rate - 2 se - 0.1`; `FasterThanBound` iff
/// `slope - 2 se > rate`. The rates are upper bounds, so faster decay is
/// never a failure.
pub fn verdict(slope: f64, se: f64, rate: f64) -> Verdict {
    if slope < rate - 2.0 * se - 0.1 {
        Verdict::Violation
    } else if slope - 2.0 * se > rate {
        Verdict::FasterThanBound
    } else {
        Verdict::Consistent
    }
}

/// Weighted least squares of `log W` on `log η`. Weights are inverse
/// variances of `log W` from the interval half-widths (uniform when any
/// half-width is zero). Non-positive distances are dropped.
pub fn fit_loglog_slope(points: &[(f64, f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<&(f64, f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite()).collect();
    let dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(param(alloc::format!(
            "need at least three positive distances, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let uniform = usable.iter().any(|p| !(p.2 > 0.0));
    let ws: Vec<f64> = usable
        .iter()
        .map(|p| {
            if uniform {
                1.0
            } else {
                let s = p.2 / (1.96 * p.1);
                1.0 / (s * s)
            }
        })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    if !(sxx > 0.0) {
        return Err(param("step sizes must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum();
    let ss_tot: f64 = ws.iter().zip(&ys).map(|(w, y)| w * (y - ym) * (y - ym)).sum();
    let n = usable.len() as f64;
    let se = (ss_res / (n - 2.0) / sxx).sqrt();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SlopeFit {
        slope,
        se,
        intercept,
        r2,
        used: usable.len(),
        dropped,
    })
}

/// Runs the sweep. Study and reference samples are coupled through a
/// shared Lévy path (see [`coupled_invariant_pairs`]). When a step size
/// fails, the error carries the results completed so far.
pub fn run_rate_study(config: &RateStudyConfig) -> Result<RateReport> {
    config.validate()?;
    let alpha = config.model.alpha();
    let rate = theoretical_rate(alpha, &config.cost, config.epsilon)?;
    let exact_available = config.model.is_ou() && matches!(config.cost, CostSpec::Euclidean) && config.model.dim() == 1;
    let abs_moment = if exact_available { Some(ou::sas_abs_moment(alpha)?) } else { None };

    let mut results: Vec<EtaResult> = Vec::with_capacity(config.etas.len());
    let wrap = |eta: f64, done: &[EtaResult], e: Error| Error::Study {
        eta,
        completed: done.to_vec(),
        cause: Box::new(e),
    };

    let pairs: Vec<CoupledPair> = match config.reference {
        CoupledReference::OuAnalytic => {
            let mut v = Vec::with_capacity(config.etas.len());
            for (j, &eta) in config.etas.iter().enumerate() {
                let p = coupled_invariant_pairs(
                    &config.model,
                    &[eta],
                    config.reference,
                    config.samples_per_eta,
                    config.burn_in_time,
                    &config.x0,
                    derive_seed(config.seed, j as u64),
                )
                .map_err(|e| wrap(eta, &results, e))?;
                v.extend(p);
            }
            v
        }
        CoupledReference::FineEm { .. } => coupled_invariant_pairs(
            &config.model,
            &config.etas,
            config.reference,
            config.samples_per_eta,
            config.burn_in_time,
            &config.x0,
            config.seed,
        )
        .map_err(|e| wrap(config.etas[0], &results, e))?,
    };

    for (j, pair) in pairs.iter().enumerate() {
        let opts = DistanceOptions {
            n_boot: config.n_boot,
            cap: config.assignment_cap,
            level: 0.95,
            seed: derive_seed(config.seed, 0xd157 + j as u64),
        };
        let d = distance_with_ci(&pair.study, &pair.reference, &config.cost, &opts).map_err(|e| wrap(pair.eta, &results, e))?;
        let paired: Vec<f64> = pair
            .study
            .points()
            .zip(pair.reference.points())
            .map(|(x, y)| config.cost.eval(x, y))
            .collect();
        let mut rng = stream(config.seed, 0xc0c0 + j as u64);
        let coupling = bootstrap_mean(&paired, config.n_boot.max(1), &mut rng).map_err(|e| wrap(pair.eta, &results, e))?;
        let exact = match abs_moment {
            Some(m) => {
                let (s, s_eta) = ou::ou_scales(alpha, pair.eta)?;
                Some((s_eta - s).abs() * m)
            }
            None => None,
        };
        results.push(EtaResult {
            eta: pair.eta,
            distance: d.estimate,
            n: d.n,
            dual_lower: d.dual_lower,
            sorted_upper: d.sorted_upper,
            blocks: d.blocks,
            method: d.method,
            exact,
            coupling,
        });
    }

    let pts: Vec<(f64, f64, f64)> = results.iter().map(|r| (r.eta, r.distance.value, r.distance.half_width())).collect();
    let fit = fit_loglog_slope(&pts)?;
    let cpts: Vec<(f64, f64, f64)> = results.iter().map(|r| (r.eta, r.coupling.value, r.coupling.half_width())).collect();
    let coupling_fit = fit_loglog_slope(&cpts)?;
    Ok(RateReport {
        schema: REPORT_SCHEMA,
        model: config.model.name().to_string(),
        alpha,
        cost: config.cost,
        reference: config.reference,
        seed: config.seed,
        samples_per_eta: config.samples_per_eta,
        epsilon: config.epsilon,
        results,
        fit,
        theoretical_rate: rate,
        verdict: verdict(fit.slope, fit.se, rate),
        coupling_verdict: verdict(coupling_fit.slope, coupling_fit.se, rate),
        coupling_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let etas = [0.5, 0.25, 0.125, 0.0625];
        let pts: Vec<_> = etas.iter().map(|&e| (e, e, 0.0)).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let pts: Vec<_> = etas.iter().map(|&e: &f64| (e, 3.0 * e.sqrt(), 0.1)).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn drops_non_positive() {
        let pts = [(0.5, 0.5, 0.0), (0.25, 0.0, 0.0), (0.125, 0.125, 0.0), (0.0625, 0.0625, 0.0)];
        let f = fit_loglog_slope(&pts).unwrap();
        assert_eq!(f.dropped, 1);
        assert!(fit_loglog_slope(&pts[..3]).is_err());
    }

    #[test]
    fn rates_and_verdicts() {
        assert!((theoretical_rate(1.5, &CostSpec::Euclidean, 0.0).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        let cut = CostSpec::HoelderCut { gamma: 0.7 };
        assert!((theoretical_rate(0.8, &cut, 0.0).unwrap() - 0.6).abs() < 1e-12);
        assert!((theoretical_rate(1.4, &cut, 0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(theoretical_rate(0.8, &CostSpec::Euclidean, 0.0).is_err());
        assert_eq!(verdict(1.0, 0.05, 0.667), Verdict::FasterThanBound);
        assert_eq!(verdict(0.7, 0.05, 0.667), Verdict::Consistent);
        assert_eq!(verdict(0.3, 0.05, 0.667), Verdict::Violation);
    }

    #[test]
    fn config_checks() {
        let ou = SdeModel::ou(1, 0.9).unwrap();
        let cfg = RateStudyConfig::new(ou, CostSpec::Euclidean, alloc::vec![0.1, 0.05, 0.025], 1000, CoupledReference::OuAnalytic, 0);
        assert!(cfg.validate().is_err());
        let ou = SdeModel::ou(1, 1.5).unwrap();
        let cfg = RateStudyConfig::new(ou, CostSpec::Euclidean, alloc::vec![0.1, 0.2, 0.025], 1000, CoupledReference::OuAnalytic, 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_ou_study_is_reproducible() {
        let ou = SdeModel::ou(1, 1.5).unwrap();
        let mut cfg = RateStudyConfig::new(ou, CostSpec::Euclidean, alloc::vec![0.2, 0.1, 0.05], 2000, CoupledReference::OuAnalytic, 11);
        cfg.burn_in_time = 8.0;
        cfg.n_boot = 50;
        let a = run_rate_study(&cfg).unwrap();
        let b = run_rate_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.schema, 1);
        assert!(a.fit.slope > 0.5, "slope {}", a.fit.slope);
    }
}
