use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use emstable::{
    em::{sample_invariant, Scheme},
    harness::{run_rate_study, RateStudyConfig, REPORT_SCHEMA},
    noise::{empirical_cf, sample_isotropic, sample_sas_1d},
    ou::{ou_phi_mean, ou_w1_exact, syy2_bounds, OuMeasure},
    rng::{derive_seed, stream},
    stats::{bootstrap_mean, Estimate},
    stein::{stein_check, stein_solution_mc, QuadratureSpec, SteinConfig},
    wasserstein::{distance_with_ci, phi, CostSpec, DistanceOptions, ASSIGNMENT_CAP},
    Error, SdeModel, StableSpec,
};
use serde::Serialize;

use crate::{
    config::{cost_spec, parse_dyadic_range, parse_grid, CostName, RunConfig},
    io, plot,
};

#[derive(Debug, Args)]
pub struct NoiseTestArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frequencies |z|, taken along the first axis.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    pub z: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct CfRow {
    pub z: f64,
    pub re_cf: f64,
    pub im_cf: f64,
    pub analytic_cf: f64,
    pub abs_err: f64,
}

pub fn noise_test(a: &NoiseTestArgs) -> anyhow::Result<Vec<CfRow>> {
    let spec = StableSpec::standard(a.alpha, a.dim)?;
    if a.n == 0 {
        bail!("--n must be positive");
    }
    let mut rng = stream(a.seed, 0);
    let mut flat = Vec::with_capacity(a.n * a.dim);
    for _ in 0..a.n {
        if a.dim == 1 {
            flat.push(sample_sas_1d(&spec, &mut rng)?);
        } else {
            flat.extend(sample_isotropic(&spec, &mut rng)?);
        }
    }
    let zs: Vec<Vec<f64>> = a
        .z
        .iter()
        .map(|&z| {
            let mut v = vec![0.0; a.dim];
            v[0] = z;
            v
        })
        .collect();
    let cf = empirical_cf(&flat, a.dim, &zs)?;
    let rows: Vec<CfRow> = a
        .z
        .iter()
        .zip(cf)
        .map(|(&z, c)| {
            let exact = spec.cf(z.abs());
            CfRow {
                z,
                re_cf: c.re,
                im_cf: c.im,
                analytic_cf: exact,
                abs_err: (c.re - exact).hypot(c.im),
            }
        })
        .collect();
    io::write_rows(&a.out, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Stable,
    Pareto,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `[noise] scheme`.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

pub fn sample(a: &SampleArgs) -> anyhow::Result<PathBuf> {
    let cfg = RunConfig::load(&a.config)?;
    let scheme = a.scheme.map(|s| match s {
        SchemeArg::Stable => Scheme::StableEm,
        SchemeArg::Pareto => Scheme::ParetoEm,
    });
    let model = cfg.model.build()?;
    let em = cfg.em_config(scheme)?;
    let m = sample_invariant(&model, &em)?;
    io::write_points(&a.out, &m)?;
    let sidecar = io::sidecar_path(&a.out);
    io::write_json(&sidecar, &m.meta)?;
    Ok(sidecar)
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub cost: CostName,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    /// Largest single assignment problem; larger inputs are split into blocks.
    #[arg(long, default_value_t = ASSIGNMENT_CAP)]
    pub cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn distance(a: &DistanceArgs) -> anyhow::Result<emstable::wasserstein::DistanceReport> {
    let cost = cost_spec(a.cost, a.gamma)?;
    let pa = io::read_points(&a.a)?;
    let pb = io::read_points(&a.b)?;
    let opts = DistanceOptions {
        n_boot: a.n_boot,
        cap: a.cap,
        seed: a.seed,
        ..Default::default()
    };
    let rep = distance_with_ci(&pa, &pb, &cost, &opts)?;
    io::write_json(&a.out, &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SteinModel {
    Ou,
    MonotoneLipschitz,
    HoelderDissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestFn {
    Phi,
}

#[derive(Debug, Args)]
pub struct SteinArgs {
    #[arg(long, value_enum, default_value = "ou")]
    pub model: SteinModel,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "phi")]
    pub g: TestFn,
    /// Knots as `lo:hi:step`.
    #[arg(long, default_value = "-3:3:0.25", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub fine_eta: f64,
    #[arg(long, default_value_t = 15.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drift amplitude of the nonlinear models.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Diffusion level of the monotone model.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Hölder exponent of the dissipative model.
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    /// Replicas used to estimate µ(g) when no closed form exists.
    #[arg(long, default_value_t = 20_000)]
    pub mu_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON with the full report (tail fit, budgets).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ResidualRow {
    x: f64,
    f: f64,
    f_se: f64,
    residual: f64,
    tol_budget: f64,
}

pub fn stein(a: &SteinArgs) -> anyhow::Result<emstable::stein::SteinCheckReport> {
    let model = match a.model {
        SteinModel::Ou => SdeModel::ou(1, a.alpha)?,
        SteinModel::MonotoneLipschitz => SdeModel::monotone_lipschitz(1, a.alpha, a.a, a.c)?,
        SteinModel::HoelderDissipative => SdeModel::hoelder_dissipative(1, a.alpha, a.gamma, a.c)?,
    };
    let g = match a.g {
        TestFn::Phi => phi,
    };
    let mu_g = if model.is_ou() {
        Estimate::exact(ou_phi_mean(OuMeasure::Invariant, a.alpha, a.fine_eta)?)
    } else {
        let mut em = emstable::em::EmConfig::new(a.fine_eta, a.mu_samples, vec![0.0], derive_seed(a.seed, 0x5e1));
        em.burn_in_steps = (a.horizon.max(20.0) / a.fine_eta).ceil() as usize;
        let m = sample_invariant(&model, &em)?;
        let gs: Vec<f64> = m.as_flat().iter().map(|&x| g(x)).collect();
        bootstrap_mean(&gs, 1000, &mut stream(a.seed, 0x5e2))?
    };
    let mut cfg = SteinConfig::new(parse_grid(&a.grid)?, a.paths, a.seed);
    cfg.fine_eta = a.fine_eta;
    cfg.horizon = a.horizon;
    let sol = stein_solution_mc(&model, &g, mu_g, &cfg)?;
    let rep = stein_check(&model, &g, &sol, &cfg, &QuadratureSpec::default())?;
    let rows: Vec<ResidualRow> = rep
        .rows
        .iter()
        .map(|r| ResidualRow {
            x: r.x,
            f: r.f,
            f_se: r.f_se,
            residual: r.residual,
            tol_budget: r.tol_budget,
        })
        .collect();
    io::write_rows(&a.out, &rows)?;
    if let Some(p) = &a.report {
        io::write_json(p, &rep)?;
    }
    Ok(rep)
}

#[derive(Debug, Args)]
pub struct OuVerifyArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Dyadic range such as `2^-4..2^-9`.
    #[arg(long, default_value = "2^-4..2^-9")]
    pub etas: String,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct OuEtaRow {
    pub eta: f64,
    pub exact_w1: f64,
    pub empirical_w1: Estimate,
    pub ratio_to_eta: f64,
    pub empirical_ratio_to_eta: f64,
    pub exact_within_ci: bool,
    /// The ratio lies within 1e-3 of the limit bracket.
    pub ratio_within_bracket: bool,
}

#[derive(Debug, Serialize)]
pub struct OuVerifyReport {
    pub schema: u32,
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Exact ratio at η = 2^-12, a proxy for the η → 0 limit.
    pub limit_ratio: f64,
    pub limit_within_bracket: bool,
    pub fitted_slope: f64,
    pub fitted_slope_se: f64,
    pub rows: Vec<OuEtaRow>,
    pub pass: bool,
}

pub fn ou_verify(a: &OuVerifyArgs) -> anyhow::Result<OuVerifyReport> {
    let etas = parse_dyadic_range(&a.etas)?;
    let (lower, upper) = syy2_bounds(a.alpha)?;
    let in_bracket = |r: f64| r >= lower - 1e-3 && r <= upper + 1e-3;
    let eta_limit = 2f64.powi(-12);
    let limit_ratio = ou_w1_exact(a.alpha, eta_limit)? / eta_limit;

    let mut cfg = RateStudyConfig::new(
        SdeModel::ou(1, a.alpha)?,
        CostSpec::Euclidean,
        etas,
        a.n,
        emstable::em::CoupledReference::OuAnalytic,
        a.seed,
    );
    cfg.n_boot = a.n_boot;
    let study = run_rate_study(&cfg)?;
    let rows: Vec<OuEtaRow> = study
        .results
        .iter()
        .map(|r| {
            let exact = r.exact.context("the OU study reports the closed form")?;
            Ok(OuEtaRow {
                eta: r.eta,
                exact_w1: exact,
                empirical_w1: r.distance,
                ratio_to_eta: exact / r.eta,
                empirical_ratio_to_eta: r.distance.value / r.eta,
                exact_within_ci: r.distance.contains(exact),
                ratio_within_bracket: in_bracket(exact / r.eta),
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let pass = in_bracket(limit_ratio) && rows.iter().all(|r| r.exact_within_ci);
    let rep = OuVerifyReport {
        schema: REPORT_SCHEMA,
        alpha: a.alpha,
        n: a.n,
        seed: a.seed,
        lower_bound: lower,
        upper_bound: upper,
        limit_ratio,
        limit_within_bracket: in_bracket(limit_ratio),
        fitted_slope: study.fit.slope,
        fitted_slope_se: study.fit.se,
        rows,
        pass,
    };
    io::write_json(&a.out, &rep)?;
    Ok(rep)
}

#[derive(Debug, Args)]
pub struct RateStudyArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PartialReport<'a> {
    schema: u32,
    partial: bool,
    failed_eta: f64,
    error: String,
    completed: &'a [emstable::harness::EtaResult],
}

pub fn rate_study(a: &RateStudyArgs) -> anyhow::Result<emstable::harness::RateReport> {
    let cfg = RunConfig::load(&a.config)?.rate_study()?;
    match run_rate_study(&cfg) {
        Ok(rep) => {
            io::write_json(&a.out, &rep)?;
            if let Some(p) = &a.plot {
                std::fs::write(p, plot::rate_plot_svg(&rep)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(rep)
        }
        Err(Error::Study { eta, completed, cause }) => {
            let partial = PartialReport {
                schema: REPORT_SCHEMA,
                partial: true,
                failed_eta: eta,
                error: cause.to_string(),
                completed: &completed,
            };
            io::write_json(&a.out, &partial)?;
            bail!("rate study stopped at eta = {eta}: {cause}; partial results written to {}", a.out.display())
        }
        Err(e) => Err(e.into()),
    }
}
