//! TOML run configuration.
//!
//! ```toml
//! [model]
//! name = "hoelder_dissipative"   # ou | monotone_lipschitz | hoelder_dissipative
//! alpha = 0.8
//! dim = 1
//! gamma = 0.7
//! c = 0.5
//!
//! [noise]
//! scheme = "stable_em"           # or "pareto_em"
//!
//! [em]
//! eta = 0.05
//! n_replicas = 10000
//! burn_in_time = 20.0
//! seed = 7
//!
//! [metric]
//! cost = "hoelder_cut"
//! gamma = 0.7
//!
//! [study]
//! etas = "2^-4..2^-9"
//! samples_per_eta = 10000
//! reference = "fine_em"
//! eta_ref = 0.000244140625
//! ```

use std::path::Path;

use anyhow::{bail, Context};
use emstable::{
    em::{default_burn_in, CoupledReference, EmConfig, Scheme, DEFAULT_BURN_IN_TIME},
    harness::RateStudyConfig,
    wasserstein::{CostSpec, ASSIGNMENT_CAP},
    SdeModel,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub em: EmSection,
    #[serde(default)]
    pub metric: MetricSection,
    pub study: Option<StudySection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    #[default]
    Ou,
    MonotoneLipschitz,
    HoelderDissipative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: ModelName,
    pub alpha: f64,
    #[serde(default = "one")]
    pub dim: usize,
    /// Diffusion level of the monotone model.
    pub a: Option<f64>,
    /// Drift amplitude of the nonlinear models.
    pub c: Option<f64>,
    /// Hölder exponent of the dissipative model.
    pub gamma: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            name: ModelName::Ou,
            alpha: 1.5,
            dim: 1,
            a: None,
            c: None,
            gamma: None,
        }
    }
}

fn one() -> usize {
    1
}

impl ModelSection {
    pub fn build(&self) -> anyhow::Result<SdeModel> {
        let need = |v: Option<f64>, key: &str| v.with_context(|| format!("[model] {key} is required for {:?}", self.name));
        let model = match self.name {
            ModelName::Ou => SdeModel::ou(self.dim, self.alpha)?,
            ModelName::MonotoneLipschitz => SdeModel::monotone_lipschitz(self.dim, self.alpha, need(self.a, "a")?, need(self.c, "c")?)?,
            ModelName::HoelderDissipative => {
                SdeModel::hoelder_dissipative(self.dim, self.alpha, need(self.gamma, "gamma")?, need(self.c, "c")?)?
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "stable")]
    pub scheme: Scheme,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { scheme: stable() }
    }
}

fn stable() -> Scheme {
    Scheme::StableEm
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    pub eta: Option<f64>,
    pub n_replicas: Option<usize>,
    /// Wins over `burn_in_time` when both are given.
    pub burn_in_steps: Option<usize>,
    pub burn_in_time: Option<f64>,
    #[serde(default)]
    pub post_burn_steps_per_replica: usize,
    pub thin: Option<usize>,
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl EmSection {
    pub fn x0(&self, dim: usize) -> anyhow::Result<Vec<f64>> {
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; dim]);
        if x0.len() != dim {
            bail!("[em] x0 has length {}, model dimension is {dim}", x0.len());
        }
        Ok(x0)
    }

    pub fn build(&self, dim: usize, scheme: Scheme) -> anyhow::Result<EmConfig> {
        let eta = self.eta.context("[em] eta is required")?;
        let n = self.n_replicas.context("[em] n_replicas is required")?;
        let mut cfg = EmConfig::new(eta, n, self.x0(dim)?, self.seed);
        cfg.burn_in_steps = match (self.burn_in_steps, self.burn_in_time) {
            (Some(steps), _) => steps,
            (None, Some(t)) => (t / eta).ceil() as usize,
            (None, None) => default_burn_in(eta),
        };
        cfg.post_burn_steps_per_replica = self.post_burn_steps_per_replica;
        cfg.thin = self.thin.unwrap_or(1);
        cfg.scheme = scheme;
        cfg.validate(dim)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CostName {
    #[default]
    Euclidean,
    HoelderCut,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default)]
    pub cost: CostName,
    pub gamma: Option<f64>,
}

impl MetricSection {
    pub fn build(&self) -> anyhow::Result<CostSpec> {
        cost_spec(self.cost, self.gamma)
    }
}

pub fn cost_spec(name: CostName, gamma: Option<f64>) -> anyhow::Result<CostSpec> {
    let cost = match name {
        CostName::Euclidean => CostSpec::Euclidean,
        CostName::HoelderCut => CostSpec::HoelderCut {
            gamma: gamma.context("the hoelder_cut cost needs gamma")?,
        },
    };
    cost.validate()?;
    Ok(cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceName {
    OuAnalytic,
    FineEm,
}

/// Step sizes: either an explicit list or a dyadic range such as `"2^-4..2^-9"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Etas {
    List(Vec<f64>),
    Range(String),
}

impl Etas {
    pub fn resolve(&self) -> anyhow::Result<Vec<f64>> {
        match self {
            Etas::List(v) => Ok(v.clone()),
            Etas::Range(s) => parse_dyadic_range(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub etas: Etas,
    pub samples_per_eta: usize,
    pub reference: ReferenceName,
    pub eta_ref: Option<f64>,
    pub seed: Option<u64>,
    pub n_boot: Option<usize>,
    #[serde(default)]
    pub epsilon: f64,
    pub assignment_cap: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn em_config(&self, scheme_override: Option<Scheme>) -> anyhow::Result<EmConfig> {
        self.em.build(self.model.dim, scheme_override.unwrap_or(self.noise.scheme))
    }

    pub fn rate_study(&self) -> anyhow::Result<RateStudyConfig> {
        let study = self.study.as_ref().context("the config has no [study] table")?;
        if self.noise.scheme != Scheme::StableEm {
            bail!("rate studies couple exact stable increments; set [noise] scheme = \"stable_em\"");
        }
        let model = self.model.build()?;
        let reference = match study.reference {
            ReferenceName::OuAnalytic => CoupledReference::OuAnalytic,
            ReferenceName::FineEm => CoupledReference::FineEm {
                eta_ref: study.eta_ref.context("[study] eta_ref is required for the fine_em reference")?,
            },
        };
        let seed = study.seed.unwrap_or(self.em.seed);
        let mut cfg = RateStudyConfig::new(model, self.metric.build()?, study.etas.resolve()?, study.samples_per_eta, reference, seed);
        cfg.x0 = self.em.x0(self.model.dim)?;
        cfg.burn_in_time = self.em.burn_in_time.unwrap_or(DEFAULT_BURN_IN_TIME);
        cfg.n_boot = study.n_boot.unwrap_or(cfg.n_boot);
        cfg.epsilon = study.epsilon;
        cfg.assignment_cap = study.assignment_cap.unwrap_or(ASSIGNMENT_CAP);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `"2^-4..2^-9"` → `[2^-4, 2^-5, …, 2^-9]`; a single `"2^-k"` is accepted too.
pub fn parse_dyadic_range(s: &str) -> anyhow::Result<Vec<f64>> {
    let exponent = |t: &str| -> anyhow::Result<i32> {
        let t = t.trim();
        let e = t.strip_prefix("2^").with_context(|| format!("expected 2^k, got {t:?}"))?;
        e.parse::<i32>().with_context(|| format!("bad exponent in {t:?}"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (exponent(a)?, exponent(b)?),
        None => {
            let e = exponent(s)?;
            (e, e)
        }
    };
    let step = if hi >= lo { 1 } else { -1 };
    let mut out = Vec::new();
    let mut k = lo;
    loop {
        out.push(2f64.powi(k));
        if k == hi {
            break;
        }
        k += step;
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// `"-3:3:0.25"` → evenly spaced knots including both ends.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number {p:?} in grid {s:?}")))
        .collect::<anyhow::Result<_>>()?;
    let [lo, hi, step] = parts[..] else {
        bail!("grid must look like lo:hi:step, got {s:?}");
    };
    if !(step > 0.0 && hi > lo) {
        bail!("grid needs lo < hi and a positive step");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}
