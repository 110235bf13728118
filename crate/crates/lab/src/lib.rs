//! Command-line front end for `emstable`: TOML configs, CSV/JSON files and
//! SVG plots.

pub mod commands;
pub mod config;
pub mod io;
pub mod plot;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "emstable", version, about = "Euler–Maruyama schemes for α-stable SDEs: sampling, distances, rate studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare the empirical cf of the noise sampler with exp(-|z|^α).
    NoiseTest(commands::NoiseTestArgs),
    /// Sample the invariant measure of an Euler chain.
    Sample(commands::SampleArgs),
    /// Distance between two point clouds with a bootstrap interval.
    Distance(commands::DistanceArgs),
    /// Monte Carlo Stein solution and its generator residual.
    SteinCheck(commands::SteinArgs),
    /// Closed-form OU distances against simulation.
    OuVerify(commands::OuVerifyArgs),
    /// Sweep step sizes and fit the convergence rate.
    RateStudy(commands::RateStudyArgs),
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::NoiseTest(a) => {
            let rows = commands::noise_test(a)?;
            let worst = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
            println!("max |cf error| = {worst:.3e} over {} frequencies", rows.len());
        }
        Command::Sample(a) => {
            let sidecar = commands::sample(a)?;
            println!("wrote {} and {}", a.out.display(), sidecar.display());
        }
        Command::Distance(a) => {
            let r = commands::distance(a)?;
            println!(
                "{} = {:.6e} [{:.6e}, {:.6e}] ({})",
                r.cost.label(),
                r.estimate.value,
                r.estimate.lo,
                r.estimate.hi,
                r.method
            );
        }
        Command::SteinCheck(a) => {
            let r = commands::stein(a)?;
            println!(
                "max |residual| = {:.4e}, within budget at every knot: {}",
                r.max_abs_residual, r.within_budget
            );
        }
        Command::OuVerify(a) => {
            let r = commands::ou_verify(a)?;
            println!(
                "slope {:.3} +- {:.3}, limit ratio {:.5} in [{:.5}, {:.5}], pass: {}",
                r.fitted_slope, r.fitted_slope_se, r.limit_ratio, r.lower_bound, r.upper_bound, r.pass
            );
        }
        Command::RateStudy(a) => {
            let r = commands::rate_study(a)?;
            println!(
                "slope {:.3} +- {:.3} (r2 {:.3}), theoretical rate {:.3}, verdict {:?}",
                r.fit.slope, r.fit.se, r.fit.r2, r.theoretical_rate, r.verdict
            );
        }
    }
    Ok(())
}
