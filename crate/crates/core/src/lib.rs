//! Invariant-measure sampling for SDEs driven by rotationally invariant
//! α-stable noise.
//!
//! The crate is organised around the numerical pipeline:
//!
//! * [`noise`] draws exact symmetric / isotropic α-stable increments and
//!   Pareto-tailed jumps, and evaluates empirical characteristic functions.
//! * [`models`] holds drift/diffusion pairs together with their assumption
//!   constants and a sampled falsifier for those assumptions.
//! * [`em`] runs Euler–Maruyama (stable or Pareto driven) chains and turns
//!   independent replicas into an [`EmpiricalMeasure`].
//! * [`wasserstein`] computes exact optimal-transport distances between
//!   equal-weight point clouds, with sorted upper and dual lower bounds.
//! * [`stein`] evaluates the 1-D nonlocal generator by quadrature and builds
//!   Monte Carlo solutions of the Poisson equation `L f = -(g - mu(g))`.
//! * [`ou`] is the closed-form oracle for the 1-D stable Ornstein–Uhlenbeck
//!   process and its Euler scheme.
//! * [`harness`] sweeps step sizes, estimates distances with confidence
//!   intervals and fits log-log convergence slopes.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. The `parallel` feature spreads replicas over a rayon pool;
//! every replica owns a random stream derived from `(seed, replica)`, so
//! results do not depend on the worker count.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod exec;
mod math;

pub mod em;
pub mod harness;
pub mod measure;
pub mod models;
pub mod noise;
pub mod ou;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod stein;
pub mod wasserstein;

pub use error::{Error, Result};
pub use measure::{EmpiricalMeasure, Provenance};
pub use models::{SdeModel, ThetaParams};
pub use noise::StableSpec;
pub use rng::RandomStream;
