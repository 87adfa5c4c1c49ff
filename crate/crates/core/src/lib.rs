//! Bayesian independent component analysis with Pólya-Gamma data augmentation.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of the
//! toolkit: a small dense matrix kernel, reproducible random streams, source
//! families and an exact PG(1, c) sampler, synthetic data generators, the
//! three-block Gibbs sampler and a Student-t scale-mixture variant, EM /
//! natural-gradient / FastICA point estimators, identifiability-aware metrics,
//! and Monte Carlo diagnostics for the noiseless known-density model (score
//! identities, Fisher information, LAN remainders, Bernstein–von Mises checks).
//!
//! File formats, the command line and the benchmark runner live in the `pgica`
//! companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod datagen;
pub mod distributions;
pub mod error;
pub mod gibbs;
pub mod metrics;
pub mod numerics;
pub mod optim;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
