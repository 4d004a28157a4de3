//! Core library for the emorec pipeline.
//!
//! The pipeline runs in three phases over a simulated short-video platform:
//!
//! 1. **Simulation** — generate a video catalog ([`catalog`]), a user
//!    population ([`population`]), and a 30-day activity journal with an
//!    engineered tabular feature set ([`journal`]).
//! 2. **Labeling & discovery** — cluster user-days into emotion labels and
//!    train a probabilistic emotion classifier ([`affect`]); learn a linear
//!    non-Gaussian DAG over behavioral features and extract signed causal
//!    parent sets per emotional target ([`causal`]).
//! 3. **Policy** — a hybrid controller ([`policy`]): a gradient-boosted
//!    engagement scorer during stable periods and a tabular Q-learning agent
//!    with a causally shaped reward during vulnerable periods, evaluated and
//!    ablated by [`bench`].
//!
//! Every random draw derives from the run seed through [`rng`], so reruns
//! with the same configuration are byte-identical. [`pipeline`] wires the
//! stages to on-disk artifacts; the CLI crate is a thin wrapper around it.

pub mod affect;
pub mod artifacts;
pub mod bench;
pub mod catalog;
pub mod causal;
pub mod config;
pub mod error;
pub mod journal;
pub mod pipeline;
pub mod policy;
pub mod population;
pub mod rng;
pub mod stats;

pub use config::RunConfig;
pub use error::{Error, Result};
