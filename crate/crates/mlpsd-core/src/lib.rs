//! Core algorithms for parallel self-distillation over a decomposed label space.
//!
//! The crate is organized around the stages of the method:
//!
//! 1. [`dataset`] — multi-label annotation sets and a synthetic generator that
//!    plants a known block structure in the label co-occurrence pattern.
//! 2. [`costats`] — exact label co-occurrence counts and the conditional
//!    similarity matrix `S`.
//! 3. [`partition`] — co-occurrence / dis-occurrence affinity graphs, the
//!    normalized-cut spectral embedding, seeded k-means, and sub-task
//!    extraction.
//! 4. [`model`] — a small feed-forward multi-label classifier with exact
//!    analytic gradients and an Adam optimizer with decoupled weight decay.
//! 5. [`losses`] — the asymmetric classification loss and the masked MSE
//!    distillation loss, each with value and logit gradient.
//! 6. [`pipeline`] — teacher training per sub-task, logit merging, and
//!    student distillation.
//! 7. [`metrics`] — ranking and thresholded multi-label evaluation.
//!
//! Everything in this crate is deterministic given the seeds in the various
//! config structs, and `no_std`-compatible (requires `alloc`). File formats,
//! the CLI, and thread-level parallelism live in the companion `mlpsd` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod costats;
pub mod dataset;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
