//! Quality-aware service delivery toolkit, algorithmic core.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required). File formats, the
//! command-line front end and SVG output live in the `ioexai` crate.
//!
//! Module map:
//!
//! - [`radio`]: RSSI → RSRP → RSRQ, RSRP → SINR → CQI, and the composed
//!   link-quality model.
//! - [`dataset`]: session records, validation, seeded train/test splits,
//!   order statistics, and the synthetic path-loss scenario generator
//!   ([`synth`]).
//! - [`regress`]: CART trees, Random Forest, Extra Trees, gradient boosting,
//!   AdaBoost.R2 and least-squares linear regression.
//! - [`shapley`]: exact coalition-enumeration Shapley values plus a
//!   permutation-sampling oracle.
//! - [`pipeline`]: association under RSRP/RSRQ/mobility constraints,
//!   per-target training, attribution and rate prediction.
//! - [`eval`]: R², MAPE, improvement rate, Pearson correlation and the
//!   cross-model comparison report.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod radio;
pub mod regress;
pub mod rng;
pub mod shapley;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
