//! Structural credit spread approximations and a random forest refinement
//! pipeline.
//!
//! The crate is organised bottom-up:
//!
//! - [`structural`]: the equity-to-credit (E2C) closed form and the
//!   CreditGrades survival/spread reference model, both in basis points.
//! - [`fundamentals`]: financial debt, debt-per-share and volatility selection
//!   from raw balance-sheet and market data.
//! - [`dataset`]: record ingestion, feature encoding and the firm/date
//!   in-sample / out-of-sample split.
//! - [`forest`]: depth-limited CART regression trees bagged into a random
//!   forest with deterministic parallel training.
//! - [`importance`]: impurity-decrease (MDI) and out-of-bag permutation
//!   importance.
//! - [`metrics`]: R², RMSE, MAPE, MASE, medians, truncated means and averaged
//!   panel correlations.
//!
//! [`snapshot`], [`config`], [`model_file`], [`evaluation`] and [`synth`]
//! hold the file formats and report builders used by the `e2c` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod fundamentals;
pub mod importance;
pub mod metrics;
pub mod model_file;
pub mod normal;
pub mod rating;
pub mod snapshot;
pub mod structural;
pub mod synth;

pub use error::{Error, Result};
