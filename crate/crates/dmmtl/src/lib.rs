//! Quality prediction for sequential multistage manufacturing lines.
//!
//! A production line measures process sensors (inputs) and quality sensors
//! (outputs) at every stage, and downstream quality depends on everything
//! upstream. This crate models the whole line at once: a chain of per-stage
//! latent states links all inputs to all outputs, trained end-to-end with a
//! block-coordinate schedule that combines plain stochastic gradients, a
//! closed-form per-observation outlier update (robust Huber-style loss), and
//! a proximal group-lasso step that drives the weight columns of irrelevant
//! sensors to exact zero.
//!
//! Alongside the model there is a synthetic benchmark suite with known ground
//! truth, linear baselines (ridge, elastic net, multi-task elastic net, and
//! the true-recursion oracle), evaluation metrics, and gradient-based input
//! attribution.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --example simulate_line          # generate a benchmark dataset
//! cargo run --example train_quality_model    # train and evaluate the model
//! cargo run --example benchmark_baselines    # compare against linear baselines
//! cargo run --example variable_selection     # recover the important sensors
//! cargo run --example local_attribution      # explain one output's drivers
//! cargo run --example robust_outliers        # Huber vs squared error
//! cargo run --example tune_random_search     # randomized hyperparameter search
//! cargo run --example csv_ingestion          # bring your own CSV data
//! ```
//!
//! The same capabilities are scriptable through the `dmmtl` binary
//! (`simulate`, `train`, `evaluate`, `tune`, `explain`), driven by a TOML
//! config file.

pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gradients;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod optimizer;
pub mod run;
mod rng;

pub use error::{Error, Result};
