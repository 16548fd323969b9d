//! Loss functions, penalties, and the full training objective in its
//! outlier-decomposed form.
//!
//! The robust objective carries one outlier variable per (sample, stage,
//! output). Minimizing the decomposed data term
//! `(residual - a)^2 + gamma |a|` over `a` analytically reproduces the Huber
//! cost of the residual, which is what lets the optimizer handle the
//! non-smooth robust loss with plain backpropagation.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{forward_teacher, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Sse,
    Huber,
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Group-penalty weight on input-weight columns.
    pub lambda_x: f64,
    /// L2 weight on all parameters.
    pub lambda: f64,
    /// Huber/outlier threshold; ignored for [`LossKind::Sse`].
    pub gamma: f64,
    pub loss_kind: LossKind,
    /// Proximal step size (reciprocal of the assumed smoothness constant).
    pub prox_step: f64,
    /// Gradient descent step for everything except the input-weight columns.
    pub sgd_step: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement (while validation RMSE exceeds
    /// 1) before re-initializing from a fresh random point.
    pub restart_patience: usize,
    pub max_restarts: usize,
    /// Halve the proximal step whenever the epoch objective increases.
    pub adapt_prox: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_x: 0.0,
            lambda: 1e-4,
            gamma: 1.0,
            loss_kind: LossKind::Sse,
            prox_step: 0.1,
            sgd_step: 0.1,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            restart_patience: 25,
            max_restarts: 3,
            adapt_prox: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_x < 0.0 || self.lambda < 0.0 {
            return Err(Error::Argument("penalty weights must be nonnegative".into()));
        }
        if self.gamma <= 0.0 && self.loss_kind == LossKind::Huber {
            return Err(Error::Argument("huber threshold must be positive".into()));
        }
        if self.prox_step <= 0.0 || self.sgd_step <= 0.0 {
            return Err(Error::Argument("step sizes must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Argument("batch size and epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outlier variables, one per (batch sample, stage, output).
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierState {
    pub values: Vec<Vec<Vec<f64>>>,
}

impl OutlierState {
    pub fn zeros(batch: usize, output_widths: &[usize]) -> Self {
        OutlierState {
            values: (0..batch)
                .map(|_| output_widths.iter().map(|&w| vec![0.0; w]).collect())
                .collect(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|per_stage| per_stage.iter())
            .flat_map(|row| row.iter())
            .map(|a| a.abs())
            .sum()
    }
}

/// Sum of squared entries.
pub fn sse_loss(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum()
}

/// Huber cost: quadratic for `|e| <= gamma/2`, linear beyond.
pub fn huber(e: f64, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::Argument(format!("huber threshold must be positive, got {gamma}")));
    }
    if e.abs() <= gamma / 2.0 {
        Ok(e * e)
    } else {
        Ok(gamma * e.abs() - gamma * gamma / 4.0)
    }
}

/// Derivative of [`huber`] in `e`; at the kinks the linear-branch value is
/// used (the two branches agree there, so this is the continuous extension).
pub fn huber_grad(e: f64, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::Argument(format!("huber threshold must be positive, got {gamma}")));
    }
    if e.abs() < gamma / 2.0 {
        Ok(2.0 * e)
    } else {
        Ok(gamma * e.signum())
    }
}

/// Group-lasso penalty: `lambda_x` times the sum of Euclidean norms of every
/// input-weight column across all stages.
pub fn group_penalty(params: &ParameterSet, lambda_x: f64) -> f64 {
    let mut total = 0.0;
    for stage in params.stages() {
        for c in 0..stage.input_weights.cols() {
            total += stage.input_weights.column_norm(c);
        }
    }
    lambda_x * total
}

/// Full decomposed objective over a batch:
/// mean over samples of `sum_{k,j} (y - prediction - a)^2 + gamma sum |a|`,
/// plus the group penalty and `lambda/2` times the squared parameter norm.
/// With all outliers zero and zero penalty weights this is the plain mean
/// SSE.
pub fn objective(
    params: &ParameterSet,
    batch: &[Sample],
    config: &TrainConfig,
    outliers: &OutlierState,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("objective over an empty batch".into()));
    }
    if outliers.values.len() != batch.len() {
        return Err(Error::Shape(format!(
            "outlier state covers {} samples, batch has {}",
            outliers.values.len(),
            batch.len()
        )));
    }
    let mut data_term = 0.0;
    for (n, sample) in batch.iter().enumerate() {
        let trace = forward_teacher(params, &sample.inputs, &sample.outputs)?;
        for (k, st) in trace.stages.iter().enumerate() {
            if outliers.values[n][k].len() != st.prediction.len() {
                return Err(Error::Shape(format!("outlier state stage {k}: width mismatch")));
            }
            for (j, &pred) in st.prediction.iter().enumerate() {
                let a = outliers.values[n][k][j];
                let r = sample.outputs[k][j] - pred;
                data_term += (r - a).powi(2) + config.gamma * a.abs();
            }
        }
    }
    data_term /= batch.len() as f64;
    Ok(data_term + group_penalty(params, config.lambda_x) + 0.5 * config.lambda * params.l2_norm_sq())
}
