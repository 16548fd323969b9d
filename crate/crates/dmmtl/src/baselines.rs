//! Linear reference predictors for the benchmark.
//!
//! Each stage-k target is regressed on the concatenation of all inputs up to
//! stage k. Ridge solves the normal equations; the elastic net runs
//! coordinate descent per target; the multi-task elastic net fits all of a
//! stage's outputs jointly by proximal gradient with a row-wise block soft
//! threshold, so a feature is kept or dropped for the whole stage at once.
//! The oracle predictor runs the generator's true noiseless recursion.

use serde::{Deserialize, Serialize};

use crate::data::{apply_normalization, denormalize, Dataset, SovModel};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, soft_threshold_block, soft_threshold_scalar, Matrix};
use crate::rng::{Rng, Stream};

/// A fitted linear map from stacked features to one stage's targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `features x targets` coefficient matrix.
    pub weights: Matrix,
    pub intercepts: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.weights.rows() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.weights.rows(),
                features.len()
            )));
        }
        let t = self.weights.cols();
        let mut out = self.intercepts.clone();
        for (j, &x) in features.iter().enumerate() {
            for c in 0..t {
                out[c] += self.weights.get(j, c) * x;
            }
        }
        Ok(out)
    }

    /// Features whose coefficient row is not identically zero.
    pub fn active_features(&self) -> Vec<usize> {
        (0..self.weights.rows())
            .filter(|&r| (0..self.weights.cols()).any(|c| self.weights.get(r, c) != 0.0))
            .collect()
    }
}

/// Concatenated inputs of stages `0..=stage` for one sample.
pub fn stacked_feature_vector(inputs: &[Vec<f64>], stage: usize) -> Vec<f64> {
    let mut v = Vec::new();
    for xs in &inputs[..=stage] {
        v.extend_from_slice(xs);
    }
    v
}

/// `n x p` feature matrix of concatenated inputs up to `stage`.
pub fn stacked_features(ds: &Dataset, stage: usize) -> Matrix {
    let p: usize = ds.topology.input_widths[..=stage].iter().sum();
    let n = ds.len();
    let mut m = Matrix::zeros(n, p);
    for (r, s) in ds.samples.iter().enumerate() {
        let mut c = 0;
        for xs in &s.inputs[..=stage] {
            for &x in xs {
                m.set(r, c, x);
                c += 1;
            }
        }
    }
    m
}

/// `n x ny[stage]` target matrix.
pub fn stage_targets(ds: &Dataset, stage: usize) -> Matrix {
    let n = ds.len();
    let w = ds.topology.output_widths[stage];
    let mut m = Matrix::zeros(n, w);
    for (r, s) in ds.samples.iter().enumerate() {
        for (c, &y) in s.outputs[stage].iter().enumerate() {
            m.set(r, c, y);
        }
    }
    m
}

struct Centered {
    x: Matrix,
    y: Matrix,
    x_mean: Vec<f64>,
    y_mean: Vec<f64>,
}

fn center(x: &Matrix, y: &Matrix) -> Centered {
    let n = x.rows();
    let mut x_mean = vec![0.0; x.cols()];
    for r in 0..n {
        for (j, m) in x_mean.iter_mut().enumerate() {
            *m += x.get(r, j);
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let mut y_mean = vec![0.0; y.cols()];
    for r in 0..n {
        for (j, m) in y_mean.iter_mut().enumerate() {
            *m += y.get(r, j);
        }
    }
    for m in &mut y_mean {
        *m /= n as f64;
    }
    let xc = Matrix::from_fn(n, x.cols(), |r, c| x.get(r, c) - x_mean[c]);
    let yc = Matrix::from_fn(n, y.cols(), |r, c| y.get(r, c) - y_mean[c]);
    Centered { x: xc, y: yc, x_mean, y_mean }
}

fn intercepts_from(weights: &Matrix, x_mean: &[f64], y_mean: &[f64]) -> Vec<f64> {
    (0..weights.cols())
        .map(|c| {
            y_mean[c] - x_mean.iter().enumerate().map(|(j, &m)| m * weights.get(j, c)).sum::<f64>()
        })
        .collect()
}

/// `X^T X / n` of a centered design.
fn gram(x: &Matrix) -> Matrix {
    let n = x.rows();
    let p = x.cols();
    let mut g = Matrix::zeros(p, p);
    for r in 0..n {
        let row = x.row(r);
        for i in 0..p {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            let gi = &mut g.data_mut()[i * p..(i + 1) * p];
            for (gj, &xj) in gi.iter_mut().zip(row) {
                *gj += xi * xj;
            }
        }
    }
    let scale = 1.0 / n as f64;
    for v in g.data_mut() {
        *v *= scale;
    }
    g
}

/// `X^T Y / n` of a centered design.
fn cross(x: &Matrix, y: &Matrix) -> Matrix {
    let n = x.rows();
    let p = x.cols();
    let t = y.cols();
    let mut c = Matrix::zeros(p, t);
    for r in 0..n {
        let xrow = x.row(r);
        let yrow = y.row(r);
        for (i, &xi) in xrow.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let ci = &mut c.data_mut()[i * t..(i + 1) * t];
            for (cj, &yj) in ci.iter_mut().zip(yrow) {
                *cj += xi * yj;
            }
        }
    }
    let scale = 1.0 / n as f64;
    for v in c.data_mut() {
        *v *= scale;
    }
    c
}

/// Ridge regression via the normal equations:
/// minimizes `||Y - XW||^2 / (2n) + (lambda/2) ||W||^2`.
pub fn ridge_fit(x: &Matrix, y: &Matrix, lambda: f64) -> Result<LinearModel> {
    Ok(ridge_fit_grid(x, y, &[lambda])?.remove(0))
}

/// Ridge over a grid of penalties, factoring the Gram matrix once per value
/// but assembling it only once.
pub fn ridge_fit_grid(x: &Matrix, y: &Matrix, lambdas: &[f64]) -> Result<Vec<LinearModel>> {
    if x.rows() != y.rows() || x.rows() == 0 {
        return Err(Error::Shape("ridge: feature/target row mismatch".into()));
    }
    if lambdas.iter().any(|&l| l <= 0.0) {
        return Err(Error::Argument("ridge penalty must be positive".into()));
    }
    let c = center(x, y);
    let g = gram(&c.x);
    let xty = cross(&c.x, &c.y);
    let p = g.rows();
    lambdas
        .iter()
        .map(|&lambda| {
            let mut a = g.clone();
            for i in 0..p {
                a.set(i, i, a.get(i, i) + lambda);
            }
            let w = cholesky_solve(&a, &xty)?;
            let intercepts = intercepts_from(&w, &c.x_mean, &c.y_mean);
            Ok(LinearModel { weights: w, intercepts })
        })
        .collect()
}

const EN_TOL: f64 = 1e-8;
const EN_MAX_SWEEPS: usize = 20_000;

/// Elastic net for one target via coordinate descent:
/// minimizes `||y - Xw||^2 / (2n) + alpha beta ||w||_1
/// + (alpha (1 - beta) / 2) ||w||^2`.
pub fn elastic_net_fit(x: &Matrix, y: &[f64], alpha: f64, beta: f64) -> Result<LinearModel> {
    if alpha < 0.0 || !(0.0..=1.0).contains(&beta) {
        return Err(Error::Argument("elastic net needs alpha >= 0 and beta in [0, 1]".into()));
    }
    let n = x.rows();
    if n == 0 || y.len() != n {
        return Err(Error::Shape("elastic net: feature/target row mismatch".into()));
    }
    let ym = Matrix::from_vec(n, 1, y.to_vec())?;
    let c = center(x, &ym);
    let p = x.cols();
    let col_sq: Vec<f64> =
        (0..p).map(|j| (0..n).map(|r| c.x.get(r, j).powi(2)).sum::<f64>() / n as f64).collect();

    let l1 = alpha * beta;
    let l2 = alpha * (1.0 - beta);
    let mut w = vec![0.0; p];
    let mut resid: Vec<f64> = (0..n).map(|r| c.y.get(r, 0)).collect();
    let mut converged = false;
    for _ in 0..EN_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..p {
            if col_sq[j] <= 1e-14 {
                continue;
            }
            let mut corr = 0.0;
            for r in 0..n {
                corr += c.x.get(r, j) * resid[r];
            }
            let rho = corr / n as f64 + col_sq[j] * w[j];
            let next = soft_threshold_scalar(rho, l1)? / (col_sq[j] + l2);
            let delta = next - w[j];
            if delta != 0.0 {
                for r in 0..n {
                    resid[r] -= c.x.get(r, j) * delta;
                }
                w[j] = next;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < EN_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "elastic net did not converge in {EN_MAX_SWEEPS} sweeps"
        )));
    }
    let weights = Matrix::from_vec(p, 1, w)?;
    let intercepts = intercepts_from(&weights, &c.x_mean, &c.y_mean);
    Ok(LinearModel { weights, intercepts })
}

/// One elastic net per target column, stacked into a single model.
pub fn elastic_net_fit_multi(x: &Matrix, y: &Matrix, alpha: f64, beta: f64) -> Result<LinearModel> {
    let t = y.cols();
    let p = x.cols();
    let mut weights = Matrix::zeros(p, t);
    let mut intercepts = vec![0.0; t];
    for c in 0..t {
        let target: Vec<f64> = (0..y.rows()).map(|r| y.get(r, c)).collect();
        let fit = elastic_net_fit(x, &target, alpha, beta)?;
        for j in 0..p {
            weights.set(j, c, fit.weights.get(j, 0));
        }
        intercepts[c] = fit.intercepts[0];
    }
    Ok(LinearModel { weights, intercepts })
}

/// The multi-task elastic net objective on centered data; exposed so tests
/// and callers can check the proximal iteration's monotonicity.
pub fn men_objective(x: &Matrix, y: &Matrix, model: &LinearModel, alpha: f64, beta: f64) -> f64 {
    let n = x.rows();
    let t = y.cols();
    let mut fit = 0.0;
    for r in 0..n {
        let pred = model.predict(x.row(r)).expect("shapes checked by caller");
        for c in 0..t {
            fit += (y.get(r, c) - pred[c]).powi(2);
        }
    }
    let mut row_norms = 0.0;
    let mut frob = 0.0;
    for j in 0..model.weights.rows() {
        let mut sq = 0.0;
        for c in 0..t {
            sq += model.weights.get(j, c).powi(2);
        }
        row_norms += sq.sqrt();
        frob += sq;
    }
    fit / (2.0 * n as f64) + alpha * beta * row_norms + 0.5 * alpha * (1.0 - beta) * frob
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn spectral_norm(g: &Matrix) -> f64 {
    let p = g.rows();
    if p == 0 {
        return 0.0;
    }
    let mut rng = Rng::substream(0x5eed, Stream::Truth);
    let mut v: Vec<f64> = (0..p).map(|_| rng.next_normal()).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let next = g.matvec(&v).expect("square");
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let scaled: Vec<f64> = next.iter().map(|a| a / norm).collect();
        let new_lambda = norm;
        let done = (new_lambda - lambda).abs() <= 1e-10 * new_lambda.max(1.0);
        v = scaled;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda
}

const MEN_TOL: f64 = 1e-6;
const MEN_MAX_ITERS: usize = 6_000;

/// Multi-task elastic net by proximal gradient:
/// minimizes `||Y - XW||^2 / (2n) + alpha beta ||W||_{2,1}
/// + (alpha (1 - beta) / 2) ||W||^2` with feature rows as groups, so every
/// task in the stage keeps or drops a feature together.
pub fn men_fit(x: &Matrix, y: &Matrix, alpha: f64, beta: f64) -> Result<LinearModel> {
    Ok(men_fit_grid(x, y, &[(alpha, beta)])?.remove(0))
}

/// Fit a grid of `(alpha, beta)` pairs, reusing the Gram matrix and warm
/// starting each fit from the previous solution.
pub fn men_fit_grid(x: &Matrix, y: &Matrix, pairs: &[(f64, f64)]) -> Result<Vec<LinearModel>> {
    if x.rows() != y.rows() || x.rows() == 0 {
        return Err(Error::Shape("multi-task elastic net: row mismatch".into()));
    }
    for &(alpha, beta) in pairs {
        if alpha < 0.0 || !(0.0..=1.0).contains(&beta) {
            return Err(Error::Argument(
                "multi-task elastic net needs alpha >= 0 and beta in [0, 1]".into(),
            ));
        }
    }
    let c = center(x, y);
    let g = gram(&c.x);
    let xty = cross(&c.x, &c.y);
    let p = g.rows();
    let t = y.cols();
    // Small safety factor so the step stays below 1/L under rounding.
    let gram_norm = spectral_norm(&g) * 1.01;

    let mut w = Matrix::zeros(p, t);
    let mut out = Vec::with_capacity(pairs.len());
    for &(alpha, beta) in pairs {
        let l2 = alpha * (1.0 - beta);
        let step = 1.0 / (gram_norm + l2).max(1e-12);
        let threshold = step * alpha * beta;
        let mut converged = false;
        for _ in 0..MEN_MAX_ITERS {
            // Gradient of the smooth part: G W - X^T Y / n + l2 W.
            let mut max_change = 0.0f64;
            let mut next = Matrix::zeros(p, t);
            for j in 0..p {
                let grow = g.row(j);
                // row j of G W
                let mut gw = vec![0.0; t];
                for (i, &gji) in grow.iter().enumerate() {
                    if gji == 0.0 {
                        continue;
                    }
                    let wrow = w.row(i);
                    for (acc, &wv) in gw.iter_mut().zip(wrow) {
                        *acc += gji * wv;
                    }
                }
                let u: Vec<f64> = (0..t)
                    .map(|tc| {
                        let grad = gw[tc] - xty.get(j, tc) + l2 * w.get(j, tc);
                        w.get(j, tc) - step * grad
                    })
                    .collect();
                let shrunk = soft_threshold_block(&u, threshold)?;
                for (tc, &v) in shrunk.iter().enumerate() {
                    max_change = max_change.max((v - w.get(j, tc)).abs());
                    next.set(j, tc, v);
                }
            }
            w = next;
            if max_change < MEN_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "multi-task elastic net did not converge in {MEN_MAX_ITERS} iterations"
            )));
        }
        let intercepts = intercepts_from(&w, &c.x_mean, &c.y_mean);
        out.push(LinearModel { weights: w.clone(), intercepts });
    }
    Ok(out)
}

/// Run the true noiseless recursion on raw per-stage inputs.
pub fn sov_oracle_predict(truth: &SovModel, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    truth.predict(inputs)
}

/// Oracle predictions for every sample of a dataset, in the dataset's own
/// scale: normalized datasets are mapped back to raw sensors for the
/// recursion and the oracle outputs re-normalized for comparison.
pub fn sov_oracle_predictions(ds: &Dataset) -> Result<Vec<Vec<Vec<f64>>>> {
    let truth =
        ds.truth.as_ref().ok_or_else(|| Error::Argument("dataset carries no ground truth".into()))?;
    let raw;
    let samples = match ds.norm {
        Some(_) => {
            raw = denormalize(ds)?;
            &raw.samples
        }
        None => &ds.samples,
    };
    let mut preds = Vec::with_capacity(samples.len());
    for s in samples {
        preds.push(truth.model.predict(&s.inputs)?);
    }
    if let Some(stats) = &ds.norm {
        // Re-normalize the raw oracle outputs into the dataset's space.
        let mut shell = ds.clone();
        shell.samples = samples
            .iter()
            .zip(&preds)
            .map(|(s, p)| crate::data::Sample { inputs: s.inputs.clone(), outputs: p.clone() })
            .collect();
        shell.norm = None;
        let normed = apply_normalization(&shell, stats);
        preds = normed.samples.into_iter().map(|s| s.outputs).collect();
    }
    Ok(preds)
}

/// Predictions of per-stage linear models (one per stage) over a dataset.
pub fn linear_predictions(models: &[LinearModel], ds: &Dataset) -> Result<Vec<Vec<Vec<f64>>>> {
    if models.len() != ds.topology.stage_count {
        return Err(Error::Shape(format!(
            "{} models for {} stages",
            models.len(),
            ds.topology.stage_count
        )));
    }
    ds.samples
        .iter()
        .map(|s| {
            models
                .iter()
                .enumerate()
                .map(|(k, m)| m.predict(&stacked_feature_vector(&s.inputs, k)))
                .collect()
        })
        .collect()
}

/// Sum of squared errors of per-stage models on a dataset (the validation
/// selection metric).
pub fn prediction_sse(models: &[LinearModel], ds: &Dataset) -> Result<f64> {
    let preds = linear_predictions(models, ds)?;
    let mut sse = 0.0;
    for (s, p) in ds.samples.iter().zip(&preds) {
        for (ys, ps) in s.outputs.iter().zip(p) {
            for (y, pv) in ys.iter().zip(ps) {
                sse += (y - pv).powi(2);
            }
        }
    }
    Ok(sse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorSpec};

    fn random_design(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = Rng::substream(seed, Stream::Sample(42));
        Matrix::from_fn(n, p, |_, _| rng.next_normal())
    }

    #[test]
    fn ridge_approaches_least_squares() {
        // Exactly determined 2x2 system: y = 2 x0 - 3 x1 (after centering).
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let y = Matrix::from_rows(&[vec![2.0], vec![-3.0], vec![-2.0], vec![3.0]]).unwrap();
        let model = ridge_fit(&x, &y, 1e-10).unwrap();
        assert!((model.weights.get(0, 0) - 2.0).abs() < 1e-6);
        assert!((model.weights.get(1, 0) + 3.0).abs() < 1e-6);
    }

    #[test]
    fn ridge_limits() {
        let x = random_design(40, 5, 1);
        let zeros = Matrix::zeros(40, 2);
        let model = ridge_fit(&x, &zeros, 0.1).unwrap();
        assert!(model.weights.data().iter().all(|&v| v.abs() < 1e-12));

        let mut rng = Rng::substream(2, Stream::Sample(0));
        let y = Matrix::from_fn(40, 1, |_, _| rng.next_normal());
        let heavy = ridge_fit(&x, &y, 1e9).unwrap();
        assert!(heavy.weights.data().iter().all(|&v| v.abs() < 1e-6));
        assert!(ridge_fit(&x, &y, 0.0).is_err());
    }

    #[test]
    fn elastic_net_large_alpha_zeroes_everything() {
        let x = random_design(30, 6, 3);
        let mut rng = Rng::substream(4, Stream::Sample(0));
        let y: Vec<f64> = (0..30).map(|_| rng.next_normal()).collect();
        let model = elastic_net_fit(&x, &y, 100.0, 1.0).unwrap();
        assert!(model.weights.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn elastic_net_single_feature_closed_form() {
        // One standardized feature at beta = 1: w = S_alpha(x.y / n).
        let n = 200;
        let mut rng = Rng::substream(5, Stream::Sample(0));
        let mut xs: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        for v in &mut xs {
            *v = (*v - mean) / var.sqrt();
        }
        let y: Vec<f64> = xs.iter().map(|&v| 0.8 * v + 0.1 * rng.next_normal()).collect();
        let x = Matrix::from_vec(n, 1, xs.clone()).unwrap();
        let alpha = 0.3;
        let model = elastic_net_fit(&x, &y, alpha, 1.0).unwrap();
        let ym = y.iter().sum::<f64>() / n as f64;
        let corr = xs.iter().zip(&y).map(|(a, b)| a * (b - ym)).sum::<f64>() / n as f64;
        let expected = soft_threshold_scalar(corr, alpha).unwrap();
        assert!((model.weights.get(0, 0) - expected).abs() < 1e-7);
    }

    #[test]
    fn elastic_net_beta_zero_matches_ridge() {
        let x = random_design(50, 4, 6);
        let mut rng = Rng::substream(7, Stream::Sample(0));
        let y: Vec<f64> = (0..50).map(|_| rng.next_normal()).collect();
        let alpha = 0.2;
        let en = elastic_net_fit(&x, &y, alpha, 0.0).unwrap();
        let ym = Matrix::from_vec(50, 1, y.clone()).unwrap();
        let ridge = ridge_fit(&x, &ym, alpha).unwrap();
        for j in 0..4 {
            assert!(
                (en.weights.get(j, 0) - ridge.weights.get(j, 0)).abs() < 1e-8,
                "feature {j}"
            );
        }
    }

    #[test]
    fn elastic_net_matches_grid_search_on_two_features() {
        let x = random_design(60, 2, 8);
        let mut rng = Rng::substream(9, Stream::Sample(0));
        let y: Vec<f64> = (0..60)
            .map(|r| 1.3 * x.get(r, 0) - 0.4 * x.get(r, 1) + 0.2 * rng.next_normal())
            .collect();
        let (alpha, beta) = (0.15, 0.7);
        let model = elastic_net_fit(&x, &y, alpha, beta).unwrap();

        // Brute force over a weight grid using the centered quadratic form.
        let ym = Matrix::from_vec(60, 1, y.clone()).unwrap();
        let c = center(&x, &ym);
        let g = gram(&c.x);
        let xty = cross(&c.x, &c.y);
        let ysq = (0..60).map(|r| c.y.get(r, 0).powi(2)).sum::<f64>() / 60.0;
        let objective = |w0: f64, w1: f64| {
            let quad = 0.5
                * (g.get(0, 0) * w0 * w0 + 2.0 * g.get(0, 1) * w0 * w1 + g.get(1, 1) * w1 * w1);
            let lin = xty.get(0, 0) * w0 + xty.get(1, 0) * w1;
            0.5 * ysq + quad - lin
                + alpha * beta * (w0.abs() + w1.abs())
                + 0.5 * alpha * (1.0 - beta) * (w0 * w0 + w1 * w1)
        };
        let mut best = f64::INFINITY;
        let steps = 800;
        for i in 0..=steps {
            let w0 = -2.0 + 4.0 * i as f64 / steps as f64;
            for j in 0..=steps {
                let w1 = -2.0 + 4.0 * j as f64 / steps as f64;
                best = best.min(objective(w0, w1));
            }
        }
        let fitted = objective(model.weights.get(0, 0), model.weights.get(1, 0));
        assert!(fitted <= best + 1e-3, "fitted {fitted} vs grid best {best}");
    }

    #[test]
    fn men_large_alpha_zeroes_everything() {
        let x = random_design(30, 5, 10);
        let mut rng = Rng::substream(11, Stream::Sample(0));
        let y = Matrix::from_fn(30, 3, |_, _| rng.next_normal());
        let model = men_fit(&x, &y, 50.0, 1.0).unwrap();
        assert!(model.weights.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn men_single_task_agrees_with_elastic_net() {
        let x = random_design(80, 6, 12);
        let mut rng = Rng::substream(13, Stream::Sample(0));
        let y: Vec<f64> = (0..80)
            .map(|r| 0.9 * x.get(r, 0) - 0.6 * x.get(r, 3) + 0.1 * rng.next_normal())
            .collect();
        let ym = Matrix::from_vec(80, 1, y.clone()).unwrap();
        let (alpha, beta) = (0.08, 0.6);
        let men = men_fit(&x, &ym, alpha, beta).unwrap();
        let en = elastic_net_fit(&x, &y, alpha, beta).unwrap();
        for j in 0..6 {
            assert!(
                (men.weights.get(j, 0) - en.weights.get(j, 0)).abs() < 1e-5,
                "feature {j}: {} vs {}",
                men.weights.get(j, 0),
                en.weights.get(j, 0)
            );
        }
    }

    #[test]
    fn men_sparsity_is_row_wise() {
        let x = random_design(60, 8, 14);
        let mut rng = Rng::substream(15, Stream::Sample(0));
        let y = Matrix::from_fn(60, 3, |r, c| {
            0.7 * x.get(r, 0) - 0.5 * x.get(r, 1) * (c as f64 + 1.0) + 0.05 * rng.next_normal()
        });
        let model = men_fit(&x, &y, 0.2, 0.9).unwrap();
        for j in 0..8 {
            let row: Vec<f64> = (0..3).map(|c| model.weights.get(j, c)).collect();
            let all_zero = row.iter().all(|&v| v == 0.0);
            let none_zero = row.iter().all(|&v| v != 0.0);
            assert!(all_zero || none_zero, "row {j} is partially zero: {row:?}");
        }
    }

    #[test]
    fn men_objective_is_monotone_under_prox_iterations() {
        // Re-run the proximal iteration by hand and watch the objective.
        let x = random_design(50, 6, 16);
        let mut rng = Rng::substream(17, Stream::Sample(0));
        let y = Matrix::from_fn(50, 2, |r, _| x.get(r, 1) - x.get(r, 4) + 0.1 * rng.next_normal());
        let (alpha, beta) = (0.1, 0.8);
        let c = center(&x, &y);
        let g = gram(&c.x);
        let xty = cross(&c.x, &c.y);
        let l2 = alpha * (1.0 - beta);
        let step = 1.0 / (spectral_norm(&g) * 1.01 + l2);
        let mut w = Matrix::zeros(6, 2);
        let mut prev = f64::INFINITY;
        for _ in 0..60 {
            let model = LinearModel { weights: w.clone(), intercepts: vec![0.0; 2] };
            let obj = men_objective(&c.x, &c.y, &model, alpha, beta);
            assert!(obj <= prev + 1e-12, "objective rose: {prev} -> {obj}");
            prev = obj;
            let mut next = Matrix::zeros(6, 2);
            for j in 0..6 {
                let u: Vec<f64> = (0..2)
                    .map(|tc| {
                        let mut gw = 0.0;
                        for i in 0..6 {
                            gw += g.get(j, i) * w.get(i, tc);
                        }
                        let grad = gw - xty.get(j, tc) + l2 * w.get(j, tc);
                        w.get(j, tc) - step * grad
                    })
                    .collect();
                let shrunk = soft_threshold_block(&u, step * alpha * beta).unwrap();
                for (tc, &v) in shrunk.iter().enumerate() {
                    next.set(j, tc, v);
                }
            }
            w = next;
        }
    }

    #[test]
    fn oracle_is_exact_on_noiseless_data() {
        let spec = GeneratorSpec {
            stages: 3,
            inputs_per_stage: 6,
            outputs_per_stage: 2,
            hidden_true: 2,
            samples: 12,
            unimportant: 1,
            noise_std: 0.0,
            seed: 21,
            ..GeneratorSpec::case1()
        };
        let ds = generate(&spec).unwrap();
        let preds = sov_oracle_predictions(&ds).unwrap();
        for (s, p) in ds.samples.iter().zip(&preds) {
            assert_eq!(&s.outputs, p);
        }
    }

    #[test]
    fn oracle_requires_truth() {
        let topo = crate::model::StageTopology::new(vec![1], vec![1], 1, 1, 1, false).unwrap();
        let ds = Dataset {
            samples: vec![crate::data::Sample { inputs: vec![vec![1.0]], outputs: vec![vec![1.0]] }],
            topology: topo,
            norm: None,
            truth: None,
        };
        assert!(sov_oracle_predictions(&ds).is_err());
    }

    #[test]
    fn oracle_handles_normalized_datasets() {
        let spec = GeneratorSpec {
            stages: 3,
            inputs_per_stage: 6,
            outputs_per_stage: 2,
            hidden_true: 2,
            samples: 40,
            unimportant: 1,
            noise_std: 0.0,
            seed: 22,
            ..GeneratorSpec::case1()
        };
        let ds = generate(&spec).unwrap();
        let (normed, _) = crate::data::normalize(&ds).unwrap();
        let preds = sov_oracle_predictions(&normed).unwrap();
        for (s, p) in normed.samples.iter().zip(&preds) {
            for (ys, ps) in s.outputs.iter().zip(p) {
                for (y, pv) in ys.iter().zip(ps) {
                    assert!((y - pv).abs() < 1e-9, "normalized oracle should still be exact");
                }
            }
        }
    }
}
