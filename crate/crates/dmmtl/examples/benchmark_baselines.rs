//! Compare the stage-chain model against linear baselines (ridge, elastic
//! net, multi-task elastic net) and the true-recursion oracle on one
//! synthetic benchmark dataset.
//!
//! ```bash
//! cargo run --example benchmark_baselines            # unified chain
//! cargo run --example benchmark_baselines -- 3 9     # lagged lines, seed 9
//! ```

use dmmtl::baselines::{
    elastic_net_fit_multi, linear_predictions, men_fit_grid, prediction_sse, ridge_fit_grid,
    sov_oracle_predictions, stacked_features, stage_targets, LinearModel,
};
use dmmtl::data::{generate, split_and_normalize, Dataset, GeneratorSpec};
use dmmtl::diagnostics::{mean_defined, relative_rmse};
use dmmtl::losses::{LossKind, TrainConfig};
use dmmtl::model::{predict, StageTopology};
use dmmtl::optimizer::train;

fn score(preds: &[Vec<Vec<f64>>], test: &Dataset, train: &Dataset) -> f64 {
    let targets: Vec<_> = test.samples.iter().map(|s| s.outputs.clone()).collect();
    let per = relative_rmse(&targets, preds, &train.output_means()).unwrap();
    mean_defined(&per).unwrap()
}

fn main() -> dmmtl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let case: u8 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let mut spec = match case {
        2 => GeneratorSpec::case2(),
        3 => GeneratorSpec::case3(),
        _ => GeneratorSpec::case1(),
    };
    spec.seed = seed;
    spec.samples = 1200;
    let ds = generate(&spec)?;
    let (train_ds, val_ds, test_ds) = split_and_normalize(&ds, (0.6, 0.2, 0.2), seed)?;
    println!("benchmark case {case}, seed {seed}, {} samples", spec.samples);

    // Stage-chain model.
    let topology = StageTopology::new(
        train_ds.topology.input_widths.clone(),
        train_ds.topology.output_widths.clone(),
        24,
        1,
        1,
        false,
    )?;
    let config = TrainConfig {
        lambda_x: 0.02,
        lambda: 1e-4,
        gamma: 1.0,
        loss_kind: LossKind::Sse,
        prox_step: 0.1,
        sgd_step: 0.05,
        batch_size: 128,
        epochs: 250,
        seed,
        restart_patience: 50,
        max_restarts: 2,
        adapt_prox: false,
    };
    let (params, _) = train(&train_ds, &val_ds, &topology, &config)?;
    let preds: dmmtl::Result<Vec<_>> =
        test_ds.samples.iter().map(|s| predict(&params, &s.inputs)).collect();
    println!("stage-chain model      rmse {:.4}", score(&preds?, &test_ds, &train_ds));

    // Baselines, each selected on the validation split.
    let stages = spec.stages;
    let pick = |per_candidate: Vec<Vec<LinearModel>>| -> Vec<LinearModel> {
        per_candidate
            .into_iter()
            .map(|m| (prediction_sse(&m, &val_ds).unwrap(), m))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1
    };

    let lambdas = [1e-3, 1e-2, 0.1, 1.0, 10.0];
    let mut ridge: Vec<Vec<LinearModel>> = vec![Vec::new(); lambdas.len()];
    let en_grid = [(0.003, 0.5), (0.01, 0.5), (0.03, 0.5), (0.1, 0.5)];
    let mut en: Vec<Vec<LinearModel>> = vec![Vec::new(); en_grid.len()];
    let men_grid = [(0.1, 0.5), (0.03, 0.5), (0.01, 0.5), (0.003, 0.5)];
    let mut men: Vec<Vec<LinearModel>> = vec![Vec::new(); men_grid.len()];
    for k in 0..stages {
        let x = stacked_features(&train_ds, k);
        let y = stage_targets(&train_ds, k);
        for (i, fit) in ridge_fit_grid(&x, &y, &lambdas)?.into_iter().enumerate() {
            ridge[i].push(fit);
        }
        for (i, &(alpha, beta)) in en_grid.iter().enumerate() {
            en[i].push(elastic_net_fit_multi(&x, &y, alpha, beta)?);
        }
        for (i, fit) in men_fit_grid(&x, &y, &men_grid)?.into_iter().enumerate() {
            men[i].push(fit);
        }
    }
    for (name, models) in
        [("ridge", pick(ridge)), ("elastic net", pick(en)), ("multi-task elastic net", pick(men))]
    {
        let preds = linear_predictions(&models, &test_ds)?;
        println!("{name:<22} rmse {:.4}", score(&preds, &test_ds, &train_ds));
    }

    let oracle = sov_oracle_predictions(&test_ds)?;
    println!("true-recursion oracle  rmse {:.4} (noise floor)", score(&oracle, &test_ds, &train_ds));
    Ok(())
}
