//! Shared machinery for the integration suites: the pinned benchmark
//! protocol (model + baseline fits on the synthetic cases) and a
//! derivative-free minimizer used as an independent oracle.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dmmtl::baselines::{
    elastic_net_fit_multi, linear_predictions, men_fit_grid, prediction_sse, ridge_fit_grid,
    sov_oracle_predictions, stacked_features, stage_targets, LinearModel,
};
use dmmtl::data::{generate, split_and_normalize, Dataset, GeneratorSpec};
use dmmtl::diagnostics::{mean_defined, per_stage_means, relative_rmse, PerOutput};
use dmmtl::losses::{LossKind, TrainConfig};
use dmmtl::model::{predict, ParameterSet, StageTopology};
use dmmtl::optimizer::train;

/// Benchmark seeds for the multi-seed criteria.
pub const BENCH_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Pinned ridge penalty grid (validation-selected per dataset).
pub const RIDGE_GRID: [f64; 5] = [1e-3, 1e-2, 0.1, 1.0, 10.0];
/// Pinned elastic-net (alpha, beta) grid.
pub const EN_GRID: [(f64, f64); 5] =
    [(0.003, 0.5), (0.01, 0.5), (0.03, 0.5), (0.1, 0.5), (0.03, 1.0)];
/// Pinned multi-task elastic-net (alpha, beta) grid.
pub const MEN_GRID: [(f64, f64); 4] = [(0.1, 0.5), (0.03, 0.5), (0.01, 0.5), (0.003, 0.5)];

/// Pinned model configuration for the full-size benchmark runs.
pub fn bench_train_config(seed: u64) -> (usize, TrainConfig) {
    (
        32,
        TrainConfig {
            lambda_x: 0.02,
            lambda: 1e-4,
            gamma: 1.0,
            loss_kind: LossKind::Sse,
            prox_step: 0.1,
            sgd_step: 0.05,
            batch_size: 128,
            epochs: 400,
            seed,
            restart_patience: 50,
            max_restarts: 2,
            adapt_prox: false,
        },
    )
}

/// Pinned configuration for the reduced-sample per-stage profile runs.
pub fn profile_train_config(seed: u64) -> (usize, TrainConfig) {
    let (_, cfg) = bench_train_config(seed);
    (16, cfg)
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub mean: f64,
    pub per_stage: Vec<f64>,
}

fn method_run(per_output: &PerOutput) -> MethodRun {
    MethodRun {
        mean: mean_defined(per_output).expect("benchmark outputs are never constant"),
        per_stage: per_stage_means(per_output)
            .into_iter()
            .map(|v| v.expect("stage has defined outputs"))
            .collect(),
    }
}

/// Everything one benchmark dataset yields.
pub struct CaseRun {
    pub seed: u64,
    pub dmmtl: MethodRun,
    pub ridge: MethodRun,
    pub en: MethodRun,
    pub men: MethodRun,
    pub oracle: MethodRun,
    pub params: ParameterSet,
    /// Validation-selected elastic net, one multi-target model per stage.
    pub en_models: Vec<LinearModel>,
    pub truth_important: Vec<Vec<bool>>,
    /// Raw (unnormalized) dataset, retained on request for ingestion checks.
    pub raw: Option<Dataset>,
}

/// Run the pinned benchmark protocol on one synthetic dataset: train the
/// stage-chain model, fit all baselines with validation-selected penalties,
/// and score everything on the test split.
pub fn run_case(case: u8, seed: u64, samples: usize, hidden: usize, keep_raw: bool) -> CaseRun {
    let mut spec = match case {
        2 => GeneratorSpec::case2(),
        3 => GeneratorSpec::case3(),
        _ => GeneratorSpec::case1(),
    };
    spec.seed = seed;
    spec.samples = samples;
    let ds = generate(&spec).unwrap();
    let truth_important = ds.truth.as_ref().unwrap().important.clone();
    let (train_ds, val_ds, test_ds) = split_and_normalize(&ds, (0.6, 0.2, 0.2), seed).unwrap();
    let stages = spec.stages;
    let targets: Vec<_> = test_ds.samples.iter().map(|s| s.outputs.clone()).collect();
    let train_means = train_ds.output_means();
    let score = |preds: &[Vec<Vec<f64>>]| -> MethodRun {
        method_run(&relative_rmse(&targets, preds, &train_means).unwrap())
    };

    // Stage-chain model.
    let (_, mut cfg) = bench_train_config(seed);
    cfg.seed = seed;
    let topo = StageTopology::new(
        train_ds.topology.input_widths.clone(),
        train_ds.topology.output_widths.clone(),
        hidden,
        1,
        1,
        false,
    )
    .unwrap();
    let (params, _) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
    let dmmtl_preds: Vec<_> =
        test_ds.samples.iter().map(|s| predict(&params, &s.inputs).unwrap()).collect();
    let dmmtl = score(&dmmtl_preds);

    // Ridge over its penalty grid.
    let mut per_lambda: Vec<Vec<LinearModel>> = vec![Vec::new(); RIDGE_GRID.len()];
    for k in 0..stages {
        let x = stacked_features(&train_ds, k);
        let y = stage_targets(&train_ds, k);
        for (i, fit) in ridge_fit_grid(&x, &y, &RIDGE_GRID).unwrap().into_iter().enumerate() {
            per_lambda[i].push(fit);
        }
    }
    let ridge_models = select_by_val_sse(per_lambda, &val_ds);
    let ridge = score(&linear_predictions(&ridge_models, &test_ds).unwrap());

    // Elastic net over its grid.
    let mut per_pair: Vec<Vec<LinearModel>> = vec![Vec::new(); EN_GRID.len()];
    for k in 0..stages {
        let x = stacked_features(&train_ds, k);
        let y = stage_targets(&train_ds, k);
        for (i, &(alpha, beta)) in EN_GRID.iter().enumerate() {
            per_pair[i].push(elastic_net_fit_multi(&x, &y, alpha, beta).unwrap());
        }
    }
    let en_models = select_by_val_sse(per_pair, &val_ds);
    let en = score(&linear_predictions(&en_models, &test_ds).unwrap());

    // Multi-task elastic net over its grid (warm-started).
    let mut per_pair: Vec<Vec<LinearModel>> = vec![Vec::new(); MEN_GRID.len()];
    for k in 0..stages {
        let x = stacked_features(&train_ds, k);
        let y = stage_targets(&train_ds, k);
        for (i, fit) in men_fit_grid(&x, &y, &MEN_GRID).unwrap().into_iter().enumerate() {
            per_pair[i].push(fit);
        }
    }
    let men_models = select_by_val_sse(per_pair, &val_ds);
    let men = score(&linear_predictions(&men_models, &test_ds).unwrap());

    // True-recursion oracle.
    let oracle = score(&sov_oracle_predictions(&test_ds).unwrap());

    CaseRun {
        seed,
        dmmtl,
        ridge,
        en,
        men,
        oracle,
        params,
        en_models,
        truth_important,
        raw: keep_raw.then_some(ds),
    }
}

fn select_by_val_sse(candidates: Vec<Vec<LinearModel>>, val: &Dataset) -> Vec<LinearModel> {
    candidates
        .into_iter()
        .map(|models| (prediction_sse(&models, val).unwrap(), models))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty grid")
        .1
}

/// Run boxed jobs on a bounded worker pool (results go wherever the closures
/// put them).
type Job<'a> = Box<dyn FnOnce() + Send + 'a>;

pub fn run_parallel<'a>(jobs: Vec<Job<'a>>, workers: usize) {
    let jobs: Vec<Mutex<Option<Job<'a>>>> =
        jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let job = jobs[i].lock().unwrap().take().expect("job taken once");
                job();
            });
        }
    });
}

/// Nelder-Mead simplex minimizer, used as a derivative-free oracle for
/// proximal subproblems. Convex low-dimensional targets only.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64, iters: usize) -> Vec<f64> {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..iters {
        // Sort ascending by value.
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let simplex_sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let spread: f64 = (0..dim)
            .map(|i| {
                let lo = simplex.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = simplex.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max);
        if spread < 1e-12 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|v| v[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> =
            centroid.iter().zip(&worst).map(|(c, w)| c + (c - w)).collect();
        let fr = f(&reflect);
        if fr < values[0] {
            let expand: Vec<f64> =
                centroid.iter().zip(&worst).map(|(c, w)| c + 2.0 * (c - w)).collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[dim] = expand;
                values[dim] = fe;
            } else {
                simplex[dim] = reflect;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflect;
            values[dim] = fr;
        } else {
            let contract: Vec<f64> =
                centroid.iter().zip(&worst).map(|(c, w)| c + 0.5 * (w - c)).collect();
            let fc = f(&contract);
            if fc < values[dim] {
                simplex[dim] = contract;
                values[dim] = fc;
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                }
                for (i, v) in simplex.iter().enumerate().skip(1) {
                    values[i] = f(v);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..simplex.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    simplex[order[0]].clone()
}
