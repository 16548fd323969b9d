//! Randomized hyperparameter search scored by validation error, the same
//! procedure the `dmmtl tune` subcommand runs.
//!
//! ```bash
//! cargo run --example tune_random_search
//! ```

use dmmtl::config::load_config;
use dmmtl::run::cmd_tune;

fn main() -> dmmtl::Result<()> {
    let dir = std::env::temp_dir().join("dmmtl-tune-example");
    std::fs::create_dir_all(&dir)?;
    let out = dir.join("out");
    let config_path = dir.join("tune.toml");
    std::fs::write(
        &config_path,
        format!(
            r#"
seed = 4
out = "{}"

[model]
hidden = 8

[train]
epochs = 60
batch_size = 64

[generator]
case = 1
stages = 5
inputs_per_stage = 30
outputs_per_stage = 3
hidden_true = 4
unimportant = 6
samples = 600

[tune]
trials = 8
lambda_x = [1e-3, 0.3]
lambda = [1e-6, 1e-2]
gamma = [0.2, 5.0]
prox_step = [0.02, 0.5]
hidden = [6, 20]
"#,
            out.display()
        ),
    )?;

    let cfg = load_config(&config_path, &[], None, None)?;
    let summary = cmd_tune(&cfg, 2)?;
    print!("{summary}");

    println!("--- trial table ---");
    print!("{}", std::fs::read_to_string(out.join("tune_trials.csv"))?);
    println!("--- best hyperparameters (tune_best.toml) ---");
    print!("{}", std::fs::read_to_string(out.join("tune_best.toml"))?);
    Ok(())
}
