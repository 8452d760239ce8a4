//! Trains every strategy once from the same initialization on the default
//! synthetic pair and reports target dev/test F with the selected epoch.
//!
//! `cargo run --release --example train_strategies`

use loant::harness::{evaluate, sequential_finetune, train_run, ExperimentSpec};
use loant::model::{Domain, ModelParams};
use loant::optim::Strategy;

fn main() -> loant::Result<()> {
    let spec = ExperimentSpec {
        epochs: 3,
        source_epochs: 3,
        ..ExperimentSpec::default()
    };
    let data = spec.prepare()?;
    let init = ModelParams::init(&spec.model, 0)?;
    println!("{:<13} {:>6} {:>6} {:>6} {:>9}", "strategy", "devF", "testF", "epoch", "ms/epoch");
    for strategy in Strategy::ALL {
        let cfg = spec.training(strategy, 6e-3, 0);
        let run = if strategy == Strategy::SeqFinetune {
            let phase1 = loant::optim::TrainingConfig {
                epochs: spec.source_epochs,
                ..cfg.clone()
            };
            sequential_finetune(&phase1, &cfg, &init, &data)?.phase2
        } else {
            train_run(&cfg, &init, &data)?
        };
        let test = evaluate(&run.selected, Domain::Target, &data.target_test)?;
        println!(
            "{:<13} {:>6.3} {:>6.3} {:>6} {:>9.0}",
            strategy.name(),
            run.dev.f,
            test.f,
            run.selected_epoch,
            run.wall_ms / run.epochs.len() as f64
        );
    }
    Ok(())
}
