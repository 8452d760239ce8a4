//! A multi-seed comparison with per-seed learning-rate selection, exact sign
//! tests and the files the `compare` subcommand writes.
//!
//! `cargo run --release --example compare_experiment -- [out_dir]`

use loant::harness::{run_experiment, with_thread_pool, write_outputs, ExperimentSpec};
use loant::optim::Strategy;

fn main() -> loant::Result<()> {
    let spec = ExperimentSpec {
        strategies: vec![Strategy::Ant, Strategy::Loant, Strategy::Mtl, Strategy::MtlLo],
        seeds: (0..3).collect(),
        lr_grid: vec![4e-3, 8e-3],
        epochs: 3,
        gamma_overrides: [(Strategy::Loant, 2.0), (Strategy::MtlLo, 0.02)].into(),
        ..ExperimentSpec::default()
    };
    let outcome = with_thread_pool(|| run_experiment(&spec))??;
    for a in &outcome.aggregates {
        println!(
            "{:<8} test F {:.4} ± {:.4} over {} runs, {:.2}x time",
            a.strategy.name(),
            a.mean_test_f,
            a.std_test_f,
            a.runs,
            a.mean_rel_time
        );
    }
    for c in &outcome.comparisons {
        let st = &c.sign_test;
        println!(
            "{} vs {}: mean diff {:+.4}, wins/losses/ties {}/{}/{}, p = {:.3}",
            c.strategy, c.baseline, c.mean_diff, st.wins, st.losses, st.ties, st.p_value
        );
    }
    if let Some(dir) = std::env::args().nth(1) {
        write_outputs(&outcome, std::path::Path::new(&dir))?;
        println!("wrote reports.jsonl, summary.csv, aggregates.json and runs/ to {dir}");
    }
    Ok(())
}
