//! Metrics, model selection, sequential fine-tuning and the multi-seed
//! strategy comparison.

mod experiment;
mod metrics;
mod runner;
mod select;

pub use experiment::{
    encoder_scalars, relative_state, run_experiment, summary_csv, write_outputs, Comparison,
    DataSource, ExperimentOutcome, ExperimentSpec, StrategyAggregate, SummaryRow,
};
pub use metrics::{f_score, mean, paired_sign_test, std_dev, Prf, SignTest};
pub use runner::{
    carry_encoder, evaluate, sequential_finetune, target_dev_loss, train_run, train_single,
    MetricsReport, PreparedData, RunResult, RunStatus, SequentialResult,
};
pub use select::{select_index, select_model, Checkpoint};

/// Runs `f` on a pool sized by `LOANT_THREADS` when set, else on the global pool.
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> crate::Result<T> {
    match std::env::var("LOANT_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| crate::Error::InvalidArgument(format!("LOANT_THREADS={v:?} is not a count")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
