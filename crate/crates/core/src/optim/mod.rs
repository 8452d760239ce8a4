//! Training strategies, look-ahead steps, Adam and the cosine schedule.

mod adam;
mod lookahead;
mod maml;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use lookahead::{
    latent_step, lo_joint_loss, loant_grads, lookahead_state_scalars, mtl_lo_step,
    single_task_step, strategy_step, LatentPair, StepOutcome, Strategy,
};
pub use maml::{maml_lookahead_step, maml_meta_update, MamlLookahead, TaskLoss};
pub use schedule::cosine_lr;
pub use train::{
    DomainLoader, EpochReport, PairedLoader, Trainer, TrainingConfig, DEFAULT_LR_GRID,
};
