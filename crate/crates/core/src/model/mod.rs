//! Encoder, shared and domain-specific layers, task classifiers and the
//! domain discriminator behind gradient reversal.

pub mod checkpoint;
mod forward;
mod params;

pub use forward::{
    ant_joint_loss, branch_forward, dense_tanh, domain_loss, encode, eval_loss, forward_step,
    head_logits, joint_value, logits, predict, single_task_forward, task_loss, Domain,
    DomainBatch, EncodedPair, ForwardActivations, GrlSchedule, LossBreakdown, StepForward,
    SOURCE_DOMAIN_LABEL, TARGET_DOMAIN_LABEL,
};
pub use params::{
    Branch, Dense, EncoderParams, Head, ModelConfig, ModelParams, ParamGroup, Params,
};
