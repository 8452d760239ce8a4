//! Latent-optimized adversarial neural transfer (LOANT) and its baselines.
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`] is a small dense-tensor gradient tape with gradients at
//!   intermediate nodes, a `detach` primitive and a finite-difference checker.
//! * [`model`] holds the encoder, shared/domain-specific layers, task classifiers and
//!   the domain discriminator behind a gradient reversal layer.
//! * [`optim`] has the latent look-ahead steps, the LOANT/ANT/MTL/MTL+LO/ANT+MAML
//!   step rules, first-order MAML, Adam and the cosine schedule.
//! * [`quadratic`] is a 2D quadratic playground comparing gradient descent with
//!   first-order and full-Hessian extragradient, with SVG/CSV export.
//! * [`data`] covers synthetic two-domain corpora, deduplication, trimming,
//!   upsampling and the unigram KL divergence.
//! * [`harness`] has F-score metrics, dev-set model selection, sequential
//!   fine-tuning and the multi-seed strategy comparison.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod optim;
pub mod quadratic;

pub use error::{Error, Result};
