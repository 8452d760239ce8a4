//! Epoch loop shared by every strategy.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::lookahead::{single_task_step, strategy_step, StepOutcome, Strategy};
use super::schedule::cosine_lr;
use crate::error::{Error, Result};
use crate::model::{Domain, DomainBatch, GrlSchedule, LossBreakdown, ModelParams};

/// Learning-rate grid searched for the base strategies.
pub const DEFAULT_LR_GRID: [f64; 5] = [2e-3, 4e-3, 6e-3, 8e-3, 1e-2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub strategy: Strategy,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub grl: GrlSchedule,
    /// Seeds batch shuffling; independent of parameter initialization.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            strategy: Strategy::Loant,
            lr: 4e-3,
            gamma: 1e-2,
            batch_size: 128,
            epochs: 5,
            adam: AdamConfig::default(),
            grl: GrlSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Infinite shuffled stream over one domain; reshuffles on every wrap.
#[derive(Clone, Debug)]
pub struct DomainLoader {
    data: DomainBatch,
    order: Vec<usize>,
    cursor: usize,
}

impl DomainLoader {
    pub fn new(data: DomainBatch) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("training loader".into()));
        }
        let order = (0..data.len()).collect();
        Ok(DomainLoader {
            data,
            order,
            cursor: usize::MAX,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batches_per_pass(&self, batch_size: usize) -> usize {
        self.len().div_ceil(batch_size)
    }

    pub fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> DomainBatch {
        let mut out = DomainBatch::default();
        for _ in 0..size {
            if self.cursor >= self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            let i = self.order[self.cursor];
            self.cursor += 1;
            out.tokens.push(self.data.tokens[i].clone());
            out.labels.push(self.data.labels[i]);
        }
        out
    }
}

/// Yields `N = max(⌈n_s/B⌉, ⌈n_t/B⌉)` batch pairs per epoch, each with `B`
/// examples from both domains; the shorter domain cycles.
#[derive(Clone, Debug)]
pub struct PairedLoader {
    pub source: DomainLoader,
    pub target: DomainLoader,
    batch_size: usize,
}

impl PairedLoader {
    pub fn new(source: DomainBatch, target: DomainBatch, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(PairedLoader {
            source: DomainLoader::new(source)?,
            target: DomainLoader::new(target)?,
            batch_size,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.source
            .batches_per_pass(self.batch_size)
            .max(self.target.batches_per_pass(self.batch_size))
    }

    pub fn next_pair(&mut self, rng: &mut ChaCha8Rng) -> (DomainBatch, DomainBatch) {
        let s = self.source.next_batch(self.batch_size, rng);
        let t = self.target.next_batch(self.batch_size, rng);
        (s, t)
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub strategy: Strategy,
    /// Mean over the epoch's batches.
    pub losses: LossBreakdown,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub wall_ms: f64,
    /// Peak transient look-ahead scalars over the epoch.
    pub aux_state_scalars: usize,
    #[serde(skip)]
    pub batch_losses: Vec<LossBreakdown>,
}

impl EpochReport {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Parameters, optimizer and schedule position of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub params: ModelParams,
    config: TrainingConfig,
    adam: Adam,
    rng: ChaCha8Rng,
    step: usize,
    total_steps: usize,
    epoch: usize,
}

impl Trainer {
    /// `steps_per_epoch` fixes the schedule horizon `T = epochs · steps_per_epoch`.
    pub fn new(config: TrainingConfig, params: ModelParams, steps_per_epoch: usize) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            params,
            adam: Adam::new(config.adam),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            step: 0,
            total_steps: config.epochs * steps_per_epoch,
            epoch: 0,
            config,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    fn schedule(&self) -> Result<(f64, f64)> {
        // Steps beyond the horizon hold the schedule at its end point.
        let t = self.step.min(self.total_steps);
        let lr = cosine_lr(t, self.total_steps, self.config.lr)?;
        let progress = if self.total_steps == 0 {
            0.0
        } else {
            t as f64 / self.total_steps as f64
        };
        Ok((lr, self.config.grl.weight(progress)))
    }

    fn apply(&mut self, outcome: &StepOutcome, lr: f64, batch: usize) -> Result<()> {
        let epoch = self.epoch + 1;
        if !outcome.losses.is_finite() || !outcome.grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch,
                detail: format!("{:?}", outcome.losses),
            });
        }
        self.adam.step_model(&mut self.params, &outcome.grads, lr)?;
        if !self.params.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch,
                detail: "parameters became non-finite after the update".into(),
            });
        }
        self.step += 1;
        Ok(())
    }

    fn finish(&mut self, start: Instant, lr: f64, batch_losses: Vec<LossBreakdown>, aux: usize) -> EpochReport {
        self.epoch += 1;
        let n = batch_losses.len().max(1) as f64;
        let (s, t, d) = batch_losses
            .iter()
            .fold((0.0, 0.0, 0.0), |a, l| (a.0 + l.l_s, a.1 + l.l_t, a.2 + l.l_d));
        EpochReport {
            epoch: self.epoch,
            strategy: self.config.strategy,
            losses: LossBreakdown::new(s / n, t / n, d / n),
            lr,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            aux_state_scalars: aux,
            batch_losses,
        }
    }

    /// One pass of paired batches under the configured strategy.
    pub fn train_epoch(&mut self, loader: &mut PairedLoader) -> Result<EpochReport> {
        let start = Instant::now();
        let n = loader.batches_per_epoch();
        let mut losses = Vec::with_capacity(n);
        let mut aux = 0;
        let mut lr = self.config.lr;
        for batch in 0..n {
            let (src, tgt) = loader.next_pair(&mut self.rng);
            let (lr_t, lambda) = self.schedule()?;
            lr = lr_t;
            let outcome = strategy_step(
                self.config.strategy,
                &self.params,
                &src,
                &tgt,
                self.config.gamma,
                lambda,
            )
            .map_err(|e| self.wrap(e, batch))?;
            self.apply(&outcome, lr, batch)?;
            aux = aux.max(outcome.aux_state);
            losses.push(outcome.losses);
        }
        Ok(self.finish(start, lr, losses, aux))
    }

    /// One pass over a single domain with that domain's task loss only.
    pub fn train_single_epoch(&mut self, domain: Domain, loader: &mut DomainLoader) -> Result<EpochReport> {
        let start = Instant::now();
        let n = loader.batches_per_pass(self.config.batch_size);
        let mut losses = Vec::with_capacity(n);
        let mut lr = self.config.lr;
        for batch in 0..n {
            let b = loader.next_batch(self.config.batch_size, &mut self.rng);
            let (lr_t, _) = self.schedule()?;
            lr = lr_t;
            let outcome = single_task_step(&self.params, domain, &b).map_err(|e| self.wrap(e, batch))?;
            self.apply(&outcome, lr, batch)?;
            losses.push(outcome.losses);
        }
        Ok(self.finish(start, lr, losses, 0))
    }

    fn wrap(&self, e: Error, batch: usize) -> Error {
        match e {
            Error::NonFinite(detail) => Error::NonFiniteLoss {
                epoch: self.epoch + 1,
                batch,
                detail,
            },
            other => other,
        }
    }
}
