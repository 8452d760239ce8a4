use serde::{Deserialize, Serialize};

use super::metrics::{f_score, Prf};
use super::select::{select_model, Checkpoint};
use crate::data::{DomainDataset, Split};
use crate::error::{Error, Result};
use crate::model::{eval_loss, predict, Domain, DomainBatch, ModelParams, ParamGroup};
use crate::optim::{DomainLoader, EpochReport, PairedLoader, Strategy, Trainer, TrainingConfig};

/// Batches of a preprocessed source/target pair.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub source_train: DomainBatch,
    pub source_dev: DomainBatch,
    pub target_train: DomainBatch,
    pub target_dev: DomainBatch,
    pub target_test: DomainBatch,
}

impl PreparedData {
    pub fn new(source: &DomainDataset, target: &DomainDataset) -> Result<Self> {
        let data = PreparedData {
            source_train: source.batch(Split::Train),
            source_dev: source.batch(Split::Dev),
            target_train: target.batch(Split::Train),
            target_dev: target.batch(Split::Dev),
            target_test: target.batch(Split::Test),
        };
        for (name, b) in [
            ("source train", &data.source_train),
            ("source dev", &data.source_dev),
            ("target train", &data.target_train),
            ("target dev", &data.target_dev),
            ("target test", &data.target_test),
        ] {
            if b.is_empty() {
                return Err(Error::Empty(format!("{name} split")));
            }
        }
        Ok(data)
    }
}

pub fn evaluate(params: &ModelParams, domain: Domain, batch: &DomainBatch) -> Result<Prf> {
    let predictions = predict(params, domain, &batch.tokens)?;
    f_score(&predictions, &batch.labels, 1)
}

/// Outcome of one training run with dev-set model selection.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: TrainingConfig,
    pub epochs: Vec<EpochReport>,
    /// One per trained epoch.
    pub checkpoints: Vec<Checkpoint>,
    pub selected_epoch: usize,
    pub selected: ModelParams,
    pub dev: Prf,
    pub wall_ms: f64,
    pub aux_state: usize,
}

impl RunResult {
    fn from_checkpoints(
        config: TrainingConfig,
        epochs: Vec<EpochReport>,
        checkpoints: Vec<Checkpoint>,
        wall_ms: f64,
    ) -> Result<Self> {
        let best = select_model(&checkpoints)?.clone();
        let aux_state = epochs.iter().map(|e| e.aux_state_scalars).max().unwrap_or(0);
        Ok(RunResult {
            config,
            epochs,
            selected_epoch: best.epoch,
            selected: best.params,
            dev: best.dev,
            checkpoints,
            wall_ms,
            aux_state,
        })
    }

    pub fn run_log(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&e.to_json_line()?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Trains `config.strategy` from `init` on both domains for `config.epochs`
/// epochs and selects the epoch with the best target dev F.
pub fn train_run(config: &TrainingConfig, init: &ModelParams, data: &PreparedData) -> Result<RunResult> {
    if config.strategy == Strategy::SeqFinetune {
        return Err(Error::InvalidArgument(
            "sequential fine-tuning runs through sequential_finetune".into(),
        ));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("a training run needs at least one epoch".into()));
    }
    let mut loader = PairedLoader::new(data.source_train.clone(), data.target_train.clone(), config.batch_size)?;
    let mut trainer = Trainer::new(config.clone(), init.clone(), loader.batches_per_epoch())?;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut checkpoints = Vec::with_capacity(config.epochs);
    let mut train_ms = 0.0;
    for _ in 0..config.epochs {
        let report = trainer.train_epoch(&mut loader)?;
        train_ms += report.wall_ms;
        checkpoints.push(Checkpoint {
            epoch: report.epoch,
            dev: evaluate(&trainer.params, Domain::Target, &data.target_dev)?,
            params: trainer.params.clone(),
        });
        epochs.push(report);
    }
    RunResult::from_checkpoints(config.clone(), epochs, checkpoints, train_ms)
}

/// Single-domain training with selection on that domain's dev set.
pub fn train_single(
    config: &TrainingConfig,
    init: &ModelParams,
    domain: Domain,
    train: &DomainBatch,
    dev: &DomainBatch,
) -> Result<RunResult> {
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("a training run needs at least one epoch".into()));
    }
    let mut loader = DomainLoader::new(train.clone())?;
    let steps = loader.batches_per_pass(config.batch_size);
    let mut trainer = Trainer::new(config.clone(), init.clone(), steps)?;
    let mut epochs = Vec::new();
    let mut checkpoints = Vec::new();
    let mut train_ms = 0.0;
    for _ in 0..config.epochs {
        let report = trainer.train_single_epoch(domain, &mut loader)?;
        train_ms += report.wall_ms;
        checkpoints.push(Checkpoint {
            epoch: report.epoch,
            dev: evaluate(&trainer.params, domain, dev)?,
            params: trainer.params.clone(),
        });
        epochs.push(report);
    }
    RunResult::from_checkpoints(config.clone(), epochs, checkpoints, train_ms)
}

/// Encoder of `trained`, every other group from `init`.
pub fn carry_encoder(trained: &ModelParams, init: &ModelParams) -> ModelParams {
    let mut out = init.clone();
    let enc: Vec<_> = trained
        .entries()
        .into_iter()
        .filter(|(_, g, _)| *g == ParamGroup::Encoder)
        .map(|(_, _, t)| t.clone())
        .collect();
    let slots = out.slots_mut().into_iter().filter(|(g, _)| *g == ParamGroup::Encoder);
    for ((_, slot), t) in slots.zip(enc) {
        *slot = t;
    }
    out
}

#[derive(Clone, Debug)]
pub struct SequentialResult {
    /// `None` when phase 1 ran for zero epochs.
    pub phase1: Option<RunResult>,
    pub phase2: RunResult,
    /// Parameters phase 2 started from.
    pub phase2_init: ModelParams,
}

/// Phase 1 trains on source only and selects on source dev; its encoder then
/// seeds phase 2, which trains on target only from freshly initialized heads
/// and selects on target dev.
pub fn sequential_finetune(
    phase1: &TrainingConfig,
    phase2: &TrainingConfig,
    init: &ModelParams,
    data: &PreparedData,
) -> Result<SequentialResult> {
    let first = if phase1.epochs == 0 {
        None
    } else {
        Some(train_single(phase1, init, Domain::Source, &data.source_train, &data.source_dev)?)
    };
    let phase2_init = match &first {
        Some(r) => carry_encoder(&r.selected, init),
        None => init.clone(),
    };
    let second = train_single(phase2, &phase2_init, Domain::Target, &data.target_train, &data.target_dev)?;
    Ok(SequentialResult {
        phase1: first,
        phase2: second,
        phase2_init,
    })
}

/// Target dev loss of `params`, used to compare starting points.
pub fn target_dev_loss(params: &ModelParams, data: &PreparedData) -> Result<f64> {
    eval_loss(params, Domain::Target, &data.target_dev)
}

/// Per-run record written to `reports.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub lr: f64,
    pub gamma: f64,
    pub status: RunStatus,
    pub dev: Prf,
    pub test: Prf,
    pub epoch: usize,
    pub wall_ms: f64,
    pub aux_state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

impl MetricsReport {
    pub fn from_run(strategy: Strategy, seed: u64, run: &RunResult, data: &PreparedData) -> Result<Self> {
        Ok(MetricsReport {
            strategy,
            seed,
            lr: run.config.lr,
            gamma: run.config.gamma,
            status: RunStatus::Ok,
            dev: run.dev,
            test: evaluate(&run.selected, Domain::Target, &data.target_test)?,
            epoch: run.selected_epoch,
            wall_ms: run.wall_ms,
            aux_state: run.aux_state,
            error: None,
        })
    }

    pub fn failed(strategy: Strategy, seed: u64, lr: f64, gamma: f64, err: &Error) -> Self {
        MetricsReport {
            strategy,
            seed,
            lr,
            gamma,
            status: RunStatus::Failed,
            dev: Prf::default(),
            test: Prf::default(),
            epoch: 0,
            wall_ms: 0.0,
            aux_state: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}
