//! Multi-seed strategy comparison with the base-then-inherit learning-rate
//! protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mean, paired_sign_test, std_dev, SignTest};
use super::runner::{sequential_finetune, train_run, MetricsReport, PreparedData, RunResult};
use crate::data::{generate_domain_pair, preprocess_pair, DomainDataset, GeneratorConfig, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};
use crate::model::{GrlSchedule, ModelConfig, ModelParams, ParamGroup};
use crate::optim::{AdamConfig, Strategy, TrainingConfig, DEFAULT_LR_GRID};

/// Where the source/target pair comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Generate(GeneratorConfig),
    Files { source: PathBuf, target: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub lr_grid: Vec<f64>,
    /// Only target dev F is supported.
    pub selection_metric: String,
    pub gamma: f64,
    /// Per-strategy look-ahead step sizes replacing `gamma`.
    pub gamma_overrides: BTreeMap<Strategy, f64>,
    pub epochs: usize,
    /// Epochs of the source phase of sequential fine-tuning.
    pub source_epochs: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub grl: GrlSchedule,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            data: DataSource::Generate(GeneratorConfig::default()),
            strategies: vec![Strategy::Ant, Strategy::Loant, Strategy::Mtl, Strategy::MtlLo],
            seeds: (0..10).collect(),
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            selection_metric: "dev_f".into(),
            gamma: 1e-2,
            gamma_overrides: BTreeMap::new(),
            epochs: 5,
            source_epochs: 5,
            batch_size: 128,
            max_len: DEFAULT_MAX_LEN,
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            grl: GrlSchedule::default(),
            out_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidArgument("spec lists no strategies".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("spec lists no seeds".into()));
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::InvalidArgument("learning-rate grid must be nonempty and positive".into()));
        }
        if self.selection_metric != "dev_f" {
            return Err(Error::InvalidArgument(format!(
                "unsupported selection metric {:?}",
                self.selection_metric
            )));
        }
        for &s in self.gamma_overrides.keys().chain(&self.strategies) {
            self.training(s, self.lr_grid[0], 0).validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn gamma_for(&self, strategy: Strategy) -> f64 {
        self.gamma_overrides.get(&strategy).copied().unwrap_or(self.gamma)
    }

    pub fn training(&self, strategy: Strategy, lr: f64, seed: u64) -> TrainingConfig {
        TrainingConfig {
            strategy,
            lr,
            gamma: self.gamma_for(strategy),
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: self.adam,
            grl: self.grl,
            seed,
        }
    }

    /// Raw pair as generated or loaded, before preprocessing.
    pub fn load_data(&self) -> Result<(DomainDataset, DomainDataset)> {
        match &self.data {
            DataSource::Generate(cfg) => generate_domain_pair(cfg),
            DataSource::Files { source, target } => {
                Ok((DomainDataset::load(source)?, DomainDataset::load(target)?))
            }
        }
    }

    fn data_seed(&self) -> u64 {
        match &self.data {
            DataSource::Generate(cfg) => cfg.seed,
            DataSource::Files { .. } => 0,
        }
    }

    pub fn prepare(&self) -> Result<PreparedData> {
        let (s, t) = self.load_data()?;
        if s.vocab_size > self.model.vocab_size || t.vocab_size > self.model.vocab_size {
            return Err(Error::InvalidArgument(format!(
                "data vocabulary exceeds the model's {}",
                self.model.vocab_size
            )));
        }
        let (s, t) = preprocess_pair(&s, &t, self.max_len, self.data_seed())?;
        PreparedData::new(&s, &t)
    }
}

/// Auxiliary state relative to ANT: every strategy holds the `2BD` latent
/// activations; parameter-space look-ahead adds its own copy on top.
pub fn relative_state(strategy: Strategy, aux_state: usize, batch_size: usize, latent_dim: usize) -> f64 {
    let latent = (2 * batch_size * latent_dim) as f64;
    let param_state = if strategy == Strategy::AntMaml { aux_state as f64 } else { 0.0 };
    (latent + param_state) / latent
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(rename = "devF")]
    pub dev_f: f64,
    #[serde(rename = "testF")]
    pub test_f: f64,
    #[serde(rename = "testR")]
    pub test_r: f64,
    #[serde(rename = "testP")]
    pub test_p: f64,
    pub epoch: usize,
    pub wall_ms: f64,
    pub aux_state: usize,
    pub rel_time: f64,
    pub rel_state: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: Strategy,
    pub runs: usize,
    pub failed: usize,
    pub mean_test_f: f64,
    pub std_test_f: f64,
    pub mean_dev_f: f64,
    pub mean_rel_time: f64,
    pub mean_rel_state: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub strategy: Strategy,
    pub baseline: Strategy,
    pub mean_diff: f64,
    pub sign_test: SignTest,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// One per (strategy, seed), in spec order.
    pub reports: Vec<MetricsReport>,
    /// Every grid run, including those not selected.
    pub grid: Vec<MetricsReport>,
    pub summary: Vec<SummaryRow>,
    pub aggregates: Vec<StrategyAggregate>,
    pub comparisons: Vec<Comparison>,
    pub run_logs: BTreeMap<String, String>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> Vec<&MetricsReport> {
        self.reports.iter().filter(|r| !r.is_ok()).collect()
    }

    pub fn aggregate(&self, strategy: Strategy) -> Option<&StrategyAggregate> {
        self.aggregates.iter().find(|a| a.strategy == strategy)
    }

    pub fn comparison(&self, strategy: Strategy, baseline: Strategy) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.strategy == strategy && c.baseline == baseline)
    }
}

struct Job {
    strategy: Strategy,
    seed: u64,
    lr: f64,
}

struct JobResult {
    report: MetricsReport,
    log: Option<String>,
}

fn run_job(spec: &ExperimentSpec, job: &Job, init: &ModelParams, data: &PreparedData) -> JobResult {
    let cfg = spec.training(job.strategy, job.lr, job.seed);
    let outcome = if job.strategy == Strategy::SeqFinetune {
        let phase1 = TrainingConfig {
            epochs: spec.source_epochs,
            ..cfg.clone()
        };
        sequential_finetune(&phase1, &cfg, init, data).map(|r| r.phase2)
    } else {
        train_run(&cfg, init, data)
    };
    let finish = |run: RunResult| -> crate::Result<JobResult> {
        Ok(JobResult {
            report: MetricsReport::from_run(job.strategy, job.seed, &run, data)?,
            log: Some(run.run_log()?),
        })
    };
    match outcome.and_then(finish) {
        Ok(r) => r,
        Err(e) => JobResult {
            report: MetricsReport::failed(job.strategy, job.seed, job.lr, cfg.gamma, &e),
            log: None,
        },
    }
}

fn log_key(r: &MetricsReport) -> String {
    format!("{}_seed{}_lr{}", r.strategy.name().replace('+', "_"), r.seed, r.lr)
}

/// Index of the grid run with the best dev F among successful runs, first
/// one on ties.
fn best_of(runs: &[MetricsReport]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.is_ok() && best.is_none_or(|b| r.dev.f > runs[b].dev.f) {
            best = Some(i);
        }
    }
    best
}

/// Runs every (strategy, seed) of `spec`. Base strategies are grid-searched
/// per seed; look-ahead variants reuse their base's selected rate. Every
/// strategy of one seed starts from the same initial parameters.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let data = spec.prepare()?;
    let inits: BTreeMap<u64, ModelParams> = spec
        .seeds
        .iter()
        .map(|&s| Ok((s, ModelParams::init(&spec.model, s)?)))
        .collect::<Result<_>>()?;

    let mut gridded: BTreeSet<Strategy> = BTreeSet::new();
    for &s in &spec.strategies {
        gridded.insert(s.lr_base().unwrap_or(s));
    }
    let grid_jobs: Vec<Job> = gridded
        .iter()
        .flat_map(|&strategy| {
            spec.seeds.iter().flat_map(move |&seed| {
                spec.lr_grid.iter().map(move |&lr| Job { strategy, seed, lr })
            })
        })
        .collect();
    let grid_results: Vec<JobResult> = grid_jobs
        .par_iter()
        .map(|j| run_job(spec, j, &inits[&j.seed], &data))
        .collect();

    let mut logs = BTreeMap::new();
    let mut chosen: BTreeMap<(Strategy, u64), MetricsReport> = BTreeMap::new();
    let mut grid = Vec::with_capacity(grid_results.len());
    for (chunk_jobs, chunk) in grid_jobs
        .chunks(spec.lr_grid.len())
        .zip(grid_results.chunks(spec.lr_grid.len()))
    {
        let reports: Vec<MetricsReport> = chunk.iter().map(|r| r.report.clone()).collect();
        let key = (chunk_jobs[0].strategy, chunk_jobs[0].seed);
        let pick = best_of(&reports).unwrap_or(0);
        chosen.insert(key, reports[pick].clone());
        for r in chunk {
            if let Some(log) = &r.log {
                logs.insert(log_key(&r.report), log.clone());
            }
        }
        grid.extend(reports);
    }

    let inherit_jobs: Vec<Job> = spec
        .strategies
        .iter()
        .filter_map(|&s| s.lr_base().map(|base| (s, base)))
        .flat_map(|(strategy, base)| {
            let chosen = &chosen;
            spec.seeds.iter().map(move |&seed| Job {
                strategy,
                seed,
                lr: chosen[&(base, seed)].lr,
            })
        })
        .collect();
    let inherit_results: Vec<JobResult> = inherit_jobs
        .par_iter()
        .map(|j| run_job(spec, j, &inits[&j.seed], &data))
        .collect();
    for r in inherit_results {
        if let Some(log) = &r.log {
            logs.insert(log_key(&r.report), log.clone());
        }
        chosen.insert((r.report.strategy, r.report.seed), r.report);
    }

    let reports: Vec<MetricsReport> = spec
        .strategies
        .iter()
        .flat_map(|&s| spec.seeds.iter().map(move |&seed| (s, seed)))
        .map(|k| chosen[&k].clone())
        .collect();
    let summary = summarize(&reports, spec);
    let aggregates = aggregate(&reports, &summary, spec);
    let comparisons = compare(&reports, spec)?;
    Ok(ExperimentOutcome {
        reports,
        grid,
        summary,
        aggregates,
        comparisons,
        run_logs: logs,
    })
}

fn summarize(reports: &[MetricsReport], spec: &ExperimentSpec) -> Vec<SummaryRow> {
    let ant_time: BTreeMap<u64, f64> = reports
        .iter()
        .filter(|r| r.strategy == Strategy::Ant && r.is_ok())
        .map(|r| (r.seed, r.wall_ms))
        .collect();
    reports
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| SummaryRow {
            strategy: r.strategy,
            seed: r.seed,
            dev_f: r.dev.f,
            test_f: r.test.f,
            test_r: r.test.recall,
            test_p: r.test.precision,
            epoch: r.epoch,
            wall_ms: r.wall_ms,
            aux_state: r.aux_state,
            rel_time: ant_time.get(&r.seed).map_or(f64::NAN, |t| r.wall_ms / t),
            rel_state: relative_state(r.strategy, r.aux_state, spec.batch_size, spec.model.latent_dim),
        })
        .collect()
}

fn aggregate(reports: &[MetricsReport], summary: &[SummaryRow], spec: &ExperimentSpec) -> Vec<StrategyAggregate> {
    spec.strategies
        .iter()
        .map(|&strategy| {
            let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.strategy == strategy).collect();
            let col = |f: fn(&SummaryRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let test_f = col(|r| r.test_f);
            StrategyAggregate {
                strategy,
                runs: rows.len(),
                failed: reports.iter().filter(|r| r.strategy == strategy && !r.is_ok()).count(),
                mean_test_f: mean(&test_f),
                std_test_f: std_dev(&test_f),
                mean_dev_f: mean(&col(|r| r.dev_f)),
                mean_rel_time: mean(&col(|r| r.rel_time)),
                mean_rel_state: mean(&col(|r| r.rel_state)),
            }
        })
        .collect()
}

/// Each look-ahead variant against its base, and every other strategy
/// against ANT, paired by seed on test F.
fn compare(reports: &[MetricsReport], spec: &ExperimentSpec) -> Result<Vec<Comparison>> {
    let test_f = |s: Strategy| -> BTreeMap<u64, f64> {
        reports
            .iter()
            .filter(|r| r.strategy == s && r.is_ok())
            .map(|r| (r.seed, r.test.f))
            .collect()
    };
    let mut pairs: Vec<(Strategy, Strategy)> = Vec::new();
    for &s in &spec.strategies {
        if let Some(base) = s.lr_base() {
            pairs.push((s, base));
        }
        if s != Strategy::Ant && !pairs.contains(&(s, Strategy::Ant)) {
            pairs.push((s, Strategy::Ant));
        }
    }
    let mut out = Vec::new();
    for (s, base) in pairs {
        if !spec.strategies.contains(&base) {
            continue;
        }
        let (a, b) = (test_f(s), test_f(base));
        let seeds: Vec<u64> = a.keys().filter(|k| b.contains_key(k)).copied().collect();
        if seeds.is_empty() {
            continue;
        }
        let xs: Vec<f64> = seeds.iter().map(|k| a[k]).collect();
        let ys: Vec<f64> = seeds.iter().map(|k| b[k]).collect();
        out.push(Comparison {
            strategy: s,
            baseline: base,
            mean_diff: mean(&xs) - mean(&ys),
            sign_test: paired_sign_test(&xs, &ys)?,
        });
    }
    Ok(out)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "strategy", "seed", "devF", "testF", "testR", "testP", "epoch", "wall_ms", "aux_state",
            "rel_time", "rel_state",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `reports.jsonl`, `summary.csv`, `aggregates.json` and one run log
/// per training run under `runs/`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("runs"))?;
    let mut lines = String::new();
    for r in &outcome.reports {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    fs::write(dir.join("reports.jsonl"), lines)?;
    fs::write(dir.join("summary.csv"), summary_csv(&outcome.summary)?)?;
    let agg = serde_json::json!({
        "aggregates": outcome.aggregates,
        "comparisons": outcome.comparisons,
    });
    fs::write(dir.join("aggregates.json"), serde_json::to_string_pretty(&agg)?)?;
    for (key, log) in &outcome.run_logs {
        fs::write(dir.join("runs").join(format!("{key}.jsonl")), log)?;
    }
    Ok(())
}

/// Size of the encoder group, the state parameter-space look-ahead copies.
pub fn encoder_scalars(model: &ModelConfig) -> Result<usize> {
    Ok(ModelParams::init(model, 0)?.group_size(ParamGroup::Encoder))
}
