use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loant::data::{generate_domain_pair, preprocess_pair, stats, unigram_kl, DomainDataset, GeneratorConfig, DEFAULT_MAX_LEN};
use loant::harness::{
    run_experiment, train_run, with_thread_pool, write_outputs, ExperimentSpec, MetricsReport, PreparedData,
};
use loant::model::{checkpoint, ModelConfig, ModelParams};
use loant::optim::{Strategy, TrainingConfig};
use loant::quadratic::{render_csv, render_svg, trajectory, Method, Quadratic, CONVERGENCE_TOL};
use loant::{Error, Result};

#[derive(Parser)]
#[command(name = "loant", version, about = "Latent-optimized adversarial transfer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic source/target pair as JSON-lines files.
    Gen {
        #[arg(long)]
        out_dir: PathBuf,
        /// Generator config as JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cue_share: Option<f64>,
    },
    /// Unigram KL divergence of the target corpus from the source corpus.
    Kl {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Per-split counts, positive rates and lengths of a dataset file.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Descent on the reference 2D quadratic.
    Quad {
        #[arg(long, default_value_t = 0.025)]
        eta: f64,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
        #[arg(long, default_value = "gd")]
        method: Method,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value = "0,-0.15", value_parser = parse_point, allow_hyphen_values = true)]
        start: [f64; 2],
        #[arg(long)]
        out_svg: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Train one strategy on a dataset pair.
    Train {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value = "LOANT")]
        strategy: Strategy,
        #[arg(long, default_value_t = 4e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1e-2)]
        gamma: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 128)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        run_log: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Multi-seed strategy comparison driven by a JSON spec.
    Compare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => Ok([
            x.trim().parse().map_err(|e| format!("{x}: {e}"))?,
            y.trim().parse().map_err(|e| format!("{y}: {e}"))?,
        ]),
        _ => Err(format!("expected x,y, got {s:?}")),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen {
            out_dir,
            config,
            seed,
            cue_share,
        } => {
            let mut cfg: GeneratorConfig = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => GeneratorConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(c) = cue_share {
                cfg.cue_share = c;
            }
            let (s, t) = generate_domain_pair(&cfg)?;
            fs::create_dir_all(&out_dir)?;
            s.save(&out_dir.join("source.jsonl"))?;
            t.save(&out_dir.join("target.jsonl"))?;
            println!("wrote {} source and {} target examples to {}", s.len(), t.len(), out_dir.display());
        }
        Command::Kl { source, target } => {
            let kl = unigram_kl(&DomainDataset::load(&source)?, &DomainDataset::load(&target)?)?;
            println!("{kl}");
        }
        Command::Stats { data } => {
            println!("{}", serde_json::to_string_pretty(&stats(&DomainDataset::load(&data)?))?);
        }
        Command::Quad {
            eta,
            gamma,
            method,
            steps,
            start,
            out_svg,
            out_csv,
        } => {
            let q = Quadratic::reference();
            let t = trajectory(&q, method, start, eta, gamma, steps)?;
            let traj = std::slice::from_ref(&t);
            if let Some(p) = out_svg {
                fs::write(p, render_svg(&q, traj, None)?)?;
            }
            if let Some(p) = out_csv {
                fs::write(p, render_csv(traj)?)?;
            }
            let last = t.last();
            println!(
                "method={} eta={eta} gamma={gamma} steps={} final=({:.6}, {:.6}) f={:.6e} converged_at={}{}",
                method,
                t.len() - 1,
                last[0],
                last[1],
                t.f_values[t.len() - 1],
                t.steps_to_converge(CONVERGENCE_TOL)
                    .map_or("never".to_string(), |s| s.to_string()),
                if t.truncated { " (diverged)" } else { "" }
            );
        }
        Command::Train {
            source,
            target,
            strategy,
            lr,
            gamma,
            epochs,
            batch_size,
            seed,
            run_log,
            checkpoint: ckpt,
        } => {
            if strategy == Strategy::SeqFinetune {
                return Err(Error::InvalidArgument(
                    "use `compare` with SEQ-FINETUNE in the spec for sequential fine-tuning".into(),
                ));
            }
            let (s, t) = (DomainDataset::load(&source)?, DomainDataset::load(&target)?);
            let (s, t) = preprocess_pair(&s, &t, DEFAULT_MAX_LEN, seed)?;
            let data = PreparedData::new(&s, &t)?;
            let model = ModelConfig {
                vocab_size: s.vocab_size.max(t.vocab_size),
                ..ModelConfig::default()
            };
            let cfg = TrainingConfig {
                strategy,
                lr,
                gamma,
                epochs,
                batch_size,
                seed,
                ..TrainingConfig::default()
            };
            let run = train_run(&cfg, &ModelParams::init(&model, seed)?, &data)?;
            if let Some(p) = run_log {
                fs::write(p, run.run_log()?)?;
            }
            if let Some(p) = ckpt {
                checkpoint::save(&run.selected, &p)?;
            }
            let report = MetricsReport::from_run(strategy, seed, &run, &data)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Compare { spec, out } => {
            let spec = ExperimentSpec::from_json(&fs::read_to_string(spec)?)?;
            let outcome = with_thread_pool(|| run_experiment(&spec))??;
            write_outputs(&outcome, &out)?;
            for a in &outcome.aggregates {
                println!(
                    "{:<13} F={:.4}±{:.4} runs={} failed={} rel_time={:.2}x rel_state={:.2}x",
                    a.strategy.name(),
                    a.mean_test_f,
                    a.std_test_f,
                    a.runs,
                    a.failed,
                    a.mean_rel_time,
                    a.mean_rel_state
                );
            }
            for c in &outcome.comparisons {
                println!(
                    "{} vs {}: mean diff {:+.4}, sign test {}/{}/{} p={:.4}",
                    c.strategy, c.baseline, c.mean_diff, c.sign_test.wins, c.sign_test.losses, c.sign_test.ties, c.sign_test.p_value
                );
            }
            let failures = outcome.failures();
            for f in &failures {
                eprintln!(
                    "failed: {} seed {}: {}",
                    f.strategy,
                    f.seed,
                    f.error.as_deref().unwrap_or("unknown error")
                );
            }
            return Ok(failures.is_empty());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
