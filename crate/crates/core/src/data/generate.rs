//! Synthetic two-domain corpora.
//!
//! Token ids are laid out as `[signal+ | signal- | cue A | cue B | filler]`.
//! Signal tokens predict the label the same way in both domains. Cue tokens
//! predict it in opposite ways: source positives favour cue A, target
//! positives favour cue B. Filler is Zipf-distributed and shared.

use std::collections::HashSet;
use std::ops::Range;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{DomainDataset, Example, Split};
use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Train examples before the dev split is carved out.
    pub train: usize,
    pub test: usize,
    pub positive_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub vocab_size: usize,
    pub signal_tokens_per_class: usize,
    /// Total cue tokens, split evenly between cue A and cue B.
    pub cue_tokens: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Signal positions every sequence is guaranteed to contain.
    pub min_signal: usize,
    /// Per-position probability of a signal token beyond the guaranteed ones.
    pub signal_share: f64,
    /// Probability that a signal token comes from the example's own class.
    pub signal_purity: f64,
    /// Per-position probability of a cue token.
    pub cue_share: f64,
    /// Probability that a cue token comes from the half tied to the label.
    pub cue_purity: f64,
    pub zipf_exponent: f64,
    pub source: DomainSpec,
    pub target: DomainSpec,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            vocab_size: 4000,
            signal_tokens_per_class: 40,
            cue_tokens: 24,
            min_len: 8,
            max_len: 24,
            min_signal: 2,
            signal_share: 0.05,
            signal_purity: 0.85,
            cue_share: 0.25,
            cue_purity: 0.9,
            zipf_exponent: 1.6,
            source: DomainSpec {
                train: 3000,
                test: 600,
                positive_rate: 0.5,
            },
            target: DomainSpec {
                train: 400,
                test: 600,
                positive_rate: 0.18,
            },
            dev_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Disjoint id ranges of each token role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenLayout {
    pub signal_pos: Range<usize>,
    pub signal_neg: Range<usize>,
    pub cue_a: Range<usize>,
    pub cue_b: Range<usize>,
    pub filler: Range<usize>,
}

impl TokenLayout {
    pub fn signal(&self) -> Range<usize> {
        self.signal_pos.start..self.signal_neg.end
    }

    pub fn cues(&self) -> Range<usize> {
        self.cue_a.start..self.cue_b.end
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InfeasibleConfig(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn layout(&self) -> TokenLayout {
        let s = self.signal_tokens_per_class;
        let half = self.cue_tokens / 2;
        let cue_start = 2 * s;
        TokenLayout {
            signal_pos: 0..s,
            signal_neg: s..2 * s,
            cue_a: cue_start..cue_start + half,
            cue_b: cue_start + half..cue_start + 2 * half,
            filler: cue_start + 2 * half..self.vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.layout();
        if self.signal_tokens_per_class == 0 {
            return Err(Error::InfeasibleConfig("signal token sets must be nonempty".into()));
        }
        if self.cue_tokens % 2 != 0 {
            return Err(Error::InfeasibleConfig("cue tokens must split evenly in two".into()));
        }
        if layout.filler.start >= self.vocab_size {
            return Err(Error::InfeasibleConfig(format!(
                "vocabulary of {} leaves no filler tokens",
                self.vocab_size
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len || self.min_signal > self.min_len {
            return Err(Error::InfeasibleConfig(format!(
                "need 0 < min_signal <= min_len <= max_len, got {} / {} / {}",
                self.min_signal, self.min_len, self.max_len
            )));
        }
        for (name, p) in [
            ("signal_share", self.signal_share),
            ("signal_purity", self.signal_purity),
            ("cue_share", self.cue_share),
            ("cue_purity", self.cue_purity),
            ("dev_fraction", self.dev_fraction),
        ] {
            check_prob(name, p)?;
        }
        if self.signal_share + self.cue_share > 1.0 {
            return Err(Error::InfeasibleConfig("signal_share + cue_share exceeds 1".into()));
        }
        if !(self.zipf_exponent >= 0.0) {
            return Err(Error::InfeasibleConfig("zipf exponent must be >= 0".into()));
        }
        for (name, d) in [("source", &self.source), ("target", &self.target)] {
            check_prob(&format!("{name} positive_rate"), d.positive_rate)?;
            if d.train == 0 || d.test == 0 {
                return Err(Error::InfeasibleConfig(format!("{name} split sizes must be >= 1")));
            }
            for n in [d.train, d.test] {
                let pos = positives(n, d.positive_rate);
                if d.positive_rate > 0.0 && pos == 0 || d.positive_rate < 1.0 && pos == n {
                    return Err(Error::InfeasibleConfig(format!(
                        "{name} positive rate {} is unreachable with {n} examples",
                        d.positive_rate
                    )));
                }
            }
        }
        Ok(())
    }
}

fn positives(n: usize, rate: f64) -> usize {
    (rate * n as f64).round() as usize
}

struct Sampler<'a> {
    cfg: &'a GeneratorConfig,
    layout: TokenLayout,
    filler: WeightedIndex<f64>,
    /// Positives draw cue A in the source and cue B in the target.
    positive_cue_is_a: bool,
}

impl Sampler<'_> {
    fn pick(rng: &mut ChaCha8Rng, r: &Range<usize>) -> usize {
        rng.random_range(r.clone())
    }

    fn signal(&self, rng: &mut ChaCha8Rng, label: usize) -> usize {
        let own = rng.random_bool(self.cfg.signal_purity);
        if (label == 1) == own {
            Self::pick(rng, &self.layout.signal_pos)
        } else {
            Self::pick(rng, &self.layout.signal_neg)
        }
    }

    fn cue(&self, rng: &mut ChaCha8Rng, label: usize) -> usize {
        let tied = rng.random_bool(self.cfg.cue_purity);
        let positive_half = if tied { label == 1 } else { label == 0 };
        if positive_half == self.positive_cue_is_a {
            Self::pick(rng, &self.layout.cue_a)
        } else {
            Self::pick(rng, &self.layout.cue_b)
        }
    }

    fn sequence(&self, rng: &mut ChaCha8Rng, label: usize) -> Vec<usize> {
        let len = rng.random_range(self.cfg.min_len..=self.cfg.max_len);
        let forced: HashSet<usize> = index::sample(rng, len, self.cfg.min_signal).into_iter().collect();
        let has_cues = !self.layout.cue_a.is_empty();
        (0..len)
            .map(|i| {
                if forced.contains(&i) {
                    return self.signal(rng, label);
                }
                let u: f64 = rng.random();
                if u < self.cfg.signal_share {
                    self.signal(rng, label)
                } else if has_cues && u < self.cfg.signal_share + self.cfg.cue_share {
                    self.cue(rng, label)
                } else {
                    self.layout.filler.start + self.filler.sample(rng)
                }
            })
            .collect()
    }
}

fn generate_domain(
    cfg: &GeneratorConfig,
    name: &str,
    spec: &DomainSpec,
    positive_cue_is_a: bool,
    stream: u64,
    seen: &mut HashSet<Vec<usize>>,
) -> Result<DomainDataset> {
    let layout = cfg.layout();
    let weights: Vec<f64> = (1..=layout.filler.len())
        .map(|r| (r as f64).powf(-cfg.zipf_exponent))
        .collect();
    let filler = WeightedIndex::new(&weights)
        .map_err(|e| Error::InfeasibleConfig(format!("filler distribution: {e}")))?;
    let sampler = Sampler {
        cfg,
        layout,
        filler,
        positive_cue_is_a,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let mut examples = Vec::with_capacity(spec.train + spec.test);
    for (split, n) in [(Split::Train, spec.train), (Split::Test, spec.test)] {
        let pos = positives(n, spec.positive_rate);
        let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i < pos)).collect();
        labels.shuffle(&mut rng);
        for label in labels {
            let mut tokens = sampler.sequence(&mut rng, label);
            let mut redraws = 0;
            while !seen.insert(tokens.clone()) {
                redraws += 1;
                if redraws > MAX_REDRAWS {
                    return Err(Error::InfeasibleConfig(
                        "could not draw enough distinct sequences".into(),
                    ));
                }
                tokens = sampler.sequence(&mut rng, label);
            }
            examples.push(Example { tokens, label, split });
        }
    }

    let n_dev = (cfg.dev_fraction * spec.train as f64).round() as usize;
    for i in index::sample(&mut rng, spec.train, n_dev) {
        examples[i].split = Split::Dev;
    }
    Ok(DomainDataset::new(name, cfg.vocab_size, cfg.seed, examples))
}

/// Deterministic source and target corpora with no sequence repeated within
/// or across them.
pub fn generate_domain_pair(cfg: &GeneratorConfig) -> Result<(DomainDataset, DomainDataset)> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    let source = generate_domain(cfg, "source", &cfg.source, true, 0, &mut seen)?;
    let target = generate_domain(cfg, "target", &cfg.target, false, 1, &mut seen)?;
    Ok((source, target))
}
