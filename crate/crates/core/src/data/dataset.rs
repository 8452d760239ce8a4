use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DomainBatch;

/// Default truncation length for token sequences.
pub const DEFAULT_MAX_LEN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown split {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    domain: String,
    vocab_size: usize,
    seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    pub domain: String,
    pub vocab_size: usize,
    pub seed: u64,
    pub examples: Vec<Example>,
}

impl DomainDataset {
    pub fn new(domain: impl Into<String>, vocab_size: usize, seed: u64, examples: Vec<Example>) -> Self {
        DomainDataset {
            domain: domain.into(),
            vocab_size,
            seed,
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Fraction of positive labels in `split`, or over all examples for `None`.
    pub fn positive_rate(&self, split: Option<Split>) -> f64 {
        let (mut n, mut pos) = (0usize, 0usize);
        for e in self.examples.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
            n += 1;
            pos += e.label;
        }
        if n == 0 {
            0.0
        } else {
            pos as f64 / n as f64
        }
    }

    pub fn batch(&self, split: Split) -> DomainBatch {
        let (tokens, labels) = self.split(split).map(|e| (e.tokens.clone(), e.label)).unzip();
        DomainBatch { tokens, labels }
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Header {
            domain: self.domain.clone(),
            vocab_size: self.vocab_size,
            seed: self.seed,
        })?;
        out.push('\n');
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(self.to_jsonl()?.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true)
        });
        let header: Header = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?)?,
            None => return Err(Error::Format("dataset file is empty".into())),
        };
        let mut examples = Vec::new();
        for (i, line) in lines {
            let e: Example = serde_json::from_str(&line?)
                .map_err(|err| Error::Format(format!("line {}: {err}", i + 1)))?;
            if e.label > 1 {
                return Err(Error::MalformedLabels(format!("line {}: label {}", i + 1, e.label)));
            }
            if let Some(&id) = e.tokens.iter().find(|&&t| t >= header.vocab_size) {
                return Err(Error::OutOfVocabulary {
                    id,
                    vocab: header.vocab_size,
                });
            }
            examples.push(e);
        }
        Ok(DomainDataset::new(header.domain, header.vocab_size, header.seed, examples))
    }

    pub fn load(path: &Path) -> Result<Self> {
        DomainDataset::from_jsonl(BufReader::new(fs::File::open(path)?))
    }
}

/// Truncates every sequence to `max_len`, then drops repeats of an earlier
/// sequence. Idempotent.
pub fn dedup_and_trim(dataset: &DomainDataset, max_len: usize) -> DomainDataset {
    let mut seen = HashSet::new();
    dedup_with(dataset, max_len, &mut seen)
}

/// As [`dedup_and_trim`] on both datasets, additionally removing from
/// `target` any sequence that also occurs in `source`.
pub fn dedup_pair(source: &DomainDataset, target: &DomainDataset, max_len: usize) -> (DomainDataset, DomainDataset) {
    let mut seen = HashSet::new();
    let s = dedup_with(source, max_len, &mut seen);
    let t = dedup_with(target, max_len, &mut seen);
    (s, t)
}

fn dedup_with(dataset: &DomainDataset, max_len: usize, seen: &mut HashSet<Vec<usize>>) -> DomainDataset {
    let examples = dataset
        .examples
        .iter()
        .filter_map(|e| {
            let tokens: Vec<usize> = e.tokens.iter().take(max_len).copied().collect();
            seen.insert(tokens.clone()).then(|| Example {
                tokens,
                label: e.label,
                split: e.split,
            })
        })
        .collect();
    DomainDataset {
        examples,
        ..dataset.clone()
    }
}

/// Resamples each class of the train split with replacement up to `to_size`
/// examples: all originals are kept and `to_size - n_c` draws are added.
/// Train examples come out shuffled, followed by the untouched other splits.
pub fn upsample(dataset: &DomainDataset, to_size: usize, seed: u64) -> Result<DomainDataset> {
    let mut classes: [Vec<&Example>; 2] = [Vec::new(), Vec::new()];
    for e in dataset.split(Split::Train) {
        if e.label > 1 {
            return Err(Error::MalformedLabels(format!("label {} is not binary", e.label)));
        }
        classes[e.label].push(e);
    }
    for (label, members) in classes.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Empty(format!("class {label} of the train split")));
        }
        if members.len() > to_size {
            return Err(Error::InvalidArgument(format!(
                "class {label} has {} examples, more than the target size {to_size}",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: Vec<Example> = Vec::with_capacity(2 * to_size);
    for members in &classes {
        train.extend(members.iter().map(|e| (*e).clone()));
        for _ in members.len()..to_size {
            train.push(members[rng.random_range(0..members.len())].clone());
        }
    }
    train.shuffle(&mut rng);
    train.extend(dataset.examples.iter().filter(|e| e.split != Split::Train).cloned());
    Ok(DomainDataset {
        examples: train,
        ..dataset.clone()
    })
}

/// Size of the larger class in the train split.
pub fn majority_class_size(dataset: &DomainDataset) -> usize {
    let pos = dataset.split(Split::Train).filter(|e| e.label == 1).count();
    pos.max(dataset.count(Split::Train) - pos)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub examples: usize,
    pub positives: usize,
    pub positive_rate: f64,
    pub mean_len: f64,
    pub max_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub domain: String,
    pub vocab_size: usize,
    pub distinct_tokens: usize,
    pub splits: Vec<SplitStats>,
}

pub fn stats(dataset: &DomainDataset) -> DatasetStats {
    let splits = Split::ALL
        .iter()
        .map(|&split| {
            let items: Vec<&Example> = dataset.split(split).collect();
            let n = items.len();
            let positives = items.iter().filter(|e| e.label == 1).count();
            let total_len: usize = items.iter().map(|e| e.tokens.len()).sum();
            let ratio = |a: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
            SplitStats {
                split,
                examples: n,
                positives,
                positive_rate: ratio(positives),
                mean_len: ratio(total_len),
                max_len: items.iter().map(|e| e.tokens.len()).max().unwrap_or(0),
            }
        })
        .collect();
    let distinct: HashSet<usize> = dataset.examples.iter().flat_map(|e| e.tokens.iter().copied()).collect();
    DatasetStats {
        domain: dataset.domain.clone(),
        vocab_size: dataset.vocab_size,
        distinct_tokens: distinct.len(),
        splits,
    }
}
