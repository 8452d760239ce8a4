use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::DomainDataset;
use crate::error::{Error, Result};

/// Maximum-likelihood unigram distribution over the tokens of a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnigramModel {
    counts: BTreeMap<usize, u64>,
    total: u64,
}

impl UnigramModel {
    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for seq in seqs {
            for &t in seq {
                *counts.entry(t).or_insert(0) += 1;
                total += 1;
            }
        }
        UnigramModel { counts, total }
    }

    /// All splits of `dataset`.
    pub fn from_dataset(dataset: &DomainDataset) -> Self {
        UnigramModel::from_sequences(dataset.examples.iter().map(|e| e.tokens.as_slice()))
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, token: usize) -> u64 {
        self.counts.get(&token).copied().unwrap_or(0)
    }

    pub fn prob(&self, token: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(token) as f64 / self.total as f64
        }
    }

    pub fn probs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts.keys().map(|&t| (t, self.prob(t)))
    }
}

/// `Σ_{g ∈ V∩} P_t(g) ln(P_t(g) / P_s(g))` with both distributions
/// renormalized over the shared support `V∩`.
pub fn kl_over_overlap(target: &UnigramModel, source: &UnigramModel) -> Result<f64> {
    let overlap: Vec<(u64, u64)> = target
        .counts
        .iter()
        .filter_map(|(t, &ct)| source.counts.get(t).map(|&cs| (ct, cs)))
        .collect();
    if overlap.is_empty() {
        return Err(Error::Empty("the two corpora share no tokens".into()));
    }
    let zt: u64 = overlap.iter().map(|p| p.0).sum();
    let zs: u64 = overlap.iter().map(|p| p.1).sum();
    let kl = overlap
        .iter()
        .map(|&(ct, cs)| {
            let pt = ct as f64 / zt as f64;
            let ps = cs as f64 / zs as f64;
            pt * (pt / ps).ln()
        })
        .sum::<f64>();
    // rounding can leave a tiny negative value for equal distributions
    Ok(kl.max(0.0))
}

/// Divergence of the target corpus from the source corpus.
pub fn unigram_kl(source: &DomainDataset, target: &DomainDataset) -> Result<f64> {
    kl_over_overlap(&UnigramModel::from_dataset(target), &UnigramModel::from_dataset(source))
}
