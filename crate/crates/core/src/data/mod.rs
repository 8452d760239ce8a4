//! Synthetic two-domain corpora, preprocessing and the unigram KL diagnostic.

mod dataset;
mod generate;
mod kl;

pub use dataset::{
    dedup_and_trim, dedup_pair, majority_class_size, stats, upsample, DatasetStats, DomainDataset,
    Example, Split, SplitStats, DEFAULT_MAX_LEN,
};
pub use generate::{generate_domain_pair, DomainSpec, GeneratorConfig, TokenLayout};
pub use kl::{kl_over_overlap, unigram_kl, UnigramModel};

/// Paper-style preprocessing of a generated or loaded pair: trim and dedup
/// within and across the two corpora, then upsample the target train split so
/// both of its classes match its larger class.
pub fn preprocess_pair(
    source: &DomainDataset,
    target: &DomainDataset,
    max_len: usize,
    seed: u64,
) -> crate::Result<(DomainDataset, DomainDataset)> {
    let (s, t) = dedup_pair(source, target, max_len);
    let size = majority_class_size(&t);
    let t = upsample(&t, size, seed)?;
    Ok((s, t))
}
