use super::metrics::Prf;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Parameters at the end of an epoch with their dev-set score.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// 1-indexed; 0 is the untrained model.
    pub epoch: usize,
    pub params: ModelParams,
    pub dev: Prf,
}

/// Index of the first maximum of `dev_f`.
pub fn select_index(dev_f: &[f64]) -> Result<usize> {
    if dev_f.is_empty() {
        return Err(Error::Empty("no checkpoints to select from".into()));
    }
    let mut best = 0;
    for (i, &f) in dev_f.iter().enumerate() {
        if f > dev_f[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Checkpoint with the highest dev F; ties go to the earliest epoch.
pub fn select_model(checkpoints: &[Checkpoint]) -> Result<&Checkpoint> {
    let scores: Vec<f64> = checkpoints.iter().map(|c| c.dev.f).collect();
    Ok(&checkpoints[select_index(&scores)?])
}
