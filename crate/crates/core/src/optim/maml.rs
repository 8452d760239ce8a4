//! Parameter-space look-ahead: the ANT+MAML baseline and generic
//! first-order MAML.

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};
use crate::model::{dense_tanh, domain_loss, encode, DomainBatch, ModelParams, ParamGroup};

/// Parameters with the encoder moved by one look-ahead step.
#[derive(Clone, Debug)]
pub struct MamlLookahead {
    pub params: ModelParams,
    /// Scalars held for the shifted encoder copy, `|w_b|`.
    pub state_scalars: usize,
}

/// `w_b' = w_b + γ ∂L_d/∂w_b`; every other group is copied unchanged.
pub fn maml_lookahead_step(
    params: &ModelParams,
    source: &DomainBatch,
    target: &DomainBatch,
    gamma: f64,
) -> Result<MamlLookahead> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "look-ahead step size must be >= 0, got {gamma}"
        )));
    }
    let mut tape = Tape::new();
    let p = params.bind(&mut tape)?;
    let z_s = encode(&mut tape, &p, &source.tokens)?;
    let z_t = encode(&mut tape, &p, &target.tokens)?;
    let u_s = dense_tanh(&mut tape, &p.shared, z_s)?;
    let u_t = dense_tanh(&mut tape, &p.shared, z_t)?;
    let (_, l_d) = domain_loss(&mut tape, &p.discriminator, u_s, u_t)?;
    let grads = p.gradients(&tape, &tape.backward(l_d)?);

    let mut shifted = params.clone();
    let enc_grads: Vec<Tensor> = grads
        .entries()
        .into_iter()
        .filter(|(_, g, _)| *g == ParamGroup::Encoder)
        .map(|(_, _, t)| t.clone())
        .collect();
    let slots = shifted
        .slots_mut()
        .into_iter()
        .filter(|(g, _)| *g == ParamGroup::Encoder);
    for ((_, slot), g) in slots.zip(&enc_grads) {
        slot.add_scaled(g, gamma)?;
    }
    Ok(MamlLookahead {
        state_scalars: params.group_size(ParamGroup::Encoder),
        params: shifted,
    })
}

/// A task loss as a graph builder over the parameter leaf.
pub type TaskLoss<'a> = dyn Fn(&mut Tape, NodeId) -> Result<NodeId> + 'a;

/// One first-order MAML meta-update over `K = tasks.len()` tasks:
/// per task `w_k = w - γ ∇L_k(w)`, then `w ← w - η (1/K) Σ_k ∇L_k(w_k)`.
pub fn maml_meta_update(w: &Tensor, tasks: &[&TaskLoss<'_>], gamma: f64, eta: f64) -> Result<Tensor> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("MAML needs at least one task".into()));
    }
    let grad_at = |task: &TaskLoss<'_>, point: &Tensor| -> Result<Tensor> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(point.clone())?;
        let loss = task(&mut tape, leaf)?;
        Ok(tape.backward(loss)?.wrt(&tape, leaf))
    };
    let mut meta = Tensor::zeros_like(w);
    for task in tasks {
        let mut adapted = w.clone();
        adapted.add_scaled(&grad_at(*task, w)?, -gamma)?;
        meta.add_scaled(&grad_at(*task, &adapted)?, 1.0)?;
    }
    let mut out = w.clone();
    out.add_scaled(&meta, -eta / tasks.len() as f64)?;
    Ok(out)
}
