//! Forward graph of the adversarial transfer architecture.

use serde::{Deserialize, Serialize};

use super::params::{Branch, Dense, Head, ModelParams, Params};
use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};

/// Source carries domain label 0, target domain label 1.
pub const SOURCE_DOMAIN_LABEL: usize = 0;
pub const TARGET_DOMAIN_LABEL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

/// Token sequences with binary labels for one domain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainBatch {
    pub tokens: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

impl DomainBatch {
    pub fn new(tokens: Vec<Vec<usize>>, labels: Vec<usize>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sequences but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(DomainBatch { tokens, labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn one_hot(&self) -> Result<Tensor> {
        if let Some(bad) = self.labels.iter().find(|&&y| y > 1) {
            return Err(Error::MalformedLabels(format!("label {bad} is not binary")));
        }
        Tensor::one_hot(&self.labels, 2)
    }
}

/// Gradient reversal weight as a function of training progress:
/// `λ(p) = 2 / (1 + exp(-k p)) - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrlSchedule {
    pub steepness: f64,
}

impl Default for GrlSchedule {
    fn default() -> Self {
        GrlSchedule { steepness: 10.0 }
    }
}

impl GrlSchedule {
    pub fn weight(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        2.0 / (1.0 + (-self.steepness * p).exp()) - 1.0
    }
}

/// Node handles for one forward pass.
///
/// `z_*` are encoder outputs; `z_*_task` is what the task branches consume
/// (equal to `z_*` unless a latent look-ahead shifted it). `u_*` are shared
/// features of `z_*` seen by the discriminator, `u_*_task` and `v_*` the shared
/// and domain-specific features concatenated into each classifier.
#[derive(Clone, Debug)]
pub struct ForwardActivations {
    pub z_s: NodeId,
    pub z_t: NodeId,
    pub z_s_task: NodeId,
    pub z_t_task: NodeId,
    pub u_s: Option<NodeId>,
    pub u_t: Option<NodeId>,
    pub v_s: NodeId,
    pub v_t: NodeId,
    pub u_s_task: NodeId,
    pub u_t_task: NodeId,
    pub logits_s: NodeId,
    pub logits_t: NodeId,
    pub logits_d: Option<NodeId>,
}

/// Scalar losses of one step: `joint = L_s + L_t - L_d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "L_s")]
    pub l_s: f64,
    #[serde(rename = "L_t")]
    pub l_t: f64,
    #[serde(rename = "L_d")]
    pub l_d: f64,
    pub joint: f64,
}

impl LossBreakdown {
    pub fn new(l_s: f64, l_t: f64, l_d: f64) -> Self {
        LossBreakdown {
            l_s,
            l_t,
            l_d,
            joint: joint_value(l_s, l_t, l_d),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_s.is_finite() && self.l_t.is_finite() && self.l_d.is_finite()
    }
}

pub fn joint_value(l_s: f64, l_t: f64, l_d: f64) -> f64 {
    l_s + l_t - l_d
}

/// The graph of one training step.
///
/// `objective` is the node to differentiate. Its value is `L_s + L_t + L_d`
/// because the discriminator reads the shared features through a gradient
/// reversal layer; the reported joint loss is `L_s + L_t - L_d`.
#[derive(Clone, Debug)]
pub struct StepForward {
    pub acts: ForwardActivations,
    pub l_s: NodeId,
    pub l_t: NodeId,
    pub l_d: Option<NodeId>,
    pub objective: NodeId,
}

impl StepForward {
    pub fn losses(&self, tape: &Tape) -> LossBreakdown {
        let l_d = self.l_d.map(|id| tape.value(id).item()).unwrap_or(0.0);
        LossBreakdown::new(
            tape.value(self.l_s).item(),
            tape.value(self.l_t).item(),
            l_d,
        )
    }
}

/// Encoder outputs and discriminator path, available to a latent hook before
/// the task branches are built.
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub z_s: NodeId,
    pub z_t: NodeId,
    pub u_s: Option<NodeId>,
    pub u_t: Option<NodeId>,
    pub logits_d: Option<NodeId>,
    pub l_d: Option<NodeId>,
}

pub fn dense_tanh(tape: &mut Tape, layer: &Dense<NodeId>, x: NodeId) -> Result<NodeId> {
    let h = tape.linear(x, layer.weight, layer.bias)?;
    tape.tanh(h)
}

pub fn head_logits(tape: &mut Tape, head: &Head<NodeId>, x: NodeId) -> Result<NodeId> {
    let h = tape.linear(x, head.hidden.weight, head.hidden.bias)?;
    let h = tape.relu(h)?;
    tape.linear(h, head.out.weight, head.out.bias)
}

/// Mean-pooled embeddings through the two-layer tanh encoder, shape `[B, D]`.
pub fn encode(tape: &mut Tape, p: &Params<NodeId>, tokens: &[Vec<usize>]) -> Result<NodeId> {
    if tokens.is_empty() {
        return Err(Error::Empty("encoder batch".into()));
    }
    let pooled = tape.embedding_mean(p.encoder.embedding, tokens.to_vec())?;
    let h = dense_tanh(tape, &p.encoder.hidden, pooled)?;
    dense_tanh(tape, &p.encoder.out, h)
}

/// Returns `(v, u, logits)` for one domain branch reading latent `z`.
pub fn branch_forward(
    tape: &mut Tape,
    shared: &Dense<NodeId>,
    branch: &Branch<NodeId>,
    z: NodeId,
) -> Result<(NodeId, NodeId, NodeId)> {
    let v = dense_tanh(tape, &branch.dense, z)?;
    let u = dense_tanh(tape, shared, z)?;
    let features = tape.concat(&[v, u], 1)?;
    let logits = head_logits(tape, &branch.classifier, features)?;
    Ok((v, u, logits))
}

/// Batch-mean cross-entropy of `softmax(logits)` against one-hot `labels`.
pub fn task_loss(tape: &mut Tape, logits: NodeId, labels: &Tensor) -> Result<NodeId> {
    let shape = tape.value(logits).shape().to_vec();
    if shape.len() != 2 || shape[1] != 2 {
        return Err(Error::ShapeMismatch {
            op: "task_loss",
            detail: format!("logits must be [B, 2], got {shape:?}"),
        });
    }
    validate_one_hot(labels)?;
    tape.softmax_cross_entropy(logits, labels.clone())
}

fn validate_one_hot(labels: &Tensor) -> Result<()> {
    if labels.rank() != 2 {
        return Err(Error::MalformedLabels(format!(
            "expected [B, C] one-hot rows, got shape {:?}",
            labels.shape()
        )));
    }
    for r in 0..labels.rows() {
        let row = labels.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::MalformedLabels(format!("row {r} is {row:?}")));
        }
    }
    Ok(())
}

/// `L_d = mean_i [-log p(0 | u_s,i) - log p(1 | u_t,i)]`.
///
/// Returns `(logits_d, L_d)` with `logits_d` of shape `[2B, 2]`, source rows first.
pub fn domain_loss(
    tape: &mut Tape,
    disc: &Head<NodeId>,
    u_s: NodeId,
    u_t: NodeId,
) -> Result<(NodeId, NodeId)> {
    let (bs, bt) = (tape.value(u_s).rows(), tape.value(u_t).rows());
    if bs != bt {
        return Err(Error::ShapeMismatch {
            op: "domain_loss",
            detail: format!("source batch {bs} vs target batch {bt}"),
        });
    }
    let stacked = tape.concat(&[u_s, u_t], 0)?;
    let logits = head_logits(tape, disc, stacked)?;
    let mut labels = vec![SOURCE_DOMAIN_LABEL; bs];
    labels.extend(std::iter::repeat_n(TARGET_DOMAIN_LABEL, bt));
    let ce = tape.softmax_cross_entropy(logits, Tensor::one_hot(&labels, 2)?)?;
    // mean over 2B rows -> mean over B of the two-term sum
    let l_d = tape.scale(ce, 2.0)?;
    Ok((logits, l_d))
}

/// Builds one training-step graph.
///
/// Order of construction: encoders, then (if `adversarial`) the plain
/// discriminator path on `z`, then `latent_hook`, which may return shifted
/// latents for the task branches, then the task branches, then the reversed
/// discriminator path feeding the objective.
pub fn forward_step<H>(
    tape: &mut Tape,
    p: &Params<NodeId>,
    source: &DomainBatch,
    target: &DomainBatch,
    lambda: f64,
    adversarial: bool,
    latent_hook: H,
) -> Result<StepForward>
where
    H: FnOnce(&mut Tape, &EncodedPair) -> Result<Option<(NodeId, NodeId)>>,
{
    let ys = source.one_hot()?;
    let yt = target.one_hot()?;
    let z_s = encode(tape, p, &source.tokens)?;
    let z_t = encode(tape, p, &target.tokens)?;

    let mut enc = EncodedPair {
        z_s,
        z_t,
        u_s: None,
        u_t: None,
        logits_d: None,
        l_d: None,
    };
    if adversarial {
        let u_s = dense_tanh(tape, &p.shared, z_s)?;
        let u_t = dense_tanh(tape, &p.shared, z_t)?;
        let (logits_d, l_d) = domain_loss(tape, &p.discriminator, u_s, u_t)?;
        enc.u_s = Some(u_s);
        enc.u_t = Some(u_t);
        enc.logits_d = Some(logits_d);
        enc.l_d = Some(l_d);
    }

    let (z_s_task, z_t_task) = latent_hook(tape, &enc)?.unwrap_or((z_s, z_t));

    let (v_s, u_s_task, logits_s) = branch_forward(tape, &p.shared, &p.source, z_s_task)?;
    let (v_t, u_t_task, logits_t) = branch_forward(tape, &p.shared, &p.target, z_t_task)?;
    let l_s = task_loss(tape, logits_s, &ys)?;
    let l_t = task_loss(tape, logits_t, &yt)?;
    let mut objective = tape.add(l_s, l_t)?;

    if let (Some(u_s), Some(u_t)) = (enc.u_s, enc.u_t) {
        let r_s = tape.grl(u_s, lambda)?;
        let r_t = tape.grl(u_t, lambda)?;
        let (_, l_d_reversed) = domain_loss(tape, &p.discriminator, r_s, r_t)?;
        objective = tape.add(objective, l_d_reversed)?;
    }

    Ok(StepForward {
        acts: ForwardActivations {
            z_s,
            z_t,
            z_s_task,
            z_t_task,
            u_s: enc.u_s,
            u_t: enc.u_t,
            v_s,
            v_t,
            u_s_task,
            u_t_task,
            logits_s,
            logits_t,
            logits_d: enc.logits_d,
        },
        l_s,
        l_t,
        l_d: enc.l_d,
        objective,
    })
}

/// Plain ANT joint loss `L_s(z_s) + L_t(z_t) - L_d(z_s, z_t)` with the `-L_d`
/// term realized through gradient reversal of weight `lambda`.
pub fn ant_joint_loss(
    tape: &mut Tape,
    p: &Params<NodeId>,
    source: &DomainBatch,
    target: &DomainBatch,
    lambda: f64,
) -> Result<StepForward> {
    forward_step(tape, p, source, target, lambda, true, |_, _| Ok(None))
}

/// Single-domain graph: encoder, that domain's branch and its task loss.
/// Returns `(logits, loss)`.
pub fn single_task_forward(
    tape: &mut Tape,
    p: &Params<NodeId>,
    domain: Domain,
    batch: &DomainBatch,
) -> Result<(NodeId, NodeId)> {
    let y = batch.one_hot()?;
    let z = encode(tape, p, &batch.tokens)?;
    let branch = match domain {
        Domain::Source => &p.source,
        Domain::Target => &p.target,
    };
    let (_, _, logits) = branch_forward(tape, &p.shared, branch, z)?;
    let loss = task_loss(tape, logits, &y)?;
    Ok((logits, loss))
}

/// Predicted class per sequence from one domain's classifier.
pub fn predict(params: &ModelParams, domain: Domain, tokens: &[Vec<usize>]) -> Result<Vec<usize>> {
    let logits = logits(params, domain, tokens)?;
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            usize::from(row[1] > row[0])
        })
        .collect())
}

pub fn logits(params: &ModelParams, domain: Domain, tokens: &[Vec<usize>]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape)?;
    let z = encode(&mut tape, &p, tokens)?;
    let branch = match domain {
        Domain::Source => &p.source,
        Domain::Target => &p.target,
    };
    let (_, _, logits) = branch_forward(&mut tape, &p.shared, branch, z)?;
    Ok(tape.value(logits).clone())
}

/// Mean task loss of one domain's classifier on `batch`.
pub fn eval_loss(params: &ModelParams, domain: Domain, batch: &DomainBatch) -> Result<f64> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape)?;
    let (_, loss) = single_task_forward(&mut tape, &p, domain, batch)?;
    Ok(tape.value(loss).item())
}
