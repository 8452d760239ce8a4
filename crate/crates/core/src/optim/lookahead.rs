//! Look-ahead step rules on latent features and the per-strategy gradient
//! computation of one training step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::maml::maml_lookahead_step;
use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};
use crate::model::{
    branch_forward, forward_step, task_loss, Domain, DomainBatch, LossBreakdown, ModelParams,
    ParamGroup,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "ANT")]
    Ant,
    #[serde(rename = "LOANT")]
    Loant,
    #[serde(rename = "MTL")]
    Mtl,
    #[serde(rename = "MTL+LO")]
    MtlLo,
    #[serde(rename = "ANT+MAML")]
    AntMaml,
    #[serde(rename = "SEQ-FINETUNE")]
    SeqFinetune,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Ant,
        Strategy::Loant,
        Strategy::Mtl,
        Strategy::MtlLo,
        Strategy::AntMaml,
        Strategy::SeqFinetune,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ant => "ANT",
            Strategy::Loant => "LOANT",
            Strategy::Mtl => "MTL",
            Strategy::MtlLo => "MTL+LO",
            Strategy::AntMaml => "ANT+MAML",
            Strategy::SeqFinetune => "SEQ-FINETUNE",
        }
    }

    /// Strategy whose grid-searched learning rate this one reuses, if any.
    pub fn lr_base(self) -> Option<Strategy> {
        match self {
            Strategy::Loant | Strategy::AntMaml => Some(Strategy::Ant),
            Strategy::MtlLo => Some(Strategy::Mtl),
            _ => None,
        }
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, Strategy::Ant | Strategy::Loant | Strategy::AntMaml)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

/// Latent features and their look-ahead copies, as recorded on a tape.
#[derive(Clone, Debug)]
pub struct LatentPair {
    pub z_s: NodeId,
    pub z_t: NodeId,
    pub z_s_prime: NodeId,
    pub z_t_prime: NodeId,
    /// Gradient factors used for the shift, held as constants.
    pub delta_s: Tensor,
    pub delta_t: Tensor,
    pub gamma: f64,
}

impl LatentPair {
    /// Scalars held by the look-ahead: both shift tensors.
    pub fn state_scalars(&self) -> usize {
        self.delta_s.numel() + self.delta_t.numel()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "look-ahead step size must be >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// Records `z + step * grad` with `grad` entering as a constant, so no
/// gradient flows through the look-ahead direction itself.
fn shifted(tape: &mut Tape, z: NodeId, grad: &Tensor, step: f64) -> Result<NodeId> {
    let shift = tape.constant(grad.scaled(step))?;
    tape.add(z, shift)
}

/// Ascent on the domain loss in latent space:
/// `z' = z + γ ∂L_d/∂z` for both domains.
pub fn latent_step(
    tape: &mut Tape,
    z_s: NodeId,
    z_t: NodeId,
    l_d: NodeId,
    gamma: f64,
) -> Result<LatentPair> {
    check_gamma(gamma)?;
    let grads = tape.backward(l_d)?;
    let delta_s = grads.wrt(tape, z_s);
    let delta_t = grads.wrt(tape, z_t);
    let z_s_prime = shifted(tape, z_s, &delta_s, gamma)?;
    let z_t_prime = shifted(tape, z_t, &delta_t, gamma)?;
    Ok(LatentPair {
        z_s,
        z_t,
        z_s_prime,
        z_t_prime,
        delta_s,
        delta_t,
        gamma,
    })
}

/// Descent on each domain's own task loss in latent space:
/// `z_s' = z_s - γ ∂L_s/∂z_s`, `z_t' = z_t - γ ∂L_t/∂z_t`.
pub fn mtl_lo_step(
    tape: &mut Tape,
    z_s: NodeId,
    z_t: NodeId,
    l_s: NodeId,
    l_t: NodeId,
    gamma: f64,
) -> Result<LatentPair> {
    check_gamma(gamma)?;
    let delta_s = tape.backward(l_s)?.wrt(tape, z_s);
    let delta_t = tape.backward(l_t)?.wrt(tape, z_t);
    let z_s_prime = shifted(tape, z_s, &delta_s, -gamma)?;
    let z_t_prime = shifted(tape, z_t, &delta_t, -gamma)?;
    Ok(LatentPair {
        z_s,
        z_t,
        z_s_prime,
        z_t_prime,
        delta_s,
        delta_t,
        gamma,
    })
}

/// Gradients and losses of one training step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub grads: ModelParams,
    pub losses: LossBreakdown,
    /// Transient look-ahead scalars held during the step.
    pub aux_state: usize,
}

/// Gradient map of one step of `strategy` at `params`.
///
/// `gamma` is the look-ahead step and `lambda` the gradient reversal weight;
/// each is ignored by strategies that do not use it.
pub fn strategy_step(
    strategy: Strategy,
    params: &ModelParams,
    source: &DomainBatch,
    target: &DomainBatch,
    gamma: f64,
    lambda: f64,
) -> Result<StepOutcome> {
    match strategy {
        Strategy::Ant | Strategy::Mtl => {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape)?;
            let fwd = forward_step(
                &mut tape,
                &p,
                source,
                target,
                lambda,
                strategy.is_adversarial(),
                |_, _| Ok(None),
            )?;
            let grads = tape.backward(fwd.objective)?;
            Ok(StepOutcome {
                grads: p.gradients(&tape, &grads),
                losses: fwd.losses(&tape),
                aux_state: 0,
            })
        }
        Strategy::Loant => {
            check_gamma(gamma)?;
            let mut tape = Tape::new();
            let p = params.bind(&mut tape)?;
            let mut aux = 0;
            let fwd = forward_step(&mut tape, &p, source, target, lambda, true, |tape, enc| {
                let l_d = enc.l_d.expect("adversarial graph has a domain loss");
                let pair = latent_step(tape, enc.z_s, enc.z_t, l_d, gamma)?;
                aux = pair.state_scalars();
                Ok(Some((pair.z_s_prime, pair.z_t_prime)))
            })?;
            let grads = tape.backward(fwd.objective)?;
            Ok(StepOutcome {
                grads: p.gradients(&tape, &grads),
                losses: fwd.losses(&tape),
                aux_state: aux,
            })
        }
        Strategy::MtlLo => {
            check_gamma(gamma)?;
            let ys = source.one_hot()?;
            let yt = target.one_hot()?;
            let mut tape = Tape::new();
            let p = params.bind(&mut tape)?;
            let mut aux = 0;
            let fwd = forward_step(&mut tape, &p, source, target, lambda, false, |tape, enc| {
                let (_, _, logits_s) = branch_forward(tape, &p.shared, &p.source, enc.z_s)?;
                let (_, _, logits_t) = branch_forward(tape, &p.shared, &p.target, enc.z_t)?;
                let l_s = task_loss(tape, logits_s, &ys)?;
                let l_t = task_loss(tape, logits_t, &yt)?;
                let pair = mtl_lo_step(tape, enc.z_s, enc.z_t, l_s, l_t, gamma)?;
                aux = pair.state_scalars();
                Ok(Some((pair.z_s_prime, pair.z_t_prime)))
            })?;
            let grads = tape.backward(fwd.objective)?;
            Ok(StepOutcome {
                grads: p.gradients(&tape, &grads),
                losses: fwd.losses(&tape),
                aux_state: aux,
            })
        }
        Strategy::AntMaml => {
            let look = maml_lookahead_step(params, source, target, gamma)?;
            let mut outcome = strategy_step(Strategy::Ant, &look.params, source, target, 0.0, lambda)?;
            outcome.aux_state = look.state_scalars;
            Ok(outcome)
        }
        Strategy::SeqFinetune => Err(Error::InvalidArgument(
            "sequential fine-tuning trains one domain at a time; use single_task_step".into(),
        )),
    }
}

/// Gradient of one domain's task loss alone.
pub fn single_task_step(params: &ModelParams, domain: Domain, batch: &DomainBatch) -> Result<StepOutcome> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape)?;
    let (_, loss) = crate::model::single_task_forward(&mut tape, &p, domain, batch)?;
    let grads = tape.backward(loss)?;
    let l = tape.value(loss).item();
    let losses = match domain {
        Domain::Source => LossBreakdown::new(l, 0.0, 0.0),
        Domain::Target => LossBreakdown::new(0.0, l, 0.0),
    };
    Ok(StepOutcome {
        grads: p.gradients(&tape, &grads),
        losses,
        aux_state: 0,
    })
}

/// `L^LO = L_s(z_s') + L_t(z_t') - L_d(z_s, z_t)` at `params`.
pub fn lo_joint_loss(
    params: &ModelParams,
    source: &DomainBatch,
    target: &DomainBatch,
    gamma: f64,
    lambda: f64,
) -> Result<LossBreakdown> {
    Ok(strategy_step(Strategy::Loant, params, source, target, gamma, lambda)?.losses)
}

/// First-order LOANT gradients for every parameter group.
pub fn loant_grads(
    params: &ModelParams,
    source: &DomainBatch,
    target: &DomainBatch,
    gamma: f64,
    lambda: f64,
) -> Result<ModelParams> {
    Ok(strategy_step(Strategy::Loant, params, source, target, gamma, lambda)?.grads)
}

/// Transient look-ahead state in scalars for one step, by strategy.
pub fn lookahead_state_scalars(strategy: Strategy, params: &ModelParams, batch_size: usize) -> usize {
    let latent = 2 * batch_size * params.config().latent_dim;
    match strategy {
        Strategy::Loant | Strategy::MtlLo => latent,
        Strategy::AntMaml => params.group_size(ParamGroup::Encoder),
        _ => 0,
    }
}
