//! Trainable weights, grouped the way the training rules address them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};

/// Parameter groups: `w_b`, `w_sh`, `φ_s = [w_s, θ_s]`, `φ_t = [w_t, θ_t]`, `θ_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Encoder,
    Shared,
    Source,
    Target,
    Discriminator,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Encoder,
        ParamGroup::Shared,
        ParamGroup::Source,
        ParamGroup::Target,
        ParamGroup::Discriminator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Encoder => "encoder",
            ParamGroup::Shared => "shared",
            ParamGroup::Source => "source",
            ParamGroup::Target => "target",
            ParamGroup::Discriminator => "discriminator",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub latent_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 4000,
            embed_dim: 16,
            latent_dim: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: T,
    pub bias: T,
}

/// Two linear layers with a ReLU in between, ending in two logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Head<T> {
    pub hidden: Dense<T>,
    pub out: Dense<T>,
}

/// Domain-specific dense layer plus that domain's classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T> {
    pub dense: Dense<T>,
    pub classifier: Head<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub embedding: T,
    pub hidden: Dense<T>,
    pub out: Dense<T>,
}

/// All trainable tensors of the model, generic over what is stored per slot
/// (`Tensor` for values and gradients, `NodeId` once bound to a tape).
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub encoder: EncoderParams<T>,
    pub shared: Dense<T>,
    pub source: Branch<T>,
    pub target: Branch<T>,
    pub discriminator: Head<T>,
}

pub type ModelParams = Params<Tensor>;

impl<T> Dense<T> {
    fn map<U>(&self, f: &mut impl FnMut(&str, &T) -> U, prefix: &str) -> Dense<U> {
        Dense {
            weight: f(&format!("{prefix}.weight"), &self.weight),
            bias: f(&format!("{prefix}.bias"), &self.bias),
        }
    }
}

impl<T> Head<T> {
    fn map<U>(&self, f: &mut impl FnMut(&str, &T) -> U, prefix: &str) -> Head<U> {
        Head {
            hidden: self.hidden.map(f, &format!("{prefix}.hidden")),
            out: self.out.map(f, &format!("{prefix}.out")),
        }
    }
}

impl<T> Branch<T> {
    fn map<U>(&self, f: &mut impl FnMut(&str, &T) -> U, prefix: &str) -> Branch<U> {
        Branch {
            dense: self.dense.map(f, &format!("{prefix}.dense")),
            classifier: self.classifier.map(f, &format!("{prefix}.classifier")),
        }
    }
}

impl<T> Params<T> {
    /// Structure-preserving map; `f` sees the dotted slot name.
    pub fn map_named<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> Params<U> {
        let f = &mut f;
        Params {
            encoder: EncoderParams {
                embedding: f("encoder.embedding", &self.encoder.embedding),
                hidden: self.encoder.hidden.map(f, "encoder.hidden"),
                out: self.encoder.out.map(f, "encoder.out"),
            },
            shared: self.shared.map(f, "shared"),
            source: self.source.map(f, "source"),
            target: self.target.map(f, "target"),
            discriminator: self.discriminator.map(f, "discriminator"),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Params<U> {
        self.map_named(|_, v| f(v))
    }

    /// Fallible [`Params::map_named`]; stops reporting after the first error.
    pub fn try_map_named<U: Clone, E>(
        &self,
        mut f: impl FnMut(&str, &T) -> std::result::Result<U, E>,
    ) -> std::result::Result<Params<U>, E> {
        let mut err = None;
        let out = self.map_named(|name, v| {
            if err.is_some() {
                return None;
            }
            match f(name, v) {
                Ok(u) => Some(u),
                Err(e) => {
                    err = Some(e);
                    None
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(out.map(|o| o.clone().expect("no error recorded")))
    }

    /// Slots in canonical order with their dotted names and groups.
    pub fn entries(&self) -> Vec<(String, ParamGroup, &T)> {
        let mut out = Vec::new();
        let e = &self.encoder;
        push_entries(
            &mut out,
            "encoder",
            ParamGroup::Encoder,
            &[
                ("embedding", &e.embedding),
                ("hidden.weight", &e.hidden.weight),
                ("hidden.bias", &e.hidden.bias),
                ("out.weight", &e.out.weight),
                ("out.bias", &e.out.bias),
            ],
        );
        push_entries(
            &mut out,
            "shared",
            ParamGroup::Shared,
            &[("weight", &self.shared.weight), ("bias", &self.shared.bias)],
        );
        for (prefix, group, b) in [
            ("source", ParamGroup::Source, &self.source),
            ("target", ParamGroup::Target, &self.target),
        ] {
            push_entries(
            &mut out,
                prefix,
                group,
                &[
                    ("dense.weight", &b.dense.weight),
                    ("dense.bias", &b.dense.bias),
                    ("classifier.hidden.weight", &b.classifier.hidden.weight),
                    ("classifier.hidden.bias", &b.classifier.hidden.bias),
                    ("classifier.out.weight", &b.classifier.out.weight),
                    ("classifier.out.bias", &b.classifier.out.bias),
                ],
            );
        }
        let d = &self.discriminator;
        push_entries(
            &mut out,
            "discriminator",
            ParamGroup::Discriminator,
            &[
                ("hidden.weight", &d.hidden.weight),
                ("hidden.bias", &d.hidden.bias),
                ("out.weight", &d.out.weight),
                ("out.bias", &d.out.bias),
            ],
        );
        out
    }

    /// Mutable slots in the same canonical order as [`Params::entries`].
    pub fn slots_mut(&mut self) -> Vec<(ParamGroup, &mut T)> {
        let e = &mut self.encoder;
        let mut out: Vec<(ParamGroup, &mut T)> = vec![
            (ParamGroup::Encoder, &mut e.embedding),
            (ParamGroup::Encoder, &mut e.hidden.weight),
            (ParamGroup::Encoder, &mut e.hidden.bias),
            (ParamGroup::Encoder, &mut e.out.weight),
            (ParamGroup::Encoder, &mut e.out.bias),
            (ParamGroup::Shared, &mut self.shared.weight),
            (ParamGroup::Shared, &mut self.shared.bias),
        ];
        for (group, b) in [
            (ParamGroup::Source, &mut self.source),
            (ParamGroup::Target, &mut self.target),
        ] {
            out.push((group, &mut b.dense.weight));
            out.push((group, &mut b.dense.bias));
            out.push((group, &mut b.classifier.hidden.weight));
            out.push((group, &mut b.classifier.hidden.bias));
            out.push((group, &mut b.classifier.out.weight));
            out.push((group, &mut b.classifier.out.bias));
        }
        let d = &mut self.discriminator;
        out.push((ParamGroup::Discriminator, &mut d.hidden.weight));
        out.push((ParamGroup::Discriminator, &mut d.hidden.bias));
        out.push((ParamGroup::Discriminator, &mut d.out.weight));
        out.push((ParamGroup::Discriminator, &mut d.out.bias));
        out
    }
}

fn push_entries<'a, T>(
    out: &mut Vec<(String, ParamGroup, &'a T)>,
    prefix: &str,
    group: ParamGroup,
    items: &[(&str, &'a T)],
) {
    for (name, v) in items {
        out.push((format!("{prefix}.{name}"), group, *v));
    }
}

impl ModelParams {
    /// Random initialization. Each component draws from its own stream derived
    /// from `seed`, so two model variants built from the same seed agree
    /// bit-for-bit on every component they share.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        if config.vocab_size == 0 || config.embed_dim == 0 || config.latent_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: {config:?}"
            )));
        }
        let (v, e, d) = (config.vocab_size, config.embed_dim, config.latent_dim);
        let stream = |component: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(component);
            rng
        };
        let mut rng = stream(0);
        let embedding = uniform(&mut rng, &[v, e], 0.5);
        let encoder = EncoderParams {
            embedding,
            hidden: dense(&mut rng, e, d),
            out: dense(&mut rng, d, d),
        };
        let shared = dense(&mut stream(1), d, d);
        let source = branch(&mut stream(2), d);
        let target = branch(&mut stream(3), d);
        let discriminator = head(&mut stream(4), d, d);
        Ok(Params {
            encoder,
            shared,
            source,
            target,
            discriminator,
        })
    }

    pub fn zeros_like(&self) -> Self {
        self.map(Tensor::zeros_like)
    }

    pub fn config(&self) -> ModelConfig {
        let emb = self.encoder.embedding.shape();
        ModelConfig {
            vocab_size: emb[0],
            embed_dim: emb[1],
            latent_dim: self.shared.bias.numel(),
        }
    }

    /// Registers every tensor as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<Params<NodeId>> {
        self.try_map_named(|_, t| tape.leaf(t.clone()))
    }

    /// Number of scalars in a parameter group.
    pub fn group_size(&self, group: ParamGroup) -> usize {
        self.entries()
            .into_iter()
            .filter(|(_, g, _)| *g == group)
            .map(|(_, _, t)| t.numel())
            .sum()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries().iter().map(|(_, _, t)| t.numel()).sum()
    }

    /// Euclidean norm over one parameter group.
    pub fn group_norm(&self, group: ParamGroup) -> f64 {
        self.entries()
            .into_iter()
            .filter(|(_, g, _)| *g == group)
            .map(|(_, _, t)| t.data().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|(_, _, t)| t.is_finite())
    }

    /// Largest absolute elementwise difference within one group.
    pub fn group_max_abs_diff(&self, other: &ModelParams, group: ParamGroup) -> f64 {
        self.entries()
            .into_iter()
            .zip(other.entries())
            .filter(|((_, g, _), _)| *g == group)
            .map(|((_, _, a), (_, _, b))| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        ParamGroup::ALL
            .iter()
            .map(|&g| self.group_max_abs_diff(other, g))
            .fold(0.0, f64::max)
    }

    /// `self += alpha * other`, slot by slot.
    pub fn add_scaled(&mut self, other: &ModelParams, alpha: f64) -> Result<()> {
        let others: Vec<&Tensor> = other.entries().into_iter().map(|(_, _, t)| t).collect();
        for ((_, slot), o) in self.slots_mut().into_iter().zip(others) {
            slot.add_scaled(o, alpha)?;
        }
        Ok(())
    }
}

impl Params<NodeId> {
    /// Reads the gradient of every bound slot, zeros where none flowed.
    pub fn gradients(&self, tape: &Tape, grads: &crate::autodiff::Gradients) -> ModelParams {
        self.map(|&id| grads.wrt(tape, id))
    }
}

fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

fn dense(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Dense<Tensor> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Dense {
        weight: uniform(rng, &[fan_in, fan_out], bound),
        bias: Tensor::zeros(&[fan_out]),
    }
}

fn head(rng: &mut impl Rng, input: usize, hidden: usize) -> Head<Tensor> {
    Head {
        hidden: dense(rng, input, hidden),
        out: dense(rng, hidden, 2),
    }
}

fn branch(rng: &mut impl Rng, d: usize) -> Branch<Tensor> {
    Branch {
        dense: dense(rng, d, d),
        classifier: head(rng, 2 * d, d),
    }
}
