#![allow(dead_code)]

use loant::autodiff::{NodeId, Tape, Tensor};
use loant::model::{DomainBatch, ModelConfig, ModelParams};
use loant::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 12,
        embed_dim: 3,
        latent_dim: 4,
    }
}

pub fn small_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 60,
        embed_dim: 6,
        latent_dim: 8,
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, vocab: usize) -> DomainBatch {
    let tokens = (0..n)
        .map(|_| {
            let len = rng.random_range(1..=5);
            (0..len).map(|_| rng.random_range(0..vocab)).collect()
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    // both classes present
    if n >= 2 {
        labels[0] = 0;
        labels[1] = 1;
    }
    DomainBatch::new(tokens, labels).unwrap()
}

/// Model parameters with every slot drawn uniformly from ±`scale`, so biases
/// and output layers are nonzero.
pub fn random_params(config: &ModelConfig, seed: u64, scale: f64) -> ModelParams {
    let mut r = rng(seed);
    ModelParams::init(config, seed)
        .unwrap()
        .map(|t| random_tensor(&mut r, t.shape(), scale))
}

/// `Σ y ⊙ w` for a fixed weight tensor, a scalar with a nontrivial gradient.
pub fn weighted_sum(tape: &mut Tape, y: NodeId, w: &Tensor) -> Result<NodeId> {
    let c = tape.constant(w.clone())?;
    let p = tape.mul(y, c)?;
    tape.sum(p)
}

pub type Builder = Box<dyn Fn(&mut Tape, NodeId) -> Result<NodeId>>;

/// One scalar-valued probe graph per differentiable op, together with an
/// input sampler producing points away from kinks and singularities.
pub struct OpCase {
    pub name: &'static str,
    pub sample: fn(&mut ChaCha8Rng) -> Tensor,
    pub build: fn(&mut ChaCha8Rng) -> Builder,
}

fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "add",
            sample: |r| random_tensor(r, &[3, 4], 1.0),
            build: |r| {
                let other = random_tensor(r, &[3, 4], 1.0);
                let w = random_tensor(r, &[3, 4], 1.0);
                Box::new(move |t, x| {
                    let o = t.leaf(other.clone())?;
                    let y = t.add(x, o)?;
                    let y = t.mul(y, x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "add_row_broadcast",
            sample: |r| random_tensor(r, &[4], 1.0),
            build: |r| {
                let m = random_tensor(r, &[3, 4], 1.0);
                let w = random_tensor(r, &[3, 4], 1.0);
                Box::new(move |t, x| {
                    let m = t.constant(m.clone())?;
                    let y = t.add(m, x)?;
                    let y = t.tanh(y)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "sub",
            sample: |r| random_tensor(r, &[2, 3], 1.0),
            build: |r| {
                let other = random_tensor(r, &[2, 3], 1.0);
                let w = random_tensor(r, &[2, 3], 1.0);
                Box::new(move |t, x| {
                    let o = t.constant(other.clone())?;
                    let a = t.sub(o, x)?;
                    let y = t.mul(a, a)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "mul",
            sample: |r| random_tensor(r, &[2, 3], 1.0),
            build: |r| {
                let w = random_tensor(r, &[2, 3], 1.0);
                Box::new(move |t, x| {
                    let y = t.mul(x, x)?;
                    let y = t.mul(y, x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "scale_negate",
            sample: |r| random_tensor(r, &[5], 1.0),
            build: |r| {
                let w = random_tensor(r, &[5], 1.0);
                let alpha = r.random_range(-3.0..3.0);
                Box::new(move |t, x| {
                    let y = t.scale(x, alpha)?;
                    let y = t.neg(y)?;
                    let y = t.mul(y, x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "matmul",
            sample: |r| random_tensor(r, &[3, 4], 1.0),
            build: |r| {
                let b = random_tensor(r, &[4, 2], 1.0);
                let a = random_tensor(r, &[2, 3], 1.0);
                let w = random_tensor(r, &[2, 2], 1.0);
                Box::new(move |t, x| {
                    let b = t.leaf(b.clone())?;
                    let a = t.constant(a.clone())?;
                    let y = t.matmul(x, b)?;
                    let y = t.matmul(a, y)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "concat",
            sample: |r| random_tensor(r, &[2, 3], 1.0),
            build: |r| {
                let o = random_tensor(r, &[2, 2], 1.0);
                let w0 = random_tensor(r, &[4, 3], 1.0);
                let w1 = random_tensor(r, &[2, 5], 1.0);
                Box::new(move |t, x| {
                    let sq = t.mul(x, x)?;
                    let rows = t.concat(&[x, sq], 0)?;
                    let o = t.constant(o.clone())?;
                    let cols = t.concat(&[o, x], 1)?;
                    let a = weighted_sum(t, rows, &w0)?;
                    let b = weighted_sum(t, cols, &w1)?;
                    let b = t.tanh(b)?;
                    t.add(a, b)
                })
            },
        },
        OpCase {
            name: "tanh",
            sample: |r| random_tensor(r, &[6], 2.0),
            build: |r| {
                let w = random_tensor(r, &[6], 1.0);
                Box::new(move |t, x| {
                    let y = t.tanh(x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "relu",
            sample: |r| away_from_zero(r, &[6]),
            build: |r| {
                let w = random_tensor(r, &[6], 1.0);
                Box::new(move |t, x| {
                    let y = t.relu(x)?;
                    let y = t.mul(y, x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "log",
            sample: |r| random_tensor(r, &[5], 1.0).map(|v| v.abs() + 0.2),
            build: |r| {
                let w = random_tensor(r, &[5], 1.0);
                Box::new(move |t, x| {
                    let y = t.log(x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "softmax",
            sample: |r| random_tensor(r, &[3, 4], 2.0),
            build: |r| {
                let w = random_tensor(r, &[3, 4], 1.0);
                Box::new(move |t, x| {
                    let y = t.softmax(x)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "sum_mean",
            sample: |r| random_tensor(r, &[2, 5], 1.0),
            build: |_| {
                Box::new(move |t, x| {
                    let sq = t.mul(x, x)?;
                    let s = t.sum(sq)?;
                    let m = t.mean(x)?;
                    let m = t.mul(m, m)?;
                    t.add(s, m)
                })
            },
        },
        OpCase {
            name: "embedding_mean",
            sample: |r| random_tensor(r, &[6, 3], 1.0),
            build: |r| {
                let ids: Vec<Vec<usize>> = (0..4)
                    .map(|_| (0..r.random_range(1..5)).map(|_| r.random_range(0..6)).collect())
                    .collect();
                let w = random_tensor(r, &[4, 3], 1.0);
                Box::new(move |t, x| {
                    let y = t.embedding_mean(x, ids.clone())?;
                    let y = t.tanh(y)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
        OpCase {
            name: "softmax_cross_entropy",
            sample: |r| random_tensor(r, &[4, 3], 2.0),
            build: |r| {
                let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..3)).collect();
                let y = Tensor::one_hot(&labels, 3).unwrap();
                Box::new(move |t, x| t.softmax_cross_entropy(x, y.clone()))
            },
        },
        OpCase {
            name: "linear",
            sample: |r| random_tensor(r, &[3, 4], 1.0),
            build: |r| {
                let x_in = random_tensor(r, &[2, 3], 1.0);
                let b = random_tensor(r, &[4], 1.0);
                let w = random_tensor(r, &[2, 4], 1.0);
                Box::new(move |t, weight| {
                    let x = t.constant(x_in.clone())?;
                    let b = t.leaf(b.clone())?;
                    let y = t.linear(x, weight, b)?;
                    let y = t.tanh(y)?;
                    weighted_sum(t, y, &w)
                })
            },
        },
    ]
}

/// Loss whose gradient the ANT graph computes exactly: for every group but
/// the discriminator it is `L_s + L_t - L_d`; the discriminator minimizes `L_d`.
pub fn ant_reference_losses(
    params: &ModelParams,
    source: &DomainBatch,
    target: &DomainBatch,
) -> (f64, f64) {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape).unwrap();
    let fwd = loant::model::ant_joint_loss(&mut tape, &p, source, target, 1.0).unwrap();
    let l = fwd.losses(&tape);
    (l.joint, l.l_d)
}
