//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line on
//! stderr; the test fails if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ant_reference_losses, op_cases, random_batch, random_params, rng, tiny_config};
use loant::autodiff::{finite_diff_check, Tape, Tensor};
use loant::data::{generate_domain_pair, unigram_kl, DomainDataset, Example, GeneratorConfig, Split};
use loant::harness::{f_score, run_experiment, train_run, ExperimentOutcome, ExperimentSpec, PreparedData};
use loant::model::{
    branch_forward, dense_tanh, domain_loss, encode, task_loss, Dense, DomainBatch, GrlSchedule, ModelConfig,
    ModelParams, ParamGroup, Params,
};
use loant::optim::{
    latent_step, loant_grads, lookahead_state_scalars, mtl_lo_step, strategy_step, Strategy, TrainingConfig,
};
use loant::quadratic::{trajectory, Method, Quadratic, Trajectory, CONVERGENCE_TOL, REFERENCE_START};

/// Look-ahead step sizes for the transfer comparison, tuned on seeds 100..110.
const LOANT_GAMMA: f64 = 2.0;
const MTL_LO_GAMMA: f64 = 0.02;
const TRANSFER_SEEDS: std::ops::Range<u64> = 0..10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn emit(line: &str) {
    // bypasses libtest output capture
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

// ---------------------------------------------------------------- criterion 1

fn steep_and_slow(q: &Quadratic) -> [(f64, Vector2<f64>); 2] {
    let a = q.a();
    let eig = Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]).symmetric_eigen();
    let mut modes: Vec<(f64, Vector2<f64>)> = (0..2)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    modes.sort_by(|x, y| y.0.total_cmp(&x.0));
    [modes[0], modes[1]]
}

fn mode_coords(t: &Trajectory, q: &Quadratic, v: &Vector2<f64>) -> Vec<f64> {
    let m = q.minimizer();
    t.points
        .iter()
        .map(|p| (p[0] - m[0]) * v[0] + (p[1] - m[1]) * v[1])
        .collect()
}

fn worst_factor_error(t: &Trajectory, q: &Quadratic, lambda: f64, v: &Vector2<f64>, expected: f64) -> f64 {
    let c = mode_coords(t, q, v);
    c.windows(2)
        .take(20)
        .filter(|w| w[0].abs() > 1e-8)
        .map(|w| (w[1] / w[0] - expected).abs())
        .fold(0.0, f64::max)
        .max(if lambda.is_finite() { 0.0 } else { f64::INFINITY })
}

fn criterion_1() -> Vec<(String, Verdict)> {
    let start = Instant::now();
    let q = Quadratic::reference();
    let [(l_hi, v_hi), (l_lo, v_lo)] = steep_and_slow(&q);
    let cond = l_hi / l_lo;
    let mut out = Vec::new();

    let gd = trajectory(&q, Method::Gd, REFERENCE_START, 0.025, 0.0, 1000).unwrap();
    let eg2 = trajectory(&q, Method::Eg2, REFERENCE_START, 0.1, 0.01, 1000).unwrap();
    let steep = mode_coords(&gd, &q, &v_hi);
    let zigzag = steep
        .windows(2)
        .filter(|w| w[0].abs() > 1e-14)
        .all(|w| w[0] * w[1] < 0.0);
    let (gd_n, eg2_n) = (gd.steps_to_converge(CONVERGENCE_TOL), eg2.steps_to_converge(CONVERGENCE_TOL));
    let slower = matches!((gd_n, eg2_n), (Some(a), Some(b)) if a > 3 * b);
    out.push((
        "1a".into(),
        verdict(
            (cond - 40.0).abs() < 1e-9 && zigzag && slower,
            format!("cond={cond:.12} zigzag={zigzag} gd_steps={gd_n:?} eg2_steps={eg2_n:?}"),
        ),
    ));

    let gd200 = trajectory(&q, Method::Gd, REFERENCE_START, 0.025, 0.0, 200).unwrap();
    let eg1 = trajectory(&q, Method::Eg1, REFERENCE_START, 0.025, 0.01, 200).unwrap();
    let first_bad = (10..=200).find(|&k| eg1.f_values[k] >= gd200.f_values[k]);
    out.push((
        "1b".into(),
        verdict(
            first_bad.is_none(),
            match first_bad {
                None => "eg1 below gd at every step >= 10".to_string(),
                Some(k) => format!(
                    "eg1 f={:.3e} >= gd f={:.3e} at step {k}; slow-mode factors eg1={:.6} gd={:.6}",
                    eg1.f_values[k],
                    gd200.f_values[k],
                    1.0 - 2.0 * 0.025 * l_lo * (1.0 - 2.0 * 0.01 * l_lo),
                    1.0 - 2.0 * 0.025 * l_lo
                ),
            },
        ),
    ));

    let mut worst: f64 = 0.0;
    for (method, eta, gamma) in [(Method::Gd, 0.025, 0.0), (Method::Eg1, 0.025, 0.01), (Method::Eg2, 0.1, 0.01)] {
        let t = trajectory(&q, method, REFERENCE_START, eta, gamma, 40).unwrap();
        for (lambda, v) in [(l_hi, &v_hi), (l_lo, &v_lo)] {
            let expected = match method {
                Method::Gd => 1.0 - 2.0 * eta * lambda,
                Method::Eg1 => 1.0 - 2.0 * eta * lambda * (1.0 - 2.0 * gamma * lambda),
                Method::Eg2 => 1.0 - 2.0 * eta * lambda * (1.0 - 2.0 * gamma * lambda).powi(2),
            };
            worst = worst.max(worst_factor_error(&t, &q, lambda, v, expected));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    out.push((
        "1c".into(),
        verdict(worst < 1e-9 && secs < 1.0, format!("max factor error {worst:.2e}, runtime {secs:.3}s")),
    ));
    out
}

// ---------------------------------------------------------------- criterion 2

fn relative_error(fd: f64, g: f64) -> f64 {
    (fd - g).abs() / g.abs().max(1.0)
}

fn ant_graph_fd(params: &ModelParams, source: &DomainBatch, target: &DomainBatch) -> f64 {
    let analytic = strategy_step(Strategy::Ant, params, source, target, 0.0, 1.0).unwrap().grads;
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let slots = analytic.entries().len();
    for slot in 0..slots {
        let (_, group, g) = &analytic.entries()[slot];
        for i in 0..g.numel() {
            let probe = |delta: f64| {
                let mut p = params.clone();
                p.slots_mut()[slot].1.data_mut()[i] += delta;
                ant_reference_losses(&p, source, target)
            };
            let (jp, dp) = probe(eps);
            let (jm, dm) = probe(-eps);
            let fd = if *group == ParamGroup::Discriminator {
                (dp - dm) / (2.0 * eps)
            } else {
                (jp - jm) / (2.0 * eps)
            };
            worst = worst.max(relative_error(fd, g.data()[i]));
        }
    }
    worst
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut worst_op: (f64, &str) = (0.0, "");
    for case in op_cases() {
        let mut r = rng(0xA11CE);
        for _ in 0..100 {
            let x = (case.sample)(&mut r);
            let f = (case.build)(&mut r);
            let err = finite_diff_check(|t, x| f(t, x), &x, 1e-6).unwrap();
            if err > worst_op.0 {
                worst_op = (err, case.name);
            }
        }
    }

    // gradient reversal and detach by their defined backward rules
    let mut r = rng(7);
    let mut special: f64 = 0.0;
    for _ in 0..100 {
        let x = common::random_tensor(&mut r, &[2, 3], 1.0);
        let w = common::random_tensor(&mut r, &[2, 3], 1.0);
        let lambda = r.random_range(0.0..2.0);
        let mut tape = Tape::new();
        let leaf = tape.leaf(x.clone()).unwrap();
        let rev = tape.grl(leaf, lambda).unwrap();
        let y = tape.tanh(rev).unwrap();
        let out = common::weighted_sum(&mut tape, y, &w).unwrap();
        let g = tape.backward(out).unwrap().wrt(&tape, leaf);
        let plain = |t: &mut Tape, x| {
            let y = t.tanh(x)?;
            common::weighted_sum(t, y, &w)
        };
        let mut tape2 = Tape::new();
        let leaf2 = tape2.leaf(x.clone()).unwrap();
        let out2 = plain(&mut tape2, leaf2).unwrap();
        let g2 = tape2.backward(out2).unwrap().wrt(&tape2, leaf2);
        special = special.max(g.max_abs_diff(&g2.scaled(-lambda)));

        let mut tape3 = Tape::new();
        let leaf3 = tape3.leaf(x).unwrap();
        let d = tape3.detach(leaf3).unwrap();
        let out3 = common::weighted_sum(&mut tape3, d, &w).unwrap();
        special = special.max(tape3.backward(out3).unwrap().wrt(&tape3, leaf3).norm());
    }

    let mut r = rng(11);
    let cfg = tiny_config();
    let mut worst_graph: f64 = 0.0;
    for point in 0..100 {
        let params = random_params(&cfg, 1000 + point, 0.6);
        let s = random_batch(&mut r, 3, cfg.vocab_size);
        let t = random_batch(&mut r, 3, cfg.vocab_size);
        worst_graph = worst_graph.max(ant_graph_fd(&params, &s, &t));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_op.0 < 1e-5 && worst_graph < 1e-5 && special < 1e-15 && secs < 30.0,
        format!(
            "ops max rel err {:.2e} ({}), ANT graph {:.2e}, grl/detach {:.1e}, runtime {secs:.1}s",
            worst_op.0, worst_op.1, worst_graph, special
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn one_epoch(strategy: Strategy, gamma: f64, grl: GrlSchedule, init: &ModelParams, data: &PreparedData) -> loant::harness::RunResult {
    let cfg = TrainingConfig {
        strategy,
        gamma,
        epochs: 1,
        grl,
        seed: 3,
        ..TrainingConfig::default()
    };
    train_run(&cfg, init, data).unwrap()
}

fn criterion_3(data: &PreparedData, init: &ModelParams) -> Verdict {
    let ant = one_epoch(Strategy::Ant, 0.0, GrlSchedule::default(), init, data);
    let loant = one_epoch(Strategy::Loant, 0.0, GrlSchedule::default(), init, data);
    let bitwise = ant.checkpoints[0].params == loant.checkpoints[0].params
        && ant.epochs[0].batch_losses == loant.epochs[0].batch_losses;

    let off = GrlSchedule { steepness: 0.0 };
    let ant0 = one_epoch(Strategy::Ant, 0.0, off, init, data);
    let mtl = one_epoch(Strategy::Mtl, 0.0, off, init, data);
    let mtl_gap = [ParamGroup::Encoder, ParamGroup::Shared, ParamGroup::Source, ParamGroup::Target]
        .into_iter()
        .map(|g| ant0.checkpoints[0].params.group_max_abs_diff(&mtl.checkpoints[0].params, g))
        .fold(0.0, f64::max);
    let loss_gap = ant0.epochs[0]
        .batch_losses
        .iter()
        .zip(&mtl.epochs[0].batch_losses)
        .map(|(a, b)| (a.l_s - b.l_s).abs().max((a.l_t - b.l_t).abs()))
        .fold(0.0, f64::max);

    let q = Quadratic::reference();
    let gd = trajectory(&q, Method::Gd, REFERENCE_START, 0.025, 0.0, 200).unwrap();
    let eg_same = [Method::Eg1, Method::Eg2].into_iter().all(|m| {
        let t = trajectory(&q, m, REFERENCE_START, 0.025, 0.0, 200).unwrap();
        t.points == gd.points
    });
    verdict(
        bitwise && mtl_gap < 1e-12 && loss_gap < 1e-12 && eg_same,
        format!(
            "LOANT(γ=0)==ANT bitwise over {} steps: {bitwise}; MTL vs ANT(λ≡0) param gap {mtl_gap:.1e}, loss gap {loss_gap:.1e}; EG(γ=0)==GD bitwise: {eg_same}",
            ant.epochs[0].batch_losses.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn sub_scaled(a: &Tensor, b: &Tensor, alpha: f64) -> Tensor {
    let mut out = a.clone();
    out.add_scaled(b, -alpha).unwrap();
    out
}

/// First-order LOANT gradients assembled from three separate tapes: the
/// encoder Jacobian, the discriminator path on fixed latents and the task
/// branches at the shifted latents.
fn hand_loant_grads(params: &ModelParams, s: &DomainBatch, t: &DomainBatch, gamma: f64, lambda: f64) -> ModelParams {
    let mut enc_tape = Tape::new();
    let pa = params.bind(&mut enc_tape).unwrap();
    let zs = encode(&mut enc_tape, &pa, &s.tokens).unwrap();
    let zt = encode(&mut enc_tape, &pa, &t.tokens).unwrap();
    let (zs_v, zt_v) = (enc_tape.value(zs).clone(), enc_tape.value(zt).clone());

    let mut d_tape = Tape::new();
    let pb = params.bind(&mut d_tape).unwrap();
    let zs_b = d_tape.leaf(zs_v.clone()).unwrap();
    let zt_b = d_tape.leaf(zt_v.clone()).unwrap();
    let us = dense_tanh(&mut d_tape, &pb.shared, zs_b).unwrap();
    let ut = dense_tanh(&mut d_tape, &pb.shared, zt_b).unwrap();
    let (_, l_d) = domain_loss(&mut d_tape, &pb.discriminator, us, ut).unwrap();
    let gd = d_tape.backward(l_d).unwrap();
    let delta_s = gd.wrt(&d_tape, zs_b);
    let delta_t = gd.wrt(&d_tape, zt_b);
    let ld_grads = pb.gradients(&d_tape, &gd);

    let mut task_tape = Tape::new();
    let pc = params.bind(&mut task_tape).unwrap();
    let mut zs_shift = zs_v.clone();
    zs_shift.add_scaled(&delta_s, gamma).unwrap();
    let mut zt_shift = zt_v.clone();
    zt_shift.add_scaled(&delta_t, gamma).unwrap();
    let zsp = task_tape.leaf(zs_shift).unwrap();
    let ztp = task_tape.leaf(zt_shift).unwrap();
    let (_, _, ls_logits) = branch_forward(&mut task_tape, &pc.shared, &pc.source, zsp).unwrap();
    let (_, _, lt_logits) = branch_forward(&mut task_tape, &pc.shared, &pc.target, ztp).unwrap();
    let l_s = task_loss(&mut task_tape, ls_logits, &s.one_hot().unwrap()).unwrap();
    let l_t = task_loss(&mut task_tape, lt_logits, &t.one_hot().unwrap()).unwrap();
    let total = task_tape.add(l_s, l_t).unwrap();
    let gt = task_tape.backward(total).unwrap();
    let g_sp = gt.wrt(&task_tape, zsp);
    let g_tp = gt.wrt(&task_tape, ztp);
    let task_grads = pc.gradients(&task_tape, &gt);

    let cot_s = enc_tape.constant(sub_scaled(&g_sp, &delta_s, lambda)).unwrap();
    let cot_t = enc_tape.constant(sub_scaled(&g_tp, &delta_t, lambda)).unwrap();
    let ps = enc_tape.mul(zs, cot_s).unwrap();
    let pt = enc_tape.mul(zt, cot_t).unwrap();
    let ps = enc_tape.sum(ps).unwrap();
    let pt = enc_tape.sum(pt).unwrap();
    let vjp = enc_tape.add(ps, pt).unwrap();
    let ge = enc_tape.backward(vjp).unwrap();
    let enc_grads = pa.gradients(&enc_tape, &ge);

    Params {
        encoder: enc_grads.encoder,
        shared: Dense {
            weight: sub_scaled(&task_grads.shared.weight, &ld_grads.shared.weight, lambda),
            bias: sub_scaled(&task_grads.shared.bias, &ld_grads.shared.bias, lambda),
        },
        source: task_grads.source,
        target: task_grads.target,
        discriminator: ld_grads.discriminator,
    }
}

fn criterion_4() -> Verdict {
    let cfg = ModelConfig {
        vocab_size: 20,
        embed_dim: 3,
        latent_dim: 4,
    };
    let mut r = rng(44);
    let mut worst: BTreeMap<ParamGroup, f64> = BTreeMap::new();
    let mut isolation: f64 = 0.0;
    for draw in 0..25 {
        let params = random_params(&cfg, 400 + draw, 0.7);
        let s = random_batch(&mut r, 2, cfg.vocab_size);
        let t = random_batch(&mut r, 2, cfg.vocab_size);
        let gamma = [0.0, 0.01, 0.5, 2.0][draw as usize % 4];
        let lambda = r.random_range(0.0..1.0);
        let auto = loant_grads(&params, &s, &t, gamma, lambda).unwrap();
        let hand = hand_loant_grads(&params, &s, &t, gamma, lambda);
        for g in ParamGroup::ALL {
            let e = worst.entry(g).or_insert(0.0);
            *e = e.max(auto.group_max_abs_diff(&hand, g));
        }

        // φ_s sees only the source batch; φ_t only the target batch
        let t2 = random_batch(&mut r, 2, cfg.vocab_size);
        let s2 = random_batch(&mut r, 2, cfg.vocab_size);
        let swap_t = loant_grads(&params, &s, &t2, gamma, lambda).unwrap();
        let swap_s = loant_grads(&params, &s2, &t, gamma, lambda).unwrap();
        isolation = isolation
            .max(auto.group_max_abs_diff(&swap_t, ParamGroup::Source))
            .max(auto.group_max_abs_diff(&swap_s, ParamGroup::Target));
        // at γ=0 the discriminator cannot reach φ
        let mut other_disc = params.clone();
        other_disc.discriminator = random_params(&cfg, 9000 + draw, 0.7).discriminator;
        let a0 = loant_grads(&params, &s, &t, 0.0, lambda).unwrap();
        let b0 = loant_grads(&other_disc, &s, &t, 0.0, lambda).unwrap();
        isolation = isolation
            .max(a0.group_max_abs_diff(&b0, ParamGroup::Source))
            .max(a0.group_max_abs_diff(&b0, ParamGroup::Target));
    }
    let max = worst.values().copied().fold(isolation, f64::max);
    let per_group: Vec<String> = worst.iter().map(|(g, e)| format!("{}={e:.1e}", g.name())).collect();
    verdict(
        max < 1e-10,
        format!("per group {}; φ-isolation {isolation:.1e}", per_group.join(" ")),
    )
}

// ---------------------------------------------------------------- criterion 5

fn ascent_trial(params: &ModelParams, s: &DomainBatch, t: &DomainBatch, gamma: f64) -> (bool, bool) {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape).unwrap();
    let zs = encode(&mut tape, &p, &s.tokens).unwrap();
    let zt = encode(&mut tape, &p, &t.tokens).unwrap();
    let us = dense_tanh(&mut tape, &p.shared, zs).unwrap();
    let ut = dense_tanh(&mut tape, &p.shared, zt).unwrap();
    let (_, l_d) = domain_loss(&mut tape, &p.discriminator, us, ut).unwrap();
    let pair = latent_step(&mut tape, zs, zt, l_d, gamma).unwrap();
    let us2 = dense_tanh(&mut tape, &p.shared, pair.z_s_prime).unwrap();
    let ut2 = dense_tanh(&mut tape, &p.shared, pair.z_t_prime).unwrap();
    let (_, l_d2) = domain_loss(&mut tape, &p.discriminator, us2, ut2).unwrap();
    let ascent = tape.value(l_d2).item() >= tape.value(l_d).item();

    let task = |tape: &mut Tape, z, branch, batch: &DomainBatch| {
        let (_, _, logits) = branch_forward(tape, &p.shared, branch, z).unwrap();
        task_loss(tape, logits, &batch.one_hot().unwrap()).unwrap()
    };
    let ls = task(&mut tape, zs, &p.source, s);
    let lt = task(&mut tape, zt, &p.target, t);
    let pair = mtl_lo_step(&mut tape, zs, zt, ls, lt, gamma).unwrap();
    let ls2 = task(&mut tape, pair.z_s_prime, &p.source, s);
    let lt2 = task(&mut tape, pair.z_t_prime, &p.target, t);
    let descent =
        tape.value(ls2).item() <= tape.value(ls).item() && tape.value(lt2).item() <= tape.value(lt).item();
    (ascent, descent)
}

fn criterion_5() -> Verdict {
    let cfg = ModelConfig {
        vocab_size: 200,
        embed_dim: 8,
        latent_dim: 16,
    };
    let mut lines = Vec::new();
    let mut pass = true;
    for gamma in [1e-4, 1e-3, 1e-2] {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let (mut up, mut down) = (0, 0);
        for trial in 0..200u64 {
            let params = ModelParams::init(&cfg, 50_000 + trial).unwrap();
            let s = random_batch(&mut r, 16, cfg.vocab_size);
            let t = random_batch(&mut r, 16, cfg.vocab_size);
            let (a, d) = ascent_trial(&params, &s, &t, gamma);
            up += usize::from(a);
            down += usize::from(d);
        }
        pass &= up >= 190 && down >= 190;
        lines.push(format!("γ={gamma:e}: ascent {up}/200, descent {down}/200"));
    }
    verdict(pass, lines.join("; "))
}

// ---------------------------------------------------------------- criterion 6

fn transfer_spec() -> ExperimentSpec {
    ExperimentSpec {
        strategies: vec![Strategy::Ant, Strategy::Loant, Strategy::Mtl, Strategy::MtlLo],
        seeds: TRANSFER_SEEDS.collect(),
        gamma_overrides: [(Strategy::Loant, LOANT_GAMMA), (Strategy::MtlLo, MTL_LO_GAMMA)].into(),
        ..ExperimentSpec::default()
    }
}

fn criterion_6() -> (Verdict, ExperimentOutcome) {
    let start = Instant::now();
    let outcome = run_experiment(&transfer_spec()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut pass = outcome.failures().is_empty() && secs < 600.0;
    for (lo, base) in [(Strategy::Loant, Strategy::Ant), (Strategy::MtlLo, Strategy::Mtl)] {
        let c = outcome.comparison(lo, base).expect("comparison present");
        let (a, b) = (outcome.aggregate(lo).unwrap(), outcome.aggregate(base).unwrap());
        pass &= a.mean_test_f >= b.mean_test_f;
        parts.push(format!(
            "{} {:.4} vs {} {:.4} (W/L/T {}/{}/{}, sign-test p={:.3})",
            lo.name(),
            a.mean_test_f,
            base.name(),
            b.mean_test_f,
            c.sign_test.wins,
            c.sign_test.losses,
            c.sign_test.ties,
            c.sign_test.p_value
        ));
    }
    parts.push(format!("runtime {secs:.0}s"));
    (verdict(pass, parts.join("; ")), outcome)
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7(data: &PreparedData, init: &ModelParams) -> Verdict {
    let b = TrainingConfig::default().batch_size;
    let d = init.config().latent_dim;
    let w_b = init.group_size(ParamGroup::Encoder);
    let s = DomainBatch::new(data.source_train.tokens[..b].to_vec(), data.source_train.labels[..b].to_vec()).unwrap();
    let t = DomainBatch::new(data.target_train.tokens[..b].to_vec(), data.target_train.labels[..b].to_vec()).unwrap();
    let loant_aux = strategy_step(Strategy::Loant, init, &s, &t, 0.01, 0.5).unwrap().aux_state;
    let maml_aux = strategy_step(Strategy::AntMaml, init, &s, &t, 0.01, 0.5).unwrap().aux_state;
    let counted = loant_aux == 2 * b * d
        && maml_aux == w_b
        && lookahead_state_scalars(Strategy::Loant, init, b) == loant_aux
        && lookahead_state_scalars(Strategy::AntMaml, init, b) == maml_aux;
    let ratio = w_b as f64 / (2 * b * d) as f64;

    let loant = one_epoch(Strategy::Loant, 0.01, GrlSchedule::default(), init, data);
    let maml = one_epoch(Strategy::AntMaml, 0.01, GrlSchedule::default(), init, data);
    verdict(
        counted && ratio > 5.0 && maml.wall_ms > loant.wall_ms,
        format!(
            "LOANT {loant_aux} = 2BD, ANT+MAML {maml_aux} = |w_b|, ratio {ratio:.2}; epoch wall time ANT+MAML {:.0}ms vs LOANT {:.0}ms",
            maml.wall_ms, loant.wall_ms
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn corpus(seqs: &[&[usize]]) -> DomainDataset {
    let examples = seqs
        .iter()
        .map(|s| Example {
            tokens: s.to_vec(),
            label: 0,
            split: Split::Train,
        })
        .collect();
    DomainDataset::new("hand", 10, 0, examples)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn criterion_8() -> Verdict {
    let a = corpus(&[&[1, 2, 3, 3], &[4, 2]]);
    let same = unigram_kl(&a, &a.clone()).unwrap();

    let target = corpus(&[&[0, 1]]);
    let source = corpus(&[&[0, 1, 1, 1]]);
    let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    let forward = unigram_kl(&source, &target).unwrap();
    let backward = unigram_kl(&target, &source).unwrap();

    let shares = [0.0, 0.1, 0.2, 0.3, 0.4];
    let mut worst_rho: f64 = 1.0;
    for seed in 0..5 {
        let kls: Vec<f64> = shares
            .iter()
            .map(|&c| {
                let cfg = GeneratorConfig {
                    cue_share: c,
                    seed,
                    ..GeneratorConfig::default()
                };
                let (s, t) = generate_domain_pair(&cfg).unwrap();
                unigram_kl(&s, &t).unwrap()
            })
            .collect();
        worst_rho = worst_rho.min(spearman(&shares, &kls));
    }
    verdict(
        same.abs() < 1e-12 && (forward - oracle).abs() < 1e-6 && (forward - 0.14384).abs() < 5e-6
            && (forward - backward).abs() > 1e-3
            && worst_rho > 0.9,
        format!(
            "identical {same:.1e}; hand example {forward:.9} vs summation {oracle:.9} (reverse {backward:.6}); min rank correlation over 5 seeds {worst_rho:.3}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9(outcome: &ExperimentOutcome) -> Verdict {
    // TP=3, FP=1, FN=2, TN=2
    let pred = [1, 1, 1, 1, 0, 0, 0, 0];
    let gold = [1, 1, 1, 0, 1, 1, 0, 0];
    let prf = f_score(&pred, &gold, 1).unwrap();
    let hand = (prf.precision - 0.75).abs() < 1e-12
        && (prf.recall - 0.6).abs() < 1e-12
        && (prf.f - 2.0 * 0.45 / 1.35).abs() < 1e-12;
    let rows = outcome.reports.iter().chain(&outcome.grid);
    let mut n = 0;
    let mut gap: f64 = 0.0;
    for r in rows {
        for p in [r.dev, r.test] {
            gap = gap.max(p.harmonic_mean_gap());
            n += 1;
        }
    }
    verdict(
        hand && gap < 1e-12 && n > 0,
        format!("P={:.4} R={:.4} F={:.4}; harmonic identity gap {gap:.1e} over {n} emitted rows", prf.precision, prf.recall, prf.f),
    )
}

#[test]
fn acceptance() {
    let spec = ExperimentSpec::default();
    let data = spec.prepare().unwrap();
    let init = ModelParams::init(&spec.model, 0).unwrap();
    // keep generation out of any timed section
    let _ = generate_domain_pair(&GeneratorConfig::default()).unwrap();

    let mut results: Vec<(String, Verdict)> = criterion_1();
    results.push(("2".into(), criterion_2()));
    results.push(("3".into(), criterion_3(&data, &init)));
    results.push(("4".into(), criterion_4()));
    results.push(("5".into(), criterion_5()));
    let (v6, outcome) = criterion_6();
    results.push(("6".into(), v6));
    results.push(("7".into(), criterion_7(&data, &init)));
    results.push(("8".into(), criterion_8()));
    results.push(("9".into(), criterion_9(&outcome)));

    emit("");
    for (name, v) in &results {
        emit(&format!(
            "criterion {name:<3} {}  {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        ));
    }
    let failed: Vec<&str> = results.iter().filter(|(_, v)| !v.pass).map(|(n, _)| n.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
