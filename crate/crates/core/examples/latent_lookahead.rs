//! One optimization step of each strategy on the same batch pair: how the
//! latent look-ahead changes the losses and the per-group gradients.

use loant::data::{generate_domain_pair, GeneratorConfig, Split};
use loant::model::{ModelConfig, ModelParams, ParamGroup};
use loant::optim::{strategy_step, Strategy};

fn main() -> loant::Result<()> {
    let (source, target) = generate_domain_pair(&GeneratorConfig::default())?;
    let take = |b: loant::model::DomainBatch| {
        loant::model::DomainBatch::new(b.tokens[..64].to_vec(), b.labels[..64].to_vec())
    };
    let s = take(source.batch(Split::Train))?;
    let t = take(target.batch(Split::Train))?;
    let params = ModelParams::init(&ModelConfig::default(), 0)?;

    let ant = strategy_step(Strategy::Ant, &params, &s, &t, 0.0, 1.0)?;
    println!(
        "ANT          L_s {:.4}  L_t {:.4}  L_d {:.4}",
        ant.losses.l_s, ant.losses.l_t, ant.losses.l_d
    );
    for gamma in [0.0, 0.5, 2.0, 8.0] {
        let lo = strategy_step(Strategy::Loant, &params, &s, &t, gamma, 1.0)?;
        let moved: Vec<String> = ParamGroup::ALL
            .iter()
            .map(|&g| format!("{} {:.1e}", g.name(), lo.grads.group_max_abs_diff(&ant.grads, g)))
            .collect();
        println!(
            "LOANT γ={gamma:<4} L_s {:.4}  L_t {:.4}  L_d {:.4}  aux {} scalars",
            lo.losses.l_s, lo.losses.l_t, lo.losses.l_d, lo.aux_state
        );
        println!("             gradient change vs ANT: {}", moved.join(", "));
    }
    Ok(())
}
