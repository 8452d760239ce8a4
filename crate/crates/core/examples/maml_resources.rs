//! Look-ahead in latent space against look-ahead in parameter space: the
//! extra state each holds per step and the resulting step time.

use std::time::Instant;

use loant::data::{generate_domain_pair, GeneratorConfig, Split};
use loant::model::{DomainBatch, ModelConfig, ModelParams, ParamGroup};
use loant::optim::{lookahead_state_scalars, strategy_step, Strategy};

fn main() -> loant::Result<()> {
    let model = ModelConfig::default();
    let params = ModelParams::init(&model, 0)?;
    let (source, target) = generate_domain_pair(&GeneratorConfig::default())?;
    let batch = 128;
    let cut = |b: DomainBatch| DomainBatch::new(b.tokens[..batch].to_vec(), b.labels[..batch].to_vec());
    let (s, t) = (cut(source.batch(Split::Train))?, cut(target.batch(Split::Train))?);

    println!(
        "batch {batch}, latent dim {}, encoder scalars {}",
        model.latent_dim,
        params.group_size(ParamGroup::Encoder)
    );
    for strategy in [Strategy::Ant, Strategy::Loant, Strategy::AntMaml] {
        let start = Instant::now();
        let reps = 20;
        let mut aux = 0;
        for _ in 0..reps {
            aux = strategy_step(strategy, &params, &s, &t, 1e-2, 1.0)?.aux_state;
        }
        let ms = start.elapsed().as_secs_f64() * 1e3 / reps as f64;
        assert_eq!(aux, lookahead_state_scalars(strategy, &params, batch));
        println!("{:<9} look-ahead state {aux:>7} scalars, {ms:.2} ms per step", strategy.name());
    }
    Ok(())
}
