//! Generates a source/target pair with domain cues that flip their label
//! association, then shows unigram divergence growing with the cue share.

use loant::data::{generate_domain_pair, stats, unigram_kl, GeneratorConfig, Split};

fn main() -> loant::Result<()> {
    let cfg = GeneratorConfig::default();
    let (source, target) = generate_domain_pair(&cfg)?;
    for d in [&source, &target] {
        let s = stats(d);
        println!(
            "{:<7} {} examples, positive rate {:.3}, {} distinct tokens",
            s.domain,
            d.len(),
            d.positive_rate(None),
            s.distinct_tokens
        );
        for split in Split::ALL {
            println!("        {:<5} {}", split.name(), d.count(split));
        }
    }
    println!("KL(target || source) = {:.4}", unigram_kl(&source, &target)?);

    for cue_share in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let (s, t) = generate_domain_pair(&GeneratorConfig { cue_share, ..cfg.clone() })?;
        println!("cue share {cue_share:.1}: KL {:.4}", unigram_kl(&s, &t)?);
    }
    Ok(())
}
