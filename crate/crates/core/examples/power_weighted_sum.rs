//! Fuses three families' probabilities for one thread with the power
//! weighted sum and shows how the exponent changes the top categories.
//!
//!     cargo run --example power_weighted_sum

use emogif::ensemble::{power_weighted_sum, top_k, EnsembleConfig};
use emogif::scores::{PredictionMatrix, ScoreKind};

fn main() -> emogif::Result<()> {
    let cats: Vec<String> = [
        "agree",
        "applause",
        "hug",
        "oops",
        "shrug",
        "thank_you",
        "win",
        "yes",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let family = |p: [f64; 8]| {
        PredictionMatrix::new(
            vec!["1".into()],
            cats.clone(),
            p.to_vec(),
            ScoreKind::Probability,
        )
    };
    let fams = [
        family([0.90, 0.20, 0.05, 0.10, 0.30, 0.70, 0.15, 0.40])?,
        family([0.40, 0.45, 0.10, 0.05, 0.45, 0.60, 0.20, 0.35])?,
        family([0.50, 0.50, 0.50, 0.05, 0.20, 0.55, 0.10, 0.30])?,
    ];
    let prior = vec![0; cats.len()];
    for cfg in [
        EnsembleConfig::identity(3),
        EnsembleConfig::reported(),
        EnsembleConfig::new(3.0, vec![3.0, 1.8, 0.8])?,
    ] {
        let fused = power_weighted_sum(&fams, &cfg)?;
        let top = top_k(&fused, 6, &prior)?;
        println!("power {:<3} weights {:?}", cfg.power, cfg.weights);
        println!(
            "  agree scores {:.4}; top 6 {:?}",
            fused.get(0, 0),
            top[0].categories
        );
    }
    Ok(())
}
