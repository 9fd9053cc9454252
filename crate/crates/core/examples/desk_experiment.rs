//! Synthetic end-to-end run: three families, five runs each, run averaging,
//! the power weighted sum and a grid search, all scored against the majority
//! baseline.
//!
//!     cargo run --release --example desk_experiment [seed]

use std::time::Instant;

use emogif::data::category_distribution;
use emogif::ensemble::{
    average_runs, default_grid, evaluate_config, grid_search, majority_baseline, top_k,
    EnsembleConfig,
};
use emogif::metrics::{mean_recall_at_6, K};
use emogif::model::{predict_scores, train, Family, FeatureConfig, TrainConfig};
use emogif::subword::SubwordVocab;
use emogif::synth::{generate, SynthConfig};

fn main() -> emogif::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let start = Instant::now();
    let data = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })?;
    let vocab = SubwordVocab::bundled_mini();
    let prior = category_distribution(&data.train, &data.labels)?;

    let mut means = Vec::new();
    for family in Family::ALL {
        let fc = FeatureConfig::for_family(family).with_dim(1 << 12);
        let mut runs = Vec::new();
        let mut scores = Vec::new();
        for r in 0..5 {
            let tc = TrainConfig {
                seed: seed + r,
                ..TrainConfig::default()
            };
            let model = train(&data.train, &data.labels, &vocab, &fc, &tc)?;
            let s = predict_scores(&model, &data.dev, &vocab, &data.labels)?;
            scores.push(mean_recall_at_6(&top_k(&s, K, &prior)?, &data.dev)?.mean);
            runs.push(s);
        }
        let mean = average_runs(&runs)?;
        let avg = mean_recall_at_6(&top_k(&mean, K, &prior)?, &data.dev)?.mean;
        let runs_text: Vec<String> = scores.iter().map(|s| format!("{s:.4}")).collect();
        println!(
            "family {family}: runs [{}] averaged {avg:.4}",
            runs_text.join(", ")
        );
        means.push(mean);
    }

    let identity = evaluate_config(&means, &EnsembleConfig::identity(3), &data.dev, K, &prior)?;
    let reported = evaluate_config(&means, &EnsembleConfig::reported(), &data.dev, K, &prior)?;
    let grid = grid_search(&means, &data.dev, &default_grid(3), K, &prior)?;
    let baseline = majority_baseline(&data.dev.idx_list(), data.labels.names(), &prior, K)?;
    let baseline = mean_recall_at_6(&baseline, &data.dev)?.mean;
    println!("plain sum (power 1, unit weights): {identity:.4}");
    println!("power 1.8, weights 3.0/1.8/0.8:    {reported:.4}");
    println!(
        "grid best (power {}, weights {:?}): {:.4}",
        grid.best.power, grid.best.weights, grid.best_score
    );
    println!("majority baseline:                 {baseline:.4}");
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
