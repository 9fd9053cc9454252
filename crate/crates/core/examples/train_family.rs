//! Trains one run of one model family on synthetic threads and reports the
//! per-epoch training loss and dev MR@6.
//!
//!     cargo run --release --example train_family [A|B|C] [seed]

use emogif::data::category_distribution;
use emogif::ensemble::top_k;
use emogif::metrics::{mean_recall_at_6, K};
use emogif::model::{predict_scores, train_with_history, Family, FeatureConfig, TrainConfig};
use emogif::subword::SubwordVocab;
use emogif::synth::{generate, SynthConfig};

fn main() -> emogif::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("A").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = generate(&SynthConfig::default())?;
    let vocab = SubwordVocab::bundled_mini();
    let fc = FeatureConfig::for_family(family).with_dim(1 << 14);
    let tc = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    println!(
        "family {family}: orders {:?}, lowercase {}, dim {}",
        fc.ngram_orders, fc.lowercase, fc.dim
    );
    let out = train_with_history(&data.train, &data.labels, &vocab, &fc, &tc)?;
    for (e, loss) in out.epoch_losses.iter().enumerate() {
        println!("epoch {}: train loss {loss:.5}", e + 1);
    }
    let scores = predict_scores(&out.model, &data.dev, &vocab, &data.labels)?;
    let prior = category_distribution(&data.train, &data.labels)?;
    let mr = mean_recall_at_6(&top_k(&scores, K, &prior)?, &data.dev)?;
    println!("dev MR@6 {:.4} over {} threads", mr.mean, mr.n_threads);
    Ok(())
}
