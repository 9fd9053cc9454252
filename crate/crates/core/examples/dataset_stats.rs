//! Label space, category distribution and co-occurrence of a labeled thread
//! file (a synthetic one when no path is given).
//!
//!     cargo run --example dataset_stats [train.jsonl]

use std::path::PathBuf;

use emogif::data::{build_label_space, category_distribution, cooccurrence, load_threads, Split};
use emogif::synth::{generate, SynthConfig};

fn main() -> emogif::Result<()> {
    let train = match std::env::args().nth(1) {
        Some(p) => load_threads(&PathBuf::from(p), Split::Train, true)?,
        None => generate(&SynthConfig::default())?.train,
    };
    let labels = build_label_space(&train)?;
    let counts = category_distribution(&train, &labels)?;
    let table = cooccurrence(&train, &labels)?;
    println!(
        "{} threads, {} categories (fingerprint {})",
        train.len(),
        labels.len(),
        labels.fingerprint()
    );

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let max = counts[order[0]].max(1);
    for &i in &order {
        let bar = "#".repeat((counts[i] * 40 / max) as usize);
        println!("{:>14} {:>5} {bar}", labels.name(i), counts[i]);
    }

    let mut pairs: Vec<(u64, usize, usize)> = (0..labels.len())
        .flat_map(|i| (i + 1..labels.len()).map(move |j| (i, j)))
        .map(|(i, j)| (table.get(i, j), i, j))
        .collect();
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    println!("\nmost frequent pairs:");
    for (n, i, j) in pairs.into_iter().take(5) {
        println!("  {} + {}: {n}", labels.name(i), labels.name(j));
    }
    Ok(())
}
