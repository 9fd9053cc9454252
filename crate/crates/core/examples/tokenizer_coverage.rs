//! Coverage of the bundled mini vocabulary on a small thread file, before
//! and after each normalization step, plus the most frequent uncovered words.
//!
//!     cargo run --example tokenizer_coverage [threads.jsonl]

use std::path::PathBuf;

use emogif::data::{load_threads, Field, Split};
use emogif::normalize::{normalize, RuleSet};
use emogif::subword::{coverage_by_step, oov_report, SubwordVocab};

fn main() -> emogif::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("tests/fixtures/normalization_gain.jsonl")
        });
    let threads = load_threads(&path, Split::Dev, false)?;
    let vocab = SubwordVocab::bundled_mini();
    let rules = RuleSet::bundled();

    println!("steps  field  covered/total");
    for row in coverage_by_step(&[&threads], &vocab, &rules) {
        let s = &row.stat;
        println!(
            "{:>5}  {:<5}  {}/{} ({:.1}%)",
            row.steps, s.field, s.covered_words, s.total_words, s.percentage
        );
    }

    println!("\nhow the vocabulary splits some words:");
    for w in ["the", "Hug", "hug", "medium-dark", "6pm", ":fire:"] {
        println!("  {w:<12} {:?}", vocab.encode_tokens(&format!(" {w}")));
    }

    let normalized = threads.map_fields(|s| normalize(s, &rules).0);
    println!("\nuncovered after normalization (text):");
    for e in oov_report(&normalized, Field::Text, &vocab, 10) {
        println!("  {e}");
    }
    Ok(())
}
