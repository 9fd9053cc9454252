//! Runs the five normalization steps over a few tweets and prints the text
//! after each step plus the replacement counts.
//!
//!     cargo run --example normalize_tweets ["your own tweet" ...]

use emogif::normalize::{normalize, normalize_steps, RuleSet, Step};

fn main() {
    let rules = RuleSet::bundled();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tweets = if args.is_empty() {
        vec![
            "hasn’t 🔥🔥 idk".to_owned(),
            "Can’t wait for the β release… 👍🏽👍🏽".to_owned(),
            "ur gonna love it lol 😂😂😂".to_owned(),
        ]
    } else {
        args
    };
    for tweet in &tweets {
        println!("{tweet}");
        for (k, step) in Step::ALL.iter().enumerate() {
            println!(
                "  {:<13} {}",
                step.to_string(),
                normalize_steps(tweet, &rules, k + 1).0
            );
        }
        let (_, report) = normalize(tweet, &rules);
        println!("  replacements per step: {:?}\n", report.replacements);
    }
}
