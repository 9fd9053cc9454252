//! Oracles and fixtures shared by the integration tests and the acceptance
//! target. Every oracle here is written independently of the library code it
//! checks.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use emogif::data::{category_distribution, load_threads, Split, ThreadSet};
use emogif::ensemble::{
    average_runs, default_grid, evaluate_config, grid_search, majority_baseline, top_k,
    EnsembleConfig,
};
use emogif::metrics::{mean_recall_at_6, K};
use emogif::model::{predict_scores, train, Family, FeatureConfig, TrainConfig};
use emogif::scores::PredictionMatrix;
use emogif::subword::{byte_to_char_table, pretokenize, SubwordVocab};
use emogif::synth::{generate, SynthConfig, SynthData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> ThreadSet {
    load_threads(&fixture(name), Split::Dev, false).expect("fixture loads")
}

/// `-y ln σ(z) - (1-y) ln σ(-z)` evaluated literally. Writing `1 - σ(z)`
/// as `σ(-z)` avoids cancellation for large `z`; both logs still hit
/// `ln 0` once `|z|` is large enough for `exp` to saturate.
pub fn naive_bce(z: f64, y: f64) -> f64 {
    let sigma = |t: f64| 1.0 / (1.0 + (-t).exp());
    -(y * sigma(z).ln() + (1.0 - y) * sigma(-z).ln())
}

/// BPE by replaying the merge list once, in rank order, over each piece.
/// For a merge list where every merge's parts exist before it, this equals
/// the lowest-rank-first loop.
pub fn sequential_merge_encode(vocab: &SubwordVocab, text: &str) -> Vec<u32> {
    let table = byte_to_char_table();
    let mut out = Vec::new();
    for piece in pretokenize(text) {
        let mut syms: Vec<String> = piece
            .bytes()
            .map(|b| table[b as usize].to_string())
            .collect();
        for (a, b) in vocab.merges() {
            let mut i = 0;
            let mut next = Vec::with_capacity(syms.len());
            while i < syms.len() {
                if i + 1 < syms.len() && &syms[i] == a && &syms[i + 1] == b {
                    next.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    next.push(syms[i].clone());
                    i += 1;
                }
            }
            syms = next;
        }
        out.extend(
            syms.iter()
                .map(|s| vocab.id(s).expect("merged symbol is in the vocabulary")),
        );
    }
    out
}

/// Random strings mixing ASCII, Latin-1, CJK, emoji and arbitrary scalar
/// values, including whitespace and control characters.
pub fn random_unicode_string(rng: &mut impl Rng, max_chars: usize) -> String {
    let n = rng.random_range(0..=max_chars);
    (0..n)
        .map(|_| match rng.random_range(0..6) {
            0 => rng.random_range(' '..='~'),
            1 => *[' ', '\t', '\n', '\u{a0}', '\u{3000}']
                .get(rng.random_range(0..5))
                .unwrap(),
            2 => rng.random_range('\u{a1}'..='\u{17f}'),
            3 => rng.random_range('\u{4e00}'..='\u{4fff}'),
            4 => rng.random_range('\u{1f300}'..='\u{1faff}'),
            _ => rng.random::<char>(),
        })
        .collect()
}

/// Characters the brute-force comparison draws from: letters the mini
/// vocabulary merges heavily, digits, punctuation, whitespace and a few
/// multi-byte characters.
pub const BPE_ALPHABET: &[char] = &[
    'a', 'e', 'h', 'i', 'n', 'o', 's', 't', 'u', 'g', 'k', 'w', 'y', 'T', 'H', 'I', ' ', ' ', '\'',
    '!', '-', '1', '6', '’', 'é', '🔥',
];

pub fn random_alphabet_string(rng: &mut impl Rng, max_bytes: usize) -> String {
    let mut s = String::new();
    loop {
        let c = BPE_ALPHABET[rng.random_range(0..BPE_ALPHABET.len())];
        if s.len() + c.len_utf8() > max_bytes || rng.random_range(0..max_bytes + 1) == 0 {
            return s;
        }
        s.push(c);
    }
}

/// Text built from rule-table keys (all five steps), their look-alikes,
/// random unicode and mixed-case letters.
pub fn random_normalization_input(rng: &mut impl Rng, keys: &[String]) -> String {
    let n = rng.random_range(0..12);
    let mut s = String::new();
    for _ in 0..n {
        match rng.random_range(0..7) {
            0 | 1 => s.push_str(&keys[rng.random_range(0..keys.len())]),
            2 => s.push(' '),
            3 => s.push_str(["'", "’", "🔥", "👍🏽", "-", "  "][rng.random_range(0..6)]),
            4 => {
                let w: String = (0..rng.random_range(1..6))
                    .map(|_| {
                        let c = rng.random_range('a'..='z');
                        if rng.random_bool(0.3) {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect();
                s.push_str(&w);
            }
            _ => s.push_str(&random_unicode_string(rng, 3)),
        }
    }
    s
}

/// MR@6 with plain sets and a straightforward mean.
pub fn naive_mean_recall(preds: &[(String, Vec<String>)], gold: &[(String, Vec<String>)]) -> f64 {
    let by_idx: HashMap<&String, &Vec<String>> = preds.iter().map(|(i, c)| (i, c)).collect();
    let mut total = 0.0;
    for (idx, answer) in gold {
        let p: HashSet<&String> = by_idx[idx].iter().collect();
        let a: HashSet<&String> = answer.iter().collect();
        total += a.intersection(&p).count() as f64 / a.len() as f64;
    }
    total / gold.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub const DESK_DIM: usize = 1 << 12;
pub const DESK_RUNS: u64 = 5;
pub const DESK_SEED_GROUPS: u64 = 10;

pub struct DeskOutcome {
    pub data: SynthData,
    pub prior: Vec<u64>,
    /// Dev MR@6 of every single run, per family.
    pub run_scores: Vec<(Family, Vec<f64>)>,
    pub family_means: Vec<PredictionMatrix>,
    pub family_scores: Vec<f64>,
    pub identity_score: f64,
    pub reported_score: f64,
    pub grid_best: EnsembleConfig,
    pub grid_score: f64,
    pub baseline_score: f64,
}

pub fn desk_data(seed: u64) -> SynthData {
    generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .expect("synthetic data")
}

fn score(m: &PredictionMatrix, data: &SynthData, prior: &[u64]) -> f64 {
    mean_recall_at_6(&top_k(m, K, prior).unwrap(), &data.dev)
        .unwrap()
        .mean
}

/// Dev scores of `runs` models of one family, seeds `first_seed..`.
pub fn family_runs(
    data: &SynthData,
    family: Family,
    first_seed: u64,
    runs: u64,
) -> Vec<PredictionMatrix> {
    let vocab = SubwordVocab::bundled_mini();
    let fc = FeatureConfig::for_family(family).with_dim(DESK_DIM);
    (first_seed..first_seed + runs)
        .map(|seed| {
            let tc = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let model = train(&data.train, &data.labels, &vocab, &fc, &tc).unwrap();
            predict_scores(&model, &data.dev, &vocab, &data.labels).unwrap()
        })
        .collect()
}

/// Three families times five runs on 2,000 / 500 synthetic threads.
pub fn desk_experiment() -> DeskOutcome {
    let data = desk_data(0);
    let prior = category_distribution(&data.train, &data.labels).unwrap();
    let mut run_scores = Vec::new();
    let mut family_means = Vec::new();
    let mut family_scores = Vec::new();
    for family in Family::ALL {
        let runs = family_runs(&data, family, 0, DESK_RUNS);
        run_scores.push((
            family,
            runs.iter().map(|r| score(r, &data, &prior)).collect(),
        ));
        let mean = average_runs(&runs).unwrap();
        family_scores.push(score(&mean, &data, &prior));
        family_means.push(mean);
    }
    let identity_score = evaluate_config(
        &family_means,
        &EnsembleConfig::identity(3),
        &data.dev,
        K,
        &prior,
    )
    .unwrap();
    let reported_score = evaluate_config(
        &family_means,
        &EnsembleConfig::reported(),
        &data.dev,
        K,
        &prior,
    )
    .unwrap();
    let grid = grid_search(&family_means, &data.dev, &default_grid(3), K, &prior).unwrap();
    let baseline = majority_baseline(&data.dev.idx_list(), data.labels.names(), &prior, K).unwrap();
    let baseline_score = mean_recall_at_6(&baseline, &data.dev).unwrap().mean;
    DeskOutcome {
        data,
        prior,
        run_scores,
        family_means,
        family_scores,
        identity_score,
        reported_score,
        grid_best: grid.best,
        grid_score: grid.best_score,
        baseline_score,
    }
}

/// Single-run and five-run-average dev MR@6 of family A over disjoint seed
/// groups `5g..5g+5`.
pub fn seed_group_scores(data: &SynthData, groups: u64) -> (Vec<f64>, Vec<f64>) {
    let prior = category_distribution(&data.train, &data.labels).unwrap();
    let mut singles = Vec::new();
    let mut averages = Vec::new();
    for g in 0..groups {
        let runs = family_runs(data, Family::A, g * DESK_RUNS, DESK_RUNS);
        singles.extend(runs.iter().map(|r| score(r, data, &prior)));
        averages.push(score(&average_runs(&runs).unwrap(), data, &prior));
    }
    (singles, averages)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
