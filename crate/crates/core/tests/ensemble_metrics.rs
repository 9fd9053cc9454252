mod common;

use common::{naive_mean_recall, seeded_rng};
use emogif::data::{Split, Thread, ThreadSet};
use emogif::ensemble::{default_grid, grid_search, power_weighted_sum, top_k, EnsembleConfig};
use emogif::metrics::{mean_recall_at_6, recall_at_k, Prediction};
use emogif::scores::{PredictionMatrix, ScoreKind};
use emogif::synth::CATEGORY_NAMES;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

fn names() -> Vec<String> {
    CATEGORY_NAMES.iter().map(|s| s.to_string()).collect()
}

fn random_pairs(rng: &mut impl Rng, n: usize) -> (Vec<Prediction>, ThreadSet) {
    let names = names();
    let mut preds = Vec::new();
    let mut threads = Vec::new();
    for i in 0..n {
        let k = rng.random_range(1..=6);
        let gold: Vec<String> = names.choose_multiple(rng, k).cloned().collect();
        let pred: Vec<String> = names.choose_multiple(rng, 6).cloned().collect();
        threads.push(Thread::new(i.to_string(), "", "").with_categories(gold));
        preds.push(Prediction {
            idx: i.to_string(),
            categories: pred,
        });
    }
    (preds, ThreadSet::new(threads, Split::Dev, true).unwrap())
}

type IdxCats = Vec<(String, Vec<String>)>;

fn as_pairs(preds: &[Prediction], gold: &ThreadSet) -> (IdxCats, IdxCats) {
    (
        preds
            .iter()
            .map(|p| (p.idx.clone(), p.categories.clone()))
            .collect(),
        gold.iter()
            .map(|t| (t.idx.clone(), t.categories.clone().unwrap()))
            .collect(),
    )
}

#[test]
fn mean_recall_matches_naive_oracle() {
    let mut rng = seeded_rng(5);
    for _ in 0..20 {
        let (preds, gold) = random_pairs(&mut rng, 100);
        let (p, g) = as_pairs(&preds, &gold);
        let result = mean_recall_at_6(&preds, &gold).unwrap();
        assert!((result.mean - naive_mean_recall(&p, &g)).abs() < 1e-12);
        let per_thread_mean: f64 = result
            .per_thread
            .iter()
            .map(|(_, r)| r.value())
            .sum::<f64>()
            / result.n_threads as f64;
        assert!((result.mean - per_thread_mean).abs() < 1e-12);
    }
}

#[test]
fn mean_recall_ignores_thread_order() {
    let mut rng = seeded_rng(6);
    let (mut preds, gold) = random_pairs(&mut rng, 200);
    let before = mean_recall_at_6(&preds, &gold).unwrap().mean;
    preds.shuffle(&mut rng);
    let mut threads = gold.threads().to_vec();
    threads.shuffle(&mut rng);
    let gold = ThreadSet::new(threads, Split::Dev, true).unwrap();
    assert!((mean_recall_at_6(&preds, &gold).unwrap().mean - before).abs() < 1e-12);
}

#[test]
fn fixing_a_wrong_category_never_lowers_recall() {
    let mut rng = seeded_rng(7);
    let names = names();
    for _ in 0..500 {
        let k = rng.random_range(1..=6);
        let gold: Vec<String> = names.choose_multiple(&mut rng, k).cloned().collect();
        let mut pred: Vec<String> = names.choose_multiple(&mut rng, 6).cloned().collect();
        let before = recall_at_k(&pred, &gold, 6).unwrap();
        let r = before.value();
        assert!((0.0..=1.0).contains(&r));
        assert_eq!(r == 1.0, gold.iter().all(|g| pred.contains(g)));
        let wrong = pred.iter().position(|p| !gold.contains(p));
        let missing = gold.iter().find(|g| !pred.contains(g)).cloned();
        if let (Some(w), Some(m)) = (wrong, missing) {
            pred[w] = m;
            let after = recall_at_k(&pred, &gold, 6).unwrap();
            assert!(after.value() > before.value());
        }
    }
}

fn prob_matrix(rows: usize, cats: usize, rng: &mut impl Rng) -> PredictionMatrix {
    PredictionMatrix::new(
        (0..rows).map(|i| i.to_string()).collect(),
        names()[..cats].to_vec(),
        (0..rows * cats).map(|_| rng.random::<f64>()).collect(),
        ScoreKind::Probability,
    )
    .unwrap()
}

proptest! {
    /// Scaling every weight by one positive factor leaves the top-k choice
    /// unchanged.
    #[test]
    fn top_k_ignores_weight_scale(seed in any::<u64>(), scale in 0.01f64..100.0, power in 0.5f64..3.0) {
        let mut rng = seeded_rng(seed);
        let fams: Vec<PredictionMatrix> = (0..3).map(|_| prob_matrix(5, 12, &mut rng)).collect();
        let cfg = EnsembleConfig::new(power, vec![3.0, 1.8, 0.8]).unwrap();
        let scaled = EnsembleConfig::new(power, cfg.weights.iter().map(|w| w * scale).collect()).unwrap();
        let prior = vec![0; 12];
        let a = top_k(&power_weighted_sum(&fams, &cfg).unwrap(), 6, &prior).unwrap();
        let b = top_k(&power_weighted_sum(&fams, &scaled).unwrap(), 6, &prior).unwrap();
        prop_assert_eq!(a, b);
    }

    /// With a single family the power is a monotone transform, so the
    /// ranking equals ranking the raw probabilities.
    #[test]
    fn single_family_power_keeps_ranking(seed in any::<u64>(), power in 0.2f64..4.0) {
        let mut rng = seeded_rng(seed);
        let fam = prob_matrix(5, 12, &mut rng);
        let prior = vec![0; 12];
        let fused = power_weighted_sum(std::slice::from_ref(&fam), &EnsembleConfig::new(power, vec![2.0]).unwrap()).unwrap();
        prop_assert_eq!(top_k(&fused, 6, &prior).unwrap(), top_k(&fam, 6, &prior).unwrap());
    }
}

#[test]
fn grid_never_loses_to_its_identity_point() {
    let mut rng = seeded_rng(8);
    let (_, gold) = random_pairs(&mut rng, 60);
    let labels: Vec<String> = names();
    let fams: Vec<PredictionMatrix> = (0..3)
        .map(|_| {
            PredictionMatrix::new(
                gold.idx_list(),
                labels.clone(),
                (0..60 * labels.len())
                    .map(|_| rng.random::<f64>())
                    .collect(),
                ScoreKind::Probability,
            )
            .unwrap()
        })
        .collect();
    let prior = vec![0; labels.len()];
    let grid = default_grid(3);
    let result = grid_search(&fams, &gold, &grid, 6, &prior).unwrap();
    let identity = result
        .evaluated
        .iter()
        .find(|(c, _)| *c == EnsembleConfig::identity(3))
        .unwrap()
        .1;
    assert!(result.best_score >= identity);
    // the first maximum in grid order wins
    let first = result
        .evaluated
        .iter()
        .position(|(_, s)| *s == result.best_score)
        .unwrap();
    assert_eq!(result.best, grid[first]);
}
