//! Combining score matrices.
//!
//! Runs of one family (same features, different seeds) are averaged cell by
//! cell. Family means are then fused with a power weighted sum,
//! `Σ_i w_i · P_i^N`. Raising probabilities to a power `N > 1` pushes
//! low-confidence scores toward zero faster than confident ones, so the
//! categories that stay on top are those several families agree on. The
//! fused score is a ranking score, not a probability, and is not
//! renormalized.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ThreadSet;
use crate::error::{read_to_string, Error, Result};
use crate::metrics::{mean_recall_at_k, Prediction};
use crate::scores::{PredictionMatrix, ScoreKind};

/// Exponent and per-family weights of the power weighted sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub power: f64,
    pub weights: Vec<f64>,
}

impl EnsembleConfig {
    pub fn new(power: f64, weights: Vec<f64>) -> Result<Self> {
        let cfg = EnsembleConfig { power, weights };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Power 1.8 with weights 3.0, 1.8 and 0.8 for families A, B and C.
    pub fn reported() -> Self {
        EnsembleConfig {
            power: 1.8,
            weights: vec![3.0, 1.8, 0.8],
        }
    }

    /// Plain sum of family means: power 1, unit weights.
    pub fn identity(families: usize) -> Self {
        EnsembleConfig {
            power: 1.0,
            weights: vec![1.0; families],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::Config(format!(
                "power must be positive, got {}",
                self.power
            )));
        }
        if self.weights.is_empty() {
            return Err(Error::Config(
                "at least one family weight is required".into(),
            ));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("weights must be positive, got {w}")));
        }
        Ok(())
    }
}

/// Cell-wise mean of aligned probability matrices.
pub fn average_runs(runs: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Validation("cannot average an empty list of runs".into()))?;
    for r in runs {
        first.check_aligned(r)?;
        if r.kind() != ScoreKind::Probability {
            return Err(Error::Validation(
                "only probability matrices can be averaged".into(),
            ));
        }
    }
    let n = runs.len() as f64;
    let cells = first.scores().len();
    let mean: Vec<f64> = (0..cells)
        .map(|i| {
            let m = runs.iter().map(|r| r.scores()[i]).sum::<f64>() / n;
            // rounding can push a mean of values <= 1 a hair above 1
            m.min(1.0)
        })
        .collect();
    PredictionMatrix::new(
        first.idx().to_vec(),
        first.categories().to_vec(),
        mean,
        ScoreKind::Probability,
    )
}

/// `Σ_i w_i · P_i^N` cell by cell.
pub fn power_weighted_sum(
    family_means: &[PredictionMatrix],
    cfg: &EnsembleConfig,
) -> Result<PredictionMatrix> {
    cfg.validate()?;
    if family_means.len() != cfg.weights.len() {
        return Err(Error::Shape(format!(
            "{} family matrices but {} weights",
            family_means.len(),
            cfg.weights.len()
        )));
    }
    let first = &family_means[0];
    for m in family_means {
        first.check_aligned(m)?;
        if m.kind() != ScoreKind::Probability {
            return Err(Error::Validation(
                "power weighted sum expects probability matrices".into(),
            ));
        }
    }
    let fused: Vec<f64> = (0..first.scores().len())
        .map(|i| {
            family_means
                .iter()
                .zip(&cfg.weights)
                .map(|(m, w)| w * m.scores()[i].powf(cfg.power))
                .sum()
        })
        .collect();
    PredictionMatrix::new(
        first.idx().to_vec(),
        first.categories().to_vec(),
        fused,
        ScoreKind::Fused,
    )
}

/// Order used for top-k: higher score, then higher prior count, then name.
fn rank_order(scores: &[f64], prior: &[u64], names: &[String], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| prior[b].cmp(&prior[a]))
        .then_with(|| names[a].cmp(&names[b]))
}

/// The `k` best categories per row. `tie_prior` (usually training
/// frequencies, in category order) breaks score ties; remaining ties go to
/// the lexicographically smaller name.
pub fn top_k(scores: &PredictionMatrix, k: usize, tie_prior: &[u64]) -> Result<Vec<Prediction>> {
    let names = scores.categories();
    if k > names.len() {
        return Err(Error::Validation(format!(
            "cannot pick {k} categories out of {}",
            names.len()
        )));
    }
    if tie_prior.len() != names.len() {
        return Err(Error::Shape(format!(
            "tie prior has {} entries for {} categories",
            tie_prior.len(),
            names.len()
        )));
    }
    let mut out = Vec::with_capacity(scores.n_rows());
    let mut order: Vec<usize> = Vec::with_capacity(names.len());
    for (r, idx) in scores.idx().iter().enumerate() {
        let row = scores.row(r);
        order.clear();
        order.extend(0..names.len());
        if k < names.len() && k > 0 {
            order.select_nth_unstable_by(k - 1, |&a, &b| rank_order(row, tie_prior, names, a, b));
        }
        order.truncate(k);
        order.sort_unstable_by(|&a, &b| rank_order(row, tie_prior, names, a, b));
        out.push(Prediction {
            idx: idx.clone(),
            categories: order.iter().map(|&c| names[c].clone()).collect(),
        });
    }
    Ok(out)
}

/// The same `k` most frequent categories for every thread.
pub fn majority_baseline(
    idx: &[String],
    categories: &[String],
    prior: &[u64],
    k: usize,
) -> Result<Vec<Prediction>> {
    let uniform = PredictionMatrix::new(
        idx.to_vec(),
        categories.to_vec(),
        vec![0.0; idx.len() * categories.len()],
        ScoreKind::Fused,
    )?;
    top_k(&uniform, k, prior)
}

/// Mean recall at `k` of a fixed configuration on labeled threads.
pub fn evaluate_config(
    family_means: &[PredictionMatrix],
    cfg: &EnsembleConfig,
    gold: &ThreadSet,
    k: usize,
    tie_prior: &[u64],
) -> Result<f64> {
    let fused = power_weighted_sum(family_means, cfg)?;
    let preds = top_k(&fused, k, tie_prior)?;
    Ok(mean_recall_at_k(&preds, gold, k)?.mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: EnsembleConfig,
    pub best_score: f64,
    /// Every grid point with its score, in grid order.
    pub evaluated: Vec<(EnsembleConfig, f64)>,
}

/// Exhaustive search; ties go to the earliest grid point.
pub fn grid_search(
    family_means: &[PredictionMatrix],
    gold: &ThreadSet,
    grid: &[EnsembleConfig],
    k: usize,
    tie_prior: &[u64],
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Validation("empty ensemble grid".into()));
    }
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|cfg| evaluate_config(family_means, cfg, gold, k, tie_prior))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(GridResult {
        best: grid[best].clone(),
        best_score: scores[best],
        evaluated: grid.iter().cloned().zip(scores).collect(),
    })
}

pub const DEFAULT_POWERS: [f64; 6] = [0.5, 1.0, 1.4, 1.8, 2.2, 3.0];

/// Positive points of the simplex lattice with step 0.2, rescaled so the
/// largest weight is 3.0.
pub fn simplex_weights(families: usize) -> Vec<Vec<f64>> {
    const STEPS: usize = 5;
    fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            if left >= 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for v in 1..left {
            cur.push(v);
            rec(left - v, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(STEPS, families, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|pt| {
            let max = *pt.iter().max().expect("non-empty") as f64;
            pt.iter().map(|&v| 3.0 * v as f64 / max).collect()
        })
        .collect()
}

/// Default search grid: every power in [`DEFAULT_POWERS`] crossed with unit
/// weights, the simplex lattice and (for three families) the reported
/// weights 3.0/1.8/0.8. Unit weights at power 1 come first.
pub fn default_grid(families: usize) -> Vec<EnsembleConfig> {
    let mut weight_sets = vec![vec![1.0; families]];
    if families == 3 {
        weight_sets.push(EnsembleConfig::reported().weights);
    }
    for w in simplex_weights(families) {
        if !weight_sets.contains(&w) {
            weight_sets.push(w);
        }
    }
    let mut powers = DEFAULT_POWERS.to_vec();
    powers.sort_by_key(|p| *p != 1.0);
    powers
        .into_iter()
        .flat_map(|p| {
            weight_sets.iter().map(move |w| EnsembleConfig {
                power: p,
                weights: w.clone(),
            })
        })
        .collect()
}

/// Families and their run score files, as listed in a JSON manifest:
///
/// ```json
/// {"families": [{"name": "A", "weight": 3.0, "runs": ["a0.csv", "a1.csv"]}],
///  "power": 1.8}
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub families: Vec<FamilyRuns>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    /// Optional `category,count` CSV used to break ties in top-k.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_prior: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRuns {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub runs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: RunManifest = serde_json::from_str(&read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for f in &mut m.families {
            for r in &mut f.runs {
                if r.is_relative() {
                    *r = base.join(&*r);
                }
            }
        }
        if let Some(p) = m.tie_prior.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        if m.families.is_empty() || m.families.iter().any(|f| f.runs.is_empty()) {
            return Err(Error::Validation(format!(
                "{}: every manifest family needs at least one run",
                path.display()
            )));
        }
        Ok(m)
    }

    /// Weights from the manifest, if every family has one.
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.families.iter().map(|f| f.weight).collect()
    }

    /// Reads and averages each family's runs.
    pub fn family_means(&self) -> Result<Vec<PredictionMatrix>> {
        self.families
            .iter()
            .map(|f| {
                let runs = f
                    .runs
                    .iter()
                    .map(|p| PredictionMatrix::read_csv(p, ScoreKind::Probability))
                    .collect::<Result<Vec<_>>>()?;
                average_runs(&runs)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> PredictionMatrix {
        let c = rows[0].len();
        PredictionMatrix::new(
            (0..rows.len()).map(|i| i.to_string()).collect(),
            (0..c).map(|i| format!("c{i}")).collect(),
            rows.concat(),
            ScoreKind::Probability,
        )
        .unwrap()
    }

    #[test]
    fn average_of_two_rows() {
        let avg = average_runs(&[m(&[&[0.2, 0.8]]), m(&[&[0.4, 0.6]])]).unwrap();
        assert_abs_diff_eq!(avg.get(0, 0), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(avg.get(0, 1), 0.7, epsilon = 1e-15);
        assert_eq!(avg.kind(), ScoreKind::Probability);
    }

    #[test]
    fn average_of_identical_runs() {
        let a = m(&[&[0.1, 0.9, 0.3], &[1.0, 0.0, 0.5]]);
        assert_eq!(
            average_runs(&[a.clone(), a.clone(), a.clone(), a.clone()]).unwrap(),
            a
        );
    }

    #[test]
    fn average_errors() {
        assert!(average_runs(&[]).is_err());
        assert!(average_runs(&[m(&[&[0.1]]), m(&[&[0.1], &[0.2]])]).is_err());
    }

    #[test]
    fn reported_configuration_spot_value() {
        let fams = [m(&[&[0.9]]), m(&[&[0.4]]), m(&[&[0.5]])];
        let fused = power_weighted_sum(&fams, &EnsembleConfig::reported()).unwrap();
        let expected = 3.0 * 0.9f64.powf(1.8) + 1.8 * 0.4f64.powf(1.8) + 0.8 * 0.5f64.powf(1.8);
        assert_abs_diff_eq!(fused.get(0, 0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(fused.get(0, 0), 3.057_412_028_854_387, epsilon = 1e-12);
        assert_eq!(fused.kind(), ScoreKind::Fused);
    }

    #[test]
    fn single_family_identity() {
        let a = m(&[&[0.1, 0.7], &[0.33, 0.0]]);
        let fused =
            power_weighted_sum(std::slice::from_ref(&a), &EnsembleConfig::identity(1)).unwrap();
        assert_eq!(fused.scores(), a.scores());
    }

    #[test]
    fn all_ones_give_weight_sum() {
        let fams = [m(&[&[1.0]]), m(&[&[1.0]]), m(&[&[1.0]])];
        let fused = power_weighted_sum(&fams, &EnsembleConfig::reported()).unwrap();
        assert_eq!(fused.get(0, 0), 3.0 + 1.8 + 0.8);
    }

    #[test]
    fn power_sum_errors() {
        let fams = [m(&[&[0.5]]), m(&[&[0.5]])];
        assert!(power_weighted_sum(&fams, &EnsembleConfig::reported()).is_err());
        assert!(power_weighted_sum(
            &fams,
            &EnsembleConfig {
                power: 0.0,
                weights: vec![1.0, 1.0]
            }
        )
        .is_err());
        assert!(power_weighted_sum(
            &fams,
            &EnsembleConfig {
                power: 1.0,
                weights: vec![1.0, -1.0]
            }
        )
        .is_err());
    }

    #[test]
    fn top_k_orders_and_breaks_ties() {
        let s = m(&[&[0.1, 0.5, 0.5, 0.9, 0.0, 0.2]]);
        let p = top_k(&s, 6, &[0; 6]).unwrap();
        assert_eq!(p[0].categories, ["c3", "c1", "c2", "c5", "c0", "c4"]);
        let p = top_k(&s, 2, &[0, 0, 7, 0, 0, 0]).unwrap();
        assert_eq!(p[0].categories, ["c3", "c2"]);
        assert!(top_k(&s, 7, &[0; 6]).is_err());
    }

    #[test]
    fn equal_scores_pick_most_frequent() {
        let s = m(&[&[0.5; 8]]);
        let prior = [5, 1, 9, 3, 8, 2, 7, 4];
        let p = top_k(&s, 6, &prior).unwrap();
        assert_eq!(p[0].categories, ["c2", "c4", "c6", "c0", "c7", "c3"]);
        let base = majority_baseline(&["x".into()], s.categories(), &prior, 6).unwrap();
        assert_eq!(base[0].categories, p[0].categories);
    }

    #[test]
    fn simplex_lattice_points() {
        let w = simplex_weights(3);
        assert_eq!(w.len(), 6);
        assert!(w.contains(&vec![3.0, 1.0, 1.0]));
        assert!(w.contains(&vec![3.0, 3.0, 1.5]));
        assert!(w
            .iter()
            .all(|p| p.iter().cloned().fold(0.0, f64::max) == 3.0));
    }

    #[test]
    fn default_grid_contents() {
        let g = default_grid(3);
        assert_eq!(g[0], EnsembleConfig::identity(3));
        assert!(g.contains(&EnsembleConfig::reported()));
        assert_eq!(g.len(), DEFAULT_POWERS.len() * 8);
        assert_eq!(default_grid(1)[0], EnsembleConfig::identity(1));
    }
}
