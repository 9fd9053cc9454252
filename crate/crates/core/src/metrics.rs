//! Mean Recall at k.
//!
//! For one thread, recall at k is `|predicted ∩ gold| / |gold|` where
//! `predicted` holds exactly k distinct categories. The reported score is the
//! mean over threads.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ThreadSet;
use crate::error::{read_to_string, write_file, Error, Result};

/// Categories predicted per thread.
pub const K: usize = 6;

/// One submission line: a thread and its predicted categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub idx: String,
    pub categories: Vec<String>,
}

/// Exact per-thread recall as a ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recall {
    pub hits: usize,
    pub gold: usize,
}

impl Recall {
    pub fn value(self) -> f64 {
        self.hits as f64 / self.gold as f64
    }
}

impl fmt::Display for Recall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.hits, self.gold)
    }
}

pub fn recall_at_k<P, A>(predicted: &[P], answer: &[A], k: usize) -> Result<Recall>
where
    P: AsRef<str>,
    A: AsRef<str>,
{
    if predicted.len() != k {
        return Err(Error::Validation(format!(
            "expected exactly {k} predicted categories, got {}",
            predicted.len()
        )));
    }
    let predicted_set: HashSet<&str> = predicted.iter().map(AsRef::as_ref).collect();
    if predicted_set.len() != predicted.len() {
        return Err(Error::Validation("duplicate predicted category".into()));
    }
    let answer_set: HashSet<&str> = answer.iter().map(AsRef::as_ref).collect();
    if answer_set.is_empty() {
        return Err(Error::Validation("empty gold answer".into()));
    }
    if answer_set.len() > k {
        return Err(Error::Validation(format!(
            "gold answer has {} categories, more than k = {k}",
            answer_set.len()
        )));
    }
    Ok(Recall {
        hits: answer_set.intersection(&predicted_set).count(),
        gold: answer_set.len(),
    })
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// (idx, recall) in gold order.
    pub per_thread: Vec<(String, Recall)>,
    pub mean: f64,
    pub n_threads: usize,
}

impl EvalResult {
    /// CSV with header `idx,hits,gold,recall`.
    pub fn per_thread_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["idx", "hits", "gold", "recall"])?;
        for (idx, r) in &self.per_thread {
            w.write_record([
                idx.clone(),
                r.hits.to_string(),
                r.gold.to_string(),
                format!("{:.6}", r.value()),
            ])?;
        }
        crate::error::finish_csv(w)
    }
}

/// Mean recall at `k` of `predictions` against a labeled thread set. The
/// idx sets must match exactly.
pub fn mean_recall_at_k(
    predictions: &[Prediction],
    gold: &ThreadSet,
    k: usize,
) -> Result<EvalResult> {
    gold.require_labeled("evaluation")?;
    let mut by_idx: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_idx.insert(p.idx.as_str(), p).is_some() {
            return Err(Error::DuplicateIdx(p.idx.clone()));
        }
    }
    let gold_idx: HashSet<&str> = gold.iter().map(|t| t.idx.as_str()).collect();
    let missing: Vec<&str> = gold
        .iter()
        .map(|t| t.idx.as_str())
        .filter(|i| !by_idx.contains_key(i))
        .collect();
    let extra: Vec<&str> = predictions
        .iter()
        .map(|p| p.idx.as_str())
        .filter(|i| !gold_idx.contains(i))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Validation(format!(
            "prediction/gold idx mismatch; missing predictions: {missing:?}; unknown idx: {extra:?}"
        )));
    }
    let mut per_thread = Vec::with_capacity(gold.len());
    for t in gold.iter() {
        let answer = t.categories.as_deref().unwrap_or_default();
        let r = recall_at_k(&by_idx[t.idx.as_str()].categories, answer, k)
            .map_err(|e| Error::Validation(format!("thread {:?}: {e}", t.idx)))?;
        per_thread.push((t.idx.clone(), r));
    }
    let n = per_thread.len();
    let mean = if n == 0 {
        0.0
    } else {
        compensated_sum(per_thread.iter().map(|(_, r)| r.value())) / n as f64
    };
    Ok(EvalResult {
        per_thread,
        mean,
        n_threads: n,
    })
}

pub fn mean_recall_at_6(predictions: &[Prediction], gold: &ThreadSet) -> Result<EvalResult> {
    mean_recall_at_k(predictions, gold, K)
}

pub fn submission_jsonl(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

pub fn write_submission(path: &Path, predictions: &[Prediction]) -> Result<()> {
    write_file(path, submission_jsonl(predictions))
}

pub fn read_submission(path: &Path) -> Result<Vec<Prediction>> {
    let content = read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
