//! Per-thread, per-category score matrices and their CSV form.
//!
//! The CSV header is `idx,<category 1>,...,<category C>` in label-space
//! order. Scores are written in scientific notation with 17 significant
//! digits, so a matrix survives a write/read cycle bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabelSpace, ThreadSet};
use crate::error::{read_to_string, write_file, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Entries in [0, 1].
    Probability,
    /// Power-weighted sums; entries in [0, sum of weights].
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    idx: Vec<String>,
    categories: Vec<String>,
    scores: Vec<f64>,
    kind: ScoreKind,
}

impl PredictionMatrix {
    pub fn new(
        idx: Vec<String>,
        categories: Vec<String>,
        scores: Vec<f64>,
        kind: ScoreKind,
    ) -> Result<Self> {
        if scores.len() != idx.len() * categories.len() {
            return Err(Error::Shape(format!(
                "{} scores for {} rows x {} categories",
                scores.len(),
                idx.len(),
                categories.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::NonFinite(format!(
                "score {s} is not a finite non-negative number"
            )));
        }
        if kind == ScoreKind::Probability {
            if let Some(s) = scores.iter().find(|s| **s > 1.0) {
                return Err(Error::Validation(format!("probability {s} exceeds 1")));
            }
        }
        Ok(PredictionMatrix {
            idx,
            categories,
            scores,
            kind,
        })
    }

    pub fn idx(&self) -> &[String] {
        &self.idx
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn n_rows(&self) -> usize {
        self.idx.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.categories.len();
        &self.scores[i * c..(i + 1) * c]
    }

    pub fn get(&self, row: usize, category: usize) -> f64 {
        self.scores[row * self.categories.len() + category]
    }

    /// Errors unless `other` has the same idx order and categories.
    pub fn check_aligned(&self, other: &PredictionMatrix) -> Result<()> {
        if self.categories != other.categories {
            return Err(Error::Shape(
                "score matrices use different category lists".into(),
            ));
        }
        if self.idx != other.idx {
            let first = self
                .idx
                .iter()
                .zip(&other.idx)
                .position(|(a, b)| a != b)
                .unwrap_or(self.idx.len().min(other.idx.len()));
            return Err(Error::Shape(format!(
                "score matrices disagree on thread order at row {first} ({} vs {} rows)",
                self.idx.len(),
                other.idx.len()
            )));
        }
        Ok(())
    }

    /// Errors unless rows follow `ts` exactly and categories follow `labels`.
    pub fn check_matches(&self, ts: &ThreadSet, labels: &LabelSpace) -> Result<()> {
        if self.categories != labels.names() {
            return Err(Error::Shape(
                "score categories differ from the label space".into(),
            ));
        }
        if self.idx.len() != ts.len() || self.idx.iter().zip(ts.iter()).any(|(a, t)| *a != t.idx) {
            return Err(Error::Shape(
                "score rows do not follow the thread set order".into(),
            ));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = Vec::with_capacity(self.categories.len() + 1);
        header.push("idx".to_owned());
        header.extend(self.categories.iter().cloned());
        w.write_record(&header)?;
        for (i, idx) in self.idx.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(idx.clone());
            rec.extend(self.row(i).iter().map(|s| format!("{s:.16e}")));
            w.write_record(&rec)?;
        }
        crate::error::finish_csv(w)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv()?)
    }

    pub fn parse_csv(content: &str, kind: ScoreKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(content.as_bytes());
        let header = r.headers()?.clone();
        if header.get(0) != Some("idx") {
            return Err(Error::Validation(
                "scores CSV must start with an idx column".into(),
            ));
        }
        let categories: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut idx = Vec::new();
        let mut scores = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            idx.push(rec.get(0).unwrap_or_default().to_owned());
            for field in rec.iter().skip(1) {
                scores.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::Validation(format!("scores CSV row {}: bad number {field:?}", n + 2))
                })?);
            }
        }
        PredictionMatrix::new(idx, categories, scores, kind)
    }

    pub fn read_csv(path: &Path, kind: ScoreKind) -> Result<Self> {
        PredictionMatrix::parse_csv(&read_to_string(path)?, kind)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = PredictionMatrix::new(
            names(&["1", "2"]),
            names(&["agree", "yes"]),
            vec![0.1, 1.0 / 3.0, 1e-300, 0.999_999_999_999_9],
            ScoreKind::Probability,
        )
        .unwrap();
        let csv = m.to_csv().unwrap();
        assert!(csv.starts_with("idx,agree,yes\n"));
        let back = PredictionMatrix::parse_csv(&csv, ScoreKind::Probability).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        let err = PredictionMatrix::new(
            names(&["1"]),
            names(&["a"]),
            vec![1.5],
            ScoreKind::Probability,
        );
        assert!(err.is_err());
        assert!(
            PredictionMatrix::new(names(&["1"]), names(&["a"]), vec![1.5], ScoreKind::Fused)
                .is_ok()
        );
        assert!(PredictionMatrix::new(
            names(&["1"]),
            names(&["a"]),
            vec![f64::NAN],
            ScoreKind::Fused
        )
        .is_err());
        assert!(
            PredictionMatrix::new(names(&["1"]), names(&["a"]), vec![], ScoreKind::Fused).is_err()
        );
    }

    #[test]
    fn alignment() {
        let a = PredictionMatrix::new(
            names(&["1", "2"]),
            names(&["a"]),
            vec![0.1, 0.2],
            ScoreKind::Probability,
        )
        .unwrap();
        let b = PredictionMatrix::new(
            names(&["2", "1"]),
            names(&["a"]),
            vec![0.1, 0.2],
            ScoreKind::Probability,
        )
        .unwrap();
        assert!(a.check_aligned(&a).is_ok());
        assert!(a.check_aligned(&b).is_err());
    }
}
