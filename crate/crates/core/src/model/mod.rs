//! Multi-label linear classifier over hashed subword features.
//!
//! Each category has an independent sigmoid output. Training minimizes the
//! mean binary cross-entropy on logits with Adam over shuffled mini-batches.
//! Everything is seeded, so identical inputs give bit-identical weights.

mod adam;
mod features;
mod loss;

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState, TrainConfig, TRANSFORMER_LEARNING_RATE};
pub use features::{
    featurize, Family, FeatureConfig, PairLayout, SparseVector, DEFAULT_DIM, MAX_SEQ_LEN,
};
pub use loss::{bce_gradient, bce_with_logits, bce_with_logits_elem, sigmoid, LossConfig};

use crate::data::{LabelSpace, ThreadSet};
use crate::error::{Error, Result};
use crate::scores::{PredictionMatrix, ScoreKind};
use crate::subword::SubwordVocab;

const MODEL_MAGIC: &[u8; 8] = b"EMOGIFM1";
const MODEL_VERSION: u32 = 1;

/// Weights (`classes x dim`, row-major), biases and the settings needed to
/// featurize new threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: FeatureConfig,
    categories: Vec<String>,
    label_fingerprint: String,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    config: FeatureConfig,
    categories: Vec<String>,
    label_fingerprint: String,
}

impl ModelParams {
    /// All-zero parameters: every score is 0.5.
    pub fn zeros(config: FeatureConfig, labels: &LabelSpace) -> Result<Self> {
        config.validate()?;
        let c = labels.len();
        Ok(ModelParams {
            weights: vec![0.0; c * config.dim],
            bias: vec![0.0; c],
            categories: labels.names().to_vec(),
            label_fingerprint: labels.fingerprint(),
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn label_fingerprint(&self) -> &str {
        &self.label_fingerprint
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        let dim = self.config.dim;
        (0..self.n_classes())
            .map(|c| {
                let row = &self.weights[c * dim..(c + 1) * dim];
                self.bias[c] + x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|w| w.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&ModelHeader {
            version: MODEL_VERSION,
            config: self.config.clone(),
            categories: self.categories.clone(),
            label_fingerprint: self.label_fingerprint.clone(),
        })?;
        let mut buf =
            Vec::with_capacity(16 + header.len() + 8 * (self.weights.len() + self.bias.len()));
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        for w in self.weights.iter().chain(&self.bias) {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::Validation(format!("{}: {m}", path.display()));
        if buf.len() < 16 || &buf[..8] != MODEL_MAGIC {
            return Err(bad("not a model file"));
        }
        let hlen = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
        let body_start = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= buf.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: ModelHeader = serde_json::from_slice(&buf[16..body_start])?;
        if header.version != MODEL_VERSION {
            return Err(bad(&format!(
                "unsupported model version {}",
                header.version
            )));
        }
        header.config.validate()?;
        let c = header.categories.len();
        let n = c * header.config.dim + c;
        let body = &buf[body_start..];
        if body.len() != 8 * n {
            return Err(bad(&format!(
                "expected {n} parameters, found {} bytes",
                body.len()
            )));
        }
        let mut values: Vec<f64> = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let bias = values.split_off(c * header.config.dim);
        let model = ModelParams {
            config: header.config,
            categories: header.categories,
            label_fingerprint: header.label_fingerprint,
            weights: values,
            bias,
        };
        if !model.is_finite() {
            return Err(bad("non-finite parameters"));
        }
        Ok(model)
    }
}

/// Parameters plus the full-training-set loss after each epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub epoch_losses: Vec<f64>,
}

fn featurize_all(ts: &ThreadSet, vocab: &SubwordVocab, cfg: &FeatureConfig) -> Vec<SparseVector> {
    ts.threads()
        .par_iter()
        .map(|t| featurize(t, vocab, cfg))
        .collect()
}

fn mean_loss(model: &ModelParams, feats: &[SparseVector], targets: &[Vec<f64>]) -> Result<f64> {
    let lc = LossConfig::uniform();
    let total: f64 = feats
        .iter()
        .zip(targets)
        .map(|(x, y)| bce_with_logits(&model.logits(x), y, &lc))
        .sum::<Result<f64>>()?;
    Ok(total / feats.len() as f64)
}

pub fn train(
    train_set: &ThreadSet,
    labels: &LabelSpace,
    vocab: &SubwordVocab,
    fc: &FeatureConfig,
    tc: &TrainConfig,
) -> Result<ModelParams> {
    train_with_history(train_set, labels, vocab, fc, tc).map(|o| o.model)
}

pub fn train_with_history(
    train_set: &ThreadSet,
    labels: &LabelSpace,
    vocab: &SubwordVocab,
    fc: &FeatureConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    fc.validate()?;
    tc.validate()?;
    train_set.require_labeled("training")?;
    if train_set.is_empty() {
        return Err(Error::Validation(
            "cannot train on an empty thread set".into(),
        ));
    }
    if labels.is_empty() {
        return Err(Error::Validation(
            "cannot train with an empty label space".into(),
        ));
    }
    let feats = featurize_all(train_set, vocab, fc);
    let targets = train_set
        .iter()
        .map(|t| labels.encode(t))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut model = ModelParams::zeros(fc.clone(), labels)?;
    if tc.init_scale > 0.0 {
        for w in &mut model.weights {
            *w = rng.random_range(-tc.init_scale..=tc.init_scale);
        }
    }

    let classes = labels.len();
    let dim = fc.dim;
    let n = feats.len();
    let steps_per_epoch = n.div_ceil(tc.batch_size);
    let total_steps = steps_per_epoch * tc.epochs;
    let mut w_state = AdamState::new(model.weights.len());
    let mut b_state = AdamState::new(classes);
    let mut grad_w = vec![0.0; model.weights.len()];
    let mut grad_b = vec![0.0; classes];
    let lc = LossConfig::uniform();

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    let mut step = 0;
    for _ in 0..tc.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(tc.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &feats[i];
                let g = bce_gradient(&model.logits(x), &targets[i], &lc)?;
                for (c, gc) in g.iter().enumerate() {
                    let gc = gc * scale;
                    grad_b[c] += gc;
                    let row = &mut grad_w[c * dim..(c + 1) * dim];
                    for (j, v) in x.iter() {
                        row[j] += gc * v;
                    }
                }
            }
            step += 1;
            let lr = tc.learning_rate_at(step, total_steps);
            adam_step(&mut model.weights, &grad_w, &mut w_state, tc, lr)?;
            adam_step(&mut model.bias, &grad_b, &mut b_state, tc, lr)?;
            for &i in batch {
                for c in 0..classes {
                    let row = &mut grad_w[c * dim..(c + 1) * dim];
                    for &j in &feats[i].indices {
                        row[j as usize] = 0.0;
                    }
                }
            }
        }
        epoch_losses.push(mean_loss(&model, &feats, &targets)?);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Sigmoid scores for every thread, rows in thread-set order.
pub fn predict_scores(
    model: &ModelParams,
    ts: &ThreadSet,
    vocab: &SubwordVocab,
    labels: &LabelSpace,
) -> Result<PredictionMatrix> {
    let found = labels.fingerprint();
    if found != model.label_fingerprint {
        return Err(Error::LabelSpaceMismatch {
            expected: model.label_fingerprint.clone(),
            found,
        });
    }
    let rows: Vec<Vec<f64>> = ts
        .threads()
        .par_iter()
        .map(|t| {
            model
                .logits(&featurize(t, vocab, &model.config))
                .into_iter()
                .map(sigmoid)
                .collect()
        })
        .collect();
    PredictionMatrix::new(
        ts.idx_list(),
        model.categories.clone(),
        rows.concat(),
        ScoreKind::Probability,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Split, Thread};

    fn tiny_set() -> (ThreadSet, LabelSpace) {
        let rows = [
            ("1", "thank you so much", "you got this", vec!["thank_you"]),
            (
                "2",
                "the game was amazing",
                "what a win",
                vec!["win", "yes"],
            ),
            ("3", "I am so tired", "go to sleep", vec!["sigh"]),
            (
                "4",
                "thank you for the party",
                "so much fun",
                vec!["thank_you", "yes"],
            ),
        ];
        let threads = rows
            .into_iter()
            .map(|(i, t, r, c)| Thread::new(i, t, r).with_categories(c))
            .collect();
        let ts = ThreadSet::new(threads, Split::Train, true).unwrap();
        let ls = crate::data::build_label_space(&ts).unwrap();
        (ts, ls)
    }

    fn small_cfg() -> FeatureConfig {
        FeatureConfig::for_family(Family::A).with_dim(1 << 10)
    }

    #[test]
    fn zero_model_predicts_one_half() {
        let (ts, ls) = tiny_set();
        let m = ModelParams::zeros(small_cfg(), &ls).unwrap();
        let p = predict_scores(&m, &ts, &SubwordVocab::bundled_mini(), &ls).unwrap();
        assert!(p.scores().iter().all(|&s| s == 0.5));
        assert_eq!(p.idx(), ts.idx_list().as_slice());
    }

    #[test]
    fn training_is_reproducible_and_seed_sensitive() {
        let (ts, ls) = tiny_set();
        let v = SubwordVocab::bundled_mini();
        let tc = TrainConfig {
            seed: 3,
            ..Default::default()
        };
        let a = train(&ts, &ls, &v, &small_cfg(), &tc).unwrap();
        let b = train(&ts, &ls, &v, &small_cfg(), &tc).unwrap();
        assert_eq!(a, b);
        let c = train(&ts, &ls, &v, &small_cfg(), &TrainConfig { seed: 4, ..tc }).unwrap();
        assert_ne!(a, c);
        assert!(a.is_finite());
    }

    #[test]
    fn empty_or_unlabeled_training_set() {
        let (_, ls) = tiny_set();
        let v = SubwordVocab::bundled_mini();
        let empty = ThreadSet::new(vec![], Split::Train, true).unwrap();
        assert!(train(&empty, &ls, &v, &small_cfg(), &TrainConfig::default()).is_err());
        let unlabeled =
            ThreadSet::new(vec![Thread::new("1", "a", "b")], Split::Dev, false).unwrap();
        assert!(train(&unlabeled, &ls, &v, &small_cfg(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let (ts, ls) = tiny_set();
        let m = ModelParams::zeros(small_cfg(), &ls).unwrap();
        let mut names = ls.names().to_vec();
        names.reverse();
        let other = LabelSpace::new(names).unwrap();
        let err = predict_scores(&m, &ts, &SubwordVocab::bundled_mini(), &other).unwrap_err();
        assert!(matches!(err, Error::LabelSpaceMismatch { .. }));
    }

    #[test]
    fn save_load_round_trip() {
        let (ts, ls) = tiny_set();
        let v = SubwordVocab::bundled_mini();
        let m = train(&ts, &ls, &v, &small_cfg(), &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        assert_eq!(ModelParams::load(&p).unwrap(), m);
        std::fs::write(&p, b"garbage").unwrap();
        assert!(ModelParams::load(&p).is_err());
    }
}
