//! Hashed subword n-gram features for a (text, reply) pair.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Thread;
use crate::error::{Error, Result};
use crate::subword::{SubwordVocab, TokenId};

/// Subword ids kept per side before featurization.
pub const MAX_SEQ_LEN: usize = 113;

/// The three ensemble members. Each family fixes its n-gram orders, hash
/// seed and casing so that the families make different errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::A, Family::B, Family::C];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            "C" | "c" => Ok(Family::C),
            other => Err(Error::Config(format!(
                "unknown family {other:?} (expected A|B|C)"
            ))),
        }
    }
}

/// How text and reply share the feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLayout {
    /// Text and reply hash into separate namespaces, the analogue of
    /// `[BOS] text [SEP] reply [SEP]` segment positions.
    Namespaced,
    /// Both sides share one namespace.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub family: Family,
    /// Hash space size; a power of two.
    pub dim: usize,
    /// Subset of {1, 2}.
    pub ngram_orders: Vec<usize>,
    pub hash_seed: u64,
    pub pair_layout: PairLayout,
    /// Lower-case text before encoding (the "uncased" family).
    pub lowercase: bool,
    pub max_seq_len: usize,
}

pub const DEFAULT_DIM: usize = 1 << 18;

impl FeatureConfig {
    pub fn for_family(family: Family) -> Self {
        let (ngram_orders, hash_seed, lowercase) = match family {
            Family::A => (vec![1, 2], 0x9E37_79B9_7F4A_7C15, false),
            Family::B => (vec![1], 0xC2B2_AE3D_27D4_EB4F, false),
            Family::C => (vec![1, 2], 0x1656_67B1_9E37_79F9, true),
        };
        FeatureConfig {
            family,
            dim: DEFAULT_DIM,
            ngram_orders,
            hash_seed,
            pair_layout: PairLayout::Namespaced,
            lowercase,
            max_seq_len: MAX_SEQ_LEN,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || !self.dim.is_power_of_two() || self.dim > u32::MAX as usize {
            return Err(Error::Config(format!(
                "feature dim must be a power of two >= 2, got {}",
                self.dim
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|o| !(1..=2).contains(o)) {
            return Err(Error::Config(format!(
                "ngram_orders must be a non-empty subset of {{1, 2}}, got {:?}",
                self.ngram_orders
            )));
        }
        if self.max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be positive".into()));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free sparse vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    fn from_unsorted(mut raw: Vec<u32>) -> Self {
        raw.sort_unstable();
        let mut indices = Vec::with_capacity(raw.len());
        let mut values: Vec<f64> = Vec::with_capacity(raw.len());
        for i in raw {
            if indices.last() == Some(&i) {
                *values.last_mut().expect("parallel vectors") += 1.0;
            } else {
                indices.push(i);
                values.push(1.0);
            }
        }
        SparseVector { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .map(|&i| i as usize)
            .zip(self.values.iter().copied())
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a short sequence of words.
pub(crate) fn hash_words(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix(seed), |h, &w| {
        mix(h ^ mix(w.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    })
}

fn side_ids(text: &str, vocab: &SubwordVocab, cfg: &FeatureConfig) -> Vec<TokenId> {
    let mut ids = if cfg.lowercase {
        vocab.encode(&text.to_lowercase())
    } else {
        vocab.encode(text)
    };
    ids.truncate(cfg.max_seq_len);
    ids
}

/// Count features for a thread.
pub fn featurize(thread: &Thread, vocab: &SubwordVocab, cfg: &FeatureConfig) -> SparseVector {
    let mask = (cfg.dim - 1) as u64;
    let mut raw = Vec::new();
    for (side, text) in [(0u64, &thread.text), (1u64, &thread.reply)] {
        let namespace = match cfg.pair_layout {
            PairLayout::Namespaced => side,
            PairLayout::Shared => 0,
        };
        let ids = side_ids(text, vocab, cfg);
        for &order in &cfg.ngram_orders {
            for gram in ids.windows(order) {
                let mut key = Vec::with_capacity(order + 2);
                key.push(namespace);
                key.push(order as u64);
                key.extend(gram.iter().map(|&id| u64::from(id)));
                raw.push((hash_words(cfg.hash_seed, &key) & mask) as u32);
            }
        }
    }
    SparseVector::from_unsorted(raw)
}
