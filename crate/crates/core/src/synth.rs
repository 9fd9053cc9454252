//! Seeded synthetic thread sets with a known sparse linear labeling rule.
//!
//! Words are pronounceable pseudo-words. Every word carries weight for a few
//! categories; a thread's category logits are a category bias (giving a
//! skewed label prior) plus the weights of its words. The gold set is drawn
//! by perturbing the logits with Gumbel noise and keeping the top 1 to 6,
//! which samples categories without replacement in proportion to
//! `exp(logit)`.

use rand::distr::{Distribution, Uniform};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabelSpace, Split, Thread, ThreadSet};
use crate::error::{Error, Result};

/// The 43 reaction categories, used as label names.
pub const CATEGORY_NAMES: [&str; 43] = [
    "agree",
    "applause",
    "awww",
    "dance",
    "deal_with_it",
    "do_not_want",
    "eww",
    "eye_roll",
    "facepalm",
    "fist_bump",
    "good_luck",
    "happy_dance",
    "hearts",
    "high_five",
    "hug",
    "idk",
    "kiss",
    "mic_drop",
    "no",
    "oh_snap",
    "ok",
    "omg",
    "oops",
    "please",
    "popcorn",
    "scared",
    "seriously",
    "shocked",
    "shrug",
    "sigh",
    "slow_clap",
    "smh",
    "sorry",
    "thank_you",
    "thumbs_down",
    "thumbs_up",
    "want",
    "win",
    "wink",
    "yawn",
    "yes",
    "yolo",
    "you_got_this",
];

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Label-count distribution: most threads carry one or two categories.
const LABEL_COUNT_WEIGHTS: [f64; 6] = [0.45, 0.25, 0.12, 0.08, 0.06, 0.04];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub n_categories: usize,
    pub n_words: usize,
    /// Categories each word is tied to.
    pub cues_per_word: usize,
    /// Scale of the word-category weights.
    pub signal: f64,
    /// Zipf exponent of the category prior.
    pub prior_skew: f64,
    pub text_words: (usize, usize),
    pub reply_words: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 2000,
            n_dev: 500,
            n_test: 0,
            n_categories: 43,
            n_words: 600,
            cues_per_word: 2,
            signal: 2.0,
            prior_skew: 1.0,
            text_words: (6, 16),
            reply_words: (2, 8),
            seed: 0,
        }
    }
}

/// Ground truth plus generated splits. Test threads are unlabeled.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub labels: LabelSpace,
    pub words: Vec<String>,
    /// `n_words x n_categories`, row-major.
    pub word_weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub train: ThreadSet,
    pub dev: ThreadSet,
    pub test: ThreadSet,
}

fn pseudo_word(mut i: usize) -> String {
    let mut w = String::new();
    loop {
        w.push_str(ONSETS[i % ONSETS.len()]);
        i /= ONSETS.len();
        w.push_str(NUCLEI[i % NUCLEI.len()]);
        i /= NUCLEI.len();
        if i == 0 {
            break;
        }
        i -= 1;
    }
    w
}

fn gumbel(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    -(-u.ln()).ln()
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    words: &'a [String],
    word_weights: &'a [f64],
    bias: &'a [f64],
    word_cdf: Vec<f64>,
    count_cdf: Vec<f64>,
}

fn cdf(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    out.iter_mut().for_each(|v| *v /= acc);
    out
}

fn sample_cdf(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

impl Generator<'_> {
    fn side(&self, range: (usize, usize), logits: &mut [f64], rng: &mut impl Rng) -> String {
        let n = rng.random_range(range.0..=range.1);
        let c = logits.len();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let w = sample_cdf(&self.word_cdf, rng);
            for (l, ww) in logits
                .iter_mut()
                .zip(&self.word_weights[w * c..(w + 1) * c])
            {
                *l += ww;
            }
            out.push(self.words[w].as_str());
        }
        out.join(" ")
    }

    fn thread(&self, idx: usize, names: &[String], labeled: bool, rng: &mut impl Rng) -> Thread {
        let mut logits = self.bias.to_vec();
        let text = self.side(self.cfg.text_words, &mut logits, rng);
        let reply = self.side(self.cfg.reply_words, &mut logits, rng);
        let k = sample_cdf(&self.count_cdf, rng) + 1;
        let mut noisy: Vec<(f64, usize)> = logits
            .iter()
            .enumerate()
            .map(|(i, l)| (l + gumbel(rng), i))
            .collect();
        noisy.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let t = Thread::new(idx.to_string(), text, reply);
        if labeled {
            t.with_categories(noisy[..k].iter().map(|&(_, i)| names[i].clone()))
        } else {
            t
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.n_categories == 0 || cfg.n_categories > CATEGORY_NAMES.len() {
        return Err(Error::Config(format!(
            "n_categories must be in 1..={}, got {}",
            CATEGORY_NAMES.len(),
            cfg.n_categories
        )));
    }
    if cfg.n_categories < LABEL_COUNT_WEIGHTS.len() {
        return Err(Error::Config("need at least 6 categories".into()));
    }
    if cfg.n_words == 0 || cfg.cues_per_word == 0 || cfg.cues_per_word > cfg.n_categories {
        return Err(Error::Config(
            "n_words and cues_per_word must be positive".into(),
        ));
    }
    if cfg.text_words.0 > cfg.text_words.1 || cfg.reply_words.0 > cfg.reply_words.1 {
        return Err(Error::Config(
            "word ranges must be (min, max) with min <= max".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.n_categories;
    let mut names: Vec<String> = CATEGORY_NAMES[..c].iter().map(|s| s.to_string()).collect();
    names.sort();

    // Category prior: Zipf over a random permutation of the names.
    let mut rank: Vec<usize> = (0..c).collect();
    for i in (1..c).rev() {
        rank.swap(i, rng.random_range(0..=i));
    }
    let bias: Vec<f64> = rank
        .iter()
        .map(|&r| -cfg.prior_skew * ((r + 1) as f64).ln())
        .collect();

    let words: Vec<String> = (0..cfg.n_words).map(pseudo_word).collect();
    let cats: Vec<usize> = (0..c).collect();
    let scale = Uniform::new_inclusive(0.5, 1.0).expect("valid range");
    let mut word_weights = vec![0.0; cfg.n_words * c];
    for w in 0..cfg.n_words {
        for &k in cats.choose_multiple(&mut rng, cfg.cues_per_word) {
            word_weights[w * c + k] = cfg.signal * scale.sample(&mut rng);
        }
    }

    let gen = Generator {
        cfg,
        words: &words,
        word_weights: &word_weights,
        bias: &bias,
        word_cdf: cdf((0..cfg.n_words).map(|i| 1.0 / (i + 1) as f64)),
        count_cdf: cdf(LABEL_COUNT_WEIGHTS.iter().copied()),
    };
    let mut next_idx = 1;
    let mut split = |n: usize, split: Split, labeled: bool, rng: &mut ChaCha8Rng| {
        let threads = (0..n)
            .map(|i| gen.thread(next_idx + i, &names, labeled, rng))
            .collect();
        next_idx += n;
        ThreadSet::new(threads, split, labeled)
    };
    let train = split(cfg.n_train, Split::Train, true, &mut rng)?;
    let dev = split(cfg.n_dev, Split::Dev, true, &mut rng)?;
    let test = split(cfg.n_test, Split::Test, false, &mut rng)?;
    Ok(SynthData {
        labels: LabelSpace::new(names)?,
        words,
        word_weights,
        bias,
        train,
        dev,
        test,
    })
}
