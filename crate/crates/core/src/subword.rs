//! Byte-level BPE encoding and tokenizer coverage statistics.
//!
//! Encoding follows the GPT-2 scheme: text is split by the GPT-2
//! pre-tokenization pattern, each piece's UTF-8 bytes are mapped through a
//! fixed byte-to-printable-character table, and ranked merges are applied
//! until no adjacent pair has a rank. There is no unknown token, so decoding
//! always reproduces the input bytes.
//!
//! A whitespace-delimited word is *covered* when `" " + word` encodes to a
//! single token, i.e. the vocabulary holds the word whole in its mid-sentence
//! form.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use fancy_regex::Regex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Field, Split, ThreadSet};
use crate::error::{read_to_string, Error, Result};
use crate::normalize::{normalize_steps, RuleSet, Step};

pub type TokenId = u32;

const PRETOKENIZE: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

fn pretokenizer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(PRETOKENIZE).expect("pre-tokenization pattern compiles"))
}

/// Splits text into the pieces BPE runs on independently.
pub fn pretokenize(text: &str) -> Vec<&str> {
    // The pattern matches every character class, so pieces tile the input.
    pretokenizer()
        .find_iter(text)
        .map(|m| {
            m.expect("pre-tokenization does not backtrack deeply")
                .as_str()
        })
        .collect()
}

/// The standard byte-level table: printable Latin-1 bytes map to
/// themselves, the remaining 68 bytes to U+0100 onwards.
pub fn byte_to_char_table() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let printable = |b: u32| {
            (0x21..=0x7E).contains(&b) || (0xA1..=0xAC).contains(&b) || (0xAE..=0xFF).contains(&b)
        };
        let mut table = ['\0'; 256];
        let mut next = 0u32;
        for b in 0..256u32 {
            table[b as usize] = if printable(b) {
                char::from_u32(b).expect("latin-1")
            } else {
                let c = char::from_u32(256 + next).expect("valid code point");
                next += 1;
                c
            };
        }
        table
    })
}

fn char_to_byte_table() -> &'static HashMap<char, u8> {
    static TABLE: OnceLock<HashMap<char, u8>> = OnceLock::new();
    TABLE.get_or_init(|| {
        byte_to_char_table()
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect()
    })
}

/// Byte-level BPE vocabulary and ranked merges.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    tokens: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(TokenId, TokenId), (usize, TokenId)>,
    byte_ids: [TokenId; 256],
}

impl SubwordVocab {
    /// Validates a token map and a rank-ordered merge list.
    pub fn new(
        token_to_id: HashMap<String, TokenId>,
        merges: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut tokens = vec![None; token_to_id.len()];
        for (tok, &id) in &token_to_id {
            let slot = tokens.get_mut(id as usize).ok_or_else(|| {
                Error::Vocab(format!(
                    "ids are not dense: token {tok:?} has id {id} but the vocabulary has {} entries",
                    token_to_id.len()
                ))
            })?;
            if slot.replace(tok.clone()).is_some() {
                return Err(Error::Vocab(format!("id {id} is assigned twice")));
            }
        }
        let tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.expect("every slot filled once ids are unique and in range"))
            .collect();

        let mut byte_ids = [0; 256];
        for (b, c) in byte_to_char_table().iter().enumerate() {
            byte_ids[b] = *token_to_id.get(&c.to_string()).ok_or_else(|| {
                Error::Vocab(format!(
                    "byte 0x{b:02x} ({c:?}) is missing from the vocabulary"
                ))
            })?;
        }

        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (a, b)) in merges.iter().enumerate() {
            let lookup = |t: &str| token_to_id.get(t).copied();
            let merged = format!("{a}{b}");
            let (Some(ia), Some(ib), Some(im)) = (lookup(a), lookup(b), lookup(&merged)) else {
                return Err(Error::Vocab(format!(
                    "dangling merge {a:?} {b:?}: {merged:?} or one of its parts is not in the vocabulary"
                )));
            };
            merge_ranks.entry((ia, ib)).or_insert((rank, im));
        }

        Ok(SubwordVocab {
            tokens,
            token_to_id,
            merges,
            merge_ranks,
            byte_ids,
        })
    }

    /// 256 single-byte tokens (id = byte value) and no merges.
    pub fn byte_level() -> Self {
        let map = byte_to_char_table()
            .iter()
            .enumerate()
            .map(|(b, c)| (c.to_string(), b as TokenId))
            .collect();
        SubwordVocab::new(map, Vec::new()).expect("byte-level vocabulary is valid")
    }

    /// The 500-token vocabulary bundled with the crate, trained on
    /// `data/sample_corpus.txt`.
    pub fn bundled_mini() -> Self {
        SubwordVocab::parse(
            include_str!("../data/mini_vocab.json"),
            include_str!("../data/mini_merges.txt"),
        )
        .expect("bundled vocabulary is valid")
    }

    /// Parses a JSON `token -> id` object and a merges listing.
    pub fn parse(vocab_json: &str, merges_txt: &str) -> Result<Self> {
        let token_to_id: HashMap<String, TokenId> = serde_json::from_str(vocab_json)
            .map_err(|e| Error::Vocab(format!("vocabulary JSON: {e}")))?;
        let merges = parse_merges(merges_txt)?;
        SubwordVocab::new(token_to_id, merges)
    }

    pub fn load(vocab_path: &Path, merges_path: &Path) -> Result<Self> {
        SubwordVocab::parse(&read_to_string(vocab_path)?, &read_to_string(merges_path)?)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    /// Encodes one pre-tokenized piece.
    fn encode_piece(&self, piece: &str, out: &mut Vec<TokenId>) {
        let mut ids: Vec<TokenId> = piece.bytes().map(|b| self.byte_ids[b as usize]).collect();
        while ids.len() > 1 {
            let best = ids
                .windows(2)
                .filter_map(|w| {
                    self.merge_ranks
                        .get(&(w[0], w[1]))
                        .map(|&(rank, m)| (rank, w[0], w[1], m))
                })
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, a, b, merged)) = best else { break };
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == a && ids[i + 1] == b {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            ids = next;
        }
        out.extend(ids);
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for piece in pretokenize(text) {
            self.encode_piece(piece, &mut out);
        }
        out
    }

    /// Token strings (in byte-level alphabet) for `text`.
    pub fn encode_tokens(&self, text: &str) -> Vec<&str> {
        self.encode(text)
            .into_iter()
            .map(|id| self.tokens[id as usize].as_str())
            .collect()
    }

    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let table = char_to_byte_table();
        let mut bytes = Vec::new();
        for &id in ids {
            let tok = self
                .token(id)
                .ok_or_else(|| Error::Vocab(format!("unknown token id {id}")))?;
            for c in tok.chars() {
                bytes.push(*table.get(&c).ok_or_else(|| {
                    Error::Vocab(format!(
                        "token {tok:?} contains {c:?}, outside the byte alphabet"
                    ))
                })?);
            }
        }
        Ok(bytes)
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        String::from_utf8(self.decode_bytes(ids)?)
            .map_err(|e| Error::Vocab(format!("decoded bytes are not UTF-8: {e}")))
    }

    /// Whether `word` is a single token in its mid-sentence form.
    pub fn covers(&self, word: &str) -> bool {
        self.encode(&format!(" {word}")).len() == 1
    }
}

/// Parses a merges listing: one `left right` pair per line in rank order.
/// A leading `#version` line and blank lines are skipped.
pub fn parse_merges(content: &str) -> Result<Vec<(String, String)>> {
    let mut merges = Vec::new();
    for (n, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (n == 0 && line.starts_with("#version")) {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                merges.push((a.to_owned(), b.to_owned()));
            }
            _ => {
                return Err(Error::Vocab(format!(
                    "merges line {}: expected two space-separated tokens, got {line:?}",
                    n + 1
                )))
            }
        }
    }
    Ok(merges)
}

/// Coverage of one field of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStat {
    pub field: Field,
    pub split: Split,
    pub covered_words: u64,
    pub total_words: u64,
    /// `covered / total * 100`; 100 when there are no words.
    pub percentage: f64,
    /// Set when `total_words == 0`.
    pub empty: bool,
}

impl CoverageStat {
    fn new(field: Field, split: Split, covered_words: u64, total_words: u64) -> Self {
        let empty = total_words == 0;
        let percentage = if empty {
            100.0
        } else {
            covered_words as f64 / total_words as f64 * 100.0
        };
        CoverageStat {
            field,
            split,
            covered_words,
            total_words,
            percentage,
            empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovEntry {
    pub word: String,
    pub count: u64,
}

impl fmt::Display for OovEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.word, self.count)
    }
}

/// Word occurrences per distinct word, with their coverage.
fn word_counts(ts: &ThreadSet, field: Field, vocab: &SubwordVocab) -> Vec<(String, u64, bool)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in ts.iter() {
        for w in t.field(field).split_whitespace() {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, u64)> = counts.into_iter().collect();
    words.sort_unstable();
    words
        .into_par_iter()
        .map(|(w, n)| (w.to_owned(), n, vocab.covers(w)))
        .collect()
}

pub fn coverage(ts: &ThreadSet, field: Field, vocab: &SubwordVocab) -> CoverageStat {
    let (covered, total) = word_counts(ts, field, vocab)
        .iter()
        .fold((0, 0), |(c, t), (_, n, ok)| {
            (c + if *ok { *n } else { 0 }, t + n)
        });
    CoverageStat::new(field, ts.split(), covered, total)
}

/// Uncovered words by descending count, ties by word; at most `top_n`.
pub fn oov_report(
    ts: &ThreadSet,
    field: Field,
    vocab: &SubwordVocab,
    top_n: usize,
) -> Vec<OovEntry> {
    let mut oov: Vec<OovEntry> = word_counts(ts, field, vocab)
        .into_iter()
        .filter(|(_, _, ok)| !ok)
        .map(|(word, count, _)| OovEntry { word, count })
        .collect();
    oov.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    oov.truncate(top_n);
    oov
}

/// One row of a coverage-by-normalization-step table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    /// Number of normalization steps applied (0 = raw text).
    pub steps: usize,
    pub stat: CoverageStat,
}

/// Coverage of every field of every set after each prefix of the
/// normalization pipeline (steps 0 through 5).
pub fn coverage_by_step(
    sets: &[&ThreadSet],
    vocab: &SubwordVocab,
    rules: &RuleSet,
) -> Vec<CoverageRow> {
    let mut rows = Vec::new();
    for steps in 0..=Step::ALL.len() {
        for ts in sets {
            let normalized = ts.map_fields(|s| normalize_steps(s, rules, steps).0);
            for field in Field::ALL {
                rows.push(CoverageRow {
                    steps,
                    stat: coverage(&normalized, field, vocab),
                });
            }
        }
    }
    rows
}

/// CSV with header `steps,split,field,covered_words,total_words,percentage`.
pub fn coverage_csv(rows: &[CoverageRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "steps",
        "split",
        "field",
        "covered_words",
        "total_words",
        "percentage",
    ])?;
    for r in rows {
        w.write_record([
            r.steps.to_string(),
            r.stat.split.to_string(),
            r.stat.field.to_string(),
            r.stat.covered_words.to_string(),
            r.stat.total_words.to_string(),
            format!("{:.3}", r.stat.percentage),
        ])?;
    }
    crate::error::finish_csv(w)
}

/// CSV with header `word,count`.
pub fn oov_csv(entries: &[OovEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "count"])?;
    for e in entries {
        w.write_record([e.word.as_str(), &e.count.to_string()])?;
    }
    crate::error::finish_csv(w)
}
