//! Thread files, the category label space and dataset statistics.
//!
//! Thread files are UTF-8 JSON, either one object per line or a single array
//! of objects. Each object carries `idx`, `text`, `reply` and, for the gold
//! training split, `categories` (1 to 6 names). An `mp4` key is kept
//! verbatim and otherwise ignored. Output is always JSON-lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, write_file, Error, Result};

/// Largest number of gold categories a thread may carry.
pub const MAX_CATEGORIES: usize = 6;

/// One two-turn thread: an original tweet and its reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub idx: String,
    pub text: String,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mp4: Option<String>,
}

impl Thread {
    pub fn new(idx: impl Into<String>, text: impl Into<String>, reply: impl Into<String>) -> Self {
        Thread {
            idx: idx.into(),
            text: text.into(),
            reply: reply.into(),
            categories: None,
            mp4: None,
        }
    }

    pub fn with_categories<I, S>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories = Some(categories.into_iter().map(Into::into).collect());
        self
    }

    pub fn field(&self, field: Field) -> &str {
        match field {
            Field::Text => &self.text,
            Field::Reply => &self.reply,
        }
    }

    fn check_categories(&self) -> Result<()> {
        let Some(cats) = &self.categories else {
            return Ok(());
        };
        if cats.is_empty() || cats.len() > MAX_CATEGORIES {
            return Err(Error::Validation(format!(
                "thread {:?}: expected 1 to {MAX_CATEGORIES} categories, found {}",
                self.idx,
                cats.len()
            )));
        }
        let mut seen = HashSet::with_capacity(cats.len());
        for c in cats {
            if !seen.insert(c.as_str()) {
                return Err(Error::Validation(format!(
                    "thread {:?}: duplicate category {c:?}",
                    self.idx
                )));
            }
        }
        Ok(())
    }
}

/// Which side of a thread a per-field operation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Text,
    Reply,
}

impl Field {
    pub const ALL: [Field; 2] = [Field::Text, Field::Reply];
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Text => "text",
            Field::Reply => "reply",
        })
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Field::Text),
            "reply" => Ok(Field::Reply),
            other => Err(Error::Config(format!(
                "unknown field {other:?} (expected text|reply)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split {other:?} (expected train|dev|test)"
            ))),
        }
    }
}

/// An ordered, idx-unique collection of threads from one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadSet {
    threads: Vec<Thread>,
    split: Split,
    labeled: bool,
}

impl ThreadSet {
    /// Validates idx uniqueness and category arity.
    ///
    /// `labeled` is true when every thread carries categories; an empty set
    /// takes the value of `expect_labeled`.
    pub fn new(threads: Vec<Thread>, split: Split, expect_labeled: bool) -> Result<Self> {
        let mut seen = HashSet::with_capacity(threads.len());
        for t in &threads {
            if !seen.insert(t.idx.as_str()) {
                return Err(Error::DuplicateIdx(t.idx.clone()));
            }
            t.check_categories()?;
            if expect_labeled && t.categories.is_none() {
                return Err(Error::Validation(format!(
                    "thread {:?} has no categories but a labeled file was expected",
                    t.idx
                )));
            }
        }
        let labeled = if threads.is_empty() {
            expect_labeled
        } else {
            threads.iter().all(|t| t.categories.is_some())
        };
        Ok(ThreadSet {
            threads,
            split,
            labeled,
        })
    }

    pub fn threads(&self) -> &[Thread] {
        &self.threads
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Thread> {
        self.threads.iter()
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labeled(&self) -> bool {
        self.labeled
    }

    pub fn idx_list(&self) -> Vec<String> {
        self.threads.iter().map(|t| t.idx.clone()).collect()
    }

    pub fn into_threads(self) -> Vec<Thread> {
        self.threads
    }

    /// Checks that every gold category is a member of `labels`.
    pub fn validate_against(&self, labels: &LabelSpace) -> Result<()> {
        for t in &self.threads {
            for c in t.categories.iter().flatten() {
                if labels.index_of(c).is_none() {
                    return Err(Error::UnknownCategory {
                        idx: t.idx.clone(),
                        category: c.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies `f` to every text and reply, keeping everything else.
    pub fn map_fields<F>(&self, mut f: F) -> ThreadSet
    where
        F: FnMut(&str) -> String,
    {
        let threads = self
            .threads
            .iter()
            .map(|t| Thread {
                text: f(&t.text),
                reply: f(&t.reply),
                ..t.clone()
            })
            .collect();
        ThreadSet {
            threads,
            split: self.split,
            labeled: self.labeled,
        }
    }

    pub fn require_labeled(&self, what: &str) -> Result<()> {
        if self.labeled {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "{what} requires a labeled thread set"
            )))
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.threads {
            out.push_str(&serde_json::to_string(t).expect("thread serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_jsonl())
    }
}

/// Reads a thread file, auto-detecting JSON-lines versus a JSON array.
pub fn load_threads(path: &Path, split: Split, expect_labeled: bool) -> Result<ThreadSet> {
    let content = read_to_string(path)?;
    let threads = parse_threads(&content, path)?;
    ThreadSet::new(threads, split, expect_labeled)
}

/// Parses thread records from a string; `origin` is only used in error messages.
pub fn parse_threads(content: &str, origin: &Path) -> Result<Vec<Thread>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let trimmed = content.trim_start();
    if trimmed.starts_with('[') {
        let values: Vec<Value> =
            serde_json::from_str(content).map_err(|e| parse_err(e.line(), e.to_string()))?;
        // serde_json does not report per-element lines once parsed; fall back
        // to the element position.
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                thread_from_value(v).map_err(|m| parse_err(i + 1, format!("record {}: {m}", i + 1)))
            })
            .collect()
    } else {
        let mut threads = Vec::new();
        for (lineno, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: Value =
                serde_json::from_str(line).map_err(|e| parse_err(lineno + 1, e.to_string()))?;
            threads.push(thread_from_value(value).map_err(|m| parse_err(lineno + 1, m))?);
        }
        Ok(threads)
    }
}

fn thread_from_value(value: Value) -> std::result::Result<Thread, String> {
    let Value::Object(mut obj) = value else {
        return Err("expected a JSON object".into());
    };
    let idx = match obj.remove("idx") {
        Some(Value::String(s)) => s,
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => return Err(format!("idx must be a string or number, got {other}")),
        None => return Err("missing key \"idx\"".into()),
    };
    let mut string_field = |key: &str| match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(format!("{key} must be a string, got {other}")),
        None => Err(format!("missing key {key:?}")),
    };
    let text = string_field("text")?;
    let reply = string_field("reply")?;
    let categories = match obj.remove("categories") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s),
                    other => Err(format!("category must be a string, got {other}")),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        Some(other) => return Err(format!("categories must be an array, got {other}")),
    };
    let mp4 = match obj.remove("mp4") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(other) => Some(other.to_string()),
    };
    Ok(Thread {
        idx,
        text,
        reply,
        categories,
        mp4,
    })
}

/// The ordered list of category names with its reverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("invalid category name {n:?}")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate category {n:?} in label space"
                )));
            }
        }
        Ok(LabelSpace { names, index })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// Short content hash of the ordered names; models record it so that
    /// predictions are never made against a reordered label space.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for n in &self.names {
            hasher.update(n.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Multi-hot target vector for a thread's gold categories.
    pub fn encode(&self, thread: &Thread) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.len()];
        for c in thread.categories.iter().flatten() {
            let i = self.index_of(c).ok_or_else(|| Error::UnknownCategory {
                idx: thread.idx.clone(),
                category: c.clone(),
            })?;
            y[i] = 1.0;
        }
        Ok(y)
    }

    pub fn to_sidecar(&self) -> String {
        let mut s = String::new();
        for n in &self.names {
            s.push_str(n);
            s.push('\n');
        }
        s
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_sidecar())
    }

    pub fn read_sidecar(path: &Path) -> Result<Self> {
        let content = read_to_string(path)?;
        let names = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        LabelSpace::new(names)
    }
}

/// Sorted union of all categories in a labeled training set.
pub fn build_label_space(train: &ThreadSet) -> Result<LabelSpace> {
    train.require_labeled("building a label space")?;
    let names: BTreeSet<&str> = train
        .iter()
        .flat_map(|t| t.categories.iter().flatten())
        .map(String::as_str)
        .collect();
    if names.is_empty() {
        return Err(Error::Validation(
            "no categories observed in training data".into(),
        ));
    }
    LabelSpace::new(names.into_iter().map(str::to_owned).collect())
}

fn category_indices<'a>(
    t: &'a Thread,
    labels: &'a LabelSpace,
) -> impl Iterator<Item = Result<usize>> + 'a {
    t.categories.iter().flatten().map(move |c| {
        labels.index_of(c).ok_or_else(|| Error::UnknownCategory {
            idx: t.idx.clone(),
            category: c.clone(),
        })
    })
}

/// Number of threads carrying each category, in label-space order.
pub fn category_distribution(ts: &ThreadSet, labels: &LabelSpace) -> Result<Vec<u64>> {
    ts.require_labeled("category distribution")?;
    let mut counts = vec![0u64; labels.len()];
    for t in ts.iter() {
        for i in category_indices(t, labels) {
            counts[i?] += 1;
        }
    }
    Ok(counts)
}

/// Co-appearance counts between categories; the diagonal holds plain
/// occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    size: usize,
    counts: Vec<u64>,
}

impl CooccurrenceTable {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.size..(i + 1) * self.size]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Square CSV with a header row and a leading name column.
    pub fn to_csv(&self, labels: &LabelSpace) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(labels.names().iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.size {
            let mut rec = vec![labels.name(i).to_owned()];
            rec.extend(self.row(i).iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        crate::error::finish_csv(w)
    }
}

pub fn cooccurrence(ts: &ThreadSet, labels: &LabelSpace) -> Result<CooccurrenceTable> {
    ts.require_labeled("co-occurrence")?;
    let size = labels.len();
    let mut counts = vec![0u64; size * size];
    for t in ts.iter() {
        let idxs = category_indices(t, labels).collect::<Result<Vec<_>>>()?;
        for &i in &idxs {
            for &j in &idxs {
                counts[i * size + j] += 1;
            }
        }
    }
    Ok(CooccurrenceTable { size, counts })
}

/// `category,count` CSV for a distribution vector.
pub fn distribution_csv(counts: &[u64], labels: &LabelSpace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category", "count"])?;
    for (name, c) in labels.names().iter().zip(counts) {
        w.write_record([name.as_str(), &c.to_string()])?;
    }
    crate::error::finish_csv(w)
}

/// Reads a `category,count` CSV back into label-space order. Categories
/// missing from the file count as zero.
pub fn read_distribution_csv(path: &Path, labels: &LabelSpace) -> Result<Vec<u64>> {
    let content = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(content.as_bytes());
    let mut counts = vec![0u64; labels.len()];
    for rec in r.records() {
        let rec = rec?;
        let (Some(name), Some(count)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Validation(format!(
                "{}: expected category,count rows",
                path.display()
            )));
        };
        if let Some(i) = labels.index_of(name) {
            counts[i] = count.trim().parse().map_err(|_| {
                Error::Validation(format!(
                    "{}: bad count {count:?} for {name}",
                    path.display()
                ))
            })?;
        }
    }
    Ok(counts)
}
