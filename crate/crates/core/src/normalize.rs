//! Five-step tweet normalization driven by editable rule tables.
//!
//! Steps run in a fixed order:
//!
//! 1. odd punctuation (curly quotes, dashes) to ASCII,
//! 2. contraction expansion (`hasn't` -> `has not`),
//! 3. symbols the tokenizer does not know to words (`β` -> `beta`),
//! 4. emoji to `:name:`, keeping one emoji per run of identical emoji,
//! 5. tweet slang and trend words to common words (`idk` -> `I don't know`).
//!
//! Case is never folded. Whitespace is squeezed and trimmed once, after the
//! last step.
//!
//! Steps 1, 3 and 4 match substrings (leftmost, longest key first). Steps 2
//! and 5 match whole words only. A word character is alphanumeric or `_`,
//! except characters that appear in step-3 keys and non-ASCII characters of
//! step-4 keys (letter-like symbols such as 🅰). Those are boundaries, so the
//! rewrites of steps 3 and 4 never create a word that was not already one.
//!
//! A [`RuleSet`] rejects tables in which a replacement contains a key of its
//! own step or of an earlier step. Together with the fixed order this makes
//! [`normalize`] idempotent on the bundled tables.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::AddAssign;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// The five normalization steps, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Punctuation,
    Contractions,
    Symbols,
    Emoji,
    Slang,
}

impl Step {
    pub const ALL: [Step; 5] = [
        Step::Punctuation,
        Step::Contractions,
        Step::Symbols,
        Step::Emoji,
        Step::Slang,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn whole_word(self) -> bool {
        matches!(self, Step::Contractions | Step::Slang)
    }

    fn bundled_table(self) -> &'static str {
        match self {
            Step::Punctuation => include_str!("../data/rules/punctuation.tsv"),
            Step::Contractions => include_str!("../data/rules/contractions.tsv"),
            Step::Symbols => include_str!("../data/rules/symbols.tsv"),
            Step::Emoji => include_str!("../data/rules/emoji.tsv"),
            Step::Slang => include_str!("../data/rules/slang.tsv"),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step::Punctuation => "punctuation",
            Step::Contractions => "contractions",
            Step::Symbols => "symbols",
            Step::Emoji => "emoji",
            Step::Slang => "slang",
        })
    }
}

/// One ordered `source -> target` table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleMap {
    entries: Vec<(String, String)>,
}

impl RuleMap {
    pub fn new(entries: Vec<(String, String)>) -> Self {
        RuleMap { entries }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses a two-column TSV table. `#` starts a comment line. Both columns
    /// accept the escapes `\s` (space), `\t`, `\n`, `\\` and `\u{HEX}`.
    pub fn parse_tsv(content: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Rules {
            path: origin.to_owned(),
            line,
            message,
        };
        let mut entries = Vec::new();
        for (n, raw) in content.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(src), Some(dst), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(err(
                    n + 1,
                    "expected exactly two tab-separated columns".into(),
                ));
            };
            let src = unescape(src).map_err(|m| err(n + 1, m))?;
            let dst = unescape(dst).map_err(|m| err(n + 1, m))?;
            if src.is_empty() {
                return Err(err(n + 1, "empty source".into()));
            }
            entries.push((src, dst));
        }
        Ok(RuleMap { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        RuleMap::parse_tsv(&read_to_string(path)?, &path.display().to_string())
    }
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some('u') => {
                if chars.next() != Some('{') {
                    return Err(format!("bad \\u escape in {s:?}"));
                }
                let hex: String = chars.by_ref().take_while(|&c| c != '}').collect();
                let cp = u32::from_str_radix(&hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| format!("bad code point {hex:?}"))?;
                out.push(cp);
            }
            other => {
                return Err(format!(
                    "unknown escape \\{} in {s:?}",
                    other.unwrap_or(' ')
                ))
            }
        }
    }
    Ok(out)
}

/// Paths overriding individual bundled tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulePaths {
    pub punctuation: Option<PathBuf>,
    pub contractions: Option<PathBuf>,
    pub symbols: Option<PathBuf>,
    pub emoji: Option<PathBuf>,
    pub slang: Option<PathBuf>,
}

impl RulePaths {
    fn get(&self, step: Step) -> Option<&Path> {
        match step {
            Step::Punctuation => self.punctuation.as_deref(),
            Step::Contractions => self.contractions.as_deref(),
            Step::Symbols => self.symbols.as_deref(),
            Step::Emoji => self.emoji.as_deref(),
            Step::Slang => self.slang.as_deref(),
        }
    }
}

/// Leftmost-longest lookup over one table.
#[derive(Debug, Clone)]
struct Matcher {
    step: Step,
    lookup: HashMap<String, usize>,
    targets: Vec<String>,
    first_chars: HashSet<char>,
    max_chars: usize,
}

impl Matcher {
    fn new(step: Step, map: &RuleMap) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(map.len());
        let mut targets = Vec::with_capacity(map.len());
        let mut first_chars = HashSet::new();
        let mut max_chars = 0;
        for (src, dst) in map.entries() {
            let key = if step == Step::Slang {
                src.to_lowercase()
            } else {
                src.clone()
            };
            if lookup.insert(key.clone(), targets.len()).is_some() {
                return Err(Error::Validation(format!(
                    "{step} table: duplicate key {src:?}"
                )));
            }
            targets.push(dst.clone());
            let first = key.chars().next().expect("keys are non-empty");
            first_chars.insert(first);
            if step == Step::Contractions {
                first_chars.extend(first.to_uppercase());
            }
            if step == Step::Slang {
                first_chars.extend(first.to_uppercase());
            }
            max_chars = max_chars.max(key.chars().count());
        }
        Ok(Matcher {
            step,
            lookup,
            targets,
            first_chars,
            max_chars,
        })
    }

    /// Longest key starting at byte `pos`, as (byte length, entry).
    fn substring_at(&self, text: &str, pos: usize) -> Option<(usize, usize)> {
        let rest = &text[pos..];
        let first = rest.chars().next()?;
        if !self.first_chars.contains(&first) {
            return None;
        }
        let ends: Vec<usize> = rest
            .char_indices()
            .skip(1)
            .map(|(i, _)| i)
            .chain(std::iter::once(rest.len()))
            .take(self.max_chars)
            .collect();
        ends.iter()
            .rev()
            .find_map(|&end| self.lookup.get(&rest[..end]).map(|&e| (end, e)))
    }

    /// Longest whole-word key starting at byte `pos`, as (byte length,
    /// replacement). `pos` must be a word start.
    fn word_at(&self, text: &str, pos: usize, words: &WordChars) -> Option<(usize, String)> {
        let rest = &text[pos..];
        let first = rest.chars().next()?;
        if !words.is_word(first) || !self.first_chars.contains(&first) {
            return None;
        }
        // Candidate ends: positions after a word char followed by a non-word
        // char (or the end of the text).
        let mut ends = Vec::new();
        let mut chars = rest.char_indices().peekable();
        let mut count = 0;
        while let Some((i, c)) = chars.next() {
            count += 1;
            if count > self.max_chars {
                break;
            }
            let end = i + c.len_utf8();
            let next_is_word = chars.peek().is_some_and(|&(_, n)| words.is_word(n));
            if words.is_word(c) && !next_is_word {
                ends.push(end);
            }
        }
        for &end in ends.iter().rev() {
            let candidate = &rest[..end];
            if let Some(rep) = self.replacement(candidate) {
                return Some((end, rep));
            }
        }
        None
    }

    fn replacement(&self, candidate: &str) -> Option<String> {
        match self.step {
            Step::Slang => self
                .lookup
                .get(&candidate.to_lowercase())
                .map(|&e| self.targets[e].clone()),
            Step::Contractions => {
                if let Some(&e) = self.lookup.get(candidate) {
                    return Some(self.targets[e].clone());
                }
                let mut chars = candidate.chars();
                let first = chars.next()?;
                if !first.is_uppercase() {
                    return None;
                }
                let lowered: String = first.to_lowercase().chain(chars).collect();
                self.lookup
                    .get(&lowered)
                    .map(|&e| capitalize_first(&self.targets[e]))
            }
            _ => self.lookup.get(candidate).map(|&e| self.targets[e].clone()),
        }
    }
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(f) => f.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Word-character predicate shared by the whole-word steps.
#[derive(Debug, Clone)]
struct WordChars {
    boundaries: HashSet<char>,
}

impl WordChars {
    fn is_word(&self, c: char) -> bool {
        (c.is_alphanumeric() || c == '_') && !self.boundaries.contains(&c)
    }
}

/// Code points treated as emoji when reporting unmapped symbols.
fn looks_like_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0x1FC00..=0x1FFFD)
}

/// The five validated tables plus their lookup structures.
#[derive(Debug, Clone)]
pub struct RuleSet {
    maps: [RuleMap; 5],
    matchers: [Matcher; 5],
    words: WordChars,
}

impl RuleSet {
    /// Builds and validates a rule set from five tables in step order.
    pub fn new(maps: [RuleMap; 5]) -> Result<Self> {
        let words = WordChars {
            boundaries: maps[Step::Symbols.index()]
                .entries()
                .iter()
                .flat_map(|(k, _)| k.chars())
                .chain(
                    maps[Step::Emoji.index()]
                        .entries()
                        .iter()
                        .flat_map(|(k, _)| k.chars())
                        .filter(|c| !c.is_ascii()),
                )
                .collect(),
        };
        let matchers = [
            Matcher::new(Step::Punctuation, &maps[0])?,
            Matcher::new(Step::Contractions, &maps[1])?,
            Matcher::new(Step::Symbols, &maps[2])?,
            Matcher::new(Step::Emoji, &maps[3])?,
            Matcher::new(Step::Slang, &maps[4])?,
        ];
        let rules = RuleSet {
            maps,
            matchers,
            words,
        };
        rules.validate()?;
        Ok(rules)
    }

    /// The tables shipped with the crate.
    pub fn bundled() -> Self {
        let maps = Step::ALL.map(|s| {
            RuleMap::parse_tsv(s.bundled_table(), &format!("<bundled {s}>"))
                .expect("bundled tables parse")
        });
        RuleSet::new(maps).expect("bundled tables are valid")
    }

    /// Bundled tables, with any table named in `paths` replaced by the file.
    pub fn load(paths: &RulePaths) -> Result<Self> {
        let mut maps: [RuleMap; 5] = Default::default();
        for step in Step::ALL {
            maps[step.index()] = match paths.get(step) {
                Some(p) => RuleMap::load(p)?,
                None => RuleMap::parse_tsv(step.bundled_table(), &format!("<bundled {step}>"))?,
            };
        }
        RuleSet::new(maps)
    }

    pub fn map(&self, step: Step) -> &RuleMap {
        &self.maps[step.index()]
    }

    fn validate(&self) -> Result<()> {
        for step in Step::ALL {
            let m = &self.matchers[step.index()];
            if step.whole_word() {
                for (src, _) in self.map(step).entries() {
                    let first = src.chars().next().expect("non-empty");
                    let last = src.chars().last().expect("non-empty");
                    if src.chars().any(char::is_whitespace)
                        || !self.words.is_word(first)
                        || !self.words.is_word(last)
                    {
                        return Err(Error::Validation(format!(
                            "{step} table: key {src:?} must be a single word starting and ending with a word character"
                        )));
                    }
                }
            }
            for (src, dst) in self.map(step).entries() {
                for earlier in &Step::ALL[..=step.index()] {
                    if let Some(key) = self.contains_key(*earlier, dst) {
                        return Err(Error::Validation(format!(
                            "{step} table: replacement {dst:?} for {src:?} contains {earlier} key {key:?}"
                        )));
                    }
                }
            }
            debug_assert_eq!(m.step, step);
        }
        Ok(())
    }

    /// First key of `step` that would fire on `text`, if any.
    fn contains_key(&self, step: Step, text: &str) -> Option<String> {
        let m = &self.matchers[step.index()];
        for (pos, _) in text.char_indices() {
            if step.whole_word() {
                if self.is_word_start(text, pos) {
                    if let Some((len, _)) = m.word_at(text, pos, &self.words) {
                        return Some(text[pos..pos + len].to_owned());
                    }
                }
            } else if let Some((len, _)) = m.substring_at(text, pos) {
                return Some(text[pos..pos + len].to_owned());
            }
        }
        None
    }

    fn is_word_start(&self, text: &str, pos: usize) -> bool {
        let here = text[pos..]
            .chars()
            .next()
            .is_some_and(|c| self.words.is_word(c));
        let before = text[..pos].chars().next_back();
        here && !before.is_some_and(|c| self.words.is_word(c))
    }

    fn substitute(&self, step: Step, text: &str) -> (String, usize) {
        let m = &self.matchers[step.index()];
        let mut out = String::with_capacity(text.len());
        let mut count = 0;
        let mut pos = 0;
        while pos < text.len() {
            if let Some((len, e)) = m.substring_at(text, pos) {
                let target = &m.targets[e];
                if step == Step::Symbols {
                    if out.chars().next_back().is_some_and(|c| !c.is_whitespace()) {
                        out.push(' ');
                    }
                    out.push_str(target);
                    if text[pos + len..]
                        .chars()
                        .next()
                        .is_some_and(|c| !c.is_whitespace())
                    {
                        out.push(' ');
                    }
                } else {
                    out.push_str(target);
                }
                count += 1;
                pos += len;
            } else {
                let c = text[pos..].chars().next().expect("pos is a char boundary");
                out.push(c);
                pos += c.len_utf8();
            }
        }
        (out, count)
    }

    fn substitute_words(&self, step: Step, text: &str) -> (String, usize) {
        let m = &self.matchers[step.index()];
        let mut out = String::with_capacity(text.len());
        let mut count = 0;
        let mut pos = 0;
        while pos < text.len() {
            if self.is_word_start(text, pos) {
                if let Some((len, rep)) = m.word_at(text, pos, &self.words) {
                    out.push_str(&rep);
                    count += 1;
                    pos += len;
                    continue;
                }
            }
            let c = text[pos..].chars().next().expect("pos is a char boundary");
            out.push(c);
            pos += c.len_utf8();
        }
        (out, count)
    }

    fn demojize_counted(&self, text: &str) -> (String, usize, usize) {
        let m = &self.matchers[Step::Emoji.index()];
        let mut out = String::with_capacity(text.len());
        let mut count = 0;
        let mut unmapped = 0;
        let mut pos = 0;
        while pos < text.len() {
            if let Some((len, e)) = m.substring_at(text, pos) {
                out.push_str(&m.targets[e]);
                count += 1;
                pos += len;
                while let Some((len2, e2)) = m.substring_at(text, pos) {
                    if e2 != e {
                        break;
                    }
                    pos += len2;
                }
            } else {
                let c = text[pos..].chars().next().expect("pos is a char boundary");
                if looks_like_emoji(c) {
                    unmapped += 1;
                }
                out.push(c);
                pos += c.len_utf8();
            }
        }
        (out, count, unmapped)
    }

    fn apply_step(&self, step: Step, text: &str, report: &mut NormalizationReport) -> String {
        let (out, n) = match step {
            Step::Punctuation | Step::Symbols => self.substitute(step, text),
            Step::Contractions | Step::Slang => self.substitute_words(step, text),
            Step::Emoji => {
                let (out, n, unmapped) = self.demojize_counted(text);
                report.unmapped_emoji += unmapped;
                (out, n)
            }
        };
        report.replacements[step.index()] += n;
        out
    }
}

/// Per-step replacement tallies for one or more normalized strings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReport {
    /// Substitutions applied by each step, in step order. A collapsed run of
    /// identical emoji counts once.
    pub replacements: [usize; 5],
    /// Emoji-range code points without a table entry, passed through.
    pub unmapped_emoji: usize,
    pub input_chars: usize,
    pub output_chars: usize,
}

impl NormalizationReport {
    pub fn count(&self, step: Step) -> usize {
        self.replacements[step.index()]
    }

    /// JSON object keyed by step name.
    pub fn to_json(&self) -> serde_json::Value {
        let mut steps = serde_json::Map::new();
        for s in Step::ALL {
            steps.insert(s.to_string(), self.count(s).into());
        }
        serde_json::json!({
            "steps": steps,
            "unmapped_emoji": self.unmapped_emoji,
            "input_chars": self.input_chars,
            "output_chars": self.output_chars,
        })
    }
}

impl AddAssign for NormalizationReport {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.replacements.iter_mut().zip(rhs.replacements) {
            *a += b;
        }
        self.unmapped_emoji += rhs.unmapped_emoji;
        self.input_chars += rhs.input_chars;
        self.output_chars += rhs.output_chars;
    }
}

/// Step 1.
pub fn fix_punctuation(text: &str, rules: &RuleSet) -> String {
    rules.substitute(Step::Punctuation, text).0
}

/// Step 2.
pub fn expand_apostrophes(text: &str, rules: &RuleSet) -> String {
    rules.substitute_words(Step::Contractions, text).0
}

/// Step 3. Replacements are padded with a space on each side that touches
/// non-space text.
pub fn map_unknown_punct(text: &str, rules: &RuleSet) -> String {
    rules.substitute(Step::Symbols, text).0
}

/// Step 4. Unmapped emoji pass through unchanged.
pub fn demojize(text: &str, rules: &RuleSet) -> String {
    rules.demojize_counted(text).0
}

/// Step 5.
pub fn detweetize(text: &str, rules: &RuleSet) -> String {
    rules.substitute_words(Step::Slang, text).0
}

/// Collapses whitespace runs to one space and trims both ends.
pub fn squeeze_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// All five steps in order, then whitespace squeezing.
pub fn normalize(text: &str, rules: &RuleSet) -> (String, NormalizationReport) {
    normalize_steps(text, rules, Step::ALL.len())
}

/// The first `steps` steps (0 to 5), then whitespace squeezing. Used to
/// measure coverage after each prefix of the pipeline.
pub fn normalize_steps(text: &str, rules: &RuleSet, steps: usize) -> (String, NormalizationReport) {
    let mut report = NormalizationReport {
        input_chars: text.chars().count(),
        ..Default::default()
    };
    let mut cur = text.to_owned();
    for step in Step::ALL.iter().take(steps) {
        cur = rules.apply_step(*step, &cur, &mut report);
    }
    let out = squeeze_whitespace(&cur);
    report.output_chars = out.chars().count();
    (out, report)
}
