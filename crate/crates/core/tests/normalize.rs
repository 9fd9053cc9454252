mod common;

use emogif::normalize::{normalize, normalize_steps, squeeze_whitespace, RuleSet, Step};
use emogif::subword::SubwordVocab;
use proptest::prelude::*;

fn rules() -> &'static RuleSet {
    static RULES: std::sync::OnceLock<RuleSet> = std::sync::OnceLock::new();
    RULES.get_or_init(RuleSet::bundled)
}

/// Pieces the fuzzer stitches together: rule keys of every step, their
/// neighbours and plain text.
fn fragment() -> impl Strategy<Value = String> {
    let keys: Vec<String> = Step::ALL
        .iter()
        .flat_map(|s| {
            rules()
                .map(*s)
                .entries()
                .iter()
                .map(|(k, _)| k.clone())
                .take(40)
        })
        .collect();
    prop_oneof![
        proptest::sample::select(keys),
        "[a-zA-Z]{1,6}",
        Just(" ".to_owned()),
        Just("  ".to_owned()),
        Just("'".to_owned()),
        Just("’".to_owned()),
        Just("🔥".to_owned()),
        Just("👍🏽".to_owned()),
        "\\PC{1,3}",
    ]
}

fn fuzzed_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(fragment(), 0..12).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent(s in fuzzed_text()) {
        let once = normalize(&s, rules()).0;
        let twice = normalize(&once, rules()).0;
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn normalization_is_deterministic(s in fuzzed_text()) {
        prop_assert_eq!(normalize(&s, rules()), normalize(&s, rules()));
    }

    #[test]
    fn output_is_squeezed(s in fuzzed_text()) {
        let out = normalize(&s, rules()).0;
        prop_assert_eq!(squeeze_whitespace(&out), out);
    }
}

fn is_rule_word(w: &str) -> bool {
    let lower = w.to_lowercase();
    [Step::Contractions, Step::Slang].iter().any(|s| {
        rules()
            .map(*s)
            .entries()
            .iter()
            .any(|(k, _)| k.to_lowercase() == lower)
    })
}

proptest! {
    #[test]
    fn untouched_words_keep_their_case(words in proptest::collection::vec("[a-zA-Z]{1,8}", 1..10)) {
        let words: Vec<String> = words.into_iter().filter(|w| !is_rule_word(w)).collect();
        let text = words.join(" ");
        prop_assert_eq!(normalize(&text, rules()).0, text);
    }
}

#[test]
fn composed_example() {
    let (out, report) = normalize("hasn’t 🔥🔥 idk", rules());
    assert_eq!(out, "has not :fire: I don't know");
    assert_eq!(report.replacements, [1, 1, 0, 1, 1]);
}

#[test]
fn step_prefixes() {
    let text = "hasn’t 🔥🔥 idk";
    let expected = [
        "hasn’t 🔥🔥 idk",
        "hasn't 🔥🔥 idk",
        "has not 🔥🔥 idk",
        "has not 🔥🔥 idk",
        "has not :fire: idk",
        "has not :fire: I don't know",
    ];
    for (k, e) in expected.iter().enumerate() {
        assert_eq!(normalize_steps(text, rules(), k).0, *e, "after {k} steps");
    }
}

#[test]
fn case_is_never_folded() {
    assert_eq!(normalize("Hug hug HUG", rules()).0, "Hug hug HUG");
    let vocab = SubwordVocab::load(
        &common::fixture("hug_vocab.json"),
        &common::fixture("hug_merges.txt"),
    )
    .unwrap();
    let out = normalize("Hug", rules()).0;
    assert!(vocab.covers(&out));
    assert!(!vocab.covers(&out.to_lowercase()));
}

#[test]
fn contraction_keeps_leading_capital() {
    assert_eq!(
        normalize("It’s fine, You're late", rules()).0,
        "It is fine, You are late"
    );
}

#[test]
fn only_runs_of_one_emoji_collapse() {
    assert_eq!(normalize("🔥🔥 ok 🔥", rules()).0, ":fire: ok :fire:");
    assert_eq!(
        normalize("🔥😂🔥", rules()).0,
        ":fire::face_with_tears_of_joy::fire:"
    );
}

/// Leftmost-longest, non-overlapping occurrences of any key.
fn naive_substring_count(text: &str, keys: &[String]) -> usize {
    let mut count = 0;
    let mut i = 0;
    while i < text.len() {
        let best = keys
            .iter()
            .filter(|k| text[i..].starts_with(k.as_str()))
            .map(|k| k.len())
            .max();
        match best {
            Some(len) => {
                count += 1;
                i += len;
            }
            None => i += text[i..].chars().next().unwrap().len_utf8(),
        }
    }
    count
}

proptest! {
    #[test]
    fn punctuation_count_matches_rescan(s in fuzzed_text()) {
        let keys: Vec<String> = rules().map(Step::Punctuation).entries().iter().map(|(k, _)| k.clone()).collect();
        let report = normalize_steps(&s, rules(), 1).1;
        prop_assert_eq!(report.count(Step::Punctuation), naive_substring_count(&s, &keys));
    }
}
