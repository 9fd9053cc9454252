use emogif::data::{
    build_label_space, category_distribution, cooccurrence, load_threads, parse_threads,
    LabelSpace, Split, Thread, ThreadSet,
};
use proptest::prelude::*;

const NAMES: [&str; 8] = ["agree", "hug", "oops", "sigh", "win", "yes", "no", "wink"];

fn labeled_set() -> impl Strategy<Value = ThreadSet> {
    proptest::collection::vec(proptest::sample::subsequence(NAMES.to_vec(), 1..=6), 1..40).prop_map(
        |rows| {
            let threads = rows
                .into_iter()
                .enumerate()
                .map(|(i, cats)| Thread::new(i.to_string(), "t", "r").with_categories(cats))
                .collect();
            ThreadSet::new(threads, Split::Train, true).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn cooccurrence_is_symmetric(ts in labeled_set()) {
        let labels = build_label_space(&ts).unwrap();
        let table = cooccurrence(&ts, &labels).unwrap();
        prop_assert!(table.is_symmetric());
        let dist = category_distribution(&ts, &labels).unwrap();
        for (i, d) in dist.iter().enumerate() {
            prop_assert_eq!(table.get(i, i), *d);
        }
    }

    #[test]
    fn distribution_sums_to_label_count(ts in labeled_set()) {
        let labels = build_label_space(&ts).unwrap();
        let total: u64 = category_distribution(&ts, &labels).unwrap().iter().sum();
        let expected: usize = ts.iter().map(|t| t.categories.as_ref().unwrap().len()).sum();
        prop_assert_eq!(total, expected as u64);
    }
}

#[test]
fn label_space_is_sorted_and_fingerprinted() {
    let ts = ThreadSet::new(
        vec![
            Thread::new("1", "", "").with_categories(["yes", "agree"]),
            Thread::new("2", "", "").with_categories(["hug"]),
        ],
        Split::Train,
        true,
    )
    .unwrap();
    let labels = build_label_space(&ts).unwrap();
    assert_eq!(labels.names(), ["agree", "hug", "yes"]);
    let reordered = LabelSpace::new(vec!["hug".into(), "agree".into(), "yes".into()]).unwrap();
    assert_ne!(labels.fingerprint(), reordered.fingerprint());
}

#[test]
fn json_array_and_lines_load_alike() {
    let lines = "{\"idx\": 1, \"text\": \"a\", \"reply\": \"b\", \"categories\": [\"yes\"]}\n\
                 {\"idx\": 2, \"text\": \"c\", \"reply\": \"d\", \"categories\": [\"no\"], \"mp4\": \"x.mp4\"}\n";
    let array = format!("[{}]", lines.trim().replace('\n', ","));
    let origin = std::path::Path::new("mem");
    let a = parse_threads(lines, origin).unwrap();
    let b = parse_threads(&array, origin).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].idx, "1");
}

#[test]
fn duplicate_idx_and_bad_labels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.jsonl");
    std::fs::write(&p, "{\"idx\": 1, \"text\": \"\", \"reply\": \"\"}\n{\"idx\": 1, \"text\": \"\", \"reply\": \"\"}\n")
        .unwrap();
    assert!(load_threads(&p, Split::Test, false).is_err());
    std::fs::write(
        &p,
        "{\"idx\": 1, \"text\": \"\", \"reply\": \"\", \"categories\": [\"a\",\"b\",\"c\",\"d\",\"e\",\"f\",\"g\"]}\n",
    )
    .unwrap();
    assert!(load_threads(&p, Split::Train, true).is_err());
    std::fs::write(&p, "{\"idx\": 1, \"text\": \"\"\n").unwrap();
    let err = load_threads(&p, Split::Train, false)
        .unwrap_err()
        .to_string();
    assert!(err.contains(":1:"), "{err}");
}
