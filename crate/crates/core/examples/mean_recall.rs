//! Mean Recall at 6 on a hand-made example.
//!
//!     cargo run --example mean_recall

use emogif::data::{Split, Thread, ThreadSet};
use emogif::metrics::{mean_recall_at_6, recall_at_k, Prediction};

fn main() -> emogif::Result<()> {
    let answer = ["agree", "thank_you", "thumbs_up"];
    let predicted = [
        "oops",
        "scared",
        "thank_you",
        "you_got_this",
        "do_not_want",
        "agree",
    ];
    let r = recall_at_k(&predicted, &answer, 6)?;
    println!(
        "answer {answer:?}\npredicted {predicted:?}\nrecall@6 = {r} = {:.4}",
        r.value()
    );

    let gold = ThreadSet::new(
        vec![
            Thread::new("1", "", "").with_categories(answer),
            Thread::new("2", "", "").with_categories(["hug"]),
        ],
        Split::Dev,
        true,
    )?;
    let preds = vec![
        Prediction {
            idx: "1".into(),
            categories: predicted.iter().map(|s| s.to_string()).collect(),
        },
        Prediction {
            idx: "2".into(),
            categories: ["hug", "yes", "no", "ok", "omg", "win"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        },
    ];
    let result = mean_recall_at_6(&preds, &gold)?;
    print!("{}", result.per_thread_csv()?);
    println!("MR@6 {:.4}", result.mean);
    Ok(())
}
