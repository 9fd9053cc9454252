//! The logit form of binary cross-entropy next to the textbook one. The
//! textbook form breaks down once exp saturates.
//!
//!     cargo run --example stable_bce

use emogif::model::{bce_gradient, bce_with_logits_elem, sigmoid, LossConfig};

fn textbook(z: f64, y: f64) -> f64 {
    let p = sigmoid(z);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn main() {
    println!(
        "{:>8} {:>3} {:>24} {:>24}",
        "z", "y", "logit form", "textbook"
    );
    for z in [-1e4, -40.0, -20.0, -2.0, 0.0, 2.0, 20.0, 40.0, 1e4] {
        for y in [0.0, 1.0] {
            println!(
                "{z:>8} {y:>3} {:>24.17e} {:>24.17e}",
                bce_with_logits_elem(z, y),
                textbook(z, y)
            );
        }
    }
    let g = bce_gradient(&[-3.0, 0.0, 3.0], &[1.0, 0.0, 1.0], &LossConfig::uniform()).unwrap();
    println!("\ngradient of the mean loss at z = (-3, 0, 3), y = (1, 0, 1): {g:?}");
}
