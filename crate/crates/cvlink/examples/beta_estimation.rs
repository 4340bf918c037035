//! Runs the estimation protocol in reverse: instead of reading a label out
//! of a state, a known two-node probe state reads the frame phase beta out
//! of the channel. The probe interferes its two ladder nodes; the fringe
//! position is beta times the node separation, so a wider ladder buys
//! proportionally more precision per sample — the scaling this example
//! measures.
//!
//! Usage: `cargo run --example beta_estimation`

use num_complex::Complex64 as C64;

use cvlink::protocols;
use cvlink::states::{LambdaState, Structure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta_true = 0.3;
    let n_samples = 10_000;
    let seed = 0x0707_2026;
    let w = C64::new(1.0, 0.0);

    println!("true beta = {beta_true}, {n_samples} samples per probe\n");
    println!("probe nodes    estimate      stderr     window (+- pi/spacing)");
    let mut errs = Vec::new();
    for &half in &[1.0, 2.0, 4.0] {
        let probe =
            LambdaState::new(vec![-half, half], vec![w, w], Structure::Single)?;
        let window = std::f64::consts::PI / probe.spacing();
        let (beta_hat, stderr) = protocols::estimate_beta(&probe, beta_true, n_samples, seed)?;
        println!(
            "  +-{half}         {beta_hat:.5}      {stderr:.5}    {window:.4}"
        );
        errs.push((half, stderr));
    }

    println!("\nprecision scaling (stderr ratio vs node-separation ratio):");
    for pair in errs.windows(2) {
        let (h0, s0) = pair[0];
        let (h1, s1) = pair[1];
        println!(
            "  nodes +-{h0} -> +-{h1}: stderr shrank by {:.4} (separation grew by {:.1})",
            s1 / s0,
            h1 / h0
        );
    }

    println!(
        "\nDoubling the node separation halves the standard error — the fringe \
         frequency is the separation, so information grows with its square. \
         The price is a smaller unambiguous window: the estimate is only \
         identifiable modulo 2 pi / separation."
    );
    Ok(())
}
