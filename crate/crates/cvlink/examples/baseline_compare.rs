//! Compares two ways of sending a number through a light field. The
//! classical route encodes it as a pulse intensity and counts photons: the
//! per-pulse spread grows as the square root of the value, so big messages
//! are noisy messages. The angular encoding reads an integer label whose
//! single-shot spread does not grow with the label at all — on the
//! continuous branch it is exactly zero, and even on the cut branch it
//! plateaus instead of growing.
//!
//! Usage: `cargo run --example baseline_compare`

use cvlink::observables::{self, SpectrumOptions};
use cvlink::protocols;
use cvlink::states::{self, Branch};
use cvlink::Grid1D;

fn sample_stats(samples: &[i32]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n;
    let var = samples.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("classical intensity route (Poisson counting, 10000 pulses):");
    println!("  value    estimate    per-pulse spread   sqrt(value)");
    for &value in &[4.0, 25.0, 100.0] {
        let rep = protocols::shot_noise_baseline(value, 10_000, 0x0815_2026)?;
        println!(
            "  {value:<6}  {:<9.4}   {:<16.4}   {:.4}",
            rep.estimate,
            rep.delta_lambda,
            value.sqrt()
        );
    }

    println!("\nangular label route (10000 single-shot readouts per state):");
    println!("  branch   label   readout mean   readout spread");
    let grid = Grid1D::new(512, 8.0)?;
    let opts = SpectrumOptions { n_theta: 512, residual_tol: 0.05 };
    for branch in [Branch::Polar, Branch::Arctan] {
        for (j, &lambda) in [1.0, 3.0, 5.0].iter().enumerate() {
            let psi = states::eigenstate(grid, lambda, 1.0, branch)?;
            let spec = observables::angular_spectrum(&psi, &opts)?;
            let samples =
                observables::sample_spectrum(&spec, 10_000, 0x0816_2026 + j as u64, 0)?;
            let (mean, sd) = sample_stats(&samples);
            println!("  {branch:?}\t   {lambda}      {mean:<9.4}      {sd:.4}");
        }
    }

    println!(
        "\nThe intensity spread climbs with the message; the label spread does \
         not. On the continuous branch every readout lands exactly on the \
         label; the cut branch pays a constant (label-independent) comb of \
         neighboring bins for odd labels."
    );
    Ok(())
}
