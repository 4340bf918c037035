//! Sweeps the label/width grid and reads the encoded label back through
//! both independent methods: the operator route (spectral derivatives) and
//! the angular-spectrum route (ring decomposition). Prints one table row
//! per cell and flags where the two conventions part ways: the
//! principal-arctan branch carries a genuine sign-flip cut across q2 = 0,
//! which biases the readout of odd labels.
//!
//! Usage: `cargo run --example eigenvalue_sweep`

use cvlink::observables::{self, SpectrumOptions};
use cvlink::states::{self, Branch};
use cvlink::Grid1D;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid1D::new(512, 8.0)?;
    let opts = SpectrumOptions { residual_tol: 0.05, ..SpectrumOptions::default() };
    println!("branch   lambda    a     <L> operator   <L> spectrum   spread");
    for branch in [Branch::Polar, Branch::Arctan] {
        for &lambda in &[0.0, 1.0, 2.0, 3.0, 5.0] {
            for &a in &[0.5, 1.0, 2.0] {
                let psi = states::eigenstate(grid, lambda, a, branch)?;
                let op = observables::angular_moments(&psi)?;
                let spec = observables::angular_spectrum(&psi, &opts)?;
                let marker = if branch == Branch::Arctan && (lambda as i64) % 2 != 0 {
                    "  <- cut bias"
                } else {
                    ""
                };
                println!(
                    "{branch:?}\t{lambda}\t{a}\t{:+.6}\t{:+.6}\t{:.4}{marker}",
                    op.mean,
                    spec.mean(),
                    op.variance.sqrt()
                );
            }
        }
    }
    println!(
        "\nThe continuous-angle branch reads every integer label exactly; the \
         principal-arctan branch reads even labels exactly and spreads odd ones \
         into a comb around the label."
    );
    Ok(())
}
