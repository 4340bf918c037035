//! Rotates the two internal clock phases by the same angle and checks the
//! receiver reads the same label — the invariance that makes the encoding a
//! usable channel between observers whose clocks disagree. Two independent
//! routes carry the check: a round trip through the number basis on the
//! sampled grid, and a direct diagonal rotation of the number-basis
//! coefficients.
//!
//! Usage: `cargo run --example clock_invariance`

use std::f64::consts::PI;

use cvlink::fock;
use cvlink::observables::{self, SpectrumOptions};
use cvlink::states::{self, Branch};
use cvlink::transforms::{self, ClockOptions};
use cvlink::Grid1D;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = PI / 3.0;

    // Route 1: grid states through a 64-level number-basis round trip.
    // Smooth (even-label) states fit the level window on this grid.
    println!("grid route, equal clock angle phi = pi/3:");
    let grid = Grid1D::new(512, 8.0)?;
    let opts = ClockOptions::default();
    // The round trip parks a little weight outside the spectrum's capture
    // ring, so the readout gets a looser residual budget; the bin-by-bin
    // comparison below is the actual claim.
    let loose = SpectrumOptions { residual_tol: 2e-3, ..SpectrumOptions::default() };
    for &lambda in &[0.0, 2.0] {
        let psi = states::eigenstate(grid, lambda, 1.0, Branch::Polar)?;
        let before = observables::angular_spectrum(&psi, &SpectrumOptions::default())?;
        let (rotated, deficit) = transforms::clock_rotation(&psi, [phi, phi], &opts)?;
        let after = observables::angular_spectrum(&rotated, &loose)?;
        let (lo, hi) = after.window();
        let worst_bin = (lo..=hi)
            .map(|m| (after.prob(m) - before.prob(m)).abs())
            .fold(0.0_f64, f64::max);
        println!(
            "  label {lambda}: <L> {:+.6} -> {:+.6}, max |dP(m)| = {worst_bin:.2e}, \
             truncation deficit {deficit:.1e}",
            before.mean(),
            after.mean()
        );
    }

    // Route 2: number-basis coefficients rotated in place. The equal-angle
    // rotation is diagonal — every coefficient picks up exp(-i (n1+n2) phi)
    // — so any occupation-resolved readout is exactly invariant. This route
    // handles the cut-branch labels too, since no grid round trip is needed.
    println!("\nnumber-basis route (wide grid, 64 levels per mode):");
    let wide = Grid1D::new(512, 16.0)?;
    for &lambda in &[0.0, 1.0, 2.0, 3.0] {
        let psi = states::eigenstate(wide, lambda, 1.0, Branch::Polar)?;
        let rep = fock::decompose(&psi, 64)?;
        let rot = rep.rotate_mode(0, phi)?.rotate_mode(1, phi)?;
        let mean_gap = (rot.angular_mean() - rep.angular_mean()).abs();
        let mut worst_coeff = 0.0_f64;
        for n1 in 0..rep.levels() {
            for n2 in 0..rep.levels() {
                let phase = num_complex::Complex64::from_polar(1.0, -((n1 + n2) as f64) * phi);
                worst_coeff =
                    worst_coeff.max((rot.coeff(n1, n2) - rep.coeff(n1, n2) * phase).norm());
            }
        }
        println!(
            "  label {lambda}: |d<L>| = {mean_gap:.2e}, worst coefficient gap vs \
             exp(-i(n1+n2)phi) = {worst_coeff:.2e}"
        );
    }

    println!(
        "\nBoth routes agree: a common clock rotation never moves the angular \
         readout, so sender and receiver need no shared clock."
    );
    Ok(())
}
