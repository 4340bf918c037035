//! Renders one eigenstate as a Re/Im/|psi|^2 surface and reports its phase
//! topology: the winding count along a circle and the number of branch-cut
//! crossings, on both angle conventions.
//!
//! Usage: `cargo run --example render_state [-- <surface.csv>]`
//! With a path argument the [-3, 3]^2 window is written as CSV
//! (`q1,q2,re,im,abs2`); without one only the diagnostics are printed.

use cvlink::states::{self, Branch};
use cvlink::{observables, Grid1D};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    let grid = Grid1D::new(512, 8.0)?;
    let lambda = 3.0;
    let a = 1.0;

    for branch in [Branch::Polar, Branch::Arctan] {
        let psi = states::eigenstate(grid, lambda, a, branch)?;
        let winding = observables::winding_number(&psi, 2.0, 4096)?;
        // Sample the phase along the circle at roughly grid resolution and
        // count clusters of large steps: a branch cut crossed by the walk.
        let samples = ((std::f64::consts::PI * 2.0 / (2.0 * grid.dq())) as usize).clamp(64, 4096);
        let amps = observables::circle_amplitudes(&psi, 2.0, samples)?;
        let hot: Vec<bool> = (0..samples)
            .map(|j| {
                let step = (amps[(j + 1) % samples] * amps[j].conj()).arg();
                step.abs() > std::f64::consts::FRAC_PI_3
            })
            .collect();
        let jumps = (0..samples).filter(|&j| hot[j] && !hot[(j + samples - 1) % samples]).count();
        println!(
            "branch {branch:?}: winding {winding} along r = 2, {jumps} cut crossing(s) \
             (label {lambda}, width {a})"
        );
    }

    if let Some(path) = out {
        let psi = states::eigenstate(grid, lambda, a, Branch::Polar)?;
        let mut body = String::from("q1,q2,re,im,abs2\r\n");
        let points = grid.points();
        for &q1 in points.iter().filter(|q| q.abs() <= 3.0 + 1e-12) {
            for &q2 in points.iter().filter(|q| q.abs() <= 3.0 + 1e-12) {
                let i = ((q1 + grid.extent()) / grid.dq()).round() as usize;
                let j = ((q2 + grid.extent()) / grid.dq()).round() as usize;
                let v = psi.amps()[[i, j]];
                body.push_str(&format!("{q1},{q2},{},{},{}\r\n", v.re, v.im, v.norm_sqr()));
            }
        }
        std::fs::write(&path, body)?;
        println!("surface written to {path}");
    }
    Ok(())
}
