//! FFT-based derivatives along one mode of a grid state.
//!
//! Periodic grids make differentiation diagonal in wavenumber space: forward
//! FFT along the mode axis, multiply bin `j` by `(i k_j)^order`, inverse FFT.
//! For odd orders the Nyquist bin is zeroed (its sign is ambiguous and any
//! choice breaks the anti-symmetry of the derivative); for order 2 it is kept
//! as `-k^2`, which is the exact diagonal of the periodic Laplacian.

use ndarray::Axis;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::GridState;

/// Applies `d^order/dq^order` along `mode` spectrally. Supported orders: 1, 2.
pub fn spectral_derivative(state: &GridState, mode: usize, order: u32) -> Result<GridState> {
    if mode >= state.modes() {
        return Err(Error::BadModeIndex { index: mode, modes: state.modes() });
    }
    if order == 0 || order > 2 {
        return Err(Error::BadDerivativeOrder(order));
    }
    let g = *state.grid(mode);
    let n = g.n();
    let mut mult = Vec::with_capacity(n);
    for j in 0..n {
        let k = g.wavenumber(j);
        let m = match order {
            1 => {
                if j == n / 2 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, k)
                }
            }
            _ => C64::new(-k * k, 0.0),
        };
        mult.push(m / n as f64);
    }
    let mut out = state.clone();
    apply_axis_multiplier(&mut out, mode, &mult)?;
    Ok(out)
}

/// FFT along `mode`, multiply each bin by `mult[j]` (which must already fold
/// in the 1/n round-trip scale), inverse FFT. Shared by derivatives and the
/// phase-space rotations.
pub(crate) fn apply_axis_multiplier(
    state: &mut GridState,
    mode: usize,
    mult: &[C64],
) -> Result<()> {
    let n = state.grid(mode).n();
    if mult.len() != n {
        return Err(Error::GridMismatch("multiplier length does not match grid"));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    for mut lane in state.amps_mut().lanes_mut(Axis(mode)) {
        for (s, v) in scratch.iter_mut().zip(lane.iter()) {
            *s = *v;
        }
        fwd.process(&mut scratch);
        for (s, m) in scratch.iter_mut().zip(mult) {
            *s *= m;
        }
        inv.process(&mut scratch);
        for (v, s) in lane.iter_mut().zip(&scratch) {
            *v = *s;
        }
    }
    Ok(())
}
