//! Readout: angular spectra, moment summaries, and phase-winding probes.
//!
//! The angular spectrum is computed geometrically: the state is resampled
//! onto rings of constant radius through the spline kernel and each ring is
//! Fourier-analyzed in the angle. This route never touches grid derivatives,
//! so it cross-checks the operator route rather than restating it. The
//! window of resolvable components is set by the angular sampling count; the
//! weight falling outside the window (plus any resampling error) is exposed
//! as a residual and gated, never silently renormalized away.

use ndarray::{Array2, Ix2, SliceInfoElem};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::GridState;
use crate::interp::Spline2;
use crate::op::OperatorSpec;
use crate::rng::CounterRng;

/// Controls for the ring-resampled angular spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    /// Angle samples per ring; resolvable components span
    /// `-(n_theta/2 - 1) ..= n_theta/2 - 1`.
    pub n_theta: usize,
    /// Largest tolerated residual (weight outside the window plus
    /// resampling error), relative to the squared norm.
    pub residual_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { n_theta: 256, residual_tol: 1e-4 }
    }
}

/// Discrete distribution over integer angular components.
#[derive(Clone, Debug)]
pub struct AngularSpectrum {
    min_m: i32,
    probs: Vec<f64>,
    residual: f64,
}

impl AngularSpectrum {
    /// Inclusive window of represented components.
    pub fn window(&self) -> (i32, i32) {
        (self.min_m, self.min_m + self.probs.len() as i32 - 1)
    }

    pub fn prob(&self, m: i32) -> f64 {
        let idx = m - self.min_m;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.min_m + i as i32, p))
    }

    pub fn mean(&self) -> f64 {
        self.entries().map(|(m, p)| m as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self.entries().map(|(m, p)| (m as f64) * (m as f64) * p).sum();
        (second - mean * mean).max(0.0)
    }

    /// Weight that could not be attributed to a window component, relative
    /// to the squared norm of the analyzed state.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Ring radii used for the polar resampling: midpoint rule at grid spacing,
/// stopping three cells short of the extent where the spline loses support.
fn ring_radii(grid: &crate::grid::Grid1D) -> Vec<f64> {
    let dq = grid.dq();
    let r_max = grid.extent() - 3.0 * dq;
    let mut radii = Vec::new();
    let mut i = 0usize;
    loop {
        let r = (i as f64 + 0.5) * dq;
        if r > r_max {
            break;
        }
        radii.push(r);
        i += 1;
    }
    radii
}

/// Angular spectrum of the first two modes. A two-mode state is analyzed
/// directly; a three-mode state (a loss dilation) is analyzed slice by
/// slice along the ancilla and the slice spectra are summed, which is the
/// spectrum of the reduced signal state.
pub fn angular_spectrum(state: &GridState, opts: &SpectrumOptions) -> Result<AngularSpectrum> {
    if state.modes() != 2 && state.modes() != 3 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if opts.n_theta < 8 || !opts.n_theta.is_power_of_two() {
        return Err(Error::Config(format!(
            "angle sample count must be a power of two >= 8, got {}",
            opts.n_theta
        )));
    }
    if state.grid(0) != state.grid(1) {
        return Err(Error::GridMismatch("angular analysis needs a square grid"));
    }
    let g = *state.grid(0);
    let radii = ring_radii(&g);
    if radii.is_empty() {
        return Err(Error::Config("grid too small to carry spectral rings".into()));
    }
    let n_theta = opts.n_theta;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_theta);
    let thetas: Vec<f64> = (0..n_theta)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64)
        .collect();

    // Accumulated |c_m|^2 per FFT bin, weighted by 2 pi r dr (and the
    // ancilla volume element for sliced states).
    let mut bin_power = vec![0.0f64; n_theta];
    let mut scratch = vec![C64::new(0.0, 0.0); n_theta];
    let mut analyze_plane = |plane: Array2<C64>, weight: f64| {
        let sp = Spline2::new(plane, &g, &g);
        for &r in &radii {
            for (x, &th) in scratch.iter_mut().zip(&thetas) {
                *x = sp.eval(r * th.sin(), r * th.cos());
            }
            fft.process(&mut scratch);
            let ring_w = weight * 2.0 * std::f64::consts::PI * r * g.dq()
                / (n_theta as f64 * n_theta as f64);
            for (p, x) in bin_power.iter_mut().zip(&scratch) {
                *p += ring_w * x.norm_sqr();
            }
        }
    };

    match state.modes() {
        2 => {
            let plane = state
                .amps()
                .view()
                .into_dimensionality::<Ix2>()
                .expect("two-mode state is rank 2")
                .to_owned();
            analyze_plane(plane, 1.0);
        }
        _ => {
            let na = state.grid(2).n();
            let wa = state.grid(2).dq();
            for k in 0..na {
                let spec: Vec<SliceInfoElem> = vec![
                    SliceInfoElem::from(..),
                    SliceInfoElem::from(..),
                    SliceInfoElem::Index(k as isize),
                ];
                let plane = state
                    .amps()
                    .slice(spec.as_slice())
                    .into_dimensionality::<Ix2>()
                    .expect("two free axes remain")
                    .to_owned();
                analyze_plane(plane, wa);
            }
        }
    }

    // Window: bins 0..n/2-1 are m >= 0, bins n/2+1.. are m < 0; the bin at
    // exactly n/2 has ambiguous sign and is left in the residual.
    let half = (n_theta / 2 - 1) as i32;
    let min_m = -half;
    let mut probs = vec![0.0f64; 2 * half as usize + 1];
    for (j, &p) in bin_power.iter().enumerate() {
        let m = if j <= n_theta / 2 { j as i64 } else { j as i64 - n_theta as i64 };
        if m.unsigned_abs() as usize <= half as usize {
            probs[(m - min_m as i64) as usize] = p;
        }
    }
    let captured: f64 = probs.iter().sum();
    let norm2 = state.norm_squared();
    let residual = ((norm2 - captured) / norm2).abs();
    if residual > opts.residual_tol {
        return Err(Error::ExcessiveResidual { residual, limit: opts.residual_tol });
    }
    for p in &mut probs {
        *p /= captured;
    }
    Ok(AngularSpectrum { min_m, probs, residual })
}

/// Mean and variance summary of a Hermitian observable.
#[derive(Clone, Copy, Debug)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
}

/// Operator-route angular moments of modes (0, 1), normalized by the squared
/// norm so unnormalized dilations are handled uniformly.
pub fn angular_moments(state: &GridState) -> Result<MomentSummary> {
    let l_op = OperatorSpec::angular_momentum(0, 1);
    let applied = l_op.apply(state)?;
    let n2 = state.norm_squared();
    let mean = state.inner_product(&applied)?.re / n2;
    let second = applied.inner_product(&applied)?.re / n2;
    Ok(MomentSummary { mean, variance: (second - mean * mean).max(0.0) })
}

/// Sum of per-mode energy densities `q^2 - d^2` over all modes, normalized
/// by the squared norm.
pub fn total_energy(state: &GridState) -> Result<f64> {
    let mut acc = 0.0;
    let n2 = state.norm_squared();
    for mode in 0..state.modes() {
        acc += OperatorSpec::mode_energy(mode).expectation(state)?.re;
    }
    Ok(acc / n2)
}

/// Complex amplitudes along the circle of given radius in the (mode 0,
/// mode 1) plane, sampled at evenly spaced angles from the positive q2-axis.
pub fn circle_amplitudes(state: &GridState, radius: f64, samples: usize) -> Result<Vec<C64>> {
    if state.modes() < 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if state.grid(0) != state.grid(1) {
        return Err(Error::GridMismatch("circle sampling needs a square grid"));
    }
    let g = *state.grid(0);
    if !(radius > 0.0) || radius > g.extent() - 3.0 * g.dq() {
        return Err(Error::Config(format!("circle radius {radius} outside the sampled area")));
    }
    if samples < 4 {
        return Err(Error::Config("need at least 4 circle samples".into()));
    }
    if state.modes() != 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    let plane = state
        .amps()
        .view()
        .into_dimensionality::<Ix2>()
        .expect("two-mode state is rank 2")
        .to_owned();
    let sp = Spline2::new(plane, &g, &g);
    Ok((0..samples)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / samples as f64;
            sp.eval(radius * th.sin(), radius * th.cos())
        })
        .collect())
}

/// Net phase winding around the circle: the accumulated wrapped phase
/// difference over one loop, in units of 2 pi.
pub fn winding_number(state: &GridState, radius: f64, samples: usize) -> Result<i64> {
    let amps = circle_amplitudes(state, radius, samples)?;
    let tau = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for j in 0..samples {
        let a = amps[j];
        let b = amps[(j + 1) % samples];
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let raw = b.arg() - a.arg();
        total += raw - tau * (raw / tau).round();
    }
    Ok((total / tau).round() as i64)
}

/// Independent draws of angular components from an already-computed
/// spectrum, via inverse-CDF lookup against the counter generator's stream
/// `stream`. Identical `(seed, stream)` reproduce the sequence exactly, at
/// any thread count.
pub fn sample_spectrum(
    spectrum: &AngularSpectrum,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<i32>> {
    if n_samples == 0 {
        return Err(Error::NoSamples);
    }
    let entries: Vec<(i32, f64)> = spectrum.entries().collect();
    let total: f64 = entries.iter().map(|(_, p)| p).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut cdf = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for &(m, p) in &entries {
        acc += p / total;
        cdf.push((m, acc));
    }
    let mut rng = CounterRng::new(seed, stream);
    Ok((0..n_samples)
        .map(|_| {
            let u = rng.next_uniform();
            // partition_point finds the first entry with cdf >= u; the final
            // entry absorbs any rounding shortfall of the running sum.
            let idx = cdf.partition_point(|&(_, c)| c < u).min(cdf.len() - 1);
            cdf[idx].0
        })
        .collect())
}

/// Draws measurement outcomes of the angular observable directly from a
/// state, using the default spectrum settings and sampling stream 0.
pub fn sample_l(state: &GridState, n_samples: usize, seed: u64) -> Result<Vec<i32>> {
    let spectrum = angular_spectrum(state, &SpectrumOptions::default())?;
    sample_spectrum(&spectrum, n_samples, seed, 0)
}
