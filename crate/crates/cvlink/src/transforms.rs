//! Frame and channel transforms: dilation boosts, clock-phase rotations,
//! coordinate-plane rotations, and the vacuum-ancilla loss channel.
//!
//! A boost with Doppler factor `mu` acts as the unitary dilation
//! `psi'(q) = mu^(-M/2) psi(q / mu)` on an `M`-mode state; on the angular
//! eigenstate family it maps width `a` to `a / mu^2` exactly, leaving the
//! phase profile untouched. States that carry their closed form are boosted
//! by re-synthesis; anything else is resampled through the spline kernel and
//! checked for support leaving the box.

use ndarray::{ArrayD, Ix2, IxDyn, SliceInfoElem};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock;
use crate::grid::{Grid1D, GridState};
use crate::interp::{Spline1, Spline2};
use crate::op::OperatorSpec;
use crate::states;

/// Relative norm loss at which a resampled transform is rejected.
pub const RESAMPLE_DEFICIT_LIMIT: f64 = 1e-4;

/// Largest loss amplitude the quadratic-order channel expansions accept;
/// beyond this the neglected quartic term is no longer small.
pub const LOSS_REGIME_LIMIT: f64 = 0.3;

/// Dilation factor of a boost at `speed` (in units of c), fixed by the
/// convention that the squared factor is the time-dilation root:
/// `mu^2 = sqrt(1 - v^2)`, so `mu = (1 - v^2)^(1/4)`.
pub fn doppler_factor(speed: f64) -> Result<f64> {
    if !speed.is_finite() || speed.abs() >= 1.0 {
        return Err(Error::BadSpeed(speed));
    }
    Ok((1.0 - speed * speed).powf(0.25))
}

fn check_dilation(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::BadDilation(mu));
    }
    Ok(())
}

/// Boosts a state by Doppler factor `mu`. States tagged with their closed
/// form are re-synthesized exactly at width `a / mu^2`; everything else goes
/// through [`lorentz_boost_resampled`].
pub fn lorentz_boost(state: &GridState, mu: f64) -> Result<GridState> {
    check_dilation(mu)?;
    if let Some(tag) = state.eigen_tag().copied() {
        if state.modes() == 2 && state.grid(0) == state.grid(1) {
            return states::eigenstate(*state.grid(0), tag.lambda, tag.a / (mu * mu), tag.branch);
        }
    }
    lorentz_boost_resampled(state, mu)
}

/// Numerical boost: per-axis spline resampling at `q / mu` followed by the
/// `mu^(-M/2)` amplitude rescale. Rejects boosts that push more than
/// [`RESAMPLE_DEFICIT_LIMIT`] of the squared norm off the grid.
pub fn lorentz_boost_resampled(state: &GridState, mu: f64) -> Result<GridState> {
    check_dilation(mu)?;
    let m = state.modes();
    let mut out = state.clone();
    for axis in 0..m {
        let g = *state.grid(axis);
        let points = g.points();
        for mut lane in out.amps_mut().lanes_mut(ndarray::Axis(axis)) {
            let line: Vec<C64> = lane.iter().copied().collect();
            let sp = Spline1::new(&line, &g);
            for (v, &q) in lane.iter_mut().zip(&points) {
                *v = sp.eval(q / mu);
            }
        }
    }
    let scale = mu.powf(-(m as f64) / 2.0);
    let out = out.scaled(C64::new(scale, 0.0));
    let in2 = state.norm_squared();
    let out2 = out.norm_squared();
    let deficit = (1.0 - out2 / in2).abs();
    if deficit > RESAMPLE_DEFICIT_LIMIT {
        return Err(Error::SupportEscapesGrid { deficit, limit: RESAMPLE_DEFICIT_LIMIT });
    }
    Ok(out)
}

/// Rotates the `(mode_i, mode_j)` coordinate plane by `theta`:
/// `psi'(qi, qj) = psi(qi cos - qj sin, qi sin + qj cos)`, other modes
/// untouched. This is the flow of `exp(i theta B)` for the mixing generator
/// `B = i(q_j d_i - q_i d_j)`.
pub fn coordinate_rotation(
    state: &GridState,
    mode_i: usize,
    mode_j: usize,
    theta: f64,
) -> Result<GridState> {
    let m = state.modes();
    if mode_i >= m {
        return Err(Error::BadModeIndex { index: mode_i, modes: m });
    }
    if mode_j >= m {
        return Err(Error::BadModeIndex { index: mode_j, modes: m });
    }
    if mode_i == mode_j {
        return Err(Error::DegenerateRotation);
    }
    if !theta.is_finite() {
        return Err(Error::Config(format!("rotation angle must be finite, got {theta}")));
    }
    // Canonical order: rotating (j, i) by theta equals rotating (i, j) by -theta.
    let (i, j, theta) = if mode_i < mode_j {
        (mode_i, mode_j, theta)
    } else {
        (mode_j, mode_i, -theta)
    };
    let gi = *state.grid(i);
    let gj = *state.grid(j);
    let (c, s) = (theta.cos(), theta.sin());
    let others: Vec<usize> = (0..m).filter(|&a| a != i && a != j).collect();
    let o_dims: Vec<usize> = others.iter().map(|&a| state.grid(a).n()).collect();
    let o_total: usize = o_dims.iter().product();

    let shape: Vec<usize> = state.grids().iter().map(|g| g.n()).collect();
    let mut out = ArrayD::from_elem(IxDyn(&shape), C64::new(0.0, 0.0));
    let pi = gi.points();
    let pj = gj.points();
    for flat in 0..o_total.max(1) {
        let mut spec: Vec<SliceInfoElem> = vec![SliceInfoElem::from(..); m];
        if !others.is_empty() {
            let mut rem = flat;
            for (&axis, &dim) in others.iter().zip(&o_dims).rev() {
                spec[axis] = SliceInfoElem::Index((rem % dim) as isize);
                rem /= dim;
            }
        }
        let plane = state
            .amps()
            .slice(spec.as_slice())
            .into_dimensionality::<Ix2>()
            .expect("two free axes remain");
        let sp = Spline2::new(plane.to_owned(), &gi, &gj);
        let mut out_plane = out
            .slice_mut(spec.as_slice())
            .into_dimensionality::<Ix2>()
            .expect("two free axes remain");
        for (a, &qa) in pi.iter().enumerate() {
            for (b, &qb) in pj.iter().enumerate() {
                out_plane[(a, b)] = sp.eval(qa * c - qb * s, qa * s + qb * c);
            }
        }
    }
    GridState::new(state.grids().to_vec(), out)
}

/// Options for the number-basis clock rotation.
#[derive(Clone, Copy, Debug)]
pub struct ClockOptions {
    /// Levels kept per mode in the round trip.
    pub levels: usize,
    /// Largest tolerated truncation deficit (squared-norm weight beyond the
    /// kept levels).
    pub truncation_tol: f64,
}

impl Default for ClockOptions {
    fn default() -> Self {
        ClockOptions { levels: 64, truncation_tol: 1e-4 }
    }
}

/// Clock-phase rotation on a two-mode state: level `n` of mode `k` gains
/// `exp(-i n phi[k])`. Runs through the number basis, so the state must fit
/// the level window; the returned second value is the truncation deficit
/// that was absorbed by renormalizing.
pub fn clock_rotation(
    state: &GridState,
    phi: [f64; 2],
    opts: &ClockOptions,
) -> Result<(GridState, f64)> {
    if state.modes() != 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if state.grid(0) != state.grid(1) {
        return Err(Error::GridMismatch("clock rotation needs a square grid"));
    }
    let rep = fock::decompose(state, opts.levels)?;
    let deficit = (state.norm_squared() - rep.total_weight()).abs();
    if deficit > opts.truncation_tol {
        return Err(Error::TruncationExceeded { weight: deficit, limit: opts.truncation_tol });
    }
    let rot = rep.rotate_mode(0, phi[0])?.rotate_mode(1, phi[1])?;
    let back = fock::reconstruct(&rot, *state.grid(0))?;
    Ok((back.normalize()?, deficit))
}

/// Appends a vacuum ancilla mode (same grid as `ancilla_like`) to a state.
pub fn attach_vacuum(state: &GridState, ancilla_like: Grid1D) -> Result<GridState> {
    let m = state.modes();
    if m + 1 > 4 {
        return Err(Error::BadModeCount(m + 1));
    }
    let h0: Vec<C64> = ancilla_like
        .points()
        .into_iter()
        .map(|q| C64::new((-q * q / 2.0).exp() / std::f64::consts::PI.powf(0.25), 0.0))
        .collect();
    let mut shape: Vec<usize> = state.grids().iter().map(|g| g.n()).collect();
    shape.push(ancilla_like.n());
    let mut out = ArrayD::from_elem(IxDyn(&shape), C64::new(0.0, 0.0));
    let last = ndarray::Axis(m);
    for (mut lane, &amp) in out.lanes_mut(last).into_iter().zip(state.amps().iter()) {
        for (v, &h) in lane.iter_mut().zip(&h0) {
            *v = amp * h;
        }
    }
    let mut grids = state.grids().to_vec();
    grids.push(ancilla_like);
    GridState::new(grids, out)
}

/// Exact photon loss of amplitude `kappa` on one mode of a two-mode state:
/// attach a vacuum ancilla as mode 2, then rotate the lossy mode toward it
/// by `asin(kappa)`. The result is the three-mode dilation; moments of
/// signal-mode observables on it equal channel expectations, no explicit
/// trace needed.
pub fn photon_loss_exact(state: &GridState, mode: usize, kappa: f64) -> Result<GridState> {
    if state.modes() != 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if mode > 1 {
        return Err(Error::BadModeIndex { index: mode, modes: 2 });
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::BadLossAmplitude(kappa));
    }
    let theta = kappa.asin();
    let tensored = attach_vacuum(state, *state.grid(mode))?;
    coordinate_rotation(&tensored, mode, 2, theta)
}

/// Perturbative loss on the number-basis representation: second-order
/// corrections to the angular mean and second moment,
///
/// ```text
/// <A>_loss = <A> + kappa^2 (<a^T A a> - (<n A> + <A n>)/2) + O(kappa^4)
/// ```
///
/// with `a`, `n` on the lossy mode. Valid for small loss; refuses amplitudes
/// past [`LOSS_REGIME_LIMIT`] where the quartic term is no longer negligible.
pub fn angular_moments_with_loss(
    rep: &fock::FockRep,
    mode: usize,
    kappa: f64,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::BadLossAmplitude(kappa));
    }
    if kappa > LOSS_REGIME_LIMIT {
        return Err(Error::LossOutOfRegime(kappa));
    }
    let k2 = kappa * kappa;
    let lowered = rep.lowered(mode)?;
    let l_low = lowered.apply_angular();
    let l_full = rep.apply_angular();
    let n_weighted = rep.number_weighted(mode)?;

    let mean0 = rep.inner(&l_full).re;
    let mean_jump = lowered.inner(&l_low).re;
    let mean_anti = n_weighted.inner(&l_full).re;
    let mean = mean0 + k2 * (mean_jump - mean_anti);

    let second0 = l_full.inner(&l_full).re;
    let second_jump = l_low.inner(&l_low).re;
    let second_anti = n_weighted.inner(&l_full.apply_angular()).re;
    let second = second0 + k2 * (second_jump - second_anti);
    Ok((mean, second))
}

/// Grid-route perturbative loss expectation of a Hermitian observable `a_op`
/// acting on the two signal modes. The signal state is tensored with a
/// vacuum ancilla and the beam-splitter generator `B` (signal mode 0 with
/// the ancilla) is expanded to second order in the loss amplitude:
///
/// ```text
/// <A>_loss = <A> + kappa^2 (<B A B> - Re <B^2 A psi|psi-ordering>) + O(kappa^4)
/// ```
///
/// concretely `base + kappa^2 (<Bpsi|A|Bpsi> - Re <B^2 psi|A|psi>)`, the
/// unique second-order form consistent with unitarity of the exact channel
/// (the first-order term vanishes because the generator is odd in the
/// ancilla coordinate while the vacuum is even).
pub fn loss_expectation_perturbative(
    state: &GridState,
    a_op: &OperatorSpec,
    kappa: f64,
) -> Result<f64> {
    if state.modes() != 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::BadLossAmplitude(kappa));
    }
    if kappa > LOSS_REGIME_LIMIT {
        return Err(Error::LossOutOfRegime(kappa));
    }
    if !a_op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let psi = attach_vacuum(state, *state.grid(0))?;
    let n2 = psi.norm_squared();
    let applied = a_op.apply(&psi)?;
    let base = psi.inner_product(&applied)?.re / n2;
    if kappa == 0.0 {
        return Ok(base);
    }
    let b_op = OperatorSpec::beam_splitter_generator(0, 2);
    let stirred = b_op.apply(&psi)?;
    let stirred_twice = b_op.apply(&stirred)?;
    let sandwich = stirred.inner_product(&a_op.apply(&stirred)?)?.re / n2;
    let anti = stirred_twice.inner_product(&applied)?.re / n2;
    Ok(base + kappa * kappa * (sandwich - anti))
}

/// Clock-phase rotation of the two retained (signal) modes of a three-mode
/// state, slice by slice along the ancilla axis. Rotating only the retained
/// modes commutes with tracing out the ancilla, so downstream reduced
/// observables see exactly the rotated reduced state. Returns the rotated
/// state and the aggregate truncation deficit (squared-norm weight beyond
/// the level window, summed over slices).
pub fn clock_rotation_retained(
    state: &GridState,
    phi: [f64; 2],
    opts: &ClockOptions,
) -> Result<(GridState, f64)> {
    if state.modes() != 3 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if state.grid(0) != state.grid(1) {
        return Err(Error::GridMismatch("retained-mode rotation needs a square signal grid"));
    }
    let signal = *state.grid(0);
    let ancilla = *state.grid(2);
    let mut out = ArrayD::<C64>::zeros(state.amps().raw_dim());
    let mut captured = 0.0;
    for k in 0..ancilla.n() {
        let slice = state
            .amps()
            .slice(ndarray::s![.., .., k])
            .to_owned()
            .into_dyn();
        let slab = GridState::new(vec![signal, signal], slice)?;
        let rep = fock::decompose(&slab, opts.levels)?;
        captured += rep.total_weight() * ancilla.dq();
        let rot = rep.rotate_mode(0, phi[0])?.rotate_mode(1, phi[1])?;
        let back = fock::reconstruct(&rot, signal)?;
        out.slice_mut(ndarray::s![.., .., k]).assign(&back.amps().view().into_dimensionality::<Ix2>().expect("2-mode slab"));
    }
    // dq^2 of the signal plane is inside total_weight already; the ancilla
    // axis contributes its own measure factor.
    let total = state.norm_squared();
    let deficit = (total - captured).abs();
    if deficit > opts.truncation_tol {
        return Err(Error::TruncationExceeded { weight: deficit, limit: opts.truncation_tol });
    }
    let rotated = GridState::new(vec![signal, signal, ancilla], out)?;
    Ok((rotated.normalize()?, deficit))
}

/// Phase evolution generated by the total circulation operator: weights of a
/// node-ladder state gain `exp(-i node beta)` per unit label in the `Single`
/// structure. Every composite structure pairs `+lambda` with `-lambda`
/// content so the node phases cancel identically; their weights are returned
/// untouched, bit for bit.
pub fn generator_evolution(state: &states::LambdaState, beta: f64) -> Result<states::LambdaState> {
    if !beta.is_finite() {
        return Err(Error::BadOffset(beta));
    }
    Ok(match state.structure() {
        states::Structure::Single => {
            state.map_weights_unchecked(|l, w| w * C64::from_polar(1.0, -l * beta))
        }
        states::Structure::OppositePair
        | states::Structure::CorrelatedPairs
        | states::Structure::ShiftedPairs { .. } => state.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::op::OperatorSpec;
    use crate::states::{eigenstate, superposition, Branch};

    fn grid() -> Grid1D {
        Grid1D::new(256, 8.0).unwrap()
    }

    #[test]
    fn doppler_factor_limits() {
        // v = 0.6: mu^2 = sqrt(1 - 0.36) = 0.8, mu = sqrt(0.8).
        assert!((doppler_factor(0.6).unwrap() - 0.8f64.sqrt()).abs() < 1e-12);
        assert!((doppler_factor(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(doppler_factor(1.0), Err(Error::BadSpeed(_))));
        assert!(matches!(doppler_factor(-1.2), Err(Error::BadSpeed(_))));
    }

    #[test]
    fn tagged_boost_matches_resampled_boost() {
        // lambda = 2 keeps the profile entire, so the two routes agree to
        // spline accuracy pointwise. Cusped profiles (|lambda| not in
        // {0, 2}) only agree in moments; see the next test.
        let psi = eigenstate(grid(), 2.0, 2.0, Branch::Polar).unwrap();
        let mu = 1.5;
        let exact = lorentz_boost(&psi, mu).unwrap();
        let resampled = lorentz_boost_resampled(&psi, mu).unwrap();
        let max_diff = exact
            .amps()
            .iter()
            .zip(resampled.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff < 5e-5, "routes differ by {max_diff}");
        // Width transforms as a -> a / mu^2, so <r^2> = 3/a grows by mu^2.
        let r2_op = OperatorSpec::position(0)
            .compose(&OperatorSpec::position(0))
            .add(OperatorSpec::position(1).compose(&OperatorSpec::position(1)));
        let r2 = r2_op.expectation(&exact).unwrap().re;
        assert!((r2 - 3.0 * mu * mu / 2.0).abs() < 1e-8, "<r^2> = {r2}");
    }

    #[test]
    fn resampled_boost_of_a_cusped_state_agrees_in_moments() {
        // The lambda = 3 profile is only C^1 at the origin, which caps the
        // pointwise spline accuracy there; integrated moments still converge.
        let psi = eigenstate(grid(), 3.0, 2.0, Branch::Polar).unwrap();
        let mu = 1.5;
        let resampled = lorentz_boost_resampled(&psi, mu).unwrap();
        let n2 = resampled.norm_squared();
        assert!((n2 - 1.0).abs() < 1e-5, "norm^2 {n2}");
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let l_mean = l_op.expectation(&resampled).unwrap().re / n2;
        assert!((l_mean - 3.0).abs() < 1e-4, "<L> {l_mean}");
        let r2_op = OperatorSpec::position(0)
            .compose(&OperatorSpec::position(0))
            .add(OperatorSpec::position(1).compose(&OperatorSpec::position(1)));
        let r2 = r2_op.expectation(&resampled).unwrap().re / n2;
        assert!((r2 - 3.0 * mu * mu / 2.0).abs() < 1e-4, "<r^2> = {r2}");
    }

    #[test]
    fn boost_of_a_superposition_tracks_the_analytic_map() {
        // Every member of the family maps a -> a / mu^2 with nodes fixed, so
        // the boosted superposition equals a fresh synthesis at the new a.
        let g = grid();
        let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = superposition(g, &[0.0, 2.0], &[w, w], 2.0, Branch::Polar).unwrap();
        let mu = 1.25;
        let boosted = lorentz_boost(&psi, mu).unwrap();
        let target = superposition(g, &[0.0, 2.0], &[w, w], 2.0 / (mu * mu), Branch::Polar).unwrap();
        let max_diff = boosted
            .amps()
            .iter()
            .zip(target.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff < 5e-5, "resampled boost off by {max_diff}");
        assert!((boosted.norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn boost_rejects_bad_factors_and_escaping_support() {
        let psi = eigenstate(grid(), 1.0, 1.0, Branch::Polar).unwrap();
        assert!(matches!(lorentz_boost(&psi, 0.0), Err(Error::BadDilation(_))));
        assert!(matches!(lorentz_boost(&psi, f64::NAN), Err(Error::BadDilation(_))));
        // mu = 4 sends a -> 1/16; the radial peak lands at r ~ 5.7 and the
        // tail pours past extent 8.
        assert!(matches!(
            lorentz_boost(&psi, 4.0),
            Err(Error::SupportEscapesGrid { .. })
        ));
    }

    #[test]
    fn rotation_leaves_symmetric_gaussian_alone() {
        let g = grid();
        let psi = GridState::from_fn(vec![g, g], |q| {
            C64::new(
                (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() / std::f64::consts::PI.sqrt(),
                0.0,
            )
        })
        .unwrap();
        let rot = coordinate_rotation(&psi, 0, 1, 0.7).unwrap();
        let max_diff = rot
            .amps()
            .iter()
            .zip(psi.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-6, "rotation moved a symmetric state by {max_diff}");
    }

    #[test]
    fn rotation_round_trip_and_degenerate_args() {
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let there = coordinate_rotation(&psi, 0, 1, 0.4).unwrap();
        let back = coordinate_rotation(&there, 0, 1, -0.4).unwrap();
        let max_diff = back
            .amps()
            .iter()
            .zip(psi.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-5, "round trip drift {max_diff}");
        assert!(matches!(
            coordinate_rotation(&psi, 1, 1, 0.4),
            Err(Error::DegenerateRotation)
        ));
        // Swapped mode order with negated angle is the same rotation.
        let swapped = coordinate_rotation(&psi, 1, 0, -0.4).unwrap();
        let agree = swapped
            .amps()
            .iter()
            .zip(there.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(agree < 1e-12, "axis-order convention broke: {agree}");
    }

    #[test]
    fn rotation_flow_matches_its_generator() {
        // Central difference of the flow at theta = 0 against i B psi.
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let delta = 1e-3;
        let plus = coordinate_rotation(&psi, 0, 1, delta).unwrap();
        let minus = coordinate_rotation(&psi, 0, 1, -delta).unwrap();
        let flow = plus.add_scaled(C64::new(-1.0, 0.0), &minus).unwrap();
        let gen = OperatorSpec::beam_splitter_generator(0, 1)
            .scale(C64::new(0.0, 2.0 * delta))
            .apply(&psi)
            .unwrap();
        let max_diff = flow
            .amps()
            .iter()
            .zip(gen.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / (2.0 * delta);
        assert!(max_diff < 1e-4, "generator mismatch {max_diff}");
    }

    #[test]
    fn clock_rotation_preserves_angular_moments_at_equal_angles() {
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let before = l_op.expectation(&psi).unwrap().re;
        let (rot, deficit) =
            clock_rotation(&psi, [0.829, 0.829], &ClockOptions::default()).unwrap();
        let after = l_op.expectation(&rot).unwrap().re;
        assert!(deficit < 1e-8, "deficit {deficit}");
        assert!((after - before).abs() < 1e-7, "{before} -> {after}");
    }

    #[test]
    fn clock_rotation_rejects_badly_truncated_states() {
        // Odd arctan states scatter weight far up the level ladder; the
        // default 1e-4 budget cannot absorb that.
        let psi = eigenstate(grid(), 3.0, 1.0, Branch::Arctan).unwrap();
        let r = clock_rotation(&psi, [0.3, 0.3], &ClockOptions::default());
        assert!(matches!(r, Err(Error::TruncationExceeded { .. })), "got {r:?}");
        // With an explicit generous budget the rotation goes through.
        let opts = ClockOptions { levels: 64, truncation_tol: 0.05 };
        let (_, deficit) = clock_rotation(&psi, [0.3, 0.3], &opts).unwrap();
        assert!(deficit > 1e-4 && deficit < 0.05, "deficit {deficit}");
    }

    #[test]
    fn exact_loss_contracts_the_angular_mean() {
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let kappa = 0.6;
        let lossy = photon_loss_exact(&psi, 0, kappa).unwrap();
        assert!((lossy.norm() - 1.0).abs() < 1e-6, "norm {}", lossy.norm());
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let mean = l_op.expectation(&lossy).unwrap().re / lossy.norm_squared();
        let want = 2.0 * (1.0 - kappa * kappa).sqrt();
        assert!((mean - want).abs() < 1e-4, "mean {mean}, want {want}");
    }

    #[test]
    fn zero_loss_is_the_identity_channel() {
        let psi = eigenstate(grid(), 1.0, 1.0, Branch::Polar).unwrap();
        let lossy = photon_loss_exact(&psi, 1, 0.0).unwrap();
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let mean = l_op.expectation(&lossy).unwrap().re / lossy.norm_squared();
        assert!((mean - 1.0).abs() < 1e-9, "mean {mean}");
    }

    #[test]
    fn perturbative_loss_matches_the_closed_form_on_eigenstates() {
        // On an eigenstate the correction is exactly -kappa^2 lambda / 2.
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let rep = fock::decompose(&psi, 32).unwrap();
        let kappa = 0.1;
        let (mean, second) = angular_moments_with_loss(&rep, 0, kappa).unwrap();
        let want_mean = 2.0 * (1.0 - kappa * kappa / 2.0);
        assert!((mean - want_mean).abs() < 1e-8, "mean {mean}, want {want_mean}");
        assert!(second > 3.9 && second < 4.1, "second {second}");
        assert!(matches!(
            angular_moments_with_loss(&rep, 0, 0.7),
            Err(Error::LossOutOfRegime(_))
        ));
    }

    #[test]
    fn grid_perturbative_loss_agrees_with_the_fock_route_and_the_exact_channel() {
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let kappa = 0.1;
        let grid_route = loss_expectation_perturbative(&psi, &l_op, kappa).unwrap();
        let want = 2.0 * (1.0 - kappa * kappa / 2.0);
        assert!((grid_route - want).abs() < 1e-7, "grid {grid_route}, want {want}");

        // Exact channel at the same kappa differs only at quartic order.
        let lossy = photon_loss_exact(&psi, 0, kappa).unwrap();
        let exact = l_op.expectation(&lossy).unwrap().re / lossy.norm_squared();
        assert!((grid_route - exact).abs() < 5e-5, "exact {exact} vs {grid_route}");

        assert!((loss_expectation_perturbative(&psi, &l_op, 0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(matches!(
            loss_expectation_perturbative(&psi, &l_op, 0.4),
            Err(Error::LossOutOfRegime(_))
        ));
        let skew = OperatorSpec::derivative(0);
        assert!(matches!(
            loss_expectation_perturbative(&psi, &skew, 0.1),
            Err(Error::NotHermitian)
        ));
    }

    #[test]
    fn retained_mode_rotation_commutes_with_the_loss_trace() {
        // Equal-angle rotation of the signal modes must leave the angular
        // moments of the lossy state exactly where they were.
        let psi = eigenstate(grid(), 2.0, 1.0, Branch::Polar).unwrap();
        let lossy = photon_loss_exact(&psi, 0, 0.3).unwrap();
        let l_op = OperatorSpec::angular_momentum(0, 1);
        let before = l_op.expectation(&lossy).unwrap().re / lossy.norm_squared();
        let opts = ClockOptions::default();
        let (rot, deficit) = clock_rotation_retained(&lossy, [0.9, 0.9], &opts).unwrap();
        assert!(deficit < 1e-6, "deficit {deficit}");
        let after = l_op.expectation(&rot).unwrap().re / rot.norm_squared();
        assert!((after - before).abs() < 1e-8, "{before} -> {after}");

        assert!(matches!(
            clock_rotation_retained(&psi, [0.1, 0.1], &opts),
            Err(Error::BadModeCount(2))
        ));
    }

    #[test]
    fn node_phase_evolution_is_a_pure_phase_on_single_ladders() {
        use crate::states::{LambdaState, Structure};
        let s = LambdaState::new(
            vec![0.0, 2.0, 4.0],
            vec![C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.25, 0.25)],
            Structure::Single,
        )
        .unwrap();
        let beta = 0.7;
        let evolved = generator_evolution(&s, beta).unwrap();
        for (k, (l, w)) in s.nodes().iter().zip(s.weights()).enumerate() {
            let expect = w * C64::from_polar(1.0, -l * beta);
            let got = evolved.weights()[k];
            assert!((got - expect).norm() < 1e-15, "node {k}");
            assert!((got.norm_sqr() - w.norm_sqr()).abs() < 1e-15, "node {k} magnitude");
        }

        // Phase gradient between adjacent nodes is -beta * spacing.
        let step = (evolved.weights()[1] / evolved.weights()[0])
            * (s.weights()[0] / s.weights()[1]);
        assert!((step.arg() + beta * 2.0).abs() < 1e-12);

        let pair = LambdaState::new(
            vec![1.0, 3.0],
            vec![C64::new(0.8, 0.1), C64::new(0.2, -0.4)],
            Structure::OppositePair,
        )
        .unwrap();
        let frozen = generator_evolution(&pair, 123.456).unwrap();
        for (w0, w1) in pair.weights().iter().zip(frozen.weights()) {
            assert_eq!(w0.re.to_bits(), w1.re.to_bits());
            assert_eq!(w0.im.to_bits(), w1.im.to_bits());
        }
        assert!(generator_evolution(&pair, f64::NAN).is_err());
    }
}
