//! Number-basis (Fock) representation of two-mode states.
//!
//! This is a deliberately independent route from the grid operators: states
//! are projected onto products of oscillator eigenfunctions and every
//! observable below is evaluated with ladder algebra on the coefficient
//! matrix, never with grid derivatives. Agreement between the two routes is
//! what the cross-check tests and the round-trip acceptance clause rely on,
//! so nothing here may call into [`crate::op`].
//!
//! Conventions: lowering operator `(q + d/dq)/sqrt(2)` per mode; the
//! two-mode angular operator in this basis is `i(a1^T a2 - a1 a2^T)`, which
//! conserves total number. A clock rotation by `phi` multiplies level `n` of
//! the selected mode by `exp(-i n phi)`.

use ndarray::{Array2, Ix2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridState};

/// Normalized oscillator eigenfunctions evaluated on a grid, one column per
/// level `0..levels`. The classical turning point of level `n` sits at
/// `sqrt(2n + 1)`, so the grid extent must exceed that for the top level to
/// be represented faithfully.
pub fn hermite_functions(grid: &Grid1D, levels: usize) -> Array2<f64> {
    let n = grid.n();
    let mut h = Array2::zeros((n, levels));
    let norm0 = std::f64::consts::PI.powf(-0.25);
    for (i, q) in grid.points().into_iter().enumerate() {
        let mut prev = 0.0f64;
        let mut cur = norm0 * (-q * q / 2.0).exp();
        for k in 0..levels {
            h[(i, k)] = cur;
            let next = (2.0 / (k as f64 + 1.0)).sqrt() * q * cur
                - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    h
}

/// Coefficients `c[(n1, n2)]` of a two-mode state over `|n1, n2>`,
/// `n < levels` per mode. Grid-free: pure ladder algebra.
#[derive(Clone, Debug)]
pub struct FockRep {
    coeffs: Array2<C64>,
}

/// Projects a two-mode grid state onto the number basis. The lost weight
/// (`state norm^2` minus the represented weight) is the truncation deficit;
/// callers decide how much of it they tolerate.
pub fn decompose(state: &GridState, levels: usize) -> Result<FockRep> {
    if state.modes() != 2 {
        return Err(Error::BadModeCount(state.modes()));
    }
    if levels == 0 {
        return Err(Error::Config("need at least one level per mode".into()));
    }
    let h1 = hermite_functions(state.grid(0), levels).mapv(|x| C64::new(x, 0.0));
    let h2 = hermite_functions(state.grid(1), levels).mapv(|x| C64::new(x, 0.0));
    let psi = state
        .amps()
        .view()
        .into_dimensionality::<Ix2>()
        .expect("two-mode state is rank 2");
    let weight = state.grid(0).dq() * state.grid(1).dq();
    let coeffs = h1.t().dot(&psi).dot(&h2) * C64::new(weight, 0.0);
    Ok(FockRep { coeffs })
}

/// Synthesizes the grid state `sum c[(n1,n2)] h_{n1}(q1) h_{n2}(q2)`.
pub fn reconstruct(rep: &FockRep, grid: Grid1D) -> Result<GridState> {
    let levels = rep.levels();
    let h = hermite_functions(&grid, levels).mapv(|x| C64::new(x, 0.0));
    let psi = h.dot(&rep.coeffs).dot(&h.t());
    GridState::new(vec![grid, grid], psi.into_dyn())
}

impl FockRep {
    /// Builds a representation from raw coefficients.
    pub fn from_coeffs(coeffs: Array2<C64>) -> Result<FockRep> {
        if coeffs.nrows() == 0 || coeffs.nrows() != coeffs.ncols() {
            return Err(Error::Config("coefficient matrix must be square and nonempty".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude);
        }
        Ok(FockRep { coeffs })
    }

    pub fn levels(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeff(&self, n1: usize, n2: usize) -> C64 {
        self.coeffs[(n1, n2)]
    }

    pub fn coeffs(&self) -> &Array2<C64> {
        &self.coeffs
    }

    /// Total represented weight `sum |c|^2`.
    pub fn total_weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `<self|other>` in the number basis.
    pub fn inner(&self, other: &FockRep) -> C64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies the two-mode angular operator `i(a1^T a2 - a1 a2^T)`.
    /// Number-conserving, so exact on states supported inside the level
    /// square; partially represented shells lose their edge terms, which is
    /// bounded by the truncation deficit.
    pub fn apply_angular(&self) -> FockRep {
        let n = self.levels();
        let mut out = Array2::from_elem((n, n), C64::new(0.0, 0.0));
        for n1 in 0..n {
            for n2 in 0..n {
                let mut v = C64::new(0.0, 0.0);
                if n1 > 0 && n2 + 1 < n {
                    v += C64::new(0.0, (n1 as f64 * (n2 as f64 + 1.0)).sqrt())
                        * self.coeffs[(n1 - 1, n2 + 1)];
                }
                if n2 > 0 && n1 + 1 < n {
                    v -= C64::new(0.0, ((n1 as f64 + 1.0) * n2 as f64).sqrt())
                        * self.coeffs[(n1 + 1, n2 - 1)];
                }
                out[(n1, n2)] = v;
            }
        }
        FockRep { coeffs: out }
    }

    /// Applies the lowering operator of one mode.
    pub fn lowered(&self, mode: usize) -> Result<FockRep> {
        if mode > 1 {
            return Err(Error::BadModeIndex { index: mode, modes: 2 });
        }
        let n = self.levels();
        let mut out = Array2::from_elem((n, n), C64::new(0.0, 0.0));
        for n1 in 0..n {
            for n2 in 0..n {
                out[(n1, n2)] = match mode {
                    0 => {
                        if n1 + 1 < n {
                            self.coeffs[(n1 + 1, n2)] * (n1 as f64 + 1.0).sqrt()
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    }
                    _ => {
                        if n2 + 1 < n {
                            self.coeffs[(n1, n2 + 1)] * (n2 as f64 + 1.0).sqrt()
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    }
                };
            }
        }
        Ok(FockRep { coeffs: out })
    }

    /// Multiplies each coefficient by the occupation of one mode.
    pub fn number_weighted(&self, mode: usize) -> Result<FockRep> {
        if mode > 1 {
            return Err(Error::BadModeIndex { index: mode, modes: 2 });
        }
        let mut out = self.coeffs.clone();
        for ((n1, n2), v) in out.indexed_iter_mut() {
            let occ = if mode == 0 { n1 } else { n2 };
            *v *= occ as f64;
        }
        Ok(FockRep { coeffs: out })
    }

    /// Clock rotation on one mode: level `n` acquires `exp(-i n phi)`.
    pub fn rotate_mode(&self, mode: usize, phi: f64) -> Result<FockRep> {
        if mode > 1 {
            return Err(Error::BadModeIndex { index: mode, modes: 2 });
        }
        let mut out = self.coeffs.clone();
        for ((n1, n2), v) in out.indexed_iter_mut() {
            let occ = if mode == 0 { n1 } else { n2 };
            *v *= C64::from_polar(1.0, -(occ as f64) * phi);
        }
        Ok(FockRep { coeffs: out })
    }

    /// `<L>` over the represented weight.
    pub fn angular_mean(&self) -> f64 {
        self.inner(&self.apply_angular()).re
    }

    /// `<L^2>` over the represented weight.
    pub fn angular_second_moment(&self) -> f64 {
        let l = self.apply_angular();
        l.inner(&l).re
    }

    /// Mean occupation of each mode.
    pub fn number_means(&self) -> (f64, f64) {
        let mut n1m = 0.0;
        let mut n2m = 0.0;
        for ((n1, n2), c) in self.coeffs.indexed_iter() {
            let w = c.norm_sqr();
            n1m += n1 as f64 * w;
            n2m += n2 as f64 * w;
        }
        (n1m, n2m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{eigenstate, Branch};

    #[test]
    fn hermite_functions_are_orthonormal_on_a_wide_grid() {
        // Level 63 turns around at sqrt(127) ~ 11.3, so extent 16 holds all
        // of them; extent 8 would clip everything beyond n ~ 30.
        let g = Grid1D::new(512, 16.0).unwrap();
        let h = hermite_functions(&g, 64);
        let gram = h.t().dot(&h) * g.dq();
        let mut max_err = 0.0f64;
        for i in 0..64 {
            for j in 0..64 {
                let want = if i == j { 1.0 } else { 0.0 };
                max_err = max_err.max((gram[(i, j)] - want).abs());
            }
        }
        assert!(max_err < 1e-9, "Gram deviation {max_err}");
    }

    #[test]
    fn vacuum_decomposes_to_the_corner() {
        let g = Grid1D::new(256, 8.0).unwrap();
        let psi = GridState::from_fn(vec![g, g], |q| {
            C64::new(
                (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() / std::f64::consts::PI.sqrt(),
                0.0,
            )
        })
        .unwrap();
        let rep = decompose(&psi, 8).unwrap();
        assert!((rep.coeff(0, 0).re - 1.0).abs() < 1e-12);
        let rest: f64 = rep
            .coeffs()
            .indexed_iter()
            .filter(|((a, b), _)| !(*a == 0 && *b == 0))
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        assert!(rest < 1e-12, "stray coefficient {rest}");
    }

    /// The width-1, eigenvalue-2 state decomposes exactly into the shell-2
    /// combination (|0,2> - |2,0>)/2 + (i/sqrt 2)|1,1>.
    #[test]
    fn unit_width_eigenstate_has_known_coefficients() {
        let g = Grid1D::new(256, 8.0).unwrap();
        let psi = eigenstate(g, 2.0, 1.0, Branch::Polar).unwrap();
        let rep = decompose(&psi, 8).unwrap();
        let half = C64::new(0.5, 0.0);
        let i_over_rt2 = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        assert!((rep.coeff(0, 2) - half).norm() < 1e-9, "c02 = {}", rep.coeff(0, 2));
        assert!((rep.coeff(2, 0) + half).norm() < 1e-9, "c20 = {}", rep.coeff(2, 0));
        assert!((rep.coeff(1, 1) - i_over_rt2).norm() < 1e-9, "c11 = {}", rep.coeff(1, 1));
        let named: f64 = 0.25 + 0.25 + 0.5;
        assert!((rep.total_weight() - named).abs() < 1e-9);

        assert!((rep.angular_mean() - 2.0).abs() < 1e-9);
        assert!((rep.angular_second_moment() - 4.0).abs() < 1e-9);
        let (n1, n2) = rep.number_means();
        assert!((n1 - 1.0).abs() < 1e-9 && (n2 - 1.0).abs() < 1e-9, "({n1}, {n2})");
    }

    #[test]
    fn round_trip_from_known_coefficients() {
        let levels = 12;
        let mut c = Array2::from_elem((levels, levels), C64::new(0.0, 0.0));
        // A handful of fixed coefficients spread over low shells.
        c[(0, 0)] = C64::new(0.5, 0.0);
        c[(1, 2)] = C64::new(0.3, -0.4);
        c[(3, 1)] = C64::new(-0.2, 0.1);
        c[(5, 4)] = C64::new(0.0, 0.45);
        c[(2, 7)] = C64::new(0.15, 0.2);
        let rep = FockRep::from_coeffs(c.clone()).unwrap();
        let g = Grid1D::new(256, 8.0).unwrap();
        let psi = reconstruct(&rep, g).unwrap();
        let back = decompose(&psi, levels).unwrap();
        let max_err = c
            .iter()
            .zip(back.coeffs().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "coefficient drift {max_err}");
    }

    #[test]
    fn equal_rotation_preserves_angular_moments_exactly() {
        let g = Grid1D::new(256, 8.0).unwrap();
        let psi = eigenstate(g, 2.0, 1.0, Branch::Polar).unwrap();
        let rep = decompose(&psi, 16).unwrap();
        let rot = rep
            .rotate_mode(0, 0.613)
            .unwrap()
            .rotate_mode(1, 0.613)
            .unwrap();
        assert!((rot.angular_mean() - rep.angular_mean()).abs() < 1e-12);
        assert!((rot.angular_second_moment() - rep.angular_second_moment()).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_single_mode_rotation_kills_the_angular_mean() {
        let g = Grid1D::new(256, 8.0).unwrap();
        let psi = eigenstate(g, 2.0, 1.0, Branch::Polar).unwrap();
        let rep = decompose(&psi, 16).unwrap();
        let rot = rep.rotate_mode(0, std::f64::consts::FRAC_PI_2).unwrap();
        // The angular correlation moves entirely into the other quadrature,
        // and the rotated shell-2 state carries <L^2> = 2: it is an equal mix
        // of circulation +2/-2 amplitude with a zero-circulation component.
        assert!(rot.angular_mean().abs() < 1e-9, "mean {}", rot.angular_mean());
        assert!((rot.angular_second_moment() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn lowering_matches_ladder_arithmetic() {
        let mut c = Array2::from_elem((4, 4), C64::new(0.0, 0.0));
        c[(2, 1)] = C64::new(1.0, 0.0);
        let rep = FockRep::from_coeffs(c).unwrap();
        let low = rep.lowered(0).unwrap();
        assert!((low.coeff(1, 1) - C64::new(std::f64::consts::SQRT_2, 0.0)).norm() < 1e-15);
        let low2 = rep.lowered(1).unwrap();
        assert!((low2.coeff(2, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
