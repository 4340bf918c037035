//! Polynomial differential operators on grid states.
//!
//! An operator is a sum of terms `coeff * f1 f2 ... fk`, each factor either
//! multiplication by a mode coordinate or a derivative along a mode. Factors
//! apply right-to-left, matching operator notation: the rightmost factor acts
//! on the state first. Derivatives are spectral, so operators built here are
//! exact on band-limited states.
//!
//! Momentum uses `p = +i d/dq`. With that sign the two-mode angular operator
//! `q1 p2 - p1 q2` acts on `exp(i lambda theta)` profiles with eigenvalue
//! `+lambda` (theta measured from the positive q2-axis toward positive q1),
//! at the cost of `[q, p] = -i` rather than `+i`.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::GridState;
use crate::spectral::spectral_derivative;

/// One primitive factor: multiply by a coordinate, or differentiate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    /// Multiply by `q` of the given mode.
    Q(usize),
    /// `d/dq` along the given mode.
    D(usize),
}

impl Factor {
    fn mode(&self) -> usize {
        match self {
            Factor::Q(m) | Factor::D(m) => *m,
        }
    }
}

#[derive(Clone, Debug)]
struct Term {
    coeff: C64,
    factors: Vec<Factor>,
}

/// A linear combination of products of coordinate/derivative factors.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    terms: Vec<Term>,
}

impl OperatorSpec {
    pub fn identity() -> Self {
        OperatorSpec { terms: vec![Term { coeff: C64::new(1.0, 0.0), factors: vec![] }] }
    }

    /// `q` on one mode.
    pub fn position(mode: usize) -> Self {
        OperatorSpec {
            terms: vec![Term { coeff: C64::new(1.0, 0.0), factors: vec![Factor::Q(mode)] }],
        }
    }

    /// Bare `d/dq` on one mode (no factor of i).
    pub fn derivative(mode: usize) -> Self {
        OperatorSpec {
            terms: vec![Term { coeff: C64::new(1.0, 0.0), factors: vec![Factor::D(mode)] }],
        }
    }

    /// `p = +i d/dq`; see the module notes for what this sign buys.
    pub fn momentum(mode: usize) -> Self {
        OperatorSpec {
            terms: vec![Term { coeff: C64::new(0.0, 1.0), factors: vec![Factor::D(mode)] }],
        }
    }

    /// Two-mode angular operator `q_a p_b - p_a q_b = i(q_a d_b - q_b d_a)`.
    pub fn angular_momentum(mode_a: usize, mode_b: usize) -> Self {
        OperatorSpec {
            terms: vec![
                Term {
                    coeff: C64::new(0.0, 1.0),
                    factors: vec![Factor::Q(mode_a), Factor::D(mode_b)],
                },
                Term {
                    coeff: C64::new(0.0, -1.0),
                    factors: vec![Factor::Q(mode_b), Factor::D(mode_a)],
                },
            ],
        }
    }

    /// Per-mode energy density `q^2 - d^2` (twice the oscillator number plus
    /// one on number states).
    pub fn mode_energy(mode: usize) -> Self {
        OperatorSpec {
            terms: vec![
                Term {
                    coeff: C64::new(1.0, 0.0),
                    factors: vec![Factor::Q(mode), Factor::Q(mode)],
                },
                Term {
                    coeff: C64::new(-1.0, 0.0),
                    factors: vec![Factor::D(mode), Factor::D(mode)],
                },
            ],
        }
    }

    /// Generator of the signal/ancilla mixing flow, `i(q_a d_s - q_s d_a)`:
    /// `exp(i theta B)` rotates the signal mode toward the ancilla.
    pub fn beam_splitter_generator(signal: usize, ancilla: usize) -> Self {
        OperatorSpec {
            terms: vec![
                Term {
                    coeff: C64::new(0.0, 1.0),
                    factors: vec![Factor::Q(ancilla), Factor::D(signal)],
                },
                Term {
                    coeff: C64::new(0.0, -1.0),
                    factors: vec![Factor::Q(signal), Factor::D(ancilla)],
                },
            ],
        }
    }

    pub fn scale(mut self, c: C64) -> Self {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }

    pub fn add(mut self, other: OperatorSpec) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// Operator product `self * other` (other acts first).
    pub fn compose(&self, other: &OperatorSpec) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                terms.push(Term { coeff: a.coeff * b.coeff, factors });
            }
        }
        OperatorSpec { terms }
    }

    /// Formal adjoint: reverse factors, conjugate, flip sign once per
    /// derivative (integration by parts with decaying boundary terms).
    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let sign = if t.factors.iter().filter(|f| matches!(f, Factor::D(_))).count() % 2
                    == 1
                {
                    -1.0
                } else {
                    1.0
                };
                let mut factors = t.factors.clone();
                factors.reverse();
                Term { coeff: t.coeff.conj() * sign, factors }
            })
            .collect();
        OperatorSpec { terms }
    }

    /// Canonical term map: factors on distinct modes commute, so each term's
    /// factor list is stably sorted by mode (same-mode order is preserved,
    /// since `q` and `d` on one mode do not commute) and coefficients of
    /// identical factor lists are merged.
    fn canonical(&self) -> BTreeMap<Vec<Factor>, C64> {
        let mut map = BTreeMap::new();
        for t in &self.terms {
            let mut f = t.factors.clone();
            // Insertion sort by mode index; stable, so same-mode order survives.
            for i in 1..f.len() {
                let mut j = i;
                while j > 0 && f[j - 1].mode() > f[j].mode() {
                    f.swap(j - 1, j);
                    j -= 1;
                }
            }
            *map.entry(f).or_insert(C64::new(0.0, 0.0)) += t.coeff;
        }
        map
    }

    /// True when the operator equals its adjoint after canonical reordering
    /// of cross-mode factors. Same-mode products like `q d` are compared
    /// without invoking the commutator, so this is a sufficient test, not a
    /// complete one; all constructors here are covered exactly.
    pub fn is_hermitian(&self) -> bool {
        let a = self.canonical();
        let b = self.adjoint().canonical();
        let scale: f64 = self
            .terms
            .iter()
            .map(|t| t.coeff.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).cloned().collect();
        keys.into_iter().all(|k| {
            let x = a.get(&k).copied().unwrap_or(C64::new(0.0, 0.0));
            let y = b.get(&k).copied().unwrap_or(C64::new(0.0, 0.0));
            (x - y).norm() <= 1e-12 * scale
        })
    }

    fn apply_factor(state: &GridState, f: Factor) -> Result<GridState> {
        match f {
            Factor::Q(m) => state.multiply_coordinate(m),
            Factor::D(m) => spectral_derivative(state, m, 1),
        }
    }

    /// Applies the operator: `sum_t coeff_t * (factors applied right-to-left)`.
    pub fn apply(&self, state: &GridState) -> Result<GridState> {
        for t in &self.terms {
            for f in &t.factors {
                if f.mode() >= state.modes() {
                    return Err(Error::BadModeIndex { index: f.mode(), modes: state.modes() });
                }
            }
        }
        let mut acc = state.scaled(C64::new(0.0, 0.0));
        for t in &self.terms {
            let mut cur = state.clone();
            for f in t.factors.iter().rev() {
                cur = Self::apply_factor(&cur, *f)?;
            }
            acc = acc.add_scaled(t.coeff, &cur)?;
        }
        Ok(acc)
    }

    /// `<state| self |state>` as a Riemann sum. No normalization is applied;
    /// divide by the squared norm yourself if the state is not unit.
    pub fn expectation(&self, state: &GridState) -> Result<C64> {
        let applied = self.apply(state)?;
        state.inner_product(&applied)
    }

    /// Variance for a Hermitian operator, computed as `<A psi|A psi> - <A>^2`
    /// so the result is nonnegative up to rounding even when `<A^2>` suffers
    /// cancellation.
    pub fn variance(&self, state: &GridState) -> Result<f64> {
        let applied = self.apply(state)?;
        let second = applied.inner_product(&applied)?.re;
        let mean = state.inner_product(&applied)?.re;
        Ok((second - mean * mean).max(0.0))
    }
}
