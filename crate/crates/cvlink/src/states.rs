//! State preparation: angular-phase eigenstates, their superpositions, and
//! coherent states.
//!
//! The two-mode family
//!
//! ```text
//! psi(q1, q2) = sqrt(a^3 / 2 pi) * r^2 * exp(i lambda theta) * exp(-a r^2 / 2)
//! ```
//!
//! with `r^2 = q1^2 + q2^2` is exactly unit-norm for every real `lambda` and
//! every regularization width `a > 0`, and the two-mode angular operator acts
//! on it with eigenvalue `lambda` wherever the chosen angle branch is smooth.
//! Two branches of `theta` are supported: the full polar angle (single cut on
//! the negative axis, smooth for integer `lambda`) and the principal arctan
//! of `q1/q2` (discontinuous across the whole `q2 = 0` line for odd integer
//! `lambda`, which spreads the angular spectrum).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridState};

/// Relative norm loss above which a state is considered to escape the box.
pub const SUPPORT_DEFICIT_LIMIT: f64 = 1e-2;

/// Which branch of the angle enters `exp(i lambda theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Principal value of `arctan(q1 / q2)`, range `(-pi/2, pi/2]`; on the
    /// line `q2 = 0` the limit `sign(q1) * pi/2` is used.
    Arctan,
    /// Full polar angle `atan2(q1, q2)`, measured from the positive q2-axis
    /// toward positive q1, range `(-pi, pi]`.
    Polar,
}

/// The angle of `(q1, q2)` on the requested branch.
pub fn angle(q1: f64, q2: f64, branch: Branch) -> f64 {
    match branch {
        Branch::Polar => q1.atan2(q2),
        Branch::Arctan => {
            if q2 == 0.0 {
                if q1 == 0.0 {
                    0.0
                } else {
                    q1.signum() * std::f64::consts::FRAC_PI_2
                }
            } else {
                (q1 / q2).atan()
            }
        }
    }
}

/// Closed-form provenance of a grid state: enough to re-synthesize it
/// exactly on any grid. Carried by [`GridState`] and consumed by transforms
/// that map the family onto itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenTag {
    pub lambda: f64,
    pub a: f64,
    pub branch: Branch,
}

fn check_regularization(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::BadRegularization(a));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::Config(format!("angular eigenvalue must be finite, got {lambda}")));
    }
    Ok(())
}

/// Raw synthesis with the analytic normalization constant; no support check.
pub(crate) fn synthesize_eigenstate(
    grid: Grid1D,
    lambda: f64,
    a: f64,
    branch: Branch,
) -> Result<GridState> {
    let norm = (a.powi(3) / (2.0 * std::f64::consts::PI)).sqrt();
    GridState::from_fn(vec![grid, grid], move |q| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        let th = angle(q[0], q[1], branch);
        C64::from_polar(norm * r2 * (-a * r2 / 2.0).exp(), lambda * th)
    })
}

/// Builds the two-mode angular eigenstate on a square grid, renormalized on
/// the lattice and tagged with its closed form.
///
/// Fails with `SupportEscapesGrid` when the analytic unit norm loses more
/// than [`SUPPORT_DEFICIT_LIMIT`] on the box, which happens when `a` is too
/// small for the extent (the radial peak sits at `r = sqrt(2/a)`).
pub fn eigenstate(grid: Grid1D, lambda: f64, a: f64, branch: Branch) -> Result<GridState> {
    check_regularization(a)?;
    check_lambda(lambda)?;
    let raw = synthesize_eigenstate(grid, lambda, a, branch)?;
    let deficit = (1.0 - raw.norm_squared()).abs();
    if deficit > SUPPORT_DEFICIT_LIMIT {
        return Err(Error::SupportEscapesGrid { deficit, limit: SUPPORT_DEFICIT_LIMIT });
    }
    Ok(raw
        .normalize()?
        .with_tag(EigenTag { lambda, a, branch }))
}

/// Weighted superposition `sum_k w_k psi_{lambda_k}` over a common width and
/// branch, renormalized on the lattice. A single node keeps the closed-form
/// tag; genuine superpositions do not have one.
pub fn superposition(
    grid: Grid1D,
    nodes: &[f64],
    weights: &[C64],
    a: f64,
    branch: Branch,
) -> Result<GridState> {
    check_regularization(a)?;
    if nodes.is_empty() {
        return Err(Error::EmptyNodes);
    }
    if nodes.iter().any(|l| !l.is_finite()) {
        return Err(Error::BadNodes);
    }
    if weights.len() != nodes.len() {
        return Err(Error::WeightLength { got: weights.len(), want: nodes.len() });
    }
    if nodes.len() == 1 {
        let st = eigenstate(grid, nodes[0], a, branch)?;
        if weights[0].norm() == 0.0 {
            return Err(Error::ZeroNorm);
        }
        return Ok(st);
    }
    let norm = (a.powi(3) / (2.0 * std::f64::consts::PI)).sqrt();
    let nodes = nodes.to_vec();
    let weights = weights.to_vec();
    let raw = GridState::from_fn(vec![grid, grid], move |q| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        let th = angle(q[0], q[1], branch);
        let radial = norm * r2 * (-a * r2 / 2.0).exp();
        let mut phase_sum = C64::new(0.0, 0.0);
        for (l, w) in nodes.iter().zip(&weights) {
            phase_sum += w * C64::from_polar(1.0, l * th);
        }
        phase_sum * radial
    })?;
    // The nodes interfere, so the raw norm is not 1 in general; renormalize
    // and let a fully cancelled combination surface as ZeroNorm.
    raw.normalize()
}

/// Single-mode coherent state of the standard lowering operator
/// `(q + d/dq)/sqrt(2)` with eigenvalue `alpha`: a displaced vacuum centered
/// at `q0 = sqrt(2) Re alpha`.
pub fn coherent(grid: Grid1D, alpha: C64) -> Result<GridState> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFiniteAmplitude);
    }
    let q0 = std::f64::consts::SQRT_2 * alpha.re;
    let p0 = std::f64::consts::SQRT_2 * alpha.im;
    if q0.abs() >= grid.extent() {
        return Err(Error::CoherentTooLarge(alpha.norm()));
    }
    let raw = GridState::from_fn(vec![grid], move |q| {
        let d = q[0] - q0;
        C64::from_polar(
            (-d * d / 2.0).exp() / std::f64::consts::PI.powf(0.25),
            p0 * (q[0] - q0 / 2.0),
        )
    })?;
    let deficit = (1.0 - raw.norm_squared()).abs();
    if deficit > SUPPORT_DEFICIT_LIMIT {
        return Err(Error::SupportEscapesGrid { deficit, limit: SUPPORT_DEFICIT_LIMIT });
    }
    Ok(raw.normalize()?)
}

/// What a node's label stands for in a [`LambdaState`].
///
/// `Single` keeps one two-mode state per node. The composite structures pair
/// node content so that the total circulation of every node vanishes:
/// `OppositePair` puts `(+lambda, -lambda)` on four modes, `CorrelatedPairs`
/// gives two parties the same opposite pair, and `ShiftedPairs` offsets the
/// second party's label by a fixed real shift. None of the composites are
/// ever synthesized on a grid (the product grids would be astronomically
/// large); they exist to track weights, labels, and their exact symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Structure {
    Single,
    OppositePair,
    CorrelatedPairs,
    ShiftedPairs { shift: f64 },
}

/// A state described directly in the circulation eigenbasis: a complex
/// weight per node on a uniform ladder of labels. Weights are normalized in
/// the node measure, `sum |w|^2 * spacing = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaState {
    nodes: Vec<f64>,
    weights: Vec<C64>,
    structure: Structure,
}

impl LambdaState {
    /// Builds and normalizes a node-weighted state. Nodes must be finite,
    /// strictly increasing, and uniformly spaced (a single node is allowed
    /// and given unit nominal spacing). Weights must have matching length
    /// and a nonzero norm; a `ShiftedPairs` shift must be finite.
    pub fn new(nodes: Vec<f64>, weights: Vec<C64>, structure: Structure) -> Result<LambdaState> {
        if nodes.is_empty() {
            return Err(Error::EmptyNodes);
        }
        if nodes.iter().any(|l| !l.is_finite()) {
            return Err(Error::BadNodes);
        }
        if nodes.len() > 1 {
            let dl = nodes[1] - nodes[0];
            if dl <= 0.0 {
                return Err(Error::BadNodes);
            }
            for w in nodes.windows(2) {
                if ((w[1] - w[0]) - dl).abs() > 1e-9 * dl.max(1.0) {
                    return Err(Error::BadNodes);
                }
            }
        }
        if weights.len() != nodes.len() {
            return Err(Error::WeightLength { got: weights.len(), want: nodes.len() });
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude);
        }
        if let Structure::ShiftedPairs { shift } = structure {
            if !shift.is_finite() {
                return Err(Error::BadOffset(shift));
            }
        }
        let mut out = LambdaState { nodes, weights, structure };
        let total: f64 = out.weights.iter().map(|w| w.norm_sqr()).sum::<f64>() * out.spacing();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let scale = 1.0 / total.sqrt();
        for w in &mut out.weights {
            *w *= scale;
        }
        Ok(out)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    /// Node spacing; a single-node ladder reports the nominal spacing 1.
    pub fn spacing(&self) -> f64 {
        if self.nodes.len() > 1 {
            self.nodes[1] - self.nodes[0]
        } else {
            1.0
        }
    }

    /// Probability attached to node `k`: `|w_k|^2 * spacing`.
    pub fn node_probability(&self, k: usize) -> f64 {
        self.weights[k].norm_sqr() * self.spacing()
    }

    /// Mean label under the node probabilities.
    pub fn node_mean(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(l, w)| l * w.norm_sqr()).sum::<f64>()
            * self.spacing()
    }

    /// Label variance under the node probabilities.
    pub fn node_variance(&self) -> f64 {
        let mean = self.node_mean();
        let second = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| l * l * w.norm_sqr())
            .sum::<f64>()
            * self.spacing();
        (second - mean * mean).max(0.0)
    }

    /// Covariance of the two parties' labels, defined for the two-party
    /// structures. `CorrelatedPairs` ties the labels exactly, so the
    /// covariance equals the label variance; `ShiftedPairs` adds a constant
    /// offset, which leaves the covariance unchanged.
    pub fn cross_covariance(&self) -> Option<f64> {
        match self.structure {
            Structure::Single | Structure::OppositePair => None,
            Structure::CorrelatedPairs | Structure::ShiftedPairs { .. } => {
                Some(self.node_variance())
            }
        }
    }

    /// Replaces the weights, renormalizing; lengths must match.
    pub fn with_weights(&self, weights: Vec<C64>) -> Result<LambdaState> {
        LambdaState::new(self.nodes.clone(), weights, self.structure)
    }

    /// Applies `f(node, weight)` to every weight without renormalizing, so a
    /// norm-preserving map is not polluted by a spurious renormalization
    /// scale.
    pub(crate) fn map_weights_unchecked(&self, f: impl Fn(f64, C64) -> C64) -> LambdaState {
        let weights = self.nodes.iter().zip(&self.weights).map(|(&l, &w)| f(l, w)).collect();
        LambdaState { nodes: self.nodes.clone(), weights, structure: self.structure }
    }

    /// Synthesizes the `Single` structure on a square two-mode grid. The
    /// composite structures have no grid form by design.
    pub fn to_grid(&self, grid: Grid1D, a: f64, branch: Branch) -> Result<GridState> {
        match self.structure {
            Structure::Single => superposition(grid, &self.nodes, &self.weights, a, branch),
            _ => Err(Error::Config(
                "only the single structure can be synthesized on a grid".into(),
            )),
        }
    }
}
