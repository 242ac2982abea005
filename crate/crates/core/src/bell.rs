//! Bell tests on heralded states.
//!
//! One-photon entanglement is probed by coherent-state projections (unbalanced
//! homodyning in the limit of unit transmission followed by a no-click event)
//! and the Clauser-Horne combination. Two-photon polarization entanglement is
//! probed by rotating each node's polarization basis and counting coincidences
//! between binary detectors; events with zero or two clicks at a node stay in
//! the normalization but never in the coincidence numerators.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::fock::{MixedState, UnitaryMatrix};
use crate::C64;

/// Largest displacement magnitude accepted.
pub const MAX_DISPLACEMENT: f64 = 10.0;

/// Two alternative displacements per mode: `alpha, alpha'` on a1 and `beta, beta'` on a2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplacementSettings {
    pub alpha: C64,
    pub alpha_p: C64,
    pub beta: C64,
    pub beta_p: C64,
}

impl DisplacementSettings {
    pub fn new(alpha: C64, alpha_p: C64, beta: C64, beta_p: C64) -> Result<Self> {
        for (name, z) in [("alpha", alpha), ("alpha'", alpha_p), ("beta", beta), ("beta'", beta_p)] {
            if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > MAX_DISPLACEMENT {
                return Err(domain(format!("{name} = {z} must be finite with |.| <= {MAX_DISPLACEMENT}")));
            }
        }
        Ok(Self { alpha, alpha_p, beta, beta_p })
    }

    pub fn real(alpha: f64, alpha_p: f64, beta: f64, beta_p: f64) -> Result<Self> {
        Self::new(alpha.into(), alpha_p.into(), beta.into(), beta_p.into())
    }

    pub fn zero() -> Self {
        Self { alpha: C64::default(), alpha_p: C64::default(), beta: C64::default(), beta_p: C64::default() }
    }
}

/// Polarization analyser angles, reduced modulo `pi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSettings {
    pub theta_a: f64,
    pub theta_a_p: f64,
    pub theta_b: f64,
    pub theta_b_p: f64,
}

fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r > PI / 2.0 {
        r - PI
    } else {
        r
    }
}

impl AngleSettings {
    pub fn new(theta_a: f64, theta_a_p: f64, theta_b: f64, theta_b_p: f64) -> Self {
        Self {
            theta_a: reduce_angle(theta_a),
            theta_a_p: reduce_angle(theta_a_p),
            theta_b: reduce_angle(theta_b),
            theta_b_p: reduce_angle(theta_b_p),
        }
    }

    /// `theta_A = 0, theta_A' = -pi/4, theta_B' = -theta_B = 3 pi / 8`.
    pub fn standard() -> Self {
        Self::new(0.0, -PI / 4.0, -3.0 * PI / 8.0, 3.0 * PI / 8.0)
    }
}

fn normalized_trace(state: &MixedState) -> Result<f64> {
    let tr = state.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(tr)
}

/// Joint no-count probability `<alpha, beta| rho |alpha, beta> / Tr rho`.
pub fn q_joint(state: &MixedState, alpha: C64, beta: C64) -> Result<f64> {
    state.check_modes(2)?;
    let tr = normalized_trace(state)?;
    let mut sum = 0.0;
    for b in state.branches() {
        sum += b.weight() * b.coherent_overlap(&[alpha, beta])?.norm_sqr();
    }
    Ok(sum / tr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    A1,
    A2,
}

/// Marginal no-count probability on one memory, the other traced out.
pub fn q_marginal(state: &MixedState, alpha: C64, node: Node) -> Result<f64> {
    state.check_modes(2)?;
    let tr = normalized_trace(state)?;
    let mode = match node {
        Node::A1 => 0,
        Node::A2 => 1,
    };
    let mut sum = 0.0;
    for b in state.branches() {
        sum += b.contract_coherent(mode, alpha)?.mass();
    }
    Ok(sum / tr)
}

fn ch_from_parts(state: &MixedState, s: &DisplacementSettings, tr: f64) -> Result<f64> {
    let joint = |a: C64, b: C64| -> Result<f64> {
        let mut sum = 0.0;
        for br in state.branches() {
            sum += br.weight() * br.coherent_overlap(&[a, b])?.norm_sqr();
        }
        Ok(sum / tr)
    };
    let marginal = |z: C64, mode: usize| -> Result<f64> {
        let mut sum = 0.0;
        for br in state.branches() {
            sum += br.contract_coherent(mode, z)?.mass();
        }
        Ok(sum / tr)
    };
    Ok(joint(s.alpha, s.beta)? + joint(s.alpha_p, s.beta)? + joint(s.alpha, s.beta_p)?
        - joint(s.alpha_p, s.beta_p)?
        - marginal(s.alpha, 0)?
        - marginal(s.beta, 1)?)
}

/// Clauser-Horne combination; local hidden variables give `-1 <= CH <= 0`.
pub fn ch_value(state: &MixedState, settings: &DisplacementSettings) -> Result<f64> {
    state.check_modes(2)?;
    let tr = normalized_trace(state)?;
    ch_from_parts(state, settings, tr)
}

/// Half-wave-plate basis rotation on one node,
/// `a1 -> a1 cos t + a2 sin t`, `a2 -> a1 sin t - a2 cos t`.
fn node_rotation(theta: f64) -> UnitaryMatrix {
    let (s, c) = theta.sin_cos();
    UnitaryMatrix::from_real_rows(&[&[c, s], &[s, -c]]).expect("reflection is unitary")
}

/// Rotates the polarization bases of node A (modes 1, 2) and node B (modes 3, 4).
///
/// Node B's plate angle is measured in the mirrored frame, so it enters the
/// mode map as `-theta_b`. With this convention `J(theta_a, theta_b) =
/// cos 2(theta_a + theta_b)` on `|Phi+>`, and the standard angles reach the
/// Tsirelson bound with negative sign.
pub fn rotate_polarization(state: &MixedState, theta_a: f64, theta_b: f64) -> Result<MixedState> {
    state.check_modes(4)?;
    let u = UnitaryMatrix::block_diagonal(&[&node_rotation(theta_a), &node_rotation(-theta_b)]);
    state.map_branches(|b| b.transform_modes(&u))
}

/// Which detector at node A (1 or 2) and node B (3 or 4) fire together.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectorPair {
    P13,
    P14,
    P23,
    P24,
}

impl DetectorPair {
    pub const ALL: [DetectorPair; 4] = [Self::P13, Self::P14, Self::P23, Self::P24];

    /// Modes that must be occupied; their partners at each node must be empty.
    fn lit(self) -> (usize, usize) {
        match self {
            Self::P13 => (0, 2),
            Self::P14 => (0, 3),
            Self::P23 => (1, 2),
            Self::P24 => (1, 3),
        }
    }
}

/// Probability that exactly the two detectors of `pair` click, normalized by the full trace.
pub fn coincidence_probability(state: &MixedState, pair: DetectorPair) -> Result<f64> {
    state.check_modes(4)?;
    let tr = normalized_trace(state)?;
    let (a, b) = pair.lit();
    let p = state.occupation_projection_probability(|mode, n| if mode == a || mode == b { n >= 1 } else { n == 0 });
    Ok(p / tr)
}

/// Polarization correlation `P13 - P14 - P23 + P24` at the given angles.
pub fn correlation(state: &MixedState, theta_a: f64, theta_b: f64) -> Result<f64> {
    let rotated = rotate_polarization(state, theta_a, theta_b)?;
    let p = |pair| coincidence_probability(&rotated, pair);
    Ok(p(DetectorPair::P13)? - p(DetectorPair::P14)? - p(DetectorPair::P23)? + p(DetectorPair::P24)?)
}

/// CHSH combination; local hidden variables give `|CHSH| <= 2`.
pub fn chsh_value(state: &MixedState, s: &AngleSettings) -> Result<f64> {
    state.check_modes(4)?;
    normalized_trace(state)?;
    Ok(correlation(state, s.theta_a, s.theta_b)?
        + correlation(state, s.theta_a_p, s.theta_b)?
        + correlation(state, s.theta_a, s.theta_b_p)?
        - correlation(state, s.theta_a_p, s.theta_b_p)?)
}
