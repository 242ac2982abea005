//! The one-photon and two-photon entanglement-distribution circuits, and the
//! closed-form qubit-sector matrix elements they produce.
//!
//! All closed forms here are quoted with the detector efficiency factored out
//! (`zeta = 1`); multiply by `zeta` (one-photon) or `zeta^2` (two-photon) to
//! recover absolute values.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::entanglement::{QubitBasis, TwoQubitDm};
use crate::error::{Error, Result};
use crate::fock::UnitaryMatrix;
use crate::sources::PhotonStatistics;
use crate::subtraction::{DetectorModel, SchemeSpec};
use crate::{fock::ScaleExponents, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Two nodes sharing one delocalized photon; qubits are `|0>`, `|1>` per memory.
    OnePhoton,
    /// Two nodes each holding one polarization qubit.
    TwoPhoton,
}

impl SchemeKind {
    pub fn mode_count(self) -> usize {
        match self {
            Self::OnePhoton => 2,
            Self::TwoPhoton => 4,
        }
    }

    /// Click patterns that herald a useful state.
    pub fn heralding_patterns(self) -> &'static [&'static [u8]] {
        match self {
            Self::OnePhoton => &[&[1, 0], &[0, 1]],
            Self::TwoPhoton => &[&[1, 0, 1, 0], &[0, 1, 0, 1], &[1, 0, 0, 1], &[0, 1, 1, 0]],
        }
    }

    pub fn default_clicks(self) -> Vec<u8> {
        self.heralding_patterns()[0].to_vec()
    }

    pub fn accepts(self, clicks: &[u8]) -> bool {
        self.heralding_patterns().contains(&clicks)
    }

    pub fn check_clicks(self, clicks: &[u8]) -> Result<()> {
        if !self.accepts(clicks) {
            return Err(Error::InvalidClicks(format!("{clicks:?} does not herald the {self} scheme")));
        }
        Ok(())
    }

    /// Number of equivalent heralding patterns.
    pub fn multiplicity(self) -> f64 {
        self.heralding_patterns().len() as f64
    }

    /// Power of `zeta` in the heralding probability.
    pub fn zeta_power(self) -> u32 {
        match self {
            Self::OnePhoton => 1,
            Self::TwoPhoton => 2,
        }
    }

    pub fn unitary(self) -> UnitaryMatrix {
        match self {
            Self::OnePhoton => one_photon_unitary(),
            Self::TwoPhoton => two_photon_unitary(),
        }
    }

    pub fn build_spec(self, transmission: f64, detector: DetectorModel) -> Result<SchemeSpec> {
        SchemeSpec::new(self.unitary(), transmission, detector, self.default_clicks())
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OnePhoton => "one-photon",
            Self::TwoPhoton => "two-photon",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "one-photon" => Ok(Self::OnePhoton),
            "two" | "two-photon" => Ok(Self::TwoPhoton),
            other => Err(Error::Parse(format!("unknown scheme {other:?} (expected one or two)"))),
        }
    }
}

/// Balanced 50/50 beam splitter.
pub fn one_photon_unitary() -> UnitaryMatrix {
    let s = FRAC_1_SQRT_2;
    UnitaryMatrix::from_real_rows(&[&[s, s], &[s, -s]]).expect("balanced beam splitter is unitary")
}

/// Half-wave plates and polarizing beam splitters of the two-photon circuit.
pub fn two_photon_unitary() -> UnitaryMatrix {
    UnitaryMatrix::from_real_rows(&[
        &[0.5, 0.5, 0.5, -0.5],
        &[0.5, 0.5, -0.5, 0.5],
        &[0.5, -0.5, 0.5, 0.5],
        &[-0.5, 0.5, 0.5, 0.5],
    ])
    .expect("two-photon network is unitary")
}

pub fn build_one_photon_spec(transmission: f64, detector: DetectorModel) -> Result<SchemeSpec> {
    SchemeKind::OnePhoton.build_spec(transmission, detector)
}

pub fn build_two_photon_spec(transmission: f64, detector: DetectorModel) -> Result<SchemeSpec> {
    SchemeKind::TwoPhoton.build_spec(transmission, detector)
}

/// Which closed form to use for the one-photon elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticForm {
    /// Leading order in `T`; any photon statistics.
    SmallT,
    /// Exact in `T`; statistics with at most two photons.
    GeneralT,
}

/// Nonzero elements of the projected one-photon state in the basis
/// `|00>, |01>, |10>, |11>`, with `c = <01|rho|10>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnePhotonElements {
    pub rho00: f64,
    pub rho01: f64,
    pub rho10: f64,
    pub rho11: f64,
    pub c: f64,
}

impl OnePhotonElements {
    pub fn to_dm(&self) -> TwoQubitDm {
        let mut m = nalgebra::Matrix4::<C64>::zeros();
        m[(0, 0)] = self.rho00.into();
        m[(1, 1)] = self.rho01.into();
        m[(2, 2)] = self.rho10.into();
        m[(3, 3)] = self.rho11.into();
        m[(1, 2)] = self.c.into();
        m[(2, 1)] = self.c.into();
        TwoQubitDm::new(m, QubitBasis::PhotonNumber, ScaleExponents { zeta: 1 })
    }

    /// `|c|^2 - rho00 * rho11`; positive iff the state is entangled.
    pub fn ppt_determinant(&self) -> f64 {
        self.c * self.c - self.rho00 * self.rho11
    }
}

/// Closed-form projected elements of the one-photon scheme for clicks `(1, 0)`;
/// the `(0, 1)` pattern flips the sign of `c`.
pub fn analytic_one_photon_elements(stats: &PhotonStatistics, t: f64, form: AnalyticForm) -> Result<OnePhotonElements> {
    let (p0, p1, p2) = (stats.p(0), stats.p(1), stats.p(2));
    match form {
        AnalyticForm::SmallT => Ok(OnePhotonElements {
            rho00: t * p0 * p1,
            rho01: t * (p0 * p2 + 0.5 * p1 * p1),
            rho10: t * (p0 * p2 + 0.5 * p1 * p1),
            rho11: 2.0 * t * p1 * p2,
            c: 0.5 * t * p1 * p1,
        }),
        AnalyticForm::GeneralT => {
            if stats.has_mass_above(2) {
                return Err(Error::Unsupported(
                    "the general-T closed form covers statistics of at most two photons".into(),
                ));
            }
            let s = 1.0 - t;
            let a = p1 + 2.0 * t * p2;
            let diag = 0.5 * t * s * (p1 * p1 + 2.0 * p0 * p2 + 6.0 * t * p1 * p2 + 6.0 * t * t * p2 * p2);
            Ok(OnePhotonElements {
                rho00: t * a * (p0 + t * p1 + t * t * p2),
                rho01: diag,
                rho10: diag,
                rho11: 2.0 * t * s * s * p2 * a,
                c: 0.5 * t * s * a * a,
            })
        }
    }
}

/// Nonzero elements of the projected two-photon state in the basis
/// `|hh>, |hv>, |vh>, |vv>`, with `c = <hh|rho|vv>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPhotonElements {
    pub hh: f64,
    pub hv: f64,
    pub vh: f64,
    pub vv: f64,
    pub c: f64,
}

impl TwoPhotonElements {
    pub fn to_dm(&self) -> TwoQubitDm {
        let mut m = nalgebra::Matrix4::<C64>::zeros();
        m[(0, 0)] = self.hh.into();
        m[(1, 1)] = self.hv.into();
        m[(2, 2)] = self.vh.into();
        m[(3, 3)] = self.vv.into();
        m[(0, 3)] = self.c.into();
        m[(3, 0)] = self.c.into();
        TwoQubitDm::new(m, QubitBasis::Polarization, ScaleExponents { zeta: 2 })
    }
}

/// Leading-order (`zeta, T -> 0`) projected elements of the two-photon scheme
/// for clicks `(1, 0, 1, 0)`.
pub fn analytic_two_photon_elements(stats: &PhotonStatistics, t: f64) -> TwoPhotonElements {
    let (p0, p1, p2, p3) = (stats.p(0), stats.p(1), stats.p(2), stats.p(3));
    let pref = 0.25 * t * t;
    let diag = pref * (p1.powi(4) + p0 * p1 * p1 * p2 + 4.0 * p0 * p0 * p2 * p2 + 3.0 * p0 * p0 * p1 * p3);
    let off = pref * (5.0 * p0 * p1 * p1 * p2 + 3.0 * p0 * p0 * p1 * p3);
    TwoPhotonElements { hh: diag, hv: off, vh: off, vv: diag, c: pref * p1.powi(4) }
}

/// Left side of the general-T one-photon entanglement condition,
/// `p1^2 (p1^2 / 4 - 2 p0 p2)`.
pub fn general_t_lhs(p0: f64, p1: f64, p2: f64) -> f64 {
    p1 * p1 * (p1 * p1 / 4.0 - 2.0 * p0 * p2)
}

/// Right side of the general-T one-photon entanglement condition, a quartic in
/// `T` with non-negative coefficients.
pub fn general_t_rhs(p0: f64, p1: f64, p2: f64, t: f64) -> f64 {
    4.0 * t.powi(4) * p2.powi(4)
        + 8.0 * t.powi(3) * p1 * p2.powi(3)
        + 4.0 * t * t * p2 * p2 * (p1 * p1 + 2.0 * p0 * p2)
        + 8.0 * t * p0 * p1 * p2 * p2
}

/// Test fixtures with closed-form expected states.
#[doc(hidden)]
pub mod fixtures {
    use crate::fock::{MixedState, PureBranch, ScaleExponents};
    use crate::{Result, C64};
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Heralded two-photon state from ideal sources with clicks `(1, 0, 1, 0)`
    /// at transmission `t`, with `zeta^2` factored out.
    pub fn ideal_two_photon_output(t: f64) -> Result<MixedState> {
        let s = 1.0 - t;
        let pref = 0.5 * t * t;
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        let one = C64::new(1.0, 0.0);
        let phi_plus = PureBranch::from_terms(pref * s * s, 4, &[(&[1, 0, 1, 0], r), (&[0, 1, 0, 1], r)])?;
        let single = pref * 0.5 * t * s;
        let mut branches = vec![phi_plus];
        for occ in [[1u8, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]] {
            branches.push(PureBranch::from_terms(single, 4, &[(&occ, one)])?);
        }
        branches.push(PureBranch::from_terms(pref * t * t, 4, &[(&[0, 0, 0, 0], one)])?);
        MixedState::new(4, branches, ScaleExponents { zeta: 2 })
    }
}
