//! Qubit-sector projections and two-qubit entanglement measures.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{FockVector, MixedState, PureBranch, ScaleExponents};
use crate::schemes::{general_t_lhs, general_t_rhs, SchemeKind};
use crate::sources::PhotonStatistics;
use crate::subtraction::SubtractionExpansion;
use crate::C64;

/// Eigenvalues below `-PSD_TOLERANCE` count as negative.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Projected traces below this are treated as empty.
pub const TRACE_GUARD: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitBasis {
    /// `|00>, |01>, |10>, |11>` in photon number of the two memories.
    PhotonNumber,
    /// `|hh>, |hv>, |vh>, |vv>` with `|h>_A = |1,0>` on modes a1, a2.
    Polarization,
}

/// Unnormalized two-qubit density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitDm {
    matrix: Matrix4<C64>,
    basis: QubitBasis,
    scale: ScaleExponents,
}

impl TwoQubitDm {
    pub fn new(matrix: Matrix4<C64>, basis: QubitBasis, scale: ScaleExponents) -> Self {
        Self { matrix, basis, scale }
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.matrix
    }

    pub fn basis(&self) -> QubitBasis {
        self.basis
    }

    pub fn scale(&self) -> ScaleExponents {
        self.scale
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn normalized(&self) -> Result<Matrix4<C64>> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::ZeroTrace);
        }
        Ok(hermitian_part(&self.matrix) / C64::new(tr, 0.0))
    }

    /// Applies `U_A (x) U_B` for single-qubit unitaries given as 2x2 row-major tables.
    pub fn local_rotation(&self, ua: [[C64; 2]; 2], ub: [[C64; 2]; 2]) -> Self {
        let u = Matrix4::from_fn(|i, j| ua[i / 2][j / 2] * ub[i % 2][j % 2]);
        Self { matrix: u * self.matrix * u.adjoint(), ..self.clone() }
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(hermitian_part(&self.matrix)).eigenvalues;
        [e[0], e[1], e[2], e[3]]
    }
}

fn hermitian_part(m: &Matrix4<C64>) -> Matrix4<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Qubit index of a Fock vector in the given basis, if it lies in the sector.
fn qubit_index(basis: QubitBasis, fock: &FockVector) -> Option<usize> {
    let n = fock.occupations();
    match basis {
        QubitBasis::PhotonNumber => {
            if n.len() == 2 && n[0] <= 1 && n[1] <= 1 {
                Some(2 * n[0] as usize + n[1] as usize)
            } else {
                None
            }
        }
        QubitBasis::Polarization => {
            if n.len() != 4 || n[0] + n[1] != 1 || n[2] + n[3] != 1 {
                return None;
            }
            Some(2 * n[1] as usize + n[3] as usize)
        }
    }
}

fn project_branch(basis: QubitBasis, branch: &PureBranch) -> Matrix4<C64> {
    let mut v = [C64::default(); 4];
    for (fock, &a) in branch.amplitudes() {
        if let Some(i) = qubit_index(basis, fock) {
            v[i] += a;
        }
    }
    Matrix4::from_fn(|i, j| v[i] * v[j].conj()) * C64::new(branch.weight(), 0.0)
}

fn project(state: &MixedState, basis: QubitBasis, modes: usize) -> Result<TwoQubitDm> {
    state.check_modes(modes)?;
    let matrix = state.branches().iter().map(|b| project_branch(basis, b)).fold(Matrix4::zeros(), |acc, m| acc + m);
    Ok(TwoQubitDm::new(matrix, basis, state.scale()))
}

/// Projects each memory onto its `{|0>, |1>}` subspace.
pub fn project_one_photon_qubits(state: &MixedState) -> Result<TwoQubitDm> {
    project(state, QubitBasis::PhotonNumber, 2)
}

/// Projects each node onto its single-photon polarization subspace.
pub fn project_two_photon_qubits(state: &MixedState) -> Result<TwoQubitDm> {
    project(state, QubitBasis::Polarization, 4)
}

pub fn project_for(kind: SchemeKind, state: &MixedState) -> Result<TwoQubitDm> {
    match kind {
        SchemeKind::OnePhoton => project_one_photon_qubits(state),
        SchemeKind::TwoPhoton => project_two_photon_qubits(state),
    }
}

/// The projected qubit matrix as a polynomial in `T` and `1 - T`, so it can be
/// evaluated at many transmissions without re-running the Kraus enumeration.
#[derive(Clone, Debug)]
pub struct ProjectedExpansion {
    kind: SchemeKind,
    /// `(powers of T, powers of 1 - T) -> coefficient matrix`.
    coefficients: BTreeMap<(u32, u32), Matrix4<C64>>,
    scale: ScaleExponents,
}

impl ProjectedExpansion {
    pub fn new(kind: SchemeKind, expansion: &SubtractionExpansion) -> Result<Self> {
        if expansion.mode_count() != kind.mode_count() {
            return Err(Error::Dimension { expected: kind.mode_count(), found: expansion.mode_count() });
        }
        let basis = match kind {
            SchemeKind::OnePhoton => QubitBasis::PhotonNumber,
            SchemeKind::TwoPhoton => QubitBasis::Polarization,
        };
        let mut coefficients = BTreeMap::<(u32, u32), Matrix4<C64>>::new();
        for term in expansion.terms() {
            let m = project_branch(basis, &term.branch) * C64::new(term.weight, 0.0);
            if m.iter().all(|z| *z == C64::default()) {
                continue;
            }
            *coefficients.entry((term.subtracted, term.residual)).or_insert_with(Matrix4::zeros) += m;
        }
        Ok(Self { kind, coefficients, scale: expansion.scale() })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn at(&self, t: f64) -> TwoQubitDm {
        let s = 1.0 - t;
        let matrix = self
            .coefficients
            .iter()
            .map(|(&(a, b), m)| m * C64::new(t.powi(a as i32) * s.powi(b as i32), 0.0))
            .fold(Matrix4::zeros(), |acc, m| acc + m);
        let basis = match self.kind {
            SchemeKind::OnePhoton => QubitBasis::PhotonNumber,
            SchemeKind::TwoPhoton => QubitBasis::Polarization,
        };
        TwoQubitDm::new(matrix, basis, self.scale)
    }
}

/// Partial transpose on the second qubit.
pub fn partial_transpose(m: &Matrix4<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        m[(2 * a + b2, 2 * a2 + b)]
    })
}

/// Smallest eigenvalue of the partial transpose of the normalized state.
pub fn min_partial_transpose_eigenvalue(dm: &TwoQubitDm) -> Result<f64> {
    let pt = partial_transpose(&dm.normalized()?);
    let e = SymmetricEigen::new(hermitian_part(&pt)).eigenvalues;
    Ok(e.iter().copied().fold(f64::INFINITY, f64::min))
}

/// PPT test: entangled iff the partial transpose has an eigenvalue below
/// `-PSD_TOLERANCE`. The PPT boundary itself reports separable.
pub fn ppt_entangled(dm: &TwoQubitDm) -> Result<bool> {
    Ok(min_partial_transpose_eigenvalue(dm)? < -PSD_TOLERANCE)
}

const SPIN_FLIP: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// Wootters concurrence of the normalized state.
///
/// With `rho = W W^dag`, the square roots of the eigenvalues of `rho rho~`
/// are the singular values of `W^T (sy x sy) W`.
pub fn concurrence(dm: &TwoQubitDm) -> Result<f64> {
    let rho = dm.normalized()?;
    let eig = SymmetricEigen::new(rho);
    let scale = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut w = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let root = if lambda > 1e-14 * scale { lambda.sqrt() } else { 0.0 };
        for i in 0..4 {
            w[(i, j)] *= root;
        }
    }
    // sy x sy is anti-diagonal with entries (-1, 1, 1, -1).
    let flipped = Matrix4::from_fn(|i, j| w[(3 - i, j)] * SPIN_FLIP[i]);
    let tau = w.transpose() * flipped;
    let mut sv: Vec<f64> = tau.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok((sv[0] - sv[1] - sv[2] - sv[3]).clamp(0.0, 1.0))
}

fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Entanglement of formation as a function of concurrence.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c == 0.0 {
        return 0.0;
    }
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt())).clamp(0.0, 1.0)
}

pub fn eof(dm: &TwoQubitDm) -> Result<f64> {
    Ok(eof_from_concurrence(concurrence(dm)?))
}

/// Concurrence of an X-shaped state, `2 max(0, |c| - sqrt(rho_a rho_b))` with the
/// coherence and the opposite diagonal pair read from the matrix.
pub fn x_state_concurrence(dm: &TwoQubitDm) -> Result<f64> {
    let rho = dm.normalized()?;
    let inner = rho[(1, 2)].norm() - (rho[(0, 0)].re * rho[(3, 3)].re).max(0.0).sqrt();
    let outer = rho[(0, 3)].norm() - (rho[(1, 1)].re * rho[(2, 2)].re).max(0.0).sqrt();
    Ok((2.0 * inner.max(outer)).max(0.0))
}

/// `multiplicity * Tr(rho') * E_F(rho' / Tr rho')` from a projected matrix
/// whose `zeta` power has been factored out.
pub fn effective_eof_projected(dm: &TwoQubitDm, kind: SchemeKind) -> Result<f64> {
    if dm.scale().zeta != kind.zeta_power() {
        return Err(Error::Unsupported(format!(
            "effective entanglement needs zeta^{} factored out, state carries zeta^{}",
            kind.zeta_power(),
            dm.scale().zeta
        )));
    }
    let tr = dm.trace();
    if tr < TRACE_GUARD {
        return Ok(0.0);
    }
    Ok(kind.multiplicity() * tr * eof(dm)?)
}

/// Effective (rate-weighted, `zeta`-rescaled) entanglement of formation.
pub fn effective_eof(state: &MixedState, kind: SchemeKind) -> Result<f64> {
    effective_eof_projected(&project_for(kind, state)?, kind)
}

/// Effective entanglement for a state computed with finite `zeta`; the
/// rescaling by `zeta^p` is done numerically. Meant for validation only.
pub fn effective_eof_finite_zeta(state: &MixedState, kind: SchemeKind, zeta: f64) -> Result<f64> {
    let dm = project_for(kind, state)?;
    if dm.scale().zeta != 0 {
        return Err(Error::Unsupported("state already has zeta factored out".into()));
    }
    let tr = dm.trace();
    if tr < TRACE_GUARD {
        return Ok(0.0);
    }
    Ok(kind.multiplicity() * tr / zeta.powi(kind.zeta_power() as i32) * eof(&dm)?)
}

/// Closed-form entanglement condition in the limit `T -> 0`.
pub fn threshold_small_t(stats: &PhotonStatistics, kind: SchemeKind) -> bool {
    let (p0, p1, p2, p3) = (stats.p(0), stats.p(1), stats.p(2), stats.p(3));
    match kind {
        SchemeKind::OnePhoton => p1 * p1 > 8.0 * p0 * p2,
        SchemeKind::TwoPhoton => p1.powi(3) > 5.0 * p0 * p1 * p2 + 3.0 * p0 * p0 * p3,
    }
}

/// Exact-in-`T` one-photon entanglement condition for up-to-two-photon statistics.
pub fn threshold_general_t(stats: &PhotonStatistics, t: f64) -> Result<bool> {
    if stats.has_mass_above(2) {
        return Err(Error::Unsupported("general-T threshold needs p_m = 0 for m > 2".into()));
    }
    let (p0, p1, p2) = (stats.p(0), stats.p(1), stats.p(2));
    Ok(general_t_lhs(p0, p1, p2) > general_t_rhs(p0, p1, p2, t))
}
