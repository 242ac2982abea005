//! Sparse Fock-space algebra.
//!
//! States are never stored as dense density matrices. A [`MixedState`] is a
//! weighted list of unnormalized [`PureBranch`]es, each holding a sparse map
//! from occupation-number vectors to complex amplitudes. The implied density
//! operator is `sum_b w_b |phi_b><phi_b|`, which is Hermitian and PSD by
//! construction.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use crate::C64;

/// Amplitudes with magnitude below this are dropped after every linear step.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Occupation numbers `(n_1, ..., n_M)` of `M` modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockVector(SmallVec<[u8; 4]>);

impl FockVector {
    pub fn new(occupations: &[u8]) -> Self {
        Self(SmallVec::from_slice(occupations))
    }

    /// Builds a vector and rejects any mode holding more than `cap` photons.
    pub fn bounded(occupations: &[u8], cap: u8) -> Result<Self> {
        if let Some(&n) = occupations.iter().find(|&&n| n > cap) {
            return Err(domain(format!("occupation {n} exceeds truncation {cap}")));
        }
        Ok(Self::new(occupations))
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(SmallVec::from_elem(0, modes))
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, mode: usize) -> u8 {
        self.0[mode]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    fn with(&self, mode: usize, value: u8) -> Self {
        let mut next = self.clone();
        next.0[mode] = value;
        next
    }
}

impl From<&[u8]> for FockVector {
    fn from(occupations: &[u8]) -> Self {
        Self::new(occupations)
    }
}

pub type Amplitudes = BTreeMap<FockVector, C64>;

fn prune(map: &mut Amplitudes) {
    map.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One unnormalized pure term `w |phi><phi|` of a mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct PureBranch {
    weight: f64,
    modes: usize,
    amplitudes: Amplitudes,
}

impl PureBranch {
    /// A single Fock basis state with unit amplitude.
    pub fn basis(weight: f64, fock: FockVector) -> Result<Self> {
        let modes = fock.modes();
        let mut amplitudes = Amplitudes::new();
        amplitudes.insert(fock, C64::new(1.0, 0.0));
        Self::from_amplitudes(weight, modes, amplitudes)
    }

    pub fn from_amplitudes(weight: f64, modes: usize, mut amplitudes: Amplitudes) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(domain(format!("branch weight must be finite and >= 0, got {weight}")));
        }
        if let Some(bad) = amplitudes.keys().find(|f| f.modes() != modes) {
            return Err(Error::Dimension { expected: modes, found: bad.modes() });
        }
        prune(&mut amplitudes);
        Ok(Self { weight, modes, amplitudes })
    }

    /// Convenience constructor from `(occupations, amplitude)` pairs.
    pub fn from_terms(weight: f64, modes: usize, terms: &[(&[u8], C64)]) -> Result<Self> {
        let mut amplitudes = Amplitudes::new();
        for (occ, a) in terms {
            *amplitudes.entry(FockVector::new(occ)).or_default() += *a;
        }
        Self::from_amplitudes(weight, modes, amplitudes)
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amplitudes
    }

    pub fn amplitude(&self, fock: &FockVector) -> C64 {
        self.amplitudes.get(fock).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// `weight * norm^2`, the probability mass this branch contributes.
    pub fn mass(&self) -> f64 {
        self.weight * self.norm_sqr()
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.modes {
            return Err(Error::Dimension { expected: self.modes, found: len });
        }
        Ok(())
    }

    /// Applies `b = sum_j c_j a_j` to the amplitude map. The weight is unchanged.
    pub fn annihilate_combination(&self, coeffs: &[C64]) -> Result<Self> {
        self.check_len(coeffs.len())?;
        let mut out = Amplitudes::new();
        for (fock, &amp) in &self.amplitudes {
            for (j, &c) in coeffs.iter().enumerate() {
                let n = fock.get(j);
                if n == 0 || c == C64::default() {
                    continue;
                }
                let lowered = fock.with(j, n - 1);
                *out.entry(lowered).or_default() += c * (n as f64).sqrt() * amp;
            }
        }
        prune(&mut out);
        Ok(Self { weight: self.weight, modes: self.modes, amplitudes: out })
    }

    /// Multiplies the amplitude at total photon number `N` by `factor^N`.
    pub fn apply_diagonal_loss(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(domain(format!("loss amplitude factor must lie in (0, 1], got {factor}")));
        }
        let mut out: Amplitudes =
            self.amplitudes.iter().map(|(f, &a)| (f.clone(), a * factor.powi(f.total() as i32))).collect();
        prune(&mut out);
        Ok(Self { weight: self.weight, modes: self.modes, amplitudes: out })
    }

    /// Overlap `<alpha_1 ... alpha_M | phi>` with a product of coherent states.
    pub fn coherent_overlap(&self, alphas: &[C64]) -> Result<C64> {
        self.check_len(alphas.len())?;
        let envelope: f64 = alphas.iter().map(|a| (-0.5 * a.norm_sqr()).exp()).product();
        let mut sum = C64::default();
        for (fock, &amp) in &self.amplitudes {
            let mut term = amp;
            for (i, a) in alphas.iter().enumerate() {
                let n = fock.get(i) as u32;
                if n > 0 {
                    term *= a.conj().powu(n) / factorial(n).sqrt();
                }
            }
            sum += term;
        }
        Ok(sum * envelope)
    }

    /// Contracts one mode with the coherent bra `<alpha|`, leaving an amplitude
    /// map over the remaining modes (the contracted mode is reported as 0).
    pub fn contract_coherent(&self, mode: usize, alpha: C64) -> Result<Self> {
        if mode >= self.modes {
            return Err(Error::Dimension { expected: self.modes, found: mode + 1 });
        }
        let envelope = (-0.5 * alpha.norm_sqr()).exp();
        let mut out = Amplitudes::new();
        for (fock, &amp) in &self.amplitudes {
            let n = fock.get(mode) as u32;
            let overlap = alpha.conj().powu(n) / factorial(n).sqrt() * envelope;
            *out.entry(fock.with(mode, 0)).or_default() += overlap * amp;
        }
        prune(&mut out);
        Ok(Self { weight: self.weight, modes: self.modes, amplitudes: out })
    }

    /// Passes the branch through a passive linear network: a photon entering
    /// mode `j` leaves in mode `i` with amplitude `U[(i, j)]`.
    pub fn transform_modes(&self, unitary: &UnitaryMatrix) -> Result<Self> {
        self.check_len(unitary.dim())?;
        let u = unitary.matrix();
        let mut out = Amplitudes::new();
        for (fock, &amp) in &self.amplitudes {
            // Polynomial in creation operators, keyed by the exponent vector.
            let norm = fock.occupations().iter().map(|&n| factorial(n as u32)).product::<f64>();
            let mut poly = Amplitudes::new();
            poly.insert(FockVector::vacuum(self.modes), amp / norm.sqrt());
            for j in 0..self.modes {
                for _ in 0..fock.get(j) {
                    let mut next = Amplitudes::new();
                    for (mono, &c) in &poly {
                        for i in 0..self.modes {
                            let uij = u[(i, j)];
                            if uij == C64::default() {
                                continue;
                            }
                            let raised = mono.with(i, mono.get(i) + 1);
                            *next.entry(raised).or_default() += c * uij;
                        }
                    }
                    poly = next;
                }
            }
            for (mono, c) in poly {
                let scale = mono.occupations().iter().map(|&n| factorial(n as u32)).product::<f64>();
                *out.entry(mono).or_default() += c * scale.sqrt();
            }
        }
        prune(&mut out);
        Ok(Self { weight: self.weight, modes: self.modes, amplitudes: out })
    }
}

/// Powers of the detector efficiency factored out of a state symbolically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScaleExponents {
    /// The state equals `zeta^zeta` times the stored mixture.
    pub zeta: u32,
}

/// Unnormalized mixture of pure branches over `mode_count` modes.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    mode_count: usize,
    branches: Vec<PureBranch>,
    scale: ScaleExponents,
}

impl MixedState {
    pub fn new(mode_count: usize, branches: Vec<PureBranch>, scale: ScaleExponents) -> Result<Self> {
        if let Some(b) = branches.iter().find(|b| b.modes() != mode_count) {
            return Err(Error::Dimension { expected: mode_count, found: b.modes() });
        }
        Ok(Self { mode_count, branches, scale })
    }

    pub fn pure(branch: PureBranch) -> Self {
        Self { mode_count: branch.modes(), branches: vec![branch], scale: ScaleExponents::default() }
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn branches(&self) -> &[PureBranch] {
        &self.branches
    }

    pub fn scale(&self) -> ScaleExponents {
        self.scale
    }

    pub fn trace(&self) -> f64 {
        self.branches.iter().map(PureBranch::mass).sum()
    }

    pub fn check_modes(&self, expected: usize) -> Result<()> {
        if self.mode_count != expected {
            return Err(Error::Dimension { expected, found: self.mode_count });
        }
        Ok(())
    }

    /// `sum_b w_b sum_{m : selector} |A_b(m)|^2`, where `selector(mode, n)`
    /// must hold for every mode of `m`.
    pub fn occupation_projection_probability<F>(&self, selector: F) -> f64
    where
        F: Fn(usize, u8) -> bool,
    {
        self.branches
            .iter()
            .map(|b| {
                let kept: f64 = b
                    .amplitudes()
                    .iter()
                    .filter(|(f, _)| f.occupations().iter().enumerate().all(|(i, &n)| selector(i, n)))
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                b.weight() * kept
            })
            .sum()
    }

    /// Applies a branch-wise map, keeping mode count and scale.
    pub fn map_branches<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&PureBranch) -> Result<PureBranch>,
    {
        let branches = self.branches.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.mode_count, branches, self.scale)
    }

    /// Mixes two states on the same modes: `self + other` as operators.
    pub fn combined(&self, other: &MixedState) -> Result<Self> {
        other.check_modes(self.mode_count)?;
        let mut branches = self.branches.clone();
        branches.extend(other.branches.iter().cloned());
        Self::new(self.mode_count, branches, self.scale)
    }
}

/// An `M x M` unitary mode transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(DMatrix<C64>);

impl UnitaryMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let n = matrix.nrows();
        let product = &matrix * matrix.adjoint();
        let deviation = (product - DMatrix::<C64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > Self::TOLERANCE {
            return Err(domain(format!("matrix is not unitary (max |UU^dag - I| = {deviation:e})")));
        }
        Ok(Self(matrix))
    }

    /// Builds from a real row-major table.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, found: r.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.0.row(i).iter().copied().collect()
    }

    /// Independent unitaries on consecutive groups of modes.
    pub fn block_diagonal(blocks: &[&UnitaryMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut m = DMatrix::<C64>::zeros(n, n);
        let mut offset = 0;
        for b in blocks {
            let d = b.dim();
            m.view_mut((offset, offset), (d, d)).copy_from(b.matrix());
            offset += d;
        }
        Self(m)
    }

    /// Swaps modes `a` and `b` on the input side (columns).
    pub fn permute_columns(&self, a: usize, b: usize) -> Self {
        let mut m = self.0.clone();
        m.swap_columns(a, b);
        Self(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_mode_annihilation() {
        let b = PureBranch::basis(1.0, FockVector::new(&[1, 1])).unwrap();
        let out = b.annihilate_combination(&[c(1.0), c(0.0)]).unwrap();
        assert_eq!(out.amplitudes().len(), 1);
        assert!((out.amplitude(&FockVector::new(&[0, 1])) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn balanced_annihilation_gives_superposition() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = PureBranch::basis(1.0, FockVector::new(&[1, 1])).unwrap();
        let out = b.annihilate_combination(&[c(s), c(s)]).unwrap();
        assert!((out.amplitude(&FockVector::new(&[0, 1])) - c(s)).norm() < 1e-15);
        assert!((out.amplitude(&FockVector::new(&[1, 0])) - c(s)).norm() < 1e-15);
    }

    #[test]
    fn annihilating_vacuum_is_empty() {
        let b = PureBranch::basis(1.0, FockVector::vacuum(3)).unwrap();
        let out = b.annihilate_combination(&[c(0.3), C64::new(0.1, 0.7), c(-1.0)]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn annihilation_rejects_wrong_length() {
        let b = PureBranch::basis(1.0, FockVector::new(&[1, 0])).unwrap();
        assert!(matches!(b.annihilate_combination(&[c(1.0)]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn diagonal_loss() {
        let b = PureBranch::basis(1.0, FockVector::new(&[2, 0])).unwrap();
        assert_eq!(b.apply_diagonal_loss(1.0).unwrap(), b);
        let lossy = b.apply_diagonal_loss((1.0f64 - 0.19).sqrt()).unwrap();
        assert!((lossy.amplitude(&FockVector::new(&[2, 0])).re - 0.81).abs() < 1e-15);
        let vac = PureBranch::basis(0.5, FockVector::vacuum(2)).unwrap();
        assert_eq!(vac.apply_diagonal_loss(0.3).unwrap(), vac);
        assert!(b.apply_diagonal_loss(0.0).is_err());
        assert!(b.apply_diagonal_loss(1.5).is_err());
    }

    #[test]
    fn coherent_overlap_examples() {
        let vac = PureBranch::basis(1.0, FockVector::vacuum(2)).unwrap();
        assert_eq!(vac.coherent_overlap(&[c(0.0), c(0.0)]).unwrap(), c(1.0));
        let one = PureBranch::basis(1.0, FockVector::new(&[1, 0])).unwrap();
        assert_eq!(one.coherent_overlap(&[c(0.0), c(0.0)]).unwrap(), c(0.0));
        let single = PureBranch::basis(1.0, FockVector::new(&[1])).unwrap();
        let v = single.coherent_overlap(&[c(0.5)]).unwrap();
        assert!((v.re - (-0.125f64).exp() * 0.5).abs() < 1e-15);
        assert!((v.re - 0.4412).abs() < 1e-4);
    }

    #[test]
    fn projection_probability_examples() {
        let vac = MixedState::pure(PureBranch::basis(1.0, FockVector::vacuum(2)).unwrap());
        assert_eq!(vac.occupation_projection_probability(|_, n| n == 0), 1.0);
        let one = MixedState::pure(PureBranch::basis(1.0, FockVector::new(&[1, 0])).unwrap());
        assert_eq!(one.occupation_projection_probability(|_, n| n == 0), 0.0);
        let mix = MixedState::new(
            2,
            vec![
                PureBranch::basis(0.5, FockVector::new(&[0, 1])).unwrap(),
                PureBranch::basis(0.5, FockVector::new(&[2, 0])).unwrap(),
            ],
            ScaleExponents::default(),
        )
        .unwrap();
        assert!((mix.occupation_projection_probability(|_, n| n <= 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unitary_validation() {
        assert!(UnitaryMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]).is_err());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(UnitaryMatrix::from_real_rows(&[&[s, s], &[s, -s]]).is_ok());
    }

    #[test]
    fn transform_single_photon_follows_column() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = UnitaryMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap();
        let b = PureBranch::basis(1.0, FockVector::new(&[1, 0])).unwrap();
        let out = b.transform_modes(&u).unwrap();
        assert!((out.amplitude(&FockVector::new(&[1, 0])) - c(s)).norm() < 1e-15);
        assert!((out.amplitude(&FockVector::new(&[0, 1])) - c(s)).norm() < 1e-15);
        // Hong-Ou-Mandel: |1,1> -> (|2,0> - |0,2>)/sqrt 2.
        let hom = PureBranch::basis(1.0, FockVector::new(&[1, 1])).unwrap().transform_modes(&u).unwrap();
        assert!(hom.amplitude(&FockVector::new(&[1, 1])).norm() < 1e-15);
        assert!((hom.amplitude(&FockVector::new(&[2, 0])) - c(s)).norm() < 1e-15);
        assert!((hom.amplitude(&FockVector::new(&[0, 2])) + c(s)).norm() < 1e-15);
    }

    fn arb_branch() -> impl Strategy<Value = PureBranch> {
        prop::collection::vec(((0u8..3, 0u8..3), -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|terms| {
            let mut amps = Amplitudes::new();
            for ((a, b), re, im) in terms {
                *amps.entry(FockVector::new(&[a, b])).or_default() += C64::new(re, im);
            }
            PureBranch::from_amplitudes(1.0, 2, amps).unwrap()
        })
    }

    proptest! {
        #[test]
        fn annihilation_is_linear(b in arb_branch(), c1 in (-1.0f64..1.0, -1.0f64..1.0), c2 in (-1.0f64..1.0, -1.0f64..1.0)) {
            let v1 = [C64::new(c1.0, 0.0), C64::new(0.0, c1.1)];
            let v2 = [C64::new(c2.0, c2.1), C64::new(0.3, 0.0)];
            let sum = [v1[0] + v2[0], v1[1] + v2[1]];
            let lhs = b.annihilate_combination(&sum).unwrap();
            let r1 = b.annihilate_combination(&v1).unwrap();
            let r2 = b.annihilate_combination(&v2).unwrap();
            let mut keys: Vec<_> = lhs.amplitudes().keys().cloned().collect();
            keys.extend(r1.amplitudes().keys().cloned());
            keys.extend(r2.amplitudes().keys().cloned());
            for k in keys {
                let d = lhs.amplitude(&k) - r1.amplitude(&k) - r2.amplitude(&k);
                prop_assert!(d.norm() < 1e-12);
            }
        }

        #[test]
        fn loss_never_increases_norm(b in arb_branch(), f in 0.01f64..=1.0) {
            prop_assert!(b.apply_diagonal_loss(f).unwrap().norm_sqr() <= b.norm_sqr() + 1e-15);
        }

        #[test]
        fn zero_displacement_overlap_is_vacuum_amplitude(b in arb_branch()) {
            let v = b.coherent_overlap(&[C64::default(), C64::default()]).unwrap();
            prop_assert_eq!(v, b.amplitude(&FockVector::vacuum(2)));
        }

        #[test]
        fn transform_preserves_norm(b in arb_branch(), theta in -3.2f64..3.2) {
            let (s, c) = theta.sin_cos();
            let u = UnitaryMatrix::from_real_rows(&[&[c, s], &[s, -c]]).unwrap();
            let out = b.transform_modes(&u).unwrap();
            prop_assert!((out.norm_sqr() - b.norm_sqr()).abs() < 1e-12);
        }
    }
}
