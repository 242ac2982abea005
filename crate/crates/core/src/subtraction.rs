//! Heralded conditional states from nonlocal photon subtraction.
//!
//! Each source feeds a beam splitter of power transmission `T`. The reflected
//! modes are kept; the transmitted modes pass a linear network `U` (output
//! `b_i = sum_j U_ij a_j`) and are detected. Conditioning on clicks `k` maps
//! the input to
//!
//! ```text
//! rho_k = sum_n p(k|n) L_n rho_in L_n^dag,
//! L_n   = prod_i sqrt(T^{n_i} / n_i!) (sqrt(1 - T))^{N} b_i^{n_i}
//! ```
//!
//! where `N` is the total photon number left in the kept modes. The sum over
//! `n` is bounded by the photons present at the input, so it is finite and
//! evaluated exactly.

use crate::error::{domain, Error, Result};
use crate::fock::{FockVector, MixedState, PureBranch, ScaleExponents, UnitaryMatrix};
use crate::sources::PhotonStatistics;

/// Heralding detector model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetectorModel {
    /// Photon-number resolving with efficiency `zeta`.
    NumberResolving { zeta: f64 },
    /// Click/no-click with efficiency `zeta`.
    Binary { zeta: f64 },
    /// Click/no-click to leading order in `zeta -> 0`. The `zeta^K` prefactor
    /// is carried in [`ScaleExponents`] instead of being multiplied in.
    BinaryLowEfficiency,
}

impl DetectorModel {
    pub fn number_resolving(zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        Ok(Self::NumberResolving { zeta })
    }

    pub fn binary(zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        Ok(Self::Binary { zeta })
    }

    pub fn is_binary(&self) -> bool {
        !matches!(self, Self::NumberResolving { .. })
    }

    fn check_clicks(&self, clicks: &[u8]) -> Result<()> {
        if self.is_binary() {
            if let Some(k) = clicks.iter().find(|&&k| k > 1) {
                return Err(Error::InvalidClicks(format!("binary detectors report 0 or 1, got {k}")));
            }
        }
        Ok(())
    }

    /// Smallest `n_i` that can produce `k_i` on one detector.
    fn min_subtractions(&self, k: u8) -> u8 {
        k
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(domain(format!("detector efficiency must lie in (0, 1], got {zeta}")));
    }
    Ok(())
}

/// `p(k|n)`, with any symbolically factored power of `zeta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickWeight {
    pub value: f64,
    pub zeta_power: u32,
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability of click pattern `clicks` given `n_i` photons reached detector `i`.
pub fn click_probability(model: DetectorModel, n: &FockVector, clicks: &[u8]) -> Result<ClickWeight> {
    if n.modes() != clicks.len() {
        return Err(Error::Dimension { expected: n.modes(), found: clicks.len() });
    }
    model.check_clicks(clicks)?;
    let pairs = n.occupations().iter().zip(clicks).map(|(&n, &k)| (n as u32, k as u32));
    let weight =
        match model {
            DetectorModel::NumberResolving { zeta } => ClickWeight {
                value: pairs
                    .map(|(n, k)| {
                        if k > n {
                            0.0
                        } else {
                            binomial(n, k) * zeta.powi(k as i32) * (1.0 - zeta).powi((n - k) as i32)
                        }
                    })
                    .product(),
                zeta_power: 0,
            },
            DetectorModel::Binary { zeta } => ClickWeight {
                value: pairs
                    .map(|(n, k)| {
                        let none = (1.0 - zeta).powi(n as i32);
                        if k == 1 {
                            1.0 - none
                        } else {
                            none
                        }
                    })
                    .product(),
                zeta_power: 0,
            },
            DetectorModel::BinaryLowEfficiency => ClickWeight {
                value: pairs.map(|(n, k)| if k == 1 { n as f64 } else { 1.0 }).product(),
                zeta_power: clicks.iter().map(|&k| k as u32).sum(),
            },
        };
    Ok(weight)
}

/// Geometry and heralding condition of a subtraction setup.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    unitary: UnitaryMatrix,
    transmission: f64,
    detector: DetectorModel,
    clicks: Vec<u8>,
}

impl SchemeSpec {
    pub fn new(unitary: UnitaryMatrix, transmission: f64, detector: DetectorModel, clicks: Vec<u8>) -> Result<Self> {
        if !(transmission > 0.0 && transmission < 1.0) {
            return Err(domain(format!("transmission T must lie in (0, 1), got {transmission}")));
        }
        if clicks.len() != unitary.dim() {
            return Err(Error::Dimension { expected: unitary.dim(), found: clicks.len() });
        }
        detector.check_clicks(&clicks)?;
        Ok(Self { unitary, transmission, detector, clicks })
    }

    pub fn mode_count(&self) -> usize {
        self.unitary.dim()
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn detector(&self) -> DetectorModel {
        self.detector
    }

    pub fn clicks(&self) -> &[u8] {
        &self.clicks
    }

    pub fn with_clicks(&self, clicks: Vec<u8>) -> Result<Self> {
        Self::new(self.unitary.clone(), self.transmission, self.detector, clicks)
    }

    pub fn with_transmission(&self, transmission: f64) -> Result<Self> {
        Self::new(self.unitary.clone(), transmission, self.detector, self.clicks.clone())
    }

    pub fn with_unitary(&self, unitary: UnitaryMatrix) -> Result<Self> {
        Self::new(unitary, self.transmission, self.detector, self.clicks.clone())
    }
}

/// One `(m, n)` term of the Kraus sum with its `T`-dependence kept symbolic:
/// it contributes `weight * T^subtracted * (1 - T)^residual |phi><phi|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTerm {
    /// `prod p_{m_i} * p(k|n) / prod n_i!`.
    pub weight: f64,
    /// `sum_i n_i`.
    pub subtracted: u32,
    /// Photons left in the kept modes.
    pub residual: u32,
    /// `prod_i b_i^{n_i} |m>`, before the loss factor.
    pub branch: PureBranch,
}

/// Restricts which `(m, n)` terms are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermFilter {
    /// Keep only terms with exactly this many subtractions.
    pub subtracted: Option<u32>,
    /// Keep only terms whose residual photon number lies in this range.
    pub residual_min: u32,
    pub residual_max: u32,
}

impl TermFilter {
    pub const ALL: TermFilter = TermFilter { subtracted: None, residual_min: 0, residual_max: u32::MAX };

    pub fn residual(min: u32, max: u32) -> Self {
        Self { subtracted: None, residual_min: min, residual_max: max }
    }

    fn admits(&self, subtracted: u32, residual: u32) -> bool {
        self.subtracted.is_none_or(|s| s == subtracted) && (self.residual_min..=self.residual_max).contains(&residual)
    }
}

/// The conditional state for all `T` at once.
#[derive(Clone, Debug, PartialEq)]
pub struct SubtractionExpansion {
    mode_count: usize,
    terms: Vec<ExpansionTerm>,
    scale: ScaleExponents,
}

impl SubtractionExpansion {
    /// Enumerates every input Fock product `m` and subtraction pattern `n`
    /// admitted by `filter` that has a nonzero click weight.
    pub fn build(
        sources: &[PhotonStatistics],
        unitary: &UnitaryMatrix,
        detector: DetectorModel,
        clicks: &[u8],
        filter: TermFilter,
    ) -> Result<Self> {
        let modes = unitary.dim();
        if sources.len() != modes {
            return Err(Error::Dimension { expected: modes, found: sources.len() });
        }
        if clicks.len() != modes {
            return Err(Error::Dimension { expected: modes, found: clicks.len() });
        }
        detector.check_clicks(clicks)?;
        let rows: Vec<_> = (0..modes).map(|i| unitary.row(i)).collect();
        let scale = ScaleExponents {
            zeta: match detector {
                DetectorModel::BinaryLowEfficiency => clicks.iter().map(|&k| k as u32).sum(),
                _ => 0,
            },
        };
        let mut ctx = Enumeration { rows: &rows, detector, clicks, filter, terms: Vec::new() };
        let mut occupation = vec![0u8; modes];
        ctx.inputs(sources, 0, 1.0, &mut occupation)?;
        Ok(Self { mode_count: modes, terms: ctx.terms, scale })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn terms(&self) -> &[ExpansionTerm] {
        &self.terms
    }

    pub fn scale(&self) -> ScaleExponents {
        self.scale
    }

    /// Smallest number of subtractions among the generated terms.
    pub fn leading_order(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.subtracted).min()
    }

    /// Evaluates the full conditional state at transmission `t` in (0, 1).
    pub fn at(&self, t: f64) -> Result<MixedState> {
        if !(t > 0.0 && t < 1.0) {
            return Err(domain(format!("transmission T must lie in (0, 1), got {t}")));
        }
        let loss = (1.0 - t).sqrt();
        let branches = self
            .terms
            .iter()
            .map(|term| {
                let w = term.weight * t.powi(term.subtracted as i32);
                Ok(term.branch.apply_diagonal_loss(loss)?.with_weight(w))
            })
            .collect::<Result<Vec<_>>>()?;
        MixedState::new(self.mode_count, branches, self.scale)
    }
}

struct Enumeration<'a> {
    rows: &'a [Vec<crate::C64>],
    detector: DetectorModel,
    clicks: &'a [u8],
    filter: TermFilter,
    terms: Vec<ExpansionTerm>,
}

impl Enumeration<'_> {
    fn inputs(&mut self, sources: &[PhotonStatistics], mode: usize, prob: f64, occ: &mut Vec<u8>) -> Result<()> {
        if mode == sources.len() {
            let fock = FockVector::new(occ);
            let total = fock.total();
            let branch = PureBranch::basis(1.0, fock)?;
            let mut n = vec![0u8; occ.len()];
            return self.subtractions(branch, 0, 0, total, prob, 1.0, &mut n);
        }
        for (m, &p) in sources[mode].probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            occ[mode] = u8::try_from(m).map_err(|_| domain("photon number exceeds 255"))?;
            self.inputs(sources, mode + 1, prob * p, occ)?;
        }
        occ[mode] = 0;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn subtractions(
        &mut self,
        state: PureBranch,
        mode: usize,
        used: u32,
        total: u32,
        prob: f64,
        inv_factorials: f64,
        n: &mut Vec<u8>,
    ) -> Result<()> {
        if mode == self.rows.len() {
            let subtracted = used;
            let residual = total - used;
            if !self.filter.admits(subtracted, residual) {
                return Ok(());
            }
            let click = click_probability(self.detector, &FockVector::new(n), self.clicks)?;
            if click.value == 0.0 {
                return Ok(());
            }
            self.terms.push(ExpansionTerm {
                weight: prob * click.value * inv_factorials,
                subtracted,
                residual,
                branch: state,
            });
            return Ok(());
        }
        let remaining_modes = self.rows.len() - mode - 1;
        let min_here = self.detector.min_subtractions(self.clicks[mode]) as u32;
        let mut current = state;
        let mut k = 0u32;
        loop {
            // Later modes need at least their own minimum.
            let later_min: u32 =
                self.clicks[mode + 1..].iter().map(|&c| self.detector.min_subtractions(c) as u32).sum();
            if used + k + later_min > total {
                break;
            }
            let prune_by_count = match self.filter.subtracted {
                Some(s) => used + k > s,
                None => false,
            };
            if prune_by_count {
                break;
            }
            if k >= min_here {
                n[mode] = k as u8;
                let next_fact = inv_factorials / factorial(k);
                self.subtractions(current.clone(), mode + 1, used + k, total, prob, next_fact, n)?;
                n[mode] = 0;
            }
            if remaining_modes == 0 && used + k == total {
                break;
            }
            current = current.annihilate_combination(&self.rows[mode])?;
            if current.is_empty() {
                break;
            }
            k += 1;
        }
        Ok(())
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// The heralded state `rho_k` of the setup, exact to the source truncation.
pub fn conditional_state(sources: &[PhotonStatistics], spec: &SchemeSpec) -> Result<MixedState> {
    SubtractionExpansion::build(sources, spec.unitary(), spec.detector(), spec.clicks(), TermFilter::ALL)?
        .at(spec.transmission())
}

/// Leading order in `T -> 0`: only the minimal number of subtractions that can
/// produce the click pattern is kept, and the `(sqrt(1 - T))^N` factor is
/// dropped. Whether higher photon numbers at the input are small enough for
/// this to be accurate is left to the caller.
pub fn conditional_state_small_t(sources: &[PhotonStatistics], spec: &SchemeSpec) -> Result<MixedState> {
    let detector = spec.detector();
    let minimal: u32 = spec.clicks().iter().map(|&k| detector.min_subtractions(k) as u32).sum();
    let filter = TermFilter { subtracted: Some(minimal), ..TermFilter::ALL };
    let expansion = SubtractionExpansion::build(sources, spec.unitary(), detector, spec.clicks(), filter)?;
    let t = spec.transmission();
    let branches = expansion
        .terms
        .into_iter()
        .map(|term| term.branch.with_weight(term.weight * t.powi(term.subtracted as i32)))
        .collect();
    MixedState::new(expansion.mode_count, branches, expansion.scale)
}
