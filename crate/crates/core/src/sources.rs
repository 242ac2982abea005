//! Photon-number statistics of imperfect single-photon sources.

use std::path::Path;

use crate::error::{domain, Error, Result};

/// Default truncation of the down-conversion tail.
pub const DEFAULT_MMAX: usize = 6;

/// Default bound on the probability mass dropped by truncation.
pub const DEFAULT_DEFICIT_TOLERANCE: f64 = 1e-3;

/// Where a distribution came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceModel {
    /// Single photon, or a photon pair with probability `epsilon`, then loss `eta`.
    DoubleEmission {
        eta: f64,
        epsilon: f64,
    },
    /// Heralded down-conversion with pair parameter `r`, then loss `eta`.
    DownConversion {
        eta: f64,
        r: f64,
    },
    Custom,
}

/// Probabilities `p_0 ..= p_mmax` of emitting `m` photons.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonStatistics {
    probs: Vec<f64>,
    model: SourceModel,
    truncation_deficit: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Down-conversion probability of `m` photons, without truncation.
fn down_conversion_term(eta: f64, r: f64, m: usize) -> f64 {
    let loss = 1.0 - (1.0 - eta) * r;
    let pref = (1.0 - r).powi(2);
    if m == 0 {
        // r^{-1} [0 + (1 - eta) r] = (1 - eta)
        return pref * (1.0 - eta) / loss.powi(2);
    }
    pref * r.powi(m as i32 - 1) * eta.powi(m as i32) * (m as f64 + (1.0 - eta) * r) / loss.powi(m as i32 + 2)
}

impl PhotonStatistics {
    /// Validated custom distribution.
    pub fn custom(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("photon statistics must have at least one entry"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(domain(format!("probabilities must be finite and non-negative, got {p}")));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(domain(format!("probabilities sum to {total} > 1")));
        }
        Ok(Self { probs, model: SourceModel::Custom, truncation_deficit: (1.0 - total).max(0.0) })
    }

    /// Reads one probability per line (index = photon number). Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let probs = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("{l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::custom(probs)
    }

    /// Poisson distribution with mean `lambda`, truncated at `mmax`.
    pub fn poisson(lambda: f64, mmax: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(domain(format!("Poisson mean must be >= 0, got {lambda}")));
        }
        let mut probs = Vec::with_capacity(mmax + 1);
        let mut p = (-lambda).exp();
        for m in 0..=mmax {
            probs.push(p);
            p *= lambda / (m + 1) as f64;
        }
        Self::custom(probs)
    }

    pub fn double_emission(eta: f64, epsilon: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        check_unit("epsilon", epsilon)?;
        let probs =
            vec![(1.0 - eta) * (1.0 - eta * epsilon), eta + eta * (1.0 - 2.0 * eta) * epsilon, eta * eta * epsilon];
        Ok(Self { probs, model: SourceModel::DoubleEmission { eta, epsilon }, truncation_deficit: 0.0 })
    }

    /// Down-conversion statistics truncated at `mmax`. The dropped tail is
    /// recorded in [`truncation_deficit`](Self::truncation_deficit), not renormalized.
    pub fn down_conversion(eta: f64, r: f64, mmax: usize) -> Result<Self> {
        check_unit("eta", eta)?;
        if !(0.0..1.0).contains(&r) {
            return Err(domain(format!("r must lie in [0, 1), got {r}")));
        }
        if mmax < 2 {
            return Err(domain(format!("mmax must be >= 2, got {mmax}")));
        }
        let probs: Vec<f64> = (0..=mmax).map(|m| down_conversion_term(eta, r, m)).collect();
        let deficit = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        Ok(Self { probs, model: SourceModel::DownConversion { eta, r }, truncation_deficit: deficit })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p_m`, zero beyond the stored truncation.
    pub fn p(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn mmax(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn model(&self) -> SourceModel {
        self.model
    }

    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    /// Fails if the stored truncation drops more than `tolerance` of the mass.
    pub fn check_deficit(&self, tolerance: f64) -> Result<()> {
        if self.truncation_deficit >= tolerance {
            return Err(domain(format!(
                "truncation at m = {} drops {:e} of the distribution (tolerance {tolerance:e})",
                self.mmax(),
                self.truncation_deficit
            )));
        }
        Ok(())
    }

    /// Whether any probability mass sits above `m` photons.
    pub fn has_mass_above(&self, m: usize) -> bool {
        self.probs.iter().skip(m + 1).any(|&p| p > 0.0)
    }

    /// Necessary condition obeyed by every mixture of coherent states:
    /// `p_1^2 <= 2 p_0 p_2`.
    pub fn is_classical_candidate(&self) -> bool {
        let (p0, p1, p2) = (self.p(0), self.p(1), self.p(2));
        p1 * p1 <= 2.0 * p0 * p2
    }

    /// Total probability of two or more photons. For down-conversion this is
    /// `1 - p_0 - p_1` of the untruncated distribution.
    pub fn multiphoton_mass(&self) -> f64 {
        match self.model {
            SourceModel::DownConversion { eta, r } => {
                1.0 - down_conversion_term(eta, r, 0) - down_conversion_term(eta, r, 1)
            }
            _ => self.probs.iter().skip(2).sum(),
        }
    }
}
