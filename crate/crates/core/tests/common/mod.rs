//! Dense density-matrix oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use photsub::fock::{FockVector, MixedState};
use photsub::C64;

/// Full density matrix of `state` over all occupations `0..=cutoff` per mode.
pub struct Dense {
    pub modes: usize,
    pub cutoff: usize,
    pub rho: DMatrix<C64>,
}

impl Dense {
    pub fn index(&self, occ: &[u8]) -> usize {
        occ.iter().fold(0, |acc, &n| acc * (self.cutoff + 1) + n as usize)
    }

    pub fn occupation(&self, mut i: usize) -> Vec<u8> {
        let mut occ = vec![0u8; self.modes];
        for m in (0..self.modes).rev() {
            occ[m] = (i % (self.cutoff + 1)) as u8;
            i /= self.cutoff + 1;
        }
        occ
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

pub fn dense(state: &MixedState, cutoff: usize) -> Dense {
    let modes = state.mode_count();
    let dim = (cutoff + 1).pow(modes as u32);
    let mut out = Dense { modes, cutoff, rho: DMatrix::zeros(dim, dim) };
    for b in state.branches() {
        let mut v = DVector::<C64>::zeros(dim);
        for (f, &a) in b.amplitudes() {
            assert!(f.occupations().iter().all(|&n| (n as usize) <= cutoff), "cutoff {cutoff} too small for {f:?}");
            v[out.index(f.occupations())] += a;
        }
        out.rho += &v * v.adjoint() * C64::new(b.weight(), 0.0);
    }
    out
}

/// `max |a - b| / max |b|`.
pub fn max_relative_error(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

pub fn fock(occ: &[u8]) -> FockVector {
    FockVector::new(occ)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `<n|alpha>` components of a truncated coherent state.
pub fn coherent(alpha: C64, cutoff: usize) -> Vec<C64> {
    let env = (-0.5 * alpha.norm_sqr()).exp();
    (0..=cutoff).map(|n| alpha.powu(n as u32) / factorial(n).sqrt() * env).collect()
}

/// `<alpha, beta| rho |alpha, beta> / Tr rho` by brute force.
pub fn dense_q_joint(d: &Dense, alpha: C64, beta: C64) -> f64 {
    let (ca, cb) = (coherent(alpha, d.cutoff), coherent(beta, d.cutoff));
    let v = DVector::from_fn(d.dim(), |i, _| {
        let occ = d.occupation(i);
        ca[occ[0] as usize] * cb[occ[1] as usize]
    });
    (v.adjoint() * &d.rho * &v)[(0, 0)].re / d.trace()
}

/// Marginal no-count probability on `mode` with the other mode traced out.
pub fn dense_q_marginal(d: &Dense, alpha: C64, mode: usize) -> f64 {
    let ca = coherent(alpha, d.cutoff);
    let mut sum = 0.0;
    for kept in 0..=d.cutoff {
        let v = DVector::from_fn(d.dim(), |i, _| {
            let occ = d.occupation(i);
            let other = occ[1 - mode] as usize;
            if other == kept {
                ca[occ[mode] as usize]
            } else {
                C64::default()
            }
        });
        sum += (v.adjoint() * &d.rho * &v)[(0, 0)].re;
    }
    sum / d.trace()
}

/// Density matrix as a sparse map `(row, column) -> element`.
pub type SparseRho = HashMap<(Vec<u8>, Vec<u8>), C64>;

pub fn sparse(state: &MixedState) -> SparseRho {
    let mut out = SparseRho::new();
    for b in state.branches() {
        let amps: Vec<(Vec<u8>, C64)> = b.amplitudes().iter().map(|(f, &a)| (f.occupations().to_vec(), a)).collect();
        for (f, a) in &amps {
            for (g, c) in &amps {
                *out.entry((f.clone(), g.clone())).or_default() += a * c.conj() * b.weight();
            }
        }
    }
    out
}

/// Applies `f` to the row and column labels.
pub fn relabel(rho: &SparseRho, f: impl Fn(&[u8]) -> Vec<u8>) -> SparseRho {
    rho.iter().map(|((r, c), &v)| ((f(r), f(c)), v)).collect()
}

pub fn scaled(rho: &SparseRho, s: f64) -> SparseRho {
    rho.iter().map(|(k, &v)| (k.clone(), v * s)).collect()
}

/// `max |a - b| / max |b|` over the union of supports.
pub fn sparse_relative_error(a: &SparseRho, b: &SparseRho) -> f64 {
    let scale = b.values().map(|z| z.norm()).fold(0.0, f64::max);
    let zero = C64::default();
    let diff = a
        .keys()
        .chain(b.keys())
        .map(|k| (a.get(k).unwrap_or(&zero) - b.get(k).unwrap_or(&zero)).norm())
        .fold(0.0, f64::max);
    diff / scale
}
