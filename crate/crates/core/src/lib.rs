//! Heralded entanglement distribution by nonlocal photon subtraction.
//!
//! The crate simulates linear-optics schemes in which light from an array of
//! imperfect single-photon sources is partially reflected into local memories
//! while the transmitted part is interfered at a central station and detected.
//! Conditioning on a click pattern leaves the memories in an (unnormalized)
//! heralded state, which is then analysed:
//!
//! - [`fock`]: sparse Fock-space algebra over weighted pure branches.
//! - [`sources`]: photon-number statistics of imperfect sources.
//! - [`subtraction`]: the Kraus-operator map from sources to heralded state.
//! - [`schemes`]: the one-photon and two-photon circuits and their closed forms.
//! - [`entanglement`]: qubit projections, PPT, concurrence, entanglement of formation.
//! - [`bell`]: phase-space Clauser-Horne and polarization CHSH tests.
//! - [`optimize`]: transmission optimization, Nelder-Mead and parameter sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod optimize;
pub mod schemes;
pub mod sources;
pub mod subtraction;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
