//! Qudit state-vector simulation of discrete non-Abelian lattice gauge theories
//! on small periodic ladders, with two gauge-symmetry error-mitigation schemes:
//! dynamical post-selection (DPS) and post-processed symmetry verification (PSV).
//!
//! The crate is organized bottom-up:
//!
//! - [`group`]: finite-group algebra (multiplication tables, irreps, group
//!   Fourier transform), with the dihedral group `D3` as the main instance.
//! - [`statevec`]: dense qudit-register state vectors and operator kernels.
//! - [`model`]: ladder geometry, magnetic/electric Hamiltonian pieces,
//!   Gauss-law operators, and the physical-sector projector.
//! - [`evolve`]: Trotter stepping, stochastic noise channels, and
//!   single-trajectory execution.
//! - [`mitigate`]: DPS measurements and PSV estimators.
//! - [`analysis`]: observables and derived metrics (gauge violation,
//!   protection efficacy, survival statistics).
//! - [`compile`]: gate-level circuits for the Trotter step and the DPS
//!   symmetry checks, with unitary-equivalence checks and resource counts.
//! - [`cli`]: experiment orchestration and file output.
//!
//! Basis convention shared by every module: a register of `L` qudits of local
//! dimension `d` is indexed by `i = sum_l g_l d^l`, link 0 fastest.

pub mod analysis;
pub mod cli;
pub mod linalg;
pub mod compile;
pub mod evolve;
pub mod group;
pub mod mitigate;
pub mod model;
pub mod statevec;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("group construction failed: {0}")]
    Group(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("operation-size guard: {0}")]
    SizeGuard(String),
    #[error("measurement produced an impossible outcome: {0}")]
    Measurement(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical consistency failure: {0}")]
    Numerics(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
