//! Spectral and scattering theory of one-dimensional position-dependent
//! discrete-time quantum walks.
//!
//! The walk acts on `ℓ²(ℤ; ℂ²)` as `U = SC`, a site-wise unitary coin
//! followed by a chirality-dependent shift. Away from a finite window the coin
//! equals a fixed `C₀`, which makes `U` a compact perturbation of the free
//! walk `U₀`. The crate provides:
//!
//! * [`walk`]: coins, coin fields, lattice states and the action of `U`, `U*`;
//! * [`dispersion`]: bands, thresholds, on-shell momenta and the transform `F₀(θ)`;
//! * [`green`]: the free lattice Green kernel `R₀(θ ± i0)` and integral oracles;
//! * [`stationary`]: transfer matrices, generalized eigenfunctions, the
//!   Lippmann–Schwinger solver and gap bound states;
//! * [`smatrix`]: the 2×2 scattering matrix by two independent routes;
//! * [`timedomain`]: wave packets, time evolution and wave-operator probes.

pub mod angle;
pub mod config;
pub mod corpus;
pub mod dispersion;
pub mod error;
pub mod green;
pub mod linalg;
pub mod quad;
pub mod smatrix;
pub mod stationary;
pub mod timedomain;
pub mod validate;
pub mod walk;

pub use error::{Error, Result};
pub use linalg::{Mat2, Vec2, C64};
pub use walk::{Boundary, Coin, CoinField, CoinParams, StateVector};

/// Fixed 17-significant-digit rendering used by every text export.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
