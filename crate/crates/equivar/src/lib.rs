//! Group- and gauge-equivariant convolutions.
//!
//! Harmonic analysis on S² and SO(3), spectral convolutions for arbitrary
//! feature representations, steerable kernel bases, equivariant
//! nonlinearities, discrete group CNNs and gauge-equivariant mesh
//! convolutions, plus an audit harness that checks each construction
//! against brute-force oracles.
//!
//! Conventions (normative for every module):
//! * complex spherical harmonics are orthonormal and carry the
//!   Condon–Shortley phase, so `conj(Y^l_m) = (-1)^m Y^l_{-m}`;
//! * rotations use active ZYZ Euler angles, `R = Rz(α) Ry(β) Rz(γ)`;
//! * `D^l_{mn}(α,β,γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}` and
//!   `Y^l_m(Rx) = Σ_n conj(D^l_{mn}(R)) Y^l_n(x)`.

pub mod audit;
pub mod error;
pub mod gauge_mesh;
pub mod gcnn;
pub mod grids;
pub mod harmonics;
pub mod nonlin;
pub mod repr;
pub mod rng;
pub mod spectral_conv;
pub mod steerable;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
