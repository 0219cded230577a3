// SPDX-License-Identifier: MIT OR Apache-2.0

//! Open quantum Brownian motion (OQBM) of a weakly driven two-level walker
//! in a harmonic trap.
//!
//! The crate implements three mutually cross-checkable representations of the
//! same hybrid quantum–classical dynamics for the position-diagonal block of
//! the walker's density operator:
//!
//! 1. **Coefficient kernel** ([`coeff`]) — builds every master-equation rate
//!    from microscopic inputs (trap/qubit frequencies, coupling, bath spectral
//!    density, temperature), including Cauchy principal-value integrals and
//!    the Kossakowski complete-positivity certificate; or accepts the
//!    dimensionless coefficients directly (phenomenological mode).
//! 2. **Hybrid field PDE** ([`field`], [`pde`]) — four coupled real fields
//!    ρ̃₊(ξ,t), ρ̃₋(ξ,t), C̃_R(ξ,t), C̃_I(ξ,t) on a uniform grid, integrated by
//!    the method of lines (second-order central differences, classical RK4).
//! 3. **Moment hierarchy** ([`moments`]) — the same dynamics projected onto
//!    position moments ⟨ξⁿ·⟩: a linear ODE system with 4×4 block structure,
//!    truncated at a configurable order.
//! 4. **Cumulant closures** ([`cumulants`]) — nonlinear ODEs for the cumulants
//!    of the four fields under a third- or fourth-order closure.
//!
//! Observables and diagnostics shared by the representations live in
//! [`observables`]; ready-made parameter sets for the reference scenarios in
//! [`presets`].
//!
//! The crate is `no_std`-compatible (requires `alloc`); every transcendental
//! call goes through [`math`], which delegates to `libm`, so results are
//! bit-identical across platforms and between `std`/`no_std` builds.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod coeff;
pub mod cumulants;
pub mod field;
pub mod math;
pub mod moments;
pub mod observables;
pub mod pde;
pub mod presets;
pub mod quad;
