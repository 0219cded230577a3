// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar math shims.
//!
//! Every transcendental used anywhere in the crate is routed through this
//! module, which delegates to [`libm`]. Two guarantees hang on that choice:
//! `no_std` builds (the `f64` inherent methods live in `std`), and bit-for-bit
//! reproducibility of all numerical output (libm is pure Rust and evaluates
//! identically on every platform, unlike the system math library behind
//! `std`).

/// eˣ.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// eˣ − 1, accurate for small |x|.
#[inline(always)]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

/// Natural logarithm.
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Sine.
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Cosine.
#[inline(always)]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// Absolute value.
#[inline(always)]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Round up to an integer value.
#[inline(always)]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Round to the nearest integer value (ties away from zero).
#[inline(always)]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// xⁿ for non-negative integer n, by binary exponentiation.
///
/// Used for the grid profiles e^(−x^j); exact sign handling for even/odd
/// powers of negative arguments, no transcendental round-off.
#[inline]
pub fn powi(x: f64, n: u32) -> f64 {
    let mut base = x;
    let mut k = n;
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}
