// SPDX-License-Identifier: MIT OR Apache-2.0

//! Derived observables: position distribution, central statistics,
//! moment↔cumulant conversion, integrated coherence, and σ_z expectation.
//!
//! All statistics are computed on the trace-normalized distribution
//! P(x,t)/∫P dx, because the transport equations do not conserve the trace
//! exactly; this matches the probabilistic reading of P(x,t).

use alloc::vec::Vec;

use crate::field::{self, Component, HybridField};
use crate::math;
use crate::pde::PdeTrajectory;

/// Central statistics of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralStats {
    /// Mean position.
    pub mean: f64,
    /// Central variance.
    pub variance: f64,
    /// Standardized third central moment.
    pub skewness: f64,
    /// Fourth standardized central moment minus 3 (zero for a Gaussian).
    pub excess_kurtosis: f64,
}

/// Observable extraction failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableError {
    /// Variance ≤ 0 within tolerance; standardized moments are undefined.
    DegenerateDistribution,
    /// The distribution's trace (zeroth moment) is not strictly positive.
    NonPositiveTrace,
}

impl core::fmt::Display for ObservableError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ObservableError::DegenerateDistribution => {
                write!(f, "degenerate distribution: variance is not positive")
            }
            ObservableError::NonPositiveTrace => {
                write!(f, "distribution trace must be strictly positive")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ObservableError {}

/// Aligned time series of every reported scalar observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    /// Sample times (the trajectory's snapshot times).
    pub times: Vec<f64>,
    /// Trace ∫ρ̃₊ dξ per sample.
    pub trace: Vec<f64>,
    /// Mean of the normalized distribution.
    pub mean: Vec<f64>,
    /// Central variance σ²(t).
    pub variance: Vec<f64>,
    /// Standardized skewness.
    pub skewness: Vec<f64>,
    /// Excess kurtosis.
    pub excess_kurtosis: Vec<f64>,
    /// Integrated coherence ∫C̃_I dξ.
    pub c_i_integral: Vec<f64>,
    /// Population inversion ⟨σ̂_z⟩ = ∫ρ̃₋ dξ.
    pub sigma_z: Vec<f64>,
}

/// The position probability distribution P(x,t): the ρ̃₊ profile.
pub fn probability_density(field: &HybridField) -> Vec<f64> {
    field.rho_plus.clone()
}

/// Central statistics of the trace-normalized ρ̃₊ distribution on the grid.
pub fn central_stats(field: &HybridField) -> Result<CentralStats, ObservableError> {
    let raw: Vec<f64> =
        (0..=4u32).map(|n| field::grid_moment(field, n, Component::RhoPlus)).collect();
    central_stats_from_moments(&raw)
}

/// Central statistics from raw moments `[m₀, m₁, m₂, m₃, m₄]`.
pub fn central_stats_from_moments(raw: &[f64]) -> Result<CentralStats, ObservableError> {
    assert!(raw.len() >= 5, "need raw moments through order 4");
    let m0 = raw[0];
    if !(m0 > 0.0) {
        return Err(ObservableError::NonPositiveTrace);
    }
    let mu = raw[1] / m0;
    let m2 = raw[2] / m0;
    let m3 = raw[3] / m0;
    let m4 = raw[4] / m0;
    let var = m2 - mu * mu;
    // "Variance ≤ 0 within tolerance": the tolerance floor guards the cases
    // where cancellation m₂ − μ² leaves rounding noise of either sign.
    if var <= 1e-12 * (1.0 + math::abs(m2)) {
        return Err(ObservableError::DegenerateDistribution);
    }
    let c3 = m3 - 3.0 * mu * m2 + 2.0 * mu * mu * mu;
    let c4 = m4 - 4.0 * mu * m3 + 6.0 * mu * mu * m2 - 3.0 * math::powi(mu, 4);
    Ok(CentralStats {
        mean: mu,
        variance: var,
        skewness: c3 / (var * math::sqrt(var)),
        excess_kurtosis: c4 / (var * var) - 3.0,
    })
}

/// Cumulants κ₁…κ_k from raw moments `[m₀, …, m_k]` (1 ≤ k ≤ 4):
/// κ₁ = m₁/m₀, κ₂ = m₂/m₀ − κ₁², κ₃ = m₃/m₀ − 3κ₁κ₂ − κ₁³,
/// κ₄ = m₄/m₀ − 4κ₁κ₃ − 3κ₂² − 6κ₁²κ₂ − κ₁⁴.
pub fn cumulants_from_moments(raw: &[f64]) -> Result<Vec<f64>, ObservableError> {
    let k = raw.len().saturating_sub(1);
    assert!((1..=4).contains(&k), "supported orders are 1..=4, got {k}");
    let m0 = raw[0];
    if !(m0 > 0.0) {
        return Err(ObservableError::NonPositiveTrace);
    }
    let mut kappa = Vec::with_capacity(k);
    let k1 = raw[1] / m0;
    kappa.push(k1);
    if k >= 2 {
        kappa.push(raw[2] / m0 - k1 * k1);
    }
    if k >= 3 {
        let k2 = kappa[1];
        kappa.push(raw[3] / m0 - 3.0 * k1 * k2 - k1 * k1 * k1);
    }
    if k >= 4 {
        let k2 = kappa[1];
        let k3 = kappa[2];
        kappa.push(
            raw[4] / m0 - 4.0 * k1 * k3 - 3.0 * k2 * k2 - 6.0 * k1 * k1 * k2 - math::powi(k1, 4),
        );
    }
    Ok(kappa)
}

/// Inverse of [`cumulants_from_moments`]: raw moments `[m₀, …, m_k]` from a
/// zeroth moment and cumulants κ₁…κ_k.
pub fn moments_from_cumulants(m0: f64, kappa: &[f64]) -> Vec<f64> {
    let k = kappa.len();
    assert!((1..=4).contains(&k), "supported orders are 1..=4, got {k}");
    let mut raw = Vec::with_capacity(k + 1);
    raw.push(m0);
    let k1 = kappa[0];
    raw.push(m0 * k1);
    if k >= 2 {
        raw.push(m0 * (kappa[1] + k1 * k1));
    }
    if k >= 3 {
        raw.push(m0 * (kappa[2] + 3.0 * k1 * kappa[1] + k1 * k1 * k1));
    }
    if k >= 4 {
        raw.push(
            m0 * (kappa[3]
                + 4.0 * k1 * kappa[2]
                + 3.0 * kappa[1] * kappa[1]
                + 6.0 * k1 * k1 * kappa[1]
                + math::powi(k1, 4)),
        );
    }
    raw
}

/// Population inversion ⟨σ̂_z⟩ = ∫ρ̃₋ dξ.
pub fn sigma_z_expectation(field: &HybridField) -> f64 {
    field::trapezoid(&field.rho_minus, field.grid.dx)
}

/// Integrated imaginary coherence C_I(t) = ∫C̃_I dξ.
pub fn c_i_integral(field: &HybridField) -> f64 {
    field::trapezoid(&field.c_imag, field.grid.dx)
}

/// Extract the full observable series from a trajectory's snapshots.
pub fn observable_series(traj: &PdeTrajectory) -> Result<ObservableSeries, ObservableError> {
    let n = traj.snapshots.len();
    let mut s = ObservableSeries {
        times: Vec::with_capacity(n),
        trace: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        variance: Vec::with_capacity(n),
        skewness: Vec::with_capacity(n),
        excess_kurtosis: Vec::with_capacity(n),
        c_i_integral: Vec::with_capacity(n),
        sigma_z: Vec::with_capacity(n),
    };
    for snap in &traj.snapshots {
        let stats = central_stats(snap)?;
        s.times.push(snap.time);
        s.trace.push(field::grid_moment(snap, 0, Component::RhoPlus));
        s.mean.push(stats.mean);
        s.variance.push(stats.variance);
        s.skewness.push(stats.skewness);
        s.excess_kurtosis.push(stats.excess_kurtosis);
        s.c_i_integral.push(c_i_integral(snap));
        s.sigma_z.push(sigma_z_expectation(snap));
    }
    Ok(s)
}
