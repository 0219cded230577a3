// SPDX-License-Identifier: MIT OR Apache-2.0

//! Adaptive quadrature and Cauchy principal values.
//!
//! The integrator is an adaptive bisection scheme built on 15-point
//! Gauss–Legendre panels. Gauss nodes are strictly interior, so integrands
//! that are finite on the open interval but singular at an endpoint (the
//! spectral kernels J(ω̃)n(ω̃) behave like 1/ω̃ near zero for a flat window)
//! are never evaluated at the singular point itself: a genuinely divergent
//! integral runs out of subdivision budget and is reported as
//! [`QuadError::NonConvergence`] instead of silently returning garbage.
//!
//! Principal values are computed by singularity subtraction,
//!
//! P∫₀ᵁ g(ω̃)/(ω̃−p) dω̃ = ∫₀ᵁ [g(ω̃)−g(p)]/(ω̃−p) dω̃ + g(p)·ln((U−p)/p),
//!
//! which replaces the simple pole by a removable one; the log remainder is
//! analytic. A pole outside (0, U) needs no subtraction and is integrated
//! directly.

use crate::math;

/// Relative tolerance used for all coefficient-kernel integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Maximum bisection depth before an interval is declared non-convergent.
const MAX_DEPTH: u32 = 40;

/// Hard budget on integrand evaluations per [`integrate`] call.
const MAX_EVALS: u64 = 4_000_000;

/// Quadrature failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadError {
    /// The adaptive estimate did not reach tolerance within the iteration
    /// budget, or the integrand evaluated to a non-finite value.
    NonConvergence,
}

impl core::fmt::Display for QuadError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            QuadError::NonConvergence => {
                write!(f, "adaptive quadrature failed to converge (divergent or pathological integrand)")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for QuadError {}

/// 15-point Gauss–Legendre abscissae on [−1, 1] (symmetric; listed in full).
const GL15_NODES: [f64; 15] = [
    -0.987992518020485428,
    -0.937273392400705904,
    -0.848206583410427216,
    -0.724417731360170047,
    -0.570972172608538848,
    -0.394151347077563370,
    -0.201194093997434522,
    0.0,
    0.201194093997434522,
    0.394151347077563370,
    0.570972172608538848,
    0.724417731360170047,
    0.848206583410427216,
    0.937273392400705904,
    0.987992518020485428,
];

/// Weights paired with [`GL15_NODES`].
const GL15_WEIGHTS: [f64; 15] = [
    0.030753241996117268,
    0.070366047488108125,
    0.107159220467171935,
    0.139570677926154314,
    0.166269205816993934,
    0.186161000015562211,
    0.198431485327111576,
    0.202578241925561273,
    0.198431485327111576,
    0.186161000015562211,
    0.166269205816993934,
    0.139570677926154314,
    0.107159220467171935,
    0.070366047488108125,
    0.030753241996117268,
];

/// Single 15-point Gauss–Legendre panel over [a, b].
fn gl15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..15 {
        acc += GL15_WEIGHTS[i] * f(mid + half * GL15_NODES[i]);
    }
    acc * half
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut u64,
) -> Result<f64, QuadError> {
    *evals += 30;
    if *evals > MAX_EVALS {
        return Err(QuadError::NonConvergence);
    }
    let mid = 0.5 * (a + b);
    let left = gl15(f, a, mid);
    let right = gl15(f, mid, b);
    if !left.is_finite() || !right.is_finite() {
        return Err(QuadError::NonConvergence);
    }
    let refined = left + right;
    if math::abs(refined - whole) <= tol {
        return Ok(refined);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadError::NonConvergence);
    }
    let half_tol = 0.5 * tol;
    Ok(adapt(f, a, mid, left, half_tol, depth + 1, evals)?
        + adapt(f, mid, b, right, half_tol, depth + 1, evals)?)
}

/// Adaptive integral of `f` over [a, b] to relative tolerance `rel_tol`.
///
/// The tolerance is anchored to a scale estimated from an eight-panel
/// composite pass; the L1 mass of the panels guards the floor so strongly
/// cancelling integrands are not driven to impossible absolute tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::NonConvergence);
    }
    if a == b {
        return Ok(0.0);
    }
    let mut rough = 0.0;
    let mut l1 = 0.0;
    for k in 0..8u32 {
        let pa = a + (b - a) * f64::from(k) / 8.0;
        let pb = a + (b - a) * f64::from(k + 1) / 8.0;
        let s = gl15(f, pa, pb);
        if !s.is_finite() {
            return Err(QuadError::NonConvergence);
        }
        rough += s;
        l1 += math::abs(s);
    }
    let scale = math::abs(rough).max(1e-3 * l1).max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    let mut evals: u64 = 0;
    adapt(f, a, b, gl15(f, a, b), tol, 0, &mut evals)
}

/// Cauchy principal value P∫₀ᵁ g(ω̃)/(ω̃−pole) dω̃ by singularity subtraction.
///
/// With the pole inside (0, U) the integrand is replaced by the subtracted
/// form [g(ω̃)−g(pole)]/(ω̃−pole) — smooth across the pole — plus the analytic
/// remainder g(pole)·ln((U−pole)/pole). A pole outside (0, U) leaves the
/// integrand regular and is integrated directly. Within a vanishing
/// neighbourhood of the pole the subtracted quotient is evaluated as the
/// centred difference estimate of g′(pole) to avoid catastrophic
/// cancellation.
pub fn principal_value_subtracted<F: Fn(f64) -> f64>(
    g: F,
    pole: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if !(upper > 0.0) {
        return Err(QuadError::NonConvergence);
    }
    if pole <= 0.0 || pole >= upper {
        return integrate(&|w| g(w) / (w - pole), 0.0, upper, rel_tol);
    }
    let gp = g(pole);
    if !gp.is_finite() {
        return Err(QuadError::NonConvergence);
    }
    let h = (1e-6 * (1.0 + pole)).min(0.45 * pole).min(0.45 * (upper - pole));
    let dgp = (g(pole + h) - g(pole - h)) / (2.0 * h);
    let eps = 1e-9 * (1.0 + pole);
    let sub = |w: f64| {
        let d = w - pole;
        if math::abs(d) < eps {
            dgp
        } else {
            (g(w) - gp) / d
        }
    };
    let body = integrate(&sub, 0.0, upper, rel_tol)?;
    Ok(body + gp * math::ln((upper - pole) / pole))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl15_weights_sum_to_two() {
        let sum: f64 = GL15_WEIGHTS.iter().sum();
        assert!(math::abs(sum - 2.0) < 1e-15);
    }

    #[test]
    fn gl15_integrates_polynomials_exactly() {
        // Degree 14 ≪ the 29-degree exactness of a 15-point rule.
        let f = |x: f64| 15.0 * math::powi(x, 14);
        let got = gl15(&f, 0.0, 1.0);
        assert!(math::abs(got - 1.0) < 1e-13, "got {got}");
    }

    #[test]
    fn adaptive_hits_pi() {
        let f = |x: f64| 4.0 / (1.0 + x * x);
        let got = integrate(&f, 0.0, 1.0, 1e-12).unwrap();
        assert!(math::abs(got - core::f64::consts::PI) < 1e-11, "got {got}");
    }

    #[test]
    fn adaptive_handles_oscillation() {
        // ∫₀^{10π} sin x dx = 0; checks cancellation and the L1 floor.
        let f = |x: f64| math::sin(x);
        let got = integrate(&f, 0.0, 10.0 * core::f64::consts::PI, 1e-10).unwrap();
        assert!(math::abs(got) < 1e-8, "got {got}");
    }

    #[test]
    fn zero_integrand_is_zero() {
        let f = |_x: f64| 0.0;
        assert_eq!(integrate(&f, 0.0, 5.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn divergent_integrand_reports_nonconvergence() {
        // 1/x on (0, 1]: finite at every Gauss node, logarithmically divergent.
        let f = |x: f64| 1.0 / x;
        assert_eq!(integrate(&f, 0.0, 1.0, 1e-8), Err(QuadError::NonConvergence));
    }

    #[test]
    fn pv_flat_symmetric_window_cancels() {
        // g ≡ 1, pole at U/2: subtracted integrand vanishes and the log
        // remainder is ln 1 = 0.
        let got = principal_value_subtracted(|_| 1.0, 1.0, 2.0, 1e-10).unwrap();
        assert!(math::abs(got) < 1e-12, "got {got}");
    }

    #[test]
    fn pv_flat_window_matches_log() {
        // g ≡ 1 on [0, U]: P∫ dω̃/(ω̃−p) = ln((U−p)/p).
        let (p, u) = (0.7, 5.0);
        let got = principal_value_subtracted(|_| 1.0, p, u, 1e-10).unwrap();
        let want = math::ln((u - p) / p);
        assert!(math::abs(got - want) < 1e-10, "got {got} want {want}");
    }

    #[test]
    fn pv_pole_outside_is_plain_integral() {
        // p > U: ∫₀ᵁ dω̃/(ω̃−p) = ln((p−U)/p) (negative, regular).
        let (p, u) = (3.0, 2.0);
        let got = principal_value_subtracted(|_| 1.0, p, u, 1e-10).unwrap();
        let want = math::ln((p - u) / p);
        assert!(math::abs(got - want) < 1e-10, "got {got} want {want}");
    }

    #[test]
    fn pv_polynomial_numerator() {
        // g(w) = w, pole p inside: P∫₀ᵁ w/(w−p) dw = U + p·ln((U−p)/p).
        let (p, u) = (1.3, 4.0);
        let got = principal_value_subtracted(|w| w, p, u, 1e-10).unwrap();
        let want = u + p * math::ln((u - p) / p);
        assert!(math::abs(got - want) < 1e-9, "got {got} want {want}");
    }
}
