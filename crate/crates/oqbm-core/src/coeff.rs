// SPDX-License-Identifier: MIT OR Apache-2.0

//! Master-equation coefficient kernel.
//!
//! Everything downstream — the hybrid PDE, the moment hierarchy, the cumulant
//! closures — is driven by one flat vector of rate constants,
//! [`CoefficientSet`]. This module produces that vector in two modes:
//!
//! * **Microscopic** ([`build_coefficients`]): from trap/qubit frequencies,
//!   coupling, temperature and a bath spectral density J(ω̃), including the
//!   Cauchy principal-value integrals behind the Lamb-type shifts and the
//!   Kossakowski complete-positivity certificate
//!   det = 4ᾱ₁ᾱ₂ − 4ᾱ₃² = (πJ(ω)/(mω))²·n(ω)(n(ω)+1) ≥ 0.
//! * **Phenomenological** ([`direct_coefficients`]): the dimensionless
//!   coefficients named verbatim, with no microscopic consistency enforced
//!   (reference scenarios specify their parameters this way).
//!
//! Conventions: ħ is configurable (default 1); `temperature` is k_B·T in
//! energy units, so the Bose–Einstein occupation is n(ω̃) = 1/(e^{ħω̃/k_BT}−1),
//! exactly 0 at T = 0. The nondimensionalization length x̃₀ maps the physical
//! coefficients onto the barred ones used by all dynamics:
//! λ̄₂ = λ₂x̃₀², λ̄₃ = λ₃/x̃₀², δ̄ᵢ = δᵢ/x̃₀, ā₂ = ã₂/x̃₀, ā₇ = ã₇x̃₀, ā₈ = ã₈x̃₀.

use crate::math;
use crate::quad::{self, QuadError};
use alloc::string::String;

/// Bath spectral density families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralKind {
    /// J(ω̃) = η·ω̃·e^(−ω̃/ω_c) — the standard Brownian-motion choice.
    OhmicExpCutoff,
    /// J(ω̃) = η on [0, ω_c], 0 outside — analytically checkable PV integrals.
    FlatWindow,
}

/// Bath spectral density specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSpec {
    /// Functional family.
    pub kind: SpectralKind,
    /// Overall coupling scale η ≥ 0 (dimensionless).
    pub eta: f64,
    /// Cutoff frequency ω_c > 0 (rad/time).
    pub omega_c: f64,
}

/// Microscopic inputs of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Particle mass m > 0 (arbitrary units).
    pub m: f64,
    /// Trap frequency ω > 0 (rad/time).
    pub omega: f64,
    /// Qubit transition frequency ω₀ > 0 (rad/time).
    pub omega0: f64,
    /// Drive amplitude Ω (rad/time); the weak-drive regime assumes Ω ≪ ω₀.
    pub omega_drive: f64,
    /// Relative coupling strength α (dimensionless).
    pub alpha: f64,
    /// Bath temperature as k_B·T in energy units; T = 0 is allowed.
    pub temperature: f64,
    /// Reduced Planck constant (default 1).
    pub hbar: f64,
    /// Nondimensionalization length x̃₀ > 0 (default 1).
    pub x_scale: f64,
    /// Bath spectral density.
    pub spectral: SpectralSpec,
}

impl PhysicalParams {
    /// True when the weak-drive assumption Ω ≪ ω₀ is violated
    /// (Ω ≥ 0.1·ω₀). A warning condition, never an error: the equations
    /// stay integrable, they just leave their derivation's regime.
    pub fn weak_drive_violated(&self) -> bool {
        self.omega_drive >= 0.1 * self.omega0
    }

    fn validate(&self) -> Result<(), CoeffError> {
        if !(self.m > 0.0) {
            return Err(CoeffError::InvalidParams("m must be > 0"));
        }
        if !(self.omega > 0.0) {
            return Err(CoeffError::InvalidParams("omega must be > 0"));
        }
        if !(self.omega0 > 0.0) {
            return Err(CoeffError::InvalidParams("omega0 must be > 0"));
        }
        if !(self.temperature >= 0.0) {
            return Err(CoeffError::InvalidParams("temperature must be >= 0"));
        }
        if !(self.hbar > 0.0) {
            return Err(CoeffError::InvalidParams("hbar must be > 0"));
        }
        if !(self.x_scale > 0.0) {
            return Err(CoeffError::InvalidParams("x_scale must be > 0"));
        }
        if !(self.spectral.eta >= 0.0) {
            return Err(CoeffError::InvalidParams("spectral eta must be >= 0"));
        }
        if !(self.spectral.omega_c > 0.0) {
            return Err(CoeffError::InvalidParams("spectral omega_c must be > 0"));
        }
        Ok(())
    }
}

/// The complete dimensionless coefficient vector driving all three solvers.
///
/// Indexed families are stored 0-based: `a_tilde[0]` is ã₁, `lambda[3]` is
/// λ₄, `delta_cap[0]` is Δ₁, `delta_bar[0]` is δ̄₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    /// ᾱ₁ — QHO dissipator rate (position-position).
    pub alpha_bar_1: f64,
    /// ᾱ₂ — QHO dissipator rate (momentum-momentum).
    pub alpha_bar_2: f64,
    /// ᾱ₃ — QHO dissipator cross rate.
    pub alpha_bar_3: f64,
    /// β₁ — two-level emission rate.
    pub beta_1: f64,
    /// β₂ — two-level absorption rate.
    pub beta_2: f64,
    /// β₃ — two-level Lamb-type shift (principal value).
    pub beta_3: f64,
    /// Cross-term constants ã₁…ã₈.
    pub a_tilde: [f64; 8],
    /// OQBM rates λ₁…λ₄ (drift, trapping, diffusion, friction).
    pub lambda: [f64; 4],
    /// λ̄₂ = λ₂·x̃₀² — dimensionless trapping rate.
    pub lambda_bar_2: f64,
    /// λ̄₃ = λ₃/x̃₀² — dimensionless diffusion rate.
    pub lambda_bar_3: f64,
    /// Δ₁…Δ₄ — aggregate drift/decay combinations.
    pub delta_cap: [f64; 4],
    /// δ̄₁…δ̄₃ = δ₁…δ₃/x̃₀ — dimensionless gradient couplings.
    pub delta_bar: [f64; 3],
    /// β̄ = β₁ − β₂ — net two-level relaxation.
    pub beta_diff: f64,
    /// ā₂ = ã₂/x̃₀.
    pub a_bar_2: f64,
    /// ā₇ = ã₇·x̃₀.
    pub a_bar_7: f64,
    /// ā₈ = ã₈·x̃₀.
    pub a_bar_8: f64,
    /// Drive amplitude Ω (enters the dynamics unscaled).
    pub omega_drive: f64,
    /// χ — stationary second-moment scale, ħ(2n(ω)+1)/(2mω x̃₀²).
    pub chi: f64,
    /// γ = 2ħᾱ₃/ᾱ₁ — stationary velocity-variance scale.
    pub gamma: f64,
    /// Set by [`direct_coefficients`]: microscopic consistency invariants
    /// (χλ̄₂ = λ₄−Δ₁, β₁ ≥ β₂ ≥ 0, …) are not meaningful and are skipped.
    pub phenomenological: bool,
}

impl CoefficientSet {
    /// The all-zero set (free, non-driven, decoupled walker).
    pub fn zeroed() -> Self {
        CoefficientSet {
            alpha_bar_1: 0.0,
            alpha_bar_2: 0.0,
            alpha_bar_3: 0.0,
            beta_1: 0.0,
            beta_2: 0.0,
            beta_3: 0.0,
            a_tilde: [0.0; 8],
            lambda: [0.0; 4],
            lambda_bar_2: 0.0,
            lambda_bar_3: 0.0,
            delta_cap: [0.0; 4],
            delta_bar: [0.0; 3],
            beta_diff: 0.0,
            a_bar_2: 0.0,
            a_bar_7: 0.0,
            a_bar_8: 0.0,
            omega_drive: 0.0,
            chi: 0.0,
            gamma: 0.0,
            phenomenological: true,
        }
    }
}

/// Coefficient-kernel failure modes.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffError {
    /// A principal-value integral did not converge (divergent kernel or
    /// iteration budget exhausted).
    NonConvergence {
        /// Which integral failed.
        what: &'static str,
    },
    /// J(ω) = 0: γ = 2ħᾱ₃/ᾱ₁ and the λ rates are undefined.
    DegenerateBath,
    /// The Kossakowski determinant came out below −1e−12 — an
    /// implementation bug by construction, never a physical regime.
    PositivityViolation {
        /// The offending determinant value.
        det: f64,
    },
    /// [`direct_coefficients`] received a name outside the documented key set.
    UnknownKey(String),
    /// A precondition on [`PhysicalParams`] is violated.
    InvalidParams(&'static str),
}

impl core::fmt::Display for CoeffError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoeffError::NonConvergence { what } => {
                write!(f, "principal-value integral for {what} did not converge")
            }
            CoeffError::DegenerateBath => {
                write!(f, "degenerate bath: J(omega) = 0 leaves gamma and the lambda rates undefined")
            }
            CoeffError::PositivityViolation { det } => {
                write!(f, "Kossakowski determinant {det:e} is negative beyond tolerance")
            }
            CoeffError::UnknownKey(key) => write!(f, "unknown coefficient key: {key}"),
            CoeffError::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoeffError {}

/// Bose–Einstein occupation n(ω̃) = 1/(e^{ħω̃/k_BT} − 1).
///
/// Evaluated through `expm1` for accuracy at small arguments; returns exactly
/// 0 at `temperature = 0` (no division by a limit).
pub fn occupation(omega_eval: f64, temperature: f64, hbar: f64) -> f64 {
    debug_assert!(omega_eval > 0.0, "occupation needs a positive frequency");
    if temperature == 0.0 {
        return 0.0;
    }
    1.0 / math::expm1(hbar * omega_eval / temperature)
}

/// Bath spectral density J(ω̃) for the given family.
pub fn spectral_density(omega_eval: f64, spec: &SpectralSpec) -> f64 {
    if omega_eval < 0.0 {
        return 0.0;
    }
    match spec.kind {
        SpectralKind::OhmicExpCutoff => spec.eta * omega_eval * math::exp(-omega_eval / spec.omega_c),
        SpectralKind::FlatWindow => {
            if omega_eval <= spec.omega_c {
                spec.eta
            } else {
                0.0
            }
        }
    }
}

/// Numerator kinds of the principal-value kernels g(ω̃)/(ω̃ − pole).
///
/// Four numerators × two poles (ω₀ and ω) cover every shift constant in the
/// model: β₃ and ã₄, ã₅ carry the ω₀ pole; ã₆, ã₇ carry the ω pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvKernel {
    /// g = J(ω̃).
    Bare,
    /// g = J(ω̃)·n(ω̃).
    Occupation,
    /// g = J(ω̃)·(n(ω̃)+1).
    Emission,
    /// g = J(ω̃)·(n(ω̃)+½).
    Symmetric,
}

impl PvKernel {
    fn factor(self, omega_eval: f64, temperature: f64, hbar: f64) -> f64 {
        match self {
            PvKernel::Bare => 1.0,
            PvKernel::Occupation => occupation(omega_eval, temperature, hbar),
            PvKernel::Emission => occupation(omega_eval, temperature, hbar) + 1.0,
            PvKernel::Symmetric => occupation(omega_eval, temperature, hbar) + 0.5,
        }
    }
}

/// Integration window for the principal-value integrals: the exponential
/// cutoff makes the ohmic tail negligible past 50·ω_c; the flat window is
/// identically zero past ω_c.
pub fn pv_upper_limit(spec: &SpectralSpec) -> f64 {
    match spec.kind {
        SpectralKind::OhmicExpCutoff => 50.0 * spec.omega_c,
        SpectralKind::FlatWindow => spec.omega_c,
    }
}

/// Cauchy principal value P∫₀ᵁ g(ω̃)/(ω̃−pole) dω̃ for one of the model's
/// kernels, by singularity subtraction at relative tolerance 1e−8.
///
/// Flat-window kernels containing the occupation number diverge like 1/ω̃ at
/// the lower limit for T > 0 (J(0) = η ≠ 0 while n ∼ k_BT/ħω̃); those report
/// [`CoeffError::NonConvergence`] rather than a truncated value.
pub fn principal_value(
    kind: PvKernel,
    pole: f64,
    spec: &SpectralSpec,
    temperature: f64,
    hbar: f64,
) -> Result<f64, CoeffError> {
    if !(pole > 0.0) {
        return Err(CoeffError::InvalidParams("pole must be > 0"));
    }
    let g = |w: f64| spectral_density(w, spec) * kind.factor(w, temperature, hbar);
    quad::principal_value_subtracted(g, pole, pv_upper_limit(spec), quad::DEFAULT_REL_TOL).map_err(
        |QuadError::NonConvergence| CoeffError::NonConvergence {
            what: "spectral kernel",
        },
    )
}

fn pv(
    kind: PvKernel,
    pole: f64,
    spec: &SpectralSpec,
    temperature: f64,
    hbar: f64,
    what: &'static str,
) -> Result<f64, CoeffError> {
    principal_value(kind, pole, spec, temperature, hbar)
        .map_err(|e| match e {
            CoeffError::NonConvergence { .. } => CoeffError::NonConvergence { what },
            other => other,
        })
}

/// Build the full [`CoefficientSet`] from microscopic inputs.
///
/// Rate constants (with J₀ = J(ω₀), J_ω = J(ω), n₀ = n(ω₀), n_ω = n(ω)):
///
/// * ᾱ₁ = (π/4)·J_ω·(2n_ω+1), ᾱ₂ = π·J_ω·(2n_ω+1)/(4(mω)²),
///   ᾱ₃ = π·J_ω/(4mω);
/// * β₁ = 2α²π·J₀·(n₀+1), β₂ = 2α²π·J₀·n₀,
///   β₃ = α²·P∫ J(n+1)/(ω̃−ω₀);
/// * ã₁ = (ħπα/2mω)(J₀n₀ + J_ωn_ω), ã₂ = (ħπα/2mω)J₀,
///   ã₃ = (ħπα/4mω)J_ω, ã₄ = (ħα/2mω)·P∫ Jn/(ω̃−ω₀),
///   ã₅ = (ħα/2mω)·P∫ J/(ω̃−ω₀), ã₆ = (ħα/2mω)·P∫ J(n+½)/(ω̃−ω),
///   ã₇ = (α/2)·P∫ J/(ω̃−ω), ã₈ = (απ/2)·J_ω;
/// * γ = 2ħᾱ₃/ᾱ₁, λ₁ = ω²/(ᾱ₁γ), λ₂ = m²ω⁴/(ᾱ₁ħ²), λ₃ = ᾱ₂ħ²,
///   λ₄ = 2ᾱ₃ħ;
/// * Δ₁ = λ₄−λ₁, Δ₂ = λ₄−β₁−β₂, Δ₃ = λ₄−(β₁+β₂)/2, Δ₄ = 2β₃+Δ₃−ω₀;
/// * δ₁ = 2ã₄+ã₅, δ₂ = ã₅/2+ã₆, δ₃ = ã₁+ã₃+ã₂/2;
/// * χ = ħ(2n_ω+1)/(2mω x̃₀²).
///
/// The closure identity χ·λ̄₂ = λ₄ − Δ₁ holds by construction and is verified
/// internally to 1e−10 relative.
pub fn build_coefficients(params: &PhysicalParams) -> Result<CoefficientSet, CoeffError> {
    params.validate()?;
    let PhysicalParams {
        m,
        omega,
        omega0,
        omega_drive,
        alpha,
        temperature,
        hbar,
        x_scale,
        spectral,
    } = *params;

    let j_w = spectral_density(omega, &spectral);
    let j_0 = spectral_density(omega0, &spectral);
    let n_w = occupation(omega, temperature, hbar);
    let n_0 = occupation(omega0, temperature, hbar);
    if j_w <= 0.0 {
        return Err(CoeffError::DegenerateBath);
    }

    let pi = core::f64::consts::PI;
    let alpha_bar_1 = 0.25 * pi * j_w * (2.0 * n_w + 1.0);
    let alpha_bar_2 = pi * j_w * (2.0 * n_w + 1.0) / (4.0 * (m * omega) * (m * omega));
    let alpha_bar_3 = 0.25 * pi * j_w / (m * omega);

    let beta_1 = 2.0 * alpha * alpha * pi * j_0 * (n_0 + 1.0);
    let beta_2 = 2.0 * alpha * alpha * pi * j_0 * n_0;
    let beta_3 = alpha
        * alpha
        * pv(PvKernel::Emission, omega0, &spectral, temperature, hbar, "beta_3")?;

    // Cross-term constants. The prefactor ħπα/(2mω) carries the product of
    // the coupling constant and the oscillator length scales that
    // accompanies every qubit–walker cross term.
    let cross = hbar * alpha / (2.0 * m * omega);
    let a1 = pi * cross * (j_0 * n_0 + j_w * n_w);
    let a2 = pi * cross * j_0;
    let a3 = 0.5 * pi * cross * j_w;
    let a4 = cross * pv(PvKernel::Occupation, omega0, &spectral, temperature, hbar, "a_tilde_4")?;
    let a5 = cross * pv(PvKernel::Bare, omega0, &spectral, temperature, hbar, "a_tilde_5")?;
    let a6 = cross * pv(PvKernel::Symmetric, omega, &spectral, temperature, hbar, "a_tilde_6")?;
    let a7 = 0.5 * alpha * pv(PvKernel::Bare, omega, &spectral, temperature, hbar, "a_tilde_7")?;
    let a8 = 0.5 * alpha * pi * j_w;

    let gamma = 2.0 * hbar * alpha_bar_3 / alpha_bar_1;
    let lambda_1 = omega * omega / (alpha_bar_1 * gamma);
    let lambda_2 = m * m * math::powi(omega, 4) / (alpha_bar_1 * hbar * hbar);
    let lambda_3 = alpha_bar_2 * hbar * hbar;
    let lambda_4 = 2.0 * alpha_bar_3 * hbar;

    let delta_cap = [
        lambda_4 - lambda_1,
        lambda_4 - beta_1 - beta_2,
        lambda_4 - 0.5 * (beta_1 + beta_2),
        2.0 * beta_3 + lambda_4 - 0.5 * (beta_1 + beta_2) - omega0,
    ];

    let d1 = 2.0 * a4 + a5;
    let d2 = 0.5 * a5 + a6;
    let d3 = a1 + a3 + 0.5 * a2;

    let lambda_bar_2 = lambda_2 * x_scale * x_scale;
    let lambda_bar_3 = lambda_3 / (x_scale * x_scale);
    let chi = hbar * (2.0 * n_w + 1.0) / (2.0 * m * omega * x_scale * x_scale);

    let set = CoefficientSet {
        alpha_bar_1,
        alpha_bar_2,
        alpha_bar_3,
        beta_1,
        beta_2,
        beta_3,
        a_tilde: [a1, a2, a3, a4, a5, a6, a7, a8],
        lambda: [lambda_1, lambda_2, lambda_3, lambda_4],
        lambda_bar_2,
        lambda_bar_3,
        delta_cap,
        delta_bar: [d1 / x_scale, d2 / x_scale, d3 / x_scale],
        beta_diff: beta_1 - beta_2,
        a_bar_2: a2 / x_scale,
        a_bar_7: a7 * x_scale,
        a_bar_8: a8 * x_scale,
        omega_drive,
        chi,
        gamma,
        phenomenological: false,
    };

    // Internal consistency: emission dominates absorption, and the
    // stationary-variance identity χλ̄₂ = λ₄ − Δ₁ closes to rounding.
    debug_assert!(set.beta_1 >= set.beta_2 && set.beta_2 >= 0.0);
    let lhs = set.chi * set.lambda_bar_2;
    let rhs = set.lambda[3] - set.delta_cap[0];
    assert!(
        math::abs(lhs - rhs) <= 1e-10 * math::abs(rhs).max(f64::MIN_POSITIVE),
        "chi consistency violated: chi*lambda_bar_2 = {lhs:e}, lambda_4 - Delta_1 = {rhs:e}"
    );

    Ok(set)
}

/// Kossakowski complete-positivity certificate det = 4ᾱ₁ᾱ₂ − 4ᾱ₃².
///
/// Returns the determinant and asserts it matches the closed form
/// (πJ(ω)/(mω))²·n(ω)(n(ω)+1) to 1e−12 relative. The determinant is
/// non-negative for every T ≥ 0 and every admissible spectral density;
/// a value below −1e−12 is reported as [`CoeffError::PositivityViolation`]
/// (an implementation bug, never a physical regime).
pub fn kossakowski_determinant(params: &PhysicalParams) -> Result<f64, CoeffError> {
    params.validate()?;
    let j_w = spectral_density(params.omega, &params.spectral);
    let n_w = occupation(params.omega, params.temperature, params.hbar);
    let pi = core::f64::consts::PI;
    let m_omega = params.m * params.omega;

    let alpha_bar_1 = 0.25 * pi * j_w * (2.0 * n_w + 1.0);
    let alpha_bar_2 = pi * j_w * (2.0 * n_w + 1.0) / (4.0 * m_omega * m_omega);
    let alpha_bar_3 = 0.25 * pi * j_w / m_omega;
    let det = 4.0 * alpha_bar_1 * alpha_bar_2 - 4.0 * alpha_bar_3 * alpha_bar_3;

    // `det` is the difference of two terms of magnitude ~(s/2)^2, so the
    // closed form must be compared with a floor at that scale: at T = 0 the
    // closed form is exactly zero while the difference retains a one-ulp
    // cancellation residue.
    let s = pi * j_w / m_omega;
    let closed = s * s * n_w * (n_w + 1.0);
    assert!(
        math::abs(det - closed) <= 1e-12 * math::abs(closed).max(s * s),
        "Kossakowski closed form violated: det = {det:e}, closed = {closed:e}"
    );
    if det < -1e-12 {
        return Err(CoeffError::PositivityViolation { det });
    }
    Ok(det)
}

/// Documented keys accepted by [`direct_coefficients`], all referring to the
/// dimensionless (barred) quantities used by the dynamics.
pub const DIRECT_KEYS: [&str; 19] = [
    "Omega", "beta", "chi", "gamma", "Delta1", "Delta2", "Delta3", "Delta4", "lambda1", "lambda2",
    "lambda3", "lambda4", "delta1", "delta2", "delta3", "a2", "a7", "a8", "omega0",
];

/// Assemble a [`CoefficientSet`] verbatim from named dimensionless
/// coefficients (phenomenological mode).
///
/// Unspecified keys default to 0; `chi` must be given explicitly when the
/// cumulant dynamics will run. Accepted keys are listed in [`DIRECT_KEYS`]:
/// `Omega` (drive), `beta` (β̄ = β₁−β₂), `chi`, `gamma`, `Delta1`…`Delta4`,
/// `lambda1`…`lambda4` (λ̄₂/λ̄₃ double as λ₂/λ₃ since x̃₀ plays no role here),
/// `delta1`…`delta3` (δ̄ᵢ), `a2`/`a7`/`a8` (ā₂, ā₇, ā₈), `omega0` (only used
/// for the weak-drive advisory). No consistency invariants are enforced; the
/// returned set carries `phenomenological = true`.
pub fn direct_coefficients<'a, I>(raw: I) -> Result<CoefficientSet, CoeffError>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut set = CoefficientSet::zeroed();
    for (key, value) in raw {
        match key {
            "Omega" => set.omega_drive = value,
            "beta" => set.beta_diff = value,
            "chi" => set.chi = value,
            "gamma" => set.gamma = value,
            "Delta1" => set.delta_cap[0] = value,
            "Delta2" => set.delta_cap[1] = value,
            "Delta3" => set.delta_cap[2] = value,
            "Delta4" => set.delta_cap[3] = value,
            "lambda1" => set.lambda[0] = value,
            "lambda2" => {
                set.lambda[1] = value;
                set.lambda_bar_2 = value;
            }
            "lambda3" => {
                set.lambda[2] = value;
                set.lambda_bar_3 = value;
            }
            "lambda4" => set.lambda[3] = value,
            "delta1" => set.delta_bar[0] = value,
            "delta2" => set.delta_bar[1] = value,
            "delta3" => set.delta_bar[2] = value,
            "a2" => {
                set.a_tilde[1] = value;
                set.a_bar_2 = value;
            }
            "a7" => {
                set.a_tilde[6] = value;
                set.a_bar_7 = value;
            }
            "a8" => {
                set.a_tilde[7] = value;
                set.a_bar_8 = value;
            }
            // Accepted so phenomenological configs can still state the qubit
            // frequency for the weak-drive advisory; not a dynamical rate.
            "omega0" => {}
            other => return Err(CoeffError::UnknownKey(String::from(other))),
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OHMIC: SpectralSpec = SpectralSpec {
        kind: SpectralKind::OhmicExpCutoff,
        eta: 0.05,
        omega_c: 20.0,
    };

    fn base_params() -> PhysicalParams {
        PhysicalParams {
            m: 1.0,
            omega: 1.0,
            omega0: 5.0,
            omega_drive: 0.01,
            alpha: 0.1,
            temperature: 2.0,
            hbar: 1.0,
            x_scale: 1.0,
            spectral: OHMIC,
        }
    }

    #[test]
    fn occupation_zero_temperature_is_exactly_zero() {
        assert_eq!(occupation(1.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn occupation_ln2_temperature_gives_one() {
        // k_BT = ħω/ln2 makes the exponential exactly 2 ⇒ n = 1.
        let n = occupation(1.0, 1.0 / core::f64::consts::LN_2, 1.0);
        assert!(math::abs(n - 1.0) < 1e-12, "n = {n}");
    }

    #[test]
    fn occupation_matches_direct_formula() {
        let n = occupation(1.0, 10.0, 1.0);
        let want = 1.0 / (math::exp(0.1) - 1.0);
        assert!(math::abs(n - want) < 1e-12 * want);
    }

    #[test]
    fn spectral_density_trivial_points() {
        let ohmic = SpectralSpec { kind: SpectralKind::OhmicExpCutoff, eta: 1.0, omega_c: 5.0 };
        assert_eq!(spectral_density(0.0, &ohmic), 0.0);
        let at_cutoff = spectral_density(5.0, &ohmic);
        assert!(math::abs(at_cutoff - 5.0 / math::exp(1.0)) < 1e-14);

        let flat = SpectralSpec { kind: SpectralKind::FlatWindow, eta: 0.3, omega_c: 5.0 };
        assert_eq!(spectral_density(2.5, &flat), 0.3);
        assert_eq!(spectral_density(5.0, &flat), 0.3);
        assert_eq!(spectral_density(5.000001, &flat), 0.0);
    }

    #[test]
    fn pv_zero_spectral_density_is_zero() {
        let dead = SpectralSpec { kind: SpectralKind::OhmicExpCutoff, eta: 0.0, omega_c: 5.0 };
        let v = principal_value(PvKernel::Emission, 1.0, &dead, 2.0, 1.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn pv_flat_symmetric_window_is_zero() {
        // Pole at ω_c/2 with a flat numerator: the two log halves cancel.
        let flat = SpectralSpec { kind: SpectralKind::FlatWindow, eta: 1.0, omega_c: 2.0 };
        let v = principal_value(PvKernel::Bare, 1.0, &flat, 0.0, 1.0).unwrap();
        assert!(math::abs(v) < 1e-12, "v = {v}");
    }

    #[test]
    fn pv_flat_window_analytic_log() {
        let flat = SpectralSpec { kind: SpectralKind::FlatWindow, eta: 0.7, omega_c: 4.0 };
        let pole = 1.3;
        let v = principal_value(PvKernel::Bare, pole, &flat, 0.0, 1.0).unwrap();
        let want = 0.7 * math::ln((4.0 - pole) / pole);
        assert!(math::abs(v - want) < 1e-9, "v = {v}, want = {want}");
    }

    #[test]
    fn pv_flat_window_occupation_diverges_at_finite_temperature() {
        // J(0) = η ≠ 0 while n ~ k_BT/ħω̃: logarithmically divergent — the
        // kernel must refuse rather than truncate.
        let flat = SpectralSpec { kind: SpectralKind::FlatWindow, eta: 1.0, omega_c: 4.0 };
        let got = principal_value(PvKernel::Occupation, 1.0, &flat, 1.0, 1.0);
        assert!(matches!(got, Err(CoeffError::NonConvergence { .. })), "got {got:?}");
    }

    #[test]
    fn zero_temperature_collapses_alpha_bars() {
        let params = PhysicalParams { temperature: 0.0, ..base_params() };
        let c = build_coefficients(&params).unwrap();
        let pi = core::f64::consts::PI;
        let j_w = spectral_density(1.0, &OHMIC);
        assert!(math::abs(c.alpha_bar_1 - 0.25 * pi * j_w) < 1e-15);
        assert!(math::abs(c.alpha_bar_2 - 0.25 * pi * j_w) < 1e-15);
        assert!(math::abs(c.alpha_bar_3 - 0.25 * pi * j_w) < 1e-15);
        // Equality 4ᾱ₁ᾱ₂ = 4ᾱ₃² at T = 0 (the positivity bound saturates).
        let det = 4.0 * c.alpha_bar_1 * c.alpha_bar_2 - 4.0 * c.alpha_bar_3 * c.alpha_bar_3;
        assert!(math::abs(det) < 1e-15);
    }

    #[test]
    fn beta_difference_is_temperature_independent() {
        let pi = core::f64::consts::PI;
        let j_0 = spectral_density(5.0, &OHMIC);
        let want = 2.0 * 0.1 * 0.1 * pi * j_0;
        for temperature in [0.0, 0.3, 2.0, 25.0] {
            let params = PhysicalParams { temperature, ..base_params() };
            let c = build_coefficients(&params).unwrap();
            assert!(
                math::abs(c.beta_diff - want) < 1e-12 * want,
                "T = {temperature}: beta_diff = {}",
                c.beta_diff
            );
            assert!(c.beta_1 >= c.beta_2 && c.beta_2 >= 0.0);
        }
    }

    #[test]
    fn chi_identity_holds_with_nontrivial_x_scale() {
        let params = PhysicalParams { x_scale: 2.5, ..base_params() };
        let c = build_coefficients(&params).unwrap();
        let lhs = c.chi * c.lambda_bar_2;
        let rhs = c.lambda[3] - c.delta_cap[0];
        assert!(math::abs(lhs - rhs) <= 1e-10 * math::abs(rhs));
        // χ itself against the closed form.
        let n_w = occupation(1.0, 2.0, 1.0);
        let want_chi = (2.0 * n_w + 1.0) / (2.0 * 2.5 * 2.5);
        assert!(math::abs(c.chi - want_chi) < 1e-14);
    }

    #[test]
    fn degenerate_bath_is_reported() {
        // Flat window with the trap line outside the window: J(ω) = 0.
        let params = PhysicalParams {
            spectral: SpectralSpec { kind: SpectralKind::FlatWindow, eta: 1.0, omega_c: 0.5 },
            ..base_params()
        };
        assert_eq!(build_coefficients(&params).unwrap_err(), CoeffError::DegenerateBath);
    }

    #[test]
    fn delta_and_gradient_combinations() {
        let c = build_coefficients(&base_params()).unwrap();
        let [a1, a2, a3, a4, a5, a6, _, _] = c.a_tilde;
        assert!(math::abs(c.delta_bar[0] - (2.0 * a4 + a5)) < 1e-15);
        assert!(math::abs(c.delta_bar[1] - (0.5 * a5 + a6)) < 1e-15);
        assert!(math::abs(c.delta_bar[2] - (a1 + a3 + 0.5 * a2)) < 1e-15);
        assert!(math::abs(c.delta_cap[0] - (c.lambda[3] - c.lambda[0])) < 1e-15);
        assert!(math::abs(c.delta_cap[1] - (c.lambda[3] - c.beta_1 - c.beta_2)) < 1e-15);
        assert!(math::abs(c.delta_cap[2] - (c.lambda[3] - 0.5 * (c.beta_1 + c.beta_2))) < 1e-15);
        assert!(
            math::abs(c.delta_cap[3] - (2.0 * c.beta_3 + c.delta_cap[2] - 5.0)) < 1e-12,
            "Delta_4 = {}",
            c.delta_cap[3]
        );
    }

    #[test]
    fn kossakowski_zero_temperature_is_zero() {
        let params = PhysicalParams { temperature: 0.0, ..base_params() };
        assert_eq!(kossakowski_determinant(&params).unwrap(), 0.0);
    }

    #[test]
    fn kossakowski_unit_occupation_closed_form() {
        // k_BT = ħω/ln2 ⇒ n(ω) = 1 ⇒ det = 2·(πJ(ω)/(mω))².
        let params = PhysicalParams {
            temperature: 1.0 / core::f64::consts::LN_2,
            ..base_params()
        };
        let det = kossakowski_determinant(&params).unwrap();
        let s = core::f64::consts::PI * spectral_density(1.0, &OHMIC);
        let want = 2.0 * s * s;
        assert!(math::abs(det - want) < 1e-12 * want, "det = {det}, want = {want}");
    }

    #[test]
    fn kossakowski_cross_checks_build_coefficients() {
        let params = base_params();
        let det = kossakowski_determinant(&params).unwrap();
        let c = build_coefficients(&params).unwrap();
        let from_set = 4.0 * c.alpha_bar_1 * c.alpha_bar_2 - 4.0 * c.alpha_bar_3 * c.alpha_bar_3;
        assert!(math::abs(det - from_set) <= 1e-12 * from_set.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn direct_coefficients_accepts_reference_sets() {
        // The first reference scenario's coefficient list.
        let c = direct_coefficients([
            ("Omega", 0.5),
            ("Delta1", 1e-5),
            ("Delta2", 0.01),
            ("Delta3", 1e-4),
            ("Delta4", 8e-3),
            ("lambda2", 1e-4),
            ("lambda3", 5e-3),
            ("lambda4", 1e-4),
            ("delta1", 1e-4),
            ("delta2", 0.04),
            ("delta3", 0.01),
            ("a2", 0.04),
            ("a7", 1e-3),
            ("a8", 1e-4),
            ("beta", 1e-4),
        ])
        .unwrap();
        assert!(c.phenomenological);
        assert_eq!(c.omega_drive, 0.5);
        assert_eq!(c.lambda_bar_2, 1e-4);
        assert_eq!(c.lambda_bar_3, 5e-3);
        assert_eq!(c.delta_bar, [1e-4, 0.04, 0.01]);
        assert_eq!(c.a_bar_2, 0.04);
        assert_eq!(c.a_bar_7, 1e-3);
        assert_eq!(c.a_bar_8, 1e-4);
        assert_eq!(c.beta_diff, 1e-4);
        assert_eq!(c.chi, 0.0);
    }

    #[test]
    fn direct_coefficients_empty_map_is_all_zero() {
        let c = direct_coefficients([]).unwrap();
        assert_eq!(c, CoefficientSet::zeroed());
    }

    #[test]
    fn direct_coefficients_rejects_unknown_keys() {
        let got = direct_coefficients([("lambda9", 1.0)]);
        assert!(matches!(got, Err(CoeffError::UnknownKey(k)) if k == "lambda9"));
    }

    #[test]
    fn weak_drive_flag() {
        let mut params = base_params();
        assert!(!params.weak_drive_violated());
        params.omega_drive = 0.5 * params.omega0;
        assert!(params.weak_drive_violated());
    }
}
