// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat key-value configuration: parsing and scenario resolution.
//!
//! Format: one `key = value` pair per line; `#` starts a comment (full-line
//! or trailing); blank lines ignored; keys are case-sensitive; later
//! assignments win. The full key table:
//!
//! | group        | keys |
//! |--------------|------|
//! | control      | `mode` (pde/moments/cumulants/crosscheck), `preset`, `coefficients` (direct/microscopic), `name`, `out` |
//! | microscopic  | `m`, `omega`, `omega0`, `Omega`, `alpha`, `temperature`, `hbar`, `x_scale`, `spectral.kind` (ohmic-exp-cutoff/flat-window), `spectral.eta`, `spectral.omega_c` |
//! | direct       | `Omega`, `beta`, `chi`, `gamma`, `Delta1`…`Delta4`, `lambda1`…`lambda4`, `delta1`…`delta3`, `a2`, `a7`, `a8`, `omega0` |
//! | initial      | `theta`, `phi`, `j` |
//! | run          | `t_end`, `dt`, `safety`, `snapshot_times` (comma list), `n_trunc`, `record_orders` (comma list), `closure` (close3/close4/both) |
//! | grid         | `grid.x_min`, `grid.x_max`, `grid.n_points` |
//!
//! A `preset` key expands the named registry entry first; any other keys in
//! the file then override the expanded values (coefficient keys are appended
//! after the preset's pairs, so the file wins). `coefficients = microscopic`
//! routes through the microscopic constructor instead; it cannot be combined
//! with `preset`.

use std::fmt;
use std::path::PathBuf;

use oqbm_core::coeff::{
    self, build_coefficients, direct_coefficients, CoeffError, CoefficientSet, PhysicalParams,
    SpectralKind, SpectralSpec,
};
use oqbm_core::cumulants::Closure;
use oqbm_core::field::{BlochInit, FieldError, Grid};
use oqbm_core::presets::{self, Preset, RunKind};

use crate::{EXIT_CONFIG, EXIT_NUMERICAL};

/// Solver family selected by a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pde,
    Moments,
    Cumulants,
    Crosscheck,
}

impl Mode {
    pub(crate) fn as_str(self) -> &'static str {
        match self {
            Mode::Pde => "pde",
            Mode::Moments => "moments",
            Mode::Cumulants => "cumulants",
            Mode::Crosscheck => "crosscheck",
        }
    }
}

/// A fully resolved run: everything the runner needs, plus the manifest
/// lines recording every resolved input.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub coeffs: CoefficientSet,
    pub coeff_source: String,
    pub init: BlochInit,
    pub grid: Grid,
    pub t_end: f64,
    pub dt: f64,
    pub safety: f64,
    pub snapshot_times: Vec<f64>,
    pub n_trunc: usize,
    pub record_orders: Vec<usize>,
    pub closures: Vec<Closure>,
    pub out_dir: Option<PathBuf>,
    /// `key = value` lines for the manifest: every number and choice the
    /// run consumes, in resolution order.
    pub manifest: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Configuration-stage failures.
#[derive(Debug)]
pub enum ConfigError {
    /// Malformed line (missing `=`, bad number, …).
    Parse { line: usize, msg: String },
    /// A key outside the documented table.
    UnknownKey { line: usize, key: String },
    /// A required key is absent.
    MissingKey(&'static str),
    /// Structurally valid but semantically impossible configuration.
    Invalid(String),
    /// Coefficient construction failed.
    Coefficient(CoeffError),
}

impl ConfigError {
    /// Exit code: configuration shape errors are 2; a numerical failure
    /// inside coefficient construction (non-convergent integral, positivity
    /// violation) is 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Coefficient(
                CoeffError::NonConvergence { .. }
                | CoeffError::DegenerateBath
                | CoeffError::PositivityViolation { .. },
            ) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::UnknownKey { line, key } => {
                write!(f, "config line {line}: unknown key `{key}`")
            }
            ConfigError::MissingKey(key) => write!(f, "config: missing required key `{key}`"),
            ConfigError::Invalid(msg) => write!(f, "config: {msg}"),
            ConfigError::Coefficient(e) => write!(f, "coefficient construction failed: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Non-coefficient keys (the coefficient keys come from
/// [`coeff::DIRECT_KEYS`]).
const CONTROL_KEYS: &[&str] = &[
    "mode",
    "preset",
    "coefficients",
    "name",
    "out",
    "m",
    "omega",
    "alpha",
    "temperature",
    "hbar",
    "x_scale",
    "spectral.kind",
    "spectral.eta",
    "spectral.omega_c",
    "theta",
    "phi",
    "j",
    "t_end",
    "dt",
    "safety",
    "snapshot_times",
    "n_trunc",
    "record_orders",
    "closure",
    "grid.x_min",
    "grid.x_max",
    "grid.n_points",
];

fn key_is_known(key: &str) -> bool {
    CONTROL_KEYS.contains(&key) || coeff::DIRECT_KEYS.contains(&key)
}

/// One parsed assignment: line number, key, raw value.
type Entry = (usize, String, String);

/// Parse the flat key-value text into an ordered assignment list,
/// rejecting malformed lines and unknown keys.
pub fn parse_kv(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Parse { line: line_no, msg: "empty key".into() });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("empty value for key `{key}`"),
            });
        }
        if !key_is_known(key) {
            return Err(ConfigError::UnknownKey { line: line_no, key: key.to_owned() });
        }
        entries.push((line_no, key.to_owned(), value.to_owned()));
    }
    Ok(entries)
}

/// Accessor over the assignment list: the last occurrence of a key wins.
struct Lookup<'a> {
    entries: &'a [Entry],
}

impl<'a> Lookup<'a> {
    fn last(&self, key: &str) -> Option<(usize, &'a str)> {
        self.entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map(|(line, _, v)| (*line, v.as_str()))
    }

    fn has(&self, key: &str) -> bool {
        self.last(key).is_some()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.last(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| ConfigError::Parse {
                line,
                msg: format!("invalid number `{v}` for key `{key}`"),
            }),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn f64_required(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or(ConfigError::MissingKey(key))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.last(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|_| ConfigError::Parse {
                line,
                msg: format!("invalid integer `{v}` for key `{key}`"),
            }),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.last(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|part| {
                    part.trim().parse::<f64>().map_err(|_| ConfigError::Parse {
                        line,
                        msg: format!("invalid number `{}` in list `{key}`", part.trim()),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
        }
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        match self.last(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|_| ConfigError::Parse {
                        line,
                        msg: format!("invalid integer `{}` in list `{key}`", part.trim()),
                    })
                })
                .collect::<Result<Vec<usize>, _>>()
                .map(Some),
        }
    }
}

fn mode_from_str(line: usize, v: &str) -> Result<Mode, ConfigError> {
    match v {
        "pde" => Ok(Mode::Pde),
        "moments" => Ok(Mode::Moments),
        "cumulants" => Ok(Mode::Cumulants),
        "crosscheck" => Ok(Mode::Crosscheck),
        _ => Err(ConfigError::Parse {
            line,
            msg: format!("invalid mode `{v}` (expected pde, moments, cumulants, or crosscheck)"),
        }),
    }
}

fn mode_from_kind(kind: RunKind) -> Mode {
    match kind {
        RunKind::Pde => Mode::Pde,
        RunKind::Moments => Mode::Moments,
        RunKind::Cumulants => Mode::Cumulants,
    }
}

fn field_err(e: FieldError) -> ConfigError {
    ConfigError::Invalid(format!("{e}"))
}

/// Build a ready-to-run scenario directly from a registry preset (the
/// `oqbm preset <name>` path).
pub fn scenario_from_preset(name: &str) -> Result<Scenario, ConfigError> {
    let Some(p) = presets::find(name) else {
        return Err(ConfigError::Invalid(format!(
            "unknown preset `{name}` (see `oqbm list-presets`)"
        )));
    };
    resolve_with_preset(&[], Some(p), None)
}

/// Resolve a parsed configuration into a scenario. `force_mode` (the
/// `crosscheck` subcommand) overrides any `mode` key.
pub fn resolve_scenario(text: &str, force_mode: Option<Mode>) -> Result<Scenario, ConfigError> {
    let entries = parse_kv(text)?;
    let lk = Lookup { entries: &entries };
    let preset = match lk.last("preset") {
        None => None,
        Some((_, name)) => Some(presets::find(name).ok_or_else(|| {
            ConfigError::Invalid(format!("unknown preset `{name}` (see `oqbm list-presets`)"))
        })?),
    };
    resolve_with_preset(&entries, preset, force_mode)
}

fn resolve_with_preset(
    entries: &[Entry],
    preset: Option<&'static Preset>,
    force_mode: Option<Mode>,
) -> Result<Scenario, ConfigError> {
    let lk = Lookup { entries };
    let mut manifest: Vec<(String, String)> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    // --- mode ---------------------------------------------------------
    let mode = if let Some(m) = force_mode {
        m
    } else if let Some((line, v)) = lk.last("mode") {
        mode_from_str(line, v)?
    } else if let Some(p) = preset {
        mode_from_kind(p.kind)
    } else {
        return Err(ConfigError::MissingKey("mode"));
    };
    manifest.push(("mode".into(), mode.as_str().into()));
    if let Some(p) = preset {
        manifest.push(("preset".into(), p.name.into()));
    }

    // --- coefficients ---------------------------------------------------
    let route = lk.last("coefficients");
    let microscopic = match route {
        Some((_, "microscopic")) => true,
        Some((_, "direct")) => false,
        Some((line, other)) => {
            return Err(ConfigError::Parse {
                line,
                msg: format!(
                    "invalid coefficients route `{other}` (expected direct or microscopic)"
                ),
            })
        }
        None => preset.is_none() && lk.has("spectral.kind"),
    };
    if microscopic && preset.is_some() {
        return Err(ConfigError::Invalid(
            "`preset` and `coefficients = microscopic` cannot be combined".into(),
        ));
    }

    let (coeffs, coeff_source) = if microscopic {
        let kind = match lk.last("spectral.kind") {
            None => return Err(ConfigError::MissingKey("spectral.kind")),
            Some((_, "ohmic-exp-cutoff")) => SpectralKind::OhmicExpCutoff,
            Some((_, "flat-window")) => SpectralKind::FlatWindow,
            Some((line, other)) => {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!(
                        "invalid spectral.kind `{other}` (expected ohmic-exp-cutoff or flat-window)"
                    ),
                })
            }
        };
        let params = PhysicalParams {
            m: lk.f64_required("m")?,
            omega: lk.f64_required("omega")?,
            omega0: lk.f64_required("omega0")?,
            omega_drive: lk.f64_or("Omega", 0.0)?,
            alpha: lk.f64_required("alpha")?,
            temperature: lk.f64_required("temperature")?,
            hbar: lk.f64_or("hbar", 1.0)?,
            x_scale: lk.f64_or("x_scale", 1.0)?,
            spectral: SpectralSpec {
                kind,
                eta: lk.f64_required("spectral.eta")?,
                omega_c: lk.f64_required("spectral.omega_c")?,
            },
        };
        for (label, v) in [
            ("m", params.m),
            ("omega", params.omega),
            ("omega0", params.omega0),
            ("Omega", params.omega_drive),
            ("alpha", params.alpha),
            ("temperature", params.temperature),
            ("hbar", params.hbar),
            ("x_scale", params.x_scale),
            ("spectral.eta", params.spectral.eta),
            ("spectral.omega_c", params.spectral.omega_c),
        ] {
            manifest.push((label.into(), format!("{v:e}")));
        }
        manifest.push((
            "spectral.kind".into(),
            match kind {
                SpectralKind::OhmicExpCutoff => "ohmic-exp-cutoff".into(),
                SpectralKind::FlatWindow => "flat-window".into(),
            },
        ));
        if params.weak_drive_violated() {
            warnings.push(format!(
                "weak-drive regime violated: Omega = {:e} >= 0.1*omega0 = {:e}; \
                 the equations remain integrable but leave their derivation's regime",
                params.omega_drive,
                0.1 * params.omega0
            ));
        }
        let co = build_coefficients(&params).map_err(ConfigError::Coefficient)?;
        (co, "microscopic".to_owned())
    } else {
        // Preset pairs first (if any), then file-provided coefficient keys
        // in file order: later assignments win inside the constructor.
        let mut pairs: Vec<(&str, f64)> = Vec::new();
        if let Some(p) = preset {
            pairs.extend(p.pairs.iter().copied());
        }
        for (line, key, value) in entries {
            if coeff::DIRECT_KEYS.contains(&key.as_str()) {
                let v = value.parse::<f64>().map_err(|_| ConfigError::Parse {
                    line: *line,
                    msg: format!("invalid number `{value}` for key `{key}`"),
                })?;
                pairs.push((key.as_str(), v));
            }
        }
        for (k, v) in &pairs {
            manifest.push(((*k).into(), format!("{v:e}")));
        }
        let co = direct_coefficients(pairs.iter().copied()).map_err(ConfigError::Coefficient)?;
        let source = match preset {
            Some(p) => format!("preset:{}", p.name),
            None => "direct".to_owned(),
        };
        (co, source)
    };
    manifest.push(("coefficient_source".into(), coeff_source.clone()));

    // --- initial state ----------------------------------------------------
    let theta = match (lk.f64("theta")?, preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.theta,
        (None, None) => return Err(ConfigError::MissingKey("theta")),
    };
    let phi = match (lk.f64("phi")?, preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.phi,
        (None, None) => return Err(ConfigError::MissingKey("phi")),
    };
    let j = match (lk.usize("j")?, preset) {
        (Some(v), _) => u32::try_from(v)
            .map_err(|_| ConfigError::Invalid(format!("j = {v} out of range")))?,
        (None, Some(p)) => p.j,
        (None, None) => 2,
    };
    let init = BlochInit { theta, phi, j };
    manifest.push(("theta".into(), format!("{theta:e}")));
    manifest.push(("phi".into(), format!("{phi:e}")));
    manifest.push(("j".into(), format!("{j}")));

    // --- run parameters -----------------------------------------------
    let t_end = match (lk.f64("t_end")?, preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.t_end,
        (None, None) => return Err(ConfigError::MissingKey("t_end")),
    };
    let default_dt = match (preset, mode) {
        (Some(p), _) => p.dt,
        (None, Mode::Pde) => 0.01,
        (None, _) => 1e-3,
    };
    let dt = lk.f64_or("dt", default_dt)?;
    let safety = lk.f64_or("safety", 0.8)?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(ConfigError::Invalid(format!("t_end = {t_end} must be non-negative")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ConfigError::Invalid(format!("dt = {dt} must be positive")));
    }

    let (gx0, gx1, gn) = preset.map(|p| p.grid).unwrap_or((-60.0, 60.0, 1201));
    let grid = Grid::new(
        lk.f64_or("grid.x_min", gx0)?,
        lk.f64_or("grid.x_max", gx1)?,
        lk.usize("grid.n_points")?.unwrap_or(gn),
    )
    .map_err(field_err)?;

    let snapshot_times = match lk.f64_list("snapshot_times")? {
        Some(list) => list,
        None => match preset {
            Some(p) if !p.snapshot_times.is_empty() => p.snapshot_times.to_vec(),
            _ => match mode {
                Mode::Pde => vec![0.0, t_end],
                // Crosscheck default: eleven evenly spaced sample times.
                Mode::Crosscheck => (0..=10).map(|k| t_end * (k as f64) / 10.0).collect(),
                _ => Vec::new(),
            },
        },
    };

    let n_trunc = match (lk.usize("n_trunc")?, preset) {
        (Some(v), _) => v,
        (None, Some(p)) if p.n_trunc > 0 => p.n_trunc,
        _ => 30,
    };
    if matches!(mode, Mode::Moments | Mode::Crosscheck) && n_trunc < 2 {
        return Err(ConfigError::Invalid(format!("n_trunc = {n_trunc} must be at least 2")));
    }

    let record_orders = match (lk.usize_list("record_orders")?, preset) {
        (Some(list), _) => list,
        (None, Some(p)) if !p.record_orders.is_empty() => p.record_orders.to_vec(),
        _ => vec![0, 1, 2, 3, 4],
    };
    if mode == Mode::Moments {
        if let Some(&bad) = record_orders.iter().find(|&&n| n > n_trunc) {
            return Err(ConfigError::Invalid(format!(
                "record_orders entry {bad} exceeds n_trunc = {n_trunc}"
            )));
        }
    }

    let closures = match lk.last("closure") {
        Some((_, "close3")) => vec![Closure::Close3],
        Some((_, "close4")) => vec![Closure::Close4],
        Some((_, "both")) => vec![Closure::Close3, Closure::Close4],
        Some((line, other)) => {
            return Err(ConfigError::Parse {
                line,
                msg: format!("invalid closure `{other}` (expected close3, close4, or both)"),
            })
        }
        None => match preset {
            Some(p) if !p.closures.is_empty() => p.closures.to_vec(),
            _ => vec![Closure::Close3, Closure::Close4],
        },
    };

    // --- mode-specific validation --------------------------------------
    if matches!(mode, Mode::Moments | Mode::Cumulants | Mode::Crosscheck) && j != 2 {
        return Err(ConfigError::Invalid(format!(
            "mode {} requires the Gaussian profile j = 2 (got j = {j})",
            mode.as_str()
        )));
    }
    if mode == Mode::Cumulants && !(coeffs.chi > 0.0) {
        return Err(ConfigError::Invalid(
            "cumulant runs require a positive stationary scale (set the `chi` key)".into(),
        ));
    }

    let name = match lk.last("name") {
        Some((line, v)) => {
            if v.is_empty() || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!(
                        "invalid name `{v}` (allowed: ASCII letters, digits, `_`, `-`)"
                    ),
                });
            }
            v.to_owned()
        }
        None => preset.map(|p| p.name.to_owned()).unwrap_or_else(|| "run".to_owned()),
    };
    let out_dir = lk.last("out").map(|(_, v)| PathBuf::from(v));

    manifest.push(("name".into(), name.clone()));
    manifest.push(("t_end".into(), format!("{t_end:e}")));
    manifest.push(("dt".into(), format!("{dt:e}")));
    manifest.push(("safety".into(), format!("{safety:e}")));
    manifest.push(("grid.x_min".into(), format!("{:e}", grid.x_min)));
    manifest.push(("grid.x_max".into(), format!("{:e}", grid.x_max)));
    manifest.push(("grid.n_points".into(), format!("{}", grid.n_points)));
    manifest.push((
        "snapshot_times".into(),
        snapshot_times.iter().map(|t| format!("{t:e}")).collect::<Vec<_>>().join(","),
    ));
    manifest.push(("n_trunc".into(), format!("{n_trunc}")));
    manifest.push((
        "record_orders".into(),
        record_orders.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
    ));
    manifest.push((
        "closures".into(),
        closures
            .iter()
            .map(|c| match c {
                Closure::Close3 => "close3",
                Closure::Close4 => "close4",
            })
            .collect::<Vec<_>>()
            .join(","),
    ));

    Ok(Scenario {
        name,
        mode,
        coeffs,
        coeff_source,
        init,
        grid,
        t_end,
        dt,
        safety,
        snapshot_times,
        n_trunc,
        record_orders,
        closures,
        out_dir,
        manifest,
        warnings,
    })
}
