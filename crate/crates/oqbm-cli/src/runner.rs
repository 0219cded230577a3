// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scenario execution and data emission.
//!
//! Output files share the scenario name as their stem:
//!
//! * PDE runs: `{name}_snapshot_t{T}.csv` per requested snapshot time,
//!   `{name}_diagnostics.csv` (every step), `{name}_observables.csv`
//!   (per snapshot).
//! * Moment runs: `{name}_moments.csv` (thinned to ≤ ~6000 rows; the thinning
//!   stride is recorded in the manifest).
//! * Cumulant runs: `{name}_cumulants_close3.csv` / `_close4.csv`.
//! * Crosscheck runs: `{name}_crosscheck.csv` residual report.
//! * Every run: `{name}_manifest.txt` listing all resolved inputs, the tool
//!   version, the output files, and the wall time.
//!
//! CSV format: header row, `,` separator, `.` decimal, scientific notation
//! (Rust `{:e}`). Identical configurations produce bit-identical CSV files;
//! the manifest is excluded from that guarantee because it records wall time.
//!
//! Numerical failures (blow-up, escaping density) still write everything
//! recorded before the failure plus the manifest, then exit 3.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use oqbm_core::cumulants::{self, Closure, CumulantError, CumulantSeries};
use oqbm_core::field::{self, Component};
use oqbm_core::moments::{self, MomentError};
use oqbm_core::observables;
use oqbm_core::pde::{self, PdeConfig, PdeError, PdeTrajectory};
use oqbm_core::presets::{all_presets, Preset, RunKind};

use crate::config::{Mode, Scenario};
use crate::{EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};

/// Soft cap on emitted CSV rows for dense ODE series; full resolution stays
/// available through the library API.
const MAX_CSV_ROWS: usize = 6000;

/// (exit code, message) for a failed run stage.
type RunError = (i32, String);

const COMPONENT_NAMES: [&str; 4] = ["rho_plus", "rho_minus", "c_real", "c_imag"];
const COMPONENTS: [Component; 4] =
    [Component::RhoPlus, Component::RhoMinus, Component::CReal, Component::CImag];

/// Print the preset registry with resolved parameters.
pub fn list_presets() {
    for p in all_presets() {
        print_preset(p);
        println!();
    }
    println!("{} presets.", all_presets().len());
}

fn print_preset(p: &Preset) {
    let kind = match p.kind {
        RunKind::Pde => "pde",
        RunKind::Moments => "moments",
        RunKind::Cumulants => "cumulants",
    };
    println!("{}  [{kind}]", p.name);
    println!("    {}", p.description);
    println!(
        "    theta = {:e}, phi = {:e}, j = {}, t_end = {:e}, dt = {:e}",
        p.theta, p.phi, p.j, p.t_end, p.dt
    );
    match p.kind {
        RunKind::Pde => {
            println!(
                "    grid = [{:e}, {:e}] x {}, snapshots = {}",
                p.grid.0,
                p.grid.1,
                p.grid.2,
                join_f64(p.snapshot_times)
            );
        }
        RunKind::Moments => {
            println!(
                "    n_trunc = {}, record_orders = {}",
                p.n_trunc,
                p.record_orders.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
            );
        }
        RunKind::Cumulants => {
            let names: Vec<&str> = p
                .closures
                .iter()
                .map(|c| match c {
                    Closure::Close3 => "close3",
                    Closure::Close4 => "close4",
                })
                .collect();
            println!("    closures = {}", names.join(","));
        }
    }
    let pairs: Vec<String> = p.pairs.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
    println!("    coefficients: {}", pairs.join(" "));
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn fmt_e(v: f64) -> String {
    format!("{v:e}")
}

/// Manifest accumulator: resolved inputs, derived quantities, emitted files.
struct Manifest {
    lines: Vec<(String, String)>,
    files: Vec<String>,
    warnings: Vec<String>,
    status: String,
}

impl Manifest {
    fn new(s: &Scenario) -> Manifest {
        let mut lines: Vec<(String, String)> =
            vec![("tool".into(), format!("oqbm {}", env!("CARGO_PKG_VERSION")))];
        lines.extend(s.manifest.iter().cloned());
        // Every derived coefficient the solvers consume.
        let c = &s.coeffs;
        let coeff_lines: Vec<(&str, f64)> = vec![
            ("alpha_bar_1", c.alpha_bar_1),
            ("alpha_bar_2", c.alpha_bar_2),
            ("alpha_bar_3", c.alpha_bar_3),
            ("beta_1", c.beta_1),
            ("beta_2", c.beta_2),
            ("beta_3", c.beta_3),
            ("a_tilde_1", c.a_tilde[0]),
            ("a_tilde_2", c.a_tilde[1]),
            ("a_tilde_3", c.a_tilde[2]),
            ("a_tilde_4", c.a_tilde[3]),
            ("a_tilde_5", c.a_tilde[4]),
            ("a_tilde_6", c.a_tilde[5]),
            ("a_tilde_7", c.a_tilde[6]),
            ("a_tilde_8", c.a_tilde[7]),
            ("lambda_1", c.lambda[0]),
            ("lambda_2", c.lambda[1]),
            ("lambda_3", c.lambda[2]),
            ("lambda_4", c.lambda[3]),
            ("lambda_bar_2", c.lambda_bar_2),
            ("lambda_bar_3", c.lambda_bar_3),
            ("Delta_1", c.delta_cap[0]),
            ("Delta_2", c.delta_cap[1]),
            ("Delta_3", c.delta_cap[2]),
            ("Delta_4", c.delta_cap[3]),
            ("delta_bar_1", c.delta_bar[0]),
            ("delta_bar_2", c.delta_bar[1]),
            ("delta_bar_3", c.delta_bar[2]),
            ("beta_diff", c.beta_diff),
            ("a_bar_2", c.a_bar_2),
            ("a_bar_7", c.a_bar_7),
            ("a_bar_8", c.a_bar_8),
            ("Omega_drive", c.omega_drive),
            ("chi", c.chi),
            ("gamma", c.gamma),
        ];
        for (k, v) in coeff_lines {
            lines.push((format!("coeff.{k}"), fmt_e(v)));
        }
        lines.push(("coeff.phenomenological".into(), format!("{}", c.phenomenological)));
        Manifest {
            lines,
            files: Vec::new(),
            warnings: s.warnings.clone(),
            status: String::new(),
        }
    }

    fn push(&mut self, key: &str, value: String) {
        self.lines.push((key.to_owned(), value));
    }

    fn write(&self, path: &Path, wall_seconds: f64) -> io::Result<()> {
        let f = fs::File::create(path)?;
        let mut w = io::BufWriter::new(f);
        for (k, v) in &self.lines {
            writeln!(w, "{k} = {v}")?;
        }
        for file in &self.files {
            writeln!(w, "output = {file}")?;
        }
        for warning in &self.warnings {
            writeln!(w, "warning = {warning}")?;
        }
        writeln!(w, "status = {}", self.status)?;
        writeln!(w, "wall_time_s = {wall_seconds:.3}")?;
        w.flush()
    }
}

fn io_err(what: &str, e: io::Error) -> RunError {
    (EXIT_CONFIG, format!("cannot write {what}: {e}"))
}

/// Write one CSV file and record it in the manifest.
fn write_csv<I>(path: &Path, mf: &mut Manifest, header: &[&str], rows: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let inner = || -> io::Result<()> {
        let f = fs::File::create(path)?;
        let mut w = io::BufWriter::new(f);
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_e(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    inner().map_err(|e| io_err(&path.display().to_string(), e))?;
    mf.files.push(path.display().to_string());
    println!("wrote: {}", path.display());
    Ok(())
}

/// Row indices for thinned emission: every `stride`-th row plus the final
/// row, with at most ~`max_rows` rows in total.
fn thin_indices(len: usize, max_rows: usize) -> (usize, Vec<usize>) {
    if len == 0 {
        return (1, Vec::new());
    }
    let stride = len.div_ceil(max_rows).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    (stride, idx)
}

/// Integer-friendly time formatting for file names.
fn fmt_time_stem(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Execute a resolved scenario. Returns the process exit code; all
/// diagnostics recorded before a numerical failure are still written.
pub fn run_scenario(s: &Scenario, out_override: Option<PathBuf>) -> i32 {
    let t0 = Instant::now();
    let out_dir = out_override
        .or_else(|| s.out_dir.clone())
        .or_else(|| std::env::var_os("OQBM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("oqbm: cannot create output directory {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    for w in &s.warnings {
        eprintln!("oqbm: warning: {w}");
    }
    println!(
        "scenario: {} (mode = {}, coefficients = {})",
        s.name,
        s.mode.as_str(),
        s.coeff_source
    );

    let mut mf = Manifest::new(s);
    mf.push("out_dir", out_dir.display().to_string());

    let outcome = match s.mode {
        Mode::Pde => run_pde(s, &out_dir, &mut mf),
        Mode::Moments => run_moments(s, &out_dir, &mut mf),
        Mode::Cumulants => run_cumulants(s, &out_dir, &mut mf),
        Mode::Crosscheck => run_crosscheck(s, &out_dir, &mut mf),
    };
    let code = match outcome {
        Ok(()) => {
            mf.status = "ok".into();
            EXIT_OK
        }
        Err((code, msg)) => {
            eprintln!("oqbm: {msg}");
            mf.status = msg;
            code
        }
    };

    let manifest_path = out_dir.join(format!("{}_manifest.txt", s.name));
    if let Err(e) = mf.write(&manifest_path, t0.elapsed().as_secs_f64()) {
        eprintln!("oqbm: cannot write manifest {}: {e}", manifest_path.display());
        return if code == EXIT_OK { EXIT_CONFIG } else { code };
    }
    println!("manifest: {}", manifest_path.display());
    code
}

fn run_pde(s: &Scenario, out_dir: &Path, mf: &mut Manifest) -> Result<(), RunError> {
    let f0 = field::init_field(s.grid, s.init).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let cfg = PdeConfig {
        dt: s.dt,
        t_end: s.t_end,
        snapshot_times: s.snapshot_times.clone(),
        safety: s.safety,
        ..PdeConfig::default()
    };
    let (traj, failure) = match pde::evolve(&f0, &s.coeffs, &cfg) {
        Ok(t) => (t, None),
        Err(PdeError::BlowUp { time, partial }) => {
            (*partial, Some(format!("field blow-up detected at t = {time} (partial data written)")))
        }
        Err(PdeError::GridTooNarrow { time, partial }) => (
            *partial,
            Some(format!("density reached the grid boundary at t = {time} (partial data written)")),
        ),
        Err(e @ PdeError::InvalidConfig(_)) => return Err((EXIT_CONFIG, e.to_string())),
    };
    mf.push("dt_used", fmt_e(traj.dt_used));
    mf.push("n_steps", format!("{}", traj.n_steps));

    emit_pde_products(s, out_dir, mf, &traj, failure.is_none())?;

    match failure {
        Some(msg) => Err((EXIT_NUMERICAL, msg)),
        None => Ok(()),
    }
}

fn emit_pde_products(
    s: &Scenario,
    out_dir: &Path,
    mf: &mut Manifest,
    traj: &PdeTrajectory,
    complete: bool,
) -> Result<(), RunError> {
    let grid = s.grid;
    for snap in &traj.snapshots {
        // Name the file by the requested time nearest to the achieved one so
        // stems stay clean (`t50`, not `t50.000000000000004`).
        let label = s
            .snapshot_times
            .iter()
            .copied()
            .min_by(|a, b| {
                (a - snap.time).abs().partial_cmp(&(b - snap.time).abs()).unwrap()
            })
            .unwrap_or(snap.time);
        let path = out_dir.join(format!("{}_snapshot_t{}.csv", s.name, fmt_time_stem(label)));
        let rows = (0..grid.n_points).map(|i| {
            vec![grid.x(i), snap.rho_plus[i], snap.rho_minus[i], snap.c_real[i], snap.c_imag[i]]
        });
        write_csv(&path, mf, &["x", "rho_plus", "rho_minus", "c_real", "c_imag"], rows)?;
    }

    let path = out_dir.join(format!("{}_diagnostics.csv", s.name));
    let rows = traj.diagnostics.iter().map(|r| {
        vec![
            r.t,
            r.trace,
            r.trace_rate_residual,
            r.bloch_defect,
            r.min_rho_plus,
            r.variance,
            r.c_i_integral,
            r.sigma_z,
        ]
    });
    write_csv(
        &path,
        mf,
        &[
            "t",
            "trace",
            "trace_rate_residual",
            "bloch_defect",
            "min_rho_plus",
            "variance",
            "c_i_integral",
            "sigma_z",
        ],
        rows,
    )?;

    if complete {
        match observables::observable_series(traj) {
            Ok(series) => {
                let path = out_dir.join(format!("{}_observables.csv", s.name));
                let rows = (0..series.times.len()).map(|k| {
                    vec![
                        series.times[k],
                        series.trace[k],
                        series.mean[k],
                        series.variance[k],
                        series.skewness[k],
                        series.excess_kurtosis[k],
                        series.c_i_integral[k],
                        series.sigma_z[k],
                    ]
                });
                write_csv(
                    &path,
                    mf,
                    &[
                        "t",
                        "trace",
                        "mean",
                        "variance",
                        "skewness",
                        "excess_kurtosis",
                        "c_i_integral",
                        "sigma_z",
                    ],
                    rows,
                )?;
            }
            Err(e) => mf.warnings.push(format!("observables skipped: {e}")),
        }
    }
    Ok(())
}

fn moment_err(e: MomentError) -> RunError {
    match e {
        MomentError::BlowUp { .. } => (EXIT_NUMERICAL, e.to_string()),
        _ => (EXIT_CONFIG, e.to_string()),
    }
}

fn run_moments(s: &Scenario, out_dir: &Path, mf: &mut Manifest) -> Result<(), RunError> {
    let st = moments::init_moments(s.n_trunc, &s.init).map_err(moment_err)?;
    let series = moments::evolve_moments(&st, &s.coeffs, s.t_end, s.dt).map_err(moment_err)?;

    let (stride, idx) = thin_indices(series.times.len(), MAX_CSV_ROWS);
    mf.push("output_stride", format!("{stride}"));

    let mut header: Vec<String> = vec!["t".into()];
    for &n in &s.record_orders {
        for comp in COMPONENT_NAMES {
            header.push(format!("m{n}_{comp}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = out_dir.join(format!("{}_moments.csv", s.name));
    let rows = idx.iter().map(|&k| {
        let mut row = Vec::with_capacity(header_refs.len());
        row.push(series.times[k]);
        for &n in &s.record_orders {
            for c in 0..4 {
                row.push(series.moments[k][n][c]);
            }
        }
        row
    });
    write_csv(&path, mf, &header_refs, rows)
}

fn run_cumulants(s: &Scenario, out_dir: &Path, mf: &mut Manifest) -> Result<(), RunError> {
    let mut failures: Vec<String> = Vec::new();
    for &closure in &s.closures {
        let tag = match closure {
            Closure::Close3 => "close3",
            Closure::Close4 => "close4",
        };
        let st = cumulants::init_cumulants(&s.init, s.coeffs.chi, closure)
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        let (series, failed_at): (CumulantSeries, Option<f64>) =
            match cumulants::evolve_cumulants(&st, &s.coeffs, s.t_end, s.dt) {
                Ok(se) => (se, None),
                Err(CumulantError::BlowUp { time, partial }) => (partial, Some(time)),
                Err(e) => return Err((EXIT_CONFIG, e.to_string())),
            };

        let (stride, idx) = thin_indices(series.rows.len(), MAX_CSV_ROWS);
        mf.push(&format!("{tag}.output_stride"), format!("{stride}"));
        mf.push(&format!("{tag}.rows_recorded"), format!("{}", series.rows.len()));

        let mut header: Vec<String> = vec!["t".into()];
        for sector in ["x", "z", "r", "i"] {
            for order in 0..4 {
                header.push(format!("{sector}{order}_cum"));
            }
        }
        header.push("constraint_residual".into());
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let path = out_dir.join(format!("{}_cumulants_{tag}.csv", s.name));
        let rows = idx.iter().map(|&k| {
            let row = &series.rows[k];
            let mut out = Vec::with_capacity(18);
            out.push(row.time);
            for sector in [row.state.x_cum, row.state.z_cum, row.state.r_cum, row.state.i_cum] {
                out.extend_from_slice(&sector);
            }
            out.push(row.constraint_residual);
            out
        });
        write_csv(&path, mf, &header_refs, rows)?;

        if let Some(time) = failed_at {
            mf.push(&format!("{tag}.blow_up_time"), fmt_e(time));
            failures
                .push(format!("{tag}: cumulant closure became unstable at t = {time} (partial series written)"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err((EXIT_NUMERICAL, failures.join("; ")))
    }
}

fn run_crosscheck(s: &Scenario, out_dir: &Path, mf: &mut Manifest) -> Result<(), RunError> {
    // Transport side.
    let f0 = field::init_field(s.grid, s.init).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let cfg = PdeConfig {
        dt: s.dt,
        t_end: s.t_end,
        snapshot_times: s.snapshot_times.clone(),
        safety: s.safety,
        ..PdeConfig::default()
    };
    let traj = pde::evolve(&f0, &s.coeffs, &cfg).map_err(|e| match e {
        PdeError::InvalidConfig(_) => (EXIT_CONFIG, e.to_string()),
        _ => (EXIT_NUMERICAL, e.to_string()),
    })?;
    mf.push("dt_used", fmt_e(traj.dt_used));

    // Hierarchy side: the linear ODE system wants a small fixed step.
    let dt_m = s.dt.min(1e-3);
    mf.push("dt_moments", fmt_e(dt_m));
    let st = moments::init_moments(s.n_trunc, &s.init).map_err(moment_err)?;
    let series = moments::evolve_moments(&st, &s.coeffs, s.t_end, dt_m).map_err(moment_err)?;
    let h = if series.times.len() > 1 { series.times[1] - series.times[0] } else { 1.0 };

    // Per-channel comparison at the snapshot times.
    let path = out_dir.join(format!("{}_crosscheck.csv", s.name));
    let inner = |mf: &mut Manifest| -> io::Result<f64> {
        let f = fs::File::create(&path)?;
        let mut w = io::BufWriter::new(f);
        writeln!(w, "order,component,max_abs_pde,max_abs_moments,max_abs_dev,rel_dev")?;
        let mut worst = 0.0f64;
        for n in 0..=4usize {
            for (ci, comp) in COMPONENTS.iter().enumerate() {
                let mut max_pde = 0.0f64;
                let mut max_mom = 0.0f64;
                let mut max_dev = 0.0f64;
                for snap in &traj.snapshots {
                    let a = field::grid_moment(snap, n as u32, *comp);
                    let k = ((snap.time / h).round() as usize).min(series.times.len() - 1);
                    let b = series.moments[k][n][ci];
                    max_pde = max_pde.max(a.abs());
                    max_mom = max_mom.max(b.abs());
                    max_dev = max_dev.max((a - b).abs());
                }
                // Channels that stay at zero are reported but not ranked.
                let rel = if max_mom < 1e-12 { 0.0 } else { max_dev / max_mom };
                worst = worst.max(rel);
                writeln!(
                    w,
                    "{n},{},{},{},{},{}",
                    COMPONENT_NAMES[ci],
                    fmt_e(max_pde),
                    fmt_e(max_mom),
                    fmt_e(max_dev),
                    fmt_e(rel)
                )?;
            }
        }
        w.flush()?;
        mf.files.push(path.display().to_string());
        Ok(worst)
    };
    let worst = inner(mf).map_err(|e| io_err(&path.display().to_string(), e))?;
    println!("wrote: {}", path.display());
    println!(
        "crosscheck: max relative deviation = {} over 20 channels at {} sample times",
        fmt_e(worst),
        traj.snapshots.len()
    );
    mf.push("crosscheck_max_rel_dev", fmt_e(worst));
    Ok(())
}
