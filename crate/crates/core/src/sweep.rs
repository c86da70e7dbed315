//! Penalty-parameter sweep: run the adaptive step solver over an increasing
//! list of s values with mesh reuse and warm starts, record violation
//! metrics per run, fit log-log decay slopes, and emit CSV plus a gnuplot
//! script.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::adapt::{adaptive_cycle, AdaptiveError, MarkParams};
use crate::chstep::{
    structural_centers, violation_report, NewtonConfig, SolveStatus, SphereProfile, StepError,
    StepProblem, STRUCTURAL_RADII,
};
use crate::fem::{assemble_mass, assemble_stiffness, h1_norm, P1Function};
use crate::mesh::{unit_square_mesh, MeshError};
use crate::penalty::{PenaltyPower, PenaltyScheme};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("unknown preset '{0}' (available: paper2d)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {required} converged records with positive metric, have {available}")]
    InsufficientData { available: usize, required: usize },
}

/// Full description of one sweep. All fields are plain data and the run is
/// free of randomness, so identical configs produce identical records up to
/// wall time.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Space dimension; only 2 is implemented.
    pub dimension: usize,
    pub eps: f64,
    pub tau: f64,
    pub radius: f64,
    pub center: [f64; 2],
    /// Initial structured-mesh resolution (cells per side).
    pub n0: usize,
    /// Solve-estimate-mark-refine rounds per s value.
    pub cycles: usize,
    /// Doerfler fraction.
    pub theta: f64,
    /// Geometric s grid, unless an explicit list is set.
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
    pub s_explicit: Option<Vec<f64>>,
    pub k_values: Vec<u32>,
    pub schemes: Vec<PenaltyScheme>,
    pub newton: NewtonConfig,
    pub out_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            dimension: 2,
            eps: 0.04,
            tau: 0.01,
            radius: 0.25,
            center: [0.5, 0.5],
            n0: 8,
            cycles: 3,
            theta: 0.5,
            s_min: 1e2,
            s_max: 1e6,
            s_count: 5,
            s_explicit: None,
            k_values: vec![2],
            schemes: vec![PenaltyScheme::Lumped],
            newton: NewtonConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn geometric_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![min];
    }
    let ratio = (max / min).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| min * ratio.powi(i as i32)).collect()
}

impl SweepConfig {
    /// The s values of the sweep, ascending.
    pub fn s_values(&self) -> Vec<f64> {
        match &self.s_explicit {
            Some(list) => list.clone(),
            None => geometric_grid(self.s_min, self.s_max, self.s_count),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.dimension != 2 {
            return fail(format!("dimension {} unsupported, only 2", self.dimension));
        }
        if !(self.eps > 0.0) || !(self.tau > 0.0) {
            return fail("eps and tau must be positive".into());
        }
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return fail("radius must lie in (0, 0.5)".into());
        }
        if self.n0 < 1 {
            return fail("n0 must be at least 1".into());
        }
        if self.cycles < 1 {
            return fail("cycles must be at least 1".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail("theta must lie in (0, 1)".into());
        }
        let s = self.s_values();
        if s.is_empty() {
            return fail("empty s grid".into());
        }
        if !s.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return fail("s values must be positive and finite".into());
        }
        if !s.windows(2).all(|w| w[0] < w[1]) {
            return fail("s values must be strictly increasing".into());
        }
        if self.k_values.is_empty() {
            return fail("empty k list".into());
        }
        for &k in &self.k_values {
            PenaltyPower::new(k)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.schemes.is_empty() {
            return fail("empty scheme list".into());
        }
        if self.schemes.contains(&PenaltyScheme::Exact) && self.k_values.iter().any(|&k| k != 2) {
            return fail("the exact scheme requires k = 2".into());
        }
        if !(self.newton.abs_tol > 0.0) || !(self.newton.rel_tol > 0.0) {
            return fail("newton tolerances must be positive".into());
        }
        if self.newton.max_iterations == 0 {
            return fail("newton_max_iterations must be at least 1".into());
        }
        if !(self.newton.damping > 0.0 && self.newton.damping <= 1.0) {
            return fail("newton_damping must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Apply a `key = value` configuration text (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line: lineno + 1,
                    text: raw.to_string(),
                });
            };
            self.apply_override(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one configuration key from its textual value.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
                key: key.to_string(),
                msg: format!("'{value}': {e}"),
            })
        }
        fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .split(',')
                .map(|tok| parse(key, tok.trim()))
                .collect()
        }
        match key {
            "dimension" => self.dimension = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "center_x" => self.center[0] = parse(key, value)?,
            "center_y" => self.center[1] = parse(key, value)?,
            "n0" => self.n0 = parse(key, value)?,
            "cycles" => self.cycles = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "s_min" => self.s_min = parse(key, value)?,
            "s_max" => self.s_max = parse(key, value)?,
            "s_count" => self.s_count = parse(key, value)?,
            "s_values" => self.s_explicit = Some(parse_list(key, value)?),
            "k" => self.k_values = parse_list(key, value)?,
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<PenaltyScheme>()
                            .map_err(|msg| ConfigError::InvalidValue {
                                key: key.to_string(),
                                msg,
                            })
                    })
                    .collect::<Result<_, _>>()?
            }
            "newton_abs_tol" => self.newton.abs_tol = parse(key, value)?,
            "newton_rel_tol" => self.newton.rel_tol = parse(key, value)?,
            "newton_max_iterations" => self.newton.max_iterations = parse(key, value)?,
            "newton_damping" => self.newton.damping = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Named parameter profiles. `paper2d` selects the fine-interface 2D
    /// profile (eps = 0.01 with an initial mesh that resolves it), which is
    /// considerably more expensive than the default desk-scale eps = 0.04.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        match name {
            "paper2d" => {
                self.eps = 0.01;
                self.n0 = 64;
                Ok(())
            }
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

/// One row of the convergence study.
#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub s: f64,
    pub k: u32,
    pub scheme: PenaltyScheme,
    pub dofs: usize,
    pub cells: usize,
    pub newton_iterations: usize,
    pub status: SolveStatus,
    pub linf: Option<f64>,
    pub l1: Option<f64>,
    pub structural_k: Option<f64>,
    pub h1_phi: Option<f64>,
    pub h1_mu: Option<f64>,
    pub mass_error: Option<f64>,
    /// Seconds; excluded from the determinism contract.
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::Diverged => "diverged",
        SolveStatus::MaxIterations => "max_iterations",
    }
}

/// Run the full sweep: for every (k, scheme) pair iterate the s grid in
/// ascending order, reusing the final mesh of each s as the initial mesh of
/// the next and warm-starting Newton from the previous solution. A Newton
/// failure produces a record with absent norms; the sweep then continues
/// with the next s from a cold start.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>, SweepError> {
    cfg.validate()?;
    let profile = SphereProfile {
        eps: cfg.eps,
        center: cfg.center,
        radius: cfg.radius,
    };
    let mark = MarkParams::new(cfg.theta);
    let s_values = cfg.s_values();
    let centers = structural_centers();
    let mut records = Vec::new();

    for &k_raw in &cfg.k_values {
        let k = PenaltyPower::new(k_raw).map_err(StepError::Penalty)?;
        for &scheme in &cfg.schemes {
            let mut mesh = Arc::new(unit_square_mesh(
                std::num::NonZeroUsize::new(cfg.n0).expect("validated"),
            ));
            let mut warm: Option<(P1Function, P1Function)> = None;
            for &s in &s_values {
                let phi_prev = profile.field(&mesh);
                let problem =
                    StepProblem::new(cfg.eps, cfg.tau, s, k, scheme, phi_prev)?;
                let start = Instant::now();
                match adaptive_cycle(&problem, &profile, cfg.cycles, &mark, &cfg.newton, warm.take())
                {
                    Ok(out) => {
                        let report = violation_report(
                            &out.problem,
                            &out.solution,
                            &STRUCTURAL_RADII,
                            &centers,
                        );
                        let mass = assemble_mass(out.mesh());
                        let stiffness = assemble_stiffness(out.mesh());
                        records.push(SweepRecord {
                            s,
                            k: k_raw,
                            scheme,
                            dofs: out.mesh().num_vertices(),
                            cells: out.mesh().num_cells(),
                            newton_iterations: out
                                .cycles
                                .iter()
                                .map(|c| c.newton_iterations)
                                .sum::<usize>()
                                + out.solution.iterations,
                            status: SolveStatus::Converged,
                            linf: Some(report.linf),
                            l1: Some(report.l1),
                            structural_k: Some(report.structural_k),
                            h1_phi: Some(h1_norm(out.solution.phi.values(), &mass, &stiffness)),
                            h1_mu: Some(h1_norm(out.solution.mu.values(), &mass, &stiffness)),
                            mass_error: Some(report.mass_error),
                            wall_time: start.elapsed().as_secs_f64(),
                        });
                        mesh = out.mesh().clone();
                        warm = Some((out.solution.phi, out.solution.mu));
                    }
                    Err(AdaptiveError::NewtonFailed {
                        problem, solution, ..
                    }) => {
                        records.push(SweepRecord {
                            s,
                            k: k_raw,
                            scheme,
                            dofs: problem.mesh().num_vertices(),
                            cells: problem.mesh().num_cells(),
                            newton_iterations: solution.iterations,
                            status: solution.status,
                            linf: None,
                            l1: None,
                            structural_k: None,
                            h1_phi: None,
                            h1_mu: None,
                            mass_error: None,
                            wall_time: start.elapsed().as_secs_f64(),
                        });
                        // Keep the adapted mesh, drop the warm start: the next
                        // s restarts cold from the analytic initial state.
                        mesh = problem.mesh().clone();
                        warm = None;
                    }
                    Err(AdaptiveError::Step(e)) => return Err(e.into()),
                    Err(AdaptiveError::Mesh(e)) => return Err(e.into()),
                }
            }
        }
    }
    Ok(records)
}

/// Which violation norm a slope fit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMetric {
    Linf,
    L1,
}

impl RateMetric {
    pub fn name(self) -> &'static str {
        match self {
            RateMetric::Linf => "linf",
            RateMetric::L1 => "l1",
        }
    }

    fn value(self, record: &SweepRecord) -> Option<f64> {
        match self {
            RateMetric::Linf => record.linf,
            RateMetric::L1 => record.l1,
        }
    }
}

/// Least-squares fit of log10(metric) against log10(s).
#[derive(Clone, Copy, Debug)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub s_range: (f64, f64),
    pub points: usize,
    /// Converged records dropped because the metric was exactly zero.
    pub excluded_zero: usize,
}

/// Fit the decay rate of a violation metric over the converged records.
/// Records whose metric is exactly zero (violation resolved to machine zero)
/// are excluded and counted.
pub fn fit_loglog_slope(
    records: &[SweepRecord],
    metric: RateMetric,
) -> Result<SlopeFit, FitError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded_zero = 0usize;
    for r in records.iter().filter(|r| r.converged()) {
        match metric.value(r) {
            Some(v) if v > 0.0 => {
                xs.push(r.s.log10());
                ys.push(v.log10());
            }
            Some(_) => excluded_zero += 1,
            None => {}
        }
    }
    let n = xs.len();
    if n < 4 {
        return Err(FitError::InsufficientData {
            available: n,
            required: 4,
        });
    }
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let s_min = records
        .iter()
        .filter(|r| r.converged())
        .map(|r| r.s)
        .fold(f64::INFINITY, f64::min);
    let s_max = records
        .iter()
        .filter(|r| r.converged())
        .map(|r| r.s)
        .fold(0.0f64, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        s_range: (s_min, s_max),
        points: n,
        excluded_zero,
    })
}

pub const CSV_HEADER: &str =
    "s,k,scheme,dofs,cells,newton_iterations,status,linf,l1,structural_K,h1_phi,h1_mu,mass_error,wall_time";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.12e}"),
        None => String::new(),
    }
}

/// Write the records as CSV: one row per record, norms in scientific
/// notation with 13 significant digits, absent values as empty fields.
pub fn emit_csv<W: Write>(records: &[SweepRecord], w: &mut W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.s,
            r.k,
            r.scheme.name(),
            r.dofs,
            r.cells,
            r.newton_iterations,
            status_name(r.status),
            fmt_opt(r.linf),
            fmt_opt(r.l1),
            fmt_opt(r.structural_k),
            fmt_opt(r.h1_phi),
            fmt_opt(r.h1_mu),
            fmt_opt(r.mass_error),
            r.wall_time,
        )?;
    }
    Ok(())
}

fn group_pairs(records: &[SweepRecord]) -> Vec<(u32, PenaltyScheme)> {
    let mut pairs = Vec::new();
    for r in records {
        if !pairs.contains(&(r.k, r.scheme)) {
            pairs.push((r.k, r.scheme));
        }
    }
    pairs
}

/// Theoretical L-infinity decay exponent for penalty power k.
pub fn linf_target(k: u32) -> f64 {
    -1.0 / (k as f64 - 1.0)
}

/// Write the slope summary: one line per (k, scheme, metric) with the fitted
/// slope, fit quality and the theoretical target exponent.
pub fn emit_slopes<W: Write>(records: &[SweepRecord], w: &mut W) -> io::Result<()> {
    for (k, scheme) in group_pairs(records) {
        let group: Vec<SweepRecord> = records
            .iter()
            .filter(|r| r.k == k && r.scheme == scheme)
            .cloned()
            .collect();
        for metric in [RateMetric::Linf, RateMetric::L1] {
            let target = match metric {
                RateMetric::Linf => format!("{:.6}", linf_target(k)),
                RateMetric::L1 if k == 2 => format!("{:.6}", -1.0),
                RateMetric::L1 => "na".to_string(),
            };
            match fit_loglog_slope(&group, metric) {
                Ok(fit) => writeln!(
                    w,
                    "k={} scheme={} metric={} slope={:.6} r2={:.6} target={} points={} excluded_zero={}",
                    k,
                    scheme.name(),
                    metric.name(),
                    fit.slope,
                    fit.r_squared,
                    target,
                    fit.points,
                    fit.excluded_zero,
                )?,
                Err(e) => writeln!(
                    w,
                    "k={} scheme={} metric={} slope=na r2=na target={} # {e}",
                    k,
                    scheme.name(),
                    metric.name(),
                    target,
                )?,
            }
        }
    }
    Ok(())
}

/// Write a self-contained gnuplot script plotting the violation norms of
/// every (k, scheme) group against s on log-log axes, with reference slope
/// lines -1/(k-1). The script reads the CSV by the given relative name.
pub fn emit_plot_script<W: Write>(
    records: &[SweepRecord],
    w: &mut W,
    csv_name: &str,
) -> io::Result<()> {
    let mut plots = Vec::new();
    let mut prelude = String::new();
    for (idx, (k, scheme)) in group_pairs(records).iter().enumerate() {
        let anchor = records.iter().find(|r| {
            r.k == *k && r.scheme == *scheme && r.converged() && r.linf.unwrap_or(0.0) > 0.0
        });
        plots.push(format!(
            "'{csv_name}' using (column(\"k\")=={k} && strcol(\"scheme\") eq \"{scheme}\" ? column(\"s\") : NaN):(column(\"linf\")) \\\n    with linespoints title 'k={k} {scheme} linf'",
            scheme = scheme.name(),
        ));
        if let Some(a) = anchor {
            let exponent = linf_target(*k);
            let c = a.linf.unwrap() / a.s.powf(exponent);
            let _ = writeln!(prelude, "ref{idx}(x) = {c:.6e} * x**({exponent:.6})");
            plots.push(format!(
                "ref{idx}(x) with lines dashtype 2 title 'slope {exponent:.3}'"
            ));
        }
    }
    writeln!(w, "# Violation decay against the penalty parameter.")?;
    writeln!(w, "set datafile separator \",\"")?;
    writeln!(w, "set key autotitle columnhead")?;
    writeln!(w, "set logscale xy")?;
    writeln!(w, "set xlabel 'penalty parameter s'")?;
    writeln!(w, "set ylabel 'violation'")?;
    writeln!(w, "set key outside right")?;
    writeln!(w, "set terminal pngcairo size 960,680")?;
    writeln!(w, "set output 'violation.png'")?;
    write!(w, "{prelude}")?;
    if plots.is_empty() {
        writeln!(w, "# no records")?;
    } else {
        writeln!(w, "plot \\\n  {}", plots.join(", \\\n  "))?;
    }
    Ok(())
}

/// Write `records.csv`, `plot.gp` and `slopes.txt` into the output directory.
pub fn write_outputs(cfg: &SweepConfig, records: &[SweepRecord]) -> Result<(), SweepError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let write_file = |name: &str, body: &dyn Fn(&mut Vec<u8>) -> io::Result<()>| -> Result<PathBuf, SweepError> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        let path = cfg.out_dir.join(name);
        std::fs::write(&path, buf)?;
        Ok(path)
    };
    write_file("records.csv", &|w| emit_csv(records, w))?;
    write_file("plot.gp", &|w| emit_plot_script(records, w, "records.csv"))?;
    write_file("slopes.txt", &|w| emit_slopes(records, w))?;
    Ok(())
}

/// Convenience for tests and the CLI: does this record represent the
/// documented failure mode (interpolated penalties at large s)?
pub fn is_documented_failure(record: &SweepRecord) -> bool {
    !record.converged() && record.scheme == PenaltyScheme::Interpolated
}
