//! The `locmix` command line.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locmix_core::counting::{self, CountSeries, FitReport};
use locmix_core::fuchsian::{BallOptions, ClassOptions, GroupPresentation};
use locmix_core::cover::{self, CoverSpec, HGram};
use locmix_core::hyperbolic::Point;
use locmix_core::mixing::{self, FlowBox, McOptions, FLOW_STEP};
use locmix_core::symbolic::{self, DpOptions, GibbsData, ProductObservable, Window};
use serde::Serialize;

use crate::error::{exit, CliError};
use crate::formats::{self, BoxJson, GramJson, GroupJson, ShiftJson, ShiftSystem};
use crate::report::*;

#[derive(Parser, Debug)]
#[command(
    name = "locmix",
    version,
    about = "Local mixing experiments on abelian covers of cusped hyperbolic surfaces",
    after_help = "Exit codes: 0 success, 1 I/O error, 2 validation error, 3 Gram matrix missing under --exact, \
                  4 budget exceeded, 5 numeric failure.\n\
                  Commands that emit a table write CSV to stdout (or --csv) and their JSON report to stderr (or --json). \
                  Other commands write JSON to stdout (or --json)."
)]
pub struct Cli {
    /// Worker threads for every parallel stage; 0 uses all cores.
    #[arg(long, global = true, env = "LOCMIX_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Print the estimated work against the budget and exit without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Write the CSV table to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the JSON report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cover invariants: residues, p, h, m0 and the constant c.
    Invariants(InvariantsArgs),
    /// Orbit counts N(T) = #{γ ∈ ker φ : d(x, γy) < T} with an exponent fit.
    OrbitCount(OrbitArgs),
    /// Primitive closed geodesic counts in one homology class with an exponent fit.
    Geodesics(GeodesicArgs),
    /// Monte Carlo matrix coefficients of the geodesic flow with a decay fit.
    MatrixCoeff(MixingArgs),
    /// Transfer operator computations on a finite Markov shift.
    Symbolic(SymbolicArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GroupArgs {
    /// Built-in group: gamma2 or punctured_torus.
    #[arg(long, default_value = "gamma2", conflicts_with = "group")]
    pub preset: String,
    /// Group presentation JSON (file or inline).
    #[arg(long, value_name = "JSON")]
    pub group: Option<String>,
    /// Cover map: identity, trivial, a matrix such as "[[1,0]]", or a {"d","phi"} JSON.
    #[arg(long, default_value = "identity")]
    pub phi: String,
}

impl GroupArgs {
    fn build(&self) -> Result<(GroupPresentation, CoverSpec), CliError> {
        let g = match &self.group {
            Some(src) => formats::load::<GroupJson>(src)?.build()?,
            None => GroupPresentation::preset(&self.preset).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown preset {:?}; available: {}",
                    self.preset,
                    GroupPresentation::preset_names().join(", ")
                ))
            })?,
        };
        let spec = formats::parse_cover(&self.phi, g.rank())?;
        Ok((g, spec))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct InvariantsArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Gram matrix of the harmonic norm, {"q": [[...]]} (file or inline).
    #[arg(long, value_name = "JSON")]
    pub gram: Option<String>,
    /// Fail with exit code 3 when h > 0 and no Gram matrix is given.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Fit window lo:hi; the whole grid when omitted.
    #[arg(long)]
    pub window: Option<String>,
    /// Candidate exponents.
    #[arg(long)]
    pub alphas: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Radii as lo:hi[:step] or a comma list.
    #[arg(long, default_value = "1:12:1")]
    pub t_grid: String,
    /// Base point x as "re,im".
    #[arg(long, default_value = "0,1")]
    pub x: String,
    /// Base point y as "re,im".
    #[arg(long, default_value = "0,1")]
    pub y: String,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Cap on matrices formed by the ball search.
    #[arg(long, default_value_t = BallOptions::default().node_budget)]
    pub budget: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Homology class ξ as a comma list; the zero class when omitted.
    #[arg(long)]
    pub class: Option<String>,
    /// Lengths as lo:hi[:step] or a comma list.
    #[arg(long, default_value = "3:12:1")]
    pub t_grid: String,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Cap on necklace search nodes.
    #[arg(long, default_value_t = ClassOptions::default().node_budget)]
    pub budget: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct MixingArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Target box A as {"xrange","yrange","arc","sheet"} (file or inline).
    /// Default: x ∈ [-0.5, 0.5], y ∈ [1, 2], full circle, sheet 0.
    #[arg(long, value_name = "JSON")]
    pub box_a: Option<String>,
    /// Source box B, same format and default as box A.
    #[arg(long, value_name = "JSON")]
    pub box_b: Option<String>,
    /// Flow times as lo:hi[:step] or a comma list.
    #[arg(long, default_value = "4:12:1")]
    pub t_grid: String,
    /// Samples per time, e.g. 1e6.
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Gram matrix of the harmonic norm, used for the normalized ratio.
    #[arg(long, value_name = "JSON")]
    pub gram: Option<String>,
    /// Candidate decay exponents.
    #[arg(long, default_value = "0.5,1,1.5")]
    pub alphas: String,
}

#[derive(Args, Debug, Serialize)]
pub struct SymbolicArgs {
    /// Shift document {"states","transition","r","f"} (file or inline).
    #[arg(long, value_name = "JSON", global = true)]
    pub shift: Option<String>,
    #[command(subcommand)]
    pub command: SymbolicCommand,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum SymbolicCommand {
    /// Leading eigenvalue and Gurevich pressure.
    Pressure,
    /// Gibbs data ψ, ρ, ν.
    Gibbs,
    /// The symbolic sum Q_t(Φ⊗u)(x, ξ).
    Qsum(QsumArgs),
    /// Compares the direct and unfolded correlation sums I_t.
    ItCheck(ItArgs),
    /// The series t^{d/2} Q_t with its Gaussian prediction.
    Llt(LltArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ObservableArgs {
    /// Φ per state as a comma list; all ones when omitted.
    #[arg(long)]
    pub obs: Option<String>,
    /// Window u as lo:hi (indicator) or JSON [[lo,hi,value],...].
    #[arg(long, default_value = "-0.5:0.5", allow_hyphen_values = true)]
    pub window: String,
}

#[derive(Args, Debug, Serialize)]
pub struct QsumArgs {
    #[command(flatten)]
    pub observable: ObservableArgs,
    /// State label or index.
    #[arg(long, default_value = "0")]
    pub x: String,
    /// Target ξ as a comma list; zero when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, default_value_t = DpOptions::default().max_nodes)]
    pub max_nodes: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ItArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Base area m0 in the measure factor.
    #[arg(long, default_value_t = 1.0)]
    pub m0: f64,
    /// Φ₁ per state; all ones when omitted.
    #[arg(long)]
    pub obs1: Option<String>,
    /// ξ₁; zero when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub xi1: Option<String>,
    #[arg(long, default_value = "-0.5:0.5", allow_hyphen_values = true)]
    pub window1: String,
    /// Φ₂ per state; all ones when omitted.
    #[arg(long)]
    pub obs2: Option<String>,
    /// ξ₂; zero when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub xi2: Option<String>,
    #[arg(long, default_value = "-0.5:0.5", allow_hyphen_values = true)]
    pub window2: String,
    /// Relative tolerance for the agreement flag.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DpOptions::default().max_nodes)]
    pub max_nodes: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct LltArgs {
    #[command(flatten)]
    pub observable: ObservableArgs,
    /// Times as lo:hi[:step] or a comma list.
    #[arg(long, default_value = "10:100:10")]
    pub t_grid: String,
    #[arg(long, default_value = "0")]
    pub x: String,
    /// Target ξ; zero when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long, default_value_t = DpOptions::default().max_nodes)]
    pub max_nodes: usize,
}

pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("{s:?} is not a nonnegative integer"))
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// `lo:hi[:step]` (inclusive) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    if s.contains(':') {
        let parts = parse_floats(s, ':')?;
        let (lo, hi, step) = match parts[..] {
            [lo, hi] => (lo, hi, 1.0),
            [lo, hi, step] => (lo, hi, step),
            _ => return Err(invalid(format!("grid {s:?} must be lo:hi[:step]"))),
        };
        if !(step > 0.0) || hi < lo {
            return Err(invalid(format!("grid {s:?} is empty")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(invalid(format!("grid {s:?} has too many points")));
        }
        Ok((0..=n).map(|i| lo + step * i as f64).collect())
    } else {
        parse_floats(s, ',')
    }
}

fn parse_floats(s: &str, sep: char) -> Result<Vec<f64>, CliError> {
    s.split(sep)
        .map(|p| {
            let v: f64 = p.trim().parse().map_err(|_| invalid(format!("{p:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(format!("{p:?} is not finite")))
            }
        })
        .collect()
}

fn parse_ints(s: &str) -> Result<Vec<i64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| invalid(format!("{p:?} is not an integer"))))
        .collect()
}

fn parse_point(s: &str) -> Result<Point, CliError> {
    match parse_floats(s, ',')?[..] {
        [x, y] => Point::new(x, y).map_err(|e| invalid(e.to_string())),
        _ => Err(invalid(format!("point {s:?} must be re,im"))),
    }
}

fn parse_window(s: &str) -> Result<Window, CliError> {
    if s.trim_start().starts_with('[') {
        let pieces: Vec<(f64, f64, f64)> = serde_json::from_str(s).map_err(|e| invalid(format!("window: {e}")))?;
        Ok(Window::new(pieces)?)
    } else {
        match parse_floats(s, ':')?[..] {
            [lo, hi] => Ok(Window::indicator(lo, hi)?),
            _ => Err(invalid(format!("window {s:?} must be lo:hi"))),
        }
    }
}

fn fit_window(arg: &Option<String>, grid: &[f64]) -> Result<(f64, f64), CliError> {
    match arg {
        None => Ok((grid[0], grid[grid.len() - 1])),
        Some(s) => match parse_floats(s, ':')?[..] {
            [lo, hi] if lo <= hi => Ok((lo, hi)),
            _ => Err(invalid(format!("window {s:?} must be lo:hi"))),
        },
    }
}

fn load_gram(arg: &Option<String>) -> Result<Option<HGram>, CliError> {
    arg.as_deref().map(|s| formats::load::<GramJson>(s)?.build()).transpose()
}

fn state_vector(arg: &Option<String>, n: usize) -> Result<Vec<f64>, CliError> {
    match arg {
        None => Ok(vec![1.0; n]),
        Some(s) => {
            let v = parse_floats(s, ',')?;
            if v.len() != n {
                return Err(invalid(format!("observable needs {n} entries, got {}", v.len())));
            }
            Ok(v)
        }
    }
}

fn class_vector(arg: &Option<String>, d: usize) -> Result<Vec<i64>, CliError> {
    let v = arg.as_deref().map(parse_ints).transpose()?.unwrap_or_else(|| vec![0; d]);
    if v.len() != d {
        return Err(invalid(format!("class needs {d} entries, got {}", v.len())));
    }
    Ok(v)
}

/// Where output goes.
pub struct Sinks {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Sinks {
    fn write(path: &Option<PathBuf>, text: &str, fallback_stdout: bool) -> Result<(), CliError> {
        match path {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
            None if fallback_stdout => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
            None => {
                std::io::stderr().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    /// Emits a report after checking that it re-validates from its JSON.
    fn report<R: Report>(&self, r: &R, primary: bool) -> Result<(), CliError> {
        let mut text = r.to_json();
        R::from_json(&text)?;
        text.push('\n');
        Self::write(&self.json, &text, primary)
    }

    fn table(&self, t: &Table, prov: &Provenance) -> Result<(), CliError> {
        Self::write(&self.csv, &t.render(prov), true)
    }
}

fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    if n > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("locmix: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads);
    let sinks = Sinks { csv: cli.csv, json: cli.json };
    match &cli.command {
        Command::Invariants(a) => cmd_invariants(a, cli.dry_run, &sinks),
        Command::OrbitCount(a) => cmd_orbit_count(a, cli.dry_run, &sinks),
        Command::Geodesics(a) => cmd_geodesics(a, cli.dry_run, &sinks),
        Command::MatrixCoeff(a) => cmd_matrix_coeff(a, cli.dry_run, &sinks),
        Command::Symbolic(a) => cmd_symbolic(a, cli.dry_run, &sinks),
    }
}

fn dry_run(sinks: &Sinks, prov: Provenance, unit: &str, estimate: f64, budget: f64) -> Result<(), CliError> {
    sinks.report(
        &DryRunReport { provenance: prov, unit: unit.into(), estimate, budget, within_budget: estimate <= budget },
        true,
    )
}

pub fn cmd_invariants(a: &InvariantsArgs, dry: bool, sinks: &Sinks) -> Result<(), CliError> {
    let prov = Provenance::new("invariants", a, None);
    let (g, spec) = a.group.build()?;
    let gram = load_gram(&a.gram)?;
    if dry {
        return dry_run(sinks, prov, "cover_invariants", 1.0, 1.0);
    }
    let inv = cover::invariants(&g, &spec)?;
    let c = cover::constant_c(&inv, gram.as_ref())?;
    if a.exact {
        c.require_exact(inv.h)?;
    }
    let report = InvariantsReport {
        provenance: prov,
        group: g.name().into(),
        d: inv.d,
        phi: spec.phi().to_vec(),
        residues: inv.residues.clone(),
        p: inv.p,
        h: inv.h,
        m0: inv.m0,
        c: c.c,
        exact: c.exact,
        p_integral: inv.p_integral.value,
        p_integral_error: inv.p_integral.error,
        p_integral_method: method_name(inv.p_integral.method),
        h_factor: c.h_factor,
        basis_ep: inv.basis_ep.clone(),
        basis_eh: inv.basis_eh.clone(),
    };
    sinks.report(&report, true)
}

fn count_outputs(
    sinks: &Sinks,
    prov: Provenance,
    experiment: &str,
    series: &CountSeries,
    fit: Result<FitReport, CliError>,
    predicted: f64,
) -> Result<(), CliError> {
    let fit = fit.map(|f| f.with_prediction(predicted));
    let mut columns = vec!["T".to_string(), "N".to_string()];
    if let Ok(f) = &fit {
        columns.extend(f.candidates.iter().map(|c| format!("model_{}", c.alpha)));
    }
    let mut table = Table::new(columns);
    for &(t, n) in &series.points {
        let mut row = vec![Cell::Float(t), Cell::Int(n as i64)];
        if let Ok(f) = &fit {
            row.extend(f.candidates.iter().map(|c| Cell::Float(c.constant * t.exp() * t.powf(-c.alpha))));
        }
        table.rows.push(row);
    }
    sinks.table(&table, &prov)?;
    let (fit, fit_error) = match &fit {
        Ok(f) => (Some(FitJson::from(f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = CountReport {
        provenance: prov,
        experiment: experiment.into(),
        group: series.group.clone(),
        phi: series.phi.clone(),
        nodes: series.nodes,
        predicted_exponent: predicted,
        fit,
        fit_error,
    };
    sinks.report(&report, false)
}

fn parse_alphas(arg: &Option<String>, default: &[f64]) -> Result<Vec<f64>, CliError> {
    arg.as_deref().map_or_else(|| Ok(default.to_vec()), |s| parse_floats(s, ','))
}

pub fn cmd_orbit_count(a: &OrbitArgs, dry: bool, sinks: &Sinks) -> Result<(), CliError> {
    let prov = Provenance::new("orbit-count", a, None);
    let (g, spec) = a.group.build()?;
    let grid = parse_grid(&a.t_grid)?;
    let (x, y) = (parse_point(&a.x)?, parse_point(&a.y)?);
    let window = fit_window(&a.fit.window, &grid)?;
    let alphas = parse_alphas(&a.fit.alphas, &[0.0, 0.5, 1.0, 1.5, 2.0])?;
    let t_max = grid[grid.len() - 1];
    if dry {
        // Lattice points of the whole group in a ball of radius T: π e^T / area.
        let estimate = std::f64::consts::PI * t_max.exp() / cover::area(&g);
        return dry_run(sinks, prov, "ball_elements", estimate, a.budget as f64);
    }
    let opts = BallOptions { node_budget: a.budget, ..BallOptions::default() };
    let series = counting::orbit_count(&g, &spec, x, y, &grid, &opts)?;
    let inv = cover::invariants(&g, &spec)?;
    let fit = counting::fit_exponent(&series, window, &alphas).map_err(CliError::from);
    count_outputs(sinks, prov, "orbit", &series, fit, counting::predicted_orbit_exponent(&inv))
}

pub fn cmd_geodesics(a: &GeodesicArgs, dry: bool, sinks: &Sinks) -> Result<(), CliError> {
    let prov = Provenance::new("geodesics", a, None);
    let (g, spec) = a.group.build()?;
    let grid = parse_grid(&a.t_grid)?;
    let class = class_vector(&a.class, spec.d())?;
    let window = fit_window(&a.fit.window, &grid)?;
    let alphas = parse_alphas(&a.fit.alphas, &[1.0, 1.5, 2.0, 2.5, 3.0])?;
    let l_max = grid[grid.len() - 1];
    if dry {
        // Prime geodesic theorem: about e^L / L primitive classes.
        return dry_run(sinks, prov, "geodesics", l_max.exp() / l_max.max(1.0), a.budget as f64);
    }
    let opts = ClassOptions { node_budget: a.budget, ..ClassOptions::default() };
    let series = counting::geodesic_count(&g, &spec, &class, &grid, &opts)?;
    let inv = cover::invariants(&g, &spec)?;
    let fit = counting::fit_exponent(&series, window, &alphas).map_err(CliError::from);
    count_outputs(sinks, prov, "geodesic", &series, fit, counting::predicted_geodesic_exponent(&inv))
}

fn default_box(d: usize) -> Result<FlowBox, CliError> {
    Ok(FlowBox::rectangle((-0.5, 0.5), (1.0, 2.0), vec![0; d])?)
}

fn load_box(arg: &Option<String>, d: usize) -> Result<FlowBox, CliError> {
    match arg {
        Some(s) => formats::load::<BoxJson>(s)?.build(),
        None => default_box(d),
    }
}

pub fn cmd_matrix_coeff(a: &MixingArgs, dry: bool, sinks: &Sinks) -> Result<(), CliError> {
    let prov = Provenance::new("matrix-coeff", a, Some(a.seed));
    let (g, spec) = a.group.build()?;
    let grid = parse_grid(&a.t_grid)?;
    let box_a = load_box(&a.box_a, spec.d())?;
    let box_b = load_box(&a.box_b, spec.d())?;
    let alphas = parse_floats(&a.alphas, ',')?;
    let gram = load_gram(&a.gram)?;
    if dry {
        let legs: f64 = grid.iter().map(|t| (t.abs() / FLOW_STEP).ceil().max(1.0)).sum();
        let estimate = a.samples as f64 * legs;
        return dry_run(sinks, prov, "flow_legs", estimate, estimate);
    }
    let opts = McOptions { samples: a.samples, seed: a.seed };
    let series = mixing::mixing_series(&g, &spec, &box_a, &box_b, &grid, &opts)?;
    let inv = cover::invariants(&g, &spec)?;
    let c = cover::constant_c(&inv, gram.as_ref())?.c;
    let alpha = counting::predicted_orbit_exponent(&inv);
    let (ma, mb) = (mixing::haar_mass(&box_a)?, mixing::haar_mass(&box_b)?);

    let mut table = Table::new(["t", "estimate", "stderr", "discarded"].map(String::from).to_vec());
    let mut normalized = Vec::new();
    for p in &series.points {
        table.rows.push(vec![Cell::Float(p.t), Cell::Float(p.estimate), Cell::Float(p.stderr), Cell::Int(p.discarded as i64)]);
        let ratio = if inv.d == 0 { p.estimate * inv.m0 / (ma * mb) } else { p.t.powf(alpha) * p.estimate / (c * ma * mb) };
        normalized.push([p.t, ratio]);
    }
    sinks.table(&table, &prov)?;
    let fit = mixing::decay_fit(&series, &alphas).map(|f| f.with_prediction(alpha));
    let (fit, fit_error) = match fit {
        Ok(f) => (Some(FitJson::from(&f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = MixingReport {
        provenance: prov,
        group: g.name().into(),
        phi: spec.phi().to_vec(),
        mass_a: ma,
        mass_b: mb,
        m0: inv.m0,
        c,
        predicted_exponent: alpha,
        normalized,
        discarded: series.points.iter().map(|p| p.discarded).sum(),
        fit,
        fit_error,
    };
    sinks.report(&report, false)
}

fn load_shift(a: &SymbolicArgs) -> Result<ShiftSystem, CliError> {
    let src = a.shift.as_deref().ok_or_else(|| invalid("--shift is required"))?;
    formats::load::<ShiftJson>(src)?.build()
}

fn gibbs(sys: &ShiftSystem) -> Result<GibbsData, CliError> {
    Ok(symbolic::leading_triple(&sys.shift, &sys.r)?)
}

/// Rough DP size: states × steps × reachable ξ boxes.
fn dp_estimate(sys: &ShiftSystem, horizon: f64) -> f64 {
    let n = sys.shift.states() as f64;
    let steps = match sys.r.positivity() {
        Some(p) => p.k as f64 * ((horizon + p.undershoot) / p.c).ceil().max(1.0),
        None => return f64::INFINITY,
    };
    let span = 2.0 * sys.f.step_bound() as f64 * steps + 1.0;
    n * steps * span.powi(sys.f.dim() as i32)
}

pub fn cmd_symbolic(a: &SymbolicArgs, dry: bool, sinks: &Sinks) -> Result<(), CliError> {
    let sys = load_shift(a)?;
    let name = match &a.command {
        SymbolicCommand::Pressure => "symbolic pressure",
        SymbolicCommand::Gibbs => "symbolic gibbs",
        SymbolicCommand::Qsum(_) => "symbolic qsum",
        SymbolicCommand::ItCheck(_) => "symbolic it-check",
        SymbolicCommand::Llt(_) => "symbolic llt",
    };
    let prov = Provenance::new(name, a, None);
    let n = sys.shift.states();
    if dry {
        let (estimate, budget) = match &a.command {
            SymbolicCommand::Pressure | SymbolicCommand::Gibbs => ((n * n) as f64, f64::INFINITY),
            SymbolicCommand::Qsum(q) => {
                (dp_estimate(&sys, q.t + parse_window(&q.observable.window)?.support().1), q.max_nodes as f64)
            }
            SymbolicCommand::ItCheck(q) => {
                let s = parse_window(&q.window1)?.support().1 - parse_window(&q.window2)?.support().0;
                (dp_estimate(&sys, q.t + s), q.max_nodes as f64)
            }
            SymbolicCommand::Llt(q) => {
                let grid = parse_grid(&q.t_grid)?;
                let h = grid[grid.len() - 1] + parse_window(&q.observable.window)?.support().1;
                (grid.len() as f64 * dp_estimate(&sys, h), q.max_nodes as f64)
            }
        };
        return dry_run(sinks, prov, "dp_nodes", estimate, budget);
    }
    match &a.command {
        SymbolicCommand::Pressure => {
            let gd = gibbs(&sys)?;
            let report = PressureReport {
                provenance: prov,
                states: sys.labels.clone(),
                mixing: sys.shift.is_mixing(),
                bip: sys.shift.is_bip(),
                lambda: gd.lambda,
                pressure: gd.pressure,
                positivity: sys.r.positivity().map(|p| PositivityJson { k: p.k, c: p.c, undershoot: p.undershoot }),
            };
            sinks.report(&report, true)
        }
        SymbolicCommand::Gibbs => {
            let gd = gibbs(&sys)?;
            let report = GibbsReport {
                provenance: prov,
                states: sys.labels.clone(),
                lambda: gd.lambda,
                pressure: gd.pressure,
                eigen_residual: gd.eigen_residual(&sys.shift),
                mean_roof: gd.mean_roof(&sys.shift),
                mean_displacement: gd.mean_displacement(&sys.f),
                psi: gd.psi,
                rho: gd.rho,
                nu: gd.nu,
            };
            sinks.report(&report, true)
        }
        SymbolicCommand::Qsum(q) => {
            let gd = gibbs(&sys)?;
            let phi = state_vector(&q.observable.obs, n)?;
            let u = parse_window(&q.observable.window)?;
            let x = sys.state(&q.x)?;
            let xi = class_vector(&q.xi, sys.f.dim())?;
            let opts = DpOptions { max_nodes: q.max_nodes };
            let value = symbolic::q_sum(&sys.shift, &gd.normalized, &sys.f, &gd.psi, &phi, &u, x, &xi, q.t, &opts)?;
            let report = QsumReport { provenance: prov, x: sys.labels[x].clone(), xi, t: q.t, q: value };
            sinks.report(&report, true)
        }
        SymbolicCommand::ItCheck(q) => {
            let gd = gibbs(&sys)?;
            let d = sys.f.dim();
            let psi1 = ProductObservable {
                phi: state_vector(&q.obs1, n)?,
                xi: class_vector(&q.xi1, d)?,
                u: parse_window(&q.window1)?,
            };
            let psi2 = ProductObservable {
                phi: state_vector(&q.obs2, n)?,
                xi: class_vector(&q.xi2, d)?,
                u: parse_window(&q.window2)?,
            };
            let opts = DpOptions { max_nodes: q.max_nodes };
            let pair = symbolic::i_t(&sys.shift, &gd, &sys.f, q.m0, &psi1, &psi2, q.t, &opts)?;
            let gap = pair.relative_gap();
            let report = ItReport {
                provenance: prov,
                t: q.t,
                direct: pair.direct,
                unfolded: pair.unfolded,
                relative_gap: gap,
                tolerance: q.tolerance,
                agree: gap < q.tolerance,
            };
            sinks.report(&report, true)
        }
        SymbolicCommand::Llt(q) => {
            let gd = gibbs(&sys)?;
            let phi = state_vector(&q.observable.obs, n)?;
            let u = parse_window(&q.observable.window)?;
            let grid = parse_grid(&q.t_grid)?;
            let x = sys.state(&q.x)?;
            let xi = class_vector(&q.xi, sys.f.dim())?;
            let opts = DpOptions { max_nodes: q.max_nodes };
            let s = symbolic::llt_series(&sys.shift, &gd, &sys.f, &phi, &u, &grid, x, &xi, &opts)?;
            let mut table = Table::new(vec!["t".into(), "scaled_q".into()]);
            table.rows.extend(s.points.iter().map(|&(t, v)| vec![Cell::Float(t), Cell::Float(v)]));
            sinks.table(&table, &prov)?;
            let report = LltReport {
                provenance: prov,
                covariance: s.covariance,
                drift: s.drift,
                mean_roof: s.mean_roof,
                gaussian_density: s.gaussian_density,
                predicted: s.predicted,
            };
            sinks.report(&report, false)
        }
    }
}
