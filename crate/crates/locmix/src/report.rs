//! Emitted artifacts: provenance, CSV tables and JSON reports.

use std::fmt::Write as _;

use locmix_core::counting::FitReport;
use locmix_core::cover::IntegralMethod;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "locmix";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Full-precision decimal rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// The fully resolved configuration, defaults included.
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>) -> Self {
        let config = serde_json::to_value(config).expect("configs serialize");
        let canonical = serde_json::to_string(&config).expect("values serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Provenance {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: hex,
            seed,
            config,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.tool != TOOL || self.config_hash.len() != 16 || !self.config_hash.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(CliError::Validation("malformed provenance".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(v),
        }
    }
}

/// A CSV table preceded by `#` provenance lines.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut out = String::new();
        writeln!(out, "# {} {} {}", prov.tool, prov.version, prov.command).unwrap();
        writeln!(out, "# config_hash={}", prov.config_hash).unwrap();
        match prov.seed {
            Some(s) => writeln!(out, "# seed={s}").unwrap(),
            None => writeln!(out, "# seed=none").unwrap(),
        }
        writeln!(out, "# config={}", prov.config).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

/// Splits rendered CSV into provenance lines, header and numeric rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut comments = Vec::new();
    let mut lines = text.lines().filter(|l| {
        if let Some(c) = l.strip_prefix('#') {
            comments.push(c.trim().to_string());
            false
        } else {
            true
        }
    });
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Validation("missing CSV header".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        let row = l
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| CliError::Validation(format!("{c:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(CliError::Validation("ragged CSV row".into()));
        }
        rows.push(row);
    }
    Ok((comments, header, rows))
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} is not finite")))
    }
}

fn all_finite<'a>(name: &str, vs: impl IntoIterator<Item = &'a f64>) -> Result<(), CliError> {
    vs.into_iter().try_for_each(|v| finite(name, *v))
}

/// Schema check applied to every emitted report.
pub trait Report: Serialize + for<'de> Deserialize<'de> {
    fn validate(&self) -> Result<(), CliError>;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    fn from_json(text: &str) -> Result<Self, CliError> {
        let r: Self = serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateJson {
    pub alpha: f64,
    pub constant: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitJson {
    pub candidates: Vec<CandidateJson>,
    pub selected: f64,
    pub margin: f64,
    pub predicted: Option<f64>,
    pub matches_prediction: Option<bool>,
    pub rms: f64,
    pub poor_fit: bool,
    pub window: [f64; 2],
    pub points_used: usize,
}

impl From<&FitReport> for FitJson {
    fn from(r: &FitReport) -> Self {
        FitJson {
            candidates: r
                .candidates
                .iter()
                .map(|c| CandidateJson { alpha: c.alpha, constant: c.constant, residual: c.residual })
                .collect(),
            selected: r.selected,
            // An exact fit leaves the runner-up ratio infinite.
            margin: if r.margin.is_finite() { r.margin } else { f64::MAX },
            predicted: r.predicted,
            matches_prediction: r.matches_prediction(),
            rms: r.rms,
            poor_fit: r.poor_fit,
            window: [r.window.0, r.window.1],
            points_used: r.points_used,
        }
    }
}

impl FitJson {
    fn validate(&self) -> Result<(), CliError> {
        if !self.candidates.iter().any(|c| c.alpha == self.selected) {
            return Err(CliError::Validation("selected exponent is not a candidate".into()));
        }
        for c in &self.candidates {
            all_finite("fit candidate", [&c.alpha, &c.constant, &c.residual])?;
            if c.residual < 0.0 {
                return Err(CliError::Validation("negative residual".into()));
            }
        }
        if self.points_used < 2 || self.window[0] > self.window[1] {
            return Err(CliError::Validation("degenerate fit window".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsReport {
    pub provenance: Provenance,
    pub group: String,
    pub d: usize,
    pub phi: Vec<Vec<i64>>,
    /// Row `j` is the image of cusp word `j`.
    pub residues: Vec<Vec<i64>>,
    pub p: usize,
    pub h: usize,
    pub m0: f64,
    /// The constant; the harmonic factor is omitted when `exact` is false.
    pub c: f64,
    pub exact: bool,
    pub p_integral: f64,
    pub p_integral_error: f64,
    pub p_integral_method: String,
    pub h_factor: Option<f64>,
    pub basis_ep: Vec<Vec<f64>>,
    pub basis_eh: Vec<Vec<f64>>,
}

pub fn method_name(m: IntegralMethod) -> String {
    match m {
        IntegralMethod::ClosedForm => "closed_form",
        IntegralMethod::Adaptive => "adaptive",
        IntegralMethod::QuasiMonteCarlo => "quasi_monte_carlo",
    }
    .into()
}

impl Report for InvariantsReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        if self.p + self.h != self.d || self.phi.len() != self.d {
            return Err(CliError::Validation("p + h must equal d".into()));
        }
        if self.basis_ep.len() != self.p || self.basis_eh.len() != self.h {
            return Err(CliError::Validation("basis sizes must be p and h".into()));
        }
        if self.residues.iter().any(|r| r.len() != self.d) {
            return Err(CliError::Validation("residue rows must have length d".into()));
        }
        all_finite("m0", [&self.m0, &self.c, &self.p_integral, &self.p_integral_error])?;
        if !(self.c > 0.0 && self.m0 > 0.0) {
            return Err(CliError::Validation("c and m0 must be positive".into()));
        }
        if self.exact != self.h_factor.is_some() {
            return Err(CliError::Validation("exact flag disagrees with h_factor".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountReport {
    pub provenance: Provenance,
    /// `orbit` or `geodesic`.
    pub experiment: String,
    pub group: String,
    pub phi: Vec<Vec<i64>>,
    pub nodes: u64,
    pub predicted_exponent: f64,
    pub fit: Option<FitJson>,
    pub fit_error: Option<String>,
}

impl Report for CountReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        if self.experiment != "orbit" && self.experiment != "geodesic" {
            return Err(CliError::Validation(format!("unknown experiment {}", self.experiment)));
        }
        if self.fit.is_some() == self.fit_error.is_some() {
            return Err(CliError::Validation("exactly one of fit and fit_error must be present".into()));
        }
        self.fit.as_ref().map_or(Ok(()), FitJson::validate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingReport {
    pub provenance: Provenance,
    pub group: String,
    pub phi: Vec<Vec<i64>>,
    pub mass_a: f64,
    pub mass_b: f64,
    pub m0: f64,
    /// Cover constant (harmonic factor omitted when not exact).
    pub c: f64,
    pub predicted_exponent: f64,
    /// `(t, t^α·estimate/(c·mass_a·mass_b))` with the predicted `α`, or
    /// `(t, estimate·m0/(mass_a·mass_b))` when `d = 0`.
    pub normalized: Vec<[f64; 2]>,
    pub discarded: u64,
    pub fit: Option<FitJson>,
    pub fit_error: Option<String>,
}

impl Report for MixingReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("mass", [&self.mass_a, &self.mass_b, &self.m0, &self.c])?;
        all_finite("normalized", self.normalized.iter().flatten())?;
        if self.fit.is_some() == self.fit_error.is_some() {
            return Err(CliError::Validation("exactly one of fit and fit_error must be present".into()));
        }
        self.fit.as_ref().map_or(Ok(()), FitJson::validate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositivityJson {
    pub k: usize,
    pub c: f64,
    pub undershoot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureReport {
    pub provenance: Provenance,
    pub states: Vec<String>,
    pub mixing: bool,
    pub bip: bool,
    pub lambda: f64,
    pub pressure: f64,
    pub positivity: Option<PositivityJson>,
}

impl Report for PressureReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("pressure", [&self.lambda, &self.pressure])?;
        if !(self.lambda > 0.0) || (self.lambda.ln() - self.pressure).abs() > 1e-12 * (1.0 + self.pressure.abs()) {
            return Err(CliError::Validation("pressure must be log lambda".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsReport {
    pub provenance: Provenance,
    pub states: Vec<String>,
    pub lambda: f64,
    pub pressure: f64,
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
    pub nu: Vec<f64>,
    pub eigen_residual: f64,
    pub mean_roof: f64,
    pub mean_displacement: Vec<f64>,
}

impl Report for GibbsReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        let n = self.states.len();
        if self.psi.len() != n || self.rho.len() != n || self.nu.len() != n {
            return Err(CliError::Validation("eigendata must have one entry per state".into()));
        }
        all_finite("gibbs", self.psi.iter().chain(&self.rho).chain(&self.nu))?;
        if self.psi.iter().any(|&v| v <= 0.0) {
            return Err(CliError::Validation("psi must be positive".into()));
        }
        if (self.nu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CliError::Validation("nu must be a probability vector".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsumReport {
    pub provenance: Provenance,
    pub x: String,
    pub xi: Vec<i64>,
    pub t: f64,
    pub q: f64,
}

impl Report for QsumReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("q", [&self.q, &self.t])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItReport {
    pub provenance: Provenance,
    pub t: f64,
    pub direct: f64,
    pub unfolded: f64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub agree: bool,
}

impl Report for ItReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("i_t", [&self.direct, &self.unfolded, &self.relative_gap])?;
        if self.agree != (self.relative_gap < self.tolerance) {
            return Err(CliError::Validation("agree flag disagrees with the gap".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LltReport {
    pub provenance: Provenance,
    pub covariance: Vec<Vec<f64>>,
    pub drift: Vec<f64>,
    pub mean_roof: f64,
    pub gaussian_density: f64,
    pub predicted: f64,
}

impl Report for LltReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("llt", self.covariance.iter().flatten().chain(&self.drift))?;
        all_finite("llt", [&self.mean_roof, &self.gaussian_density, &self.predicted])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DryRunReport {
    pub provenance: Provenance,
    /// What the estimate counts: `ball_elements`, `geodesics`, `samples`
    /// or `dp_nodes`.
    pub unit: String,
    pub estimate: f64,
    pub budget: f64,
    pub within_budget: bool,
}

impl Report for DryRunReport {
    fn validate(&self) -> Result<(), CliError> {
        self.provenance.validate()?;
        all_finite("estimate", [&self.estimate, &self.budget])
    }
}
