//! Orbit counts `#{γ ∈ ker φ : d(x, γy) < T}`, homology-constrained counts
//! of primitive closed geodesics, and exponent discrimination for laws of
//! the form `N(T) ≈ C e^T T^{-α}`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cover::{CoverInvariants, CoverSpec};
use crate::fuchsian::{
    fold_ball, visit_conjugacy_classes, BallOptions, ClassOptions, FuchsianError,
    GroupPresentation,
};
use crate::hyperbolic::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CountingError {
    #[error(transparent)]
    Fuchsian(#[from] FuchsianError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("need at least {needed} positive points in the window, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Orbit { x: Point, y: Point },
    Geodesic { class: Vec<i64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountSeries {
    pub experiment: Experiment,
    pub group: String,
    pub phi: Vec<Vec<i64>>,
    /// `(T, N(T))` with `T` strictly increasing.
    pub points: Vec<(f64, u64)>,
    /// Search nodes used.
    pub nodes: u64,
}

impl CountSeries {
    pub fn ts(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<(), CountingError> {
    if grid.is_empty() {
        return Err(CountingError::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(CountingError::InvalidGrid("non-finite radius".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CountingError::InvalidGrid("radii must be strictly increasing".into()));
    }
    Ok(())
}

fn cumulate(hist: &[u64]) -> Vec<u64> {
    hist.iter()
        .scan(0u64, |s, &h| {
            *s += h;
            Some(*s)
        })
        .collect()
}

fn check_spec(g: &GroupPresentation, spec: &CoverSpec) -> Result<(), CountingError> {
    if spec.rank() != g.rank() {
        return Err(CountingError::DimensionMismatch(alloc::format!(
            "cover map has {} columns, group has {} generators",
            spec.rank(),
            g.rank()
        )));
    }
    Ok(())
}

/// `N(T) = #{γ ∈ ker φ : d(x, γy) < T}` for every `T` in the grid, from a
/// single enumeration of the largest ball.
pub fn orbit_count(
    g: &GroupPresentation,
    spec: &CoverSpec,
    x: Point,
    y: Point,
    grid: &[f64],
    opts: &BallOptions,
) -> Result<CountSeries, CountingError> {
    check_grid(grid)?;
    check_spec(g, spec)?;
    let cosh_grid: Vec<f64> = grid.iter().map(|t| t.cosh()).collect();
    let n = grid.len();
    let t_max = grid[n - 1];
    let (hist, nodes) = if t_max <= 0.0 {
        (alloc::vec![0u64; n], 0)
    } else {
        fold_ball(
            g,
            x,
            y,
            t_max,
            opts,
            || alloc::vec![0u64; n],
            |h, b| {
                if spec.image(b.abelian()).iter().all(|&v| v == 0) {
                    let k = cosh_grid.partition_point(|&c| c <= b.cosh_dist());
                    if k < n {
                        h[k] += 1;
                    }
                }
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )?
    };
    Ok(CountSeries {
        experiment: Experiment::Orbit { x, y },
        group: g.name().into(),
        phi: spec.phi().to_vec(),
        points: grid.iter().copied().zip(cumulate(&hist)).collect(),
        nodes,
    })
}

/// Primitive oriented classes with length at most `l_max`, bucketed by
/// homology image `φ(class)`. Each bucket holds per-grid-cell counts.
fn class_histogram(
    g: &GroupPresentation,
    spec: &CoverSpec,
    grid: &[f64],
    opts: &ClassOptions,
    mut keep: impl FnMut(&[i64]) -> bool,
) -> Result<(BTreeMap<Vec<i64>, Vec<u64>>, u64), CountingError> {
    check_grid(grid)?;
    check_spec(g, spec)?;
    let n = grid.len();
    let mut out: BTreeMap<Vec<i64>, Vec<u64>> = BTreeMap::new();
    let nodes = visit_conjugacy_classes(g, grid[n - 1], opts, |c| {
        if !c.primitive {
            return;
        }
        let img = spec.word_image(&c.necklace);
        if !keep(&img) {
            return;
        }
        let k = grid.partition_point(|&t| t < c.length);
        if k < n {
            out.entry(img).or_insert_with(|| alloc::vec![0; n])[k] += 1;
        }
    })?;
    Ok((out, nodes))
}

/// `N(T)` = number of oriented primitive closed geodesics of length `≤ T`
/// whose homology class maps to `xi` under `φ`.
pub fn geodesic_count(
    g: &GroupPresentation,
    spec: &CoverSpec,
    xi: &[i64],
    grid: &[f64],
    opts: &ClassOptions,
) -> Result<CountSeries, CountingError> {
    if xi.len() != spec.d() {
        return Err(CountingError::DimensionMismatch(alloc::format!(
            "class has {} entries, d = {}",
            xi.len(),
            spec.d()
        )));
    }
    let (hist, nodes) = class_histogram(g, spec, grid, opts, |img| img == xi)?;
    let hist = hist
        .into_values()
        .next()
        .unwrap_or_else(|| alloc::vec![0; grid.len()]);
    Ok(CountSeries {
        experiment: Experiment::Geodesic { class: xi.to_vec() },
        group: g.name().into(),
        phi: spec.phi().to_vec(),
        points: grid.iter().copied().zip(cumulate(&hist)).collect(),
        nodes,
    })
}

/// Cumulative geodesic counts for every class that occurs up to the
/// largest grid radius.
pub fn geodesic_counts_by_class(
    g: &GroupPresentation,
    spec: &CoverSpec,
    grid: &[f64],
    opts: &ClassOptions,
) -> Result<BTreeMap<Vec<i64>, Vec<u64>>, CountingError> {
    let (hist, _) = class_histogram(g, spec, grid, opts, |_| true)?;
    Ok(hist.into_iter().map(|(k, h)| (k, cumulate(&h))).collect())
}

/// `p + h/2`, the orbit-counting and mixing exponent.
pub fn predicted_orbit_exponent(inv: &CoverInvariants) -> f64 {
    inv.p as f64 + inv.h as f64 / 2.0
}

/// `p + h/2 + 1`.
pub fn predicted_geodesic_exponent(inv: &CoverInvariants) -> f64 {
    predicted_orbit_exponent(inv) + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitCandidate {
    pub alpha: f64,
    /// Fitted constant `C`.
    pub constant: f64,
    /// Weighted sum of squared residuals of the log model.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub candidates: Vec<FitCandidate>,
    pub selected: f64,
    /// Ratio of the runner-up residual to the best one.
    pub margin: f64,
    pub predicted: Option<f64>,
    /// Root mean square (weighted) residual of the selected model.
    pub rms: f64,
    pub poor_fit: bool,
    pub window: (f64, f64),
    pub points_used: usize,
}

impl FitReport {
    pub fn with_prediction(mut self, alpha: f64) -> Self {
        self.predicted = Some(alpha);
        self
    }

    pub fn selected_candidate(&self) -> &FitCandidate {
        self.candidates
            .iter()
            .find(|c| c.alpha == self.selected)
            .expect("selected candidate is present")
    }

    /// Whether the prediction is the selected exponent.
    pub fn matches_prediction(&self) -> Option<bool> {
        self.predicted.map(|p| (p - self.selected).abs() < 1e-12)
    }
}

/// RMS threshold above which an unweighted log fit is flagged.
pub const POOR_FIT_RMS: f64 = 0.25;

/// Fits `log v = log C − s·t − α log t` for each `α` by weighted least
/// squares in `log C`, where `s` is 1 for growth laws `C e^t t^{-α}` and 0
/// for power laws `C t^{-α}`. Each point is `(t, log v, weight)`.
pub fn fit_log_model(
    points: &[(f64, f64, f64)],
    alphas: &[f64],
    exponential: bool,
    rms_threshold: f64,
) -> Result<FitReport, CountingError> {
    if alphas.is_empty() {
        return Err(CountingError::InvalidGrid("no candidate exponents".into()));
    }
    if points.len() < 5 {
        return Err(CountingError::InsufficientData {
            needed: 5,
            have: points.len(),
        });
    }
    let s = if exponential { 1.0 } else { 0.0 };
    let wsum: f64 = points.iter().map(|p| p.2).sum();
    let candidates: Vec<FitCandidate> = alphas
        .iter()
        .map(|&alpha| {
            let ys: Vec<f64> = points
                .iter()
                .map(|&(t, lv, _)| lv - s * t + alpha * t.ln())
                .collect();
            let mean = ys.iter().zip(points).map(|(y, p)| y * p.2).sum::<f64>() / wsum;
            let residual = ys
                .iter()
                .zip(points)
                .map(|(y, p)| p.2 * (y - mean) * (y - mean))
                .sum();
            FitCandidate {
                alpha,
                constant: mean.exp(),
                residual,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[a].residual.total_cmp(&candidates[b].residual));
    let best = candidates[order[0]];
    let margin = order
        .get(1)
        .map(|&i| candidates[i].residual / best.residual)
        .unwrap_or(f64::INFINITY);
    let rms = (best.residual / wsum).sqrt();
    let window = (points[0].0, points[points.len() - 1].0);
    Ok(FitReport {
        candidates,
        selected: best.alpha,
        margin,
        predicted: None,
        rms,
        poor_fit: !(rms <= rms_threshold),
        window,
        points_used: points.len(),
    })
}

/// Exponent discrimination for `N(T) ≈ C e^T T^{-α}` on `T ∈ [lo, hi]`.
pub fn fit_exponent(
    series: &CountSeries,
    window: (f64, f64),
    alphas: &[f64],
) -> Result<FitReport, CountingError> {
    let pts: Vec<(f64, u64)> = series
        .points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    let positive = pts.iter().filter(|p| p.1 > 0).count();
    if pts.len() < 5 || positive < pts.len() {
        return Err(CountingError::InsufficientData {
            needed: 5.max(pts.len()),
            have: positive,
        });
    }
    let data: Vec<(f64, f64, f64)> = pts.iter().map(|&(t, n)| (t, (n as f64).ln(), 1.0)).collect();
    fit_log_model(&data, alphas, true, POOR_FIT_RMS)
}

/// Same fit on raw `(T, N)` samples, for synthetic or external data.
pub fn fit_exponent_points(
    points: &[(f64, f64)],
    window: (f64, f64),
    alphas: &[f64],
) -> Result<FitReport, CountingError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    let positive = pts.iter().filter(|p| p.1 > 0.0).count();
    if pts.len() < 5 || positive < pts.len() {
        return Err(CountingError::InsufficientData {
            needed: 5.max(pts.len()),
            have: positive,
        });
    }
    let data: Vec<(f64, f64, f64)> = pts.iter().map(|&(t, n)| (t, n.ln(), 1.0)).collect();
    fit_log_model(&data, alphas, true, POOR_FIT_RMS)
}
