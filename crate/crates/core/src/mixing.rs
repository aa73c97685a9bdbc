//! Monte Carlo matrix coefficients of the geodesic flow on a `ℤ^d`-cover.
//!
//! A unit tangent vector of the cover is a vector of `T¹ℍ²` lying over the
//! fundamental polygon together with a sheet `ξ ∈ ℤ^d`. Flowing leaves the
//! polygon; reducing back by a word `w` moves the sheet to `ξ + φ(w)`.
//!
//! The Haar measure is `dx dy / y²` times the normalized angle measure, so
//! the unit tangent bundle of the base surface has mass equal to its area.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counting::{fit_log_model, CountingError, FitReport};
use crate::cover::CoverSpec;
use crate::fuchsian::{FuchsianError, GroupPresentation};
use crate::hyperbolic::{Point, UnitTangent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MixingError {
    #[error(transparent)]
    Fuchsian(#[from] FuchsianError),
    #[error(transparent)]
    Fit(#[from] CountingError),
    #[error("flow box has zero Haar mass")]
    ZeroMass,
    #[error("invalid flow box: {0}")]
    InvalidBox(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("at least {min} samples are required, got {have}")]
    TooFewSamples { min: u64, have: u64 },
    #[error("every sample escaped into a cusp")]
    AllDiscarded,
}

pub type Result<T> = core::result::Result<T, MixingError>;

/// Samples per counter-based stream.
pub const CHUNK: u64 = 8192;
/// Longest single flow leg between reductions.
pub const FLOW_STEP: f64 = 0.5;
/// Reduced chi-square above which a decay fit is flagged.
pub const DECAY_POOR_FIT_CHI2: f64 = 25.0;

/// A product region `[x₀,x₁] × [y₀,y₁] × arc` on one sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowBox {
    pub xrange: (f64, f64),
    pub yrange: (f64, f64),
    /// Direction arc `[θ₁, θ₂]` in radians, `0 ≤ θ₂ − θ₁ ≤ 2π`.
    pub arc: (f64, f64),
    pub sheet: Vec<i64>,
}

impl FlowBox {
    pub fn new(xrange: (f64, f64), yrange: (f64, f64), arc: (f64, f64), sheet: Vec<i64>) -> Result<Self> {
        let all = [xrange.0, xrange.1, yrange.0, yrange.1, arc.0, arc.1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(MixingError::InvalidBox(String::from("non-finite bound")));
        }
        if xrange.0 > xrange.1 || yrange.0 > yrange.1 || arc.0 > arc.1 {
            return Err(MixingError::InvalidBox(String::from("reversed range")));
        }
        if yrange.0 <= 0.0 {
            return Err(MixingError::InvalidBox(String::from("y-range must lie in the upper half plane")));
        }
        if arc.1 - arc.0 > TAU + 1e-12 {
            return Err(MixingError::InvalidBox(String::from("arc longer than a full turn")));
        }
        let b = FlowBox { xrange, yrange, arc, sheet };
        haar_mass(&b)?;
        Ok(b)
    }

    /// Full circle of directions over a rectangle.
    pub fn rectangle(xrange: (f64, f64), yrange: (f64, f64), sheet: Vec<i64>) -> Result<Self> {
        Self::new(xrange, yrange, (0.0, TAU), sheet)
    }

    fn arc_width(&self) -> f64 {
        (self.arc.1 - self.arc.0).min(TAU)
    }

    pub fn contains_point(&self, z: Point) -> bool {
        self.xrange.0 <= z.x() && z.x() <= self.xrange.1 && self.yrange.0 <= z.y() && z.y() <= self.yrange.1
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        let w = self.arc_width();
        if w >= TAU {
            return true;
        }
        let mut d = (theta - self.arc.0) % TAU;
        if d < 0.0 {
            d += TAU;
        }
        d <= w
    }

    pub fn contains(&self, v: &UnitTangent, sheet: &[i64]) -> bool {
        sheet == self.sheet.as_slice() && self.contains_point(v.base_point()) && self.contains_angle(v.angle())
    }

    /// Checks that the rectangle lies in the closed fundamental polygon.
    /// Sides are geodesics, so a side's half-disc meets the rectangle only
    /// if it meets the bottom edge; the boundary is sampled densely.
    pub fn check_inside(&self, g: &GroupPresentation) -> Result<()> {
        let (x0, x1) = self.xrange;
        let (y0, y1) = self.yrange;
        let n = 256;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let pts = [
                (x0 + s * (x1 - x0), y0),
                (x0 + s * (x1 - x0), y1),
                (x0, y0 + s * (y1 - y0)),
                (x1, y0 + s * (y1 - y0)),
            ];
            for (x, y) in pts {
                let z = Point::new(x, y).map_err(|_| MixingError::InvalidBox(String::from("bad corner")))?;
                if !g.contains(z, 1e-12) {
                    return Err(MixingError::InvalidBox(alloc::format!(
                        "point ({x}, {y}) lies outside the fundamental polygon"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Haar mass of `self ∩ other` (zero on different sheets).
    pub fn intersection_mass(&self, other: &FlowBox) -> f64 {
        if self.sheet != other.sheet {
            return 0.0;
        }
        let x0 = self.xrange.0.max(other.xrange.0);
        let x1 = self.xrange.1.min(other.xrange.1);
        let y0 = self.yrange.0.max(other.yrange.0);
        let y1 = self.yrange.1.min(other.yrange.1);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let arc = arc_overlap(self, other);
        (x1 - x0) * (1.0 / y0 - 1.0 / y1) * arc / TAU
    }
}

fn arc_overlap(a: &FlowBox, b: &FlowBox) -> f64 {
    let (wa, wb) = (a.arc_width(), b.arc_width());
    if wa >= TAU {
        return wb;
    }
    if wb >= TAU {
        return wa;
    }
    let mut start = (b.arc.0 - a.arc.0) % TAU;
    if start < 0.0 {
        start += TAU;
    }
    // Intervals [0, wa] and [start, start + wb] on the circle.
    let first = (wa.min(start + wb) - start).max(0.0);
    let second = wa.min(start + wb - TAU).max(0.0);
    first + second
}

/// `∫∫ dx dy / y²` over the rectangle times the arc fraction.
pub fn haar_mass(b: &FlowBox) -> Result<f64> {
    let (x0, x1) = b.xrange;
    let (y0, y1) = b.yrange;
    let m = (x1 - x0) * (1.0 / y0 - 1.0 / y1) * b.arc_width() / TAU;
    if !(m > 0.0) {
        return Err(MixingError::ZeroMass);
    }
    Ok(m)
}

/// A Haar-distributed vector in the box: `x` uniform, `y` by the inverse
/// CDF of `1/y²`, direction uniform on the arc.
pub fn sample_box<R: Rng>(b: &FlowBox, rng: &mut R) -> (UnitTangent, Vec<i64>) {
    let (x0, x1) = b.xrange;
    let (y0, y1) = b.yrange;
    let x = x0 + (x1 - x0) * rng.random::<f64>();
    let (a, c) = (1.0 / y0, 1.0 / y1);
    let y = 1.0 / (a - rng.random::<f64>() * (a - c));
    let y = y.clamp(y0, y1);
    let theta = b.arc.0 + b.arc_width() * rng.random::<f64>();
    let z = Point::new(x, y).expect("sample lies in the upper half plane");
    (UnitTangent::from_point_angle(z, theta), b.sheet.clone())
}

/// Moves a vector and its sheet into the fundamental polygon.
pub fn reduce_tangent(
    g: &GroupPresentation,
    spec: &CoverSpec,
    v: &UnitTangent,
    xi: &mut [i64],
) -> core::result::Result<UnitTangent, FuchsianError> {
    let red = g.reduce_point(v.base_point())?;
    if !red.word.is_empty() {
        for (s, d) in xi.iter_mut().zip(spec.word_image(&red.word)) {
            *s += d;
        }
    }
    Ok(v.translate(&red.moved_by))
}

/// Flows for time `t` in legs of at most [`FLOW_STEP`], reducing after
/// each leg.
pub fn flow_and_reduce(
    g: &GroupPresentation,
    spec: &CoverSpec,
    v: &UnitTangent,
    xi: &[i64],
    t: f64,
) -> core::result::Result<(UnitTangent, Vec<i64>), FuchsianError> {
    let mut xi = xi.to_vec();
    let legs = (t.abs() / FLOW_STEP).ceil().max(1.0) as usize;
    let dt = t / legs as f64;
    let mut cur = reduce_tangent(g, spec, v, &mut xi)?;
    if t != 0.0 {
        for _ in 0..legs {
            cur = reduce_tangent(g, spec, &cur.flow(dt), &mut xi)?;
        }
    }
    Ok((cur, xi))
}

/// Monte Carlo options. Chunks of [`CHUNK`] samples each use their own
/// ChaCha stream, so results do not depend on the thread count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { samples: 100_000, seed: 1 }
    }
}

/// One matrix-coefficient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingEstimate {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Samples that stayed in the compact part.
    pub samples: u64,
    /// Samples discarded after escaping into a cusp.
    pub discarded: u64,
}

/// Estimates across a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingSeries {
    pub points: Vec<MixingEstimate>,
}

#[derive(Clone, Copy, Default)]
struct Tally {
    hits: u64,
    used: u64,
    discarded: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_chunk(
    g: &GroupPresentation,
    spec: &CoverSpec,
    a: &FlowBox,
    b: &FlowBox,
    t: f64,
    key: u64,
    chunk: u64,
    count: u64,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(chunk);
    let mut tally = Tally::default();
    for _ in 0..count {
        let (v, xi) = sample_box(b, &mut rng);
        match flow_and_reduce(g, spec, &v, &xi, t) {
            Ok((w, sheet)) => {
                tally.used += 1;
                if a.contains(&w, &sheet) {
                    tally.hits += 1;
                }
            }
            Err(_) => tally.discarded += 1,
        }
    }
    tally
}

fn validate(g: &GroupPresentation, spec: &CoverSpec, a: &FlowBox, b: &FlowBox) -> Result<()> {
    if spec.rank() != g.rank() {
        return Err(MixingError::DimensionMismatch(alloc::format!(
            "cover has rank {} but the group has {} generators",
            spec.rank(),
            g.rank()
        )));
    }
    for bx in [a, b] {
        if bx.sheet.len() != spec.d() {
            return Err(MixingError::DimensionMismatch(alloc::format!("sheet must have length {}", spec.d())));
        }
        bx.check_inside(g)?;
    }
    Ok(())
}

/// Unbiased estimate of `∫ 1_A(x a_t) 1_B(x) dm`:
/// `mass(B) · (1/n) Σ 1_A(flow_t(sample_B))`.
pub fn matrix_coefficient(
    g: &GroupPresentation,
    spec: &CoverSpec,
    a: &FlowBox,
    b: &FlowBox,
    t: f64,
    opts: &McOptions,
) -> Result<MixingEstimate> {
    validate(g, spec, a, b)?;
    if opts.samples < 1000 {
        return Err(MixingError::TooFewSamples { min: 1000, have: opts.samples });
    }
    let mass = haar_mass(b)?;
    let key = splitmix(opts.seed ^ splitmix(t.to_bits()));
    let chunks = opts.samples.div_ceil(CHUNK);
    let count = |k: u64| CHUNK.min(opts.samples - k * CHUNK);

    #[cfg(feature = "parallel")]
    let tallies: Vec<Tally> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(|k| run_chunk(g, spec, a, b, t, key, k, count(k))).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tallies: Vec<Tally> = (0..chunks).map(|k| run_chunk(g, spec, a, b, t, key, k, count(k))).collect();

    let total = tallies.iter().fold(Tally::default(), |acc, x| Tally {
        hits: acc.hits + x.hits,
        used: acc.used + x.used,
        discarded: acc.discarded + x.discarded,
    });
    if total.used == 0 {
        return Err(MixingError::AllDiscarded);
    }
    let n = total.used as f64;
    let p = total.hits as f64 / n;
    // Sample variance of mass·1_hit.
    let var = if total.used > 1 { p * (1.0 - p) * n / (n - 1.0) } else { 0.0 };
    Ok(MixingEstimate {
        t,
        estimate: mass * p,
        stderr: mass * (var / n).sqrt(),
        samples: total.used,
        discarded: total.discarded,
    })
}

pub fn mixing_series(
    g: &GroupPresentation,
    spec: &CoverSpec,
    a: &FlowBox,
    b: &FlowBox,
    ts: &[f64],
    opts: &McOptions,
) -> Result<MixingSeries> {
    let points = ts
        .iter()
        .map(|&t| matrix_coefficient(g, spec, a, b, t, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixingSeries { points })
}

/// Selects `α` in `estimate(t) ≈ C t^{-α}` by least squares on the log
/// scale, weighting each point by `(estimate / stderr)²`. The fit is
/// flagged poor when the reduced chi-square exceeds
/// [`DECAY_POOR_FIT_CHI2`].
pub fn decay_fit(series: &MixingSeries, alphas: &[f64]) -> Result<FitReport> {
    let usable: Vec<&MixingEstimate> = series.points.iter().filter(|p| p.estimate > 0.0 && p.stderr > 0.0).collect();
    if usable.len() < series.points.len() {
        return Err(CountingError::InsufficientData { needed: series.points.len(), have: usable.len() }.into());
    }
    let data: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|p| (p.t, p.estimate.ln(), (p.estimate / p.stderr).powi(2)))
        .collect();
    let mut report = fit_log_model(&data, alphas, false, f64::INFINITY)?;
    let chi2 = report.selected_candidate().residual / (data.len() - 1) as f64;
    report.poor_fit = !(chi2 <= DECAY_POOR_FIT_CHI2);
    Ok(report)
}
