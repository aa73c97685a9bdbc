//! Finite topological Markov shifts with a roof `r` on edges and a
//! `ℤ^d`-valued displacement `f` on states.
//!
//! Functions on the one-sided shift are cylinder functions of depth one or
//! two ([`Observable`]). The Ruelle operator
//! `(LF)(x) = Σ_{σy=x} e^{-r(y)} F(y)` maps them to functions of `x₀`.
//! Its leading data `(λ, ψ, ρ)` give the invariant probability `dν = ψ dρ`.
//!
//! [`q_sum`] and [`i_t`] evaluate the symbolic sums by dynamic programming
//! over `(state, accumulated ξ, accumulated r)`. The accumulated roof is
//! tracked as a count vector over the distinct edge values, so paths merge
//! only when their roofs agree exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SymbolicError {
    #[error("transition matrix must be square and nonempty")]
    NotSquare,
    #[error("transition entries must be 0 or 1 (row {row}, column {col})")]
    NotBinary { row: usize, col: usize },
    #[error("state {state} has no successor")]
    ZeroRow { state: usize },
    #[error("shift is not topologically mixing")]
    NotMixing,
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("window function must have compact support")]
    UnboundedWindow,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("displacement cocycle is periodic: |λ(θ)| = 1 at θ = {theta:?}")]
    PeriodicCocycle { theta: Vec<f64> },
    #[error("dynamic programming budget exceeded after {nodes} nodes")]
    BudgetExceeded { nodes: usize },
    #[error("eigen solver failed: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, SymbolicError>;

/// A finite topological Markov shift.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovShift {
    transition: Vec<Vec<u8>>,
    mixing: bool,
}

impl MarkovShift {
    pub fn new(transition: Vec<Vec<u8>>) -> Result<Self> {
        let n = transition.len();
        if n == 0 || transition.iter().any(|r| r.len() != n) {
            return Err(SymbolicError::NotSquare);
        }
        for (i, row) in transition.iter().enumerate() {
            if let Some(j) = row.iter().position(|&v| v > 1) {
                return Err(SymbolicError::NotBinary { row: i, col: j });
            }
            if row.iter().all(|&v| v == 0) {
                return Err(SymbolicError::ZeroRow { state: i });
            }
        }
        let mixing = primitive(&transition);
        Ok(MarkovShift { transition, mixing })
    }

    /// The full shift on `n` symbols.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![vec![1; n]; n])
    }

    /// Keeps the first `cutoff` states of a (possibly much larger) shift
    /// and re-validates the remaining rows.
    pub fn truncate(transition: &[Vec<u8>], cutoff: usize) -> Result<Self> {
        let rows = transition
            .iter()
            .take(cutoff)
            .map(|r| r.iter().take(cutoff).copied().collect())
            .collect();
        Self::new(rows)
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<u8>] {
        &self.transition
    }

    pub fn allowed(&self, a: usize, b: usize) -> bool {
        self.transition[a][b] == 1
    }

    /// Some power of the transition matrix is strictly positive.
    pub fn is_mixing(&self) -> bool {
        self.mixing
    }

    /// Finite shifts always have big images and preimages.
    pub fn is_bip(&self) -> bool {
        true
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.states();
        (0..n).flat_map(move |a| (0..n).filter(move |&b| self.allowed(a, b)).map(move |b| (a, b)))
    }
}

fn primitive(t: &[Vec<u8>]) -> bool {
    let n = t.len();
    let a: Vec<Vec<bool>> = t.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect();
    let mut p = a.clone();
    // Wielandt: a primitive n×n matrix has A^k > 0 for k = (n-1)² + 1.
    for _ in 0..(n - 1) * (n - 1) + 1 {
        if p.iter().all(|r| r.iter().all(|&v| v)) {
            return true;
        }
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] {
                    for j in 0..n {
                        q[i][j] |= a[k][j];
                    }
                }
            }
        }
        p = q;
    }
    p.iter().all(|r| r.iter().all(|&v| v))
}

/// Constants with `r_n ≥ c > 0` for every admissible path of length
/// `n ≥ k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Positivity {
    pub k: usize,
    pub c: f64,
    /// `-min r_n` over paths shorter than `k` (never negative).
    pub undershoot: f64,
}

/// A roof function of the edge `(x₀, x₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    r: Vec<Vec<f64>>,
    positivity: Option<Positivity>,
}

impl Potential {
    /// Validates finiteness on admissible edges and looks for the smallest
    /// `K ≤ 64` with `r_n ≥ C > 0` for all `n ≥ K`.
    pub fn new(shift: &MarkovShift, r: Vec<Vec<f64>>) -> Result<Self> {
        let n = shift.states();
        if r.len() != n || r.iter().any(|row| row.len() != n) {
            return Err(SymbolicError::DimensionMismatch(alloc::format!(
                "potential table must be {n}×{n}"
            )));
        }
        for (a, b) in shift.edges() {
            if !r[a][b].is_finite() {
                return Err(SymbolicError::InvalidPotential(alloc::format!(
                    "r({a},{b}) is not finite"
                )));
            }
        }
        let mut r = r;
        for (a, row) in r.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                if !shift.allowed(a, b) {
                    *v = 0.0;
                }
            }
        }
        // per_len[m - 1]: least r_m over admissible paths with m edges.
        let mut layer: Vec<f64> = vec![0.0; n];
        let mut per_len = Vec::new();
        for _ in 0..128 {
            let mut next = vec![f64::INFINITY; n];
            for (a, b) in shift.edges() {
                next[b] = next[b].min(layer[a] + r[a][b]);
            }
            per_len.push(next.iter().copied().fold(f64::INFINITY, f64::min));
            layer = next;
        }
        let positivity = (1..=64).find_map(|k| {
            let c = per_len[k - 1..2 * k - 1].iter().copied().fold(f64::INFINITY, f64::min);
            (c > 0.0).then(|| {
                let low = per_len[..k - 1].iter().copied().fold(0.0f64, f64::min);
                Positivity { k, c, undershoot: -low }
            })
        });
        Ok(Potential { r, positivity })
    }

    /// Like [`Potential::new`], but rejects roofs whose Birkhoff sums are
    /// not eventually positive.
    pub fn positive(shift: &MarkovShift, r: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self::new(shift, r)?;
        p.require_positive()?;
        Ok(p)
    }

    pub fn positivity(&self) -> Option<Positivity> {
        self.positivity
    }

    pub fn require_positive(&self) -> Result<Positivity> {
        self.positivity.ok_or_else(|| {
            SymbolicError::InvalidPotential(String::from("Birkhoff sums of r are not eventually positive"))
        })
    }

    pub fn constant(shift: &MarkovShift, value: f64) -> Result<Self> {
        let n = shift.states();
        Self::new(shift, vec![vec![value; n]; n])
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.r
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.r[a][b]
    }

    /// `r_n` along a word `y₀ … y_n`.
    pub fn birkhoff(&self, word: &[usize]) -> f64 {
        word.windows(2).map(|w| self.r[w[0]][w[1]]).sum()
    }

    fn shifted(&self, shift: &MarkovShift, by: f64) -> Result<Self> {
        let mut r = self.r.clone();
        for (a, b) in shift.edges() {
            r[a][b] += by;
        }
        Self::new(shift, r)
    }
}

/// A `ℤ^d`-valued function of the state `x₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    f: Vec<Vec<i64>>,
    d: usize,
}

impl Displacement {
    pub fn new(shift: &MarkovShift, f: Vec<Vec<i64>>, d: usize) -> Result<Self> {
        if f.len() != shift.states() || f.iter().any(|v| v.len() != d) {
            return Err(SymbolicError::DimensionMismatch(alloc::format!(
                "displacement must have {} rows of length {d}",
                shift.states()
            )));
        }
        Ok(Displacement { f, d })
    }

    /// `d = 0`.
    pub fn none(shift: &MarkovShift) -> Self {
        Displacement { f: vec![Vec::new(); shift.states()], d: 0 }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn at(&self, state: usize) -> &[i64] {
        &self.f[state]
    }

    /// `F_max = max ‖f‖∞`.
    pub fn step_bound(&self) -> i64 {
        self.f.iter().flat_map(|v| v.iter().map(|x| x.abs())).max().unwrap_or(0)
    }
}

/// A cylinder function of depth one or two.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    State(Vec<f64>),
    Edge(Vec<Vec<f64>>),
}

impl Observable {
    pub fn eval(&self, a: usize, b: usize) -> f64 {
        match self {
            Observable::State(v) => v[a],
            Observable::Edge(m) => m[a][b],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let ok = match self {
            Observable::State(v) => v.len() == n,
            Observable::Edge(m) => m.len() == n && m.iter().all(|r| r.len() == n),
        };
        if ok {
            Ok(())
        } else {
            Err(SymbolicError::DimensionMismatch(alloc::format!("observable must be indexed by {n} states")))
        }
    }
}

/// `(LF)(x₀) = Σ_{a → x₀} e^{-r(a,x₀)} F(a, x₀)`.
pub fn transfer_apply(shift: &MarkovShift, r: &Potential, f: &Observable) -> Result<Vec<f64>> {
    let n = shift.states();
    f.check(n)?;
    Ok((0..n)
        .map(|x| {
            (0..n)
                .filter(|&a| shift.allowed(a, x))
                .map(|a| (-r.at(a, x)).exp() * f.eval(a, x))
                .collect::<NeumaierSum>()
                .value()
        })
        .collect())
}

/// Leading eigendata of the transfer operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsData {
    pub lambda: f64,
    pub pressure: f64,
    /// Positive eigenfunction, a function of `x₀`.
    pub psi: Vec<f64>,
    /// Eigenmeasure weights `ρ[b]` of the one-cylinders, a probability
    /// vector; `ψ` is scaled so that `∫ψ dρ = 1`.
    pub rho: Vec<f64>,
    /// `ν[b] = ψ(b) ρ[b]`.
    pub nu: Vec<f64>,
    /// `r̂ = r + log λ`.
    pub normalized: Potential,
}

impl GibbsData {
    /// `ρ[y₀ … y_n] = e^{-r̂_n} ρ[y_n]`.
    pub fn rho_cylinder(&self, word: &[usize]) -> f64 {
        match word.last() {
            None => self.rho.iter().sum(),
            Some(&last) => (-self.normalized.birkhoff(word)).exp() * self.rho[last],
        }
    }

    /// `ν[y₀ … y_n] = ψ(y₀) ρ[y₀ … y_n]`.
    pub fn nu_cylinder(&self, word: &[usize]) -> f64 {
        match word.first() {
            None => 1.0,
            Some(&a) => self.psi[a] * self.rho_cylinder(word),
        }
    }

    /// `∫ F dν` for a cylinder function of depth at most two.
    pub fn nu_integral(&self, shift: &MarkovShift, f: &Observable) -> f64 {
        shift.edges().map(|(a, b)| f.eval(a, b) * self.nu_cylinder(&[a, b])).collect::<NeumaierSum>().value()
    }

    /// `∫ F dρ` for a cylinder function of depth at most two.
    pub fn rho_integral(&self, shift: &MarkovShift, f: &Observable) -> f64 {
        shift.edges().map(|(a, b)| f.eval(a, b) * self.rho_cylinder(&[a, b])).collect::<NeumaierSum>().value()
    }

    /// `∫ r̂ dν`.
    pub fn mean_roof(&self, shift: &MarkovShift) -> f64 {
        self.nu_integral(shift, &Observable::Edge(self.normalized.table().to_vec()))
    }

    /// `∫ f dν`.
    pub fn mean_displacement(&self, disp: &Displacement) -> Vec<f64> {
        (0..disp.dim())
            .map(|j| self.nu.iter().enumerate().map(|(a, w)| w * disp.at(a)[j] as f64).sum())
            .collect()
    }

    /// `max_x |(L_{r̂}ψ)(x) − ψ(x)|`.
    pub fn eigen_residual(&self, shift: &MarkovShift) -> f64 {
        let lpsi = transfer_apply(shift, &self.normalized, &Observable::State(self.psi.clone())).unwrap();
        lpsi.iter().zip(&self.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Both sides of `∫ (F∘σ)·G dρ = ∫ F·(LG) dρ` under `r̂`.
    pub fn duality_sides(&self, shift: &MarkovShift, f: &Observable, g: &Observable) -> Result<(f64, f64)> {
        let n = shift.states();
        f.check(n)?;
        g.check(n)?;
        let mut lhs = NeumaierSum::new();
        for (a, b) in shift.edges() {
            for c in (0..n).filter(|&c| shift.allowed(b, c)) {
                lhs.add(f.eval(b, c) * g.eval(a, b) * self.rho_cylinder(&[a, b, c]));
            }
        }
        let lg = transfer_apply(shift, &self.normalized, g)?;
        let rhs = shift
            .edges()
            .map(|(b, c)| f.eval(b, c) * lg[b] * self.rho_cylinder(&[b, c]))
            .collect::<NeumaierSum>()
            .value();
        Ok((lhs.value(), rhs))
    }
}

fn weight_matrix(shift: &MarkovShift, r: &Potential) -> DMatrix<f64> {
    let n = shift.states();
    DMatrix::from_fn(n, n, |a, b| if shift.allowed(a, b) { (-r.at(a, b)).exp() } else { 0.0 })
}

fn perron_vector(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w = m * &v;
        let s = w.sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(SymbolicError::Numeric(String::from("power iteration degenerated")));
        }
        let w = w / s;
        let delta = (&w - &v).amax();
        v = w;
        lambda = s;
        if delta < 1e-15 {
            break;
        }
    }
    // Inverse iteration polish.
    for _ in 0..3 {
        let shifted = m - DMatrix::identity(n, n) * (lambda * (1.0 + 1e-13));
        let Some(w) = shifted.lu().solve(&v) else { break };
        let s = w.sum();
        if !s.is_finite() || s == 0.0 {
            break;
        }
        v = w / s;
        let mv = m * &v;
        lambda = mv.sum() / v.sum();
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(SymbolicError::Numeric(String::from("Perron vector is not positive")));
    }
    Ok((lambda, v))
}

/// Perron–Frobenius data of `L` and the pressure-normalized roof.
pub fn leading_triple(shift: &MarkovShift, r: &Potential) -> Result<GibbsData> {
    if !shift.is_mixing() {
        return Err(SymbolicError::NotMixing);
    }
    let m = weight_matrix(shift, r);
    // L acts on functions of x₀ as Mᵀ; ρ is the right eigenvector of M.
    let (lambda, psi) = perron_vector(&m.transpose())?;
    let (_, rho) = perron_vector(&m)?;
    let rho = &rho / rho.sum();
    let norm = psi.dot(&rho);
    let psi: Vec<f64> = psi.iter().map(|x| x / norm).collect();
    let rho: Vec<f64> = rho.iter().copied().collect();
    let nu = psi.iter().zip(&rho).map(|(a, b)| a * b).collect();
    let normalized = r.shifted(shift, lambda.ln())?;
    Ok(GibbsData { lambda, pressure: lambda.ln(), psi, rho, nu, normalized })
}

/// Leading eigenvalue of the twisted operator with kernel
/// `e^{(−1+iη) r̂(y)} e^{i⟨θ, f(y)⟩}`.
pub fn twisted_spectral_radius(
    shift: &MarkovShift,
    r_hat: &Potential,
    disp: &Displacement,
    theta: &[f64],
    eta: f64,
) -> Result<Complex64> {
    if !shift.is_mixing() {
        return Err(SymbolicError::NotMixing);
    }
    if theta.len() != disp.dim() {
        return Err(SymbolicError::DimensionMismatch(alloc::format!("θ must have length {}", disp.dim())));
    }
    let n = shift.states();
    let m = DMatrix::from_fn(n, n, |a, b| {
        if !shift.allowed(a, b) {
            return Complex64::new(0.0, 0.0);
        }
        let phase: f64 = theta.iter().zip(disp.at(a)).map(|(t, &f)| t * f as f64).sum::<f64>();
        let r = r_hat.at(a, b);
        Complex64::from_polar((-r).exp(), eta * r + phase)
    });
    let eig = m
        .eigenvalues()
        .ok_or_else(|| SymbolicError::Numeric(String::from("complex Schur decomposition did not converge")))?;
    let best = eig
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)))
        .unwrap();
    Ok(best)
}

/// A step function `Σ vᵢ 1_{[loᵢ, hiᵢ]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pieces: Vec<(f64, f64, f64)>,
}

impl Window {
    pub fn new(pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(SymbolicError::InvalidWindow(String::from("no intervals")));
        }
        for &(lo, hi, v) in &pieces {
            if lo.is_nan() || hi.is_nan() || !v.is_finite() {
                return Err(SymbolicError::InvalidWindow(String::from("non-numeric entry")));
            }
            if !lo.is_finite() || !hi.is_finite() {
                return Err(SymbolicError::UnboundedWindow);
            }
            if lo > hi {
                return Err(SymbolicError::InvalidWindow(alloc::format!("interval [{lo}, {hi}] is reversed")));
            }
        }
        Ok(Window { pieces })
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi, 1.0)])
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.pieces.iter().filter(|p| p.0 <= s && s <= p.1).map(|p| p.2).sum()
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.pieces.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = self.pieces.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| (p.1 - p.0) * p.2).sum()
    }

    /// `∫ u(s) w(s + c) ds`.
    pub fn overlap(&self, other: &Window, c: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for &(a0, a1, v) in &self.pieces {
            for &(b0, b1, w) in &other.pieces {
                let len = a1.min(b1 - c) - a0.max(b0 - c);
                if len > 0.0 {
                    acc.add(v * w * len);
                }
            }
        }
        acc.value()
    }
}

/// Options for the path dynamic programme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    pub max_nodes: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { max_nodes: 20_000_000 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Backward,
    Forward,
}

struct PathDp<'a> {
    shift: &'a MarkovShift,
    r: &'a Potential,
    pos: Positivity,
    disp: &'a Displacement,
    class_of: Vec<Vec<usize>>,
    values: Vec<f64>,
}

impl<'a> PathDp<'a> {
    fn new(shift: &'a MarkovShift, r: &'a Potential, disp: &'a Displacement) -> Result<Self> {
        let pos = r.require_positive()?;
        let n = shift.states();
        let mut values: Vec<f64> = Vec::new();
        let mut class_of = vec![vec![usize::MAX; n]; n];
        for (a, b) in shift.edges() {
            let v = r.at(a, b);
            let k = match values.iter().position(|w| w.to_bits() == v.to_bits()) {
                Some(k) => k,
                None => {
                    values.push(v);
                    values.len() - 1
                }
            };
            class_of[a][b] = k;
        }
        Ok(PathDp { shift, r, pos, disp, class_of, values })
    }

    fn roof(&self, counts: &[u32]) -> f64 {
        counts.iter().zip(&self.values).map(|(&c, v)| c as f64 * v).collect::<NeumaierSum>().value()
    }

    /// Longest continuation whose roof can stay at or below `slack`.
    fn max_steps(&self, slack: f64) -> usize {
        let k = self.pos.k;
        if slack < 0.0 {
            return k - 1;
        }
        let blocks = (slack / self.pos.c).floor();
        let m = (2 * k - 1) as f64 * (blocks + 1.0) - 1.0;
        if m > 1e12 {
            usize::MAX
        } else {
            (m as usize).max(k - 1)
        }
    }

    /// Walks every admissible path from the `start` states, stopping once
    /// the accumulated roof exceeds `r_max` for good. `emit` receives the
    /// current state, the exact roof and the summed weight of all paths
    /// with that key whose displacement equals `target`.
    fn run(
        &self,
        dir: Direction,
        start: &[(usize, f64)],
        target: &[i64],
        r_max: f64,
        opts: &DpOptions,
        mut emit: impl FnMut(usize, f64, f64),
    ) -> Result<usize> {
        let n = self.shift.states();
        let fmax = self.disp.step_bound();
        let zero_xi = vec![0i64; self.disp.dim()];
        let zero_counts = vec![0u32; self.values.len()];
        let mut frontier: BTreeMap<(usize, Vec<i64>, Vec<u32>), f64> = BTreeMap::new();
        for &(s, w) in start {
            if w != 0.0 {
                *frontier.entry((s, zero_xi.clone(), zero_counts.clone())).or_insert(0.0) += w;
            }
        }
        let mut nodes = 0usize;
        while !frontier.is_empty() {
            let mut next: BTreeMap<(usize, Vec<i64>, Vec<u32>), f64> = BTreeMap::new();
            for ((s, xi, counts), w) in frontier {
                nodes += 1;
                if nodes > opts.max_nodes {
                    return Err(SymbolicError::BudgetExceeded { nodes });
                }
                let roof = self.roof(&counts);
                if xi.as_slice() == target && roof <= r_max {
                    emit(s, roof, w);
                }
                for m in 0..n {
                    let (edge, fstate) = match dir {
                        Direction::Backward => ((m, s), m),
                        Direction::Forward => ((s, m), s),
                    };
                    if !self.shift.allowed(edge.0, edge.1) {
                        continue;
                    }
                    let class = self.class_of[edge.0][edge.1];
                    let mut c2 = counts.clone();
                    c2[class] += 1;
                    let roof2 = self.roof(&c2);
                    if roof2 - self.pos.undershoot > r_max {
                        continue;
                    }
                    let xi2: Vec<i64> = xi.iter().zip(self.disp.at(fstate)).map(|(a, b)| a + b).collect();
                    let rem = self.max_steps(r_max - roof2);
                    let reach = (fmax as u128).saturating_mul(rem as u128);
                    let far = xi2.iter().zip(target).any(|(a, b)| (a - b).unsigned_abs() as u128 > reach);
                    if far {
                        continue;
                    }
                    let w2 = w * (-self.r.at(edge.0, edge.1)).exp();
                    *next.entry((m, xi2, c2)).or_insert(0.0) += w2;
                }
            }
            frontier = next;
        }
        Ok(nodes)
    }
}

fn check_xi(disp: &Displacement, xi: &[i64]) -> Result<()> {
    if xi.len() != disp.dim() {
        return Err(SymbolicError::DimensionMismatch(alloc::format!("ξ must have length {}", disp.dim())));
    }
    Ok(())
}

fn check_states(shift: &MarkovShift, v: &[f64], what: &str) -> Result<()> {
    if v.len() != shift.states() {
        return Err(SymbolicError::DimensionMismatch(alloc::format!(
            "{what} must have {} entries",
            shift.states()
        )));
    }
    Ok(())
}

/// `Q_t(Φ⊗u)(x, ξ) = Σ_n Σ_{σⁿy=x} e^{-r_n(y)} (Φ·ψ)(y) δ_ξ(f_n(y)) u(r_n(y) − t)`
/// for a state function `Φ`.
#[allow(clippy::too_many_arguments)]
pub fn q_sum(
    shift: &MarkovShift,
    r_hat: &Potential,
    disp: &Displacement,
    psi: &[f64],
    phi: &[f64],
    u: &Window,
    x: usize,
    xi: &[i64],
    t: f64,
    opts: &DpOptions,
) -> Result<f64> {
    Ok(q_spectrum(shift, r_hat, disp, psi, phi, u.support().1 + t, x, xi, opts)?
        .into_iter()
        .map(|(r, w)| w * u.eval(r - t))
        .collect::<NeumaierSum>()
        .value())
}

/// Backward path weights at `x`: pairs `(r_n, Σ e^{-r_n}(Φψ)(y))` over
/// preimages with `f_n(y) = ξ` and `r_n ≤ r_max`, merged by exact roof.
#[allow(clippy::too_many_arguments)]
pub fn q_spectrum(
    shift: &MarkovShift,
    r_hat: &Potential,
    disp: &Displacement,
    psi: &[f64],
    phi: &[f64],
    r_max: f64,
    x: usize,
    xi: &[i64],
    opts: &DpOptions,
) -> Result<Vec<(f64, f64)>> {
    check_xi(disp, xi)?;
    check_states(shift, psi, "ψ")?;
    check_states(shift, phi, "Φ")?;
    if x >= shift.states() {
        return Err(SymbolicError::DimensionMismatch(alloc::format!("state {x} out of range")));
    }
    let dp = PathDp::new(shift, r_hat, disp)?;
    let mut acc: BTreeMap<u64, (f64, NeumaierSum)> = BTreeMap::new();
    dp.run(Direction::Backward, &[(x, 1.0)], xi, r_max, opts, |s, roof, w| {
        let e = acc.entry(roof.to_bits()).or_insert((roof, NeumaierSum::new()));
        e.1.add(w * phi[s] * psi[s]);
    })?;
    let mut out: Vec<(f64, f64)> = acc.into_values().map(|(r, s)| (r, s.value())).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// An element `Φ(x₀) δ_{ξ₀}(ξ) u(s)` of the product family.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductObservable {
    pub phi: Vec<f64>,
    pub xi: Vec<i64>,
    pub u: Window,
}

/// The correlation sum computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPair {
    /// Term-by-term `Σ_n ∫ Ψ₁∘ζ̃ⁿ(x,ξ,s+t) Ψ₂(x,ξ,s) dM̃`.
    pub direct: f64,
    /// `(m0/∫τdν) ∫ Ψ₁(x,ξ,s) Q_{t−s}(Φ₂⊗u₂)(x, ξ−ξ₀) dρ dξ ds`.
    pub unfolded: f64,
}

impl CorrelationPair {
    pub fn relative_gap(&self) -> f64 {
        (self.direct - self.unfolded).abs() / (1.0 + self.direct.abs())
    }
}

/// `I_t(Ψ₁, Ψ₂)` with `dM̃ = (m0/∫r̂dν) dν dξ ds`.
#[allow(clippy::too_many_arguments)]
pub fn i_t(
    shift: &MarkovShift,
    gibbs: &GibbsData,
    disp: &Displacement,
    m0: f64,
    psi1: &ProductObservable,
    psi2: &ProductObservable,
    t: f64,
    opts: &DpOptions,
) -> Result<CorrelationPair> {
    for p in [psi1, psi2] {
        check_xi(disp, &p.xi)?;
        check_states(shift, &p.phi, "Φ")?;
    }
    let r_hat = &gibbs.normalized;
    let scale = m0 / gibbs.mean_roof(shift);
    let delta: Vec<i64> = psi1.xi.iter().zip(&psi2.xi).map(|(a, b)| a - b).collect();
    let (lo1, _) = psi1.u.support();
    let (_, hi2) = psi2.u.support();
    let r_max = t - lo1 + hi2;
    // ∫ u₁(s + t − r_n) u₂(s) ds
    let kernel = |roof: f64| psi2.u.overlap(&psi1.u, t - roof);

    let dp = PathDp::new(shift, r_hat, disp)?;
    let start: Vec<(usize, f64)> =
        (0..shift.states()).map(|a| (a, gibbs.psi[a] * psi2.phi[a])).collect();
    let mut direct = NeumaierSum::new();
    dp.run(Direction::Forward, &start, &delta, r_max, opts, |s, roof, w| {
        direct.add(w * gibbs.rho[s] * psi1.phi[s] * kernel(roof));
    })?;

    let mut unfolded = NeumaierSum::new();
    for x in 0..shift.states() {
        let outer = gibbs.rho[x] * psi1.phi[x];
        if outer == 0.0 {
            continue;
        }
        for (roof, w) in q_spectrum(shift, r_hat, disp, &gibbs.psi, &psi2.phi, r_max, x, &delta, opts)? {
            // ∫ u₁(s) u₂(r_n − t + s) ds
            unfolded.add(outer * w * psi1.u.overlap(&psi2.u, roof - t));
        }
    }
    Ok(CorrelationPair { direct: scale * direct.value(), unfolded: scale * unfolded.value() })
}

/// Output of [`llt_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct LltSeries {
    /// `(t, t^{d/2} Q_t(Φ⊗u)(x, ξ))`.
    pub points: Vec<(f64, f64)>,
    /// Asymptotic covariance of `f_n / √n` from the Hessian of `log|λ(θ,0)|`.
    pub covariance: Vec<Vec<f64>>,
    /// `ν(f)`.
    pub drift: Vec<f64>,
    /// `∫ r̂ dν`.
    pub mean_roof: f64,
    /// `ψ(x) ν(Φ) / ((2π)^{d/2} √det Σ)`: the Gaussian local limit density
    /// per step.
    pub gaussian_density: f64,
    /// Limit of `t^{d/2} Q_t` in continuous time:
    /// `gaussian_density · ∫u · (∫r̂dν)^{d/2 − 1}`.
    pub predicted: f64,
}

/// Largest `|λ(θ,0)|` over a grid of nonzero `θ ∈ (−π, π]^d`.
pub fn periodicity_probe(shift: &MarkovShift, r_hat: &Potential, disp: &Displacement) -> Result<(f64, Vec<f64>)> {
    let d = disp.dim();
    let steps: usize = match d {
        0 => return Ok((0.0, Vec::new())),
        1 => 48,
        2 => 24,
        _ => 12,
    };
    let total = steps.checked_pow(d as u32).unwrap_or(usize::MAX);
    let mut best = (0.0, Vec::new());
    for idx in 1..total {
        let mut k = idx;
        let theta: Vec<f64> = (0..d)
            .map(|_| {
                let j = k % steps;
                k /= steps;
                let v = 2.0 * PI * j as f64 / steps as f64;
                if v > PI {
                    v - 2.0 * PI
                } else {
                    v
                }
            })
            .collect();
        let m = twisted_spectral_radius(shift, r_hat, disp, &theta, 0.0)?.norm();
        if m > best.0 {
            best = (m, theta);
        }
    }
    Ok(best)
}

/// `−∇² log|λ(θ,0)|` at `θ = 0` by central differences.
pub fn covariance(shift: &MarkovShift, r_hat: &Potential, disp: &Displacement) -> Result<Vec<Vec<f64>>> {
    let d = disp.dim();
    let h = 1e-3;
    let ll = |th: &[f64]| -> Result<f64> { Ok(twisted_spectral_radius(shift, r_hat, disp, th, 0.0)?.norm().ln()) };
    let z = vec![0.0; d];
    let f0 = ll(&z)?;
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let at = |si: f64, sj: f64| {
                let mut th = z.clone();
                th[i] += si * h;
                th[j] += sj * h;
                ll(&th)
            };
            let v = if i == j {
                (at(1.0, 0.0)? - 2.0 * f0 + at(-1.0, 0.0)?) / (h * h)
            } else {
                (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * h * h)
            };
            cov[i][j] = -v;
            cov[j][i] = -v;
        }
    }
    Ok(cov)
}

/// `t^{d/2} Q_t(Φ⊗u)(x, ξ)` along `t_grid`, with the Gaussian prediction.
#[allow(clippy::too_many_arguments)]
pub fn llt_series(
    shift: &MarkovShift,
    gibbs: &GibbsData,
    disp: &Displacement,
    phi: &[f64],
    u: &Window,
    t_grid: &[f64],
    x: usize,
    xi: &[i64],
    opts: &DpOptions,
) -> Result<LltSeries> {
    let r_hat = &gibbs.normalized;
    let d = disp.dim();
    let (m, theta) = periodicity_probe(shift, r_hat, disp)?;
    if m > 1.0 - 1e-9 {
        return Err(SymbolicError::PeriodicCocycle { theta });
    }
    let cov = covariance(shift, r_hat, disp)?;
    let det = if d == 0 { 1.0 } else { DMatrix::from_fn(d, d, |i, j| cov[i][j]).determinant() };
    let nu_phi: f64 = gibbs.nu.iter().zip(phi).map(|(a, b)| a * b).sum();
    check_states(shift, phi, "Φ")?;
    let gaussian_density = gibbs.psi[x] * nu_phi / ((2.0 * PI).powf(d as f64 / 2.0) * det.sqrt());
    let mean_roof = gibbs.mean_roof(shift);
    let predicted = gaussian_density * u.integral() * mean_roof.powf(d as f64 / 2.0 - 1.0);
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let q = q_sum(shift, r_hat, disp, &gibbs.psi, phi, u, x, xi, t, opts)?;
        points.push((t, t.powf(d as f64 / 2.0) * q));
    }
    Ok(LltSeries {
        points,
        covariance: cov,
        drift: gibbs.mean_displacement(disp),
        mean_roof,
        gaussian_density,
        predicted,
    })
}
