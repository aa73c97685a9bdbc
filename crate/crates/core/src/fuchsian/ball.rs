//! Enumeration of the orbit ball `{γ : d(x, γy) < T}`.
//!
//! Elements are generated in syllable form `g_{i₁}^{n₁}⋯g_{i_m}^{n_m}` by a
//! depth-first search. A prefix is expanded while `cosh d(x, prefix·y)` stays
//! below `cosh(T + κ)`. Along a syllable the map `n ↦ cosh d(x, P g^n y)` is a
//! sum of exponentials (or a quadratic for parabolic `g`), hence convex, so the
//! exponent scan stops once the value is above the threshold and rising.
//!
//! The margin is only meaningful for base points near the fundamental
//! polygon, so `x = u x'` and `y = w y'` are first reduced into it and the
//! search runs on `(x', y')`; each element `γ'` found there is reported as
//! `γ = u γ' w⁻¹`.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
#[allow(unused_imports)]
use num_traits::Float;

use super::word::{Letter, Word};
use super::{FuchsianError, GroupPresentation};
use crate::hyperbolic::{ExactInt, IntMoebius, Mat2, Point, RealMoebius};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallOptions {
    /// Backtracking margin κ.
    pub kappa: f64,
    /// Largest admissible radius.
    pub t_max: f64,
    /// Cap on the number of matrices formed.
    pub node_budget: u64,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self {
            kappa: 4.0,
            t_max: 40.0,
            node_budget: 20_000_000_000,
        }
    }
}

/// One element of the ball, borrowed from the search stack.
pub struct BallVisit<'a> {
    letters: &'a [Letter],
    abelian: &'a [i64],
    cosh_dist: f64,
    matrix: MatRef<'a>,
}

enum MatRef<'a> {
    Small(&'a Mat2<i128>),
    Big(&'a Mat2<BigInt>),
}

impl<'a> BallVisit<'a> {
    pub fn letters(&self) -> &[Letter] {
        self.letters
    }

    pub fn word(&self) -> Word {
        Word::new(self.letters.iter().copied())
    }

    /// Exponent sums of the word.
    pub fn abelian(&self) -> &[i64] {
        self.abelian
    }

    pub fn cosh_dist(&self) -> f64 {
        self.cosh_dist
    }

    pub fn dist(&self) -> f64 {
        self.cosh_dist.max(1.0).acosh()
    }

    pub fn matrix(&self) -> IntMoebius {
        match self.matrix {
            MatRef::Small(m) => IntMoebius::from_mat_unchecked(m),
            MatRef::Big(m) => IntMoebius::from_mat_unchecked(m),
        }
    }
}

/// An owned ball element.
#[derive(Clone, Debug, PartialEq)]
pub struct BallEntry {
    pub word: Word,
    pub matrix: IntMoebius,
    pub dist: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BallStats {
    pub nodes: u64,
    pub elements: u64,
}

trait BallInt: ExactInt + Send + Sync {
    fn mat_ref(m: &Mat2<Self>) -> MatRef<'_>;
    fn from_small(m: &Mat2<i128>) -> Mat2<Self>;
}

impl BallInt for i128 {
    fn mat_ref(m: &Mat2<Self>) -> MatRef<'_> {
        MatRef::Small(m)
    }
    fn from_small(m: &Mat2<i128>) -> Mat2<Self> {
        m.clone()
    }
}

impl BallInt for BigInt {
    fn mat_ref(m: &Mat2<Self>) -> MatRef<'_> {
        MatRef::Big(m)
    }
    fn from_small(m: &Mat2<i128>) -> Mat2<Self> {
        m.to_bigint()
    }
}

#[derive(Clone, Copy)]
enum Metric {
    /// `x = y = i`: `2 cosh d = ‖γ‖²` exactly.
    Origin,
    General { left: RealMoebius, right: RealMoebius },
}

impl Metric {
    #[inline]
    fn cosh<E: ExactInt>(&self, m: &Mat2<E>) -> f64 {
        match self {
            Metric::Origin => match m.frobenius_sq() {
                Some(f) => f.as_f64() / 2.0,
                None => f64::INFINITY,
            },
            Metric::General { left, right } => {
                let [a, b, c, d] = m.to_f64();
                let g = RealMoebius::from_raw([a, b, c, d]);
                (left.compose(&g).compose(right).frobenius_sq() / 2.0).max(1.0)
            }
        }
    }
}

struct Search<'a, E: BallInt> {
    gens: Vec<[Mat2<E>; 2]>,
    metric: Metric,
    cosh_t: f64,
    cosh_prune: f64,
    budget: u64,
    counter: &'a AtomicU64,
    local: u64,
    letters: Vec<Letter>,
    abelian: Vec<i64>,
}

const FLUSH: u64 = 1 << 14;

impl<'a, E: BallInt> Search<'a, E> {
    fn new(
        g: &GroupPresentation,
        metric: Metric,
        t: f64,
        opts: &BallOptions,
        counter: &'a AtomicU64,
    ) -> Self {
        Search {
            gens: g
                .generators_small()
                .iter()
                .map(|[a, b]| [E::from_small(a), E::from_small(b)])
                .collect(),
            metric,
            cosh_t: if t > 0.0 { t.cosh() } else { 0.0 },
            cosh_prune: (t + opts.kappa).max(0.0).cosh(),
            budget: opts.node_budget,
            counter,
            local: 0,
            letters: Vec::new(),
            abelian: alloc::vec![0; g.rank()],
        }
    }

    fn flush_checked(&mut self) -> Result<(), FuchsianError> {
        let total = self.counter.fetch_add(self.local, Ordering::Relaxed) + self.local;
        self.local = 0;
        if total > self.budget {
            return Err(FuchsianError::BudgetExceeded {
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn flush(&mut self) {
        self.counter.fetch_add(self.local, Ordering::Relaxed);
        self.local = 0;
    }

    /// Scans the syllables `g_j^{±n}` after `p`. Children inside the pruning
    /// radius are searched depth first, or queued in `roots` when `recurse`
    /// is false. Parabolic words such as `(ab⁻¹)^n` can have thousands of
    /// syllables, so the search keeps an explicit stack.
    fn scan<V: FnMut(&BallVisit)>(
        &mut self,
        p: &Mat2<E>,
        f_p: f64,
        last: Option<usize>,
        visit: &mut V,
        recurse: bool,
        roots: &mut Vec<RootTask<E>>,
    ) -> Result<(), FuchsianError> {
        let k = self.gens.len();
        let mut stack = alloc::vec![Frame::new(p.clone(), f_p, last)];
        while let Some(top) = stack.last_mut() {
            if top.n == 0 && !top.started {
                // Move to the next admissible syllable, or finish the frame.
                while top.slot < 2 * k && Some(top.slot / 2) == top.last {
                    top.slot += 1;
                }
                if top.slot == 2 * k {
                    stack.pop();
                    continue;
                }
                top.q = top.p.clone();
                top.prev = top.f_p;
                top.started = true;
            }
            let j = top.slot / 2;
            let inv = top.slot % 2 == 1;
            let letter = Letter::new(j, inv);
            let next = top.q.mul(&self.gens[j][inv as usize]);
            let stop = match next {
                None => {
                    debug_assert!(false, "integer overflow in ball search");
                    true
                }
                Some(q) => {
                    top.q = q;
                    top.n += 1;
                    self.letters.push(letter);
                    self.abelian[j] += letter.sign();
                    self.local += 1;
                    if self.local >= FLUSH {
                        self.flush_checked()?;
                    }
                    let f = self.metric.cosh(&top.q);
                    if f < self.cosh_t {
                        visit(&BallVisit {
                            letters: &self.letters,
                            abelian: &self.abelian,
                            cosh_dist: f,
                            matrix: E::mat_ref(&top.q),
                        });
                    }
                    let stop = f > self.cosh_prune && f >= top.prev;
                    top.prev = f;
                    if f <= self.cosh_prune {
                        if recurse {
                            let child = Frame::new(top.q.clone(), f, Some(j));
                            stack.push(child);
                        } else {
                            roots.push(RootTask {
                                m: top.q.clone(),
                                f,
                                gen: j,
                                letters: self.letters.clone(),
                            });
                        }
                    }
                    stop
                }
            };
            if stop {
                let top = stack.last_mut().expect("frame present");
                let n = top.n;
                self.letters.truncate(self.letters.len() - n);
                self.abelian[j] -= letter.sign() * n as i64;
                top.n = 0;
                top.started = false;
                top.slot += 1;
            }
        }
        Ok(())
    }
}

struct Frame<E> {
    p: Mat2<E>,
    f_p: f64,
    last: Option<usize>,
    /// `2·generator + inverse` of the syllable being scanned.
    slot: usize,
    started: bool,
    n: usize,
    q: Mat2<E>,
    prev: f64,
}

impl<E: ExactInt> Frame<E> {
    fn new(p: Mat2<E>, f_p: f64, last: Option<usize>) -> Self {
        Frame {
            q: p.clone(),
            p,
            f_p,
            last,
            slot: 0,
            started: false,
            n: 0,
            prev: f_p,
        }
    }
}

struct RootTask<E> {
    m: Mat2<E>,
    f: f64,
    gen: usize,
    letters: Vec<Letter>,
}

fn check_radius(t: f64, opts: &BallOptions) -> Result<(), FuchsianError> {
    if !(t <= opts.t_max) {
        return Err(FuchsianError::RadiusTooLarge {
            requested: t,
            max: opts.t_max,
        });
    }
    Ok(())
}

/// Translation data for base points outside the polygon.
struct Anchor {
    left: Word,
    right: Word,
    left_m: IntMoebius,
    right_m: IntMoebius,
    shift: Vec<i64>,
}

impl Anchor {
    fn new(g: &GroupPresentation, x: Point, y: Point) -> Result<(Point, Point, Option<Self>), FuchsianError> {
        let rx = g.reduce_point(x)?;
        let ry = g.reduce_point(y)?;
        if rx.word.is_empty() && ry.word.is_empty() {
            return Ok((x, y, None));
        }
        let right = ry.word.inverse();
        let mut shift = rx.word.abelianize(g.rank());
        for (s, r) in shift.iter_mut().zip(right.abelianize(g.rank())) {
            *s += r;
        }
        let anchor = Anchor {
            left_m: g.evaluate(&rx.word),
            right_m: g.evaluate(&right),
            left: rx.word,
            right,
            shift,
        };
        Ok((rx.point, ry.point, Some(anchor)))
    }

    /// Reports `u γ' w⁻¹` for the element `γ'` found at the reduced points.
    fn forward(&self, b: &BallVisit, f: impl FnOnce(&BallVisit)) {
        let word = self.left.mul(&b.word()).mul(&self.right);
        let abelian: Vec<i64> = b.abelian.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        let m = self.left_m.compose(&b.matrix()).compose(&self.right_m);
        f(&BallVisit {
            letters: word.letters(),
            abelian: &abelian,
            cosh_dist: b.cosh_dist,
            matrix: MatRef::Big(m.entries()),
        })
    }
}

fn metric_for(x: Point, y: Point) -> Metric {
    if x == Point::origin() && y == Point::origin() {
        Metric::Origin
    } else {
        Metric::General {
            left: x.section().inverse(),
            right: y.section(),
        }
    }
}

/// Whether `i128` arithmetic provably cannot overflow during the search.
fn fits_i128(g: &GroupPresentation, x: Point, y: Point, t: f64, kappa: f64) -> bool {
    let gmax = g
        .generators()
        .iter()
        .map(|m| m.to_real().frobenius_sq())
        .fold(2.0, f64::max);
    let cx = x.section().frobenius_sq();
    let cy = y.section().frobenius_sq();
    let log_bound = (t + kappa).max(0.0) + 1.0 + cx.ln() + cy.ln() + 2.0 * gmax.ln();
    log_bound < 36.0 * core::f64::consts::LN_10
}

/// Runs `visit` on every element, possibly in parallel over root subtrees,
/// and merges the per-subtree accumulators in a fixed order. Returns the
/// accumulator and the number of matrices formed.
pub fn fold_ball<A, I, V, M>(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
    init: I,
    visit: V,
    merge: M,
) -> Result<(A, u64), FuchsianError>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, &BallVisit) + Sync + Send,
    M: Fn(A, A) -> A,
{
    check_radius(t, opts)?;
    let (x, y, anchor) = Anchor::new(g, x, y)?;
    match anchor {
        None => fold_dispatch(g, x, y, t, opts, init, visit, merge),
        Some(a) => fold_dispatch(
            g,
            x,
            y,
            t,
            opts,
            init,
            |acc: &mut A, b: &BallVisit| a.forward(b, |v| visit(acc, v)),
            merge,
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn fold_dispatch<A, I, V, M>(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
    init: I,
    visit: V,
    merge: M,
) -> Result<(A, u64), FuchsianError>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, &BallVisit) + Sync + Send,
    M: Fn(A, A) -> A,
{
    if fits_i128(g, x, y, t, opts.kappa) {
        fold_ball_in::<i128, _, _, _, _>(g, x, y, t, opts, init, visit, merge)
    } else {
        fold_ball_in::<BigInt, _, _, _, _>(g, x, y, t, opts, init, visit, merge)
    }
}

#[allow(clippy::too_many_arguments)]
fn fold_ball_in<E, A, I, V, M>(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
    init: I,
    visit: V,
    merge: M,
) -> Result<(A, u64), FuchsianError>
where
    E: BallInt,
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, &BallVisit) + Sync + Send,
    M: Fn(A, A) -> A,
{
    let counter = AtomicU64::new(0);
    let metric = metric_for(x, y);

    let mut acc = init();
    let mut roots = Vec::new();
    {
        let mut s = Search::<E>::new(g, metric, t, opts, &counter);
        let id = Mat2::<E>::identity();
        let f0 = metric.cosh(&id);
        if f0 < s.cosh_t {
            let ab = s.abelian.clone();
            visit(
                &mut acc,
                &BallVisit {
                    letters: &[],
                    abelian: &ab,
                    cosh_dist: f0,
                    matrix: E::mat_ref(&id),
                },
            );
        }
        s.scan(&id, f0, None, &mut |b: &BallVisit| visit(&mut acc, b), false, &mut roots)?;
        s.flush();
    }

    let run = |task: &RootTask<E>| -> Result<A, FuchsianError> {
        let mut part = init();
        let mut s = Search::<E>::new(g, metric, t, opts, &counter);
        for l in &task.letters {
            s.abelian[l.gen()] += l.sign();
        }
        s.letters = task.letters.clone();
        let mut none = Vec::new();
        let r = s.scan(
            &task.m,
            task.f,
            Some(task.gen),
            &mut |b: &BallVisit| visit(&mut part, b),
            true,
            &mut none,
        );
        s.flush();
        r.map(|_| part)
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<A, FuchsianError>> = {
        use rayon::prelude::*;
        roots.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<A, FuchsianError>> = roots.iter().map(run).collect();

    for p in parts {
        acc = merge(acc, p?);
    }
    let nodes = counter.load(Ordering::Relaxed);
    if nodes > opts.node_budget {
        return Err(FuchsianError::BudgetExceeded {
            budget: opts.node_budget,
        });
    }
    Ok((acc, nodes))
}

/// Sequential streaming enumeration.
pub fn visit_ball<F: FnMut(&BallVisit)>(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
    mut f: F,
) -> Result<BallStats, FuchsianError> {
    check_radius(t, opts)?;
    let (x, y, anchor) = Anchor::new(g, x, y)?;
    let counter = AtomicU64::new(0);
    let mut elements = 0u64;
    let mut wrapped = |b: &BallVisit| {
        elements += 1;
        match &anchor {
            None => f(b),
            Some(a) => a.forward(b, &mut f),
        }
    };
    if fits_i128(g, x, y, t, opts.kappa) {
        visit_in::<i128, _>(g, x, y, t, opts, &counter, &mut wrapped)?;
    } else {
        visit_in::<BigInt, _>(g, x, y, t, opts, &counter, &mut wrapped)?;
    }
    Ok(BallStats {
        nodes: counter.load(Ordering::Relaxed),
        elements,
    })
}

fn visit_in<E: BallInt, F: FnMut(&BallVisit)>(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
    counter: &AtomicU64,
    f: &mut F,
) -> Result<(), FuchsianError> {
    let metric = metric_for(x, y);
    let mut s = Search::<E>::new(g, metric, t, opts, counter);
    let id = Mat2::<E>::identity();
    let f0 = metric.cosh(&id);
    if f0 < s.cosh_t {
        let ab = s.abelian.clone();
        f(&BallVisit {
            letters: &[],
            abelian: &ab,
            cosh_dist: f0,
            matrix: E::mat_ref(&id),
        });
    }
    let mut none = Vec::new();
    let r = s.scan(&id, f0, None, f, true, &mut none);
    s.flush();
    r?;
    if counter.load(Ordering::Relaxed) > opts.node_budget {
        return Err(FuchsianError::BudgetExceeded {
            budget: opts.node_budget,
        });
    }
    Ok(())
}

/// Collects the ball, sorted by distance and then by word.
pub fn enumerate_ball(
    g: &GroupPresentation,
    x: Point,
    y: Point,
    t: f64,
    opts: &BallOptions,
) -> Result<Vec<BallEntry>, FuchsianError> {
    let mut out = Vec::new();
    visit_ball(g, x, y, t, opts, |b| {
        out.push(BallEntry {
            word: b.word(),
            matrix: b.matrix(),
            dist: b.dist(),
        })
    })?;
    out.sort_by(|a, b| a.dist.total_cmp(&b.dist).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}
