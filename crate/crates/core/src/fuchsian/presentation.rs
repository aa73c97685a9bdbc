use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
#[allow(unused_imports)]
use num_traits::Float;

use super::word::{Letter, Word};
use super::FuchsianError;
use crate::hyperbolic::{IntMoebius, IsometryClass, Mat2, Point, RealMoebius};

/// A point of `ℝ ∪ {∞}` with rational coordinate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum IdealPoint {
    Infinity,
    Rational { num: i64, den: i64 },
}

impl IdealPoint {
    pub fn rational(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = den.signum();
        Some(IdealPoint::Rational {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub const fn integer(n: i64) -> Self {
        IdealPoint::Rational { num: n, den: 1 }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            IdealPoint::Infinity => None,
            IdealPoint::Rational { num, den } => Some(num as f64 / den as f64),
        }
    }

    /// Homogeneous coordinates `(p, q)` with `q = 0` at infinity.
    pub fn projective(&self) -> (i128, i128) {
        match *self {
            IdealPoint::Infinity => (1, 0),
            IdealPoint::Rational { num, den } => (num as i128, den as i128),
        }
    }
}

impl fmt::Display for IdealPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            IdealPoint::Infinity => f.write_str("inf"),
            IdealPoint::Rational { num, den: 1 } => write!(f, "{}", num),
            IdealPoint::Rational { num, den } => write!(f, "{}/{}", num, den),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// An oriented side of an ideal polygon. The polygon lies to its left,
/// and the tile across it is `pairing · F`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Side {
    pub start: IdealPoint,
    pub end: IdealPoint,
    pub pairing: Word,
}

impl Side {
    pub fn new(start: IdealPoint, end: IdealPoint, pairing: Word) -> Self {
        Self {
            start,
            end,
            pairing,
        }
    }
}

/// Signed `sinh` of the distance from `z` to the oriented geodesic from `u`
/// to `v` (homogeneous coordinates), positive on the left.
#[inline]
fn side_value(u: (f64, f64), v: (f64, f64), z: Point) -> f64 {
    let (p, q) = u;
    let (pp, qq) = v;
    let (x, y) = (z.x(), z.y());
    let num = (q * x - p) * (qq * x - pp) + q * qq * y * y;
    let den = y * (pp * q - p * qq);
    num / den
}

/// Everything needed to describe a group; validated by
/// [`GroupPresentation::new`].
#[derive(Clone, Debug)]
pub struct PresentationSpec {
    pub name: String,
    pub generators: Vec<[i64; 4]>,
    pub cusp_words: Vec<Word>,
    pub genus: usize,
    pub sides: Vec<Side>,
    pub base_point: Option<Point>,
}

/// A free Fuchsian group inside PSL₂(ℤ) with a fundamental ideal polygon.
#[derive(Clone, Debug)]
pub struct GroupPresentation {
    name: String,
    generators: Vec<IntMoebius>,
    gens_small: Vec<[Mat2<i128>; 2]>,
    cusp_words: Vec<Word>,
    genus: usize,
    sides: Vec<Side>,
    side_proj: Vec<((i128, i128), (i128, i128))>,
    side_proj_f: Vec<((f64, f64), (f64, f64))>,
    pair_real: Vec<RealMoebius>,
    pair_real_inv: Vec<RealMoebius>,
    pair_small_inv: Vec<Mat2<i128>>,
    vertices: Vec<IdealPoint>,
    base_point: Point,
    cusp_cutoff: f64,
}

/// Result of moving a point into the fundamental polygon.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// The reduced point `z'`.
    pub point: Point,
    /// `w` with `w·z' = z`.
    pub word: Word,
    /// The real matrix of `w⁻¹`, so that `z' = moved_by · z`.
    pub moved_by: RealMoebius,
}

const DEFAULT_CUSP_CUTOFF: f64 = 1e6;
const INSIDE_TOL: f64 = 1e-12;
const MAX_REDUCTION_STEPS: usize = 1_000_000;

fn invalid(msg: impl Into<String>) -> FuchsianError {
    FuchsianError::InvalidPresentation(msg.into())
}

impl GroupPresentation {
    pub fn new(spec: PresentationSpec) -> Result<Self, FuchsianError> {
        let PresentationSpec {
            name,
            generators,
            cusp_words,
            genus,
            sides,
            base_point,
        } = spec;
        let k = generators.len();
        if k == 0 {
            return Err(invalid("no generators"));
        }
        let mut gens = Vec::with_capacity(k);
        let mut gens_small = Vec::with_capacity(k);
        for (i, e) in generators.iter().enumerate() {
            let m = IntMoebius::new(e[0], e[1], e[2], e[3])
                .map_err(|err| invalid(format!("generator {}: {}", i, err)))?;
            match m.classify() {
                IsometryClass::Parabolic | IsometryClass::Hyperbolic => {}
                c => return Err(invalid(format!("generator {} is {}", i, c))),
            }
            let s = m.to_i128().expect("i64 entries fit");
            let inv = s.inverse_unimodular().expect("i64 entries fit");
            gens.push(m);
            gens_small.push([s, inv]);
        }
        let check_word = |w: &Word, what: &str| -> Result<(), FuchsianError> {
            match w.max_gen() {
                Some(g) if g >= k => Err(invalid(format!(
                    "{} uses generator {} but rank is {}",
                    what,
                    g + 1,
                    k
                ))),
                _ => Ok(()),
            }
        };
        if cusp_words.is_empty() {
            return Err(invalid("at least one cusp word is required"));
        }
        for (j, w) in cusp_words.iter().enumerate() {
            check_word(w, &format!("cusp word {}", j))?;
        }
        for (j, s) in sides.iter().enumerate() {
            check_word(&s.pairing, &format!("pairing of side {}", j))?;
        }

        let mut g = GroupPresentation {
            name,
            generators: gens,
            gens_small,
            cusp_words,
            genus,
            sides: Vec::new(),
            side_proj: Vec::new(),
            side_proj_f: Vec::new(),
            pair_real: Vec::new(),
            pair_real_inv: Vec::new(),
            pair_small_inv: Vec::new(),
            vertices: Vec::new(),
            base_point: Point::origin(),
            cusp_cutoff: DEFAULT_CUSP_CUTOFF,
        };

        for (j, w) in g.cusp_words.iter().enumerate() {
            let c = g.evaluate(w).classify();
            if c != IsometryClass::Parabolic {
                return Err(invalid(format!("cusp word {} ({}) is {}", j, w, c)));
            }
        }
        let product = g
            .cusp_words
            .iter()
            .fold(Word::identity(), |acc, w| acc.mul(w));
        let mut relation = Word::identity();
        for i in 0..genus {
            let (x, y) = (2 * i, 2 * i + 1);
            if y >= k {
                return Err(invalid(format!("genus {} needs at least {} generators", genus, 2 * genus)));
            }
            relation = relation.mul(&Word::new([
                Letter::new(x, false),
                Letter::new(y, false),
                Letter::new(x, true),
                Letter::new(y, true),
            ]));
        }
        if product != relation {
            return Err(invalid(format!(
                "product of cusp words is {} but the surface relation is {}",
                product, relation
            )));
        }
        let chi = 2 * genus as i64 - 2 + g.cusp_words.len() as i64;
        if chi <= 0 {
            return Err(invalid("surface must have negative Euler characteristic"));
        }
        let expected_rank = 2 * genus + g.cusp_words.len() - 1;
        if k != expected_rank {
            return Err(invalid(format!(
                "a genus {} surface with {} cusps has free rank {}, got {}",
                genus,
                g.cusp_words.len(),
                expected_rank,
                k
            )));
        }

        g.set_polygon(sides)?;
        g.base_point = match base_point {
            Some(p) => {
                if g.min_side_value(p) <= 0.0 {
                    return Err(invalid(format!("base point {} is not interior", p)));
                }
                p
            }
            None => g.find_interior_point()?,
        };
        Ok(g)
    }

    fn set_polygon(&mut self, sides: Vec<Side>) -> Result<(), FuchsianError> {
        let n = sides.len();
        let expected = 4 * self.genus + 2 * self.cusp_words.len() - 2;
        if n != expected {
            return Err(invalid(format!(
                "an ideal polygon for this surface has {} sides, got {}",
                expected, n
            )));
        }
        for (j, s) in sides.iter().enumerate() {
            if s.start == s.end {
                return Err(invalid(format!("side {} is degenerate", j)));
            }
            let next = &sides[(j + 1) % n];
            if s.end != next.start {
                return Err(invalid(format!("side {} does not end where side {} starts", j, (j + 1) % n)));
            }
        }
        self.side_proj = sides
            .iter()
            .map(|s| (s.start.projective(), s.end.projective()))
            .collect();
        self.side_proj_f = self
            .side_proj
            .iter()
            .map(|&((p, q), (pp, qq))| ((p as f64, q as f64), (pp as f64, qq as f64)))
            .collect();
        self.vertices = sides.iter().map(|s| s.start).collect();

        let mut pair_real = Vec::with_capacity(n);
        let mut pair_real_inv = Vec::with_capacity(n);
        let mut pair_small_inv = Vec::with_capacity(n);
        for (j, s) in sides.iter().enumerate() {
            let m = self.evaluate(&s.pairing);
            let small = m
                .to_i128()
                .ok_or_else(|| invalid(format!("pairing of side {} is too large", j)))?;
            let partner = sides
                .iter()
                .position(|t| {
                    maps_to(&small, t.start.projective(), s.end.projective())
                        && maps_to(&small, t.end.projective(), s.start.projective())
                })
                .ok_or_else(|| {
                    invalid(format!("pairing {} of side {} maps no side onto it", s.pairing, j))
                })?;
            if partner == j {
                return Err(invalid(format!("side {} is paired with itself", j)));
            }
            if sides[partner].pairing != s.pairing.inverse() {
                return Err(invalid(format!(
                    "sides {} and {} have pairings {} and {}, which are not inverse",
                    j, partner, s.pairing, sides[partner].pairing
                )));
            }
            let real = m.to_real();
            let (u, v) = self.side_proj_f[j];
            for z in sample_geodesic(sides[partner].start, sides[partner].end) {
                let e = side_value(u, v, real.apply(z));
                if !(e.abs() < 1e-9) {
                    return Err(invalid(format!(
                        "pairing of side {} misses its side by {:e} at {}",
                        j, e, z
                    )));
                }
            }
            pair_small_inv.push(small.inverse_unimodular().expect("fits"));
            pair_real_inv.push(real.inverse());
            pair_real.push(real);
        }
        let pairing_words: Vec<Word> = sides.iter().map(|s| s.pairing.clone()).collect();
        if !generates_free_group(&pairing_words, self.rank()) {
            return Err(invalid("side pairings do not generate the group"));
        }
        self.sides = sides;
        self.pair_real = pair_real;
        self.pair_real_inv = pair_real_inv;
        self.pair_small_inv = pair_small_inv;
        Ok(())
    }

    fn min_side_value(&self, z: Point) -> f64 {
        self.side_proj_f
            .iter()
            .map(|&(u, v)| side_value(u, v, z))
            .fold(f64::INFINITY, f64::min)
    }

    fn find_interior_point(&self) -> Result<Point, FuchsianError> {
        let finite: Vec<f64> = self.vertices.iter().filter_map(|v| v.value()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
        let mut best = (f64::NEG_INFINITY, Point::origin());
        let nx = 64;
        let ny = 64;
        for i in 0..=nx {
            let x = lo + (hi - lo) * i as f64 / nx as f64;
            for j in 0..=ny {
                let y = 10f64.powf(-3.0 + 6.0 * j as f64 / ny as f64);
                let z = Point::new(x, y).expect("positive height");
                let v = self.min_side_value(z);
                if v > best.0 {
                    best = (v, z);
                }
            }
        }
        if best.0 > 0.0 {
            Ok(best.1)
        } else {
            Err(invalid("polygon has empty interior"))
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of free generators.
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[IntMoebius] {
        &self.generators
    }

    pub(crate) fn generators_small(&self) -> &[[Mat2<i128>; 2]] {
        &self.gens_small
    }

    pub fn cusp_words(&self) -> &[Word] {
        &self.cusp_words
    }

    pub fn cusp_count(&self) -> usize {
        self.cusp_words.len()
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// `2g − 2 + #cusps`, minus the Euler characteristic.
    pub fn euler_defect(&self) -> usize {
        2 * self.genus + self.cusp_words.len() - 2
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn vertices(&self) -> &[IdealPoint] {
        &self.vertices
    }

    pub fn base_point(&self) -> Point {
        self.base_point
    }

    pub fn cusp_cutoff(&self) -> f64 {
        self.cusp_cutoff
    }

    pub fn with_cusp_cutoff(mut self, height: f64) -> Self {
        self.cusp_cutoff = height;
        self
    }

    pub fn evaluate(&self, w: &Word) -> IntMoebius {
        let mut m = IntMoebius::identity();
        for l in w.letters() {
            let g = &self.generators[l.gen()];
            m = if l.is_inverse() {
                m.compose(&g.inverse())
            } else {
                m.compose(g)
            };
        }
        m
    }

    /// Fast evaluation; `None` on `i128` overflow.
    pub fn evaluate_small(&self, w: &Word) -> Option<Mat2<i128>> {
        let mut m = Mat2::<i128>::identity();
        for l in w.letters() {
            m = m.mul(&self.gens_small[l.gen()][l.is_inverse() as usize])?;
        }
        m.canonical_sign()
    }

    /// Signed `sinh` distance from `z` to side `j`, positive inside.
    pub fn side_value(&self, j: usize, z: Point) -> f64 {
        let (u, v) = self.side_proj_f[j];
        side_value(u, v, z)
    }

    pub fn contains(&self, z: Point, tol: f64) -> bool {
        self.min_side_value(z) >= -tol
    }

    /// Largest horoball height of `z` over the polygon's vertices.
    pub fn cusp_height(&self, z: Point) -> f64 {
        self.vertices
            .iter()
            .map(|v| match v.value() {
                None => z.y(),
                Some(c) => {
                    let dx = z.x() - c;
                    z.y() / (dx * dx + z.y() * z.y())
                }
            })
            .fold(0.0, f64::max)
    }

    fn most_violated(&self, z: Point) -> Option<usize> {
        let mut best = (-INSIDE_TOL, None);
        for (j, &(u, v)) in self.side_proj_f.iter().enumerate() {
            let s = side_value(u, v, z);
            if s < best.0 {
                best = (s, Some(j));
            }
        }
        best.1
    }

    /// Moves `z` into the closed fundamental polygon.
    pub fn reduce_point(&self, z: Point) -> Result<Reduction, FuchsianError> {
        let mut cur = z;
        let mut word = Word::identity();
        let mut moved = RealMoebius::identity();
        let mut steps = 0;
        while let Some(j) = self.most_violated(cur) {
            let inv = &self.pair_real_inv[j];
            cur = inv.apply(cur);
            moved = inv.compose(&moved);
            word = word.mul(&self.sides[j].pairing);
            steps += 1;
            if steps > MAX_REDUCTION_STEPS {
                return Err(FuchsianError::CuspEscape {
                    height: self.cusp_height(cur),
                });
            }
        }
        let height = self.cusp_height(cur);
        if height > self.cusp_cutoff {
            return Err(FuchsianError::CuspEscape { height });
        }
        Ok(Reduction {
            point: cur,
            word,
            moved_by: moved,
        })
    }

    /// Finds the word of an integer matrix lying in the group, or `None`
    /// if the matrix is not in the group. The side choices are guided by
    /// floating point but every update is exact, and the answer is
    /// verified exactly.
    pub fn solve_word(&self, m: &Mat2<i128>) -> Option<Word> {
        let z0 = self.base_point;
        let mut cur = m.clone();
        let mut word = Word::identity();
        for _ in 0..MAX_REDUCTION_STEPS {
            let inv = cur.inverse_unimodular()?;
            let mut best = (-INSIDE_TOL, None);
            for (j, &(u, v)) in self.side_proj.iter().enumerate() {
                let u2 = apply_projective(&inv, u)?;
                let v2 = apply_projective(&inv, v)?;
                let s = side_value(
                    (u2.0 as f64, u2.1 as f64),
                    (v2.0 as f64, v2.1 as f64),
                    z0,
                );
                if s < best.0 {
                    best = (s, Some(j));
                }
            }
            match best.1 {
                None => {
                    return if cur.is_plus_minus_identity() {
                        Some(word)
                    } else {
                        None
                    };
                }
                Some(j) => {
                    cur = self.pair_small_inv[j].mul(&cur)?;
                    word = word.mul(&self.sides[j].pairing);
                }
            }
        }
        None
    }

    pub fn contains_matrix(&self, m: &Mat2<i128>) -> bool {
        self.solve_word(m).is_some()
    }

    pub fn gamma2() -> Self {
        let w = |s: &str| Word::parse(s).expect("static word");
        let inf = IdealPoint::Infinity;
        let n = IdealPoint::integer;
        Self::new(PresentationSpec {
            name: "gamma2".to_string(),
            generators: alloc::vec![[1, 2, 0, 1], [1, 0, 2, 1]],
            cusp_words: alloc::vec![w("a"), w("B"), w("bA")],
            genus: 0,
            sides: alloc::vec![
                Side::new(inf, n(-1), w("A")),
                Side::new(n(-1), n(0), w("B")),
                Side::new(n(0), n(1), w("b")),
                Side::new(n(1), inf, w("a")),
            ],
            base_point: None,
        })
        .expect("gamma2 preset is valid")
    }

    pub fn punctured_torus() -> Self {
        let w = |s: &str| Word::parse(s).expect("static word");
        let inf = IdealPoint::Infinity;
        let n = IdealPoint::integer;
        Self::new(PresentationSpec {
            name: "punctured_torus".to_string(),
            generators: alloc::vec![[1, 1, 1, 2], [1, -1, -1, 2]],
            cusp_words: alloc::vec![w("abAB")],
            genus: 1,
            sides: alloc::vec![
                Side::new(inf, n(-1), w("A")),
                Side::new(n(-1), n(0), w("b")),
                Side::new(n(0), n(1), w("a")),
                Side::new(n(1), inf, w("B")),
            ],
            base_point: None,
        })
        .expect("punctured torus preset is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "gamma2" => Some(Self::gamma2()),
            "punctured_torus" => Some(Self::punctured_torus()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["gamma2", "punctured_torus"]
    }
}

fn apply_projective(m: &Mat2<i128>, (p, q): (i128, i128)) -> Option<(i128, i128)> {
    Some((
        m.a.checked_mul(p)?.checked_add(m.b.checked_mul(q)?)?,
        m.c.checked_mul(p)?.checked_add(m.d.checked_mul(q)?)?,
    ))
}

fn maps_to(m: &Mat2<i128>, from: (i128, i128), to: (i128, i128)) -> bool {
    let Some((p, q)) = apply_projective(m, from) else {
        return false;
    };
    let lhs = BigInt::from(p) * BigInt::from(to.1);
    let rhs = BigInt::from(q) * BigInt::from(to.0);
    lhs == rhs
}

fn sample_geodesic(u: IdealPoint, v: IdealPoint) -> Vec<Point> {
    let mut out = Vec::new();
    match (u.value(), v.value()) {
        (Some(a), Some(b)) => {
            let m = 0.5 * (a + b);
            let r = 0.5 * (a - b).abs();
            for i in 1..8 {
                let th = core::f64::consts::PI * i as f64 / 8.0;
                out.push(Point::new(m + r * th.cos(), r * th.sin()).expect("on arc"));
            }
        }
        (Some(c), None) | (None, Some(c)) => {
            for i in -3..4 {
                out.push(Point::new(c, 2f64.powi(i)).expect("positive"));
            }
        }
        (None, None) => {}
    }
    out
}

/// Stallings folding: do the words generate the whole free group?
pub fn generates_free_group(words: &[Word], rank: usize) -> bool {
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut n = 1;
    for w in words {
        let letters = w.letters();
        let mut cur = 0;
        for (i, l) in letters.iter().enumerate() {
            let next = if i + 1 == letters.len() {
                0
            } else {
                n += 1;
                n - 1
            };
            if l.is_inverse() {
                edges.push((next, l.gen(), cur));
            } else {
                edges.push((cur, l.gen(), next));
            }
            cur = next;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    loop {
        let mut merged = false;
        let mut seen: alloc::collections::BTreeMap<(usize, usize, bool), usize> =
            alloc::collections::BTreeMap::new();
        for &(a, g, b) in &edges {
            let (a, b) = (find(&mut parent, a), find(&mut parent, b));
            for (key, target) in [((a, g, false), b), ((b, g, true), a)] {
                match seen.get(&key) {
                    Some(&t) => {
                        let t = find(&mut parent, t);
                        if t != target {
                            parent[t.max(target)] = t.min(target);
                            merged = true;
                        }
                    }
                    None => {
                        seen.insert(key, target);
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }
    let roots: BTreeSet<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    if roots.len() != 1 {
        return false;
    }
    let labels: BTreeSet<usize> = edges.iter().map(|e| e.1).collect();
    (0..rank).all(|g| labels.contains(&g))
}
