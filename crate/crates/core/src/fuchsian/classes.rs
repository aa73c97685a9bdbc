//! Hyperbolic conjugacy classes of a finite-index subgroup Γ₀ of PSL₂(ℤ).
//!
//! Every hyperbolic class of PSL₂(ℤ) contains a product
//! `R^{x₁}L^{y₁}⋯R^{x_n}L^{y_n}` with all exponents positive, unique up to
//! cyclic rotation of the pairs `(x_i, y_i)`. Primitive classes are Lyndon
//! words over these pairs; their traces grow monotonically along prefixes,
//! which bounds the search.
//!
//! For `M` in PSL₂(ℤ), the Γ₀-classes inside its PSL₂(ℤ)-class correspond to
//! orbits of the centralizer `⟨M₀⟩` (`M₀` the primitive root) on the right
//! cosets `Γ₀g` fixed by `M`. Cosets are found by breadth-first search and
//! right multiplication by `R`, `L` is tabulated as permutations.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::word::Word;
use super::{FuchsianError, GroupPresentation};
use crate::hyperbolic::{length_from_trace, Mat2};

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugacyClass {
    /// Least rotation of the cyclically reduced word.
    pub necklace: Word,
    /// `|trace|`.
    pub trace: i128,
    pub length: f64,
    pub primitive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassOptions {
    pub l_max: f64,
    /// Cap on the number of necklace search nodes.
    pub node_budget: u64,
}

impl Default for ClassOptions {
    fn default() -> Self {
        Self {
            l_max: 40.0,
            node_budget: 10_000_000_000,
        }
    }
}

/// Right cosets of Γ₀ in PSL₂(ℤ).
#[derive(Clone, Debug)]
pub struct ModularCosets {
    reps: Vec<Mat2<i128>>,
    r_pows: Vec<Vec<u32>>,
    l_pows: Vec<Vec<u32>>,
}

fn r_mat() -> Mat2<i128> {
    Mat2::new(1, 1, 0, 1)
}

fn l_mat() -> Mat2<i128> {
    Mat2::new(1, 0, 1, 1)
}

fn s_mat() -> Mat2<i128> {
    Mat2::new(0, -1, 1, 0)
}

impl ModularCosets {
    pub fn new(g: &GroupPresentation) -> Result<Self, FuchsianError> {
        let expected = 6 * g.euler_defect();
        let mut reps: Vec<Mat2<i128>> = alloc::vec![Mat2::identity()];
        let find = |reps: &[Mat2<i128>], m: &Mat2<i128>| -> Option<usize> {
            reps.iter().position(|r| {
                r.inverse_unimodular()
                    .and_then(|ri| m.mul(&ri))
                    .map(|x| g.contains_matrix(&x))
                    .unwrap_or(false)
            })
        };
        let mut head = 0;
        while head < reps.len() {
            for h in [s_mat(), r_mat()] {
                let c = reps[head].mul(&h).ok_or(FuchsianError::InvalidPresentation(
                    "coset representative overflow".into(),
                ))?;
                if find(&reps, &c).is_none() {
                    reps.push(c);
                    if reps.len() > expected {
                        return Err(FuchsianError::InvalidPresentation(alloc::format!(
                            "group has index above {} in PSL2(Z)",
                            expected
                        )));
                    }
                }
            }
            head += 1;
        }
        if reps.len() != expected {
            return Err(FuchsianError::InvalidPresentation(alloc::format!(
                "group has index {} in PSL2(Z), expected {}",
                reps.len(),
                expected
            )));
        }
        let perm = |h: Mat2<i128>| -> Result<Vec<u32>, FuchsianError> {
            reps.iter()
                .map(|r| {
                    let c = r.mul(&h).expect("small");
                    find(&reps, &c).map(|j| j as u32).ok_or_else(|| {
                        FuchsianError::InvalidPresentation("coset table is not closed".into())
                    })
                })
                .collect()
        };
        let pr = perm(r_mat())?;
        let pl = perm(l_mat())?;
        Ok(Self {
            r_pows: powers(&pr),
            l_pows: powers(&pl),
            reps,
        })
    }

    pub fn index(&self) -> usize {
        self.reps.len()
    }

    pub fn representatives(&self) -> &[Mat2<i128>] {
        &self.reps
    }

    /// The permutation `Γ₀g ↦ Γ₀gM` for `M = Π R^{x}L^{y}`.
    fn permutation(&self, pairs: &[(u32, u32)]) -> Vec<u32> {
        let rn = self.r_pows.len();
        let ln = self.l_pows.len();
        (0..self.reps.len() as u32)
            .map(|mut i| {
                for &(x, y) in pairs {
                    i = self.r_pows[x as usize % rn][i as usize];
                    i = self.l_pows[y as usize % ln][i as usize];
                }
                i
            })
            .collect()
    }
}

/// All powers of a permutation up to its order; index `k` holds `p^k`.
fn powers(p: &[u32]) -> Vec<Vec<u32>> {
    let id: Vec<u32> = (0..p.len() as u32).collect();
    let mut out = alloc::vec![id.clone()];
    let mut cur = p.to_vec();
    while cur != id {
        out.push(cur.clone());
        cur = cur.iter().map(|&i| p[i as usize]).collect();
    }
    out
}

fn pair_mat(x: u32, y: u32) -> Mat2<i128> {
    let (x, y) = (x as i128, y as i128);
    Mat2::new(1 + x * y, x, y, 1)
}

fn mat_pow(m: &Mat2<i128>, k: usize) -> Option<Mat2<i128>> {
    let mut out = Mat2::identity();
    for _ in 0..k {
        out = out.mul(m)?;
    }
    Some(out)
}

struct NecklaceSearch<'a, F> {
    cosets: &'a ModularCosets,
    g: &'a GroupPresentation,
    l_max: f64,
    trace_bound: f64,
    budget: u64,
    nodes: u64,
    seq: Vec<(u32, u32)>,
    visit: F,
}

impl<'a, F: FnMut(&ConjugacyClass)> NecklaceSearch<'a, F> {
    /// Extends a pre-necklace of period `p` whose product is `m`.
    fn extend(&mut self, m: &Mat2<i128>, p: usize) -> Result<(), FuchsianError> {
        let t = self.seq.len();
        let (x0, y0) = if t == 0 { (1, 1) } else { self.seq[t - p] };
        let mut x = x0;
        loop {
            let mut y = if x == x0 { y0 } else { 1 };
            let mut any = false;
            loop {
                self.nodes += 1;
                if self.nodes > self.budget {
                    return Err(FuchsianError::BudgetExceeded {
                        budget: self.budget,
                    });
                }
                let next = m.mul(&pair_mat(x, y)).ok_or(FuchsianError::BudgetExceeded {
                    budget: self.budget,
                })?;
                let tr = next.trace().expect("positive entries") as f64;
                if tr > self.trace_bound {
                    break;
                }
                any = true;
                let np = if t == 0 || (x, y) != self.seq[t - p] { t + 1 } else { p };
                self.seq.push((x, y));
                if np == t + 1 {
                    self.emit(&next)?;
                }
                self.extend(&next, np)?;
                self.seq.pop();
                y += 1;
            }
            if !any && x > x0 {
                break;
            }
            x += 1;
        }
        Ok(())
    }

    /// Handles a Lyndon word, i.e. a primitive class of PSL₂(ℤ).
    fn emit(&mut self, m0: &Mat2<i128>) -> Result<(), FuchsianError> {
        let tr0 = m0.trace().expect("small");
        let len0 = length_from_trace(tr0 as f64);
        let sigma = self.cosets.permutation(&self.seq);
        let n = sigma.len();
        let mut seen = alloc::vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle_len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle_len += 1;
                i = sigma[i] as usize;
            }
            let r = &self.cosets.reps[start];
            let r_inv = r.inverse_unimodular().expect("small");
            let mut k = cycle_len;
            while (k as f64) * len0 <= self.l_max * (1.0 + 1e-14) {
                let mk = mat_pow(m0, k).ok_or(FuchsianError::BudgetExceeded {
                    budget: self.budget,
                })?;
                let trace = mk.trace().expect("small").abs();
                let length = length_from_trace(trace as f64);
                if length > self.l_max {
                    break;
                }
                let gamma = r
                    .mul(&mk)
                    .and_then(|x| x.mul(&r_inv))
                    .ok_or(FuchsianError::BudgetExceeded {
                        budget: self.budget,
                    })?;
                let word = self.g.solve_word(&gamma).ok_or_else(|| {
                    FuchsianError::InvalidPresentation(alloc::format!(
                        "conjugate {:?} of a fixed coset is not in the group",
                        gamma
                    ))
                })?;
                let primitive = word.is_primitive_class();
                debug_assert_eq!(primitive, k == cycle_len);
                (self.visit)(&ConjugacyClass {
                    necklace: word.necklace(),
                    trace,
                    length,
                    primitive,
                });
                k += cycle_len;
            }
        }
        Ok(())
    }
}

/// Streams one representative of every oriented hyperbolic conjugacy class
/// with translation length at most `l_max`. Returns the number of search
/// nodes.
pub fn visit_conjugacy_classes<F: FnMut(&ConjugacyClass)>(
    g: &GroupPresentation,
    l_max: f64,
    opts: &ClassOptions,
    visit: F,
) -> Result<u64, FuchsianError> {
    if !(l_max <= opts.l_max) {
        return Err(FuchsianError::RadiusTooLarge {
            requested: l_max,
            max: opts.l_max,
        });
    }
    let cosets = ModularCosets::new(g)?;
    visit_with_cosets(g, &cosets, l_max, opts, visit)
}

pub fn visit_with_cosets<F: FnMut(&ConjugacyClass)>(
    g: &GroupPresentation,
    cosets: &ModularCosets,
    l_max: f64,
    opts: &ClassOptions,
    visit: F,
) -> Result<u64, FuchsianError> {
    if l_max <= 0.0 {
        return Ok(0);
    }
    let mut s = NecklaceSearch {
        cosets,
        g,
        l_max,
        trace_bound: 2.0 * (l_max / 2.0).cosh() * (1.0 + 1e-14),
        budget: opts.node_budget,
        nodes: 0,
        seq: Vec::new(),
        visit,
    };
    s.extend(&Mat2::identity(), 0)?;
    Ok(s.nodes)
}

/// All classes up to `l_max`, sorted by length and then necklace.
pub fn enumerate_conjugacy_classes(
    g: &GroupPresentation,
    l_max: f64,
    opts: &ClassOptions,
) -> Result<Vec<ConjugacyClass>, FuchsianError> {
    let mut out = Vec::new();
    visit_conjugacy_classes(g, l_max, opts, |c| out.push(c.clone()))?;
    out.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then_with(|| a.necklace.cmp(&b.necklace))
    });
    Ok(out)
}
