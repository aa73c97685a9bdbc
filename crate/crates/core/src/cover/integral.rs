//! Fourier transforms of `e^{-N(x)}` for polyhedral norms
//! `N(x) = Σ_j |⟨w_j, x⟩|` on ℝ^p.
//!
//! Homogeneity reduces `∫ cos⟨ξ,x⟩ e^{-N(x)} dx` to a sphere integral,
//! `(p−1)! ∫_{S^{p−1}} Re (N(θ) − i⟨ξ,θ⟩)^{-p} dθ`, which is integrated
//! adaptively with the kinks of `N` as breakpoints for `p ≤ 3`. Larger `p`
//! uses randomized Halton points under a Laplace proposal.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::{halton, integrate, max_halton_dim, NeumaierSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegralMethod {
    ClosedForm,
    Adaptive,
    QuasiMonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormIntegral {
    pub value: f64,
    pub error: f64,
    pub method: IntegralMethod,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Points per randomized Halton replicate (`p > 3`).
    pub qmc_points: usize,
    pub qmc_replicates: usize,
    pub seed: u64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_panels: 4000,
            qmc_points: 1 << 14,
            qmc_replicates: 16,
            seed: 0x5eed,
        }
    }
}

trait Wrap {
    fn wrap(self, m: f64) -> f64;
}

impl Wrap for f64 {
    fn wrap(self, m: f64) -> f64 {
        let r = self % m;
        if r < 0.0 {
            r + m
        } else {
            r
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(w: &[Vec<f64>], x: &[f64]) -> f64 {
    w.iter().map(|r| dot(r, x).abs()).sum()
}

/// `Re (a − ib)^{-p}`.
fn kernel(a: f64, b: f64, p: i32) -> f64 {
    Complex64::new(a, -b).powi(-p).re
}

/// `∫_{ℝ^p} cos⟨ξ,x⟩ e^{-N(x)} dx` for the norm with rows `w` (each of
/// length `p = xi.len()`). The rows must span ℝ^p.
pub fn norm_fourier(w: &[Vec<f64>], xi: &[f64], opts: &QuadratureOptions) -> NormIntegral {
    match xi.len() {
        0 => NormIntegral {
            value: 1.0,
            error: 0.0,
            method: IntegralMethod::ClosedForm,
        },
        1 => {
            let a: f64 = w.iter().map(|r| r[0].abs()).sum();
            NormIntegral {
                value: 2.0 * a / (a * a + xi[0] * xi[0]),
                error: 0.0,
                method: IntegralMethod::ClosedForm,
            }
        }
        2 => circle(w, xi, opts),
        3 => sphere(w, xi, opts),
        _ => quasi_monte_carlo(w, xi, opts),
    }
}

fn circle(w: &[Vec<f64>], xi: &[f64], opts: &QuadratureOptions) -> NormIntegral {
    // θ and θ+π contribute equally.
    let breaks: Vec<f64> = w
        .iter()
        .map(|r| (-r[0]).atan2(r[1]).wrap(PI))
        .collect();
    let q = integrate(
        |t| {
            let u = [t.cos(), t.sin()];
            kernel(norm(w, &u), dot(xi, &u), 2)
        },
        0.0,
        PI,
        &breaks,
        opts.rel_tol,
        0.0,
        opts.max_panels,
    );
    NormIntegral {
        value: 2.0 * q.value,
        error: 2.0 * q.error,
        method: IntegralMethod::Adaptive,
    }
}

fn sphere(w: &[Vec<f64>], xi: &[f64], opts: &QuadratureOptions) -> NormIntegral {
    let mut outer_breaks = alloc::vec![PI / 2.0];
    for r in w {
        let rho = r[0].hypot(r[1]);
        let tilt = r[2].abs().atan2(rho);
        outer_breaks.push(tilt);
        outer_breaks.push(PI - tilt);
    }
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let (a, b) = (&w[i], &w[j]);
            let c = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            let n = dot(&c, &c).sqrt();
            if n > 0.0 {
                let phi = (c[2] / n).clamp(-1.0, 1.0).acos();
                outer_breaks.push(phi);
                outer_breaks.push(PI - phi);
            }
        }
    }
    let mut inner_err = 0.0;
    let mut inner_breaks = Vec::new();
    let q = integrate(
        |phi| {
            let (s, c) = phi.sin_cos();
            inner_breaks.clear();
            for r in w {
                let rho = r[0].hypot(r[1]);
                if rho == 0.0 || s == 0.0 {
                    continue;
                }
                let rhs = -r[2] * c / (s * rho);
                if rhs.abs() <= 1.0 {
                    let delta = r[1].atan2(r[0]);
                    let a = rhs.acos();
                    inner_breaks.push((delta + a).wrap(TAU));
                    inner_breaks.push((delta - a).wrap(TAU));
                }
            }
            let inner = integrate(
                |t| {
                    let u = [s * t.cos(), s * t.sin(), c];
                    kernel(norm(w, &u), dot(xi, &u), 3)
                },
                0.0,
                TAU,
                &inner_breaks,
                0.1 * opts.rel_tol,
                0.0,
                opts.max_panels,
            );
            inner_err += inner.error * s;
            inner.value * s
        },
        0.0,
        PI,
        &outer_breaks,
        opts.rel_tol,
        0.0,
        opts.max_panels,
    );
    // The factor 2 is (p−1)!.
    NormIntegral {
        value: 2.0 * q.value,
        error: 2.0 * (q.error + PI * inner_err / q.evaluations.max(1) as f64),
        method: IntegralMethod::Adaptive,
    }
}

/// Laplace importance sampling at rate `m`, with `N(x) ≥ m‖x‖₁` where
/// `m = σ_min(W)/√p`, so weights are bounded by `(2/m)^p`.
fn quasi_monte_carlo(w: &[Vec<f64>], xi: &[f64], opts: &QuadratureOptions) -> NormIntegral {
    let p = xi.len();
    assert!(p <= max_halton_dim(), "dimension {} exceeds the Halton table", p);
    let wm = DMatrix::from_fn(w.len(), p, |i, j| w[i][j]);
    let gram = wm.transpose() * &wm;
    let smin = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt();
    let rate = smin / (p as f64).sqrt();
    let log_norm = p as f64 * (2.0 / rate).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pt = alloc::vec![0.0; p];
    let mut x = alloc::vec![0.0; p];
    let mut reps = Vec::with_capacity(opts.qmc_replicates);
    for _ in 0..opts.qmc_replicates.max(2) {
        let shift: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let mut acc = NeumaierSum::new();
        for i in 0..opts.qmc_points {
            halton(i as u64 + 1, p, &mut pt);
            let mut l1 = 0.0;
            for k in 0..p {
                let u = (pt[k] + shift[k]).fract() - 0.5;
                let mag = -(1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln() / rate;
                x[k] = if u < 0.0 { -mag } else { mag };
                l1 += mag;
            }
            let e = -norm(w, &x) + rate * l1 + log_norm;
            acc.add(dot(xi, &x).cos() * e.exp());
        }
        reps.push(acc.value() / opts.qmc_points as f64);
    }
    let n = reps.len() as f64;
    let mean = reps.iter().sum::<f64>() / n;
    let var = reps.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    NormIntegral {
        value: mean,
        error: (var / n).sqrt(),
        method: IntegralMethod::QuasiMonteCarlo,
    }
}
