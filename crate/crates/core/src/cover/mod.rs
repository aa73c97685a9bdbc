//! ℤ^d-covers of a cusped surface: residues at the cusps, the splitting
//! `d = p + h`, the norms on `E_p` and `E_h`, and the local-mixing constant
//!
//! ```text
//! c = 1/((2π)^d m₀) · ∫_{E_p} e^{-‖x‖_p} dx · ∫_{E_h} e^{-‖y‖²_h} dy.
//! ```

mod integral;
mod intlin;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use nalgebra::DMatrix;
use num_bigint::BigInt;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::One;

use crate::fuchsian::{GroupPresentation, Word};
pub use integral::{norm_fourier, IntegralMethod, NormIntegral, QuadratureOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverError {
    #[error("cover map is not onto Z^d (elementary divisors {divisors:?})")]
    NotSurjective { divisors: Vec<BigInt> },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("h = {h} > 0 and no Gram matrix for the harmonic norm was supplied")]
    GramMissing { h: usize },
    #[error("invalid Gram matrix: {0}")]
    InvalidGram(String),
}

/// A surjection `φ: Γ₀ → ℤ^d`, stored as the `d × k` matrix whose column
/// `i` is the image of generator `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverSpec {
    rank: usize,
    phi: Vec<Vec<i64>>,
}

impl CoverSpec {
    pub fn new(phi: Vec<Vec<i64>>, rank: usize) -> Result<Self, CoverError> {
        if let Some(row) = phi.iter().find(|r| r.len() != rank) {
            return Err(CoverError::DimensionMismatch(alloc::format!(
                "phi row has {} entries, group has {} generators",
                row.len(),
                rank
            )));
        }
        let divisors = intlin::elementary_divisors(&phi, rank);
        if divisors.len() != phi.len() || divisors.iter().any(|x| !x.is_one()) {
            return Err(CoverError::NotSurjective { divisors });
        }
        Ok(Self { rank, phi })
    }

    /// The homology cover `φ = abelianization`.
    pub fn homology(rank: usize) -> Self {
        let phi = (0..rank)
            .map(|i| (0..rank).map(|j| (i == j) as i64).collect())
            .collect();
        Self { rank, phi }
    }

    /// `d = 0`: the kernel is the whole group.
    pub fn trivial(rank: usize) -> Self {
        Self {
            rank,
            phi: Vec::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.phi.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn phi(&self) -> &[Vec<i64>] {
        &self.phi
    }

    /// `φ` applied to an abelianized word.
    pub fn image(&self, abelian: &[i64]) -> Vec<i64> {
        self.phi
            .iter()
            .map(|row| row.iter().zip(abelian).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn word_image(&self, w: &Word) -> Vec<i64> {
        self.image(&w.abelianize(self.rank))
    }

    pub fn kernel_member(&self, w: &Word) -> bool {
        self.word_image(w).iter().all(|&x| x == 0)
    }

    /// Post-composes with an integer matrix `u` (`d' × d`).
    pub fn compose(&self, u: &[Vec<i64>]) -> Result<Self, CoverError> {
        let phi = u
            .iter()
            .map(|urow| {
                (0..self.rank)
                    .map(|j| urow.iter().zip(&self.phi).map(|(a, r)| a * r[j]).sum())
                    .collect()
            })
            .collect();
        Self::new(phi, self.rank)
    }
}

pub fn kernel_member(spec: &CoverSpec, w: &Word) -> bool {
    spec.kernel_member(w)
}

/// Hyperbolic area of the base surface.
pub fn area(g: &GroupPresentation) -> f64 {
    surface_area(g.genus(), g.cusp_count())
}

/// Gauss–Bonnet: `2π(2g − 2 + cusps)`.
pub fn surface_area(genus: usize, cusps: usize) -> f64 {
    TAU * (2.0 * genus as f64 - 2.0 + cusps as f64)
}

/// Gram matrix `Q` of the harmonic norm, `‖y‖²_h = yᵀQy` in the
/// orthonormal basis of `E_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct HGram {
    q: Vec<Vec<f64>>,
    det: f64,
    inv: Vec<Vec<f64>>,
}

impl HGram {
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self, CoverError> {
        let n = q.len();
        if q.iter().any(|r| r.len() != n) {
            return Err(CoverError::InvalidGram("matrix is not square".into()));
        }
        if q.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CoverError::InvalidGram("non-finite entry".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                    return Err(CoverError::InvalidGram("matrix is not symmetric".into()));
                }
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        let chol = m
            .cholesky()
            .ok_or_else(|| CoverError::InvalidGram("matrix is not positive definite".into()))?;
        let det = chol.l().diagonal().iter().map(|x| x * x).product();
        let mi = chol.inverse();
        let inv = (0..n).map(|i| (0..n).map(|j| mi[(i, j)]).collect()).collect();
        Ok(Self { q, det, inv })
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect())
            .expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// `(2π)^{-h} ∫ e^{i⟨ξ,y⟩ − yᵀQy} dy`.
    pub fn density(&self, xi: &[f64]) -> f64 {
        let h = self.dim() as f64;
        let quad: f64 = (0..self.dim())
            .map(|i| xi[i] * self.inv[i].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        PI.powf(h / 2.0) / self.det.sqrt() / TAU.powf(h) * (-quad / 4.0).exp()
    }

    /// `∫ e^{-yᵀQy} dy = π^{h/2}/√det Q`.
    pub fn gaussian_integral(&self) -> f64 {
        PI.powf(self.dim() as f64 / 2.0) / self.det.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverInvariants {
    pub d: usize,
    /// Row `j` is `φ(cusp word j)`.
    pub residues: Vec<Vec<i64>>,
    pub p: usize,
    pub h: usize,
    /// Orthonormal basis of the row space of the residue matrix.
    pub basis_ep: Vec<Vec<f64>>,
    /// Orthonormal basis of its kernel.
    pub basis_eh: Vec<Vec<f64>>,
    pub m0: f64,
    /// `∫_{E_p} e^{-‖x‖_p} dx`.
    pub p_integral: NormIntegral,
    /// `c`, when it does not depend on a harmonic Gram matrix (`h = 0`).
    pub c: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverConstant {
    /// The constant; when `exact` is false the harmonic factor is omitted.
    pub c: f64,
    pub exact: bool,
    pub p_factor: f64,
    pub p_error: f64,
    pub h_factor: Option<f64>,
}

impl CoverConstant {
    pub fn require_exact(&self, h: usize) -> Result<f64, CoverError> {
        if self.exact {
            Ok(self.c)
        } else {
            Err(CoverError::GramMissing { h })
        }
    }
}

fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut u = v.clone();
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for e in &out {
                let c: f64 = u.iter().zip(e).map(|(a, b)| a * b).sum();
                for (x, y) in u.iter_mut().zip(e) {
                    *x -= c * y;
                }
            }
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in u.iter_mut() {
            *x /= n;
        }
        out.push(u);
    }
    out
}

pub fn invariants(g: &GroupPresentation, spec: &CoverSpec) -> Result<CoverInvariants, CoverError> {
    invariants_with(g, spec, &QuadratureOptions::default())
}

pub fn invariants_with(
    g: &GroupPresentation,
    spec: &CoverSpec,
    opts: &QuadratureOptions,
) -> Result<CoverInvariants, CoverError> {
    if spec.rank() != g.rank() {
        return Err(CoverError::DimensionMismatch(alloc::format!(
            "cover map has {} columns, group has {} generators",
            spec.rank(),
            g.rank()
        )));
    }
    let d = spec.d();
    let residues: Vec<Vec<i64>> = g.cusp_words().iter().map(|w| spec.word_image(w)).collect();
    let (rows, _) = intlin::rref(&residues, d);
    let p = rows.len();
    let basis_ep = orthonormalize(
        &rows.iter().map(|r| intlin::big_to_f64(r)).collect::<Vec<_>>(),
    );
    let basis_eh = orthonormalize(
        &intlin::kernel_basis(&residues, d)
            .iter()
            .map(|r| intlin::big_to_f64(r))
            .collect::<Vec<_>>(),
    );
    debug_assert_eq!(basis_ep.len() + basis_eh.len(), d);
    let m0 = area(g);
    let mut inv = CoverInvariants {
        d,
        residues,
        p,
        h: d - p,
        basis_ep,
        basis_eh,
        m0,
        p_integral: NormIntegral {
            value: 1.0,
            error: 0.0,
            method: IntegralMethod::ClosedForm,
        },
        c: None,
    };
    inv.p_integral = norm_fourier(&inv.norm_rows(), &alloc::vec![0.0; p], opts);
    if inv.h == 0 {
        inv.c = Some(inv.p_integral.value / (TAU.powi(d as i32) * m0));
    }
    Ok(inv)
}

impl CoverInvariants {
    /// Rows `w_j/m₀` with `w_j` the residue functional in `E_p` coordinates,
    /// so that `‖x‖_p = Σ_j |⟨w_j, x⟩|/m₀`.
    fn norm_rows(&self) -> Vec<Vec<f64>> {
        self.residues
            .iter()
            .map(|r| {
                self.basis_ep
                    .iter()
                    .map(|e| r.iter().zip(e).map(|(a, b)| *a as f64 * b).sum::<f64>() / self.m0)
                    .collect()
            })
            .collect()
    }

    /// `‖x‖_p` for `x` given in the `basis_ep` coordinates.
    pub fn p_norm(&self, x: &[f64]) -> f64 {
        self.norm_rows()
            .iter()
            .map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
            .sum()
    }

    /// `‖x‖_p` for an ambient `x ∈ ℝ^d`; the `E_h` component is ignored.
    pub fn p_norm_ambient(&self, x: &[f64]) -> f64 {
        self.residues
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>().abs())
            .sum::<f64>()
            / self.m0
    }

    /// Coordinates of an ambient vector in `(basis_ep, basis_eh)`.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let coords = |b: &[Vec<f64>]| -> Vec<f64> {
            b.iter()
                .map(|e| e.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect()
        };
        (coords(&self.basis_ep), coords(&self.basis_eh))
    }

    fn check_gram(&self, gram: Option<&HGram>) -> Result<(), CoverError> {
        match gram {
            Some(q) if q.dim() != self.h => Err(CoverError::DimensionMismatch(alloc::format!(
                "Gram matrix is {0}x{0}, h = {1}",
                q.dim(),
                self.h
            ))),
            _ => Ok(()),
        }
    }
}

pub fn constant_c(inv: &CoverInvariants, gram: Option<&HGram>) -> Result<CoverConstant, CoverError> {
    inv.check_gram(gram)?;
    let h_factor = if inv.h == 0 {
        Some(1.0)
    } else {
        gram.map(HGram::gaussian_integral)
    };
    let scale = TAU.powi(inv.d as i32) * inv.m0;
    let p_factor = inv.p_integral.value;
    Ok(CoverConstant {
        c: p_factor * h_factor.unwrap_or(1.0) / scale,
        exact: h_factor.is_some(),
        p_factor,
        p_error: inv.p_integral.error,
        h_factor,
    })
}

/// `F(ξ) = F_p(ξ_p) F_h(ξ_h)` with
/// `F_p(ξ) = (2π)^{-p} ∫_{E_p} e^{i⟨ξ,x⟩ − ‖x‖_p} dx` and
/// `F_h(ξ) = (2π)^{-h} ∫_{E_h} e^{i⟨ξ,y⟩ − ‖y‖²_h} dy`; `ξ` is ambient.
/// `F(0)/m₀ = c`.
pub fn limit_density(
    inv: &CoverInvariants,
    gram: Option<&HGram>,
    xi: &[f64],
) -> Result<f64, CoverError> {
    limit_density_with(inv, gram, xi, &QuadratureOptions::default())
}

pub fn limit_density_with(
    inv: &CoverInvariants,
    gram: Option<&HGram>,
    xi: &[f64],
    opts: &QuadratureOptions,
) -> Result<f64, CoverError> {
    inv.check_gram(gram)?;
    if xi.len() != inv.d {
        return Err(CoverError::DimensionMismatch(alloc::format!(
            "xi has {} entries, d = {}",
            xi.len(),
            inv.d
        )));
    }
    let (xp, xh) = inv.split(xi);
    let fp = if xp.iter().all(|&x| x == 0.0) {
        inv.p_integral.value
    } else {
        norm_fourier(&inv.norm_rows(), &xp, opts).value
    } / TAU.powi(inv.p as i32);
    let fh = if inv.h == 0 {
        1.0
    } else {
        gram.ok_or(CoverError::GramMissing { h: inv.h })?.density(&xh)
    };
    Ok(fp * fh)
}
