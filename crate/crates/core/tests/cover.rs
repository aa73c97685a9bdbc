use std::f64::consts::{PI, TAU};

use locmix_core::cover::*;
use locmix_core::fuchsian::{GroupPresentation, Word};
use num_complex::Complex64;
use proptest::prelude::*;

fn w(s: &str) -> Word {
    Word::parse(s).unwrap()
}

/// `∫_{ℝ²} e^{i⟨ξ,x⟩ − Σ|⟨w_j,x⟩|} dx` by splitting the plane into the cones
/// cut out by the lines `⟨w_j, x⟩ = 0`. On a cone spanned by `u, v` the norm
/// is a linear form `ℓ` and the integral is `|det(u,v)| / (⟨ℓ−iξ,u⟩⟨ℓ−iξ,v⟩)`.
fn cone_oracle_2d(rows: &[[f64; 2]], xi: [f64; 2]) -> f64 {
    let mut angles: Vec<f64> = rows
        .iter()
        .flat_map(|r| {
            let a = r[0].atan2(-r[1]);
            [a.rem_euclid(TAU), (a + PI).rem_euclid(TAU)]
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let n = angles.len();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let a0 = angles[k];
        let a1 = if k + 1 < n { angles[k + 1] } else { angles[0] + TAU };
        let mid = 0.5 * (a0 + a1);
        let m = [mid.cos(), mid.sin()];
        let mut l = [0.0; 2];
        for r in rows {
            let s = (r[0] * m[0] + r[1] * m[1]).signum();
            l[0] += s * r[0];
            l[1] += s * r[1];
        }
        let u = [a0.cos(), a0.sin()];
        let v = [a1.cos(), a1.sin()];
        let lu = Complex64::new(l[0] * u[0] + l[1] * u[1], -(xi[0] * u[0] + xi[1] * u[1]));
        let lv = Complex64::new(l[0] * v[0] + l[1] * v[1], -(xi[0] * v[0] + xi[1] * v[1]));
        let det = (u[0] * v[1] - u[1] * v[0]).abs();
        total += det / (lu * lv);
    }
    total.re
}

fn rows_vec<const N: usize>(rows: &[[f64; N]]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

#[test]
fn area_examples() {
    assert!((area(&GroupPresentation::gamma2()) - TAU).abs() < 1e-15);
    assert!((area(&GroupPresentation::punctured_torus()) - TAU).abs() < 1e-15);
    assert!((surface_area(2, 1) - 6.0 * PI).abs() < 1e-14);
}

#[test]
fn invariants_examples() {
    let g = GroupPresentation::gamma2();
    let inv = invariants(&g, &CoverSpec::homology(2)).unwrap();
    assert_eq!((inv.p, inv.h), (2, 0));
    assert_eq!(inv.residues, vec![vec![1, 0], vec![0, -1], vec![-1, 1]]);

    let spec = CoverSpec::new(vec![vec![1, 0]], 2).unwrap();
    let inv = invariants(&g, &spec).unwrap();
    assert_eq!((inv.p, inv.h), (1, 0));
    assert_eq!(inv.residues, vec![vec![1], vec![0], vec![-1]]);

    let t = GroupPresentation::punctured_torus();
    let inv = invariants(&t, &CoverSpec::homology(2)).unwrap();
    assert_eq!((inv.p, inv.h), (0, 2));
    assert_eq!(inv.residues, vec![vec![0, 0]]);
    assert_eq!(inv.basis_eh.len(), 2);
}

#[test]
fn kernel_is_annihilated_by_residues() {
    let g = GroupPresentation::gamma2();
    for phi in [vec![vec![1, 1]], vec![vec![1, 0], vec![1, 1]], vec![vec![2, 1]]] {
        let inv = invariants(&g, &CoverSpec::new(phi, 2).unwrap()).unwrap();
        for v in &inv.basis_eh {
            for r in &inv.residues {
                let s: f64 = r.iter().zip(v).map(|(a, b)| *a as f64 * b).sum();
                assert!(s.abs() < 1e-12);
            }
        }
        assert_eq!(inv.p + inv.h, inv.d);
    }
    // φ(a) = φ(b) = 1 kills the third cusp word b a⁻¹: residues (1, −1, 0).
    let inv = invariants(&g, &CoverSpec::new(vec![vec![1, 1]], 2).unwrap()).unwrap();
    assert_eq!(inv.residues, vec![vec![1], vec![-1], vec![0]]);
}

#[test]
fn homology_cover_law() {
    for (g, genus, cusps) in [
        (GroupPresentation::gamma2(), 0, 3),
        (GroupPresentation::punctured_torus(), 1, 1),
    ] {
        let inv = invariants(&g, &CoverSpec::homology(g.rank())).unwrap();
        assert_eq!(inv.p, cusps - 1);
        assert_eq!(inv.h, 2 * genus);
    }
}

#[test]
fn surjectivity_is_enforced() {
    assert!(matches!(
        CoverSpec::new(vec![vec![2, 0]], 2),
        Err(CoverError::NotSurjective { .. })
    ));
    assert!(matches!(
        CoverSpec::new(vec![vec![1, 1], vec![1, 1]], 2),
        Err(CoverError::NotSurjective { .. })
    ));
    assert!(matches!(
        CoverSpec::new(vec![vec![1, 1], vec![1, -1]], 2),
        Err(CoverError::NotSurjective { .. })
    ));
    assert!(CoverSpec::new(vec![vec![2, 3]], 2).is_ok());
    assert!(CoverSpec::new(vec![vec![2, 1], vec![1, 1]], 2).is_ok());
    assert!(matches!(
        CoverSpec::new(vec![vec![1, 0, 0]], 2),
        Err(CoverError::DimensionMismatch(_))
    ));
}

#[test]
fn p_norm_examples() {
    let g = GroupPresentation::gamma2();
    let inv = invariants(&g, &CoverSpec::homology(2)).unwrap();
    assert_eq!(inv.p_norm(&[0.0, 0.0]), 0.0);
    assert!((inv.p_norm_ambient(&[1.0, 0.0]) - 1.0 / PI).abs() < 1e-15);
    let (xp, _) = inv.split(&[1.0, 0.0]);
    assert!((inv.p_norm(&xp) - 1.0 / PI).abs() < 1e-15);
    let x = [0.3, -1.7];
    for lambda in [-2.5, 0.5, 3.0] {
        let lx = [lambda * x[0], lambda * x[1]];
        let a = inv.p_norm(&lx);
        let b = lambda.abs() * inv.p_norm(&x);
        assert!((a - b).abs() <= 1e-15 * b);
    }
}

#[test]
fn constant_examples() {
    let g = GroupPresentation::gamma2();
    let inv = invariants(&g, &CoverSpec::homology(2)).unwrap();
    // ∫ e^{-(|u|+|v|+|u−v|)/(2π)} = (3/2)(2π)².
    let rows = [[1.0 / TAU, 0.0], [0.0, 1.0 / TAU], [1.0 / TAU, -1.0 / TAU]];
    let oracle = cone_oracle_2d(&rows, [0.0, 0.0]);
    assert!((oracle - 1.5 * TAU * TAU).abs() < 1e-9);
    let c = constant_c(&inv, None).unwrap();
    assert!(c.exact);
    assert!((c.c - oracle / TAU.powi(3)).abs() < 1e-9);
    assert!((c.c - 3.0 / (4.0 * PI)).abs() < 1e-9);
    assert_eq!(inv.c, Some(c.c));

    let inv = invariants(&g, &CoverSpec::new(vec![vec![1, 0]], 2).unwrap()).unwrap();
    let c = constant_c(&inv, None).unwrap();
    assert!((c.c - 1.0 / TAU).abs() < 1e-12);

    let t = GroupPresentation::punctured_torus();
    let inv = invariants(&t, &CoverSpec::homology(2)).unwrap();
    let partial = constant_c(&inv, None).unwrap();
    assert!(!partial.exact);
    assert_eq!(partial.require_exact(inv.h), Err(CoverError::GramMissing { h: 2 }));
    let c = constant_c(&inv, Some(&HGram::identity(2))).unwrap();
    assert!(c.exact);
    assert!((c.c - 1.0 / (8.0 * PI * PI)).abs() < 1e-15);
    assert!(matches!(
        constant_c(&inv, Some(&HGram::identity(3))),
        Err(CoverError::DimensionMismatch(_))
    ));
}

#[test]
fn gram_validation() {
    assert!(HGram::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    assert!(HGram::new(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
    assert!(HGram::new(vec![vec![1.0, 0.0]]).is_err());
    let q = HGram::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    assert!((q.det() - 1.75).abs() < 1e-14);
}

#[test]
fn quadrature_is_converged() {
    let g = GroupPresentation::gamma2();
    let spec = CoverSpec::homology(2);
    let coarse = invariants_with(&g, &spec, &QuadratureOptions { rel_tol: 1e-8, ..Default::default() }).unwrap();
    let fine = invariants_with(&g, &spec, &QuadratureOptions { rel_tol: 1e-11, ..Default::default() }).unwrap();
    let (a, b) = (coarse.p_integral.value, fine.p_integral.value);
    assert!((a - b).abs() < 1e-6 * b);
}

#[test]
fn fourier_transform_in_the_plane_matches_cones() {
    let rows = [[0.7, 0.1], [-0.2, 0.9], [0.5, -0.45], [0.05, 0.3]];
    for xi in [[0.0, 0.0], [0.4, -1.1], [3.0, 2.0]] {
        let oracle = cone_oracle_2d(&rows, xi);
        let got = norm_fourier(&rows_vec(&rows), &xi, &QuadratureOptions::default());
        assert!((got.value - oracle).abs() < 1e-7 * oracle.abs().max(1e-3), "{:?}: {} vs {}", xi, got.value, oracle);
    }
}

/// With exactly `p` independent rows `A`, the substitution `y = Ax` gives
/// `∫ e^{i⟨ξ,x⟩ − ‖Ax‖₁} dx = Π_k 2/(1+η_k²) / |det A|`, `η = A^{-T}ξ`.
fn product_oracle(a: &nalgebra::DMatrix<f64>, xi: &[f64]) -> f64 {
    let eta = a.transpose().try_inverse().unwrap() * nalgebra::DVector::from_column_slice(xi);
    eta.iter().map(|e| 2.0 / (1.0 + e * e)).product::<f64>() / a.determinant().abs()
}

#[test]
fn fourier_transform_in_space_matches_product_form() {
    let a = nalgebra::DMatrix::from_row_slice(3, 3, &[0.9, 0.2, -0.3, 0.1, 1.1, 0.4, -0.5, 0.3, 0.8]);
    let rows: Vec<Vec<f64>> = (0..3).map(|i| a.row(i).iter().copied().collect()).collect();
    for xi in [[0.0, 0.0, 0.0], [0.3, -0.7, 0.2]] {
        let oracle = product_oracle(&a, &xi);
        let got = norm_fourier(&rows, &xi, &QuadratureOptions::default());
        assert!((got.value - oracle).abs() < 1e-6 * oracle, "{} vs {}", got.value, oracle);
    }
}

#[test]
fn quasi_monte_carlo_in_four_dimensions() {
    let a = nalgebra::DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 0.2, 0.0, 0.1, 0.0, 0.8, 0.3, 0.0, 0.2, 0.0, 1.2, -0.2, 0.0, 0.1, 0.1, 0.9],
    );
    let rows: Vec<Vec<f64>> = (0..4).map(|i| a.row(i).iter().copied().collect()).collect();
    let oracle = product_oracle(&a, &[0.0; 4]);
    let got = norm_fourier(&rows, &[0.0; 4], &QuadratureOptions::default());
    assert_eq!(got.method, IntegralMethod::QuasiMonteCarlo);
    assert!(got.error > 0.0 && got.error < 0.05 * oracle);
    assert!((got.value - oracle).abs() < 5.0 * got.error + 1e-3 * oracle, "{} ± {} vs {}", got.value, got.error, oracle);
}

#[test]
fn limit_density_examples() {
    let g = GroupPresentation::gamma2();
    let inv = invariants(&g, &CoverSpec::homology(2)).unwrap();
    let f0 = limit_density(&inv, None, &[0.0, 0.0]).unwrap();
    assert!((f0 - 1.5).abs() < 1e-8);
    let c = constant_c(&inv, None).unwrap().c;
    assert!((f0 / inv.m0 - c).abs() < 1e-12);
    let mut last = f0;
    for s in [1.0, 4.0, 16.0, 64.0] {
        let f = limit_density(&inv, None, &[s, 0.5 * s]).unwrap();
        assert!(f.abs() < last);
        last = f.abs();
    }
    assert!(last < 1e-3);

    let inv = invariants(&g, &CoverSpec::new(vec![vec![1, 0]], 2).unwrap()).unwrap();
    // F_p(ξ) = (2π)^{-1} · 2a/(a² + ξ²), a = 2/(2π).
    let a = 1.0 / PI;
    let f = limit_density(&inv, None, &[0.7]).unwrap();
    assert!((f - 2.0 * a / (a * a + 0.49) / TAU).abs() < 1e-14);

    let t = GroupPresentation::punctured_torus();
    let inv = invariants(&t, &CoverSpec::homology(2)).unwrap();
    assert_eq!(limit_density(&inv, None, &[0.0, 0.0]), Err(CoverError::GramMissing { h: 2 }));
    let f = limit_density(&inv, Some(&HGram::identity(2)), &[0.0, 0.0]).unwrap();
    assert!((f - PI / (TAU * TAU)).abs() < 1e-15);
    let q = HGram::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let c = constant_c(&inv, Some(&q)).unwrap().c;
    assert!((limit_density(&inv, Some(&q), &[0.0, 0.0]).unwrap() / inv.m0 - c).abs() < 1e-15);
}

#[test]
fn kernel_member_examples() {
    let g = GroupPresentation::gamma2();
    let hom = CoverSpec::homology(2);
    let half = CoverSpec::new(vec![vec![1, 0]], 2).unwrap();
    assert!(kernel_member(&hom, &w("abAB")));
    assert!(kernel_member(&half, &w("abAB")));
    assert!(!kernel_member(&half, &w("a")));
    assert!(kernel_member(&half, &w("b")));
    assert!(!kernel_member(&hom, &w("abAb")));
    assert_eq!(hom.word_image(&w("abAb")), vec![0, 2]);
    assert!(kernel_member(&CoverSpec::trivial(g.rank()), &w("aab")));
}

fn arb_word() -> impl Strategy<Value = Word> {
    prop::collection::vec(prop::sample::select(vec![1i64, -1, 2, -2]), 0..12)
        .prop_map(|v| Word::from_signed(&v).unwrap())
}

fn arb_unimodular() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec((any::<bool>(), -3i64..=3, any::<bool>()), 1..5).prop_map(|ops| {
        let mut u = vec![vec![1i64, 0], vec![0, 1]];
        for (upper, k, flip) in ops {
            let e = if upper { [[1, k], [0, 1]] } else { [[1, 0], [k, 1]] };
            u = (0..2)
                .map(|i| (0..2).map(|j| e[i][0] * u[0][j] + e[i][1] * u[1][j]).collect())
                .collect();
            if flip {
                u.swap(0, 1);
            }
        }
        u
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants_are_basis_independent(u in arb_unimodular()) {
        for g in [GroupPresentation::gamma2(), GroupPresentation::punctured_torus()] {
            let base = CoverSpec::homology(2);
            let spec = base.compose(&u).unwrap();
            let a = invariants(&g, &base).unwrap();
            let b = invariants(&g, &spec).unwrap();
            prop_assert_eq!((a.p, a.h), (b.p, b.h));
            for (ra, rb) in a.residues.iter().zip(&b.residues) {
                let expect: Vec<i64> = (0..2).map(|i| u[i][0] * ra[0] + u[i][1] * ra[1]).collect();
                prop_assert_eq!(&expect, rb);
            }
            if a.h == 0 {
                let (ca, cb) = (a.c.unwrap(), b.c.unwrap());
                prop_assert!((ca - cb).abs() < 1e-7 * ca);
            }
        }
    }

    #[test]
    fn kernel_is_a_subgroup(u in arb_word(), v in arb_word(), a in -3i64..=3, b in -3i64..=3) {
        prop_assume!(num_integer::gcd(a, b) == 1);
        let spec = CoverSpec::new(vec![vec![a, b]], 2).unwrap();
        let ku = spec.kernel_member(&u);
        let kv = spec.kernel_member(&v);
        if ku && kv {
            prop_assert!(spec.kernel_member(&u.mul(&v)));
        }
        prop_assert_eq!(spec.kernel_member(&u.inverse()), ku);
    }

    #[test]
    fn p_plus_h_is_d(a in -4i64..=4, b in -4i64..=4) {
        prop_assume!(num_integer::gcd(a, b) == 1);
        for g in [GroupPresentation::gamma2(), GroupPresentation::punctured_torus()] {
            let inv = invariants(&g, &CoverSpec::new(vec![vec![a, b]], 2).unwrap()).unwrap();
            prop_assert_eq!(inv.p + inv.h, 1);
        }
    }
}
