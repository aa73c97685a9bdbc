use std::f64::consts::{LN_2, PI};

use locmix_core::symbolic::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct System {
    shift: MarkovShift,
    r: Potential,
    f: Displacement,
}

fn random_system(rng: &mut ChaCha8Rng, max_states: usize, d: usize) -> System {
    loop {
        let n = rng.random_range(2..=max_states);
        let t: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..n).map(|_| u8::from(rng.random_bool(0.7))).collect())
            .collect();
        let Ok(shift) = MarkovShift::new(t) else { continue };
        if !shift.is_mixing() {
            continue;
        }
        let r = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.4..1.6)).collect()).collect();
        let r = Potential::new(&shift, r).unwrap();
        let f = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2..=2)).collect()).collect();
        let f = Displacement::new(&shift, f, d).unwrap();
        return System { shift, r, f };
    }
}

fn lazy_walk() -> System {
    let shift = MarkovShift::full(3).unwrap();
    let r = Potential::constant(&shift, 3f64.ln()).unwrap();
    let f = Displacement::new(&shift, vec![vec![-1], vec![0], vec![1]], 1).unwrap();
    System { shift, r, f }
}

/// Direct preimage sum: every `y = a x₀ x₁ …` with `a → x₀` admissible.
fn transfer_oracle(s: &MarkovShift, r: &Potential, f: &Observable) -> Vec<f64> {
    let n = s.states();
    let mut out = vec![0.0; n];
    for (x, o) in out.iter_mut().enumerate() {
        for a in 0..n {
            if s.transition()[a][x] == 1 {
                *o += (-r.table()[a][x]).exp() * f.eval(a, x);
            }
        }
    }
    out
}

/// All backward paths `y₀ … y_n = x` with `n ≤ depth`, summed naively.
#[allow(clippy::too_many_arguments)]
fn q_sum_oracle(
    sys: &System,
    psi: &[f64],
    phi: &[f64],
    u: &Window,
    x: usize,
    xi: &[i64],
    t: f64,
    depth: usize,
) -> f64 {
    fn rec(sys: &System, word: &mut Vec<usize>, depth: usize, out: &mut Vec<Vec<usize>>) {
        out.push(word.clone());
        if word.len() > depth {
            return;
        }
        for a in 0..sys.shift.states() {
            if sys.shift.transition()[a][word[0]] == 1 {
                word.insert(0, a);
                rec(sys, word, depth, out);
                word.remove(0);
            }
        }
    }
    let mut words = Vec::new();
    rec(sys, &mut vec![x], depth, &mut words);
    let mut total = 0.0;
    for w in words {
        let n = w.len() - 1;
        let rn: f64 = (0..n).map(|k| sys.r.table()[w[k]][w[k + 1]]).sum();
        let mut fn_ = vec![0i64; xi.len()];
        for &s in &w[..n] {
            for (acc, v) in fn_.iter_mut().zip(sys.f.at(s)) {
                *acc += v;
            }
        }
        if fn_ == xi {
            total += (-rn).exp() * phi[w[0]] * psi[w[0]] * u.eval(rn - t);
        }
    }
    total
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `P(S_n = 0)` for the walk with uniform steps in {−1, 0, 1}.
fn trinomial_return(n: u64) -> f64 {
    (0..=n / 2)
        .map(|k| {
            (ln_factorial(n) - 2.0 * ln_factorial(k) - ln_factorial(n - 2 * k) - n as f64 * 3f64.ln()).exp()
        })
        .sum()
}

#[test]
fn shift_validation() {
    assert!(matches!(MarkovShift::new(vec![vec![1, 1], vec![0, 0]]), Err(SymbolicError::ZeroRow { state: 1 })));
    assert!(matches!(MarkovShift::new(vec![vec![1, 2], vec![1, 1]]), Err(SymbolicError::NotBinary { .. })));
    assert!(matches!(MarkovShift::new(vec![vec![1, 1]]), Err(SymbolicError::NotSquare)));
    assert!(MarkovShift::new(vec![vec![1, 1], vec![1, 0]]).unwrap().is_mixing());
    assert!(!MarkovShift::new(vec![vec![0, 1], vec![1, 0]]).unwrap().is_mixing());
    assert!(!MarkovShift::new(vec![vec![1, 0], vec![0, 1]]).unwrap().is_mixing());
    let big = vec![vec![1, 1, 0], vec![1, 0, 0], vec![0, 0, 1]];
    assert!(MarkovShift::truncate(&big, 2).unwrap().is_mixing());
    let bad = vec![vec![0, 0, 1], vec![1, 1, 1], vec![1, 1, 1]];
    assert!(matches!(MarkovShift::truncate(&bad, 2), Err(SymbolicError::ZeroRow { state: 0 })));
}

#[test]
fn potential_positivity() {
    let s = MarkovShift::full(2).unwrap();
    let r = Potential::positive(&s, vec![vec![-0.5, 2.0], vec![2.0, 1.0]]);
    assert!(matches!(r, Err(SymbolicError::InvalidPotential(_))));
    let p = Potential::new(&s, vec![vec![0.5, -0.2], vec![1.0, 0.3]]).unwrap().require_positive().unwrap();
    assert_eq!(p.k, 2);
    // Cheapest two-step path is 0 → 1 → 1.
    assert!((p.c - 0.1).abs() < 1e-12);
    assert!((p.undershoot - 0.2).abs() < 1e-12);
    assert!(matches!(Potential::new(&s, vec![vec![0.0, f64::NAN], vec![1.0, 1.0]]), Err(SymbolicError::InvalidPotential(_))));
}

#[test]
fn transfer_examples() {
    let s = MarkovShift::full(2).unwrap();
    let one = Observable::State(vec![1.0, 1.0]);
    let out = transfer_apply(&s, &Potential::constant(&s, LN_2).unwrap(), &one).unwrap();
    assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-15));
    let zero = Potential::constant(&s, 0.0).unwrap();
    assert!(zero.positivity().is_none());
    let out = transfer_apply(&s, &zero, &one).unwrap();
    assert_eq!(out, vec![2.0, 2.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let sys = random_system(&mut rng, 3, 0);
        let n = sys.shift.states();
        let g = Observable::Edge((0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
        let a = transfer_apply(&sys.shift, &sys.r, &g).unwrap();
        let b = transfer_oracle(&sys.shift, &sys.r, &g);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

#[test]
fn gibbs_examples() {
    let s = MarkovShift::full(2).unwrap();
    let g = leading_triple(&s, &Potential::constant(&s, LN_2).unwrap()).unwrap();
    assert!((g.lambda - 1.0).abs() < 1e-14);
    assert!(g.psi.iter().all(|v| (v - 1.0).abs() < 1e-14));
    assert!(g.rho.iter().all(|v| (v - 0.5).abs() < 1e-14));

    let g = leading_triple(&s, &Potential::constant(&s, 0.0).unwrap()).unwrap();
    assert!((g.lambda - 2.0).abs() < 1e-14);
    assert!((g.pressure - LN_2).abs() < 1e-14);

    let golden = MarkovShift::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
    let r = Potential::new(&golden, vec![vec![0.0; 2]; 2]).unwrap();
    let g = leading_triple(&golden, &r).unwrap();
    // Root of λ² − λ − 1.
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((g.lambda - phi).abs() < 1e-13);
    assert!(g.eigen_residual(&golden) < 1e-12);

    let flip = MarkovShift::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
    let r = Potential::constant(&flip, 1.0).unwrap();
    assert!(matches!(leading_triple(&flip, &r), Err(SymbolicError::NotMixing)));
}

#[test]
fn gibbs_identities_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let sys = random_system(&mut rng, 5, 1);
        let n = sys.shift.states();
        let g = leading_triple(&sys.shift, &sys.r).unwrap();
        assert!(g.eigen_residual(&sys.shift) < 1e-10);
        assert!(g.psi.iter().all(|&v| v > 0.0));
        assert!((g.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let psi_rho: f64 = g.psi.iter().zip(&g.rho).map(|(a, b)| a * b).sum();
        assert!((psi_rho - 1.0).abs() < 1e-12);

        // ρ(LF) = λρ(F) under the raw roof.
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let lf = transfer_apply(&sys.shift, &sys.r, &Observable::State(f.clone())).unwrap();
        let lhs: f64 = lf.iter().zip(&g.rho).map(|(a, b)| a * b).sum();
        let rhs: f64 = f.iter().zip(&g.rho).map(|(a, b)| a * b).sum::<f64>() * g.lambda;
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));

        // ν(F∘σ) = ν(F).
        let shifted = Observable::Edge((0..n).map(|_| f.clone()).collect());
        let a = g.nu_integral(&sys.shift, &shifted);
        let b = g.nu_integral(&sys.shift, &Observable::State(f.clone()));
        assert!((a - b).abs() < 1e-10);

        let ff = Observable::Edge((0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
        let gg = Observable::Edge((0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
        let (l, r) = g.duality_sides(&sys.shift, &ff, &gg).unwrap();
        assert!((l - r).abs() < 1e-12);
    }
}

#[test]
fn twisted_eigenvalue_examples() {
    let sys = lazy_walk();
    let g = leading_triple(&sys.shift, &sys.r).unwrap();
    let l0 = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[0.0], 0.0).unwrap();
    assert!((l0.re - 1.0).abs() < 1e-12 && l0.im.abs() < 1e-12);
    // Circulant oracle: the uniform average of e^{iθk}, k ∈ {−1, 0, 1}.
    for k in 1..12 {
        let th = -PI + 2.0 * PI * k as f64 / 12.0;
        let l = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[th], 0.0).unwrap();
        let expect = (1.0 + 2.0 * th.cos()) / 3.0;
        let alt = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[th], 0.0).unwrap();
        assert_eq!(l, alt);
        // At cos θ = −1/2 the operator is nilpotent and eigenvalues are
        // only accurate to about √ε.
        let tol = if expect.abs() < 1e-9 { 1e-7 } else { 1e-12 };
        assert!((l - expect).norm() < tol, "θ = {th}: {l}");
    }
    let l = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[PI / 2.0], 0.7).unwrap();
    assert!(l.norm() < 1.0 - 1e-3);
    assert!(matches!(
        twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[0.0, 0.0], 0.0),
        Err(SymbolicError::DimensionMismatch(_))
    ));
}

#[test]
fn twisted_gradient_is_mean_displacement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let sys = random_system(&mut rng, 4, 2);
        let g = leading_triple(&sys.shift, &sys.r).unwrap();
        let mean = g.mean_displacement(&sys.f);
        let h = 1e-5;
        for j in 0..2 {
            let mut p = vec![0.0; 2];
            let mut m = vec![0.0; 2];
            p[j] = h;
            m[j] = -h;
            let lp = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &p, 0.0).unwrap();
            let lm = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &m, 0.0).unwrap();
            let grad = (lp - lm) / (2.0 * h);
            assert!(grad.re.abs() < 1e-6);
            assert!((grad.im - mean[j]).abs() < 1e-6);
        }
        let l = twisted_spectral_radius(&sys.shift, &g.normalized, &sys.f, &[0.3, -0.2], 0.4).unwrap();
        assert!(l.norm() <= 1.0 + 1e-12);
    }
}

fn two_shift_example() -> (System, GibbsData) {
    let shift = MarkovShift::full(2).unwrap();
    let r = Potential::constant(&shift, LN_2).unwrap();
    let f = Displacement::new(&shift, vec![vec![0], vec![1]], 1).unwrap();
    let g = leading_triple(&shift, &r).unwrap();
    (System { shift, r, f }, g)
}

#[test]
fn q_sum_examples() {
    let (sys, g) = two_shift_example();
    let u = Window::indicator(-0.5, 0.5).unwrap();
    let opts = DpOptions::default();
    let q = q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &[1.0, 1.0], &u, 0, &[1], 3.0 * LN_2, &opts).unwrap();
    assert!((q - 0.375).abs() < 1e-15);
    let q = q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &[1.0, 1.0], &u, 1, &[1], 3.0 * LN_2, &opts).unwrap();
    assert!((q - 0.375).abs() < 1e-15);
    let far = q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &[1.0, 1.0], &u, 0, &[40], 3.0 * LN_2, &opts).unwrap();
    assert_eq!(far, 0.0);
    let oracle = q_sum_oracle(&sys, &g.psi, &[1.0, 1.0], &u, 0, &[1], 3.0 * LN_2, 6);
    assert!((oracle - 0.375).abs() < 1e-15);
    assert!(matches!(
        q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &[1.0, 1.0], &u, 0, &[1, 0], 1.0, &opts),
        Err(SymbolicError::DimensionMismatch(_))
    ));
    let tight = DpOptions { max_nodes: 5 };
    assert!(matches!(
        q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &[1.0, 1.0], &u, 0, &[1], 20.0, &tight),
        Err(SymbolicError::BudgetExceeded { .. })
    ));
}

#[test]
fn window_validation() {
    assert!(matches!(Window::indicator(0.0, f64::INFINITY), Err(SymbolicError::UnboundedWindow)));
    assert!(matches!(Window::indicator(f64::NEG_INFINITY, 0.0), Err(SymbolicError::UnboundedWindow)));
    assert!(matches!(Window::indicator(1.0, 0.0), Err(SymbolicError::InvalidWindow(_))));
    assert!(matches!(Window::new(vec![]), Err(SymbolicError::InvalidWindow(_))));
    let u = Window::new(vec![(0.0, 1.0, 2.0), (2.0, 4.0, -1.0)]).unwrap();
    assert_eq!(u.support(), (0.0, 4.0));
    assert_eq!(u.integral(), 0.0);
    assert_eq!(u.eval(0.5), 2.0);
    assert_eq!(u.eval(1.5), 0.0);
    let v = Window::indicator(0.0, 1.0).unwrap();
    assert!((v.overlap(&v, 0.25) - 0.75).abs() < 1e-15);
    assert!((u.overlap(&v, -2.5) + 1.0).abs() < 1e-15);
}

#[test]
fn q_sum_matches_exhaustive_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = DpOptions::default();
    for case in 0..40 {
        let sys = random_system(&mut rng, if case % 2 == 0 { 3 } else { 5 }, 1 + case % 2);
        let n = sys.shift.states();
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lo = rng.random_range(-1.0..0.5);
        let u = Window::new(vec![(lo, lo + 0.7, 1.0), (lo + 0.2, lo + 1.0, 0.5)]).unwrap();
        // Roofs are at least 0.4 per edge: depth ≤ 12 on 3 states, ≤ 8 on 5.
        let t = if n <= 3 { rng.random_range(0.0..3.5) } else { rng.random_range(0.0..2.0) };
        let depth = ((t + 1.5f64) / 0.4).ceil() as usize;
        let d = sys.f.dim();
        for x in 0..n {
            for xi0 in -2..=2 {
                let xi: Vec<i64> = (0..d).map(|j| if j == 0 { xi0 } else { 1 }).collect();
                let q = q_sum(&sys.shift, &sys.r, &sys.f, &psi, &phi, &u, x, &xi, t, &opts).unwrap();
                let o = q_sum_oracle(&sys, &psi, &phi, &u, x, &xi, t, depth);
                assert!((q - o).abs() <= 1e-12 * (1.0 + o.abs()), "case {case}: {q} vs {o}");
            }
        }
    }
}

#[test]
fn correlation_examples() {
    let (sys, g) = two_shift_example();
    let opts = DpOptions::default();
    let box_ = |phi: Vec<f64>, lo: f64, hi: f64| ProductObservable { phi, xi: vec![0], u: Window::indicator(lo, hi).unwrap() };

    // The roof is log 2 per step, so supports 10 apart never meet in time.
    let a = box_(vec![1.0, 1.0], 0.0, 0.3);
    let far = i_t(&sys.shift, &g, &sys.f, 1.0, &a, &a, -10.0, &opts).unwrap();
    assert_eq!(far.direct, 0.0);
    assert_eq!(far.unfolded, 0.0);

    let p1 = ProductObservable { phi: vec![1.0, 1.0], xi: vec![1], u: Window::indicator(-0.5, 0.5).unwrap() };
    let p2 = ProductObservable { phi: vec![1.0, 0.5], xi: vec![0], u: Window::indicator(-0.25, 0.25).unwrap() };
    for t in [0.0, 1.0, 3.0 * LN_2, 4.7] {
        let pair = i_t(&sys.shift, &g, &sys.f, 2.0 * PI, &p1, &p2, t, &opts).unwrap();
        assert!(pair.relative_gap() < 1e-10, "t = {t}: {pair:?}");
        assert!(pair.direct > 0.0 || t == 0.0);
    }

    // At t = 0 only n = 0 contributes: m0/∫r̂dν · ν[0] · ∫u².
    let c = box_(vec![1.0, 0.0], 0.0, 0.3);
    let pair = i_t(&sys.shift, &g, &sys.f, 1.0, &c, &c, 0.0, &opts).unwrap();
    let expect = 1.0 / LN_2 * 0.5 * 0.3;
    assert!((pair.direct - expect).abs() < 1e-14);
    assert!((pair.unfolded - expect).abs() < 1e-14);
}

#[test]
fn correlation_unfolding_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = DpOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(0..=2);
        let sys = random_system(&mut rng, 4, d);
        let g = leading_triple(&sys.shift, &sys.r).unwrap();
        let n = sys.shift.states();
        let mut obs = || {
            let lo = rng.random_range(-1.0..1.0);
            ProductObservable {
                phi: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                xi: (0..d).map(|_| rng.random_range(-1..=1)).collect(),
                u: Window::new(vec![(lo, lo + rng.random_range(0.1..1.0), 1.0), (lo + 0.5, lo + 1.2, 0.5)]).unwrap(),
            }
        };
        let (p1, p2) = (obs(), obs());
        let t = rng.random_range(0.0..4.0);
        let pair = i_t(&sys.shift, &g, &sys.f, 2.0 * PI, &p1, &p2, t, &opts).unwrap();
        worst = worst.max(pair.relative_gap());
    }
    assert!(worst < 1e-8, "worst relative gap {worst}");
}

#[test]
fn lazy_walk_local_limit() {
    let sys = lazy_walk();
    let g = leading_triple(&sys.shift, &sys.r).unwrap();
    let u = Window::indicator(-0.5, 0.5).unwrap();
    let opts = DpOptions::default();
    let s = llt_series(&sys.shift, &g, &sys.f, &[1.0; 3], &u, &[500.0], 0, &[0], &opts).unwrap();
    let gauss = 1.0 / (2.0 * PI * 2.0 / 3.0).sqrt();
    assert!((s.covariance[0][0] - 2.0 / 3.0).abs() < 1e-6);
    assert!((s.gaussian_density - gauss).abs() < 1e-6);
    assert!(s.drift[0].abs() < 1e-12);
    let dp = s.points[0].1;
    // Only n = 455 has |n log 3 − 500| ≤ 1/2.
    let oracle = 500f64.sqrt() * trinomial_return(455);
    assert!((dp - oracle).abs() < 1e-10 * oracle);
    assert!((dp / gauss - 1.0).abs() < 0.05, "{dp} vs {gauss}");
    assert!((s.predicted - gauss / 3f64.ln().sqrt()).abs() < 1e-6);
}

#[test]
fn lazy_walk_series_settles() {
    let sys = lazy_walk();
    let g = leading_triple(&sys.shift, &sys.r).unwrap();
    let u = Window::indicator(-0.5, 0.5).unwrap();
    // Times on the roof lattice, so each t meets exactly one n.
    let grid: Vec<f64> = (0..=10).map(|k| (50 + 45 * k) as f64 * 3f64.ln()).collect();
    let s = llt_series(&sys.shift, &g, &sys.f, &[1.0; 3], &u, &grid, 1, &[0], &DpOptions::default()).unwrap();
    let vals: Vec<f64> = s.points.iter().map(|p| p.1).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!((hi - lo) / hi < 0.05, "{vals:?}");
}

#[test]
fn periodic_cocycle_is_rejected() {
    let shift = MarkovShift::full(2).unwrap();
    let r = Potential::constant(&shift, LN_2).unwrap();
    let f = Displacement::new(&shift, vec![vec![-1], vec![1]], 1).unwrap();
    let g = leading_triple(&shift, &r).unwrap();
    let u = Window::indicator(-0.5, 0.5).unwrap();
    let opts = DpOptions::default();
    let err = llt_series(&shift, &g, &f, &[1.0; 2], &u, &[10.0], 0, &[0], &opts);
    assert!(matches!(err, Err(SymbolicError::PeriodicCocycle { .. })));
    // The walk only returns to 0 after an even number of steps.
    for n in 1..12 {
        let q = q_sum(&shift, &g.normalized, &f, &g.psi, &[1.0; 2], &u, 0, &[0], n as f64 * LN_2, &opts).unwrap();
        assert_eq!(q == 0.0, n % 2 == 1, "n = {n}");
    }
}

#[test]
fn renewal_without_displacement() {
    let shift = MarkovShift::full(2).unwrap();
    let s2 = 2f64.sqrt();
    let r = Potential::new(&shift, vec![vec![1.0, s2], vec![1.0, s2]]).unwrap();
    let g = leading_triple(&shift, &r).unwrap();
    let f = Displacement::none(&shift);
    let u = Window::indicator(-0.5, 0.5).unwrap();
    let grid = [30.0, 35.0, 40.0];
    let s = llt_series(&shift, &g, &f, &[1.0, 1.0], &u, &grid, 0, &[], &DpOptions::default()).unwrap();
    let limit = g.psi[0] / g.mean_roof(&shift);
    assert!((s.predicted - limit).abs() < 1e-12);
    for (t, q) in s.points {
        assert!((q / limit - 1.0).abs() < 0.02, "t = {t}: {q} vs {limit}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn duality_holds_for_random_observables(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, 5, 0);
        let n = sys.shift.states();
        let g = leading_triple(&sys.shift, &sys.r).unwrap();
        let mut table = || (0..n).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let (a, b) = g.duality_sides(&sys.shift, &Observable::Edge(table()), &Observable::Edge(table())).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn q_sum_is_linear_in_phi(seed in any::<u64>(), k in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, 3, 1);
        let g = leading_triple(&sys.shift, &sys.r).unwrap();
        let n = sys.shift.states();
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let scaled: Vec<f64> = phi.iter().map(|v| v * k).collect();
        let u = Window::indicator(-0.5, 0.5).unwrap();
        let opts = DpOptions::default();
        let a = q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &phi, &u, 0, &[0], 3.0, &opts).unwrap();
        let b = q_sum(&sys.shift, &g.normalized, &sys.f, &g.psi, &scaled, &u, 0, &[0], 3.0, &opts).unwrap();
        prop_assert!((b - k * a).abs() < 1e-12 * (1.0 + b.abs()));
    }
}
