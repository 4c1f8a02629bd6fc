use minimax_lab::classifier::{
    classify, classify_blocks, gda_stability, gda_stability_blocks, MinimaxVerdict, NashVerdict, StabilityVerdict,
    Tolerances,
};
use minimax_lab::dynamics::{run_gda, run_gda_with, Limit, LimitDetection};
use minimax_lab::linalg::{determinant, general_eigenvalues, schur_complement, symmetric_eigenvalues, Matrix};
use minimax_lab::mixed::{augmented_minimax, mixed_gap, simplex_minimax_value, EmpiricalMixedStrategy};
use minimax_lab::oracle::{max_oracle_in, moreau_envelope, MaxOracleConfig, OracleStrategy, PhiSpec};
use minimax_lab::problems::{catalog, catalog_with_param, random_quadratic_with_margins, Objective, Quadratic, Swapped};
use minimax_lab::verify::{certify_local_minimax, grid_global_minimax, GridSpec, DEFAULT_DELTA_LADDER};
use minimax_lab::{BoxDomain64, Matrix64, Point64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> impl Strategy<Value = Matrix64> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| Matrix::new(n, n, v).unwrap())
}

fn gram(m: &Matrix64, shift: f64) -> Matrix64 {
    m.transpose().matmul(m).unwrap().add(&Matrix::identity(m.rows()).scale(shift)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_sum_to_trace(m in (1usize..7).prop_flat_map(square)) {
        let eigs = general_eigenvalues(&m).unwrap();
        let sum: f64 = eigs.iter().map(|c| c.re).sum();
        let imag: f64 = eigs.iter().map(|c| c.im).sum();
        let tr = m.trace();
        prop_assert!((sum - tr).abs() <= 1e-8 * tr.abs().max(1.0));
        prop_assert!(imag.abs() <= 1e-8 * tr.abs().max(1.0));
    }

    #[test]
    fn symmetric_and_general_solvers_agree(m in (1usize..6).prop_flat_map(square)) {
        let s = m.symmetrized();
        let mut sym = symmetric_eigenvalues(&s).unwrap();
        let gen = general_eigenvalues(&s).unwrap();
        prop_assert!(gen.iter().all(|c| c.im.abs() <= 1e-8));
        let mut re: Vec<f64> = gen.iter().map(|c| c.re).collect();
        sym.sort_by(f64::total_cmp);
        re.sort_by(f64::total_cmp);
        for (a, b) in sym.iter().zip(&re) {
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn schur_with_zero_coupling_is_a(a in square(2), b in square(2)) {
        let a = a.symmetrized();
        let b = gram(&b, 0.5);
        let s = schur_complement(&a, &b, &Matrix::zeros(2, 2)).unwrap();
        prop_assert_eq!(s, a);
    }

    #[test]
    fn block_determinant_factors(a in square(2), b in square(2), c in square(2)) {
        let a = a.symmetrized();
        let b = gram(&b, 0.5);
        let full = Matrix::from_blocks(&a, &c, &c.transpose(), &b).unwrap();
        let s = schur_complement(&a, &b, &c).unwrap();
        let lhs = determinant(&full).unwrap();
        let rhs = determinant(&b).unwrap() * determinant(&s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-7 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn strict_nash_implies_strict_local_minimax(
        ra in square(2), rb in square(2), c in square(2), d1 in 1usize..3, d2 in 1usize..3
    ) {
        let tau = 0.05;
        let a = sub(&gram(&ra, tau), d1, d1);
        let b = sub(&gram(&rb, tau), d2, d2).scale(-1.0);
        let q = Quadratic::new(a, b, sub(&c, d1, d2)).unwrap();
        let cl = classify_blocks(Point64::origin(d1, d2), q.blocks(), 0.0, &Tolerances::default()).unwrap();
        if cl.nash_verdict == NashVerdict::StrictNash {
            prop_assert_eq!(cl.minimax_verdict, MinimaxVerdict::StrictLocalMinimax);
        }
    }

    #[test]
    fn transpose_duality(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quadratic_with_margins(d1, d2, 0.05, &mut rng);
        let p = Point64::origin(d1, d2);
        let direct = classify(&q, &p).unwrap();
        let swapped = classify(&Swapped(&q), &Swapped::<f64>::swap_point(&p)).unwrap();
        prop_assert_eq!(direct.minimax_verdict, swapped.maximin_verdict);
        prop_assert_eq!(direct.maximin_verdict, swapped.minimax_verdict);
    }

    #[test]
    fn jacobian_spectrum_sums_to_trace(seed in any::<u64>(), gamma in 0.1f64..1e4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quadratic_with_margins(2, 3, 0.05, &mut rng);
        let st = gda_stability_blocks(q.blocks(), gamma, 1e-8).unwrap();
        let h = q.blocks();
        let tr = -h.a.trace() / gamma + h.b.trace();
        let sum: f64 = st.eigenvalues.iter().map(|c| c.re).sum();
        prop_assert!((sum - tr).abs() <= 1e-8 * tr.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gda_runs_are_bitwise_reproducible(x in -1.0f64..1.0, y in -1.0f64..1.0, eta in 0.001f64..0.1, gamma in 0.5f64..5.0) {
        let f = catalog::<f64>("xy_cos").unwrap();
        let p0 = Point64::from_f64(&[x * 0.9], &[y * 5.0]);
        let a = run_gda(f.as_ref(), &p0, eta, gamma, 500).unwrap();
        let b = run_gda(f.as_ref(), &p0, eta, gamma, 500).unwrap();
        prop_assert_eq!(a.points, b.points);
        prop_assert_eq!(a.limit.class(), b.limit.class());
    }

    #[test]
    fn envelope_never_exceeds_phi(x in -1.8f64..1.8) {
        let f = catalog::<f64>("strong_concave_y").unwrap();
        let phi = PhiSpec::new(f.as_ref()).unwrap();
        let r = moreau_envelope(&phi, &[x], 0.2).unwrap();
        let direct = phi.max(&[x], 0.0).unwrap().value;
        prop_assert!(r.envelope_value <= direct + 1e-12);
        prop_assert!((r.grad_norm * r.lambda - (x - r.x_hat[0]).abs()).abs() <= 1e-9);
    }

    #[test]
    fn more_starts_never_lowers_the_oracle_value(x in -1.0f64..1.0, seed in 0u64..100) {
        let f = catalog::<f64>("xy_cos").unwrap();
        let ybox = f.y_box();
        let mut prev = f64::NEG_INFINITY;
        for starts in [1usize, 2, 4, 8, 16] {
            let cfg = MaxOracleConfig { strategy: OracleStrategy::MultiStart { starts }, seed, ..Default::default() };
            let v = max_oracle_in(f.as_ref(), &[x], &ybox, 0.0, &cfg).unwrap().value;
            prop_assert!(v >= prev);
            prev = v;
        }
    }
}

fn sub(m: &Matrix64, r: usize, c: usize) -> Matrix64 {
    Matrix::from_rows(&(0..r).map(|i| m.row(i)[..c].to_vec()).collect::<Vec<_>>())
}

#[test]
fn fixed_points_are_stationary_across_seeds() {
    let det = LimitDetection::default();
    for name in ["quadratic_saddle", "coupled_quadratic", "strong_concave_y", "xy_cos", "sin_sum"] {
        let f = catalog::<f64>(name).unwrap();
        for k in 0..20 {
            let t = k as f64 / 20.0;
            let p0 = Point64::from_f64(&[0.8 * t - 0.4], &[0.5 - 0.7 * t]);
            let traj = run_gda_with(f.as_ref(), &p0, 0.01, 1.0, 20_000, &det).unwrap();
            if let Limit::FixedPoint(p) = &traj.limit {
                let g = minimax_lab::problems::gradient_at(f.as_ref(), p).unwrap();
                assert!(g.norm() <= 10.0 * det.station, "{name}: {}", g.norm());
            }
        }
    }
}

#[test]
fn stable_points_attract_and_unstable_points_repel() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 10 {
        let q = random_quadratic_with_margins(2, 2, 0.2, &mut rng);
        let gamma = 1.0;
        let st = gda_stability_blocks(q.blocks(), gamma, 1e-8).unwrap();
        let worst = st.eigenvalues.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        if st.verdict != StabilityVerdict::StrictStable || worst > -0.05 {
            continue;
        }
        let ell = q.lipschitz().gradient.unwrap();
        let eta = 0.01f64.min(1.0 / (2.0 * ell));
        let p0 = Point64::from_f64(&[1e-3, -5e-4], &[4e-4, 7e-4]);
        let traj = run_gda(&q, &p0, eta, gamma, 400_000).unwrap();
        match &traj.limit {
            Limit::FixedPoint(p) => assert!(p.norm() < 1e-5, "{p}"),
            other => panic!("expected convergence, got {:?}", other.class()),
        }
        checked += 1;
    }

    for eps in [1.0, 0.5] {
        let f = catalog_with_param::<f64>("limit_minimax", eps).unwrap();
        let o = Point64::from_f64(&[0.0], &[0.0]);
        let gamma = 1.0 / eps;
        assert_eq!(gda_stability(f.as_ref(), &o, gamma).unwrap().verdict, StabilityVerdict::StrictUnstable);
        let ell = f.lipschitz().gradient.unwrap();
        let eta = 0.01f64.min(1.0 / (2.0 * ell));
        let p0 = Point64::from_f64(&[1e-3], &[0.0]);
        let traj = run_gda(f.as_ref(), &p0, eta, gamma, 200_000).unwrap();
        assert!(traj.points.iter().any(|p| p.norm() > 0.1), "eps {eps}: stayed near the origin");
    }
}

fn unit_box(d: usize) -> BoxDomain64 {
    BoxDomain64::from_intervals(&vec![(-1.0, 1.0); d])
}

#[test]
fn strict_local_minimax_catalog_points_are_certified() {
    let o = Point64::from_f64(&[0.0], &[0.0]);
    let mut seen = 0;
    for name in ["quadratic_saddle", "coupled_quadratic", "limit_minimax", "strong_concave_y", "limit_nash"] {
        let f = catalog::<f64>(name).unwrap();
        if !classify(f.as_ref(), &o).unwrap().is_strict_local_minimax() {
            continue;
        }
        seen += 1;
        let bounds = unit_box(2).intersect(&f.domain());
        for res in [201, 401] {
            let grid = GridSpec::new(bounds.clone(), res).unwrap();
            let c = certify_local_minimax(f.as_ref(), &o, &grid, &DEFAULT_DELTA_LADDER).unwrap();
            assert!(c.is_consistent(), "{name} at resolution {res}: {:?}", c.verdict);
            assert!(c.required_eps.windows(2).all(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => b <= a,
                (None, _) => true,
                (Some(_), None) => false,
            }));
        }
    }
    assert_eq!(seen, 4);
}

#[test]
fn strongly_concave_global_minimax_is_local() {
    let f = catalog::<f64>("strong_concave_y").unwrap();
    let grid = GridSpec::new(f.domain(), 401).unwrap();
    let g = grid_global_minimax(f.as_ref(), &grid).unwrap();
    let exact: Vec<_> = g.points.iter().filter(|p| p.x[0] == 0.0).collect();
    assert!(!exact.is_empty());
    for p in exact {
        let c = certify_local_minimax(f.as_ref(), p, &grid, &DEFAULT_DELTA_LADDER).unwrap();
        assert!(c.is_consistent(), "{p}: {:?}", c.verdict);
    }
}

#[test]
fn mixed_value_is_monotone_in_atom_count() {
    let f = catalog::<f64>("sin_sum").unwrap();
    let grid = GridSpec::new(BoxDomain64::from_intervals(&[(-3.0, 3.0), (-3.0, 3.0)]), 41).unwrap();
    let mut prev = f64::INFINITY;
    let mut last = None;
    for n in 1..=4 {
        let a = augmented_minimax(f.as_ref(), n, &grid, 4, 1).unwrap();
        assert!(!a.heuristic);
        assert!(a.value <= prev + a.tau_grid, "N={n}: {} after {prev}", a.value);
        prev = a.value;
        last = Some(a);
    }
    let last = last.unwrap();
    let simplex = simplex_minimax_value(f.as_ref(), &grid, 9, 4).unwrap();
    assert!(last.value <= simplex + last.tau_grid, "{} vs {simplex}", last.value);
}

#[test]
fn pure_equilibria_have_zero_mixed_gap() {
    for name in ["quadratic_saddle", "strong_concave_y"] {
        let f = catalog::<f64>(name).unwrap();
        let grid = GridSpec::new(unit_box(2).intersect(&f.domain()), 101).unwrap();
        let mu = EmpiricalMixedStrategy::point_mass(vec![0.0]);
        let gap = mixed_gap(f.as_ref(), &mu, &mu, &grid).unwrap();
        let tau = grid_global_minimax(f.as_ref(), &grid).unwrap().tau_grid;
        assert!(gap.upper_player_gap.abs() <= tau && gap.lower_player_gap.abs() <= tau, "{name}: {gap:?}");
    }
}

#[test]
fn refinement_never_refutes_a_consistent_certificate() {
    let o = Point64::from_f64(&[0.0], &[0.0]);
    for name in ["quadratic_saddle", "coupled_quadratic", "limit_minimax", "xy_cos_concave"] {
        let f = catalog::<f64>(name).unwrap();
        let bounds = unit_box(2).intersect(&f.domain());
        let mut consistent = false;
        for res in [201, 401, 801] {
            let grid = GridSpec::new(bounds.clone(), res).unwrap();
            let c = certify_local_minimax(f.as_ref(), &o, &grid, &DEFAULT_DELTA_LADDER).unwrap();
            assert!(!(consistent && c.is_refuted()), "{name} flipped at resolution {res}");
            consistent |= c.is_consistent();
        }
    }
}
