use minimax_lab::problems::{
    catalog, catalog_entries, fd_gradient, fd_hessian, gradient_at, ExprObjective, Objective, Point, Swapped,
};
use minimax_lab::BoxDomain64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform point in the domain shrunk by `margin`, with unbounded axes
/// replaced by `[-2, 2]`.
fn sample(f: &dyn Objective<f64>, margin: f64, rng: &mut ChaCha8Rng) -> Point<f64> {
    let d = f.domain();
    let z: Vec<f64> = (0..d.dim())
        .map(|k| {
            let l = if d.lower[k].is_finite() { d.lower[k] + margin } else { -2.0 };
            let u = if d.upper[k].is_finite() { d.upper[k] - margin } else { 2.0 };
            rng.gen_range(l..u)
        })
        .collect();
    Point::from_stacked(&z, f.dim_x())
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for entry in catalog_entries() {
        let f = catalog::<f64>(entry.name).unwrap();
        for _ in 0..100 {
            let p = sample(f.as_ref(), 1e-3, &mut rng);
            let Some(g) = f.gradient(&p.x, &p.y) else { continue };
            let fd = fd_gradient(f.as_ref(), &p, 1e-5).unwrap();
            let dev = g
                .stacked()
                .iter()
                .zip(fd.stacked())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dev <= 1e-6, "{} at {p}: {dev}", entry.name);
        }
    }
}

#[test]
fn fd_hessian_is_symmetric_and_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for entry in catalog_entries() {
        let f = catalog::<f64>(entry.name).unwrap();
        for _ in 0..20 {
            let p = sample(f.as_ref(), 1e-2, &mut rng);
            let h = fd_hessian(f.as_ref(), &p, 1e-4).unwrap();
            assert_eq!(h.a, h.a.transpose());
            assert_eq!(h.b, h.b.transpose());
            // ∂²f/∂x∂y from differences of the x-gradient in y.
            let step = 1e-5;
            for j in 0..f.dim_y() {
                let mut up = p.clone();
                let mut dn = p.clone();
                up.y[j] += step;
                dn.y[j] -= step;
                let gu = fd_gradient(f.as_ref(), &up, 1e-5).unwrap();
                let gd = fd_gradient(f.as_ref(), &dn, 1e-5).unwrap();
                for i in 0..f.dim_x() {
                    let other = (gu.gx[i] - gd.gx[i]) / (2.0 * step);
                    assert!((h.c[(i, j)] - other).abs() <= 1e-5 * (1.0 + other.abs()), "{}", entry.name);
                }
            }
        }
    }
}

#[test]
fn declared_lipschitz_constants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for entry in catalog_entries() {
        let f = catalog::<f64>(entry.name).unwrap();
        let lip = f.lipschitz();
        let bounded = f.domain().is_bounded();
        for _ in 0..1000 {
            let p = sample(f.as_ref(), 0.0, &mut rng);
            let q = sample(f.as_ref(), 0.0, &mut rng);
            let d = p.distance(&q);
            if let Some(ell) = lip.gradient {
                let gp = gradient_at(f.as_ref(), &p).unwrap().stacked();
                let gq = gradient_at(f.as_ref(), &q).unwrap().stacked();
                let dg = gp.iter().zip(&gq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(dg <= ell * d * (1.0 + 1e-9) + 1e-12, "{}: ℓ {ell} violated", entry.name);
            }
            if let (Some(big_l), true) = (lip.value, bounded) {
                let dv = (f.value(&p.x, &p.y) - f.value(&q.x, &q.y)).abs();
                assert!(dv <= big_l * d * (1.0 + 1e-9) + 1e-12, "{}: L {big_l} violated", entry.name);
            }
        }
    }
}

#[test]
fn swapped_objective_negates_and_exchanges() {
    let f = catalog::<f64>("coupled_quadratic").unwrap();
    let g = Swapped(f.as_ref());
    let p = Point::from_f64(&[0.3], &[-0.7]);
    let q = Swapped::<f64>::swap_point(&p);
    assert_eq!(g.value(&q.x, &q.y), -f.value(&p.x, &p.y));
}

#[test]
fn expression_objective_matches_catalog() {
    let e = ExprObjective::<f64>::parse("0.2*x*y - cos(y)")
        .unwrap()
        .with_domain(BoxDomain64::from_intervals(&[(-1.0, 1.0), (-6.0, 6.0)]))
        .unwrap();
    let f = catalog::<f64>("xy_cos").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let p = sample(f.as_ref(), 0.1, &mut rng);
        assert!((e.value(&p.x, &p.y) - f.value(&p.x, &p.y)).abs() < 1e-14);
        let ge = gradient_at(&e, &p).unwrap();
        let gf = gradient_at(f.as_ref(), &p).unwrap();
        assert!((ge.gx[0] - gf.gx[0]).abs() < 1e-8 && (ge.gy[0] - gf.gy[0]).abs() < 1e-8);
    }
}
