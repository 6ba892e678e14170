use nalgebra::{DMatrix, DVector};
use rand::{rngs::StdRng, Rng, SeedableRng};
use spacetime_oc::spacetime::{
    EigenStrategy, OperatorKind, OperatorOptions, QuadratureOrders, SpaceTimeVector, SystemOperator,
};
use spacetime_oc::spatial::SimplicialMesh;
use spacetime_oc::temporal::{assemble_temporal_mass, TemporalMesh};
use spacetime_oc::Error;

fn operator(d: usize, n_x: usize, n_t: usize, rho: f64, eigen: EigenStrategy) -> SystemOperator {
    let opts = OperatorOptions { eigen, ..Default::default() };
    SystemOperator::assemble(TemporalMesh::unit(n_t).unwrap(), SimplicialMesh::structured(d, n_x).unwrap(), rho, &opts)
        .unwrap()
}

fn random_vector(op: &SystemOperator, rng: &mut StdRng) -> SpaceTimeVector {
    SpaceTimeVector::from_fn(op.n_t(), op.m_x(), |_, _| rng.gen_range(-1.0..1.0))
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

fn dense_apply(m: &DMatrix<f64>, v: &SpaceTimeVector) -> Vec<f64> {
    (m * DVector::from_column_slice(v.as_slice())).as_slice().to_vec()
}

#[test]
fn matrix_free_paths_match_dense_kronecker_assembly() {
    let mut rng = StdRng::seed_from_u64(7);
    for &(d, n_x, n_t) in &[(1usize, 4usize, 4usize), (1, 8, 3), (2, 3, 5)] {
        let h2 = (n_x as f64).powi(-2);
        for rho in [0.0, 0.1, h2] {
            for eigen in [EigenStrategy::Auto, EigenStrategy::Dense] {
                let op = operator(d, n_x, n_t, rho, eigen);
                let k = op.dense_oracle(OperatorKind::System).unwrap();
                let dd = op.dense_oracle(OperatorKind::Energy).unwrap();
                let b = op.dense_oracle(OperatorKind::Control).unwrap();
                for _ in 0..20 {
                    let v = random_vector(&op, &mut rng);
                    let tag = format!("d={d} n_x={n_x} n_t={n_t} rho={rho} {eigen:?}");
                    assert!(rel_diff(op.apply_operator(&v).unwrap().as_slice(), &dense_apply(&k, &v)) < 1e-10, "{tag}");
                    assert!(
                        rel_diff(op.apply_energy_operator(&v).unwrap().as_slice(), &dense_apply(&dd, &v)) < 1e-10,
                        "{tag}"
                    );
                    assert!(rel_diff(op.recover_control(&v).unwrap().as_slice(), &dense_apply(&b, &v)) < 1e-12, "{tag}");
                }
            }
        }
    }
}

#[test]
fn zero_rho_is_the_mass_kronecker_product() {
    let op = operator(1, 4, 3, 0.0, EigenStrategy::Auto);
    let k = op.dense_oracle(OperatorKind::System).unwrap();
    let mass = op.temporal_mass().to_dense().kronecker(&op.spatial_mass().to_dense());
    assert!((&k - &mass).amax() < 1e-15);
    for col in [0usize, 4, 8] {
        let mut e = op.zeros();
        e.as_mut_slice()[col] = 1.0;
        let w = op.apply_operator(&e).unwrap();
        let expected: Vec<f64> = mass.column(col).iter().copied().collect();
        assert!(rel_diff(w.as_slice(), &expected) < 1e-12);
    }
    assert!(k.clone().cholesky().is_some());
}

#[test]
fn oracle_size_guard() {
    let op = operator(2, 10, 80, 0.1, EigenStrategy::Auto);
    assert!(op.n_dofs() > 4096);
    assert!(matches!(op.dense_oracle(OperatorKind::System), Err(Error::SizeGuard { .. })));
}

#[test]
fn separable_bilinear_identity() {
    let op = operator(1, 6, 5, 0.3, EigenStrategy::Auto);
    let a: Vec<f64> = (0..op.n_t()).map(|k| 1.0 + k as f64 * 0.3).collect();
    let b: Vec<f64> = (0..op.m_x()).map(|i| (i as f64 * 1.1).cos()).collect();
    let v = SpaceTimeVector::from_fn(op.n_t(), op.m_x(), |k, i| a[k] * b[i]);
    let quad_t = |m: &DMatrix<f64>| (DVector::from_column_slice(&a).transpose() * m * DVector::from_column_slice(&a))[0];
    let quad_x = |m: &DMatrix<f64>| (DVector::from_column_slice(&b).transpose() * m * DVector::from_column_slice(&b))[0];
    let (mt, at) = (op.temporal_mass().to_dense(), op.temporal_hilbert().as_matrix().clone());
    let (mx, ax) = (op.spatial_mass().to_dense(), op.spatial_stiffness().to_dense());
    let expected = quad_t(&mt) * quad_x(&mx) + 0.3 * (quad_t(&at) * quad_x(&mx) + quad_t(&mt) * quad_x(&ax));
    let got = v.dot(&op.apply_operator(&v).unwrap());
    assert!((got - expected).abs() < 1e-12 * expected.abs());
}

#[test]
fn symmetry_positivity_and_energy() {
    let mut rng = StdRng::seed_from_u64(11);
    let op = operator(2, 4, 6, 1.0 / 16.0, EigenStrategy::Auto);
    let mass = operator(2, 4, 6, 0.0, EigenStrategy::Auto);
    for _ in 0..100 {
        let v = random_vector(&op, &mut rng);
        let w = random_vector(&op, &mut rng);
        let kv = op.apply_operator(&v).unwrap();
        let kw = op.apply_operator(&w).unwrap();
        let (a, b) = (w.dot(&kv), v.dot(&kw));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300) * 10.0);
        assert!(v.dot(&kv) >= v.dot(&mass.apply_operator(&v).unwrap()));
    }
    let v = random_vector(&op, &mut rng);
    let e = op.anisotropic_norm_sq(&v).unwrap();
    assert!(e > 0.0);
    assert!((e - v.dot(&op.apply_energy_operator(&v).unwrap())).abs() < 1e-12 * e);
    let mut scaled = v.clone();
    scaled.as_mut_slice().iter_mut().for_each(|x| *x *= 2.5);
    assert!((op.anisotropic_norm_sq(&scaled).unwrap() - 6.25 * e).abs() < 1e-12 * e);
    assert_eq!(op.anisotropic_norm_sq(&op.zeros()).unwrap(), 0.0);
    assert!(op.apply_energy_operator(&op.zeros()).unwrap().norm_inf() == 0.0);
    assert!(op.recover_control(&op.zeros()).unwrap().norm_inf() == 0.0);
}

#[test]
fn temporal_energy_part_of_separable_interpolant() {
    // (a^T A_t a)(b^T M_x b) -> (pi/4)(1/2) for a = sin(pi t/2), b = sin(pi x)
    let target = std::f64::consts::PI / 8.0;
    let mut errors = Vec::new();
    for n in [8usize, 16, 32] {
        let op = operator(1, n, n, 1.0, EigenStrategy::Auto);
        let a: Vec<f64> =
            (0..n).map(|k| (std::f64::consts::FRAC_PI_2 * op.temporal_mesh().dof_time(k)).sin()).collect();
        let b = op.spatial_mesh().interpolate(|x| (std::f64::consts::PI * x[0]).sin());
        let at = op.temporal_hilbert().as_matrix();
        let ta = (DVector::from_column_slice(&a).transpose() * at * DVector::from_column_slice(&a))[0];
        let mut mb = vec![0.0; b.len()];
        op.spatial_mass().apply(&b, &mut mb);
        let xb: f64 = b.iter().zip(&mb).map(|(x, y)| x * y).sum();
        errors.push((ta * xb - target).abs());
    }
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
    assert!(errors[2] < 2e-3, "{errors:?}");
}

#[test]
fn control_has_nonnegative_energy() {
    let mut rng = StdRng::seed_from_u64(3);
    let op = operator(1, 5, 4, 0.0, EigenStrategy::Auto);
    for _ in 0..20 {
        let u = random_vector(&op, &mut rng);
        let bu = op.recover_control(&u).unwrap();
        // temporal part is half the M_x-weighted terminal value squared
        let last = u.slice(op.n_t() - 1);
        let mut ml = vec![0.0; last.len()];
        op.spatial_mass().apply(last, &mut ml);
        let terminal: f64 = 0.5 * last.iter().zip(&ml).map(|(a, b)| a * b).sum::<f64>();
        let mut ax = 0.0;
        let mut tmp = vec![0.0; op.m_x()];
        let mt = assemble_temporal_mass(op.temporal_mesh());
        for k in 0..op.n_t() {
            for l in 0..op.n_t() {
                let m = mt.get(k, l);
                if m != 0.0 {
                    op.spatial_stiffness().apply(u.slice(l), &mut tmp);
                    ax += m * u.slice(k).iter().zip(&tmp).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        let got = u.dot(&bu);
        assert!(got >= 0.0);
        assert!((got - terminal - ax).abs() < 1e-12 * got.abs().max(1.0));
    }
}

#[test]
fn transforms_round_trip_and_matvec_count() {
    let mut rng = StdRng::seed_from_u64(5);
    for eigen in [EigenStrategy::Auto, EigenStrategy::Dense] {
        let op = operator(1, 6, 9, 0.2, eigen);
        let basis = op.eigenbasis();
        let v: Vec<f64> = (0..op.n_t()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = basis.synthesis(&basis.analysis(&v));
        assert!(rel_diff(&back, &v) < 1e-12);
        let mut mv = vec![0.0; v.len()];
        op.temporal_mass().apply(&v, &mut mv);
        assert!(rel_diff(&basis.mass_synthesis(&basis.analysis(&v)), &mv) < 1e-12);

        let before = op.spatial_matvec_count();
        op.apply_operator(&random_vector(&op, &mut rng)).unwrap();
        assert_eq!(op.spatial_matvec_count() - before, 2 * op.n_t());
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let op = operator(1, 4, 3, 0.1, EigenStrategy::Auto);
    let wrong = SpaceTimeVector::zeros(2, 3);
    assert!(matches!(op.apply_operator(&wrong), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(op.recover_control(&wrong), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn load_vector_examples() {
    let op = operator(1, 4, 4, 0.1, EigenStrategy::Auto);
    let f = op.assemble_load_vector(|_, _| 0.0, QuadratureOrders::default()).unwrap();
    assert_eq!(f.norm_inf(), 0.0);

    let f = op.assemble_load_vector(|_, _| 1.0, QuadratureOrders::default()).unwrap();
    let (ht, hx) = (op.temporal_mesh().step(), op.spatial_mesh().step());
    for k in 0..op.n_t() {
        let tk = if k + 1 == op.n_t() { 0.5 * ht } else { ht };
        for i in 0..op.m_x() {
            assert!((f.get(k, i) - tk * hx).abs() < 1e-15);
        }
    }

    let g = |x: &[f64], t: f64| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * t).sin();
    let f3 = op.assemble_load_vector(g, QuadratureOrders::uniform(3)).unwrap();
    let f5 = op.assemble_load_vector(g, QuadratureOrders::uniform(5)).unwrap();
    let diff = f3.as_slice().iter().zip(f5.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // two-point Gauss carries a relative error of about 5e-4 at h = 1/4
    assert!(diff <= 1e-3 * f5.norm_inf(), "{diff:e}");
    let f4 = op.assemble_load_vector(g, QuadratureOrders::uniform(4)).unwrap();
    let diff45 = f4.as_slice().iter().zip(f5.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff45 <= 1e-5 * f5.norm_inf(), "{diff45:e}");
    assert!(matches!(op.assemble_load_vector(g, QuadratureOrders::uniform(9)), Err(Error::QuadratureOrder(9))));
}

#[test]
fn l2_error_examples() {
    let op = operator(2, 4, 3, 0.1, EigenStrategy::Auto);
    let zero = op.zeros();
    assert!((op.l2_error(&zero, |_, _| 1.0, None, 5).unwrap() - 1.0).abs() < 1e-12);
    assert!((op.l2_error(&zero, |_, _| 1.0, Some((0.0, 0.8)), 5).unwrap() - 0.8).abs() < 1e-12);

    // interpolation error of a smooth function is second order (d=1)
    let g = |x: &[f64], t: f64| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * t).sin();
    let errors: Vec<f64> = [4usize, 8, 16, 32]
        .iter()
        .map(|&n| {
            let op = operator(1, n, n, 0.0, EigenStrategy::Auto);
            op.l2_error(&op.interpolate(g), g, None, 5).unwrap()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{errors:?}");
    }
}

#[test]
fn invalid_rho_rejected() {
    let r = SystemOperator::assemble(
        TemporalMesh::unit(2).unwrap(),
        SimplicialMesh::structured(1, 3).unwrap(),
        -0.5,
        &OperatorOptions::default(),
    );
    assert!(matches!(r, Err(Error::Config(_))));
}
