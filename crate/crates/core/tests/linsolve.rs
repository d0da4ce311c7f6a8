use nalgebra::{DMatrix, DVector};
use obcouple::linsolve::{solve, PreparedSolver, SolverConfig, SolverError, SolverMethod};
use obcouple::sparse::Csr;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const METHODS: [SolverMethod; 4] = [SolverMethod::CgJacobi, SolverMethod::DenseDirect, SolverMethod::GeneralIterative, SolverMethod::SparseCholesky];

fn rel_residual(a: &Csr<f64>, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Random sparse SPD matrix: a diagonally shifted `B^T B` with sparse `B`.
fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |i, j| if i == j || rng.gen_bool(0.08) { rng.gen_range(-1.0..1.0) } else { 0.0 });
    b.transpose() * &b + DMatrix::identity(n, n) * 0.5
}

/// Dense to CSR, with the symmetry flag set from a numerical check.
fn to_csr(m: &DMatrix<f64>) -> Csr<f64> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    flagged(Csr::from_dense(&rows))
}

fn flagged(mut a: Csr<f64>) -> Csr<f64> {
    a.check_symmetry(1e-14);
    a
}

#[test]
fn identity_and_diagonal() {
    let b: Vec<f64> = vec![1.0, -2.0, 3.5, 0.25];
    for method in METHODS {
        let cfg = SolverConfig::with_method(method);
        let (x, _) = solve(&flagged(Csr::identity(4)), &b, &cfg).unwrap();
        assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
        let d = [2.0, 0.5, 8.0, 1e3];
        let dense: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect();
        let (x, _) = solve(&flagged(Csr::from_dense(&dense)), &b, &cfg).unwrap();
        for i in 0..4 {
            assert!((x[i] - b[i] / d[i]).abs() <= 1e-14 * (b[i] / d[i]).abs(), "{method:?}");
        }
    }
}

#[test]
fn random_spd_matches_dense_oracle() {
    let m = random_spd(50, 5);
    let a = to_csr(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let want = m.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
    for method in METHODS {
        let (x, info) = solve(&a, &b, &SolverConfig::with_method(method)).unwrap();
        assert!(rel_residual(&a, &x, &b) <= 1e-10);
        assert!(info.residual <= 1e-10);
        let err = x.iter().zip(want.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / want.norm();
        assert!(err <= 1e-9, "{method:?}: {err}");
    }
}

#[test]
fn nonsymmetric_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = DMatrix::from_fn(30, 30, |i, j| if i == j { 4.0 } else if rng.gen_bool(0.1) { rng.gen_range(-1.0..1.0) } else { 0.0 });
    let a = to_csr(&m);
    assert!(!a.symmetric);
    let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    for method in [SolverMethod::CgJacobi, SolverMethod::SparseCholesky] {
        assert!(matches!(solve(&a, &b, &SolverConfig::with_method(method)), Err(SolverError::Dispatch { .. })));
    }
    let want = m.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
    for method in [SolverMethod::DenseDirect, SolverMethod::GeneralIterative] {
        let p = PreparedSolver::new(a.clone(), SolverConfig::with_method(method)).unwrap();
        let (x, _) = p.solve(&b).unwrap();
        assert!(x.iter().zip(want.iter()).all(|(p, q)| (p - q).abs() < 1e-9));
        // A^T x = b
        let (y, _) = p.solve_transpose(&b).unwrap();
        let aty = m.transpose() * DVector::from_vec(y);
        assert!(aty.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
    }
}

#[test]
fn non_convergence_carries_history() {
    let m = random_spd(60, 1) * 1.0 + DMatrix::from_fn(60, 60, |i, j| if i == j { (i as f64 + 1.0).powi(3) } else { 0.0 });
    let a = to_csr(&m);
    let b = vec![1.0; 60];
    let cfg = SolverConfig { method: SolverMethod::CgJacobi, tolerance: 1e-14, max_iterations: 2 };
    match solve(&a, &b, &cfg) {
        Err(SolverError::NotConverged { iterations, history, .. }) => {
            assert_eq!(iterations, 2);
            assert!(!history.is_empty());
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn bad_inputs() {
    let a = flagged(Csr::identity(3));
    assert!(matches!(solve(&a, &[1.0, 2.0], &SolverConfig::default()), Err(SolverError::Shape { .. })));
    let unflagged = Csr::<f64>::identity(3);
    assert!(matches!(solve(&unflagged, &[1.0; 3], &SolverConfig::default()), Err(SolverError::Dispatch { .. })));
    let bad = SolverConfig { tolerance: 1.5, ..SolverConfig::default() };
    assert!(matches!(solve(&a, &[1.0; 3], &bad), Err(SolverError::Config(_))));
    let bad = SolverConfig { max_iterations: 0, ..SolverConfig::default() };
    assert!(matches!(solve(&a, &[1.0; 3], &bad), Err(SolverError::Config(_))));
    let (x, _) = solve(&a, &[0.0; 3], &SolverConfig::default()).unwrap();
    assert_eq!(x, vec![0.0; 3]);
    // indefinite symmetric matrix
    let indef = flagged(Csr::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]));
    assert!(matches!(solve(&indef, &[1.0, 0.0], &SolverConfig::default()), Err(SolverError::Singular { .. })));
}

#[test]
fn prepared_solver_repeats_agree() {
    let m = random_spd(80, 4);
    let p = PreparedSolver::new(to_csr(&m), SolverConfig::default()).unwrap();
    for k in 0..70 {
        let b: Vec<f64> = (0..80).map(|i| ((i * (k + 1)) as f64).cos()).collect();
        let (x, _) = p.solve(&b).unwrap();
        assert!(rel_residual(p.matrix(), &x, &b) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn methods_agree_on_spd_systems(n in 5usize..120, seed in 0u64..1000) {
        let m = random_spd(n, seed);
        let a = to_csr(&m);
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37 + seed as f64).sin()).collect();
        let (xd, _) = solve(&a, &b, &SolverConfig::with_method(SolverMethod::DenseDirect)).unwrap();
        let scale = xd.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for method in [SolverMethod::CgJacobi, SolverMethod::SparseCholesky, SolverMethod::GeneralIterative] {
            let (x, _) = solve(&a, &b, &SolverConfig::with_method(method)).unwrap();
            prop_assert!(rel_residual(&a, &x, &b) <= 1e-10);
            let diff = x.iter().zip(&xd).fold(0.0f64, |s, (p, q)| s.max((p - q).abs()));
            prop_assert!(diff <= 1e-8 * scale.max(1.0), "{:?}: {}", method, diff);
        }
    }
}
