use std::sync::Arc;

use nalgebra::DMatrix;
use obcouple::fem::{
    self, apply_dirichlet, assemble_body_load, assemble_stiffness, assemble_traction_load, constant_field, hex8, DirichletSpec, LoadSpec,
};
use obcouple::geometry::{classify_regions, generate_hex_mesh, generate_point_cloud, Aabb, NamedBoxes};
use obcouple::linsolve::{solve, SolverConfig};
use obcouple::verification::{mms_case, MmsName};
use obcouple::{BoxUnion, Decomposition, Error, HexMesh, MaterialParams, Vec3};

fn steel() -> MaterialParams {
    MaterialParams::from_bulk_poisson(140_000.0, 0.3).unwrap()
}

fn mesh(hi: Vec3<f64>, h: f64) -> HexMesh {
    generate_hex_mesh(&BoxUnion::single([0.0; 3], hi).unwrap(), h).unwrap()
}

fn with_sets(mut m: HexMesh, h: f64, nodes: Vec<NamedBoxes<f64>>, faces: Vec<NamedBoxes<f64>>) -> HexMesh {
    let hi = m.nodes.iter().fold([f64::MIN; 3], |a, x| [0, 1, 2].map(|c| a[c].max(x[c])));
    let lo = m.nodes.iter().fold([f64::MAX; 3], |a, x| [0, 1, 2].map(|c| a[c].min(x[c])));
    let mut cloud = generate_point_cloud(&BoxUnion::single(lo, hi).unwrap(), h).unwrap();
    let d = Decomposition {
        omega_n: vec![Aabb::new(lo, hi)],
        node_sets: nodes,
        face_sets: faces,
        ..Decomposition::default()
    };
    classify_regions(&mut cloud, &mut m, &d).unwrap();
    m
}

fn named(name: &str, boxes: Vec<Aabb<f64>>) -> NamedBoxes<f64> {
    NamedBoxes { name: name.into(), boxes }
}

#[test]
fn unit_element_has_six_rigid_modes() {
    let x = [[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.], [0., 0., 1.], [1., 0., 1.], [1., 1., 1.], [0., 1., 1.]];
    let k = hex8::element_stiffness(&x, 1.0, 1.0, 0).unwrap();
    let m = DMatrix::from_fn(24, 24, |i, j| k[i][j]);
    assert!((&m - m.transpose()).amax() < 1e-14);
    let eig = m.symmetric_eigenvalues();
    let zeros = eig.iter().filter(|v: &&f64| v.abs() < 1e-10).count();
    let positive = eig.iter().filter(|&&v| v > 1e-10).count();
    assert_eq!((zeros, positive), (6, 18));
}

#[test]
fn degenerate_cell_is_reported() {
    let mut x = [[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.], [0., 0., 1.], [1., 0., 1.], [1., 1., 1.], [0., 1., 1.]];
    x[6] = x[0];
    x[5] = x[0];
    x[7] = x[0];
    x[4] = x[0];
    assert!(matches!(hex8::element_stiffness(&x, 1.0, 1.0, 7), Err(Error::Assembly { cell: 7, .. })));
}

#[test]
fn stiffness_annihilates_rigid_modes() {
    let m = mesh([2.0, 1.5, 1.0], 0.5);
    let k = assemble_stiffness(&m, &steel()).unwrap();
    let scale = k.max_abs();
    let modes: Vec<Box<dyn Fn(Vec3<f64>) -> Vec3<f64>>> = vec![
        Box::new(|_| [1.0, 0.0, 0.0]),
        Box::new(|_| [0.0, 1.0, 0.0]),
        Box::new(|_| [0.0, 0.0, 1.0]),
        Box::new(|x| [0.0, -x[2], x[1]]),
        Box::new(|x| [x[2], 0.0, -x[0]]),
        Box::new(|x| [-x[1], x[0], 0.0]),
    ];
    for f in &modes {
        let u: Vec<f64> = m.nodes.iter().flat_map(|&x| f(x)).collect();
        let umax = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ku = k.apply(&u);
        assert!(ku.iter().all(|v| v.abs() <= 1e-10 * scale * umax));
    }
    assert!(k.asymmetry() <= 1e-12 * scale);
}

#[test]
fn body_load_examples() {
    let one = mesh([1.0; 3], 1.0);
    let f = assemble_body_load(&one, &|_| [8.0, -16.0, 4.0]).unwrap();
    for c in f.chunks_exact(3) {
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] + 2.0).abs() < 1e-14 && (c[2] - 0.5).abs() < 1e-14);
    }
    assert!(assemble_body_load(&one, &|_| [0.0; 3]).unwrap().iter().all(|&v| v == 0.0));

    let m = mesh([2.0, 1.5, 1.0], 0.25);
    let f = assemble_body_load(&m, &|_| [3.0, 0.0, -1.0]).unwrap();
    let total: [f64; 3] = [0, 1, 2].map(|c| f.iter().skip(c).step_by(3).sum());
    assert!((total[0] - 9.0).abs() < 1e-12 * 9.0);
    assert!((total[2] + 3.0).abs() < 1e-12 * 3.0);
}

#[test]
fn neumann_end_face_resultant() {
    let m = generate_hex_mesh(&BoxUnion::single([-16.0, -4.0, -2.0], [-8.0, 4.0, 2.0]).unwrap(), 1.0).unwrap();
    let m = with_sets(
        m,
        1.0,
        vec![],
        vec![
            named("left_face", vec![Aabb::new([-16.0, -4.0, -2.0], [-16.0, 4.0, 2.0])]),
            named("lower", vec![Aabb::new([-16.0, -4.0, -2.0], [-16.0, 0.0, 2.0])]),
            named("upper", vec![Aabb::new([-16.0, 0.0, -2.0], [-16.0, 4.0, 2.0])]),
        ],
    );
    let tau = [-1700.0, 0.0, 0.0];
    let f = assemble_traction_load(&m, "left_face", tau).unwrap();
    let fx: f64 = f.iter().step_by(3).sum();
    assert!((fx + 54400.0).abs() <= 1e-12 * 54400.0);
    let lo = assemble_traction_load(&m, "lower", tau).unwrap();
    let up = assemble_traction_load(&m, "upper", tau).unwrap();
    for ((a, b), c) in lo.iter().zip(&up).zip(&f) {
        assert!((a + b - c).abs() <= 1e-12 * 54400.0);
    }
    assert!(assemble_traction_load(&m, "left_face", [0.0; 3]).unwrap().iter().all(|&v| v == 0.0));
    assert!(matches!(m.faces_in(&[Aabb::new([-12.0, -4.0, -2.0], [-12.0, 4.0, 2.0])]), Err(Error::Topology(_))));
    assert!(assemble_traction_load(&m, "missing", tau).is_err());
}

fn boundary_spec(value: fem::VectorField<f64>, hi: Vec3<f64>) -> (Vec<NamedBoxes<f64>>, LoadSpec<f64>) {
    let faces = vec![
        Aabb::new([0.0; 3], [0.0, hi[1], hi[2]]),
        Aabb::new([hi[0], 0.0, 0.0], hi),
        Aabb::new([0.0; 3], [hi[0], 0.0, hi[2]]),
        Aabb::new([0.0, hi[1], 0.0], hi),
        Aabb::new([0.0; 3], [hi[0], hi[1], 0.0]),
        Aabb::new([0.0, 0.0, hi[2]], hi),
    ];
    let spec = LoadSpec {
        body: None,
        tractions: vec![],
        dirichlet: vec![DirichletSpec { node_set: "skin".into(), mask: [true; 3], value }],
    };
    (vec![named("skin", faces)], spec)
}

fn solve_fe(m: &HexMesh, spec: &LoadSpec<f64>) -> Vec<f64> {
    let k = assemble_stiffness(m, &steel()).unwrap();
    let f = fem::assemble_loads(m, spec).unwrap();
    let fixed = fem::constrained_dofs(m, spec).unwrap();
    let sys = apply_dirichlet(&k, &f, &fixed).unwrap();
    let (x, _) = solve(&sys.matrix, &sys.rhs, &SolverConfig::default()).unwrap();
    sys.expand(&x)
}

#[test]
fn fe_reproduces_affine_and_quadratic_fields() {
    let hi = [1.0, 0.75, 0.5];
    let lin: fem::VectorField<f64> = Arc::new(|x| [x[0] + 0.2 * x[1], -0.1 * x[2], 0.3 * x[0]]);
    let (sets, spec) = boundary_spec(lin.clone(), hi);
    let m = with_sets(mesh(hi, 0.25), 0.25, sets, vec![]);
    let u = solve_fe(&m, &spec);
    for (n, x) in m.nodes.iter().enumerate() {
        let e = lin(*x);
        assert!((0..3).all(|c| (u[3 * n + c] - e[c]).abs() < 1e-12));
    }

    // quadratic-II with its consistent body load is nodally exact on a uniform mesh
    let case = mms_case(MmsName::QuadraticII, steel()).unwrap();
    let (sets, mut spec) = boundary_spec(case.u.clone(), hi);
    spec.body = Some(case.b.clone());
    let m = with_sets(mesh(hi, 0.25), 0.25, sets, vec![]);
    let u = solve_fe(&m, &spec);
    for (n, x) in m.nodes.iter().enumerate() {
        let e = (case.u)(*x);
        assert!((0..3).all(|c| (u[3 * n + c] - e[c]).abs() < 1e-11), "node {n}");
    }
}

#[test]
fn conflicting_dirichlet_values_are_rejected() {
    let hi = [1.0; 3];
    let m = with_sets(mesh(hi, 0.5), 0.5, vec![named("a", vec![Aabb::new([0.0; 3], [0.0, 1.0, 1.0])]), named("b", vec![Aabb::new([0.0; 3], [1.0, 1.0, 0.0])])], vec![]);
    let spec = LoadSpec {
        body: None,
        tractions: vec![],
        dirichlet: vec![
            DirichletSpec { node_set: "a".into(), mask: [true, false, false], value: constant_field([1.0, 0.0, 0.0]) },
            DirichletSpec { node_set: "b".into(), mask: [true, false, false], value: constant_field([2.0, 0.0, 0.0]) },
        ],
    };
    assert!(fem::constrained_dofs(&m, &spec).is_err());
    let missing = LoadSpec {
        dirichlet: vec![DirichletSpec { node_set: "nope".into(), mask: [true; 3], value: constant_field([0.0; 3]) }],
        ..LoadSpec::default()
    };
    assert!(fem::constrained_dofs(&m, &missing).is_err());
}
