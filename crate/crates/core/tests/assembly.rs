mod common;

use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Matrix3, Point2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steklab::assembly::*;
use steklab::eigensolve::EnvelopeCholesky;
use steklab::geometry::*;

fn coeff(a: Matrix2<f64>, v0: f64, rho: f64) -> CoefficientField {
    CoefficientField {
        a: Arc::new(ConstantMatrix::new(a).unwrap()),
        v0: Arc::new(ConstantScalar(v0)),
        rho: Arc::new(ConstantWeight(rho)),
    }
}

fn unit_square() -> PolygonDomain {
    DomainSpec::Square { side: 1.0 }.build().unwrap()
}

/// Structured `n × n` grid of the unit square, each cell cut along its diagonal.
fn grid_mesh(n: usize) -> TriangleMesh {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            nodes.push(Point2::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut tris = Vec::new();
    for j in 0..n {
        for i in 0..n {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::from_parts(&unit_square(), nodes, tris).unwrap()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn max_diff(a: &steklab::sparse::CsrMatrix, b: &steklab::sparse::CsrMatrix) -> f64 {
    (a.to_dense() - b.to_dense()).amax()
}

#[test]
fn reference_triangle() {
    let verts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    let d = PolygonDomain::new("ref", verts.clone()).unwrap();
    let mesh = TriangleMesh::from_parts(&d, verts, vec![[0, 1, 2]]).unwrap();
    let stiff = assemble(&mesh, &coeff(Matrix2::identity(), 0.0, 1.0)).unwrap().a.to_dense();
    let expected = Matrix3::new(1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5);
    for i in 0..3 {
        for j in 0..3 {
            assert!((stiff[(i, j)] - expected[(i, j)]).abs() < 1e-15);
        }
    }
    let mass = assemble(&mesh, &coeff(Matrix2::identity(), 1.0, 1.0)).unwrap().a.to_dense() - stiff;
    for i in 0..3 {
        for j in 0..3 {
            let m = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
            assert!((mass[(i, j)] - m).abs() < 1e-15);
        }
    }
}

#[test]
fn doubling_the_matrix_doubles_the_stiffness() {
    let mesh = triangulate(&DomainSpec::Lshape { side: 1.0 }.build().unwrap(), 0.1).unwrap();
    let one = assemble(&mesh, &coeff(Matrix2::identity(), 0.0, 1.0)).unwrap().a;
    let two = assemble(&mesh, &coeff(Matrix2::identity() * 2.0, 0.0, 1.0)).unwrap().a;
    assert!(max_diff(&two, &one.scaled(2.0)) < 1e-13);
}

#[test]
fn checkerboard_on_aligned_grid() {
    let mesh = grid_mesh(16);
    let board = Checkerboard { cell: 0.25, low: 0.3, high: 2.0, offset: [0.0, 0.0] };
    let c = CoefficientField {
        a: Arc::new(board.clone()),
        v0: Arc::new(ConstantScalar(0.0)),
        rho: Arc::new(ConstantWeight(1.0)),
    };
    let a = assemble(&mesh, &c).unwrap().a;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = random_vector(&mut rng, mesh.num_nodes());
        let oracle = common::cellwise_energy(&mesh.nodes, &mesh.triangles, x.as_slice(), 0.25, |i, j| {
            if (i + j).rem_euclid(2) == 0 { 2.0 } else { 0.3 }
        });
        assert!((a.quad_form(&x) - oracle).abs() < 1e-10 * oracle);
    }
}

#[test]
fn checkerboard_on_unaligned_mesh() {
    // elements straddle the interfaces; the refined rule only approximates
    let mesh = triangulate(&unit_square(), 0.05).unwrap();
    let c = CoefficientField {
        a: Arc::new(Checkerboard { cell: 0.25, low: 0.3, high: 2.0, offset: [0.0, 0.0] }),
        v0: Arc::new(ConstantScalar(0.0)),
        rho: Arc::new(ConstantWeight(1.0)),
    };
    let a = assemble(&mesh, &c).unwrap().a;
    let x = DVector::from_iterator(mesh.num_nodes(), mesh.nodes.iter().map(|p| p.x + 0.5 * p.y));
    let oracle = common::cellwise_energy(&mesh.nodes, &mesh.triangles, x.as_slice(), 0.25, |i, j| {
        if (i + j).rem_euclid(2) == 0 { 2.0 } else { 0.3 }
    });
    assert!((a.quad_form(&x) - oracle).abs() < 0.02 * oracle);
}

#[test]
fn boundary_form_totals() {
    let d = unit_square();
    let mesh = triangulate(&d, 0.1).unwrap();
    let ones = DVector::from_element(mesh.num_nodes(), 1.0);
    let total = |rho: RhoSpec| {
        let c = CoefficientSpec { rho, ..Default::default() }.build(&d).unwrap();
        assemble(&mesh, &c).unwrap().b.quad_form(&ones)
    };
    assert!((total(RhoSpec::Constant { value: 1.0 }) - 4.0).abs() < 1e-13);
    assert!(total(RhoSpec::PerSegment { values: vec![1.0, -1.0, 1.0, -1.0] }).abs() < 1e-13);
    assert_eq!(total(RhoSpec::Constant { value: 0.0 }), 0.0);
}

#[test]
fn forms_are_symmetric_and_b_lives_on_the_boundary() {
    let d = DomainSpec::SawtoothSquare { teeth: 8, slope: 1.0 }.build().unwrap();
    let mesh = triangulate(&d, 0.05).unwrap();
    let spec = CoefficientSpec {
        a: MatrixSpec::Rotated { d1: 4.0, d2: 1.0, angle_deg: 30.0 },
        ..Default::default()
    };
    let forms = assemble(&mesh, &spec.build(&d).unwrap()).unwrap();
    assert!(forms.a.asymmetry() < 1e-14);
    assert!(forms.b.asymmetry() < 1e-14);
    EnvelopeCholesky::factor(&forms.a).expect("A is positive definite");
    let mut boundary = mesh.boundary_nodes();
    boundary.sort_unstable();
    assert_eq!(forms.boundary_dofs(), boundary);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x = random_vector(&mut rng, mesh.num_nodes());
    for &i in &boundary {
        x[i] = 0.0;
    }
    assert_eq!(forms.b.quad_form(&x), 0.0);
    assert!(forms.a.quad_form(&x) > 0.0);
}

#[test]
fn identity_pullback_changes_nothing() {
    let d = DomainSpec::Lshape { side: 1.0 }.build().unwrap();
    let mesh = triangulate(&d, 0.1).unwrap();
    let spec = CoefficientSpec {
        a: MatrixSpec::Rotated { d1: 3.0, d2: 1.0, angle_deg: 20.0 },
        v0: ScalarSpec::Constant { value: 2.0 },
        rho: RhoSpec::Constant { value: 1.5 },
    };
    let c = spec.build(&d).unwrap();
    let map = Arc::new(PiecewiseAffineMap::identity(&mesh));
    let p = pullback_coefficients(&c, &map).unwrap();
    let (f, g) = (assemble(&mesh, &c).unwrap(), assemble(&mesh, &p).unwrap());
    assert!(max_diff(&f.a, &g.a) < 1e-14);
    assert!(max_diff(&f.b, &g.b) < 1e-14);
}

#[test]
fn vertical_scaling_pullback() {
    let c = 2.5;
    let rect = PolygonDomain::new(
        "rect",
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, c), Point2::new(0.0, c)],
    )
    .unwrap();
    let mesh = triangulate(&rect, 0.2).unwrap();
    let image: Vec<_> = mesh.nodes.iter().map(|p| Point2::new(p.x, p.y / c)).collect();
    let map = Arc::new(PiecewiseAffineMap::new(mesh.clone(), image).unwrap());
    let base = coeff(Matrix2::identity(), 1.0, 1.0);
    let p = pullback_coefficients(&base, &map).unwrap();
    let y = Point2::new(0.3, 0.4);
    assert!((p.a.eval(&y) - Matrix2::new(c, 0.0, 0.0, 1.0 / c)).norm() < 1e-13);
    assert!((p.v0.eval(&y) - c).abs() < 1e-13);

    let (f, g) = (assemble(&mesh, &base).unwrap(), assemble(map.image(), &p).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let x = random_vector(&mut rng, mesh.num_nodes());
        assert!((f.a.quad_form(&x) - g.a.quad_form(&x)).abs() < 1e-12 * f.a.quad_form(&x));
        assert!((f.b.quad_form(&x) - g.b.quad_form(&x)).abs() < 1e-12 * f.b.quad_form(&x).abs().max(1.0));
    }
}

#[test]
fn straightened_forms_coincide() {
    let d = DomainSpec::SawtoothSquare { teeth: 8, slope: 1.0 }.build().unwrap();
    let chart = d.charts()[0].chart.clone();
    let map = build_straightening(&d, &chart, 0.5).unwrap();
    let pa = Arc::new(map.discretize(&triangulate(&d, 0.05).unwrap()).unwrap());
    let spec = CoefficientSpec {
        a: MatrixSpec::Rotated { d1: 4.0, d2: 1.0, angle_deg: 30.0 },
        v0: ScalarSpec::Bump { center: [0.5, 0.5], radius: 0.3, height: 2.0 },
        rho: RhoSpec::PerSegment { values: vec![1.0; d.num_edges()] },
    };
    let c = spec.build(&d).unwrap();
    let p = pullback_coefficients(&c, &pa).unwrap();
    let (f, g) = (assemble(pa.source(), &c).unwrap(), assemble(pa.image(), &p).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let x = random_vector(&mut rng, pa.source().num_nodes());
        let (ea, eb) = (f.a.quad_form(&x), f.b.quad_form(&x));
        assert!((ea - g.a.quad_form(&x)).abs() < 1e-10 * ea);
        assert!((eb - g.b.quad_form(&x)).abs() < 1e-10 * eb.abs().max(1.0));
    }
    let control = pullback_without_boundary_jacobian(&c, &pa).unwrap();
    let h = assemble(pa.image(), &control).unwrap();
    assert!(max_diff(&f.b, &h.b) > 1e-3);
}

#[test]
fn triangle_order_does_not_matter() {
    let d = DomainSpec::Lshape { side: 1.0 }.build().unwrap();
    let mesh = triangulate(&d, 0.08).unwrap();
    let spec = CoefficientSpec {
        a: MatrixSpec::Checkerboard { cell: 0.3, low: 0.5, high: 2.0, offset: [0.1037, 0.0213] },
        ..Default::default()
    };
    let mut tris = mesh.triangles.clone();
    tris.reverse();
    let shuffled: Vec<[usize; 3]> = tris.iter().map(|t| [t[1], t[2], t[0]]).collect();
    let other = TriangleMesh::from_parts(&d, mesh.nodes.clone(), shuffled).unwrap();
    let (f, g) = (assemble(&mesh, &spec.build(&d).unwrap()).unwrap(), assemble(&other, &spec.build(&d).unwrap()).unwrap());
    assert!(max_diff(&f.a, &g.a) < 1e-13, "{}", max_diff(&f.a, &g.a));
    assert!(max_diff(&f.b, &g.b) < 1e-13);
}

#[test]
fn catalog_validation() {
    let d = unit_square();
    let bad = [
        MatrixSpec::Diagonal { d1: -1.0, d2: 1.0 },
        MatrixSpec::Checkerboard { cell: 0.0, low: 1.0, high: 1.0, offset: [0.0, 0.0] },
        MatrixSpec::Mollified { base: Box::new(MatrixSpec::default()), epsilon: -0.1 },
    ];
    for spec in bad {
        assert!(spec.build(&d).is_err(), "{spec:?}");
    }
    assert!(RhoSpec::PerSegment { values: vec![1.0; 3] }.build(&d).is_err());
    assert!(ScalarSpec::Constant { value: -1.0 }.build().is_err());
    assert!(ConstantMatrix::new(Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_coefficient_invariants(d1 in 0.1f64..10.0, d2 in 0.1f64..10.0, angle in 0.0f64..180.0, v0 in 0.0f64..3.0) {
        let d = DomainSpec::Lshape { side: 1.0 }.build().unwrap();
        let mesh = triangulate(&d, 0.2).unwrap();
        let spec = CoefficientSpec {
            a: MatrixSpec::Rotated { d1, d2, angle_deg: angle },
            v0: ScalarSpec::Constant { value: v0 },
            rho: RhoSpec::Constant { value: 1.0 },
        };
        let forms = assemble(&mesh, &spec.build(&d).unwrap()).unwrap();
        let scale = d1.max(d2) + v0;
        prop_assert!(forms.a.asymmetry() < 1e-14 * scale);
        // constants carry only the potential energy v0·|Ω|
        let ones = DVector::from_element(mesh.num_nodes(), 1.0);
        prop_assert!((forms.a.quad_form(&ones) - v0 * d.signed_area()).abs() < 1e-12 * scale);
        let linear = DVector::from_iterator(mesh.num_nodes(), mesh.nodes.iter().map(|p| p.x));
        let a = spec.a.build(&d).unwrap().eval(&Point2::origin());
        let v = d.vertices();
        let second_moment: f64 = (0..v.len())
            .map(|i| {
                let (p, q) = (v[i], v[(i + 1) % v.len()]);
                (p.x * p.x + p.x * q.x + q.x * q.x) * (p.x * q.y - q.x * p.y) / 12.0
            })
            .sum();
        let mass = v0 * second_moment;
        prop_assert!((forms.a.quad_form(&linear) - a[(0, 0)] * d.signed_area() - mass).abs() < 1e-11 * scale);
    }
}
