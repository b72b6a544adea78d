mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steklab::assembly::*;
use steklab::eigensolve::*;
use steklab::geometry::*;
use steklab::sparse::CsrMatrix;

fn spectrum(positive: Vec<f64>, negative: Vec<f64>) -> Spectrum {
    Spectrum {
        positive_residuals: vec![0.0; positive.len()],
        negative_residuals: vec![0.0; negative.len()],
        boundary_dofs: positive.len() + negative.len(),
        positive,
        negative,
        method: Method::Dense,
        null_count: 0,
    }
}

fn forms(domain: &PolygonDomain, h: f64, spec: &CoefficientSpec) -> AssembledForms {
    let mesh = triangulate(domain, h).unwrap();
    assemble(&mesh, &spec.build(domain).unwrap()).unwrap()
}

fn square() -> PolygonDomain {
    DomainSpec::Square { side: 1.0 }.build().unwrap()
}

fn disk() -> PolygonDomain {
    DomainSpec::RegularNgon { n: 256, r: 1.0 }.build().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn doubling_the_energy_halves_the_spectrum() {
    let d = square();
    let one = forms(&d, 0.1, &CoefficientSpec::default());
    let two = forms(
        &d,
        0.1,
        &CoefficientSpec {
            a: MatrixSpec::Constant { scale: 2.0 },
            v0: ScalarSpec::Constant { value: 2.0 },
            ..Default::default()
        },
    );
    let (s1, s2) = (solve_condensed(&one.a, &one.b).unwrap(), solve_condensed(&two.a, &two.b).unwrap());
    assert_eq!(s1.positive.len(), s2.positive.len());
    for (x, y) in s1.positive.iter().zip(&s2.positive) {
        assert!(rel(2.0 * y, *x) < 1e-10);
    }
}

#[test]
fn solvers_agree() {
    let d = DomainSpec::Lshape { side: 1.0 }.build().unwrap();
    let f = forms(
        &d,
        0.1,
        &CoefficientSpec {
            a: MatrixSpec::Rotated { d1: 4.0, d2: 1.0, angle_deg: 30.0 },
            ..Default::default()
        },
    );
    let dense = solve_dense(&f.a, &f.b).unwrap();
    let cond = solve_condensed(&f.a, &f.b).unwrap();
    assert_eq!(dense.positive.len(), cond.positive.len());
    for (x, y) in dense.positive.iter().zip(&cond.positive) {
        assert!(rel(*y, *x) < 1e-8);
    }
    assert!(dense.max_residual() < DENSE_TOL);
    assert!(cond.max_residual() < DENSE_TOL);
    assert_eq!(dense.positive.len() + dense.null_count, f.a.nrows());
    let it = solve_iterative(&f.a, &f.b, 1, LanczosOptions::default()).unwrap();
    assert!(rel(it.positive[0], dense.positive[0]) < ITERATIVE_TOL);
    let it = solve_iterative(&f.a, &f.b, 10, LanczosOptions::default()).unwrap();
    for k in 0..10 {
        assert!(rel(it.positive[k], dense.positive[k]) < 1e-6, "k = {k}");
        assert!(it.positive_residuals[k] < 1e-5);
    }
}

#[test]
fn zero_weight_has_no_spectrum() {
    let f = forms(&square(), 0.2, &CoefficientSpec { rho: RhoSpec::Constant { value: 0.0 }, ..Default::default() });
    for s in [solve_dense(&f.a, &f.b).unwrap(), solve_condensed(&f.a, &f.b).unwrap()] {
        assert!(s.positive.is_empty() && s.negative.is_empty());
        assert_eq!(counting(&s, 1e-12, Sign::Plus), 0);
    }
}

#[test]
fn flipping_the_weight_swaps_the_branches() {
    let d = square();
    let rho = vec![1.0, -0.5, 2.0, -1.0];
    let f = forms(&d, 0.1, &CoefficientSpec { rho: RhoSpec::PerSegment { values: rho.clone() }, ..Default::default() });
    let flipped: Vec<f64> = rho.iter().map(|v| -v).collect();
    let g = forms(&d, 0.1, &CoefficientSpec { rho: RhoSpec::PerSegment { values: flipped }, ..Default::default() });
    let (s, t) = (solve_condensed(&f.a, &f.b).unwrap(), solve_condensed(&g.a, &g.b).unwrap());
    assert!(!s.positive.is_empty() && !s.negative.is_empty());
    assert_eq!(s.positive.len(), t.negative.len());
    assert_eq!(s.negative.len(), t.positive.len());
    for (x, y) in s.positive.iter().zip(&t.negative) {
        assert!(rel(-y, *x) < 1e-10);
    }
    for w in s.negative.windows(2) {
        assert!(w[0] <= w[1]);
    }
}

#[test]
fn counting_function() {
    let s = spectrum(vec![3.0, 2.0, 2.0, 0.5], vec![-1.0, -0.1]);
    assert_eq!(counting(&s, 2.0, Sign::Plus), 3);
    assert_eq!(counting(&s, 2.5, Sign::Plus), 1);
    assert_eq!(counting(&s, 0.01, Sign::Plus), 4);
    assert_eq!(counting(&s, 0.5, Sign::Minus), 1);
    assert_eq!(counting(&s, 10.0, Sign::Minus), 0);
}

#[test]
fn tail_fit_tolerates_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mu: Vec<f64> = (1..=400).map(|k| 0.7 / k as f64 * (1.0 + rng.random_range(-0.05..0.05))).collect();
    let mut mu = mu;
    mu.sort_by(|a, b| b.total_cmp(a));
    let s = spectrum(mu, vec![]);
    let fit = tail_coefficient(&s, Sign::Plus, 1, None).unwrap();
    assert_eq!((fit.k_min, fit.k_max), (5, 100));
    assert!(rel(fit.estimate, 0.7) < 0.02);
    assert!(fit.low <= fit.estimate && fit.estimate <= fit.high);
    // second power
    let s = spectrum((1..=100).map(|k| (2.0 / k as f64).sqrt()).collect(), vec![]);
    assert!(rel(tail_coefficient(&s, Sign::Plus, 2, Some((3, 50))).unwrap().estimate, 2.0) < 1e-14);
}

#[test]
fn disk_with_potential_matches_bessel() {
    let f = forms(&disk(), 0.05, &CoefficientSpec::default());
    let s = solve_condensed(&f.a, &f.b).unwrap();
    let oracle = common::disk_reciprocal_spectrum_with_potential(14);
    for (k, (x, y)) in s.positive.iter().zip(&oracle).enumerate() {
        assert!(rel(*x, *y) < 0.02, "k = {}: {x} vs {y}", k + 1);
    }
    assert_eq!(counting(&s, 1.0 / 10.5, Sign::Plus), 21);
    assert!(s.max_residual() < DENSE_TOL);
}

#[test]
fn disk_mean_zero_matches_fourier_modes() {
    let spec = CoefficientSpec { v0: ScalarSpec::Constant { value: 0.0 }, ..Default::default() };
    let f = forms(&disk(), 0.05, &spec);
    let s = solve_condensed_mean_zero(&f.a, &f.b).unwrap();
    let oracle = common::disk_reciprocal_spectrum(14);
    for (k, (x, y)) in s.positive.iter().zip(&oracle).enumerate() {
        assert!(rel(*x, *y) < 0.02, "k = {}: {x} vs {y}", k + 1);
    }
    assert!(s.negative.is_empty());
}

#[test]
fn cyclic_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in [3, 8, 20] {
        let a = common::random_spd(&mut rng, m, 0.5, 3.0);
        let r = DMatrix::from_fn(m, m / 2 + 1, |_, _| rng.random_range(-1.0..1.0));
        let b = &r * r.transpose();
        assert!(cyclic_equivalence_check(&a, &b).unwrap() < 1e-10);
    }
}

#[test]
fn monotone_levels() {
    let levels: [&[f64]; 3] = [&[1.0, 0.5], &[0.99, 0.49], &[0.995, 0.48]];
    assert!(monotonicity_violations(&levels, 0.01).is_empty());
    let v = monotonicity_violations(&levels, 1e-3);
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].0, v[0].1), (1, 2));
}

#[test]
fn spectrum_csv() {
    let s = spectrum(vec![2.0, 1.0], vec![-0.5]);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
}

fn diag(v: &[f64]) -> CsrMatrix {
    CsrMatrix::from_dense(&DMatrix::from_diagonal(&DVector::from_row_slice(v)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonal_pencils(pairs in prop::collection::vec((0.1f64..10.0, -5.0f64..5.0), 1..20)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let s = solve_dense(&diag(&a), &diag(&b)).unwrap();
        let mut pos: Vec<f64> = b.iter().zip(&a).map(|(b, a)| b / a).filter(|&m| m > 1e-12 * 50.0).collect();
        pos.sort_by(|x, y| y.total_cmp(x));
        prop_assert!(s.positive.len() <= pos.len());
        for (x, y) in s.positive.iter().zip(&pos) {
            prop_assert!((x - y).abs() < 1e-12 * y.abs().max(1.0));
        }
        let total = s.positive.len() + s.negative.len() + s.null_count;
        prop_assert_eq!(total, a.len());
    }

    #[test]
    fn scaling_the_weight_scales_the_spectrum(c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = common::random_spd(&mut rng, 12, 0.5, 2.0);
        let r = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
        let b = &r * r.transpose();
        let s = solve_dense(&CsrMatrix::from_dense(&a), &CsrMatrix::from_dense(&b)).unwrap();
        let t = solve_dense(&CsrMatrix::from_dense(&a), &CsrMatrix::from_dense(&(b * c))).unwrap();
        prop_assert_eq!(s.positive.len(), 5);
        prop_assert_eq!(t.positive.len(), 5);
        for (x, y) in s.positive.iter().zip(&t.positive) {
            prop_assert!((c * x - y).abs() < 1e-10 * y);
        }
    }
}
