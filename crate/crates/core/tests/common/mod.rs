//! Independent reference values for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Modified Bessel function `I_ν(x)` from its power series.
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200 {
        term *= half * half / (m as f64 * (m as f64 + nu as f64));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn bessel_i_prime(nu: u32, x: f64) -> f64 {
    let below = if nu == 0 { bessel_i(1, x) } else { bessel_i(nu - 1, x) };
    0.5 * (below + bessel_i(nu + 1, x))
}

/// Steklov eigenvalue of `−Δu + u = 0` in the unit disk for the Fourier mode `k`:
/// `u = I_k(r) e^{ikθ}` gives `σ_k = I_k′(1) / I_k(1)`.
pub fn disk_steklov_with_potential(k: u32) -> f64 {
    bessel_i_prime(k, 1.0) / bessel_i(k, 1.0)
}

/// The first `count` values `1/σ` of the unit disk with `v₀ = 1`, with
/// multiplicity (mode 0 once, every other mode twice), decreasing.
pub fn disk_reciprocal_spectrum_with_potential(count: usize) -> Vec<f64> {
    let mut out = vec![1.0 / disk_steklov_with_potential(0)];
    let mut k = 1;
    while out.len() < count {
        let v = 1.0 / disk_steklov_with_potential(k);
        out.push(v);
        out.push(v);
        k += 1;
    }
    out.truncate(count);
    out
}

/// The first `count` nonzero values `1/σ` of the Laplace–Steklov problem on the
/// unit disk: `1, 1, 1/2, 1/2, …`.
pub fn disk_reciprocal_spectrum(count: usize) -> Vec<f64> {
    (0..count).map(|i| 1.0 / (i / 2 + 1) as f64).collect()
}

/// Monte Carlo volume of `{η ∈ ℝ^d : β(Pη) < ρ}` with `P` an orthonormal basis
/// (columns) of the tangent space, sampling the cube `[−r, r]^d`.
pub fn sublevel_volume(
    beta: impl Fn(&DVector<f64>) -> f64,
    basis: &DMatrix<f64>,
    rho: f64,
    r: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let d = basis.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let eta = DVector::from_fn(d, |_, _| rng.random_range(-r..r));
        if beta(&(basis * eta)) < rho {
            hits += 1;
        }
    }
    (2.0 * r).powi(d as i32) * hits as f64 / samples as f64
}

/// Area of the intersection of a triangle with an axis-aligned rectangle
/// (Sutherland–Hodgman clipping, then the shoelace formula).
pub fn clipped_area(tri: &[Point2<f64>; 3], lo: Point2<f64>, hi: Point2<f64>) -> f64 {
    let mut poly: Vec<Point2<f64>> = tri.to_vec();
    let planes: [(usize, f64, bool); 4] = [(0, lo.x, true), (0, hi.x, false), (1, lo.y, true), (1, hi.y, false)];
    for (axis, c, keep_above) in planes {
        let inside = |p: &Point2<f64>| if keep_above { p[axis] >= c } else { p[axis] <= c };
        let mut out = Vec::new();
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            let (pi, qi) = (inside(&p), inside(&q));
            if pi {
                out.push(p);
            }
            if pi != qi {
                let t = (c - p[axis]) / (q[axis] - p[axis]);
                out.push(p + (q - p) * t);
            }
        }
        poly = out;
        if poly.is_empty() {
            return 0.0;
        }
    }
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y)
        .sum::<f64>()
}

/// `∫ ∇uᵀ a ∇u` for the P1 function with nodal values `x`, with `a = value(i, j)·I`
/// constant on the grid cells `[i·cell, (i+1)·cell) × [j·cell, (j+1)·cell)`,
/// integrated exactly by clipping every triangle against the grid.
pub fn cellwise_energy(
    nodes: &[Point2<f64>],
    triangles: &[[usize; 3]],
    x: &[f64],
    cell: f64,
    value: impl Fn(i64, i64) -> f64,
) -> f64 {
    let mut total = 0.0;
    for t in triangles {
        let p = t.map(|i| nodes[i]);
        let e = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
        let g_ref = nalgebra::Vector2::new(x[t[1]] - x[t[0]], x[t[2]] - x[t[0]]);
        let grad = e.transpose().try_inverse().expect("nondegenerate") * g_ref;
        let (xmin, xmax) = (p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max));
        let (ymin, ymax) = (p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max));
        let mut weighted = 0.0;
        for i in (xmin / cell).floor() as i64..=(xmax / cell).floor() as i64 {
            for j in (ymin / cell).floor() as i64..=(ymax / cell).floor() as i64 {
                let lo = Point2::new(i as f64 * cell, j as f64 * cell);
                let hi = Point2::new(lo.x + cell, lo.y + cell);
                weighted += value(i, j) * clipped_area(&p, lo, hi);
            }
        }
        total += weighted * grad.norm_squared();
    }
    total
}

/// Double layer kernel on a circle of radius `r`: `⟨x−y, n(y)⟩ / (2π|x−y|²) = −1/(4πr)`.
pub fn circle_double_layer_kernel(r: f64) -> f64 {
    -1.0 / (4.0 * std::f64::consts::PI * r)
}

/// Eigenvalues of the single layer on a circle of radius `r < 1`: `−r ln r` for
/// the constant mode and `r/(2k)` (twice) for mode `k ≥ 1`, decreasing.
pub fn circle_single_layer_spectrum(r: f64, count: usize) -> Vec<f64> {
    let mut v = vec![-r * r.ln()];
    let mut k = 1;
    while v.len() < count {
        v.push(r / (2.0 * k as f64));
        v.push(r / (2.0 * k as f64));
        k += 1;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(count);
    v
}

/// Random symmetric positive definite `m × m` matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut impl Rng, m: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| rng.random_range(lo..hi)));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn random_unit(rng: &mut impl Rng, m: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 0.1 {
            return v.normalize();
        }
    }
}
