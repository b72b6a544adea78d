//! The pointwise Weyl density `α±(x)` and the asymptotic coefficient
//! `W± = (2π)^{-d} ∫_Σ α± dμ_Σ`.
//!
//! For a boundary point with unit normal `n` and coefficient trace `a`,
//! `Θ = (nᵀan) a − (an)(an)ᵀ`, `Θ′` is its restriction to the tangent space and
//! `α± = ω_d ρ±^d (det Θ′)^{-1/2}`, the volume of `{ξ′ : β(ξ′) < ρ±}` with
//! `β(ξ′)² = ξ′ᵀΘξ′`.

mod symbol;

pub use symbol::symbol_oracle;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};
use serde::Serialize;

use crate::assembly::{gauss_legendre, BoundaryWeight, MatrixField};
use crate::geometry::PolygonDomain;
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

fn check_unit(n: &DVector<f64>) -> Result<()> {
    if ((n.norm() - 1.0).abs()) > UNIT_TOL {
        return Err(Error::InvalidParameter(format!("normal has length {}", n.norm())));
    }
    Ok(())
}

fn check_spd(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.abs().max();
    if !a.is_square() || (a - a.transpose()).abs().max() > 1e-14 * scale {
        return Err(Error::InvalidParameter("coefficient matrix is not symmetric".into()));
    }
    if a.clone().cholesky().is_none() {
        let min = a.clone().symmetric_eigenvalues().min();
        return Err(Error::NotSpd {
            x: f64::NAN,
            y: f64::NAN,
            min_eig: min,
            required: 0.0,
        });
    }
    Ok(())
}

/// `Θ = (nᵀan) a − (an)(an)ᵀ`.
pub fn theta_matrix(a: &DMatrix<f64>, n: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_spd(a)?;
    check_unit(n)?;
    if n.len() != a.nrows() {
        return Err(Error::InvalidParameter("normal and matrix sizes differ".into()));
    }
    let an = a * n;
    let t = a * n.dot(&an) - &an * an.transpose();
    Ok((&t + t.transpose()) * 0.5)
}

/// Orthonormal basis of `n⊥` (columns) by Gram–Schmidt on the coordinate axes,
/// taken in order of increasing `|n_i|`.
pub fn tangent_basis(n: &DVector<f64>) -> DMatrix<f64> {
    let m = n.len();
    let mut axes: Vec<usize> = (0..m).collect();
    axes.sort_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()).then(i.cmp(&j)));
    let nn = n / n.norm();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
    for &i in &axes {
        if basis.len() == m - 1 {
            break;
        }
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        for _ in 0..2 {
            v -= &nn * nn.dot(&v);
            for b in &basis {
                v -= b * b.dot(&v);
            }
        }
        let len = v.norm();
        if len > 1e-8 {
            basis.push(v / len);
        }
    }
    DMatrix::from_columns(&basis)
}

/// `Θ′ = PᵀΘP` in the deterministic tangent basis.
pub fn theta_prime(theta: &DMatrix<f64>, n: &DVector<f64>) -> DMatrix<f64> {
    theta_prime_in_basis(theta, &tangent_basis(n))
}

/// `Θ′ = PᵀΘP` for a caller-supplied orthonormal tangent basis `P`.
pub fn theta_prime_in_basis(theta: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let t = p.transpose() * theta * p;
    (&t + t.transpose()) * 0.5
}

/// `β = √((nᵀan)(ξᵀaξ) − (ξᵀan)²)` for a tangent covector `ξ`.
pub fn beta(a: &DMatrix<f64>, n: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
    check_unit(n)?;
    let dot = xi.dot(n);
    if dot.abs() > UNIT_TOL * xi.norm().max(1.0) {
        return Err(Error::NotTangent(dot));
    }
    let an = a * n;
    let v = n.dot(&an) * xi.dot(&(a * xi)) - xi.dot(&an).powi(2);
    Ok(v.max(0.0).sqrt())
}

/// Volume of the unit ball in `ℝ^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn omega(d: usize) -> f64 {
    // Γ(d/2 + 1) by the recursion Γ(x + 1) = x Γ(x) from Γ(1) = 1 or Γ(1/2) = √π
    let mut gamma = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 + 1.0 - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    PI.powf(d as f64 / 2.0) / gamma
}

/// `α± = ω_d ρ±^d (det Θ′)^{-1/2}` with `ρ± ≥ 0` the positive and negative
/// parts of the weight.
pub fn alpha_pm(
    a: &DMatrix<f64>,
    n: &DVector<f64>,
    rho_plus: f64,
    rho_minus: f64,
    d: usize,
) -> Result<(f64, f64)> {
    if a.nrows() != d + 1 {
        return Err(Error::InvalidParameter(format!(
            "a is {}x{} but d = {d}",
            a.nrows(),
            a.ncols()
        )));
    }
    if rho_plus < 0.0 || rho_minus < 0.0 {
        return Err(Error::InvalidParameter("rho parts must be nonnegative".into()));
    }
    let tp = theta_prime(&theta_matrix(a, n)?, n);
    let det = tp.determinant();
    if !(det > 0.0) {
        return Err(Error::DegenerateTheta(det));
    }
    let c = omega(d) / det.sqrt();
    Ok((c * rho_plus.powi(d as i32), c * rho_minus.powi(d as i32)))
}

/// Per-point Weyl data on a boundary quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylPoint {
    /// Arc length from the first vertex.
    pub arc_length: f64,
    pub segment: usize,
    pub x: [f64; 2],
    pub normal: [f64; 2],
    pub trace: [[f64; 2]; 2],
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub det_theta_prime: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    /// Quadrature weight (arc length).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylData {
    pub d: usize,
    pub points: Vec<WeylPoint>,
    pub w_plus: f64,
    pub w_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylOptions {
    /// Gauss–Legendre nodes per piece.
    pub gauss_points: usize,
    /// Equal pieces per polygon edge.
    pub pieces_per_edge: usize,
}

impl Default for WeylOptions {
    fn default() -> Self {
        Self {
            gauss_points: 4,
            pieces_per_edge: 1,
        }
    }
}

/// Boundary value of `a` at `x` on the edge with outward normal `n`, sampled a
/// hair inside the domain so that one-sided traces are well defined.
pub fn boundary_trace(a: &dyn MatrixField, x: &Point2<f64>, n: &Vector2<f64>, diameter: f64) -> Matrix2<f64> {
    a.eval(&(x - n * (1e-10 * diameter)))
}

/// `W± = (2π)^{-1} ∫_Σ α± dμ_Σ` for planar domains, by Gauss–Legendre
/// quadrature on every polygon edge (exact for piecewise-constant data).
pub fn weyl_coefficient(
    domain: &PolygonDomain,
    a: &dyn MatrixField,
    rho: &dyn BoundaryWeight,
    opts: WeylOptions,
) -> Result<WeylData> {
    if opts.gauss_points == 0 || opts.pieces_per_edge == 0 {
        return Err(Error::Quadrature("empty boundary rule".into()));
    }
    let (nodes, weights) = gauss_legendre(opts.gauss_points);
    let diam = domain.diameter();
    let mut points = Vec::new();
    let mut arc = 0.0;
    let (mut wp, mut wm) = (0.0, 0.0);
    for s in 0..domain.num_edges() {
        let (p, q) = domain.edge(s);
        let len = (q - p).norm();
        let normal = domain.edge_normal(s);
        let nd = DVector::from_column_slice(normal.as_slice());
        let piece = len / opts.pieces_per_edge as f64;
        for k in 0..opts.pieces_per_edge {
            for (z, w) in nodes.iter().zip(&weights) {
                let t = (k as f64 + 0.5 * (z + 1.0)) / opts.pieces_per_edge as f64;
                let x = p + (q - p) * t;
                let trace = boundary_trace(a, &x, &normal, diam);
                if !trace.iter().all(|v| v.is_finite()) {
                    return Err(Error::Quadrature(format!(
                        "trace not evaluable at ({}, {})",
                        x.x, x.y
                    )));
                }
                let r = rho.eval(&x, s);
                let (rp, rm) = (r.max(0.0), (-r).max(0.0));
                let ad = DMatrix::from_column_slice(2, 2, trace.as_slice());
                let tp = theta_prime(&theta_matrix(&ad, &nd)?, &nd);
                let det = tp.determinant();
                if !(det > 0.0) {
                    return Err(Error::DegenerateTheta(det));
                }
                let c = omega(1) / det.sqrt();
                let weight = 0.5 * w * piece;
                let (ap, am) = (c * rp, c * rm);
                wp += weight * ap;
                wm += weight * am;
                points.push(WeylPoint {
                    arc_length: arc + t * len,
                    segment: s,
                    x: [x.x, x.y],
                    normal: [normal.x, normal.y],
                    trace: [[trace[(0, 0)], trace[(0, 1)]], [trace[(1, 0)], trace[(1, 1)]]],
                    rho_plus: rp,
                    rho_minus: rm,
                    det_theta_prime: det,
                    alpha_plus: ap,
                    alpha_minus: am,
                    weight,
                });
            }
        }
        arc += len;
    }
    Ok(WeylData {
        d: 1,
        points,
        w_plus: wp / (2.0 * PI),
        w_minus: wm / (2.0 * PI),
    })
}

impl WeylData {
    /// CSV with columns `arc_length,det_theta_prime,alpha_plus,alpha_minus`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::from("arc_length,det_theta_prime,alpha_plus,alpha_minus\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                p.arc_length, p.det_theta_prime, p.alpha_plus, p.alpha_minus
            ));
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    /// JSON summary with `W±`.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "points": self.points.len(),
            "w_plus": self.w_plus,
            "w_minus": self.w_minus,
        })
    }
}
