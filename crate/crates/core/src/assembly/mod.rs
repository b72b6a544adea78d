//! P1 finite element assembly of the energy form `a₀[u]` and the boundary
//! weight form `ρ₀[γu]`.

mod fields;
mod pullback;

pub use fields::{
    min_eigenvalue, BoundaryMatched, BoundaryWeight, Bump, Checkerboard, CoefficientField,
    CoefficientSpec, ConstantMatrix, ConstantScalar, ConstantWeight, MatrixField, MatrixSpec,
    Mollified, RhoSpec, ScalarField, ScalarSpec, SegmentWeight,
};
pub(crate) use fields::gauss_legendre;
pub use pullback::{pullback_coefficients, pullback_without_boundary_jacobian};

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Point2, Vector3};

use crate::geometry::TriangleMesh;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Degree of the triangle rule: exact for quadratic integrands.
pub const QUADRATURE_ORDER: usize = 2;

/// Barycentric nodes of the symmetric three-point rule (weights 1/3).
const GAUSS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Extra probes near the vertices used to detect a coefficient jump inside
/// an element.
const PROBES: [[f64; 3]; 4] = [
    [0.9, 0.05, 0.05],
    [0.05, 0.9, 0.05],
    [0.05, 0.05, 0.9],
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
];

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledForms {
    /// Energy form.
    pub a: CsrMatrix,
    /// Boundary weight form.
    pub b: CsrMatrix,
    /// Mesh node of each degree of freedom (the identity for P1).
    pub dof_map: Vec<usize>,
    pub quadrature_order: usize,
}

impl AssembledForms {
    /// Degrees of freedom on which `B` has a nonzero row.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        self.b.nonzero_rows()
    }
}

pub fn assemble(mesh: &TriangleMesh, coeff: &CoefficientField) -> Result<AssembledForms> {
    Ok(AssembledForms {
        a: assemble_energy(mesh, coeff)?,
        b: assemble_boundary_weight(mesh, coeff.rho.as_ref())?,
        dof_map: (0..mesh.num_nodes()).collect(),
        quadrature_order: QUADRATURE_ORDER,
    })
}

/// `A_ij = ∫ ⟨a∇φ_j, ∇φ_i⟩ + v₀ φ_j φ_i` over hat functions.
///
/// Elements are processed in index order and duplicates summed in that order,
/// so the result is bitwise reproducible.
pub fn assemble_energy(mesh: &TriangleMesh, coeff: &CoefficientField) -> Result<CsrMatrix> {
    let n = mesh.num_nodes();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.nodes[i]);
        let k = element_energy(&p, t, coeff)?;
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                triplets.push((i, j, k[(a, b)]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

/// Gradients of the barycentric coordinates (columns) and the area.
fn barycentric_gradients(p: &[Point2<f64>; 3]) -> (Matrix2x3<f64>, f64) {
    let twice = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    let g = Matrix2x3::new(
        p[1].y - p[2].y,
        p[2].y - p[0].y,
        p[0].y - p[1].y,
        p[2].x - p[1].x,
        p[0].x - p[2].x,
        p[1].x - p[0].x,
    ) / twice;
    (g, 0.5 * twice)
}

fn at(p: &[Point2<f64>; 3], l: &[f64; 3]) -> Point2<f64> {
    Point2::from(p[0].coords * l[0] + p[1].coords * l[1] + p[2].coords * l[2])
}

/// Quadrature nodes (barycentric) and weights summing to one, refined ×4 when
/// the coefficients jump inside the element.
fn element_rule(p: &[Point2<f64>; 3], t: usize, coeff: &CoefficientField) -> Vec<([f64; 3], f64)> {
    let jumpy = coeff.a.is_discontinuous() || coeff.v0.is_discontinuous();
    let uniform = || GAUSS.iter().map(|l| (*l, 1.0 / 3.0)).collect();
    if !jumpy {
        return uniform();
    }
    let first = at(p, &GAUSS[0]);
    let (a0, v0) = (coeff.a.eval_in_cell(&first, t), coeff.v0.eval_in_cell(&first, t));
    let varies = GAUSS[1..].iter().chain(PROBES.iter()).any(|l| {
        let x = at(p, l);
        coeff.a.eval_in_cell(&x, t) != a0 || coeff.v0.eval_in_cell(&x, t) != v0
    });
    if !varies {
        return uniform();
    }
    let h = 0.5;
    let corners = [
        [[1.0, 0.0, 0.0], [h, h, 0.0], [h, 0.0, h]],
        [[h, h, 0.0], [0.0, 1.0, 0.0], [0.0, h, h]],
        [[h, 0.0, h], [0.0, h, h], [0.0, 0.0, 1.0]],
        [[0.0, h, h], [h, 0.0, h], [h, h, 0.0]],
    ];
    let mut rule = Vec::with_capacity(12);
    for sub in &corners {
        for g in &GAUSS {
            let mut l = [0.0; 3];
            for (k, c) in sub.iter().enumerate() {
                for i in 0..3 {
                    l[i] += g[k] * c[i];
                }
            }
            rule.push((l, 1.0 / 12.0));
        }
    }
    rule
}

fn check_spd(a: &Matrix2<f64>, x: &Point2<f64>, k0: f64) -> Result<()> {
    let scale = a.abs().max();
    let lam = min_eigenvalue(a);
    if !a.iter().all(|v| v.is_finite())
        || (a[(0, 1)] - a[(1, 0)]).abs() > 1e-14 * scale
        || !(lam > 0.0)
        || lam < k0 * (1.0 - 1e-12)
    {
        return Err(Error::not_spd(x, lam, k0));
    }
    Ok(())
}

/// Local 3×3 matrix of triangle `t` with vertices `p`.
pub fn element_energy(p: &[Point2<f64>; 3], t: usize, coeff: &CoefficientField) -> Result<Matrix3<f64>> {
    let (g, area) = barycentric_gradients(p);
    let k0 = coeff.a.ellipticity();
    let mut avg = Matrix2::zeros();
    let mut mass = Matrix3::zeros();
    for (l, w) in element_rule(p, t, coeff) {
        let x = at(p, &l);
        let a = coeff.a.eval_in_cell(&x, t);
        check_spd(&a, &x, k0)?;
        let v = coeff.v0.eval_in_cell(&x, t);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "v0 = {v} at ({}, {}) is not a nonnegative number",
                x.x, x.y
            )));
        }
        avg += a * w;
        let lv = Vector3::from(l);
        mass += lv * lv.transpose() * (v * w);
    }
    Ok((g.transpose() * avg * g + mass) * area)
}

/// `B_ij = ∫_Σ ρ φ_j φ_i dμ`, by two-point Gauss–Legendre on every boundary edge
/// (per edge `ρ ℓ/6 [[2,1],[1,2]]` for constant `ρ`).
pub fn assemble_boundary_weight(mesh: &TriangleMesh, rho: &dyn BoundaryWeight) -> Result<CsrMatrix> {
    let n = mesh.num_nodes();
    let s = 0.5 / 3f64.sqrt();
    let nodes = [0.5 - s, 0.5 + s];
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges.len());
    for (k, e) in mesh.boundary_edges.iter().enumerate() {
        let (p, q) = (mesh.nodes[e.nodes[0]], mesh.nodes[e.nodes[1]]);
        let len = (q - p).norm();
        let mut local = [[0.0; 2]; 2];
        for &t in &nodes {
            let x = p + (q - p) * t;
            let r = rho.eval_on_edge(&x, e.segment, k);
            if !r.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weight is not finite at ({}, {})",
                    x.x, x.y
                )));
            }
            let phi = [1.0 - t, t];
            for a in 0..2 {
                for b in 0..2 {
                    local[a][b] += 0.5 * len * r * phi[a] * phi[b];
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                triplets.push((e.nodes[a], e.nodes[b], local[a][b]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn identity_coeff(v0: f64) -> CoefficientField {
        CoefficientField {
            a: Arc::new(ConstantMatrix(Matrix2::identity())),
            v0: Arc::new(ConstantScalar(v0)),
            rho: Arc::new(ConstantWeight(1.0)),
        }
    }

    #[test]
    fn reference_triangle() {
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let k = element_energy(&p, 0, &identity_coeff(1.0)).unwrap();
        let stiff = Matrix3::new(1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5);
        let mass = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) * (0.5 / 12.0);
        assert!((k - stiff - mass).abs().max() < 1e-15);
    }

    #[test]
    fn not_spd_is_reported_with_point() {
        let coeff = CoefficientField {
            a: Arc::new(ConstantMatrix(Matrix2::new(1.0, 0.0, 0.0, -1.0))),
            ..identity_coeff(1.0)
        };
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        match element_energy(&p, 0, &coeff) {
            Err(Error::NotSpd { x, y, .. }) => assert!(x > 0.0 && y > 0.0),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }
}
