//! Coefficients transported by a piecewise-affine map.
//!
//! On an image triangle with forward Jacobian `J`,
//! `ǎ = J a Jᵀ / det J` and `v̌ = v₀ / det J`; the boundary weight picks up the
//! arc-length ratio of the edge. With these, both quadratic forms of a nodal
//! vector coincide on the source and image meshes.

use std::sync::Arc;

use nalgebra::{Matrix2, Point2};

use super::{min_eigenvalue, BoundaryWeight, CoefficientField, MatrixField, ScalarField};
use crate::geometry::PiecewiseAffineMap;
use crate::Result;

/// Coefficients on `map.image()` equivalent to `coeff` on `map.source()`.
pub fn pullback_coefficients(
    coeff: &CoefficientField,
    map: &Arc<PiecewiseAffineMap>,
) -> Result<CoefficientField> {
    build(coeff, map, true)
}

/// Same as [`pullback_coefficients`] but transports the boundary weight
/// without the arc-length factor. The resulting problem is not equivalent;
/// this exists as a negative control.
pub fn pullback_without_boundary_jacobian(
    coeff: &CoefficientField,
    map: &Arc<PiecewiseAffineMap>,
) -> Result<CoefficientField> {
    build(coeff, map, false)
}

fn build(coeff: &CoefficientField, map: &Arc<PiecewiseAffineMap>, jacobian: bool) -> Result<CoefficientField> {
    let stretch = (0..map.source().triangles.len())
        .map(|t| {
            let j = map.jacobian(t);
            min_eigenvalue(&(j * j.transpose())) / j.determinant()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(CoefficientField {
        a: Arc::new(PulledBackMatrix {
            base: coeff.a.clone(),
            map: map.clone(),
            k0: coeff.a.ellipticity() * stretch,
        }),
        v0: Arc::new(PulledBackScalar {
            base: coeff.v0.clone(),
            map: map.clone(),
        }),
        rho: Arc::new(PulledBackWeight {
            base: coeff.rho.clone(),
            map: map.clone(),
            jacobian,
        }),
    })
}

/// Image triangle containing `y`, or the one with the nearest centroid.
fn locate(map: &PiecewiseAffineMap, y: &Point2<f64>) -> usize {
    let mesh = map.image();
    let mut best = (f64::INFINITY, 0);
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
        let m = Matrix2::from_columns(&[b - a, c - a]);
        if let Some(inv) = m.try_inverse() {
            let l = inv * (y - a);
            if l.x >= -1e-12 && l.y >= -1e-12 && l.x + l.y <= 1.0 + 1e-12 {
                return t;
            }
        }
        let d = (mesh.centroid(t) - y).norm();
        if d < best.0 {
            best = (d, t);
        }
    }
    best.1
}

#[derive(Debug)]
struct PulledBackMatrix {
    base: Arc<dyn MatrixField>,
    map: Arc<PiecewiseAffineMap>,
    k0: f64,
}

impl MatrixField for PulledBackMatrix {
    fn eval(&self, y: &Point2<f64>) -> Matrix2<f64> {
        self.eval_in_cell(y, locate(&self.map, y))
    }

    fn eval_in_cell(&self, y: &Point2<f64>, cell: usize) -> Matrix2<f64> {
        let j = self.map.jacobian(cell);
        let x = self.map.inverse_in(cell, y);
        let m = j * self.base.eval_in_cell(&x, cell) * j.transpose() / j.determinant();
        0.5 * (m + m.transpose())
    }

    fn ellipticity(&self) -> f64 {
        self.k0
    }

    fn is_discontinuous(&self) -> bool {
        self.base.is_discontinuous()
    }
}

#[derive(Debug)]
struct PulledBackScalar {
    base: Arc<dyn ScalarField>,
    map: Arc<PiecewiseAffineMap>,
}

impl ScalarField for PulledBackScalar {
    fn eval(&self, y: &Point2<f64>) -> f64 {
        self.eval_in_cell(y, locate(&self.map, y))
    }

    fn eval_in_cell(&self, y: &Point2<f64>, cell: usize) -> f64 {
        let x = self.map.inverse_in(cell, y);
        self.base.eval_in_cell(&x, cell) / self.map.jacobian(cell).determinant()
    }

    fn is_discontinuous(&self) -> bool {
        self.base.is_discontinuous()
    }
}

#[derive(Debug)]
struct PulledBackWeight {
    base: Arc<dyn BoundaryWeight>,
    map: Arc<PiecewiseAffineMap>,
    jacobian: bool,
}

impl BoundaryWeight for PulledBackWeight {
    fn eval(&self, y: &Point2<f64>, segment: usize) -> f64 {
        let image = self.map.image();
        let edge = image
            .boundary_edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.segment == segment)
            .min_by(|(_, e), (_, f)| {
                let d = |e: &crate::geometry::BoundaryEdge| {
                    crate::geometry::point_segment_distance(y, &image.nodes[e.nodes[0]], &image.nodes[e.nodes[1]])
                };
                d(e).total_cmp(&d(f))
            })
            .map(|(k, _)| k);
        match edge {
            Some(k) => self.eval_on_edge(y, segment, k),
            None => self.base.eval(y, segment),
        }
    }

    fn eval_on_edge(&self, y: &Point2<f64>, segment: usize, edge: usize) -> f64 {
        let e = &self.map.image().boundary_edges[edge];
        let (q0, q1) = (self.map.image().nodes[e.nodes[0]], self.map.image().nodes[e.nodes[1]]);
        let (p0, p1) = (self.map.source().nodes[e.nodes[0]], self.map.source().nodes[e.nodes[1]]);
        let s = (y - q0).dot(&(q1 - q0)) / (q1 - q0).norm_squared();
        let x = p0 + (p1 - p0) * s;
        let r = self.base.eval_on_edge(&x, segment, edge);
        if self.jacobian {
            r * self.map.boundary_jacobian(edge)
        } else {
            r
        }
    }

    fn bound(&self) -> f64 {
        let scale = if self.jacobian {
            (0..self.map.image().boundary_edges.len())
                .map(|e| self.map.boundary_jacobian(e))
                .fold(0.0, f64::max)
        } else {
            1.0
        };
        self.base.bound() * scale
    }
}
