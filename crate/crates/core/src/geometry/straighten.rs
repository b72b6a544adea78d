//! Vertical stretching that flattens a graph chart of the boundary.
//!
//! With collar base `b = min ψ − depth` and `ψ̃ = ψ − b`, the map is
//! `Φ(x', y) = (x', b + (y − b)/ψ̃(x'))` above the base and the identity below.
//! It sends the graph `y = ψ(x')` to the line `y = b + 1`.

use nalgebra::{Matrix2, Point2, Vector2};

use super::{mesh::TriangleMesh, LipschitzChart, PolygonDomain};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StraighteningMap {
    chart: LipschitzChart,
    base: f64,
}

/// Builds the straightening map for `chart`, which must be one of the charts
/// registered on `domain`.
///
/// The part of the domain above the collar base has to be exactly the region
/// under the graph: every non-chart edge reaching above the base must be a
/// vertical side at one end of the chart.
pub fn build_straightening(
    domain: &PolygonDomain,
    chart: &LipschitzChart,
    collar_depth: f64,
) -> Result<StraighteningMap> {
    let seg = domain
        .charts()
        .iter()
        .find(|c| &c.chart == chart)
        .ok_or_else(|| Error::Collar("chart is not registered on the domain".into()))?;
    if !(collar_depth.is_finite() && collar_depth > 0.0) {
        return Err(Error::Collar(format!("collar depth must be positive, got {collar_depth}")));
    }
    let base = chart.min_value() - collar_depth;
    let (x0, x1) = chart.x_range();
    let tol = 1e-12 * domain.diameter();
    for i in 0..domain.num_edges() {
        if seg.edges.contains(&i) {
            continue;
        }
        let (p, q) = domain.edge(i);
        if p.y.max(q.y) <= base + tol {
            continue;
        }
        let vertical_end = (p.x - q.x).abs() <= tol
            && ((p.x - x0).abs() <= tol || (p.x - x1).abs() <= tol);
        if !vertical_end {
            return Err(Error::Collar(format!(
                "edge {i} enters the collar above height {base}; choose a smaller depth"
            )));
        }
    }
    let (lo, _) = domain.bounding_box();
    if base < lo.y - tol {
        return Err(Error::Collar(format!(
            "collar base {base} lies below the domain (lowest point {})",
            lo.y
        )));
    }
    Ok(StraighteningMap {
        chart: chart.clone(),
        base,
    })
}

impl StraighteningMap {
    pub fn chart(&self) -> &LipschitzChart {
        &self.chart
    }

    /// Height of the collar base, where the map meets the identity.
    pub fn base(&self) -> f64 {
        self.base
    }

    /// `ψ̃(x') = ψ(x') − b`.
    pub fn shifted_height(&self, x: f64) -> f64 {
        self.chart.eval(x) - self.base
    }

    pub fn forward(&self, p: &Point2<f64>) -> Point2<f64> {
        if p.y <= self.base {
            return *p;
        }
        Point2::new(p.x, self.base + (p.y - self.base) / self.shifted_height(p.x))
    }

    /// Inverse map `Ψ`.
    pub fn inverse(&self, q: &Point2<f64>) -> Point2<f64> {
        if q.y <= self.base {
            return *q;
        }
        Point2::new(q.x, self.base + (q.y - self.base) * self.shifted_height(q.x))
    }

    /// Jacobian of `Φ` at the preimage point `p` (one-sided at chart breakpoints).
    pub fn jacobian(&self, p: &Point2<f64>) -> Matrix2<f64> {
        if p.y <= self.base {
            return Matrix2::identity();
        }
        let t = self.shifted_height(p.x);
        let slope = self.chart.slope(self.chart.piece(p.x));
        Matrix2::new(1.0, 0.0, -(p.y - self.base) * slope / (t * t), 1.0 / t)
    }

    /// Interpolates the map on `mesh`: the image mesh has the mapped nodes and
    /// the same connectivity, so the map is affine on every triangle.
    ///
    /// A triangle whose three nodes lie on the graph would collapse onto the
    /// straightened line; its interior edge is bisected first, so the source
    /// mesh of the result can differ from `mesh`.
    pub fn discretize(&self, mesh: &TriangleMesh) -> Result<PiecewiseAffineMap> {
        let mut mesh = mesh.clone();
        for _ in 0..=mesh.triangles.len() {
            let nodes: Vec<Point2<f64>> = mesh.nodes.iter().map(|p| self.forward(p)).collect();
            let flat = mesh.triangles.iter().find(|t| {
                let [a, b, c] = t.map(|i| nodes[i]);
                super::orient(&a, &b, &c) <= 1e-10 * (b - a).norm() * (c - a).norm()
            });
            let Some(&tri) = flat else {
                return PiecewiseAffineMap::new(mesh, nodes);
            };
            let on_boundary = |u: usize, v: usize| {
                mesh.boundary_edges
                    .iter()
                    .any(|e| (e.nodes[0] == u && e.nodes[1] == v) || (e.nodes[0] == v && e.nodes[1] == u))
            };
            let (p, q) = (0..3)
                .map(|r| (tri[r], tri[(r + 1) % 3]))
                .filter(|&(u, v)| !on_boundary(u, v))
                .max_by(|x, y| {
                    let len = |e: &(usize, usize)| (mesh.nodes[e.0] - mesh.nodes[e.1]).norm();
                    len(x).total_cmp(&len(y))
                })
                .ok_or(Error::SingularJacobian(0.0))?;
            mesh = mesh.bisect_edge(p, q)?;
        }
        Err(Error::SingularJacobian(0.0))
    }
}

/// A map that is affine on every triangle of `source`, given by the images of
/// its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineMap {
    source: TriangleMesh,
    image: TriangleMesh,
    jacobians: Vec<Matrix2<f64>>,
    /// Source length over image length, per boundary edge.
    boundary_jacobians: Vec<f64>,
}

impl PiecewiseAffineMap {
    pub fn new(source: TriangleMesh, image_nodes: Vec<Point2<f64>>) -> Result<Self> {
        if image_nodes.len() != source.nodes.len() {
            return Err(Error::MeshMismatch(format!(
                "{} image nodes for {} source nodes",
                image_nodes.len(),
                source.nodes.len()
            )));
        }
        let mut jacobians = Vec::with_capacity(source.triangles.len());
        for t in &source.triangles {
            let [p0, p1, p2] = t.map(|i| source.nodes[i]);
            let [q0, q1, q2] = t.map(|i| image_nodes[i]);
            let e = Matrix2::from_columns(&[p1 - p0, p2 - p0]);
            let f = Matrix2::from_columns(&[q1 - q0, q2 - q0]);
            let einv = e
                .try_inverse()
                .ok_or(Error::SingularJacobian(e.determinant()))?;
            let j = f * einv;
            let det = j.determinant();
            if !(det > 0.0) {
                return Err(Error::SingularJacobian(det));
            }
            jacobians.push(j);
        }
        let mut boundary_edges = source.boundary_edges.clone();
        let mut boundary_jacobians = Vec::with_capacity(boundary_edges.len());
        for e in &mut boundary_edges {
            let (a, b) = (image_nodes[e.nodes[0]], image_nodes[e.nodes[1]]);
            let len = (b - a).norm();
            if len == 0.0 {
                return Err(Error::SingularJacobian(0.0));
            }
            let t = (b - a) / len;
            e.normal = Vector2::new(t.y, -t.x);
            boundary_jacobians.push(source.edge_length(e) / len);
        }
        let h = source
            .triangles
            .iter()
            .map(|t| super::mesh::triangle_diameter(&image_nodes, t))
            .fold(0.0, f64::max);
        let image = TriangleMesh {
            nodes: image_nodes,
            triangles: source.triangles.clone(),
            boundary_edges,
            h,
        };
        Ok(Self {
            source,
            image,
            jacobians,
            boundary_jacobians,
        })
    }

    pub fn identity(mesh: &TriangleMesh) -> Self {
        Self::new(mesh.clone(), mesh.nodes.clone()).expect("identity map of a valid mesh")
    }

    pub fn source(&self) -> &TriangleMesh {
        &self.source
    }

    pub fn image(&self) -> &TriangleMesh {
        &self.image
    }

    /// Jacobian of the forward map on triangle `t`.
    pub fn jacobian(&self, t: usize) -> &Matrix2<f64> {
        &self.jacobians[t]
    }

    /// Arc-length ratio (source over image) on boundary edge `e`.
    pub fn boundary_jacobian(&self, e: usize) -> f64 {
        self.boundary_jacobians[e]
    }

    /// Preimage of the image point `y`, which lies in image triangle `t`.
    pub fn inverse_in(&self, t: usize, y: &Point2<f64>) -> Point2<f64> {
        let tri = self.source.triangles[t];
        let (p0, q0) = (self.source.nodes[tri[0]], self.image.nodes[tri[0]]);
        let jinv = self.jacobians[t].try_inverse().expect("checked at construction");
        p0 + jinv * (y - q0)
    }
}
