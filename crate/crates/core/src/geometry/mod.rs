//! Polygonal Lipschitz domains, graph charts, triangulation and the
//! boundary-straightening map.

mod catalog;
mod mesh;
mod straighten;

pub use catalog::{make_domain, DomainSpec};
pub use mesh::{triangulate, BoundaryEdge, TriangleMesh};
pub use straighten::{build_straightening, PiecewiseAffineMap, StraighteningMap};

use std::ops::Range;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Piecewise-linear graph `x2 = ψ(x1)` given by its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzChart {
    breakpoints: Vec<(f64, f64)>,
    lipschitz_constant: f64,
}

impl LipschitzChart {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidParameter(
                "a chart needs at least two breakpoints".into(),
            ));
        }
        if breakpoints.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidParameter("non-finite chart breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter(
                "chart abscissae must be strictly increasing".into(),
            ));
        }
        let lipschitz_constant = breakpoints
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            breakpoints,
            lipschitz_constant,
        })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.breakpoints[0].0, self.breakpoints[self.breakpoints.len() - 1].0)
    }

    /// Index of the linear piece containing `x` (clamped to the chart).
    pub fn piece(&self, x: f64) -> usize {
        let n = self.breakpoints.len() - 1;
        match self
            .breakpoints
            .binary_search_by(|b| b.0.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        }
    }

    pub fn slope(&self, piece: usize) -> f64 {
        let (a, b) = (self.breakpoints[piece], self.breakpoints[piece + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.piece(x);
        let (x0, y0) = self.breakpoints[i];
        y0 + self.slope(i) * (x - x0)
    }

    pub fn min_value(&self) -> f64 {
        self.breakpoints.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|b| b.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ sqrt(1 + ψ'²) dx` over the chart, exact for piecewise-linear `ψ`.
    pub fn graph_length(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .enumerate()
            .map(|(i, w)| (w[1].0 - w[0].0) * (1.0 + self.slope(i).powi(2)).sqrt())
            .sum()
    }
}

/// A run of consecutive polygon edges realized as the graph of a chart, with
/// the domain lying below the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSegment {
    pub edges: Range<usize>,
    pub chart: LipschitzChart,
}

/// Simple closed counterclockwise polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDomain {
    name: String,
    vertices: Vec<Point2<f64>>,
    charts: Vec<ChartSegment>,
}

impl PolygonDomain {
    pub fn new(name: impl Into<String>, vertices: Vec<Point2<f64>>) -> Result<Self> {
        let domain = Self {
            name: name.into(),
            vertices,
            charts: Vec::new(),
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Attaches a graph chart to the edge range `edges`. The edges, traversed
    /// counterclockwise, must run right-to-left along the chart breakpoints.
    pub fn with_chart(mut self, edges: Range<usize>, chart: LipschitzChart) -> Result<Self> {
        let n = self.vertices.len();
        if edges.is_empty() || edges.end > n {
            return Err(Error::SegmentRange {
                start: edges.start,
                end: edges.end,
                len: n,
            });
        }
        let bp = chart.breakpoints();
        if bp.len() != edges.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "chart has {} breakpoints but the edge range has {} edges",
                bp.len(),
                edges.len()
            )));
        }
        let scale = self.diameter();
        for (k, v) in (edges.start..=edges.end).enumerate() {
            let p = self.vertices[v % n];
            let (x, y) = bp[bp.len() - 1 - k];
            if (p.x - x).abs() > 1e-12 * scale || (p.y - y).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "chart breakpoint ({x}, {y}) does not match polygon vertex {v}"
                )));
            }
        }
        self.charts.push(ChartSegment { edges, chart });
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn charts(&self) -> &[ChartSegment] {
        &self.charts
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    /// Endpoints of edge `i` (from vertex `i` to vertex `i + 1`).
    pub fn edge(&self, i: usize) -> (Point2<f64>, Point2<f64>) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Outward unit normal of edge `i`.
    pub fn edge_normal(&self, i: usize) -> Vector2<f64> {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Vector2::new(t.y, -t.x)
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_edges()).map(|i| self.edge_length(i)).sum()
    }

    pub fn bounding_box(&self) -> (Point2<f64>, Point2<f64>) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((b - a).norm());
            }
        }
        d
    }

    /// Interior angle at vertex `i`, in `(0, 2π)`.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        let prev = self.vertices[(i + n - 1) % n];
        let cur = self.vertices[i];
        let next = self.vertices[(i + 1) % n];
        let (u, v) = (prev - cur, next - cur);
        let ang = v.y.atan2(v.x) - u.y.atan2(u.x);
        // angle swept clockwise from `next` back to `prev` is the interior one
        let turn = ang.rem_euclid(2.0 * std::f64::consts::PI);
        2.0 * std::f64::consts::PI - turn
    }

    /// Even-odd point containment; points on the boundary may go either way.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: &Point2<f64>) -> f64 {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                point_segment_distance(p, &a, &b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniformly scaled copy (about the origin) with charts dropped.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PolygonDomain::new(
            self.name.clone(),
            self.vertices.iter().map(|v| Point2::from(v.coords * factor)).collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!(
                "`{}` has {} vertices",
                self.name, n
            )));
        }
        if self.vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidPolygon(format!("`{}` has non-finite vertices", self.name)));
        }
        for i in 0..n {
            if self.vertices[i] == self.vertices[(i + 1) % n] {
                return Err(Error::InvalidPolygon(format!(
                    "`{}` repeats vertex {}",
                    self.name, i
                )));
            }
        }
        if self.signed_area() <= 0.0 {
            return Err(Error::InvalidPolygon(format!(
                "`{}` is not counterclockwise (signed area {})",
                self.name,
                self.signed_area()
            )));
        }
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = self.edge(j);
                let hit = if adjacent {
                    // adjacent edges share one endpoint; they must not overlap
                    let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    collinear_overlap(&shared, &other_a, &other_b)
                } else {
                    segments_intersect(&a, &b, &c, &d)
                };
                if hit {
                    return Err(Error::SelfIntersection {
                        name: self.name.clone(),
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sum of Euclidean edge lengths over `range`.
pub fn surface_measure(domain: &PolygonDomain, range: Range<usize>) -> Result<f64> {
    if range.is_empty() || range.end > domain.num_edges() {
        return Err(Error::SegmentRange {
            start: range.start,
            end: range.end,
            len: domain.num_edges(),
        });
    }
    Ok(range.map(|i| domain.edge_length(i)).sum())
}

pub(crate) fn orient(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

pub(crate) fn point_segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn on_segment(a: &Point2<f64>, b: &Point2<f64>, p: &Point2<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test.
pub(crate) fn segments_intersect(
    a: &Point2<f64>,
    b: &Point2<f64>,
    c: &Point2<f64>,
    d: &Point2<f64>,
) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Two edges leaving `shared` towards `p` and `q` fold back onto each other.
fn collinear_overlap(shared: &Point2<f64>, p: &Point2<f64>, q: &Point2<f64>) -> bool {
    orient(shared, p, q) == 0.0 && (p - shared).dot(&(q - shared)) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolygonDomain {
        PolygonDomain::new(
            "sq",
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_clockwise() {
        let err = PolygonDomain::new(
            "cw",
            vec![Point2::new(0.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 0.0)],
        );
        assert!(matches!(err, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn rejects_bowtie() {
        let err = PolygonDomain::new(
            "bowtie",
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_repeated_vertex() {
        let err = PolygonDomain::new(
            "dup",
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
        );
        assert!(matches!(err, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn square_measures() {
        let sq = unit_square();
        assert_eq!(surface_measure(&sq, 0..4).unwrap(), 4.0);
        assert_eq!(sq.signed_area(), 1.0);
        assert!(surface_measure(&sq, 2..2).is_err());
        assert!(surface_measure(&sq, 0..5).is_err());
        for i in 0..4 {
            assert!((sq.interior_angle(i) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        }
        assert_eq!(sq.edge_normal(0), Vector2::new(0.0, -1.0));
        assert!(sq.contains(&Point2::new(0.5, 0.5)));
        assert!(!sq.contains(&Point2::new(1.5, 0.5)));
    }

    #[test]
    fn chart_lipschitz_constant_and_length() {
        let c = LipschitzChart::new(vec![(0.0, 1.0), (0.5, 1.5), (1.0, 1.0)]).unwrap();
        assert_eq!(c.lipschitz_constant(), 1.0);
        assert!((c.graph_length() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.eval(0.25), 1.25);
        assert_eq!(c.eval(0.75), 1.25);
        assert!(LipschitzChart::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }
}
