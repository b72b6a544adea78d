//! Conforming triangulation of polygonal domains and its plain-text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{Point2, Vector2};
use spade::handles::{FixedFaceHandle, FixedVertexHandle, InnerTag};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, RefinementParameters, Triangulation,
};

use super::{point_segment_distance, PolygonDomain};
use crate::{Error, Result};

/// Minimum interior angle guaranteed by [`triangulate`], in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;
/// Element diameters stay below this multiple of the target size.
pub const MAX_DIAMETER_FACTOR: f64 = 1.5;

/// Boundary edge oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub normal: Vector2<f64>,
    /// Polygon edge this mesh edge lies on.
    pub segment: usize,
    /// Adjacent triangle.
    pub triangle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub nodes: Vec<Point2<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// Sorted by `(segment, position along segment)`, i.e. in counterclockwise order.
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Largest element diameter.
    pub h: f64,
}

impl TriangleMesh {
    /// Bisects the interior edge `(p, q)`, splitting both adjacent triangles.
    /// Boundary edges keep their nodes and are reattached to the sub-triangle
    /// that carries them.
    pub fn bisect_edge(&self, p: usize, q: usize) -> Result<TriangleMesh> {
        let sharing: Vec<usize> = (0..self.triangles.len())
            .filter(|&t| self.triangles[t].contains(&p) && self.triangles[t].contains(&q))
            .collect();
        if sharing.len() != 2 {
            return Err(Error::Meshing(format!("edge ({p}, {q}) is not an interior edge")));
        }
        let mut mesh = self.clone();
        let m = mesh.nodes.len();
        mesh.nodes.push(Point2::from((self.nodes[p].coords + self.nodes[q].coords) * 0.5));
        let mut halves = Vec::new();
        for &t in &sharing {
            let tri = self.triangles[t];
            // rotate so that the edge is (tri[0], tri[1])
            let r = (0..3)
                .find(|&r| {
                    let (u, v) = (tri[r], tri[(r + 1) % 3]);
                    (u == p && v == q) || (u == q && v == p)
                })
                .expect("edge of the triangle");
            let (u, v, w) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
            mesh.triangles[t] = [u, m, w];
            halves.push((t, mesh.triangles.len()));
            mesh.triangles.push([m, v, w]);
        }
        for e in &mut mesh.boundary_edges {
            if let Some(&(t, k)) = halves.iter().find(|h| h.0 == e.triangle) {
                e.triangle = if e.nodes.iter().all(|n| mesh.triangles[t].contains(n)) { t } else { k };
            }
        }
        Ok(mesh)
    }

    /// Builds a mesh from raw nodes and positively oriented triangles, deriving
    /// boundary edges, normals and parent segments from `domain`.
    pub fn from_parts(
        domain: &PolygonDomain,
        nodes: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| nodes[i]);
            if super::orient(&a, &b, &c) <= 0.0 {
                return Err(Error::Meshing(format!("triangle {t} is not positively oriented")));
            }
        }
        let mut count: HashMap<(usize, usize), (usize, usize, usize)> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let key = (i.min(j), i.max(j));
                count.entry(key).and_modify(|e| e.2 += 1).or_insert((i, j, 1));
            }
        }
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        let scale = domain.diameter();
        let mut boundary = Vec::new();
        let mut keys: Vec<_> = count.iter().filter(|(_, v)| v.2 == 1).map(|(_, v)| (v.0, v.1)).collect();
        keys.sort_unstable();
        for (i, j) in keys {
            let (p, q) = (nodes[i], nodes[j]);
            let mid = Point2::from((p.coords + q.coords) * 0.5);
            let segment = (0..domain.num_edges())
                .map(|s| {
                    let (a, b) = domain.edge(s);
                    let d = point_segment_distance(&p, &a, &b)
                        .max(point_segment_distance(&q, &a, &b))
                        .max(point_segment_distance(&mid, &a, &b));
                    (d, s)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .ok_or_else(|| Error::Meshing("domain has no edges".into()))?;
            if segment.0 > 1e-9 * scale {
                return Err(Error::Meshing(format!(
                    "boundary edge ({i}, {j}) does not lie on the polygon (distance {:e})",
                    segment.0
                )));
            }
            let t = (q - p).normalize();
            boundary.push(BoundaryEdge {
                nodes: [i, j],
                normal: Vector2::new(t.y, -t.x),
                segment: segment.1,
                triangle: owner[&(i, j)],
            });
        }
        let along = |e: &BoundaryEdge| {
            let (a, _) = domain.edge(e.segment);
            (nodes[e.nodes[0]] - a).norm()
        };
        boundary.sort_by(|x, y| x.segment.cmp(&y.segment).then(along(x).total_cmp(&along(y))));
        let h = triangles
            .iter()
            .map(|t| triangle_diameter(&nodes, t))
            .fold(0.0, f64::max);
        Ok(Self {
            nodes,
            triangles,
            boundary_edges: boundary,
            h,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * super::orient(&a, &b, &c)
    }

    pub fn centroid(&self, t: usize) -> Point2<f64> {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        Point2::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        (self.nodes[e.nodes[1]] - self.nodes[e.nodes[0]]).norm()
    }

    /// Sorted, deduplicated list of nodes lying on the boundary.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_edges.iter().flat_map(|e| e.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| min_angle(&self.nodes, t))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Writes nodes, triangles and boundary edges, one record per line with 17
    /// significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# steklab triangle mesh").ok();
        writeln!(s, "nodes {}", self.nodes.len()).ok();
        for p in &self.nodes {
            writeln!(s, "{:.16e} {:.16e}", p.x, p.y).ok();
        }
        writeln!(s, "triangles {}", self.triangles.len()).ok();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).ok();
        }
        writeln!(s, "boundary_edges {}", self.boundary_edges.len()).ok();
        for e in &self.boundary_edges {
            writeln!(
                s,
                "{} {} {} {} {:.16e} {:.16e}",
                e.nodes[0], e.nodes[1], e.segment, e.triangle, e.normal.x, e.normal.y
            )
            .ok();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        for line in r.lines() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                lines.push(t.to_string());
            }
        }
        let mut it = lines.into_iter();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input in {what}")))
        };
        fn count(line: &str, tag: &str) -> Result<usize> {
            let mut f = line.split_whitespace();
            if f.next() != Some(tag) {
                return Err(Error::Parse(format!("expected `{tag}`, found `{line}`")));
            }
            f.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad count in `{line}`")))
        }
        fn fields<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
            let v: Vec<T> = line
                .split_whitespace()
                .map(|f| f.parse().map_err(|_| Error::Parse(format!("bad field `{f}`"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Parse(format!("expected {n} fields in `{line}`")));
            }
            Ok(v)
        }

        let n = count(&next("header")?, "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let v: Vec<f64> = fields(&next("nodes")?, 2)?;
            nodes.push(Point2::new(v[0], v[1]));
        }
        let nt = count(&next("header")?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let v: Vec<usize> = fields(&next("triangles")?, 3)?;
            if v.iter().any(|&i| i >= n) {
                return Err(Error::Parse(format!("triangle {v:?} references a missing node")));
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        let nb = count(&next("header")?, "boundary_edges")?;
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let line = next("boundary_edges")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("expected 6 fields in `{line}`")));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad index `{s}`")));
            let flt = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad float `{s}`")));
            boundary_edges.push(BoundaryEdge {
                nodes: [int(f[0])?, int(f[1])?],
                segment: int(f[2])?,
                triangle: int(f[3])?,
                normal: Vector2::new(flt(f[4])?, flt(f[5])?),
            });
        }
        let h = triangles.iter().map(|t| triangle_diameter(&nodes, t)).fold(0.0, f64::max);
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            h,
        })
    }
}

pub(crate) fn triangle_diameter(nodes: &[Point2<f64>], t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| nodes[i]);
    (b - a).norm().max((c - b).norm()).max((a - c).norm())
}

fn min_angle(nodes: &[Point2<f64>], t: &[usize; 3]) -> f64 {
    let p = t.map(|i| nodes[i]);
    (0..3)
        .map(|k| {
            let (u, v) = (p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]);
            (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}

type Cdt = ConstrainedDelaunayTriangulation<spade::Point2<f64>>;

/// Conforming triangulation of `domain` with target element size `h`.
///
/// Boundary edges are subdivided to length at most `h`; the interior is seeded
/// with a square lattice of spacing `h` aligned to the origin; a constrained
/// Delaunay triangulation of these points is then refined to a 20 degree
/// minimum angle and a maximum element diameter of `1.5 h`.
pub fn triangulate(domain: &PolygonDomain, h: f64) -> Result<TriangleMesh> {
    let diam = domain.diameter();
    if !(h.is_finite() && h > 1e-6 * diam) {
        return Err(Error::InvalidParameter(format!(
            "target size {h} must exceed 1e-6 times the diameter {diam}"
        )));
    }
    let mut points: Vec<spade::Point2<f64>> = Vec::new();
    let mut constraints: Vec<[usize; 2]> = Vec::new();
    for s in 0..domain.num_edges() {
        let (a, b) = domain.edge(s);
        let pieces = ((b - a).norm() / h).ceil().max(1.0) as usize;
        for j in 0..pieces {
            let p = a + (b - a) * (j as f64 / pieces as f64);
            points.push(spade::Point2::new(p.x, p.y));
        }
    }
    let nb = points.len();
    for i in 0..nb {
        constraints.push([i, (i + 1) % nb]);
    }
    let (lo, hi) = domain.bounding_box();
    let (i0, i1) = ((lo.x / h).floor() as i64, (hi.x / h).ceil() as i64);
    let (j0, j1) = ((lo.y / h).floor() as i64, (hi.y / h).ceil() as i64);
    let clearance = 0.6 * h;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let p = Point2::new(i as f64 * h, j as f64 * h);
            if domain.contains(&p) && domain.distance_to_boundary(&p) >= clearance {
                points.push(spade::Point2::new(p.x, p.y));
            }
        }
    }
    let mut cdt = Cdt::bulk_load_cdt(points, constraints)
        .map_err(|e| Error::Meshing(format!("constrained triangulation failed: {e:?}")))?;

    let max_area = 0.5 * h * h * (1.0 + 1e-9);
    let max_diam = MAX_DIAMETER_FACTOR * h;
    let budget = 20 * cdt.num_vertices() + 1000;
    for round in 0.. {
        let result = cdt.refine(
            RefinementParameters::new()
                .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG))
                .with_max_allowed_area(max_area)
                .with_max_additional_vertices(budget)
                .exclude_outer_faces(true),
        );
        if !result.refinement_complete {
            return Err(Error::Meshing(format!(
                "refinement of `{}` ran out of vertices",
                domain.name()
            )));
        }
        let inside = inside_faces(&cdt);
        let oversized: Vec<spade::Point2<f64>> = inside
            .iter()
            .filter_map(|&f| {
                let [a, b, c] = cdt.face(f).positions();
                let d = dist(a, b).max(dist(b, c)).max(dist(c, a));
                (d > max_diam).then(|| spade::Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0))
            })
            .collect();
        if oversized.is_empty() {
            break;
        }
        if round > 50 {
            return Err(Error::Meshing(format!(
                "could not reach element diameter {max_diam} on `{}`",
                domain.name()
            )));
        }
        for p in oversized {
            cdt.insert(p)
                .map_err(|e| Error::Meshing(format!("steiner insertion failed: {e:?}")))?;
        }
    }

    let mut index: HashMap<FixedVertexHandle, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    for f in inside_faces(&cdt) {
        let f = cdt.face(f);
        let tri = f.vertices().map(|v| {
            *index.entry(v.fix()).or_insert_with(|| {
                let p = v.position();
                nodes.push(Point2::new(p.x, p.y));
                nodes.len() - 1
            })
        });
        triangles.push(tri);
    }
    let mesh = TriangleMesh::from_parts(domain, nodes, triangles)?;
    let blen: f64 = mesh.boundary_edges.iter().map(|e| mesh.edge_length(e)).sum();
    if (blen - domain.perimeter()).abs() > 1e-9 * domain.perimeter() {
        return Err(Error::Meshing(format!(
            "boundary of the mesh has length {blen}, polygon perimeter is {}",
            domain.perimeter()
        )));
    }
    let small = smallest_input_angle(domain).to_degrees();
    let min_angle = mesh.min_angle_deg();
    if min_angle < MIN_ANGLE_DEG.min(small) - 1e-6 {
        return Err(Error::Meshing(format!(
            "minimum angle {min_angle:.3} deg below the {MIN_ANGLE_DEG} deg guarantee"
        )));
    }
    Ok(mesh)
}

/// Faces enclosed by the constraint edges: everything not reachable from the
/// convex hull without crossing a constraint.
fn inside_faces(cdt: &Cdt) -> Vec<FixedFaceHandle<InnerTag>> {
    let mut outside = std::collections::HashSet::new();
    let mut stack = Vec::new();
    for f in cdt.inner_faces() {
        let open_to_hull = f
            .adjacent_edges()
            .iter()
            .any(|e| e.rev().face().is_outer() && !e.is_constraint_edge());
        if open_to_hull && outside.insert(f.fix()) {
            stack.push(f.fix());
        }
    }
    while let Some(f) = stack.pop() {
        for e in cdt.face(f).adjacent_edges() {
            if e.is_constraint_edge() {
                continue;
            }
            if let Some(g) = e.rev().face().as_inner() {
                if outside.insert(g.fix()) {
                    stack.push(g.fix());
                }
            }
        }
    }
    cdt.inner_faces().map(|f| f.fix()).filter(|f| !outside.contains(f)).collect()
}

fn dist(a: spade::Point2<f64>, b: spade::Point2<f64>) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn smallest_input_angle(domain: &PolygonDomain) -> f64 {
    (0..domain.num_edges())
        .map(|i| domain.interior_angle(i))
        .fold(f64::INFINITY, f64::min)
}
