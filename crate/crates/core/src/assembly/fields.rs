//! Coefficient generators: the matrix `a(x)`, the potential `v₀(x)` and the
//! boundary weight `ρ`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Rotation2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::geometry::PolygonDomain;
use crate::{Error, Result};

/// Symmetric positive definite 2×2 matrix field.
pub trait MatrixField: Debug + Send + Sync {
    fn eval(&self, x: &Point2<f64>) -> Matrix2<f64>;

    /// Evaluation at a point known to lie in mesh triangle `cell`.
    fn eval_in_cell(&self, x: &Point2<f64>, _cell: usize) -> Matrix2<f64> {
        self.eval(x)
    }

    /// Declared ellipticity constant `k₀`: `a(x) ≥ k₀ I` everywhere.
    fn ellipticity(&self) -> f64;

    /// Whether the field may jump inside an element.
    fn is_discontinuous(&self) -> bool {
        false
    }
}

pub trait ScalarField: Debug + Send + Sync {
    fn eval(&self, x: &Point2<f64>) -> f64;

    fn eval_in_cell(&self, x: &Point2<f64>, _cell: usize) -> f64 {
        self.eval(x)
    }

    fn is_discontinuous(&self) -> bool {
        false
    }
}

/// Weight on the boundary, addressed by polygon segment.
pub trait BoundaryWeight: Debug + Send + Sync {
    fn eval(&self, x: &Point2<f64>, segment: usize) -> f64;

    /// Evaluation on mesh boundary edge `edge` (an index into
    /// `TriangleMesh::boundary_edges`).
    fn eval_on_edge(&self, x: &Point2<f64>, segment: usize, _edge: usize) -> f64 {
        self.eval(x, segment)
    }

    /// Declared bound `|ρ| ≤ bound`.
    fn bound(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub a: Arc<dyn MatrixField>,
    pub v0: Arc<dyn ScalarField>,
    pub rho: Arc<dyn BoundaryWeight>,
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
pub fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let (p, q, r) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (p + r);
    mean - (0.25 * (p - r) * (p - r) + q * q).sqrt()
}

fn rotation(angle_deg: f64) -> Matrix2<f64> {
    *Rotation2::new(angle_deg.to_radians()).matrix()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMatrix(pub Matrix2<f64>);

impl ConstantMatrix {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        spd_or_err(&m, &Point2::origin())?;
        Ok(Self(m))
    }
}

impl MatrixField for ConstantMatrix {
    fn eval(&self, _x: &Point2<f64>) -> Matrix2<f64> {
        self.0
    }
    fn ellipticity(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

fn spd_or_err(m: &Matrix2<f64>, at: &Point2<f64>) -> Result<()> {
    let asym = (m[(0, 1)] - m[(1, 0)]).abs();
    let lam = min_eigenvalue(m);
    if asym > 1e-14 * m.abs().max() || !(lam > 0.0) {
        return Err(Error::not_spd(at, lam, 0.0));
    }
    Ok(())
}

/// `high·I` on cells `(i, j)` with `i + j` even, `low·I` otherwise, where
/// `i = ⌊(x − offset)/cell⌋`, `j = ⌊(y − offset)/cell⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkerboard {
    pub cell: f64,
    pub low: f64,
    pub high: f64,
    pub offset: [f64; 2],
}

impl Checkerboard {
    pub fn value(&self, x: &Point2<f64>) -> f64 {
        let i = ((x.x - self.offset[0]) / self.cell).floor() as i64;
        let j = ((x.y - self.offset[1]) / self.cell).floor() as i64;
        if (i + j).rem_euclid(2) == 0 {
            self.high
        } else {
            self.low
        }
    }
}

impl MatrixField for Checkerboard {
    fn eval(&self, x: &Point2<f64>) -> Matrix2<f64> {
        Matrix2::identity() * self.value(x)
    }
    fn ellipticity(&self) -> f64 {
        self.low.min(self.high)
    }
    fn is_discontinuous(&self) -> bool {
        true
    }
}

/// `χ·trace + (1 − χ)·interior` with `χ = max(0, 1 − dist(x, Σ)/width)`, so the
/// boundary trace of the field is exactly `trace`.
#[derive(Debug, Clone)]
pub struct BoundaryMatched {
    pub interior: Arc<dyn MatrixField>,
    pub trace: Arc<dyn MatrixField>,
    pub width: f64,
    pub domain: PolygonDomain,
}

impl BoundaryMatched {
    pub fn blend(&self, x: &Point2<f64>) -> f64 {
        if self.width <= 0.0 {
            return 0.0;
        }
        (1.0 - self.domain.distance_to_boundary(x) / self.width).max(0.0)
    }
}

impl MatrixField for BoundaryMatched {
    fn eval(&self, x: &Point2<f64>) -> Matrix2<f64> {
        let chi = self.blend(x);
        if chi >= 1.0 {
            return self.trace.eval(x);
        }
        if chi <= 0.0 {
            return self.interior.eval(x);
        }
        self.trace.eval(x) * chi + self.interior.eval(x) * (1.0 - chi)
    }
    fn ellipticity(&self) -> f64 {
        self.interior.ellipticity().min(self.trace.ellipticity())
    }
    fn is_discontinuous(&self) -> bool {
        self.interior.is_discontinuous() || self.trace.is_discontinuous()
    }
}

/// Convolution of `base` with the standard bump `exp(−1/(1−|z|²))` scaled to
/// radius `epsilon`, evaluated with a fixed polar product rule and projected
/// onto `{a ≥ k₀ I}`.
#[derive(Debug, Clone)]
pub struct Mollified {
    base: Arc<dyn MatrixField>,
    epsilon: f64,
    stencil: Vec<(Vector2<f64>, f64)>,
}

impl Mollified {
    pub const RADIAL: usize = 8;
    pub const ANGULAR: usize = 16;

    pub fn new(base: Arc<dyn MatrixField>, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mollification scale must be nonnegative, got {epsilon}"
            )));
        }
        let (nodes, weights) = gauss_legendre(Self::RADIAL);
        let mut stencil = Vec::with_capacity(Self::RADIAL * Self::ANGULAR);
        for (r, w) in nodes.iter().zip(&weights) {
            // map [-1, 1] to [0, 1]
            let r = 0.5 * (r + 1.0);
            let bump = (-1.0 / (1.0 - r * r)).exp();
            for k in 0..Self::ANGULAR {
                let t = 2.0 * PI * (k as f64 + 0.5) / Self::ANGULAR as f64;
                stencil.push((Vector2::new(r * t.cos(), r * t.sin()) * epsilon, w * bump * r));
            }
        }
        let total: f64 = stencil.iter().map(|s| s.1).sum();
        stencil.iter_mut().for_each(|s| s.1 /= total);
        Ok(Self {
            base,
            epsilon,
            stencil,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl MatrixField for Mollified {
    fn eval(&self, x: &Point2<f64>) -> Matrix2<f64> {
        if self.epsilon == 0.0 {
            return self.base.eval(x);
        }
        let mut m = Matrix2::zeros();
        for (z, w) in &self.stencil {
            m += self.base.eval(&(x + z)) * *w;
        }
        let m = 0.5 * (m + m.transpose());
        let k0 = self.base.ellipticity();
        if min_eigenvalue(&m) >= k0 {
            return m;
        }
        let mut e = SymmetricEigen::new(m);
        e.eigenvalues.iter_mut().for_each(|l| *l = l.max(k0));
        e.recompose()
    }
    fn ellipticity(&self) -> f64 {
        self.base.ellipticity()
    }
    /// Inherits the base flag so that every `ε` uses the same quadrature rule.
    fn is_discontinuous(&self) -> bool {
        self.base.is_discontinuous()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantScalar(pub f64);

impl ScalarField for ConstantScalar {
    fn eval(&self, _x: &Point2<f64>) -> f64 {
        self.0
    }
}

/// Smooth bump `height·exp(1 − 1/(1 − |x−c|²/r²))` supported in the disk of
/// radius `r` about `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Point2<f64>,
    pub radius: f64,
    pub height: f64,
}

impl ScalarField for Bump {
    fn eval(&self, x: &Point2<f64>) -> f64 {
        let s = (x - self.center).norm_squared() / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            self.height * (1.0 - 1.0 / (1.0 - s)).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantWeight(pub f64);

impl BoundaryWeight for ConstantWeight {
    fn eval(&self, _x: &Point2<f64>, _segment: usize) -> f64 {
        self.0
    }
    fn bound(&self) -> f64 {
        self.0.abs()
    }
}

/// One constant per polygon edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWeight(pub Vec<f64>);

impl BoundaryWeight for SegmentWeight {
    fn eval(&self, _x: &Point2<f64>, segment: usize) -> f64 {
        self.0[segment]
    }
    fn bound(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Catalog entry for `a`, e.g. `{ kind = "rotated", d1 = 4.0, d2 = 1.0, angle_deg = 30.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSpec {
    Constant {
        #[serde(default = "one")]
        scale: f64,
    },
    Diagonal {
        d1: f64,
        d2: f64,
    },
    Rotated {
        d1: f64,
        d2: f64,
        angle_deg: f64,
    },
    Checkerboard {
        cell: f64,
        low: f64,
        high: f64,
        #[serde(default)]
        offset: [f64; 2],
    },
    BoundaryMatched {
        interior: Box<MatrixSpec>,
        trace: Box<MatrixSpec>,
        blend_width: f64,
    },
    Mollified {
        base: Box<MatrixSpec>,
        epsilon: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec::Constant { scale: 1.0 }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl MatrixSpec {
    pub fn build(&self, domain: &PolygonDomain) -> Result<Arc<dyn MatrixField>> {
        Ok(match self {
            MatrixSpec::Constant { scale } => {
                positive("scale", *scale)?;
                Arc::new(ConstantMatrix::new(Matrix2::identity() * *scale)?)
            }
            MatrixSpec::Diagonal { d1, d2 } => {
                positive("d1", *d1)?;
                positive("d2", *d2)?;
                Arc::new(ConstantMatrix::new(Matrix2::new(*d1, 0.0, 0.0, *d2))?)
            }
            MatrixSpec::Rotated { d1, d2, angle_deg } => {
                positive("d1", *d1)?;
                positive("d2", *d2)?;
                let r = rotation(*angle_deg);
                let m = r * Matrix2::new(*d1, 0.0, 0.0, *d2) * r.transpose();
                Arc::new(ConstantMatrix::new(0.5 * (m + m.transpose()))?)
            }
            MatrixSpec::Checkerboard { cell, low, high, offset } => {
                positive("cell", *cell)?;
                positive("low", *low)?;
                positive("high", *high)?;
                Arc::new(Checkerboard {
                    cell: *cell,
                    low: *low,
                    high: *high,
                    offset: *offset,
                })
            }
            MatrixSpec::BoundaryMatched {
                interior,
                trace,
                blend_width,
            } => {
                if !(blend_width.is_finite() && *blend_width >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "blend width must be nonnegative, got {blend_width}"
                    )));
                }
                Arc::new(BoundaryMatched {
                    interior: interior.build(domain)?,
                    trace: trace.build(domain)?,
                    width: *blend_width,
                    domain: domain.clone(),
                })
            }
            MatrixSpec::Mollified { base, epsilon } => Arc::new(Mollified::new(base.build(domain)?, *epsilon)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant { value: f64 },
    Bump { center: [f64; 2], radius: f64, height: f64 },
}

impl Default for ScalarSpec {
    fn default() -> Self {
        ScalarSpec::Constant { value: 1.0 }
    }
}

impl ScalarSpec {
    pub fn build(&self) -> Result<Arc<dyn ScalarField>> {
        Ok(match *self {
            ScalarSpec::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidParameter(format!("v0 must be nonnegative, got {value}")));
                }
                Arc::new(ConstantScalar(value))
            }
            ScalarSpec::Bump { center, radius, height } => {
                positive("radius", radius)?;
                positive("height", height)?;
                Arc::new(Bump {
                    center: Point2::new(center[0], center[1]),
                    radius,
                    height,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhoSpec {
    Constant { value: f64 },
    /// One value per polygon edge, in vertex order.
    PerSegment { values: Vec<f64> },
}

impl Default for RhoSpec {
    fn default() -> Self {
        RhoSpec::Constant { value: 1.0 }
    }
}

impl RhoSpec {
    pub fn build(&self, domain: &PolygonDomain) -> Result<Arc<dyn BoundaryWeight>> {
        Ok(match self {
            RhoSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("rho must be finite".into()));
                }
                Arc::new(ConstantWeight(*value))
            }
            RhoSpec::PerSegment { values } => {
                if values.len() != domain.num_edges() {
                    return Err(Error::InvalidParameter(format!(
                        "{} weights given for {} boundary segments",
                        values.len(),
                        domain.num_edges()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("rho must be finite".into()));
                }
                Arc::new(SegmentWeight(values.clone()))
            }
        })
    }
}

/// Serializable description of a full coefficient set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSpec {
    pub a: MatrixSpec,
    pub v0: ScalarSpec,
    pub rho: RhoSpec,
}

impl CoefficientSpec {
    pub fn build(&self, domain: &PolygonDomain) -> Result<CoefficientField> {
        Ok(CoefficientField {
            a: self.a.build(domain)?,
            v0: self.v0.build()?,
            rho: self.rho.build(domain)?,
        })
    }
}
