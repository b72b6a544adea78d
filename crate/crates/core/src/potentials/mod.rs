//! Planar single and double layer potentials, the Neumann-to-Dirichlet
//! operator built from them, and two exploratory diagnostics of the
//! composition `S·D`.
//!
//! Densities are piecewise constant on straight panels and collocated at panel
//! midpoints. With `R(z) = −(1/2π) log|z|`,
//! `(Sφ)(x) = ∫ R(x−y) φ(y) dμ(y)` and
//! `(Dφ)(x) = ∫ ∂_{n(y)} R(x−y) φ(y) dμ(y)`. Functions on the boundary are
//! paired with the panel-length weighted product `⟨φ, ψ⟩ = Σ ℓ_i φ_i ψ_i`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Point2, Vector2};
use serde::Serialize;

use crate::assembly::gauss_legendre;
use crate::geometry::PolygonDomain;
use crate::{Error, Result};

/// Largest number of panels accepted by [`build_layer_operators`].
pub const PANEL_CAP: usize = 6000;
/// Diameter the domain is rescaled to before building the operators.
pub const WORKING_DIAMETER: f64 = 0.8;
/// Largest accepted 1-norm condition number of the regularized `½ + D*`.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
    pub mid: Point2<f64>,
    pub len: f64,
    pub normal: Vector2<f64>,
    /// Polygon edge the panel lies on.
    pub edge: usize,
}

/// Off-diagonal rule for the double layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleLayerRule {
    /// Exact integral: `−θ/(2π)` with `θ` the signed angle the panel subtends.
    #[default]
    ExactAngle,
    /// Four-point Gauss–Legendre per panel.
    Gauss4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromOperator {
    /// Panels of the rescaled domain.
    pub panels: Vec<Panel>,
    /// Single layer acting on midpoint values, self-adjoint for the weighted product.
    pub s: DMatrix<f64>,
    /// Double layer (direct value).
    pub d: DMatrix<f64>,
    /// Weighted adjoint `W⁻¹DᵀW` (the Neumann–Poincaré operator).
    pub dstar: DMatrix<f64>,
    /// Factor applied to the domain (`WORKING_DIAMETER / diameter`).
    pub scale: f64,
}

/// Rescales `domain` to diameter [`WORKING_DIAMETER`], splits every edge into
/// `panels_per_edge` equal panels and fills `S`, `D` and `D*`.
pub fn build_layer_operators(domain: &PolygonDomain, panels_per_edge: usize) -> Result<NystromOperator> {
    build_layer_operators_with(domain, panels_per_edge, DoubleLayerRule::ExactAngle)
}

pub fn build_layer_operators_with(
    domain: &PolygonDomain,
    panels_per_edge: usize,
    rule: DoubleLayerRule,
) -> Result<NystromOperator> {
    if panels_per_edge == 0 {
        return Err(Error::InvalidParameter("panels_per_edge must be at least 1".into()));
    }
    let requested = panels_per_edge.saturating_mul(domain.num_edges());
    if requested > PANEL_CAP {
        return Err(Error::PanelBudget { requested, cap: PANEL_CAP });
    }
    let scale = WORKING_DIAMETER / domain.diameter();
    let scaled = domain.scaled(scale)?;
    let mut panels = Vec::with_capacity(requested);
    for e in 0..scaled.num_edges() {
        let (p, q) = scaled.edge(e);
        let normal = scaled.edge_normal(e);
        for k in 0..panels_per_edge {
            let a = p + (q - p) * (k as f64 / panels_per_edge as f64);
            let b = p + (q - p) * ((k + 1) as f64 / panels_per_edge as f64);
            panels.push(Panel {
                a,
                b,
                mid: Point2::from((a.coords + b.coords) * 0.5),
                len: (b - a).norm(),
                normal,
                edge: e,
            });
        }
    }
    let n = panels.len();
    let w: Vec<f64> = panels.iter().map(|p| p.len).collect();
    let mut g = DMatrix::zeros(n, n);
    let mut d = DMatrix::zeros(n, n);
    let (gx, gw) = gauss_legendre(4);
    for (i, pi) in panels.iter().enumerate() {
        for (j, pj) in panels.iter().enumerate() {
            g[(i, j)] = pi.len * log_integral(&pi.mid, pj);
            if i != j {
                d[(i, j)] = match rule {
                    DoubleLayerRule::ExactAngle => -subtended_angle(&pi.mid, pj) / (2.0 * PI),
                    DoubleLayerRule::Gauss4 => gx
                        .iter()
                        .zip(&gw)
                        .map(|(t, wt)| {
                            let y = pj.a + (pj.b - pj.a) * (0.5 * (t + 1.0));
                            let r = pi.mid - y;
                            0.5 * wt * pj.len * r.dot(&pj.normal) / (2.0 * PI * r.norm_squared())
                        })
                        .sum(),
                };
            }
        }
    }
    // weighted symmetrization of the single layer: W S is symmetric
    let g = (&g + g.transpose()) * 0.5;
    let mut s = g;
    for i in 0..n {
        s.row_mut(i).scale_mut(1.0 / w[i]);
    }
    let mut dstar = d.transpose();
    for i in 0..n {
        for j in 0..n {
            dstar[(i, j)] *= w[j] / w[i];
        }
    }
    Ok(NystromOperator {
        panels,
        s,
        d,
        dstar,
        scale,
    })
}

/// `−(1/2π) ∫_panel log|x − y| dy`, in closed form.
fn log_integral(x: &Point2<f64>, p: &Panel) -> f64 {
    let t = (p.b - p.a) / p.len;
    let u0 = (p.a - x).dot(&t);
    let u1 = (p.b - x).dot(&t);
    let v = (p.a - x).perp(&t);
    let f = |u: f64| {
        let r2 = u * u + v * v;
        let log_term = if u == 0.0 { 0.0 } else { 0.5 * u * r2.ln() };
        let atan_term = if v == 0.0 { 0.0 } else { v * (u / v).atan() };
        log_term - u + atan_term
    };
    -(f(u1) - f(u0)) / (2.0 * PI)
}

/// Signed angle under which the panel is seen from `x`.
fn subtended_angle(x: &Point2<f64>, p: &Panel) -> f64 {
    let (u, v) = (p.a - x, p.b - x);
    u.perp(&v).atan2(u.dot(&v))
}

impl NystromOperator {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.panels.iter().map(|p| p.len))
    }

    /// `W^{1/2} X W^{-1/2}`: the matrix of `X` in an orthonormal basis of the
    /// weighted product.
    pub fn weighted(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.weights();
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * (w[i] / w[j]).sqrt())
    }

    /// `W^{1/2} S W^{-1/2}`, symmetric by construction.
    pub fn s_symmetric(&self) -> DMatrix<f64> {
        self.weighted(&self.s)
    }

    /// `(½ + D)·1` at every collocation point (zero for the exact jump relation).
    pub fn jump_residual(&self) -> DVector<f64> {
        let ones = DVector::from_element(self.len(), 1.0);
        &self.d * ones + DVector::from_element(self.len(), 0.5)
    }

    /// Weighted `L²` norm of [`Self::jump_residual`], in rescaled units.
    pub fn jump_error(&self) -> f64 {
        let r = self.jump_residual();
        let w = self.weights();
        r.iter().zip(w.iter()).map(|(r, w)| w * r * r).sum::<f64>().sqrt()
    }

    /// Projection onto weighted mean-zero functions, `Q = I − 1wᵀ/L`.
    fn mean_zero_projection(&self) -> DMatrix<f64> {
        let n = self.len();
        let w = self.weights();
        let total = w.sum();
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - w[j] / total)
    }
}

/// The Neumann-to-Dirichlet operator on mean-zero data, by two routes.
#[derive(Debug, Clone, PartialEq)]
pub struct NdOperator {
    /// `Q S (½ + D*)⁻¹ Q`, rescaled units.
    pub nd: DMatrix<f64>,
    /// `Q (2S − 2S D* (½ + D*)⁻¹) Q`.
    pub nd_split: DMatrix<f64>,
    /// Largest entry of `|nd − nd_split|` relative to the largest of `|nd|`.
    pub route_difference: f64,
    /// 1-norm condition number of the regularized `½ + D*`.
    pub condition: f64,
    /// Relative asymmetry of `W^{1/2} ND W^{-1/2}` before symmetrization.
    pub asymmetry: f64,
    /// Nonzero eigenvalues in decreasing order, in the units of the original domain.
    pub eigenvalues: Vec<f64>,
}

/// Builds `ND = S(½ + D*)⁻¹` on weighted mean-zero densities.
///
/// `½ + D*` maps onto the mean-zero subspace and annihilates the equilibrium
/// density; adding `1wᵀ/L` makes it invertible without changing its action on
/// mean-zero data.
pub fn nd_operator(op: &NystromOperator) -> Result<NdOperator> {
    let n = op.len();
    let w = op.weights();
    let total = w.sum();
    let mut m = &op.dstar + DMatrix::identity(n, n) * 0.5;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += w[j] / total;
        }
    }
    let minv = m
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let norm1 = |x: &DMatrix<f64>| {
        x.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let condition = norm1(&m) * norm1(&minv);
    if !(condition <= CONDITION_CAP) {
        return Err(Error::IllConditioned(condition));
    }
    let q = op.mean_zero_projection();
    let sm = &op.s * &minv;
    let nd = &q * &sm * &q;
    let split = &op.s * 2.0 - &op.s * &op.dstar * &minv * 2.0;
    let nd_split = &q * split * &q;
    let scale = nd.abs().max();
    let route_difference = (&nd - &nd_split).abs().max() / scale;

    let sym = op.weighted(&nd);
    let asymmetry = (&sym - sym.transpose()).abs().max() / sym.abs().max();
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    // drop the constant mode, which Q maps to zero
    let zero = (0..ev.len())
        .min_by(|&i, &j| ev[i].abs().total_cmp(&ev[j].abs()))
        .expect("nonempty");
    ev.swap_remove(zero);
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.iter_mut().for_each(|v| *v /= op.scale);
    Ok(NdOperator {
        nd,
        nd_split,
        route_difference,
        condition,
        asymmetry,
        eigenvalues: ev,
    })
}

/// One bin of the composition profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeBin {
    /// Separation (rescaled units) at which the bin is evaluated: the centre
    /// of the bin clamped to the range of its samples. Bins are a fixed
    /// quarter decade wide.
    pub r: f64,
    /// `|T(x,y)| / |R(x−y)|` at `r`, from a least-squares line in `log r`
    /// through the samples of the bin (their mean if they share one `r`).
    pub magnitude: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionProfile {
    /// Pairs with no corner within twice their separation.
    pub smooth: Vec<ProbeBin>,
    /// Pairs with a corner (turning angle above 0.2 rad) within twice their separation.
    pub corner: Vec<ProbeBin>,
    /// Separations covered, in decades.
    pub decades: f64,
    /// Normalization used, recorded in output metadata.
    pub normalization: &'static str,
}

/// Bins per decade of the composition profile.
pub const BINS_PER_DECADE: usize = 4;

/// Samples the kernel `T(x, y)` of `S·D` at panel pairs with geometrically
/// spaced separations and reports `|T| / |R|` (the planar log-kernel
/// normalization) binned in `r = |x − y|`.
pub fn composition_probe(op: &NystromOperator, pair_budget: usize, decades: f64) -> Result<CompositionProfile> {
    let n = op.len();
    if n < 4 || pair_budget == 0 {
        return Err(Error::Resolution("too few panels or pairs".into()));
    }
    let mut offsets = Vec::new();
    let mut m = 1.0f64;
    while (m as usize) <= n / 2 {
        let k = m as usize;
        if offsets.last() != Some(&k) {
            offsets.push(k);
        }
        m *= 1.25;
    }
    let anchors = (pair_budget / offsets.len()).clamp(1, n);
    let corners: Vec<Point2<f64>> = corner_points(op);
    let mut samples: Vec<(f64, f64, bool)> = Vec::new();
    for a in 0..anchors {
        let i = a * n / anchors;
        for &k in &offsets {
            let j = (i + k) % n;
            let r = (op.panels[i].mid - op.panels[j].mid).norm();
            let t: f64 = (0..n).map(|l| op.s[(i, l)] * op.d[(l, j)]).sum::<f64>() / op.panels[j].len;
            let kernel = r.ln().abs() / (2.0 * PI);
            if kernel == 0.0 {
                continue;
            }
            let near_corner = corners.iter().any(|c| (c - op.panels[i].mid).norm() <= 2.0 * r);
            samples.push((r, t.abs() / kernel, near_corner));
        }
    }
    let rmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let rmax = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let spanned = (rmax / rmin).log10();
    if !(spanned >= decades) {
        return Err(Error::Resolution(format!(
            "separations span {spanned:.2} decades, {decades} requested; add panels"
        )));
    }
    // absolute bins, so profiles at different resolutions share bin centres
    let bin = |r: f64| (r.log10() * BINS_PER_DECADE as f64).floor() as i64;
    let collect = |want: bool| {
        let mut acc: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
        for &(r, v, c) in &samples {
            if c == want {
                acc.entry(bin(r)).or_default().push((r.log10(), v));
            }
        }
        acc.into_iter()
            .map(|(b, pts)| {
                let (lo, hi) = pts
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
                let at = ((b as f64 + 0.5) / BINS_PER_DECADE as f64).clamp(lo, hi);
                ProbeBin {
                    r: 10f64.powf(at),
                    magnitude: value_at(&pts, at, hi - lo),
                    count: pts.len(),
                }
            })
            .collect()
    };
    Ok(CompositionProfile {
        smooth: collect(false),
        corner: collect(true),
        decades: spanned,
        normalization: "|T(x,y)| * 2pi / |log|x-y||",
    })
}

fn value_at(pts: &[(f64, f64)], x: f64, spread: f64) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    if spread < 0.02 / BINS_PER_DECADE as f64 {
        return my;
    }
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    my + sxy / sxx * (x - mx)
}

fn corner_points(op: &NystromOperator) -> Vec<Point2<f64>> {
    let n = op.len();
    (0..n)
        .filter_map(|i| {
            let (p, q) = (&op.panels[i], &op.panels[(i + 1) % n]);
            let (u, v) = (p.b - p.a, q.b - q.a);
            let turn = u.perp(&v).atan2(u.dot(&v)).abs();
            (turn > 0.2).then_some(p.b)
        })
        .collect()
}

impl CompositionProfile {
    /// CSV with columns `class,r,magnitude,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::from("class,r,magnitude,count\n");
        for (class, bins) in [("smooth", &self.smooth), ("corner", &self.corner)] {
            for b in bins {
                s.push_str(&format!("{class},{:.16e},{:.16e},{}\n", b.r, b.magnitude, b.count));
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// Leading singular values of `D·S` and `S` in the weighted product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularComparison {
    pub ds: Vec<f64>,
    pub s: Vec<f64>,
    /// `s_n(DS) / s_n(S)`.
    pub ratio: Vec<f64>,
}

pub fn ds_vs_s_singulars(op: &NystromOperator, k: usize) -> Result<SingularComparison> {
    if k > op.len() {
        return Err(Error::InvalidParameter(format!(
            "{k} singular values requested from {} panels",
            op.len()
        )));
    }
    let top = |m: DMatrix<f64>| {
        let mut v: Vec<f64> = m.singular_values().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.truncate(k);
        v
    };
    let ds = top(op.weighted(&(&op.d * &op.s)));
    let s = top(op.weighted(&op.s));
    let ratio = ds.iter().zip(&s).map(|(a, b)| a / b).collect();
    Ok(SingularComparison { ds, s, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_panel_log_integral() {
        let p = Panel {
            a: Point2::new(0.0, 0.0),
            b: Point2::new(0.1, 0.0),
            mid: Point2::new(0.05, 0.0),
            len: 0.1,
            normal: Vector2::new(0.0, -1.0),
            edge: 0,
        };
        let expected = -(0.1 * ((0.05f64).ln() - 1.0)) / (2.0 * PI);
        assert!((log_integral(&p.mid, &p) - expected).abs() < 1e-15);
        // off-panel against a fine midpoint rule
        let x = Point2::new(0.03, 0.02);
        let m = 20000;
        let brute: f64 = (0..m)
            .map(|k| {
                let y = Point2::new(0.1 * (k as f64 + 0.5) / m as f64, 0.0);
                -(x - y).norm().ln() / (2.0 * PI) * 0.1 / m as f64
            })
            .sum();
        assert!((log_integral(&x, &p) - brute).abs() < 1e-9);
    }

    #[test]
    fn panel_budget() {
        let d = crate::geometry::DomainSpec::Square { side: 1.0 }.build().unwrap();
        assert!(matches!(
            build_layer_operators(&d, 2000),
            Err(Error::PanelBudget { requested: 8000, cap: 6000 })
        ));
        assert!(build_layer_operators(&d, 0).is_err());
    }
}
