//! The generalized symmetric pencil `B x = μ A x`, counting functions and
//! tail estimates of the Weyl coefficient.
//!
//! `A` is the energy form and `B` the boundary weight form, so the `μ` are the
//! critical values of the ratio `ρ₀[γu] / a₀[u]`.

mod envelope;

pub use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Largest dimension accepted by [`solve_dense`].
pub const DENSE_CAP: usize = 8000;
/// Residual tolerance of the direct methods.
pub const DENSE_TOL: f64 = 1e-8;
/// Residual tolerance of [`solve_iterative`].
pub const ITERATIVE_TOL: f64 = 1e-6;
/// Eigenvalues with `|μ| ≤ NULL_RATIO · max|μ|` are treated as zero.
pub const NULL_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Cholesky reduction of the full pencil.
    Dense,
    /// Lanczos iteration on `A⁻¹B`.
    Iterative,
    /// Interior elimination onto the support of `B`, then a dense reduction.
    Condensed,
    /// As `Condensed` for a singular `A` whose kernel is the constants: the
    /// reversed pencil is solved and the constant mode dropped.
    CondensedMeanZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `μ₁ ≥ μ₂ ≥ … > 0`.
    pub positive: Vec<f64>,
    /// Negative eigenvalues ordered by decreasing magnitude.
    pub negative: Vec<f64>,
    /// `‖Bx − μAx‖₂ / ‖Ax‖₂`, aligned with `positive`.
    pub positive_residuals: Vec<f64>,
    pub negative_residuals: Vec<f64>,
    pub method: Method,
    /// Eigenvalues discarded as numerically zero.
    pub null_count: usize,
    /// Number of degrees of freedom on which `B` is supported.
    pub boundary_dofs: usize,
}

impl Spectrum {
    fn empty(method: Method, boundary_dofs: usize) -> Self {
        Self {
            positive: Vec::new(),
            negative: Vec::new(),
            positive_residuals: Vec::new(),
            negative_residuals: Vec::new(),
            method,
            null_count: 0,
            boundary_dofs,
        }
    }

    pub fn branch(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Plus => &self.positive,
            Sign::Minus => &self.negative,
        }
    }

    pub fn residuals(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Plus => &self.positive_residuals,
            Sign::Minus => &self.negative_residuals,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.positive_residuals
            .iter()
            .chain(&self.negative_residuals)
            .fold(0.0, |m, r| m.max(*r))
    }

    /// CSV with columns `index,branch,eigenvalue,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::from("index,branch,eigenvalue,residual\n");
        for sign in [Sign::Plus, Sign::Minus] {
            for (k, (mu, r)) in self.branch(sign).iter().zip(self.residuals(sign)).enumerate() {
                s.push_str(&format!("{},{},{mu:.16e},{r:.16e}\n", k + 1, sign.symbol()));
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Builds a spectrum from eigenpairs, splitting by sign and dropping the
    /// near-zero cluster.
    fn from_pairs(pairs: Vec<(f64, f64)>, method: Method, boundary_dofs: usize) -> Self {
        let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
        let mut out = Self::empty(method, boundary_dofs);
        let mut pos: Vec<(f64, f64)> = Vec::new();
        let mut neg: Vec<(f64, f64)> = Vec::new();
        for (mu, r) in pairs {
            if mu.abs() <= NULL_RATIO * scale || mu == 0.0 {
                out.null_count += 1;
            } else if mu > 0.0 {
                pos.push((mu, r));
            } else {
                neg.push((mu, r));
            }
        }
        pos.sort_by(|a, b| b.0.total_cmp(&a.0));
        neg.sort_by(|a, b| a.0.total_cmp(&b.0));
        (out.positive, out.positive_residuals) = pos.into_iter().unzip();
        (out.negative, out.negative_residuals) = neg.into_iter().unzip();
        out
    }
}

fn check_square(a: &CsrMatrix, b: &CsrMatrix) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "pencil shapes {}x{} and {}x{} do not match",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(n)
}

/// `‖Bx − μAx‖₂ / ‖Ax‖₂`.
pub fn pencil_residual(a: &CsrMatrix, b: &CsrMatrix, mu: f64, x: &DVector<f64>) -> f64 {
    let ax = a.mul_vec(x);
    let denom = ax.norm();
    if denom == 0.0 {
        return f64::INFINITY;
    }
    (b.mul_vec(x) - ax * mu).norm() / denom
}

/// Eigenpairs of `(M, N)` with `N` SPD via `N = LLᵀ`, `C = L⁻¹ M L⁻ᵀ`.
fn reduce_dense(m: &DMatrix<f64>, n: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let l = n
        .cholesky()
        .ok_or_else(|| Error::Cholesky("matrix is not positive definite".into()))?
        .l();
    let y = l
        .solve_lower_triangular(m)
        .ok_or_else(|| Error::Cholesky("singular factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Cholesky("singular factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let x = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::Cholesky("singular factor".into()))?;
    Ok((eig.eigenvalues, x))
}

/// All eigenvalues of the pencil by Cholesky reduction of the dense matrices.
pub fn solve_dense(a: &CsrMatrix, b: &CsrMatrix) -> Result<Spectrum> {
    let n = check_square(a, b)?;
    if n > DENSE_CAP {
        return Err(Error::DimensionCap { dim: n, cap: DENSE_CAP });
    }
    let (mu, x) = reduce_dense(&b.to_dense(), a.to_dense())?;
    let pairs = (0..n)
        .map(|k| (mu[k], pencil_residual(a, b, mu[k], &x.column(k).into_owned())))
        .collect();
    Ok(Spectrum::from_pairs(pairs, Method::Dense, b.nonzero_rows().len()))
}

/// Splits dofs into the support of `B` and the rest.
fn partition(b: &CsrMatrix) -> (Vec<usize>, Vec<usize>) {
    let boundary = b.nonzero_rows();
    let mut mark = vec![false; b.nrows()];
    boundary.iter().for_each(|&i| mark[i] = true);
    let interior = (0..b.nrows()).filter(|&i| !mark[i]).collect();
    (boundary, interior)
}

/// Interior elimination data shared by the condensed solvers.
struct Condensed {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    a_ib: CsrMatrix,
    factor: Option<EnvelopeCholesky>,
}

impl Condensed {
    fn new(a: &CsrMatrix, b: &CsrMatrix) -> Result<Self> {
        let (boundary, interior) = partition(b);
        let factor = if interior.is_empty() {
            None
        } else {
            Some(EnvelopeCholesky::factor(&a.submatrix(&interior, &interior))?)
        };
        Ok(Self {
            a_ib: a.submatrix(&interior, &boundary),
            boundary,
            interior,
            factor,
        })
    }

    /// `A_II⁻¹ A_IB x_b` for every column of `x_b`, solved in parallel.
    fn harmonic_extension(&self, x_b: &DMatrix<f64>) -> DMatrix<f64> {
        let ni = self.interior.len();
        let k = x_b.ncols();
        let mut out = DMatrix::zeros(ni, k);
        let Some(factor) = &self.factor else {
            return out;
        };
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(k.max(1));
        let chunk = k.div_ceil(threads.max(1)).max(1);
        let columns: Vec<Vec<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..k)
                .step_by(chunk)
                .map(|c0| {
                    scope.spawn(move || {
                        (c0..(c0 + chunk).min(k))
                            .map(|c| {
                                let rhs = self.a_ib.mul_vec(&x_b.column(c).into_owned());
                                factor.solve(rhs.as_slice())
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("solver thread panicked"))
                .collect()
        });
        for (c, col) in columns.into_iter().enumerate() {
            out.column_mut(c).copy_from_slice(&col);
        }
        out
    }

    /// Schur complement `A_BB − A_BI A_II⁻¹ A_IB`.
    fn schur(&self, a: &CsrMatrix) -> DMatrix<f64> {
        let nb = self.boundary.len();
        let z = self.harmonic_extension(&DMatrix::identity(nb, nb));
        let a_bb = a.submatrix(&self.boundary, &self.boundary).to_dense();
        let a_bi = a.submatrix(&self.boundary, &self.interior);
        let mut s = a_bb;
        for c in 0..nb {
            let col = a_bi.mul_vec(&z.column(c).into_owned());
            for r in 0..nb {
                s[(r, c)] -= col[r];
            }
        }
        (&s + s.transpose()) * 0.5
    }

    /// Full nodal vectors from boundary values (interior part is the discrete
    /// `a`-harmonic extension).
    fn extend(&self, n: usize, x_b: &DMatrix<f64>) -> DMatrix<f64> {
        let z = self.harmonic_extension(x_b);
        let mut x = DMatrix::zeros(n, x_b.ncols());
        for (r, &i) in self.boundary.iter().enumerate() {
            for c in 0..x_b.ncols() {
                x[(i, c)] = x_b[(r, c)];
            }
        }
        for (r, &i) in self.interior.iter().enumerate() {
            for c in 0..x_b.ncols() {
                x[(i, c)] = -z[(r, c)];
            }
        }
        x
    }
}

/// Nonzero eigenvalues of the pencil through elimination of the degrees of
/// freedom outside the support of `B`, which cannot carry nonzero eigenvalues.
pub fn solve_condensed(a: &CsrMatrix, b: &CsrMatrix) -> Result<Spectrum> {
    let n = check_square(a, b)?;
    let cond = Condensed::new(a, b)?;
    let nb = cond.boundary.len();
    if nb == 0 {
        return Ok(Spectrum::empty(Method::Condensed, 0));
    }
    if nb > DENSE_CAP {
        return Err(Error::DimensionCap { dim: nb, cap: DENSE_CAP });
    }
    let s = cond.schur(a);
    let b_bb = b.submatrix(&cond.boundary, &cond.boundary).to_dense();
    let (mu, x_b) = reduce_dense(&b_bb, s)?;
    let x = cond.extend(n, &x_b);
    let pairs = (0..nb)
        .map(|k| (mu[k], pencil_residual(a, b, mu[k], &x.column(k).into_owned())))
        .collect();
    let mut spec = Spectrum::from_pairs(pairs, Method::Condensed, nb);
    spec.null_count += n - nb;
    Ok(spec)
}

/// Pencil with a positive semidefinite `A` whose kernel is spanned by the
/// constant vector (pure stiffness, `v₀ ≡ 0`) and a positive definite boundary
/// block of `B`. Solves `S x = σ B_BB x` on the boundary, drops the constant
/// mode `σ = 0` and returns `μ = 1/σ`.
pub fn solve_condensed_mean_zero(a: &CsrMatrix, b: &CsrMatrix) -> Result<Spectrum> {
    let n = check_square(a, b)?;
    let cond = Condensed::new(a, b)?;
    let nb = cond.boundary.len();
    if nb < 2 {
        return Ok(Spectrum::empty(Method::CondensedMeanZero, nb));
    }
    if nb > DENSE_CAP {
        return Err(Error::DimensionCap { dim: nb, cap: DENSE_CAP });
    }
    let s = cond.schur(a);
    let b_bb = b.submatrix(&cond.boundary, &cond.boundary).to_dense();
    let (sigma, x_b) = reduce_dense(&s, b_bb)?;
    let drop = (0..nb)
        .min_by(|&i, &j| sigma[i].abs().total_cmp(&sigma[j].abs()))
        .expect("nonempty");
    let keep: Vec<usize> = (0..nb).filter(|&k| k != drop).collect();
    let x_b = x_b.select_columns(&keep);
    let x = cond.extend(n, &x_b);
    let pairs = keep
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let mu = 1.0 / sigma[k];
            (mu, pencil_residual(a, b, mu, &x.column(c).into_owned()))
        })
        .collect();
    let mut spec = Spectrum::from_pairs(pairs, Method::CondensedMeanZero, nb);
    spec.null_count += n - nb;
    Ok(spec)
}

/// Options for [`solve_iterative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: ITERATIVE_TOL,
            max_iter: 5000,
            seed: 0x5eed,
        }
    }
}

/// The `k` largest-magnitude eigenvalues of each sign by Lanczos iteration on
/// `A⁻¹B`, self-adjoint in the `A` inner product, with full
/// reorthogonalization. The Krylov space lives in the range of `A⁻¹B`, so the
/// iteration terminates after at most `rank B + 1` steps.
pub fn solve_iterative(a: &CsrMatrix, b: &CsrMatrix, k: usize, opts: LanczosOptions) -> Result<Spectrum> {
    let n = check_square(a, b)?;
    let nb = b.nonzero_rows().len();
    if k > nb.max(1) {
        return Err(Error::InvalidParameter(format!(
            "requested {k} eigenvalues but B is supported on {nb} degrees of freedom"
        )));
    }
    if nb == 0 || k == 0 {
        return Ok(Spectrum::empty(Method::Iterative, nb));
    }
    let factor = EnvelopeCholesky::factor(a)?;
    let apply = |v: &DVector<f64>| DVector::from_vec(factor.solve(b.mul_vec(v).as_slice()));
    let a_norm = |v: &DVector<f64>| a.quad_form(v).max(0.0).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let mut q = apply(&r);
    let norm = a_norm(&q);
    if norm == 0.0 {
        return Ok(Spectrum::empty(Method::Iterative, nb));
    }
    q /= norm;

    let cap = opts.max_iter.min(n).min(nb + 1);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    // A times each basis vector, for the reorthogonalization inner products
    let mut a_basis: Vec<DVector<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    let mut last: (usize, f64);
    loop {
        let aq = a.mul_vec(&q);
        let bq = b.mul_vec(&q);
        let mut w = DVector::from_vec(factor.solve(bq.as_slice()));
        let al = q.dot(&bq);
        basis.push(q.clone());
        a_basis.push(aq);
        alpha.push(al);
        scale = scale.max(al.abs());
        // two passes of classical Gram–Schmidt in the A inner product
        for _ in 0..2 {
            for (v, av) in basis.iter().zip(&a_basis) {
                let c = av.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        let bt = a_norm(&w);
        let m = basis.len();
        let exhausted = bt <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if exhausted || m >= cap || m % 10 == 0 {
            let (theta, vecs) = ritz(&alpha, &beta);
            let spec = assemble_ritz(a, b, &basis, &theta, &vecs, k, nb);
            let worst = spec.max_residual();
            last = (m, worst);
            if worst <= opts.tol || exhausted {
                return if worst <= opts.tol {
                    Ok(spec)
                } else {
                    Err(Error::NoConvergence { iterations: m, residual: worst })
                };
            }
            if m >= cap {
                break;
            }
        }
        beta.push(bt);
        q = w / bt;
    }
    Err(Error::NoConvergence {
        iterations: last.0,
        residual: last.1,
    })
}

fn ritz(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let e = SymmetricEigen::new(t);
    (e.eigenvalues, e.eigenvectors)
}

fn assemble_ritz(
    a: &CsrMatrix,
    b: &CsrMatrix,
    basis: &[DVector<f64>],
    theta: &DVector<f64>,
    vecs: &DMatrix<f64>,
    k: usize,
    nb: usize,
) -> Spectrum {
    let scale = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut order: Vec<usize> = (0..theta.len()).filter(|&i| theta[i].abs() > NULL_RATIO * scale).collect();
    order.sort_by(|&i, &j| theta[j].abs().total_cmp(&theta[i].abs()));
    let mut taken = (0usize, 0usize);
    let mut pairs = Vec::new();
    for i in order {
        let slot = if theta[i] > 0.0 { &mut taken.0 } else { &mut taken.1 };
        if *slot >= k {
            continue;
        }
        *slot += 1;
        let mut x = DVector::zeros(a.nrows());
        for (j, v) in basis.iter().enumerate() {
            x.axpy(vecs[(j, i)], v, 1.0);
        }
        pairs.push((theta[i], pencil_residual(a, b, theta[i], &x)));
    }
    Spectrum::from_pairs(pairs, Method::Iterative, nb)
}

/// `n±(λ)`: number of eigenvalues of the given sign with `|μ| ≥ λ`.
pub fn counting(spec: &Spectrum, lam: f64, sign: Sign) -> usize {
    spec.branch(sign).iter().take_while(|mu| mu.abs() >= lam).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Median of `k |μ_k|^d` over the window.
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub k_min: usize,
    pub k_max: usize,
}

/// Default tail window `[5, N / 4]`, with `N` the number of eigenvalues of the
/// branch (all boundary DOFs for a positive weight, about half for a split one).
pub fn default_window(spec: &Spectrum, sign: Sign) -> (usize, usize) {
    (5, spec.branch(sign).len() / 4)
}

/// Estimates `lim λ^d n(λ)` from the products `k |μ_k|^d` over the (1-based,
/// inclusive) window.
pub fn tail_coefficient(spec: &Spectrum, sign: Sign, d: u32, window: Option<(usize, usize)>) -> Result<TailFit> {
    let (k_min, k_max) = window.unwrap_or_else(|| default_window(spec, sign));
    let branch = spec.branch(sign);
    if k_min == 0 || k_min > k_max {
        return Err(Error::TailWindow(format!("empty window [{k_min}, {k_max}]")));
    }
    if k_max > branch.len() {
        return Err(Error::TailWindow(format!(
            "window [{k_min}, {k_max}] exceeds the {} resolved eigenvalues of branch {}",
            branch.len(),
            sign.symbol()
        )));
    }
    tail_of_sequence(&branch[k_min - 1..k_max], k_min, d).map(|(estimate, low, high)| TailFit {
        estimate,
        low,
        high,
        k_min,
        k_max,
    })
}

fn tail_of_sequence(mu: &[f64], k_min: usize, d: u32) -> Result<(f64, f64, f64)> {
    let mut prod: Vec<f64> = mu
        .iter()
        .enumerate()
        .map(|(i, m)| (k_min + i) as f64 * m.abs().powi(d as i32))
        .collect();
    prod.sort_by(f64::total_cmp);
    let n = prod.len();
    let median = if n % 2 == 1 {
        prod[n / 2]
    } else {
        0.5 * (prod[n / 2 - 1] + prod[n / 2])
    };
    Ok((median, prod[0], prod[n - 1]))
}

/// Nonzero eigenvalues of `L⁻¹BL⁻ᵀ` (with `A = LLᵀ`) against those of
/// `Rᵀ A⁻¹ R` (with `B = RRᵀ`), for a positive semidefinite `B`. Returns the
/// largest relative difference.
pub fn cyclic_equivalence_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (direct, _) = reduce_dense(b, a.clone())?;
    let eb = SymmetricEigen::new((b + b.transpose()) * 0.5);
    let bscale = eb.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cols: Vec<usize> = (0..b.nrows()).filter(|&i| eb.eigenvalues[i] > NULL_RATIO * bscale).collect();
    if eb.eigenvalues.iter().any(|&v| v < -1e-12 * bscale) {
        return Err(Error::InvalidParameter("B must be positive semidefinite".into()));
    }
    let mut r = eb.eigenvectors.select_columns(&cols);
    for (c, &i) in cols.iter().enumerate() {
        r.column_mut(c).scale_mut(eb.eigenvalues[i].sqrt());
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Cholesky("A is not positive definite".into()))?;
    let g = r.transpose() * chol.solve(&r);
    let permuted = SymmetricEigen::new((&g + g.transpose()) * 0.5).eigenvalues;
    let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x: Vec<f64> = direct.iter().copied().filter(|v| v.abs() > NULL_RATIO * scale).collect();
    let mut y: Vec<f64> = permuted.iter().copied().filter(|v| v.abs() > NULL_RATIO * scale).collect();
    if x.len() != y.len() {
        return Ok(f64::INFINITY);
    }
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    Ok(x.iter()
        .zip(&y)
        .map(|(p, q)| (p - q).abs() / p.abs())
        .fold(0.0, f64::max))
}

/// Indices `(k, level, relative increase)` where the `k`-th eigenvalue grows
/// by more than `tol` between consecutive refinement levels.
pub fn monotonicity_violations(levels: &[&[f64]], tol: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for l in 1..levels.len() {
        let (prev, cur) = (levels[l - 1], levels[l]);
        for k in 0..prev.len().min(cur.len()) {
            let rel = (cur[k] - prev[k]) / prev[k].abs();
            if rel > tol {
                out.push((k + 1, l, rel));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> CsrMatrix {
        CsrMatrix::from_dense(&DMatrix::from_diagonal(&DVector::from_row_slice(v)))
    }

    #[test]
    fn identity_pencil() {
        let s = solve_dense(&diag(&[1.0, 1.0, 1.0]), &diag(&[3.0, 1.0, 0.0])).unwrap();
        assert_eq!(s.positive.len(), 2);
        assert!((s.positive[0] - 3.0).abs() < 1e-15 && (s.positive[1] - 1.0).abs() < 1e-15);
        assert_eq!(s.null_count, 1);
        assert_eq!(counting(&s, 1.0, Sign::Plus), 2);
        assert_eq!(counting(&s, 3.5, Sign::Plus), 0);
    }

    #[test]
    fn synthetic_tail() {
        let mut s = Spectrum::empty(Method::Dense, 400);
        s.positive = (1..=100).map(|k| 2.0 / k as f64).collect();
        s.positive_residuals = vec![0.0; 100];
        let fit = tail_coefficient(&s, Sign::Plus, 1, None).unwrap();
        assert!((fit.estimate - 2.0).abs() < 1e-14);
        assert!(fit.high - fit.low < 1e-14);
        assert_eq!((fit.k_min, fit.k_max), (5, 25));
        assert!(tail_coefficient(&s, Sign::Plus, 1, Some((5, 101))).is_err());
        assert!(tail_coefficient(&s, Sign::Plus, 1, Some((6, 5))).is_err());
        assert!(tail_coefficient(&s, Sign::Minus, 1, Some((1, 1))).is_err());
    }

    #[test]
    fn empty_boundary_form() {
        let a = diag(&[1.0, 2.0]);
        let b = CsrMatrix::zeros(2, 2);
        let s = solve_iterative(&a, &b, 0, LanczosOptions::default()).unwrap();
        assert!(s.positive.is_empty() && s.negative.is_empty());
        let s = solve_condensed(&a, &b).unwrap();
        assert!(s.positive.is_empty());
    }
}
