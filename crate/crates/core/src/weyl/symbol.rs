//! Symbol integral `s(ξ′) = (1/2π) ∫ℝ [ξᵀaξ]⁻¹ dξ_{d+1}` along `ξ = ξ′ + t n`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const ABS_TOL: f64 = 1e-10;
const REL_TOL: f64 = 1e-13;
const MAX_INTERVALS: usize = 2000;

/// Computes `s` by adaptive Gauss–Kronrod (7/15) quadrature after the
/// substitution `t = tan θ`, which maps the line onto `(−π/2, π/2)` with a
/// smooth bounded integrand. For `a = I`, `s·|ξ′| = 1/2`.
pub fn symbol_oracle(a: &DMatrix<f64>, n: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
    // β validates the inputs (unit normal, tangent covector)
    super::beta(a, n, xi)?;
    let an = a * n;
    let (p, q, r) = (n.dot(&an), xi.dot(&an), xi.dot(&(a * xi)));
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        1.0 / (p * s * s + 2.0 * q * s * c + r * c * c)
    };
    Ok(adaptive_gk15(&f, -FRAC_PI_2, FRAC_PI_2)? / (2.0 * PI))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let mut intervals = vec![(a, b, gk15(f, a, b))];
    loop {
        let total: f64 = intervals.iter().map(|i| i.2 .0).sum();
        let err: f64 = intervals.iter().map(|i| i.2 .1).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if err <= ABS_TOL.min(REL_TOL * total.abs()).max(1e-15 * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = (0..intervals.len())
            .max_by(|&i, &j| intervals[i].2 .1.total_cmp(&intervals[j].2 .1))
            .expect("nonempty");
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(f, lo, mid)));
        intervals.push((mid, hi, gk15(f, mid, hi)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_polynomial() {
        let v = adaptive_gk15(&|x| x.powi(6), -1.0, 1.0).unwrap();
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn identity_symbol() {
        let a = DMatrix::identity(2, 2);
        let n = DVector::from_vec(vec![0.0, 1.0]);
        let s = symbol_oracle(&a, &n, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }
}
