//! Fitted vectors, the support plane and the optimality certificate.
//!
//! For a candidate with fitted values `b_i = f(X_(i))` the directional
//! derivative of the mean log-likelihood towards a point mass at `y` is
//!
//! ```text
//! D(y) = (1/n) sum_i K(X_(i) | y) / b_i - 1
//! ```
//!
//! and the candidate is the MLE iff `D <= 0` everywhere. Multiplying by `-y^k`
//! gives the support-plane spline `p(y) = y^k - sum_i v_i (y - X_(i))_+^(k-1)`
//! with `v_i = k / (n b_i)`: nonnegative, with zeros exactly at `0` and at the
//! atoms. The certificate minimizes `p` exactly, piece by piece.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{check_order, kernel, KMonotoneModel, Sample};
use crate::splinezero::{
    interlacing_witness, truncated_power_determinant, DeterminantSign, PiecewisePolynomial, Poly,
};

/// The certificate scans `p` on `(0, C_TAIL * max(Y_m, X_(n))]`.
pub const C_TAIL: f64 = 4.0;

/// Theorem-level conditions on the support of a fitted mixing measure.
///
/// Indices are 0-based positions in the sorted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub support_size: usize,
    pub n: usize,
    /// `m <= n`.
    pub support_size_ok: bool,
    /// `Y_j > X_(j)` for every atom.
    pub location_bounds_ok: bool,
    /// First atom index `j` with `Y_j <= X_(j)` (or `j >= n`).
    pub location_bound_violation: Option<usize>,
    /// `Y_m > X_(n)`.
    pub tail_ok: bool,
    pub max_location: f64,
    pub max_observation: f64,
    /// `i_1 < ... < i_m` with `X_(i_j) < Y_j < X_(i_(j+k))`, if one exists.
    pub interlacing_indices: Option<Vec<usize>>,
    /// `det((Y_j - X_(i_l))_+^(k-1))` on the witness, rounded from the exact value.
    pub determinant_value: Option<f64>,
    /// Exact sign of the determinant is positive.
    pub determinant_ok: bool,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.support_size_ok
            && self.location_bounds_ok
            && self.tail_ok
            && self.interlacing_indices.is_some()
            && self.determinant_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub k: u32,
    pub tol: f64,
    /// `X_(n)^k`; tolerances on `p` are relative to it.
    pub scale: f64,
    /// Fitted density at the order statistics.
    pub b: Vec<f64>,
    /// Support-plane coefficients `k / (n b_i)`.
    pub v: Vec<f64>,
    pub p_min: f64,
    pub p_argmin: f64,
    /// `p(Y_j)` for every atom of the candidate.
    pub atom_p_values: Vec<f64>,
    pub gradient_sup: f64,
    pub gradient_argmax: f64,
    /// Right end of the searched range.
    pub search_upper: f64,
    pub optimal: bool,
    /// `None` when the sample has ties.
    pub report: Option<ConditionReport>,
}

/// `Gamma(y) = (K(X_(i) | y))_i`.
pub fn gamma_curve(sample: &Sample, k: u32, y: f64) -> Result<Vec<f64>> {
    check_order(k)?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(invalid(format!("curve parameter must be positive, got {y}")));
    }
    Ok(sample.values().iter().map(|&x| kernel(k, y, x)).collect())
}

/// `(f(X_(i)))_i`.
pub fn fitted_vector(model: &KMonotoneModel, sample: &Sample) -> Vec<f64> {
    sample.values().iter().map(|&x| model.density(x)).collect()
}

/// `sum_i log f(X_(i))`, or `-inf` when the density vanishes at an observation.
pub fn log_likelihood(model: &KMonotoneModel, sample: &Sample) -> f64 {
    sample
        .values()
        .iter()
        .map(|&x| model.density(x))
        .map(|f| if f > 0.0 { f.ln() } else { f64::NEG_INFINITY })
        .sum()
}

/// `v_i = k / (n b_i)`.
pub fn support_plane_coefficients(b: &[f64], k: u32) -> Result<Vec<f64>> {
    check_positive(b, "fitted vector")?;
    let n = b.len() as f64;
    Ok(b.iter().map(|bi| k as f64 / (n * bi)).collect())
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(invalid(format!("{what}[{i}] = {v} is not positive")));
    }
    Ok(())
}

/// `p(y) = y^k - sum_i v_i (y - X_(i))_+^(k-1)` as a `C^(k-2)` spline with
/// knots `0, X_(1), ..., X_(n)` (tied observations share a knot).
pub fn p_function(v: &[f64], sample: &Sample, k: u32) -> Result<PiecewisePolynomial> {
    check_order(k)?;
    if v.len() != sample.len() {
        return Err(invalid(format!(
            "{} coefficients for {} observations",
            v.len(),
            sample.len()
        )));
    }
    check_positive(v, "support-plane coefficients")?;
    let mut knots: Vec<f64> = Vec::with_capacity(sample.len());
    let mut weights: Vec<f64> = Vec::with_capacity(sample.len());
    for (&x, &vi) in sample.values().iter().zip(v) {
        if knots.last() == Some(&x) {
            *weights.last_mut().expect("nonempty") += vi;
        } else {
            knots.push(x);
            weights.push(vi);
        }
    }
    let k = k as usize;
    let mut breaks = vec![0.0];
    breaks.extend_from_slice(&knots);
    let pieces = breaks
        .iter()
        .map(|&origin| {
            let mut p = Poly::zero();
            p.add_power(1.0, origin, 1.0, k);
            for (&x, &w) in knots.iter().zip(&weights).take_while(|(&x, _)| x <= origin) {
                p.add_power(-w, origin - x, 1.0, k - 1);
            }
            p
        })
        .collect();
    PiecewisePolynomial::new(breaks, pieces, Some(k as i32 - 2))
}

/// `D(y) = (1/n) sum_i K(X_(i) | y) / b_i - 1`.
pub fn directional_derivative(b: &[f64], sample: &Sample, k: u32, y: f64) -> Result<f64> {
    check_order(k)?;
    check_positive(b, "fitted vector")?;
    if b.len() != sample.len() {
        return Err(invalid("fitted vector and sample differ in length"));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(invalid(format!("direction must be positive, got {y}")));
    }
    Ok(gradient(b, sample.values(), k, y))
}

#[inline]
pub(crate) fn gradient(b: &[f64], x: &[f64], k: u32, y: f64) -> f64 {
    let n = x.len() as f64;
    let s: f64 = x
        .iter()
        .zip(b)
        .take_while(|(&xi, _)| xi < y)
        .map(|(&xi, &bi)| kernel(k, y, xi) / bi)
        .sum();
    s / n - 1.0
}

/// `y^(k+1) D'(y) = sum_i v_i (y - X_(i))_+^(k-2) (k X_(i) - y)`; same sign as `D'`.
#[inline]
pub(crate) fn gradient_slope_numerator(v: &[f64], x: &[f64], k: u32, y: f64) -> f64 {
    let kf = k as f64;
    x.iter()
        .zip(v)
        .take_while(|(&xi, _)| xi < y)
        .map(|(&xi, &vi)| vi * (y - xi).powi(k as i32 - 2) * (kf * xi - y))
        .sum()
}

fn condition_report(model: &KMonotoneModel, sample: &Sample) -> ConditionReport {
    let x = sample.values();
    let n = x.len();
    let k = model.k();
    let support: Vec<f64> = model.mixing().support().iter().map(|a| a.location).collect();
    let m = support.len();
    let location_bound_violation = support
        .iter()
        .enumerate()
        .find(|&(j, &y)| j >= n || y <= x[j])
        .map(|(j, _)| j);
    let max_location = support.last().copied().unwrap_or(0.0);
    let interlacing_indices = interlacing_witness(&support, sample, k);
    let determinant = interlacing_indices.as_ref().map(|idx| {
        let t: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        truncated_power_determinant(&support, &t, k - 1).expect("witness points are increasing")
    });
    ConditionReport {
        support_size: m,
        n,
        support_size_ok: m <= n,
        location_bounds_ok: location_bound_violation.is_none(),
        location_bound_violation,
        tail_ok: max_location > sample.max(),
        max_location,
        max_observation: sample.max(),
        interlacing_indices,
        determinant_value: determinant.map(|d| d.0),
        determinant_ok: determinant.is_some_and(|d| d.1 == DeterminantSign::Positive),
    }
}

/// Builds the certificate for `model` on `sample`.
///
/// `p` is minimized exactly on every knot interval of `(0, upper]` with
/// `upper = max(C_TAIL * max(Y_m, X_(n)), k X_(n))`: the minimum of a
/// polynomial piece sits at an endpoint or at a real root of its derivative.
/// `D' < 0` beyond `k X_(n)`, so no violation can hide past `upper`, and the
/// last piece has leading coefficient one so `p -> +inf`.
///
/// The candidate is optimal iff `p_min >= -tol * X_(n)^k` and every atom with
/// positive weight has `p(Y_j) <= tol * X_(n)^k`.
pub fn certify(model: &KMonotoneModel, sample: &Sample, tol: f64) -> Result<Certificate> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let k = model.k();
    let b = fitted_vector(model, sample);
    if let Some(index) = b.iter().position(|&bi| !(bi > 0.0)) {
        return Err(Error::NotCertifiable { index });
    }
    let v = support_plane_coefficients(&b, k)?;
    let p = p_function(&v, sample, k)?;
    let x = sample.values();
    let x_max = sample.max();
    let scale = x_max.powi(k as i32);
    let upper = (C_TAIL * model.mixing().max_location().max(x_max)).max(k as f64 * x_max);

    let mut p_min = 0.0;
    let mut p_argmin = 0.0;
    let mut gradient_sup = -1.0;
    let mut gradient_argmax = x[0];
    for (i, piece) in p.pieces().iter().enumerate() {
        let (a, b_end) = p.piece_interval(i);
        let hi = b_end.min(upper);
        if a >= hi {
            continue;
        }
        let h = hi - a;
        let mut probes = vec![0.0, h];
        probes.extend(piece.critical_points(0.0, h));
        for u in probes {
            let val = piece.eval(u);
            if val < p_min {
                p_min = val;
                p_argmin = a + u;
            }
        }
        if i == 0 {
            // D = -1 left of X_(1)
            continue;
        }
        // critical points of D = -p / y^k are roots of (a+u) p'(u) - k p(u)
        let dp = piece.derivative();
        let mut r = vec![0.0; piece.coeffs().len() + 1];
        for (j, c) in dp.coeffs().iter().enumerate() {
            r[j] += a * c;
            r[j + 1] += c;
        }
        for (j, c) in piece.coeffs().iter().enumerate() {
            r[j] -= k as f64 * c;
        }
        let r = Poly::new(r);
        let mut probes = vec![h];
        probes.extend(r.real_roots(0.0, h));
        for u in probes {
            let y = a + u;
            if y <= 0.0 {
                continue;
            }
            let d = gradient(&b, x, k, y);
            if d > gradient_sup {
                gradient_sup = d;
                gradient_argmax = y;
            }
        }
    }

    let atom_p_values: Vec<f64> = model
        .mixing()
        .atoms()
        .iter()
        .map(|a| p.eval(a.location))
        .collect();
    let atoms_ok = model
        .mixing()
        .atoms()
        .iter()
        .zip(&atom_p_values)
        .filter(|(a, _)| a.weight > 0.0)
        .all(|(_, &pv)| pv <= tol * scale);
    let optimal = p_min >= -tol * scale && atoms_ok;
    let report = (!sample.has_ties()).then(|| condition_report(model, sample));
    Ok(Certificate {
        k,
        tol,
        scale,
        b,
        v,
        p_min,
        p_argmin,
        atom_p_values,
        gradient_sup,
        gradient_argmax,
        search_upper: upper,
        optimal,
        report,
    })
}
