//! Truncated-power determinants and the atom/order-statistic interlacing.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::exact::rational;
use crate::error::{invalid, Result};
use crate::kernel::{check_order, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeterminantSign {
    Negative,
    Zero,
    Positive,
}

/// Exact determinant of `((Y_i - t_j)_+^exponent)` rounded to `f64`, with its exact sign.
///
/// `(x)_+^0` is 1 for `x > 0` and 0 otherwise. The rounded value can underflow
/// to zero for large, badly scaled matrices; the sign is always exact.
pub fn truncated_power_determinant(
    locations: &[f64],
    points: &[f64],
    exponent: u32,
) -> Result<(f64, DeterminantSign)> {
    if locations.len() != points.len() {
        return Err(invalid(format!(
            "{} locations but {} points",
            locations.len(),
            points.len()
        )));
    }
    for (name, v) in [("locations", locations), ("points", points)] {
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("{name} must be finite and strictly increasing")));
        }
    }
    let m = locations.len();
    if m == 0 {
        return Ok((1.0, DeterminantSign::Positive));
    }
    // Every f64 is a dyadic rational: scale by the largest denominator so all
    // differences become integers, then run fraction-free elimination.
    let ys: Vec<BigRational> = locations.iter().map(|&y| rational(y)).collect();
    let ts: Vec<BigRational> = points.iter().map(|&t| rational(t)).collect();
    let denom = ys
        .iter()
        .chain(ts.iter())
        .map(|r| r.denom().clone())
        .max()
        .unwrap_or_else(BigInt::one);
    let to_int = |r: &BigRational| -> BigInt { (r * BigRational::from_integer(denom.clone())).to_integer() };
    let yi: Vec<BigInt> = ys.iter().map(to_int).collect();
    let ti: Vec<BigInt> = ts.iter().map(to_int).collect();
    let mut a: Vec<Vec<BigInt>> = yi
        .iter()
        .map(|y| {
            ti.iter()
                .map(|t| {
                    let d = y - t;
                    if d.is_positive() {
                        Pow::pow(d, exponent)
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    let det = bareiss(&mut a);
    let sign = if det.is_zero() {
        DeterminantSign::Zero
    } else if det.is_positive() {
        DeterminantSign::Positive
    } else {
        DeterminantSign::Negative
    };
    let scale: BigInt = Pow::pow(denom, exponent as usize * m);
    let value = BigRational::new(det, scale).to_f64().unwrap_or(0.0);
    Ok((value, sign))
}

fn bareiss(a: &mut [Vec<BigInt>]) -> BigInt {
    let m = a.len();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..m {
        if a[k][k].is_zero() {
            match (k + 1..m).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    negate = !negate;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..m {
            for j in k + 1..m {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[m - 1][m - 1].clone();
    if negate {
        -det
    } else {
        det
    }
}

/// `det((Y_i - t_j)_+^(k-1))`, the collocation determinant of the kernel.
pub fn tp_determinant(locations: &[f64], points: &[f64], k: u32) -> Result<f64> {
    check_order(k)?;
    Ok(truncated_power_determinant(locations, points, k - 1)?.0)
}

/// Whether `Y_(j-k) < t_j < Y_j` for every `j`, with `Y_l = -inf` for `l < 1`.
pub fn is_interlacing(locations: &[f64], points: &[f64], k: u32) -> bool {
    let k = k as usize;
    locations.len() == points.len()
        && points.iter().enumerate().all(|(j, &t)| {
            let lower = if j >= k { locations[j - k] } else { f64::NEG_INFINITY };
            lower < t && t < locations[j]
        })
}

/// Order-statistic indices `i_1 < ... < i_m` (0-based) with
/// `X_(i_j) < Y_j < X_(i_(j+k))`, treating `X_(i_l)` as `+inf` for `l > m`.
///
/// Each index is the smallest one after the previous index whose value lies in
/// `(Y_(j-k), Y_j)`. Both window ends are nondecreasing in `j`, so the greedy
/// choice fails only when no witness exists.
pub fn interlacing_witness(atom_locations: &[f64], sample: &Sample, k: u32) -> Option<Vec<usize>> {
    let x = sample.values();
    let k = k as usize;
    let mut out = Vec::with_capacity(atom_locations.len());
    let mut next = 0;
    for (j, &y) in atom_locations.iter().enumerate() {
        let lower = if j >= k { atom_locations[j - k] } else { f64::NEG_INFINITY };
        let i = (next..x.len()).find(|&i| x[i] > lower)?;
        if x[i] >= y {
            return None;
        }
        out.push(i);
        next = i + 1;
    }
    Some(out)
}
