//! Exact real-root isolation for polynomials with rational coefficients.
//!
//! Coefficients are taken exactly from their `f64` values. Multiplicities come
//! from a square-free (Yun) decomposition and distinct roots are isolated with
//! Sturm sequences, so counts never depend on rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QPoly(Vec<BigRational>);

pub(crate) fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

impl QPoly {
    pub fn from_f64(coeffs: &[f64]) -> Self {
        let mut p = QPoly(coeffs.iter().map(|&c| rational(c)).collect());
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lead(&self) -> &BigRational {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> QPoly {
        let mut p = QPoly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| c * BigRational::from_integer(BigInt::from(j)))
                .collect(),
        );
        p.trim();
        p
    }

    fn monic(&self) -> QPoly {
        if self.is_zero() {
            return self.clone();
        }
        let lead = self.lead().clone();
        QPoly(self.0.iter().map(|c| c / &lead).collect())
    }

    fn sub(&self, other: &QPoly) -> QPoly {
        let n = self.0.len().max(other.0.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.0.get(i).cloned().unwrap_or_else(BigRational::zero);
            let b = other.0.get(i).cloned().unwrap_or_else(BigRational::zero);
            out.push(a - b);
        }
        let mut p = QPoly(out);
        p.trim();
        p
    }

    fn div_rem(&self, divisor: &QPoly) -> (QPoly, QPoly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let mut rem = self.0.clone();
        let dd = divisor.degree();
        if self.is_zero() || self.degree() < dd {
            return (QPoly(Vec::new()), self.clone());
        }
        let mut quot = vec![BigRational::zero(); self.degree() - dd + 1];
        let lead = divisor.lead();
        for i in (0..quot.len()).rev() {
            let c = &rem[i + dd] / lead;
            for (j, d) in divisor.0.iter().enumerate() {
                rem[i + j] -= &c * d;
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        let mut q = QPoly(quot);
        let mut r = QPoly(rem);
        q.trim();
        r.trim();
        (q, r)
    }

    fn gcd(&self, other: &QPoly) -> QPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// Yun's square-free decomposition: `self = c * prod f_i^i`.
    pub fn squarefree_factors(&self) -> Vec<(QPoly, u32)> {
        let mut out = Vec::new();
        if self.is_zero() || self.degree() == 0 {
            return out;
        }
        let d = self.derivative();
        let g = self.gcd(&d);
        let mut c = self.div_rem(&g).0;
        let mut w = d.div_rem(&g).0.sub(&c.derivative());
        let mut i = 1;
        while c.degree() > 0 {
            let a = c.gcd(&w);
            c = c.div_rem(&a).0;
            w = w.div_rem(&a).0.sub(&c.derivative());
            if a.degree() > 0 {
                out.push((a, i));
            }
            i += 1;
        }
        out
    }

    fn sturm_sequence(&self) -> Vec<QPoly> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            // -r scaled by a positive factor keeps the sign pattern intact
            let scale = r.lead().abs();
            seq.push(QPoly(r.0.iter().map(|c| -(c / &scale)).collect()));
        }
        seq
    }

    /// Bisects the isolating interval `(a, b]` of a simple root until its ends
    /// round to the same `f64`, or, for roots within `width` of zero, until it
    /// is narrower than `width * 1e-4`.
    fn refine(&self, mut a: BigRational, mut b: BigRational, width: &BigRational) -> f64 {
        let two = BigRational::from_integer(2.into());
        let floor = width / BigRational::from_integer(10_000.into());
        if self.eval(&b).is_zero() {
            return b.to_f64().unwrap_or(f64::NAN);
        }
        let mut sign_a = self.eval(&a).is_positive();
        for _ in 0..2000 {
            let (fa, fb) = (a.to_f64(), b.to_f64());
            let near_zero = a.abs() <= *width && b.abs() <= *width;
            if fa == fb || (near_zero && &b - &a <= floor) {
                break;
            }
            let mid = (&a + &b) / &two;
            let v = self.eval(&mid);
            if v.is_zero() {
                return mid.to_f64().unwrap_or(f64::NAN);
            }
            if v.is_positive() == sign_a {
                a = mid;
                sign_a = v.is_positive();
            } else {
                b = mid;
            }
        }
        ((&a + &b) / &two).to_f64().unwrap_or(f64::NAN)
    }

    /// Distinct real roots in `[lo, hi]` for a square-free polynomial, refined
    /// to `f64` precision (see [`QPoly::refine`]).
    pub fn isolate_roots(&self, lo: &BigRational, hi: &BigRational, width: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.is_zero() || self.degree() == 0 || lo > hi {
            return out;
        }
        let seq = self.sturm_sequence();
        if self.eval(lo).is_zero() {
            out.push(lo.to_f64().unwrap_or(f64::NAN));
        }
        let width = rational(width);
        let mut stack = vec![(lo.clone(), hi.clone())];
        while let Some((a, b)) = stack.pop() {
            // roots in (a, b]
            let count = variations(&seq, &a) - variations(&seq, &b);
            if count == 0 {
                continue;
            }
            if count == 1 {
                out.push(self.refine(a, b, &width));
                continue;
            }
            let mid = (&a + &b) / BigRational::from_integer(2.into());
            stack.push((mid.clone(), b));
            stack.push((a, mid));
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

fn variations(seq: &[QPoly], x: &BigRational) -> i64 {
    let mut count = 0;
    let mut last: Option<bool> = None;
    for p in seq {
        let v = p.eval(x);
        if v.is_zero() {
            continue;
        }
        let pos = v.is_positive();
        if let Some(prev) = last {
            if prev != pos {
                count += 1;
            }
        }
        last = Some(pos);
    }
    count
}

/// Roots of `coeffs` (ascending, exact from floats) in `[lo, hi]` with
/// their multiplicities, refined to `width`.
pub(crate) fn roots_with_multiplicity(coeffs: &[f64], lo: f64, hi: f64, width: f64) -> Vec<(f64, u32)> {
    let p = QPoly::from_f64(coeffs);
    let (lo, hi) = (rational(lo), rational(hi));
    let mut out: Vec<(f64, u32)> = p
        .squarefree_factors()
        .into_iter()
        .flat_map(|(f, m)| {
            f.isolate_roots(&lo, &hi, width)
                .into_iter()
                .map(move |r| (r, m))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Exact order of vanishing of `coeffs` at `x`; `None` for the zero polynomial.
pub(crate) fn vanishing_order(coeffs: &[f64], x: f64) -> Option<u32> {
    let mut p = QPoly::from_f64(coeffs);
    if p.is_zero() {
        return None;
    }
    let x = rational(x);
    let mut order = 0;
    while p.eval(&x).is_zero() {
        order += 1;
        p = p.derivative();
    }
    Some(order)
}

/// Exact sign of `coeffs` at `x`: -1, 0 or 1.
pub(crate) fn sign_at(coeffs: &[f64], x: f64) -> i32 {
    let v = QPoly::from_f64(coeffs).eval(&rational(x));
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

impl One for QPoly {
    fn one() -> Self {
        QPoly(vec![BigRational::one()])
    }
}

impl std::ops::Mul for QPoly {
    type Output = QPoly;
    fn mul(self, rhs: QPoly) -> QPoly {
        if self.is_zero() || rhs.is_zero() {
            return QPoly(Vec::new());
        }
        let mut out = vec![BigRational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPoly(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squarefree_decomposition_of_planted_multiplicities() {
        // (u-1)^3 (u-2)^2 (u+0.5)
        let mut p = QPoly::one();
        for (r, m) in [(1.0, 3), (2.0, 2), (-0.5, 1)] {
            for _ in 0..m {
                p = p * QPoly::from_f64(&[-r, 1.0]);
            }
        }
        let coeffs: Vec<f64> = p.0.iter().map(|c| c.to_f64().unwrap()).collect();
        let roots = roots_with_multiplicity(&coeffs, -2.0, 3.0, 1e-12);
        assert_eq!(roots.len(), 3);
        assert_eq!(roots[0].1, 1);
        assert!((roots[0].0 + 0.5).abs() < 1e-11);
        assert_eq!(roots[1].1, 3);
        assert_eq!(roots[2].1, 2);
    }

    #[test]
    fn endpoint_roots_are_included() {
        let roots = roots_with_multiplicity(&[-2.0, 1.0], 0.0, 2.0, 1e-12);
        assert_eq!(roots, vec![(2.0, 1)]);
        let roots = roots_with_multiplicity(&[0.0, 0.0, 1.0], 0.0, 2.0, 1e-12);
        assert_eq!(roots, vec![(0.0, 2)]);
    }

    #[test]
    fn no_real_roots() {
        assert!(roots_with_multiplicity(&[1.0, 0.0, 1.0], -10.0, 10.0, 1e-12).is_empty());
    }

    #[test]
    fn vanishing_orders() {
        assert_eq!(vanishing_order(&[0.0, 0.0, 0.0, 1.0], 0.0), Some(3));
        assert_eq!(vanishing_order(&[4.0, -4.0, 1.0], 2.0), Some(2));
        assert_eq!(vanishing_order(&[4.0, -4.0, 1.0], 1.0), Some(0));
        assert_eq!(vanishing_order(&[0.0], 1.0), None);
        assert_eq!(sign_at(&[-1.0, 1.0], 0.5), -1);
    }
}
