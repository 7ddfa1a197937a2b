use serde::{Deserialize, Serialize};

/// Dense polynomial with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the highest nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Poly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| c * j as f64)
            .collect();
        Poly { coeffs }
    }

    pub fn nth_derivative(&self, order: usize) -> Poly {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scaled(&self, c: f64) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// The polynomial `u -> self(u + h)`.
    pub fn shifted(&self, h: f64) -> Poly {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                c[j] += h * c[j + 1];
            }
        }
        Poly { coeffs: c }
    }

    /// Adds `scale * (offset + sign * u)^power`, expanded binomially.
    pub(crate) fn add_power(&mut self, scale: f64, offset: f64, sign: f64, power: usize) {
        if self.coeffs.len() < power + 1 {
            self.coeffs.resize(power + 1, 0.0);
        }
        let mut binom = 1.0;
        for j in 0..=power {
            if j > 0 {
                binom = binom * (power + 1 - j) as f64 / j as f64;
            }
            let term = binom * offset.powi((power - j) as i32) * sign.powi(j as i32);
            self.coeffs[j] += scale * term;
        }
    }

    /// Upper bound on the modulus of every root (Cauchy).
    pub fn root_bound(&self) -> f64 {
        match self.degree() {
            None | Some(0) => 0.0,
            Some(d) => {
                let lead = self.coeffs[d].abs();
                1.0 + self.coeffs[..d]
                    .iter()
                    .map(|c| c.abs() / lead)
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Real roots in `[lo, hi]` located by sign changes on monotone segments.
    ///
    /// The segments come from the roots of the derivative, found recursively,
    /// so every sign change is bracketed. Roots of even multiplicity show up
    /// only when the polynomial evaluates to exactly zero; callers that need them
    /// inspect the critical points directly.
    pub fn real_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        let Some(deg) = self.degree() else {
            return Vec::new();
        };
        if deg == 0 || !(lo <= hi) {
            return Vec::new();
        }
        if deg == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r >= lo && r <= hi { vec![r] } else { Vec::new() };
        }
        let mut cuts = vec![lo];
        cuts.extend(self.derivative().real_roots(lo, hi));
        cuts.push(hi);
        let mut roots = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 {
                roots.push(a);
            } else if fa.signum() * fb.signum() < 0.0 {
                roots.push(self.bisect(a, b, fa));
            }
        }
        if self.eval(hi) == 0.0 {
            roots.push(hi);
        }
        roots.dedup();
        roots
    }

    /// Critical points (roots of the derivative) in `[lo, hi]`.
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.derivative().real_roots(lo, hi)
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}
