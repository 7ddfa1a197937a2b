//! The k-monotone kernel `K(x | y) = k (y - x)_+^(k-1) / y^k`, mixtures of it,
//! and exact sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Above this order the kernel is evaluated through `exp(log1p(..))`.
const LOG_FORM_MIN_K: u32 = 31;

/// Tolerance on the total mass accepted by [`MixingMeasure::new`] before renormalizing.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Order statistics `X_(1) < ... < X_(n)` of a positive sample.
///
/// Samples built with [`Sample::with_ties`] may contain repeated values; the fit
/// still works on them but condition checks that need distinct order
/// statistics are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    ties: bool,
}

impl Sample {
    /// Sorts and validates `values`. Nonpositive, non-finite and tied values are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let values = sorted_positive(values)?;
        if let Some(i) = values.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Ties {
                first: i,
                second: i + 1,
                value: values[i],
            });
        }
        Ok(Self {
            values,
            ties: false,
        })
    }

    /// Like [`Sample::new`] but accepts repeated values.
    pub fn with_ties(values: Vec<f64>) -> Result<Self> {
        let values = sorted_positive(values)?;
        let ties = values.windows(2).any(|w| w[0] == w[1]);
        Ok(Self { values, ties })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a sample holds at least one value.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn has_ties(&self) -> bool {
        self.ties
    }

    /// The sample `c * X`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("scale factor must be positive, got {c}")));
        }
        let values: Vec<f64> = self.values.iter().map(|x| x * c).collect();
        if self.ties {
            Self::with_ties(values)
        } else {
            Self::new(values)
        }
    }
}

fn sorted_positive(mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(invalid("sample is empty"));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(invalid(format!(
            "observation {i} is {v}; observations must be finite and positive"
        )));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Self { location, weight }
    }
}

/// A discrete probability measure on `(0, inf)` with strictly increasing locations.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMeasure {
    atoms: Vec<Atom>,
}

impl MixingMeasure {
    /// Sorts the atoms by location and renormalizes the weights.
    ///
    /// The weights must already sum to one within [`WEIGHT_SUM_TOL`].
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let total = validate_atoms(&atoms)?;
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Self::normalized(atoms)
    }

    /// Sorts the atoms and rescales any positive total mass to one.
    pub fn normalized(mut atoms: Vec<Atom>) -> Result<Self> {
        let total = validate_atoms(&atoms)?;
        if total <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        if let Some(w) = atoms.windows(2).find(|w| w[0].location == w[1].location) {
            return Err(invalid(format!(
                "duplicate atom location {}",
                w[0].location
            )));
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(location: f64) -> Result<Self> {
        Self::new(vec![Atom::new(location, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_location(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.location)
    }

    /// Atoms with strictly positive weight.
    pub fn support(&self) -> Vec<Atom> {
        self.atoms.iter().copied().filter(|a| a.weight > 0.0).collect()
    }
}

fn validate_atoms(atoms: &[Atom]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut total = 0.0;
    for a in atoms {
        if !(a.location.is_finite() && a.location > 0.0) {
            return Err(invalid(format!(
                "atom location must be finite and positive, got {}",
                a.location
            )));
        }
        if !(a.weight.is_finite() && a.weight >= 0.0) {
            return Err(invalid(format!(
                "atom weight must be finite and nonnegative, got {}",
                a.weight
            )));
        }
        total += a.weight;
    }
    Ok(total)
}

/// A k-monotone density given by its order `k >= 2` and mixing measure.
#[derive(Debug, Clone, PartialEq)]
pub struct KMonotoneModel {
    k: u32,
    mixing: MixingMeasure,
}

impl KMonotoneModel {
    pub fn new(k: u32, mixing: MixingMeasure) -> Result<Self> {
        check_order(k)?;
        Ok(Self { k, mixing })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mixing(&self) -> &MixingMeasure {
        &self.mixing
    }

    /// Mixture density; zero for `x < 0` and for `x` at or beyond the largest atom.
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.mixing
            .atoms
            .iter()
            .map(|a| a.weight * kernel(self.k, a.location, x))
            .sum()
    }

    /// Closed-form CDF: each kernel integrates to `1 - (1 - min(x, y)/y)^k`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = self.k as i32;
        let total: f64 = self
            .mixing
            .atoms
            .iter()
            .map(|a| {
                if x >= a.location {
                    a.weight
                } else {
                    a.weight * (1.0 - ((a.location - x) / a.location).powi(k))
                }
            })
            .sum();
        total.clamp(0.0, 1.0)
    }

    /// Draws `n` sorted observations.
    ///
    /// Each draw picks an atom `y` by weight and returns `y (1 - U^(1/k))` for
    /// uniform `U`. Draws that collide with another draw are redrawn.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = WeightedIndex::new(self.mixing.weights())
            .map_err(|e| invalid(format!("mixing weights: {e}")))?;
        let inv_k = 1.0 / self.k as f64;
        let locations = self.mixing.locations();
        let draw = |rng: &mut ChaCha8Rng| loop {
            let y = locations[index.sample(rng)];
            let u: f64 = rng.gen();
            let x = y * (1.0 - u.powf(inv_k));
            if x > 0.0 {
                return x;
            }
        };
        let mut values: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        loop {
            values.sort_by(f64::total_cmp);
            let dup: Vec<usize> = (1..n).filter(|&i| values[i] == values[i - 1]).collect();
            if dup.is_empty() {
                break;
            }
            for i in dup {
                values[i] = draw(&mut rng);
            }
        }
        Sample::new(values)
    }
}

pub(crate) fn check_order(k: u32) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("order k must be at least 2, got {k}")));
    }
    Ok(())
}

/// `K(x | y)`. Returns an error for `y <= 0`, `x < 0` or `k < 2`.
pub fn kernel_eval(k: u32, y: f64, x: f64) -> Result<f64> {
    check_order(k)?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(invalid(format!("kernel location must be positive, got {y}")));
    }
    if !(x >= 0.0) {
        return Err(invalid(format!("kernel argument must be nonnegative, got {x}")));
    }
    Ok(kernel(k, y, x))
}

/// Unchecked kernel for `y > 0`. Exactly zero for `x >= y`.
#[inline]
pub(crate) fn kernel(k: u32, y: f64, x: f64) -> f64 {
    if x >= y {
        return 0.0;
    }
    let kf = k as f64;
    if k >= LOG_FORM_MIN_K {
        (kf / y) * ((kf - 1.0) * (-x / y).ln_1p()).exp()
    } else {
        // (y - x)/y stays in (0, 1], so y^k never has to be formed.
        kf * ((y - x) / y).powi(k as i32 - 1) / y
    }
}

/// `K(x|y)` with its first and second derivatives in `y`, for `y > x >= 0`.
pub(crate) fn kernel_with_derivatives(k: u32, y: f64, x: f64) -> (f64, f64, f64) {
    if x >= y {
        return (0.0, 0.0, 0.0);
    }
    let kf = k as f64;
    let w = y - x;
    let r = w / y;
    let ki = k as i32;
    // K = k w^(k-1) / y^k, K' = k w^(k-2) (k x - y) / y^(k+1)
    let value = kf * r.powi(ki - 1) / y;
    let base = kf * r.powi(ki - 2) / (y * y * y);
    let first = base * (kf * x - y);
    let mut second = base * (-1.0 - (kf + 1.0) * (kf * x - y) / y);
    if k >= 3 {
        second += kf * (kf - 2.0) * r.powi(ki - 3) * (kf * x - y) / (y * y * y * y);
    }
    (value, first, second)
}

pub fn density_eval(model: &KMonotoneModel, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid(format!("density argument must be nonnegative, got {x}")));
    }
    Ok(model.density(x))
}

pub fn density_cdf(model: &KMonotoneModel, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid(format!("cdf argument must be nonnegative, got {x}")));
    }
    Ok(model.cdf(x))
}

pub fn sample_from(model: &KMonotoneModel, n: usize, seed: u64) -> Result<Sample> {
    model.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: u32, atoms: &[(f64, f64)]) -> KMonotoneModel {
        let atoms = atoms.iter().map(|&(y, w)| Atom::new(y, w)).collect();
        KMonotoneModel::new(k, MixingMeasure::new(atoms).unwrap()).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(2, 1.0, 0.0).unwrap(), 2.0);
        assert_eq!(kernel_eval(3, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(kernel_eval(2, 2.0, 1.0).unwrap(), 0.5);
        assert_eq!(kernel_eval(4, 1.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn kernel_rejects_bad_arguments() {
        assert!(kernel_eval(1, 1.0, 0.5).is_err());
        assert!(kernel_eval(2, 0.0, 0.5).is_err());
        assert!(kernel_eval(2, -1.0, 0.5).is_err());
        assert!(kernel_eval(2, 1.0, -0.5).is_err());
    }

    #[test]
    fn kernel_large_order_and_scale() {
        // k(y-x)^(k-1)/y^k with y^k far beyond f64 range
        let (k, y, x) = (60u32, 1e10, 2e9);
        let expected = 60.0 / 1e10 * 0.8f64.powi(59);
        let got = kernel_eval(k, y, x).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
        assert!(kernel_eval(200, 1e-200, 0.0).unwrap().is_finite());
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        for k in 2..7u32 {
            for &(y, x) in &[(2.0, 1.0), (3.5, 0.2), (1.2, 1.1)] {
                let (v, d1, d2) = kernel_with_derivatives(k, y, x);
                assert!((v - kernel(k, y, x)).abs() < 1e-15);
                let h = 1e-5;
                let fd1 = (kernel(k, y + h, x) - kernel(k, y - h, x)) / (2.0 * h);
                let fd2 = (kernel(k, y + h, x) - 2.0 * v + kernel(k, y - h, x)) / (h * h);
                assert!((d1 - fd1).abs() < 1e-7 * (1.0 + d1.abs()), "k={k} d1 {d1} {fd1}");
                assert!((d2 - fd2).abs() < 1e-4 * (1.0 + d2.abs()), "k={k} d2 {d2} {fd2}");
            }
        }
    }

    #[test]
    fn density_examples() {
        assert_eq!(model(2, &[(2.0, 1.0)]).density(1.0), 0.5);
        let m = model(3, &[(1.0, 0.5), (2.0, 0.5)]);
        assert!((m.density(0.0) - 2.25).abs() < 1e-15);
        assert_eq!(m.density(2.0), 0.0);
        assert!(density_eval(&m, -1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let m = model(2, &[(1.0, 1.0)]);
        assert_eq!(m.cdf(1.0), 1.0);
        assert_eq!(m.cdf(0.5), 0.75);
        assert_eq!(m.cdf(0.0), 0.0);
        assert_eq!(m.cdf(7.0), 1.0);
    }

    #[test]
    fn cdf_matches_quadrature_of_density() {
        let m = model(4, &[(0.7, 0.2), (1.5, 0.5), (3.0, 0.3)]);
        for &x in &[0.3, 0.7, 1.0, 2.2, 3.0, 5.0] {
            // composite Simpson, splitting at the atoms where the density has kinks
            let mut cuts = vec![0.0];
            cuts.extend(m.mixing().locations().into_iter().filter(|&y| y < x));
            cuts.push(x);
            let mut integral = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let steps = 2000;
                let h = (b - a) / steps as f64;
                let mut s = m.density(a) + m.density(b);
                for i in 1..steps {
                    let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += c * m.density(a + i as f64 * h);
                }
                integral += s * h / 3.0;
            }
            assert!((integral - m.cdf(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn density_is_nonincreasing() {
        let m = model(3, &[(0.5, 0.3), (1.0, 0.3), (4.0, 0.4)]);
        let mut prev = f64::INFINITY;
        for i in 0..=500 {
            let f = m.density(i as f64 * 0.01);
            assert!(f <= prev + 1e-15);
            prev = f;
        }
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let m = model(2, &[(1.0, 0.5), (3.0, 0.5)]);
        let a = m.sample(5, 7).unwrap();
        let b = m.sample(5, 7).unwrap();
        assert_eq!(a, b);
        let big = m.sample(10_000, 11).unwrap();
        assert!(big.max() < 3.0);
        assert!(big.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1.0, -2.0]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(matches!(
            Sample::new(vec![2.0, 1.0, 2.0]),
            Err(Error::Ties { value, .. }) if value == 2.0
        ));
        let s = Sample::with_ties(vec![2.0, 1.0, 2.0]).unwrap();
        assert!(s.has_ties());
        assert_eq!(s.values(), &[1.0, 2.0, 2.0]);
    }

    #[test]
    fn measure_validation() {
        assert!(MixingMeasure::new(vec![Atom::new(1.0, 0.9)]).is_err());
        assert!(MixingMeasure::new(vec![Atom::new(-1.0, 1.0)]).is_err());
        assert!(MixingMeasure::new(vec![Atom::new(1.0, 0.5), Atom::new(1.0, 0.5)]).is_err());
        let m = MixingMeasure::new(vec![Atom::new(3.0, 0.25), Atom::new(1.0, 0.75)]).unwrap();
        assert_eq!(m.locations(), vec![1.0, 3.0]);
        assert!(KMonotoneModel::new(1, m).is_err());
    }
}
