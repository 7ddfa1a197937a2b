#![allow(dead_code)]

use kmono::splinezero::differentiate;
use kmono::{Atom, KMonotoneModel, MixingMeasure, PiecewisePolynomial, Poly, Sample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random spline with integer knots and dyadic coefficients, so every
/// coefficient (including those of shifted pieces) is exact in `f64`.
///
/// The first piece is a product of planted factors `(u - r)^m` with dyadic
/// roots; each later piece adds `c u^d` with `d > smoothness`, which keeps the
/// global smoothness class. Returns the spline and a differentiation order
/// in `0..=smoothness + 1`.
pub fn random_spline(rng: &mut ChaCha8Rng) -> (PiecewisePolynomial, u32) {
    loop {
        let smoothness: i32 = rng.gen_range(-1..=5);
        let order = rng.gen_range(0..=(smoothness + 1)) as u32;
        let degree = rng.gen_range((order as usize).max(1)..=6);
        let pieces_count = rng.gen_range(1..=4);
        let mut knots = vec![0.0];
        for _ in 1..pieces_count {
            let last = *knots.last().unwrap();
            knots.push(last + rng.gen_range(1..=3) as f64);
        }
        let mut first = vec![rng.gen_range(1..=3) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }];
        let mut planted = 0;
        while planted < degree {
            let root = rng.gen_range(-2..=4 * pieces_count as i32 * 2) as f64 / 4.0;
            let mult = rng.gen_range(1..=(degree - planted).min(3));
            for _ in 0..mult {
                first = mul_linear(&first, root);
            }
            planted += mult;
        }
        let mut pieces = vec![Poly::new(first)];
        for i in 1..pieces_count {
            let h = knots[i] - knots[i - 1];
            let mut local = pieces[i - 1].shifted(h).coeffs().to_vec();
            let d = rng.gen_range((smoothness + 1) as usize..=6);
            if local.len() <= d {
                local.resize(d + 1, 0.0);
            }
            let c = rng.gen_range(1..=4) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 } / 2.0;
            local[d] += c;
            pieces.push(Poly::new(local));
        }
        let Ok(f) = PiecewisePolynomial::new(knots, pieces, Some(smoothness)) else {
            continue;
        };
        let valid = differentiate(&f, order).is_ok_and(|g| g.pieces().iter().all(|p| !p.is_zero()))
            && f.pieces().iter().all(|p| !p.is_zero());
        if valid {
            return (f, order);
        }
    }
}

fn mul_linear(p: &[f64], root: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i + 1] += c;
        out[i] -= root * c;
    }
    out
}

/// The interval on which random splines are checked.
pub fn spline_window(f: &PiecewisePolynomial) -> (f64, f64) {
    let knots = f.knots();
    (knots[0], knots[knots.len() - 1] + 2.0)
}

pub fn random_model(rng: &mut ChaCha8Rng, k: u32) -> KMonotoneModel {
    let m = rng.gen_range(1..=4);
    let mut atoms: Vec<Atom> = Vec::with_capacity(m);
    while atoms.len() < m {
        let y: f64 = rng.gen_range(0.5..5.0);
        if atoms.iter().all(|a| (a.location - y).abs() > 1e-3) {
            atoms.push(Atom::new(y, rng.gen_range(0.1..1.0)));
        }
    }
    KMonotoneModel::new(k, MixingMeasure::normalized(atoms).unwrap()).unwrap()
}

pub fn random_sample(rng: &mut ChaCha8Rng, k: u32, n: usize) -> Sample {
    let model = random_model(rng, k);
    model.sample(n, rng.gen()).unwrap()
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `sorted` and `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
