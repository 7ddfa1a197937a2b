//! Support reduction for the k-monotone MLE.
//!
//! Each outer iteration
//! 1. polishes the current atoms with a joint Newton step on locations and
//!    weights (a support that already has the right atoms converges
//!    quadratically to the exact optimum),
//! 2. scans the directional derivative `D` for local maxima with `D > 0`,
//! 3. adds the best (at most three) of them and re-solves the weights exactly.
//!
//! It stops when no violation is found and the exact spline certificate
//! passes. All work happens on the sample rescaled to `X_(n) = 1`, so results
//! are scale-equivariant up to rounding.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{self, certify, gradient, gradient_slope_numerator, Certificate, C_TAIL};
use crate::kernel::{check_order, kernel, kernel_with_derivatives, Atom, KMonotoneModel, MixingMeasure, Sample};

/// Violations added per outer iteration.
const MAX_NEW_ATOMS: usize = 3;
/// Weight-solver target for the KKT residual; the configured tolerance is the acceptance bound.
const INNER_TARGET: f64 = 1e-14;
const POLISH_MAX_ITERS: usize = 200;
const POLISH_TARGET: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Termination threshold on `sup_y D(y)`, also used as the certificate tolerance.
    pub tol_gradient: f64,
    /// Atoms lighter than this are pruned.
    pub tol_weight: f64,
    /// Atoms closer than this (relative) are merged.
    pub tol_merge: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub grid_points_per_interval: usize,
    /// Seeds the jitter of the candidate grid.
    pub seed: u64,
    /// Starting atom locations in data units. Default: `2 X_(n)`.
    pub initial_support: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gradient: 1e-8,
            tol_weight: 1e-10,
            tol_merge: 1e-7,
            max_outer_iters: 500,
            max_inner_iters: 10_000,
            grid_points_per_interval: 64,
            seed: 0,
            initial_support: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_gradient", self.tol_gradient),
            ("tol_weight", self.tol_weight),
            ("tol_merge", self.tol_merge),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(invalid("iteration caps must be at least 1"));
        }
        if self.grid_points_per_interval < 2 {
            return Err(invalid("grid_points_per_interval must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub model: KMonotoneModel,
    pub certificate: Certificate,
    pub outer_iterations: usize,
    pub converged: bool,
    pub final_gradient_sup: f64,
    pub log_likelihood: f64,
    /// Log-likelihood after every outer iteration, starting with the initial support.
    pub log_likelihood_trace: Vec<f64>,
}

/// A location where the directional derivative is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub location: f64,
    pub gradient: f64,
}

fn kernel_matrix(support: &[f64], x: &[f64], k: u32) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), support.len(), |i, j| kernel(k, support[j], x[i]))
}

fn objective(kmat: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    (kmat * a)
        .iter()
        .map(|&f| if f > 0.0 { f.ln() } else { f64::NEG_INFINITY })
        .sum()
}

struct WeightSolve {
    weights: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Maximizes `sum_i log (K a)_i` over the simplex by an active-set Newton
/// method; atoms enter through exact line searches along vertex directions.
/// Every accepted step is an ascent step.
fn solve_weights(kmat: &DMatrix<f64>, start: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<WeightSolve> {
    let (n, m) = kmat.shape();
    if (0..n).any(|i| kmat.row(i).iter().all(|&v| v <= 0.0)) {
        return Err(Error::InfeasibleSupport);
    }
    let uniform = DVector::from_element(m, 1.0 / m as f64);
    let mut a = match start {
        Some(s) if s.len() == m && s.iter().all(|&w| w >= 0.0) && s.iter().sum::<f64>() > 0.0 => {
            let v = DVector::from_column_slice(s);
            let v = &v / v.sum();
            if objective(kmat, &v).is_finite() {
                v
            } else {
                (v + &uniform) * 0.5
            }
        }
        _ => uniform,
    };
    let nf = n as f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let f = kmat * &a;
        let inv_f = f.map(|v| 1.0 / v);
        let g = kmat.tr_mul(&inv_f) / nf;
        let free: Vec<usize> = (0..m).filter(|&j| a[j] > 0.0).collect();
        let free_res = free.iter().map(|&j| (g[j] - 1.0).abs()).fold(0.0, f64::max);
        let (enter, off_res) = (0..m)
            .filter(|&j| a[j] <= 0.0)
            .map(|j| (j, g[j] - 1.0))
            .fold((None, 0.0), |best, (j, r)| if r > best.1 { (Some(j), r) } else { best });
        residual = free_res.max(off_res);
        if residual <= INNER_TARGET.max(tol * 1e-4) {
            break;
        }
        let obj = objective(kmat, &a);
        let step = if off_res > free_res || free.len() < 2 {
            match enter {
                Some(j) => vertex_step(kmat, &f, &mut a, j),
                None => false,
            }
        } else {
            newton_weight_step(kmat, &inv_f, &mut a, &free, obj)
        };
        if !step {
            break;
        }
    }
    Ok(WeightSolve {
        weights: a.iter().copied().collect(),
        residual,
        iterations,
    })
}

/// Exact line search along `e_j - a`: the directional derivative at zero is `n (g_j - 1) > 0`.
fn vertex_step(kmat: &DMatrix<f64>, f: &DVector<f64>, a: &mut DVector<f64>, j: usize) -> bool {
    let col = kmat.column(j);
    let slope = |t: f64| -> f64 {
        f.iter()
            .zip(col.iter())
            .map(|(&fi, &ki)| (ki - fi) / ((1.0 - t) * fi + t * ki))
            .sum()
    };
    if !(slope(0.0) > 0.0) {
        return false;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if slope(1.0) >= 0.0 {
        lo = 1.0;
    } else {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if lo <= 0.0 {
        return false;
    }
    *a *= 1.0 - lo;
    a[j] += lo;
    true
}

fn newton_weight_step(
    kmat: &DMatrix<f64>,
    inv_f: &DVector<f64>,
    a: &mut DVector<f64>,
    free: &[usize],
    obj: f64,
) -> bool {
    let (n, r) = (kmat.nrows(), free.len());
    let b = DMatrix::from_fn(n, r, |i, c| kmat[(i, free[c])] * inv_f[i]);
    let grad = b.row_sum().transpose();
    let h = b.tr_mul(&b);
    let Some(d) = constrained_newton(&h, &grad) else {
        return false;
    };
    let alpha_max = (0..r)
        .filter(|&c| d[c] < 0.0)
        .map(|c| a[free[c]] / -d[c])
        .fold(f64::INFINITY, f64::min);
    let mut alpha = alpha_max.min(1.0);
    for _ in 0..60 {
        let mut trial = a.clone();
        for c in 0..r {
            trial[free[c]] = (trial[free[c]] + alpha * d[c]).max(0.0);
        }
        if alpha >= alpha_max {
            // exact boundary hit: drop the blocking atom
            for c in 0..r {
                if d[c] < 0.0 && a[free[c]] / -d[c] <= alpha_max {
                    trial[free[c]] = 0.0;
                }
            }
        }
        let s = trial.sum();
        trial /= s;
        let new = objective(kmat, &trial);
        if new >= obj {
            let moved = (&trial - &*a).amax();
            *a = trial;
            return moved > 0.0;
        }
        alpha *= 0.5;
    }
    false
}

/// Solves `[H 1; 1' 0] [d; mu] = [g; 0]` (the Newton step for maximizing
/// `g'd - d'Hd/2` with `sum d = 0`), adding a small ridge if `H` is singular.
fn constrained_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let r = h.nrows();
    let diag_max = h.diagonal().amax().max(f64::MIN_POSITIVE);
    for ridge in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let mut kkt = DMatrix::zeros(r + 1, r + 1);
        kkt.view_mut((0, 0), (r, r)).copy_from(h);
        for i in 0..r {
            kkt[(i, i)] += ridge * diag_max;
            kkt[(i, r)] = 1.0;
            kkt[(r, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(r + 1);
        rhs.rows_mut(0, r).copy_from(g);
        if let Some(sol) = kkt.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol.rows(0, r).into_owned());
            }
        }
    }
    None
}

/// Optimal weights for a fixed support.
///
/// The support must contain a location beyond `X_(n)`, otherwise every
/// weight vector has zero likelihood.
pub fn inner_weight_solve(support: &[f64], sample: &Sample, k: u32, config: &SolverConfig) -> Result<Vec<f64>> {
    check_order(k)?;
    config.validate()?;
    if support.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if support.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
        return Err(invalid("support locations must be positive"));
    }
    let kmat = kernel_matrix(support, sample.values(), k);
    let ws = solve_weights(&kmat, None, config.tol_weight, config.max_inner_iters)?;
    debug!(
        "weight solve: {} atoms, {} iterations, residual {:.3e}",
        support.len(),
        ws.iterations,
        ws.residual
    );
    Ok(ws.weights)
}

/// Drops atoms lighter than `tol_weight`, merges atoms whose relative distance
/// is below `tol_merge` (summing weights, averaging locations by weight) and
/// renormalizes.
pub fn prune_and_merge(measure: &MixingMeasure, config: &SolverConfig) -> Result<MixingMeasure> {
    let atoms = prune_merge_atoms(measure.atoms().to_vec(), config.tol_weight, config.tol_merge);
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    MixingMeasure::normalized(atoms)
}

fn prune_merge_atoms(mut atoms: Vec<Atom>, tol_weight: f64, tol_merge: f64) -> Vec<Atom> {
    atoms.retain(|a| a.weight >= tol_weight);
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (a.location - last.location).abs() <= tol_merge * a.location.abs().max(last.location.abs()) => {
                let w = last.weight + a.weight;
                last.location = (last.location * last.weight + a.location * a.weight) / w;
                last.weight = w;
            }
            _ => out.push(a),
        }
    }
    let total: f64 = out.iter().map(|a| a.weight).sum();
    for a in &mut out {
        a.weight /= total;
    }
    out
}

/// Local maxima of `D` with `D > tol_gradient`, best first.
///
/// `D'` has the sign of `sum_i v_i (y - X_(i))_+^(k-2) (k X_(i) - y)`. That
/// sign is sampled on a jittered grid over every gap `(X_(i), X_(i+1))` and
/// over the tail window `(X_(n), C_TAIL X_(n)]`; each `+ -> -` change is
/// bisected to full precision. The window doubles while `D` still rises at
/// its right end or the best tail candidate lies in its outer tenth.
pub fn candidate_search(b: &[f64], sample: &Sample, k: u32, config: &SolverConfig) -> Result<Vec<Candidate>> {
    check_order(k)?;
    let v = geometry::support_plane_coefficients(b, k)?;
    if b.len() != sample.len() {
        return Err(invalid("fitted vector and sample differ in length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(search(b, &v, sample.values(), k, config, &mut rng))
}

fn search(b: &[f64], v: &[f64], x: &[f64], k: u32, config: &SolverConfig, rng: &mut ChaCha8Rng) -> Vec<Candidate> {
    let n = x.len();
    let x_max = x[n - 1];
    let g = config.grid_points_per_interval;
    let slope = |y: f64| gradient_slope_numerator(v, x, k, y);
    let mut grid: Vec<f64> = Vec::with_capacity(n * g + g);
    let push_cell = |grid: &mut Vec<f64>, lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
        let width = hi - lo;
        grid.push(lo + width * 1e-9);
        for j in 1..g {
            let jitter: f64 = rng.gen_range(-0.4..0.4);
            grid.push(lo + width * (j as f64 + jitter) / g as f64);
        }
        grid.push(hi);
    };
    for w in x.windows(2) {
        if w[1] > w[0] {
            push_cell(&mut grid, w[0], w[1], rng);
        }
    }
    let mut lo = x_max;
    let mut hi = C_TAIL * x_max;
    let mut found: Vec<Candidate> = Vec::new();
    for _ in 0..64 {
        push_cell(&mut grid, lo, hi, rng);
        found = bracketed_maxima(&grid, &slope, b, x, k, config.tol_gradient);
        let tail_best = found
            .iter()
            .filter(|c| c.location > x_max)
            .max_by(|a, b| a.gradient.total_cmp(&b.gradient));
        let near_edge = tail_best.is_some_and(|c| c.location > lo + 0.9 * (hi - lo));
        if slope(hi) > 0.0 || near_edge {
            lo = hi;
            hi *= 2.0;
            continue;
        }
        break;
    }
    found.sort_by(|a, b| b.gradient.total_cmp(&a.gradient));
    found
}

fn bracketed_maxima(
    grid: &[f64],
    slope: &impl Fn(f64) -> f64,
    b: &[f64],
    x: &[f64],
    k: u32,
    tol: f64,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut prev = (grid[0], slope(grid[0]));
    for &t in &grid[1..] {
        if t <= prev.0 {
            continue;
        }
        let s = slope(t);
        if prev.1 > 0.0 && s <= 0.0 {
            let y = bisect_sign_change(slope, prev.0, t);
            let d = gradient(b, x, k, y);
            if d > tol {
                out.push(Candidate { location: y, gradient: d });
            }
        }
        prev = (t, s);
    }
    out
}

fn bisect_sign_change(slope: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Joint Newton ascent on locations and weights with `sum a = 1`.
///
/// Uses the exact Hessian projected on the constraint, shifted by a
/// Levenberg term when it is not negative definite, and a backtracking line
/// search that only accepts increases of the log-likelihood. Atoms whose
/// weight reaches zero are dropped.
fn polish(atoms: &mut Vec<Atom>, x: &[f64], k: u32, tol_merge: f64) {
    let n = x.len();
    let nf = n as f64;
    for _ in 0..POLISH_MAX_ITERS {
        let m = atoms.len();
        let mut kv = DMatrix::zeros(n, m);
        let mut k1 = DMatrix::zeros(n, m);
        let mut k2 = DMatrix::zeros(n, m);
        for (j, at) in atoms.iter().enumerate() {
            for (i, &xi) in x.iter().enumerate() {
                let (v, d1, d2) = kernel_with_derivatives(k, at.location, xi);
                kv[(i, j)] = v;
                k1[(i, j)] = d1;
                k2[(i, j)] = d2;
            }
        }
        let a = DVector::from_iterator(m, atoms.iter().map(|at| at.weight));
        let f = &kv * &a;
        if f.iter().any(|&v| !(v > 0.0)) {
            return;
        }
        let ll: f64 = f.iter().map(|v| v.ln()).sum();
        let inv_f = f.map(|v| 1.0 / v);
        let ga = kv.tr_mul(&inv_f);
        let gy_raw = k1.tr_mul(&inv_f);
        let gy = DVector::from_fn(m, |j, _| a[j] * gy_raw[j]);
        let residual = (0..m)
            .map(|j| (ga[j] / nf - 1.0).abs().max((gy[j] * atoms[j].location / nf).abs()))
            .fold(0.0, f64::max);
        if residual < POLISH_TARGET {
            return;
        }
        let bk = DMatrix::from_fn(n, m, |i, j| kv[(i, j)] * inv_f[i]);
        let b1 = DMatrix::from_fn(n, m, |i, j| k1[(i, j)] * inv_f[i]);
        let c2 = k2.tr_mul(&inv_f);
        let haa = -bk.tr_mul(&bk);
        let hay_cross = bk.tr_mul(&b1);
        let hyy_cross = b1.tr_mul(&b1);
        let dim = 2 * m;
        let mut h = DMatrix::zeros(dim, dim);
        for j in 0..m {
            for l in 0..m {
                h[(j, l)] = haa[(j, l)];
                let ay = if j == l { gy_raw[j] } else { 0.0 } - a[l] * hay_cross[(j, l)];
                h[(j, m + l)] = ay;
                h[(m + l, j)] = ay;
                let yy = if j == l { a[j] * c2[j] } else { 0.0 } - a[j] * a[l] * hyy_cross[(j, l)];
                h[(m + j, m + l)] = yy;
            }
        }
        let mut grad = DVector::zeros(dim);
        grad.rows_mut(0, m).copy_from(&ga);
        grad.rows_mut(m, m).copy_from(&gy);
        // delta_a = P w_a with P = [I; -1'], so sum delta_a = 0
        let red = dim - 1;
        let z = DMatrix::from_fn(dim, red, |r, c| {
            if r < m - 1 {
                (r == c) as u8 as f64
            } else if r == m - 1 {
                if c < m - 1 {
                    -1.0
                } else {
                    0.0
                }
            } else {
                (c == r - 1) as u8 as f64
            }
        });
        let hr = -(z.transpose() * &h * &z);
        let gr = z.transpose() * &grad;
        let diag_max = hr.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut w = None;
        for tau in [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let shifted = &hr + DMatrix::identity(red, red) * (tau * diag_max);
            if let Some(ch) = shifted.cholesky() {
                w = Some(ch.solve(&gr));
                break;
            }
        }
        let Some(w) = w else {
            return;
        };
        let delta = &z * w;
        let mut alpha: f64 = 1.0;
        let mut blocking = None;
        for j in 0..m {
            let da = delta[j];
            if da < 0.0 && atoms[j].weight / -da < alpha {
                alpha = atoms[j].weight / -da;
                blocking = Some(j);
            }
            let dy = delta[m + j].abs();
            if dy > 0.0 {
                let cap = 0.25 * atoms[j].location / dy;
                if cap < alpha {
                    alpha = cap;
                    blocking = None;
                }
            }
        }
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<Atom> = atoms
                .iter()
                .enumerate()
                .map(|(j, at)| Atom::new(at.location + alpha * delta[m + j], (at.weight + alpha * delta[j]).max(0.0)))
                .collect();
            if let Some(j) = blocking {
                trial[j].weight = 0.0;
            }
            trial.retain(|at| at.weight > 0.0 && at.location > 0.0);
            if trial.is_empty() {
                alpha *= 0.5;
                blocking = None;
                continue;
            }
            let total: f64 = trial.iter().map(|at| at.weight).sum();
            for at in &mut trial {
                at.weight /= total;
            }
            let new_ll = atoms_log_likelihood(&trial, x, k);
            if new_ll >= ll {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
            blocking = None;
        }
        let Some(mut next) = accepted else {
            return;
        };
        next.sort_by(|p, q| p.location.total_cmp(&q.location));
        let step = (0..m).map(|j| (alpha * delta[m + j]).abs()).fold(0.0, f64::max);
        let merged = merge_if_harmless(next, x, k, tol_merge);
        *atoms = merged;
        if step < 1e-15 && atoms.len() == m {
            return;
        }
    }
}

fn merge_if_harmless(atoms: Vec<Atom>, x: &[f64], k: u32, tol_merge: f64) -> Vec<Atom> {
    let merged = prune_merge_atoms(atoms.clone(), 0.0, tol_merge);
    if merged.len() == atoms.len() {
        return atoms;
    }
    let (before, after) = (atoms_log_likelihood(&atoms, x, k), atoms_log_likelihood(&merged, x, k));
    if after >= before - 1e-13 * before.abs().max(1.0) {
        merged
    } else {
        atoms
    }
}

fn atoms_log_likelihood(atoms: &[Atom], x: &[f64], k: u32) -> f64 {
    x.iter()
        .map(|&xi| {
            let f: f64 = atoms.iter().map(|a| a.weight * kernel(k, a.location, xi)).sum();
            if f > 0.0 {
                f.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

fn fitted(atoms: &[Atom], x: &[f64], k: u32) -> Vec<f64> {
    x.iter()
        .map(|&xi| atoms.iter().map(|a| a.weight * kernel(k, a.location, xi)).sum())
        .collect()
}

/// Re-solves the weights on the given locations, warm-started from `start`,
/// and returns the pruned atoms.
fn reweight(locations: &[f64], start: &[f64], x: &[f64], k: u32, config: &SolverConfig) -> Result<Vec<Atom>> {
    let kmat = kernel_matrix(locations, x, k);
    let ws = solve_weights(&kmat, Some(start), config.tol_weight, config.max_inner_iters)?;
    let atoms: Vec<Atom> = locations
        .iter()
        .zip(&ws.weights)
        .map(|(&y, &w)| Atom::new(y, w))
        .collect();
    Ok(prune_merge_atoms(atoms, config.tol_weight, 0.0))
}

struct Normalized {
    atoms: Vec<Atom>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn solve_normalized(x: &[f64], k: u32, init: &[f64], config: &SolverConfig) -> Result<Normalized> {
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample = Sample::with_ties(x.to_vec())?;
    let slack = 1e-9 * n as f64;
    let mut atoms = reweight(init, &vec![1.0; init.len()], x, k, config)?;
    let mut trace = vec![atoms_log_likelihood(&atoms, x, k)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_outer_iters {
        iterations += 1;
        polish(&mut atoms, x, k, config.tol_merge);
        let locations: Vec<f64> = atoms.iter().map(|a| a.location).collect();
        let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        atoms = reweight(&locations, &weights, x, k, config)?;

        let b = fitted(&atoms, x, k);
        let v = geometry::support_plane_coefficients(&b, k)?;
        let mut candidates = search(&b, &v, x, k, config, &mut rng);
        if candidates.is_empty() {
            let model = KMonotoneModel::new(k, MixingMeasure::normalized(atoms.clone())?)?;
            let cert = certify(&model, &sample, config.tol_gradient)?;
            if cert.optimal {
                converged = true;
                trace.push(atoms_log_likelihood(&atoms, x, k));
                break;
            }
            if cert.gradient_sup > 0.0 {
                candidates.push(Candidate {
                    location: cert.gradient_argmax,
                    gradient: cert.gradient_sup,
                });
            }
        }
        let mut locations: Vec<f64> = atoms.iter().map(|a| a.location).collect();
        let mut weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let mut added = 0;
        for c in candidates {
            if added == MAX_NEW_ATOMS {
                break;
            }
            let duplicate = locations
                .iter()
                .any(|&y| (y - c.location).abs() <= config.tol_merge * y.max(c.location));
            if !duplicate {
                locations.push(c.location);
                weights.push(0.0);
                added += 1;
            }
        }
        if added == 0 {
            debug!("no new atoms to add at iteration {iterations}; stopping");
            trace.push(atoms_log_likelihood(&atoms, x, k));
            break;
        }
        atoms = reweight(&locations, &weights, x, k, config)?;
        let ll = atoms_log_likelihood(&atoms, x, k);
        let prev = *trace.last().expect("trace starts nonempty");
        debug_assert!(ll >= prev - slack, "log-likelihood decreased: {prev} -> {ll}");
        debug!(
            "iteration {iterations}: {} atoms, log-likelihood {ll:.15e}",
            atoms.len()
        );
        trace.push(ll);
    }
    Ok(Normalized {
        atoms,
        iterations,
        converged,
        trace,
    })
}

/// Maximum likelihood estimate of a k-monotone density.
///
/// Non-convergence is reported through [`SolveResult::converged`] together
/// with the best iterate and its certificate.
pub fn solve_mle(sample: &Sample, k: u32, config: &SolverConfig) -> Result<SolveResult> {
    check_order(k)?;
    config.validate()?;
    let x_max = sample.max();
    let x: Vec<f64> = sample.values().iter().map(|v| v / x_max).collect();
    let mut init: Vec<f64> = match &config.initial_support {
        Some(s) => {
            if s.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
                return Err(invalid("initial support locations must be positive"));
            }
            s.iter().map(|y| y / x_max).collect()
        }
        None => vec![2.0],
    };
    if !init.iter().any(|&y| y > 1.0) {
        init.push(2.0);
    }
    init.sort_by(f64::total_cmp);
    init.dedup();

    let fit = solve_normalized(&x, k, &init, config)?;
    let atoms: Vec<Atom> = fit
        .atoms
        .iter()
        .map(|a| Atom::new(a.location * x_max, a.weight))
        .collect();
    let model = KMonotoneModel::new(k, MixingMeasure::normalized(atoms)?)?;
    let certificate = certify(&model, sample, config.tol_gradient)?;
    let shift = sample.len() as f64 * x_max.ln();
    let log_likelihood = geometry::log_likelihood(&model, sample);
    Ok(SolveResult {
        converged: fit.converged && certificate.optimal,
        final_gradient_sup: certificate.gradient_sup,
        outer_iterations: fit.iterations,
        log_likelihood,
        log_likelihood_trace: fit.trace.iter().map(|l| l - shift).collect(),
        model,
        certificate,
    })
}

/// Exhaustive search over atom sets on a grid of `grid_resolution` points in
/// `(X_(1), 4 X_(n)]`, with optimal weights for every set. Only for `n <= 3`.
pub fn brute_force_oracle(sample: &Sample, k: u32, grid_resolution: usize) -> Result<SolveResult> {
    check_order(k)?;
    let n = sample.len();
    if n > 3 {
        return Err(Error::TooLarge(n));
    }
    if grid_resolution == 0 {
        return Err(invalid("grid resolution must be positive"));
    }
    let x = sample.values();
    let (lo, hi) = (sample.min(), 4.0 * sample.max());
    let grid: Vec<f64> = (1..=grid_resolution)
        .map(|r| lo + (hi - lo) * r as f64 / grid_resolution as f64)
        .collect();
    let config = SolverConfig::default();
    let mut best: Option<(f64, Vec<Atom>)> = None;
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    enumerate_subsets(grid.len(), n, 0, &mut chosen, &mut |idx: &[usize]| {
        let locations: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        if *locations.last().expect("nonempty subset") <= sample.max() {
            return;
        }
        let kmat = kernel_matrix(&locations, x, k);
        let Ok(ws) = solve_weights(&kmat, None, config.tol_weight, config.max_inner_iters) else {
            return;
        };
        let atoms: Vec<Atom> = locations
            .iter()
            .zip(&ws.weights)
            .map(|(&y, &w)| Atom::new(y, w))
            .collect();
        let ll = atoms_log_likelihood(&atoms, x, k);
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, atoms));
        }
    });
    let (ll, atoms) = best.ok_or(Error::InfeasibleSupport)?;
    let atoms = prune_merge_atoms(atoms, config.tol_weight, 0.0);
    let model = KMonotoneModel::new(k, MixingMeasure::normalized(atoms)?)?;
    let certificate = certify(&model, sample, config.tol_gradient)?;
    Ok(SolveResult {
        converged: certificate.optimal,
        final_gradient_sup: certificate.gradient_sup,
        outer_iterations: 0,
        log_likelihood: geometry::log_likelihood(&model, sample),
        log_likelihood_trace: vec![ll],
        model,
        certificate,
    })
}

fn enumerate_subsets(len: usize, max_size: usize, from: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    for i in from..len {
        chosen.push(i);
        visit(chosen);
        if chosen.len() < max_size {
            enumerate_subsets(len, max_size, i + 1, chosen, visit);
        }
        chosen.pop();
    }
}
