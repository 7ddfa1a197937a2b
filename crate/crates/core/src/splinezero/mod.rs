//! Piecewise polynomials and zero counting with multiplicities.
//!
//! A [`PiecewisePolynomial`] stores one polynomial per knot interval in the
//! local variable `u = y - knot`, which keeps the coefficients well scaled.
//! The last piece extends to `+inf`.
//!
//! Zero multiplicities follow the convention for `C^s` functions: the order of
//! vanishing is capped at `s + 1`. The uncapped local order is reported next
//! to it. Functions that are only piecewise continuous (`s = -1`, e.g. the
//! derivative of a `C^0` spline) also count sign changes across a knot as a
//! zero of multiplicity one, which is what keeps Rolle's bound valid for them.

mod exact;
mod poly;
mod total_positivity;

pub use poly::Poly;
pub use total_positivity::{
    interlacing_witness, is_interlacing, tp_determinant, truncated_power_determinant,
    DeterminantSign,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{check_order, KMonotoneModel};

/// Relative distance below which a root is attributed to a nearby knot.
pub const KNOT_SNAP: f64 = 1e-9;

/// Relative width to which isolated roots are refined.
const ROOT_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    knots: Vec<f64>,
    pieces: Vec<Poly>,
    /// `Some(s)`: globally `C^s` (`-1` for piecewise continuous). `None`: `C^inf`.
    smoothness: Option<i32>,
}

impl PiecewisePolynomial {
    /// Piece `i` lives on `[knots[i], knots[i+1]]` in the local variable
    /// `u = y - knots[i]`; the last piece is unbounded on the right.
    pub fn new(knots: Vec<f64>, pieces: Vec<Poly>, smoothness: Option<i32>) -> Result<Self> {
        if knots.is_empty() || knots.len() != pieces.len() {
            return Err(invalid(format!(
                "{} knots but {} pieces",
                knots.len(),
                pieces.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("knots must be finite and strictly increasing"));
        }
        if smoothness.is_some_and(|s| s < -1) {
            return Err(invalid("smoothness must be at least -1"));
        }
        Ok(Self {
            knots,
            pieces,
            smoothness,
        })
    }

    /// A single polynomial on `[origin, inf)`, in the variable `u = y - origin`.
    pub fn single(origin: f64, poly: Poly) -> Self {
        Self {
            knots: vec![origin],
            pieces: vec![poly],
            smoothness: None,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn smoothness(&self) -> Option<i32> {
        self.smoothness
    }

    pub fn domain_start(&self) -> f64 {
        self.knots[0]
    }

    /// `[knots[i], knots[i+1]]`, with `+inf` as the right end of the last piece.
    pub fn piece_interval(&self, i: usize) -> (f64, f64) {
        let hi = self.knots.get(i + 1).copied().unwrap_or(f64::INFINITY);
        (self.knots[i], hi)
    }

    /// Index of the piece used to evaluate at `y` (right-continuous at knots).
    pub fn piece_index(&self, y: f64) -> usize {
        self.knots.partition_point(|&t| t <= y).saturating_sub(1)
    }

    /// Value at `y`. Points left of the domain extrapolate the first piece.
    pub fn eval(&self, y: f64) -> f64 {
        let i = self.piece_index(y);
        self.pieces[i].eval(y - self.knots[i])
    }

    /// Largest relative mismatch of values and derivatives up to the smoothness
    /// order across interior knots. Zero for `C^inf` single pieces.
    pub fn continuity_defect(&self) -> f64 {
        let s = match self.smoothness {
            Some(s) if s >= 0 => s as usize,
            Some(_) => return 0.0,
            None => self.pieces.iter().filter_map(Poly::degree).max().unwrap_or(0),
        };
        let mut worst: f64 = 0.0;
        for i in 1..self.knots.len() {
            let h = self.knots[i] - self.knots[i - 1];
            for d in 0..=s {
                let left = self.pieces[i - 1].nth_derivative(d).eval(h);
                let right = self.pieces[i].nth_derivative(d).eval(0.0);
                let scale = left.abs().max(right.abs()).max(1.0);
                worst = worst.max((left - right).abs() / scale);
            }
        }
        worst
    }
}

/// `f^(order)`. Requires `order <= s + 1`; the result is `C^(s - order)`.
pub fn differentiate(f: &PiecewisePolynomial, order: u32) -> Result<PiecewisePolynomial> {
    let smoothness = match f.smoothness {
        None => None,
        Some(s) => {
            if order as i64 > s as i64 + 1 {
                return Err(invalid(format!(
                    "cannot differentiate a C^{s} spline {order} times"
                )));
            }
            Some(s - order as i32)
        }
    };
    Ok(PiecewisePolynomial {
        knots: f.knots.clone(),
        pieces: f
            .pieces
            .iter()
            .map(|p| p.nth_derivative(order as usize))
            .collect(),
        smoothness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub location: f64,
    /// Multiplicity capped by the smoothness class.
    pub multiplicity: u32,
    /// Order of vanishing of the local polynomial (smallest one-sided order at a knot).
    pub local_multiplicity: u32,
    pub at_knot: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroCount {
    pub zeros: Vec<Zero>,
    /// Sum of capped multiplicities.
    pub total: u32,
    /// Sum of local multiplicities.
    pub total_local: u32,
}

impl ZeroCount {
    fn push(&mut self, z: Zero) {
        self.total += z.multiplicity;
        self.total_local += z.local_multiplicity;
        self.zeros.push(z);
    }
}

fn multiplicity_cap(smoothness: Option<i32>) -> u32 {
    match smoothness {
        None => u32::MAX,
        Some(s) => (s + 1).max(1) as u32,
    }
}

/// Zeros of `f` on the closed interval `[lo, hi]`, counted with multiplicity.
///
/// Piece interiors use the exact order of vanishing of the local polynomial.
/// Roots within [`KNOT_SNAP`] (relative) of a knot are attributed to the knot,
/// whose local order is the smaller of the two one-sided orders. A piece that
/// vanishes identically on a subinterval of positive length is an error.
pub fn count_zeros(f: &PiecewisePolynomial, lo: f64, hi: f64) -> Result<ZeroCount> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(invalid(format!("invalid interval [{lo}, {hi}]")));
    }
    let scale = f
        .knots
        .iter()
        .chain([lo, hi].iter())
        .fold(0.0f64, |m, t| m.max(t.abs()))
        .max(hi - lo);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let snap = KNOT_SNAP * scale;
    if lo < f.domain_start() - snap {
        return Err(invalid(format!(
            "interval starts at {lo}, before the domain start {}",
            f.domain_start()
        )));
    }
    let cap = multiplicity_cap(f.smoothness);
    let mut out = ZeroCount::default();
    let mut events: Vec<Zero> = Vec::new();

    for (i, piece) in f.pieces.iter().enumerate() {
        let (a, b) = f.piece_interval(i);
        let (ov_lo, ov_hi) = (a.max(lo), b.min(hi));
        if ov_lo > ov_hi {
            continue;
        }
        if piece.is_zero() {
            if ov_hi > ov_lo {
                return Err(Error::InfiniteZeros { lo: ov_lo, hi: ov_hi });
            }
            continue;
        }
        // roots strictly inside the piece, away from both knots
        let search_lo = (ov_lo - a - snap).max(-snap);
        let search_hi = if b.is_finite() {
            (ov_hi - a + snap).min(b - a + snap)
        } else {
            ov_hi - a + snap
        };
        for (u, m) in exact::roots_with_multiplicity(piece.coeffs(), search_lo, search_hi, ROOT_WIDTH * scale) {
            let y = a + u;
            let near_left = (y - a).abs() <= snap;
            let near_right = b.is_finite() && (y - b).abs() <= snap;
            if near_left || near_right {
                continue;
            }
            if y < lo - snap || y > hi + snap {
                continue;
            }
            events.push(Zero {
                location: y,
                multiplicity: m.min(cap),
                local_multiplicity: m,
                at_knot: false,
            });
        }
    }

    for (j, &t) in f.knots.iter().enumerate() {
        if t < lo - snap || t > hi + snap {
            continue;
        }
        let right = knot_side_order(&f.pieces[j], 0.0, snap, scale);
        let left = if j > 0 {
            let (a, _) = f.piece_interval(j - 1);
            knot_side_order(&f.pieces[j - 1], t - a, snap, scale)
        } else {
            None
        };
        let orders: Vec<u32> = [left, right].into_iter().flatten().filter(|&o| o > 0).collect();
        let local = if !orders.is_empty() {
            let present = [left, right].into_iter().flatten().count();
            if orders.len() == present {
                orders.iter().copied().min()
            } else if f.smoothness.is_some_and(|s| s < 0) {
                // one-sided zero of a discontinuous function
                Some(1)
            } else {
                // continuous function: the other side missed the root by rounding
                orders.iter().copied().max()
            }
        } else if f.smoothness.is_some_and(|s| s < 0) && j > 0 {
            let (a, _) = f.piece_interval(j - 1);
            let l = exact::sign_at(f.pieces[j - 1].coeffs(), t - a);
            let r = exact::sign_at(f.pieces[j].coeffs(), 0.0);
            (l * r < 0).then_some(1)
        } else {
            None
        };
        if let Some(local) = local {
            events.push(Zero {
                location: t,
                multiplicity: local.min(cap),
                local_multiplicity: local,
                at_knot: true,
            });
        }
    }

    events.sort_by(|a, b| a.location.total_cmp(&b.location));
    for z in events {
        out.push(z);
    }
    Ok(out)
}

/// Total multiplicity of the roots of one piece clustered within `snap` of the
/// local point `u`. `None` when the piece is identically zero.
fn knot_side_order(piece: &Poly, u: f64, snap: f64, scale: f64) -> Option<u32> {
    if piece.is_zero() {
        return None;
    }
    if let Some(order) = exact::vanishing_order(piece.coeffs(), u) {
        if order > 0 {
            return Some(order);
        }
    }
    let roots = exact::roots_with_multiplicity(piece.coeffs(), u - snap, u + snap, ROOT_WIDTH * scale);
    Some(roots.iter().map(|r| r.1).sum())
}

/// Result of checking `N(f^(d), A) >= N(f, A) - d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolleCheck {
    pub holds: bool,
    pub zeros_of_function: u32,
    pub zeros_of_derivative: u32,
    pub order: u32,
}

pub fn rolle_bound_check(f: &PiecewisePolynomial, lo: f64, hi: f64, order: u32) -> Result<RolleCheck> {
    let derivative = differentiate(f, order)?;
    let n_f = count_zeros(f, lo, hi)?.total;
    let n_d = count_zeros(&derivative, lo, hi)?.total;
    Ok(RolleCheck {
        holds: n_d as i64 >= n_f as i64 - order as i64,
        zeros_of_function: n_f,
        zeros_of_derivative: n_d,
        order,
    })
}

/// `q(x) = f1(x) - f2(x)` as an exact `C^(k-2)` spline with knots at `0` and at
/// the union of both atom sets. The piece right of the last atom is zero.
pub fn difference_spline(m1: &KMonotoneModel, m2: &KMonotoneModel) -> Result<PiecewisePolynomial> {
    if m1.k() != m2.k() {
        return Err(invalid(format!(
            "models have different orders {} and {}",
            m1.k(),
            m2.k()
        )));
    }
    let k = m1.k();
    check_order(k)?;
    // merged (location, weight difference)
    let mut diffs: Vec<(f64, f64)> = Vec::new();
    let (a1, a2) = (m1.mixing().atoms(), m2.mixing().atoms());
    let (mut i, mut j) = (0, 0);
    while i < a1.len() || j < a2.len() {
        let take1 = j >= a2.len() || (i < a1.len() && a1[i].location < a2[j].location);
        let take2 = i >= a1.len() || (j < a2.len() && a2[j].location < a1[i].location);
        if take1 {
            diffs.push((a1[i].location, a1[i].weight));
            i += 1;
        } else if take2 {
            diffs.push((a2[j].location, -a2[j].weight));
            j += 1;
        } else {
            diffs.push((a1[i].location, a1[i].weight - a2[j].weight));
            i += 1;
            j += 1;
        }
    }
    let mut knots = vec![0.0];
    knots.extend(diffs.iter().map(|d| d.0));
    let kf = k as f64;
    let pieces = knots
        .iter()
        .map(|&origin| {
            let mut p = Poly::new(vec![0.0; k as usize]);
            for &(y, s) in diffs.iter().filter(|d| d.0 > origin) {
                if s != 0.0 {
                    // s k (y - origin - u)^(k-1) / y^k, written with (y-origin)/y <= 1
                    p.add_power(s * kf / y, (y - origin) / y, -1.0 / y, k as usize - 1);
                }
            }
            p
        })
        .collect();
    PiecewisePolynomial::new(knots, pieces, Some(k as i32 - 2))
}
