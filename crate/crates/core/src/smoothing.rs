//! The LogSumExp smoothed minimum
//!
//! ```text
//! φ_ε(u) = -(1/ε) · ln Σ_i exp(-ε·u_i)
//! ```
//!
//! together with its gradient (a softmax of `-ε·u`) and the exact one-item
//! best response over the probability simplex used by the smooth greedy
//! policy.
//!
//! Everything is evaluated shifted by `min(u)`, so loads in the millions
//! with `ε` up to 10 never overflow `exp`.

use crate::error::{check_len, Error, Result};
use crate::types::FractionalAssignment;

/// The smoothing parameter `ε`, restricted to `(0, 10]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub const MAX: f64 = 10.0;

    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= Self::MAX) {
            return Err(Error::Config(format!(
                "smoothing parameter must lie in (0, {}], got {eps}",
                Self::MAX
            )));
        }
        Ok(SmoothingParam(eps))
    }

    pub fn eps(self) -> f64 {
        self.0
    }
}

fn check_finite(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::Dimension("empty vector".into()));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("vector has a non-finite entry".into()));
    }
    Ok(())
}

fn argmin(u: &[f64]) -> usize {
    u.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x < u[best] { i } else { best })
}

/// `min(u) - φ_ε(u)`, which lies in `[0, ln(n)/ε]`.
///
/// Computed as `ln(1 + Σ_{i≠i*} e^{-ε(u_i - u_{i*})}) / ε` so that the gap
/// keeps full relative precision even when it is far below the spacing of
/// floats around `min(u)`. It underflows to 0 only once `ε` times the
/// distance from the minimum to every other entry exceeds about 745.
pub fn smooth_min_gap(u: &[f64], eps: SmoothingParam) -> Result<f64> {
    check_finite(u)?;
    let e = eps.eps();
    let lo = argmin(u);
    let rest: f64 = u
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != lo)
        .map(|(_, &x)| (-e * (x - u[lo])).exp())
        .sum();
    Ok(rest.ln_1p() / e)
}

/// `φ_ε(u) = -(1/ε) ln Σ_i e^{-ε u_i}`.
pub fn smooth_min(u: &[f64], eps: SmoothingParam) -> Result<f64> {
    let gap = smooth_min_gap(u, eps)?;
    Ok(u[argmin(u)] - gap)
}

/// `∇φ_ε(u)`, the softmax of `-ε·u`. A probability vector.
pub fn smooth_min_gradient(u: &[f64], eps: SmoothingParam) -> Result<Vec<f64>> {
    check_finite(u)?;
    let e = eps.eps();
    let m = u[argmin(u)];
    let mut g: Vec<f64> = u.iter().map(|&x| (-e * (x - m)).exp()).collect();
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    Ok(g)
}

fn check_item(loads: &[f64], item_values: &[f64]) -> Result<()> {
    check_finite(loads)?;
    check_len("item values", item_values.len(), loads.len())?;
    if let Some(v) = item_values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("item value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Result of [`best_fractional_response`].
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub assignment: FractionalAssignment,
    /// Set when the item is worthless to every agent; the item then goes
    /// wholly to agent 0.
    pub degenerate: bool,
}

/// Maximizes `φ_ε(loads + values ⊙ x)` over the simplex.
///
/// Equivalent to minimizing the separable convex `Σ_i c_i e^{-ε v_i x_i}`
/// with `c_i = e^{-ε·loads_i}`. Stationarity gives, on the support,
///
/// ```text
/// x_i = (a_i - λ) / w_i,   a_i = ln(ε v_i) - ε·loads_i,   w_i = ε v_i
/// ```
///
/// for a common log-multiplier `λ`, and `x_i = 0` wherever `a_i ≤ λ`. The
/// support is a prefix of the coordinates sorted by `a_i`, so the water level
/// is found exactly by scanning breakpoints rather than by iterating on `λ`.
pub fn best_fractional_response(
    loads: &[f64],
    item_values: &[f64],
    eps: SmoothingParam,
) -> Result<BestResponse> {
    check_item(loads, item_values)?;
    let n = loads.len();
    let e = eps.eps();

    // (a_i, 1/w_i, i) for agents that value the item.
    let mut active: Vec<(f64, f64, usize)> = item_values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| ((e * v).ln() - e * loads[i], 1.0 / (e * v), i))
        .collect();
    if active.is_empty() {
        return Ok(BestResponse {
            assignment: FractionalAssignment::vertex(n, 0),
            degenerate: true,
        });
    }
    let top = active.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
    for a in &mut active {
        a.0 -= top;
    }
    // Descending by a_i; ties keep index order.
    active.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.2.cmp(&y.2)));

    let mut sum_a_over_w = 0.0;
    let mut sum_inv_w = 0.0;
    let mut level = f64::NEG_INFINITY;
    for (j, &(a, inv_w, _)) in active.iter().enumerate() {
        sum_a_over_w += a * inv_w;
        sum_inv_w += inv_w;
        level = (sum_a_over_w - 1.0) / sum_inv_w;
        let next = active.get(j + 1).map_or(f64::NEG_INFINITY, |x| x.0);
        if level >= next {
            break;
        }
    }

    let mut weights = vec![0.0; n];
    for &(a, inv_w, i) in &active {
        weights[i] = ((a - level) * inv_w).max(0.0);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|x| *x /= total);
    Ok(BestResponse {
        assignment: FractionalAssignment::new(weights)?,
        degenerate: false,
    })
}

/// Result of [`single_winner_response`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Winner {
    pub agent: usize,
    pub degenerate: bool,
}

/// `argmax_i ∇_i φ_ε(loads) · v_i`, lowest index on ties.
///
/// Scores are compared as `ln v_i - ε·loads_i` (the softmax normalizer is
/// common to all agents), which cannot underflow.
pub fn single_winner_response(
    loads: &[f64],
    item_values: &[f64],
    eps: SmoothingParam,
) -> Result<Winner> {
    check_item(loads, item_values)?;
    let e = eps.eps();
    let best = item_values
        .iter()
        .zip(loads)
        .enumerate()
        .filter(|(_, (&v, _))| v > 0.0)
        .map(|(i, (&v, &l))| (i, v.ln() - e * l))
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((i, s)),
        });
    Ok(match best {
        Some((agent, _)) => Winner {
            agent,
            degenerate: false,
        },
        None => Winner {
            agent: 0,
            degenerate: true,
        },
    })
}
