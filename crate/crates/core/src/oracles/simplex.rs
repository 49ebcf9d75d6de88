//! Dense tableau primal simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with
//! `b ≥ 0`, so the slack basis is feasible and no phase one is needed.
//!
//! Pivoting starts with Dantzig's largest-coefficient rule and switches to
//! Bland's smallest-index rule after `10 · rows` pivots, which rules out
//! cycling on degenerate vertices.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Dantzig,
    Bland,
}

struct Tableau {
    rows: usize,
    /// structural + slack columns, excluding the rhs
    cols: usize,
    /// `(rows + 1) × (cols + 1)`, objective row last, rhs column last
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn entering(&self, rule: Rule) -> Option<usize> {
        let obj = self.rows;
        let candidates = (0..self.cols).filter(|&c| self.at(obj, c) < -PIVOT_TOL);
        match rule {
            Rule::Bland => candidates.min(),
            Rule::Dantzig => candidates
                .min_by(|&a, &b| self.at(obj, a).total_cmp(&self.at(obj, b)).then(a.cmp(&b))),
        }
    }

    /// Minimum ratio test; ties go to the smallest basic variable index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, col);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(r) / a;
            best = match best {
                Some((br, bratio))
                    if bratio < ratio - 1e-12
                        || ((bratio - ratio).abs() <= 1e-12 && self.basis[br] < self.basis[r]) =>
                {
                    Some((br, bratio))
                }
                _ => Some((r, ratio)),
            };
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for (c, pv) in pivot_row.iter().enumerate() {
                self.data[r * w + c] -= f * pv;
            }
        }
        self.basis[pr] = pc;
    }
}

/// Solves `max cᵀx, Ax ≤ b, x ≥ 0`. `a` is row-major `rows × c.len()`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], max_pivots: usize) -> Result<LpSolution> {
    let rows = a.len();
    let nvars = c.len();
    if b.len() != rows || a.iter().any(|r| r.len() != nvars) {
        return Err(Error::Dimension("inconsistent LP dimensions".into()));
    }
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("right-hand sides must be nonnegative".into()));
    }
    let cols = nvars + rows;
    let w = cols + 1;
    let mut data = vec![0.0; (rows + 1) * w];
    for r in 0..rows {
        data[r * w..r * w + nvars].copy_from_slice(&a[r]);
        data[r * w + nvars + r] = 1.0;
        data[r * w + cols] = b[r];
    }
    for (j, cj) in c.iter().enumerate() {
        data[rows * w + j] = -cj;
    }
    let mut t = Tableau {
        rows,
        cols,
        data,
        basis: (nvars..cols).collect(),
    };

    let bland_after = 10 * rows.max(1);
    let mut pivots = 0;
    loop {
        let rule = if pivots < bland_after {
            Rule::Dantzig
        } else {
            Rule::Bland
        };
        let Some(pc) = t.entering(rule) else { break };
        let Some(pr) = t.leaving(pc) else {
            return Err(Error::Numerical("LP is unbounded".into()));
        };
        if pivots >= max_pivots {
            return Err(Error::Numerical(format!(
                "simplex did not terminate within {max_pivots} pivots"
            )));
        }
        t.pivot(pr, pc);
        pivots += 1;
    }

    let mut x = vec![0.0; nvars];
    for (r, &var) in t.basis.iter().enumerate() {
        if var < nvars {
            x[var] = t.rhs(r).max(0.0);
        }
    }
    Ok(LpSolution {
        objective: t.rhs(rows),
        x,
        pivots,
    })
}
