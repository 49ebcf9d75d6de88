//! Offline optima: exhaustive integral search, max-flow binary search for
//! unit values, a dense LP for general values, and the closed form for the
//! public/private construction.
//!
//! Every solver returns an [`OptResult`] with a certificate matrix
//! (`m × n` item shares) that [`OptResult::verify`] can replay.

pub mod flow;
pub mod simplex;

use crate::error::{Error, Result};
use crate::types::{Instance, OptKind, OptResult};

pub use flow::FlowNetwork;

/// Default bound on `n^m` for exhaustive search.
pub const EXHAUSTIVE_CAP: u64 = 1 << 20;
/// Dense LP size bound on `n + m`.
pub const LP_CAP: usize = 500;
/// Absolute tolerance of the fractional binary search and flow comparisons.
pub const FLOW_TOL: f64 = 1e-9;

pub const SOLVER_EXHAUSTIVE: &str = "exhaustive";
pub const SOLVER_FLOW_INTEGRAL: &str = "flow_integral";
pub const SOLVER_FLOW_FRACTIONAL: &str = "flow_fractional";
pub const SOLVER_LP: &str = "lp";
pub const SOLVER_CLOSED_FORM: &str = "closed_form";

fn assignment_matrix(n: usize, agents: &[usize]) -> Vec<Vec<f64>> {
    agents
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n];
            row[a] = 1.0;
            row
        })
        .collect()
}

/// Best integral assignment by enumerating all `n^m` of them.
pub fn opt_exhaustive_integral(instance: &Instance) -> Result<OptResult> {
    opt_exhaustive_integral_capped(instance, EXHAUSTIVE_CAP)
}

pub fn opt_exhaustive_integral_capped(instance: &Instance, cap: u64) -> Result<OptResult> {
    let (n, m) = (instance.n_agents(), instance.n_items());
    let space = (n as u64).checked_pow(m as u32).filter(|&s| s <= cap);
    if space.is_none() {
        return Err(Error::Size(format!(
            "exhaustive search over {n}^{m} assignments exceeds the cap {cap}"
        )));
    }

    struct Search<'a> {
        instance: &'a Instance,
        loads: Vec<f64>,
        current: Vec<usize>,
        best: f64,
        best_assignment: Vec<usize>,
    }

    impl Search<'_> {
        fn go(&mut self, item: usize) {
            if item == self.instance.n_items() {
                let v = self.loads.iter().copied().fold(f64::INFINITY, f64::min);
                if v > self.best {
                    self.best = v;
                    self.best_assignment.clone_from(&self.current);
                }
                return;
            }
            for agent in 0..self.instance.n_agents() {
                let add = self.instance.value(item, agent);
                self.loads[agent] += add;
                self.current[item] = agent;
                self.go(item + 1);
                self.loads[agent] -= add;
            }
        }
    }

    let mut search = Search {
        instance,
        loads: vec![0.0; n],
        current: vec![0; m],
        best: f64::NEG_INFINITY,
        best_assignment: vec![0; m],
    };
    search.go(0);
    // Recompute the winner's loads from scratch so the value carries no
    // add/subtract drift.
    let cert = assignment_matrix(n, &search.best_assignment);
    let mut loads = vec![0.0; n];
    for (t, &a) in search.best_assignment.iter().enumerate() {
        loads[a] += instance.value(t, a);
    }
    Ok(OptResult {
        value: loads.iter().copied().fold(f64::INFINITY, f64::min),
        kind: OptKind::Integral,
        solver: SOLVER_EXHAUSTIVE.into(),
        certificate: Some(cert),
    })
}

/// Source → items (cap 1) → agents valuing the item (cap 1) → sink (cap λ).
struct UnitNetwork {
    net: FlowNetwork,
    item_agent_arcs: Vec<(usize, usize, usize)>,
    source: usize,
    sink: usize,
}

impl UnitNetwork {
    fn build(instance: &Instance, lambda: f64) -> Self {
        let (n, m) = (instance.n_agents(), instance.n_items());
        let source = 0;
        let sink = m + n + 1;
        let mut net = FlowNetwork::new(m + n + 2);
        let mut item_agent_arcs = Vec::new();
        for t in 0..m {
            net.add_arc(source, 1 + t, 1.0);
            for i in 0..n {
                if instance.value(t, i) == 1.0 {
                    let id = net.add_arc(1 + t, 1 + m + i, 1.0);
                    item_agent_arcs.push((id, t, i));
                }
            }
        }
        for i in 0..n {
            net.add_arc(1 + m + i, sink, lambda);
        }
        UnitNetwork {
            net,
            item_agent_arcs,
            source,
            sink,
        }
    }

    /// Runs max flow; returns the certificate if every agent gets `λ`.
    fn feasible(instance: &Instance, lambda: f64) -> Option<Vec<Vec<f64>>> {
        let mut un = Self::build(instance, lambda);
        let f = un.net.max_flow(un.source, un.sink);
        let n = instance.n_agents();
        if f < n as f64 * lambda - FLOW_TOL {
            return None;
        }
        let mut cert = vec![vec![0.0; n]; instance.n_items()];
        for &(id, t, i) in &un.item_agent_arcs {
            cert[t][i] = un.net.flow(id);
        }
        Some(cert)
    }
}

/// OPT for `{0,1}`-valued instances by binary search on `λ` with a max-flow
/// feasibility check. Integral: over integers in `[0, ⌊m/n⌋]`. Fractional:
/// over reals to absolute tolerance `1e-9`.
pub fn opt_unit_flow(instance: &Instance, kind: OptKind) -> Result<OptResult> {
    if !instance.is_unit_valued() {
        return Err(Error::Domain("flow oracle needs values in {0, 1}".into()));
    }
    let (n, m) = (instance.n_agents(), instance.n_items());
    let zero_cert = || vec![vec![0.0; n]; m];
    let (value, cert, solver) = match kind {
        OptKind::Integral => {
            let (mut lo, mut hi) = (0usize, m / n);
            let mut cert = zero_cert();
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                match UnitNetwork::feasible(instance, mid as f64) {
                    Some(c) => {
                        lo = mid;
                        cert = c;
                    }
                    None => hi = mid - 1,
                }
            }
            if lo > 0 && cert.iter().all(|r| r.iter().all(|&x| x == 0.0)) {
                cert = UnitNetwork::feasible(instance, lo as f64).expect("feasible level");
            }
            // integral capacities give an integral max flow
            for row in &mut cert {
                row.iter_mut().for_each(|x| *x = x.round());
            }
            (lo as f64, cert, SOLVER_FLOW_INTEGRAL)
        }
        OptKind::Fractional => {
            let mut hi = m as f64 / n as f64;
            let mut lo = 0.0;
            let mut cert = zero_cert();
            if let Some(c) = UnitNetwork::feasible(instance, hi) {
                lo = hi;
                cert = c;
            } else {
                while hi - lo > FLOW_TOL {
                    let mid = 0.5 * (lo + hi);
                    match UnitNetwork::feasible(instance, mid) {
                        Some(c) => {
                            lo = mid;
                            cert = c;
                        }
                        None => hi = mid,
                    }
                }
            }
            (lo, cert, SOLVER_FLOW_FRACTIONAL)
        }
    };
    Ok(OptResult {
        value,
        kind,
        solver: solver.into(),
        certificate: Some(cert),
    })
}

/// Fractional OPT of the max-min LP
///
/// ```text
/// max λ  s.t.  Σ_j v_ij x_ij ≥ λ  ∀i,   Σ_i x_ij ≤ 1  ∀j,   x ≥ 0
/// ```
///
/// by dense primal simplex. Only pairs with `v_ij > 0` get a variable.
pub fn opt_fractional_lp(instance: &Instance) -> Result<OptResult> {
    let (n, m) = (instance.n_agents(), instance.n_items());
    if n + m > LP_CAP {
        return Err(Error::Size(format!(
            "dense LP with n + m = {} exceeds the cap {LP_CAP}",
            n + m
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|t| (0..n).map(move |i| (t, i)))
        .filter(|&(t, i)| instance.value(t, i) > 0.0)
        .collect();
    let nvars = 1 + pairs.len();
    let mut a = vec![vec![0.0; nvars]; n + m];
    for row in a.iter_mut().take(n) {
        row[0] = 1.0;
    }
    for (k, &(t, i)) in pairs.iter().enumerate() {
        a[i][1 + k] = -instance.value(t, i);
        a[n + t][1 + k] = 1.0;
    }
    let mut b = vec![0.0; n];
    b.extend(std::iter::repeat_n(1.0, m));
    let mut c = vec![0.0; nvars];
    c[0] = 1.0;
    let max_pivots = 1000 * (n + m) + 10 * nvars;
    let sol = simplex::maximize(&c, &a, &b, max_pivots)?;

    let mut cert = vec![vec![0.0; n]; m];
    for (k, &(t, i)) in pairs.iter().enumerate() {
        cert[t][i] = sol.x[1 + k];
    }
    Ok(OptResult {
        value: sol.objective.max(0.0),
        kind: OptKind::Fractional,
        solver: SOLVER_LP.into(),
        certificate: Some(cert),
    })
}

/// OPT of the public/private construction is exactly `k`: private items to
/// their owners, public items to the public agent `n-1`. The certificate
/// follows the layout of [`crate::instances::gen_public_private`].
pub fn opt_public_private_closed_form(n: usize, k: usize) -> Result<OptResult> {
    if n < 2 || k < 1 {
        return Err(Error::Config(format!(
            "need n >= 2 and k >= 1 (got n={n}, k={k})"
        )));
    }
    let agents: Vec<usize> = (0..n * k).map(|t| (t / k).min(n - 1)).collect();
    Ok(OptResult {
        value: k as f64,
        kind: OptKind::Integral,
        solver: SOLVER_CLOSED_FORM.into(),
        certificate: Some(assignment_matrix(n, &agents)),
    })
}
