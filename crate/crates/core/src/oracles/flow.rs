//! Dinic max flow over real capacities.

use std::collections::VecDeque;

/// Residual capacities below this are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    initial: f64,
}

/// A directed network; arcs are stored in pairs (forward at even index,
/// reverse at odd).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n_nodes: usize) -> Self {
        FlowNetwork {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds `from → to` with capacity `cap ≥ 0` and returns its arc id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) -> usize {
        assert!(cap >= 0.0, "negative capacity {cap}");
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to,
            cap,
            initial: cap,
        });
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            initial: 0.0,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently routed through arc `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.arcs[id].initial - self.arcs[id].cap
    }

    fn levels(&self, source: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.n_nodes()];
        level[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap();
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > RESIDUAL_EPS && level[arc.to].is_none() {
                    level[arc.to] = Some(lu + 1);
                    queue.push_back(arc.to);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        u: usize,
        sink: usize,
        pushed: f64,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> f64 {
        if u == sink {
            return pushed;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            let forward = matches!((level[u], level[to]), (Some(lu), Some(lt)) if lt == lu + 1);
            if cap > RESIDUAL_EPS && forward {
                let got = self.augment(to, sink, pushed.min(cap), level, next);
                if got > 0.0 {
                    self.arcs[a].cap -= got;
                    self.arcs[a ^ 1].cap += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Maximum flow from `source` to `sink`; arc flows are left in place.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(source);
            if level[sink].is_none() {
                return total;
            }
            let mut next = vec![0; self.n_nodes()];
            loop {
                let got = self.augment(source, sink, f64::INFINITY, &level, &mut next);
                if got <= 0.0 {
                    break;
                }
                total += got;
            }
        }
    }
}
