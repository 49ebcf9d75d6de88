//! Domain types shared by every module: instances, arrival orders, load
//! accounting and run traces.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Tolerance on `Σ x = 1` for a [`FractionalAssignment`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Provenance of a generated instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub public_item_flags: Option<Vec<bool>>,
    /// Number of private items per agent, for the binomial construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_counts: Option<Vec<usize>>,
}

impl Metadata {
    pub fn family(family: &str) -> Self {
        Metadata {
            family: family.to_string(),
            ..Default::default()
        }
    }
}

/// `n` agents, `m` items and a dense `m × n` value matrix with entries in
/// `[0, 1]`. Row `t` holds the value of item `t` to every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n_agents: usize,
    n_items: usize,
    values: Vec<f64>,
    pub metadata: Metadata,
}

impl Instance {
    pub fn new(n_agents: usize, rows: Vec<Vec<f64>>, metadata: Metadata) -> Result<Self> {
        let n_items = rows.len();
        let mut values = Vec::with_capacity(n_items * n_agents);
        for (t, row) in rows.into_iter().enumerate() {
            check_len(&format!("value row {t}"), row.len(), n_agents)?;
            values.extend(row);
        }
        Self::from_flat(n_agents, n_items, values, metadata)
    }

    pub fn from_flat(
        n_agents: usize,
        n_items: usize,
        values: Vec<f64>,
        metadata: Metadata,
    ) -> Result<Self> {
        if n_agents == 0 || n_items == 0 {
            return Err(Error::Data(format!(
                "instance needs at least one agent and one item (n={n_agents}, m={n_items})"
            )));
        }
        check_len("value matrix", values.len(), n_agents * n_items)?;
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data(format!(
                "value {} at item {}, agent {} is outside [0, 1]",
                values[pos],
                pos / n_agents,
                pos % n_agents
            )));
        }
        if let Some(flags) = &metadata.public_item_flags {
            check_len("public_item_flags", flags.len(), n_items)?;
            for (t, _) in flags.iter().enumerate().filter(|(_, f)| **f) {
                let row = &values[t * n_agents..(t + 1) * n_agents];
                if row.iter().any(|&v| v != 1.0) {
                    return Err(Error::Data(format!(
                        "item {t} is flagged public but its value row is not all ones"
                    )));
                }
            }
        }
        Ok(Instance {
            n_agents,
            n_items,
            values,
            metadata,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    #[inline]
    pub fn row(&self, item: usize) -> &[f64] {
        &self.values[item * self.n_agents..(item + 1) * self.n_agents]
    }

    pub fn value(&self, item: usize, agent: usize) -> f64 {
        self.values[item * self.n_agents + agent]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_agents)
    }

    pub fn public_flags(&self) -> Option<&[bool]> {
        self.metadata.public_item_flags.as_deref()
    }

    /// True when every entry is 0 or 1.
    pub fn is_unit_valued(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// A permutation of item indices giving the online presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ArrivalOrder {
    permutation: Vec<usize>,
}

impl ArrivalOrder {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let m = permutation.len();
        let mut seen = vec![false; m];
        for &t in &permutation {
            if t >= m || seen[t] {
                return Err(Error::Data(format!(
                    "arrival order is not a permutation of 0..{m} (offending entry {t})"
                )));
            }
            seen[t] = true;
        }
        Ok(ArrivalOrder { permutation })
    }

    pub fn identity(m: usize) -> Self {
        ArrivalOrder {
            permutation: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.permutation
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.permutation.iter().copied()
    }

    pub(crate) fn check_against(&self, instance: &Instance) -> Result<()> {
        check_len("arrival order", self.len(), instance.n_items())
    }
}

impl TryFrom<Vec<usize>> for ArrivalOrder {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        ArrivalOrder::new(v)
    }
}

impl From<ArrivalOrder> for Vec<usize> {
    fn from(o: ArrivalOrder) -> Self {
        o.permutation
    }
}

/// Accumulated value per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn zeros(n: usize) -> Self {
        LoadVector(vec![0.0; n])
    }

    pub fn from_vec(loads: Vec<f64>) -> Result<Self> {
        if loads.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Domain("loads must be finite and nonnegative".into()));
        }
        Ok(LoadVector(loads))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Returns `loads + item_values ⊙ x`, leaving `self` untouched.
    pub fn apply_step(&self, item_values: &[f64], x: &FractionalAssignment) -> Result<LoadVector> {
        let mut next = self.clone();
        next.add_assign_step(item_values, x.weights())?;
        Ok(next)
    }

    /// In-place `loads += item_values ⊙ weights`.
    pub fn add_assign_step(&mut self, item_values: &[f64], weights: &[f64]) -> Result<()> {
        check_len("item values", item_values.len(), self.len())?;
        check_len("assignment", weights.len(), self.len())?;
        for ((l, v), x) in self.0.iter_mut().zip(item_values).zip(weights) {
            *l += v * x;
        }
        Ok(())
    }

    /// In-place update for an integral assignment of the item to `agent`.
    pub fn add_to_agent(&mut self, item_values: &[f64], agent: usize) -> Result<()> {
        check_len("item values", item_values.len(), self.len())?;
        if agent >= self.len() {
            return Err(Error::Dimension(format!(
                "agent {agent} out of range for {} agents",
                self.len()
            )));
        }
        self.0[agent] += item_values[agent];
        Ok(())
    }

    pub fn reset(&mut self) {
        self.0.iter_mut().for_each(|l| *l = 0.0);
    }

    pub fn min_load(&self) -> Result<f64> {
        min_load(&self.0)
    }
}

/// Minimum entry of a load vector.
pub fn min_load(loads: &[f64]) -> Result<f64> {
    loads
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::Dimension("min_load of an empty vector".into()))
}

/// A point of the probability simplex: how one item is split among agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FractionalAssignment {
    weights: Vec<f64>,
}

impl FractionalAssignment {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, SIMPLEX_TOL)
    }

    pub(crate) fn with_tolerance(weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("empty assignment".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Data(
                "assignment weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Data(format!(
                "assignment weights sum to {sum}, not 1"
            )));
        }
        Ok(FractionalAssignment { weights })
    }

    /// The vertex `e_agent` of the `n`-simplex.
    pub fn vertex(n: usize, agent: usize) -> Self {
        assert!(agent < n, "vertex index {agent} out of range for n={n}");
        let mut weights = vec![0.0; n];
        weights[agent] = 1.0;
        FractionalAssignment { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Some(i)` if this assignment is the vertex `e_i`.
    pub fn as_vertex(&self) -> Option<usize> {
        let i = self.weights.iter().position(|&w| w == 1.0)?;
        self.weights
            .iter()
            .enumerate()
            .all(|(j, &w)| j == i || w == 0.0)
            .then_some(i)
    }
}

impl TryFrom<Vec<f64>> for FractionalAssignment {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FractionalAssignment::with_tolerance(v, 1e-9)
    }
}

impl From<FractionalAssignment> for Vec<f64> {
    fn from(x: FractionalAssignment) -> Self {
        x.weights
    }
}

/// Per-step decisions of a run, in arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decisions {
    Fractional(Vec<FractionalAssignment>),
    Integral(Vec<usize>),
}

impl Decisions {
    pub fn len(&self) -> usize {
        match self {
            Decisions::Fractional(v) => v.len(),
            Decisions::Integral(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Complete record of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub assignments: Decisions,
    pub final_loads: LoadVector,
    pub min_load: f64,
    pub policy_tag: String,
    pub seed: u64,
    /// Steps whose item had zero value for every agent.
    pub degenerate_steps: usize,
}

impl Trace {
    /// Recomputes the per-agent totals from the recorded decisions.
    pub fn replay(&self, instance: &Instance, order: &ArrivalOrder) -> Result<LoadVector> {
        order.check_against(instance)?;
        check_len("trace", self.assignments.len(), order.len())?;
        let mut loads = LoadVector::zeros(instance.n_agents());
        match &self.assignments {
            Decisions::Fractional(xs) => {
                for (item, x) in order.iter().zip(xs) {
                    loads.add_assign_step(instance.row(item), x.weights())?;
                }
            }
            Decisions::Integral(agents) => {
                for (item, &a) in order.iter().zip(agents) {
                    loads.add_to_agent(instance.row(item), a)?;
                }
            }
        }
        Ok(loads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    Fractional,
    Integral,
}

/// An offline optimum with the solver that produced it. The certificate,
/// when present, is an `m × n` matrix of item shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub value: f64,
    pub kind: OptKind,
    pub solver: String,
    #[serde(skip)]
    pub certificate: Option<Vec<Vec<f64>>>,
}

impl OptResult {
    /// Checks the certificate is feasible and attains `value` within `tol`.
    /// Returns the certificate's min load.
    pub fn verify(&self, instance: &Instance, tol: f64) -> Result<f64> {
        let cert = self
            .certificate
            .as_ref()
            .ok_or_else(|| Error::Data("no certificate to verify".into()))?;
        check_len("certificate", cert.len(), instance.n_items())?;
        let mut loads = vec![0.0; instance.n_agents()];
        for (t, row) in cert.iter().enumerate() {
            check_len("certificate row", row.len(), instance.n_agents())?;
            if row.iter().any(|&x| x < -tol) {
                return Err(Error::Data(format!(
                    "certificate row {t} has a negative share"
                )));
            }
            let total: f64 = row.iter().sum();
            if total > 1.0 + tol {
                return Err(Error::Data(format!(
                    "certificate row {t} allocates {total} > 1"
                )));
            }
            if self.kind == OptKind::Integral && row.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::Data(format!(
                    "integral certificate row {t} is fractional"
                )));
            }
            for (i, x) in row.iter().enumerate() {
                loads[i] += instance.value(t, i) * x;
            }
        }
        let attained = min_load(&loads)?;
        if attained < self.value - tol {
            return Err(Error::Data(format!(
                "certificate attains {attained}, below reported value {}",
                self.value
            )));
        }
        Ok(attained)
    }
}
