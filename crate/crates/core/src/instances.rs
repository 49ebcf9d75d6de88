//! Instance generators, arrival-order models and the JSON instance format.
//!
//! Layout of the public/private family: private items for agent `i` occupy
//! rows `i·k .. (i+1)·k` for `i < n-1`, followed by the `k` public rows. The
//! public agent is the last index `n-1`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::{ArrivalOrder, Instance, Metadata};

pub const FAMILY_PUBLIC_PRIVATE: &str = "public_private";
pub const FAMILY_BINOMIAL: &str = "binomial";
pub const FAMILY_IID: &str = "iid";

fn unit_row(n: usize, agent: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[agent] = 1.0;
    row
}

/// `n-1` private agents with `k` private items each plus `k` public items.
pub fn gen_public_private(n: usize, k: usize) -> Result<Instance> {
    if n < 2 || k < 1 {
        return Err(Error::Config(format!(
            "public/private instance needs n >= 2 and k >= 1 (got n={n}, k={k})"
        )));
    }
    let mut rows = Vec::with_capacity(n * k);
    let mut flags = Vec::with_capacity(n * k);
    for agent in 0..n - 1 {
        for _ in 0..k {
            rows.push(unit_row(n, agent));
            flags.push(false);
        }
    }
    for _ in 0..k {
        rows.push(vec![1.0; n]);
        flags.push(true);
    }
    let metadata = Metadata {
        k: Some(k),
        public_item_flags: Some(flags),
        ..Metadata::family(FAMILY_PUBLIC_PRIVATE)
    };
    Instance::new(n, rows, metadata)
}

/// Every agent `i` contributes `s_i ~ Binom(k, p)` private items and
/// `k - s_i` public items. `s_i` is the sum of `k` Bernoulli draws from the
/// stream `(seed, "binomial", i)`.
pub fn gen_binomial_public_private(n: usize, k: usize, p: f64, seed: u64) -> Result<Instance> {
    if n < 2 || k < 1 || !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!(
            "binomial instance needs n >= 2, k >= 1, p in [0, 1] (got n={n}, k={k}, p={p})"
        )));
    }
    let counts: Vec<usize> = (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, "binomial", i as u64);
            (0..k).filter(|_| r.random::<f64>() < p).count()
        })
        .collect();
    let mut rows = Vec::with_capacity(n * k);
    let mut flags = Vec::with_capacity(n * k);
    for (agent, &s) in counts.iter().enumerate() {
        for _ in 0..s {
            rows.push(unit_row(n, agent));
            flags.push(false);
        }
        for _ in s..k {
            rows.push(vec![1.0; n]);
            flags.push(true);
        }
    }
    let metadata = Metadata {
        k: Some(k),
        p: Some(p),
        seed: Some(seed),
        public_item_flags: Some(flags),
        private_counts: Some(counts),
        ..Metadata::family(FAMILY_BINOMIAL)
    };
    Instance::new(n, rows, metadata)
}

/// A finite-support distribution over item value vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidDistribution {
    support: Vec<(f64, Vec<f64>)>,
}

impl IidDistribution {
    pub fn new(support: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let Some(first) = support.first() else {
            return Err(Error::Config("empty support".into()));
        };
        let n = first.1.len();
        if n == 0 {
            return Err(Error::Config("support vectors must be nonempty".into()));
        }
        for (prob, v) in &support {
            if !(prob.is_finite() && *prob >= 0.0) {
                return Err(Error::Config(format!("invalid probability {prob}")));
            }
            if v.len() != n {
                return Err(Error::Config("support vectors differ in length".into()));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Config("support vector entry outside [0, 1]".into()));
            }
        }
        let total: f64 = support.iter().map(|s| s.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(IidDistribution { support })
    }

    pub fn n_agents(&self) -> usize {
        self.support[0].1.len()
    }

    pub fn support(&self) -> &[(f64, Vec<f64>)] {
        &self.support
    }

    /// Inverse-CDF draw for a uniform `u ∈ [0, 1)`.
    fn pick(&self, u: f64) -> &[f64] {
        let mut acc = 0.0;
        for (prob, v) in &self.support {
            acc += prob;
            if u < acc {
                return v;
            }
        }
        // u landed in the rounding slack above the last cumulative sum
        &self
            .support
            .iter()
            .rev()
            .find(|s| s.0 > 0.0)
            .unwrap_or(&self.support[0])
            .1
    }
}

/// `m` rows drawn independently from `dist` with the stream `(seed, "iid", 0)`.
pub fn gen_iid(n: usize, m: usize, dist: &IidDistribution, seed: u64) -> Result<Instance> {
    if dist.n_agents() != n {
        return Err(Error::Config(format!(
            "distribution is over {} agents, expected {n}",
            dist.n_agents()
        )));
    }
    let mut r = rng::stream(seed, "iid", 0);
    let rows = (0..m)
        .map(|_| dist.pick(r.random::<f64>()).to_vec())
        .collect();
    let metadata = Metadata {
        seed: Some(seed),
        ..Metadata::family(FAMILY_IID)
    };
    Instance::new(n, rows, metadata)
}

/// How the items of an instance are presented online.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderModel {
    /// Fisher–Yates shuffle driven by the stream `(seed, "order", 0)`.
    UniformRandom {
        seed: u64,
    },
    Explicit(Vec<usize>),
    /// All public items in index order, then the rest in index order.
    PublicFirst,
}

pub fn make_order(instance: &Instance, model: &OrderModel) -> Result<ArrivalOrder> {
    let m = instance.n_items();
    match model {
        OrderModel::UniformRandom { seed } => {
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut rng::stream(*seed, "order", 0));
            ArrivalOrder::new(perm)
        }
        OrderModel::Explicit(perm) => {
            if perm.len() != m {
                return Err(Error::Config(format!(
                    "explicit order has {} entries for {m} items",
                    perm.len()
                )));
            }
            ArrivalOrder::new(perm.clone()).map_err(|e| Error::Config(e.to_string()))
        }
        OrderModel::PublicFirst => {
            let flags = instance.public_flags().ok_or_else(|| {
                Error::Config("public_first order needs public item flags".into())
            })?;
            let public = (0..m).filter(|&t| flags[t]);
            let private = (0..m).filter(|&t| !flags[t]);
            ArrivalOrder::new(public.chain(private).collect())
        }
    }
}

/// On-disk representation; field order is the canonical one.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    m: usize,
    values: Vec<Vec<f64>>,
    #[serde(default)]
    metadata: Metadata,
}

pub fn instance_to_json(instance: &Instance) -> String {
    let file = InstanceFile {
        n: instance.n_agents(),
        m: instance.n_items(),
        values: instance.rows().map(<[f64]>::to_vec).collect(),
        metadata: instance.metadata.clone(),
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed instance: {e}")))?;
    if file.values.len() != file.m {
        return Err(Error::Data(format!(
            "header says m={} but {} value rows are present",
            file.m,
            file.values.len()
        )));
    }
    Instance::new(file.n, file.values, file.metadata).map_err(|e| match e {
        Error::Dimension(msg) => Error::Data(msg),
        other => other,
    })
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let mut text = instance_to_json(instance);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    instance_from_json(&fs::read_to_string(path)?)
}
