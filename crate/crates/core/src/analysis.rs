//! Closed-form bounds, ε-prefix statistics, the coupon-collector expectation
//! and seeded Monte Carlo validators.
//!
//! Monte Carlo trials are independent: trial `i` of a run with master seed
//! `s` uses the seed `derive_seed(s, "trial", i)`. Results are collected by
//! trial index before aggregation, so a report does not depend on how many
//! worker threads ran the trials.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::instances::{gen_binomial_public_private, gen_public_private, make_order, OrderModel};
use crate::policies::{run_online, Mode, PolicyConfig};
use crate::rng;
use crate::smoothing::{smooth_min_gradient, SmoothingParam};
use crate::types::{ArrivalOrder, Instance, Metadata, OptResult, Trace};

/// Slack multiplier on the standard error for every one-sided check.
pub const SIGMA_SLACK: f64 = 3.0;

// ---------------------------------------------------------------------------
// ε-prefix statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixStats {
    pub eps_fraction: f64,
    pub prefix_len: usize,
    pub public_count: usize,
    pub public_fraction_of_k: f64,
    pub missing_private_types: Vec<usize>,
}

/// Per-item classification of a public/private style instance, reusable
/// across many orders.
#[derive(Debug, Clone)]
pub struct PrefixLayout {
    k: usize,
    /// `None` for public items, the owning agent for private ones.
    owner: Vec<Option<usize>>,
    private_types: Vec<usize>,
    n: usize,
}

impl PrefixLayout {
    pub fn new(instance: &Instance) -> Result<Self> {
        let flags = instance
            .public_flags()
            .ok_or_else(|| Error::Domain("prefix statistics need public item flags".into()))?;
        let k = instance
            .metadata
            .k
            .ok_or_else(|| Error::Domain("prefix statistics need k in the metadata".into()))?;
        let n = instance.n_agents();
        let mut owner = Vec::with_capacity(instance.n_items());
        let mut has_private = vec![false; n];
        for (t, &public) in flags.iter().enumerate() {
            if public {
                owner.push(None);
                continue;
            }
            let mut positive = (0..n).filter(|&i| instance.value(t, i) > 0.0);
            match (positive.next(), positive.next()) {
                (Some(i), None) => {
                    has_private[i] = true;
                    owner.push(Some(i));
                }
                _ => {
                    return Err(Error::Domain(format!(
                        "private item {t} must be valued by exactly one agent"
                    )))
                }
            }
        }
        let private_types = (0..n).filter(|&i| has_private[i]).collect();
        Ok(PrefixLayout {
            k,
            owner,
            private_types,
            n,
        })
    }

    pub fn stats(&self, order: &ArrivalOrder, eps_fraction: f64) -> Result<PrefixStats> {
        if !(eps_fraction > 0.0 && eps_fraction < 1.0) {
            return Err(Error::Config(format!(
                "prefix fraction must lie in (0, 1), got {eps_fraction}"
            )));
        }
        let m = self.owner.len();
        if order.len() != m {
            return Err(Error::Dimension(format!(
                "order has {} items, instance has {m}",
                order.len()
            )));
        }
        let prefix_len = (eps_fraction * m as f64).floor() as usize;
        let mut seen = vec![false; self.n];
        let mut public_count = 0;
        for &t in &order.as_slice()[..prefix_len] {
            match self.owner[t] {
                None => public_count += 1,
                Some(i) => seen[i] = true,
            }
        }
        Ok(PrefixStats {
            eps_fraction,
            prefix_len,
            public_count,
            public_fraction_of_k: public_count as f64 / self.k as f64,
            missing_private_types: self
                .private_types
                .iter()
                .copied()
                .filter(|&i| !seen[i])
                .collect(),
        })
    }
}

/// Public items and missing private types among the first `⌊ε·m⌋` items.
pub fn prefix_stats(
    instance: &Instance,
    order: &ArrivalOrder,
    eps_fraction: f64,
) -> Result<PrefixStats> {
    PrefixLayout::new(instance)?.stats(order, eps_fraction)
}

// ---------------------------------------------------------------------------
// Closed-form bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl BoundQuery {
    pub fn new(name: &str) -> Self {
        BoundQuery {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str) -> Result<f64> {
        let v = *self
            .params
            .get(key)
            .ok_or_else(|| Error::Config(format!("bound {} needs parameter {key}", self.name)))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("parameter {key} must be finite")));
        }
        Ok(v)
    }

    fn open_unit(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!("{key} must lie in (0, 1), got {v}")));
        }
        Ok(v)
    }

    fn closed_unit(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{key} must lie in [0, 1], got {v}")));
        }
        Ok(v)
    }

    fn at_least(&self, key: &str, lo: f64) -> Result<f64> {
        let v = self.get(key)?;
        if v < lo {
            return Err(Error::Config(format!(
                "{key} must be at least {lo}, got {v}"
            )));
        }
        Ok(v)
    }
}

pub const BOUND_TAGS: [&str; 9] = [
    "public_prefix",
    "private_all_appear",
    "k_threshold",
    "opt_gamma_threshold",
    "min_private_gauss",
    "binom_private",
    "binom_public_share",
    "rounding_tail",
    "adversarial_chernoff",
];

/// Evaluates a named bound.
///
/// | tag | params | value |
/// |---|---|---|
/// | `public_prefix` | eps, k | `2·exp(-εk/8)` |
/// | `private_all_appear` | eps, k, n | `exp(-4^(-εk/(1-ε))·(n-1))` |
/// | `k_threshold` | eps, n | `(1-ε)/(2ε)·log₂(n-1)` |
/// | `opt_gamma_threshold` | gamma, n | `(5/(24γ) - 1)/2·log₂(n-1)` |
/// | `min_private_gauss` | k, n | `k/2 - √(k·ln n/2)` |
/// | `binom_private` | k, p, n | `kp - √(4kp(1-p)·ln n)` |
/// | `binom_public_share` | k, p, n | `k(1-p) - √(6(1-p)k·ln n)` |
/// | `rounding_tail` | eps, opt | `exp(-ε²/3·(1-ε)·opt)` |
/// | `adversarial_chernoff` | eps, n, opt | `exp(-ε²/8·opt/n)` |
pub fn bound_value(q: &BoundQuery) -> Result<f64> {
    let v = match q.name.as_str() {
        "public_prefix" => {
            let (eps, k) = (q.open_unit("eps")?, q.at_least("k", 0.0)?);
            2.0 * (-eps * k / 8.0).exp()
        }
        "private_all_appear" => {
            let (eps, k, n) = (
                q.open_unit("eps")?,
                q.at_least("k", 0.0)?,
                q.at_least("n", 2.0)?,
            );
            let decay = 4f64.powf(-eps / (1.0 - eps) * k);
            (-decay * (n - 1.0)).exp()
        }
        "k_threshold" => {
            let (eps, n) = (q.open_unit("eps")?, q.at_least("n", 2.0)?);
            (1.0 - eps) / (2.0 * eps) * (n - 1.0).log2()
        }
        "opt_gamma_threshold" => {
            let (gamma, n) = (q.get("gamma")?, q.at_least("n", 2.0)?);
            if gamma <= 0.0 {
                return Err(Error::Config(format!(
                    "gamma must be positive, got {gamma}"
                )));
            }
            (5.0 / (24.0 * gamma) - 1.0) / 2.0 * (n - 1.0).log2()
        }
        "min_private_gauss" => {
            let (k, n) = (q.at_least("k", 0.0)?, q.at_least("n", 1.0)?);
            k / 2.0 - (k * n.ln() / 2.0).sqrt()
        }
        "binom_private" => {
            let (k, p, n) = (
                q.at_least("k", 0.0)?,
                q.closed_unit("p")?,
                q.at_least("n", 1.0)?,
            );
            k * p - (4.0 * k * p * (1.0 - p) * n.ln()).sqrt()
        }
        "binom_public_share" => {
            let (k, p, n) = (
                q.at_least("k", 0.0)?,
                q.closed_unit("p")?,
                q.at_least("n", 1.0)?,
            );
            k * (1.0 - p) - (6.0 * (1.0 - p) * k * n.ln()).sqrt()
        }
        "rounding_tail" => {
            let (eps, opt) = (q.open_unit("eps")?, q.at_least("opt", 0.0)?);
            (-eps * eps / 3.0 * (1.0 - eps) * opt).exp()
        }
        "adversarial_chernoff" => {
            let (eps, n, opt) = (
                q.open_unit("eps")?,
                q.at_least("n", 1.0)?,
                q.at_least("opt", 0.0)?,
            );
            (-0.5 * eps * eps / 4.0 / n * opt).exp()
        }
        other => return Err(Error::Config(format!("unknown bound tag {other:?}"))),
    };
    Ok(v)
}

fn bound(name: &str, params: &[(&str, f64)]) -> Result<f64> {
    let q = params
        .iter()
        .fold(BoundQuery::new(name), |q, &(key, v)| q.with(key, v));
    bound_value(&q)
}

// ---------------------------------------------------------------------------
// Coupon collector

/// Expected number of uniformly random draws without replacement from `n`
/// types with `k` copies each until every type has been seen:
///
/// ```text
/// E[N] = (nk + 1)·(1 - Γ(n+1)·Γ(1+1/k) / Γ(n+1+1/k))
/// ```
pub fn coupon_expectation(n: usize, k: usize) -> Result<f64> {
    if n < 1 || k < 1 {
        return Err(Error::Config(format!(
            "coupon expectation needs n, k >= 1 (got {n}, {k})"
        )));
    }
    if n == 1 {
        return Ok(1.0);
    }
    let (nf, inv_k) = (n as f64, 1.0 / k as f64);
    let log_ratio = ln_gamma(nf + 1.0) + ln_gamma(1.0 + inv_k) - ln_gamma(nf + 1.0 + inv_k);
    Ok((nf * k as f64 + 1.0) * -log_ratio.exp_m1())
}

/// One draw sequence: items of `n` types with `k` copies each, in uniformly
/// random order. Returns the position at which the last type first appears.
fn coupon_draws<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> usize {
    let mut remaining: Vec<usize> = vec![k; n];
    let mut left = n * k;
    let mut unseen = n;
    let mut draws = 0;
    while unseen > 0 {
        let mut pick = rng.random_range(0..left);
        let ty = remaining
            .iter()
            .position(|&c| {
                if pick < c {
                    true
                } else {
                    pick -= c;
                    false
                }
            })
            .expect("pick below remaining count");
        if remaining[ty] == k {
            unseen -= 1;
        }
        remaining[ty] -= 1;
        left -= 1;
        draws += 1;
    }
    draws
}

// ---------------------------------------------------------------------------
// Monte Carlo reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    pub empirical_probability: Option<f64>,
    pub seed: u64,
}

impl McReport {
    /// Standard error of `empirical_probability` as a binomial proportion.
    pub fn probability_std_error(&self) -> Option<f64> {
        self.empirical_probability
            .map(|p| (p * (1.0 - p) / self.trials as f64).sqrt())
    }
}

/// One trial's measurement and, where the experiment defines one, whether
/// its event occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub value: f64,
    pub event: Option<bool>,
}

fn aggregate(outcomes: &[Outcome], seed: u64) -> McReport {
    let trials = outcomes.len();
    let tf = trials as f64;
    let mean = outcomes.iter().map(|o| o.value).sum::<f64>() / tf;
    let std_error = if trials > 1 {
        let ss: f64 = outcomes.iter().map(|o| (o.value - mean).powi(2)).sum();
        (ss / (tf - 1.0)).sqrt() / tf.sqrt()
    } else {
        0.0
    };
    let empirical_probability = if outcomes.iter().all(|o| o.event.is_some()) {
        Some(outcomes.iter().filter(|o| o.event == Some(true)).count() as f64 / tf)
    } else {
        None
    };
    McReport {
        trials,
        mean,
        std_error,
        empirical_probability,
        seed,
    }
}

/// Runs `trial(i, seed_i)` for every index and returns results in index
/// order. `threads = None` uses the global pool.
pub fn run_trials<T, F>(
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
    trial: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let work = || {
        (0..trials)
            .into_par_iter()
            .map(|i| trial(i, rng::derive_seed(master_seed, "trial", i as u64)))
            .collect::<Result<Vec<T>>>()
    };
    match threads {
        None => work(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(work),
    }
}

// ---------------------------------------------------------------------------
// Sampling without replacement

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffReport {
    pub report: McReport,
    /// `e^{-ε}·min_i mean_i - ln n / (ε(m-k+1))`
    pub bound: f64,
    pub holds: bool,
}

/// Right-hand side of the sampling-without-replacement bound for `vectors`.
pub fn hoeff_bound(vectors: &[Vec<f64>], k: usize, eps: f64) -> Result<f64> {
    let (n, m) = check_vectors(vectors, k)?;
    let eps = SmoothingParam::new(eps)?.eps();
    let min_mean = (0..n)
        .map(|i| vectors.iter().map(|v| v[i]).sum::<f64>() / m as f64)
        .fold(f64::INFINITY, f64::min);
    Ok((-eps).exp() * min_mean - (n as f64).ln() / (eps * (m - k + 1) as f64))
}

fn check_vectors(vectors: &[Vec<f64>], k: usize) -> Result<(usize, usize)> {
    let m = vectors.len();
    if k < 1 || k > m {
        return Err(Error::Config(format!("need 1 <= k <= m, got k={k}, m={m}")));
    }
    let n = vectors[0].len();
    if n == 0 {
        return Err(Error::Dimension("vectors must be non-empty".into()));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "vector of length {} among length {n}",
                v.len()
            )));
        }
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain("vector entries must lie in [0, 1]".into()));
        }
    }
    Ok((n, m))
}

/// Samples `k` of the vectors without replacement, forms the smooth-min
/// gradient `Z` of the sum of the first `k-1`, and records `⟨Y^k, Z⟩`.
/// `holds` compares the mean with [`hoeff_bound`] less three standard errors.
pub fn lemma_hoeff_mc(
    vectors: &[Vec<f64>],
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<HoeffReport> {
    let bound = hoeff_bound(vectors, k, eps)?;
    let (n, m) = check_vectors(vectors, k)?;
    let param = SmoothingParam::new(eps)?;
    let outcomes = run_trials(trials, seed, None, |_, s| {
        let mut r = rng::stream(s, "hoeff", 0);
        let picks = rand::seq::index::sample(&mut r, m, k).into_vec();
        let mut sum = vec![0.0; n];
        for &j in &picks[..k - 1] {
            sum.iter_mut().zip(&vectors[j]).for_each(|(a, b)| *a += b);
        }
        let z = smooth_min_gradient(&sum, param)?;
        let last = &vectors[picks[k - 1]];
        let value = last.iter().zip(&z).map(|(y, w)| y * w).sum();
        Ok(Outcome { value, event: None })
    })?;
    let report = aggregate(&outcomes, seed);
    let holds = report.mean >= bound - SIGMA_SLACK * report.std_error;
    Ok(HoeffReport {
        report,
        bound,
        holds,
    })
}

// ---------------------------------------------------------------------------
// Competitive ratio

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveReport {
    /// `None` when OPT is zero but the policy earned something.
    pub ratio: Option<f64>,
    pub additive_regret: f64,
    pub degenerate: bool,
}

pub fn competitive_from_values(min_load: f64, opt: f64) -> CompetitiveReport {
    let additive_regret = opt - min_load;
    if opt > 0.0 {
        CompetitiveReport {
            ratio: Some(min_load / opt),
            additive_regret,
            degenerate: false,
        }
    } else if min_load == 0.0 {
        CompetitiveReport {
            ratio: Some(1.0),
            additive_regret,
            degenerate: false,
        }
    } else {
        CompetitiveReport {
            ratio: None,
            additive_regret,
            degenerate: true,
        }
    }
}

pub fn competitive_report(trace: &Trace, opt: &OptResult) -> CompetitiveReport {
    competitive_from_values(trace.min_load, opt.value)
}

// ---------------------------------------------------------------------------
// Named experiments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    /// Value: draws until all `n` types are seen.
    Coupon { n: usize, k: usize },
    /// Value: number of private types missing from the prefix.
    /// Event: every private type appears.
    PrefixAllTypes { n: usize, k: usize, eps: f64 },
    /// Value: public items in the prefix divided by `k`.
    /// Event: fewer than `5εk/12` public items.
    PrefixFewPublic { n: usize, k: usize, eps: f64 },
    /// Value: `min_i s_i` on a fresh binomial instance.
    /// Event: it falls below the `binom_private` bound.
    BinomialPrivate { n: usize, k: usize, p: f64 },
    /// Value: fewest public items any agent receives when public items are
    /// allocated by the uniform random policy.
    /// Event: it falls below the `binom_public_share` bound.
    BinomialPublicShare { n: usize, k: usize, p: f64 },
    /// Value: load of the public agent under uniform random allocation with
    /// public items first.
    AdversarialPublicLoad { n: usize, k: usize },
    /// Value: min load over OPT `= k` in the same setting.
    AdversarialRatio { n: usize, k: usize },
    /// Value: fractional smooth greedy min load over OPT `= k` under a
    /// uniformly random order.
    RandomOrderRatio { n: usize, k: usize, eps: f64 },
}

/// Data shared by all trials of one experiment.
enum Prepared {
    None,
    Layout(Instance, PrefixLayout),
    Instance(Instance),
    PublicFirst(Instance, ArrivalOrder),
}

/// Outcome of checking an experiment's report against its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub target: f64,
    pub slack: f64,
    pub passed: bool,
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::Coupon { .. } => "coupon",
            Experiment::PrefixAllTypes { .. } => "prefix_all_types",
            Experiment::PrefixFewPublic { .. } => "prefix_few_public",
            Experiment::BinomialPrivate { .. } => "binomial_private",
            Experiment::BinomialPublicShare { .. } => "binomial_public_share",
            Experiment::AdversarialPublicLoad { .. } => "adversarial_public_load",
            Experiment::AdversarialRatio { .. } => "adversarial_ratio",
            Experiment::RandomOrderRatio { .. } => "random_order_ratio",
        }
    }

    /// Builds an experiment from its tag and named parameters.
    pub fn from_tag(tag: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::Config(format!("experiment {tag} needs parameter {key}")))
        };
        let count = |key: &str| -> Result<usize> {
            let v = get(key)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "{key} must be a non-negative integer, got {v}"
                )));
            }
            Ok(v as usize)
        };
        let e = match tag {
            "coupon" => Experiment::Coupon {
                n: count("n")?,
                k: count("k")?,
            },
            "prefix_all_types" => Experiment::PrefixAllTypes {
                n: count("n")?,
                k: count("k")?,
                eps: get("eps")?,
            },
            "prefix_few_public" => Experiment::PrefixFewPublic {
                n: count("n")?,
                k: count("k")?,
                eps: get("eps")?,
            },
            "binomial_private" => Experiment::BinomialPrivate {
                n: count("n")?,
                k: count("k")?,
                p: get("p")?,
            },
            "binomial_public_share" => Experiment::BinomialPublicShare {
                n: count("n")?,
                k: count("k")?,
                p: get("p")?,
            },
            "adversarial_public_load" => Experiment::AdversarialPublicLoad {
                n: count("n")?,
                k: count("k")?,
            },
            "adversarial_ratio" => Experiment::AdversarialRatio {
                n: count("n")?,
                k: count("k")?,
            },
            "random_order_ratio" => Experiment::RandomOrderRatio {
                n: count("n")?,
                k: count("k")?,
                eps: get("eps")?,
            },
            other => return Err(Error::Config(format!("unknown experiment {other:?}"))),
        };
        Ok(e)
    }

    pub fn n(&self) -> usize {
        match *self {
            Experiment::Coupon { n, .. }
            | Experiment::PrefixAllTypes { n, .. }
            | Experiment::PrefixFewPublic { n, .. }
            | Experiment::BinomialPrivate { n, .. }
            | Experiment::BinomialPublicShare { n, .. }
            | Experiment::AdversarialPublicLoad { n, .. }
            | Experiment::AdversarialRatio { n, .. }
            | Experiment::RandomOrderRatio { n, .. } => n,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            Experiment::Coupon { k, .. }
            | Experiment::PrefixAllTypes { k, .. }
            | Experiment::PrefixFewPublic { k, .. }
            | Experiment::BinomialPrivate { k, .. }
            | Experiment::BinomialPublicShare { k, .. }
            | Experiment::AdversarialPublicLoad { k, .. }
            | Experiment::AdversarialRatio { k, .. }
            | Experiment::RandomOrderRatio { k, .. } => k,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match *self {
            Experiment::BinomialPrivate { p, .. } | Experiment::BinomialPublicShare { p, .. } => {
                Some(p)
            }
            _ => None,
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match *self {
            Experiment::PrefixAllTypes { eps, .. }
            | Experiment::PrefixFewPublic { eps, .. }
            | Experiment::RandomOrderRatio { eps, .. } => Some(eps),
            _ => None,
        }
    }

    fn validate_params(&self) -> Result<()> {
        let (n, k) = (self.n(), self.k());
        let min_n = if matches!(self, Experiment::Coupon { .. }) {
            1
        } else {
            2
        };
        if n < min_n || k < 1 {
            return Err(Error::Config(format!(
                "{} needs n >= {min_n} and k >= 1 (got n={n}, k={k})",
                self.tag()
            )));
        }
        if let Some(eps) = self.eps() {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")));
            }
        }
        if let Some(p) = self.p() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    fn prepare(&self) -> Result<Prepared> {
        Ok(match *self {
            Experiment::PrefixAllTypes { n, k, .. } | Experiment::PrefixFewPublic { n, k, .. } => {
                let inst = gen_public_private(n, k)?;
                let layout = PrefixLayout::new(&inst)?;
                Prepared::Layout(inst, layout)
            }
            Experiment::AdversarialPublicLoad { n, k } | Experiment::AdversarialRatio { n, k } => {
                let inst = gen_public_private(n, k)?;
                let order = make_order(&inst, &OrderModel::PublicFirst)?;
                Prepared::PublicFirst(inst, order)
            }
            Experiment::RandomOrderRatio { n, k, .. } => {
                Prepared::Instance(gen_public_private(n, k)?)
            }
            _ => Prepared::None,
        })
    }

    /// The event threshold, where the experiment has one.
    fn threshold(&self) -> Result<Option<f64>> {
        Ok(match *self {
            Experiment::PrefixFewPublic { k, eps, .. } => Some(5.0 * eps / 12.0 * k as f64),
            Experiment::BinomialPrivate { n, k, p } => Some(bound(
                "binom_private",
                &[("k", k as f64), ("p", p), ("n", n as f64)],
            )?),
            Experiment::BinomialPublicShare { n, k, p } => Some(bound(
                "binom_public_share",
                &[("k", k as f64), ("p", p), ("n", n as f64)],
            )?),
            _ => None,
        })
    }

    fn trial(&self, prepared: &Prepared, threshold: Option<f64>, seed: u64) -> Result<Outcome> {
        let outcome = match (self, prepared) {
            (&Experiment::Coupon { n, k }, _) => Outcome {
                value: coupon_draws(n, k, &mut rng::stream(seed, "coupon", 0)) as f64,
                event: None,
            },
            (&Experiment::PrefixAllTypes { eps, .. }, Prepared::Layout(inst, layout)) => {
                let order = make_order(inst, &OrderModel::UniformRandom { seed })?;
                let s = layout.stats(&order, eps)?;
                Outcome {
                    value: s.missing_private_types.len() as f64,
                    event: Some(s.missing_private_types.is_empty()),
                }
            }
            (&Experiment::PrefixFewPublic { eps, .. }, Prepared::Layout(inst, layout)) => {
                let order = make_order(inst, &OrderModel::UniformRandom { seed })?;
                let s = layout.stats(&order, eps)?;
                Outcome {
                    value: s.public_fraction_of_k,
                    event: threshold.map(|t| (s.public_count as f64) < t),
                }
            }
            (&Experiment::BinomialPrivate { n, k, p }, _) => {
                let inst = gen_binomial_public_private(n, k, p, seed)?;
                let counts = inst.metadata.private_counts.as_deref().unwrap_or_default();
                let min = counts.iter().copied().min().unwrap_or(0) as f64;
                Outcome {
                    value: min,
                    event: threshold.map(|t| min < t),
                }
            }
            (&Experiment::BinomialPublicShare { n, k, p }, _) => {
                let inst = gen_binomial_public_private(n, k, p, seed)?;
                let min = uniform_public_min(&inst, seed)?;
                Outcome {
                    value: min,
                    event: threshold.map(|t| min < t),
                }
            }
            (&Experiment::AdversarialPublicLoad { n, .. }, Prepared::PublicFirst(inst, order)) => {
                let trace = run_online(inst, order, &PolicyConfig::uniform_random(seed))?;
                Outcome {
                    value: trace.final_loads.as_slice()[n - 1],
                    event: None,
                }
            }
            (&Experiment::AdversarialRatio { k, .. }, Prepared::PublicFirst(inst, order)) => {
                let trace = run_online(inst, order, &PolicyConfig::uniform_random(seed))?;
                Outcome {
                    value: trace.min_load / k as f64,
                    event: None,
                }
            }
            (&Experiment::RandomOrderRatio { k, eps, .. }, Prepared::Instance(inst)) => {
                let order = make_order(inst, &OrderModel::UniformRandom { seed })?;
                let trace = run_online(
                    inst,
                    &order,
                    &PolicyConfig::smooth_greedy(eps, Mode::Fractional),
                )?;
                Outcome {
                    value: trace.min_load / k as f64,
                    event: None,
                }
            }
            _ => unreachable!("prepare() matches the experiment"),
        };
        Ok(outcome)
    }

    /// Checks a report against the experiment's bound with a three standard
    /// error slack. `None` for experiments that only measure.
    pub fn validate(&self, report: &McReport) -> Result<Option<Validation>> {
        let prob_check = |target: f64| {
            let p = report.empirical_probability.unwrap_or(0.0);
            let slack = SIGMA_SLACK * report.probability_std_error().unwrap_or(0.0);
            Validation {
                target,
                slack,
                passed: p <= target + slack,
            }
        };
        Ok(match *self {
            Experiment::Coupon { n, k } => {
                let target = coupon_expectation(n, k)?;
                let slack = SIGMA_SLACK * report.std_error;
                Some(Validation {
                    target,
                    slack,
                    passed: (report.mean - target).abs() <= slack + 1e-12,
                })
            }
            Experiment::PrefixAllTypes { n, k, eps } => Some(prob_check(bound(
                "private_all_appear",
                &[("eps", eps), ("k", k as f64), ("n", n as f64)],
            )?)),
            Experiment::PrefixFewPublic { k, eps, .. } => Some(prob_check(bound(
                "public_prefix",
                &[("eps", eps), ("k", k as f64)],
            )?)),
            Experiment::BinomialPrivate { n, .. } | Experiment::BinomialPublicShare { n, .. } => {
                Some(prob_check(1.0 / n as f64))
            }
            _ => None,
        })
    }
}

/// Allocates the public items of `instance` with the uniform random policy
/// and returns the fewest any agent receives.
fn uniform_public_min(instance: &Instance, seed: u64) -> Result<f64> {
    let flags = instance
        .public_flags()
        .ok_or_else(|| Error::Domain("instance has no public item flags".into()))?;
    let n = instance.n_agents();
    let public: Vec<f64> = flags
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f)
        .flat_map(|(t, _)| instance.row(t).iter().copied())
        .collect();
    if public.is_empty() {
        return Ok(0.0);
    }
    let m = public.len() / n;
    let sub = Instance::from_flat(n, m, public, Metadata::family("public_items"))?;
    let trace = run_online(
        &sub,
        &ArrivalOrder::identity(m),
        &PolicyConfig::uniform_random(seed),
    )?;
    Ok(trace.min_load)
}

/// Runs `trials` independent trials of `experiment` and aggregates them.
pub fn monte_carlo(
    experiment: &Experiment,
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<McReport> {
    experiment.validate_params()?;
    let prepared = experiment.prepare()?;
    let threshold = experiment.threshold()?;
    let outcomes = run_trials(trials, master_seed, threads, |_, seed| {
        experiment.trial(&prepared, threshold, seed)
    })?;
    Ok(aggregate(&outcomes, master_seed))
}

// ---------------------------------------------------------------------------
// CSV output

pub const CSV_HEADER: &str =
    "experiment,n,k,p,eps,trials,mean,std_error,empirical_probability,seed";

/// Formats with 12 significant digits, `%g` style.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..DIGITS).contains(&exp) {
        format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        trim(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x))
    }
}

fn opt_field(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

/// One CSV row (no trailing newline) in the [`CSV_HEADER`] schema.
pub fn csv_row(experiment: &Experiment, report: &McReport) -> String {
    let mut s = String::new();
    write!(
        s,
        "{},{},{},{},{},{},{},{},{},{}",
        experiment.tag(),
        experiment.n(),
        experiment.k(),
        opt_field(experiment.p()),
        opt_field(experiment.eps()),
        report.trials,
        fmt_g(report.mean),
        fmt_g(report.std_error),
        opt_field(report.empirical_probability),
        report.seed
    )
    .expect("write to string");
    s
}
