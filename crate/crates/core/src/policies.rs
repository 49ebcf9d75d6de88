//! Online allocation policies, the run loop and online randomized rounding.
//!
//! The smooth greedy policy splits the stream at `⌈m/2⌉`: decisions in the
//! second half are computed from loads accumulated since that point only.
//! Reported loads in a [`Trace`] are always the true totals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::smoothing::{best_fractional_response, single_winner_response, SmoothingParam};
use crate::types::{ArrivalOrder, Decisions, FractionalAssignment, Instance, LoadVector, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    SmoothGreedyRestart,
    GreedyLeastLoaded,
    UniformRandom,
    ExpPotential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fractional,
    Integral,
}

/// Policy selection and parameters. Only the smooth greedy policy honours
/// `mode`; the baselines are always integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub eps: f64,
    pub mode: Mode,
    pub beta: Option<f64>,
    pub opt_estimate: Option<f64>,
    pub alpha: Option<f64>,
    pub rng_seed: u64,
}

impl PolicyConfig {
    fn base(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            eps: 0.1,
            mode: Mode::Integral,
            beta: None,
            opt_estimate: None,
            alpha: None,
            rng_seed: 0,
        }
    }

    pub fn smooth_greedy(eps: f64, mode: Mode) -> Self {
        PolicyConfig {
            eps,
            mode,
            ..Self::base(PolicyKind::SmoothGreedyRestart)
        }
    }

    pub fn greedy_least_loaded() -> Self {
        Self::base(PolicyKind::GreedyLeastLoaded)
    }

    pub fn uniform_random(seed: u64) -> Self {
        PolicyConfig {
            rng_seed: seed,
            ..Self::base(PolicyKind::UniformRandom)
        }
    }

    pub fn exp_potential(beta: f64) -> Self {
        PolicyConfig {
            beta: Some(beta),
            ..Self::base(PolicyKind::ExpPotential)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn is_fractional(&self) -> bool {
        self.kind == PolicyKind::SmoothGreedyRestart && self.mode == Mode::Fractional
    }

    pub fn smoothing(&self) -> Result<SmoothingParam> {
        SmoothingParam::new(self.eps)
    }

    /// `β` for the exponential potential: explicit `beta`, else
    /// `α·ln(n)/OPT` from the estimate, else `ε`.
    pub fn resolved_beta(&self, n: usize) -> Result<f64> {
        let beta = match (self.beta, self.opt_estimate, self.alpha) {
            (Some(b), _, _) => b,
            (None, Some(opt), Some(alpha)) => {
                if !(opt > 0.0 && alpha > 0.0) {
                    return Err(Error::Config(
                        "opt_estimate and alpha must be positive".into(),
                    ));
                }
                alpha * (n as f64).ln() / opt
            }
            (None, Some(_), None) | (None, None, Some(_)) => {
                return Err(Error::Config(
                    "exp_potential needs both opt_estimate and alpha to derive beta".into(),
                ))
            }
            (None, None, None) => self.eps,
        };
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(beta)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            PolicyKind::SmoothGreedyRestart => self.smoothing().map(|_| ()),
            PolicyKind::ExpPotential => self.resolved_beta(n).map(|_| ()),
            PolicyKind::GreedyLeastLoaded | PolicyKind::UniformRandom => Ok(()),
        }
    }

    pub fn tag(&self) -> String {
        match (self.kind, self.mode) {
            (PolicyKind::SmoothGreedyRestart, Mode::Fractional) => "sgwr-frac".into(),
            (PolicyKind::SmoothGreedyRestart, Mode::Integral) => "sgwr-int".into(),
            (PolicyKind::GreedyLeastLoaded, _) => "greedy".into(),
            (PolicyKind::UniformRandom, _) => "uniform".into(),
            (PolicyKind::ExpPotential, _) => "exppot".into(),
        }
    }
}

/// Bookkeeping for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub loads_since_anchor: LoadVector,
    pub total_loads: LoadVector,
    /// 0 before the restart, `⌈m/2⌉` after.
    pub anchor: usize,
    pub t: usize,
    pub n: usize,
    pub m: usize,
}

impl PolicyState {
    pub fn new(n: usize, m: usize) -> Self {
        PolicyState {
            loads_since_anchor: LoadVector::zeros(n),
            total_loads: LoadVector::zeros(n),
            anchor: 0,
            t: 0,
            n,
            m,
        }
    }

    pub fn restart_point(&self) -> usize {
        self.m.div_ceil(2)
    }

    fn begin(&mut self, item_values: &[f64]) -> Result<()> {
        if self.t >= self.m {
            return Err(Error::Protocol(format!(
                "step {} requested on a stream of {} items",
                self.t + 1,
                self.m
            )));
        }
        check_len("item values", item_values.len(), self.n)?;
        if self.anchor == 0 && self.t == self.restart_point() {
            self.anchor = self.t;
            self.loads_since_anchor.reset();
        }
        Ok(())
    }

    fn commit(&mut self, item_values: &[f64], decision: &Decision) -> Result<()> {
        match decision {
            Decision::Fractional(x) => {
                self.loads_since_anchor
                    .add_assign_step(item_values, x.weights())?;
                self.total_loads.add_assign_step(item_values, x.weights())?;
            }
            Decision::Agent(a) => {
                self.loads_since_anchor.add_to_agent(item_values, *a)?;
                self.total_loads.add_to_agent(item_values, *a)?;
            }
        }
        self.t += 1;
        Ok(())
    }

    fn finish(
        &mut self,
        item_values: &[f64],
        decision: Decision,
        degenerate: bool,
    ) -> Result<Step> {
        self.commit(item_values, &decision)?;
        Ok(Step {
            decision,
            degenerate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Fractional(FractionalAssignment),
    Agent(usize),
}

impl Decision {
    pub fn weights(&self, n: usize) -> FractionalAssignment {
        match self {
            Decision::Fractional(x) => x.clone(),
            Decision::Agent(a) => FractionalAssignment::vertex(n, *a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub decision: Decision,
    /// The item was worthless to every agent.
    pub degenerate: bool,
}

/// One step of the smooth greedy policy with restart.
pub fn smooth_greedy_with_restart_step(
    state: &mut PolicyState,
    item_values: &[f64],
    cfg: &PolicyConfig,
) -> Result<Step> {
    let eps = cfg.smoothing()?;
    state.begin(item_values)?;
    let anchor_loads = state.loads_since_anchor.as_slice();
    let (decision, degenerate) = match cfg.mode {
        Mode::Fractional => {
            let r = best_fractional_response(anchor_loads, item_values, eps)?;
            (Decision::Fractional(r.assignment), r.degenerate)
        }
        Mode::Integral => {
            let w = single_winner_response(anchor_loads, item_values, eps)?;
            (Decision::Agent(w.agent), w.degenerate)
        }
    };
    state.finish(item_values, decision, degenerate)
}

/// Uniformly random agent, ignoring the item's values.
pub fn uniform_random_step<R: Rng + ?Sized>(
    state: &mut PolicyState,
    item_values: &[f64],
    rng: &mut R,
) -> Result<Step> {
    state.begin(item_values)?;
    let agent = rng.random_range(0..state.n);
    let degenerate = item_values.iter().all(|&v| v == 0.0);
    state.finish(item_values, Decision::Agent(agent), degenerate)
}

/// The least-loaded agent among those valuing the item (lowest index on ties).
pub fn greedy_least_loaded_step(state: &mut PolicyState, item_values: &[f64]) -> Result<Step> {
    state.begin(item_values)?;
    let loads = state.total_loads.as_slice();
    let best =
        (0..state.n)
            .filter(|&i| item_values[i] > 0.0)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if loads[b] <= loads[i] => best,
                _ => Some(i),
            });
    let (agent, degenerate) = best.map_or((0, true), |a| (a, false));
    state.finish(item_values, Decision::Agent(agent), degenerate)
}

/// `∫_c^{c+v} β e^{-βs} ds = e^{-βc}(1 - e^{-βv})`, the drop in remaining
/// potential from giving value `v` to an agent at coverage `c`.
pub fn exp_potential_reward(coverage: f64, value: f64, beta: f64) -> f64 {
    (-beta * coverage).exp() * -(-beta * value).exp_m1()
}

/// Greedy on the exponential-potential reward, using total loads.
pub fn exp_potential_step(
    state: &mut PolicyState,
    item_values: &[f64],
    cfg: &PolicyConfig,
) -> Result<Step> {
    let beta = cfg.resolved_beta(state.n)?;
    state.begin(item_values)?;
    let loads = state.total_loads.as_slice();
    // log-rewards, so large coverages do not underflow to ties
    let best = (0..state.n)
        .filter(|&i| item_values[i] > 0.0)
        .map(|i| {
            (
                i,
                -beta * loads[i] + (-(-beta * item_values[i]).exp_m1()).ln(),
            )
        })
        .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
            Some((_, br)) if br >= r => best,
            _ => Some((i, r)),
        });
    let (agent, degenerate) = best.map_or((0, true), |(a, _)| (a, false));
    state.finish(item_values, Decision::Agent(agent), degenerate)
}

/// Feeds the items through the configured policy in the given order.
pub fn run_online(instance: &Instance, order: &ArrivalOrder, cfg: &PolicyConfig) -> Result<Trace> {
    check_len("arrival order", order.len(), instance.n_items())?;
    let (n, m) = (instance.n_agents(), instance.n_items());
    cfg.validate(n)?;
    let mut state = PolicyState::new(n, m);
    let mut rng = rng::stream(cfg.rng_seed, "policy", 0);
    let mut fractional = Vec::new();
    let mut integral = Vec::new();
    let mut degenerate_steps = 0;
    for item in order.iter() {
        let values = instance.row(item);
        let step = match cfg.kind {
            PolicyKind::SmoothGreedyRestart => {
                smooth_greedy_with_restart_step(&mut state, values, cfg)?
            }
            PolicyKind::GreedyLeastLoaded => greedy_least_loaded_step(&mut state, values)?,
            PolicyKind::UniformRandom => uniform_random_step(&mut state, values, &mut rng)?,
            PolicyKind::ExpPotential => exp_potential_step(&mut state, values, cfg)?,
        };
        degenerate_steps += usize::from(step.degenerate);
        match step.decision {
            Decision::Fractional(x) => fractional.push(x),
            Decision::Agent(a) => integral.push(a),
        }
    }
    let assignments = if cfg.is_fractional() {
        Decisions::Fractional(fractional)
    } else {
        Decisions::Integral(integral)
    };
    let final_loads = state.total_loads;
    Ok(Trace {
        assignments,
        min_load: final_loads.min_load()?,
        final_loads,
        policy_tag: cfg.tag(),
        seed: cfg.rng_seed,
        degenerate_steps,
    })
}

/// Online randomized rounding: each item independently goes to agent `i`
/// with probability `x_i`, using the stream `(seed, "round", 0)`.
pub fn randomized_round(
    instance: &Instance,
    order: &ArrivalOrder,
    fractional_trace: &Trace,
    seed: u64,
) -> Result<Trace> {
    let Decisions::Fractional(xs) = &fractional_trace.assignments else {
        return Err(Error::Data("rounding needs a fractional trace".into()));
    };
    check_len("arrival order", order.len(), instance.n_items())?;
    check_len("fractional trace", xs.len(), order.len())?;
    let n = instance.n_agents();
    let mut rng = rng::stream(seed, "round", 0);
    let mut loads = LoadVector::zeros(n);
    let mut agents = Vec::with_capacity(xs.len());
    let mut degenerate_steps = 0;
    for (item, x) in order.iter().zip(xs) {
        let w = x.weights();
        check_len("assignment", w.len(), n)?;
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!(
                "assignment probabilities sum to {total}"
            )));
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut agent = n - 1 - w.iter().rev().position(|&p| p > 0.0).unwrap_or(0);
        for (i, &p) in w.iter().enumerate() {
            acc += p;
            if u < acc {
                agent = i;
                break;
            }
        }
        let values = instance.row(item);
        degenerate_steps += usize::from(values.iter().all(|&v| v == 0.0));
        loads.add_to_agent(values, agent)?;
        agents.push(agent);
    }
    Ok(Trace {
        assignments: Decisions::Integral(agents),
        min_load: loads.min_load()?,
        final_loads: loads,
        policy_tag: format!("{}+round", fractional_trace.policy_tag),
        seed,
        degenerate_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_iid, gen_public_private, make_order, IidDistribution, OrderModel};
    use crate::smoothing::smooth_min;
    use crate::types::Metadata;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_instance(n: usize, m: usize, seed: u64) -> Instance {
        let mut r = rng::stream(seed, "test-instance", 0);
        let rows = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if r.random::<f64>() < 0.2 {
                            0.0
                        } else {
                            r.random()
                        }
                    })
                    .collect()
            })
            .collect();
        Instance::new(n, rows, Metadata::family("test")).unwrap()
    }

    fn all_configs() -> Vec<PolicyConfig> {
        vec![
            PolicyConfig::smooth_greedy(0.3, Mode::Fractional),
            PolicyConfig::smooth_greedy(0.3, Mode::Integral),
            PolicyConfig::greedy_least_loaded(),
            PolicyConfig::uniform_random(17),
            PolicyConfig::exp_potential(0.5),
        ]
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = random_instance(1, 30, 2);
        let total: f64 = inst.rows().map(|r| r[0]).sum();
        let order = ArrivalOrder::identity(30);
        for cfg in all_configs() {
            let trace = run_online(&inst, &order, &cfg).unwrap();
            assert!((trace.min_load - total).abs() < 1e-12, "{}", cfg.tag());
            if let Decisions::Fractional(xs) = &trace.assignments {
                assert!(xs.iter().all(|x| x.weights() == [1.0]));
            }
        }
    }

    #[test]
    fn hand_trace_with_restart() {
        // private(1,0) then public(1,1), ε = 0.5
        let inst = gen_public_private(2, 1).unwrap();
        let order = ArrivalOrder::new(vec![0, 1]).unwrap();
        let cfg = PolicyConfig::smooth_greedy(0.5, Mode::Fractional);
        let mut state = PolicyState::new(2, 2);
        let s1 = smooth_greedy_with_restart_step(&mut state, inst.row(0), &cfg).unwrap();
        assert_eq!(
            s1.decision,
            Decision::Fractional(FractionalAssignment::vertex(2, 0))
        );
        let s2 = smooth_greedy_with_restart_step(&mut state, inst.row(1), &cfg).unwrap();
        assert_eq!(state.anchor, 1);
        let Decision::Fractional(x) = s2.decision else {
            panic!()
        };
        assert!((x.weights()[0] - 0.5).abs() < 1e-12);
        assert_eq!(state.total_loads.as_slice(), &[1.5, 0.5]);

        let trace = run_online(&inst, &order, &cfg).unwrap();
        assert_eq!(trace.final_loads.as_slice(), &[1.5, 0.5]);
        assert_eq!(trace.min_load, 0.5);

        // grid oracle for the second step from fresh zero loads
        let best_grid = (0..=100)
            .map(|j| j as f64 / 100.0)
            .map(|a| {
                (
                    a,
                    smooth_min(&[a, 1.0 - a], SmoothingParam::new(0.5).unwrap()).unwrap(),
                )
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best_grid.0, 0.5);
    }

    #[test]
    fn protocol_error_past_the_end() {
        let cfg = PolicyConfig::smooth_greedy(0.5, Mode::Fractional);
        let mut state = PolicyState::new(2, 1);
        smooth_greedy_with_restart_step(&mut state, &[1.0, 1.0], &cfg).unwrap();
        assert!(matches!(
            smooth_greedy_with_restart_step(&mut state, &[1.0, 1.0], &cfg),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            greedy_least_loaded_step(&mut state, &[1.0, 1.0]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn restart_for_odd_m_is_at_ceiling() {
        let cfg = PolicyConfig::smooth_greedy(0.5, Mode::Fractional);
        let mut state = PolicyState::new(2, 5);
        for t in 0..5 {
            smooth_greedy_with_restart_step(&mut state, &[1.0, 0.5], &cfg).unwrap();
            assert_eq!(state.anchor, if t >= 3 { 3 } else { 0 });
        }
    }

    #[test]
    fn second_half_ignores_first_half() {
        let m = 21;
        let a = random_instance(3, m, 5);
        let b = random_instance(3, m, 6);
        let half = m.div_ceil(2);
        // same second half, different first half
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|t| {
                if t < half {
                    b.row(t).to_vec()
                } else {
                    a.row(t).to_vec()
                }
            })
            .collect();
        let mixed = Instance::new(3, rows, Metadata::family("test")).unwrap();
        let order = ArrivalOrder::identity(m);
        let cfg = PolicyConfig::smooth_greedy(0.4, Mode::Fractional);
        let (Decisions::Fractional(xa), Decisions::Fractional(xb)) = (
            run_online(&a, &order, &cfg).unwrap().assignments,
            run_online(&mixed, &order, &cfg).unwrap().assignments,
        ) else {
            panic!()
        };
        assert_eq!(xa[half..], xb[half..]);
        assert_ne!(xa[..half], xb[..half]);
    }

    #[test]
    fn greedy_examples() {
        let mut st = PolicyState::new(3, 2);
        st.total_loads = LoadVector::from_vec(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            greedy_least_loaded_step(&mut st, &[1.0; 3])
                .unwrap()
                .decision,
            Decision::Agent(1)
        );

        let mut st = PolicyState::new(2, 1);
        st.total_loads = LoadVector::from_vec(vec![0.0, 5.0]).unwrap();
        assert_eq!(
            greedy_least_loaded_step(&mut st, &[0.0, 1.0])
                .unwrap()
                .decision,
            Decision::Agent(1)
        );

        let mut st = PolicyState::new(3, 1);
        assert_eq!(
            greedy_least_loaded_step(&mut st, &[0.5; 3])
                .unwrap()
                .decision,
            Decision::Agent(0)
        );

        let mut st = PolicyState::new(3, 1);
        let s = greedy_least_loaded_step(&mut st, &[0.0; 3]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.decision, Decision::Agent(0));
    }

    #[test]
    fn exp_potential_reward_matches_quadrature() {
        let beta = 0.5;
        // Simpson's rule for ∫_0^1 β e^{-βs} ds
        let steps = 1000;
        let h = 1.0 / steps as f64;
        let f = |s: f64| beta * (-beta * s).exp();
        let simpson = (0..=steps)
            .map(|j| {
                let w = if j == 0 || j == steps {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(j as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let r = exp_potential_reward(0.0, 1.0, beta);
        assert!((r - simpson).abs() < 1e-12);
        assert!((r - 0.393469).abs() < 1e-6);
    }

    #[test]
    fn exp_potential_examples() {
        let cfg = PolicyConfig::exp_potential(0.5);
        let mut st = PolicyState::new(2, 1);
        st.total_loads = LoadVector::from_vec(vec![4.0, 2.0]).unwrap();
        assert_eq!(
            exp_potential_step(&mut st, &[0.7, 0.7], &cfg)
                .unwrap()
                .decision,
            Decision::Agent(1)
        );

        let mut st = PolicyState::new(2, 1);
        st.total_loads = LoadVector::from_vec(vec![100.0, 0.0]).unwrap();
        assert_eq!(
            exp_potential_step(&mut st, &[1.0, 0.0], &cfg)
                .unwrap()
                .decision,
            Decision::Agent(0)
        );

        // far-apart coverages still rank correctly
        let mut st = PolicyState::new(2, 1);
        st.total_loads = LoadVector::from_vec(vec![5000.0, 4000.0]).unwrap();
        assert_eq!(
            exp_potential_step(&mut st, &[1.0, 0.1], &cfg)
                .unwrap()
                .decision,
            Decision::Agent(1)
        );
    }

    #[test]
    fn exp_potential_beta_resolution() {
        let mut cfg = PolicyConfig::exp_potential(-1.0);
        assert!(matches!(cfg.validate(3), Err(Error::Config(_))));
        cfg.beta = None;
        assert_eq!(cfg.resolved_beta(3).unwrap(), cfg.eps);
        cfg.opt_estimate = Some(10.0);
        assert!(cfg.resolved_beta(3).is_err());
        cfg.alpha = Some(2.0);
        assert!((cfg.resolved_beta(3).unwrap() - 2.0 * 3f64.ln() / 10.0).abs() < 1e-15);
        cfg.opt_estimate = Some(0.0);
        assert!(cfg.resolved_beta(3).is_err());
    }

    #[test]
    fn uniform_frequencies() {
        let n = 4;
        let m = 20_000;
        let dist = IidDistribution::new(vec![(1.0, vec![0.5; n])]).unwrap();
        let inst = gen_iid(n, m, &dist, 1).unwrap();
        let trace = run_online(
            &inst,
            &ArrivalOrder::identity(m),
            &PolicyConfig::uniform_random(3),
        )
        .unwrap();
        let Decisions::Integral(agents) = trace.assignments else {
            panic!()
        };
        let p = 1.0 / n as f64;
        let sigma = (m as f64 * p * (1.0 - p)).sqrt();
        for i in 0..n {
            let c = agents.iter().filter(|&&a| a == i).count() as f64;
            assert!((c - m as f64 * p).abs() < 3.0 * sigma, "agent {i}: {c}");
        }
    }

    #[test]
    fn uniform_public_agent_gets_k_over_n() {
        let inst = gen_public_private(10, 1).unwrap();
        let order = make_order(&inst, &OrderModel::PublicFirst).unwrap();
        let trials = 20_000u64;
        let total: f64 = (0..trials)
            .map(|s| {
                let t = run_online(&inst, &order, &PolicyConfig::uniform_random(s)).unwrap();
                t.final_loads.as_slice()[9]
            })
            .sum();
        let mean = total / trials as f64;
        assert!((mean - 0.1).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rounding_examples() {
        let n = 2;
        let m = 10_000;
        let dist = IidDistribution::new(vec![(1.0, vec![1.0, 1.0])]).unwrap();
        let inst = gen_iid(n, m, &dist, 0).unwrap();
        let order = ArrivalOrder::identity(m);
        let frac = |w: Vec<f64>| Trace {
            assignments: Decisions::Fractional(vec![FractionalAssignment::new(w).unwrap(); m]),
            final_loads: LoadVector::zeros(n),
            min_load: 0.0,
            policy_tag: "manual".into(),
            seed: 0,
            degenerate_steps: 0,
        };
        let r = randomized_round(&inst, &order, &frac(vec![1.0, 0.0]), 4).unwrap();
        assert_eq!(r.final_loads.as_slice(), &[m as f64, 0.0]);

        let r = randomized_round(&inst, &order, &frac(vec![0.5, 0.5]), 4).unwrap();
        let c0 = r.final_loads.as_slice()[0];
        assert!((c0 - 5000.0).abs() < 4.0 * 50.0);
        assert_eq!(r.replay(&inst, &order).unwrap(), r.final_loads);

        let integral = run_online(&inst, &order, &PolicyConfig::greedy_least_loaded()).unwrap();
        assert!(matches!(
            randomized_round(&inst, &order, &integral, 0),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn rounding_rejects_unnormalized_rows() {
        let parsed: std::result::Result<Vec<FractionalAssignment>, _> =
            serde_json::from_str("[[0.6,0.4],[0.5,0.49]]");
        assert!(parsed.is_err());
        // within 1e-9 of a probability vector is accepted
        let inst = gen_public_private(2, 1).unwrap();
        let order = ArrivalOrder::identity(2);
        let near: Vec<FractionalAssignment> =
            serde_json::from_str("[[0.6,0.4],[0.5,0.4999999999]]").unwrap();
        let trace = Trace {
            assignments: Decisions::Fractional(near),
            final_loads: LoadVector::zeros(2),
            min_load: 0.0,
            policy_tag: "manual".into(),
            seed: 0,
            degenerate_steps: 0,
        };
        assert!(randomized_round(&inst, &order, &trace, 0).is_ok());
    }

    #[test]
    fn greedy_dominance_every_step() {
        let inst = random_instance(4, 40, 9);
        let cfg = PolicyConfig::smooth_greedy(0.7, Mode::Fractional);
        let eps = cfg.smoothing().unwrap();
        let mut st = PolicyState::new(4, 40);
        for t in 0..40 {
            let v = inst.row(t);
            let step = smooth_greedy_with_restart_step(&mut st, v, &cfg).unwrap();
            let x = step.decision.weights(4);
            let after = st.loads_since_anchor.as_slice().to_vec();
            let before: Vec<f64> = (0..4).map(|i| after[i] - v[i] * x.weights()[i]).collect();
            let chosen = smooth_min(&after, eps).unwrap();
            for i in 0..4 {
                let mut alt = before.clone();
                alt[i] += v[i];
                assert!(
                    chosen >= smooth_min(&alt, eps).unwrap() - 1e-9,
                    "step {t}, vertex {i}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn replay_and_determinism(n in 1usize..5, m in 1usize..40, seed in 0u64..1000, which in 0usize..5) {
            let inst = random_instance(n, m, seed);
            let order = make_order(&inst, &OrderModel::UniformRandom { seed }).unwrap();
            let cfg = all_configs()[which].clone().with_seed(seed);
            let a = run_online(&inst, &order, &cfg).unwrap();
            let b = run_online(&inst, &order, &cfg).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            let replay = a.replay(&inst, &order).unwrap();
            for (x, y) in replay.as_slice().iter().zip(a.final_loads.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
            prop_assert_eq!(a.min_load, a.final_loads.min_load().unwrap());
            if !cfg.is_fractional() {
                prop_assert!(matches!(a.assignments, Decisions::Integral(_)));
            }
        }

        #[test]
        fn prefix_causality(n in 1usize..5, m in 2usize..30, seed in 0u64..1000, which in 0usize..5) {
            // A policy run on a truncated stream with the same m makes the
            // same decisions on the shared prefix.
            let inst = random_instance(n, m, seed);
            let other = random_instance(n, m, seed + 7);
            let cut = m / 3 + 1;
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|t| if t < cut { inst.row(t).to_vec() } else { other.row(t).to_vec() })
                .collect();
            let spliced = Instance::new(n, rows, Metadata::family("test")).unwrap();
            let order = ArrivalOrder::identity(m);
            let cfg = all_configs()[which].clone().with_seed(seed);
            let a = run_online(&inst, &order, &cfg).unwrap();
            let b = run_online(&spliced, &order, &cfg).unwrap();
            match (a.assignments, b.assignments) {
                (Decisions::Fractional(x), Decisions::Fractional(y)) => prop_assert_eq!(&x[..cut], &y[..cut]),
                (Decisions::Integral(x), Decisions::Integral(y)) => prop_assert_eq!(&x[..cut], &y[..cut]),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn loads_never_decrease(n in 1usize..5, m in 1usize..30, seed in 0u64..500) {
            let inst = random_instance(n, m, seed);
            let cfg = PolicyConfig::smooth_greedy(0.2, Mode::Fractional);
            let mut st = PolicyState::new(n, m);
            for t in 0..m {
                let before = st.total_loads.clone();
                smooth_greedy_with_restart_step(&mut st, inst.row(t), &cfg).unwrap();
                for (a, b) in before.as_slice().iter().zip(st.total_loads.as_slice()) {
                    prop_assert!(b >= a);
                }
            }
        }
    }
}
