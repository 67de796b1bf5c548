//! Reference algorithms: tabular CQL, a MOPO-style penalized planner,
//! Dyna (COMBO with `β = 0`), behavior cloning, and the optimal-policy oracle.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combo::{improve, run_combo, ComboConfig, ComboError, ComboRun, Improvement};
use crate::data::{build_empirical_mdp, Dataset, EmpiricalMdp};
use crate::mdp::{exact_policy_q, MdpError, MdpTemplate, QTable, Resolvent, TabularMdp, TabularPolicy};
use crate::model::LearnedModel;
use crate::truth::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CqlSampling {
    /// `μ = π`, the asymptotic form analysed for CQL.
    CurrentPolicy,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub beta_cql: f64,
    pub lambda_mopo: f64,
    pub f: f64,
    pub eval_tol: f64,
    pub max_eval_iters: Option<usize>,
    pub improvement: Improvement,
    pub outer_iters: usize,
    pub epsilon_pb: f64,
    pub cql_sampling: CqlSampling,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            beta_cql: 1.0,
            lambda_mopo: 1.0,
            f: 0.5,
            eval_tol: 1e-8,
            max_eval_iters: None,
            improvement: Improvement::Damped { step: 0.2 },
            outer_iters: 50,
            epsilon_pb: 1e-6,
            cql_sampling: CqlSampling::CurrentPolicy,
        }
    }
}

impl BaselineConfig {
    fn budget(&self, gamma: f64) -> usize {
        self.max_eval_iters.unwrap_or_else(|| {
            let k = libm::ceil(libm::log(1.0 / self.eval_tol) / (1.0 - gamma));
            10 * (k as usize).max(1)
        })
    }
}

/// `(μ(a|s) - π_β(a|s)) / max(π_β(a|s), ε_pb)`.
pub fn cql_penalty(policy: &TabularPolicy, behavior: &TabularPolicy, epsilon_pb: f64, sampling: CqlSampling) -> Vec<f64> {
    let na = policy.n_actions();
    policy
        .probs()
        .iter()
        .zip(behavior.probs())
        .map(|(&p, &b)| {
            let mu = match sampling {
                CqlSampling::CurrentPolicy => p,
                CqlSampling::Uniform => 1.0 / na as f64,
            };
            (mu - b) / b.max(epsilon_pb)
        })
        .collect()
}

/// Fixed point of `Q ← B^π_M̄ Q - β_cql · pen` by iteration.
pub fn cql_policy_evaluation(
    empirical: &EmpiricalMdp,
    policy: &TabularPolicy,
    behavior: &TabularPolicy,
    config: &BaselineConfig,
) -> Result<QTable, ComboError> {
    let m = &empirical.mdp;
    if policy.n_states() != m.n_states() || behavior.n_states() != m.n_states() {
        return Err(MdpError::Incompatible("policy shapes differ from the MDP".into()).into());
    }
    let pen = cql_penalty(policy, behavior, config.epsilon_pb, config.cql_sampling);
    let shifted: Vec<f64> = m
        .reward()
        .iter()
        .zip(&pen)
        .map(|(r, p)| r - config.beta_cql * p)
        .collect();
    let gamma = m.gamma();
    let stop = config.eval_tol * (1.0 - gamma);
    let budget = config.budget(gamma);
    let mut q = vec![0.0; m.n_cells()];
    let mut last = f64::INFINITY;
    let mut iters = 0;
    while iters < budget {
        let next = m.expected_next(&policy.state_average(&q));
        let mut step: f64 = 0.0;
        for i in 0..q.len() {
            let v = shifted[i] + gamma * next[i];
            step = step.max(libm::fabs(v - q[i]));
            q[i] = v;
        }
        iters += 1;
        last = step;
        if !step.is_finite() || step <= stop {
            break;
        }
    }
    if !(last <= stop) {
        return Err(ComboError::NonConvergence { iters, residual: last });
    }
    Ok(QTable::from_values(m.n_states(), m.n_actions(), q)?)
}

/// `Q^π_M̄ - β_cql S^π_M̄ [pen]`.
pub fn cql_closed_form(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    behavior: &TabularPolicy,
    config: &BaselineConfig,
) -> Result<QTable, ComboError> {
    let pen = cql_penalty(policy, behavior, config.epsilon_pb, config.cql_sampling);
    let x: Vec<f64> = mdp
        .reward()
        .iter()
        .zip(&pen)
        .map(|(r, p)| r - config.beta_cql * p)
        .collect();
    let values = Resolvent::new(mdp, policy)?.apply(&x)?;
    Ok(QTable::from_values(mdp.n_states(), mdp.n_actions(), values)?)
}

/// Alternates CQL evaluation on `M̄` with greedy improvement on dataset
/// states; `π_β` is estimated by behavior cloning.
pub fn cql_policy_optimization(
    dataset: &Dataset,
    template: &MdpTemplate,
    config: &BaselineConfig,
) -> Result<TabularPolicy, ComboError> {
    let empirical = build_empirical_mdp(dataset, template)?;
    let behavior = behavior_cloning(dataset);
    let weight: Vec<f64> = dataset.counts_s.iter().map(|&n| n as f64).collect();
    let mut policy = TabularPolicy::uniform(template.n_states, template.n_actions);
    for _ in 0..config.outer_iters {
        let q = cql_policy_evaluation(&empirical, &policy, &behavior, config)?;
        let next = improve(&q, &weight, config.improvement, &policy)?;
        if next == policy {
            break;
        }
        policy = next;
    }
    Ok(policy)
}

/// Value iteration on `M̂` with reward `r̂ - λ u`.
pub fn mopo_policy_optimization(
    model: &LearnedModel,
    uncertainty: &[f64],
    config: &BaselineConfig,
) -> Result<TabularPolicy, MdpError> {
    let m = &model.mdp;
    if uncertainty.len() != m.n_cells() {
        return Err(MdpError::Shape {
            what: "uncertainty",
            expected: m.n_cells(),
            found: uncertainty.len(),
        });
    }
    let reward = m
        .reward()
        .iter()
        .zip(uncertainty)
        .map(|(r, u)| r - config.lambda_mopo * u)
        .collect();
    let penalized = m.with_reward(reward)?;
    Ok(value_iteration_oracle(&penalized, config.eval_tol)?.0)
}

/// COMBO with `β = 0`: policy iteration on the interpolant MDP.
pub fn dyna_policy_optimization(
    dataset: &Dataset,
    template: &MdpTemplate,
    config: &ComboConfig,
    seed: u64,
    logger: Option<&dyn GroundTruth>,
) -> Result<ComboRun, ComboError> {
    let cfg = ComboConfig {
        beta: 0.0,
        ..config.clone()
    };
    run_combo(dataset, template, &cfg, seed, logger)
}

/// `N(s,a) / N(s)`, uniform on unvisited states.
pub fn behavior_cloning(dataset: &Dataset) -> TabularPolicy {
    let (ns, na) = (dataset.n_states, dataset.n_actions);
    let mut probs = vec![1.0 / na as f64; ns * na];
    for s in 0..ns {
        let n = dataset.counts_s[s];
        if n > 0 {
            for a in 0..na {
                probs[s * na + a] = dataset.counts_sa[s * na + a] as f64 / n as f64;
            }
        }
    }
    TabularPolicy::new(ns, na, probs).expect("count ratios form distributions")
}

/// First action whose value is within `tie` of the row maximum.
fn greedy_row(row: &[f64], tie: f64) -> usize {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|&v| v >= m - tie).unwrap_or(0)
}

/// Optimal policy and its exact `Q`.
///
/// Value iteration runs until the Bellman-optimality step is below
/// `tol (1 - γ)`; the greedy policy is then polished by exact policy
/// iteration so ties are broken consistently (lowest index within `1e-9`
/// relative of the maximum).
pub fn value_iteration_oracle(mdp: &TabularMdp, tol: f64) -> Result<(TabularPolicy, QTable), MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::InvalidMixture(tol));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let mut q = vec![0.0; ns * na];
    let stop = tol * (1.0 - gamma);
    let cap = 100_000;
    for _ in 0..cap {
        let v: Vec<f64> = q
            .chunks(na)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let next = mdp.expected_next(&v);
        let mut step: f64 = 0.0;
        for i in 0..q.len() {
            let nv = mdp.reward()[i] + gamma * next[i];
            step = step.max(libm::fabs(nv - q[i]));
            q[i] = nv;
        }
        if step <= stop {
            break;
        }
    }
    let scale = crate::linalg::max_abs(&q).max(1.0);
    let tie = 1e-9 * scale;
    let mut actions: Vec<usize> = q.chunks(na).map(|r| greedy_row(r, tie)).collect();
    let mut policy = TabularPolicy::deterministic(na, &actions)?;
    let mut qp = exact_policy_q(mdp, &policy)?;
    for _ in 0..ns * na + 1 {
        let mut changed = false;
        for s in 0..ns {
            let row = qp.row(s);
            let best = greedy_row(row, tie);
            if row[best] > row[actions[s]] + tie {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        policy = TabularPolicy::deterministic(na, &actions)?;
        qp = exact_policy_q(mdp, &policy)?;
    }
    // Lowest-index tie-break on the exact values.
    let final_actions: Vec<usize> = (0..ns).map(|s| greedy_row(qp.row(s), tie)).collect();
    if final_actions != actions {
        policy = TabularPolicy::deterministic(na, &final_actions)?;
        qp = exact_policy_q(mdp, &policy)?;
    }
    Ok((policy, qp))
}
