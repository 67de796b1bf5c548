//! Finite MDPs, tabular policies, and exact dynamic programming.
//!
//! Everything here is the ground truth the rest of the crate is checked
//! against: policy evaluation goes through a direct solve of
//! `(I - γ P^π) V = r^π`, occupancy measures through the transposed system,
//! and the Bellman operator is applied exactly.
//!
//! Storage is flat and row-major: `dynamics[(s * n_actions + a) * n_states + s']`
//! and `reward[s * n_actions + a]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Lu, Matrix};
use crate::rng::{sample_categorical, seeded};

/// Tolerance for row sums of probability tables at construction.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance for the total mass of an occupancy measure.
pub const OCCUPANCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("MDP must have at least one state and one action")]
    Empty,
    #[error("{what}: expected length {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} row {row} is not a distribution (sum {sum}, min {min})")]
    NotDistribution {
        what: &'static str,
        row: usize,
        sum: f64,
        min: f64,
    },
    #[error("reward r[{s}][{a}] = {value} exceeds r_max = {r_max}")]
    RewardOutOfBounds {
        s: usize,
        a: usize,
        value: f64,
        r_max: f64,
    },
    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("mixture weight must lie in [0, 1], got {0}")]
    InvalidMixture(f64),
    #[error("incompatible MDPs: {0}")]
    Incompatible(String),
    #[error("linear solve failed: singular system")]
    Singular,
    #[error("internal error: Bellman residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
}

fn check_distribution(what: &'static str, row: usize, p: &[f64]) -> Result<(), MdpError> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= 0.0) || !(libm::fabs(sum - 1.0) <= PROB_TOL) || p.iter().any(|x| !x.is_finite()) {
        return Err(MdpError::NotDistribution { what, row, sum, min });
    }
    Ok(())
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), MdpError> {
    if expected != found {
        return Err(MdpError::Shape {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// The parts of an MDP an offline algorithm is allowed to know: shapes,
/// discount, start distribution and the reward bound. No dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpTemplate {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub init_dist: Vec<f64>,
    pub r_max: f64,
}

/// A finite MDP `(S, A, P, r, μ0, γ)` with reward bound `r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    dynamics: Vec<f64>,
    reward: Vec<f64>,
    r_max: f64,
    init_dist: Vec<f64>,
    gamma: f64,
}

#[derive(Deserialize)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    dynamics: Vec<f64>,
    reward: Vec<f64>,
    r_max: f64,
    init_dist: Vec<f64>,
    gamma: f64,
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = MdpError;
    fn try_from(r: RawMdp) -> Result<Self, MdpError> {
        TabularMdp::new(
            r.n_states,
            r.n_actions,
            r.dynamics,
            r.reward,
            r.r_max,
            r.init_dist,
            r.gamma,
        )
    }
}

impl TabularMdp {
    /// Validates and builds an MDP. Probabilities are never renormalized:
    /// a row that is off by more than [`PROB_TOL`] is an error.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        dynamics: Vec<f64>,
        reward: Vec<f64>,
        r_max: f64,
        init_dist: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::Empty);
        }
        check_len("dynamics", n_states * n_actions * n_states, dynamics.len())?;
        check_len("reward", n_states * n_actions, reward.len())?;
        check_len("init_dist", n_states, init_dist.len())?;
        if !(gamma >= 0.0 && gamma < 1.0) {
            return Err(MdpError::InvalidDiscount(gamma));
        }
        for (row, p) in dynamics.chunks(n_states).enumerate() {
            check_distribution("dynamics", row, p)?;
        }
        check_distribution("init_dist", 0, &init_dist)?;
        for (i, &r) in reward.iter().enumerate() {
            if !r.is_finite() || libm::fabs(r) > r_max {
                return Err(MdpError::RewardOutOfBounds {
                    s: i / n_actions,
                    a: i % n_actions,
                    value: r,
                    r_max,
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            dynamics,
            reward,
            r_max,
            init_dist,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn n_cells(&self) -> usize {
        self.n_states * self.n_actions
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }
    pub fn dynamics(&self) -> &[f64] {
        &self.dynamics
    }
    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.dynamics[start..start + self.n_states]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn template(&self) -> MdpTemplate {
        MdpTemplate {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            init_dist: self.init_dist.clone(),
            r_max: self.r_max,
        }
    }

    /// SHA-256 over shapes and the exact bits of every table.
    pub fn digest(&self) -> String {
        crate::digest::Fingerprint::new()
            .tag("tabular-mdp")
            .u64(self.n_states as u64)
            .u64(self.n_actions as u64)
            .f64s(&self.dynamics)
            .f64s(&self.reward)
            .f64s(&[self.r_max, self.gamma])
            .f64s(&self.init_dist)
            .hex()
    }

    /// Same dynamics, new reward table. `r_max` grows if needed.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self, MdpError> {
        let r_max = reward
            .iter()
            .map(|r| libm::fabs(*r))
            .fold(self.r_max, f64::max);
        Self::new(
            self.n_states,
            self.n_actions,
            self.dynamics.clone(),
            reward,
            r_max,
            self.init_dist.clone(),
            self.gamma,
        )
    }

    /// Same MDP with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, MdpError> {
        let mut m = self.clone();
        if !(gamma >= 0.0 && gamma < 1.0) {
            return Err(MdpError::InvalidDiscount(gamma));
        }
        m.gamma = gamma;
        Ok(m)
    }

    pub fn with_init_dist(&self, init_dist: Vec<f64>) -> Result<Self, MdpError> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.dynamics.clone(),
            self.reward.clone(),
            self.r_max,
            init_dist,
            self.gamma,
        )
    }

    fn check_policy(&self, policy: &TabularPolicy) -> Result<(), MdpError> {
        check_len("policy states", self.n_states, policy.n_states)?;
        check_len("policy actions", self.n_actions, policy.n_actions)
    }

    /// State-to-state transition matrix under `policy`.
    pub fn policy_transition(&self, policy: &TabularPolicy) -> Matrix {
        let n = self.n_states;
        let mut m = Matrix::zeros(n);
        for s in 0..n {
            for a in 0..self.n_actions {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (s2, &p) in self.transition_row(s, a).iter().enumerate() {
                    if p != 0.0 {
                        m.add(s, s2, pa * p);
                    }
                }
            }
        }
        m
    }

    /// `Σ_{s'} P(s'|s,a) v(s')` for every cell.
    pub fn expected_next(&self, v: &[f64]) -> Vec<f64> {
        self.dynamics
            .chunks(self.n_states)
            .map(|row| linalg::dot(row, v))
            .collect()
    }
}

/// Row-stochastic action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TryFrom<RawPolicy> for TabularPolicy {
    type Error = MdpError;
    fn try_from(r: RawPolicy) -> Result<Self, MdpError> {
        TabularPolicy::new(r.n_states, r.n_actions, r.probs)
    }
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::Empty);
        }
        check_len("policy", n_states * n_actions, probs.len())?;
        for (row, p) in probs.chunks(n_actions).enumerate() {
            check_distribution("policy", row, p)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Point mass on `actions[s]` in every state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self, MdpError> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(MdpError::Shape {
                    what: "action index",
                    expected: n_actions,
                    found: a,
                });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Convex combination `w * self + (1 - w) * other`, row by row.
    pub fn mix(&self, other: &TabularPolicy, w: f64) -> Result<Self, MdpError> {
        check_len("policy states", self.n_states, other.n_states)?;
        check_len("policy actions", self.n_actions, other.n_actions)?;
        if !(0.0..=1.0).contains(&w) {
            return Err(MdpError::InvalidMixture(w));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        Self::new(self.n_states, self.n_actions, probs)
    }

    /// `Σ_a π(a|s) x(s,a)` for every state.
    pub fn state_average(&self, x: &[f64]) -> Vec<f64> {
        self.probs
            .chunks(self.n_actions)
            .zip(x.chunks(self.n_actions))
            .map(|(p, v)| linalg::dot(p, v))
            .collect()
    }

    /// Action with the largest probability in each state (lowest index on ties).
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs.chunks(self.n_actions).map(argmax).collect()
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A Q-function over `(s, a)` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self, MdpError> {
        check_len("q table", n_states * n_actions, values.len())?;
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        linalg::max_abs_diff(&self.values, &other.values)
    }
}

/// Normalized distribution over `(s, a)` with its state marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub n_states: usize,
    pub n_actions: usize,
    pub sa_dist: Vec<f64>,
    pub state_dist: Vec<f64>,
}

impl OccupancyMeasure {
    /// Builds from a state-action table. Negative round-off above `-1e-12`
    /// is clamped to zero; anything else is rejected.
    pub fn from_sa(n_states: usize, n_actions: usize, mut sa: Vec<f64>) -> Result<Self, MdpError> {
        check_len("occupancy", n_states * n_actions, sa.len())?;
        for v in sa.iter_mut() {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }
        let sum: f64 = sa.iter().sum();
        let min = sa.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= 0.0) || !(libm::fabs(sum - 1.0) <= OCCUPANCY_TOL) {
            return Err(MdpError::NotDistribution {
                what: "occupancy",
                row: 0,
                sum,
                min,
            });
        }
        let state_dist = sa.chunks(n_actions).map(|r| r.iter().sum()).collect();
        Ok(Self {
            n_states,
            n_actions,
            sa_dist: sa,
            state_dist,
        })
    }

    /// `d(s,a) = d(s) π(a|s)`.
    pub fn from_state(state: &[f64], policy: &TabularPolicy) -> Result<Self, MdpError> {
        check_len("occupancy states", policy.n_states, state.len())?;
        let n_actions = policy.n_actions;
        let mut sa = vec![0.0; state.len() * n_actions];
        for (s, &ds) in state.iter().enumerate() {
            for a in 0..n_actions {
                sa[s * n_actions + a] = ds * policy.prob(s, a);
            }
        }
        Self::from_sa(state.len(), n_actions, sa)
    }

    /// Normalizes a nonnegative weight table.
    pub fn from_weights(n_states: usize, n_actions: usize, w: Vec<f64>) -> Result<Self, MdpError> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(MdpError::NotDistribution {
                what: "occupancy weights",
                row: 0,
                sum: total,
                min: 0.0,
            });
        }
        Self::from_sa(n_states, n_actions, w.into_iter().map(|x| x / total).collect())
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.sa_dist[s * self.n_actions + a]
    }

    pub fn expectation(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.sa_dist, x)
    }

    pub fn support(&self) -> Vec<bool> {
        self.sa_dist.iter().map(|&p| p > 0.0).collect()
    }

    pub fn tv(&self, other: &OccupancyMeasure) -> f64 {
        0.5 * self
            .sa_dist
            .iter()
            .zip(&other.sa_dist)
            .map(|(a, b)| libm::fabs(a - b))
            .sum::<f64>()
    }
}

/// Cached factorization of `I - γ P^π` for one `(mdp, policy)` pair.
///
/// `apply` evaluates the state-action resolvent `S^π x = (I - γ P^π)^{-1} x`
/// through the `|S| x |S|` system, which is equivalent to the
/// `|S||A|`-dimensional one but cheaper.
pub struct Resolvent<'a> {
    mdp: &'a TabularMdp,
    policy: &'a TabularPolicy,
    lu: Lu,
}

impl<'a> Resolvent<'a> {
    pub fn new(mdp: &'a TabularMdp, policy: &'a TabularPolicy) -> Result<Self, MdpError> {
        mdp.check_policy(policy)?;
        let p = mdp.policy_transition(policy);
        let n = mdp.n_states;
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a.add(i, j, -mdp.gamma * p.get(i, j));
            }
        }
        let lu = a.lu().ok_or(MdpError::Singular)?;
        Ok(Self { mdp, policy, lu })
    }

    /// `(S^π x)(s,a)` for a state-action vector `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, MdpError> {
        check_len("resolvent input", self.mdp.n_cells(), x.len())?;
        let w = self.lu.solve(&self.policy.state_average(x));
        let next = self.mdp.expected_next(&w);
        Ok(x.iter()
            .zip(next)
            .map(|(xi, n)| xi + self.mdp.gamma * n)
            .collect())
    }

    /// Normalized discounted state distribution from `start`:
    /// `(1-γ) startᵀ (I - γ P_π)^{-1}`.
    pub fn state_occupancy(&self, start: &[f64]) -> Result<Vec<f64>, MdpError> {
        check_len("start distribution", self.mdp.n_states, start.len())?;
        let z = self.lu.solve_transpose(start);
        Ok(z.into_iter().map(|v| (1.0 - self.mdp.gamma) * v).collect())
    }
}

/// `Q^π` by direct solve, checked against the Bellman residual.
pub fn exact_policy_q(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<QTable, MdpError> {
    let res = Resolvent::new(mdp, policy)?;
    let values = res.apply(&mdp.reward)?;
    let q = QTable {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        values,
    };
    let backed = bellman_backup(mdp, policy, &q)?;
    let residual = q.max_abs_diff(&backed);
    let scale = linalg::max_abs(&q.values).max(1.0);
    if !(residual <= 1e-10 * scale) {
        return Err(MdpError::Residual { residual });
    }
    Ok(q)
}

/// `V^π(s) = Σ_a π(a|s) Q^π(s,a)`.
pub fn exact_policy_v(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>, MdpError> {
    Ok(policy.state_average(&exact_policy_q(mdp, policy)?.values))
}

/// One exact application of `B^π`.
pub fn bellman_backup(mdp: &TabularMdp, policy: &TabularPolicy, q: &QTable) -> Result<QTable, MdpError> {
    mdp.check_policy(policy)?;
    check_len("q table", mdp.n_cells(), q.values.len())?;
    let v = policy.state_average(&q.values);
    let next = mdp.expected_next(&v);
    let values = mdp
        .reward
        .iter()
        .zip(next)
        .map(|(r, n)| r + mdp.gamma * n)
        .collect();
    Ok(QTable {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        values,
    })
}

/// Discounted state-action occupancy `d^π(s,a)` from `μ0`.
pub fn state_action_occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<OccupancyMeasure, MdpError> {
    occupancy_from(mdp, policy, &mdp.init_dist)
}

/// Discounted occupancy from an arbitrary start distribution.
pub fn occupancy_from(mdp: &TabularMdp, policy: &TabularPolicy, start: &[f64]) -> Result<OccupancyMeasure, MdpError> {
    let res = Resolvent::new(mdp, policy)?;
    let state = res.state_occupancy(start)?;
    OccupancyMeasure::from_state(&state, policy)
}

/// Discounted occupancy of the first `horizon` steps from `start`,
/// renormalized by `Σ_{t<h} γ^t`.
pub fn truncated_occupancy(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    start: &[f64],
    horizon: usize,
) -> Result<OccupancyMeasure, MdpError> {
    mdp.check_policy(policy)?;
    check_len("start distribution", mdp.n_states, start.len())?;
    let p = mdp.policy_transition(policy);
    let pt = p.transpose();
    let mut state = vec![0.0; mdp.n_states];
    let mut current = start.to_vec();
    let mut weight = 1.0;
    for _ in 0..horizon {
        for (acc, c) in state.iter_mut().zip(&current) {
            *acc += weight * c;
        }
        current = pt.mul_vec(&current);
        weight *= mdp.gamma;
    }
    let total: f64 = state.iter().sum();
    let state: Vec<f64> = state.into_iter().map(|v| v / total).collect();
    OccupancyMeasure::from_state(&state, policy)
}

/// Monte Carlo estimate of the discounted occupancy: each rollout of
/// `horizon` steps contributes `(1-γ) γ^t` to the visited cell.
/// Only used to cross-check [`state_action_occupancy`].
pub fn monte_carlo_occupancy(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<OccupancyMeasure, MdpError> {
    mdp.check_policy(policy)?;
    let mut rng = seeded(seed);
    let mut w = vec![0.0; mdp.n_cells()];
    for _ in 0..n_rollouts {
        let mut s = sample_categorical(&mut rng, &mdp.init_dist);
        let mut disc = 1.0;
        for _ in 0..horizon {
            let a = sample_categorical(&mut rng, policy.row(s));
            w[s * mdp.n_actions + a] += disc;
            disc *= mdp.gamma;
            s = sample_categorical(&mut rng, mdp.transition_row(s, a));
        }
    }
    OccupancyMeasure::from_weights(mdp.n_states, mdp.n_actions, w)
}

/// `J(π) = (1/(1-γ)) E_{d^π}[r]`.
pub fn policy_return(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64, MdpError> {
    let d = state_action_occupancy(mdp, policy)?;
    Ok(d.expectation(&mdp.reward) / (1.0 - mdp.gamma))
}

/// `E_{s~start, a~π}[q(s,a)]`.
pub fn start_value(start: &[f64], policy: &TabularPolicy, q: &[f64]) -> f64 {
    linalg::dot(start, &policy.state_average(q))
}

/// Total variation `½ Σ |p - q|`.
pub fn tv_divergence(p: &[f64], q: &[f64]) -> Result<f64, MdpError> {
    check_len("tv operand", p.len(), q.len())?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>())
}

/// `M_f` with `P_f = f P₁ + (1-f) P₂` and `r_f = f r₁ + (1-f) r₂`.
pub fn interpolant_mdp(m1: &TabularMdp, m2: &TabularMdp, f: f64) -> Result<TabularMdp, MdpError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(MdpError::InvalidMixture(f));
    }
    if m1.n_states != m2.n_states || m1.n_actions != m2.n_actions {
        return Err(MdpError::Incompatible("state/action shapes differ".into()));
    }
    if m1.gamma != m2.gamma {
        return Err(MdpError::Incompatible("discounts differ".into()));
    }
    if m1.init_dist != m2.init_dist {
        return Err(MdpError::Incompatible("start distributions differ".into()));
    }
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        if f == 1.0 {
            a.to_vec()
        } else if f == 0.0 {
            b.to_vec()
        } else {
            a.iter().zip(b).map(|(x, y)| f * x + (1.0 - f) * y).collect()
        }
    };
    TabularMdp::new(
        m1.n_states,
        m1.n_actions,
        mix(&m1.dynamics, &m2.dynamics),
        mix(&m1.reward, &m2.reward),
        m1.r_max.max(m2.r_max),
        m1.init_dist.clone(),
        m1.gamma,
    )
}
