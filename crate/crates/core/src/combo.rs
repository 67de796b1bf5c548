//! Conservative model-based evaluation and the COMBO outer loop.
//!
//! The evaluation recursion is
//!
//! ```text
//! Q^{k+1} = f B^π_M̄ Q^k + (1 - f) B^π_M̂ Q^k - β (ρ - d) / d_f
//! ```
//!
//! whose fixed point is `Q̂ = S_f^π (r_f - β pen)` on the interpolant MDP
//! `M_f`. Both the iteration and the direct solve are exposed so they can be
//! checked against each other.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{build_empirical_mdp, dataset_distribution, DataError, Dataset, EmpiricalMdp, Transition};

use crate::mdp::{
    argmax, interpolant_mdp, occupancy_from, start_value, state_action_occupancy, truncated_occupancy,
    MdpError, MdpTemplate, OccupancyMeasure, QTable, Resolvent, TabularMdp, TabularPolicy,
};
use crate::model::{fit_mle_model, LearnedModel};
use crate::rng::{derive_seed, sample_categorical, seeded};
use crate::truth::GroundTruth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComboError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("evaluation did not converge in {iters} iterations (last step {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("expected penalty ν = {0:e} is not positive; no β can enforce the bound")]
    NuNotPositive(f64),
    #[error("overestimation {over:e} cannot be removed: penalty slope {slope:e} is not positive")]
    Unattainable { over: f64, slope: f64 },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoChoice {
    /// `ρ(s,a) = d^π_M̂(s) π(a|s)`.
    ModelOccupancy,
    /// `ρ(s,a) = d_f(s) π(a|s)`.
    Df,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuChoice {
    UniformActions,
    CurrentPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Distributions computed analytically in `M̂` (untruncated).
    Exact,
    /// Distributions estimated from `h`-step model rollouts.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Improvement {
    Greedy,
    Softmax { temperature: f64 },
    /// `(1 - step) π + step · greedy(Q̂)`.
    Damped { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComboConfig {
    pub beta: f64,
    pub f: f64,
    pub rho_choice: RhoChoice,
    pub mu_choice: MuChoice,
    pub rollout_len: usize,
    pub n_rollouts: usize,
    pub solve_mode: SolveMode,
    pub eval_tol: f64,
    /// `None` means `10 ⌈ln(1/eval_tol) / (1-γ)⌉`.
    pub max_eval_iters: Option<usize>,
    pub improvement: Improvement,
    pub outer_iters: usize,
    pub epsilon_df: f64,
    /// Additive pseudo-count for the learned model.
    pub smoothing: f64,
    /// Number of trailing outer iterations averaged into the regularizer value.
    pub regularizer_window: usize,
}

impl Default for ComboConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            f: 0.5,
            rho_choice: RhoChoice::ModelOccupancy,
            mu_choice: MuChoice::CurrentPolicy,
            rollout_len: 5,
            n_rollouts: 2000,
            solve_mode: SolveMode::Exact,
            eval_tol: 1e-8,
            max_eval_iters: None,
            improvement: Improvement::Damped { step: 0.2 },
            outer_iters: 50,
            epsilon_df: 1e-8,
            smoothing: 0.0,
            regularizer_window: 1,
        }
    }
}

impl ComboConfig {
    pub fn validate(&self) -> Result<(), ComboError> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(ComboError::Config("beta must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.f) {
            return Err(ComboError::Config("f must lie in [0, 1]"));
        }
        if self.rollout_len == 0 {
            return Err(ComboError::Config("rollout_len must be at least 1"));
        }
        if self.solve_mode == SolveMode::Sampled && self.n_rollouts == 0 {
            return Err(ComboError::Config("sampled mode needs n_rollouts >= 1"));
        }
        if !(self.eval_tol > 0.0) {
            return Err(ComboError::Config("eval_tol must be positive"));
        }
        if !(self.epsilon_df > 0.0) {
            return Err(ComboError::Config("epsilon_df must be positive"));
        }
        if let Improvement::Softmax { temperature } = self.improvement {
            if !(temperature > 0.0) {
                return Err(ComboError::Config("softmax temperature must be positive"));
            }
        }
        if let Improvement::Damped { step } = self.improvement {
            if !(step > 0.0 && step <= 1.0) {
                return Err(ComboError::Config("damped step must lie in (0, 1]"));
            }
        }
        if !(self.smoothing >= 0.0) {
            return Err(ComboError::Config("smoothing must be non-negative"));
        }
        if self.regularizer_window == 0 {
            return Err(ComboError::Config("regularizer_window must be at least 1"));
        }
        Ok(())
    }

    pub fn eval_budget(&self, gamma: f64) -> usize {
        self.max_eval_iters.unwrap_or_else(|| {
            let k = libm::ceil(libm::log(1.0 / self.eval_tol) / (1.0 - gamma));
            10 * (k as usize).max(1)
        })
    }
}

/// `d_f = f d + (1 - f) d_model`.
pub fn df_mixture(data_dist: &OccupancyMeasure, model_dist: &OccupancyMeasure, f: f64) -> Result<OccupancyMeasure, MdpError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(MdpError::InvalidMixture(f));
    }
    if f == 1.0 {
        return Ok(data_dist.clone());
    }
    if f == 0.0 {
        return Ok(model_dist.clone());
    }
    let sa = data_dist
        .sa_dist
        .iter()
        .zip(&model_dist.sa_dist)
        .map(|(d, m)| f * d + (1.0 - f) * m)
        .collect();
    OccupancyMeasure::from_sa(data_dist.n_states, data_dist.n_actions, sa)
}

/// `(ρ - d) / max(d_f, ε)`, and exactly 0 where `ρ = d = 0`.
pub fn penalty_table(rho: &OccupancyMeasure, data_dist: &OccupancyMeasure, df: &OccupancyMeasure, epsilon_df: f64) -> Vec<f64> {
    rho.sa_dist
        .iter()
        .zip(&data_dist.sa_dist)
        .zip(&df.sa_dist)
        .map(|((&r, &d), &w)| {
            if r == 0.0 && d == 0.0 {
                0.0
            } else {
                (r - d) / w.max(epsilon_df)
            }
        })
        .collect()
}

fn weighted_ratio(weight: &[f64], rho: &[f64], d: &[f64], f: f64) -> f64 {
    let mut total = 0.0;
    for ((&w, &r), &dd) in weight.iter().zip(rho).zip(d) {
        if w == 0.0 || r == dd {
            continue;
        }
        let df = f * dd + (1.0 - f) * r;
        total += if df > 0.0 { w * (r - dd) / df } else { f64::INFINITY };
    }
    total
}

/// `ν(ρ, f) = E_ρ[(ρ - d) / d_f]` with `d_f = f d + (1 - f) ρ`.
pub fn nu(rho: &OccupancyMeasure, data_dist: &OccupancyMeasure, f: f64) -> f64 {
    weighted_ratio(&rho.sa_dist, &rho.sa_dist, &data_dist.sa_dist, f)
}

/// `ν̃ = E_d[(ρ - d) / d_f]`, the same penalty averaged under the data.
pub fn nu_tilde(rho: &OccupancyMeasure, data_dist: &OccupancyMeasure, f: f64) -> f64 {
    // Cells with d = 0 contribute nothing, so the infinite branch is unreachable.
    weighted_ratio(&data_dist.sa_dist, &rho.sa_dist, &data_dist.sa_dist, f)
}

/// The distributions entering the penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyInputs {
    pub rho: OccupancyMeasure,
    pub data: OccupancyMeasure,
    pub model: OccupancyMeasure,
    pub df: OccupancyMeasure,
}

fn mu_policy(mu: MuChoice, policy: &TabularPolicy) -> TabularPolicy {
    match mu {
        MuChoice::CurrentPolicy => policy.clone(),
        MuChoice::UniformActions => TabularPolicy::uniform(policy.n_states(), policy.n_actions()),
    }
}

/// Analytic `ρ`, `d^μ_M̂` and `d_f`.
pub fn exact_distributions(
    model: &LearnedModel,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
) -> Result<PenaltyInputs, ComboError> {
    let mu = mu_policy(config.mu_choice, policy);
    let model_dist = state_action_occupancy(&model.mdp, &mu)?;
    let df = df_mixture(data_dist, &model_dist, config.f)?;
    let rho = match config.rho_choice {
        RhoChoice::ModelOccupancy => {
            if config.mu_choice == MuChoice::CurrentPolicy {
                model_dist.clone()
            } else {
                state_action_occupancy(&model.mdp, policy)?
            }
        }
        RhoChoice::Df => OccupancyMeasure::from_state(&df.state_dist, policy)?,
    };
    Ok(PenaltyInputs {
        rho,
        data: data_dist.clone(),
        model: model_dist,
        df,
    })
}

/// `ρ` alone, computed analytically.
pub fn rho_distribution(
    model: &LearnedModel,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
) -> Result<OccupancyMeasure, ComboError> {
    Ok(exact_distributions(model, policy, config, data_dist)?.rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub transition: Transition,
    /// Step index within its rollout, starting at 0.
    pub step: usize,
}

/// Model-generated transitions (`D_model`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub steps: Vec<RolloutStep>,
    pub horizon: usize,
    pub start_state_source: String,
    pub rollout_policy_id: String,
    pub n_states: usize,
    pub n_actions: usize,
}

impl RolloutBuffer {
    /// `γ^t`-weighted, normalized visitation frequency.
    pub fn occupancy(&self, gamma: f64) -> Result<OccupancyMeasure, MdpError> {
        let mut pow = vec![1.0; self.horizon.max(1)];
        for t in 1..pow.len() {
            pow[t] = pow[t - 1] * gamma;
        }
        let mut w = vec![0.0; self.n_states * self.n_actions];
        for st in &self.steps {
            w[st.transition.s * self.n_actions + st.transition.a] += pow[st.step];
        }
        OccupancyMeasure::from_weights(self.n_states, self.n_actions, w)
    }
}

/// `n_rollouts` rollouts of length `h` in `M̂`, each starting from the state
/// of a uniformly drawn dataset transition.
pub fn generate_model_rollouts(
    model: &LearnedModel,
    dataset: &Dataset,
    rollout_policy: &TabularPolicy,
    h: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<RolloutBuffer, ComboError> {
    if h == 0 {
        return Err(ComboError::Config("rollout length must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(DataError::Empty.into());
    }
    let m = &model.mdp;
    let mut rng = seeded(seed);
    let mut steps = Vec::with_capacity(h * n_rollouts);
    for _ in 0..n_rollouts {
        let pick = rand::Rng::random_range(&mut rng, 0..dataset.len());
        let mut s = dataset.transitions[pick].s;
        for step in 0..h {
            let a = sample_categorical(&mut rng, rollout_policy.row(s));
            let s_next = sample_categorical(&mut rng, m.transition_row(s, a));
            steps.push(RolloutStep {
                transition: Transition {
                    s,
                    a,
                    r: m.r(s, a),
                    s_next,
                },
                step,
            });
            s = s_next;
        }
    }
    Ok(RolloutBuffer {
        steps,
        horizon: h,
        start_state_source: "dataset".into(),
        rollout_policy_id: crate::digest::Fingerprint::new().f64s(rollout_policy.probs()).hex(),
        n_states: m.n_states(),
        n_actions: m.n_actions(),
    })
}

/// `ρ`, `d^μ_M̂`, `d_f` estimated from model rollouts. When `μ` is uniform a
/// second buffer under `π` supplies the state marginal of `ρ`.
pub fn sampled_distributions(
    model: &LearnedModel,
    dataset: &Dataset,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
    seed: u64,
) -> Result<PenaltyInputs, ComboError> {
    let gamma = model.mdp.gamma();
    let mu = mu_policy(config.mu_choice, policy);
    let buf = generate_model_rollouts(model, dataset, &mu, config.rollout_len, config.n_rollouts, derive_seed(seed, 0))?;
    let model_dist = buf.occupancy(gamma)?;
    let df = df_mixture(data_dist, &model_dist, config.f)?;
    let rho = match config.rho_choice {
        RhoChoice::ModelOccupancy => {
            let state = if config.mu_choice == MuChoice::CurrentPolicy {
                model_dist.state_dist.clone()
            } else {
                let pb = generate_model_rollouts(model, dataset, policy, config.rollout_len, config.n_rollouts, derive_seed(seed, 1))?;
                pb.occupancy(gamma)?.state_dist
            };
            OccupancyMeasure::from_state(&state, policy)?
        }
        RhoChoice::Df => OccupancyMeasure::from_state(&df.state_dist, policy)?,
    };
    Ok(PenaltyInputs {
        rho,
        data: data_dist.clone(),
        model: model_dist,
        df,
    })
}

/// Truncated analytic counterpart of [`RolloutBuffer::occupancy`].
pub fn rollout_reference_occupancy(
    model: &LearnedModel,
    dataset: &Dataset,
    rollout_policy: &TabularPolicy,
    h: usize,
) -> Result<OccupancyMeasure, ComboError> {
    let total = dataset.len() as f64;
    let start: Vec<f64> = dataset.counts_s.iter().map(|&n| n as f64 / total).collect();
    Ok(truncated_occupancy(&model.mdp, rollout_policy, &start, h)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboSolveResult {
    pub q: QTable,
    pub penalty: Vec<f64>,
    /// `E_ρ[penalty]` with the `d_f` actually used.
    pub nu_value: f64,
    pub iters_used: usize,
    pub converged: bool,
    /// `‖Q^{k+1} - Q^k‖_∞` at exit.
    pub last_step: f64,
    pub rho_used: OccupancyMeasure,
    pub df_used: OccupancyMeasure,
    pub data_dist: OccupancyMeasure,
}

impl ComboSolveResult {
    /// `E_ρ[Q̂] - E_d[Q̂]`.
    pub fn regularizer(&self) -> f64 {
        self.rho_used.expectation(&self.q.values) - self.data_dist.expectation(&self.q.values)
    }
}

fn check_pair(empirical: &EmpiricalMdp, model: &LearnedModel, policy: &TabularPolicy) -> Result<(), ComboError> {
    let (a, b) = (&empirical.mdp, &model.mdp);
    if a.n_states() != b.n_states() || a.n_actions() != b.n_actions() {
        return Err(MdpError::Incompatible("empirical and model shapes differ".into()).into());
    }
    if policy.n_states() != a.n_states() || policy.n_actions() != a.n_actions() {
        return Err(MdpError::Incompatible("policy shape differs from the MDPs".into()).into());
    }
    if a.gamma() != b.gamma() {
        return Err(MdpError::Incompatible("discounts differ".into()).into());
    }
    Ok(())
}

/// Runs the recursion to `‖Δ‖_∞ ≤ eval_tol (1 - γ)` with the given distributions.
pub fn evaluate_with_distributions(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    dists: &PenaltyInputs,
    config: &ComboConfig,
) -> Result<ComboSolveResult, ComboError> {
    config.validate()?;
    check_pair(empirical, model, policy)?;
    let (mbar, mhat) = (&empirical.mdp, &model.mdp);
    let gamma = mbar.gamma();
    let f = config.f;
    let penalty = penalty_table(&dists.rho, &dists.data, &dists.df, config.epsilon_df);
    let shifted: Vec<f64> = mbar
        .reward()
        .iter()
        .zip(mhat.reward())
        .zip(&penalty)
        .map(|((rb, rh), p)| f * rb + (1.0 - f) * rh - config.beta * p)
        .collect();

    let budget = config.eval_budget(gamma);
    let stop = config.eval_tol * (1.0 - gamma);
    let mut q = vec![0.0; mbar.n_cells()];
    let mut last_step = f64::INFINITY;
    let mut iters = 0;
    while iters < budget {
        let v = policy.state_average(&q);
        let nb = mbar.expected_next(&v);
        let nh = mhat.expected_next(&v);
        let mut step: f64 = 0.0;
        for i in 0..q.len() {
            let next = shifted[i] + gamma * (f * nb[i] + (1.0 - f) * nh[i]);
            step = step.max(libm::fabs(next - q[i]));
            q[i] = next;
        }
        iters += 1;
        last_step = step;
        if !step.is_finite() || step <= stop {
            break;
        }
    }
    if !(last_step <= stop) {
        return Err(ComboError::NonConvergence {
            iters,
            residual: last_step,
        });
    }
    let nu_value = dists.rho.expectation(&penalty);
    Ok(ComboSolveResult {
        q: QTable::from_values(mbar.n_states(), mbar.n_actions(), q)?,
        penalty,
        nu_value,
        iters_used: iters,
        converged: true,
        last_step,
        rho_used: dists.rho.clone(),
        df_used: dists.df.clone(),
        data_dist: dists.data.clone(),
    })
}

/// Exact-mode evaluation: distributions are computed analytically first.
pub fn combo_policy_evaluation(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    data_dist: &OccupancyMeasure,
    config: &ComboConfig,
) -> Result<ComboSolveResult, ComboError> {
    config.validate()?;
    if config.solve_mode != SolveMode::Exact {
        return Err(ComboError::Config(
            "sampled mode needs a rollout buffer; use sampled_distributions with evaluate_with_distributions",
        ));
    }
    let dists = exact_distributions(model, policy, config, data_dist)?;
    evaluate_with_distributions(empirical, model, policy, &dists, config)
}

/// `S_f^π x` on `M_f = interpolant(M̄, M̂, f)`.
pub fn interpolant_resolvent_apply(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    f: f64,
    x: &[f64],
) -> Result<Vec<f64>, ComboError> {
    let mf = interpolant_mdp(&empirical.mdp, &model.mdp, f)?;
    Ok(Resolvent::new(&mf, policy)?.apply(x)?)
}

/// Direct solve `Q̂ = S_f^π (r_f - β pen)`.
pub fn closed_form_q(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    penalty: &[f64],
    f: f64,
    beta: f64,
) -> Result<QTable, ComboError> {
    let mf = interpolant_mdp(&empirical.mdp, &model.mdp, f)?;
    let x: Vec<f64> = mf
        .reward()
        .iter()
        .zip(penalty)
        .map(|(r, p)| r - beta * p)
        .collect();
    let values = Resolvent::new(&mf, policy)?.apply(&x)?;
    Ok(QTable::from_values(mf.n_states(), mf.n_actions(), values)?)
}

/// One improvement step. States with `ρ(s) = 0` keep `previous`'s row.
pub fn combo_policy_improvement(
    result: &ComboSolveResult,
    config: &ComboConfig,
    previous: &TabularPolicy,
) -> Result<TabularPolicy, MdpError> {
    improve(&result.q, &result.rho_used.state_dist, config.improvement, previous)
}

pub(crate) fn improve(
    q: &QTable,
    state_weight: &[f64],
    rule: Improvement,
    previous: &TabularPolicy,
) -> Result<TabularPolicy, MdpError> {
    let na = q.n_actions;
    let mut probs = previous.probs().to_vec();
    for s in 0..q.n_states {
        if state_weight[s] <= 0.0 {
            continue;
        }
        let row = q.row(s);
        let out = &mut probs[s * na..(s + 1) * na];
        match rule {
            Improvement::Greedy => {
                out.fill(0.0);
                out[argmax(row)] = 1.0;
            }
            Improvement::Damped { step } => {
                let best = argmax(row);
                for (a, o) in out.iter_mut().enumerate() {
                    *o = (1.0 - step) * *o + if a == best { step } else { 0.0 };
                }
            }
            Improvement::Softmax { temperature } => {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for (o, &v) in out.iter_mut().zip(row) {
                    *o = libm::exp((v - m) / temperature);
                    z += *o;
                }
                for o in out.iter_mut() {
                    *o /= z;
                }
            }
        }
    }
    TabularPolicy::new(q.n_states, na, probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboIteration {
    pub solve: ComboSolveResult,
    pub regularizer: f64,
    /// `J(π, M)` of the evaluated policy, when an evaluator was supplied.
    pub true_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboRun {
    pub policy: TabularPolicy,
    pub iterations: Vec<ComboIteration>,
    pub model: LearnedModel,
}

impl ComboRun {
    /// Regularizer averaged over the last `window` evaluations.
    pub fn regularizer(&self, window: usize) -> Option<f64> {
        if self.iterations.is_empty() {
            return None;
        }
        let k = window.clamp(1, self.iterations.len());
        let tail = &self.iterations[self.iterations.len() - k..];
        Some(tail.iter().map(|it| it.regularizer).sum::<f64>() / k as f64)
    }
}

/// Fits `M̂` and `M̄` from the data and runs the outer loop.
///
/// Only the template of the true MDP is needed; `logger`, if given, is used
/// solely to record `J(π, M)` after each evaluation.
pub fn run_combo(
    dataset: &Dataset,
    template: &MdpTemplate,
    config: &ComboConfig,
    seed: u64,
    logger: Option<&dyn GroundTruth>,
) -> Result<ComboRun, ComboError> {
    config.validate()?;
    let model = fit_mle_model(dataset, template, config.smoothing)?;
    run_combo_with_model(dataset, template, model, config, seed, logger)
}

/// As [`run_combo`] with a caller-supplied model (e.g. deliberately biased).
pub fn run_combo_with_model(
    dataset: &Dataset,
    template: &MdpTemplate,
    model: LearnedModel,
    config: &ComboConfig,
    seed: u64,
    logger: Option<&dyn GroundTruth>,
) -> Result<ComboRun, ComboError> {
    config.validate()?;
    let empirical = build_empirical_mdp(dataset, template)?;
    let data_dist = dataset_distribution(dataset)?;
    let mut policy = TabularPolicy::uniform(template.n_states, template.n_actions);
    let mut iterations = Vec::new();
    for i in 0..config.outer_iters {
        let dists = match config.solve_mode {
            SolveMode::Exact => exact_distributions(&model, &policy, config, &data_dist)?,
            SolveMode::Sampled => {
                sampled_distributions(&model, dataset, &policy, config, &data_dist, derive_seed(seed, i as u64))?
            }
        };
        let solve = evaluate_with_distributions(&empirical, &model, &policy, &dists, config)?;
        let regularizer = solve.regularizer();
        let true_return = logger.map(|t| t.true_return(&policy));
        let next = combo_policy_improvement(&solve, config, &policy)?;
        iterations.push(ComboIteration {
            solve,
            regularizer,
            true_return,
        });
        let fixed = next == policy;
        policy = next;
        if fixed && config.solve_mode == SolveMode::Exact {
            break;
        }
    }
    Ok(ComboRun {
        policy,
        iterations,
        model,
    })
}

/// Smallest `β` beyond which `E_{μ0,π}[Q̂_β] ≤ E_{μ0,π}[Q^π]`.
///
/// `Q̂_β = Q̂_0 - β S_f^π pen`, so the start-state expectation is affine in
/// `β` with slope `-g`, `g = E_{μ0,π}[S_f^π pen]`, and
/// `β* = max(0, (E[Q̂_0] - E[Q^π]) / g)` is exact.
pub fn compute_min_beta(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    truth: &TabularMdp,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
) -> Result<MinBeta, ComboError> {
    config.validate()?;
    let dists = exact_distributions(model, policy, config, data_dist)?;
    let penalty = penalty_table(&dists.rho, &dists.data, &dists.df, config.epsilon_df);
    let nu_value = dists.rho.expectation(&penalty);
    let q0 = closed_form_q(empirical, model, policy, &penalty, config.f, 0.0)?;
    let q_true = crate::mdp::exact_policy_q(truth, policy)?;
    let mu0 = truth.init_dist();
    let over = start_value(mu0, policy, &q0.values) - start_value(mu0, policy, &q_true.values);
    let spen = interpolant_resolvent_apply(empirical, model, policy, config.f, &penalty)?;
    let slope = start_value(mu0, policy, &spen);
    if !(nu_value > 0.0) {
        return Err(ComboError::NuNotPositive(nu_value));
    }
    if !(slope > 0.0) {
        return Err(ComboError::Unattainable { over, slope });
    }
    Ok(MinBeta {
        beta_star: (over / slope).max(0.0),
        overestimation: over,
        slope,
        nu_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinBeta {
    pub beta_star: f64,
    /// `E[Q̂_0] - E[Q^π]` under `μ0, π`.
    pub overestimation: f64,
    /// `E_{μ0,π}[S_f^π pen]`.
    pub slope: f64,
    pub nu_value: f64,
}

/// Occupancy-weighted state distribution of `π` in `M̂` from the dataset's
/// state marginal, used by the sampled-mode tests.
pub fn dataset_start_occupancy(model: &LearnedModel, dataset: &Dataset, policy: &TabularPolicy) -> Result<OccupancyMeasure, ComboError> {
    let total = dataset.len() as f64;
    let start: Vec<f64> = dataset.counts_s.iter().map(|&n| n as f64 / total).collect();
    Ok(occupancy_from(&model.mdp, policy, &start)?)
}
