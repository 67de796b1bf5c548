//! The learned model `M̂`: count-based MLE with optional additive smoothing,
//! plus controlled corruption for robustness studies.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{count_tables, DataError, Dataset};
use crate::mdp::{tv_divergence, MdpError, MdpTemplate, TabularMdp};
use crate::rng::{dirichlet_ones, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasSpec {
    /// Each row mixed with a seeded Dirichlet(1) row.
    DynamicsNoise { magnitude: f64, seed: u64 },
    /// Constant added to every reward cell.
    RewardOffset { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub mdp: TabularMdp,
    pub smoothing: f64,
    /// Injected corruptions in application order.
    pub bias: Vec<BiasSpec>,
    /// Cells with at least one logged transition.
    pub visited_mask: Vec<bool>,
    pub dataset_digest: Option<String>,
}

impl LearnedModel {
    /// Wraps a known MDP as a "model" with no estimation error.
    pub fn exact(mdp: TabularMdp) -> Self {
        let n = mdp.n_cells();
        Self {
            mdp,
            smoothing: 0.0,
            bias: Vec::new(),
            visited_mask: alloc::vec![true; n],
            dataset_digest: None,
        }
    }
}

/// `P̂(s'|s,a) = (N(s,a,s') + α) / (N(s,a) + α |S|)`, reward as the sample mean.
/// With `α = 0`, unvisited rows fall back to a self-loop.
pub fn fit_mle_model(dataset: &Dataset, template: &MdpTemplate, smoothing: f64) -> Result<LearnedModel, DataError> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(DataError::Argument("smoothing must be a finite non-negative number"));
    }
    if dataset.is_empty() {
        return Err(DataError::Empty);
    }
    if dataset.n_states != template.n_states || dataset.n_actions != template.n_actions {
        return Err(DataError::Argument("dataset shape does not match the template"));
    }
    let (dynamics, reward) = count_tables(dataset, smoothing);
    let r_max = reward.iter().map(|r| libm::fabs(*r)).fold(template.r_max, f64::max);
    let mdp = TabularMdp::new(
        template.n_states,
        template.n_actions,
        dynamics,
        reward,
        r_max,
        template.init_dist.clone(),
        template.gamma,
    )?;
    Ok(LearnedModel {
        mdp,
        smoothing,
        bias: Vec::new(),
        visited_mask: dataset.visited_mask(),
        dataset_digest: Some(dataset.digest()),
    })
}

/// `P' = (1 - m) P̂ + m · noise`, one seeded Dirichlet(1) row per cell.
pub fn inject_model_bias(model: &LearnedModel, magnitude: f64, seed: u64) -> Result<LearnedModel, MdpError> {
    if !(0.0..=1.0).contains(&magnitude) {
        return Err(MdpError::InvalidMixture(magnitude));
    }
    let m = &model.mdp;
    let ns = m.n_states();
    let mut rng = seeded(seed);
    let mut dynamics = Vec::with_capacity(m.dynamics().len());
    for row in m.dynamics().chunks(ns) {
        let noise = dirichlet_ones(&mut rng, ns);
        if magnitude == 0.0 {
            dynamics.extend_from_slice(row);
        } else if magnitude == 1.0 {
            dynamics.extend_from_slice(&noise);
        } else {
            dynamics.extend(row.iter().zip(&noise).map(|(p, q)| (1.0 - magnitude) * p + magnitude * q));
        }
    }
    let mdp = TabularMdp::new(
        ns,
        m.n_actions(),
        dynamics,
        m.reward().to_vec(),
        m.r_max(),
        m.init_dist().to_vec(),
        m.gamma(),
    )?;
    let mut out = model.clone();
    out.mdp = mdp;
    out.bias.push(BiasSpec::DynamicsNoise { magnitude, seed });
    Ok(out)
}

/// Adds `delta` to every reward; `r_max` grows to cover the shift.
pub fn inject_reward_offset(model: &LearnedModel, delta: f64) -> Result<LearnedModel, MdpError> {
    let reward = model.mdp.reward().iter().map(|r| r + delta).collect();
    let mut out = model.clone();
    out.mdp = model.mdp.with_reward(reward)?;
    out.bias.push(BiasSpec::RewardOffset { delta });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelErrorProfile {
    /// Per-cell `TV(P̂(·|s,a), P(·|s,a))`.
    pub tv: Vec<f64>,
    /// Per-cell `|r̂ - r|`.
    pub reward_abs: Vec<f64>,
    /// `max_{s,a}` of `tv`, used as `D(P_M, P_M̂)` in the bounds.
    pub max_tv: f64,
}

pub fn model_error_profile(model: &LearnedModel, truth: &TabularMdp) -> Result<ModelErrorProfile, MdpError> {
    dynamics_gap(&model.mdp, truth)
}

/// Per-cell TV and reward gap between any two same-shaped MDPs.
pub fn dynamics_gap(a: &TabularMdp, b: &TabularMdp) -> Result<ModelErrorProfile, MdpError> {
    if a.n_states() != b.n_states() || a.n_actions() != b.n_actions() {
        return Err(MdpError::Incompatible("state/action shapes differ".into()));
    }
    let ns = a.n_states();
    let tv = a
        .dynamics()
        .chunks(ns)
        .zip(b.dynamics().chunks(ns))
        .map(|(p, q)| tv_divergence(p, q))
        .collect::<Result<Vec<_>, _>>()?;
    let reward_abs = a
        .reward()
        .iter()
        .zip(b.reward())
        .map(|(x, y)| libm::fabs(x - y))
        .collect();
    let max_tv = tv.iter().copied().fold(0.0, f64::max);
    Ok(ModelErrorProfile {
        tv,
        reward_abs,
        max_tv,
    })
}

/// `u(s,a) = 1 / sqrt(max(N(s,a), 1))`.
pub fn count_uncertainty(dataset: &Dataset) -> Vec<f64> {
    dataset
        .counts_sa
        .iter()
        .map(|&n| 1.0 / libm::sqrt(n.max(1) as f64))
        .collect()
}
