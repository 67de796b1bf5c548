//! Environment and behavior-policy generators.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::value_iteration_oracle;
use crate::mdp::{MdpError, TabularMdp, TabularPolicy};
use crate::rng::{dirichlet_ones, derive_seed, seeded, sparse_dirichlet};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("malformed environment spec: {0}")]
    Spec(&'static str),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvKind {
    /// 4 actions (up, right, down, left); start at (0, 0).
    Gridworld {
        width: usize,
        height: usize,
        goal: Cell,
        #[serde(default)]
        hazards: Vec<Cell>,
        #[serde(default)]
        slip: f64,
    },
    RandomMdp {
        n_states: usize,
        n_actions: usize,
        branching: usize,
        seed: u64,
    },
    /// Action 0 advances, action 1 resets; the last state is absorbing with reward 1.
    Chain { length: usize },
}

/// Reward relabeling applied on top of the base environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RewardVariant {
    Identity,
    /// Gridworld only: the goal reward moves to `goal`. Dynamics are unchanged,
    /// so the old goal stays absorbing but pays nothing.
    MoveGoal { goal: Cell },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub gamma: f64,
    #[serde(default)]
    pub reward_variant: Option<RewardVariant>,
}

impl EnvSpec {
    pub fn gridworld(width: usize, height: usize, goal: Cell, hazards: Vec<Cell>, slip: f64, gamma: f64) -> Self {
        Self {
            kind: EnvKind::Gridworld {
                width,
                height,
                goal,
                hazards,
                slip,
            },
            gamma,
            reward_variant: None,
        }
    }
}

/// Builds the MDP for `spec`, with `reward_variant` applied.
pub fn make_environment(spec: &EnvSpec) -> Result<TabularMdp, EnvError> {
    let base = make_base_environment(spec)?;
    match &spec.reward_variant {
        None | Some(RewardVariant::Identity) => Ok(base),
        Some(v) => Ok(base.with_reward(relabeled_reward(spec, v)?)?),
    }
}

/// The environment ignoring `reward_variant`.
pub fn make_base_environment(spec: &EnvSpec) -> Result<TabularMdp, EnvError> {
    match &spec.kind {
        EnvKind::Gridworld {
            width,
            height,
            goal,
            hazards,
            slip,
        } => gridworld(*width, *height, *goal, hazards, *slip, spec.gamma),
        EnvKind::RandomMdp {
            n_states,
            n_actions,
            branching,
            seed,
        } => {
            if *n_states == 0 || *n_actions == 0 || *branching == 0 {
                return Err(EnvError::Spec("random MDP sizes must be positive"));
            }
            Ok(random_mdp(*n_states, *n_actions, *branching, spec.gamma, *seed)?)
        }
        EnvKind::Chain { length } => chain(*length, spec.gamma),
    }
}

/// Reward table of `variant` over the base environment's dynamics.
pub fn relabeled_reward(spec: &EnvSpec, variant: &RewardVariant) -> Result<Vec<f64>, EnvError> {
    match (variant, &spec.kind) {
        (RewardVariant::Identity, _) => Ok(make_base_environment(spec)?.reward().to_vec()),
        (
            RewardVariant::MoveGoal { goal },
            EnvKind::Gridworld {
                width,
                height,
                hazards,
                ..
            },
        ) => {
            check_cell(*goal, *width, *height)?;
            Ok(grid_reward(*width, *height, *goal, hazards))
        }
        (RewardVariant::MoveGoal { .. }, _) => Err(EnvError::Spec("move_goal applies to gridworlds only")),
    }
}

fn check_cell(c: Cell, width: usize, height: usize) -> Result<(), EnvError> {
    if c.0 >= width || c.1 >= height {
        return Err(EnvError::Spec("cell outside grid"));
    }
    Ok(())
}

fn grid_reward(width: usize, height: usize, goal: Cell, hazards: &[Cell]) -> Vec<f64> {
    let mut r = vec![0.0; width * height * 4];
    for &(x, y) in hazards {
        let s = y * width + x;
        r[s * 4..s * 4 + 4].fill(-1.0);
    }
    let g = goal.1 * width + goal.0;
    r[g * 4..g * 4 + 4].fill(1.0);
    r
}

/// Reward is paid for the state occupied: 1 at the (absorbing) goal,
/// -1 on hazards, 0 elsewhere. With probability `slip` the move direction is
/// replaced by a uniformly random one.
pub fn gridworld(
    width: usize,
    height: usize,
    goal: Cell,
    hazards: &[Cell],
    slip: f64,
    gamma: f64,
) -> Result<TabularMdp, EnvError> {
    if width == 0 || height == 0 {
        return Err(EnvError::Spec("grid must be non-empty"));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(EnvError::Spec("slip must lie in [0, 1]"));
    }
    check_cell(goal, width, height)?;
    for &h in hazards {
        check_cell(h, width, height)?;
        if h == goal {
            return Err(EnvError::Spec("hazard on the goal cell"));
        }
    }
    let n = width * height;
    let g = goal.1 * width + goal.0;
    let step = |x: usize, y: usize, dir: usize| -> usize {
        let (nx, ny) = match dir {
            0 => (x, y.saturating_sub(1)),
            1 => ((x + 1).min(width - 1), y),
            2 => (x, (y + 1).min(height - 1)),
            _ => (x.saturating_sub(1), y),
        };
        ny * width + nx
    };
    let mut dynamics = vec![0.0; n * 4 * n];
    for s in 0..n {
        let (x, y) = (s % width, s / width);
        for a in 0..4 {
            let row = &mut dynamics[(s * 4 + a) * n..(s * 4 + a + 1) * n];
            if s == g {
                row[s] = 1.0;
                continue;
            }
            row[step(x, y, a)] += 1.0 - slip;
            for dir in 0..4 {
                row[step(x, y, dir)] += slip / 4.0;
            }
        }
    }
    let mut init = vec![0.0; n];
    init[0] = 1.0;
    Ok(TabularMdp::new(
        n,
        4,
        dynamics,
        grid_reward(width, height, goal, hazards),
        1.0,
        init,
        gamma,
    )?)
}

pub fn chain(length: usize, gamma: f64) -> Result<TabularMdp, EnvError> {
    if length == 0 {
        return Err(EnvError::Spec("chain length must be positive"));
    }
    let n = length;
    let mut dynamics = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        if s == n - 1 {
            dynamics[(s * 2) * n + s] = 1.0;
            dynamics[(s * 2 + 1) * n + s] = 1.0;
            reward[s * 2] = 1.0;
            reward[s * 2 + 1] = 1.0;
        } else {
            dynamics[(s * 2) * n + s + 1] = 1.0;
            dynamics[(s * 2 + 1) * n] = 1.0;
        }
    }
    let mut init = vec![0.0; n];
    init[0] = 1.0;
    Ok(TabularMdp::new(n, 2, dynamics, reward, 1.0, init, gamma)?)
}

/// Each row puts Dirichlet(1) mass on `branching` random successors;
/// rewards uniform in `[-1, 1]`; `μ0` uniform.
pub fn random_mdp(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    gamma: f64,
    seed: u64,
) -> Result<TabularMdp, MdpError> {
    let mut rng = seeded(seed);
    let mut dynamics = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        dynamics.extend(sparse_dirichlet(&mut rng, n_states, branching));
    }
    let reward = (0..n_states * n_actions)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    TabularMdp::new(
        n_states,
        n_actions,
        dynamics,
        reward,
        1.0,
        vec![1.0 / n_states as f64; n_states],
        gamma,
    )
}

/// Dirichlet(1) rows.
pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> TabularPolicy {
    let mut rng = seeded(derive_seed(seed, 0x706f));
    let probs = (0..n_states).flat_map(|_| dirichlet_ones(&mut rng, n_actions)).collect();
    TabularPolicy::new(n_states, n_actions, probs).expect("dirichlet rows are distributions")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorQuality {
    Random,
    Medium,
    Expert,
    MediumExpert,
    MediumReplay,
}

pub const EXPERT_EPSILON: f64 = 0.05;
pub const MEDIUM_EPSILON: f64 = 0.4;

/// With probability `1 - ε` take `actions[s]`, otherwise a uniform action.
pub fn epsilon_greedy(n_actions: usize, actions: &[usize], epsilon: f64) -> Result<TabularPolicy, MdpError> {
    let greedy = TabularPolicy::deterministic(n_actions, actions)?;
    greedy.mix(&TabularPolicy::uniform(actions.len(), n_actions), 1.0 - epsilon)
}

/// Behavior policy of the requested quality, built from the optimal policy
/// of `mdp`. Deterministic: no randomness is involved.
pub fn make_behavior_policy(mdp: &TabularMdp, quality: BehaviorQuality) -> Result<TabularPolicy, MdpError> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if quality == BehaviorQuality::Random {
        return Ok(TabularPolicy::uniform(ns, na));
    }
    let (opt, _) = value_iteration_oracle(mdp, 1e-10)?;
    let actions = opt.greedy_actions();
    let expert = epsilon_greedy(na, &actions, EXPERT_EPSILON)?;
    let medium = epsilon_greedy(na, &actions, MEDIUM_EPSILON)?;
    match quality {
        BehaviorQuality::Random => unreachable!(),
        BehaviorQuality::Expert => Ok(expert),
        BehaviorQuality::Medium => Ok(medium),
        BehaviorQuality::MediumExpert => medium.mix(&expert, 0.5),
        BehaviorQuality::MediumReplay => TabularPolicy::uniform(ns, na).mix(&medium, 0.5),
    }
}
