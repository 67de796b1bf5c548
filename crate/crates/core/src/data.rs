//! Offline datasets and the empirical MDP `M̄` they induce.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{MdpError, MdpTemplate, OccupancyMeasure, TabularMdp, TabularPolicy};
use crate::rng::{sample_categorical, seeded};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("transition {index} has out-of-range indices ({s}, {a}, {s_next})")]
    OutOfRange {
        index: usize,
        s: usize,
        a: usize,
        s_next: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(&'static str),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Logged transitions plus their count tables.
///
/// Episodes are consecutive blocks of `episode_len` transitions; the last
/// block may be shorter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_states: usize,
    pub n_actions: usize,
    pub episode_len: usize,
    pub source_seed: u64,
    pub transitions: Vec<Transition>,
    pub counts_sa: Vec<u64>,
    pub counts_sas: Vec<u64>,
    pub counts_s: Vec<u64>,
}

impl Dataset {
    pub fn from_transitions(
        n_states: usize,
        n_actions: usize,
        episode_len: usize,
        source_seed: u64,
        transitions: Vec<Transition>,
    ) -> Result<Self, DataError> {
        if episode_len == 0 {
            return Err(DataError::Argument("episode_len must be at least 1"));
        }
        let mut d = Self {
            n_states,
            n_actions,
            episode_len,
            source_seed,
            transitions,
            counts_sa: vec![0; n_states * n_actions],
            counts_sas: vec![0; n_states * n_actions * n_states],
            counts_s: vec![0; n_states],
        };
        for (index, t) in d.transitions.iter().enumerate() {
            if t.s >= n_states || t.a >= n_actions || t.s_next >= n_states || !t.r.is_finite() {
                return Err(DataError::OutOfRange {
                    index,
                    s: t.s,
                    a: t.a,
                    s_next: t.s_next,
                });
            }
            let sa = t.s * n_actions + t.a;
            d.counts_sa[sa] += 1;
            d.counts_sas[sa * n_states + t.s_next] += 1;
            d.counts_s[t.s] += 1;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Recounts from the transition list and compares with the stored tables.
    pub fn counts_consistent(&self) -> bool {
        match Self::from_transitions(
            self.n_states,
            self.n_actions,
            self.episode_len,
            self.source_seed,
            self.transitions.clone(),
        ) {
            Ok(fresh) => {
                fresh.counts_sa == self.counts_sa
                    && fresh.counts_sas == self.counts_sas
                    && fresh.counts_s == self.counts_s
            }
            Err(_) => false,
        }
    }

    #[inline]
    pub fn n_sa(&self, s: usize, a: usize) -> u64 {
        self.counts_sa[s * self.n_actions + a]
    }

    pub fn visited_mask(&self) -> Vec<bool> {
        self.counts_sa.iter().map(|&n| n > 0).collect()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &[Transition]> {
        self.transitions.chunks(self.episode_len)
    }

    /// Undiscounted reward sum of each episode.
    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes()
            .map(|ep| ep.iter().map(|t| t.r).sum())
            .collect()
    }

    /// Appends `other`. Both must share shapes and episode length.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, DataError> {
        if self.n_states != other.n_states
            || self.n_actions != other.n_actions
            || self.episode_len != other.episode_len
        {
            return Err(DataError::Argument("datasets have different shapes"));
        }
        let mut t = self.transitions.clone();
        t.extend_from_slice(&other.transitions);
        Self::from_transitions(self.n_states, self.n_actions, self.episode_len, self.source_seed, t)
    }

    /// Replaces every logged reward by `reward[s * n_actions + a]`.
    pub fn relabel(&self, reward: &[f64]) -> Result<Dataset, DataError> {
        if reward.len() != self.n_states * self.n_actions {
            return Err(DataError::Argument("reward table has the wrong length"));
        }
        let t = self
            .transitions
            .iter()
            .map(|t| Transition {
                r: reward[t.s * self.n_actions + t.a],
                ..*t
            })
            .collect();
        Self::from_transitions(self.n_states, self.n_actions, self.episode_len, self.source_seed, t)
    }

    pub fn digest(&self) -> alloc::string::String {
        let mut fp = crate::digest::Fingerprint::new()
            .tag("dataset")
            .u64(self.n_states as u64)
            .u64(self.n_actions as u64)
            .u64(self.episode_len as u64)
            .u64(self.source_seed);
        for t in &self.transitions {
            fp = fp
                .u64(t.s as u64)
                .u64(t.a as u64)
                .f64s(&[t.r])
                .u64(t.s_next as u64);
        }
        fp.hex()
    }

    pub fn counts_digest(&self) -> alloc::string::String {
        crate::digest::Fingerprint::new()
            .tag("counts")
            .u64s(&self.counts_sa)
            .u64s(&self.counts_sas)
            .u64s(&self.counts_s)
            .hex()
    }
}

/// Rolls out `behavior` from `μ0`, restarting every `episode_len` steps,
/// until `n_transitions` have been logged.
pub fn collect_dataset(
    mdp: &TabularMdp,
    behavior: &TabularPolicy,
    n_transitions: usize,
    episode_len: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n_transitions == 0 {
        return Err(DataError::Argument("n_transitions must be at least 1"));
    }
    if episode_len == 0 {
        return Err(DataError::Argument("episode_len must be at least 1"));
    }
    if behavior.n_states() != mdp.n_states() || behavior.n_actions() != mdp.n_actions() {
        return Err(DataError::Argument("behavior policy shape does not match the MDP"));
    }
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n_transitions);
    let mut s = 0;
    for i in 0..n_transitions {
        if i % episode_len == 0 {
            s = sample_categorical(&mut rng, mdp.init_dist());
        }
        let a = sample_categorical(&mut rng, behavior.row(s));
        let s_next = sample_categorical(&mut rng, mdp.transition_row(s, a));
        out.push(Transition {
            s,
            a,
            r: mdp.r(s, a),
            s_next,
        });
        s = s_next;
    }
    Dataset::from_transitions(mdp.n_states(), mdp.n_actions(), episode_len, seed, out)
}

/// `M̄` with a mask of the cells that actually appear in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMdp {
    pub mdp: TabularMdp,
    pub visited_mask: Vec<bool>,
}

/// Count-ratio dynamics and sample-mean rewards, with self-loop / zero
/// reward on cells the data never visits.
pub(crate) fn count_tables(dataset: &Dataset, smoothing: f64) -> (Vec<f64>, Vec<f64>) {
    let (ns, na) = (dataset.n_states, dataset.n_actions);
    let mut dynamics = vec![0.0; ns * na * ns];
    for sa in 0..ns * na {
        let n = dataset.counts_sa[sa];
        let row = &mut dynamics[sa * ns..(sa + 1) * ns];
        if n == 0 && smoothing == 0.0 {
            row[sa / na] = 1.0;
            continue;
        }
        let denom = n as f64 + smoothing * ns as f64;
        for (s2, p) in row.iter_mut().enumerate() {
            *p = (dataset.counts_sas[sa * ns + s2] as f64 + smoothing) / denom;
        }
    }
    let mut reward = vec![0.0; ns * na];
    let mut seen = vec![0u64; ns * na];
    for t in &dataset.transitions {
        let sa = t.s * na + t.a;
        seen[sa] += 1;
        reward[sa] += (t.r - reward[sa]) / seen[sa] as f64;
    }
    (dynamics, reward)
}

pub fn build_empirical_mdp(dataset: &Dataset, template: &MdpTemplate) -> Result<EmpiricalMdp, DataError> {
    if dataset.is_empty() {
        return Err(DataError::Empty);
    }
    if dataset.n_states != template.n_states || dataset.n_actions != template.n_actions {
        return Err(DataError::Argument("dataset shape does not match the template"));
    }
    let (dynamics, reward) = count_tables(dataset, 0.0);
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
    Ok(EmpiricalMdp {
        mdp,
        visited_mask: dataset.visited_mask(),
    })
}

/// Empirical frequency `d(s,a) = N(s,a) / |D|`.
pub fn dataset_distribution(dataset: &Dataset) -> Result<OccupancyMeasure, DataError> {
    if dataset.is_empty() {
        return Err(DataError::Empty);
    }
    let total = dataset.len() as f64;
    let sa = dataset.counts_sa.iter().map(|&n| n as f64 / total).collect();
    Ok(OccupancyMeasure::from_sa(dataset.n_states, dataset.n_actions, sa)?)
}
