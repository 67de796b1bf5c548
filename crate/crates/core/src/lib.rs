//! Exact tabular machinery for conservative offline model-based policy
//! optimization (COMBO) on finite MDPs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: dense policy evaluation, occupancy measures, dataset and
//! model construction, the conservative evaluation/improvement loop,
//! tabular baselines, and checks that compare every bound against exact
//! dynamic programming. File formats, experiment orchestration and the
//! command line live in the `combo-lab` crate.
//!
//! Layout:
//! - [`mdp`]: MDPs, policies, Q tables, occupancy, Bellman operators.
//! - [`data`]: offline dataset collection and the empirical MDP.
//! - [`model`]: count-based model fitting, bias injection, error profiles.
//! - [`combo`]: penalties, conservative evaluation, rollouts, improvement.
//! - [`baselines`]: CQL, MOPO, Dyna, behavior cloning, value iteration.
//! - [`verify`]: checks that produce [`verify::VerificationReport`]s.
//! - [`env`]: gridworld, chain and random MDP generators, behavior policies.
//! - [`select`]: offline hyperparameter selection by regularizer value.
//! - [`truth`]: the narrow interface through which algorithms may observe
//!   the ground-truth MDP (logging only).
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod combo;
pub mod data;
pub mod digest;
pub mod env;
pub mod linalg;
pub mod mdp;
pub mod model;
pub mod rng;
pub mod select;
pub mod suites;
pub mod truth;
pub mod verify;

pub use combo::{ComboConfig, ComboSolveResult};
pub use data::{Dataset, EmpiricalMdp, Transition};
pub use mdp::{MdpError, MdpTemplate, OccupancyMeasure, QTable, TabularMdp, TabularPolicy};
pub use model::LearnedModel;
