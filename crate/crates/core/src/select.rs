//! Offline hyperparameter selection by the regularizer value
//! `E_ρ[Q̂] - E_D[Q̂]`: lower is preferred. Only the dataset and the MDP
//! template are consulted.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combo::{run_combo, ComboConfig, ComboError, ComboRun};
use crate::data::Dataset;
use crate::mdp::MdpTemplate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub config: ComboConfig,
    /// One entry per candidate; `None` when the run failed.
    pub regularizers: Vec<Option<f64>>,
}

/// Runs every candidate and returns the regularizer argmin, ties going to
/// the lowest index. The statistic is averaged over each candidate's
/// `regularizer_window` final evaluations.
pub fn select_hyperparameters(
    candidates: &[ComboConfig],
    dataset: &Dataset,
    template: &MdpTemplate,
    seed: u64,
) -> Result<Selection, ComboError> {
    let (index, runs) = select_with_runs(candidates, dataset, template, seed)?;
    Ok(Selection {
        index,
        config: candidates[index].clone(),
        regularizers: runs
            .iter()
            .zip(candidates)
            .map(|(r, c)| r.as_ref().ok().and_then(|r| r.regularizer(c.regularizer_window)))
            .collect(),
    })
}

/// As [`select_hyperparameters`], also handing back each candidate's run.
pub fn select_with_runs(
    candidates: &[ComboConfig],
    dataset: &Dataset,
    template: &MdpTemplate,
    seed: u64,
) -> Result<(usize, Vec<Result<ComboRun, ComboError>>), ComboError> {
    if candidates.is_empty() {
        return Err(ComboError::Config("no candidates to select from"));
    }
    let runs: Vec<Result<ComboRun, ComboError>> =
        candidates.iter().map(|c| run_combo(dataset, template, c, seed, None)).collect();
    let values: Vec<Option<f64>> = runs
        .iter()
        .zip(candidates)
        .map(|(r, c)| r.as_ref().ok().and_then(|r| r.regularizer(c.regularizer_window)))
        .collect();
    match argmin_regularizer(&values) {
        Some(i) => Ok((i, runs)),
        None => Err(runs
            .into_iter()
            .find_map(|r| r.err())
            .unwrap_or(ComboError::Config("no candidate produced an evaluation"))),
    }
}

/// Argmin with lowest-index tie-break over already computed values.
pub fn argmin_regularizer(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}
