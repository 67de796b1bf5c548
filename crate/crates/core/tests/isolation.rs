//! Algorithms only ever see the template; a poisoned ground truth that
//! panics on any return query must never be touched.

use combo_core::baselines::*;
use combo_core::combo::{run_combo, ComboConfig, SolveMode};
use combo_core::data::collect_dataset;
use combo_core::env::{make_behavior_policy, BehaviorQuality};
use combo_core::model::{count_uncertainty, fit_mle_model};
use combo_core::select::select_hyperparameters;
use combo_core::suites::safety_grid;
use combo_core::truth::{GroundTruth, PoisonedTruth};

#[test]
fn algorithms_run_against_a_poisoned_truth() {
    let truth = safety_grid();
    let data = collect_dataset(&truth, &make_behavior_policy(&truth, BehaviorQuality::Medium).unwrap(), 500, 25, 1).unwrap();
    let poisoned = PoisonedTruth::new(truth.template());
    let template = poisoned.template();
    for mode in [SolveMode::Exact, SolveMode::Sampled] {
        let cfg = ComboConfig {
            solve_mode: mode,
            n_rollouts: 100,
            outer_iters: 3,
            ..ComboConfig::default()
        };
        run_combo(&data, &template, &cfg, 0, None).unwrap();
        dyna_policy_optimization(&data, &template, &cfg, 0, None).unwrap();
    }
    cql_policy_optimization(&data, &template, &BaselineConfig::default()).unwrap();
    let model = fit_mle_model(&data, &template, 0.0).unwrap();
    mopo_policy_optimization(&model, &count_uncertainty(&data), &BaselineConfig::default()).unwrap();
    behavior_cloning(&data);
    let candidates: Vec<ComboConfig> = [0.5, 1.0, 5.0]
        .iter()
        .map(|&beta| ComboConfig {
            beta,
            outer_iters: 5,
            ..ComboConfig::default()
        })
        .collect();
    select_hyperparameters(&candidates, &data, &template, 0).unwrap();
}

#[test]
#[should_panic(expected = "poisoned")]
fn the_poisoned_truth_does_bite() {
    let truth = safety_grid();
    let data = collect_dataset(&truth, &combo_core::mdp::TabularPolicy::uniform(25, 4), 100, 25, 1).unwrap();
    let poisoned = PoisonedTruth::new(truth.template());
    let _ = run_combo(&data, &truth.template(), &ComboConfig::default(), 0, Some(&poisoned));
}
