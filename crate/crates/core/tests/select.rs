use combo_core::combo::ComboConfig;
use combo_core::data::collect_dataset;
use combo_core::env::random_mdp;
use combo_core::mdp::TabularPolicy;
use combo_core::select::*;

#[test]
fn argmin_contract() {
    assert_eq!(argmin_regularizer(&[Some(-5.0), Some(3.0)]), Some(0));
    assert_eq!(argmin_regularizer(&[Some(3.0), Some(-5.0)]), Some(1));
    assert_eq!(argmin_regularizer(&[Some(1.0), None, Some(1.0)]), Some(0));
    assert_eq!(argmin_regularizer(&[None, None]), None);
}

#[test]
fn single_candidate_is_returned() {
    let m = random_mdp(4, 2, 2, 0.9, 0).unwrap();
    let data = collect_dataset(&m, &TabularPolicy::uniform(4, 2), 200, 20, 0).unwrap();
    let cfg = ComboConfig {
        beta: 2.5,
        ..ComboConfig::default()
    };
    let s = select_hyperparameters(&[cfg.clone()], &data, &m.template(), 0).unwrap();
    assert_eq!(s.index, 0);
    assert_eq!(s.config, cfg);
    assert!(s.regularizers[0].is_some());
}

#[test]
fn failing_candidates_are_skipped_and_all_failing_is_an_error() {
    let m = random_mdp(4, 2, 2, 0.9, 0).unwrap();
    let data = collect_dataset(&m, &TabularPolicy::uniform(4, 2), 200, 20, 0).unwrap();
    let broken = ComboConfig {
        max_eval_iters: Some(1),
        ..ComboConfig::default()
    };
    let s = select_hyperparameters(&[broken.clone(), ComboConfig::default()], &data, &m.template(), 0).unwrap();
    assert_eq!(s.index, 1);
    assert_eq!(s.regularizers[0], None);
    assert!(select_hyperparameters(&[broken], &data, &m.template(), 0).is_err());
    assert!(select_hyperparameters(&[], &data, &m.template(), 0).is_err());
}
