use combo_core::combo::{combo_policy_evaluation, ComboConfig};
use combo_core::data::{build_empirical_mdp, collect_dataset, dataset_distribution, EmpiricalMdp};
use combo_core::env::{gridworld, random_mdp, random_policy};
use combo_core::mdp::*;
use combo_core::model::{fit_mle_model, inject_model_bias, inject_reward_offset, LearnedModel};
use combo_core::verify::*;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn interpolation_lemma_holds_on_random_pairs() {
    let r = check_interpolation_lemma(300, 7);
    assert!(r.passed, "{r:?}");
    assert_eq!(r.status, CheckStatus::Pass);
    assert_eq!(r.seed, Some(7));
}

#[test]
fn pointwise_identity_on_random_instances() {
    for seed in 0..10 {
        let truth = random_mdp(7, 4, 3, 0.9, seed).unwrap();
        let data = collect_dataset(&truth, &random_policy(7, 4, seed), 200, 20, seed).unwrap();
        let e = build_empirical_mdp(&data, &truth.template()).unwrap();
        let m = inject_model_bias(&fit_mle_model(&data, &truth.template(), 0.0).unwrap(), 0.1, seed).unwrap();
        let pi = random_policy(7, 4, seed + 9);
        let cfg = ComboConfig {
            beta: 2.0,
            eval_tol: 1e-10,
            ..ComboConfig::default()
        };
        let solve = combo_policy_evaluation(&e, &m, &pi, &dataset_distribution(&data).unwrap(), &cfg).unwrap();
        let r = check_pointwise_identity(&solve, &e, &m, &pi, cfg.f, cfg.beta).unwrap();
        assert!(r.passed, "{r:?}");
        // A wrong β is detected.
        let bad = check_pointwise_identity(&solve, &e, &m, &pi, cfg.f, cfg.beta + 0.5).unwrap();
        assert!(!bad.passed && bad.witness.contains_key("residual"));
    }
}

#[test]
fn expected_lower_bound_with_optimistic_model() {
    let truth = random_mdp(6, 3, 3, 0.9, 3).unwrap();
    let data = collect_dataset(&truth, &random_policy(6, 3, 3), 300, 20, 3).unwrap();
    let e = build_empirical_mdp(&data, &truth.template()).unwrap();
    let model = inject_reward_offset(&fit_mle_model(&data, &truth.template(), 0.0).unwrap(), 0.5).unwrap();
    let pi = random_policy(6, 3, 4);
    let r = check_expected_lower_bound(&truth, &e, &model, &pi, &ComboConfig::default(), &dataset_distribution(&data).unwrap()).unwrap();
    assert!(r.passed, "{r:?}");
    assert_eq!(r.witness["fails_at_zero"], 1.0);
}

#[test]
fn dataset_overestimation_examples() {
    let rho = OccupancyMeasure::from_sa(2, 1, vec![0.7, 0.3]).unwrap();
    let d = OccupancyMeasure::from_sa(2, 1, vec![0.3, 0.7]).unwrap();
    let r = check_dataset_overestimation(&rho, &d, 0.5);
    assert_eq!(r.status, CheckStatus::Pass);
    close(r.witness["nu_tilde"], -0.32, 1e-12);
    assert_eq!(check_dataset_overestimation(&rho, &rho, 0.5).status, CheckStatus::Inconclusive);
    assert_eq!(check_dataset_overestimation(&rho, &d, 1.0).status, CheckStatus::Inconclusive);
}

fn ordering_fixture(mirror: bool) -> (TabularPolicy, TabularPolicy, OccupancyMeasure, OccupancyMeasure) {
    let pi = TabularPolicy::new(2, 2, vec![0.5, 0.5, 1.0, 0.0]).unwrap();
    let pb = TabularPolicy::uniform(2, 2);
    let (r, d) = if mirror { ([0.1, 0.9], [0.9, 0.1]) } else { ([0.9, 0.1], [0.1, 0.9]) };
    let rho = OccupancyMeasure::from_state(&r, &pi).unwrap();
    let data = OccupancyMeasure::from_state(&d, &pb).unwrap();
    (pi, pb, rho, data)
}

#[test]
fn ordering_condition_by_hand() {
    // Σ_a π²/π_β is 1 at s0 and 2 at s1.
    let (pi, pb, rho, d) = ordering_fixture(false);
    close(ordering_condition(&pi, &pb, &rho, &d, EPSILON_PB), 0.9 + 0.2 - 0.1 - 1.8, 1e-12);
    let (pi, pb, rho, d) = ordering_fixture(true);
    close(ordering_condition(&pi, &pb, &rho, &d, EPSILON_PB), 0.8, 1e-12);
    close(ordering_condition(&pb, &pb, &rho, &d, EPSILON_PB), 0.0, 1e-12);
}

#[test]
fn d_cql_examples() {
    let pb = TabularPolicy::uniform(2, 2);
    let pi = TabularPolicy::new(2, 2, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
    let d = d_cql_distance(&pi, &pb, EPSILON_PB);
    close(d[0], 1.0, 1e-12);
    close(d[1], 0.0, 1e-12);
}

#[test]
fn cql_ordering_with_matched_policies() {
    let truth = gridworld(3, 3, (2, 2), &[], 0.1, 0.9).unwrap();
    let pb = random_policy(9, 4, 1);
    let data = collect_dataset(&truth, &pb, 2000, 20, 1).unwrap();
    let cloned = combo_core::baselines::behavior_cloning(&data);
    let r = check_cql_ordering(&truth, &data, &cloned, 1.0).unwrap();
    assert!(r.passed, "{r:?}");
    close(r.witness["delta_cql"], r.witness["delta_combo"] + r.witness["condition"], 1e-9);
}

#[test]
fn cql_ordering_identity_on_random_instances() {
    for seed in 0..30 {
        let truth = random_mdp(5, 3, 3, 0.9, seed).unwrap();
        let data = collect_dataset(&truth, &random_policy(5, 3, seed), 300, 15, seed).unwrap();
        let pi = random_policy(5, 3, seed + 40);
        let r = check_cql_ordering(&truth, &data, &pi, 0.7).unwrap();
        assert!(r.passed, "{r:?}");
        let gap = r.witness["delta_combo"] - r.witness["delta_cql"];
        // The gap is -β (*) up to mass ρ puts on states absent from the data.
        assert!(gap >= -0.7 * r.witness["condition"] - 1e-9);
    }
}

#[test]
fn interpolant_bound_degenerate_and_biased() {
    let m = random_mdp(6, 3, 3, 0.9, 2).unwrap();
    let pi = random_policy(6, 3, 2);
    let r = check_interpolant_return_bound(&m, &m, &m, 0.4, &pi).unwrap();
    assert!(r.passed);
    assert_eq!(r.witness["alpha"], 0.0);
    close(r.witness["j_interpolant"], r.witness["j_aux"], 1e-10);

    let biased = inject_model_bias(&LearnedModel::exact(m.clone()), 0.1, 5).unwrap().mdp;
    let r = check_interpolant_return_bound(&m, &biased, &m, 0.5, &pi).unwrap();
    assert!(r.passed && r.margin > 0.0, "{r:?}");
    let r = check_interpolant_return_bound(&m, &biased, &m, 1.0, &pi).unwrap();
    assert_eq!(r.witness["model_term"], 0.0);
}

fn zeta_setup() -> (TabularMdp, combo_core::data::Dataset, TabularPolicy) {
    let truth = gridworld(3, 3, (2, 2), &[(1, 1)], 0.1, 0.9).unwrap();
    let pb = TabularPolicy::uniform(9, 4);
    let data = collect_dataset(&truth, &pb, 20_000, 30, 5).unwrap();
    (truth, data, pb)
}

#[test]
fn zeta_vanishes_without_error_and_penalty() {
    let (truth, data, pb) = zeta_setup();
    assert!(data.counts_sa.iter().all(|&n| n > 0));
    let pi = random_policy(9, 4, 1);
    let cfg = ComboConfig {
        beta: 0.0,
        ..ComboConfig::default()
    };
    let z = compute_zeta(&truth, &data, &LearnedModel::exact(truth.clone()), &pi, &pb, &cfg, &ConcentrationConfig::zero()).unwrap();
    close(z.zeta, 0.0, 1e-12);
}

#[test]
fn zeta_structure() {
    let (truth, data, pb) = zeta_setup();
    let pi = random_policy(9, 4, 1);
    let conc = ConcentrationConfig::defaults(truth.r_max(), 9, 0.1);
    let model = inject_model_bias(&fit_mle_model(&data, &truth.template(), 0.0).unwrap(), 0.1, 1).unwrap();
    let at = |beta: f64, f: f64, m: &LearnedModel| {
        let cfg = ComboConfig {
            beta,
            f,
            ..ComboConfig::default()
        };
        compute_zeta(&truth, &data, m, &pi, &pb, &cfg, &conc).unwrap()
    };
    let (z1, z2) = (at(1.0, 0.5, &model), at(2.0, 0.5, &model));
    close(z1.zeta - z2.zeta, z1.c / (1.0 - 0.9), 1e-9);
    assert_eq!(at(1.0, 1.0, &model).model_term, 0.0);
    let terms: Vec<f64> = [0.0, 0.1, 0.3]
        .iter()
        .map(|&mag| {
            let m = inject_model_bias(&LearnedModel::exact(truth.clone()), mag, 3).unwrap();
            at(1.0, 0.5, &m).model_term
        })
        .collect();
    assert!(terms[0] <= terms[1] && terms[1] <= terms[2], "{terms:?}");
}

#[test]
fn safe_improvement_with_unpenalized_exhaustive_data() {
    let (truth, data, pb) = zeta_setup();
    let cfg = ComboConfig {
        beta: 0.0,
        f: 1.0,
        ..ComboConfig::default()
    };
    let r = check_safe_policy_improvement(&truth, &data, &cfg, &ConcentrationConfig::zero(), 0, Some(&pb)).unwrap();
    assert!(r.passed && r.margin > 0.0, "{r:?}");
}

#[test]
fn exact_empirical_helper() {
    let truth = random_mdp(3, 2, 2, 0.9, 0).unwrap();
    let e = EmpiricalMdp {
        mdp: truth.clone(),
        visited_mask: vec![true; 6],
    };
    let pi = random_policy(3, 2, 0);
    let (q0, qb) = interpolant_and_conservative_q(&e, &LearnedModel::exact(truth.clone()), &pi, &[1.0; 6], 0.5, 1.0).unwrap();
    for (a, b) in q0.iter().zip(&qb) {
        close(a - b, 10.0, 1e-9);
    }
}
