use combo_core::baselines::value_iteration_oracle;
use combo_core::combo::*;
use combo_core::data::{build_empirical_mdp, collect_dataset, dataset_distribution, EmpiricalMdp};
use combo_core::env::{gridworld, random_mdp, random_policy};
use combo_core::mdp::*;
use combo_core::model::{fit_mle_model, inject_model_bias, LearnedModel};

fn occ(v: &[f64]) -> OccupancyMeasure {
    OccupancyMeasure::from_sa(v.len(), 1, v.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn df_mixture_endpoints_and_midpoint() {
    let d = occ(&[0.3, 0.7]);
    let m = occ(&[0.7, 0.3]);
    assert_eq!(df_mixture(&d, &m, 1.0).unwrap().sa_dist, d.sa_dist);
    assert_eq!(df_mixture(&d, &m, 0.0).unwrap().sa_dist, m.sa_dist);
    let mid = df_mixture(&d, &m, 0.5).unwrap();
    close(mid.sa_dist[0], 0.5, 1e-15);
    close(mid.sa_dist[1], 0.5, 1e-15);
}

#[test]
fn penalty_cell_arithmetic_and_signs() {
    let rho = occ(&[0.7, 0.3, 0.0, 0.0]);
    let d = occ(&[0.3, 0.0, 0.7, 0.0]);
    let df = occ(&[0.5, 0.15, 0.35, 0.0]);
    let p = penalty_table(&rho, &d, &df, 1e-8);
    close(p[0], 0.8, 1e-12);
    assert!(p[1] > 0.0);
    assert!(p[2] < 0.0);
    assert_eq!(p[3], 0.0);
    let same = penalty_table(&rho, &rho, &rho, 1e-8);
    assert!(same.iter().all(|x| *x == 0.0));
}

#[test]
fn nu_values_by_hand() {
    let rho = occ(&[0.7, 0.3]);
    let d = occ(&[0.3, 0.7]);
    // f = 0.5: d_f = [0.5, 0.5]; 0.7*0.4/0.5 - 0.3*0.4/0.5.
    close(nu(&rho, &d, 0.5), 0.32, 1e-12);
    // f = 1: d_f = d; 0.7*0.4/0.3 - 0.3*0.4/0.7 = 16/21.
    close(nu(&rho, &d, 1.0), 16.0 / 21.0, 1e-12);
    assert_eq!(nu(&rho, &d, 0.0), 0.0);
    assert_eq!(nu(&rho, &rho, 0.7), 0.0);
    close(nu_tilde(&rho, &d, 0.5), -0.32, 1e-12);
    assert_eq!(nu_tilde(&rho, &rho, 0.3), 0.0);
}

#[test]
fn nu_tilde_is_mirrored_nu() {
    let rho = occ(&[0.1, 0.2, 0.3, 0.4]);
    let d = occ(&[0.4, 0.4, 0.1, 0.1]);
    for f in [0.0, 0.2, 0.5, 0.9] {
        close(nu_tilde(&rho, &d, f), -nu(&d, &rho, 1.0 - f), 1e-12);
    }
    // With d_f = d at f = 1 the dataset-expected penalty telescopes to zero.
    close(nu_tilde(&rho, &d, 1.0), 0.0, 1e-12);
}

/// One state, two actions, r = 1, γ = 0.5, π = δ(a0).
fn one_state() -> (EmpiricalMdp, LearnedModel, TabularPolicy, OccupancyMeasure) {
    let m = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 1.0], 1.0, vec![1.0], 0.5).unwrap();
    let e = EmpiricalMdp {
        mdp: m.clone(),
        visited_mask: vec![true, true],
    };
    let pi = TabularPolicy::deterministic(2, &[0]).unwrap();
    let d = OccupancyMeasure::from_sa(1, 2, vec![0.9, 0.1]).unwrap();
    (e, LearnedModel::exact(m), pi, d)
}

#[test]
fn one_state_fixed_point_by_hand() {
    let (e, m, pi, d) = one_state();
    let cfg = ComboConfig {
        beta: 1.0,
        f: 0.5,
        ..ComboConfig::default()
    };
    let r = combo_policy_evaluation(&e, &m, &pi, &d, &cfg).unwrap();
    close(r.df_used.sa_dist[0], 0.95, 1e-15);
    close(r.df_used.sa_dist[1], 0.05, 1e-15);
    close(r.penalty[0], 0.1 / 0.95, 1e-12);
    close(r.penalty[1], -2.0, 1e-12);
    let qa1 = 2.0 * (1.0 - 0.1 / 0.95);
    close(r.q.get(0, 0), qa1, 1e-7);
    close(r.q.get(0, 1), 3.0 + 0.5 * qa1, 1e-7);
    let cf = closed_form_q(&e, &m, &pi, &r.penalty, 0.5, 1.0).unwrap();
    assert!(cf.max_abs_diff(&r.q) <= 10.0 * cfg.eval_tol);
    assert!(r.converged && r.last_step <= cfg.eval_tol);
}

#[test]
fn zero_beta_is_interpolant_evaluation() {
    for seed in 0..5 {
        let truth = random_mdp(6, 3, 3, 0.9, seed).unwrap();
        let data = collect_dataset(&truth, &TabularPolicy::uniform(6, 3), 400, 20, seed).unwrap();
        let e = build_empirical_mdp(&data, &truth.template()).unwrap();
        let m = inject_model_bias(&LearnedModel::exact(truth.clone()), 0.2, seed).unwrap();
        let pi = random_policy(6, 3, seed);
        let cfg = ComboConfig {
            beta: 0.0,
            f: 0.3,
            ..ComboConfig::default()
        };
        let r = combo_policy_evaluation(&e, &m, &pi, &dataset_distribution(&data).unwrap(), &cfg).unwrap();
        let mf = interpolant_mdp(&e.mdp, &m.mdp, 0.3).unwrap();
        assert!(r.q.max_abs_diff(&exact_policy_q(&mf, &pi).unwrap()) < 1e-7);
    }
}

#[test]
fn iterative_and_closed_form_agree() {
    for seed in 0..20 {
        let ns = 3 + (seed as usize % 10);
        let truth = random_mdp(ns, 4, 3, 0.9, seed).unwrap();
        let data = collect_dataset(&truth, &random_policy(ns, 4, seed + 100), 300, 30, seed).unwrap();
        let e = build_empirical_mdp(&data, &truth.template()).unwrap();
        let m = fit_mle_model(&data, &truth.template(), 0.1).unwrap();
        let pi = random_policy(ns, 4, seed);
        let cfg = ComboConfig {
            beta: 0.5 + seed as f64 * 0.1,
            f: 0.6,
            mu_choice: if seed % 2 == 0 { MuChoice::CurrentPolicy } else { MuChoice::UniformActions },
            rho_choice: if seed % 3 == 0 { RhoChoice::Df } else { RhoChoice::ModelOccupancy },
            ..ComboConfig::default()
        };
        let r = combo_policy_evaluation(&e, &m, &pi, &dataset_distribution(&data).unwrap(), &cfg).unwrap();
        let cf = closed_form_q(&e, &m, &pi, &r.penalty, cfg.f, cfg.beta).unwrap();
        assert!(cf.max_abs_diff(&r.q) <= 10.0 * cfg.eval_tol, "seed {seed}");
    }
}

#[test]
fn iteration_budget_is_enforced() {
    let (e, m, pi, d) = one_state();
    let cfg = ComboConfig {
        max_eval_iters: Some(2),
        ..ComboConfig::default()
    };
    assert!(matches!(
        combo_policy_evaluation(&e, &m, &pi, &d, &cfg),
        Err(ComboError::NonConvergence { iters: 2, .. })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let (e, m, pi, d) = one_state();
    for cfg in [
        ComboConfig { beta: -1.0, ..ComboConfig::default() },
        ComboConfig { f: 1.5, ..ComboConfig::default() },
        ComboConfig { epsilon_df: 0.0, ..ComboConfig::default() },
        ComboConfig { rollout_len: 0, ..ComboConfig::default() },
    ] {
        assert!(matches!(combo_policy_evaluation(&e, &m, &pi, &d, &cfg), Err(ComboError::Config(_))));
    }
}

fn solve_with_q(values: Vec<f64>, ns: usize, na: usize, rho_state: Vec<f64>) -> ComboSolveResult {
    let q = QTable::from_values(ns, na, values).unwrap();
    let rho = OccupancyMeasure::from_state(&rho_state, &TabularPolicy::uniform(ns, na)).unwrap();
    ComboSolveResult {
        q,
        penalty: vec![0.0; ns * na],
        nu_value: 0.0,
        iters_used: 1,
        converged: true,
        last_step: 0.0,
        df_used: rho.clone(),
        data_dist: rho.clone(),
        rho_used: rho,
    }
}

#[test]
fn greedy_improvement_rules() {
    let prev = TabularPolicy::uniform(3, 2);
    let r = solve_with_q(vec![1.0, 2.0, 1.0, 1.0, 5.0, 0.0], 3, 2, vec![0.5, 0.5, 0.0]);
    let greedy = ComboConfig {
        improvement: Improvement::Greedy,
        ..ComboConfig::default()
    };
    let p = combo_policy_improvement(&r, &greedy, &prev).unwrap();
    assert_eq!(p.row(0), &[0.0, 1.0]);
    assert_eq!(p.row(1), &[1.0, 0.0]);
    // No ρ mass: keeps the previous row.
    assert_eq!(p.row(2), &[0.5, 0.5]);
    let damped = combo_policy_improvement(&r, &ComboConfig::default(), &prev).unwrap();
    close(damped.prob(0, 1), 0.8 * 0.5 + 0.2, 1e-15);
    close(damped.prob(1, 0), 0.6, 1e-15);

    let cold = ComboConfig {
        improvement: Improvement::Softmax { temperature: 1e-3 },
        ..ComboConfig::default()
    };
    let s = combo_policy_improvement(&r, &cold, &prev).unwrap();
    assert!(s.prob(0, 1) > 1.0 - 1e-12);
    let warm = ComboConfig {
        improvement: Improvement::Softmax { temperature: 1.0 },
        ..ComboConfig::default()
    };
    let s = combo_policy_improvement(&r, &warm, &prev).unwrap();
    close(s.prob(0, 1), 1.0 / (1.0 + (-1.0f64).exp()), 1e-12);
}

#[test]
fn greedy_step_maximizes_rho_expected_value() {
    let truth = random_mdp(3, 2, 2, 0.9, 11).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(3, 2), 200, 20, 3).unwrap();
    let e = build_empirical_mdp(&data, &truth.template()).unwrap();
    let m = fit_mle_model(&data, &truth.template(), 0.0).unwrap();
    let pi = TabularPolicy::uniform(3, 2);
    let cfg = ComboConfig {
        improvement: Improvement::Greedy,
        ..ComboConfig::default()
    };
    let r = combo_policy_evaluation(&e, &m, &pi, &dataset_distribution(&data).unwrap(), &cfg).unwrap();
    let greedy = combo_policy_improvement(&r, &cfg, &pi).unwrap();
    let value = |p: &TabularPolicy| -> f64 {
        let v = p.state_average(&r.q.values);
        v.iter().zip(&r.rho_used.state_dist).map(|(a, b)| a * b).sum()
    };
    let best = value(&greedy);
    assert!(best >= value(&pi) - 1e-12);
    for code in 0..8usize {
        let acts: Vec<usize> = (0..3).map(|s| (code >> s) & 1).collect();
        let p = TabularPolicy::deterministic(2, &acts).unwrap();
        assert!(value(&p) <= best + 1e-12);
    }
}

#[test]
fn zero_outer_iterations_return_uniform() {
    let truth = random_mdp(4, 2, 2, 0.9, 1).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(4, 2), 100, 10, 1).unwrap();
    let cfg = ComboConfig {
        outer_iters: 0,
        ..ComboConfig::default()
    };
    let run = run_combo(&data, &truth.template(), &cfg, 0, None).unwrap();
    assert_eq!(run.policy, TabularPolicy::uniform(4, 2));
    assert!(run.iterations.is_empty());
}

#[test]
fn unpenalized_perfect_model_finds_the_optimum() {
    let truth = gridworld(3, 2, (2, 1), &[(1, 0)], 0.1, 0.9).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(6, 4), 50, 10, 0).unwrap();
    let cfg = ComboConfig {
        beta: 0.0,
        f: 0.0,
        improvement: Improvement::Greedy,
        ..ComboConfig::default()
    };
    let run = run_combo_with_model(&data, &truth.template(), LearnedModel::exact(truth.clone()), &cfg, 0, Some(&truth)).unwrap();
    let (opt, _) = value_iteration_oracle(&truth, 1e-12).unwrap();
    close(policy_return(&truth, &run.policy).unwrap(), policy_return(&truth, &opt).unwrap(), 1e-8);
    assert!(run.iterations.iter().all(|it| it.true_return.is_some()));
}

#[test]
fn runs_are_deterministic() {
    let truth = random_mdp(5, 3, 2, 0.9, 4).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(5, 3), 300, 15, 4).unwrap();
    for mode in [SolveMode::Exact, SolveMode::Sampled] {
        let cfg = ComboConfig {
            solve_mode: mode,
            n_rollouts: 200,
            outer_iters: 3,
            ..ComboConfig::default()
        };
        let a = run_combo(&data, &truth.template(), &cfg, 9, None).unwrap();
        let b = run_combo(&data, &truth.template(), &cfg, 9, None).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn rollouts_have_declared_shape_and_support() {
    let truth = random_mdp(5, 2, 2, 0.9, 2).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(5, 2), 200, 20, 2).unwrap();
    let model = fit_mle_model(&data, &truth.template(), 0.0).unwrap();
    let pi = random_policy(5, 2, 3);
    let buf = generate_model_rollouts(&model, &data, &pi, 1, 37, 5).unwrap();
    assert_eq!(buf.steps.len(), 37);
    let buf = generate_model_rollouts(&model, &data, &pi, 4, 50, 5).unwrap();
    assert_eq!(buf.steps.len(), 200);
    for st in &buf.steps {
        let t = &st.transition;
        assert!(model.mdp.transition_row(t.s, t.a)[t.s_next] > 0.0);
    }
    assert!(buf.steps.chunks(4).all(|c| c.iter().enumerate().all(|(i, s)| s.step == i)));
    assert!(generate_model_rollouts(&model, &data, &pi, 0, 1, 0).is_err());
}

#[test]
fn deterministic_rollouts_follow_start_states() {
    let m = TabularMdp::new(3, 1, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.], vec![0.0; 3], 1.0, vec![1.0, 0.0, 0.0], 0.9).unwrap();
    let data = collect_dataset(&m, &TabularPolicy::uniform(3, 1), 9, 9, 0).unwrap();
    let buf = generate_model_rollouts(&LearnedModel::exact(m), &data, &TabularPolicy::uniform(3, 1), 3, 10, 1).unwrap();
    for c in buf.steps.chunks(3) {
        let s0 = c[0].transition.s;
        for (i, st) in c.iter().enumerate() {
            assert_eq!(st.transition.s, (s0 + i) % 3);
        }
    }
}

#[test]
fn rollout_frequencies_match_truncated_occupancy() {
    let truth = random_mdp(6, 3, 3, 0.9, 8).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(6, 3), 500, 25, 8).unwrap();
    let model = fit_mle_model(&data, &truth.template(), 0.0).unwrap();
    let pi = random_policy(6, 3, 8);
    let h = 5;
    let buf = generate_model_rollouts(&model, &data, &pi, h, 20_000, 77).unwrap();
    let sampled = buf.occupancy(0.9).unwrap();
    let exact = rollout_reference_occupancy(&model, &data, &pi, h).unwrap();
    let tv = sampled.tv(&exact);
    assert!(tv <= 0.03, "tv = {tv}");
}

#[test]
fn rho_matches_data_when_started_stationary() {
    let truth = random_mdp(5, 2, 3, 0.9, 21).unwrap();
    let pb = random_policy(5, 2, 21);
    let p = truth.policy_transition(&pb);
    let mut stat = vec![0.2; 5];
    for _ in 0..2000 {
        let mut next = vec![0.0; 5];
        for i in 0..5 {
            for j in 0..5 {
                next[j] += stat[i] * p.get(i, j);
            }
        }
        stat = next;
    }
    let truth = truth.with_init_dist(stat).unwrap();
    let data = collect_dataset(&truth, &pb, 100_000, 50, 21).unwrap();
    let model = fit_mle_model(&data, &truth.template(), 0.0).unwrap();
    let d = dataset_distribution(&data).unwrap();
    let rho = rho_distribution(&model, &pb, &ComboConfig::default(), &d).unwrap();
    assert!(rho.tv(&d) <= 0.05, "tv = {}", rho.tv(&d));
    let total: f64 = rho.sa_dist.iter().sum();
    close(total, 1.0, 1e-12);
}

#[test]
fn rho_on_single_state_is_the_policy_row() {
    let (_, m, _, d) = one_state();
    let pi = TabularPolicy::new(1, 2, vec![0.25, 0.75]).unwrap();
    let rho = rho_distribution(&m, &pi, &ComboConfig::default(), &d).unwrap();
    close(rho.sa_dist[0], 0.25, 1e-12);
    close(rho.sa_dist[1], 0.75, 1e-12);
}

#[test]
fn min_beta_is_zero_without_error_and_exact_otherwise() {
    let truth = random_mdp(5, 2, 2, 0.9, 6).unwrap();
    let data = collect_dataset(&truth, &TabularPolicy::uniform(5, 2), 300, 20, 6).unwrap();
    let d = dataset_distribution(&data).unwrap();
    let exact = EmpiricalMdp {
        mdp: truth.clone(),
        visited_mask: vec![true; 10],
    };
    let pi = random_policy(5, 2, 6);
    let cfg = ComboConfig::default();
    let mb = compute_min_beta(&exact, &LearnedModel::exact(truth.clone()), &truth, &pi, &cfg, &d).unwrap();
    assert!(mb.overestimation.abs() < 1e-9);
    assert!(mb.beta_star < 1e-8);

    let biased = combo_core::model::inject_reward_offset(&LearnedModel::exact(truth.clone()), 0.3).unwrap();
    let mb = compute_min_beta(&exact, &biased, &truth, &pi, &cfg, &d).unwrap();
    assert!(mb.beta_star > 0.0);
    // Start-state value is affine in β: solve at two β values and locate the crossing.
    let start = |beta: f64| -> f64 {
        let c = ComboConfig { beta, ..cfg.clone() };
        let r = combo_policy_evaluation(&exact, &biased, &pi, &d, &c).unwrap();
        start_value(truth.init_dist(), &pi, &r.q.values)
    };
    let target = start_value(truth.init_dist(), &pi, &exact_policy_q(&truth, &pi).unwrap().values);
    let (y0, y1) = (start(0.0), start(1.0));
    let crossing = (y0 - target) / (y0 - y1);
    close(crossing, mb.beta_star, 1e-6);
}

#[test]
fn min_beta_needs_a_positive_penalty() {
    let (e, m, pi, _) = one_state();
    let d = OccupancyMeasure::from_sa(1, 2, vec![1.0, 0.0]).unwrap();
    let truth = e.mdp.clone();
    assert!(matches!(
        compute_min_beta(&e, &m, &truth, &pi, &ComboConfig::default(), &d),
        Err(ComboError::NuNotPositive(_))
    ));
}

#[test]
fn regularizer_matches_definition() {
    let (e, m, pi, d) = one_state();
    let r = combo_policy_evaluation(&e, &m, &pi, &d, &ComboConfig::default()).unwrap();
    let expect = r.q.get(0, 0) - (0.9 * r.q.get(0, 0) + 0.1 * r.q.get(0, 1));
    close(r.regularizer(), expect, 1e-12);
}
