use combo_core::baselines::BaselineConfig;
use combo_core::env::{BehaviorQuality, EnvSpec, RewardVariant};
use combo_core::mdp::policy_return;
use combo_core::truth::PoisonedTruth;
use combo_core::{ComboConfig, TabularPolicy};
use combo_lab::experiment::*;

fn grid() -> EnvSpec {
    EnvSpec::gridworld(4, 4, (3, 3), vec![(1, 2)], 0.1, 0.9)
}

fn config(algo: AlgoSpec, quality: BehaviorQuality, n: usize, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        env: grid(),
        dataset: DatasetSpec {
            quality,
            n_transitions: n,
            episode_len: 40,
            seed: 3,
        },
        algo,
        eval_seeds: seeds,
        output_path: None,
        record_wall_time: false,
    }
}

fn combo() -> AlgoSpec {
    AlgoSpec::Combo {
        config: ComboConfig::default(),
    }
}

#[test]
fn bc_on_expert_data_tracks_the_expert() {
    let c = config(AlgoSpec::Bc, BehaviorQuality::Expert, 20_000, vec![0, 1]);
    for r in run_experiment(&c).unwrap() {
        let j = r.true_return.unwrap();
        assert!((j - r.behavior_return).abs() <= 0.05 * r.behavior_return.abs(), "{j} vs {}", r.behavior_return);
    }
}

#[test]
fn zero_outer_iterations_leave_the_uniform_policy() {
    let algo = AlgoSpec::Combo {
        config: ComboConfig {
            outer_iters: 0,
            ..ComboConfig::default()
        },
    };
    let c = config(algo, BehaviorQuality::Medium, 300, vec![0]);
    let r = &run_experiment(&c).unwrap()[0];
    let truth = combo_core::env::make_environment(&grid()).unwrap();
    let uniform = policy_return(&truth, &TabularPolicy::uniform(16, 4)).unwrap();
    assert_eq!(r.true_return, Some(uniform));
    assert_eq!(r.regularizer, None);
    assert!(r.diagnostics.is_empty());
}

#[test]
fn repeated_runs_are_identical_and_ordered_by_seed_list() {
    let c = config(combo(), BehaviorQuality::Medium, 400, vec![5, 1, 3]);
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 1, 3]);
    assert_eq!(records_to_csv(&a).unwrap(), records_to_csv(&b).unwrap());
    assert!(a.iter().all(|r| r.regularizer.is_some() && !r.diagnostics.is_empty()));
}

#[test]
fn seeds_do_not_depend_on_their_neighbours() {
    let alone = run_experiment(&config(combo(), BehaviorQuality::Medium, 400, vec![3])).unwrap();
    let together = run_experiment(&config(combo(), BehaviorQuality::Medium, 400, vec![1, 3])).unwrap();
    assert_eq!(alone[0], together[1]);
}

#[test]
fn failures_are_recorded_per_seed() {
    let algo = AlgoSpec::Combo {
        config: ComboConfig {
            max_eval_iters: Some(1),
            ..ComboConfig::default()
        },
    };
    let recs = run_experiment(&config(algo, BehaviorQuality::Medium, 200, vec![0, 1])).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.error.is_some() && r.true_return.is_none()));
    let csv = records_to_csv(&recs).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with(&CSV_HEADER.join(",")));
}

#[test]
fn invalid_configs_are_rejected_up_front() {
    let mut c = config(combo(), BehaviorQuality::Medium, 200, vec![]);
    assert!(run_experiment(&c).is_err());
    c.eval_seeds = vec![0];
    c.env = EnvSpec::gridworld(3, 3, (5, 5), vec![], 0.0, 0.9);
    assert!(run_experiment(&c).is_err());
}

#[test]
fn config_hash_ignores_output_settings() {
    let a = config(combo(), BehaviorQuality::Medium, 200, vec![0]);
    let mut b = a.clone();
    b.output_path = Some("x".into());
    b.record_wall_time = true;
    b.eval_seeds = vec![7, 8];
    assert_eq!(a.hash(), b.hash());
    let c = config(
        AlgoSpec::Combo {
            config: ComboConfig {
                beta: 2.0,
                ..ComboConfig::default()
            },
        },
        BehaviorQuality::Medium,
        200,
        vec![0],
    );
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn mean_ci95_matches_hand_computation() {
    let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    // sample variance 5/3, standard error sqrt(5/12)
    assert!((h - 1.96 * (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_ci95(&[7.0]), (7.0, 0.0));
    assert!(mean_ci95(&[]).0.is_nan());
}

#[test]
fn identity_relabel_reproduces_run_experiment() {
    let ds = DatasetSpec {
        quality: BehaviorQuality::Medium,
        n_transitions: 300,
        episode_len: 40,
        seed: 3,
    };
    let algos = [combo(), AlgoSpec::Bc];
    let s = run_generalization_suite(&grid(), &RewardVariant::Identity, &ds, &algos, &[0, 2]).unwrap();
    for algo in &algos {
        let direct = run_experiment(&config(algo.clone(), BehaviorQuality::Medium, 300, vec![0, 2])).unwrap();
        let suite: Vec<&ResultRecord> = s.records.iter().filter(|r| r.algo == algo.id()).collect();
        for (d, r) in direct.iter().zip(suite) {
            assert_eq!(d.true_return, r.true_return);
            assert_eq!(d.regularizer, r.regularizer);
        }
    }
}

#[test]
fn batch_statistics_match_a_scan_of_the_relabeled_data() {
    let ds = DatasetSpec {
        quality: BehaviorQuality::Medium,
        n_transitions: 250,
        episode_len: 40,
        seed: 3,
    };
    let relabel = RewardVariant::MoveGoal { goal: (0, 3) };
    let seeds = [0, 1, 2];
    let s = run_generalization_suite(&grid(), &relabel, &ds, &[AlgoSpec::Bc], &seeds).unwrap();
    let env = EnvSpec {
        reward_variant: Some(relabel),
        ..grid()
    };
    let setup = Setup::new(&env, &ds).unwrap();
    let truth = combo_core::env::make_environment(&env).unwrap();
    let (mut max, mut sum, mut n) = (f64::NEG_INFINITY, 0.0, 0usize);
    for &k in &seeds {
        let d = setup.dataset(k).unwrap();
        for start in (0..d.transitions.len()).step_by(40) {
            let end = (start + 40).min(d.transitions.len());
            let ret: f64 = d.transitions[start..end].iter().map(|t| truth.r(t.s, t.a)).sum();
            max = max.max(ret);
            sum += ret;
            n += 1;
        }
    }
    assert_eq!(s.batch_max, max);
    assert!((s.batch_mean - sum / n as f64).abs() < 1e-12);
    assert_eq!(s.rows.len(), 1);
    assert_eq!(s.rows[0].n_ok, 3);
}

#[test]
fn relabeled_data_carries_the_new_reward_only() {
    let ds = DatasetSpec {
        quality: BehaviorQuality::Medium,
        n_transitions: 200,
        episode_len: 40,
        seed: 3,
    };
    let base = Setup::new(&grid(), &ds).unwrap().dataset(4).unwrap();
    let env = EnvSpec {
        reward_variant: Some(RewardVariant::MoveGoal { goal: (0, 3) }),
        ..grid()
    };
    let moved = Setup::new(&env, &ds).unwrap().dataset(4).unwrap();
    assert_eq!(base.counts_sas, moved.counts_sas);
    for (a, b) in base.transitions.iter().zip(&moved.transitions) {
        assert_eq!((a.s, a.a, a.s_next), (b.s, b.a, b.s_next));
        let goal_new = b.s == 3 * 4;
        assert_eq!(b.r, if goal_new { 1.0 } else if b.s == 2 * 4 + 1 { -1.0 } else { 0.0 });
    }
}

#[test]
fn training_needs_only_the_template() {
    let ds = DatasetSpec {
        quality: BehaviorQuality::Medium,
        n_transitions: 300,
        episode_len: 40,
        seed: 3,
    };
    let setup = Setup::new(&grid(), &ds).unwrap();
    let data = setup.dataset(0).unwrap();
    let poisoned = PoisonedTruth::new(setup.truth.template());
    let template = combo_core::truth::GroundTruth::template(&poisoned);
    for algo in [
        combo(),
        AlgoSpec::Dyna {
            config: ComboConfig::default(),
        },
        AlgoSpec::Cql {
            config: BaselineConfig::default(),
        },
        AlgoSpec::Mopo {
            config: BaselineConfig::default(),
        },
        AlgoSpec::Bc,
    ] {
        let out = train(&algo, &data, &template, 0, None).unwrap();
        assert_eq!(out.policy.n_states(), 16);
        assert!(out.diagnostics.iter().all(|d| d.true_return.is_none()));
    }
}

#[test]
fn selection_suite_scores_against_true_returns() {
    let ds = DatasetSpec {
        quality: BehaviorQuality::Medium,
        n_transitions: 300,
        episode_len: 40,
        seed: 3,
    };
    let cands: Vec<ComboConfig> = [0.5, 5.0]
        .iter()
        .map(|&beta| ComboConfig {
            beta,
            ..ComboConfig::default()
        })
        .collect();
    let s = run_selection_suite(&grid(), &ds, &cands, &[0, 1], 0.1).unwrap();
    for row in &s.seeds {
        let regs: Vec<f64> = row.regularizers.iter().map(|r| r.unwrap()).collect();
        let argmin = if regs[1] < regs[0] { 1 } else { 0 };
        assert_eq!(row.selected, argmin);
        let j: Vec<f64> = row.true_returns.iter().map(|r| r.unwrap()).collect();
        let best = j[0].max(j[1]);
        assert_eq!(row.within_tolerance, j[argmin] >= best - 0.1 * best.abs());
    }
    assert_eq!(s.n_within, s.seeds.iter().filter(|r| r.within_tolerance).count());
}
