//! Seeded instance families that exercise the verification checks at scale.
//! Each suite returns a [`SuiteOutcome`] carrying the failing reports.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{cql_policy_evaluation, BaselineConfig};
use crate::combo::{closed_form_q, combo_policy_evaluation, ComboConfig, ComboError, MuChoice, RhoChoice};
use crate::data::{build_empirical_mdp, collect_dataset, dataset_distribution, Dataset, EmpiricalMdp};
use crate::env::{gridworld, make_behavior_policy, random_mdp, random_policy, BehaviorQuality};
use crate::mdp::{exact_policy_q, exact_policy_v, start_value, OccupancyMeasure, TabularMdp, TabularPolicy};
use crate::model::{fit_mle_model, inject_model_bias, inject_reward_offset, LearnedModel};
use crate::rng::{derive_seed, seeded};
use crate::verify::{
    check_expected_lower_bound, check_interpolant_return_bound, check_interpolant_return_bound_corrected, check_interpolation_lemma, check_pointwise_identity,
    check_cql_ordering, check_safe_policy_improvement, d_cql_distance, CheckStatus, ConcentrationConfig,
    VerificationReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub total: usize,
    pub satisfied: usize,
    pub stats: BTreeMap<String, f64>,
    /// Reports of the instances that failed, each with its witness.
    pub failures: Vec<VerificationReport>,
}

impl SuiteOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            total: 0,
            satisfied: 0,
            stats: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, report: VerificationReport) {
        self.total += 1;
        if report.passed {
            self.satisfied += 1;
        } else {
            self.failures.push(report);
        }
    }

    fn stat(&mut self, key: &str, value: f64) {
        self.stats.insert(key.to_string(), value);
    }

    fn min_stat(&mut self, key: &str, value: f64) {
        let e = self.stats.entry(key.to_string()).or_insert(f64::INFINITY);
        *e = e.min(value);
    }

    fn max_stat(&mut self, key: &str, value: f64) {
        let e = self.stats.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(value);
    }
}

/// A ground-truth MDP with data, the derived `M̄` and `M̂`, and a policy.
#[derive(Debug, Clone)]
pub struct Instance {
    pub truth: TabularMdp,
    pub dataset: Dataset,
    pub empirical: EmpiricalMdp,
    pub model: LearnedModel,
    pub policy: TabularPolicy,
    pub data_dist: OccupancyMeasure,
}

/// Random MDP with `2..=max_states` states, data from a random behavior
/// policy, an MLE model with `bias` dynamics noise, and a random policy.
pub fn random_instance(
    seed: u64,
    max_states: usize,
    n_actions: usize,
    n_transitions: usize,
    bias: f64,
) -> Result<Instance, ComboError> {
    let mut rng = seeded(seed);
    let ns = 2 + rng.random_range(0..max_states.max(2) - 1);
    let gamma = [0.8, 0.9, 0.95][rng.random_range(0..3)];
    let truth = random_mdp(ns, n_actions, ns.min(3), gamma, derive_seed(seed, 1))?;
    let behavior = random_policy(ns, n_actions, derive_seed(seed, 2));
    let dataset = collect_dataset(&truth, &behavior, n_transitions, 20, derive_seed(seed, 3))?;
    let empirical = build_empirical_mdp(&dataset, &truth.template())?;
    let mut model = fit_mle_model(&dataset, &truth.template(), 0.0)?;
    if bias > 0.0 {
        model = inject_model_bias(&model, bias, derive_seed(seed, 4))?;
    }
    let policy = random_policy(ns, n_actions, derive_seed(seed, 5));
    let data_dist = dataset_distribution(&dataset)?;
    Ok(Instance {
        truth,
        dataset,
        empirical,
        model,
        policy,
        data_dist,
    })
}

pub fn suite_interpolation_lemma(samples: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("interpolation_lemma");
    let r = check_interpolation_lemma(samples, seed);
    out.stat("margin", r.margin);
    out.record(r);
    out.passed = out.failures.is_empty();
    out
}

/// Iterative vs direct solve, and the pointwise identity, on the same
/// instances. Returns `(equivalence, identity)`.
pub fn suite_fixed_point(n: usize, seed: u64) -> Result<(SuiteOutcome, SuiteOutcome), ComboError> {
    const AGREE: f64 = 1e-7;
    let mut eq = SuiteOutcome::new("fixed_point_equivalence");
    let mut id = SuiteOutcome::new("pointwise_identity");
    for i in 0..n {
        let s = derive_seed(seed, i as u64);
        let inst = random_instance(s, 20, 4, 200, 0.1 * (i % 3) as f64)?;
        let mut rng = seeded(derive_seed(s, 99));
        let cfg = ComboConfig {
            beta: rng.random_range(0.0..5.0),
            f: rng.random_range(0.1..0.9),
            mu_choice: if i % 2 == 0 { MuChoice::CurrentPolicy } else { MuChoice::UniformActions },
            rho_choice: if i % 4 == 3 { RhoChoice::Df } else { RhoChoice::ModelOccupancy },
            eval_tol: 1e-10,
            ..ComboConfig::default()
        };
        let solve = combo_policy_evaluation(&inst.empirical, &inst.model, &inst.policy, &inst.data_dist, &cfg)?;
        let direct = closed_form_q(&inst.empirical, &inst.model, &inst.policy, &solve.penalty, cfg.f, cfg.beta)?;
        let diff = solve.q.max_abs_diff(&direct);
        eq.max_stat("max_diff", diff);
        let mut r = VerificationReport {
            check_name: "fixed_point_equivalence".into(),
            status: if diff <= AGREE { CheckStatus::Pass } else { CheckStatus::Fail },
            passed: diff <= AGREE,
            witness: BTreeMap::new(),
            note: None,
            tolerance: AGREE,
            margin: AGREE - diff,
            seed: Some(s),
        };
        r.witness.insert("max_diff".into(), diff);
        r.witness.insert("n_states".into(), inst.truth.n_states() as f64);
        eq.record(r);
        let r = check_pointwise_identity(&solve, &inst.empirical, &inst.model, &inst.policy, cfg.f, cfg.beta)?.seeded(s);
        id.max_stat("max_residual", r.witness["residual"]);
        id.record(r);
    }
    eq.passed = eq.total == n && eq.failures.is_empty();
    id.passed = id.total == n && id.failures.is_empty();
    Ok((eq, id))
}

/// `n` instances with sampling error and/or model bias, plus `n_optimistic`
/// reward-inflated models. Passes when every bound holds at the tested `β`
/// and at least `min_fail_at_zero` optimistic fixtures violate it at `β = 0`.
pub fn suite_expected_lower_bound(
    n: usize,
    n_optimistic: usize,
    min_fail_at_zero: usize,
    seed: u64,
) -> Result<SuiteOutcome, ComboError> {
    let mut out = SuiteOutcome::new("expected_lower_bound");
    let f_grid = [0.3, 0.5, 0.8];
    for i in 0..n {
        let s = derive_seed(seed, i as u64);
        let mut inst = random_instance(s, 10, 3, 150, if i % 3 == 1 { 0.2 } else { 0.0 })?;
        if i % 3 == 2 {
            let delta = seeded(derive_seed(s, 7)).random_range(-0.3..0.3);
            inst.model = inject_reward_offset(&inst.model, delta)?;
        }
        let cfg = ComboConfig {
            f: f_grid[i % 3],
            ..ComboConfig::default()
        };
        let r = check_expected_lower_bound(&inst.truth, &inst.empirical, &inst.model, &inst.policy, &cfg, &inst.data_dist)?
            .seeded(s);
        out.min_stat("min_margin", r.margin);
        out.record(r);
    }
    let mut fail_zero = 0usize;
    let mut optimistic_ok = 0usize;
    for i in 0..n_optimistic {
        let s = derive_seed(seed ^ 0x6f70, i as u64);
        let mut inst = random_instance(s, 10, 3, 2000, 0.0)?;
        inst.model = inject_reward_offset(&inst.model, 0.5)?;
        let r = check_expected_lower_bound(&inst.truth, &inst.empirical, &inst.model, &inst.policy, &ComboConfig::default(), &inst.data_dist)?
            .seeded(s);
        if r.witness.get("fails_at_zero") == Some(&1.0) {
            fail_zero += 1;
        }
        if r.passed {
            optimistic_ok += 1;
        } else {
            out.failures.push(r);
        }
    }
    out.stat("optimistic_fixtures", n_optimistic as f64);
    out.stat("optimistic_fail_at_zero", fail_zero as f64);
    out.stat("optimistic_bound_holds", optimistic_ok as f64);
    out.passed = out.satisfied == n && optimistic_ok == n_optimistic && fail_zero >= min_fail_at_zero;
    Ok(out)
}

/// Two states, two actions, `γ = 0.9`. In `s0`, `a0` self-loops with reward
/// 0 and `a1` moves to `s1`; `s1` is absorbing with reward 1. `π` always
/// plays `a0` from `μ0 = δ(s0)`, and the data is split evenly between
/// `(s0, a0)` and `(s1, a0)`. With an exact model and `f = 0.5`,
/// `pen(s1, a0) = -2`, so `Q̂(s1, a0) = 10 + 20β` exceeds `Q^π(s1, a0)`
/// while the start-state value is pushed down.
pub fn overestimation_fixture() -> (TabularMdp, EmpiricalMdp, LearnedModel, TabularPolicy, OccupancyMeasure) {
    let truth = TabularMdp::new(
        2,
        2,
        vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 1.0],
        1.0,
        vec![1.0, 0.0],
        0.9,
    )
    .expect("fixture is valid");
    let empirical = EmpiricalMdp {
        mdp: truth.clone(),
        visited_mask: vec![true, false, true, false],
    };
    let policy = TabularPolicy::deterministic(2, &[0, 0]).expect("fixture is valid");
    let data = OccupancyMeasure::from_sa(2, 2, vec![0.5, 0.0, 0.5, 0.0]).expect("fixture is valid");
    (truth.clone(), empirical, LearnedModel::exact(truth), policy, data)
}

/// (a) pointwise CQL bound without sampling error, (b) the two-state
/// fixture where COMBO exceeds `Q^π` on a dataset cell, (c) the dataset
/// value ordering against CQL whenever condition `(*)` is non-positive.
pub fn suite_cql_contrast(n_pointwise: usize, n_sweep: usize, seed: u64) -> Result<SuiteOutcome, ComboError> {
    let mut out = SuiteOutcome::new("cql_contrast");
    let cfg = BaselineConfig::default();
    let mut a_ok = 0usize;
    for i in 0..n_pointwise {
        let s = derive_seed(seed, i as u64);
        let mut rng = seeded(s);
        let ns = 2 + rng.random_range(0..9);
        let truth = random_mdp(ns, 3, ns.min(3), 0.9, derive_seed(s, 1))?;
        let pi = random_policy(ns, 3, derive_seed(s, 2));
        let pb = random_policy(ns, 3, derive_seed(s, 3));
        let exact = EmpiricalMdp {
            mdp: truth.clone(),
            visited_mask: vec![true; truth.n_cells()],
        };
        let q = cql_policy_evaluation(&exact, &pi, &pb, &cfg)?;
        let v_hat = pi.state_average(&q.values);
        let v = exact_policy_v(&truth, &pi)?;
        let dist = d_cql_distance(&pi, &pb, cfg.epsilon_pb);
        let worst = (0..ns)
            .filter(|&st| dist[st] > 0.0)
            .map(|st| v[st] - v_hat[st])
            .fold(f64::INFINITY, f64::min);
        if worst >= -1e-9 {
            a_ok += 1;
        } else {
            let mut r = VerificationReport {
                check_name: "cql_pointwise".into(),
                status: CheckStatus::Fail,
                passed: false,
                witness: BTreeMap::new(),
                note: None,
                tolerance: 1e-9,
                margin: worst,
                seed: Some(s),
            };
            r.witness.insert("worst_gap".into(), worst);
            out.failures.push(r);
        }
    }
    out.stat("pointwise_instances", n_pointwise as f64);
    out.stat("pointwise_holds", a_ok as f64);

    let (truth, empirical, model, policy, data) = overestimation_fixture();
    let ccfg = ComboConfig {
        beta: 1.0,
        f: 0.5,
        ..ComboConfig::default()
    };
    let solve = combo_policy_evaluation(&empirical, &model, &policy, &data, &ccfg)?;
    let q = exact_policy_q(&truth, &policy)?;
    let above = (0..q.values.len())
        .filter(|&i| data.sa_dist[i] > 0.0)
        .map(|i| solve.q.values[i] - q.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mu0 = truth.init_dist();
    let start_gap = start_value(mu0, &policy, &q.values) - start_value(mu0, &policy, &solve.q.values);
    let b_ok = above > 0.0 && start_gap >= -1e-8;
    out.stat("fixture_max_excess_on_data", above);
    out.stat("fixture_start_margin", start_gap);

    let mut considered = 0usize;
    let mut violations = 0usize;
    for i in 0..n_sweep {
        let s = derive_seed(seed ^ 0x7032, i as u64);
        let mut rng = seeded(s);
        let ns = 2 + rng.random_range(0..7);
        let truth = random_mdp(ns, 3, ns.min(3), 0.9, derive_seed(s, 1))?;
        let pb = random_policy(ns, 3, derive_seed(s, 2));
        let data = collect_dataset(&truth, &pb, 300, 15, derive_seed(s, 3))?;
        // Alternate between policies near and far from the behavior.
        let far = random_policy(ns, 3, derive_seed(s, 4));
        let pi = far.mix(&pb, rng.random_range(0.0..1.0))?;
        let beta = rng.random_range(0.1..5.0);
        let r = check_cql_ordering(&truth, &data, &pi, beta)?.seeded(s);
        if r.status != CheckStatus::Inconclusive {
            considered += 1;
            if !r.passed {
                violations += 1;
                out.failures.push(r);
            }
        }
    }
    out.stat("ordering_instances", n_sweep as f64);
    out.stat("ordering_condition_nonpositive", considered as f64);
    out.stat("ordering_violations", violations as f64);
    out.total = n_pointwise + 1 + considered;
    out.satisfied = a_ok + b_ok as usize + (considered - violations);
    out.passed = a_ok == n_pointwise && b_ok && violations == 0;
    Ok(out)
}

/// Containment of `J(π, M_f)` around `J(π, aux)` with `M₁` the empirical
/// MDP of `aux` data and `M₂` a noised copy of `aux`. The outcome is judged
/// on the stated `α`; the occupancy-corrected half-width is tallied in
/// `stats` for comparison.
pub fn suite_interpolant_bound(n: usize, seed: u64) -> Result<SuiteOutcome, ComboError> {
    let mut out = SuiteOutcome::new("interpolant_return_bound");
    let mags = [0.0, 0.05, 0.2];
    let fs = [0.5, 0.8];
    let mut corrected = 0usize;
    for i in 0..n {
        let s = derive_seed(seed, i as u64);
        let inst = random_instance(s, 10, 3, 1000, 0.0)?;
        let m2 = inject_model_bias(&LearnedModel::exact(inst.truth.clone()), mags[i % 3], derive_seed(s, 8))?.mdp;
        let f = fs[(i / 3) % 2];
        let r = check_interpolant_return_bound(&inst.empirical.mdp, &m2, &inst.truth, f, &inst.policy)?.seeded(s);
        let c = check_interpolant_return_bound_corrected(&inst.empirical.mdp, &m2, &inst.truth, f, &inst.policy)?;
        out.min_stat("min_slack", r.margin);
        out.min_stat("corrected_min_slack", c.margin);
        corrected += c.passed as usize;
        out.record(r);
    }
    out.stat("corrected_satisfied", corrected as f64);
    out.passed = out.satisfied == n;
    Ok(out)
}

/// 5x5 gridworld with hazards used by the improvement suites.
pub fn safety_grid() -> TabularMdp {
    gridworld(5, 5, (4, 4), &[(1, 1), (3, 1), (1, 3), (2, 3)], 0.1, 0.9).expect("grid spec is valid")
}

/// `J(π_out) ≥ J(π_β) - ζ` on every seed, and raw improvement on at least
/// `min_improved` seeds.
pub fn suite_safe_improvement(
    seeds: &[u64],
    n_transitions: usize,
    min_improved: usize,
) -> Result<SuiteOutcome, ComboError> {
    let mut out = SuiteOutcome::new("safe_policy_improvement");
    let truth = safety_grid();
    let behavior = make_behavior_policy(&truth, BehaviorQuality::Medium)?;
    let conc = ConcentrationConfig::defaults(truth.r_max(), truth.n_states(), 0.1);
    let cfg = ComboConfig::default();
    let mut improved = 0usize;
    for &s in seeds {
        let data = collect_dataset(&truth, &behavior, n_transitions, 50, s)?;
        let r = check_safe_policy_improvement(&truth, &data, &cfg, &conc, s, Some(&behavior))?;
        if r.witness["improvement"] >= 0.0 {
            improved += 1;
        }
        out.min_stat("min_margin", r.margin);
        out.min_stat("min_improvement", r.witness["improvement"]);
        out.record(r);
    }
    out.stat("improved_seeds", improved as f64);
    out.passed = out.satisfied == seeds.len() && improved >= min_improved;
    Ok(out)
}
