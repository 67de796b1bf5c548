//! Mechanical checks of the theoretical statements, each producing a
//! [`VerificationReport`] with enough witness data to reproduce a failure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{behavior_cloning, cql_penalty, CqlSampling};
use crate::combo::{
    closed_form_q, combo_policy_evaluation, compute_min_beta, exact_distributions, interpolant_resolvent_apply,
    nu, nu_tilde, run_combo, ComboConfig, ComboError, ComboSolveResult,
};
use crate::data::{build_empirical_mdp, dataset_distribution, Dataset, EmpiricalMdp};
use crate::mdp::{
    exact_policy_q, interpolant_mdp, policy_return, start_value, state_action_occupancy, MdpError, OccupancyMeasure,
    TabularMdp, TabularPolicy,
};
use crate::model::{dynamics_gap, fit_mle_model, model_error_profile, LearnedModel};
use crate::rng::{dirichlet_ones, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The premise of the statement does not hold on this instance.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub status: CheckStatus,
    pub passed: bool,
    pub witness: BTreeMap<String, f64>,
    pub note: Option<String>,
    pub tolerance: f64,
    /// Distance from the failure threshold; negative when failing.
    pub margin: f64,
    pub seed: Option<u64>,
}

impl VerificationReport {
    fn new(name: &str, status: CheckStatus, tolerance: f64, margin: f64) -> Self {
        Self {
            check_name: name.to_string(),
            status,
            passed: status != CheckStatus::Fail,
            witness: BTreeMap::new(),
            note: None,
            tolerance,
            margin,
            seed: None,
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.witness.insert(key.to_string(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn random_pair(rng: &mut crate::rng::SeededRng, cells: usize) -> (OccupancyMeasure, OccupancyMeasure) {
    let r = OccupancyMeasure::from_sa(cells, 1, dirichlet_ones(rng, cells)).expect("dirichlet");
    let d = OccupancyMeasure::from_sa(cells, 1, dirichlet_ones(rng, cells)).expect("dirichlet");
    (r, d)
}

/// Nonnegativity, monotonicity in `f`, and the zero conditions of `ν`, plus
/// the sign of `ν̃`, over random full-support pairs and an 11-point `f` grid.
pub fn check_interpolation_lemma(samples: usize, seed: u64) -> VerificationReport {
    const TOL: f64 = 1e-12;
    let mut rng = seeded(seed);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut worst_nu = f64::INFINITY;
    let mut worst_mono = f64::INFINITY;
    let mut worst_tilde = f64::INFINITY;
    let mut zero_iff_failures = 0usize;
    let mut strict_failures = 0usize;
    let mut first_bad: Option<usize> = None;
    for i in 0..samples.max(1) {
        let cells = 2 + i % 7;
        let (rho, d) = if i == 0 {
            let (r, _) = random_pair(&mut rng, cells);
            (r.clone(), r)
        } else {
            random_pair(&mut rng, cells)
        };
        let tv = rho.tv(&d);
        let mut prev = f64::NEG_INFINITY;
        let mut bad = false;
        for &f in &grid {
            let v = nu(&rho, &d, f);
            worst_nu = worst_nu.min(v + TOL);
            worst_mono = worst_mono.min(v - prev + TOL);
            prev = v;
            let zero = v <= TOL;
            let expect_zero = f == 0.0 || tv <= TOL;
            if zero != expect_zero {
                zero_iff_failures += 1;
                bad = true;
            }
            let t = nu_tilde(&rho, &d, f);
            worst_tilde = worst_tilde.min(TOL - t);
            if tv > 1e-6 && f < 1.0 && !(t < 0.0) {
                strict_failures += 1;
                bad = true;
            }
        }
        if (bad || worst_nu < 0.0 || worst_mono < 0.0 || worst_tilde < 0.0) && first_bad.is_none() {
            first_bad = Some(i);
        }
    }
    let margin = worst_nu.min(worst_mono).min(worst_tilde);
    let ok = margin >= 0.0 && zero_iff_failures == 0 && strict_failures == 0;
    let mut r = VerificationReport::new("interpolation_lemma", status(ok), TOL, margin)
        .with("samples", samples as f64)
        .with("nu_min_margin", worst_nu)
        .with("monotone_min_margin", worst_mono)
        .with("nu_tilde_min_margin", worst_tilde)
        .with("zero_iff_failures", zero_iff_failures as f64)
        .with("strict_negativity_failures", strict_failures as f64)
        .seeded(seed);
    if let Some(i) = first_bad {
        r = r.with("first_failing_sample", i as f64);
    }
    r
}

/// Residual of `Q̂ = Q^π_{M_f} - β S^π_{M_f}[pen]`.
pub fn check_pointwise_identity(
    solve: &ComboSolveResult,
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    f: f64,
    beta: f64,
) -> Result<VerificationReport, ComboError> {
    const TOL: f64 = 1e-8;
    let mf = interpolant_mdp(&empirical.mdp, &model.mdp, f)?;
    let qf = exact_policy_q(&mf, policy)?;
    let spen = interpolant_resolvent_apply(empirical, model, policy, f, &solve.penalty)?;
    let mut residual: f64 = 0.0;
    let mut cell = 0;
    for i in 0..qf.values.len() {
        let e = libm::fabs(solve.q.values[i] - (qf.values[i] - beta * spen[i]));
        if e > residual {
            residual = e;
            cell = i;
        }
    }
    Ok(
        VerificationReport::new("pointwise_identity", status(residual <= TOL), TOL, TOL - residual)
            .with("residual", residual)
            .with("worst_cell", cell as f64)
            .with("beta", beta)
            .with("f", f),
    )
}

/// `E_{μ0,π}[Q̂] ≤ E_{μ0,π}[Q^π]` at `β = 1.01 β* + 1`.
///
/// The witness also records whether the bound already fails at `β = 0`.
pub fn check_expected_lower_bound(
    truth: &TabularMdp,
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
) -> Result<VerificationReport, ComboError> {
    const TOL: f64 = 1e-8;
    let mb = match compute_min_beta(empirical, model, truth, policy, config, data_dist) {
        Ok(mb) => mb,
        Err(ComboError::NuNotPositive(v)) => {
            return Ok(VerificationReport::new("expected_lower_bound", CheckStatus::Inconclusive, TOL, 0.0)
                .with("nu", v)
                .note("expected penalty is zero; no beta can enforce the bound"));
        }
        Err(ComboError::Unattainable { over, slope }) => {
            return Ok(VerificationReport::new("expected_lower_bound", CheckStatus::Fail, TOL, -over)
                .with("overestimation", over)
                .with("slope", slope)
                .note("penalty slope is not positive"));
        }
        Err(e) => return Err(e),
    };
    let beta = 1.01 * mb.beta_star + 1.0;
    let cfg = ComboConfig {
        beta,
        ..config.clone()
    };
    let solve = combo_policy_evaluation(empirical, model, policy, data_dist, &cfg)?;
    let mu0 = truth.init_dist();
    let lhs = start_value(mu0, policy, &solve.q.values);
    let rhs = start_value(mu0, policy, &exact_policy_q(truth, policy)?.values);
    let margin = rhs + TOL - lhs;
    Ok(VerificationReport::new("expected_lower_bound", status(margin >= 0.0), TOL, margin)
        .with("beta_star", mb.beta_star)
        .with("beta_tested", beta)
        .with("overestimation_at_zero", mb.overestimation)
        .with("fails_at_zero", if mb.overestimation > TOL { 1.0 } else { 0.0 })
        .with("slope", mb.slope)
        .with("nu", mb.nu_value)
        .with("conservative_value", lhs)
        .with("true_value", rhs))
}

/// `ν̃ < 0` whenever `ρ ≠ d` and `f < 1`.
pub fn check_dataset_overestimation(rho: &OccupancyMeasure, data_dist: &OccupancyMeasure, f: f64) -> VerificationReport {
    let tv = rho.tv(data_dist);
    let t = nu_tilde(rho, data_dist, f);
    let base = |s| {
        VerificationReport::new("dataset_overestimation", s, 0.0, -t)
            .with("nu_tilde", t)
            .with("tv", tv)
            .with("f", f)
    };
    if tv <= 1e-9 || f >= 1.0 {
        return base(CheckStatus::Inconclusive).note(format!("boundary case, nu_tilde={t:e}"));
    }
    base(status(t < 0.0))
}

fn floored(behavior: &TabularPolicy, epsilon_pb: f64) -> Vec<f64> {
    behavior.probs().iter().map(|p| p.max(epsilon_pb)).collect()
}

/// `(*) = E_ρ[π/π_β] - E_{d(s), π}[π/π_β]`.
pub fn ordering_condition(
    policy: &TabularPolicy,
    behavior: &TabularPolicy,
    rho: &OccupancyMeasure,
    data_state_dist: &OccupancyMeasure,
    epsilon_pb: f64,
) -> f64 {
    let pb = floored(behavior, epsilon_pb);
    let ratio: Vec<f64> = policy.probs().iter().zip(&pb).map(|(p, b)| p / b).collect();
    let on_rho = rho.expectation(&ratio);
    let na = policy.n_actions();
    let mut on_data = 0.0;
    for (s, &ds) in data_state_dist.state_dist.iter().enumerate() {
        for a in 0..na {
            on_data += ds * policy.prob(s, a) * ratio[s * na + a];
        }
    }
    on_rho - on_data
}

/// Per-state `Σ_a π (π / π_β - 1)`.
pub fn d_cql_distance(policy: &TabularPolicy, behavior: &TabularPolicy, epsilon_pb: f64) -> Vec<f64> {
    let pb = floored(behavior, epsilon_pb);
    let na = policy.n_actions();
    (0..policy.n_states())
        .map(|s| {
            (0..na)
                .map(|a| {
                    let p = policy.prob(s, a);
                    p * (p / pb[s * na + a] - 1.0)
                })
                .sum()
        })
        .collect()
}

pub const EPSILON_PB: f64 = 1e-6;

/// Compares the dataset-averaged values of the one-step asymptotic COMBO and
/// CQL estimates at `f = 1`: `Q̂ = Q^π - β (ρ - d)/d` and
/// `Q̂_CQL = Q^π - β (π - π_β)/π_β`, with `ρ(s,a) = d^π_M̂(s) π(a|s)`,
/// `d(s,a) = d(s) π_β(a|s)` and `π_β` the cloned behavior policy.
pub fn check_cql_ordering(
    truth: &TabularMdp,
    dataset: &Dataset,
    policy: &TabularPolicy,
    beta: f64,
) -> Result<VerificationReport, ComboError> {
    const TOL: f64 = 1e-8;
    let (ns, na) = (truth.n_states(), truth.n_actions());
    let behavior = behavior_cloning(dataset);
    let pb = floored(&behavior, EPSILON_PB);
    let data = dataset_distribution(dataset)?;
    let model = fit_mle_model(dataset, &truth.template(), 0.0)?;
    let rho = state_action_occupancy(&model.mdp, policy)?;
    let q = exact_policy_q(truth, policy)?;
    let cql_pen = cql_penalty(policy, &behavior, EPSILON_PB, CqlSampling::CurrentPolicy);

    let mut delta_combo = 0.0;
    let mut delta_cql = 0.0;
    for s in 0..ns {
        let ds = data.state_dist[s];
        if ds == 0.0 {
            continue;
        }
        for a in 0..na {
            let i = s * na + a;
            let w = ds * policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let pen = (rho.state_dist[s] * policy.prob(s, a) - ds * behavior.prob(s, a)) / (ds * pb[i]);
            delta_combo += w * (q.values[i] - beta * pen);
            delta_cql += w * (q.values[i] - beta * cql_pen[i]);
        }
    }
    let condition = ordering_condition(policy, &behavior, &rho, &data, EPSILON_PB);
    let gap = delta_combo - delta_cql;
    let r = VerificationReport::new("cql_ordering", CheckStatus::Pass, TOL, gap + TOL)
        .with("delta_combo", delta_combo)
        .with("delta_cql", delta_cql)
        .with("condition", condition)
        .with("beta", beta);
    if condition > 0.0 {
        let mut r = r;
        r.status = CheckStatus::Inconclusive;
        return Ok(r.note("condition (*) is positive; ordering not asserted"));
    }
    let mut r = r;
    r.status = status(gap >= -TOL);
    r.passed = r.status != CheckStatus::Fail;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTerms {
    /// `2γ(1-f) R_max D(P₂, P) / (1-γ)²`.
    pub model_term: f64,
    /// `γ f / (1-γ) |E_{d^π_M π}[(P^π_M - P^π_{M₁}) Q^π_M]|`.
    pub empirical_term: f64,
    /// `f/(1-γ) E|r₁ - r| + (1-f)/(1-γ) E|r₂ - r|` under `d^π_M π`.
    pub reward_term: f64,
    pub alpha: f64,
}

/// The half-width `α` of the interval around `J(π, aux)` containing
/// `J(π, M_f)`, with expectations under `d^π_aux π` as stated.
pub fn interpolant_alpha(
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
) -> Result<AlphaTerms, MdpError> {
    let d = state_action_occupancy(aux, policy)?;
    alpha_under(m1, m2, aux, f, policy, &d)
}

/// `α` with the expectations taken under `d^π_{M_f} π`, the occupancy the
/// simulation lemma actually produces. Always a valid half-width.
pub fn interpolant_alpha_corrected(
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
) -> Result<AlphaTerms, MdpError> {
    let mf = interpolant_mdp(m1, m2, f)?;
    let d = state_action_occupancy(&mf, policy)?;
    alpha_under(m1, m2, aux, f, policy, &d)
}

fn alpha_under(
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
    d: &OccupancyMeasure,
) -> Result<AlphaTerms, MdpError> {
    let gamma = aux.gamma();
    let r_max = m1.r_max().max(m2.r_max()).max(aux.r_max());
    let d2 = dynamics_gap(m2, aux)?.max_tv;
    let q = exact_policy_q(aux, policy)?;
    let v = policy.state_average(&q.values);
    let next_aux = aux.expected_next(&v);
    let next_m1 = m1.expected_next(&v);
    let diff: Vec<f64> = next_aux.iter().zip(&next_m1).map(|(a, b)| a - b).collect();
    let empirical_term = gamma * f / (1.0 - gamma) * libm::fabs(d.expectation(&diff));
    let r1: Vec<f64> = m1.reward().iter().zip(aux.reward()).map(|(a, b)| libm::fabs(a - b)).collect();
    let r2: Vec<f64> = m2.reward().iter().zip(aux.reward()).map(|(a, b)| libm::fabs(a - b)).collect();
    let reward_term = (f * d.expectation(&r1) + (1.0 - f) * d.expectation(&r2)) / (1.0 - gamma);
    let model_term = 2.0 * gamma * (1.0 - f) / ((1.0 - gamma) * (1.0 - gamma)) * r_max * d2;
    Ok(AlphaTerms {
        model_term,
        empirical_term,
        reward_term,
        alpha: model_term + empirical_term + reward_term,
    })
}

/// `J(π, M_f) ∈ [J(π, aux) - α, J(π, aux) + α]` with `α` as stated.
pub fn check_interpolant_return_bound(
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
) -> Result<VerificationReport, MdpError> {
    let terms = interpolant_alpha(m1, m2, aux, f, policy)?;
    containment("interpolant_return_bound", terms, m1, m2, aux, f, policy)
}

/// As [`check_interpolant_return_bound`] with [`interpolant_alpha_corrected`].
pub fn check_interpolant_return_bound_corrected(
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
) -> Result<VerificationReport, MdpError> {
    let terms = interpolant_alpha_corrected(m1, m2, aux, f, policy)?;
    containment("interpolant_return_bound_corrected", terms, m1, m2, aux, f, policy)
}

fn containment(
    name: &str,
    terms: AlphaTerms,
    m1: &TabularMdp,
    m2: &TabularMdp,
    aux: &TabularMdp,
    f: f64,
    policy: &TabularPolicy,
) -> Result<VerificationReport, MdpError> {
    const TOL: f64 = 1e-10;
    let mf = interpolant_mdp(m1, m2, f)?;
    let jf = policy_return(&mf, policy)?;
    let ja = policy_return(aux, policy)?;
    let slack = terms.alpha - libm::fabs(jf - ja);
    Ok(VerificationReport::new(name, status(slack >= -TOL), TOL, slack)
        .with("alpha", terms.alpha)
        .with("model_term", terms.model_term)
        .with("empirical_term", terms.empirical_term)
        .with("reward_term", terms.reward_term)
        .with("j_interpolant", jf)
        .with("j_aux", ja)
        .with("f", f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub delta: f64,
    pub c_r: f64,
    pub c_p: f64,
    pub c_rt: f64,
}

impl ConcentrationConfig {
    /// Hoeffding for rewards, L1 concentration for transition rows.
    pub fn defaults(r_max: f64, n_states: usize, delta: f64) -> Self {
        let l = libm::log(2.0 / delta);
        Self {
            delta,
            c_r: r_max * libm::sqrt(l / 2.0),
            c_p: libm::sqrt(2.0 * n_states as f64 * l),
            c_rt: r_max * libm::sqrt(l / 2.0),
        }
    }

    pub fn zero() -> Self {
        Self {
            delta: 0.5,
            c_r: 0.0,
            c_p: 0.0,
            c_rt: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ComboError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ComboError::Config("delta must lie in (0, 1)"));
        }
        if !(self.c_r >= 0.0 && self.c_p >= 0.0 && self.c_rt >= 0.0) {
            return Err(ComboError::Config("concentration constants must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaTerms {
    /// `4fγR_max C_P/(1-γ)² E_{d^{π_out}_M}[√(|A|/|D(s)|) √(D_CQL + 1)]`.
    pub sampling_term: f64,
    /// `4γR_max C_P f/(1-γ)² E_{d^{π_β}_M}[√(|A|/|D(s)|)]`.
    pub behavior_term: f64,
    /// Exact reward-gap terms for `π_out` and `π_β`.
    pub reward_term: f64,
    /// `4(1-f)γR_max/(1-γ)² D(P_M, P_M̂)`.
    pub model_term: f64,
    /// `ν(ρ^{π_out}, f) - ν(ρ^β, f)`.
    pub c: f64,
    pub premise_met: bool,
    pub zeta: f64,
}

/// Floor for `|D(s)|` on states absent from the data.
pub const UNVISITED_COUNT: f64 = 0.5;

fn reward_gap(
    truth: &TabularMdp,
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    f: f64,
) -> Result<f64, MdpError> {
    let d = state_action_occupancy(truth, policy)?;
    let gap = |m: &TabularMdp| -> Vec<f64> { m.reward().iter().zip(truth.reward()).map(|(a, b)| libm::fabs(a - b)).collect() };
    let gamma = truth.gamma();
    Ok((f * d.expectation(&gap(&empirical.mdp)) + (1.0 - f) * d.expectation(&gap(&model.mdp))) / (1.0 - gamma))
}

pub fn compute_zeta(
    truth: &TabularMdp,
    dataset: &Dataset,
    model: &LearnedModel,
    pi_out: &TabularPolicy,
    behavior: &TabularPolicy,
    config: &ComboConfig,
    conc: &ConcentrationConfig,
) -> Result<ZetaTerms, ComboError> {
    conc.validate()?;
    let gamma = truth.gamma();
    let f = config.f;
    let r_max = truth.r_max();
    let na = truth.n_actions() as f64;
    let h2 = (1.0 - gamma) * (1.0 - gamma);
    let empirical = build_empirical_mdp(dataset, &truth.template())?;
    let data = dataset_distribution(dataset)?;

    let inv_sqrt_count: Vec<f64> = dataset
        .counts_s
        .iter()
        .map(|&n| {
            let n = if n == 0 { UNVISITED_COUNT } else { n as f64 };
            libm::sqrt(na / n)
        })
        .collect();
    let dcql = d_cql_distance(pi_out, behavior, EPSILON_PB);
    let d_out = state_action_occupancy(truth, pi_out)?;
    let d_beta = state_action_occupancy(truth, behavior)?;
    let samp: f64 = (0..truth.n_states())
        .map(|s| d_out.state_dist[s] * inv_sqrt_count[s] * libm::sqrt(dcql[s].max(0.0) + 1.0))
        .sum();
    let sampling_term = 4.0 * f * gamma * r_max * conc.c_p / h2 * samp;
    let beh: f64 = (0..truth.n_states()).map(|s| d_beta.state_dist[s] * inv_sqrt_count[s]).sum();
    let behavior_term = 4.0 * gamma * r_max * conc.c_p * f / h2 * beh;
    let reward_term =
        reward_gap(truth, &empirical, model, pi_out, f)? + reward_gap(truth, &empirical, model, behavior, f)?;
    let model_term = 4.0 * (1.0 - f) * gamma * r_max / h2 * model_error_profile(model, truth)?.max_tv;

    let rho_out = state_action_occupancy(&model.mdp, pi_out)?;
    let rho_beta = state_action_occupancy(&model.mdp, behavior)?;
    let c = nu(&rho_out, &data, f) - nu(&rho_beta, &data, f);
    let zeta = sampling_term + behavior_term + reward_term + model_term - config.beta * c / (1.0 - gamma);
    Ok(ZetaTerms {
        sampling_term,
        behavior_term,
        reward_term,
        model_term,
        c,
        premise_met: c > 0.0,
        zeta,
    })
}

/// Runs COMBO on `dataset` and checks `J(π_out, M) ≥ J(π_β, M) - ζ`.
///
/// `behavior` defaults to the cloned policy when not supplied.
pub fn check_safe_policy_improvement(
    truth: &TabularMdp,
    dataset: &Dataset,
    config: &ComboConfig,
    conc: &ConcentrationConfig,
    seed: u64,
    behavior: Option<&TabularPolicy>,
) -> Result<VerificationReport, ComboError> {
    let run = run_combo(dataset, &truth.template(), config, seed, None)?;
    let cloned;
    let behavior = match behavior {
        Some(b) => b,
        None => {
            cloned = behavior_cloning(dataset);
            &cloned
        }
    };
    let z = compute_zeta(truth, dataset, &run.model, &run.policy, behavior, config, conc)?;
    let j_out = policy_return(truth, &run.policy)?;
    let j_beta = policy_return(truth, behavior)?;
    let margin = j_out - (j_beta - z.zeta);
    let mut r = VerificationReport::new("safe_policy_improvement", status(margin >= 0.0), 0.0, margin)
        .with("j_out", j_out)
        .with("j_behavior", j_beta)
        .with("zeta", z.zeta)
        .with("c", z.c)
        .with("premise_met", if z.premise_met { 1.0 } else { 0.0 })
        .with("improvement", j_out - j_beta)
        .seeded(seed);
    if !z.premise_met {
        r = r.note("C <= 0: theorem premise unmet, inequality checked anyway");
    }
    Ok(r)
}

/// Distributions used by [`check_dataset_overestimation`] for a given policy.
pub fn exact_rho_and_data(
    model: &LearnedModel,
    policy: &TabularPolicy,
    config: &ComboConfig,
    data_dist: &OccupancyMeasure,
) -> Result<(OccupancyMeasure, OccupancyMeasure), ComboError> {
    let d = exact_distributions(model, policy, config, data_dist)?;
    Ok((d.rho, d.data))
}

/// `Q^π_{M_f}` and `Q̂` at the same penalty, for callers that need both.
pub fn interpolant_and_conservative_q(
    empirical: &EmpiricalMdp,
    model: &LearnedModel,
    policy: &TabularPolicy,
    penalty: &[f64],
    f: f64,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>), ComboError> {
    let q0 = closed_form_q(empirical, model, policy, penalty, f, 0.0)?;
    let qb = closed_form_q(empirical, model, policy, penalty, f, beta)?;
    Ok((q0.values, qb.values))
}
