//! Experiment orchestration: configs, per-seed runs, result records.

use std::path::PathBuf;
use std::time::Instant;

use combo_core::baselines::{
    behavior_cloning, cql_policy_optimization, dyna_policy_optimization, mopo_policy_optimization, BaselineConfig,
};
use combo_core::combo::{run_combo, ComboRun};
use combo_core::data::collect_dataset;
use combo_core::digest::Fingerprint;
use combo_core::env::{make_base_environment, make_behavior_policy, make_environment, BehaviorQuality, EnvSpec};
use combo_core::mdp::policy_return;
use combo_core::model::{count_uncertainty, fit_mle_model};
use combo_core::rng::derive_seed;
use combo_core::truth::GroundTruth;
use combo_core::{ComboConfig, Dataset, MdpTemplate, TabularMdp, TabularPolicy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub quality: BehaviorQuality,
    pub n_transitions: usize,
    #[serde(default = "default_episode_len")]
    pub episode_len: usize,
    pub seed: u64,
}

fn default_episode_len() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgoSpec {
    Combo {
        #[serde(default)]
        config: ComboConfig,
    },
    Cql {
        #[serde(default)]
        config: BaselineConfig,
    },
    Mopo {
        #[serde(default)]
        config: BaselineConfig,
    },
    Dyna {
        #[serde(default)]
        config: ComboConfig,
    },
    Bc,
}

impl AlgoSpec {
    pub fn id(&self) -> &'static str {
        match self {
            AlgoSpec::Combo { .. } => "combo",
            AlgoSpec::Cql { .. } => "cql",
            AlgoSpec::Mopo { .. } => "mopo",
            AlgoSpec::Dyna { .. } => "dyna",
            AlgoSpec::Bc => "bc",
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        match self {
            AlgoSpec::Combo { config } | AlgoSpec::Dyna { config } => Ok(config.validate()?),
            AlgoSpec::Cql { config } | AlgoSpec::Mopo { config } => {
                if !(config.beta_cql >= 0.0 && config.lambda_mopo >= 0.0 && config.eval_tol > 0.0) {
                    return Err(LabError::Config("baseline weights must be non-negative".into()));
                }
                Ok(())
            }
            AlgoSpec::Bc => Ok(()),
        }
    }
}

/// Each evaluation seed `k` collects its own dataset with seed
/// `derive_seed(dataset.seed, k)` and runs the algorithm with seed `k`.
/// With a reward variant on `env`, the behavior policy is built for the base
/// reward and the logged rewards are relabeled before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub dataset: DatasetSpec,
    pub algo: AlgoSpec,
    pub eval_seeds: Vec<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// When false, `wall_time` is recorded as 0 so outputs are byte-identical.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.dataset.n_transitions == 0 || self.dataset.episode_len == 0 {
            return Err(LabError::Config("dataset sizes must be positive".into()));
        }
        if self.eval_seeds.is_empty() {
            return Err(LabError::Config("eval_seeds is empty".into()));
        }
        make_environment(&self.env)?;
        self.algo.validate()
    }

    /// Digest of everything that determines the results (not output paths).
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(&(&self.env, &self.dataset, &self.algo)).expect("config serializes");
        Fingerprint::new().tag("experiment").bytes(&body).hex()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub regularizer: f64,
    pub nu: f64,
    pub eval_iters: usize,
    pub true_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub algo: String,
    pub seed: u64,
    /// `J(π_out, M)`; `None` if the run failed.
    pub true_return: Option<f64>,
    pub behavior_return: f64,
    pub regularizer: Option<f64>,
    pub error: Option<String>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub wall_time: f64,
}

/// What an algorithm produced, computed without the true MDP.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: TabularPolicy,
    pub regularizer: Option<f64>,
    pub diagnostics: Vec<IterationDiagnostics>,
}

fn diagnostics(run: &ComboRun) -> Vec<IterationDiagnostics> {
    run.iterations
        .iter()
        .map(|it| IterationDiagnostics {
            regularizer: it.regularizer,
            nu: it.solve.nu_value,
            eval_iters: it.solve.iters_used,
            true_return: it.true_return,
        })
        .collect()
}

/// Trains `algo` on `dataset`. Only `template` describes the MDP; `logger`
/// is consulted for per-iteration returns and nothing else.
pub fn train(
    algo: &AlgoSpec,
    dataset: &Dataset,
    template: &MdpTemplate,
    seed: u64,
    logger: Option<&dyn GroundTruth>,
) -> Result<TrainOutput, LabError> {
    Ok(match algo {
        AlgoSpec::Combo { config } => {
            let run = run_combo(dataset, template, config, seed, logger)?;
            TrainOutput {
                regularizer: run.regularizer(config.regularizer_window),
                diagnostics: diagnostics(&run),
                policy: run.policy,
            }
        }
        AlgoSpec::Dyna { config } => {
            let run = dyna_policy_optimization(dataset, template, config, seed, logger)?;
            TrainOutput {
                regularizer: run.regularizer(config.regularizer_window),
                diagnostics: diagnostics(&run),
                policy: run.policy,
            }
        }
        AlgoSpec::Cql { config } => TrainOutput {
            policy: cql_policy_optimization(dataset, template, config)?,
            regularizer: None,
            diagnostics: Vec::new(),
        },
        AlgoSpec::Mopo { config } => {
            let model = fit_mle_model(dataset, template, 0.0)?;
            TrainOutput {
                policy: mopo_policy_optimization(&model, &count_uncertainty(dataset), config)?,
                regularizer: None,
                diagnostics: Vec::new(),
            }
        }
        AlgoSpec::Bc => TrainOutput {
            policy: behavior_cloning(dataset),
            regularizer: None,
            diagnostics: Vec::new(),
        },
    })
}

/// The evaluation MDP, the behavior policy and the per-seed dataset
/// builder shared by every algorithm in an experiment.
pub struct Setup {
    pub truth: TabularMdp,
    pub behavior: TabularPolicy,
    base: TabularMdp,
    relabel: bool,
    dataset: DatasetSpec,
}

impl Setup {
    pub fn new(env: &EnvSpec, dataset: &DatasetSpec) -> Result<Self, LabError> {
        let base = make_base_environment(env)?;
        let truth = make_environment(env)?;
        let behavior = make_behavior_policy(&base, dataset.quality)?;
        Ok(Self {
            relabel: base.reward() != truth.reward(),
            truth,
            behavior,
            base,
            dataset: dataset.clone(),
        })
    }

    pub fn dataset_seed(&self, seed: u64) -> u64 {
        derive_seed(self.dataset.seed, seed)
    }

    /// Data logged on the base environment, relabeled to the evaluation reward.
    pub fn dataset(&self, seed: u64) -> Result<Dataset, LabError> {
        let d = collect_dataset(
            &self.base,
            &self.behavior,
            self.dataset.n_transitions,
            self.dataset.episode_len,
            self.dataset_seed(seed),
        )?;
        Ok(if self.relabel { d.relabel(self.truth.reward())? } else { d })
    }

    pub fn behavior_return(&self) -> f64 {
        policy_return(&self.truth, &self.behavior).expect("validated shapes")
    }
}

pub fn run_seed(
    setup: &Setup,
    algo: &AlgoSpec,
    config_hash: &str,
    seed: u64,
    record_wall_time: bool,
) -> ResultRecord {
    let start = Instant::now();
    let outcome = setup
        .dataset(seed)
        .and_then(|d| train(algo, &d, &setup.truth.template(), seed, Some(&setup.truth)));
    let wall_time = if record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut rec = ResultRecord {
        config_hash: config_hash.to_owned(),
        algo: algo.id().into(),
        seed,
        true_return: None,
        behavior_return: setup.behavior_return(),
        regularizer: None,
        error: None,
        diagnostics: Vec::new(),
        wall_time,
    };
    match outcome {
        Ok(out) => {
            rec.true_return = Some(policy_return(&setup.truth, &out.policy).expect("validated shapes"));
            rec.regularizer = out.regularizer;
            rec.diagnostics = out.diagnostics;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// One record per evaluation seed, in seed-list order. Seeds run in
/// parallel; failures are recorded and do not stop the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>, LabError> {
    config.validate()?;
    let setup = Setup::new(&config.env, &config.dataset)?;
    let hash = config.hash();
    Ok(config
        .eval_seeds
        .par_iter()
        .map(|&s| run_seed(&setup, &config.algo, &hash, s, config.record_wall_time))
        .collect())
}

pub const CSV_HEADER: [&str; 9] = [
    "config_hash",
    "algo",
    "seed",
    "true_return",
    "behavior_return",
    "regularizer",
    "n_iterations",
    "error",
    "wall_time",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn records_to_csv(records: &[ResultRecord]) -> Result<String, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.config_hash.clone(),
            r.algo.clone(),
            r.seed.to_string(),
            opt(r.true_return),
            r.behavior_return.to_string(),
            opt(r.regularizer),
            r.diagnostics.len().to_string(),
            r.error.clone().unwrap_or_default(),
            r.wall_time.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `<stem>.csv` and `<stem>.jsonl`.
pub fn write_records(stem: &std::path::Path, records: &[ResultRecord]) -> Result<(), LabError> {
    std::fs::write(stem.with_extension("csv"), records_to_csv(records)?)?;
    crate::io::write_jsonl(&stem.with_extension("jsonl"), records)
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algo: String,
    pub mean: f64,
    pub ci95: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationSummary {
    pub optimal_return: f64,
    pub behavior_return: f64,
    /// Mean and max undiscounted episode return in the relabeled datasets.
    pub batch_mean: f64,
    pub batch_max: f64,
    pub rows: Vec<AlgoSummary>,
    pub records: Vec<ResultRecord>,
}

impl GeneralizationSummary {
    pub fn row(&self, algo: &str) -> Option<&AlgoSummary> {
        self.rows.iter().find(|r| r.algo == algo)
    }
}

/// Collects data under the base reward's behavior policy, relabels it to
/// `relabel`, trains each algorithm and evaluates under the new reward.
/// Records are ordered by (algorithm, seed).
pub fn run_generalization_suite(
    base_env: &EnvSpec,
    relabel: &combo_core::env::RewardVariant,
    dataset: &DatasetSpec,
    algos: &[AlgoSpec],
    seeds: &[u64],
) -> Result<GeneralizationSummary, LabError> {
    let env = EnvSpec {
        reward_variant: Some(relabel.clone()),
        ..base_env.clone()
    };
    let setup = Setup::new(&env, dataset)?;
    for a in algos {
        a.validate()?;
    }
    let datasets: Vec<Dataset> = seeds.par_iter().map(|&s| setup.dataset(s)).collect::<Result<_, _>>()?;
    let episode_returns: Vec<f64> = datasets.iter().flat_map(|d| d.episode_returns()).collect();
    let batch_mean = episode_returns.iter().sum::<f64>() / episode_returns.len() as f64;
    let batch_max = episode_returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for algo in algos {
        let hash = ExperimentConfig {
            env: env.clone(),
            dataset: dataset.clone(),
            algo: algo.clone(),
            eval_seeds: seeds.to_vec(),
            output_path: None,
            record_wall_time: false,
        }
        .hash();
        let recs: Vec<ResultRecord> = seeds
            .par_iter()
            .zip(&datasets)
            .map(|(&s, d)| {
                let out = train(algo, d, &setup.truth.template(), s, None);
                ResultRecord {
                    config_hash: hash.clone(),
                    algo: algo.id().into(),
                    seed: s,
                    true_return: out
                        .as_ref()
                        .ok()
                        .map(|o| policy_return(&setup.truth, &o.policy).expect("validated shapes")),
                    behavior_return: setup.behavior_return(),
                    regularizer: out.as_ref().ok().and_then(|o| o.regularizer),
                    error: out.as_ref().err().map(|e| e.to_string()),
                    diagnostics: out.map(|o| o.diagnostics).unwrap_or_default(),
                    wall_time: 0.0,
                }
            })
            .collect();
        let ok: Vec<f64> = recs.iter().filter_map(|r| r.true_return).collect();
        let (mean, ci95) = mean_ci95(&ok);
        rows.push(AlgoSummary {
            algo: algo.id().into(),
            mean,
            ci95,
            n_ok: ok.len(),
            n_failed: recs.len() - ok.len(),
        });
        records.extend(recs);
    }
    let (_, q) = combo_core::baselines::value_iteration_oracle(&setup.truth, 1e-10)?;
    let v_opt: Vec<f64> = (0..q.n_states).map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let optimal_return = setup.truth.init_dist().iter().zip(&v_opt).map(|(p, v)| p * v).sum();
    Ok(GeneralizationSummary {
        optimal_return,
        behavior_return: setup.behavior_return(),
        batch_mean,
        batch_max,
        rows,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSeed {
    pub seed: u64,
    pub selected: usize,
    pub regularizers: Vec<Option<f64>>,
    pub true_returns: Vec<Option<f64>>,
    /// `J(selected) ≥ J(best) - 0.1 |J(best)|`.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub seeds: Vec<SelectionSeed>,
    pub n_within: usize,
}

/// Regularizer-argmin selection per seed, scored afterwards against the
/// true returns of every candidate.
pub fn run_selection_suite(
    env: &EnvSpec,
    dataset: &DatasetSpec,
    candidates: &[ComboConfig],
    seeds: &[u64],
    tolerance: f64,
) -> Result<SelectionSummary, LabError> {
    let setup = Setup::new(env, dataset)?;
    let template = setup.truth.template();
    let rows: Vec<SelectionSeed> = seeds
        .par_iter()
        .map(|&s| -> Result<SelectionSeed, LabError> {
            let data = setup.dataset(s)?;
            let (selected, runs) = combo_core::select::select_with_runs(candidates, &data, &template, s)?;
            let regularizers = runs
                .iter()
                .zip(candidates)
                .map(|(r, c)| r.as_ref().ok().and_then(|r| r.regularizer(c.regularizer_window)))
                .collect();
            let true_returns: Vec<Option<f64>> = runs
                .iter()
                .map(|r| r.as_ref().ok().map(|r| policy_return(&setup.truth, &r.policy).expect("validated shapes")))
                .collect();
            let best = true_returns.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            let got = true_returns[selected].unwrap_or(f64::NEG_INFINITY);
            Ok(SelectionSeed {
                seed: s,
                selected,
                regularizers,
                within_tolerance: got >= best - tolerance * best.abs(),
                true_returns,
            })
        })
        .collect::<Result<_, _>>()?;
    let n_within = rows.iter().filter(|r| r.within_tolerance).count();
    Ok(SelectionSummary { seeds: rows, n_within })
}
