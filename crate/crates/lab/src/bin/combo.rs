use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use combo_core::baselines::BaselineConfig;
use combo_core::env::{make_environment, BehaviorQuality, EnvSpec, RewardVariant};
use combo_core::suites::{self, SuiteOutcome};
use combo_core::verify::VerificationReport;
use combo_core::ComboConfig;
use combo_lab::experiment::{
    mean_ci95, run_experiment, run_selection_suite, write_records, AlgoSpec, DatasetSpec, ExperimentConfig,
    ResultRecord, Setup,
};
use combo_lab::io;

#[derive(Parser)]
#[command(name = "combo", about = "Tabular conservative offline model-based RL experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the environment MDP as JSON.
    GenEnv {
        #[command(flatten)]
        common: Common,
    },
    /// Collect one dataset (text table plus JSON sidecar).
    GenData {
        #[command(flatten)]
        common: Common,
        /// Evaluation seed whose dataset is written.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the configured algorithm on every evaluation seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on this dataset file instead of collecting data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the verification suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value = "verify")]
        out: PathBuf,
        /// Scale factor on the number of instances (1 = acceptance sizes).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// COMBO over a grid of β and f.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,5")]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.8")]
        fs: Vec<f64>,
    },
    /// Offline selection of β by the regularizer value, scored per seed.
    SelectHparams {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,5")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
    },
    /// Summarize result records (JSON lines) per algorithm.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Interpolation,
    FixedPoint,
    LowerBound,
    CqlContrast,
    Interpolant,
    SafeImprovement,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoName {
    Combo,
    Cql,
    Mopo,
    Dyna,
    Bc,
}

/// Overrides applied on top of `--config` (or the built-in default).
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_quality)]
    quality: Option<BehaviorQuality>,
    #[arg(long)]
    n_transitions: Option<usize>,
    #[arg(long)]
    episode_len: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, value_enum)]
    algo: Option<AlgoName>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    f: Option<f64>,
    /// Move the gridworld goal for evaluation, as `x,y`.
    #[arg(long, value_parser = parse_cell)]
    relabel_goal: Option<(usize, usize)>,
    /// Record wall time as 0 so outputs are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
}

fn parse_quality(s: &str) -> Result<BehaviorQuality, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok((
        x.trim().parse().map_err(|_| "bad x")?,
        y.trim().parse().map_err(|_| "bad y")?,
    ))
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::gridworld(5, 5, (4, 4), vec![(1, 1), (3, 1), (1, 3), (2, 3)], 0.1, 0.9),
        dataset: DatasetSpec {
            quality: BehaviorQuality::Medium,
            n_transitions: 1000,
            episode_len: 50,
            seed: 0,
        },
        algo: AlgoSpec::Combo {
            config: ComboConfig::default(),
        },
        eval_seeds: (0..5).collect(),
        output_path: None,
        record_wall_time: true,
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => io::read_toml(p).with_context(|| format!("reading {}", p.display()))?,
            None => default_config(),
        };
        if let Some(s) = &self.seeds {
            c.eval_seeds = s.clone();
        }
        if let Some(q) = self.quality {
            c.dataset.quality = q;
        }
        if let Some(n) = self.n_transitions {
            c.dataset.n_transitions = n;
        }
        if let Some(n) = self.episode_len {
            c.dataset.episode_len = n;
        }
        if let Some(s) = self.data_seed {
            c.dataset.seed = s;
        }
        if let Some(a) = self.algo {
            c.algo = match a {
                AlgoName::Combo => AlgoSpec::Combo {
                    config: ComboConfig::default(),
                },
                AlgoName::Dyna => AlgoSpec::Dyna {
                    config: ComboConfig::default(),
                },
                AlgoName::Cql => AlgoSpec::Cql {
                    config: BaselineConfig::default(),
                },
                AlgoName::Mopo => AlgoSpec::Mopo {
                    config: BaselineConfig::default(),
                },
                AlgoName::Bc => AlgoSpec::Bc,
            };
        }
        match &mut c.algo {
            AlgoSpec::Combo { config } | AlgoSpec::Dyna { config } => {
                if let Some(b) = self.beta {
                    config.beta = b;
                }
                if let Some(f) = self.f {
                    config.f = f;
                }
            }
            AlgoSpec::Cql { config } | AlgoSpec::Mopo { config } => {
                if let Some(b) = self.beta {
                    config.beta_cql = b;
                    config.lambda_mopo = b;
                }
                if let Some(f) = self.f {
                    config.f = f;
                }
            }
            AlgoSpec::Bc => {}
        }
        if let Some(g) = self.relabel_goal {
            c.env.reward_variant = Some(RewardVariant::MoveGoal { goal: g });
        }
        if let Some(o) = &self.out {
            c.output_path = Some(o.clone());
        }
        if self.no_timing {
            c.record_wall_time = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_path(c: &ExperimentConfig, default: &str) -> PathBuf {
    c.output_path.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn ensure_parent(p: &Path) -> Result<()> {
    if let Some(d) = p.parent() {
        if !d.as_os_str().is_empty() {
            std::fs::create_dir_all(d)?;
        }
    }
    Ok(())
}

fn errors_in(records: &[ResultRecord]) -> usize {
    records.iter().filter(|r| r.error.is_some()).count()
}

fn print_records(records: &[ResultRecord]) {
    for r in records {
        match (&r.true_return, &r.error) {
            (Some(j), _) => println!("{}\tseed {}\tJ = {:.6}\tbehavior {:.6}", r.algo, r.seed, j, r.behavior_return),
            (None, Some(e)) => println!("{}\tseed {}\terror: {}", r.algo, r.seed, e),
            _ => {}
        }
    }
}

fn run_suites(which: Suite, scale: f64) -> Result<Vec<SuiteOutcome>> {
    let n = |k: usize| ((k as f64 * scale).round() as usize).max(1);
    let want = |s: Suite| which == Suite::All || which == s;
    let mut out = Vec::new();
    if want(Suite::Interpolation) {
        out.push(suites::suite_interpolation_lemma(n(1000), 1));
    }
    if want(Suite::FixedPoint) {
        let (a, b) = suites::suite_fixed_point(n(100), 2)?;
        out.push(a);
        out.push(b);
    }
    if want(Suite::LowerBound) {
        out.push(suites::suite_expected_lower_bound(n(100), n(40), n(30), 3)?);
    }
    if want(Suite::CqlContrast) {
        out.push(suites::suite_cql_contrast(n(100), n(500), 5)?);
    }
    if want(Suite::Interpolant) {
        out.push(suites::suite_interpolant_bound(n(200), 6)?);
    }
    if want(Suite::SafeImprovement) {
        let seeds: Vec<u64> = (0..n(20) as u64).collect();
        let need = (seeds.len() * 9).div_ceil(10);
        out.push(suites::suite_safe_improvement(&seeds, 2000, need)?);
    }
    Ok(out)
}

fn verify(which: Suite, out: &Path, scale: f64) -> Result<bool> {
    let outcomes = run_suites(which, scale)?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record(["check_name", "passed", "margin", "tolerance", "seed"])?;
    let mut reports: Vec<&VerificationReport> = Vec::new();
    for o in &outcomes {
        println!(
            "{:<28} {}  {}/{}",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.satisfied,
            o.total
        );
        let margin = o.stats.get("min_margin").map(|m| m.to_string()).unwrap_or_default();
        w.write_record([o.name.clone(), o.passed.to_string(), margin, String::new(), String::new()])?;
        for f in &o.failures {
            w.write_record([
                f.check_name.clone(),
                f.passed.to_string(),
                f.margin.to_string(),
                f.tolerance.to_string(),
                f.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
            reports.push(f);
        }
    }
    w.flush()?;
    io::write_jsonl(&out.join("failures.jsonl"), &reports)?;
    io::write_jsonl(&out.join("suites.jsonl"), &outcomes)?;
    Ok(outcomes.iter().all(|o| o.passed))
}

fn report(input: &Path, out: Option<&Path>) -> Result<bool> {
    let records: Vec<ResultRecord> = io::read_jsonl(input)?;
    let mut algos: Vec<&str> = records.iter().map(|r| r.algo.as_str()).collect();
    algos.sort_unstable();
    algos.dedup();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algo", "n_ok", "n_failed", "mean_return", "ci95", "mean_behavior_return"])?;
    for a in algos {
        let rs: Vec<&ResultRecord> = records.iter().filter(|r| r.algo == a).collect();
        let ok: Vec<f64> = rs.iter().filter_map(|r| r.true_return).collect();
        let (m, ci) = mean_ci95(&ok);
        let b = rs.iter().map(|r| r.behavior_return).sum::<f64>() / rs.len() as f64;
        println!("{a:<6} {m:>10.4} ± {ci:<8.4} behavior {b:.4}  ({} ok, {} failed)", ok.len(), rs.len() - ok.len());
        w.write_record([
            a.to_string(),
            ok.len().to_string(),
            (rs.len() - ok.len()).to_string(),
            m.to_string(),
            ci.to_string(),
            b.to_string(),
        ])?;
    }
    let bytes = w.into_inner()?;
    if let Some(p) = out {
        ensure_parent(p)?;
        std::fs::write(p, bytes)?;
    }
    Ok(errors_in(&records) == 0)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::GenEnv { common } => {
            let c = common.resolve()?;
            let mdp = make_environment(&c.env)?;
            let p = out_path(&c, "env.json");
            ensure_parent(&p)?;
            io::write_json(&p, &mdp)?;
            println!("{}  {}", mdp.digest(), p.display());
            Ok(true)
        }
        Cmd::GenData { common, seed } => {
            let c = common.resolve()?;
            let setup = Setup::new(&c.env, &c.dataset)?;
            let data = setup.dataset(seed)?;
            let p = out_path(&c, "data.tsv");
            ensure_parent(&p)?;
            io::write_dataset(&p, &data, Some(setup.truth.digest()))?;
            println!("{} transitions  {}", data.len(), p.display());
            Ok(true)
        }
        Cmd::Train { common, data } => {
            let c = common.resolve()?;
            let records = match data {
                None => run_experiment(&c)?,
                Some(path) => {
                    let (d, _) = io::read_dataset(&path)?;
                    let setup = Setup::new(&c.env, &c.dataset)?;
                    let seed = c.eval_seeds[0];
                    let out = combo_lab::experiment::train(&c.algo, &d, &setup.truth.template(), seed, None);
                    vec![ResultRecord {
                        config_hash: c.hash(),
                        algo: c.algo.id().into(),
                        seed,
                        true_return: out
                            .as_ref()
                            .ok()
                            .map(|o| combo_core::mdp::policy_return(&setup.truth, &o.policy))
                            .transpose()?,
                        behavior_return: setup.behavior_return(),
                        regularizer: out.as_ref().ok().and_then(|o| o.regularizer),
                        error: out.as_ref().err().map(|e| e.to_string()),
                        diagnostics: out.map(|o| o.diagnostics).unwrap_or_default(),
                        wall_time: 0.0,
                    }]
                }
            };
            let stem = out_path(&c, "results");
            ensure_parent(&stem)?;
            write_records(&stem, &records)?;
            print_records(&records);
            Ok(errors_in(&records) == 0)
        }
        Cmd::Verify { suite, out, scale } => {
            if !(scale > 0.0) {
                bail!("scale must be positive");
            }
            verify(suite, &out, scale)
        }
        Cmd::Sweep { common, betas, fs } => {
            let c = common.resolve()?;
            let base = match &c.algo {
                AlgoSpec::Combo { config } => config.clone(),
                _ => bail!("sweep runs COMBO; set algo to combo"),
            };
            let mut all = Vec::new();
            for &b in &betas {
                for &f in &fs {
                    let cfg = ExperimentConfig {
                        algo: AlgoSpec::Combo {
                            config: ComboConfig {
                                beta: b,
                                f,
                                ..base.clone()
                            },
                        },
                        ..c.clone()
                    };
                    let recs = run_experiment(&cfg)?;
                    let ok: Vec<f64> = recs.iter().filter_map(|r| r.true_return).collect();
                    let (m, ci) = mean_ci95(&ok);
                    println!("beta {b:<6} f {f:<5} J = {m:.4} ± {ci:.4}");
                    all.extend(recs);
                }
            }
            let stem = out_path(&c, "sweep");
            ensure_parent(&stem)?;
            write_records(&stem, &all)?;
            Ok(errors_in(&all) == 0)
        }
        Cmd::SelectHparams {
            common,
            betas,
            tolerance,
        } => {
            let c = common.resolve()?;
            let base = match &c.algo {
                AlgoSpec::Combo { config } => config.clone(),
                _ => bail!("select-hparams tunes COMBO; set algo to combo"),
            };
            let cands: Vec<ComboConfig> = betas
                .iter()
                .map(|&b| ComboConfig {
                    beta: b,
                    ..base.clone()
                })
                .collect();
            let s = run_selection_suite(&c.env, &c.dataset, &cands, &c.eval_seeds, tolerance)?;
            for r in &s.seeds {
                println!(
                    "seed {:<4} selected beta {:<6} within {:<5} regularizers {:?}",
                    r.seed, betas[r.selected], r.within_tolerance, r.regularizers
                );
            }
            println!("within tolerance: {}/{}", s.n_within, s.seeds.len());
            let p = out_path(&c, "selection.json");
            ensure_parent(&p)?;
            io::write_json(&p, &s)?;
            Ok(true)
        }
        Cmd::Report { input, out } => report(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
