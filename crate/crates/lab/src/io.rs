//! File formats.
//!
//! Datasets are stored as text, one transition per line with the fields
//! `s`, `a`, `r`, `s_next` separated by single tab characters. A header
//! comment names the columns.
//!
//! Lines starting with `#` are comments. Rewards use Rust's shortest
//! round-trip float formatting, so a write/read cycle is bit-exact. Shapes,
//! episode length and provenance live in a JSON sidecar next to the table
//! (`<path>.json`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use combo_core::data::{Dataset, Transition};
use combo_core::model::{BiasSpec, LearnedModel};
use combo_core::TabularMdp;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::LabError;

pub const DATASET_FORMAT: &str = "combo-dataset-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub format: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub episode_len: usize,
    pub n_transitions: usize,
    pub seed: u64,
    /// Digest of the MDP the data was collected on, when known.
    pub mdp_hash: Option<String>,
    pub counts_digest: String,
    pub dataset_digest: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn dataset_to_text(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(16 * dataset.len() + 32);
    out.push_str("# s\ta\tr\ts_next\n");
    for t in &dataset.transitions {
        writeln!(out, "{}\t{}\t{}\t{}", t.s, t.a, t.r, t.s_next).expect("writing to a String");
    }
    out
}

pub fn dataset_from_text(
    text: &str,
    n_states: usize,
    n_actions: usize,
    episode_len: usize,
    seed: u64,
) -> Result<Dataset, LabError> {
    let mut transitions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| LabError::Format(format!("line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let idx = |f: &str| f.parse::<usize>().map_err(|_| bad("bad index"));
        transitions.push(Transition {
            s: idx(fields[0])?,
            a: idx(fields[1])?,
            r: fields[2].parse::<f64>().map_err(|_| bad("bad reward"))?,
            s_next: idx(fields[3])?,
        });
    }
    Ok(Dataset::from_transitions(n_states, n_actions, episode_len, seed, transitions)?)
}

pub fn make_sidecar(dataset: &Dataset, mdp_hash: Option<String>) -> DatasetSidecar {
    DatasetSidecar {
        format: DATASET_FORMAT.into(),
        n_states: dataset.n_states,
        n_actions: dataset.n_actions,
        episode_len: dataset.episode_len,
        n_transitions: dataset.len(),
        seed: dataset.source_seed,
        mdp_hash,
        counts_digest: dataset.counts_digest(),
        dataset_digest: dataset.digest(),
    }
}

pub fn write_dataset(path: &Path, dataset: &Dataset, mdp_hash: Option<String>) -> Result<(), LabError> {
    fs::write(path, dataset_to_text(dataset))?;
    write_json(&sidecar_path(path), &make_sidecar(dataset, mdp_hash))
}

/// Reads a dataset and checks it against its sidecar's digests.
pub fn read_dataset(path: &Path) -> Result<(Dataset, DatasetSidecar), LabError> {
    let side: DatasetSidecar = read_json(&sidecar_path(path))?;
    if side.format != DATASET_FORMAT {
        return Err(LabError::Format(format!("unknown dataset format {:?}", side.format)));
    }
    let text = fs::read_to_string(path)?;
    let data = dataset_from_text(&text, side.n_states, side.n_actions, side.episode_len, side.seed)?;
    if data.len() != side.n_transitions {
        return Err(LabError::Format(format!(
            "sidecar declares {} transitions, file has {}",
            side.n_transitions,
            data.len()
        )));
    }
    if data.counts_digest() != side.counts_digest || data.digest() != side.dataset_digest {
        return Err(LabError::Format("dataset does not match its sidecar digests".into()));
    }
    Ok((data, side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_digest: Option<String>,
    pub smoothing: f64,
    pub bias: Vec<BiasSpec>,
    pub visited_mask: Vec<bool>,
}

/// The MDP schema plus a `provenance` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub mdp: TabularMdp,
    pub provenance: Provenance,
}

impl From<&LearnedModel> for ModelFile {
    fn from(m: &LearnedModel) -> Self {
        Self {
            mdp: m.mdp.clone(),
            provenance: Provenance {
                dataset_digest: m.dataset_digest.clone(),
                smoothing: m.smoothing,
                bias: m.bias.clone(),
                visited_mask: m.visited_mask.clone(),
            },
        }
    }
}

impl From<ModelFile> for LearnedModel {
    fn from(f: ModelFile) -> Self {
        LearnedModel {
            mdp: f.mdp,
            smoothing: f.provenance.smoothing,
            bias: f.provenance.bias,
            visited_mask: f.provenance.visited_mask,
            dataset_digest: f.provenance.dataset_digest,
        }
    }
}

pub fn write_model(path: &Path, model: &LearnedModel) -> Result<(), LabError> {
    write_json(path, &ModelFile::from(model))
}

pub fn read_model(path: &Path) -> Result<LearnedModel, LabError> {
    let f: ModelFile = read_json(path)?;
    if f.provenance.visited_mask.len() != f.mdp.n_cells() {
        return Err(LabError::Format("visited_mask length does not match the MDP".into()));
    }
    Ok(f.into())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LabError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, LabError> {
    Ok(toml::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    fs::write(path, toml::to_string(value)?)?;
    Ok(())
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), LabError> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, LabError> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(LabError::from))
        .collect()
}
