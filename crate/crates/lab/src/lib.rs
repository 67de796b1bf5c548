//! File formats, experiment orchestration and the `combo` command line on
//! top of `combo-core`.

pub mod experiment;
pub mod io;

use combo_core::combo::ComboError;
use combo_core::data::DataError;
use combo_core::env::EnvError;
use combo_core::MdpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    TomlRead(#[from] toml::de::Error),
    #[error("toml: {0}")]
    TomlWrite(#[from] toml::ser::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Combo(#[from] ComboError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
