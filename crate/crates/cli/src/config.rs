//! Run configuration: defaults, optional TOML file, CLI overrides.
//!
//! Every output file embeds the fully resolved configuration so a run can
//! be reproduced from any of its artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use xresponse_core::ingest::SessionWindow;
use xresponse_core::response::LagSpec;
use xresponse_core::types::Symbol;
use xresponse_core::ZeroConvention;

/// Convention selector: one or both zero-sign conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConventionChoice {
    Inc0,
    Exc0,
    #[default]
    Both,
}

impl ConventionChoice {
    pub fn conventions(&self) -> Vec<ZeroConvention> {
        match self {
            ConventionChoice::Inc0 => vec![ZeroConvention::IncludeZeros],
            ConventionChoice::Exc0 => vec![ZeroConvention::ExcludeZeros],
            ConventionChoice::Both => vec![
                ZeroConvention::IncludeZeros,
                ZeroConvention::ExcludeZeros,
            ],
        }
    }
}

/// Fully resolved run configuration, embedded in every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Empty means: discover from the data or cache directory.
    pub symbols: Vec<String>,
    pub sector_map: Option<PathBuf>,
    /// Lag expression: `1,2,60,300` or `a:b:log[:n]`; empty for defaults.
    pub lags: String,
    pub convention: ConventionChoice,
    pub jobs: usize,
    /// Session window `HH:MM:SS-HH:MM:SS`.
    pub session: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            cache_dir: PathBuf::from("cache"),
            output_dir: PathBuf::from("out"),
            symbols: Vec::new(),
            sector_map: None,
            lags: String::new(),
            convention: ConventionChoice::Both,
            jobs: 1,
            session: xresponse_core::ingest::DEFAULT_SESSION.to_owned(),
        }
    }
}

/// Subset of [`RunConfig`] accepted in a `--config` TOML file; unset
/// fields keep their defaults and CLI flags override both.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub symbols: Option<Vec<String>>,
    pub sector_map: Option<PathBuf>,
    pub lags: Option<String>,
    pub convention: Option<ConventionChoice>,
    pub jobs: Option<usize>,
    pub session: Option<String>,
}

impl RunConfig {
    pub fn apply_file(&mut self, file: FileConfig) {
        if let Some(v) = file.data_dir {
            self.data_dir = v;
        }
        if let Some(v) = file.cache_dir {
            self.cache_dir = v;
        }
        if let Some(v) = file.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = file.symbols {
            self.symbols = v;
        }
        if let Some(v) = file.sector_map {
            self.sector_map = Some(v);
        }
        if let Some(v) = file.lags {
            self.lags = v;
        }
        if let Some(v) = file.convention {
            self.convention = v;
        }
        if let Some(v) = file.jobs {
            self.jobs = v;
        }
        if let Some(v) = file.session {
            self.session = v;
        }
    }

    pub fn load_file(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    pub fn session_window(&self) -> Result<SessionWindow> {
        // The environment variable wins over the config value, matching the
        // documented precedence for session overrides.
        if std::env::var(xresponse_core::ingest::SESSION_ENV).is_ok() {
            return SessionWindow::from_env().context("invalid XRESPONSE_SESSION");
        }
        self.session
            .parse()
            .with_context(|| format!("invalid session window {:?}", self.session))
    }

    pub fn lag_spec(&self, grid_len: usize) -> Result<LagSpec> {
        if self.lags.is_empty() {
            Ok(LagSpec::default_for(grid_len))
        } else {
            LagSpec::parse(&self.lags, grid_len)
                .with_context(|| format!("invalid lag expression {:?}", self.lags))
        }
    }

    pub fn symbol_list(&self) -> Result<Vec<Symbol>> {
        self.symbols
            .iter()
            .map(|s| Symbol::new(s.as_str()).map_err(anyhow::Error::from))
            .collect()
    }

    /// Canonical single-line JSON used for provenance comments in CSVs.
    pub fn provenance(&self) -> String {
        format!(
            "config {}",
            serde_json::to_string(self).expect("config serializes")
        )
    }
}
