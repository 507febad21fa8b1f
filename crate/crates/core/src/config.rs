//! TOML run configuration. Every key is optional; command-line flags take
//! precedence over file values.
//!
//! ```toml
//! input = ["rates.csv"]
//! output = "out"
//! quote = "USD"
//! base = "all"
//! clip_sigma = 10.0
//! window = 126
//! step = 21
//! max_delta = 6
//! percent = false
//! formats = ["dot", "graphml", "csv", "json"]
//!
//! [[blocks]]
//! start = "1999-01-01"
//! end = "2000-12-31"
//!
//! [fetch]
//! url_template = "https://example.org/{code}.csv?from={start}&to={end}"
//! cache_dir = "cache"
//! currencies = ["EUR", "JPY"]
//!
//! [synth]
//! inter = 0.1
//! days = 300
//! seed = 1
//! blocks = [{ size = 5, intra = 0.7 }, { size = 5, intra = 0.4 }]
//! ```

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::rolling::DateRange;
use crate::synth::BlockModelSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchConfig {
    pub url_template: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub currencies: Option<Vec<CurrencyCode>>,
    pub max_retries: Option<u32>,
    pub retry_delay_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<Vec<PathBuf>>,
    pub output: Option<PathBuf>,
    pub quote: Option<CurrencyCode>,
    /// A currency code or `all`.
    pub base: Option<String>,
    pub invert: Option<bool>,
    pub max_gap: Option<usize>,
    pub max_missing_frac: Option<f64>,
    pub clip_sigma: Option<f64>,
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub blocks: Option<Vec<DateRange>>,
    pub max_delta: Option<usize>,
    pub percent: Option<bool>,
    pub formats: Option<Vec<String>>,
    pub fetch: Option<FetchConfig>,
    pub synth: Option<BlockModelSpec>,
}

pub fn parse_config(content: &str) -> Result<FileConfig> {
    toml::from_str(content).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&content).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
