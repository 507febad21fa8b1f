//! Command-line arguments and their resolution against the config file.

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fxnet::config::{load_config, FileConfig};
use fxnet::ingest::parse_date;
use fxnet::returns::DEFAULT_CLIP_SIGMA;
use fxnet::rolling::{DateRange, DEFAULT_STEP, DEFAULT_WINDOW_LENGTH};
use fxnet::{BlockModelSpec, BlockSpec, CurrencyCode, Error, WindowSpec};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "fxnet",
    version,
    about = "Correlation networks, minimal spanning trees and rolling evolution of exchange-rate panels"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Quote currency of the input panel [default: USD].
    #[arg(long, global = true)]
    pub quote: Option<CurrencyCode>,
    /// Base currency code, or `all` [default: all].
    #[arg(long, global = true)]
    pub base: Option<String>,
    /// Input panel CSV; repeat to merge several files on common dates.
    #[arg(long = "input", global = true)]
    pub inputs: Vec<PathBuf>,
    /// Input cells are quote units per currency unit and get inverted.
    #[arg(long, global = true)]
    pub invert: bool,
    /// Longest forward-filled gap in days [default: 3].
    #[arg(long, global = true)]
    pub max_gap: Option<usize>,
    /// Largest tolerated fraction of missing dates per currency [default: 0.05].
    #[arg(long, global = true)]
    pub max_missing_frac: Option<f64>,
    /// Clip normalized returns at this many standard deviations [default: 10].
    #[arg(long, global = true)]
    pub clip_sigma: Option<f64>,
    /// Sliding window length in trading days [default: 126].
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Sliding window step in trading days [default: 21].
    #[arg(long, global = true)]
    pub step: Option<usize>,
    /// Explicit blocks `START:END[,START:END...]` with inclusive ISO dates.
    #[arg(long, global = true, value_parser = parse_blocks)]
    pub blocks: Option<Blocks>,
    /// Largest window shift for survival ratios [default: half the windows].
    #[arg(long, global = true)]
    pub max_delta: Option<usize>,
    /// Report survival ratios in per cent.
    #[arg(long, global = true)]
    pub percent: bool,
    /// Export formats [default: all].
    #[arg(long = "format", global = true, value_enum, value_delimiter = ',')]
    pub formats: Vec<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download per-currency rate files and assemble a panel CSV.
    Fetch(FetchArgs),
    /// Full-period network, tree and metrics for the chosen base(s).
    Snapshot,
    /// Windowed metric series and edge survival ratios.
    Evolve(EvolveArgs),
    /// Per-window counts of nodes closer to A than to B and vice versa.
    CompareBases(CompareArgs),
    /// Write a synthetic block-model panel.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Currencies to download, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub currencies: Vec<CurrencyCode>,
    /// URL with `{code}` and optional `{start}`/`{end}` placeholders.
    #[arg(long)]
    pub url_template: Option<String>,
    /// Cache directory [default: <output>/cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub start: Option<NaiveDate>,
    #[arg(long)]
    pub end: Option<NaiveDate>,
    /// Retries per currency after the first attempt [default: 2].
    #[arg(long)]
    pub max_retries: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Also export the tree of every window.
    #[arg(long)]
    pub trees: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: CurrencyCode,
    pub b: CurrencyCode,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Intra-block correlation per block.
    #[arg(long, value_delimiter = ',')]
    pub intra: Vec<f64>,
    /// Correlation between blocks.
    #[arg(long)]
    pub inter: Option<f64>,
    /// Number of trading days.
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Make the first member of every block a hub.
    #[arg(long)]
    pub hub: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Dot,
    Graphml,
    Csv,
    Json,
}

impl Format {
    fn parse(s: &str) -> Result<Self, Error> {
        Format::from_str(s, true).map_err(|_| Error::Config(format!("unknown format {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blocks(pub Vec<DateRange>);

fn parse_blocks(s: &str) -> Result<Blocks, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| format!("block {part:?} is not START:END"))?;
            let start = parse_date(a.trim()).map_err(|e| e.to_string())?;
            let end = parse_date(b.trim()).map_err(|e| e.to_string())?;
            DateRange::new(start, end).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Blocks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BaseSelection {
    All,
    One(CurrencyCode),
}

impl BaseSelection {
    fn parse(s: &str) -> Result<Self, Error> {
        if s == "all" {
            Ok(BaseSelection::All)
        } else {
            Ok(BaseSelection::One(s.parse()?))
        }
    }
}

/// Fully resolved settings; serialized for the manifest's config hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub config_file: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub quote: CurrencyCode,
    pub base: BaseSelection,
    pub invert: bool,
    pub max_gap: usize,
    pub max_missing_frac: f64,
    pub clip_sigma: f64,
    pub window: usize,
    pub step: usize,
    pub blocks: Option<Vec<DateRange>>,
    pub max_delta: Option<usize>,
    pub percent: bool,
    pub formats: BTreeSet<Format>,
    pub trees: bool,
    pub compare: Option<(CurrencyCode, CurrencyCode)>,
    pub fetch: Option<FetchSettings>,
    pub synth: Option<BlockModelSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FetchSettings {
    pub currencies: Vec<CurrencyCode>,
    pub url_template: String,
    pub cache_dir: PathBuf,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub max_retries: u32,
    pub retry_delay_ms: u64,
    pub timeout_secs: u64,
}

impl RunConfig {
    pub fn window_spec(&self) -> Result<WindowSpec, Error> {
        match &self.blocks {
            Some(b) => WindowSpec::blocks(b.clone()),
            None => WindowSpec::sliding(self.window, self.step),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let g = &cli.global;
    let file = match &g.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let output = g.output.clone().or(file.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let clip_sigma = g.clip_sigma.or(file.clip_sigma).unwrap_or(DEFAULT_CLIP_SIGMA);
    if !(clip_sigma > 0.0) {
        return Err(Error::Config(format!("clip threshold must be positive, got {clip_sigma}")));
    }
    let formats: BTreeSet<Format> = if !g.formats.is_empty() {
        g.formats.iter().copied().collect()
    } else if let Some(names) = &file.formats {
        names.iter().map(|s| Format::parse(s)).collect::<Result<_, _>>()?
    } else {
        [Format::Dot, Format::Graphml, Format::Csv, Format::Json].into()
    };
    let base = BaseSelection::parse(g.base.as_deref().or(file.base.as_deref()).unwrap_or("all"))?;
    let mut cfg = RunConfig {
        command: String::new(),
        config_file: g.config.clone(),
        inputs: if g.inputs.is_empty() { file.input.clone().unwrap_or_default() } else { g.inputs.clone() },
        output: output.clone(),
        quote: g.quote.or(file.quote).unwrap_or(CurrencyCode::new("USD")?),
        base,
        invert: g.invert || file.invert.unwrap_or(false),
        max_gap: g.max_gap.or(file.max_gap).unwrap_or(3),
        max_missing_frac: g.max_missing_frac.or(file.max_missing_frac).unwrap_or(0.05),
        clip_sigma,
        window: g.window.or(file.window).unwrap_or(DEFAULT_WINDOW_LENGTH),
        step: g.step.or(file.step).unwrap_or(DEFAULT_STEP),
        blocks: g.blocks.clone().map(|b| b.0).or(file.blocks.clone()),
        max_delta: g.max_delta.or(file.max_delta),
        percent: g.percent || file.percent.unwrap_or(false),
        formats,
        trees: false,
        compare: None,
        fetch: None,
        synth: None,
    };
    match &cli.command {
        Command::Fetch(a) => {
            cfg.command = "fetch".into();
            let fc = file.fetch.clone().unwrap_or_default();
            let currencies = if a.currencies.is_empty() { fc.currencies.unwrap_or_default() } else { a.currencies.clone() };
            if currencies.is_empty() {
                return Err(Error::Config("fetch needs --currencies".into()));
            }
            let url_template = a
                .url_template
                .clone()
                .or(fc.url_template)
                .ok_or_else(|| Error::Config("fetch needs --url-template".into()))?;
            cfg.fetch = Some(FetchSettings {
                currencies,
                url_template,
                cache_dir: a.cache_dir.clone().or(fc.cache_dir).unwrap_or_else(|| output.join("cache")),
                start: a.start.or(fc.start).unwrap_or(NaiveDate::from_ymd_opt(1998, 12, 15).unwrap()),
                end: a.end.or(fc.end).unwrap_or(NaiveDate::from_ymd_opt(2008, 6, 30).unwrap()),
                max_retries: a.max_retries.or(fc.max_retries).unwrap_or(2),
                retry_delay_ms: fc.retry_delay_ms.unwrap_or(500),
                timeout_secs: fc.timeout_secs.unwrap_or(30),
            });
        }
        Command::Snapshot => cfg.command = "snapshot".into(),
        Command::Evolve(a) => {
            cfg.command = "evolve".into();
            cfg.trees = a.trees;
        }
        Command::CompareBases(a) => {
            cfg.command = "compare-bases".into();
            if a.a == a.b {
                return Err(Error::Config(format!("compare-bases needs two distinct currencies, got {} twice", a.a)));
            }
            cfg.compare = Some((a.a, a.b));
        }
        Command::Synth(a) => {
            cfg.command = "synth".into();
            cfg.synth = Some(synth_spec(a, file.synth.clone(), g.quote)?);
        }
    }
    Ok(cfg)
}

fn synth_spec(a: &SynthArgs, from_file: Option<BlockModelSpec>, quote: Option<CurrencyCode>) -> Result<BlockModelSpec, Error> {
    let mut spec = match from_file {
        Some(s) => s,
        None if a.sizes.is_empty() => {
            return Err(Error::Config("synth needs --sizes or a [synth] config table".into()));
        }
        None => BlockModelSpec::new(Vec::new(), 0.0, 300, 0),
    };
    if !a.sizes.is_empty() {
        if a.intra.len() != a.sizes.len() && a.intra.len() != 1 {
            return Err(Error::Config(format!(
                "{} block sizes but {} intra correlations",
                a.sizes.len(),
                a.intra.len()
            )));
        }
        spec.blocks = a
            .sizes
            .iter()
            .enumerate()
            .map(|(k, &size)| {
                let intra = a.intra.get(k).or(a.intra.first()).copied().unwrap_or(0.0);
                BlockSpec { hub: a.hub, ..BlockSpec::new(size, intra) }
            })
            .collect();
    }
    if let Some(v) = a.inter {
        spec.inter = v;
    }
    if let Some(v) = a.days {
        spec.days = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if quote.is_some() {
        spec.quote = quote;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_args(args: &[&str]) -> Result<RunConfig, Error> {
        let mut full = vec!["fxnet"];
        full.extend_from_slice(args);
        resolve(&Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn defaults() {
        let c = resolve_args(&["snapshot"]).unwrap();
        assert_eq!(c.window, 126);
        assert_eq!(c.step, 21);
        assert_eq!(c.clip_sigma, 10.0);
        assert_eq!(c.base, BaseSelection::All);
        assert_eq!(c.formats.len(), 4);
        assert_eq!(c.output, PathBuf::from("out"));
    }

    #[test]
    fn blocks_flag_parses() {
        let c = resolve_args(&["--blocks", "1999-01-01:2000-12-31,2001-01-01:2002-12-31", "evolve"]).unwrap();
        let blocks = c.blocks.clone().unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[1].start, NaiveDate::from_ymd_opt(2001, 1, 1).unwrap());
        assert!(c.window_spec().is_ok());
        assert!(Cli::try_parse_from(["fxnet", "--blocks", "2001-01-01", "evolve"]).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.toml");
        std::fs::write(&path, "window = 60\nstep = 5\nbase = \"EUR\"\nformats = [\"json\"]\n").unwrap();
        let p = path.to_str().unwrap();
        let c = resolve_args(&["--config", p, "--step", "10", "evolve"]).unwrap();
        assert_eq!((c.window, c.step), (60, 10));
        assert_eq!(c.base, BaseSelection::One(CurrencyCode::new("EUR").unwrap()));
        assert_eq!(c.formats, [Format::Json].into());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        assert!(resolve_args(&["--clip-sigma", "0", "snapshot"]).is_err());
        assert!(resolve_args(&["--base", "eur1", "snapshot"]).is_err());
        assert!(resolve_args(&["compare-bases", "EUR", "EUR"]).is_err());
        assert!(resolve_args(&["synth"]).is_err());
        assert!(resolve_args(&["fetch"]).is_err());
    }

    #[test]
    fn synth_flags_build_a_spec() {
        let c = resolve_args(&["synth", "--sizes", "3,2", "--intra", "0.5", "--inter", "0.1", "--days", "50"]).unwrap();
        let s = c.synth.unwrap();
        assert_eq!(s.series_count(), 5);
        assert_eq!(s.blocks[1].intra, 0.5);
        assert_eq!(s.days, 50);
    }
}
