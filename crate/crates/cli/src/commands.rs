use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use fxnet::correlation::correlation_matrix;
use fxnet::export;
use fxnet::fetch::{assemble_panel_csv, fetch_panel, FetchRequest, UreqClient};
use fxnet::ingest::{merge_panels, parse_panel, IngestOptions};
use fxnet::metrics::metrics_report;
use fxnet::mst::build_mst;
use fxnet::returns::return_matrix;
use fxnet::rolling::{
    default_max_delta, proximity_series, rolling_snapshots, survival_curves, Execution, Snapshot,
};
use fxnet::synth::generate_panel;
use fxnet::{CurrencyCode, Error, RatePanel, SpanningTree};

use crate::settings::{resolve, BaseSelection, Cli, Format, RunConfig};
use crate::writer::{sha256_hex, ArtifactWriter, FileDigest};

/// Error with the module and base it arose in.
#[derive(Debug)]
pub struct CliError {
    module: &'static str,
    base: Option<CurrencyCode>,
    source: Error,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        if self.source.is_input_error() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.base {
            Some(b) => write!(f, "{} (base {b}): {}", self.module, self.source),
            None => write!(f, "{}: {}", self.module, self.source),
        }
    }
}

trait Context<T> {
    fn module(self, module: &'static str) -> Result<T, CliError>;
    fn at(self, module: &'static str, base: CurrencyCode) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, Error> {
    fn module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError { module, base: None, source })
    }

    fn at(self, module: &'static str, base: CurrencyCode) -> Result<T, CliError> {
        self.map_err(|source| CliError { module, base: Some(base), source })
    }
}

struct Run {
    cfg: RunConfig,
    writer: ArtifactWriter,
    inputs: Vec<FileDigest>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli).module("config")?;
    let mut run = Run {
        inputs: Vec::new(),
        writer: ArtifactWriter::new(),
        cfg,
    };
    if let Some(path) = run.cfg.config_file.clone() {
        let bytes = fs::read(&path).map_err(Error::from).module("config")?;
        run.inputs.push(digest(&path, &bytes));
    }
    let command = run.cfg.command.clone();
    match command.as_str() {
        "fetch" => fetch(&mut run)?,
        "synth" => synth(&run)?,
        command => {
            let panel = load_panel(&mut run)?;
            let bases = bases(&run.cfg, &panel).module("cli")?;
            match command {
                "snapshot" => snapshot(&run, &panel, &bases)?,
                "evolve" => evolve(&run, &panel, &bases)?,
                "compare-bases" => compare(&run, &panel, &bases)?,
                other => unreachable!("unknown command {other}"),
            }
        }
    }
    let config_json = serde_json::to_vec(&run.cfg).expect("config serializes");
    let Run { cfg, writer, inputs } = run;
    let count = writer.len();
    let manifest = writer
        .commit(&cfg.output, &cfg.command, sha256_hex(&config_json), inputs)
        .map_err(Error::from)
        .module("cli")?;
    let noun = if count == 1 { "artifact" } else { "artifacts" };
    eprintln!("fxnet: wrote {count} {noun}, manifest {}", manifest.display());
    Ok(())
}

fn digest(path: &std::path::Path, bytes: &[u8]) -> FileDigest {
    FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len(),
    }
}

fn load_panel(run: &mut Run) -> Result<RatePanel, CliError> {
    if run.cfg.inputs.is_empty() {
        return Err(Error::Config("no input panel; pass --input".into())).module("data-ingest");
    }
    let opts = IngestOptions {
        quote: run.cfg.quote,
        invert: run.cfg.invert,
        max_gap: run.cfg.max_gap,
        max_missing_frac: run.cfg.max_missing_frac,
    };
    let mut panels = Vec::new();
    for path in run.cfg.inputs.clone() {
        let bytes = fs::read(&path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
            .module("data-ingest")?;
        run.inputs.push(digest(&path, &bytes));
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Validation(format!("{} is not UTF-8", path.display())))
            .module("data-ingest")?;
        let report = parse_panel(&text, &opts).module("data-ingest")?;
        for r in &report.rejected {
            eprintln!(
                "fxnet: data-ingest: rejected {} ({:.1}% of dates missing)",
                r.currency,
                100.0 * r.missing_fraction
            );
        }
        if !report.dropped_dates.is_empty() {
            eprintln!("fxnet: data-ingest: dropped {} incomplete dates", report.dropped_dates.len());
        }
        panels.push(report.panel);
    }
    merge_panels(&panels).module("data-ingest")
}

fn bases(cfg: &RunConfig, panel: &RatePanel) -> Result<Vec<CurrencyCode>, Error> {
    let all: Vec<CurrencyCode> = match &cfg.base {
        BaseSelection::All => panel.currencies().to_vec(),
        BaseSelection::One(b) if panel.contains(*b) => vec![*b],
        BaseSelection::One(b) => return Err(Error::NotFound(*b)),
    };
    match cfg.compare {
        Some((a, b)) => {
            for c in [a, b] {
                if !panel.contains(c) {
                    return Err(Error::NotFound(c));
                }
            }
            if let BaseSelection::One(base) = cfg.base {
                if base == a || base == b {
                    return Err(Error::Config(format!("base {base} cannot be one of the compared currencies")));
                }
            }
            Ok(all.into_iter().filter(|c| *c != a && *c != b).collect())
        }
        None => Ok(all),
    }
}

fn rel(base: CurrencyCode, command: &str, name: &str) -> PathBuf {
    PathBuf::from(base.as_str()).join(command).join(name)
}

fn tree_files(run: &Run, dir: PathBuf, stem: &str, tree: &SpanningTree) {
    if run.cfg.wants(Format::Dot) {
        run.writer.add(dir.join(format!("{stem}.dot")), export::tree_dot(tree));
    }
    if run.cfg.wants(Format::Graphml) {
        run.writer.add(dir.join(format!("{stem}.graphml")), export::tree_graphml(tree));
    }
    if run.cfg.wants(Format::Csv) {
        run.writer.add(dir.join(format!("{stem}_edges.csv")), export::edges_csv(tree));
    }
}

fn snapshot(run: &Run, panel: &RatePanel, bases: &[CurrencyCode]) -> Result<(), CliError> {
    let end = *panel.dates().last().expect("panels have dates");
    let mut rows = Vec::new();
    for &base in bases {
        let outcome = return_matrix(panel, base, Some(run.cfg.clip_sigma)).at("returns-pipeline", base)?;
        if outcome.clipped > 0 {
            eprintln!("fxnet: returns-pipeline (base {base}): clipped {} returns", outcome.clipped);
        }
        let net = correlation_matrix(&outcome.matrix).at("correlation-net", base)?;
        let tree = build_mst(&net).at("spanning-tree", base)?;
        let report = metrics_report(&net, &tree).at("net-metrics", base)?;
        let dir = PathBuf::from(base.as_str()).join("snapshot");
        if run.cfg.wants(Format::Csv) {
            let r = export::matrix_csv(net.nodes(), net.correlation()).at("cli", base)?;
            let d = export::matrix_csv(net.nodes(), net.distances()).at("cli", base)?;
            run.writer.add(dir.join("correlation.csv"), r);
            run.writer.add(dir.join("distance.csv"), d);
            run.writer.add(dir.join("metrics.csv"), export::metrics_csv(&[(&report, 0, end)]));
        }
        tree_files(run, dir.clone(), "mst", &tree);
        if run.cfg.wants(Format::Json) {
            run.writer.add(dir.join("metrics.json"), export::metrics_json(&report));
        }
        rows.push(report);
    }
    if bases.len() > 1 && run.cfg.wants(Format::Csv) {
        let table: Vec<_> = rows.iter().map(|r| (r, 0, end)).collect();
        run.writer.add(PathBuf::from("summary/snapshot/metrics.csv"), export::metrics_csv(&table));
    }
    Ok(())
}

fn windows_for(run: &Run, panel: &RatePanel, base: CurrencyCode) -> Result<Vec<Snapshot>, CliError> {
    let spec = run.cfg.window_spec().at("rolling-analysis", base)?;
    rolling_snapshots(panel, base, &spec, Some(run.cfg.clip_sigma), Execution::Parallel).at("rolling-analysis", base)
}

fn evolve(run: &Run, panel: &RatePanel, bases: &[CurrencyCode]) -> Result<(), CliError> {
    for &base in bases {
        let snaps = windows_for(run, panel, base)?;
        let dir = PathBuf::from(base.as_str()).join("evolve");
        if run.cfg.wants(Format::Csv) {
            let rows: Vec<_> = snaps.iter().map(|s| (&s.report, s.window.id, s.window.end_date)).collect();
            run.writer.add(dir.join("metrics.csv"), export::metrics_csv(&rows));
            let series = |f: fn(&Snapshot) -> f64| -> String {
                let points: Vec<_> = snaps.iter().map(|s| (s.window.end_date, f(s))).collect();
                export::series_csv(&points)
            };
            run.writer.add(dir.join("path_length.csv"), series(|s| s.report.path_length));
            run.writer.add(dir.join("clustering.csv"), series(|s| s.report.clustering));
            run.writer.add(dir.join("internode_distance.csv"), series(|s| s.report.internode_distance));
            run.writer.add(dir.join("lambda_max.csv"), series(|s| s.report.lambda_max));
            let mut nodes = String::from("window_end_date,code,degree,betweenness,clustering\n");
            for s in &snaps {
                for (c, m) in &s.report.per_node {
                    nodes.push_str(&format!(
                        "{},{c},{},{},{}\n",
                        fxnet::ingest::format_date(s.window.end_date),
                        m.degree,
                        m.betweenness,
                        m.clustering
                    ));
                }
            }
            run.writer.add(dir.join("nodes.csv"), nodes);
        }
        if run.cfg.wants(Format::Json) {
            let reports: Vec<_> = snaps
                .iter()
                .map(fxnet::rolling::WindowReport::from_snapshot)
                .collect();
            let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            json.push('\n');
            run.writer.add(dir.join("reports.json"), json);
        }
        if snaps.len() >= 2 {
            let trees: Vec<SpanningTree> = snaps.iter().map(|s| s.tree.clone()).collect();
            let max_delta = run.cfg.max_delta.unwrap_or_else(|| default_max_delta(trees.len()));
            let survival = survival_curves(&trees, max_delta).at("rolling-analysis", base)?;
            run.writer.add(rel(base, "evolve", "survival.csv"), export::survival_csv(&survival, run.cfg.percent));
        } else {
            eprintln!("fxnet: rolling-analysis (base {base}): one window only, no survival ratios");
        }
        if run.cfg.trees {
            for s in &snaps {
                let stem = format!("w{:03}_{}", s.window.id, fxnet::ingest::format_date(s.window.end_date));
                tree_files(run, dir.join("trees"), &stem, &s.tree);
            }
        }
    }
    Ok(())
}

fn compare(run: &Run, panel: &RatePanel, bases: &[CurrencyCode]) -> Result<(), CliError> {
    let (a, b) = run.cfg.compare.expect("compare-bases sets the pair");
    if bases.is_empty() {
        return Err(Error::Config("no base left besides the compared currencies".into())).module("cli");
    }
    for &base in bases {
        let snaps = windows_for(run, panel, base)?;
        let rows = proximity_series(&snaps, a, b).at("net-metrics", base)?;
        run.writer.add(rel(base, "compare-bases", &format!("proximity_{a}_{b}.csv")), export::proximity_csv(&rows));
    }
    Ok(())
}

fn fetch(run: &mut Run) -> Result<(), CliError> {
    let f = run.cfg.fetch.clone().expect("fetch settings");
    let client = UreqClient::new(Duration::from_secs(f.timeout_secs));
    let request = FetchRequest {
        url_template: f.url_template.clone(),
        cache_dir: f.cache_dir.clone(),
        start: f.start,
        end: f.end,
        max_retries: f.max_retries as usize,
        retry_delay: Duration::from_millis(f.retry_delay_ms),
    };
    let report = fetch_panel(&client, &request, &f.currencies)
        .and_then(|r| r.into_result())
        .module("data-ingest")?;
    eprintln!(
        "fxnet: data-ingest: {} downloaded, {} from cache",
        report.downloaded.len(),
        report.cache_hits.len()
    );
    let csv = assemble_panel_csv(&f.cache_dir, &f.currencies).module("data-ingest")?;
    for c in &f.currencies {
        let path = fxnet::fetch::cache_path(&f.cache_dir, *c);
        let bytes = fs::read(&path).map_err(Error::from).module("data-ingest")?;
        run.inputs.push(digest(&path, &bytes));
    }
    run.writer.add(PathBuf::from("fetch/panel.csv"), csv);
    Ok(())
}

fn synth(run: &Run) -> Result<(), CliError> {
    let spec = run.cfg.synth.clone().expect("synth spec");
    let panel = generate_panel(&spec).module("synth-oracle")?;
    run.writer.add(PathBuf::from("synth/panel.csv"), panel.to_csv());
    let mut json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    json.push('\n');
    run.writer.add(PathBuf::from("synth/spec.json"), json);
    eprintln!(
        "fxnet: synth-oracle: {} currencies over {} days, quote {}",
        panel.currency_count(),
        panel.date_count(),
        panel.quote()
    );
    Ok(())
}
