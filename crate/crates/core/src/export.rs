//! Text serializations of networks, trees, metrics and time series.

use std::fmt::Write;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::format_date;
use crate::metrics::MetricsReport;
use crate::mst::SpanningTree;
use crate::rolling::SurvivalSeries;

/// Square CSV with currency codes heading rows and columns; entries carry
/// 17 significant digits.
pub fn matrix_csv(nodes: &[CurrencyCode], matrix: &DMatrix<f64>) -> Result<String> {
    let n = nodes.len();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::validation(format!(
            "{}x{} matrix for {n} labels",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let mut out = String::from("code");
    for c in nodes {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for (i, c) in nodes.iter().enumerate() {
        out.push_str(c.as_str());
        for j in 0..n {
            write!(out, ",{:.16e}", matrix[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`matrix_csv`].
pub fn parse_matrix_csv(content: &str) -> Result<(Vec<CurrencyCode>, DMatrix<f64>)> {
    let mut lines = content.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty matrix file".into(),
    })?;
    let nodes = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<CurrencyCode>>>()?;
    let n = nodes.len();
    let mut m = DMatrix::zeros(n, n);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if i >= n || fields.len() != n + 1 {
            return Err(Error::Parse {
                line: i + 2,
                message: "matrix is not square".into(),
            });
        }
        for j in 0..n {
            m[(i, j)] = fields[j + 1].trim().parse().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("invalid number {:?}", fields[j + 1]),
            })?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            line: rows + 1,
            message: format!("expected {n} rows, found {rows}"),
        });
    }
    Ok((nodes, m))
}

/// Edge list `nodeA,nodeB,distance,weight,anticorrelated`, sorted by codes.
pub fn edges_csv(tree: &SpanningTree) -> String {
    let mut out = String::from("nodeA,nodeB,distance,weight,anticorrelated\n");
    for (a, b, e) in sorted_edges(tree) {
        writeln!(out, "{a},{b},{},{},{}", e.distance, e.weight, e.anticorrelated).unwrap();
    }
    out
}

fn sorted_edges(tree: &SpanningTree) -> Vec<(CurrencyCode, CurrencyCode, &crate::mst::TreeEdge)> {
    let mut edges: Vec<_> = tree
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = tree.endpoints(e);
            (a, b, e)
        })
        .collect();
    edges.sort_by_key(|(a, b, _)| (*a, *b));
    edges
}

pub const MAX_PENWIDTH: f64 = 5.0;

/// Undirected DOT graph; pen width proportional to the edge weight,
/// anticorrelated edges drawn green.
pub fn tree_dot(tree: &SpanningTree) -> String {
    let mut out = format!("graph \"MST_{}\" {{\n", tree.base());
    for c in tree.nodes() {
        writeln!(out, "  {c};").unwrap();
    }
    for (a, b, e) in sorted_edges(tree) {
        write!(
            out,
            "  {a} -- {b} [weight={}, distance={}, penwidth={}",
            e.weight,
            e.distance,
            MAX_PENWIDTH * e.weight
        )
        .unwrap();
        if e.anticorrelated {
            out.push_str(", color=green");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}

pub fn tree_graphml(tree: &SpanningTree) -> String {
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
        "  <key id=\"distance\" for=\"edge\" attr.name=\"distance\" attr.type=\"double\"/>\n",
        "  <key id=\"penwidth\" for=\"edge\" attr.name=\"penwidth\" attr.type=\"double\"/>\n",
        "  <key id=\"anticorrelated\" for=\"edge\" attr.name=\"anticorrelated\" attr.type=\"boolean\"/>\n",
        "  <key id=\"color\" for=\"edge\" attr.name=\"color\" attr.type=\"string\"/>\n",
    ));
    writeln!(out, "  <graph id=\"MST_{}\" edgedefault=\"undirected\">", tree.base()).unwrap();
    for c in tree.nodes() {
        writeln!(out, "    <node id=\"{c}\"/>").unwrap();
    }
    for (k, (a, b, e)) in sorted_edges(tree).into_iter().enumerate() {
        writeln!(out, "    <edge id=\"e{k}\" source=\"{a}\" target=\"{b}\">").unwrap();
        writeln!(out, "      <data key=\"weight\">{}</data>", e.weight).unwrap();
        writeln!(out, "      <data key=\"distance\">{}</data>", e.distance).unwrap();
        writeln!(out, "      <data key=\"penwidth\">{}</data>", MAX_PENWIDTH * e.weight).unwrap();
        writeln!(out, "      <data key=\"anticorrelated\">{}</data>", e.anticorrelated).unwrap();
        if e.anticorrelated {
            out.push_str("      <data key=\"color\">green</data>\n");
        }
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

pub fn metrics_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("metrics serialize");
    s.push('\n');
    s
}

pub const METRICS_CSV_HEADER: &str = "base,window_id,window_end_date,n,path_length,clustering,internode_distance,lambda_max";

/// One flat row keyed by base and window.
pub fn metrics_csv_row(report: &MetricsReport, window_id: usize, end_date: NaiveDate) -> String {
    format!(
        "{},{window_id},{},{},{},{},{},{}",
        report.base,
        format_date(end_date),
        report.n,
        report.path_length,
        report.clustering,
        report.internode_distance,
        report.lambda_max
    )
}

pub fn metrics_csv(rows: &[(&MetricsReport, usize, NaiveDate)]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for (r, id, date) in rows {
        out.push_str(&metrics_csv_row(r, *id, *date));
        out.push('\n');
    }
    out
}

/// Per-node table `code,degree,betweenness,clustering`.
pub fn node_metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("code,degree,betweenness,clustering\n");
    for (c, m) in &report.per_node {
        writeln!(out, "{c},{},{},{}", m.degree, m.betweenness, m.clustering).unwrap();
    }
    out
}

/// Time series `window_end_date,value`.
pub fn series_csv(points: &[(NaiveDate, f64)]) -> String {
    let mut out = String::from("window_end_date,value\n");
    for (d, v) in points {
        writeln!(out, "{},{v}", format_date(*d)).unwrap();
    }
    out
}

/// `delta,sigma,Sigma`, optionally scaled to per cent.
pub fn survival_csv(series: &SurvivalSeries, percent: bool) -> String {
    let scale = if percent { 100.0 } else { 1.0 };
    let mut out = String::from("delta,sigma,Sigma\n");
    for ((d, s), m) in series.delta_values.iter().zip(&series.sigma).zip(&series.multi) {
        writeln!(out, "{d},{},{}", s * scale, m * scale).unwrap();
    }
    out
}

/// `window_end_date,count_a,count_b`.
pub fn proximity_csv(rows: &[(NaiveDate, usize, usize)]) -> String {
    let mut out = String::from("window_end_date,count_a,count_b\n");
    for (d, a, b) in rows {
        writeln!(out, "{},{a},{b}", format_date(*d)).unwrap();
    }
    out
}
