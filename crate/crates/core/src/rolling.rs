//! Windowed evolution: sliding windows and explicit date blocks, per-window
//! snapshots and edge survival curves.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{correlation_matrix, CorrelationNetwork};
use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::RatePanel;
use crate::metrics::{metrics_report, proximity_count, MetricsReport};
use crate::mst::{build_mst, edge_set, survival_multi, survival_single, EdgeSet, SpanningTree};
use crate::returns::return_matrix;

pub const MIN_WINDOW_LENGTH: usize = 20;
pub const DEFAULT_WINDOW_LENGTH: usize = 126;
pub const DEFAULT_STEP: usize = 21;

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::validation(format!("date range {start}..{end} is reversed")));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowMode {
    Sliding,
    Blocks(Vec<DateRange>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    length: usize,
    step: usize,
    mode: WindowMode,
}

impl WindowSpec {
    pub fn sliding(length: usize, step: usize) -> Result<Self> {
        if length < MIN_WINDOW_LENGTH {
            return Err(Error::validation(format!(
                "window length {length} is below the minimum of {MIN_WINDOW_LENGTH}"
            )));
        }
        if step == 0 {
            return Err(Error::validation("window step must be positive"));
        }
        Ok(WindowSpec {
            length,
            step,
            mode: WindowMode::Sliding,
        })
    }

    pub fn blocks(ranges: Vec<DateRange>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::validation("block mode needs at least one range"));
        }
        for pair in ranges.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::validation(format!(
                    "blocks {}..{} and {}..{} overlap or are out of order",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(WindowSpec {
            length: MIN_WINDOW_LENGTH,
            step: 1,
            mode: WindowMode::Blocks(ranges),
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn mode(&self) -> &WindowMode {
        &self.mode
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::sliding(DEFAULT_WINDOW_LENGTH, DEFAULT_STEP).expect("valid defaults")
    }
}

/// Half-open index ranges `[start, end)` into `dates`.
pub fn make_windows(dates: &[NaiveDate], spec: &WindowSpec) -> Result<Vec<(usize, usize)>> {
    match &spec.mode {
        WindowMode::Sliding => {
            let t = dates.len();
            if spec.length > t {
                return Err(Error::size(format!("window length {} exceeds {t} dates", spec.length)));
            }
            let count = (t - spec.length) / spec.step + 1;
            Ok((0..count).map(|k| (k * spec.step, k * spec.step + spec.length)).collect())
        }
        WindowMode::Blocks(ranges) => ranges
            .iter()
            .map(|r| {
                let start = dates.partition_point(|d| *d < r.start);
                let end = dates.partition_point(|d| *d <= r.end);
                if end - start < MIN_WINDOW_LENGTH {
                    return Err(Error::size(format!(
                        "block {}..{} holds {} dates, fewer than {MIN_WINDOW_LENGTH}",
                        r.start,
                        r.end,
                        end - start
                    )));
                }
                Ok((start, end))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

pub fn windows(dates: &[NaiveDate], spec: &WindowSpec) -> Result<Vec<Window>> {
    Ok(make_windows(dates, spec)?
        .into_iter()
        .enumerate()
        .map(|(id, (start, end))| Window {
            id,
            start,
            end,
            start_date: dates[start],
            end_date: dates[end - 1],
        })
        .collect())
}

/// Network, tree and metrics of one base over one window.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub window: Window,
    pub network: CorrelationNetwork,
    pub tree: SpanningTree,
    pub report: MetricsReport,
    pub clipped: usize,
}

/// Computes a snapshot from the window's own rates; returns are normalized
/// and clipped inside the window.
pub fn analyze_window(
    panel: &RatePanel,
    base: CurrencyCode,
    window: Window,
    clip_sigma: Option<f64>,
) -> Result<Snapshot> {
    let run = || -> Result<Snapshot> {
        let sub = panel.slice(window.start, window.end)?;
        let outcome = return_matrix(&sub, base, clip_sigma)?;
        let network = correlation_matrix(&outcome.matrix)?;
        let tree = build_mst(&network)?;
        let report = metrics_report(&network, &tree)?;
        Ok(Snapshot {
            window,
            network,
            tree,
            report,
            clipped: outcome.clipped,
        })
    };
    run().map_err(|e| Error::Window {
        id: window.id,
        start: window.start_date,
        end: window.end_date,
        source: Box::new(e),
    })
}

/// Snapshot over the whole panel.
pub fn full_period(panel: &RatePanel, base: CurrencyCode, clip_sigma: Option<f64>) -> Result<Snapshot> {
    let dates = panel.dates();
    if dates.is_empty() {
        return Err(Error::size("empty panel"));
    }
    let window = Window {
        id: 0,
        start: 0,
        end: dates.len(),
        start_date: dates[0],
        end_date: dates[dates.len() - 1],
    };
    analyze_window(panel, base, window, clip_sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Snapshots for every window, in window order.
pub fn rolling_snapshots(
    panel: &RatePanel,
    base: CurrencyCode,
    spec: &WindowSpec,
    clip_sigma: Option<f64>,
    execution: Execution,
) -> Result<Vec<Snapshot>> {
    if !panel.contains(base) {
        return Err(Error::NotFound(base));
    }
    let ws = windows(panel.dates(), spec)?;
    match execution {
        Execution::Serial => ws.into_iter().map(|w| analyze_window(panel, base, w, clip_sigma)).collect(),
        Execution::Parallel => ws
            .into_par_iter()
            .map(|w| analyze_window(panel, base, w, clip_sigma))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window_id: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    /// Number of dates in the window.
    pub length: usize,
    pub report: MetricsReport,
}

impl WindowReport {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        WindowReport {
            window_id: s.window.id,
            start_date: s.window.start_date,
            end_date: s.window.end_date,
            length: s.window.len(),
            report: s.report.clone(),
        }
    }
}

pub fn rolling_metrics(
    panel: &RatePanel,
    base: CurrencyCode,
    spec: &WindowSpec,
    clip_sigma: Option<f64>,
) -> Result<Vec<WindowReport>> {
    Ok(rolling_snapshots(panel, base, spec, clip_sigma, Execution::Parallel)?
        .into_iter()
        .map(|s| WindowReport::from_snapshot(&s))
        .collect())
}

/// Per-window `(end_date, count_a, count_b)` of nodes closer to `a` or `b`.
pub fn proximity_series(
    snapshots: &[Snapshot],
    a: CurrencyCode,
    b: CurrencyCode,
) -> Result<Vec<(NaiveDate, usize, usize)>> {
    snapshots
        .iter()
        .map(|s| {
            let (ca, cb) = proximity_count(&s.network, a, b)?;
            Ok((s.window.end_date, ca, cb))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSeries {
    pub base: CurrencyCode,
    pub delta_values: Vec<usize>,
    /// Single-step ratios.
    pub sigma: Vec<f64>,
    /// Multi-step ratios.
    #[serde(rename = "Sigma")]
    pub multi: Vec<f64>,
}

/// Largest shift used when none is requested: half the sequence.
pub fn default_max_delta(tree_count: usize) -> usize {
    ((tree_count.saturating_sub(1)) / 2).max(1)
}

/// Single- and multi-step survival ratios for `δ = 1..=max_delta`.
///
/// Both ratios are averaged over the same origins `i = 0..=len-1-max_delta`,
/// so each multi-step term is bounded by its single-step partner and shrinks
/// as `δ` grows.
pub fn survival_curves(trees: &[SpanningTree], max_delta: usize) -> Result<SurvivalSeries> {
    if trees.len() < 2 {
        return Err(Error::size("survival curves need at least two trees"));
    }
    if max_delta == 0 {
        return Err(Error::validation("max_delta must be at least 1"));
    }
    if max_delta >= trees.len() {
        return Err(Error::size(format!(
            "max_delta {max_delta} needs more than {} trees",
            trees.len()
        )));
    }
    let base = trees[0].base();
    if trees.iter().any(|t| t.base() != base || t.nodes() != trees[0].nodes()) {
        return Err(Error::validation("trees differ in base or node set"));
    }
    let sets: Vec<EdgeSet> = trees.iter().map(edge_set).collect();
    let origins = trees.len() - max_delta;
    let mut sigma = Vec::with_capacity(max_delta);
    let mut multi = Vec::with_capacity(max_delta);
    for delta in 1..=max_delta {
        let mut s = 0.0;
        let mut m = 0.0;
        for i in 0..origins {
            s += survival_single(&sets[i], &sets[i + delta])?;
            m += survival_multi(&sets[i..=i + delta])?;
        }
        sigma.push(s / origins as f64);
        multi.push(m / origins as f64);
    }
    for d in 0..max_delta {
        if multi[d] > sigma[d] + 1e-12 || (d > 0 && multi[d] > multi[d - 1] + 1e-12) {
            return Err(Error::Numeric(format!("survival ordering violated at delta {}", d + 1)));
        }
    }
    Ok(SurvivalSeries {
        base,
        delta_values: (1..=max_delta).collect(),
        sigma,
        multi,
    })
}

/// Ordinary least-squares line through `(k, y_k)`, `k = 0, 1, ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTrend {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
}

impl LinearTrend {
    /// Slope in units of its standard error.
    pub fn t_statistic(&self) -> f64 {
        self.slope / self.slope_std_error
    }
}

pub fn linear_trend(y: &[f64]) -> Result<LinearTrend> {
    let n = y.len();
    if n < 3 {
        return Err(Error::size("trend fit needs at least three points"));
    }
    let nf = n as f64;
    let mx = (nf - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = (0..n).map(|k| (k as f64 - mx).powi(2)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(k, v)| (k as f64 - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = y
        .iter()
        .enumerate()
        .map(|(k, v)| (v - intercept - slope * k as f64).powi(2))
        .sum();
    Ok(LinearTrend {
        slope,
        intercept,
        slope_std_error: (ssr / (nf - 2.0) / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currency::code;
    use crate::synth::{generate_panel, BlockModelSpec, BlockSpec};
    use proptest::prelude::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        crate::synth::weekday_calendar(day(2000, 1, 3), n)
    }

    #[test]
    fn sliding_window_count() {
        let spec = WindowSpec::sliding(126, 21).unwrap();
        let w = make_windows(&dates(300), &spec).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(w[0], (0, 126));
        assert_eq!(w[8], (168, 294));
        let full = WindowSpec::sliding(300, 21).unwrap();
        assert_eq!(make_windows(&dates(300), &full).unwrap(), vec![(0, 300)]);
        let long = WindowSpec::sliding(301, 21).unwrap();
        assert!(matches!(make_windows(&dates(300), &long), Err(Error::Size(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(WindowSpec::sliding(19, 1).is_err());
        assert!(WindowSpec::sliding(20, 0).is_err());
        let a = DateRange::new(day(2000, 1, 1), day(2000, 6, 30)).unwrap();
        let b = DateRange::new(day(2000, 6, 30), day(2000, 12, 31)).unwrap();
        assert!(WindowSpec::blocks(vec![a, b]).is_err());
        assert!(WindowSpec::blocks(vec![b, a]).is_err());
        assert!(DateRange::new(day(2001, 1, 1), day(2000, 1, 1)).is_err());
        assert_eq!(WindowSpec::default().step(), 21);
    }

    #[test]
    fn block_windows_follow_dates() {
        let ds = dates(260);
        let spec = WindowSpec::blocks(vec![
            DateRange::new(day(2000, 1, 1), day(2000, 6, 30)).unwrap(),
            DateRange::new(day(2000, 7, 1), day(2000, 12, 31)).unwrap(),
        ])
        .unwrap();
        let ws = windows(&ds, &spec).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[0].start_date, day(2000, 1, 3));
        assert_eq!(ws[0].end_date, day(2000, 6, 30));
        assert_eq!(ws[1].start_date, day(2000, 7, 3));
        assert_eq!(ws[0].end, ws[1].start);
        let empty = WindowSpec::blocks(vec![DateRange::new(day(1990, 1, 1), day(1990, 12, 31)).unwrap()]).unwrap();
        assert!(matches!(make_windows(&ds, &empty), Err(Error::Size(_))));
    }

    fn tree(pairs: &[(usize, usize)]) -> SpanningTree {
        let nodes: Vec<_> = (0..4).map(CurrencyCode::synthetic).collect();
        SpanningTree::from_pairs(code("ZZZ"), nodes, pairs).unwrap()
    }

    #[test]
    fn constant_trees_survive() {
        let t = tree(&[(0, 1), (1, 2), (2, 3)]);
        let s = survival_curves(&vec![t; 5], 2).unwrap();
        assert_eq!(s.sigma, vec![1.0, 1.0]);
        assert_eq!(s.multi, vec![1.0, 1.0]);
        assert_eq!(s.delta_values, vec![1, 2]);
    }

    #[test]
    fn disjoint_trees_do_not_survive() {
        // Two edge-disjoint spanning paths on four nodes, alternating.
        let a = tree(&[(0, 1), (1, 2), (2, 3)]);
        let b = tree(&[(0, 2), (0, 3), (1, 3)]);
        let s = survival_curves(&[a.clone(), b.clone(), a, b], 1).unwrap();
        assert_eq!(s.sigma, vec![0.0]);
        assert_eq!(s.multi, vec![0.0]);
    }

    #[test]
    fn one_common_edge_over_four_trees() {
        let trees = [
            tree(&[(0, 1), (1, 2), (2, 3)]),
            tree(&[(0, 1), (0, 2), (0, 3)]),
            tree(&[(0, 1), (1, 3), (2, 3)]),
            tree(&[(0, 1), (1, 2), (1, 3)]),
        ];
        let s = survival_curves(&trees, 3).unwrap();
        assert!((s.multi[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn survival_errors() {
        let t = tree(&[(0, 1), (1, 2), (2, 3)]);
        assert!(matches!(survival_curves(&[t.clone(), t.clone()], 2), Err(Error::Size(_))));
        assert!(matches!(survival_curves(std::slice::from_ref(&t), 1), Err(Error::Size(_))));
        assert_eq!(default_max_delta(2), 1);
        assert_eq!(default_max_delta(13), 6);
    }

    fn random_tree(seed: &[u8]) -> SpanningTree {
        // Attach node k to an earlier node chosen by the seed.
        let pairs: Vec<_> = (1..6).map(|k| (seed[k - 1] as usize % k, k)).collect();
        let nodes: Vec<_> = (0..6).map(CurrencyCode::synthetic).collect();
        SpanningTree::from_pairs(code("ZZZ"), nodes, &pairs).unwrap()
    }

    proptest! {
        #[test]
        fn survival_ordering_holds(seeds in prop::collection::vec(prop::collection::vec(any::<u8>(), 5), 3..12)) {
            let trees: Vec<_> = seeds.iter().map(|s| random_tree(s)).collect();
            let max_delta = trees.len() - 1;
            let s = survival_curves(&trees, max_delta).unwrap();
            for d in 0..max_delta {
                prop_assert!(s.multi[d] <= s.sigma[d]);
                prop_assert!((0.0..=1.0).contains(&s.sigma[d]));
                if d > 0 {
                    prop_assert!(s.multi[d] <= s.multi[d - 1]);
                }
            }
        }
    }

    #[test]
    fn linear_trend_recovers_line() {
        let y: Vec<f64> = (0..10).map(|k| 2.0 + 0.5 * k as f64).collect();
        let t = linear_trend(&y).unwrap();
        assert!((t.slope - 0.5).abs() < 1e-14);
        assert!((t.intercept - 2.0).abs() < 1e-13);
        assert!(t.slope_std_error < 1e-12);
        // Hand-computed: y = [0, 2, 1] gives slope 0.5, residuals (-0.5, 1, -0.5).
        let t = linear_trend(&[0.0, 2.0, 1.0]).unwrap();
        assert!((t.slope - 0.5).abs() < 1e-15);
        assert!((t.slope_std_error - (1.5f64 / 2.0).sqrt()).abs() < 1e-14);
    }

    fn panel() -> RatePanel {
        generate_panel(&BlockModelSpec::new(
            vec![BlockSpec::new(4, 0.7), BlockSpec::new(3, 0.4)],
            0.1,
            300,
            9,
        ))
        .unwrap()
    }

    #[test]
    fn serial_and_parallel_agree() {
        let p = panel();
        let spec = WindowSpec::sliding(126, 21).unwrap();
        let base = CurrencyCode::synthetic(2);
        let serial = rolling_snapshots(&p, base, &spec, Some(10.0), Execution::Serial).unwrap();
        let parallel = rolling_snapshots(&p, base, &spec, Some(10.0), Execution::Parallel).unwrap();
        assert_eq!(serial.len(), 9);
        for (s, q) in serial.iter().zip(&parallel) {
            assert_eq!(
                serde_json::to_string(&s.report).unwrap(),
                serde_json::to_string(&q.report).unwrap()
            );
        }
        let reports = rolling_metrics(&p, base, &spec, Some(10.0)).unwrap();
        assert_eq!(reports[3].end_date, p.dates()[63 + 125]);
    }

    #[test]
    fn single_window_matches_full_period() {
        let p = panel();
        let base = CurrencyCode::synthetic(0);
        let spec = WindowSpec::sliding(300, 21).unwrap();
        let reports = rolling_metrics(&p, base, &spec, Some(10.0)).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].report, full_period(&p, base, Some(10.0)).unwrap().report);
    }

    #[test]
    fn window_errors_carry_the_window() {
        // One currency tracks the base from day 150 on, so its cross rate is
        // flat in every window starting at or after 150.
        let p = panel();
        let codes = p.currencies().to_vec();
        let base = CurrencyCode::synthetic(3);
        let (bi, xi) = (codes.iter().position(|c| *c == base).unwrap(), 5);
        let mut rates: Vec<Vec<f64>> = codes.iter().map(|c| p.row(*c).unwrap().to_vec()).collect();
        for t in 150..300 {
            rates[xi][t] = rates[bi][t];
        }
        let p = RatePanel::new(p.quote(), codes, p.dates().to_vec(), rates).unwrap();
        let spec = WindowSpec::sliding(126, 21).unwrap();
        match rolling_metrics(&p, base, &spec, Some(10.0)) {
            Err(Error::Window { id, source, .. }) => {
                assert_eq!(id, 8);
                assert!(matches!(*source, Error::Degenerate { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_base_is_rejected() {
        let spec = WindowSpec::sliding(126, 21).unwrap();
        assert!(matches!(
            rolling_metrics(&panel(), code("XXX"), &spec, None),
            Err(Error::NotFound(_))
        ));
    }
}
