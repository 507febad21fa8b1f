//! Synthetic rate panels with a planted correlation structure, and
//! brute-force oracles for the tree and clustering computations.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::RatePanel;
use crate::mst::SpanningTree;

pub const PSD_TOLERANCE: f64 = -1e-10;
pub const MST_ORACLE_MAX_N: usize = 7;
pub const BETWEENNESS_ORACLE_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
    /// Pairwise correlation inside the block. For a hub block this is the
    /// hub-to-member correlation and members correlate at `intra^2`.
    pub intra: f64,
    /// The first member of the block is a hub driving the others.
    #[serde(default)]
    pub hub: bool,
    /// Volatility multiplier for every series of the block.
    #[serde(default = "one")]
    pub vol_scale: f64,
}

impl BlockSpec {
    pub fn new(size: usize, intra: f64) -> Self {
        BlockSpec {
            size,
            intra,
            hub: false,
            vol_scale: 1.0,
        }
    }

    pub fn hub(size: usize, coupling: f64) -> Self {
        BlockSpec {
            hub: true,
            ..BlockSpec::new(size, coupling)
        }
    }

    pub fn with_vol_scale(mut self, vol_scale: f64) -> Self {
        self.vol_scale = vol_scale;
        self
    }
}

/// Linear loss of coupling for one series: its return is mixed with
/// independent noise using a weight going from 1 on the first day to
/// `final_weight` on the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationTrend {
    pub series: usize,
    pub final_weight: f64,
}

fn one() -> f64 {
    1.0
}

fn default_vol() -> f64 {
    0.006
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(1998, 12, 15).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub blocks: Vec<BlockSpec>,
    /// Correlation between series of different blocks.
    pub inter: f64,
    /// Number of trading days (panel dates).
    pub days: usize,
    pub seed: u64,
    #[serde(default = "default_vol")]
    pub daily_vol: f64,
    /// First trading day; the calendar is Monday to Friday.
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Codes for the series in block order; synthetic `AAA, AAB, ...` when absent.
    #[serde(default)]
    pub codes: Option<Vec<CurrencyCode>>,
    /// Quote currency of the generated panel; the first series when absent.
    #[serde(default)]
    pub quote: Option<CurrencyCode>,
    #[serde(default)]
    pub trend: Option<DecorrelationTrend>,
}

impl BlockModelSpec {
    pub fn new(blocks: Vec<BlockSpec>, inter: f64, days: usize, seed: u64) -> Self {
        BlockModelSpec {
            blocks,
            inter,
            days,
            seed,
            daily_vol: default_vol(),
            start_date: default_start(),
            codes: None,
            quote: None,
            trend: None,
        }
    }

    pub fn series_count(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn codes(&self) -> Vec<CurrencyCode> {
        match &self.codes {
            Some(c) => c.clone(),
            None => (0..self.series_count()).map(CurrencyCode::synthetic).collect(),
        }
    }

    /// Target correlation matrix of the series' log-value increments.
    pub fn target_correlation(&self) -> DMatrix<f64> {
        let m = self.series_count();
        let mut block_of = Vec::with_capacity(m);
        let mut is_hub = Vec::with_capacity(m);
        for (k, b) in self.blocks.iter().enumerate() {
            for i in 0..b.size {
                block_of.push(k);
                is_hub.push(b.hub && i == 0);
            }
        }
        DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                return 1.0;
            }
            if block_of[i] != block_of[j] {
                return self.inter;
            }
            let b = &self.blocks[block_of[i]];
            if !b.hub || is_hub[i] || is_hub[j] {
                b.intra
            } else {
                b.intra * b.intra
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.series_count();
        if m < 2 {
            return Err(Error::validation("block model needs at least two series"));
        }
        if self.blocks.iter().any(|b| b.size == 0) {
            return Err(Error::validation("empty block"));
        }
        if self.days < 2 {
            return Err(Error::validation("block model needs at least two days"));
        }
        if !(self.daily_vol.is_finite() && self.daily_vol > 0.0)
            || self.blocks.iter().any(|b| !(b.vol_scale.is_finite() && b.vol_scale > 0.0))
        {
            return Err(Error::validation("volatilities must be positive"));
        }
        let codes = self.codes();
        if codes.len() != m {
            return Err(Error::validation(format!("{} codes for {m} series", codes.len())));
        }
        if let Some(q) = self.quote {
            if !codes.contains(&q) {
                return Err(Error::validation(format!("quote {q} is not a generated series")));
            }
        }
        if let Some(trend) = &self.trend {
            if trend.series >= m || !(0.0..=1.0).contains(&trend.final_weight) {
                return Err(Error::validation("invalid decorrelation trend"));
            }
        }
        let target = self.target_correlation();
        if target.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::validation("correlations must lie in [-1, 1]"));
        }
        let min_ev = SymmetricEigen::new(target)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_ev < PSD_TOLERANCE {
            return Err(Error::validation(format!(
                "target correlation matrix is not positive semi-definite (eigenvalue {min_ev:.3e})"
            )));
        }
        Ok(())
    }
}

/// Lower-triangular `L` with `L L^T = c` for a positive semi-definite `c`.
/// Columns with a vanishing pivot are zeroed, which keeps the factor unique
/// for singular targets such as perfectly correlated blocks.
fn semidefinite_cholesky(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let diag = c[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if diag <= 1e-12 {
            continue;
        }
        let pivot = diag.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..n {
            let s = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / pivot;
        }
    }
    l
}

/// Monday-to-Friday calendar of `days` dates from `start` (rolled forward
/// off a weekend).
pub fn weekday_calendar(start: NaiveDate, days: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(days);
    let mut d = start;
    while out.len() < days {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Cumulative log values of every series, `days` points each, starting at 0.
pub fn generate_log_values(spec: &BlockModelSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let m = spec.series_count();
    let factor = semidefinite_cholesky(&spec.target_correlation());
    let vol: Vec<f64> = spec
        .blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.vol_scale * spec.daily_vol, b.size))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let steps = spec.days - 1;
    let mut values = vec![vec![0.0; spec.days]; m];
    let mut z = vec![0.0; m];
    for t in 0..steps {
        z.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
        let mut x: Vec<f64> = (0..m)
            .map(|i| (0..=i).map(|k| factor[(i, k)] * z[k]).sum())
            .collect();
        if let Some(trend) = &spec.trend {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let frac = if steps > 1 { t as f64 / (steps - 1) as f64 } else { 0.0 };
            let w = 1.0 + (trend.final_weight - 1.0) * frac;
            let s = trend.series;
            x[s] = w * x[s] + (1.0 - w * w).max(0.0).sqrt() * noise;
        }
        for i in 0..m {
            values[i][t + 1] = values[i][t] + vol[i] * x[i];
        }
    }
    Ok(values)
}

/// Rate panel quoted in `spec.quote` (the first series by default): the row
/// of `X` is `exp(v_Q - v_X)` scaled by a random initial level.
pub fn generate_panel(spec: &BlockModelSpec) -> Result<RatePanel> {
    let values = generate_log_values(spec)?;
    let codes = spec.codes();
    let quote = spec.quote.unwrap_or(codes[0]);
    let qi = codes.iter().position(|c| *c == quote).expect("validated quote");
    // Separate stream so levels do not shift the return draws.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    let level = Uniform::new(-3.0, 3.0).expect("valid range");
    let levels: Vec<f64> = codes.iter().map(|_| level.sample(&mut rng)).collect();
    let rates = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == qi {
                vec![1.0; spec.days]
            } else {
                (0..spec.days)
                    .map(|t| ((values[qi][t] + levels[qi]) - (v[t] + levels[i])).exp())
                    .collect()
            }
        })
        .collect();
    RatePanel::new(quote, codes, weekday_calendar(spec.start_date, spec.days), rates)
}

/// Minimum total distance over all `N^(N-2)` labelled spanning trees,
/// enumerated as Prüfer sequences.
pub fn mst_oracle(distances: &DMatrix<f64>) -> Result<f64> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::validation("distance matrix must be square"));
    }
    if n > MST_ORACLE_MAX_N {
        return Err(Error::size(format!("MST oracle is capped at N = {MST_ORACLE_MAX_N}")));
    }
    if n < 2 {
        return Err(Error::size("MST oracle needs N >= 2"));
    }
    if n == 2 {
        return Ok(distances[(0, 1)]);
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let total: f64 = prufer_edges(&seq, n).iter().map(|&(u, v)| distances[(u, v)]).sum();
        best = best.min(total);
        // Odometer increment.
        let mut k = 0;
        while k < len {
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
        if k == len {
            break;
        }
    }
    Ok(best)
}

fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Betweenness by walking the path of every ordered pair.
pub fn betweenness_oracle(tree: &SpanningTree, x: CurrencyCode) -> Result<f64> {
    let n = tree.n();
    if n > BETWEENNESS_ORACLE_MAX_N {
        return Err(Error::size(format!(
            "betweenness oracle is capped at N = {BETWEENNESS_ORACLE_MAX_N}"
        )));
    }
    if n < 3 {
        return Err(Error::size("betweenness needs N >= 3"));
    }
    let target = tree.index_of(x)?;
    let adj = tree.adjacency();
    let mut through = 0usize;
    for y in (0..n).filter(|&y| y != target) {
        // Parent pointers towards y.
        let mut parent = vec![usize::MAX; n];
        parent[y] = y;
        let mut stack = vec![y];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        for z in (0..n).filter(|&z| z != y && z != target) {
            let mut cur = parent[z];
            while cur != y {
                if cur == target {
                    through += 1;
                    break;
                }
                cur = parent[cur];
            }
        }
    }
    Ok(through as f64 / ((n - 1) * (n - 2)) as f64)
}

/// Weighted clustering by explicit enumeration of ordered neighbour pairs.
/// Returns per-node coefficients and their mean.
pub fn clustering_oracle(weights: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let n = weights.nrows();
    if n < 3 {
        return Err(Error::size("clustering needs N >= 3"));
    }
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max = max.max(weights[(i, j)]);
            }
        }
    }
    if max == 0.0 {
        return Err(Error::Numeric("all weights are zero".into()));
    }
    let w = |a: usize, b: usize| weights[(a, b)] / max;
    let k = (n - 1) as f64;
    let per_node: Vec<f64> = (0..n)
        .map(|x| {
            let mut sum = 0.0;
            for y in 0..n {
                for z in 0..n {
                    if y != x && z != x && y != z {
                        sum += (w(x, y) * w(y, z) * w(z, x)).powf(1.0 / 3.0);
                    }
                }
            }
            sum / (k * (k - 1.0))
        })
        .collect();
    let mean = per_node.iter().sum::<f64>() / n as f64;
    Ok((per_node, mean))
}
