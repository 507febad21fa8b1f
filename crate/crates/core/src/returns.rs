//! Normalized log-return matrix for one base currency.

use serde::Serialize;

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::{cross_rates, RatePanel};

pub const DEFAULT_CLIP_SIGMA: f64 = 10.0;

/// `N x T` matrix of zero-mean, unit-variance log returns of the `base/X`
/// rates, one row per price currency `X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnMatrix {
    base: CurrencyCode,
    price_currencies: Vec<CurrencyCode>,
    rows: Vec<Vec<f64>>,
}

impl ReturnMatrix {
    /// Rows must all have the same length; no normalization is applied.
    pub fn from_rows(
        base: CurrencyCode,
        price_currencies: Vec<CurrencyCode>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if price_currencies.len() != rows.len() {
            return Err(Error::validation("one row per price currency required"));
        }
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::validation("return rows differ in length"));
        }
        Ok(ReturnMatrix {
            base,
            price_currencies,
            rows,
        })
    }

    pub fn base(&self) -> CurrencyCode {
        self.base
    }

    pub fn price_currencies(&self) -> &[CurrencyCode] {
        &self.price_currencies
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Number of series `N`.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Number of return days `T`.
    pub fn t(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// `r(i) = ln v(i+1) - ln v(i)`.
pub fn log_returns(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::size("log returns need at least two values"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("log of non-positive rate {v}")));
    }
    Ok(values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Shifts to zero mean and scales to unit population variance (divisor `T`).
pub fn normalize(returns: &[f64]) -> Result<Vec<f64>> {
    if returns.len() < 2 {
        return Err(Error::size("normalization needs at least two returns"));
    }
    let m = mean(returns);
    let centered: Vec<f64> = returns.iter().map(|x| x - m).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / centered.len() as f64;
    let sd = var.sqrt();
    let scale = returns.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !sd.is_finite() || sd <= 1e-12 * scale || sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    // Second centering pass removes the rounding residue of the first.
    let mut out: Vec<f64> = centered.iter().map(|x| x / sd).collect();
    let residue = mean(&out);
    out.iter_mut().for_each(|x| *x -= residue);
    Ok(out)
}

/// Replaces entries beyond `±threshold` by the threshold value with the
/// same sign. Returns the number of replaced entries.
pub fn clip_row(row: &mut [f64], threshold: f64) -> usize {
    let mut clipped = 0;
    for x in row.iter_mut() {
        if x.abs() > threshold {
            *x = threshold.copysign(*x);
            clipped += 1;
        }
    }
    clipped
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutcome {
    pub matrix: ReturnMatrix,
    pub clipped: usize,
}

/// Clips every row at `±threshold` and re-normalizes, once, each row that
/// had at least one entry clipped. Rows without extremes are untouched.
pub fn clip_extremes(matrix: &ReturnMatrix, threshold: f64) -> Result<ClipOutcome> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::validation(format!(
            "clip threshold must be positive, got {threshold}"
        )));
    }
    let mut out = matrix.clone();
    let mut clipped = 0;
    for (row, code) in out.rows.iter_mut().zip(&out.price_currencies) {
        let c = clip_row(row, threshold);
        if c > 0 {
            *row = normalize(row).map_err(|e| e.for_currency(*code))?;
            clipped += c;
        }
    }
    Ok(ClipOutcome {
        matrix: out,
        clipped,
    })
}

/// Full pipeline for one base: cross rates, log returns, normalization and
/// optional clipping with a single re-normalization.
pub fn return_matrix(
    panel: &RatePanel,
    base: CurrencyCode,
    clip_sigma: Option<f64>,
) -> Result<ClipOutcome> {
    let series = cross_rates(panel, base)?;
    let mut codes = Vec::with_capacity(series.len());
    let mut rows = Vec::with_capacity(series.len());
    for s in &series {
        let r = log_returns(&s.values)?;
        rows.push(normalize(&r).map_err(|e| e.for_currency(s.price))?);
        codes.push(s.price);
    }
    let matrix = ReturnMatrix::from_rows(base, codes, rows)?;
    match clip_sigma {
        Some(threshold) => clip_extremes(&matrix, threshold),
        None => Ok(ClipOutcome {
            matrix,
            clipped: 0,
        }),
    }
}
