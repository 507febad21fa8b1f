//! Exchange-rate panel ingestion: CSV parsing, date alignment, the
//! missing-data policy, re-denomination and cross-rate synthesis.
//!
//! A [`RatePanel`] row for currency `X` holds the quote `Q/X`, i.e. the
//! number of units of `X` paid for one unit of the quote currency `Q`.
//! The quote currency itself is always part of the panel as a row of ones,
//! so a panel over `n` currencies yields `n - 1` cross-rate series for any
//! base.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Tolerance used when a quote-currency column is present in the input and
/// must equal one.
const QUOTE_COLUMN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RatePanel {
    quote: CurrencyCode,
    currencies: Vec<CurrencyCode>,
    dates: Vec<NaiveDate>,
    rates: Vec<Vec<f64>>,
}

impl RatePanel {
    /// Builds a panel from rows of `quote/currency` rates. Rows are reordered
    /// lexicographically by code and a row of ones is added for the quote
    /// currency if it is missing.
    pub fn new(
        quote: CurrencyCode,
        currencies: Vec<CurrencyCode>,
        dates: Vec<NaiveDate>,
        rates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if currencies.len() != rates.len() {
            return Err(Error::validation(format!(
                "{} currencies but {} rate rows",
                currencies.len(),
                rates.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("dates must be strictly increasing"));
        }
        let mut seen = BTreeSet::new();
        let mut rows: Vec<(CurrencyCode, Vec<f64>)> = Vec::with_capacity(currencies.len() + 1);
        for (code, row) in currencies.into_iter().zip(rates) {
            if !seen.insert(code) {
                return Err(Error::validation(format!("duplicate currency {code}")));
            }
            if row.len() != dates.len() {
                return Err(Error::validation(format!(
                    "row {code} has {} values for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if let Some((t, v)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::validation(format!(
                    "rate {quote}/{code} on {} is {v}; rates must be positive and finite",
                    dates[t]
                )));
            }
            if code == quote
                && row.iter().any(|v| (v - 1.0).abs() > QUOTE_COLUMN_TOLERANCE)
            {
                return Err(Error::validation(format!(
                    "quote currency {quote} appears as a column with values other than 1"
                )));
            }
            rows.push((code, row));
        }
        if !seen.contains(&quote) {
            rows.push((quote, vec![1.0; dates.len()]));
        }
        rows.sort_by_key(|(code, _)| *code);
        let (currencies, rates) = rows.into_iter().unzip();
        Ok(RatePanel {
            quote,
            currencies,
            dates,
            rates,
        })
    }

    pub fn quote(&self) -> CurrencyCode {
        self.quote
    }

    /// All currencies in the panel, quote included, in lexicographic order.
    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn currency_count(&self) -> usize {
        self.currencies.len()
    }

    pub fn date_count(&self) -> usize {
        self.dates.len()
    }

    pub fn contains(&self, code: CurrencyCode) -> bool {
        self.index_of(code).is_some()
    }

    fn index_of(&self, code: CurrencyCode) -> Option<usize> {
        self.currencies.binary_search(&code).ok()
    }

    /// Row of `quote/code` rates.
    pub fn row(&self, code: CurrencyCode) -> Result<&[f64]> {
        self.index_of(code)
            .map(|i| self.rates[i].as_slice())
            .ok_or(Error::NotFound(code))
    }

    /// Sub-panel over the date index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<RatePanel> {
        if start >= end || end > self.dates.len() {
            return Err(Error::size(format!(
                "date range {start}..{end} invalid for {} dates",
                self.dates.len()
            )));
        }
        Ok(RatePanel {
            quote: self.quote,
            currencies: self.currencies.clone(),
            dates: self.dates[start..end].to_vec(),
            rates: self.rates.iter().map(|r| r[start..end].to_vec()).collect(),
        })
    }

    /// Re-denominates the panel in another of its currencies.
    pub fn requote(&self, new_quote: CurrencyCode) -> Result<RatePanel> {
        let pivot = self.row(new_quote)?.to_vec();
        let rates = self
            .rates
            .iter()
            .zip(&self.currencies)
            .map(|(row, code)| {
                if *code == new_quote {
                    vec![1.0; row.len()]
                } else {
                    row.iter().zip(&pivot).map(|(x, p)| x / p).collect()
                }
            })
            .collect();
        RatePanel::new(new_quote, self.currencies.clone(), self.dates.clone(), rates)
    }

    /// Serializes to the ingest CSV schema. The implicit quote column is
    /// omitted; values use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for code in self.currencies.iter().filter(|c| **c != self.quote) {
            out.push(',');
            out.push_str(code.as_str());
        }
        out.push('\n');
        for (t, date) in self.dates.iter().enumerate() {
            write!(out, "{}", date.format(DATE_FORMAT)).unwrap();
            for (code, row) in self.currencies.iter().zip(&self.rates) {
                if *code != self.quote {
                    write!(out, ",{}", row[t]).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Joins panels sharing a quote currency on their common dates. Currencies
/// other than the quote must not repeat across panels.
pub fn merge_panels(panels: &[RatePanel]) -> Result<RatePanel> {
    let first = panels.first().ok_or_else(|| Error::validation("no panels to merge"))?;
    if panels.len() == 1 {
        return Ok(first.clone());
    }
    let quote = first.quote;
    if panels.iter().any(|p| p.quote != quote) {
        return Err(Error::validation("panels to merge have different quote currencies"));
    }
    let mut dates: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for p in &panels[1..] {
        let other: BTreeSet<NaiveDate> = p.dates.iter().copied().collect();
        dates.retain(|d| other.contains(d));
    }
    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let mut currencies = Vec::new();
    let mut rates = Vec::new();
    for p in panels {
        let keep: Vec<usize> = dates
            .iter()
            .map(|d| p.dates.binary_search(d).expect("common date"))
            .collect();
        for (code, row) in p.currencies.iter().zip(&p.rates) {
            if *code == quote {
                continue;
            }
            currencies.push(*code);
            rates.push(keep.iter().map(|&t| row[t]).collect());
        }
    }
    RatePanel::new(quote, currencies, dates, rates)
}

/// Exchange rate `base/price` over the panel's dates, in units of `price`
/// per one unit of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossRateSeries {
    pub base: CurrencyCode,
    pub price: CurrencyCode,
    pub values: Vec<f64>,
}

/// All `base/X` series for the currencies `X != base`, in panel order.
pub fn cross_rates(panel: &RatePanel, base: CurrencyCode) -> Result<Vec<CrossRateSeries>> {
    let base_row = panel.row(base)?;
    Ok(panel
        .currencies
        .iter()
        .zip(&panel.rates)
        .filter(|(code, _)| **code != base)
        .map(|(code, row)| CrossRateSeries {
            base,
            price: *code,
            values: row.iter().zip(base_row).map(|(x, b)| x / b).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestOptions {
    pub quote: CurrencyCode,
    /// Input cells hold `X/quote` (quote units per one `X`) and are inverted.
    pub invert: bool,
    /// Longest run of consecutive missing cells that is forward-filled.
    pub max_gap: usize,
    /// Currencies missing a larger fraction of dates are rejected.
    pub max_missing_frac: f64,
}

impl IngestOptions {
    pub fn new(quote: CurrencyCode) -> Self {
        IngestOptions {
            quote,
            invert: false,
            max_gap: 3,
            max_missing_frac: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub currency: CurrencyCode,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub panel: RatePanel,
    pub rejected: Vec<Rejection>,
    pub filled_cells: usize,
    pub dropped_dates: Vec<NaiveDate>,
}

/// Parses a `date,CODE1,CODE2,...` CSV and applies the missing-data policy:
/// currencies missing more than `max_missing_frac` of dates are rejected,
/// gaps of at most `max_gap` days are forward-filled, and dates where any
/// retained currency still lacks a value are dropped.
pub fn parse_panel(content: &str, opts: &IngestOptions) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(content.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::Parse { line: 1, message: "empty input".into() }),
    };
    if !header.get(0).is_some_and(|h| h.trim().eq_ignore_ascii_case("date")) {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with `date`".into(),
        });
    }
    let codes: Vec<CurrencyCode> = header
        .iter()
        .skip(1)
        .map(|h| {
            h.parse().map_err(|e: Error| Error::Parse {
                line: 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    if codes.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no currency columns".into(),
        });
    }
    let mut unique = BTreeSet::new();
    if let Some(dup) = codes.iter().find(|c| !unique.insert(**c)) {
        return Err(Error::validation(format!("duplicate currency column {dup}")));
    }

    let mut rows: Vec<(NaiveDate, usize, Vec<Option<f64>>)> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != codes.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", codes.len() + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(rec[0].trim(), DATE_FORMAT).map_err(|e| {
            Error::Parse {
                line,
                message: format!("bad date {:?}: {e}", &rec[0]),
            }
        })?;
        let mut cells = Vec::with_capacity(codes.len());
        for (field, code) in rec.iter().skip(1).zip(&codes) {
            let field = field.trim();
            if field.is_empty() {
                cells.push(None);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {field:?} for {code}"),
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!(
                    "line {line}: rate for {code} is {v}; rates must be positive"
                )));
            }
            cells.push(Some(if opts.invert { 1.0 / v } else { v }));
        }
        rows.push((date, line, cells));
    }
    rows.sort_by_key(|(date, line, _)| (*date, *line));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::validation(format!(
            "duplicate date {} (lines {} and {})",
            w[0].0, w[0].1, w[1].1
        )));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let n_dates = rows.len();
    let mut columns: Vec<(CurrencyCode, Vec<Option<f64>>)> = codes
        .iter()
        .enumerate()
        .map(|(j, code)| (*code, rows.iter().map(|r| r.2[j]).collect()))
        .collect();

    let mut rejected = Vec::new();
    columns.retain(|(code, col)| {
        let missing = col.iter().filter(|v| v.is_none()).count() as f64 / n_dates as f64;
        if missing > opts.max_missing_frac {
            rejected.push(Rejection {
                currency: *code,
                missing_fraction: missing,
            });
            false
        } else {
            true
        }
    });

    let filled_cells = columns
        .iter_mut()
        .map(|(_, col)| forward_fill(col, opts.max_gap))
        .sum();

    let keep: Vec<bool> = (0..n_dates)
        .map(|t| columns.iter().all(|(_, col)| col[t].is_some()))
        .collect();
    let dropped_dates = rows
        .iter()
        .zip(&keep)
        .filter(|(_, k)| !**k)
        .map(|(r, _)| r.0)
        .collect();
    let dates: Vec<NaiveDate> = rows
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(r, _)| r.0)
        .collect();
    if dates.len() < 2 {
        return Err(Error::validation(format!(
            "only {} complete dates remain after alignment",
            dates.len()
        )));
    }

    let (currencies, rates): (Vec<_>, Vec<_>) = columns
        .into_iter()
        .map(|(code, col)| {
            let row: Vec<f64> = col
                .into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(v, _)| v.expect("retained dates are complete"))
                .collect();
            (code, row)
        })
        .unzip();
    let panel = RatePanel::new(opts.quote, currencies, dates, rates)?;
    if panel.currency_count() < 2 {
        return Err(Error::validation("panel needs at least two currencies"));
    }
    Ok(IngestReport {
        panel,
        rejected,
        filled_cells,
        dropped_dates,
    })
}

/// Fills runs of at most `max_gap` missing cells with the preceding value.
/// Returns the number of filled cells.
fn forward_fill(col: &mut [Option<f64>], max_gap: usize) -> usize {
    let mut filled = 0;
    let mut t = 0;
    while t < col.len() {
        if col[t].is_some() {
            t += 1;
            continue;
        }
        let run_start = t;
        while t < col.len() && col[t].is_none() {
            t += 1;
        }
        let run_len = t - run_start;
        if run_start > 0 && run_len <= max_gap {
            let prev = col[run_start - 1];
            col[run_start..t].iter_mut().for_each(|c| *c = prev);
            filled += run_len;
        }
    }
    filled
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn format_date(date: NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::validation(format!("bad date {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currency::code;
    use proptest::prelude::*;

    fn opts(q: &str) -> IngestOptions {
        IngestOptions::new(code(q))
    }

    #[test]
    fn parses_well_formed_panel() {
        let csv = "date,EUR,JPY\n2001-01-02,0.9,110\n2001-01-03,0.91,111\n2001-01-04,0.92,112\n";
        let report = parse_panel(csv, &opts("USD")).unwrap();
        let p = &report.panel;
        assert_eq!(p.date_count(), 3);
        // Two listed currencies plus the implicit quote row.
        assert_eq!(p.currencies(), &[code("EUR"), code("JPY"), code("USD")]);
        assert_eq!(p.row(code("JPY")).unwrap(), &[110.0, 111.0, 112.0]);
        assert_eq!(p.row(code("USD")).unwrap(), &[1.0, 1.0, 1.0]);
        assert!(report.rejected.is_empty());
        assert_eq!(report.filled_cells, 0);
    }

    #[test]
    fn merge_joins_on_common_dates() {
        let a = parse_panel("date,EUR\n2001-01-02,0.9\n2001-01-03,0.91\n2001-01-04,0.92\n", &opts("USD")).unwrap();
        let b = parse_panel("date,JPY\n2001-01-03,111\n2001-01-04,112\n2001-01-05,113\n", &opts("USD")).unwrap();
        let m = merge_panels(&[a.panel.clone(), b.panel]).unwrap();
        assert_eq!(m.currencies(), &[code("EUR"), code("JPY"), code("USD")]);
        assert_eq!(m.date_count(), 2);
        assert_eq!(m.row(code("EUR")).unwrap(), &[0.91, 0.92]);
        assert!(merge_panels(&[a.panel.clone(), a.panel.clone()]).is_err());
        let c = parse_panel("date,JPY\n2001-01-03,111\n2001-01-04,112\n", &opts("EUR")).unwrap();
        assert!(merge_panels(&[a.panel, c.panel]).is_err());
    }

    #[test]
    fn single_gap_is_forward_filled() {
        let mut csv = String::from("date,EUR,JPY\n");
        for d in 1..=30 {
            let eur = if d == 10 { String::new() } else { format!("{}", 1.0 + d as f64 / 100.0) };
            csv.push_str(&format!("2001-01-{d:02},{eur},100\n"));
        }
        let report = parse_panel(&csv, &opts("USD")).unwrap();
        assert_eq!(report.filled_cells, 1);
        assert_eq!(report.panel.date_count(), 30);
        let eur = report.panel.row(code("EUR")).unwrap();
        assert_eq!(eur[9], eur[8]);
    }

    #[test]
    fn currency_missing_ten_percent_is_rejected() {
        let mut csv = String::from("date,EUR,JPY\n");
        for d in 1..=30 {
            // JPY missing on 3 of 30 dates (10%), spread out so each gap is fillable.
            let jpy = if d % 10 == 5 { String::new() } else { "100".to_string() };
            csv.push_str(&format!("2001-01-{d:02},1.1,{jpy}\n"));
        }
        let report = parse_panel(&csv, &opts("USD")).unwrap();
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].currency, code("JPY"));
        assert!((report.rejected[0].missing_fraction - 0.1).abs() < 1e-12);
        assert!(!report.panel.contains(code("JPY")));
        assert_eq!(report.panel.date_count(), 30);
    }

    #[test]
    fn long_gaps_drop_dates() {
        let mut csv = String::from("date,EUR\n");
        for d in 1..=28 {
            // Gap of 4 > max_gap at days 10..=13 but only 4/100 missing.
            let eur = if (10..=13).contains(&d) { String::new() } else { "1.1".into() };
            csv.push_str(&format!("2001-02-{d:02},{eur}\n"));
        }
        let mut o = opts("USD");
        o.max_missing_frac = 0.2;
        let report = parse_panel(&csv, &o).unwrap();
        assert_eq!(report.dropped_dates.len(), 4);
        assert_eq!(report.panel.date_count(), 24);
        assert_eq!(report.filled_cells, 0);
    }

    #[test]
    fn leading_gap_cannot_be_filled() {
        let csv = "date,EUR,JPY\n2001-01-01,,100\n2001-01-02,1.1,101\n2001-01-03,1.2,102\n";
        let mut o = opts("USD");
        o.max_missing_frac = 0.5;
        let report = parse_panel(csv, &o).unwrap();
        assert_eq!(report.dropped_dates, vec![NaiveDate::from_ymd_opt(2001, 1, 1).unwrap()]);
        assert_eq!(report.panel.date_count(), 2);
    }

    #[test]
    fn rows_are_sorted_by_date() {
        let csv = "date,EUR\n2001-01-03,3\n2001-01-01,1\n2001-01-02,2\n";
        let p = parse_panel(csv, &opts("USD")).unwrap().panel;
        assert_eq!(p.row(code("EUR")).unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let csv = "date,EUR,JPY\n2001-01-01,1,2\n2001-01-02,1\n";
        match parse_panel(csv, &opts("USD")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let csv = "date,EUR\n2001-01-01,1\nnot-a-date,2\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Parse { line: 3, .. })));
        let csv = "date,EUR\n2001-01-01,abc\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn non_positive_rate_and_duplicate_date_are_validation_errors() {
        let csv = "date,EUR\n2001-01-01,1\n2001-01-02,-1\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Validation(_))));
        let csv = "date,EUR\n2001-01-01,0\n2001-01-02,1\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Validation(_))));
        let csv = "date,EUR\n2001-01-01,1\n2001-01-01,2\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_panel("day,EUR\n2001-01-01,1\n", &opts("USD")).is_err());
        assert!(parse_panel("date,eur\n2001-01-01,1\n", &opts("USD")).is_err());
        assert!(matches!(
            parse_panel("date,EUR,EUR\n2001-01-01,1,1\n", &opts("USD")),
            Err(Error::Validation(_))
        ));
        assert!(parse_panel("", &opts("USD")).is_err());
    }

    #[test]
    fn invert_flag_takes_reciprocals() {
        let csv = "date,EUR\n2001-01-01,2\n2001-01-02,4\n";
        let mut o = opts("USD");
        o.invert = true;
        let p = parse_panel(csv, &o).unwrap().panel;
        assert_eq!(p.row(code("EUR")).unwrap(), &[0.5, 0.25]);
    }

    #[test]
    fn quote_column_must_be_unity() {
        let csv = "date,EUR,USD\n2001-01-01,2,1\n2001-01-02,4,1\n";
        let p = parse_panel(csv, &opts("USD")).unwrap().panel;
        assert_eq!(p.currency_count(), 2);
        let csv = "date,EUR,USD\n2001-01-01,2,1\n2001-01-02,4,1.5\n";
        assert!(matches!(parse_panel(csv, &opts("USD")), Err(Error::Validation(_))));
    }

    #[test]
    fn cross_rate_is_ratio_of_quotes() {
        // Q/B = 2, Q/X = 6 => B/X = 3.
        let p = RatePanel::new(
            code("QQQ"),
            vec![code("BBB"), code("XXX")],
            vec![NaiveDate::from_ymd_opt(2001, 1, 1).unwrap()],
            vec![vec![2.0], vec![6.0]],
        )
        .unwrap();
        let series = cross_rates(&p, code("BBB")).unwrap();
        assert_eq!(series.len(), 2);
        let bx = series.iter().find(|s| s.price == code("XXX")).unwrap();
        assert_eq!(bx.values, vec![3.0]);
        let bq = series.iter().find(|s| s.price == code("QQQ")).unwrap();
        assert_eq!(bq.values, vec![0.5]);
    }

    #[test]
    fn base_equal_to_quote_returns_rows_unchanged() {
        let csv = "date,EUR,JPY\n2001-01-02,0.9,110\n2001-01-03,0.91,111\n";
        let p = parse_panel(csv, &opts("USD")).unwrap().panel;
        let series = cross_rates(&p, code("USD")).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].values, p.row(code("EUR")).unwrap());
        assert_eq!(series[1].values, p.row(code("JPY")).unwrap());
    }

    #[test]
    fn forty_six_currencies_give_forty_five_series() {
        let codes: Vec<_> = (0..45).map(CurrencyCode::synthetic).collect();
        let dates: Vec<_> = (1..=5).map(|d| NaiveDate::from_ymd_opt(2001, 1, d).unwrap()).collect();
        let rates = (0..45).map(|i| vec![1.0 + i as f64; 5]).collect();
        let p = RatePanel::new(code("USD"), codes, dates, rates).unwrap();
        assert_eq!(p.currency_count(), 46);
        let mut pairs = 0;
        for base in p.currencies() {
            let s = cross_rates(&p, *base).unwrap();
            assert_eq!(s.len(), 45);
            assert!(s.iter().all(|x| x.price != *base && x.base == *base));
            pairs += s.len();
        }
        assert_eq!(pairs, 2070);
    }

    #[test]
    fn unknown_base_is_not_found() {
        let csv = "date,EUR\n2001-01-02,0.9\n2001-01-03,0.91\n";
        let p = parse_panel(csv, &opts("USD")).unwrap().panel;
        assert!(matches!(cross_rates(&p, code("GBP")), Err(Error::NotFound(_))));
    }

    #[test]
    fn slice_and_requote() {
        let csv = "date,EUR,JPY\n2001-01-02,0.5,100\n2001-01-03,0.25,120\n2001-01-04,0.2,90\n";
        let p = parse_panel(csv, &opts("USD")).unwrap().panel;
        let s = p.slice(1, 3).unwrap();
        assert_eq!(s.date_count(), 2);
        assert_eq!(s.row(code("JPY")).unwrap(), &[120.0, 90.0]);
        assert!(p.slice(2, 2).is_err());
        assert!(p.slice(0, 4).is_err());

        let r = p.requote(code("EUR")).unwrap();
        assert_eq!(r.quote(), code("EUR"));
        assert_eq!(r.row(code("EUR")).unwrap(), &[1.0, 1.0, 1.0]);
        assert_eq!(r.row(code("USD")).unwrap(), &[2.0, 4.0, 5.0]);
        assert_eq!(r.row(code("JPY")).unwrap(), &[200.0, 480.0, 450.0]);
    }

    fn arb_panel() -> impl Strategy<Value = RatePanel> {
        (2usize..6, 2usize..12).prop_flat_map(|(n, t)| {
            prop::collection::vec(prop::collection::vec(1e-3f64..1e4, t), n).prop_map(move |rates| {
                let codes = (0..n).map(|i| CurrencyCode::synthetic(i + 30)).collect();
                let dates = (0..t)
                    .map(|d| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(d as u64))
                    .collect();
                RatePanel::new(code("USD"), codes, dates, rates).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(panel in arb_panel()) {
            let text = panel.to_csv();
            let back = parse_panel(&text, &IngestOptions::new(panel.quote())).unwrap().panel;
            prop_assert_eq!(&back, &panel);
            prop_assert_eq!(back.to_csv(), text);
        }

        #[test]
        fn cross_rates_are_quote_invariant(panel in arb_panel(), pick in 0usize..6, base_pick in 0usize..7) {
            let codes = panel.currencies().to_vec();
            let new_quote = codes[pick % codes.len()];
            let base = codes[base_pick % codes.len()];
            let requoted = panel.requote(new_quote).unwrap();
            let a = cross_rates(&panel, base).unwrap();
            let b = cross_rates(&requoted, base).unwrap();
            prop_assert_eq!(a.len(), panel.currency_count() - 1);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.price, y.price);
                for (u, v) in x.values.iter().zip(&y.values) {
                    prop_assert!(((u - v) / u).abs() <= 1e-12, "{} vs {}", u, v);
                }
            }
        }
    }
}
