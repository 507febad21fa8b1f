//! Download client for per-currency rate files with an on-disk cache.
//!
//! Each currency is fetched into `<cache>/<CODE>.csv`. Files already present
//! are cache hits and are never re-downloaded. Raw files are two-column
//! `date,value` CSVs; [`assemble_panel_csv`] joins them into the wide
//! ingest schema.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::format_date;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking GET used by [`fetch_panel`]. Transport failures are
/// reported as `Err`; HTTP error statuses come back as a response.
pub trait HttpClient: Sync {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        UreqClient {
            agent: config.into(),
        }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        UreqClient::new(Duration::from_secs(30))
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone)]
pub struct FetchRequest {
    /// URL with a `{code}` placeholder; `{start}` and `{end}` are optional.
    pub url_template: String,
    pub cache_dir: PathBuf,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Attempts after the first one before a currency is reported as failed.
    pub max_retries: usize,
    pub retry_delay: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchReport {
    pub downloaded: Vec<CurrencyCode>,
    pub cache_hits: Vec<CurrencyCode>,
    pub failures: Vec<(CurrencyCode, String)>,
}

impl FetchReport {
    pub fn into_result(self) -> Result<FetchReport> {
        match self.failures.first() {
            Some((currency, message)) => Err(Error::Fetch {
                currency: *currency,
                message: message.clone(),
            }),
            None => Ok(self),
        }
    }
}

pub fn cache_path(cache_dir: &Path, currency: CurrencyCode) -> PathBuf {
    cache_dir.join(format!("{currency}.csv"))
}

pub fn fetch_panel(
    client: &dyn HttpClient,
    request: &FetchRequest,
    currencies: &[CurrencyCode],
) -> Result<FetchReport> {
    if !request.url_template.contains("{code}") {
        return Err(Error::validation("URL template lacks a {code} placeholder"));
    }
    if request.start > request.end {
        return Err(Error::validation("fetch start date is after end date"));
    }
    fs::create_dir_all(&request.cache_dir)?;

    enum Outcome {
        Hit,
        Downloaded,
        Failed(String),
    }

    // One worker per currency; each owns exactly one cache file.
    let outcomes: Vec<(CurrencyCode, Outcome)> = std::thread::scope(|scope| {
        let handles: Vec<_> = currencies
            .iter()
            .map(|&currency| {
                scope.spawn(move || {
                    let path = cache_path(&request.cache_dir, currency);
                    if path.is_file() {
                        return (currency, Outcome::Hit);
                    }
                    let outcome = match download(client, request, currency) {
                        Ok(body) => match write_atomic(&path, &body) {
                            Ok(()) => Outcome::Downloaded,
                            Err(e) => Outcome::Failed(e.to_string()),
                        },
                        Err(msg) => Outcome::Failed(msg),
                    };
                    (currency, outcome)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fetch worker panicked"))
            .collect()
    });

    let mut report = FetchReport::default();
    for (currency, outcome) in outcomes {
        match outcome {
            Outcome::Hit => report.cache_hits.push(currency),
            Outcome::Downloaded => report.downloaded.push(currency),
            Outcome::Failed(msg) => report.failures.push((currency, msg)),
        }
    }
    Ok(report)
}

fn download(
    client: &dyn HttpClient,
    request: &FetchRequest,
    currency: CurrencyCode,
) -> std::result::Result<String, String> {
    let url = request
        .url_template
        .replace("{code}", currency.as_str())
        .replace("{start}", &format_date(request.start))
        .replace("{end}", &format_date(request.end));
    let mut last_error = String::new();
    for attempt in 0..=request.max_retries {
        if attempt > 0 && !request.retry_delay.is_zero() {
            std::thread::sleep(request.retry_delay);
        }
        match client.get(&url) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                if resp.body.trim().is_empty() {
                    last_error = format!("empty body from {url}");
                } else {
                    return Ok(resp.body);
                }
            }
            Ok(resp) => last_error = format!("HTTP {} from {url}", resp.status),
            Err(e) => last_error = format!("{e} ({url})"),
        }
    }
    Err(format!(
        "{last_error} after {} attempts",
        request.max_retries + 1
    ))
}

fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("csv.part");
    fs::write(&tmp, body)?;
    fs::rename(&tmp, path)
}

/// Joins cached `date,value` files into a wide `date,CODE,...` CSV with
/// empty cells where a currency has no quote for a date.
pub fn assemble_panel_csv(cache_dir: &Path, currencies: &[CurrencyCode]) -> Result<String> {
    let mut by_date: BTreeMap<NaiveDate, Vec<Option<String>>> = BTreeMap::new();
    for (j, &currency) in currencies.iter().enumerate() {
        let path = cache_path(cache_dir, currency);
        let text = fs::read_to_string(&path)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(date), Some(value)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{}: expected `date,value`", path.display()),
                });
            };
            let Ok(date) = NaiveDate::parse_from_str(date, "%Y-%m-%d") else {
                if i == 0 {
                    continue; // header
                }
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{}: bad date {date:?}", path.display()),
                });
            };
            let slot = by_date
                .entry(date)
                .or_insert_with(|| vec![None; currencies.len()]);
            slot[j] = (!value.is_empty()).then(|| value.to_string());
        }
    }
    let mut out = String::from("date");
    for c in currencies {
        out.push(',');
        out.push_str(c.as_str());
    }
    out.push('\n');
    for (date, cells) in by_date {
        out.push_str(&format_date(date));
        for cell in cells {
            out.push(',');
            if let Some(v) = cell {
                out.push_str(&v);
            }
        }
        out.push('\n');
    }
    Ok(out)
}
