use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use chrono::NaiveDate;
use fxnet::currency::code;
use fxnet::fetch::{assemble_panel_csv, fetch_panel, FetchRequest, HttpClient, UreqClient};
use fxnet::{parse_panel, IngestOptions};

/// Serves `requests` connections: `/EUR...` and `/JPY...` get a rate file,
/// anything else a 404.
fn serve(requests: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(requests) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let (status, body) = if path.starts_with("/EUR") {
                ("200 OK", "date,value\n2001-01-02,0.9\n2001-01-03,0.91\n2001-01-04,0.92\n")
            } else if path.starts_with("/JPY") {
                ("200 OK", "date,value\n2001-01-02,110\n2001-01-03,111\n2001-01-04,112\n")
            } else {
                ("404 Not Found", "missing")
            };
            let response = format!(
                "HTTP/1.1 {status}\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}")
}

fn request(base: &str, cache: &std::path::Path) -> FetchRequest {
    FetchRequest {
        url_template: format!("{base}/{{code}}?from={{start}}&to={{end}}"),
        cache_dir: cache.to_path_buf(),
        start: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
        end: NaiveDate::from_ymd_opt(2001, 1, 31).unwrap(),
        max_retries: 0,
        retry_delay: Duration::from_millis(1),
    }
}

#[test]
fn ureq_client_reports_status_codes() {
    let base = serve(2);
    let client = UreqClient::new(Duration::from_secs(5));
    let ok = client.get(&format!("{base}/EUR")).unwrap();
    assert_eq!(ok.status, 200);
    assert!(ok.body.starts_with("date,value\n"));
    let missing = client.get(&format!("{base}/XXX")).unwrap();
    assert_eq!(missing.status, 404);
}

#[test]
fn fetched_files_build_a_panel() {
    let base = serve(2);
    let dir = tempfile::tempdir().unwrap();
    let client = UreqClient::new(Duration::from_secs(5));
    let currencies = [code("EUR"), code("JPY")];
    let report = fetch_panel(&client, &request(&base, dir.path()), &currencies).unwrap();
    assert_eq!(report.downloaded.len(), 2);
    assert!(report.failures.is_empty());

    // Second run is served from the cache without touching the network.
    let again = fetch_panel(&client, &request(&base, dir.path()), &currencies).unwrap();
    assert_eq!(again.cache_hits.len(), 2);

    let csv = assemble_panel_csv(dir.path(), &currencies).unwrap();
    let panel = parse_panel(&csv, &IngestOptions::new(code("USD"))).unwrap().panel;
    assert_eq!(panel.date_count(), 3);
    assert_eq!(panel.row(code("JPY")).unwrap(), &[110.0, 111.0, 112.0]);
}

#[test]
fn not_found_is_a_named_failure() {
    let base = serve(1);
    let dir = tempfile::tempdir().unwrap();
    let client = UreqClient::new(Duration::from_secs(5));
    let report = fetch_panel(&client, &request(&base, dir.path()), &[code("GBP")]).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, code("GBP"));
    assert!(report.failures[0].1.contains("404"));
    assert!(!dir.path().join("GBP.csv").exists());
    assert!(report.into_result().is_err());
}
