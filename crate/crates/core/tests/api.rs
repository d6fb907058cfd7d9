//! HTTP client tests against a local stub server.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use panelcast::ingest::{self, ApiClient, IndicatorKey, IngestError, YearRange};
use panelcast::pipeline::{self, InputConfig, RunConfig, Stage};
use panelcast::synthetic::{self, CountrySpec, SYNTHETIC_COUNTRY};

type Handler = dyn Fn(&str, usize) -> (u16, String) + Send + Sync;

/// Serves `handler(path_and_query, request_index)` on a background thread
/// and returns the base URL and a request counter.
fn serve(handler: Box<Handler>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    let counter = count.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let i = counter.fetch_add(1, Ordering::SeqCst);
            let (status, body) = handler(&path, i);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (format!("http://{addr}"), count)
}

fn query(path: &str, key: &str) -> Option<usize> {
    path.split(['?', '&'])
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
}

fn indicator_of(path: &str) -> String {
    path.split('?').next().unwrap().rsplit('/').next().unwrap().to_string()
}

/// Paginated World-Bank-style responses for the given series.
fn paged(data: BTreeMap<String, Vec<(i32, Option<f64>)>>) -> Box<Handler> {
    Box::new(move |path, _| {
        let code = indicator_of(path);
        let Some(records) = data.get(&code) else {
            return (404, "not found".into());
        };
        let per_page = query(path, "per_page").unwrap_or(50);
        let page = query(path, "page").unwrap_or(1);
        let pages = records.len().div_ceil(per_page).max(1);
        let slice: Vec<Value> = records
            .iter()
            .skip((page - 1) * per_page)
            .take(per_page)
            .map(|(y, v)| json!({"indicator": {"id": code, "value": "name"}, "date": y.to_string(), "value": v}))
            .collect();
        let meta = json!({"page": page, "pages": pages, "per_page": per_page, "total": records.len()});
        let body = if slice.is_empty() {
            json!([meta, null])
        } else {
            json!([meta, slice])
        };
        (200, body.to_string())
    })
}

fn range() -> YearRange {
    YearRange { start: 2010, end: 2014 }
}

#[test]
fn pages_are_followed_and_nulls_pass_through() {
    let mut data = BTreeMap::new();
    data.insert(
        "A.1".to_string(),
        vec![
            (2014, Some(5.0)),
            (2013, Some(4.0)),
            (2012, None),
            (2011, Some(2.0)),
            (2010, Some(1.0)),
            (2009, Some(0.0)),
        ],
    );
    let (url, count) = serve(paged(data));
    let client = ApiClient::new(url).per_page(2);
    let series = client.fetch_series("XYZ", "A.1", range()).unwrap();
    assert_eq!(series.len(), 5);
    assert_eq!(series[&2012], None);
    assert_eq!(series[&2014], Some(5.0));
    assert!(!series.contains_key(&2009));
    // three full pages then an empty fourth
    assert_eq!(count.load(Ordering::SeqCst), 4);
}

#[test]
fn not_found_is_unknown_indicator_without_retry() {
    let (url, count) = serve(paged(BTreeMap::new()));
    let client = ApiClient::new(url).retries(3, Duration::from_millis(1));
    let err = client.fetch_series("XYZ", "NOPE", range()).unwrap_err();
    assert!(matches!(err, IngestError::UnknownIndicator(ref c) if c == "NOPE"), "{err}");
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn message_envelope_is_unknown_indicator() {
    let (url, _) = serve(Box::new(|_, _| {
        (200, json!([{"message": [{"id": "120", "value": "Invalid value"}]}]).to_string())
    }));
    let err = ApiClient::new(url).fetch_series("XYZ", "BAD", range()).unwrap_err();
    assert!(matches!(err, IngestError::UnknownIndicator(_)), "{err}");
}

#[test]
fn transient_errors_are_retried() {
    let mut data = BTreeMap::new();
    data.insert("A.1".to_string(), vec![(2010, Some(1.0))]);
    let inner = paged(data);
    let (url, count) = serve(Box::new(move |path, i| {
        if i < 2 {
            (503, "busy".into())
        } else {
            inner(path, i)
        }
    }));
    let client = ApiClient::new(url).retries(3, Duration::from_millis(1));
    let series = client.fetch_series("XYZ", "A.1", range()).unwrap();
    assert_eq!(series[&2010], Some(1.0));
    assert_eq!(count.load(Ordering::SeqCst), 4);
}

#[test]
fn retries_are_bounded() {
    let (url, count) = serve(Box::new(|_, _| (500, "down".into())));
    let client = ApiClient::new(url).retries(2, Duration::from_millis(1));
    let err = client.fetch_series("XYZ", "A.1", range()).unwrap_err();
    assert!(matches!(err, IngestError::HttpStatus { status: 500, .. }), "{err}");
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn short_pagination_is_detected() {
    let (url, _) = serve(Box::new(|path, _| {
        let page = query(path, "page").unwrap_or(1);
        let meta = json!({"page": page, "pages": 3, "total": 6});
        if page == 1 {
            let recs = json!([{"date": "2010", "value": 1.0}, {"date": "2011", "value": 2.0}]);
            (200, json!([meta, recs]).to_string())
        } else {
            (200, json!([meta, null]).to_string())
        }
    }));
    let err = ApiClient::new(url).per_page(2).fetch_series("XYZ", "A.1", range()).unwrap_err();
    assert!(
        matches!(err, IngestError::PaginationTruncated { expected: 6, got: 2, .. }),
        "{err}"
    );
}

#[test]
fn api_and_csv_give_the_same_panel() {
    let fixture = synthetic::country(21, CountrySpec::default());
    let window = YearRange { start: 2010, end: 2023 };
    let mut data = BTreeMap::new();
    for col in fixture.panel.columns() {
        let mut recs: Vec<(i32, Option<f64>)> = fixture.panel.years().iter().copied().zip(col.values.clone()).collect();
        recs.reverse();
        data.insert(col.key.code.clone(), recs);
    }
    let (url, _) = serve(paged(data));
    let keys: Vec<IndicatorKey> = fixture.panel.keys();
    let client = ApiClient::new(url.clone()).per_page(5);
    let from_api = ingest::fetch_indicators(&client, SYNTHETIC_COUNTRY, &keys, window).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let (panel_csv, target_csv) = fixture.write(dir.path()).unwrap();
    let from_csv = ingest::load_panel_csv(&panel_csv, SYNTHETIC_COUNTRY, window).unwrap();
    assert_eq!(from_api, from_csv);

    // The same equivalence through the pipeline's ingest stage, where API
    // indicator names default to their codes.
    let csv_cfg = RunConfig {
        country: SYNTHETIC_COUNTRY.into(),
        input: InputConfig {
            panel_csv: Some(panel_csv),
            target_csv: Some(target_csv.clone()),
            ..InputConfig::default()
        },
        ..RunConfig::default()
    };
    let api_cfg = RunConfig {
        input: InputConfig {
            panel_csv: None,
            api_base_url: Some(url),
            indicators: keys.iter().map(|k| k.code.clone()).collect(),
            api_per_page: 7,
            target_csv: Some(target_csv),
        },
        ..csv_cfg.clone()
    };
    let a = pipeline::run_until(&api_cfg, Stage::Ingest).unwrap().raw.unwrap();
    let c = pipeline::run_until(&csv_cfg, Stage::Ingest).unwrap().raw.unwrap();
    assert_eq!(a.years(), c.years());
    assert_eq!(a.target(), c.target());
    for (x, y) in a.columns().iter().zip(c.columns()) {
        assert_eq!(x.key.code, y.key.code);
        assert_eq!(x.values, y.values);
    }
}
