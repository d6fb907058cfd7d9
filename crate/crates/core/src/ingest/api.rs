use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde_json::Value;

use super::{Column, IndicatorKey, IngestError, PanelDataset, Result, YearRange};

const MAX_PAGES: usize = 10_000;

/// Blocking client for a World-Bank-style indicators API.
///
/// Requests have the form
/// `{base}/country/{country}/indicator/{code}?format=json&date={start}:{end}&per_page={n}&page={k}`
/// and pages are requested until one comes back empty.
#[derive(Debug, Clone)]
pub struct ApiClient {
    base_url: String,
    per_page: usize,
    retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            per_page: 1000,
            retries: 3,
            backoff: Duration::from_millis(250),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
        }
    }

    pub fn per_page(mut self, per_page: usize) -> Self {
        self.per_page = per_page.max(1);
        self
    }

    /// Retry budget for transient failures; the delay doubles after each try.
    pub fn retries(mut self, retries: u32, initial_backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = initial_backoff;
        self
    }

    fn page_url(&self, country: &str, code: &str, range: YearRange, page: usize) -> String {
        format!(
            "{}/country/{}/indicator/{}?format=json&date={}:{}&per_page={}&page={}",
            self.base_url, country, code, range.start, range.end, self.per_page, page
        )
    }

    fn get_json(&self, url: &str, code: &str) -> Result<Value> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            let outcome = self.agent.get(url).call();
            let transient = match outcome {
                Ok(resp) => {
                    return resp
                        .into_json::<Value>()
                        .map_err(|e| IngestError::BadResponse(format!("{url}: {e}")))
                }
                Err(ureq::Error::Status(404, _)) => {
                    return Err(IngestError::UnknownIndicator(code.to_string()))
                }
                Err(ureq::Error::Status(status, _)) if status == 429 || status >= 500 => {
                    IngestError::HttpStatus {
                        url: url.to_string(),
                        status,
                    }
                }
                Err(ureq::Error::Status(status, _)) => {
                    return Err(IngestError::HttpStatus {
                        url: url.to_string(),
                        status,
                    })
                }
                Err(ureq::Error::Transport(t)) => IngestError::Transport {
                    url: url.to_string(),
                    message: t.to_string(),
                },
            };
            if attempt >= self.retries {
                return Err(transient);
            }
            log::warn!("{transient}; retrying in {delay:?}");
            std::thread::sleep(delay);
            delay *= 2;
            attempt += 1;
        }
    }

    /// Fetches every page for one indicator and returns year → value (None
    /// for null API values).
    pub fn fetch_series(
        &self,
        country: &str,
        code: &str,
        range: YearRange,
    ) -> Result<BTreeMap<i32, Option<f64>>> {
        let mut out = BTreeMap::new();
        let mut received = 0usize;
        let mut expected_total = None;
        for page in 1..=MAX_PAGES {
            let url = self.page_url(country, code, range, page);
            let body = self.get_json(&url, code)?;
            let parsed = parse_page(&body, code)?;
            if let Some(total) = parsed.total {
                expected_total = Some(total);
            }
            if parsed.records.is_empty() {
                if let Some(total) = expected_total {
                    if received < total {
                        return Err(IngestError::PaginationTruncated {
                            code: code.to_string(),
                            expected: total,
                            got: received,
                        });
                    }
                }
                return Ok(out);
            }
            received += parsed.records.len();
            for (year, value) in parsed.records {
                if !range.contains(year) {
                    continue;
                }
                if out.insert(year, value).is_some() {
                    return Err(IngestError::BadResponse(format!(
                        "indicator {code}: year {year} returned twice"
                    )));
                }
            }
        }
        Err(IngestError::BadResponse(format!(
            "indicator {code}: more than {MAX_PAGES} pages"
        )))
    }
}

struct Page {
    total: Option<usize>,
    records: Vec<(i32, Option<f64>)>,
}

/// Accepts both the `[metadata, [records...]]` envelope and a bare array of
/// records. An error-message envelope means the indicator is unknown.
fn parse_page(body: &Value, code: &str) -> Result<Page> {
    let arr = match body {
        Value::Array(a) => a,
        Value::Null => {
            return Ok(Page {
                total: None,
                records: vec![],
            })
        }
        other => return Err(IngestError::BadResponse(format!("expected array, got {other}"))),
    };
    if let Some(Value::Object(first)) = arr.first() {
        if first.contains_key("message") {
            return Err(IngestError::UnknownIndicator(code.to_string()));
        }
        let is_meta = first.contains_key("page") || first.contains_key("pages");
        if is_meta {
            let total = first.get("total").and_then(as_usize);
            let records = match arr.get(1) {
                None | Some(Value::Null) => vec![],
                Some(Value::Array(recs)) => recs
                    .iter()
                    .map(|r| parse_record(r, code))
                    .collect::<Result<_>>()?,
                Some(other) => {
                    return Err(IngestError::BadResponse(format!("records not an array: {other}")))
                }
            };
            return Ok(Page { total, records });
        }
    }
    let records = arr
        .iter()
        .map(|r| parse_record(r, code))
        .collect::<Result<_>>()?;
    Ok(Page {
        total: None,
        records,
    })
}

fn as_usize(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|x| x as usize),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

fn parse_record(r: &Value, code: &str) -> Result<(i32, Option<f64>)> {
    let bad = |what: &str| IngestError::BadResponse(format!("indicator {code}: {what} in {r}"));
    let indicator_id = match r.get("indicator") {
        Some(Value::Object(o)) => o.get("id").and_then(Value::as_str),
        Some(Value::String(s)) => Some(s.as_str()),
        _ => None,
    };
    if let Some(id) = indicator_id {
        if id != code {
            return Err(bad("mismatched indicator id"));
        }
    }
    let year = match r.get("date") {
        Some(Value::String(s)) => s.trim().parse().map_err(|_| bad("bad date"))?,
        Some(Value::Number(n)) => n.as_i64().ok_or_else(|| bad("bad date"))? as i32,
        _ => return Err(bad("missing date")),
    };
    let value = match r.get("value") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(n.as_f64().ok_or_else(|| bad("bad value"))?),
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s.parse().map_err(|_| bad("bad value"))?),
        _ => return Err(bad("bad value")),
    };
    if value.is_some_and(|v: f64| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    Ok((year, value))
}

/// Builds a [`PanelDataset`] from the API, one request stream per indicator.
/// Indicators are fetched concurrently; the result does not depend on
/// completion order.
pub fn fetch_indicators(
    client: &ApiClient,
    country: &str,
    indicators: &[IndicatorKey],
    range: YearRange,
) -> Result<PanelDataset> {
    let years = range.years();
    let columns = indicators
        .par_iter()
        .map(|key| {
            let series = client.fetch_series(country, &key.code, range)?;
            let values = years
                .iter()
                .map(|y| series.get(y).copied().flatten())
                .collect();
            Ok(Column::new(key.clone(), values))
        })
        .collect::<Result<Vec<_>>>()?;
    PanelDataset::new(country, years, columns)
}
