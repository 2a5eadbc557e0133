//! Block-rewards client for a beacon node's HTTP API, plus a canned mock
//! node used as a test fixture.
//!
//! Requests share one global rate limiter. Missing slots (404 or an empty
//! body) are skipped; transport errors, timeouts, 429 and 5xx responses are
//! retried with exponential backoff; anything else lands in the failure
//! summary. Labels are never taken from the wire.

pub mod mock;

use std::sync::Arc;
use std::time::Duration;

use clientprint::features::SlotRewardsRecord;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};
use tokio::time::Instant;

/// Block-rewards analysis endpoint; `{slot}` is substituted.
pub const DEFAULT_PATH_TEMPLATE: &str = "/lighthouse/analysis/block_rewards?start_slot={slot}&end_slot={slot}";

#[derive(Debug, thiserror::Error)]
pub enum BeaconError {
    #[error("invalid source config: {0}")]
    Config(String),
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
    #[error("{0}")]
    Incomplete(FetchSummary),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeaconSourceConfig {
    pub base_url: String,
    pub path_template: String,
    /// Inclusive.
    pub slot_range: [u64; 2],
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_requests_per_second: f64,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    /// Requests in flight at once; the rate limit still applies globally.
    pub concurrency: usize,
    pub bearer_token: Option<String>,
}

impl Default for BeaconSourceConfig {
    fn default() -> Self {
        BeaconSourceConfig {
            base_url: "http://127.0.0.1:5052".into(),
            path_template: DEFAULT_PATH_TEMPLATE.into(),
            slot_range: [0, 0],
            timeout_secs: 10.0,
            max_retries: 3,
            max_requests_per_second: 10.0,
            backoff_ms: 200,
            concurrency: 4,
            bearer_token: None,
        }
    }
}

impl BeaconSourceConfig {
    pub fn validate(&self) -> Result<(), BeaconError> {
        let [a, b] = self.slot_range;
        if a > b {
            return Err(BeaconError::Config(format!("slot range start {a} is after end {b}")));
        }
        if !(self.max_requests_per_second > 0.0 && self.max_requests_per_second.is_finite()) {
            return Err(BeaconError::Config("max_requests_per_second must be positive".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BeaconError::Config("timeout_secs must be positive".into()));
        }
        if !self.path_template.contains("{slot}") {
            return Err(BeaconError::Config("path_template has no {slot} placeholder".into()));
        }
        if self.concurrency == 0 {
            return Err(BeaconError::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn url_for(&self, slot: u64) -> String {
        format!(
            "{}{}",
            self.base_url.trim_end_matches('/'),
            self.path_template.replace("{slot}", &slot.to_string())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedSlot {
    pub slot: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub records: Vec<SlotRewardsRecord>,
    /// Slots with no block.
    pub skipped: Vec<u64>,
    pub failed: Vec<FailedSlot>,
    pub requests: usize,
}

impl std::fmt::Display for FetchSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} records, {} skipped, {} failed",
            self.records.len(),
            self.skipped.len(),
            self.failed.len()
        )?;
        for s in &self.failed {
            write!(f, "\n  slot {}: {}", s.slot, s.reason)?;
        }
        Ok(())
    }
}

impl FetchSummary {
    /// `Err` carrying the partial result when any slot failed.
    pub fn into_result(self) -> Result<Vec<SlotRewardsRecord>, BeaconError> {
        if self.failed.is_empty() {
            Ok(self.records)
        } else {
            Err(BeaconError::Incomplete(self))
        }
    }
}

/// Spaces request starts at least `1 / rate` seconds apart.
struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(rate: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / rate),
            next: Mutex::new(None),
        }
    }

    async fn wait(&self) {
        let start = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let start = next.map_or(now, |n| n.max(now));
            *next = Some(start + self.interval);
            start
        };
        tokio::time::sleep_until(start).await;
    }
}

enum Outcome {
    Record(Box<SlotRewardsRecord>),
    Skipped,
    Failed(String),
}

enum Attempt {
    Done(Outcome),
    Retry(String),
}

/// Accepts a bare record, `{"data": record}`, or a list of records for the
/// requested slot. `null`, `[]` and `{"data": null}` mean no block.
fn parse_body(slot: u64, body: &[u8]) -> Outcome {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Outcome::Skipped;
    }
    let value: serde_json::Value = match serde_json::from_slice(body) {
        Ok(v) => v,
        Err(e) => return Outcome::Failed(format!("malformed body: {e}")),
    };
    let value = match value {
        serde_json::Value::Object(mut m) if m.contains_key("data") => m.remove("data").unwrap_or_default(),
        v => v,
    };
    let value = match value {
        serde_json::Value::Null => return Outcome::Skipped,
        serde_json::Value::Array(items) => {
            match items
                .into_iter()
                .find(|v| v.get("slot").and_then(slot_of) == Some(slot))
            {
                Some(v) => v,
                None => return Outcome::Skipped,
            }
        }
        v => v,
    };
    match serde_json::from_value::<SlotRewardsRecord>(value) {
        Ok(mut r) => {
            if r.slot != slot {
                return Outcome::Failed(format!("response is for slot {}, asked for {slot}", r.slot));
            }
            if let Err(e) = r.validate() {
                return Outcome::Failed(format!("invalid record: {e}"));
            }
            r.label = None;
            r.mode = None;
            Outcome::Record(Box::new(r))
        }
        Err(e) => Outcome::Failed(format!("malformed body: {e}")),
    }
}

fn slot_of(v: &serde_json::Value) -> Option<u64> {
    v.as_u64().or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

async fn attempt(client: &reqwest::Client, cfg: &BeaconSourceConfig, slot: u64) -> Attempt {
    let mut req = client.get(cfg.url_for(slot)).header("accept", "application/json");
    if let Some(token) = &cfg.bearer_token {
        req = req.bearer_auth(token);
    }
    let resp = match req.send().await {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(format!("request failed: {e}")),
    };
    let status = resp.status();
    if status == reqwest::StatusCode::NOT_FOUND {
        return Attempt::Done(Outcome::Skipped);
    }
    if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        return Attempt::Retry(format!("HTTP {status}"));
    }
    if !status.is_success() {
        return Attempt::Done(Outcome::Failed(format!("HTTP {status}")));
    }
    match resp.bytes().await {
        Ok(body) => Attempt::Done(parse_body(slot, &body)),
        Err(e) => Attempt::Retry(format!("reading body: {e}")),
    }
}

async fn fetch_slot(
    client: &reqwest::Client,
    cfg: &BeaconSourceConfig,
    limiter: &RateLimiter,
    slot: u64,
) -> (Outcome, usize) {
    let mut last = String::new();
    for n in 0..=cfg.max_retries {
        if n > 0 {
            let backoff = cfg.backoff_ms.saturating_mul(1 << (n - 1).min(16));
            tokio::time::sleep(Duration::from_millis(backoff)).await;
        }
        limiter.wait().await;
        match attempt(client, cfg, slot).await {
            Attempt::Done(o) => return (o, n as usize + 1),
            Attempt::Retry(reason) => last = reason,
        }
    }
    (
        Outcome::Failed(format!("gave up after {} attempts: {last}", cfg.max_retries + 1)),
        cfg.max_retries as usize + 1,
    )
}

/// Fetches every slot in the configured range. The summary lists records in
/// slot order together with skipped and failed slots.
pub async fn fetch_rewards(cfg: &BeaconSourceConfig) -> Result<FetchSummary, BeaconError> {
    cfg.validate()?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs_f64(cfg.timeout_secs))
        .build()?;
    let limiter = Arc::new(RateLimiter::new(cfg.max_requests_per_second));
    let permits = Arc::new(Semaphore::new(cfg.concurrency));
    let cfg = Arc::new(cfg.clone());
    let [start, end] = cfg.slot_range;

    let mut tasks = Vec::new();
    for slot in start..=end {
        let permit = permits.clone().acquire_owned().await.expect("semaphore stays open");
        let (client, cfg, limiter) = (client.clone(), cfg.clone(), limiter.clone());
        tasks.push(tokio::spawn(async move {
            let out = fetch_slot(&client, &cfg, &limiter, slot).await;
            drop(permit);
            (slot, out)
        }));
    }

    let mut summary = FetchSummary::default();
    for t in tasks {
        let (slot, (outcome, requests)) = t.await.expect("fetch task panicked");
        summary.requests += requests;
        match outcome {
            Outcome::Record(r) => summary.records.push(*r),
            Outcome::Skipped => summary.skipped.push(slot),
            Outcome::Failed(reason) => summary.failed.push(FailedSlot { slot, reason }),
        }
    }
    Ok(summary)
}
