//! Mock beacon node serving canned block-rewards responses.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use clientprint::features::{FeatureVector, SlotRewardsRecord, DEFAULT_IDEAL_REWARD};
use clientprint::synth::record_for_target;
use serde::Deserialize;
use tokio::sync::oneshot;

/// Port the standalone fixture listens on.
pub const MOCK_PORT: u16 = 18550;

#[derive(Debug, Clone)]
pub enum Canned {
    Record(Box<SlotRewardsRecord>),
    /// Raw body with status 200.
    Body(String),
    Status(u16),
    /// Answers 503 for the first `failures` requests, then the record.
    Flaky {
        failures: u32,
        record: Box<SlotRewardsRecord>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct MockFixture {
    /// Slots without an entry answer 404.
    pub responses: BTreeMap<u64, Canned>,
    pub bearer_token: Option<String>,
}

/// Two blocks: slots 10 and 12. Slot 11 has none.
pub fn fixture_records() -> Vec<SlotRewardsRecord> {
    let mut r = clientprint::rng::rng(7, 0);
    let targets = [
        [0.62, 0.31, 0.58, 1.01, 0.2, 0.77, 0.28],
        [0.55, 0.12, 0.7, 0.95, 0.15, 0.8, 0.33],
    ];
    [10, 12]
        .into_iter()
        .zip(targets)
        .map(|(slot, t)| {
            record_for_target(&FeatureVector(t), slot, DEFAULT_IDEAL_REWARD, &mut r).expect("fixture targets are valid")
        })
        .collect()
}

impl MockFixture {
    /// Slots 10 and 12 hold blocks, 11 is empty, 13 returns a malformed
    /// body, 14 recovers after two 503s and 15 always fails with 500.
    pub fn canned() -> Self {
        let recs = fixture_records();
        let mut responses = BTreeMap::new();
        responses.insert(10, Canned::Record(Box::new(recs[0].clone())));
        responses.insert(12, Canned::Record(Box::new(recs[1].clone())));
        responses.insert(13, Canned::Body("{\"data\": {\"slot\": ".into()));
        let mut flaky = recs[1].clone();
        flaky.slot = 14;
        responses.insert(
            14,
            Canned::Flaky {
                failures: 2,
                record: Box::new(flaky),
            },
        );
        responses.insert(15, Canned::Status(500));
        MockFixture {
            responses,
            bearer_token: None,
        }
    }
}

struct Shared {
    fixture: MockFixture,
    hits: Mutex<BTreeMap<u64, u32>>,
}

#[derive(Deserialize)]
struct RangeQuery {
    start_slot: u64,
}

async fn by_query(State(s): State<Arc<Shared>>, headers: HeaderMap, Query(q): Query<RangeQuery>) -> Response {
    respond(&s, &headers, q.start_slot, true)
}

async fn by_path(State(s): State<Arc<Shared>>, headers: HeaderMap, Path(slot): Path<u64>) -> Response {
    respond(&s, &headers, slot, false)
}

fn respond(s: &Shared, headers: &HeaderMap, slot: u64, listed: bool) -> Response {
    if let Some(token) = &s.fixture.bearer_token {
        let expected = format!("Bearer {token}");
        if headers.get("authorization").and_then(|v| v.to_str().ok()) != Some(expected.as_str()) {
            return StatusCode::UNAUTHORIZED.into_response();
        }
    }
    let hit = {
        let mut hits = s.hits.lock().expect("hit counter lock");
        let h = hits.entry(slot).or_insert(0);
        *h += 1;
        *h
    };
    let record = |r: &SlotRewardsRecord| {
        if listed {
            Json(serde_json::json!([r])).into_response()
        } else {
            Json(serde_json::json!({ "data": r })).into_response()
        }
    };
    match s.fixture.responses.get(&slot) {
        None => StatusCode::NOT_FOUND.into_response(),
        Some(Canned::Record(r)) => record(r),
        Some(Canned::Body(b)) => (StatusCode::OK, b.clone()).into_response(),
        Some(Canned::Status(code)) => StatusCode::from_u16(*code)
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
            .into_response(),
        Some(Canned::Flaky { failures, record: r }) => {
            if hit <= *failures {
                StatusCode::SERVICE_UNAVAILABLE.into_response()
            } else {
                record(r)
            }
        }
    }
}

pub struct MockHandle {
    pub addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<()>>,
}

impl MockHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received per slot.
    pub fn hits(&self) -> BTreeMap<u64, u32> {
        self.shared.hits.lock().expect("hit counter lock").clone()
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.task.take() {
            let _ = t.await;
        }
    }
}

pub fn router(fixture: MockFixture) -> Router {
    build(fixture).0
}

fn build(fixture: MockFixture) -> (Router, Arc<Shared>) {
    let shared = Arc::new(Shared {
        fixture,
        hits: Mutex::new(BTreeMap::new()),
    });
    let app = Router::new()
        .route("/lighthouse/analysis/block_rewards", get(by_query))
        .route("/eth/v1/beacon/rewards/blocks/{slot}", get(by_path))
        .with_state(shared.clone());
    (app, shared)
}

/// Serves `fixture` on `addr` (port 0 picks a free port) until stopped.
pub async fn spawn(fixture: MockFixture, addr: SocketAddr) -> std::io::Result<MockHandle> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (app, shared) = build(fixture);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockHandle {
        addr,
        shared,
        shutdown: Some(tx),
        task: Some(task),
    })
}
