use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use skillarena::service::{Service, ServiceOptions};
use skillarena::store::Store;
use skillarena_core::tournament::{Arena, Event};

const CATALOG: &str = "segment_id,video_id,action_label,media_url
fold-a,v1,fold,/m/fold-a.mp4
fold-b,v2,fold,/m/fold-b.mp4
fold-c,v3,fold,/m/fold-c.mp4
fold-d,v4,fold,/m/fold-d.mp4
fold-e,v5,fold,/m/fold-e.mp4
fold-f,v6,fold,/m/fold-f.mp4
fold-g,v7,fold,/m/fold-g.mp4
fold-h,v8,fold,/m/fold-h.mp4
";

struct Harness {
    app: Router,
    dir: tempfile::TempDir,
}

impl Harness {
    fn new(opts: ServiceOptions) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::load(Store::open(dir.path()).unwrap(), opts).unwrap();
        Self { app: skillarena::routes::router(Arc::new(service)), dir }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = match body {
            Some(b) => req.body(Body::from(b.to_string())).unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    async fn next(&self, worker: &str) -> (StatusCode, Value) {
        self.call("GET", &format!("/v1/arenas/fold/next-pair?worker_id={worker}"), None).await
    }

    async fn judge(&self, ticket: &str, choice: &str) -> (StatusCode, Value) {
        self.call("POST", "/v1/judgments", Some(json!({ "ticket_id": ticket, "choice": choice }))).await
    }

    fn log(&self) -> Vec<skillarena_core::tournament::EventRecord> {
        Store::read_log_file(&self.dir.path().join("arenas/fold.jsonl")).unwrap()
    }

    async fn create(&self, extra: Value) -> (StatusCode, Value) {
        let mut body = json!({ "catalog": CATALOG, "config": { "rounds": 3 } });
        if let (Value::Object(b), Value::Object(e)) = (&mut body, extra) {
            b.extend(e);
        }
        self.call("POST", "/v1/arenas", Some(body)).await
    }
}

fn admit_all() -> ServiceOptions {
    ServiceOptions { admit_all: true, ..Default::default() }
}

#[tokio::test]
async fn create_and_list_arenas() {
    let h = Harness::new(admit_all());
    let (status, body) = h.create(json!({})).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["arenas"][0]["arena_id"], "fold");
    assert_eq!(body["arenas"][0]["round"], 1);
    assert_eq!(body["arenas"][0]["open_pairs"], 4);

    let (status, body) = h.create(json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "arena_exists");

    let (_, list) = h.call("GET", "/v1/arenas", None).await;
    assert_eq!(list["arenas"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn fresh_round_ticket_then_idempotent_lease() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    let (status, first) = h.next("w1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["status"], "assigned");
    assert!(first["pair"]["left"]["media_url"].as_str().unwrap().starts_with("/m/"));
    let text = first.to_string();
    assert!(!text.contains("fold-a\"") && !text.contains("segment_id"), "{text}");

    let (_, again) = h.next("w1").await;
    assert_eq!(again, first);

    let (_, stats) = h.call("GET", "/v1/arenas/fold/stats", None).await;
    let zero_vote_pairs = stats["pairs"].as_array().unwrap().iter().filter(|p| p["votes"] == 0).count();
    assert_eq!(zero_vote_pairs, 4);
}

#[tokio::test]
async fn judgment_ack_is_idempotent_and_logged_once() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    let (_, ticket) = h.next("w1").await;
    let id = ticket["ticket_id"].as_str().unwrap();
    let (status, ack) = h.judge(id, "left").await;
    assert_eq!(status, StatusCode::OK, "{ack}");
    assert_eq!(ack["pair_state"], "open");
    assert_eq!(ack["votes"], 1);
    assert_eq!(ack["remaining"], 4);

    let (status, again) = h.judge(id, "left").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, ack);
    let votes = h.log().iter().filter(|r| matches!(r.event, Event::Vote { .. })).count();
    assert_eq!(votes, 1);
}

#[tokio::test]
async fn unknown_ticket_and_bad_requests_are_structured() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    let (status, body) = h.judge("feedface", "left").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_ticket");
    assert!(body["message"].as_str().is_some());

    let (status, body) = h.call("GET", "/v1/arenas/nope/leaderboard", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_arena");

    let (status, body) = h.call("GET", "/v1/arenas/fold/next-pair", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "missing_worker");

    let (_, ticket) = h.next("w1").await;
    let (status, body) = h.judge(ticket["ticket_id"].as_str().unwrap(), "no_difference").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "no_difference_disabled");

    let (status, body) = h.call("POST", "/v1/judgments", Some(json!({ "ticket": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_body");
}

#[tokio::test]
async fn worker_who_voted_everywhere_gets_no_work() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    let mut seen = BTreeSet::new();
    for _ in 0..4 {
        let (_, t) = h.next("w1").await;
        assert_eq!(t["status"], "assigned");
        let id = t["ticket_id"].as_str().unwrap().to_string();
        assert!(seen.insert(id.clone()));
        h.judge(&id, "right").await;
    }
    let (status, body) = h.next("w1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "no_work");
}

#[tokio::test]
async fn unqualified_worker_gets_403_until_golds_pass() {
    let h = Harness::new(ServiceOptions::default());
    let gold: Vec<Value> = ["b", "c", "d", "e", "f"]
        .iter()
        .map(|x| json!({ "arena_id": "fold", "left": "fold-a", "right": format!("fold-{x}"), "better": "fold-a" }))
        .collect();
    h.create(json!({ "gold_pairs": gold })).await;
    let (status, body) = h.next("w1").await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "worker_unqualified");

    let (status, rec) = h.call("POST", "/v1/workers", Some(json!({ "worker_id": "w1", "approval_rate": 0.95 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["qualified"], false);

    let mut last = Value::Null;
    for _ in 0..5 {
        let (_, t) = h.call("GET", "/v1/arenas/fold/next-pair?worker_id=w1&qualification=true", None).await;
        assert_eq!(t["status"], "assigned", "{t}");
        last = h.judge(t["ticket_id"].as_str().unwrap(), "left").await.1;
    }
    assert_eq!(last["worker_qualified"], true);
    let (_, t) = h.call("GET", "/v1/arenas/fold/next-pair?worker_id=w1&qualification=true", None).await;
    assert_eq!(t["status"], "no_work");

    let (status, t) = h.next("w1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t["status"], "assigned");
    let (_, rec) = h.call("GET", "/v1/workers/w1", None).await;
    assert_eq!(rec["gold_seen"], 5);
    assert_eq!(rec["gold_correct"], 5);
    assert!(h.dir.path().join("workers.json").exists());
    let gold_in_log = h.log().iter().any(|r| matches!(r.event, Event::Vote { is_gold: true, .. }));
    assert!(!gold_in_log);
}

/// Votes on every open pair with fresh workers until the round resolves.
async fn resolve_round(h: &Harness, round: usize) {
    for w in 0.. {
        let worker = format!("r{round}w{w}");
        let (_, t) = h.next(&worker).await;
        if t["status"] == "no_work" {
            let (_, stats) = h.call("GET", "/v1/arenas/fold/stats", None).await;
            if stats["open_pairs"] == 0 {
                return;
            }
            continue;
        }
        let choice = if w % 3 == 0 { "right" } else { "left" };
        let (status, ack) = h.judge(t["ticket_id"].as_str().unwrap(), choice).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        assert!(w < 500, "round {round} did not resolve");
    }
}

#[tokio::test]
async fn advance_refuses_open_pairs_then_moves_on() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    let (status, body) = h.call("POST", "/v1/arenas/fold/advance", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "unresolved_pairs");
    assert_eq!(body["open_pairs"], 4);

    resolve_round(&h, 1).await;
    let (status, body) = h.call("POST", "/v1/arenas/fold/advance", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["round"], 2);
    assert_eq!(body["round_open"], true);
}

#[tokio::test]
async fn leaderboard_matches_replayed_log() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    for round in 1..=3 {
        resolve_round(&h, round).await;
        h.call("POST", "/v1/arenas/fold/advance", None).await;
        let (_, lb) = h.call("GET", "/v1/arenas/fold/leaderboard", None).await;
        let arena = Arena::replay(h.log()).unwrap();
        let served: Vec<(String, f64)> = lb["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["segment_id"].as_str().unwrap().to_string(), e["rating"].as_f64().unwrap()))
            .collect();
        let replayed: Vec<(String, f64)> =
            arena.export_leaderboard().entries().iter().map(|(p, r)| (p.to_string(), *r)).collect();
        assert_eq!(served, replayed, "round {round}");
    }
    let (_, body) = h.call("POST", "/v1/arenas/fold/advance", None).await;
    assert_eq!(body["code"], "max_rounds_reached");
    let (_, stats) = h.call("GET", "/v1/arenas/fold/stats", None).await;
    assert_eq!(stats["finished"], true);
    assert_eq!(stats["comparisons"], 12);
    assert_eq!(stats["consecutive_tau"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn no_pair_gets_two_votes_from_one_worker() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    for round in 1..=2 {
        for w in 0..40 {
            let worker = format!("w{}", w % 7);
            let (_, t) = h.next(&worker).await;
            if let Some(id) = t["ticket_id"].as_str() {
                h.judge(id, if w % 2 == 0 { "left" } else { "right" }).await;
            }
        }
        resolve_round(&h, round).await;
        h.call("POST", "/v1/arenas/fold/advance", None).await;
    }
    let mut voters: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in h.log() {
        if let Event::Vote { pair_id, worker_id, .. } = r.event {
            assert!(voters.entry(pair_id.clone()).or_default().insert(worker_id.to_string()), "{pair_id}");
        }
    }
    assert!(!voters.is_empty());
}

#[tokio::test]
async fn restart_replays_state_from_disk() {
    let h = Harness::new(admit_all());
    h.create(json!({})).await;
    resolve_round(&h, 1).await;
    h.call("POST", "/v1/arenas/fold/advance", None).await;
    let (_, before) = h.call("GET", "/v1/arenas/fold/leaderboard", None).await;

    let reloaded = Service::load(Store::open(h.dir.path()).unwrap(), admit_all()).unwrap();
    let app = skillarena::routes::router(Arc::new(reloaded));
    let resp = app
        .oneshot(Request::builder().uri("/v1/arenas/fold/leaderboard").body(Body::empty()).unwrap())
        .await
        .unwrap();
    let after: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(after, before);
}

#[tokio::test]
async fn config_reports_arena_flags() {
    let h = Harness::new(admit_all());
    h.create(json!({ "config": { "rounds": 3, "allow_no_difference": true } })).await;
    let (_, cfg) = h.call("GET", "/v1/config", None).await;
    assert_eq!(cfg["arenas"]["fold"]["allow_no_difference"], true);
    assert_eq!(cfg["lease_ticks"], 64);
}
