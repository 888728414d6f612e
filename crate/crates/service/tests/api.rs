use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use leadopt::campaign::CampaignConfig;
use leadopt::data::synthetic_records;
use leadopt::features::SkipGramParams;
use leadopt::generation::{GeneratorBackendConfig, ScriptRule};
use leadopt::molgraph::parse_smiles;
use leadopt::properties::property_profile;
use leadopt::qsar::GbtParams;
use leadopt_service::app::{DriveOptions, StartRequest};
use leadopt_service::{api, Service, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn light_campaign(iterations: usize) -> CampaignConfig {
    CampaignConfig {
        initial_shots: 120,
        max_iterations: iterations,
        batch_size: 20,
        early_stop_after: 50,
        backend: GeneratorBackendConfig::mock(3),
        seed: 3,
        gbt: GbtParams { n_trees: 60, ..Default::default() },
        embedding: SkipGramParams { dim: 32, epochs: 3, ..Default::default() },
        ..Default::default()
    }
}

fn rule(pattern: &str, response: &str) -> ScriptRule {
    ScriptRule { pattern: pattern.into(), response: response.into() }
}

fn config() -> ServiceConfig {
    let mut c = ServiceConfig::default();
    c.campaign = light_campaign(3);
    c.modify.vocab_corpus = 120;
    c.modify.backend = GeneratorBackendConfig::scripted(vec![
        rule(r"Molecule: c1ccccc1\n(?s).*hydroxyl", r#"{"smiles": "Oc1ccccc1"}"#),
        rule("(?s)break it", r#"{"smiles": "C1CC"}"#),
        rule("(?s)garble", "sorry, no molecule today"),
        rule("(?s).*", r#"{"smiles": "CCO"}"#),
    ]);
    c
}

struct Fixture {
    _dir: tempfile::TempDir,
    service: Arc<Service>,
    app: Router,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(Service::open(dir.path(), config()).unwrap());
    let app = api::router(service.clone());
    Fixture { _dir: dir, service, app }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert!(!bytes.is_empty(), "{method} {uri} answered with an empty body");
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

fn assert_error(v: &Value, code: &str) {
    assert_eq!(v["error"]["code"], code, "{v}");
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()), "{v}");
}

async fn add_dataset(app: &Router, name: &str, n: usize) {
    let records: Vec<Value> =
        synthetic_records(n, 0.3, 2).into_iter().map(|r| json!({"smiles": r.smiles, "activity": r.activity})).collect();
    let (s, v) = call(app, "POST", "/datasets", Some(json!({"name": name, "records": records}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
}

async fn wait_for(app: &Router, id: &str, done: impl Fn(&str) -> bool) -> Value {
    let t = Instant::now();
    loop {
        let (s, v) = call(app, "GET", &format!("/campaigns/{id}"), None).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        if done(v["handle"]["status"].as_str().unwrap()) {
            return v;
        }
        assert!(t.elapsed() < Duration::from_secs(180), "campaign {id} stuck: {v}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test]
async fn unknown_ids_get_structured_errors() {
    let f = fixture();
    for uri in ["/campaigns/nope", "/campaigns/nope/report", "/sessions/nope", "/sessions/nope/pool", "/no/such/route"] {
        let (s, v) = call(&f.app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_error(&v, "not_found");
    }
    let (s, v) = call(&f.app, "POST", "/sessions/nope/accept", Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "not_found");
    let (s, v) = call(&f.app, "POST", "/campaigns/nope/resume", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "not_found");
    let (s, v) = call(&f.app, "GET", "/campaigns/..%2Fescape", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "validation_error");
    let req = Request::builder().method("POST").uri("/datasets").body(Body::from("{not json")).unwrap();
    let resp = f.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_error(&v, "validation_error");
}

#[tokio::test]
async fn datasets_register_and_list() {
    let f = fixture();
    let (_, v) = call(&f.app, "GET", "/datasets", None).await;
    assert_eq!(v, json!([]));
    add_dataset(&f.app, "big", 200).await;
    let csv = "smiles,activity\nCCO,6.0\nnot a smiles,5.0\nc1ccccc1O,7.5\n";
    let (s, v) = call(&f.app, "POST", "/datasets", Some(json!({"name": "small", "csv": csv}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v, json!({"name": "small", "records": 2, "has_pools": false, "row_errors": 1}));
    let (_, v) = call(&f.app, "GET", "/datasets", None).await;
    assert_eq!(v[0], json!({"name": "big", "records": 200, "has_pools": true, "row_errors": 0}));
    assert_eq!(v[1]["name"], "small");
    let (s, v) = call(&f.app, "POST", "/datasets", Some(json!({"name": "tiny", "csv": csv, "pools": true}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "validation_error");
    let (s, _) = call(&f.app, "POST", "/datasets", Some(json!({"name": "both", "csv": csv, "records": []}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn campaign_lifecycle_over_http() {
    let f = fixture();
    add_dataset(&f.app, "syn", 160).await;

    let (s, v) = call(&f.app, "POST", "/campaigns", Some(json!({"id": "ghost", "dataset": "missing"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "dataset_missing");
    assert!(!f.service.store().has_campaign("ghost"));
    let mut bad = light_campaign(3);
    bad.cutoff_percentile = 0.0;
    let (s, v) = call(&f.app, "POST", "/campaigns", Some(json!({"id": "bad", "dataset": "syn", "config": bad}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "validation_error");
    assert!(!f.service.store().has_campaign("bad"));

    let (s, v) = call(&f.app, "POST", "/campaigns", Some(json!({"id": "c1", "dataset": "syn", "config": light_campaign(5)}))).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    assert_eq!(v["id"], "c1");
    let (s, v) = call(&f.app, "POST", "/campaigns", Some(json!({"id": "c1", "dataset": "syn"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error(&v, "conflict");
    wait_for(&f.app, "c1", |st| st != "created").await;

    // mid-run snapshots hold completed iterations only, in order
    let mut seen = 0;
    let done = loop {
        let (_, v) = call(&f.app, "GET", "/campaigns/c1", None).await;
        let its: Vec<u64> = v["reports"].as_array().unwrap().iter().map(|r| r["iteration"].as_u64().unwrap()).collect();
        assert_eq!(its, (1..=its.len() as u64).collect::<Vec<_>>());
        assert!(its.len() >= seen);
        seen = its.len();
        if v["handle"]["status"] == "finished" {
            break v;
        }
        assert_ne!(v["handle"]["status"], "failed", "{v}");
        tokio::time::sleep(Duration::from_millis(10)).await;
    };
    assert_eq!(done["reports"].as_array().unwrap().len(), 5);
    assert_eq!(done["handle"]["stop_reason"], "max_iterations");

    let (s, r) = call(&f.app, "GET", "/campaigns/c1/report", None).await;
    assert_eq!(s, StatusCode::OK);
    let cut: Vec<f64> = r["series"]["cutoff"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(cut.len(), 5);
    assert!(cut.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(r["series"]["iteration"], json!([1, 2, 3, 4, 5]));
    let (_, tsv) = call(&f.app, "GET", "/campaigns/c1/report?format=tsv", None).await;
    assert_eq!(tsv.as_str().unwrap().lines().count(), 6);
    let (s, _) = call(&f.app, "GET", "/campaigns/c1/report?format=xml", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&f.app, "POST", "/campaigns/c1/pause", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error(&v, "conflict");
    let (_, list) = call(&f.app, "GET", "/campaigns", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn pause_and_resume_reproduce_an_uninterrupted_run() {
    let f = fixture();
    add_dataset(&f.app, "syn", 160).await;
    let cfg = light_campaign(4);
    let (s, _) = call(&f.app, "POST", "/campaigns", Some(json!({"id": "p", "dataset": "syn", "config": cfg}))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    wait_for(&f.app, "p", |st| st == "running").await;
    let (s, _) = call(&f.app, "POST", "/campaigns/p/pause", None).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let paused = wait_for(&f.app, "p", |st| st == "paused").await;
    assert!(paused["reports"].as_array().unwrap().len() < 4);
    let (s, _) = call(&f.app, "POST", "/campaigns/p/resume", None).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let (s, _) = call(&f.app, "POST", "/campaigns/p/resume", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    wait_for(&f.app, "p", |st| st == "finished").await;

    let svc = f.service.clone();
    let req = StartRequest { id: Some("q".into()), dataset: "syn".into(), config: Some(cfg) };
    tokio::task::spawn_blocking(move || svc.run_campaign_blocking(&req, DriveOptions::default()).unwrap())
        .await
        .unwrap();
    let a = f.service.campaign_state("p").unwrap().unwrap();
    let b = f.service.campaign_state("q").unwrap().unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[tokio::test]
async fn benzene_to_phenol_session() {
    let f = fixture();
    let (s, v) = call(
        &f.app,
        "POST",
        "/sessions/w1/modify",
        Some(json!({"molecule": "c1ccccc1", "instruction": "add a hydroxyl group"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["result"]["output"], "Oc1ccccc1");
    assert!((v["result"]["deltas"]["tpsa"].as_f64().unwrap() - 20.23).abs() < 0.01);
    assert!((v["result"]["deltas"]["molecular_weight"].as_f64().unwrap() - 16.0).abs() < 0.01);
    assert_eq!(v["before"]["atoms"].as_array().unwrap().len(), 6);
    assert_eq!(v["after"]["atoms"].as_array().unwrap().len(), 7);
    assert_eq!(v["after"]["bonds"].as_array().unwrap().len(), 7);
    assert_eq!(v["session"]["history"].as_array().unwrap().len(), 1);

    let (_, pool) = call(&f.app, "GET", "/sessions/w1/pool", None).await;
    assert_eq!(pool, json!([]));
    let (s, v) = call(&f.app, "POST", "/sessions/w1/accept", Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["history"][0]["accepted"], true);
    let (_, pool) = call(&f.app, "GET", "/sessions/w1/pool", None).await;
    assert_eq!(pool.as_array().unwrap().len(), 1);
    assert_eq!(pool[0]["smiles"], "Oc1ccccc1");
}

#[tokio::test]
async fn session_errors_leave_history_alone() {
    let f = fixture();
    let modify = |m: &str, i: &str| Some(json!({"molecule": m, "instruction": i}));
    let (s, _) = call(&f.app, "POST", "/sessions/e/modify", modify("CC", "anything")).await;
    assert_eq!(s, StatusCode::OK);

    let (s, v) = call(&f.app, "POST", "/sessions/e/modify", modify("C1CC(", "anything")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "parse_error");
    let (s, v) = call(&f.app, "POST", "/sessions/e/modify", modify("CCN", "garble it")).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_error(&v, "backend_error");
    assert_eq!(v["error"]["raw"], "sorry, no molecule today");
    let (_, v) = call(&f.app, "GET", "/sessions/e", None).await;
    assert_eq!(v["history"].as_array().unwrap().len(), 1);

    // an invalid result is recorded but cannot be accepted
    let (s, v) = call(&f.app, "POST", "/sessions/e/modify", modify("CCN", "break it")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["valid"], false);
    assert!(v["after"].is_null());
    assert_eq!(v["session"]["history"].as_array().unwrap().len(), 2);
    let (s, v) = call(&f.app, "POST", "/sessions/e/accept", Some(json!({"index": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "validation_error");
    let (s, _) = call(&f.app, "POST", "/sessions/e/accept", Some(json!({"index": 7}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pool_exports_exactly_the_accepted_entries() {
    let f = fixture();
    let inputs = ["CC", "CCC", "CCCC", "c1ccncc1", "CC(C)C"];
    for m in inputs {
        let (s, _) = call(&f.app, "POST", "/sessions/pool/modify", Some(json!({"molecule": m, "instruction": "make it polar"}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    for i in [1, 3, 3] {
        let (s, _) = call(&f.app, "POST", "/sessions/pool/accept", Some(json!({"index": i}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, pool) = call(&f.app, "GET", "/sessions/pool/pool", None).await;
    let pool = pool.as_array().unwrap();
    assert_eq!(pool.iter().map(|p| p["index"].as_u64().unwrap()).collect::<Vec<_>>(), [1, 3]);
    let vocab = f.service.vocab().unwrap();
    for p in pool {
        let smiles = p["smiles"].as_str().unwrap();
        let expect = property_profile(&parse_smiles(smiles).unwrap(), &vocab).unwrap();
        assert_eq!(serde_json::to_value(expect).unwrap(), p["properties"]);
    }
    assert!((pool[0]["properties"]["molecular_weight"].as_f64().unwrap() - 46.07).abs() < 0.01);
    let (_, s) = call(&f.app, "GET", "/sessions/pool", None).await;
    assert_eq!(s["history"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn health() {
    let f = fixture();
    let (s, v) = call(&f.app, "GET", "/health", None).await;
    assert_eq!((s, v), (StatusCode::OK, json!({"status": "ok"})));
}
