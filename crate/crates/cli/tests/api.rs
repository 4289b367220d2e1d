use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use forcegame_cli::commands::{cmd_force, BudgetArgs, ConditionArgs, TheoryArgs};
use forcegame_cli::server::{router, AppState};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

async fn fresh(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "theory": "graphs" }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    parse(&body)["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn session_lifecycle() {
    let app = router(AppState::new(None));
    let id = fresh(&app).await;
    let (status, body) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let v = parse(&body);
    assert_eq!(v["turn"], "forall");
    assert_eq!(v["transcript"]["moves"].as_array().unwrap().len(), 0);

    let mv = json!({ "additions": [{ "formula": "E(c0,c1)", "bound": "1/2" }] });
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/moves"), Some(mv)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let r = parse(&body);
    assert_eq!(r["accepted"], true);
    assert!(r["machine"].is_object(), "the machine answers: {body}");
    assert_eq!(r["length"], 2);

    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse(&body)["moves"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn illegal_moves_do_not_mutate() {
    let app = router(AppState::new(None));
    let id = fresh(&app).await;
    let contradiction = json!({ "additions": [
        { "formula": "E(c0,c1)", "bound": "1/2" },
        { "formula": "~E(c0,c1)", "bound": "1/2" },
    ]});
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/moves"), Some(contradiction)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let r = parse(&body);
    assert_eq!(r["accepted"], false);
    assert!(r["rejection"].is_string());
    assert_eq!(r["length"], 0);
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert!(parse(&body)["moves"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn errors_map_to_statuses() {
    let app = router(AppState::new(None));
    assert_eq!(call(&app, "GET", "/sessions/s99", None).await.0, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "theory": "nope" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "theory": "graphs", "colour": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let id = fresh(&app).await;
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/analyze"), Some(json!({ "formula": "E(c0," }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(parse(&body)["error"].is_string());
    let both = json!({ "condition": [], "additions": [] });
    assert_eq!(call(&app, "POST", &format!("/sessions/{id}/moves"), Some(both)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn machine_opens_for_a_human_exists() {
    let app = router(AppState::new(None));
    let cfg = json!({ "theory": "graphs", "human": "exists" });
    let (status, body) = call(&app, "POST", "/sessions", Some(cfg)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let v = parse(&body);
    assert_eq!(v["turn"], "exists", "{body}");
    assert_eq!(v["transcript"]["moves"].as_array().unwrap().len(), 1);
    let id = v["id"].as_str().unwrap();
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/moves"), Some(json!({ "additions": [] }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(parse(&body)["length"], 3);
}

#[tokio::test]
async fn analysis_matches_cli_report() {
    let app = router(AppState::new(None));
    let id = fresh(&app).await;
    let req = json!({ "formula": "E(c0,c1)", "kind": "weak" });
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/analyze"), Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let entry = parse(&body);
    assert_eq!(entry["length"], 0);
    let theory = TheoryArgs { theory: "graphs".into(), bounds: None, policy: Default::default() };
    let cli = cmd_force("weak".parse().unwrap(), "E(c0,c1)", &theory, &ConditionArgs::default(), &BudgetArgs::default()).unwrap();
    assert_eq!(entry["report"], parse(&cli.body));
    let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(parse(&view)["analyses"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn transcripts_write_through() {
    let dir = std::env::temp_dir().join(format!("forcegame-api-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let app = router(AppState::new(Some(dir.clone())));
    let id = fresh(&app).await;
    let mv = json!({ "additions": [{ "formula": "~E(c0,c1)", "bound": "1/2" }] });
    call(&app, "POST", &format!("/sessions/{id}/moves"), Some(mv)).await;
    let (_, served) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    let written = std::fs::read_to_string(dir.join(format!("{id}.json"))).unwrap();
    assert_eq!(written, served);
    std::fs::remove_dir_all(&dir).unwrap();
}
