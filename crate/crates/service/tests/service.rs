use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use noncoop::agent::QuestionPlayer;
use noncoop::game::SceneConfig;
use noncoop::harness::{compute_corpus_stats, read_game_log, Checkpoint, CorpusFormat};
use noncoop_service::{router, AppState, ServiceConfig, SessionView};

fn checkpoint() -> Checkpoint {
    let scene = SceneConfig::with_objects(5);
    let player = QuestionPlayer::for_scenes(&scene, 5).unwrap();
    Checkpoint::new(player, scene, 5, &"service-test", 0).unwrap()
}

fn app_with(config: ServiceConfig) -> Router {
    let checkpoints = BTreeMap::from([("base".to_string(), checkpoint())]);
    router(Arc::new(AppState::new(checkpoints, config).unwrap()))
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn create(app: &Router, body: Value) -> SessionView {
    let (status, v, text) = send(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{text}");
    serde_json::from_value(v).unwrap()
}

async fn answer(app: &Router, id: &str, token: &str) -> (StatusCode, Value) {
    let (s, v, _) = send(app, "POST", &format!("/sessions/{id}/answer"), Some(json!({"answer": token}))).await;
    (s, v)
}

#[tokio::test]
async fn new_session_has_one_pending_question_and_reveals_the_goal() {
    let app = app();
    let (status, v, _) = send(&app, "POST", "/sessions", Some(json!({"checkpoint": "base", "seed": 1}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["state"]["status"], "awaiting_answer");
    assert_eq!(v["state"]["round"], 1);
    assert!(v["state"]["question"]["text"].as_str().unwrap().ends_with('?'));
    assert_eq!(v["role"], "deceive");
    let objects = v["scene"]["objects"].as_array().unwrap();
    assert_eq!(objects.len(), 5);
    assert_eq!(objects.iter().filter(|o| o["is_goal"] == true).count(), 1);
    assert!(v["transcript"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn five_answers_give_four_questions_then_a_result() {
    let app = app();
    let s = create(&app, json!({"seed": 2})).await;
    for round in 2..=5 {
        let (status, v) = answer(&app, &s.id, "no").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["state"]["status"], "awaiting_answer");
        assert_eq!(v["state"]["round"], round);
    }
    let (status, v) = answer(&app, &s.id, "no").await;
    assert_eq!(status, StatusCode::OK);
    let result = &v["state"]["result"];
    assert_eq!(v["state"]["status"], "finished");
    assert_eq!(v["transcript"].as_array().unwrap().len(), 5);
    let correct = result["object_guess"] == result["goal"];
    assert_eq!(result["object_correct"], correct);
    // a deceiver wins when the guess is wrong
    assert_eq!(result["human_won"], !correct);

    let (status, v) = answer(&app, &s.id, "yes").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "conflict");
}

#[tokio::test]
async fn session_ids_are_distinct() {
    let app = app();
    let a = create(&app, json!({})).await;
    let b = create(&app, json!({})).await;
    assert_ne!(a.id, b.id);
}

#[tokio::test]
async fn pinned_seed_gives_the_same_scene() {
    let app = app();
    let a = create(&app, json!({"seed": 42})).await;
    let b = create(&app, json!({"seed": 42, "role": "cooperate"})).await;
    assert_eq!(a.scene, b.scene);
    assert_eq!(a.state, b.state);
    let c = create(&app, json!({"seed": 43})).await;
    assert_ne!(a.scene, c.scene);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app();
    let (status, v, _) = send(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
    let (status, _) = answer(&app, "nope", "yes").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, v, _) = send(&app, "POST", "/sessions", Some(json!({"checkpoint": "other"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn answer_tokens_are_exact() {
    let app = app();
    let s = create(&app, json!({})).await;
    for bad in ["Yes", "n/a", "maybe", ""] {
        let (status, v) = answer(&app, &s.id, bad).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_eq!(v["code"], "validation_error");
    }
    let (status, v, _) = send(&app, "POST", &format!("/sessions/{}/answer", s.id), Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "validation_error");
    let (_, v, _) = send(&app, "GET", &format!("/sessions/{}", s.id), None).await;
    assert!(v["transcript"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn snapshot_after_two_answers() {
    let app = app();
    let s = create(&app, json!({"seed": 5})).await;
    answer(&app, &s.id, "yes").await;
    answer(&app, &s.id, "na").await;
    let (status, v, _) = send(&app, "GET", &format!("/sessions/{}", s.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let snap: SessionView = serde_json::from_value(v).unwrap();
    assert_eq!(snap.transcript.len(), 2);
    assert_eq!(snap.transcript[1].round, 2);
    assert_eq!(snap.scene, s.scene);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_answers_to_one_round() {
    let app = app();
    for seed in 0..20 {
        let s = create(&app, json!({"seed": seed})).await;
        let uri = format!("/sessions/{}/answer", s.id);
        let post = |token: &'static str| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move { send(&app, "POST", &uri, Some(json!({"answer": token, "round": 1}))).await })
        };
        let (a, b) = (post("yes"), post("no"));
        let statuses = [a.await.unwrap().0, b.await.unwrap().0];
        assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
        assert!(statuses.contains(&StatusCode::CONFLICT));
        let (_, v, _) = send(&app, "GET", &format!("/sessions/{}", s.id), None).await;
        assert_eq!(v["transcript"].as_array().unwrap().len(), 1);
    }
}

#[tokio::test]
async fn logs_parse_as_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("human.jsonl");
    let app = app_with(ServiceConfig {
        max_rounds: Some(3),
        log_path: Some(log.clone()),
    });
    let (_, _, text) = send(&app, "GET", "/logs", None).await;
    assert!(text.is_empty());
    for (seed, role) in [(1, "deceive"), (2, "cooperate")] {
        let s = create(&app, json!({"seed": seed, "role": role})).await;
        assert_eq!(s.max_rounds, 3);
        for token in ["no", "yes", "na"] {
            answer(&app, &s.id, token).await;
        }
    }
    let (status, _, text) = send(&app, "GET", "/logs", None).await;
    assert_eq!(status, StatusCode::OK);
    let games = read_game_log(text.as_bytes()).unwrap();
    assert_eq!(games.len(), 2);
    assert!(games[0].coop_label.is_nc() && !games[1].coop_label.is_nc());
    assert!(games.iter().all(|g| g.turns.len() == 3));
    let stats = compute_corpus_stats(&log, CorpusFormat::GameLog).unwrap();
    assert_eq!(stats.n_games, 2);
    assert_eq!(stats.n_questions, 6);
}

#[tokio::test]
async fn in_memory_logs_without_a_file() {
    let app = app();
    let s = create(&app, json!({"seed": 9})).await;
    for _ in 0..5 {
        answer(&app, &s.id, "no").await;
    }
    let (_, _, text) = send(&app, "GET", "/logs", None).await;
    let games = read_game_log(text.as_bytes()).unwrap();
    assert_eq!(games.len(), 1);
    assert_eq!(games[0].strategy_tag, "human_deceive");
}
