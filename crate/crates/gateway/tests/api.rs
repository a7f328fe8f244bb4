use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::StreamExt;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use fuzzyhri_core::geometry::{BBox, FrameSize, Point};
use fuzzyhri_core::orchestrator::{Pipeline, PipelineEvent, SimClock, Stage};
use fuzzyhri_core::scene::{NoiseModel, Scene, SceneState};
use fuzzyhri_gateway::{event_stream, router, AppState, Session};

fn state() -> AppState {
    let mut objects = BTreeMap::new();
    objects.insert(
        "apple".to_string(),
        BBox::new(100.0, 200.0, 140.0, 240.0).unwrap(),
    );
    objects.insert(
        "orange".to_string(),
        BBox::new(300.0, 200.0, 350.0, 250.0).unwrap(),
    );
    objects.insert(
        "hand".to_string(),
        BBox::new(500.0, 350.0, 580.0, 430.0).unwrap(),
    );
    let scene = Scene::new(
        SceneState {
            frame: FrameSize::default(),
            objects,
            effector: Point::new(320.0, 50.0),
            held: None,
            rng_seed: 5,
        },
        NoiseModel::default(),
    )
    .unwrap();
    AppState::new(Session {
        pipeline: Pipeline::mock(1.0),
        scene,
        clock: Box::new(SimClock::new()),
    })
}

async fn call(s: &AppState, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(s.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: Value) -> Request<Body> {
    Request::post("/command")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn scene_snapshot_matches_the_session() {
    let s = state();
    let (status, body) = call(&s, get("/scene")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["objects"].as_array().unwrap().len(), 3);
    assert_eq!(body["held"], Value::Null);
    assert_eq!(body["effector"], json!({"x": 320.0, "y": 50.0}));
}

#[tokio::test]
async fn text_command_updates_scene_and_metrics() {
    let s = state();
    let (status, _) = call(&s, get("/metrics")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = call(&s, post(json!({"text": "grab the apple"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["ok"], true);
    assert_eq!(
        body["calls"],
        json!([{"method": "pick_up", "args": ["apple"]}])
    );

    let (_, scene) = call(&s, get("/scene")).await;
    assert_eq!(scene["held"], "apple");
    assert!(!scene["trajectory"].as_array().unwrap().is_empty());

    let (status, m) = call(&s, get("/metrics")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["trials"], 1);
}

#[tokio::test]
async fn action_json_is_accepted() {
    let s = state();
    let body = json!({"actions": [{"method": "hand_over", "args": ["orange"]}]});
    let (status, r) = call(&s, post(body)).await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert_eq!(r["ok"], true);
    let (status, r) = call(&s, post(json!({"actions": "[hand_over(kiwi)]"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["ok"], false);
    assert_eq!(r["message"], "object not detected: kiwi");
}

#[tokio::test]
async fn bad_commands_are_rejected() {
    let s = state();
    let (status, r) = call(&s, post(json!({"actions": "[pick_up(apple"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(r["message"].as_str().unwrap().contains("at byte 14"), "{r}");
    let (status, _) = call(&s, post(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&s, post(json!({"text": "a", "actions": "[]"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, scene) = call(&s, get("/scene")).await;
    assert_eq!(scene["held"], Value::Null);
}

#[tokio::test]
async fn second_command_while_busy_conflicts() {
    let s = state();
    let guard = s.try_acquire().unwrap();
    assert!(s.try_acquire().is_none());
    let (status, _) = call(&s, post(json!({"text": "grab the apple"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    // reads still work while busy
    let (status, _) = call(&s, get("/scene")).await;
    assert_eq!(status, StatusCode::OK);
    drop(guard);
    let (status, _) = call(&s, post(json!({"text": "grab the apple"}))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn events_follow_stage_order() {
    let s = state();
    let mut rx = s.subscribe();
    let (status, _) = call(&s, post(json!({"text": "grab the apple"}))).await;
    assert_eq!(status, StatusCode::OK);
    let mut started = vec![];
    let mut ticks = vec![];
    while let Ok(e) = rx.try_recv() {
        match e {
            PipelineEvent::StageStarted { stage, .. } => started.push(stage),
            PipelineEvent::Trajectory { point, .. } => ticks.push(point.iteration),
            _ => {}
        }
    }
    assert_eq!(started, Stage::ALL);
    assert!(!ticks.is_empty());
}

#[tokio::test]
async fn event_stream_opens_with_the_scene() {
    let s = state();
    let mut stream = Box::pin(event_stream(&s));
    assert!(stream.next().await.unwrap().is_ok());

    let resp = router(s.clone()).oneshot(get("/events")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    let frame = body.frame().await.unwrap().unwrap();
    let text = String::from_utf8(frame.into_data().unwrap().to_vec()).unwrap();
    assert!(
        text.starts_with("event: scene\ndata: {\"type\":\"scene\""),
        "{text}"
    );
}
