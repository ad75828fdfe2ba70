use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_luxappraise");

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn run(dir: &Path, args: &[&str]) {
    let out = Command::new(BIN).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup(dir: &Path) {
    run(dir, &["synth", "--seed", "3", "--houses", "60", "--out", "world"]);
    run(dir, &["tasks", "grid", "--data", "world", "--room", "kitchen", "--count", "4", "--seed", "1", "--out", "tasks.jsonl"]);
}

fn start(dir: &Path, extra: &[&str]) -> Server {
    start_with_env(dir, extra, &[])
}

fn start_with_env(dir: &Path, extra: &[&str], env: &[(&str, &str)]) -> Server {
    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0", "--catch-fraction", "0", "--required", "1"])
        .args(["--data", "world", "--tasks", "tasks.jsonl", "--log", "log.jsonl"])
        .args(extra)
        .env_remove("LUXAPPRAISE_LOG")
        .envs(env.iter().copied())
        .current_dir(dir)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").expect("startup line").to_string();
    Server { child, base }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn get(s: &Server, path: &str) -> (u16, Value) {
    let mut resp = agent().get(&format!("{}{path}", s.base)).call().unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_json().unwrap_or(Value::Null))
}

fn post(s: &Server, body: &Value) -> (u16, Value) {
    let mut resp = agent()
        .post(&format!("{}/api/response", s.base))
        .send_json(body)
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_json().unwrap_or(Value::Null))
}

fn grid_response(task: &Value, worker: &str, selected: Value) -> Value {
    json!({ "kind": "grid", "task_id": task["id"], "worker_id": worker, "selected": selected })
}

#[test]
fn task_and_response_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let s = start(dir.path(), &[]);

    let (status, task) = get(&s, "/api/task?worker=w1&kind=grid&room=kitchen");
    assert_eq!(status, 200);
    assert_eq!(task["kind"], "grid");
    assert_eq!(task["room"], "kitchen");
    let gallery = task["gallery"].as_array().unwrap().clone();
    assert!(!gallery.is_empty());

    // Re-requesting before answering returns the same task.
    let (_, again) = get(&s, "/api/task?worker=w1&kind=grid");
    assert_eq!(again["id"], task["id"]);

    let (status, body) = post(&s, &grid_response(&task, "w1", json!([gallery[0]])));
    assert_eq!(status, 200);
    assert!(body["seq"].as_u64().is_some());

    let (status, progress) = get(&s, "/api/progress");
    assert_eq!(status, 200);
    assert_eq!(progress["tasks_total"], 4);
    assert_eq!(progress["responses"], 1);
    assert_eq!(progress["retired"], 1);
    assert_eq!(progress["workers"], 1);

    let (status, report) = get(&s, "/api/worker/w1");
    assert_eq!(status, 200);
    assert_eq!(report["flagged"], false);

    // Once all four tasks are answered the worker gets an empty marker.
    for _ in 0..3 {
        let (_, t) = get(&s, "/api/task?worker=w1&kind=grid");
        assert_ne!(t["id"], task["id"]);
        let (status, _) = post(&s, &grid_response(&t, "w1", json!([])));
        assert_eq!(status, 200);
    }
    let (status, empty) = get(&s, "/api/task?worker=w1&kind=grid");
    assert_eq!(status, 200);
    assert_eq!(empty, json!({ "empty": true }));
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let s = start(dir.path(), &[]);

    assert_eq!(get(&s, "/api/task?kind=grid").0, 400);
    assert_eq!(get(&s, "/api/task?worker=w1&kind=bogus").0, 400);
    assert_eq!(get(&s, "/api/task?worker=w1&room=attic").0, 400);
    assert_eq!(get(&s, "/api/anchors?room=kitchen").0, 404);
    assert_eq!(get(&s, "/api/photo/no-such-photo").0, 404);

    let (_, task) = get(&s, "/api/task?worker=w1&kind=grid");
    let unknown = json!({ "kind": "grid", "task_id": "nope", "worker_id": "w1", "selected": [] });
    assert_eq!(post(&s, &unknown).0, 404);
    assert_eq!(post(&s, &grid_response(&task, "w2", json!([]))).0, 400);
    assert_eq!(post(&s, &grid_response(&task, "w1", json!(["not-in-gallery"]))).0, 422);
    assert_eq!(post(&s, &json!({ "kind": "grid" })).0, 400);
    assert_eq!(post(&s, &grid_response(&task, "w1", json!([]))).0, 200);
    assert_eq!(post(&s, &grid_response(&task, "w1", json!([]))).0, 409);
}

#[test]
fn photos_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let s = start(dir.path(), &["--show-latent"]);
    let (_, task) = get(&s, "/api/task?worker=w1&kind=grid");
    let probe = task["probe"].as_str().unwrap();

    let mut resp = agent().get(&format!("{}/api/photo/{probe}", s.base)).call().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert_eq!(resp.headers()["content-type"], "image/svg+xml");
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
    let svg = resp.body_mut().read_to_string().unwrap();
    assert!(svg.contains(probe) && svg.contains("latent"));

    let resp = agent().options(&format!("{}/api/response", s.base)).call().unwrap();
    assert_eq!(resp.status().as_u16(), 204);
    assert!(resp.headers()["access-control-allow-methods"].to_str().unwrap().contains("POST"));
}

#[test]
fn asset_files_are_served_when_present() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let photos = std::fs::read_to_string(dir.path().join("world/photos.jsonl")).unwrap();
    let first: Value = serde_json::from_str(photos.lines().next().unwrap()).unwrap();
    let id = first["id"].as_str().unwrap();
    std::fs::create_dir(dir.path().join("assets")).unwrap();
    std::fs::write(dir.path().join(format!("assets/{id}.png")), b"\x89PNG fake").unwrap();
    let s = start(dir.path(), &["--assets", "assets"]);

    let mut resp = agent().get(&format!("{}/api/photo/{id}", s.base)).call().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert_eq!(resp.headers()["content-type"], "image/png");
    assert_eq!(resp.body_mut().read_to_vec().unwrap(), b"\x89PNG fake");
}

#[test]
fn log_variable_overrides_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let s = start_with_env(dir.path(), &[], &[("LUXAPPRAISE_LOG", "env_log.jsonl")]);
    let (_, task) = get(&s, "/api/task?worker=w1&kind=grid");
    assert_eq!(post(&s, &grid_response(&task, "w1", json!([]))).0, 200);
    drop(s);
    assert!(dir.path().join("env_log.jsonl").exists());
    assert!(!dir.path().join("log.jsonl").exists());
}
