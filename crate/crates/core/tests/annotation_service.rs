use std::io::Write;

use luxappraise::annotation::{
    build_grid_tasks, export_annotations, export_from_responses, simulate_response, AnnotationService, Response,
    ServiceConfig, Task, TaskKind,
};
use luxappraise::crowd::GridResponse;
use luxappraise::model::{Dataset, RoomCategory};
use luxappraise::synth::{generate_world, AnnotatorModel, WorldConfig};
use luxappraise::Error;

fn world() -> Dataset {
    generate_world(&WorldConfig {
        n_houses: 200,
        seed: 21,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn tasks(data: &Dataset, count: usize, catch_fraction: f64) -> Vec<Task> {
    build_grid_tasks(data, &[RoomCategory::Kitchen, RoomCategory::Bathroom], count, catch_fraction, 1.0, 3).unwrap()
}

fn config(required: usize, catch_fraction: f64) -> ServiceConfig {
    ServiceConfig {
        required_responses: required,
        catch_fraction,
        seed: 9,
    }
}

fn answer(svc: &mut AnnotationService, data: &Dataset, worker: &str, model: &AnnotatorModel) -> Option<u64> {
    let task = svc.next_task(worker, TaskKind::Grid, None).unwrap()?;
    let r = simulate_response(&task, data, model, worker, 77).unwrap();
    Some(svc.submit(r).unwrap())
}

#[test]
fn tasks_retire_after_required_answers() {
    let data = world();
    let tasks = tasks(&data, 4, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let mut svc = AnnotationService::open(tasks.clone(), &dir.path().join("log.jsonl"), config(2, 0.0)).unwrap();
    let model = AnnotatorModel::default();
    for w in ["a", "b", "c"] {
        while answer(&mut svc, &data, w, &model).is_some() {}
    }
    let p = svc.progress();
    assert_eq!(p.tasks_total, tasks.len());
    assert_eq!(p.retired, tasks.len());
    // Retired tasks are not served again, so the third worker gets nothing.
    assert_eq!(p.workers, 2);
    assert_eq!(p.responses, 2 * tasks.len());
    assert!(svc.next_task("d", TaskKind::Grid, None).unwrap().is_none());
}

#[test]
fn submission_errors_are_typed() {
    let data = world();
    let tasks = tasks(&data, 2, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let mut svc = AnnotationService::open(tasks.clone(), &dir.path().join("log.jsonl"), config(3, 0.0)).unwrap();
    let model = AnnotatorModel::default();

    let unassigned = simulate_response(&tasks[0], &data, &model, "w", 1).unwrap();
    assert!(matches!(svc.submit(unassigned), Err(Error::Protocol(_))));

    let task = svc.next_task("w", TaskKind::Grid, None).unwrap().unwrap();
    let bad = Response::Grid(GridResponse {
        task_id: task.id().to_string(),
        worker_id: "w".into(),
        selected: vec!["not-in-gallery".into()],
        timestamp: 0,
    });
    assert!(matches!(svc.submit(bad), Err(Error::Invalid(_))));

    let good = simulate_response(&task, &data, &model, "w", 1).unwrap();
    svc.submit(good.clone()).unwrap();
    assert!(matches!(svc.submit(good), Err(Error::Conflict(_))));

    let unknown = Response::Grid(GridResponse {
        task_id: "nope".into(),
        worker_id: "w".into(),
        selected: vec![],
        timestamp: 0,
    });
    assert!(matches!(svc.submit(unknown), Err(Error::NotFound(_))));
    assert!(matches!(svc.next_task("", TaskKind::Grid, None), Err(Error::Protocol(_))));
    assert!(svc.next_task("w", TaskKind::Anchor, None).unwrap().is_none());
}

#[test]
fn restart_replays_to_the_same_state() {
    let data = world();
    let tasks = tasks(&data, 5, 0.2);
    let model = AnnotatorModel::default();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");

    let run = |svc: &mut AnnotationService, workers: &[&str]| {
        for w in workers {
            for _ in 0..3 {
                answer(svc, &data, w, &model);
            }
        }
    };
    let mut first = AnnotationService::open(tasks.clone(), &log, config(2, 0.2)).unwrap();
    run(&mut first, &["a", "b"]);
    let before = first.progress();
    drop(first);

    let mut resumed = AnnotationService::open(tasks.clone(), &log, config(2, 0.2)).unwrap();
    assert_eq!(resumed.progress(), before);
    run(&mut resumed, &["c", "a"]);

    let other = tempfile::tempdir().unwrap();
    let mut straight = AnnotationService::open(tasks.clone(), &other.path().join("log.jsonl"), config(2, 0.2)).unwrap();
    run(&mut straight, &["a", "b", "c", "a"]);
    assert_eq!(resumed.progress(), straight.progress());
    let a: Vec<&Response> = resumed.responses().collect();
    let b: Vec<&Response> = straight.responses().collect();
    assert_eq!(a, b);
}

#[test]
fn torn_tail_is_dropped_on_open() {
    let data = world();
    let tasks = tasks(&data, 3, 0.0);
    let model = AnnotatorModel::default();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut svc = AnnotationService::open(tasks.clone(), &log, config(3, 0.0)).unwrap();
    answer(&mut svc, &data, "a", &model).unwrap();
    answer(&mut svc, &data, "a", &model).unwrap();
    drop(svc);
    let mut f = std::fs::OpenOptions::new().append(true).open(&log).unwrap();
    f.write_all(br#"{"seq":99,"logged_at":0,"event":"resp"#).unwrap();
    drop(f);

    let mut svc = AnnotationService::open(tasks.clone(), &log, config(3, 0.0)).unwrap();
    assert_eq!(svc.progress().responses, 2);
    let seq = answer(&mut svc, &data, "a", &model).unwrap();
    drop(svc);
    let svc = AnnotationService::open(tasks, &log, config(3, 0.0)).unwrap();
    assert_eq!(svc.progress().responses, 3);
    assert!(seq < 99);
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let data = world();
    let tasks = tasks(&data, 2, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    std::fs::write(&log, "garbage\n").unwrap();
    assert!(matches!(
        AnnotationService::open(tasks, &log, config(3, 0.0)),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn careless_worker_is_flagged_and_ignored() {
    let data = world();
    let tasks = tasks(&data, 6, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut svc = AnnotationService::open(tasks.clone(), &log, config(1, 0.5)).unwrap();
    let careless = AnnotatorModel {
        reliability: 0.0,
        ..AnnotatorModel::default()
    };
    while answer(&mut svc, &data, "lazy", &careless).is_some() {}
    let report = svc.worker_report("lazy").unwrap();
    assert!(report.catches > 0);
    assert!(report.flagged);
    assert_eq!(svc.progress().retired, 0);

    while answer(&mut svc, &data, "good", &AnnotatorModel::perfect()).is_some() {}
    assert!(!svc.worker_report("good").unwrap().flagged);
    assert_eq!(svc.progress().retired, svc.progress().tasks_total);

    let from_log = export_annotations(&log, &tasks).unwrap();
    let responses: Vec<Response> = svc.responses().cloned().collect();
    assert_eq!(from_log, export_from_responses(&tasks, &responses).unwrap());
    assert!(from_log.workers.iter().any(|w| w.worker_id == "lazy" && w.flagged));
    assert!(!from_log.triplets.is_empty());
}

#[test]
fn unanswered_assignment_is_served_again_after_restart() {
    let data = world();
    let tasks = tasks(&data, 3, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut svc = AnnotationService::open(tasks.clone(), &log, config(3, 0.0)).unwrap();
    let first = svc.next_task("w", TaskKind::Grid, None).unwrap().unwrap();
    assert_eq!(svc.next_task("w", TaskKind::Grid, None).unwrap().unwrap(), first);
    drop(svc);
    let mut svc = AnnotationService::open(tasks, &log, config(3, 0.0)).unwrap();
    assert_eq!(svc.next_task("w", TaskKind::Grid, None).unwrap().unwrap(), first);
    let r = simulate_response(&first, &data, &AnnotatorModel::default(), "w", 1).unwrap();
    svc.submit(r).unwrap();
    assert_ne!(svc.next_task("w", TaskKind::Grid, None).unwrap().unwrap(), first);
}
