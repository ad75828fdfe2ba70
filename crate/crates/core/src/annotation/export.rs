use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crowd::{extract_triplets, lower_median, score_worker, CatchResult, WorkerReport};
use crate::error::{Error, Result};
use crate::io::write_records;
use crate::model::{Dataset, LuxuryLevel, RoomCategory, Triplet};
use crate::synth::AnnotatorModel;

use super::log::{read_log, LogEvent};
use super::{simulate_response, Response, Task};

pub const TRIPLETS_FILE: &str = "triplets.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const WORKERS_FILE: &str = "workers.jsonl";

/// Aggregated anchor label of one photo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub photo_id: String,
    pub room: RoomCategory,
    pub level: LuxuryLevel,
    pub responses: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Export {
    /// In task-file order, then worker id, then gallery order.
    pub triplets: Vec<Triplet>,
    /// Sorted by photo id.
    pub labels: Vec<LabelRecord>,
    /// Every responding worker, sorted by id.
    pub workers: Vec<WorkerReport>,
}

/// Scores workers on catch trials, drops flagged workers, and turns the
/// remaining answers to regular tasks into triplets and per-photo labels.
/// The result depends only on the task list and the set of responses.
pub fn export_from_responses(tasks: &[Task], responses: &[Response]) -> Result<Export> {
    let index: HashMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (t.id(), i)).collect();
    let mut by_task: Vec<BTreeMap<&str, &Response>> = vec![BTreeMap::new(); tasks.len()];
    let mut by_worker: BTreeMap<&str, Vec<CatchResult<'_>>> = BTreeMap::new();
    for r in responses {
        let &i = index
            .get(r.task_id())
            .ok_or_else(|| Error::NotFound(format!("response refers to unknown task {}", r.task_id())))?;
        if by_task[i].insert(r.worker_id(), r).is_some() {
            return Err(Error::Conflict(format!(
                "worker {} answered task {} twice",
                r.worker_id(),
                r.task_id()
            )));
        }
        let catches = by_worker.entry(r.worker_id()).or_default();
        match (&tasks[i], r) {
            (Task::Grid(t), Response::Grid(g)) if t.is_catch => catches.push(CatchResult::Grid(t, g)),
            (Task::Anchor(t), Response::Anchor(a)) if t.is_catch => catches.push(CatchResult::Anchor(t, a)),
            (t, r) if t.kind() != r.kind() => {
                return Err(Error::invalid(format!(
                    "{} response to {} task {}",
                    r.kind(),
                    t.kind(),
                    t.id()
                )))
            }
            _ => {}
        }
    }
    let workers = by_worker
        .iter()
        .map(|(w, c)| score_worker(w, c))
        .collect::<Result<Vec<_>>>()?;
    let flagged: BTreeSet<&str> = workers
        .iter()
        .filter(|w| w.flagged)
        .map(|w| w.worker_id.as_str())
        .collect();

    let mut triplets = Vec::new();
    let mut levels: BTreeMap<&str, (RoomCategory, Vec<LuxuryLevel>)> = BTreeMap::new();
    for (task, answers) in tasks.iter().zip(&by_task) {
        if task.is_catch() {
            continue;
        }
        for (worker, r) in answers {
            if flagged.contains(worker) {
                continue;
            }
            match (task, r) {
                (Task::Grid(t), Response::Grid(g)) => triplets.extend(extract_triplets(t, g)?),
                (Task::Anchor(t), Response::Anchor(a)) => {
                    levels.entry(&t.probe).or_insert_with(|| (t.room, Vec::new())).1.push(a.level);
                }
                _ => unreachable!("kinds checked above"),
            }
        }
    }
    let labels = levels
        .into_iter()
        .map(|(photo, (room, ls))| LabelRecord {
            photo_id: photo.to_string(),
            room,
            responses: ls.len(),
            level: lower_median(ls.into_iter()),
        })
        .collect();
    Ok(Export {
        triplets,
        labels,
        workers,
    })
}

/// Replays the response events of a log; assignment events are ignored.
pub fn export_annotations(log_path: &Path, tasks: &[Task]) -> Result<Export> {
    let responses: Vec<Response> = read_log(log_path)?
        .into_iter()
        .filter_map(|e| match e.event {
            LogEvent::Response { response } => Some(response),
            LogEvent::Assign { .. } => None,
        })
        .collect();
    export_from_responses(tasks, &responses)
}

/// Every listed worker answers every task with its own annotator model,
/// without going through a service.
pub fn simulate_direct(
    tasks: &[Task],
    dataset: &Dataset,
    workers: &[(String, AnnotatorModel)],
    seed: u64,
) -> Result<Export> {
    let mut responses = Vec::with_capacity(tasks.len() * workers.len());
    for task in tasks {
        for (w, model) in workers {
            responses.push(simulate_response(task, dataset, model, w, seed)?);
        }
    }
    export_from_responses(tasks, &responses)
}

/// Writes the three export files into `dir`.
pub fn write_export(export: &Export, dir: &Path) -> Result<()> {
    write_records(&dir.join(TRIPLETS_FILE), export.triplets.iter())?;
    write_records(&dir.join(LABELS_FILE), export.labels.iter())?;
    write_records(&dir.join(WORKERS_FILE), export.workers.iter())
}
