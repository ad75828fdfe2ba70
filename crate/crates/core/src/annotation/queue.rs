use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crowd::{score_worker, validate_selection, CatchResult, WorkerReport};
use crate::error::{Error, Result};
use crate::model::RoomCategory;
use crate::rng::{derive_seed, derive_seed_idx, unit_from_seed};

use super::log::{LogEntry, LogEvent, ResponseLog};
use super::{Response, Task, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Accepted responses from unflagged workers that retire a task.
    pub required_responses: usize,
    /// Probability that an assignment is a catch trial, when one is left.
    pub catch_fraction: f64,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            required_responses: 3,
            catch_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tasks_total: usize,
    pub retired: usize,
    pub responses: usize,
    pub workers: usize,
}

#[derive(Debug, Default)]
struct WorkerState {
    outstanding: HashSet<usize>,
    answered: HashSet<usize>,
    assignments: u64,
    catch_answers: Vec<usize>,
    flagged: bool,
}

/// Task queue whose state is derived entirely from its response log.
/// Methods take `&mut self`; callers serialize access, which makes
/// assignment linearizable and gives log appends a total order.
#[derive(Debug)]
pub struct AnnotationService {
    tasks: Vec<Task>,
    index: HashMap<String, usize>,
    config: ServiceConfig,
    log: ResponseLog,
    workers: BTreeMap<String, WorkerState>,
    answers: Vec<Vec<(String, Response)>>,
    outstanding: Vec<usize>,
    responses: usize,
    anchors: BTreeMap<RoomCategory, Vec<String>>,
}

impl AnnotationService {
    /// Opens the log at `log_path` and replays it over `tasks`.
    pub fn open(tasks: Vec<Task>, log_path: &Path, config: ServiceConfig) -> Result<Self> {
        if config.required_responses == 0 || !(0.0..=1.0).contains(&config.catch_fraction) {
            return Err(Error::invalid(
                "required_responses must be >= 1 and catch_fraction in [0, 1]",
            ));
        }
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if index.insert(t.id().to_string(), i).is_some() {
                return Err(Error::invalid(format!("duplicate task id {}", t.id())));
            }
        }
        let (log, entries) = ResponseLog::open(log_path)?;
        let n = tasks.len();
        let mut service = AnnotationService {
            tasks,
            index,
            config,
            log,
            workers: BTreeMap::new(),
            answers: vec![Vec::new(); n],
            outstanding: vec![0; n],
            responses: 0,
            anchors: BTreeMap::new(),
        };
        for entry in entries {
            service.replay(entry)?;
        }
        Ok(service)
    }

    pub fn with_anchors(mut self, anchors: BTreeMap<RoomCategory, Vec<String>>) -> Self {
        self.anchors = anchors;
        self
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    fn task_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("task {id}")))
    }

    fn replay(&mut self, entry: LogEntry) -> Result<()> {
        let seq = entry.seq;
        let at = |e: Error| Error::invalid(format!("log seq {seq}: {e}"));
        match entry.event {
            LogEvent::Assign { task_id, worker_id } => {
                let i = self.task_index(&task_id).map_err(at)?;
                self.apply_assign(i, &worker_id);
            }
            LogEvent::Response { response } => {
                let i = self.task_index(response.task_id()).map_err(at)?;
                self.apply_response(i, response).map_err(at)?;
            }
        }
        Ok(())
    }

    fn apply_assign(&mut self, i: usize, worker: &str) {
        let ws = self.workers.entry(worker.to_string()).or_default();
        ws.assignments += 1;
        if ws.outstanding.insert(i) {
            self.outstanding[i] += 1;
        }
    }

    fn apply_response(&mut self, i: usize, response: Response) -> Result<()> {
        let worker = response.worker_id().to_string();
        let ws = self.workers.entry(worker.clone()).or_default();
        if !ws.answered.insert(i) {
            return Err(Error::Conflict(format!("worker {worker} already answered task {}", response.task_id())));
        }
        if ws.outstanding.remove(&i) {
            self.outstanding[i] -= 1;
        }
        if self.tasks[i].is_catch() {
            ws.catch_answers.push(i);
        }
        self.answers[i].push((worker.clone(), response));
        self.responses += 1;
        if self.tasks[i].is_catch() {
            let report = self.report_for(&worker)?;
            self.workers.get_mut(&worker).expect("inserted above").flagged = report.flagged;
        }
        Ok(())
    }

    fn report_for(&self, worker: &str) -> Result<WorkerReport> {
        let Some(ws) = self.workers.get(worker) else {
            return score_worker(worker, &[]);
        };
        let mut results = Vec::with_capacity(ws.catch_answers.len());
        for &i in &ws.catch_answers {
            let (_, r) = self.answers[i]
                .iter()
                .find(|(w, _)| w == worker)
                .expect("catch answer recorded");
            results.push(match (&self.tasks[i], r) {
                (Task::Grid(t), Response::Grid(g)) => CatchResult::Grid(t, g),
                (Task::Anchor(t), Response::Anchor(a)) => CatchResult::Anchor(t, a),
                _ => return Err(Error::invalid("response kind does not match task")),
            });
        }
        score_worker(worker, &results)
    }

    /// Reliability report for a worker; workers with no catch answers have
    /// no score and are not flagged.
    pub fn worker_report(&self, worker: &str) -> Result<WorkerReport> {
        self.report_for(worker)
    }

    fn accepted(&self, i: usize) -> usize {
        self.answers[i]
            .iter()
            .filter(|(w, _)| !self.workers.get(w).is_some_and(|s| s.flagged))
            .count()
    }

    fn retired(&self, i: usize) -> bool {
        !self.tasks[i].is_catch() && self.accepted(i) >= self.config.required_responses
    }

    /// Assigns the worker a task of `kind` (optionally restricted to a room)
    /// that it has never been assigned, or `None` when nothing is left. A
    /// matching task already assigned to the worker and not yet answered is
    /// returned again without a new assignment.
    ///
    /// Regular tasks go in file order, preferring those whose accepted plus
    /// outstanding count is below the requirement. With probability
    /// `catch_fraction` a catch trial is served instead; once regular tasks
    /// run out, remaining catch trials are served.
    pub fn next_task(&mut self, worker: &str, kind: TaskKind, room: Option<RoomCategory>) -> Result<Option<Task>> {
        if worker.is_empty() {
            return Err(Error::Protocol("worker id must be non-empty".into()));
        }
        let matches = |i: usize| {
            let t = &self.tasks[i];
            t.kind() == kind && room.is_none_or(|r| t.room() == r)
        };
        if let Some(ws) = self.workers.get(worker) {
            if let Some(&i) = ws.outstanding.iter().filter(|&&i| matches(i)).min() {
                return Ok(Some(self.tasks[i].clone()));
            }
        }
        let (count, seen): (u64, HashSet<usize>) = match self.workers.get(worker) {
            Some(ws) => (ws.assignments, ws.outstanding.union(&ws.answered).copied().collect()),
            None => (0, HashSet::new()),
        };
        let pick = self.pick(kind, room, count, worker, |i| seen.contains(i));
        self.assign(worker, pick)
    }

    fn pick<F: Fn(&usize) -> bool>(
        &self,
        kind: TaskKind,
        room: Option<RoomCategory>,
        count: u64,
        worker: &str,
        seen: F,
    ) -> Option<usize> {
        let open = |i: &usize| {
            let t = &self.tasks[*i];
            t.kind() == kind && room.is_none_or(|r| t.room() == r) && !seen(i)
        };
        let all = 0..self.tasks.len();
        let catch = || all.clone().filter(open).find(|&i| self.tasks[i].is_catch());
        let draw = unit_from_seed(derive_seed_idx(derive_seed(self.config.seed, worker), "catch", count));
        if draw < self.config.catch_fraction {
            if let Some(i) = catch() {
                return Some(i);
            }
        }
        let regular = |i: &usize| !self.tasks[*i].is_catch() && !self.retired(*i);
        all.clone()
            .filter(open)
            .filter(regular)
            .find(|&i| self.accepted(i) + self.outstanding[i] < self.config.required_responses)
            .or_else(|| all.clone().filter(open).find(regular))
            .or_else(catch)
    }

    fn assign(&mut self, worker: &str, pick: Option<usize>) -> Result<Option<Task>> {
        let Some(i) = pick else { return Ok(None) };
        self.log.append(LogEvent::Assign {
            task_id: self.tasks[i].id().to_string(),
            worker_id: worker.to_string(),
        })?;
        self.apply_assign(i, worker);
        Ok(Some(self.tasks[i].clone()))
    }

    /// Validates, durably logs and applies a response; returns its sequence
    /// number.
    pub fn submit(&mut self, response: Response) -> Result<u64> {
        let i = self.task_index(response.task_id())?;
        let task = &self.tasks[i];
        if task.kind() != response.kind() {
            return Err(Error::invalid(format!(
                "{} response submitted for {} task {}",
                response.kind(),
                task.kind(),
                task.id()
            )));
        }
        let worker = response.worker_id();
        let ws = self.workers.get(worker);
        if ws.is_some_and(|ws| ws.answered.contains(&i)) {
            return Err(Error::Conflict(format!("worker {worker} already answered task {}", task.id())));
        }
        if !ws.is_some_and(|ws| ws.outstanding.contains(&i)) {
            return Err(Error::Protocol(format!("task {} is not assigned to worker {worker}", task.id())));
        }
        if let (Task::Grid(t), Response::Grid(g)) = (task, &response) {
            validate_selection(t, &g.selected)?;
            let mut sel = g.selected.clone();
            sel.sort();
            sel.dedup();
            if sel.len() != g.selected.len() {
                return Err(Error::invalid(format!("response to {} repeats a selection", t.id)));
            }
        }
        let entry = self.log.append(LogEvent::Response {
            response: response.clone(),
        })?;
        self.apply_response(i, response)?;
        Ok(entry.seq)
    }

    pub fn progress(&self) -> Progress {
        let regular: Vec<usize> = (0..self.tasks.len()).filter(|&i| !self.tasks[i].is_catch()).collect();
        Progress {
            tasks_total: regular.len(),
            retired: regular.iter().filter(|&&i| self.retired(i)).count(),
            responses: self.responses,
            workers: self.workers.len(),
        }
    }

    /// Level-ordered anchor photo ids of a room, when anchors are loaded.
    pub fn anchors(&self, room: RoomCategory) -> Option<&[String]> {
        self.anchors.get(&room).map(Vec::as_slice)
    }

    /// All responses in log order of acceptance per task.
    pub fn responses(&self) -> impl Iterator<Item = &Response> {
        self.answers.iter().flatten().map(|(_, r)| r)
    }
}
