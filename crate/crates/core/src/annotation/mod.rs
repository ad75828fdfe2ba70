//! Task serving for live or simulated annotators: a durable response log,
//! the assignment queue built on it, and export of the collected answers.

mod export;
mod log;
mod queue;
mod tasks;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crowd::{AnchorResponse, AnchorTask, GridResponse, GridTask};
use crate::error::{Error, Result};
use crate::model::{Dataset, RoomCategory};
use crate::rng::derive_seed;
use crate::synth::{simulate_anchor_response, simulate_grid_response, AnnotatorModel};

pub use export::{
    export_annotations, export_from_responses, simulate_direct, write_export, Export, LabelRecord, LABELS_FILE,
    TRIPLETS_FILE, WORKERS_FILE,
};
pub use log::{LogEntry, LogEvent, ResponseLog};
pub use queue::{AnnotationService, Progress, ServiceConfig};
pub use tasks::{build_anchor_tasks, build_grid_tasks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Grid,
    Anchor,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Grid => "grid",
            TaskKind::Anchor => "anchor",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(TaskKind::Grid),
            "anchor" => Ok(TaskKind::Anchor),
            other => Err(Error::Protocol(format!("unknown task kind {other:?}"))),
        }
    }
}

/// One line of a task file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Grid(GridTask),
    Anchor(AnchorTask),
}

impl Task {
    pub fn id(&self) -> &str {
        match self {
            Task::Grid(t) => &t.id,
            Task::Anchor(t) => &t.id,
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Grid(_) => TaskKind::Grid,
            Task::Anchor(_) => TaskKind::Anchor,
        }
    }

    pub fn room(&self) -> RoomCategory {
        match self {
            Task::Grid(t) => t.room,
            Task::Anchor(t) => t.room,
        }
    }

    pub fn is_catch(&self) -> bool {
        match self {
            Task::Grid(t) => t.is_catch,
            Task::Anchor(t) => t.is_catch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Task::Grid(t) => t.validate(),
            Task::Anchor(t) => t.validate(),
        }
    }
}

/// One submitted answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Grid(GridResponse),
    Anchor(AnchorResponse),
}

impl Response {
    pub fn task_id(&self) -> &str {
        match self {
            Response::Grid(r) => &r.task_id,
            Response::Anchor(r) => &r.task_id,
        }
    }

    pub fn worker_id(&self) -> &str {
        match self {
            Response::Grid(r) => &r.worker_id,
            Response::Anchor(r) => &r.worker_id,
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Response::Grid(_) => TaskKind::Grid,
            Response::Anchor(_) => TaskKind::Anchor,
        }
    }
}

/// Seed for one simulated worker's answer to one task.
pub fn simulation_seed(seed: u64, worker_id: &str, task_id: &str) -> u64 {
    derive_seed(derive_seed(seed, worker_id), task_id)
}

/// A simulated worker's answer to `task`, seeded by [`simulation_seed`].
pub fn simulate_response(
    task: &Task,
    dataset: &Dataset,
    model: &AnnotatorModel,
    worker_id: &str,
    seed: u64,
) -> Result<Response> {
    let s = simulation_seed(seed, worker_id, task.id());
    Ok(match task {
        Task::Grid(t) => Response::Grid(simulate_grid_response(t, dataset, model, worker_id, s)?),
        Task::Anchor(t) => {
            let photo = dataset
                .photo(&t.probe)
                .ok_or_else(|| Error::NotFound(format!("photo {}", t.probe)))?;
            Response::Anchor(simulate_anchor_response(&t.id, photo, model, worker_id, s)?)
        }
    })
}
