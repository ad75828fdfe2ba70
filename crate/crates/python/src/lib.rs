//! Python bindings: synthetic worlds, the SVR, t-STE, k-means, the ablation
//! runner and the annotation service. Structured records cross the boundary
//! as JSON strings.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use luxappraise::annotation::{self, Response, ServiceConfig, Task, TaskKind};
use luxappraise::embedding::{self, IndexTriplet, TsteConfig};
use luxappraise::evaluation::{self, LabelSource, PipelineConfig};
use luxappraise::model::{Dataset, RoomCategory};
use luxappraise::synth::WorldConfig;
use luxappraise::valuation::{self, Mode, SvrModel, SvrParams};
use luxappraise::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotFound(_) => PyKeyError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A dataset of photos and houses.
#[pyclass(module = "luxappraise_py")]
struct World {
    inner: Dataset,
}

#[pymethods]
impl World {
    /// Generates a synthetic world; `config` is a JSON object of overrides.
    #[staticmethod]
    #[pyo3(signature = (seed=0, n_houses=None, luxury_price_weight=None, config=None))]
    fn generate(
        seed: u64,
        n_houses: Option<usize>,
        luxury_price_weight: Option<f64>,
        config: Option<&str>,
    ) -> PyResult<Self> {
        let mut cfg: WorldConfig = match config {
            Some(s) => serde_json::from_str(s).map_err(json_err)?,
            None => WorldConfig::default(),
        };
        cfg.seed = seed;
        if let Some(n) = n_houses {
            cfg.n_houses = n;
        }
        if let Some(w) = luxury_price_weight {
            cfg.luxury_price_weight = w;
        }
        Ok(World {
            inner: luxappraise::synth::generate_world(&cfg).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(World {
            inner: luxappraise::io::load_dataset_dir(&dir).map_err(py_err)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        luxappraise::io::save_dataset_dir(&self.inner, &dir).map_err(py_err)
    }

    #[getter]
    fn num_photos(&self) -> usize {
        self.inner.num_photos()
    }

    #[getter]
    fn num_houses(&self) -> usize {
        self.inner.num_houses()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    /// JSON of one photo record.
    fn photo(&self, id: &str) -> PyResult<String> {
        let p = self
            .inner
            .photo(id)
            .ok_or_else(|| PyKeyError::new_err(format!("photo {id}")))?;
        serde_json::to_string(p).map_err(json_err)
    }

    /// JSON of one house record.
    fn house(&self, id: &str) -> PyResult<String> {
        let h = self
            .inner
            .house(id)
            .ok_or_else(|| PyKeyError::new_err(format!("house {id}")))?;
        serde_json::to_string(h).map_err(json_err)
    }

    fn photo_ids(&self) -> Vec<String> {
        self.inner.photos().map(|p| p.id.clone()).collect()
    }

    fn house_ids(&self) -> Vec<String> {
        self.inner.houses().map(|h| h.id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "World(photos={}, houses={}, feature_dim={})",
            self.inner.num_photos(),
            self.inner.num_houses(),
            self.inner.feature_dim()
        )
    }
}

/// RBF epsilon-SVR.
#[pyclass(module = "luxappraise_py")]
struct Svr {
    inner: SvrModel,
}

#[pymethods]
impl Svr {
    #[staticmethod]
    #[pyo3(signature = (x, y, c=10.0, epsilon=0.01, gamma=None))]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, c: f64, epsilon: f64, gamma: Option<f64>) -> PyResult<Self> {
        let dim = x.first().map_or(1, Vec::len).max(1);
        let params = SvrParams {
            c,
            epsilon,
            gamma: gamma.unwrap_or(0.1 / dim as f64),
        };
        Ok(Svr {
            inner: valuation::svr_fit(&x, &y, &params).map_err(py_err)?,
        })
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        x.iter()
            .map(|r| valuation::svr_predict(&self.inner, r).map_err(py_err))
            .collect()
    }

    #[getter]
    fn n_support(&self) -> usize {
        self.inner.support_vectors.len()
    }

    #[getter]
    fn dual_coefs(&self) -> Vec<f64> {
        self.inner.dual_coefs.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

#[pyfunction]
fn median_error_rate(predictions: Vec<f64>, actuals: Vec<f64>) -> PyResult<f64> {
    evaluation::median_error_rate(&predictions, &actuals).map_err(py_err)
}

/// t-STE embedding of `n` points from index triplets (probe, similar, dissimilar).
#[pyfunction]
#[pyo3(signature = (triplets, n, dim=2, alpha=None, seed=0, max_iters=1000))]
fn tste_embed(
    triplets: Vec<IndexTriplet>,
    n: usize,
    dim: usize,
    alpha: Option<f64>,
    seed: u64,
    max_iters: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let config = TsteConfig {
        seed,
        max_iters,
        ..TsteConfig::default()
    };
    let alpha = alpha.unwrap_or_else(|| embedding::default_alpha(dim));
    Ok(embedding::tste_fit(&triplets, n, dim, alpha, &config).map_err(py_err)?.points)
}

#[pyfunction]
fn triplet_satisfaction(points: Vec<Vec<f64>>, triplets: Vec<IndexTriplet>) -> PyResult<f64> {
    embedding::triplet_satisfaction(&points, &triplets).map_err(py_err)
}

/// Returns `(assignments, centroids)`.
#[pyfunction]
#[pyo3(signature = (points, k, seed=0, max_iters=300))]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64, max_iters: usize) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let km = embedding::kmeans(&points, k, seed, max_iters).map_err(py_err)?;
    Ok((km.assignments, km.centroids))
}

fn parse_modes(modes: Vec<String>) -> PyResult<Vec<Mode>> {
    modes.iter().map(|m| m.parse().map_err(py_err)).collect()
}

/// Runs the ablation matrix with simulated labels; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (world, modes, seeds, config=None))]
fn run_ablation(py: Python<'_>, world: &World, modes: Vec<String>, seeds: Vec<u64>, config: Option<&str>) -> PyResult<String> {
    let modes = parse_modes(modes)?;
    let config: PipelineConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => PipelineConfig::default(),
    };
    let data = &world.inner;
    let report = py
        .detach(|| evaluation::run_ablation(data, &modes, &config, &LabelSource::Simulated, &seeds))
        .map_err(py_err)?;
    serde_json::to_string(&report).map_err(json_err)
}

/// Aligned text table of a JSON ablation report.
#[pyfunction]
fn render_table(report: &str) -> PyResult<String> {
    let report = serde_json::from_str(report).map_err(json_err)?;
    Ok(evaluation::render_table(&report))
}

/// Grid tasks as JSON lines, `count` per room plus catch trials.
#[pyfunction]
#[pyo3(signature = (world, rooms, count, catch_fraction=0.1, catch_threshold=1.0, seed=0))]
fn build_grid_tasks(
    world: &World,
    rooms: Vec<String>,
    count: usize,
    catch_fraction: f64,
    catch_threshold: f64,
    seed: u64,
) -> PyResult<Vec<String>> {
    let rooms = rooms
        .iter()
        .map(|r| r.parse::<RoomCategory>().map_err(py_err))
        .collect::<PyResult<Vec<_>>>()?;
    let tasks = annotation::build_grid_tasks(&world.inner, &rooms, count, catch_fraction, catch_threshold, seed)
        .map_err(py_err)?;
    tasks.iter().map(|t| serde_json::to_string(t).map_err(json_err)).collect()
}

/// Task queue backed by an append-only response log.
#[pyclass(module = "luxappraise_py")]
struct AnnotationService {
    inner: annotation::AnnotationService,
}

#[pymethods]
impl AnnotationService {
    /// `tasks` are JSON task records; the log is replayed when it exists.
    #[new]
    #[pyo3(signature = (tasks, log_path, required_responses=3, catch_fraction=0.1, seed=0))]
    fn new(
        tasks: Vec<String>,
        log_path: PathBuf,
        required_responses: usize,
        catch_fraction: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let tasks = tasks
            .iter()
            .map(|t| serde_json::from_str::<Task>(t).map_err(json_err))
            .collect::<PyResult<Vec<_>>>()?;
        let config = ServiceConfig {
            required_responses,
            catch_fraction,
            seed,
        };
        Ok(AnnotationService {
            inner: annotation::AnnotationService::open(tasks, &log_path, config).map_err(py_err)?,
        })
    }

    /// JSON of the next task for `worker`, or None when nothing is left.
    #[pyo3(signature = (worker, kind="grid", room=None))]
    fn next_task(&mut self, worker: &str, kind: &str, room: Option<&str>) -> PyResult<Option<String>> {
        let kind: TaskKind = kind.parse().map_err(py_err)?;
        let room = room.map(|r| r.parse::<RoomCategory>().map_err(py_err)).transpose()?;
        self.inner
            .next_task(worker, kind, room)
            .map_err(py_err)?
            .map(|t| serde_json::to_string(&t).map_err(json_err))
            .transpose()
    }

    /// Submits a JSON response; returns its log sequence number.
    fn submit(&mut self, response: &str) -> PyResult<u64> {
        let r: Response = serde_json::from_str(response).map_err(json_err)?;
        self.inner.submit(r).map_err(py_err)
    }

    /// `{"tasks_total", "retired", "responses", "workers"}`.
    fn progress(&self) -> BTreeMap<&'static str, usize> {
        let p = self.inner.progress();
        BTreeMap::from([
            ("tasks_total", p.tasks_total),
            ("retired", p.retired),
            ("responses", p.responses),
            ("workers", p.workers),
        ])
    }
}

/// A simulated annotator's JSON answer to a JSON task.
#[pyfunction]
#[pyo3(signature = (task, world, worker, seed=0))]
fn simulate_response(task: &str, world: &World, worker: &str, seed: u64) -> PyResult<String> {
    let task: Task = serde_json::from_str(task).map_err(json_err)?;
    let model = luxappraise::synth::AnnotatorModel::default();
    let r = annotation::simulate_response(&task, &world.inner, &model, worker, seed).map_err(py_err)?;
    serde_json::to_string(&r).map_err(json_err)
}

#[pymodule]
fn luxappraise_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<World>()?;
    m.add_class::<Svr>()?;
    m.add_class::<AnnotationService>()?;
    m.add_function(wrap_pyfunction!(median_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(tste_embed, m)?)?;
    m.add_function(wrap_pyfunction!(triplet_satisfaction, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(run_ablation, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    m.add_function(wrap_pyfunction!(build_grid_tasks, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_response, m)?)?;
    Ok(())
}
