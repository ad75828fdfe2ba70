//! Median error rate, the end-to-end training pipeline for each
//! representation mode, the ablation matrix and its report.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::annotation::simulation_seed;
use crate::classifiers::{softmax_predict, softmax_train, SoftmaxConfig, SoftmaxModel};
use crate::crowd::{
    aggregate_anchor_labels, build_strata_with, extract_triplets, make_anchor_task, make_grid_task, median,
};
use crate::embedding::{
    default_alpha, embed_photos, kmeans, luxury_proxy, select_anchors, triplet_photo_ids, AnchorSet, TsteConfig,
};
use crate::error::{Error, Result};
use crate::model::{Dataset, HouseRecord, LuxuryLevel, PhotoRecord, RoomCategory, Split};
use crate::rng::{derive_seed, derive_seed_idx, rng};
use crate::synth::{simulate_anchor_response, simulate_grid_response, AnnotatorModel};
use crate::valuation::{
    aggregate_house_luxury, build_representation, fit_normalizer, svr_fit, svr_predict, tune_hyperparams, Mode,
    Normalizer, ParamGrid, SvrParams, ValuationModel, VisualSignal, NO_PHOTO_LUXURY,
};

/// Median over houses of `|prediction - actual| / actual`; the mean of the
/// two middle values for even counts.
pub fn median_error_rate(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != actuals.len() {
        return Err(Error::invalid(format!(
            "median error rate needs equal non-empty lists, got {} predictions and {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    let mut errors = Vec::with_capacity(actuals.len());
    for (p, a) in predictions.iter().zip(actuals) {
        if !(*a > 0.0) || !a.is_finite() || !p.is_finite() {
            return Err(Error::invalid(format!(
                "purchase price {a} must be positive and prediction {p} finite"
            )));
        }
        errors.push((p - a).abs() / a);
    }
    Ok(median(&errors))
}

/// SVR settings shared by all modes; gamma scales with `1 / input dim`.
/// The defaults minimize mean 5-fold CV median error across the four modes
/// on a calibration world (seed 1000) over the default grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrSettings {
    pub c: f64,
    pub epsilon: f64,
    pub gamma_per_dim: f64,
}

impl Default for SvrSettings {
    fn default() -> Self {
        SvrSettings {
            c: 100.0,
            epsilon: 0.01,
            gamma_per_dim: 0.01,
        }
    }
}

impl SvrSettings {
    pub fn params(&self, dim: usize) -> SvrParams {
        SvrParams {
            c: self.c,
            epsilon: self.epsilon,
            gamma: self.gamma_per_dim / dim.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub grid: ParamGrid,
    pub folds: usize,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            grid: ParamGrid::default(),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub annotator: AnnotatorModel,
    pub workers_per_task: usize,
    pub grid_tasks_per_room: usize,
    /// Photos per room sent to simulated anchor classification.
    pub labels_per_room: usize,
    pub embedding_dim: usize,
    pub tste: TsteConfig,
    /// Cap on photos used to fit the room classifier.
    pub room_train_photos: usize,
    pub softmax: SoftmaxConfig,
    pub svr: SvrSettings,
    /// When set, SVR parameters are chosen by cross-validation per mode.
    pub tune: Option<TuneSettings>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            annotator: AnnotatorModel::default(),
            workers_per_task: 3,
            grid_tasks_per_room: 60,
            labels_per_room: 600,
            embedding_dim: 2,
            tste: TsteConfig::default(),
            room_train_photos: 5000,
            softmax: SoftmaxConfig::default(),
            svr: SvrSettings::default(),
            tune: None,
        }
    }
}

/// Where luxury labels for classifier training come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSource {
    /// Simulated crowd elicitation on the training view.
    Simulated,
    /// Externally collected labels; entries for photos outside the training
    /// view are ignored.
    Provided(BTreeMap<String, LuxuryLevel>),
}

/// The part of a dataset a pipeline may learn from: train houses, their
/// photos and photos attached to no house.
pub fn train_view(dataset: &Dataset) -> Result<Dataset> {
    let houses: Vec<HouseRecord> = dataset.houses_in(Split::Train).cloned().collect();
    if houses.is_empty() {
        return Err(Error::invalid("dataset has no train split"));
    }
    let photos: Vec<PhotoRecord> = dataset
        .photos()
        .filter(|p| {
            p.house_id
                .as_deref()
                .is_none_or(|h| dataset.house(h).is_some_and(|h| h.split == Split::Train))
        })
        .cloned()
        .collect();
    Dataset::new(photos, houses)
}

pub fn room_classes() -> Vec<String> {
    RoomCategory::ALL.iter().map(|r| r.to_string()).collect()
}

/// Softmax over the 7 room categories from photos carrying `room_true`.
/// At most `cap` photos are used, drawn by a seeded shuffle of id order.
pub fn train_room_classifier(
    photos: &[&PhotoRecord],
    cap: usize,
    config: &SoftmaxConfig,
) -> Result<SoftmaxModel> {
    let mut usable: Vec<&PhotoRecord> = photos.iter().copied().filter(|p| p.room_true.is_some()).collect();
    usable.sort_by(|a, b| a.id.cmp(&b.id));
    usable.shuffle(&mut rng(derive_seed(config.seed, "room-sample")));
    usable.truncate(cap);
    let features: Vec<Vec<f64>> = usable.iter().map(|p| p.features.clone()).collect();
    let labels: Vec<usize> = usable
        .iter()
        .map(|p| p.room_true.expect("filtered").index())
        .collect();
    softmax_train(&features, &labels, room_classes(), config)
}

pub fn predict_room(model: &SoftmaxModel, photo: &PhotoRecord) -> Result<RoomCategory> {
    let (k, _) = softmax_predict(model, &photo.features)?;
    model.classes[k].parse()
}

/// Softmax over the luxury levels present in `labeled`; class names are the
/// level numbers.
pub fn train_luxury_classifier(
    labeled: &[(&PhotoRecord, LuxuryLevel)],
    config: &SoftmaxConfig,
) -> Result<SoftmaxModel> {
    let mut levels: Vec<LuxuryLevel> = labeled.iter().map(|(_, l)| *l).collect();
    levels.sort();
    levels.dedup();
    let classes: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
    let features: Vec<Vec<f64>> = labeled.iter().map(|(p, _)| p.features.clone()).collect();
    let labels: Vec<usize> = labeled
        .iter()
        .map(|(_, l)| levels.binary_search(l).expect("level collected above"))
        .collect();
    softmax_train(&features, &labels, classes, config)
}

pub fn predict_level(model: &SoftmaxModel, photo: &PhotoRecord) -> Result<LuxuryLevel> {
    let (k, _) = softmax_predict(model, &photo.features)?;
    let level: u8 = model.classes[k]
        .parse()
        .map_err(|_| Error::invalid(format!("luxury class {:?} is not a level", model.classes[k])))?;
    LuxuryLevel::new(level)
}

/// Luxury classifiers for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct LuxuryModels {
    pub per_room: BTreeMap<RoomCategory, SoftmaxModel>,
    pub global: SoftmaxModel,
}

/// One line of a luxury model file; `room` is absent for the global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuxuryModelRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<RoomCategory>,
    pub model: SoftmaxModel,
}

impl LuxuryModels {
    /// Global model first, then rooms in category order.
    pub fn to_records(&self) -> Vec<LuxuryModelRecord> {
        let mut out = vec![LuxuryModelRecord {
            room: None,
            model: self.global.clone(),
        }];
        out.extend(self.per_room.iter().map(|(&room, model)| LuxuryModelRecord {
            room: Some(room),
            model: model.clone(),
        }));
        out
    }

    pub fn from_records(records: Vec<LuxuryModelRecord>) -> Result<Self> {
        let mut global = None;
        let mut per_room = BTreeMap::new();
        for r in records {
            r.model.validate()?;
            let duplicate = match r.room {
                None => global.replace(r.model).is_some(),
                Some(room) => per_room.insert(room, r.model).is_some(),
            };
            if duplicate {
                return Err(Error::invalid(format!(
                    "luxury model for {} listed twice",
                    r.room.map_or("all rooms".to_string(), |r| r.to_string())
                )));
            }
        }
        let global = global.ok_or_else(|| Error::invalid("luxury model file has no global model"))?;
        Ok(LuxuryModels { per_room, global })
    }
}

/// Output of simulated crowd elicitation on a training view.
#[derive(Debug, Clone, PartialEq)]
pub struct Elicitation {
    pub anchors: BTreeMap<RoomCategory, AnchorSet>,
    pub labels: BTreeMap<String, LuxuryLevel>,
    pub triplet_count: usize,
}

fn worker_ids(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("sim-{k:02}")).collect()
}

/// Grid tasks, simulated responses, t-STE, k-means anchors, then simulated
/// anchor classification of a per-room photo sample.
pub fn simulate_elicitation<F>(
    view: &Dataset,
    room_of: F,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Elicitation>
where
    F: Fn(&PhotoRecord) -> Option<RoomCategory>,
{
    let strata = build_strata_with(view, &room_of)?;
    let workers = worker_ids(config.workers_per_task);
    let proxy_of = luxury_proxy(view);
    let proxy = |id: &str| view.photo(id).and_then(&proxy_of);
    let mut anchors = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut triplet_count = 0;
    let mut by_room: BTreeMap<RoomCategory, Vec<&PhotoRecord>> = BTreeMap::new();
    for p in view.photos() {
        if let Some(room) = room_of(p) {
            by_room.entry(room).or_default().push(p);
        }
    }
    let grid_seed = derive_seed(seed, "grid-tasks");
    let response_seed = derive_seed(seed, "responses");
    for room in RoomCategory::ALL {
        let mut triplets = Vec::new();
        for t in 0..config.grid_tasks_per_room {
            let task = make_grid_task(&strata, room, derive_seed_idx(grid_seed, room.as_str(), t as u64))?;
            for w in &workers {
                let s = simulation_seed(response_seed, w, &task.id);
                let resp = simulate_grid_response(&task, view, &config.annotator, w, s)?;
                triplets.extend(extract_triplets(&task, &resp)?);
            }
        }
        triplet_count += triplets.len();
        let ids = triplet_photo_ids(&triplets);
        let tste = TsteConfig {
            seed: derive_seed_idx(seed, "tste", room.index() as u64),
            ..config.tste
        };
        let emb = embed_photos(ids, &triplets, config.embedding_dim, default_alpha(config.embedding_dim), &tste)?;
        let km = kmeans(
            &emb.points,
            crate::crowd::ANCHOR_COUNT,
            derive_seed_idx(seed, "kmeans", room.index() as u64),
            300,
        )?;
        let set = select_anchors(&emb, &km.assignments, &km.centroids, proxy, room)?;

        let mut candidates: Vec<&PhotoRecord> = by_room
            .get(&room)
            .map(|v| v.iter().copied().filter(|p| !set.anchors.contains(&p.id)).collect())
            .unwrap_or_default();
        candidates.shuffle(&mut rng(derive_seed_idx(seed, "label-sample", room.index() as u64)));
        candidates.truncate(config.labels_per_room);
        for p in candidates {
            let task = make_anchor_task(&p.id, &set, derive_seed(seed, "anchor-tasks"))?;
            let responses = workers
                .iter()
                .map(|w| {
                    simulate_anchor_response(&task.id, p, &config.annotator, w, simulation_seed(response_seed, w, &task.id))
                })
                .collect::<Result<Vec<_>>>()?;
            labels.insert(p.id.clone(), aggregate_anchor_labels(&responses)?);
        }
        anchors.insert(room, set);
    }
    Ok(Elicitation {
        anchors,
        labels,
        triplet_count,
    })
}

/// Per-room luxury models over labeled photos grouped by `room_of`, plus one
/// global model over all of them. Rooms with fewer than 2 label levels get
/// no dedicated model and fall back to the global one.
pub fn train_luxury_models<F>(
    view: &Dataset,
    labels: &BTreeMap<String, LuxuryLevel>,
    room_of: F,
    config: &SoftmaxConfig,
) -> Result<LuxuryModels>
where
    F: Fn(&PhotoRecord) -> Option<RoomCategory>,
{
    let mut all = Vec::new();
    let mut by_room: BTreeMap<RoomCategory, Vec<(&PhotoRecord, LuxuryLevel)>> = BTreeMap::new();
    for (id, &level) in labels {
        let Some(p) = view.photo(id) else { continue };
        all.push((p, level));
        if let Some(room) = room_of(p) {
            by_room.entry(room).or_default().push((p, level));
        }
    }
    if all.is_empty() {
        return Err(Error::invalid("no luxury labels refer to photos in the training data"));
    }
    let global = train_luxury_classifier(&all, config)?;
    let mut per_room = BTreeMap::new();
    for (room, items) in by_room {
        let distinct = items
            .iter()
            .map(|(_, l)| *l)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        if distinct >= 2 && items.len() >= distinct {
            per_room.insert(room, train_luxury_classifier(&items, config)?);
        }
    }
    Ok(LuxuryModels { per_room, global })
}

/// Models shared by every mode of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotoModels {
    pub room: SoftmaxModel,
    pub luxury: LuxuryModels,
}

/// Trains the room classifier and luxury models on the training view.
pub fn train_photo_models(
    view: &Dataset,
    labels: &LabelSource,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PhotoModels> {
    let softmax = SoftmaxConfig {
        seed: derive_seed(seed, "room-classifier"),
        ..config.softmax
    };
    let house_photos: Vec<&PhotoRecord> = view.photos().filter(|p| p.house_id.is_some()).collect();
    let room = train_room_classifier(&house_photos, config.room_train_photos, &softmax)?;
    let predicted: HashMap<&str, RoomCategory> = view
        .photos()
        .filter(|p| p.room_true.is_none())
        .map(|p| Ok((p.id.as_str(), predict_room(&room, p)?)))
        .collect::<Result<_>>()?;
    let room_of = |p: &PhotoRecord| p.room_true.or_else(|| predicted.get(p.id.as_str()).copied());
    let simulated;
    let labels = match labels {
        LabelSource::Provided(map) => map,
        LabelSource::Simulated => {
            simulated = simulate_elicitation(view, room_of, config, seed)?.labels;
            &simulated
        }
    };
    let lux_cfg = SoftmaxConfig {
        seed: derive_seed(seed, "luxury-classifier"),
        ..config.softmax
    };
    let luxury = train_luxury_models(view, labels, room_of, &lux_cfg)?;
    Ok(PhotoModels { room, luxury })
}

/// Representation of every house in `houses` for `mode`.
pub fn house_vectors(
    dataset: &Dataset,
    houses: &[&HouseRecord],
    mode: Mode,
    normalizer: &Normalizer,
    models: Option<&PhotoModels>,
) -> Result<Vec<Vec<f64>>> {
    let need_models = || {
        models.ok_or_else(|| Error::invalid(format!("mode {mode} needs room and luxury classifiers")))
    };
    let photo = |id: &str| {
        dataset
            .photo(id)
            .ok_or_else(|| Error::NotFound(format!("photo {id}")))
    };
    let mut out = Vec::with_capacity(houses.len());
    for house in houses {
        let rep = match mode {
            Mode::MetadataOnly => build_representation(house, normalizer, mode, VisualSignal::None)?,
            Mode::Full => {
                let m = need_models()?;
                let mut levels = HashMap::new();
                for pid in &house.photo_ids {
                    let p = photo(pid)?;
                    let room = predict_room(&m.room, p)?;
                    let model = m.luxury.per_room.get(&room).unwrap_or(&m.luxury.global);
                    levels.insert(pid.clone(), (room, predict_level(model, p)?));
                }
                let lux = aggregate_house_luxury(house, &levels)?;
                build_representation(house, normalizer, mode, VisualSignal::RoomLuxury(&lux))?
            }
            Mode::NoRoomClassifier => {
                let m = need_models()?;
                let mut sum = 0.0;
                for pid in &house.photo_ids {
                    sum += f64::from(predict_level(&m.luxury.global, photo(pid)?)?.get());
                }
                let pooled = if house.photo_ids.is_empty() {
                    NO_PHOTO_LUXURY
                } else {
                    sum / house.photo_ids.len() as f64
                };
                build_representation(house, normalizer, mode, VisualSignal::PooledLuxury(pooled))?
            }
            Mode::DirectRegression => {
                let feats = house
                    .photo_ids
                    .iter()
                    .map(|pid| photo(pid).map(|p| p.features.as_slice()))
                    .collect::<Result<Vec<_>>>()?;
                build_representation(
                    house,
                    normalizer,
                    mode,
                    VisualSignal::PhotoFeatures {
                        features: &feats,
                        dim: dataset.feature_dim(),
                    },
                )?
            }
        };
        out.push(rep.vector);
    }
    Ok(out)
}

/// Fits the normalizer and SVR for `mode` on the training view's houses.
pub fn train_valuation(
    view: &Dataset,
    mode: Mode,
    models: Option<&PhotoModels>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ValuationModel> {
    let houses: Vec<&HouseRecord> = view.houses_in(Split::Train).collect();
    let mut prices = Vec::with_capacity(houses.len());
    for h in &houses {
        prices.push(
            h.purchase_price
                .ok_or_else(|| Error::invalid(format!("train house {} has no purchase_price", h.id)))?,
        );
    }
    let metadata: Vec<_> = houses.iter().map(|h| h.metadata.clone()).collect();
    let normalizer = fit_normalizer(&metadata)?;
    let x = house_vectors(view, &houses, mode, &normalizer, models)?;
    let dim = x.first().map_or(0, Vec::len);
    let params = match &config.tune {
        Some(t) => tune_hyperparams(&x, &prices, &t.grid, t.folds, derive_seed(seed, "tune"))?.best,
        None => config.svr.params(dim),
    };
    let svr = svr_fit(&x, &prices, &params)?;
    Ok(ValuationModel { mode, normalizer, svr })
}

pub fn predict_prices(
    dataset: &Dataset,
    houses: &[&HouseRecord],
    model: &ValuationModel,
    photo_models: Option<&PhotoModels>,
) -> Result<Vec<f64>> {
    house_vectors(dataset, houses, model.mode, &model.normalizer, photo_models)?
        .iter()
        .map(|x| svr_predict(&model.svr, x))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: Mode,
    /// Median across seeds of the per-seed median error rates.
    pub median_error_rate: f64,
    pub per_seed: Vec<f64>,
    pub test_count: usize,
    /// Seeds whose SVR stopped at the iteration cap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unconverged_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub median_error_rate: f64,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// Unix seconds, filled in by the caller.
    pub generated_at: Option<u64>,
    pub seeds: Vec<u64>,
    pub rows: Vec<ModeRow>,
    pub baseline: BaselineRow,
    pub config: PipelineConfig,
}

impl AblationReport {
    pub fn row(&self, mode: Mode) -> Option<&ModeRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }
}

/// Trains each mode per seed on the train split and scores the test split.
/// Rows follow the order of `modes`.
pub fn run_ablation(
    dataset: &Dataset,
    modes: &[Mode],
    config: &PipelineConfig,
    labels: &LabelSource,
    seeds: &[u64],
) -> Result<AblationReport> {
    if modes.is_empty() {
        return Err(Error::invalid("ablation needs at least one mode"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("ablation needs at least one seed"));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(m) = modes.iter().find(|m| !seen.insert(**m)) {
        return Err(Error::invalid(format!("mode {m} requested twice")));
    }
    let test: Vec<&HouseRecord> = dataset.houses_in(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::invalid("dataset has no test split"));
    }
    let mut actual = Vec::with_capacity(test.len());
    for h in &test {
        actual.push(
            h.purchase_price
                .ok_or_else(|| Error::invalid(format!("test house {} has no purchase_price", h.id)))?,
        );
    }
    let zestimates: Vec<f64> = test.iter().map(|h| h.metadata.zestimate).collect();
    let baseline = BaselineRow {
        median_error_rate: median_error_rate(&zestimates, &actual)?,
        test_count: test.len(),
    };

    let view = train_view(dataset)?;
    let needs_models = modes.iter().any(|m| matches!(m, Mode::Full | Mode::NoRoomClassifier));
    let mut per_mode: Vec<(Vec<f64>, Vec<u64>)> = vec![(Vec::new(), Vec::new()); modes.len()];
    for &seed in seeds {
        let models = if needs_models {
            Some(train_photo_models(&view, labels, config, seed)?)
        } else {
            None
        };
        for (slot, &mode) in per_mode.iter_mut().zip(modes) {
            let model = train_valuation(&view, mode, models.as_ref(), config, seed)?;
            let preds = predict_prices(dataset, &test, &model, models.as_ref())?;
            slot.0.push(median_error_rate(&preds, &actual)?);
            if !model.svr.converged {
                slot.1.push(seed);
            }
        }
    }
    let rows = modes
        .iter()
        .zip(per_mode)
        .map(|(&mode, (per_seed, unconverged_seeds))| ModeRow {
            mode,
            median_error_rate: median(&per_seed),
            per_seed,
            test_count: test.len(),
            unconverged_seeds,
        })
        .collect();
    Ok(AblationReport {
        generated_at: None,
        seeds: seeds.to_vec(),
        rows,
        baseline,
        config: config.clone(),
    })
}

fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Full => "Full pipeline (room + luxury)",
        Mode::MetadataOnly => "Metadata only",
        Mode::NoRoomClassifier => "No room classifier",
        Mode::DirectRegression => "Direct regression",
    }
}

/// Reference median error rates measured at full data scale.
const REFERENCE: [(&str, f64); 5] = [
    ("Zestimate", 0.079),
    ("full pipeline", 0.058),
    ("metadata only", 0.080),
    ("no room classifier", 0.067),
    ("direct regression", 0.066),
];

/// Path of the machine-readable records written next to a report table.
pub fn records_path(table_path: &Path) -> PathBuf {
    table_path.with_extension("jsonl")
}

pub fn render_table(report: &AblationReport) -> String {
    let seeds = report.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let mut lines = vec![(
        "Zestimate (baseline)".to_string(),
        report.baseline.median_error_rate,
        report.baseline.test_count,
        String::new(),
    )];
    for r in &report.rows {
        let note = if r.unconverged_seeds.is_empty() { "" } else { " *" };
        lines.push((
            format!("{}{note}", mode_label(r.mode)),
            r.median_error_rate,
            r.test_count,
            seeds.clone(),
        ));
    }
    let width = lines.iter().map(|l| l.0.len()).max().unwrap_or(0).max("Method".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>17}  {:>10}  Seeds", "Method", "Median error rate", "Test houses");
    let _ = writeln!(out, "{}", "-".repeat(width + 2 + 17 + 2 + 11 + 2 + 5));
    for (name, err, count, s) in &lines {
        let _ = writeln!(out, "{name:<width$}  {:>16.2}%  {count:>11}  {s}", err * 100.0);
    }
    out.push('\n');
    if report.rows.iter().any(|r| !r.unconverged_seeds.is_empty()) {
        out.push_str("* SVR hit the iteration cap for at least one seed.\n");
    }
    let refs = REFERENCE
        .iter()
        .map(|(n, v)| format!("{n} {:.1}%", v * 100.0))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "Full-scale reference values: {refs}.");
    if let Some(t) = report.generated_at {
        let _ = writeln!(out, "Generated at unix time {t}.");
    }
    out
}

/// Writes the aligned table to `path` and one JSON record per row (baseline
/// first) plus a trailing summary record to [`records_path`].
pub fn emit_report(report: &AblationReport, path: &Path) -> Result<()> {
    let table = render_table(report);
    std::fs::write(path, table).map_err(|e| Error::io(path, e))?;
    #[derive(Serialize)]
    #[serde(tag = "record", rename_all = "snake_case")]
    enum Line<'a> {
        Baseline(&'a BaselineRow),
        Mode(&'a ModeRow),
        Summary {
            generated_at: Option<u64>,
            seeds: &'a [u64],
            config: &'a PipelineConfig,
        },
    }
    let mut lines = vec![Line::Baseline(&report.baseline)];
    lines.extend(report.rows.iter().map(Line::Mode));
    lines.push(Line::Summary {
        generated_at: report.generated_at,
        seeds: &report.seeds,
        config: &report.config,
    });
    crate::io::write_records(&records_path(path), lines.iter())
}
