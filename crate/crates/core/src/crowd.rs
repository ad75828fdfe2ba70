//! Crowdsourcing protocol: stratified grid tasks, triplet extraction, anchor
//! classification tasks, label aggregation and catch-trial scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::AnchorSet;
use crate::error::{Error, Result};
use crate::model::{Dataset, LuxuryLevel, PhotoRecord, RoomCategory, Source, Triplet};
use crate::rng::{derive_seed_idx, rng};

pub const GRID_GALLERY_SIZE: usize = 9;
pub const ANCHOR_COUNT: usize = 8;
/// Workers whose catch-trial pass fraction falls below this are excluded.
pub const RELIABILITY_THRESHOLD: f64 = 0.8;
/// Minimum distance between a catch-grid gallery photo's latent distance and
/// the similarity threshold, so that catch keys are unambiguous.
pub const CATCH_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTask {
    pub id: String,
    pub probe: String,
    pub gallery: Vec<String>,
    pub room: RoomCategory,
    #[serde(default)]
    pub is_catch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catch_expected: Option<Vec<String>>,
}

impl GridTask {
    pub fn validate(&self) -> Result<()> {
        if self.gallery.len() != GRID_GALLERY_SIZE {
            return Err(Error::invalid(format!(
                "grid task {}: gallery has {} photos, expected {GRID_GALLERY_SIZE}",
                self.id,
                self.gallery.len()
            )));
        }
        let distinct: BTreeSet<&str> = self.gallery.iter().map(String::as_str).collect();
        if distinct.len() != GRID_GALLERY_SIZE || distinct.contains(self.probe.as_str()) {
            return Err(Error::invalid(format!(
                "grid task {}: probe and gallery photos must be distinct",
                self.id
            )));
        }
        if let Some(expected) = &self.catch_expected {
            if let Some(x) = expected.iter().find(|e| !distinct.contains(e.as_str())) {
                return Err(Error::invalid(format!(
                    "grid task {}: catch key {x} is not in the gallery",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridResponse {
    pub task_id: String,
    pub worker_id: String,
    pub selected: Vec<String>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorTask {
    pub id: String,
    pub probe: String,
    /// Anchor photo ids for levels 1..=8, in level order.
    pub anchors: Vec<String>,
    pub room: RoomCategory,
    #[serde(default)]
    pub is_catch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catch_expected: Option<LuxuryLevel>,
}

impl AnchorTask {
    pub fn validate(&self) -> Result<()> {
        let distinct: BTreeSet<&str> = self.anchors.iter().map(String::as_str).collect();
        if self.anchors.len() != ANCHOR_COUNT || distinct.len() != ANCHOR_COUNT {
            return Err(Error::invalid(format!(
                "anchor task {}: needs {ANCHOR_COUNT} distinct anchors",
                self.id
            )));
        }
        if distinct.contains(self.probe.as_str()) {
            return Err(Error::invalid(format!(
                "anchor task {}: probe {} is one of its anchors",
                self.id, self.probe
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorResponse {
    pub task_id: String,
    pub worker_id: String,
    pub level: LuxuryLevel,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stratum {
    ZillowLow,
    ZillowHigh,
    Houzz(u8),
    Places,
    Google,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::ZillowLow => f.write_str("zillow_low"),
            Stratum::ZillowHigh => f.write_str("zillow_high"),
            Stratum::Houzz(b) => write!(f, "houzz_b{b}"),
            Stratum::Places => f.write_str("places"),
            Stratum::Google => f.write_str("google"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoomStrata {
    pub zillow_low: Vec<String>,
    pub zillow_high: Vec<String>,
    /// Houzz photos by budget level 1..=4.
    pub houzz: [Vec<String>; 4],
    pub places: Vec<String>,
    pub google: Vec<String>,
}

impl RoomStrata {
    pub fn get(&self, stratum: Stratum) -> &[String] {
        match stratum {
            Stratum::ZillowLow => &self.zillow_low,
            Stratum::ZillowHigh => &self.zillow_high,
            Stratum::Houzz(b) => &self.houzz[usize::from(b - 1)],
            Stratum::Places => &self.places,
            Stratum::Google => &self.google,
        }
    }
}

/// Grid sampling recipe: (stratum, photos drawn). Totals 10 photos.
pub const GRID_RECIPE: [(Stratum, usize); 8] = [
    (Stratum::ZillowLow, 1),
    (Stratum::ZillowHigh, 1),
    (Stratum::Houzz(1), 1),
    (Stratum::Houzz(2), 1),
    (Stratum::Houzz(3), 1),
    (Stratum::Houzz(4), 1),
    (Stratum::Places, 2),
    (Stratum::Google, 2),
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrataIndex {
    pub rooms: BTreeMap<RoomCategory, RoomStrata>,
}

impl StrataIndex {
    pub fn room(&self, room: RoomCategory) -> Option<&RoomStrata> {
        self.rooms.get(&room)
    }
}

/// Median of a non-empty slice; mean of the two middle values for even counts.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Buckets photos by source stratum within each room, using `room_true`.
pub fn build_strata(dataset: &Dataset) -> Result<StrataIndex> {
    build_strata_with(dataset, |p| p.room_true)
}

/// Like [`build_strata`] with a caller-supplied room assignment; photos
/// without a room are skipped.
pub fn build_strata_with<F>(dataset: &Dataset, room_of: F) -> Result<StrataIndex>
where
    F: Fn(&PhotoRecord) -> Option<RoomCategory>,
{
    let mut zillow_house_of = BTreeMap::new();
    for p in dataset.photos().filter(|p| p.source == Source::Zillow) {
        let house = p
            .house_id
            .as_deref()
            .and_then(|h| dataset.house(h))
            .ok_or_else(|| Error::invalid(format!("zillow photo {} has no resolvable house", p.id)))?;
        zillow_house_of.insert(p.id.as_str(), house);
    }
    let zillow_houses: BTreeMap<&str, f64> = zillow_house_of
        .values()
        .map(|h| (h.id.as_str(), h.metadata.price_mean()))
        .collect();
    let threshold = if zillow_houses.is_empty() {
        f64::INFINITY
    } else {
        median(&zillow_houses.values().copied().collect::<Vec<_>>())
    };

    let mut index = StrataIndex::default();
    for p in dataset.photos() {
        let Some(room) = room_of(p) else { continue };
        let strata = index.rooms.entry(room).or_default();
        match p.source {
            Source::Zillow => {
                if zillow_house_of[p.id.as_str()].metadata.price_mean() > threshold {
                    strata.zillow_high.push(p.id.clone());
                } else {
                    strata.zillow_low.push(p.id.clone());
                }
            }
            Source::Houzz => {
                let b = p.budget_level.ok_or_else(|| {
                    Error::invalid(format!("houzz photo {} has no budget_level", p.id))
                })?;
                strata.houzz[usize::from(b - 1)].push(p.id.clone());
            }
            Source::Places => strata.places.push(p.id.clone()),
            Source::Google => strata.google.push(p.id.clone()),
            Source::Synthetic => {}
        }
    }
    Ok(index)
}

fn draw_grid_photos(strata: &StrataIndex, room: RoomCategory, r: &mut crate::rng::Rng) -> Result<Vec<String>> {
    let empty = RoomStrata::default();
    let rs = strata.room(room).unwrap_or(&empty);
    let mut drawn = Vec::with_capacity(GRID_GALLERY_SIZE + 1);
    for (stratum, count) in GRID_RECIPE {
        let pool = rs.get(stratum);
        if pool.len() < count {
            return Err(Error::InsufficientStratum {
                room: room.to_string(),
                stratum: stratum.to_string(),
                available: pool.len(),
                required: count,
            });
        }
        if count == 1 {
            drawn.push(pool.choose(r).expect("non-empty").clone());
        } else {
            for i in index::sample(r, pool.len(), count) {
                drawn.push(pool[i].clone());
            }
        }
    }
    Ok(drawn)
}

fn grid_from_draw(mut drawn: Vec<String>, room: RoomCategory, id: String, r: &mut crate::rng::Rng) -> GridTask {
    let probe_at = r.random_range(0..drawn.len());
    let probe = drawn.swap_remove(probe_at);
    drawn.shuffle(r);
    GridTask {
        id,
        probe,
        gallery: drawn,
        room,
        is_catch: false,
        catch_expected: None,
    }
}

pub fn grid_task_id(room: RoomCategory, seed: u64) -> String {
    format!("grid-{room}-{seed:016x}")
}

pub fn make_grid_task(strata: &StrataIndex, room: RoomCategory, seed: u64) -> Result<GridTask> {
    let mut r = rng(seed);
    let drawn = draw_grid_photos(strata, room, &mut r)?;
    Ok(grid_from_draw(drawn, room, grid_task_id(room, seed), &mut r))
}

/// Grid catch trial keyed from latent luxury: the expected selection is the
/// gallery photos within `threshold` of the probe. Draws are retried until
/// no gallery photo lies within [`CATCH_MARGIN`] of the threshold.
pub fn make_catch_grid_task(
    strata: &StrataIndex,
    dataset: &Dataset,
    room: RoomCategory,
    threshold: f64,
    seed: u64,
) -> Result<GridTask> {
    const ATTEMPTS: u64 = 200;
    let latent = |id: &str| -> Result<f64> {
        dataset
            .photo(id)
            .and_then(|p| p.latent_luxury)
            .ok_or_else(|| Error::invalid(format!("catch trial photo {id} has no latent_luxury")))
    };
    for attempt in 0..ATTEMPTS {
        let mut r = rng(derive_seed_idx(seed, "catch-grid", attempt));
        let drawn = draw_grid_photos(strata, room, &mut r)?;
        let mut task = grid_from_draw(drawn, room, format!("catch-{}", grid_task_id(room, seed)), &mut r);
        let probe = latent(&task.probe)?;
        let mut expected = Vec::new();
        let mut ambiguous = false;
        for g in &task.gallery {
            let d = (latent(g)? - probe).abs();
            ambiguous |= (d - threshold).abs() < CATCH_MARGIN;
            if d <= threshold {
                expected.push(g.clone());
            }
        }
        if !ambiguous {
            task.is_catch = true;
            task.catch_expected = Some(expected);
            return Ok(task);
        }
    }
    Err(Error::invalid(format!(
        "room {room}: no unambiguous catch grid found in {ATTEMPTS} draws"
    )))
}

/// Every (probe, selected, unselected) combination, in gallery order.
pub fn extract_triplets(task: &GridTask, response: &GridResponse) -> Result<Vec<Triplet>> {
    let selected = validate_selection(task, &response.selected)?;
    let (chosen, rest): (Vec<&String>, Vec<&String>) =
        task.gallery.iter().partition(|g| selected.contains(g.as_str()));
    let mut out = Vec::with_capacity(chosen.len() * rest.len());
    for s in &chosen {
        for u in &rest {
            out.push(Triplet::new(task.probe.as_str(), s.as_str(), u.as_str())?);
        }
    }
    Ok(out)
}

pub(crate) fn validate_selection<'a>(task: &GridTask, selected: &'a [String]) -> Result<BTreeSet<&'a str>> {
    let set: BTreeSet<&str> = selected.iter().map(String::as_str).collect();
    if set.len() != selected.len() {
        return Err(Error::invalid(format!("response to {} selects a photo twice", task.id)));
    }
    if let Some(x) = set.iter().find(|s| !task.gallery.iter().any(|g| g == *s)) {
        return Err(Error::invalid(format!(
            "response to {} selects {x}, which is not in the gallery",
            task.id
        )));
    }
    Ok(set)
}

pub fn anchor_task_id(room: RoomCategory, probe: &str, seed: u64) -> String {
    format!("anchor-{room}-{probe}-{seed:016x}")
}

pub fn make_anchor_task(probe: &str, anchors: &AnchorSet, seed: u64) -> Result<AnchorTask> {
    if let Some(pos) = anchors.anchors.iter().position(|a| a == probe) {
        return Err(Error::invalid(format!(
            "probe {probe} is the level {} anchor for {}",
            pos + 1,
            anchors.room
        )));
    }
    let task = AnchorTask {
        id: anchor_task_id(anchors.room, probe, seed),
        probe: probe.to_string(),
        anchors: anchors.anchors.clone(),
        room: anchors.room,
        is_catch: false,
        catch_expected: None,
    };
    task.validate()?;
    Ok(task)
}

/// Lower median of the response levels.
pub fn aggregate_anchor_labels(responses: &[AnchorResponse]) -> Result<LuxuryLevel> {
    let first = responses
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty response list"))?;
    if let Some(r) = responses.iter().find(|r| r.task_id != first.task_id) {
        return Err(Error::invalid(format!(
            "responses mix tasks {} and {}",
            first.task_id, r.task_id
        )));
    }
    Ok(lower_median(responses.iter().map(|r| r.level)))
}

pub(crate) fn lower_median(levels: impl Iterator<Item = LuxuryLevel>) -> LuxuryLevel {
    let mut v: Vec<LuxuryLevel> = levels.collect();
    v.sort();
    v[(v.len() - 1) / 2]
}

/// A catch task paired with one worker's answer to it.
#[derive(Debug, Clone, Copy)]
pub enum CatchResult<'a> {
    Grid(&'a GridTask, &'a GridResponse),
    Anchor(&'a AnchorTask, &'a AnchorResponse),
}

impl CatchResult<'_> {
    pub fn passed(&self) -> Result<bool> {
        match *self {
            CatchResult::Grid(task, resp) => {
                let expected = match (&task.catch_expected, task.is_catch) {
                    (Some(e), true) => e,
                    _ => return Err(Error::invalid(format!("task {} is not a keyed catch trial", task.id))),
                };
                let expected: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
                let selected = validate_selection(task, &resp.selected)?;
                Ok(expected.symmetric_difference(&selected).next().is_none())
            }
            CatchResult::Anchor(task, resp) => match (task.catch_expected, task.is_catch) {
                (Some(e), true) => Ok((i16::from(resp.level.get()) - i16::from(e.get())).abs() <= 1),
                _ => Err(Error::invalid(format!("task {} is not a keyed catch trial", task.id))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerReport {
    pub worker_id: String,
    pub catches: usize,
    pub passes: usize,
    /// Pass fraction; absent when the worker has answered no catch trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub flagged: bool,
}

pub fn score_worker(worker_id: &str, catch_results: &[CatchResult<'_>]) -> Result<WorkerReport> {
    let mut passes = 0;
    for c in catch_results {
        passes += usize::from(c.passed()?);
    }
    let catches = catch_results.len();
    let score = (catches > 0).then(|| passes as f64 / catches as f64);
    Ok(WorkerReport {
        worker_id: worker_id.to_string(),
        catches,
        passes,
        score,
        flagged: score.is_some_and(|s| s < RELIABILITY_THRESHOLD),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HouseRecord, MetadataVector, Split};

    fn photo(id: &str, source: Source, house: Option<&str>, budget: Option<u8>) -> PhotoRecord {
        PhotoRecord {
            id: id.into(),
            source,
            features: vec![0.0],
            room_true: Some(RoomCategory::Kitchen),
            budget_level: budget,
            latent_luxury: Some(4.0),
            house_id: house.map(str::to_string),
        }
    }

    fn house(id: &str, price_mean: f64, photos: &[&str]) -> HouseRecord {
        HouseRecord {
            id: id.into(),
            metadata: MetadataVector {
                offered_price: price_mean,
                zestimate: price_mean,
                size: 1000.0,
                age: 1.0,
                bedrooms: 2.0,
                bathrooms: 1.0,
            },
            photo_ids: photos.iter().map(|s| s.to_string()).collect(),
            purchase_price: None,
            split: Split::Train,
        }
    }

    fn stocked() -> Dataset {
        let mut photos = Vec::new();
        let mut houses = Vec::new();
        for (i, price) in [100e3, 200e3, 300e3, 400e3].iter().enumerate() {
            let hid = format!("h{i}");
            let pid = format!("z{i}");
            photos.push(photo(&pid, Source::Zillow, Some(&hid), None));
            houses.push(house(&hid, *price, &[&pid]));
        }
        for b in 1..=4u8 {
            for j in 0..2 {
                photos.push(photo(&format!("hz{b}{j}"), Source::Houzz, None, Some(b)));
            }
        }
        for j in 0..3 {
            photos.push(photo(&format!("pl{j}"), Source::Places, None, None));
            photos.push(photo(&format!("go{j}"), Source::Google, None, None));
        }
        Dataset::new(photos, houses).unwrap()
    }

    fn grid_task() -> GridTask {
        GridTask {
            id: "t".into(),
            probe: "p".into(),
            gallery: (0..9).map(|i| format!("g{i}")).collect(),
            room: RoomCategory::Kitchen,
            is_catch: false,
            catch_expected: None,
        }
    }

    fn grid_response(selected: &[usize]) -> GridResponse {
        GridResponse {
            task_id: "t".into(),
            worker_id: "w".into(),
            selected: selected.iter().map(|i| format!("g{i}")).collect(),
            timestamp: 0,
        }
    }

    fn anchor_response(level: u8) -> AnchorResponse {
        AnchorResponse {
            task_id: "a".into(),
            worker_id: "w".into(),
            level: LuxuryLevel::new(level).unwrap(),
            timestamp: 0,
        }
    }

    #[test]
    fn median_split_of_zillow_houses() {
        let s = build_strata(&stocked()).unwrap();
        let k = s.room(RoomCategory::Kitchen).unwrap();
        assert_eq!(k.zillow_low, ["z0", "z1"]);
        assert_eq!(k.zillow_high, ["z2", "z3"]);
        assert_eq!(k.houzz[2], ["hz30", "hz31"]);
    }

    #[test]
    fn house_at_median_goes_low() {
        let photos = ["a", "b", "c"]
            .iter()
            .enumerate()
            .map(|(i, p)| photo(p, Source::Zillow, Some(&format!("h{i}")), None))
            .collect();
        let houses = vec![house("h0", 1.0, &["a"]), house("h1", 2.0, &["b"]), house("h2", 3.0, &["c"])];
        let s = build_strata(&Dataset::new(photos, houses).unwrap()).unwrap();
        let k = s.room(RoomCategory::Kitchen).unwrap();
        assert_eq!(k.zillow_low, ["a", "b"]);
        assert_eq!(k.zillow_high, ["c"]);
    }

    #[test]
    fn houzz_only_dataset() {
        let photos = (1..=4u8).map(|b| photo(&format!("x{b}"), Source::Houzz, None, Some(b))).collect();
        let s = build_strata(&Dataset::new(photos, vec![]).unwrap()).unwrap();
        let k = s.room(RoomCategory::Kitchen).unwrap();
        assert!(k.zillow_low.is_empty() && k.zillow_high.is_empty());
        assert!(k.houzz.iter().all(|b| b.len() == 1));
    }

    #[test]
    fn zillow_photo_without_house_is_an_error() {
        let d = Dataset::new(vec![photo("lost", Source::Zillow, None, None)], vec![]).unwrap();
        assert!(build_strata(&d).unwrap_err().to_string().contains("lost"));
    }

    #[test]
    fn grid_task_composition_and_determinism() {
        let d = stocked();
        let s = build_strata(&d).unwrap();
        for seed in 0..50 {
            let t = make_grid_task(&s, RoomCategory::Kitchen, seed).unwrap();
            t.validate().unwrap();
            let mut counts = BTreeMap::new();
            for id in t.gallery.iter().chain([&t.probe]) {
                *counts.entry(d.photo(id).unwrap().source).or_insert(0) += 1;
            }
            assert_eq!(counts[&Source::Zillow], 2);
            assert_eq!(counts[&Source::Houzz], 4);
            assert_eq!(counts[&Source::Places], 2);
            assert_eq!(counts[&Source::Google], 2);
            assert_eq!(t, make_grid_task(&s, RoomCategory::Kitchen, seed).unwrap());
        }
    }

    #[test]
    fn thin_stratum_is_named() {
        let mut s = build_strata(&stocked()).unwrap();
        s.rooms.get_mut(&RoomCategory::Kitchen).unwrap().places.truncate(1);
        let err = make_grid_task(&s, RoomCategory::Kitchen, 0).unwrap_err();
        assert!(err.to_string().contains("places"), "{err}");
        let err = make_grid_task(&s, RoomCategory::Bedroom, 0).unwrap_err();
        assert!(err.to_string().contains("bedroom"), "{err}");
    }

    #[test]
    fn triplet_counts() {
        let t = grid_task();
        let trips = extract_triplets(&t, &grid_response(&[0, 4, 8])).unwrap();
        assert_eq!(trips.len(), 18);
        assert!(trips.iter().all(|x| x.probe == "p"));
        assert!(extract_triplets(&t, &grid_response(&[])).unwrap().is_empty());
        assert!(extract_triplets(&t, &grid_response(&[0, 1, 2, 3, 4, 5, 6, 7, 8])).unwrap().is_empty());
    }

    #[test]
    fn selection_outside_gallery_rejected() {
        let mut r = grid_response(&[0]);
        r.selected.push("zzz".into());
        assert!(extract_triplets(&grid_task(), &r).is_err());
    }

    #[test]
    fn anchor_tasks() {
        let anchors = AnchorSet {
            room: RoomCategory::Bedroom,
            anchors: (1..=8).map(|i| format!("a{i}")).collect(),
            centroids: vec![vec![0.0, 0.0]; 8],
        };
        let t = make_anchor_task("probe", &anchors, 4).unwrap();
        assert_eq!(t.anchors, anchors.anchors);
        assert_eq!(t, make_anchor_task("probe", &anchors, 4).unwrap());
        assert!(make_anchor_task("a3", &anchors, 4).is_err());
    }

    #[test]
    fn lower_median_aggregation() {
        let agg = |ls: &[u8]| {
            let rs: Vec<_> = ls.iter().map(|l| anchor_response(*l)).collect();
            aggregate_anchor_labels(&rs).unwrap().get()
        };
        assert_eq!(agg(&[4]), 4);
        assert_eq!(agg(&[2, 5, 6]), 5);
        assert_eq!(agg(&[6, 3]), 3);
        assert!(aggregate_anchor_labels(&[]).is_err());
    }

    #[test]
    fn worker_scoring() {
        let mut grid = grid_task();
        grid.is_catch = true;
        grid.catch_expected = Some(vec!["g1".into(), "g2".into()]);
        let good = grid_response(&[2, 1]);
        let bad = grid_response(&[1]);
        let five: Vec<_> = (0..5).map(|_| CatchResult::Grid(&grid, &good)).collect();
        let report = score_worker("w", &five).unwrap();
        assert_eq!(report.score, Some(1.0));
        assert!(!report.flagged);

        let mut ten: Vec<_> = (0..7).map(|_| CatchResult::Grid(&grid, &good)).collect();
        ten.extend((0..3).map(|_| CatchResult::Grid(&grid, &bad)));
        let report = score_worker("w", &ten).unwrap();
        assert_eq!(report.score, Some(0.7));
        assert!(report.flagged);

        let anchor = AnchorTask {
            id: "a".into(),
            probe: "p".into(),
            anchors: (1..=8).map(|i| format!("a{i}")).collect(),
            room: RoomCategory::Kitchen,
            is_catch: true,
            catch_expected: Some(LuxuryLevel::new(4).unwrap()),
        };
        assert!(CatchResult::Anchor(&anchor, &anchor_response(5)).passed().unwrap());
        assert!(!CatchResult::Anchor(&anchor, &anchor_response(6)).passed().unwrap());

        let plain = grid_task();
        assert!(score_worker("w", &[CatchResult::Grid(&plain, &good)]).is_err());
    }
}
