use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::crowd::{build_strata, make_anchor_task, make_catch_grid_task, make_grid_task, AnchorTask};
use crate::embedding::AnchorSet;
use crate::error::{Error, Result};
use crate::model::{Dataset, LuxuryLevel, RoomCategory};
use crate::rng::{derive_seed, derive_seed_idx, rng};

use super::Task;

fn catch_count(count: usize, catch_fraction: f64) -> usize {
    (count as f64 * catch_fraction).round() as usize
}

/// `count` grid tasks per room followed by `round(count * catch_fraction)`
/// keyed catch grids for that room, rooms in the given order.
pub fn build_grid_tasks(
    dataset: &Dataset,
    rooms: &[RoomCategory],
    count: usize,
    catch_fraction: f64,
    catch_threshold: f64,
    seed: u64,
) -> Result<Vec<Task>> {
    let strata = build_strata(dataset)?;
    let regular_seed = derive_seed(seed, "grid");
    let catch_seed = derive_seed(seed, "catch-grid");
    let mut tasks = Vec::new();
    for &room in rooms {
        for t in 0..count {
            let s = derive_seed_idx(regular_seed, room.as_str(), t as u64);
            tasks.push(Task::Grid(make_grid_task(&strata, room, s)?));
        }
        for c in 0..catch_count(count, catch_fraction) {
            let s = derive_seed_idx(catch_seed, room.as_str(), c as u64);
            tasks.push(Task::Grid(make_catch_grid_task(&strata, dataset, room, catch_threshold, s)?));
        }
    }
    Ok(tasks)
}

/// Per room, a seeded sample of photos whose `room_true` is that room
/// (anchors excluded) becomes `count` anchor tasks, then catch tasks keyed
/// by each probe's rounded latent luxury.
pub fn build_anchor_tasks(
    dataset: &Dataset,
    anchors: &BTreeMap<RoomCategory, AnchorSet>,
    rooms: &[RoomCategory],
    count: usize,
    catch_fraction: f64,
    seed: u64,
) -> Result<Vec<Task>> {
    let task_seed = derive_seed(seed, "anchor");
    let mut tasks = Vec::new();
    for &room in rooms {
        let set = anchors
            .get(&room)
            .ok_or_else(|| Error::invalid(format!("no anchors for room {room}")))?;
        let mut candidates: Vec<&str> = dataset
            .photos()
            .filter(|p| p.room_true == Some(room) && !set.anchors.contains(&p.id))
            .map(|p| p.id.as_str())
            .collect();
        candidates.shuffle(&mut rng(derive_seed_idx(seed, "anchor-sample", room.index() as u64)));
        let catches = catch_count(count, catch_fraction);
        if candidates.len() < count + catches {
            return Err(Error::invalid(format!(
                "room {room}: {} candidate photos for {count} anchor tasks and {catches} catch trials",
                candidates.len()
            )));
        }
        for probe in &candidates[..count] {
            tasks.push(Task::Anchor(make_anchor_task(probe, set, task_seed)?));
        }
        for probe in &candidates[count..count + catches] {
            let latent = dataset
                .photo(probe)
                .and_then(|p| p.latent_luxury)
                .ok_or_else(|| Error::invalid(format!("catch trial photo {probe} has no latent_luxury")))?;
            let mut task: AnchorTask = make_anchor_task(probe, set, task_seed)?;
            task.id = format!("catch-{}", task.id);
            task.is_catch = true;
            task.catch_expected = Some(LuxuryLevel::from_continuous(latent));
            tasks.push(Task::Anchor(task));
        }
    }
    Ok(tasks)
}
