use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HouseRecord, LuxuryLevel, RoomCategory};

/// Per-room luxury of a house for a house with no photos at all.
pub const NO_PHOTO_LUXURY: f64 = 4.5;

/// Mean predicted luxury per room, in [`RoomCategory::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuxuryVector {
    pub values: [f64; RoomCategory::COUNT],
    pub imputed: [bool; RoomCategory::COUNT],
}

/// Averages photo levels per room. Rooms without photos take the mean of
/// the observed room means and are flagged as imputed.
pub fn aggregate_house_luxury(
    house: &HouseRecord,
    photo_levels: &HashMap<String, (RoomCategory, LuxuryLevel)>,
) -> Result<LuxuryVector> {
    let mut sums = [0.0; RoomCategory::COUNT];
    let mut counts = [0usize; RoomCategory::COUNT];
    for pid in &house.photo_ids {
        let (room, level) = photo_levels
            .get(pid)
            .ok_or_else(|| Error::invalid(format!("house {}: no prediction for photo {pid}", house.id)))?;
        sums[room.index()] += f64::from(level.get());
        counts[room.index()] += 1;
    }
    let observed: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s / n as f64)
        .collect();
    let fill = if observed.is_empty() {
        NO_PHOTO_LUXURY
    } else {
        observed.iter().sum::<f64>() / observed.len() as f64
    };
    let mut out = LuxuryVector {
        values: [fill; RoomCategory::COUNT],
        imputed: [true; RoomCategory::COUNT],
    };
    for r in 0..RoomCategory::COUNT {
        if counts[r] > 0 {
            out.values[r] = sums[r] / counts[r] as f64;
            out.imputed[r] = false;
        }
    }
    Ok(out)
}
