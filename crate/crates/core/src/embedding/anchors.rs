use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crowd::ANCHOR_COUNT;
use crate::error::{Error, Result};
use crate::model::{Dataset, PhotoRecord, RoomCategory, Source};

use super::Embedding;

/// The eight representative photos of one room, in level order 1..=8.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub room: RoomCategory,
    pub anchors: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
}

/// One line of an anchors file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub room: RoomCategory,
    pub level: u8,
    pub photo_id: String,
    pub centroid: Vec<f64>,
}

impl AnchorSet {
    pub fn to_records(&self) -> Vec<AnchorRecord> {
        self.anchors
            .iter()
            .zip(&self.centroids)
            .enumerate()
            .map(|(i, (id, c))| AnchorRecord {
                room: self.room,
                level: i as u8 + 1,
                photo_id: id.clone(),
                centroid: c.clone(),
            })
            .collect()
    }

    /// Groups anchor records by room; every room present must list levels
    /// 1..=8 exactly once.
    pub fn from_records(records: &[AnchorRecord]) -> Result<BTreeMap<RoomCategory, AnchorSet>> {
        let mut by_room: BTreeMap<RoomCategory, Vec<&AnchorRecord>> = BTreeMap::new();
        for r in records {
            by_room.entry(r.room).or_default().push(r);
        }
        let mut out = BTreeMap::new();
        for (room, mut recs) in by_room {
            recs.sort_by_key(|r| r.level);
            let levels: Vec<u8> = recs.iter().map(|r| r.level).collect();
            if levels != (1..=ANCHOR_COUNT as u8).collect::<Vec<_>>() {
                return Err(Error::invalid(format!("room {room}: anchor levels {levels:?} are not 1..=8")));
            }
            out.insert(
                room,
                AnchorSet {
                    room,
                    anchors: recs.iter().map(|r| r.photo_id.clone()).collect(),
                    centroids: recs.iter().map(|r| r.centroid.clone()).collect(),
                },
            );
        }
        Ok(out)
    }
}

/// Luxury proxy used to put clusters in level order: the latent luxury when
/// known, otherwise the midpoint of a Houzz budget quartile, otherwise the
/// price-mean percentile of a Zillow photo's house scaled to [0, 8].
pub fn luxury_proxy(dataset: &Dataset) -> impl Fn(&PhotoRecord) -> Option<f64> + '_ {
    let mut means: Vec<f64> = dataset
        .houses()
        .filter(|h| {
            h.photo_ids
                .iter()
                .any(|p| dataset.photo(p).is_some_and(|p| p.source == Source::Zillow))
        })
        .map(|h| h.metadata.price_mean())
        .collect();
    means.sort_by(f64::total_cmp);
    move |p: &PhotoRecord| {
        if let Some(l) = p.latent_luxury {
            return Some(l);
        }
        if let (Source::Houzz, Some(b)) = (p.source, p.budget_level) {
            return Some(2.0 * f64::from(b) - 1.0);
        }
        if p.source == Source::Zillow && !means.is_empty() {
            let house = dataset.house(p.house_id.as_deref()?)?;
            let below = means.partition_point(|m| *m < house.metadata.price_mean());
            return Some(8.0 * (below as f64 + 0.5) / means.len() as f64);
        }
        None
    }
}

/// Picks, per cluster, the member nearest its centroid (ties to the smaller
/// photo id) and orders clusters into levels by ascending mean proxy.
pub fn select_anchors<F>(
    embedding: &Embedding,
    assignments: &[usize],
    centroids: &[Vec<f64>],
    proxy: F,
    room: RoomCategory,
) -> Result<AnchorSet>
where
    F: Fn(&str) -> Option<f64>,
{
    if centroids.len() != ANCHOR_COUNT {
        return Err(Error::invalid(format!(
            "anchor selection needs {ANCHOR_COUNT} clusters, got {}",
            centroids.len()
        )));
    }
    if assignments.len() != embedding.photo_ids.len() {
        return Err(Error::invalid("assignments do not match the embedding"));
    }
    let k = centroids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= k {
            return Err(Error::invalid(format!("assignment {a} out of range")));
        }
        members[a].push(i);
    }
    let mut clusters = Vec::with_capacity(k);
    for (c, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::invalid(format!("cluster {c} is empty")));
        }
        let mut proxy_sum = 0.0;
        for &i in rows {
            let id = &embedding.photo_ids[i];
            proxy_sum += proxy(id).ok_or_else(|| Error::invalid(format!("no luxury proxy for photo {id}")))?;
        }
        let dist = |i: usize| -> f64 {
            embedding.points[i]
                .iter()
                .zip(&centroids[c])
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let anchor = rows
            .iter()
            .copied()
            .min_by(|&a, &b| {
                dist(a)
                    .total_cmp(&dist(b))
                    .then_with(|| embedding.photo_ids[a].cmp(&embedding.photo_ids[b]))
            })
            .expect("non-empty cluster");
        clusters.push((proxy_sum / rows.len() as f64, c, anchor));
    }
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(AnchorSet {
        room,
        anchors: clusters.iter().map(|&(_, _, a)| embedding.photo_ids[a].clone()).collect(),
        centroids: clusters.iter().map(|&(_, c, _)| centroids[c].clone()).collect(),
    })
}
