//! Luxury embedding from triplet judgments, clustering, and anchor choice.

mod anchors;
mod kmeans;
mod tste;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Triplet;

pub use anchors::{luxury_proxy, select_anchors, AnchorRecord, AnchorSet};
pub use kmeans::{kmeans, KMeans};
pub use tste::{triplet_satisfaction, tste_fit, tste_loss_grad, IndexTriplet, TsteConfig, TsteFit};

/// Default Student-t degrees of freedom for a 2-D embedding (d - 1, floored at 1).
pub fn default_alpha(dim: usize) -> f64 {
    (dim.saturating_sub(1)).max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub photo_ids: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub alpha: f64,
    pub final_loss: f64,
    pub isolated: Vec<String>,
}

/// One line of an embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub photo_id: String,
    pub coords: Vec<f64>,
}

impl Embedding {
    pub fn to_records(&self) -> Vec<EmbeddingRecord> {
        self.photo_ids
            .iter()
            .zip(&self.points)
            .map(|(id, p)| EmbeddingRecord {
                photo_id: id.clone(),
                coords: p.clone(),
            })
            .collect()
    }

    /// Rebuilds an embedding from stored coordinates; loss and alpha are not
    /// stored and come back as NaN.
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let d = records.first().map_or(0, |r| r.coords.len());
        if let Some(r) = records.iter().find(|r| r.coords.len() != d || r.coords.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("embedding row {} is malformed", r.photo_id)));
        }
        let (photo_ids, points) = records.into_iter().map(|r| (r.photo_id, r.coords)).unzip();
        Ok(Embedding {
            photo_ids,
            points,
            alpha: f64::NAN,
            final_loss: f64::NAN,
            isolated: Vec::new(),
        })
    }

    pub fn index_of(&self) -> BTreeMap<&str, usize> {
        self.photo_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

/// Maps id triplets onto rows of `photo_ids`.
pub fn index_triplets(photo_ids: &[String], triplets: &[Triplet]) -> Result<Vec<IndexTriplet>> {
    let index: BTreeMap<&str, usize> = photo_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let find = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("triplet references unknown photo {id}")))
    };
    triplets
        .iter()
        .map(|t| Ok((find(&t.probe)?, find(&t.similar)?, find(&t.dissimilar)?)))
        .collect()
}

/// Sorted, de-duplicated ids mentioned by `triplets`.
pub fn triplet_photo_ids(triplets: &[Triplet]) -> Vec<String> {
    let mut ids: Vec<String> = triplets
        .iter()
        .flat_map(|t| [&t.probe, &t.similar, &t.dissimilar])
        .cloned()
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Embeds `photo_ids` (rows in the given order) from id triplets. Photos in
/// no triplet are kept at their initial position and listed as isolated.
pub fn embed_photos(
    photo_ids: Vec<String>,
    triplets: &[Triplet],
    dim: usize,
    alpha: f64,
    config: &TsteConfig,
) -> Result<Embedding> {
    let idx = index_triplets(&photo_ids, triplets)?;
    let fit = tste_fit(&idx, photo_ids.len(), dim, alpha, config)?;
    Ok(Embedding {
        isolated: fit.isolated.iter().map(|&i| photo_ids[i].clone()).collect(),
        photo_ids,
        points: fit.points,
        alpha,
        final_loss: fit.final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RoomCategory;

    fn emb(points: Vec<Vec<f64>>) -> Embedding {
        Embedding {
            photo_ids: (0..points.len()).map(|i| format!("p{i:02}")).collect(),
            points,
            alpha: 1.0,
            final_loss: 0.0,
            isolated: vec![],
        }
    }

    #[test]
    fn singleton_clusters_are_their_own_anchors() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 0.0]).collect();
        let e = emb(pts.clone());
        let assignments: Vec<usize> = (0..8).rev().collect();
        let centroids: Vec<Vec<f64>> = (0..8).map(|c| pts[7 - c].clone()).collect();
        let proxy = |id: &str| id[1..].parse::<f64>().ok();
        let a = select_anchors(&e, &assignments, &centroids, proxy, RoomCategory::Kitchen).unwrap();
        assert_eq!(a.anchors, (0..8).map(|i| format!("p{i:02}")).collect::<Vec<_>>());
        assert_eq!(a.centroids[0], vec![0.0, 0.0]);
    }

    #[test]
    fn equidistant_members_prefer_smaller_id() {
        let mut pts: Vec<Vec<f64>> = (0..7).map(|i| vec![10.0 * i as f64, 0.0]).collect();
        pts.push(vec![100.0, 1.0]);
        pts.push(vec![100.0, -1.0]);
        let e = emb(pts.clone());
        let mut assignments: Vec<usize> = (0..7).collect();
        assignments.extend([7, 7]);
        let mut centroids: Vec<Vec<f64>> = pts[..7].to_vec();
        centroids.push(vec![100.0, 0.0]);
        let proxy = |id: &str| id[1..].parse::<f64>().ok();
        let a = select_anchors(&e, &assignments, &centroids, proxy, RoomCategory::Kitchen).unwrap();
        assert_eq!(a.anchors[7], "p07");
    }

    #[test]
    fn wrong_cluster_count_or_missing_proxy() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let e = emb(pts.clone());
        let assignments: Vec<usize> = (0..8).collect();
        assert!(select_anchors(&e, &assignments, &pts[..7], |_| Some(1.0), RoomCategory::Kitchen).is_err());
        assert!(select_anchors(&e, &assignments, &pts, |_| None, RoomCategory::Kitchen).is_err());
    }

    #[test]
    fn anchor_records_round_trip() {
        let set = AnchorSet {
            room: RoomCategory::Exterior,
            anchors: (1..=8).map(|i| format!("a{i}")).collect(),
            centroids: (0..8).map(|i| vec![i as f64, 1.0]).collect(),
        };
        let back = AnchorSet::from_records(&set.to_records()).unwrap();
        assert_eq!(back[&RoomCategory::Exterior], set);
        let mut recs = set.to_records();
        recs.pop();
        assert!(AnchorSet::from_records(&recs).is_err());
    }
}
