use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MetadataVector;

/// Per-field z-scoring of metadata with population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub means: [f64; MetadataVector::LEN],
    pub stds: [f64; MetadataVector::LEN],
}

impl Normalizer {
    /// Fields with zero spread; they normalize to 0.
    pub fn degenerate(&self) -> [bool; MetadataVector::LEN] {
        self.stds.map(|s| s == 0.0)
    }

    pub fn normalize(&self, m: &MetadataVector) -> [f64; MetadataVector::LEN] {
        let raw = m.to_array();
        std::array::from_fn(|f| {
            if self.stds[f] == 0.0 {
                0.0
            } else {
                (raw[f] - self.means[f]) / self.stds[f]
            }
        })
    }
}

pub fn fit_normalizer(rows: &[MetadataVector]) -> Result<Normalizer> {
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "normalizer needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let n = rows.len() as f64;
    let mut means = [0.0; MetadataVector::LEN];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r.to_array()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = [0.0; MetadataVector::LEN];
    for r in rows {
        for ((s, v), m) in vars.iter_mut().zip(r.to_array()).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(Normalizer {
        means,
        stds: vars.map(|v| (v / n).sqrt()),
    })
}
