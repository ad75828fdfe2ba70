use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HouseRecord, MetadataVector, RoomCategory};

use super::{LuxuryVector, Normalizer};

/// Which visual signal accompanies the normalized metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Metadata plus seven per-room luxury means.
    Full,
    MetadataOnly,
    /// Metadata plus one luxury value from a room-agnostic classifier.
    NoRoomClassifier,
    /// Metadata plus mean-pooled raw photo features.
    DirectRegression,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::MetadataOnly, Mode::NoRoomClassifier, Mode::DirectRegression];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::MetadataOnly => "metadata_only",
            Mode::NoRoomClassifier => "no_room_classifier",
            Mode::DirectRegression => "direct_regression",
        }
    }

    pub fn vector_len(self, feature_dim: usize) -> usize {
        MetadataVector::LEN
            + match self {
                Mode::Full => RoomCategory::COUNT,
                Mode::MetadataOnly => 0,
                Mode::NoRoomClassifier => 1,
                Mode::DirectRegression => feature_dim,
            }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mode {s:?}")))
    }
}

/// Visual input for [`build_representation`]; must agree with the mode.
#[derive(Debug, Clone, Copy)]
pub enum VisualSignal<'a> {
    None,
    RoomLuxury(&'a LuxuryVector),
    PooledLuxury(f64),
    PhotoFeatures { features: &'a [&'a [f64]], dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseRepresentation {
    pub mode: Mode,
    pub vector: Vec<f64>,
}

pub fn build_representation(
    house: &HouseRecord,
    normalizer: &Normalizer,
    mode: Mode,
    signal: VisualSignal<'_>,
) -> Result<HouseRepresentation> {
    let mut vector = normalizer.normalize(&house.metadata).to_vec();
    match (mode, signal) {
        (Mode::MetadataOnly, VisualSignal::None) => {}
        (Mode::Full, VisualSignal::RoomLuxury(lux)) => vector.extend_from_slice(&lux.values),
        (Mode::NoRoomClassifier, VisualSignal::PooledLuxury(v)) => vector.push(v),
        (Mode::DirectRegression, VisualSignal::PhotoFeatures { features, dim }) => {
            let mut pooled = vec![0.0; dim];
            for f in features {
                if f.len() != dim {
                    return Err(Error::invalid(format!(
                        "house {}: photo feature length {} != {dim}",
                        house.id,
                        f.len()
                    )));
                }
                for (p, v) in pooled.iter_mut().zip(*f) {
                    *p += v;
                }
            }
            if !features.is_empty() {
                let n = features.len() as f64;
                pooled.iter_mut().for_each(|p| *p /= n);
            }
            vector.extend(pooled);
        }
        (mode, signal) => {
            return Err(Error::invalid(format!(
                "mode {mode} cannot use visual signal {signal:?}"
            )))
        }
    }
    Ok(HouseRepresentation { mode, vector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Split;
    use crate::valuation::fit_normalizer;

    fn house(size: f64) -> HouseRecord {
        HouseRecord {
            id: "h".into(),
            metadata: MetadataVector {
                offered_price: size * 100.0,
                zestimate: size * 90.0,
                size,
                age: 3.0,
                bedrooms: 2.0,
                bathrooms: 1.0,
            },
            photo_ids: vec![],
            purchase_price: None,
            split: Split::Train,
        }
    }

    fn normalizer() -> Normalizer {
        fit_normalizer(&[house(1000.0).metadata, house(2000.0).metadata]).unwrap()
    }

    #[test]
    fn lengths_by_mode() {
        let h = house(1500.0);
        let n = normalizer();
        let lux = LuxuryVector {
            values: [3.0; 7],
            imputed: [false; 7],
        };
        let full = build_representation(&h, &n, Mode::Full, VisualSignal::RoomLuxury(&lux)).unwrap();
        assert_eq!(full.vector.len(), 13);
        assert_eq!(full.vector.len(), Mode::Full.vector_len(16));
        let meta = build_representation(&h, &n, Mode::MetadataOnly, VisualSignal::None).unwrap();
        assert_eq!(meta.vector.len(), 6);
        let pooled = build_representation(&h, &n, Mode::NoRoomClassifier, VisualSignal::PooledLuxury(4.0)).unwrap();
        assert_eq!(pooled.vector.len(), 7);
    }

    #[test]
    fn direct_regression_mean_pools() {
        let f1 = [1.0, 2.0, 3.0];
        let f2 = [3.0, 0.0, -1.0];
        let feats: [&[f64]; 2] = [&f1, &f2];
        let r = build_representation(
            &house(1500.0),
            &normalizer(),
            Mode::DirectRegression,
            VisualSignal::PhotoFeatures { features: &feats, dim: 3 },
        )
        .unwrap();
        assert_eq!(&r.vector[6..], &[2.0, 1.0, 1.0]);
        let none: [&[f64]; 0] = [];
        let r = build_representation(
            &house(1500.0),
            &normalizer(),
            Mode::DirectRegression,
            VisualSignal::PhotoFeatures { features: &none, dim: 3 },
        )
        .unwrap();
        assert_eq!(&r.vector[6..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_signal_rejected() {
        assert!(build_representation(&house(1.0), &normalizer(), Mode::Full, VisualSignal::None).is_err());
        assert!(
            build_representation(&house(1.0), &normalizer(), Mode::MetadataOnly, VisualSignal::PooledLuxury(1.0))
                .is_err()
        );
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("triangle".parse::<Mode>().is_err());
    }
}
