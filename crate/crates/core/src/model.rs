//! Shared domain records and their validation rules.
//!
//! Every record type here is plain data: construction goes through a
//! `validate` (or a validating constructor) and the values are treated as
//! immutable afterwards. [`Dataset`] indexes photos and houses by id in
//! ascending order, which is also the order they are written back to disk.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomCategory {
    Bathroom,
    Bedroom,
    Kitchen,
    LivingRoom,
    DiningRoom,
    InteriorMisc,
    Exterior,
}

impl RoomCategory {
    pub const COUNT: usize = 7;

    /// All categories in canonical order; this order fixes the layout of
    /// per-room luxury vectors and classifier outputs.
    pub const ALL: [RoomCategory; 7] = [
        RoomCategory::Bathroom,
        RoomCategory::Bedroom,
        RoomCategory::Kitchen,
        RoomCategory::LivingRoom,
        RoomCategory::DiningRoom,
        RoomCategory::InteriorMisc,
        RoomCategory::Exterior,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoomCategory::Bathroom => "bathroom",
            RoomCategory::Bedroom => "bedroom",
            RoomCategory::Kitchen => "kitchen",
            RoomCategory::LivingRoom => "living_room",
            RoomCategory::DiningRoom => "dining_room",
            RoomCategory::InteriorMisc => "interior_misc",
            RoomCategory::Exterior => "exterior",
        }
    }
}

impl fmt::Display for RoomCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown room category {s:?}")))
    }
}

/// Ordinal luxury rating, 1 (least luxurious) through 8 (most).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LuxuryLevel(u8);

impl LuxuryLevel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 8;
    pub const COUNT: usize = 8;

    pub fn new(level: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&level) {
            Ok(LuxuryLevel(level))
        } else {
            Err(Error::invalid(format!("luxury level {level} outside [1, 8]")))
        }
    }

    /// Round half to even, then clamp into [1, 8].
    pub fn from_continuous(value: f64) -> Self {
        let rounded = value.round_ties_even();
        LuxuryLevel(rounded.clamp(Self::MIN as f64, Self::MAX as f64) as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based class index for classifiers.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::COUNT).then(|| LuxuryLevel(i as u8 + 1))
    }
}

impl TryFrom<u8> for LuxuryLevel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        LuxuryLevel::new(v)
    }
}

impl From<LuxuryLevel> for u8 {
    fn from(l: LuxuryLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for LuxuryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Zillow,
    Houzz,
    Places,
    Google,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Zillow => "zillow",
            Source::Houzz => "houzz",
            Source::Places => "places",
            Source::Google => "google",
            Source::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoRecord {
    pub id: String,
    pub source: Source,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_true: Option<RoomCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_luxury: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub house_id: Option<String>,
}

impl PhotoRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("photo id is empty"));
        }
        if let Some(i) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "photo {}: feature {i} is not finite",
                self.id
            )));
        }
        if let Some(b) = self.budget_level {
            if !(1..=4).contains(&b) {
                return Err(Error::invalid(format!(
                    "photo {}: budget_level {b} outside [1, 4]",
                    self.id
                )));
            }
            if !matches!(self.source, Source::Houzz | Source::Synthetic) {
                return Err(Error::invalid(format!(
                    "photo {}: budget_level only allowed on houzz or synthetic photos",
                    self.id
                )));
            }
        }
        if let Some(l) = self.latent_luxury {
            if !(0.0..=8.0).contains(&l) {
                return Err(Error::invalid(format!(
                    "photo {}: latent_luxury {l} outside [0, 8]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Home characteristics. Field order is the canonical metadata layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetadataVector {
    pub offered_price: f64,
    pub zestimate: f64,
    pub size: f64,
    pub age: f64,
    pub bedrooms: f64,
    pub bathrooms: f64,
}

impl MetadataVector {
    pub const LEN: usize = 6;
    pub const FIELD_NAMES: [&'static str; 6] = [
        "offered_price",
        "zestimate",
        "size",
        "age",
        "bedrooms",
        "bathrooms",
    ];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.offered_price,
            self.zestimate,
            self.size,
            self.age,
            self.bedrooms,
            self.bathrooms,
        ]
    }

    /// Mean of offered price and Zestimate.
    pub fn price_mean(&self) -> f64 {
        0.5 * (self.offered_price + self.zestimate)
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.to_array();
        for (name, v) in Self::FIELD_NAMES.iter().zip(values) {
            if !v.is_finite() {
                return Err(Error::invalid(format!("metadata {name} is not finite")));
            }
        }
        if self.offered_price <= 0.0 || self.zestimate <= 0.0 || self.size <= 0.0 {
            return Err(Error::invalid(
                "metadata offered_price, zestimate and size must be positive",
            ));
        }
        if self.age < 0.0 || self.bedrooms < 0.0 || self.bathrooms < 0.0 {
            return Err(Error::invalid(
                "metadata age, bedrooms and bathrooms must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseRecord {
    pub id: String,
    pub metadata: MetadataVector,
    pub photo_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purchase_price: Option<f64>,
    pub split: Split,
}

impl HouseRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("house id is empty"));
        }
        self.metadata
            .validate()
            .map_err(|e| Error::invalid(format!("house {}: {e}", self.id)))?;
        if let Some(p) = self.purchase_price {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(format!(
                    "house {}: purchase_price must be positive",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A relative judgment: `probe` is closer in luxury to `similar` than to
/// `dissimilar`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub probe: String,
    pub similar: String,
    pub dissimilar: String,
}

impl Triplet {
    pub fn new(
        probe: impl Into<String>,
        similar: impl Into<String>,
        dissimilar: impl Into<String>,
    ) -> Result<Self> {
        let t = Triplet {
            probe: probe.into(),
            similar: similar.into(),
            dissimilar: dissimilar.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probe == self.similar || self.probe == self.dissimilar || self.similar == self.dissimilar {
            return Err(Error::invalid(format!(
                "triplet ({}, {}, {}) has repeated ids",
                self.probe, self.similar, self.dissimilar
            )));
        }
        Ok(())
    }
}

/// Validated, id-indexed collection of photos and houses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    photos: BTreeMap<String, PhotoRecord>,
    houses: BTreeMap<String, HouseRecord>,
    feature_dim: usize,
}

impl Dataset {
    /// Validates every record and cross-reference. Either the whole dataset
    /// is valid or an error is returned.
    pub fn new(photos: Vec<PhotoRecord>, houses: Vec<HouseRecord>) -> Result<Self> {
        let mut photo_map = BTreeMap::new();
        let mut first: Option<(String, usize)> = None;
        for p in photos {
            p.validate()?;
            match &first {
                None => first = Some((p.id.clone(), p.features.len())),
                Some((first_id, dim)) if *dim != p.features.len() => {
                    return Err(Error::invalid(format!(
                        "feature dimension mismatch: photo {first_id} has {dim}, photo {} has {}",
                        p.id,
                        p.features.len()
                    )));
                }
                Some(_) => {}
            }
            if photo_map.contains_key(&p.id) {
                return Err(Error::invalid(format!("duplicate photo id {}", p.id)));
            }
            photo_map.insert(p.id.clone(), p);
        }
        let mut house_map = BTreeMap::new();
        for h in houses {
            h.validate()?;
            for pid in &h.photo_ids {
                if !photo_map.contains_key(pid) {
                    return Err(Error::invalid(format!(
                        "house {} references unknown photo {pid}",
                        h.id
                    )));
                }
            }
            if house_map.contains_key(&h.id) {
                return Err(Error::invalid(format!("duplicate house id {}", h.id)));
            }
            house_map.insert(h.id.clone(), h);
        }
        for p in photo_map.values() {
            if let Some(hid) = &p.house_id {
                if !house_map.contains_key(hid) {
                    return Err(Error::invalid(format!(
                        "photo {} references unknown house {hid}",
                        p.id
                    )));
                }
            }
        }
        Ok(Dataset {
            photos: photo_map,
            houses: house_map,
            feature_dim: first.map_or(0, |(_, d)| d),
        })
    }

    pub fn photos(&self) -> impl ExactSizeIterator<Item = &PhotoRecord> {
        self.photos.values()
    }

    pub fn houses(&self) -> impl ExactSizeIterator<Item = &HouseRecord> {
        self.houses.values()
    }

    pub fn photo(&self, id: &str) -> Option<&PhotoRecord> {
        self.photos.get(id)
    }

    pub fn house(&self, id: &str) -> Option<&HouseRecord> {
        self.houses.get(id)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_photos(&self) -> usize {
        self.photos.len()
    }

    pub fn num_houses(&self) -> usize {
        self.houses.len()
    }

    pub fn houses_in(&self, split: Split) -> impl Iterator<Item = &HouseRecord> {
        self.houses.values().filter(move |h| h.split == split)
    }

    /// Clone of this dataset with the purchase price removed from every
    /// house in `split`.
    pub fn without_prices(&self, split: Split) -> Dataset {
        let mut out = self.clone();
        for h in out.houses.values_mut() {
            if h.split == split {
                h.purchase_price = None;
            }
        }
        out
    }

    pub fn into_parts(self) -> (Vec<PhotoRecord>, Vec<HouseRecord>) {
        (
            self.photos.into_values().collect(),
            self.houses.into_values().collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn photo(id: &str, dim: usize) -> PhotoRecord {
        PhotoRecord {
            id: id.into(),
            source: Source::Places,
            features: vec![0.5; dim],
            room_true: None,
            budget_level: None,
            latent_luxury: None,
            house_id: None,
        }
    }

    #[test]
    fn room_names_round_trip() {
        assert_eq!(RoomCategory::ALL.len(), 7);
        for r in RoomCategory::ALL {
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.as_str()));
            assert_eq!(serde_json::from_str::<RoomCategory>(&json).unwrap(), r);
            assert_eq!(r.as_str().parse::<RoomCategory>().unwrap(), r);
            assert_eq!(RoomCategory::from_index(r.index()), Some(r));
        }
    }

    #[test]
    fn luxury_level_range() {
        assert!(LuxuryLevel::new(0).is_err());
        assert!(LuxuryLevel::new(9).is_err());
        assert_eq!(LuxuryLevel::new(8).unwrap().get(), 8);
        assert!(serde_json::from_str::<LuxuryLevel>("9").is_err());
        assert_eq!(LuxuryLevel::from_continuous(5.4).get(), 5);
        assert_eq!(LuxuryLevel::from_continuous(4.5).get(), 4);
        assert_eq!(LuxuryLevel::from_continuous(5.5).get(), 6);
        assert_eq!(LuxuryLevel::from_continuous(0.2).get(), 1);
        assert_eq!(LuxuryLevel::from_continuous(12.0).get(), 8);
    }

    #[test]
    fn budget_level_requires_houzz_or_synthetic() {
        let mut p = photo("a", 2);
        p.budget_level = Some(2);
        assert!(p.validate().is_err());
        p.source = Source::Houzz;
        assert!(p.validate().is_ok());
        p.budget_level = Some(5);
        assert!(p.validate().is_err());
    }

    #[test]
    fn non_finite_features_rejected() {
        let mut p = photo("a", 3);
        p.features[1] = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_names_both_photos() {
        let err = Dataset::new(vec![photo("a", 3), photo("b", 4)], vec![]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("photo a") && msg.contains("photo b"), "{msg}");
    }

    #[test]
    fn triplet_requires_distinct_ids() {
        assert!(Triplet::new("a", "b", "c").is_ok());
        assert!(Triplet::new("a", "a", "c").is_err());
        assert!(Triplet::new("a", "b", "b").is_err());
    }

    #[test]
    fn metadata_validation() {
        let mut m = MetadataVector {
            offered_price: 1.0,
            zestimate: 1.0,
            size: 1.0,
            age: 0.0,
            bedrooms: 0.0,
            bathrooms: 0.0,
        };
        assert!(m.validate().is_ok());
        m.size = 0.0;
        assert!(m.validate().is_err());
        m.size = 1.0;
        m.bedrooms = -1.0;
        assert!(m.validate().is_err());
    }
}
