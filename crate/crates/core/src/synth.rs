//! Synthetic worlds with known ground truth, and simulated annotators.
//!
//! A generated world contains houses whose photos (source `zillow`) carry a
//! latent luxury in [0, 8] and a room category, plus auxiliary `houzz`,
//! `places` and `google` photos that feed the grid-task strata. Prices follow
//! a hedonic log-linear law:
//!
//! ```text
//! ln(price) = w0 + w_size ln(size) + w_age ln(1 + age)
//!           + w_bed ln(1 + bedrooms) + w_bath ln(1 + bathrooms)
//!           + (beta / reference_price) * mean_latent_luxury + eps,
//! eps ~ N(0, noise_sigma^2)
//! ```
//!
//! so that near `reference_price` one unit of mean luxury is worth roughly
//! `beta` dollars. Offered price and Zestimate are the purchase price times
//! independent log-normal noise.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::crowd::{AnchorResponse, GridResponse, GridTask};
use crate::error::{Error, Result};
use crate::model::{
    Dataset, HouseRecord, LuxuryLevel, MetadataVector, PhotoRecord, RoomCategory, Source, Split,
};
use crate::rng::{derive_seed, rng};

/// Mean luxury assigned to a house without photos when computing its price.
pub const NO_PHOTO_MEAN_LUXURY: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetadataWeights {
    pub intercept: f64,
    pub size: f64,
    pub age: f64,
    pub bedrooms: f64,
    pub bathrooms: f64,
}

impl Default for MetadataWeights {
    fn default() -> Self {
        MetadataWeights {
            intercept: 6.0,
            size: 0.8,
            age: -0.06,
            bedrooms: 0.05,
            bathrooms: 0.1,
        }
    }
}

impl MetadataWeights {
    /// `w . log-metadata`, the structural part of the log price.
    pub fn log_structure(&self, m: &MetadataVector) -> f64 {
        self.intercept
            + self.size * m.size.ln()
            + self.age * m.age.ln_1p()
            + self.bedrooms * m.bedrooms.ln_1p()
            + self.bathrooms * m.bathrooms.ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub n_houses: usize,
    pub photos_per_house_range: [usize; 2],
    pub feature_dim: usize,
    /// USD per unit of mean latent luxury, at `reference_price`.
    pub luxury_price_weight: f64,
    pub reference_price: f64,
    pub metadata_weights: MetadataWeights,
    /// Standard deviation of the log-price noise.
    pub noise_sigma: f64,
    /// Log-normal sigma of the Zestimate around the purchase price.
    pub zestimate_noise: f64,
    /// Log-normal sigma of the offered price around the purchase price.
    pub offered_noise: f64,
    /// Gaussian perturbation added to every feature entry.
    pub feature_noise: f64,
    /// Auxiliary photos per room for each of houzz, places and google.
    pub aux_photos_per_room: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_houses: 5000,
            photos_per_house_range: [3, 8],
            feature_dim: 16,
            luxury_price_weight: 40_000.0,
            reference_price: 300_000.0,
            metadata_weights: MetadataWeights::default(),
            noise_sigma: 0.02,
            zestimate_noise: 0.08,
            offered_noise: 0.10,
            feature_noise: 0.15,
            aux_photos_per_room: 40,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.photos_per_house_range;
        let checks: [(bool, &str); 9] = [
            (self.n_houses >= 1, "n_houses must be >= 1"),
            (lo <= hi, "photos_per_house_range must be [min, max] with min <= max"),
            (self.feature_dim >= RoomCategory::COUNT + 1, "feature_dim must be >= 8"),
            (self.luxury_price_weight >= 0.0, "luxury_price_weight must be >= 0"),
            (self.reference_price > 0.0, "reference_price must be > 0"),
            (self.noise_sigma >= 0.0, "noise_sigma must be >= 0"),
            (
                self.zestimate_noise >= 0.0 && self.offered_noise >= 0.0 && self.feature_noise >= 0.0,
                "noise scales must be >= 0",
            ),
            ((0.0..=1.0).contains(&self.test_fraction), "test_fraction must lie in [0, 1]"),
            (
                [
                    self.luxury_price_weight,
                    self.reference_price,
                    self.noise_sigma,
                    self.zestimate_noise,
                    self.offered_noise,
                    self.feature_noise,
                ]
                .iter()
                .all(|v| v.is_finite()),
                "config values must be finite",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }

    /// Log-price coefficient on mean luxury.
    pub fn luxury_log_coefficient(&self) -> f64 {
        self.luxury_price_weight / self.reference_price
    }

    /// Noise-free log price of a house under this config's price law.
    pub fn log_price_index(&self, metadata: &MetadataVector, mean_luxury: f64) -> f64 {
        self.metadata_weights.log_structure(metadata) + self.luxury_log_coefficient() * mean_luxury
    }
}

/// Whether a room's luxury ramp runs high-to-low in feature space.
fn ramp_descends(room: RoomCategory) -> bool {
    room == RoomCategory::Exterior
}

/// Noise-free feature encoding: a one-hot room block followed by a
/// thermometer ramp over [0, 8]. The ramp is reversed for exterior photos,
/// so luxury is linearly decodable within a room while a single model
/// shared by all rooms misreads exteriors.
pub fn encode_features(room: RoomCategory, latent: f64, dim: usize) -> Vec<f64> {
    let mut f = vec![0.0; dim];
    f[room.index()] = 1.0;
    let ramp = dim - RoomCategory::COUNT;
    let scaled = latent * ramp as f64 / 8.0;
    for j in 0..ramp {
        let t = (scaled - j as f64).clamp(0.0, 1.0);
        f[RoomCategory::COUNT + j] = if ramp_descends(room) { 1.0 - t } else { t };
    }
    f
}

/// Houzz-style budget label: the quartile of [0, 8] holding the latent.
pub fn budget_from_latent(latent: f64) -> u8 {
    ((latent / 2.0).floor() as i64 + 1).clamp(1, 4) as u8
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite, non-negative sd")
}

fn make_photo(
    id: String,
    source: Source,
    house_id: Option<String>,
    room: Option<RoomCategory>,
    config: &WorldConfig,
    r: &mut crate::rng::Rng,
) -> PhotoRecord {
    let latent: f64 = r.random_range(0.0..=8.0);
    let room = room.unwrap_or_else(|| RoomCategory::ALL[r.random_range(0..RoomCategory::COUNT)]);
    let noise = normal(0.0, config.feature_noise);
    let features = encode_features(room, latent, config.feature_dim)
        .into_iter()
        .map(|v| v + noise.sample(r))
        .collect();
    PhotoRecord {
        id,
        source,
        features,
        room_true: Some(room),
        budget_level: (source == Source::Houzz).then(|| budget_from_latent(latent)),
        latent_luxury: Some(latent),
        house_id,
    }
}

/// Mean latent luxury over a house's photos.
pub fn mean_latent_luxury(house: &HouseRecord, dataset: &Dataset) -> Option<f64> {
    if house.photo_ids.is_empty() {
        return Some(NO_PHOTO_MEAN_LUXURY);
    }
    let mut sum = 0.0;
    for pid in &house.photo_ids {
        sum += dataset.photo(pid)?.latent_luxury?;
    }
    Some(sum / house.photo_ids.len() as f64)
}

pub fn generate_world(config: &WorldConfig) -> Result<Dataset> {
    config.validate()?;
    let mut r = rng(config.seed);
    let width = config.n_houses.to_string().len().max(5);
    let mut photos = Vec::new();
    let mut houses = Vec::with_capacity(config.n_houses);

    let mut order: Vec<usize> = (0..config.n_houses).collect();
    order.shuffle(&mut rng(derive_seed(config.seed, "split")));
    let n_test = (config.n_houses as f64 * config.test_fraction).round() as usize;
    let mut is_test = vec![false; config.n_houses];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }

    let coef = config.luxury_log_coefficient();
    let eps = normal(0.0, config.noise_sigma);
    let zest = normal(0.0, config.zestimate_noise);
    let offer = normal(0.0, config.offered_noise);
    let size_dist = normal(1800f64.ln(), 0.35);
    let jitter = normal(0.0, 0.6);
    let [lo, hi] = config.photos_per_house_range;

    for i in 0..config.n_houses {
        let house_id = format!("h{i:0width$}");
        let n_photos = r.random_range(lo..=hi);
        let mut photo_ids = Vec::with_capacity(n_photos);
        let mut lux_sum = 0.0;
        for j in 0..n_photos {
            let id = format!("{house_id}-{j}");
            let p = make_photo(id.clone(), Source::Zillow, Some(house_id.clone()), None, config, &mut r);
            lux_sum += p.latent_luxury.unwrap_or_default();
            photos.push(p);
            photo_ids.push(id);
        }
        let mean_lux = if n_photos == 0 {
            NO_PHOTO_MEAN_LUXURY
        } else {
            lux_sum / n_photos as f64
        };

        let size = size_dist.sample(&mut r).exp().round().max(300.0);
        let bedrooms = (size / 600.0 + jitter.sample(&mut r)).round().clamp(1.0, 6.0);
        let bathrooms = (0.6 * bedrooms + jitter.sample(&mut r)).round().clamp(1.0, 5.0);
        let age = f64::from(r.random_range(0u32..100));
        let mut metadata = MetadataVector {
            offered_price: 1.0,
            zestimate: 1.0,
            size,
            age,
            bedrooms,
            bathrooms,
        };
        let log_price = config.metadata_weights.log_structure(&metadata) + coef * mean_lux + eps.sample(&mut r);
        let price = log_price.exp();
        metadata.zestimate = price * zest.sample(&mut r).exp();
        metadata.offered_price = price * offer.sample(&mut r).exp();

        houses.push(HouseRecord {
            id: house_id,
            metadata,
            photo_ids,
            purchase_price: Some(price),
            split: if is_test[i] { Split::Test } else { Split::Train },
        });
    }

    for source in [Source::Houzz, Source::Places, Source::Google] {
        for room in RoomCategory::ALL {
            for j in 0..config.aux_photos_per_room {
                let id = format!("{}-{}-{j:04}", source.as_str(), room.as_str());
                photos.push(make_photo(id, source, None, Some(room), config, &mut r));
            }
        }
    }

    Dataset::new(photos, houses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorModel {
    /// Latent distance within which two photos read as similar.
    pub similarity_threshold: f64,
    /// Logistic noise scale on grid comparisons; 0 gives a hard threshold.
    pub grid_noise: f64,
    pub level_noise_sigma: f64,
    /// Probability of attending to a task instead of answering at random.
    pub reliability: f64,
}

impl Default for AnnotatorModel {
    fn default() -> Self {
        AnnotatorModel {
            similarity_threshold: 1.0,
            grid_noise: 0.25,
            level_noise_sigma: 0.75,
            reliability: 0.95,
        }
    }
}

impl AnnotatorModel {
    /// Noise-free, always attentive annotator.
    pub fn perfect() -> Self {
        AnnotatorModel {
            similarity_threshold: 1.0,
            grid_noise: 0.0,
            level_noise_sigma: 0.0,
            reliability: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.similarity_threshold > 0.0
            && self.grid_noise >= 0.0
            && self.level_noise_sigma >= 0.0
            && (0.0..=1.0).contains(&self.reliability)
            && self.similarity_threshold.is_finite()
            && self.grid_noise.is_finite()
            && self.level_noise_sigma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("annotator model out of range: {self:?}")))
        }
    }

    /// Probability that an attentive annotator marks a gallery photo at
    /// latent distance `distance` from the probe as similar.
    pub fn select_probability(&self, distance: f64) -> f64 {
        let margin = self.similarity_threshold - distance;
        if self.grid_noise == 0.0 {
            if margin >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 / (1.0 + (-margin / self.grid_noise).exp())
        }
    }
}

fn latent_of(dataset: &Dataset, id: &str) -> Result<f64> {
    let photo = dataset
        .photo(id)
        .ok_or_else(|| Error::NotFound(format!("photo {id}")))?;
    photo
        .latent_luxury
        .ok_or_else(|| Error::invalid(format!("photo {id} has no latent_luxury")))
}

pub fn simulate_grid_response(
    task: &GridTask,
    dataset: &Dataset,
    model: &AnnotatorModel,
    worker_id: &str,
    seed: u64,
) -> Result<GridResponse> {
    model.validate()?;
    let probe = latent_of(dataset, &task.probe)?;
    let latents = task
        .gallery
        .iter()
        .map(|g| latent_of(dataset, g))
        .collect::<Result<Vec<_>>>()?;
    let mut r = rng(seed);
    let attending = r.random::<f64>() < model.reliability;
    let selected = task
        .gallery
        .iter()
        .zip(latents)
        .filter(|(_, l)| {
            let p = if attending {
                model.select_probability((l - probe).abs())
            } else {
                0.5
            };
            r.random::<f64>() < p
        })
        .map(|(g, _)| g.clone())
        .collect();
    Ok(GridResponse {
        task_id: task.id.clone(),
        worker_id: worker_id.to_string(),
        selected,
        timestamp: 0,
    })
}

pub fn simulate_anchor_level(photo: &PhotoRecord, model: &AnnotatorModel, seed: u64) -> Result<LuxuryLevel> {
    model.validate()?;
    let latent = photo
        .latent_luxury
        .ok_or_else(|| Error::invalid(format!("photo {} has no latent_luxury", photo.id)))?;
    let mut r = rng(seed);
    let attending = r.random::<f64>() < model.reliability;
    if attending {
        let noise = normal(0.0, model.level_noise_sigma).sample(&mut r);
        Ok(LuxuryLevel::from_continuous(latent + noise))
    } else {
        LuxuryLevel::new(r.random_range(LuxuryLevel::MIN..=LuxuryLevel::MAX))
    }
}

pub fn simulate_anchor_response(
    task_id: &str,
    photo: &PhotoRecord,
    model: &AnnotatorModel,
    worker_id: &str,
    seed: u64,
) -> Result<AnchorResponse> {
    Ok(AnchorResponse {
        task_id: task_id.to_string(),
        worker_id: worker_id.to_string(),
        level: simulate_anchor_level(photo, model, seed)?,
        timestamp: 0,
    })
}
