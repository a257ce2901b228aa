//! Training examples: per-pixel features paired with the exact transparent
//! color over black, generated from procedural layered scenes.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::color::Rgb;
use crate::dfaoit::{features_of_sorted, FEATURE_COUNT};
use crate::fragment::{over_composite, FrameFragmentBuffer};
use crate::mlp::TrainingSet;
use crate::raster::{gen_layered_scene, rasterize_scene, SceneError, MAX_LAYERS};

pub const DATASET_MAGIC: &[u8; 8] = b"DFADATA1";
pub const HEADER_BYTES: usize = 16;
/// `u32 n` followed by 14 `f32`.
pub const RECORD_BYTES: usize = 4 + 14 * 4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("file truncated: {found} bytes is not a header plus whole {RECORD_BYTES}-byte records")]
    Truncated { found: usize },
    #[error("header declares {declared} records but the file holds {actual}")]
    CountMismatch { declared: u32, actual: usize },
    #[error("reserved header field is {0}, expected 0")]
    Reserved(u32),
    #[error("only {achieved} of {requested} records could be generated")]
    Unreachable { requested: usize, achieved: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// One training example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    pub n: u32,
    pub features: [f32; FEATURE_COUNT],
    /// Exact composite of the pixel over black.
    pub target: [f32; 3],
    pub bg_product: f32,
}

impl TrainRecord {
    /// Builds a record from a far-to-near sorted fragment slice.
    pub fn from_sorted(sorted: &[crate::Fragment]) -> Self {
        let rec = features_of_sorted(sorted);
        TrainRecord {
            n: rec.n,
            features: rec.features.to_array(),
            target: over_composite(sorted, Rgb::BLACK).to_array(),
            bg_product: rec.bg_product,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetParams {
    pub scene_count: usize,
    pub layers_min: usize,
    pub layers_max: usize,
    pub alpha_min: f32,
    pub alpha_max: f32,
    /// Square render size in pixels.
    pub resolution: usize,
    pub master_seed: u64,
    pub target_example_count: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self::for_count(200_000, 0)
    }
}

impl DatasetParams {
    /// Default ranges at 64x64 with just enough scenes for `count` records.
    pub fn for_count(count: usize, master_seed: u64) -> Self {
        let resolution = 64;
        Self {
            scene_count: count.div_ceil(resolution * resolution).max(1),
            layers_min: 10,
            layers_max: 50,
            alpha_min: 0.01,
            alpha_max: 0.85,
            resolution,
            master_seed,
            target_example_count: count,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidParams(m));
        if !(3 <= self.layers_min && self.layers_min <= self.layers_max && self.layers_max <= MAX_LAYERS) {
            return bad(format!("need 3 <= layers_min <= layers_max <= {MAX_LAYERS}"));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min <= self.alpha_max && self.alpha_max <= 1.0) {
            return bad("need 0 <= alpha_min <= alpha_max <= 1".into());
        }
        if self.resolution == 0 {
            return bad("resolution must be positive".into());
        }
        Ok(())
    }

    /// Per-scene generator inputs, derived from `master_seed` only.
    pub fn scene_plans(&self) -> Vec<ScenePlan> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.scene_count)
            .map(|_| ScenePlan {
                layers: rng.gen_range(self.layers_min..=self.layers_max),
                seed: rng.gen(),
                palette_seed: rng.gen(),
            })
            .collect()
    }

    pub fn render_plan(&self, plan: &ScenePlan) -> Result<FrameFragmentBuffer, DatasetError> {
        let scene = gen_layered_scene(plan.seed, plan.layers, self.alpha_min, self.alpha_max, plan.palette_seed)?;
        let mut frame = rasterize_scene(&scene, self.resolution, self.resolution);
        frame.sort_all();
        Ok(frame)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenePlan {
    pub layers: usize,
    pub seed: u64,
    pub palette_seed: u64,
}

/// Records for every pixel with at least three fragments, scene by scene in
/// row-major order, stopping at `target_example_count`.
pub fn generate_dataset(params: &DatasetParams) -> Result<Vec<TrainRecord>, DatasetError> {
    params.validate()?;
    let wanted = params.target_example_count;
    let mut records = Vec::with_capacity(wanted);
    for plan in params.scene_plans() {
        if records.len() >= wanted {
            break;
        }
        let frame = params.render_plan(&plan)?;
        let take = wanted - records.len();
        records.extend(
            frame
                .pixels()
                .iter()
                .filter(|px| px.len() >= 3)
                .take(take)
                .map(|px| TrainRecord::from_sorted(px.fragments())),
        );
    }
    if records.len() < wanted {
        return Err(DatasetError::Unreachable { requested: wanted, achieved: records.len() });
    }
    Ok(records)
}

pub fn encode_dataset(records: &[TrainRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + records.len() * RECORD_BYTES);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for r in records {
        out.extend_from_slice(&r.n.to_le_bytes());
        for v in r.features.iter().chain(&r.target).chain(std::iter::once(&r.bg_product)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes(b[..4].try_into().unwrap())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<TrainRecord>, DatasetError> {
    if bytes.len() < DATASET_MAGIC.len() || &bytes[..8] != DATASET_MAGIC {
        return Err(DatasetError::BadMagic);
    }
    if bytes.len() < HEADER_BYTES {
        return Err(DatasetError::Truncated { found: bytes.len() });
    }
    let declared = le_u32(&bytes[8..]);
    let reserved = le_u32(&bytes[12..]);
    if reserved != 0 {
        return Err(DatasetError::Reserved(reserved));
    }
    let body = &bytes[HEADER_BYTES..];
    if body.len() % RECORD_BYTES != 0 {
        return Err(DatasetError::Truncated { found: bytes.len() });
    }
    let actual = body.len() / RECORD_BYTES;
    if actual != declared as usize {
        return Err(DatasetError::CountMismatch { declared, actual });
    }
    Ok(body
        .chunks_exact(RECORD_BYTES)
        .map(|chunk| {
            let f = |i: usize| le_f32(&chunk[4 + 4 * i..]);
            TrainRecord {
                n: le_u32(chunk),
                features: std::array::from_fn(f),
                target: [f(10), f(11), f(12)],
                bg_product: f(13),
            }
        })
        .collect())
}

pub fn write_dataset(records: &[TrainRecord], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    fs::write(path, encode_dataset(records))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<TrainRecord>, DatasetError> {
    decode_dataset(&fs::read(path)?)
}

/// Deterministic shuffled split into `(train, val)`.
pub fn split(
    records: &[TrainRecord],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainRecord>, Vec<TrainRecord>), DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::InvalidParams(format!("val_fraction {val_fraction} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (records.len() as f64 * val_fraction).round() as usize;
    let (val, train) = order.split_at(n_val);
    Ok((train.iter().map(|&i| records[i]).collect(), val.iter().map(|&i| records[i]).collect()))
}

/// Feature/target matrix for the trainer.
pub fn to_training_set(records: &[TrainRecord]) -> TrainingSet {
    let mut set = TrainingSet::with_capacity(FEATURE_COUNT, 3, records.len());
    for r in records {
        set.push(&r.features.map(f64::from), &r.target.map(f64::from));
    }
    set
}

/// Count of records per fragment count `n`, ascending by `n`.
pub fn n_histogram(records: &[TrainRecord]) -> Vec<(u32, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for r in records {
        *counts.entry(r.n).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}
