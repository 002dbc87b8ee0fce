//! Seeded road layout randomization.
//!
//! A scene is produced by erasing the markings of a real label and placing a
//! random number of marking instances at random road positions, rotations
//! and parameters. Instances are projected through the scene's camera rig, so
//! scale follows from distance. Occlusion falls out of writing only over road
//! pixels; instances hidden below a minimum visible fraction are resampled.
//!
//! All randomness comes from ChaCha8 streams. The stream of image `i` is
//! seeded by [`image_seed`]`(master_seed, i)`, so every output is a pure
//! function of its inputs regardless of thread scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, GroundPoint, GroundProjector, PixelPoint};
use crate::io::{self, ColourTable, ManifestEntry};
use crate::labelmap::{erase_markings, rasterize_instance, LabelMap, SceneClassConfig};
use crate::markings::{instantiate, MarkingPose, Palette, Params, RARE_CLASSES};

pub const DEFAULT_RETRY_BUDGET: u32 = 20;
pub const DEFAULT_MIN_PLACED_FRACTION: f64 = 0.25;

/// Attempts at a whole dataset scene before it is reported as failed.
pub const SCENE_ATTEMPTS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub min: u32,
    pub max: u32,
}

/// Where anchors may land. Only sampling over the road mask is supported:
/// a road pixel is drawn uniformly and back-projected onto the road plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralMode {
    #[default]
    RoadMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum YawDistribution {
    /// Camera heading plus a uniform jitter in `[-jitter, jitter]` radians.
    Aligned { jitter: f64 },
    /// Uniform over the full circle.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    /// Relative class-selection weights, by palette name.
    pub class_weights: BTreeMap<String, f64>,
    /// Instances attempted per image, uniform in `[min, max]`.
    pub quantity: Quantity,
    /// Anchor clamp on forward distance, metres.
    pub forward_range: [f64; 2],
    /// Anchor clamp on lateral offset, metres.
    pub lateral_range: [f64; 2],
    pub lateral_mode: LateralMode,
    pub yaw: YawDistribution,
    /// Per class, per parameter: uniform sampling range. Integer parameters
    /// draw integers within the range.
    pub param_jitter: BTreeMap<String, BTreeMap<String, [f64; 2]>>,
    /// Minimum visible share of an instance's projected footprint.
    pub min_placed_fraction: f64,
    pub retry_budget: u32,
    pub master_seed: u64,
    pub scene: SceneClassConfig,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        let zigzag = BTreeMap::from([
            ("periods".to_string(), [4.0, 8.0]),
            ("configuration".to_string(), [2.0, 3.0]),
        ]);
        Self {
            class_weights: RARE_CLASSES.iter().map(|c| (c.to_string(), 1.0)).collect(),
            quantity: Quantity { min: 1, max: 3 },
            forward_range: [4.0, 40.0],
            lateral_range: [-8.0, 8.0],
            lateral_mode: LateralMode::RoadMask,
            yaw: YawDistribution::Aligned { jitter: 0.15 },
            param_jitter: BTreeMap::from([("zigzag".to_string(), zigzag)]),
            min_placed_fraction: DEFAULT_MIN_PLACED_FRACTION,
            retry_budget: DEFAULT_RETRY_BUDGET,
            master_seed: 0,
            scene: SceneClassConfig::default(),
        }
    }
}

fn ordered(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::InvalidConfig(format!("{name} must be an ordered finite range, got {r:?}")));
    }
    Ok(())
}

impl RandomizationConfig {
    /// Check internal consistency and that every class and parameter named
    /// exists in `palette` with jitter ranges inside the template's bounds.
    pub fn validate(&self, palette: &Palette) -> Result<()> {
        self.scene.validate()?;
        if self.quantity.min > self.quantity.max {
            return Err(Error::InvalidConfig("quantity.min exceeds quantity.max".into()));
        }
        ordered("forward_range", self.forward_range)?;
        ordered("lateral_range", self.lateral_range)?;
        if self.forward_range[0] <= 0.0 {
            return Err(Error::InvalidConfig("forward_range must lie ahead of the camera".into()));
        }
        if !(0.0..=1.0).contains(&self.min_placed_fraction) {
            return Err(Error::InvalidConfig("min_placed_fraction must lie in [0, 1]".into()));
        }
        if self.retry_budget == 0 {
            return Err(Error::InvalidConfig("retry_budget must be at least 1".into()));
        }
        if let YawDistribution::Aligned { jitter } = self.yaw {
            if !(jitter.is_finite() && jitter >= 0.0) {
                return Err(Error::InvalidConfig("yaw jitter must be finite and non-negative".into()));
            }
        }
        for (name, &w) in &self.class_weights {
            let entry = palette.by_name(name)?;
            if !self.scene.is_marking(entry.id) {
                return Err(Error::InvalidConfig(format!("class `{name}` is not a marking id")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("weight of `{name}` must be finite and non-negative")));
            }
        }
        if self.quantity.max > 0 && !self.class_weights.values().any(|&w| w > 0.0) {
            return Err(Error::InvalidConfig("class_weights has no positive weight".into()));
        }
        for (class, ranges) in &self.param_jitter {
            let template = palette.by_name(class)?.template;
            for (param, &r) in ranges {
                ordered(&format!("param_jitter.{class}.{param}"), r)?;
                let spec = template
                    .param_specs()
                    .iter()
                    .find(|s| s.name == param)
                    .ok_or_else(|| Error::UnknownParam {
                        template: template.name().into(),
                        param: param.clone(),
                    })?;
                if r[0] < spec.min || r[1] > spec.max {
                    return Err(Error::InvalidConfig(format!(
                        "param_jitter.{class}.{param} {r:?} exceeds [{}, {}]",
                        spec.min, spec.max
                    )));
                }
                if spec.integer && r[0].ceil() > r[1].floor() {
                    return Err(Error::InvalidConfig(format!(
                        "param_jitter.{class}.{param} {r:?} contains no integer"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The same configuration selecting only `class`.
    pub fn restricted_to(&self, class: &str) -> Self {
        Self {
            class_weights: BTreeMap::from([(class.to_string(), 1.0)]),
            ..self.clone()
        }
    }
}

/// Why a placement attempt was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    /// The sampled pixel back-projects to no road point (at or above the horizon).
    NoGroundIntersection,
    /// No part of the instance is in front of the camera.
    NotVisible,
    /// The instance covers no pixel.
    EmptyFootprint,
    /// Visible fraction below the configured minimum.
    Occluded,
}

/// One placement attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub class: String,
    pub class_id: u8,
    /// Zero-based instance slot within the scene.
    pub slot: u32,
    /// Zero-based attempt within the slot's retry budget.
    pub attempt: u32,
    pub pose: MarkingPose,
    pub params: Params,
    pub placed_pixels: usize,
    pub footprint_pixels: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_label: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_label: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_index: Option<u64>,
    /// Seed of the stream that produced this scene.
    pub seed: u64,
    pub requested_instances: u32,
    pub accepted_instances: u32,
    pub instances: Vec<InstanceRecord>,
}

impl SceneRecord {
    pub fn accepted(&self) -> impl Iterator<Item = &InstanceRecord> {
        self.instances.iter().filter(|r| r.outcome == Outcome::Accepted)
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of image `index`: element `index + 1` of the SplitMix64 sequence
/// started at `master_seed`. Distinct indices give distinct seeds.
pub fn image_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

fn sample_yaw(rng: &mut ChaCha8Rng, dist: YawDistribution, camera_yaw: f64) -> f64 {
    match dist {
        YawDistribution::Aligned { jitter } if jitter > 0.0 => camera_yaw + rng.random_range(-jitter..=jitter),
        YawDistribution::Aligned { .. } => camera_yaw,
        YawDistribution::Uniform => rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

fn sample_params(rng: &mut ChaCha8Rng, ranges: Option<&BTreeMap<String, [f64; 2]>>, palette: &Palette, class: &str) -> Params {
    let mut params = Params::new();
    let (Some(ranges), Ok(entry)) = (ranges, palette.by_name(class)) else {
        return params;
    };
    for (name, &[lo, hi]) in ranges {
        let integer = entry.template.param_specs().iter().any(|s| s.name == name && s.integer);
        let v = if integer {
            rng.random_range(lo.ceil() as i64..=hi.floor() as i64) as f64
        } else if lo < hi {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        params.insert(name.clone(), v);
    }
    params
}

/// Erase the markings of `label` and place randomized instances on its road.
///
/// Deterministic in `(label, projector, palette, cfg, seed)`. Errors when the
/// label has no road pixel or does not match the rig's image size; slots whose
/// retry budget runs out are recorded and left empty.
pub fn generate_scene(
    label: &LabelMap,
    projector: &GroundProjector,
    camera_yaw: f64,
    palette: &Palette,
    cfg: &RandomizationConfig,
    seed: u64,
) -> Result<(LabelMap, SceneRecord)> {
    let k = projector.intrinsics();
    if (k.image_width, k.image_height) != (label.width(), label.height()) {
        return Err(Error::DimensionMismatch(format!(
            "rig images are {}x{}, label is {}x{}",
            k.image_width,
            k.image_height,
            label.width(),
            label.height()
        )));
    }
    let mut current = erase_markings(label, &cfg.scene);
    let road: Vec<usize> = current
        .as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v == cfg.scene.road_id).then_some(i))
        .collect();
    if road.is_empty() {
        return Err(Error::UnusableScene);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(cfg.quantity.min..=cfg.quantity.max);
    let mut record = SceneRecord {
        source_label: None,
        output_label: None,
        image_index: None,
        seed,
        requested_instances: n,
        accepted_instances: 0,
        instances: Vec::new(),
    };
    if n == 0 {
        return Ok((current, record));
    }

    let names: Vec<&String> = cfg.class_weights.keys().collect();
    let chooser = WeightedIndex::new(cfg.class_weights.values())
        .map_err(|e| Error::InvalidConfig(format!("class_weights: {e}")))?;
    let width = label.width() as usize;
    let [lat_lo, lat_hi] = cfg.lateral_range;
    let [fwd_lo, fwd_hi] = cfg.forward_range;

    for slot in 0..n {
        let class = names[chooser.sample(&mut rng)].as_str();
        let class_id = palette.by_name(class)?.id;
        for attempt in 0..cfg.retry_budget {
            let pixel = road[rng.random_range(0..road.len())];
            let q = PixelPoint::new(
                (pixel % width) as f64 + rng.random::<f64>(),
                (pixel / width) as f64 + rng.random::<f64>(),
            );
            let yaw = sample_yaw(&mut rng, cfg.yaw, camera_yaw);
            let params = sample_params(&mut rng, cfg.param_jitter.get(class), palette, class);
            let mut rec = InstanceRecord {
                class: class.to_string(),
                class_id,
                slot,
                attempt,
                pose: MarkingPose::new(GroundPoint::default(), yaw),
                params: params.clone(),
                placed_pixels: 0,
                footprint_pixels: 0,
                outcome: Outcome::NoGroundIntersection,
            };
            let Ok(g) = projector.to_ground(q) else {
                record.instances.push(rec);
                continue;
            };
            let anchor = GroundPoint::new(g.lateral.clamp(lat_lo, lat_hi), g.forward.clamp(fwd_lo, fwd_hi));
            let instance = instantiate(palette, class, &params, MarkingPose::new(anchor, yaw))?;
            rec.pose = instance.pose;
            rec.params = instance.params.clone();
            let placement = match rasterize_instance(&current, &instance, projector, &cfg.scene) {
                Ok(p) => p,
                Err(Error::NotVisible(_)) => {
                    rec.outcome = Outcome::NotVisible;
                    record.instances.push(rec);
                    continue;
                }
                Err(e) => return Err(e),
            };
            rec.placed_pixels = placement.placed.len();
            rec.footprint_pixels = placement.footprint;
            rec.outcome = match placement.placed_fraction() {
                None => Outcome::EmptyFootprint,
                Some(f) if f < cfg.min_placed_fraction => Outcome::Occluded,
                Some(_) => Outcome::Accepted,
            };
            let accepted = rec.outcome == Outcome::Accepted;
            record.instances.push(rec);
            if accepted {
                current = placement.label;
                record.accepted_instances += 1;
                break;
            }
        }
    }
    Ok((current, record))
}

/// A source scene: its label and the rig it was captured with.
#[derive(Debug, Clone)]
pub struct SourceScene {
    pub label_path: PathBuf,
    pub rig: CameraRig,
}

/// Labels requested for one target class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRequest {
    pub class: String,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct DatasetJob {
    pub requests: Vec<ClassRequest>,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Also write colour renderings under `preview/`.
    pub preview: bool,
}

/// Per-entry failure during dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub image_index: u64,
    pub class: String,
    pub source_label: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetOutcome {
    /// Successful scenes in image-index order.
    pub records: Vec<SceneRecord>,
    pub errors: Vec<EntryError>,
}

/// Manifest written next to the generated labels.
pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone)]
struct PlanItem {
    index: u64,
    class: String,
    ordinal: usize,
    source: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Source order for `class`: a seeded permutation, cycled when more labels
/// than sources are requested so backgrounds repeat only when they must.
pub fn source_permutation(master_seed: u64, class: &str, sources: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..sources).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ fnv1a(class.as_bytes())));
    perm.shuffle(&mut rng);
    perm
}

fn plan(requests: &[ClassRequest], sources: usize, master_seed: u64) -> Vec<PlanItem> {
    let mut items = Vec::new();
    let mut index = 0u64;
    for req in requests {
        let perm = source_permutation(master_seed, &req.class, sources);
        for ordinal in 0..req.count {
            items.push(PlanItem {
                index,
                class: req.class.clone(),
                ordinal,
                source: perm[ordinal % sources],
            });
            index += 1;
        }
    }
    items
}

/// Output label path for the `ordinal`-th label of `class`, relative to the
/// output directory.
pub fn output_name(class: &str, ordinal: usize) -> PathBuf {
    Path::new("labels").join(format!("{class}_{ordinal:06}.png"))
}

struct SceneContext<'a> {
    sources: &'a [SourceScene],
    palette: &'a Palette,
    cfg: &'a RandomizationConfig,
    job: &'a DatasetJob,
    table: &'a ColourTable,
}

fn run_item(ctx: &SceneContext<'_>, item: &PlanItem) -> Result<SceneRecord> {
    let src = &ctx.sources[item.source];
    let label = io::read_label(&src.label_path)?;
    let projector = src.rig.projector()?;
    let mut cfg = ctx.cfg.restricted_to(&item.class);
    cfg.quantity.min = cfg.quantity.min.max(1);
    cfg.quantity.max = cfg.quantity.max.max(cfg.quantity.min);

    let base = image_seed(ctx.cfg.master_seed, item.index);
    for attempt in 0..SCENE_ATTEMPTS {
        let seed = if attempt == 0 { base } else { image_seed(base, attempt as u64) };
        let (out, mut record) = generate_scene(&label, &projector, src.rig.yaw, ctx.palette, &cfg, seed)?;
        if record.accepted_instances == 0 {
            continue;
        }
        let rel = output_name(&item.class, item.ordinal);
        io::write_label(&ctx.job.out_dir.join(&rel), &out, ctx.table)?;
        if ctx.job.preview {
            let preview = Path::new("preview").join(rel.file_name().expect("file name"));
            io::write_rgb(&ctx.job.out_dir.join(preview), &io::colourize(&out, ctx.table))?;
        }
        record.source_label = Some(src.label_path.clone());
        record.output_label = Some(rel);
        record.image_index = Some(item.index);
        return Ok(record);
    }
    Err(Error::NotVisible(format!(
        "no `{}` instance could be placed in {} scene attempts",
        item.class, SCENE_ATTEMPTS
    )))
}

/// Generate the requested labels, write them and the JSONL manifest under
/// `job.out_dir`, and return the records and per-entry failures.
///
/// Every output carries at least one accepted instance of its target class.
/// Output is independent of the worker count.
pub fn generate_dataset(
    sources: &[SourceScene],
    palette: &Palette,
    cfg: &RandomizationConfig,
    job: &DatasetJob,
) -> Result<DatasetOutcome> {
    cfg.validate(palette)?;
    for req in &job.requests {
        cfg.restricted_to(&req.class).validate(palette)?;
    }
    let total: usize = job.requests.iter().map(|r| r.count).sum();
    if total > 0 && sources.is_empty() {
        return Err(Error::EmptyInput("no source labels"));
    }
    std::fs::create_dir_all(&job.out_dir).map_err(|e| Error::io(&job.out_dir, e))?;
    let table = io::colour_table(palette, cfg.scene.road_id, cfg.scene.ignore_id);
    let items = plan(&job.requests, sources.len(), cfg.master_seed);
    let ctx = SceneContext {
        sources,
        palette,
        cfg,
        job,
        table: &table,
    };
    let work = || -> Vec<Result<SceneRecord>> { items.par_iter().map(|item| run_item(&ctx, item)).collect() };
    let results = match job.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut outcome = DatasetOutcome::default();
    for (item, res) in items.iter().zip(results) {
        match res {
            Ok(r) => outcome.records.push(r),
            Err(e) => outcome.errors.push(EntryError {
                image_index: item.index,
                class: item.class.clone(),
                source_label: sources[item.source].label_path.clone(),
                message: e.to_string(),
            }),
        }
    }
    io::write_jsonl(&job.out_dir.join(MANIFEST_NAME), &outcome.records)?;
    Ok(outcome)
}

/// Dataset-manifest entries for generated labels, tagged `synthetic`.
pub fn output_entries(records: &[SceneRecord]) -> Vec<ManifestEntry> {
    records
        .iter()
        .filter_map(|r| r.output_label.clone())
        .map(|p| ManifestEntry {
            tags: vec!["synthetic".into()],
            ..ManifestEntry::label(p)
        })
        .collect()
}
