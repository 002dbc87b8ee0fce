use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadrand_core::balance::{weights_for, BalanceOptions, ClassStats, Scheme, StatsReport};
use roadrand_core::geometry::CameraRig;
use roadrand_core::io::{self, ManifestEntry};
use roadrand_core::labelmap::{composite_road_surface, SceneClassConfig};
use roadrand_core::markings::{Palette, TemplateKind};
use roadrand_core::metrics::{evaluate_set, Averaging};
use roadrand_core::randomizer::{self, ClassRequest, DatasetJob, RandomizationConfig, SourceScene};
use roadrand_core::synthloss::{self, FeaturePyramid, L1Mode, LossWeights, ScoreMap, Tensor};
use roadrand_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::schema;
use crate::GenerateArgs;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

pub const THREADS_ENV: &str = "ROADRAND_THREADS";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidIntrinsics(_)
            | Error::InvalidPose(_)
            | Error::UnknownClass(_)
            | Error::UnknownParam { .. }
            | Error::ParamOutOfRange { .. }
            | Error::InvalidPalette(_)
            | Error::InvalidConfig(_)
            | Error::Parse { .. } => EXIT_INVALID,
            _ => EXIT_FAILED,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable value"))
}

/// Read a JSON file and check it against `schema_text` before decoding.
fn read_checked<T: serde::de::DeserializeOwned>(path: &Path, schema_text: &str) -> Result<T, Failure> {
    let value: Value = io::read_json(path)?;
    decode_checked(value, schema_text, &path.display().to_string())
}

fn decode_checked<T: serde::de::DeserializeOwned>(value: Value, schema_text: &str, what: &str) -> Result<T, Failure> {
    if let Err(errors) = schema::check(schema_text, &value) {
        return Err(Failure::invalid(format!("{what}: schema violation: {}", errors.join("; "))));
    }
    serde_json::from_value(value).map_err(|e| Failure::invalid(format!("{what}: {e}")))
}

fn load_palette(path: Option<&Path>) -> Result<Palette, Failure> {
    match path {
        Some(p) => {
            let entries = read_checked(p, schema::PALETTE)?;
            Ok(Palette::from_entries(entries)?)
        }
        None => Ok(Palette::builtin()),
    }
}

fn load_rig(path: &Path) -> Result<CameraRig, Failure> {
    let rig: CameraRig = read_checked(path, schema::CALIBRATION)?;
    rig.validate()?;
    Ok(rig)
}

fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, Failure> {
    let raw: Vec<Value> = io::read_jsonl(path)?;
    for (n, v) in raw.iter().enumerate() {
        if let Err(errors) = schema::check(schema::MANIFEST_ENTRY, v) {
            return Err(Failure::invalid(format!("{}: line {}: {}", path.display(), n + 1, errors.join("; "))));
        }
    }
    Ok(io::read_manifest(path)?)
}

/// Worker count: explicit request, capped by `ROADRAND_THREADS` when set.
fn worker_count(requested: Option<usize>) -> Result<Option<usize>, Failure> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Failure::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    Ok(match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    })
}

/// Bundled settings for `generate`; see the run-config schema.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    palette: Option<PathBuf>,
    calibration: Option<PathBuf>,
    sources: Option<PathBuf>,
    randomization: Option<Value>,
    #[allow(dead_code)]
    scheme: Option<Scheme>,
    out_dir: Option<PathBuf>,
    master_seed: Option<u64>,
    workers: Option<usize>,
    requests: Option<Vec<ClassRequest>>,
}

impl RunConfig {
    fn resolve(mut self, base: &Path) -> Self {
        let join = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        self.palette = join(self.palette);
        self.calibration = join(self.calibration);
        self.sources = join(self.sources);
        self.out_dir = join(self.out_dir);
        self
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    config_hash: String,
    palette_hash: String,
    calibration_hash: String,
    sources_hash: String,
    sources: String,
    randomization: &'a RandomizationConfig,
    palette: &'a Palette,
    calibration: Option<&'a CameraRig>,
    requests: &'a [ClassRequest],
    outputs: usize,
    failures: usize,
}

pub fn generate(args: GenerateArgs) -> CmdResult {
    let run: RunConfig = match &args.run_config {
        Some(p) => read_checked::<RunConfig>(p, schema::RUN_CONFIG)?.resolve(p.parent().unwrap_or(Path::new(""))),
        None => RunConfig::default(),
    };
    let sources_path = args
        .sources
        .or(run.sources)
        .ok_or_else(|| Failure::invalid("--sources is required"))?;
    let out_dir = args.out.or(run.out_dir).ok_or_else(|| Failure::invalid("--out is required"))?;
    let palette = load_palette(args.palette.as_deref().or(run.palette.as_deref()))?;
    let default_rig = match args.calib.as_deref().or(run.calibration.as_deref()) {
        Some(p) => Some(load_rig(p)?),
        None => None,
    };
    let mut cfg: RandomizationConfig = match (&args.config, run.randomization) {
        (Some(p), _) => read_checked(p, schema::RANDOMIZATION_CONFIG)?,
        (None, Some(v)) => decode_checked(v, schema::RANDOMIZATION_CONFIG, "run config randomization")?,
        (None, None) => RandomizationConfig::default(),
    };
    if let Some(seed) = args.seed.or(run.master_seed) {
        cfg.master_seed = seed;
    }
    let requests: Vec<ClassRequest> = if args.classes.is_empty() {
        let reqs = run.requests.unwrap_or_default();
        if reqs.is_empty() {
            return Err(Failure::invalid("no target class: pass --class and --count"));
        }
        reqs
    } else {
        let count = args.count.ok_or_else(|| Failure::invalid("--count is required with --class"))?;
        args.classes
            .iter()
            .map(|c| ClassRequest {
                class: c.trim().to_string(),
                count,
            })
            .collect()
    };
    let workers = worker_count(args.workers.or(run.workers))?;

    let entries = load_manifest(&sources_path)?;
    let mut rigs: BTreeMap<PathBuf, CameraRig> = BTreeMap::new();
    let mut sources = Vec::with_capacity(entries.len());
    for e in &entries {
        let rig = match &e.calib {
            Some(p) => match rigs.get(p) {
                Some(r) => *r,
                None => {
                    let r = load_rig(p)?;
                    rigs.insert(p.clone(), r);
                    r
                }
            },
            None => default_rig.ok_or_else(|| {
                Failure::invalid(format!("{}: no calibration; pass --calib", e.label.display()))
            })?,
        };
        sources.push(SourceScene {
            label_path: e.label.clone(),
            rig,
        });
    }

    let job = DatasetJob {
        requests: requests.clone(),
        out_dir: out_dir.clone(),
        workers,
        preview: args.preview,
    };
    let outcome = randomizer::generate_dataset(&sources, &palette, &cfg, &job)?;

    let dataset: Vec<ManifestEntry> = randomizer::output_entries(&outcome.records);
    io::write_jsonl(&out_dir.join("dataset.jsonl"), &dataset)?;
    io::write_json(&out_dir.join("palette.json"), &palette)?;
    io::write_jsonl(&out_dir.join("errors.jsonl"), &outcome.errors)?;
    let per_entry_rigs: Vec<&CameraRig> = sources.iter().map(|s| &s.rig).collect();
    let meta = RunMeta {
        tool: "roadrand",
        version: env!("CARGO_PKG_VERSION"),
        command: "generate",
        master_seed: cfg.master_seed,
        workers,
        config_hash: hash_json(&cfg),
        palette_hash: hash_json(&palette),
        calibration_hash: hash_json(&per_entry_rigs),
        sources_hash: hash_json(&entries),
        sources: sources_path.display().to_string(),
        randomization: &cfg,
        palette: &palette,
        calibration: default_rig.as_ref(),
        requests: &requests,
        outputs: outcome.records.len(),
        failures: outcome.errors.len(),
    };
    io::write_json(&out_dir.join("run_meta.json"), &meta)?;
    for e in &outcome.errors {
        eprintln!("error: entry {} ({}): {}", e.image_index, e.source_label.display(), e.message);
    }
    println!(
        "generated {} labels into {} ({} failed)",
        outcome.records.len(),
        out_dir.display(),
        outcome.errors.len()
    );
    Ok(if outcome.errors.is_empty() { EXIT_OK } else { EXIT_FAILED })
}

pub fn stats(manifest: &Path, out: &Path, palette: Option<&Path>) -> CmdResult {
    let palette = load_palette(palette)?;
    let entries = load_manifest(manifest)?;
    let mut stats = ClassStats::empty(&palette);
    for e in &entries {
        stats.add_label(&io::read_label(&e.label)?);
    }
    io::write_json(out, &stats.report())?;
    println!("counted {} labels", stats.total_images);
    Ok(EXIT_OK)
}

pub fn weights(stats_path: &Path, scheme: &str, out: &Path, palette: Option<&Path>, include_background: bool) -> CmdResult {
    let scheme: Scheme = scheme.parse()?;
    let palette = load_palette(palette)?;
    let report: StatsReport = read_checked(stats_path, schema::STATS)?;
    let stats = report.into_stats()?;
    let w = weights_for(scheme, &stats, &palette, BalanceOptions { include_background })?;
    io::write_json(out, &w)?;
    Ok(EXIT_OK)
}

pub struct EvalArgs {
    pub pred_manifest: PathBuf,
    pub gt_manifest: PathBuf,
    pub classes: String,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
    pub averaging: String,
    pub ignore_id: u8,
    pub palette: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let palette = load_palette(a.palette.as_deref())?;
    let averaging = match a.averaging.as_str() {
        "per_image" => Averaging::PerImage,
        "pooled" => Averaging::Pooled,
        other => return Err(Failure::invalid(format!("unknown averaging `{other}`"))),
    };
    let classes = a
        .classes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| Ok((palette.by_name(name)?.id, name.to_string())))
        .collect::<Result<Vec<_>, Error>>()?;
    if classes.is_empty() {
        return Err(Failure::invalid("--classes is empty"));
    }
    let pred = load_manifest(&a.pred_manifest)?;
    let gt = load_manifest(&a.gt_manifest)?;
    if pred.len() != gt.len() {
        return Err(Failure::invalid(format!(
            "{} predictions but {} ground-truth labels",
            pred.len(),
            gt.len()
        )));
    }
    let pairs = pred
        .iter()
        .zip(&gt)
        .map(|(p, g)| Ok((io::read_label(&p.label)?, io::read_label(&g.label)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let report = evaluate_set(&pairs, &classes, a.ignore_id, averaging)?;
    io::write_json(&a.out, &report)?;

    let csv_path = a.csv.unwrap_or_else(|| a.out.with_extension("csv"));
    let (header, row) = report.table_rows();
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Failure {
        code: EXIT_FAILED,
        message: format!("{}: {e}", csv_path.display()),
    })?;
    w.write_record(&header)
        .and_then(|_| w.write_record(&row))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| Failure {
            code: EXIT_FAILED,
            message: format!("{}: {e}", csv_path.display()),
        })?;
    println!("mIoU {:.1} over {} images", 100.0 * report.miou, report.images);
    Ok(EXIT_OK)
}

pub fn composite(original: &Path, synth: &Path, label: &Path, out: &Path, feather: u32, scene: Option<&Path>) -> CmdResult {
    let cfg: SceneClassConfig = match scene {
        Some(p) => io::read_json(p)?,
        None => SceneClassConfig::default(),
    };
    cfg.validate()?;
    let img = composite_road_surface(
        &io::read_rgb(original)?,
        &io::read_rgb(synth)?,
        &io::read_label(label)?,
        &cfg,
        feather,
    )?;
    io::write_rgb(out, &img)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ClassDescription {
    id: u8,
    name: String,
    template: TemplateKind,
    default_params: BTreeMap<String, f64>,
    /// Half-extents (lateral, forward) of the default instance, metres.
    extent: (f64, f64),
    params: &'static [roadrand_core::markings::ParamSpec],
}

pub fn describe(palette: Option<&Path>, class: Option<&str>, out: Option<&Path>) -> CmdResult {
    let palette = load_palette(palette)?;
    let entries: Vec<_> = match class {
        Some(c) => vec![palette.by_name(c)?],
        None => palette.entries.iter().collect(),
    };
    let mut desc = Vec::with_capacity(entries.len());
    for e in entries {
        let params = e.template.resolve_params(&e.default_params)?;
        desc.push(ClassDescription {
            id: e.id,
            name: e.name.clone(),
            template: e.template,
            extent: e.template.extent(&params),
            default_params: params,
            params: e.template.param_specs(),
        });
    }
    match out {
        Some(p) => io::write_json(p, &desc)?,
        None => println!("{}", serde_json::to_string_pretty(&desc).expect("serializable")),
    }
    Ok(EXIT_OK)
}

pub fn preview(label: Option<&Path>, manifest: Option<&Path>, out: &Path, palette: Option<&Path>) -> CmdResult {
    let palette = load_palette(palette)?;
    let scene = SceneClassConfig::default();
    let table = io::colour_table(&palette, scene.road_id, scene.ignore_id);
    match (label, manifest) {
        (Some(l), _) => io::write_rgb(out, &io::colourize(&io::read_label(l)?, &table))?,
        (None, Some(m)) => {
            for e in load_manifest(m)? {
                let name = e.label.file_name().ok_or_else(|| Failure::invalid("label path has no file name"))?;
                io::write_rgb(&out.join(name), &io::colourize(&io::read_label(&e.label)?, &table))?;
            }
        }
        (None, None) => return Err(Failure::invalid("pass --label or --manifest")),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SynthlossDemo {
    seed: u64,
    scales: usize,
    gan_discriminator: f64,
    gan_generator: f64,
    feature_matching: f64,
    perceptual: f64,
    total: f64,
}

fn random_layers(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Vec<Tensor> {
    sizes
        .iter()
        .map(|&n| Tensor::from_vec((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

pub fn synthloss_demo(seed: u64, out: Option<&Path>) -> CmdResult {
    let lw = LossWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = synthloss::DEFAULT_SCALES;
    let d_sizes = [64, 32, 16, 8];
    let real = FeaturePyramid {
        scales: (0..scales).map(|_| random_layers(&mut rng, &d_sizes)).collect(),
    };
    let fake = FeaturePyramid {
        scales: (0..scales).map(|_| random_layers(&mut rng, &d_sizes)).collect(),
    };
    let p_sizes = [128, 64, 32, 16, 8];
    let vgg_real = random_layers(&mut rng, &p_sizes);
    let vgg_fake = random_layers(&mut rng, &p_sizes);
    let mut scores = |n: usize| ScoreMap {
        scales: (0..scales)
            .map(|_| Tensor::from_vec((0..n).map(|_| rng.random_range(0.05..0.95)).collect()))
            .collect(),
    };
    let (d_real, d_fake) = (scores(16), scores(16));

    let gan = synthloss::gan_loss(&d_real, &d_fake)?;
    let fm = synthloss::feature_matching_loss(&real, &fake, lw.discriminator_layers, L1Mode::Mean)?;
    let vgg = synthloss::perceptual_loss(&vgg_real, &vgg_fake, lw.perceptual_layers, L1Mode::Mean)?;
    let per_scale: Vec<f64> = gan.per_scale.iter().map(|t| t.generator).collect();
    let demo = SynthlossDemo {
        seed,
        scales,
        gan_discriminator: gan.discriminator,
        gan_generator: gan.generator,
        feature_matching: fm,
        perceptual: vgg,
        total: synthloss::total_objective(&per_scale, fm, vgg, &lw)?,
    };
    match out {
        Some(p) => io::write_json(p, &demo)?,
        None => println!("{}", serde_json::to_string_pretty(&demo).expect("serializable")),
    }
    Ok(EXIT_OK)
}

pub fn print_schema(name: Option<&str>) -> CmdResult {
    match name {
        Some(n) => {
            let text = schema::by_name(n).ok_or_else(|| Failure::invalid(format!("unknown schema `{n}`")))?;
            print!("{text}");
        }
        None => {
            for (n, _) in schema::ALL {
                println!("{n}");
            }
        }
    }
    Ok(EXIT_OK)
}
