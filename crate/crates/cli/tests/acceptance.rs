//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadrand_core::balance::{compute_stats, weights_fb, weights_tb, BalanceOptions};
use roadrand_core::geometry::{CameraIntrinsics, CameraRig, GroundPlanePose, GroundPoint};
use roadrand_core::io;
use roadrand_core::labelmap::{erase_markings, footprint_pixels, LabelMap, RgbImage};
use roadrand_core::losskernel::{weighted_cross_entropy, LogitMap};
use roadrand_core::markings::Palette;
use roadrand_core::metrics::{count_pixels, image_metrics, PixelCounts};
use roadrand_core::randomizer::{generate_scene, RandomizationConfig};
use roadrand_core::synthloss::{
    feature_matching_loss, layer_weight, layered_l1, perceptual_loss, total_objective, FeaturePyramid, L1Mode,
    LossWeights, Tensor,
};
use serde_json::Value;

const WEIGHT_TOL: f64 = 1e-12;
const WEIGHT_BUDGET: Duration = Duration::from_secs(10);
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-5;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const ROUND_TRIP_TOL: f64 = 1e-9;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(5);
const IDENTITY_TOL: f64 = 1e-12;
const LOSS_TOL: f64 = 1e-12;
const THROUGHPUT_LABELS: usize = 1000;
const THROUGHPUT_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(name: &str, start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("{name} took {t:.2?}, budget {budget:?}"))?;
    Ok(t)
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mini() -> PathBuf {
    workspace_root().join("data/mini")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn roadrand(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_roadrand"))
        .args(args)
        .env_remove("ROADRAND_THREADS")
        .output()
        .expect("spawn roadrand")
}

fn run_ok(args: &[&str]) -> Result<(), String> {
    let out = roadrand(args);
    ensure(out.status.code() == Some(0), || {
        format!("`roadrand {}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn validate(schema: &str, value: &Value) -> Result<(), String> {
    let text = fs::read_to_string(schema_dir().join(format!("{schema}.schema.json"))).map_err(|e| e.to_string())?;
    let schema_value: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema_value).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{}: {e}", e.instance_path())).collect();
    ensure(errors.is_empty(), || format!("{schema}: {}", errors.join("; ")))
}

fn validate_file(schema: &str, path: &Path) -> Result<(), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    validate(schema, &serde_json::from_str(&text).map_err(|e| e.to_string())?)
}

fn validate_lines(schema: &str, path: &Path) -> Result<usize, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut n = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        validate(schema, &serde_json::from_str(line).map_err(|e| e.to_string())?)?;
        n += 1;
    }
    Ok(n)
}

fn small_palette(classes: usize) -> Palette {
    let mut p = Palette::builtin();
    p.entries.truncate(classes);
    p
}

fn weight_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let classes = 9usize;
    let palette = small_palette(classes);
    let ids: Vec<u8> = (0..classes as u8).collect();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let images = rng.random_range(1..12);
        let mut raw: Vec<Vec<u8>> = (0..images)
            .map(|_| {
                let sparse = rng.random_range(1..classes as u8);
                (0..64).map(|_| rng.random_range(0..=sparse)).collect()
            })
            .collect();
        for &c in &ids {
            if !raw.iter().any(|l| l.contains(&c)) {
                let k = rng.random_range(0..raw.len());
                raw[k][c as usize] = c;
            }
        }
        let labels: Vec<LabelMap> = raw.iter().map(|l| LabelMap::new(8, 8, l.clone()).unwrap()).collect();
        let stats = compute_stats(&labels, &palette).map_err(|e| e.to_string())?;
        let fb = weights_fb(&stats, BalanceOptions::default()).map_err(|e| e.to_string())?;
        let tb = weights_tb(&stats, BalanceOptions::default()).map_err(|e| e.to_string())?;
        let (ofb, otb) = common::balance_weights(&raw, &ids, 0);
        for (k, &id) in ids.iter().enumerate() {
            for (got, want) in [(fb.weight(id).unwrap(), ofb[k]), (tb.weight(id).unwrap(), otb[k])] {
                let rel = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= WEIGHT_TOL, || format!("max relative deviation {worst:e}"))?;

    // Same pixel share, 7% vs 70% occurrence.
    let with = |c: u8| LabelMap::new(4, 1, vec![0, 0, 0, c]).unwrap();
    let labels: Vec<LabelMap> = (0..100)
        .map(|i| match i {
            0..7 => with(1),
            30.. => with(2),
            _ => LabelMap::new(4, 1, vec![0; 4]).unwrap(),
        })
        .collect();
    let stats = compute_stats(&labels, &small_palette(3)).map_err(|e| e.to_string())?;
    ensure(stats.occurrence(1) == Some(0.07) && stats.occurrence(2) == Some(0.70), || {
        format!("occurrences {:?} / {:?}", stats.occurrence(1), stats.occurrence(2))
    })?;
    let fb = weights_fb(&stats, BalanceOptions::default()).map_err(|e| e.to_string())?;
    let tb = weights_tb(&stats, BalanceOptions::default()).map_err(|e| e.to_string())?;
    let (f1, f2) = (fb.weight(1).unwrap(), fb.weight(2).unwrap());
    let (t1, t2) = (tb.weight(1).unwrap(), tb.weight(2).unwrap());
    ensure((f1 - f2).abs() < WEIGHT_TOL, || format!("FB differs: {f1} vs {f2}"))?;
    ensure(t1 > t2 * 1.5, || format!("TB does not favour the rare class: {t1} vs {t2}"))?;
    let t = within_budget("weights", start, WEIGHT_BUDGET)?;
    Ok(format!(
        "1000 datasets, max rel dev {worst:.1e}; FB {f1:.3}/{f2:.3}, TB {t1:.3}/{t2:.3}; {t:.2?}"
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (h, w, c) = (8u32, 8u32, 20usize);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let data: Vec<f64> = (0..(h * w) as usize * c).map(|_| rng.random_range(-4.0..4.0)).collect();
        let target: Vec<u8> = (0..h * w)
            .map(|_| if rng.random_bool(0.1) { 255 } else { rng.random_range(0..c as u8) })
            .collect();
        let weights: Vec<f64> = (0..c).map(|_| rng.random_range(0.1..5.0)).collect();
        let target = LabelMap::new(w, h, target).unwrap();
        let loss = |d: &[f64]| {
            weighted_cross_entropy(&LogitMap::new(h, w, c, d.to_vec()).unwrap(), &target, &weights, 255)
                .unwrap()
                .loss
        };
        let analytic = weighted_cross_entropy(&LogitMap::new(h, w, c, data.clone()).unwrap(), &target, &weights, 255)
            .map_err(|e| e.to_string())?
            .grad;
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut probe = data.clone();
        for i in 0..data.len() {
            probe[i] = data[i] + GRAD_STEP;
            let up = loss(&probe);
            probe[i] = data[i] - GRAD_STEP;
            let down = loss(&probe);
            probe[i] = data[i];
            let numeric = (up - down) / (2.0 * GRAD_STEP);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    ensure(worst < GRAD_TOL, || format!("max relative error {worst:e}"))?;
    let t = within_budget("gradient check", start, GRAD_BUDGET)?;
    Ok(format!("50 instances 8x8x20, max relative error {worst:.1e}; {t:.2?}"))
}

fn random_rig(rng: &mut ChaCha8Rng) -> CameraRig {
    let f = rng.random_range(300.0..1200.0);
    CameraRig::new(
        CameraIntrinsics {
            focal_u: f,
            focal_v: f * rng.random_range(0.9..1.1),
            center_u: rng.random_range(200.0..440.0),
            center_v: rng.random_range(60.0..200.0),
            image_width: 640,
            image_height: 256,
        },
        GroundPlanePose {
            camera_height: rng.random_range(0.8..3.0),
            pitch: rng.random_range(-0.1..0.3),
            yaw: rng.random_range(-0.3..0.3),
        },
    )
}

fn mini_rig() -> Result<CameraRig, String> {
    io::read_rig(&mini().join("calib.json")).map_err(|e| e.to_string())
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 1000 {
        let proj = random_rig(&mut rng).projector().map_err(|e| e.to_string())?;
        let p = GroundPoint::new(rng.random_range(-10.0..10.0), rng.random_range(2.0..60.0));
        if proj.depth(p) <= 1e-3 {
            continue;
        }
        let q = proj.to_image(p).map_err(|e| e.to_string())?;
        let back = proj.to_ground(q).map_err(|e| e.to_string())?;
        worst = worst.max(back.distance(&p));
        checked += 1;
    }
    ensure(worst < ROUND_TRIP_TOL, || format!("round trip error {worst:e} m"))?;

    let proj = mini_rig()?.projector().map_err(|e| e.to_string())?;
    // Projected area shrinks strictly at every metre; raster counts (on a
    // canvas tall enough that nothing is clipped) shrink at 1.5x distance
    // steps, coarse enough to dominate pixel quantization.
    let mut areas = Vec::new();
    let mut counts = Vec::new();
    for d in 2..=60 {
        let z = d as f64;
        let poly: Vec<[f64; 2]> = [(-0.5, z - 0.5), (0.5, z - 0.5), (0.5, z + 0.5), (-0.5, z + 0.5)]
            .iter()
            .map(|&(x, y)| proj.to_image(GroundPoint::new(x, y)).map(|q| [q.u, q.v]))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let area = (0..4)
            .map(|i| poly[i][0] * poly[(i + 1) % 4][1] - poly[(i + 1) % 4][0] * poly[i][1])
            .sum::<f64>()
            .abs()
            / 2.0;
        areas.push(area);
        if [2, 3, 5, 7, 10, 15, 23, 34, 51].contains(&d) {
            counts.push(footprint_pixels(&[poly], 640, 4096).len());
        }
    }
    ensure(areas.windows(2).all(|w| w[1] < w[0]), || format!("projected areas not shrinking: {areas:?}"))?;
    ensure(counts.windows(2).all(|w| w[1] < w[0] || w == [0, 0]), || format!("pixel footprints not shrinking: {counts:?}"))?;
    let t = within_budget("geometry", start, GEOMETRY_BUDGET)?;
    Ok(format!(
        "1000 points, max round trip {worst:.1e} m; 1 m2 square {:.0} px2 at 2 m -> {:.2} px2 at 60 m; {t:.2?}",
        areas[0],
        areas[areas.len() - 1]
    ))
}

fn mini_labels() -> Result<Vec<LabelMap>, String> {
    let entries = io::read_manifest(&mini().join("manifest.jsonl")).map_err(|e| e.to_string())?;
    entries.iter().map(|e| io::read_label(&e.label).map_err(|e| e.to_string())).collect()
}

fn placement_safety() -> Outcome {
    let labels = mini_labels()?;
    let proj = mini_rig()?.projector().map_err(|e| e.to_string())?;
    let palette = Palette::builtin();
    let cfg = RandomizationConfig {
        class_weights: palette.entries.iter().filter(|e| e.id != 0).map(|e| (e.name.clone(), 1.0)).collect(),
        ..RandomizationConfig::default()
    };
    let mut written = 0usize;
    for s in 0..500u64 {
        let src = &labels[s as usize % labels.len()];
        let cleared = erase_markings(src, &cfg.scene);
        let (out, _) = generate_scene(src, &proj, 0.0, &palette, &cfg, s).map_err(|e| format!("scene {s}: {e}"))?;
        for (i, (&before, &after)) in cleared.as_slice().iter().zip(out.as_slice()).enumerate() {
            if before != after {
                ensure(before == cfg.scene.road_id, || format!("scene {s}: pixel {i} was class {before}"))?;
                written += 1;
            }
        }
        ensure(erase_markings(&out, &cfg.scene) == cleared, || format!("scene {s}: erase does not restore"))?;
    }
    ensure(written > 0, || "no marking pixels written".into())?;
    Ok(format!("500 scenes, {written} marking pixels, all over road; erase restores"))
}

fn files_under(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .map(|e| e.unwrap().path())
        .collect();
    out.sort();
    Ok(out)
}

fn determinism(tmp: &Path) -> Outcome {
    let sources = mini().join("manifest.jsonl");
    let calib = mini().join("calib.json");
    let mut dirs = Vec::new();
    for workers in ["1", "4"] {
        let out = tmp.join(format!("det_{workers}"));
        run_ok(&[
            "generate",
            "--sources",
            sources.to_str().unwrap(),
            "--calib",
            calib.to_str().unwrap(),
            "--class",
            "zigzag,bus_stop",
            "--count",
            "20",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ])?;
        dirs.push(out);
    }
    let (a, b) = (&dirs[0], &dirs[1]);
    let la = files_under(&a.join("labels"))?;
    let lb = files_under(&b.join("labels"))?;
    ensure(la.len() == 40 && la.len() == lb.len(), || format!("{} vs {} labels", la.len(), lb.len()))?;
    for (x, y) in la.iter().zip(&lb) {
        ensure(x.file_name() == y.file_name() && fs::read(x).unwrap() == fs::read(y).unwrap(), || {
            format!("{} differs", x.display())
        })?;
    }
    for f in ["manifest.jsonl", "dataset.jsonl"] {
        ensure(fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap(), || format!("{f} differs"))?;
    }
    Ok("40 labels and manifests byte-identical at 1 and 4 workers".into())
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut checked = 0;
    for _ in 0..200 {
        let pred: Vec<u8> = (0..32 * 32).map(|_| rng.random_range(0..20)).collect();
        let gt: Vec<u8> = (0..32 * 32)
            .map(|_| if rng.random_bool(0.05) { 255 } else { rng.random_range(0..20) })
            .collect();
        let (p, g) = (LabelMap::new(32, 32, pred.clone()).unwrap(), LabelMap::new(32, 32, gt.clone()).unwrap());
        for class in 0..20u8 {
            let c = count_pixels(&p, &g, class, 255).map_err(|e| e.to_string())?;
            ensure((c.tp, c.fp, c.fn_) == common::confusion(&pred, &gt, class, 255), || format!("class {class} counts"))?;
            let m = image_metrics(c);
            let o = common::metric_formulas(c.tp, c.fp, c.fn_);
            ensure(m.map(|m| [m.precision, m.recall, m.f1, m.iou]) == o, || format!("class {class}: {m:?} vs {o:?}"))?;
            if let Some(m) = m {
                ensure((m.f1 - 2.0 * m.iou / (1.0 + m.iou)).abs() < IDENTITY_TOL, || "F1/IoU identity".into())?;
                checked += 1;
            }
        }
    }
    let hand = image_metrics(PixelCounts { tp: 2, fp: 1, fn_: 1 }).ok_or("hand case undefined")?;
    let want = [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.5];
    ensure([hand.precision, hand.recall, hand.f1, hand.iou] == want, || format!("hand case {hand:?}"))?;
    Ok(format!("200 pairs, {checked} defined class-images exact; hand case (2/3, 2/3, 2/3, 0.5)"))
}

fn synthesis_losses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut layer = |n: usize| Tensor::from_vec((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
    let mk = |layer: &mut dyn FnMut(usize) -> Tensor| FeaturePyramid {
        scales: (0..3).map(|_| vec![layer(16), layer(8), layer(4), layer(2)]).collect(),
    };
    let real = mk(&mut layer);
    let fake = mk(&mut layer);
    let zero = FeaturePyramid {
        scales: fake.scales.iter().map(|s| s.iter().map(|t| Tensor::from_vec(vec![0.0; t.len()])).collect()).collect(),
    };
    let lw = LossWeights::default();
    let l = lw.discriminator_layers;
    let err = |e: roadrand_core::Error| e.to_string();

    ensure(feature_matching_loss(&real, &real, l, L1Mode::Sum).map_err(err)? == 0.0, || "FM not zero".into())?;
    ensure(perceptual_loss(&real.scales[0], &real.scales[0], 4, L1Mode::Sum).map_err(err)? == 0.0, || {
        "perceptual not zero".into()
    })?;
    let base = feature_matching_loss(&zero, &fake, l, L1Mode::Sum).map_err(err)?;
    for alpha in [0.5, 2.0, 3.7] {
        let scaled = FeaturePyramid {
            scales: fake
                .scales
                .iter()
                .map(|s| s.iter().map(|t| Tensor::from_vec(t.data.iter().map(|v| alpha * v).collect())).collect())
                .collect(),
        };
        let got = feature_matching_loss(&zero, &scaled, l, L1Mode::Sum).map_err(err)?;
        ensure((got - alpha * base).abs() <= LOSS_TOL * base, || format!("homogeneity at {alpha}: {got} vs {}", alpha * base))?;
    }
    let total = feature_matching_loss(&real, &fake, l, L1Mode::Sum).map_err(err)?;
    let per: f64 = (0..3)
        .map(|k| layered_l1(&real.scales[k], &fake.scales[k], l, L1Mode::Sum))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?
        .iter()
        .sum();
    ensure((total - per).abs() <= LOSS_TOL * total, || format!("additivity {total} vs {per}"))?;
    for ll in 1..=10usize {
        for i in 1..=ll {
            let w = layer_weight(i, ll).map_err(err)?;
            ensure(w == 2f64.powi((ll - i) as i32), || format!("w_{i} at l={ll} is {w}"))?;
        }
    }
    let obj = total_objective(&[0.25, 0.25, 0.5], 2.0, 0.5, &lw).map_err(err)?;
    ensure(obj == 26.0, || format!("objective {obj}"))?;
    Ok("zero on identical, degree-1 homogeneous, additive over 3 scales, w_i = 2^(l-i), objective 26".into())
}

fn throughput(tmp: &Path) -> Outcome {
    let out = tmp.join("throughput");
    let start = Instant::now();
    run_ok(&[
        "generate",
        "--sources",
        mini().join("manifest.jsonl").to_str().unwrap(),
        "--calib",
        mini().join("calib.json").to_str().unwrap(),
        "--class",
        "zigzag",
        "--count",
        &THROUGHPUT_LABELS.to_string(),
        "--workers",
        "1",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let t = within_budget("throughput", start, THROUGHPUT_BUDGET)?;
    let n = files_under(&out.join("labels"))?.len();
    ensure(n == THROUGHPUT_LABELS, || format!("{n} labels written"))?;
    Ok(format!("{n} zigzag labels at 256x640, 1 worker, PNGs included: {t:.2?}"))
}

fn end_to_end(tmp: &Path) -> Outcome {
    let dir = tmp.join("e2e");
    fs::create_dir_all(&dir).unwrap();
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let sources = mini().join("manifest.jsonl");
    let sources = sources.to_str().unwrap();

    run_ok(&["stats", "--manifest", sources, "--out", &p("stats.json")])?;
    validate_file("stats", &dir.join("stats.json"))?;
    for scheme in ["eq", "fb", "tb"] {
        let out = p(&format!("weights_{scheme}.json"));
        run_ok(&["weights", "--stats", &p("stats.json"), "--scheme", scheme, "--out", &out])?;
        validate_file("weights", Path::new(&out))?;
    }

    run_ok(&[
        "generate",
        "--sources",
        sources,
        "--calib",
        mini().join("calib.json").to_str().unwrap(),
        "--class",
        "zigzag",
        "--count",
        "50",
        "--out",
        &p("gen"),
    ])?;
    let gen = dir.join("gen");
    let scenes = validate_lines("scene_record", &gen.join("manifest.jsonl"))?;
    let entries = validate_lines("manifest_entry", &gen.join("dataset.jsonl"))?;
    ensure(scenes == 50 && entries == 50, || format!("{scenes} scene records, {entries} entries"))?;
    ensure(validate_lines("error_record", &gen.join("errors.jsonl"))? == 0, || "generation errors".into())?;
    validate_file("run_meta", &gen.join("run_meta.json"))?;
    validate_file("palette", &gen.join("palette.json"))?;

    run_ok(&["preview", "--manifest", &p("gen/dataset.jsonl"), "--out", &p("preview")])?;
    let previews = files_under(&dir.join("preview"))?.len();
    ensure(previews == 50, || format!("{previews} previews"))?;

    let dataset = p("gen/dataset.jsonl");
    run_ok(&["eval", "--pred-manifest", &dataset, "--gt-manifest", &dataset, "--out", &p("eval.json")])?;
    validate_file("metrics_report", &dir.join("eval.json"))?;
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    let classes = report["classes"].as_array().ok_or("no classes")?;
    let evaluable: Vec<&Value> = classes.iter().filter(|c| c["evaluable"] == true).collect();
    ensure(!evaluable.is_empty(), || "nothing evaluable".into())?;
    for c in &evaluable {
        for k in ["precision", "recall", "f1", "iou"] {
            ensure(c[k].as_f64() == Some(1.0), || format!("{} {k} = {}", c["name"], c[k]))?;
        }
    }
    ensure(report["miou"].as_f64() == Some(1.0), || format!("mIoU {}", report["miou"]))?;
    ensure(dir.join("eval.csv").exists(), || "no CSV table".into())?;

    // Zero requested labels: an empty manifest and success.
    run_ok(&[
        "generate",
        "--sources",
        sources,
        "--calib",
        mini().join("calib.json").to_str().unwrap(),
        "--class",
        "zigzag",
        "--count",
        "0",
        "--out",
        &p("empty"),
    ])?;
    ensure(fs::read_to_string(dir.join("empty/manifest.jsonl")).unwrap().trim().is_empty(), || {
        "count 0 manifest not empty".into()
    })?;

    // All-road label: the composite is the synthesized image, byte for byte.
    let (w, h) = (64, 32);
    let original = RgbImage::filled(w, h, [10, 20, 30]).unwrap();
    let synth = RgbImage::new(w, h, (0..w * h * 3).map(|i| (i * 7 % 251) as u8).collect()).unwrap();
    let road = LabelMap::filled(w, h, 0).unwrap();
    io::write_rgb(&dir.join("orig.png"), &original).map_err(|e| e.to_string())?;
    io::write_rgb(&dir.join("synth.png"), &synth).map_err(|e| e.to_string())?;
    let table = io::colour_table(&Palette::builtin(), 0, 255);
    io::write_label(&dir.join("road.png"), &road, &table).map_err(|e| e.to_string())?;
    run_ok(&[
        "composite",
        "--original",
        &p("orig.png"),
        "--synth",
        &p("synth.png"),
        "--label",
        &p("road.png"),
        "--out",
        &p("comp.png"),
    ])?;
    ensure(fs::read(dir.join("comp.png")).unwrap() == fs::read(dir.join("synth.png")).unwrap(), || {
        "composite differs from synthesized input".into()
    })?;

    Ok(format!(
        "stats -> weights x3 -> generate 50 -> preview -> eval self (mIoU 1.0 over {} classes), schema-valid",
        evaluable.len()
    ))
}

fn main() {
    // Honour `cargo test -- <filter>` loosely: skip everything on --list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("weight-formula oracle", Box::new(weight_oracle)),
        ("gradient check", Box::new(gradient_check)),
        ("geometry", Box::new(geometry)),
        ("placement safety", Box::new(placement_safety)),
        ("determinism", Box::new(|| determinism(tmp.path()))),
        ("metrics oracle", Box::new(metrics_oracle)),
        ("synthesis losses", Box::new(synthesis_losses)),
        ("throughput", Box::new(|| throughput(tmp.path()))),
        ("end-to-end smoke", Box::new(|| end_to_end(tmp.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
