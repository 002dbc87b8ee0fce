//! Writes the bundled miniature dataset: ten 256x640 street scenes with
//! labels, RGB renderings, a calibration file and a manifest.
//!
//! ```text
//! cargo run -p roadrand-core --example make_mini -- data/mini
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadrand_core::geometry::{CameraIntrinsics, CameraRig, GroundPlanePose, GroundPoint, PixelPoint};
use roadrand_core::io::{self, ManifestEntry};
use roadrand_core::labelmap::{rasterize_instance, LabelMap, RgbImage, SceneClassConfig};
use roadrand_core::markings::{instantiate, MarkingPose, Palette, Params};

const SIDEWALK: u8 = 21;
const BUILDING: u8 = 22;
const SKY: u8 = 23;
const CAR: u8 = 26;

fn rig() -> CameraRig {
    CameraRig::new(
        CameraIntrinsics {
            focal_u: 500.0,
            focal_v: 500.0,
            center_u: 320.0,
            center_v: 100.0,
            image_width: 640,
            image_height: 256,
        },
        GroundPlanePose {
            camera_height: 1.5,
            pitch: 0.06,
            yaw: 0.0,
        },
    )
}

fn place(label: &mut LabelMap, palette: &Palette, class: &str, params: &[(&str, f64)], at: (f64, f64), yaw: f64) {
    let proj = rig().projector().expect("valid rig");
    let params: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let inst = instantiate(palette, class, &params, MarkingPose::new(GroundPoint::new(at.0, at.1), yaw))
        .expect("valid marking");
    if let Ok(p) = rasterize_instance(label, &inst, &proj, &SceneClassConfig::default()) {
        *label = p.label;
    }
}

fn scene(index: u64, palette: &Palette) -> LabelMap {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index);
    let rig = rig();
    let proj = rig.projector().expect("valid rig");
    let (w, h) = (rig.image_width, rig.image_height);
    let road_half = rng.random_range(3.5..6.5);
    let offset = rng.random_range(-1.0..1.0);
    let mut label = LabelMap::filled(w, h, SKY).expect("non-empty");
    for y in 0..h {
        for x in 0..w {
            let Ok(g) = proj.to_ground(PixelPoint::new(x as f64 + 0.5, y as f64 + 0.5)) else {
                continue;
            };
            let lat = (g.lateral - offset).abs();
            let id = if g.forward > 90.0 {
                BUILDING
            } else if lat < road_half {
                0
            } else if lat < road_half + 2.5 {
                SIDEWALK
            } else {
                BUILDING
            };
            label.set(x, y, id);
        }
    }

    let dashes = [("dashes", 6.0), ("dash_length", 3.0), ("gap_length", 6.0)];
    place(&mut label, palette, "lane_separator", &dashes, (offset, 30.0), 0.0);
    match index % 4 {
        0 => place(&mut label, palette, "zigzag", &[], (offset - road_half + 0.6, 14.0), 0.0),
        1 => place(&mut label, palette, "stop_line", &[("length", road_half - 0.3)], (offset - road_half / 2.0, 9.0), 0.0),
        2 => place(&mut label, palette, "arrow_straight", &[], (offset - road_half / 2.0, 12.0), 0.0),
        _ => place(&mut label, palette, "bus_stop", &[], (offset + road_half / 2.0, 16.0), 0.0),
    }

    for _ in 0..rng.random_range(1..4) {
        let g = GroundPoint::new(offset + rng.random_range(-road_half + 1.0..road_half - 1.0), rng.random_range(8.0..40.0));
        let Ok(q) = proj.to_image(g) else { continue };
        let z = g.forward;
        let (half_w, height) = (500.0 * 0.9 / z, 500.0 * 1.5 / z);
        let (x0, x1) = ((q.u - half_w).max(0.0) as u32, ((q.u + half_w) as u32).min(w));
        let (y0, y1) = ((q.v - height).max(0.0) as u32, (q.v as u32).min(h));
        for y in y0..y1 {
            for x in x0..x1 {
                label.set(x, y, CAR);
            }
        }
    }
    label
}

fn render(label: &LabelMap) -> RgbImage {
    let data = label
        .as_slice()
        .iter()
        .flat_map(|&id| -> [u8; 3] {
            match id {
                0 => [90, 90, 92],
                SIDEWALK => [150, 145, 140],
                BUILDING => [120, 100, 90],
                SKY => [170, 190, 215],
                CAR => [40, 50, 120],
                _ => [235, 235, 225],
            }
        })
        .collect();
    RgbImage::new(label.width(), label.height(), data).expect("three bytes per pixel")
}

fn main() -> roadrand_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/mini".into()));
    let palette = Palette::builtin();
    let cfg = SceneClassConfig::default();
    let table = io::colour_table(&palette, cfg.road_id, cfg.ignore_id);
    let mut entries = Vec::new();
    for i in 0..10u64 {
        let label = scene(i, &palette);
        let name = format!("scene_{i:02}.png");
        let label_rel = Path::new("labels").join(&name);
        let rgb_rel = Path::new("rgb").join(&name);
        io::write_label(&out.join(&label_rel), &label, &table)?;
        io::write_rgb(&out.join(&rgb_rel), &render(&label))?;
        entries.push(ManifestEntry {
            rgb: Some(rgb_rel),
            label: label_rel,
            calib: None,
            split: Some("train".into()),
            tags: vec!["mini".into()],
        });
    }
    io::write_jsonl(&out.join("manifest.jsonl"), &entries)?;
    io::write_json(&out.join("calib.json"), &rig())?;
    println!("wrote {} scenes to {}", entries.len(), out.display());
    Ok(())
}
