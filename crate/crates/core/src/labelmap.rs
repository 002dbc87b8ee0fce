//! Semantic label rasters and the label-space editing operations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GroundPoint, GroundProjector};
use crate::markings::{transform_to_ground, MarkingInstance};
use crate::polygon::Polygon;

/// Ground points closer than this to the camera plane (metres of depth) are
/// clipped before projection.
pub const NEAR_DEPTH: f64 = 0.1;

/// Projected polygons smaller than this many square pixels are dropped.
pub const MIN_PROJECTED_AREA: f64 = 1.0;

/// Row-major raster of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidLabel("dimensions must be at least 1".into()));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidLabel(format!(
                "raster length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, id: u8) -> Result<Self> {
        Self::new(width, height, vec![id; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, id: u8) {
        let i = self.index(x, y);
        self.data[i] = id;
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        y as usize * self.width as usize + x as usize
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn count(&self, id: u8) -> usize {
        self.data.iter().filter(|&&v| v == id).count()
    }

    /// Check every id against a predicate, reporting the first offender.
    pub fn validate_ids(&self, allowed: impl Fn(u8) -> bool) -> Result<()> {
        match self.data.iter().position(|&v| !allowed(v)) {
            Some(i) => Err(Error::InvalidLabel(format!("unexpected class id {} at pixel {i}", self.data[i]))),
            None => Ok(()),
        }
    }
}

/// Which label ids mean road surface, road marking, and "unlabelled".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneClassConfig {
    pub road_id: u8,
    pub marking_ids: BTreeSet<u8>,
    pub ignore_id: u8,
}

impl Default for SceneClassConfig {
    /// Road surface shares id 0 with the palette background; markings are the
    /// builtin palette ids 1..=20; 255 is unlabelled. Other ids (21..=254) are
    /// free for non-road scene classes.
    fn default() -> Self {
        Self {
            road_id: 0,
            marking_ids: (1..=20).collect(),
            ignore_id: 255,
        }
    }
}

impl SceneClassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.marking_ids.contains(&self.road_id) {
            return Err(Error::InvalidConfig("road_id is listed as a marking id".into()));
        }
        if self.marking_ids.contains(&self.ignore_id) || self.road_id == self.ignore_id {
            return Err(Error::InvalidConfig("ignore_id collides with road or marking ids".into()));
        }
        Ok(())
    }

    pub fn is_marking(&self, id: u8) -> bool {
        self.marking_ids.contains(&id)
    }

    /// Road or marking: the region a synthesized road surface replaces.
    pub fn is_road_surface(&self, id: u8) -> bool {
        id == self.road_id || self.is_marking(id)
    }

    fn marking_table(&self) -> [bool; 256] {
        let mut t = [false; 256];
        for &id in &self.marking_ids {
            t[id as usize] = true;
        }
        t
    }
}

/// Replace every marking pixel with the road id.
pub fn erase_markings(label: &LabelMap, cfg: &SceneClassConfig) -> LabelMap {
    let table = cfg.marking_table();
    let data = label
        .data
        .iter()
        .map(|&v| if table[v as usize] { cfg.road_id } else { v })
        .collect();
    LabelMap {
        width: label.width,
        height: label.height,
        data,
    }
}

/// Visit the pixel-centre interior of a polygon under the even-odd rule.
///
/// A pixel `(x, y)` is inside iff `(x + 0.5, y + 0.5)` is. Crossings are
/// computed with the same expression as the classic crossing-number test so
/// both agree exactly.
pub fn fill_polygon(vertices: &[[f64; 2]], width: u32, height: u32, mut visit: impl FnMut(u32, u32)) {
    let n = vertices.len();
    if n < 3 {
        return;
    }
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        ymin = ymin.min(v[1]);
        ymax = ymax.max(v[1]);
    }
    if !(ymin.is_finite() && ymax.is_finite()) {
        return;
    }
    let row_lo = (ymin - 0.5).floor().max(0.0) as i64;
    let row_hi = ((ymax - 0.5).ceil() as i64).min(height as i64 - 1);
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for row in row_lo..=row_hi {
        let y = row as f64 + 0.5;
        xs.clear();
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = vertices[i];
            let [xj, yj] = vertices[j];
            if (yi > y) != (yj > y) {
                xs.push((xj - xi) * (y - yi) / (yj - yi) + xi);
            }
            j = i;
        }
        xs.sort_by(f64::total_cmp);
        // Centre x is inside iff an odd number of crossings lie strictly to
        // its right, i.e. xs[2k] <= x < xs[2k + 1].
        for pair in xs.chunks_exact(2) {
            let first = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let last = ((pair[1] - 0.5).ceil() as i64 - 1).min(width as i64 - 1);
            for col in first..=last {
                visit(col as u32, row as u32);
            }
        }
    }
}

/// Sutherland-Hodgman clip of a ground polygon to `depth(p) >= near`.
fn clip_to_depth(poly: &Polygon, proj: &GroundProjector, near: f64) -> Vec<GroundPoint> {
    let pts = &poly.vertices;
    let mut out = Vec::with_capacity(pts.len() + 2);
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let (da, db) = (proj.depth(a) - near, proj.depth(b) - near);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push(GroundPoint::new(
                a.lateral + t * (b.lateral - a.lateral),
                a.forward + t * (b.forward - a.forward),
            ));
        }
    }
    out
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += v[i][0] * v[j][1] - v[j][0] * v[i][1];
    }
    0.5 * acc.abs()
}

/// Project an instance's polygons into the image, clipping at the near plane.
///
/// Returns the pixel-space polygons and how many were dropped as degenerate.
/// Errors when no polygon has any part in front of the camera.
pub fn project_instance(instance: &MarkingInstance, proj: &GroundProjector) -> Result<(Vec<Vec<[f64; 2]>>, usize)> {
    let mut out = Vec::new();
    let mut dropped = 0;
    let mut any_visible = false;
    for poly in transform_to_ground(instance) {
        let clipped = clip_to_depth(&poly, proj, NEAR_DEPTH);
        if clipped.len() < 3 {
            continue;
        }
        any_visible = true;
        let pixels = clipped
            .iter()
            .map(|&g| proj.to_image(g).map(|q| [q.u, q.v]))
            .collect::<Result<Vec<_>>>()?;
        if shoelace(&pixels) < MIN_PROJECTED_AREA {
            dropped += 1;
        } else {
            out.push(pixels);
        }
    }
    if !any_visible {
        return Err(Error::NotVisible(format!(
            "instance of `{}` lies entirely behind the camera",
            instance.class.name
        )));
    }
    Ok((out, dropped))
}

/// Result of writing one instance into a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub label: LabelMap,
    /// Sorted raster indices that received the instance class.
    pub placed: Vec<usize>,
    /// In-image pixels covered by the projected instance, occluded or not.
    pub footprint: usize,
    /// Projected polygons dropped for covering less than one pixel.
    pub dropped_polygons: usize,
}

impl Placement {
    pub fn placed_fraction(&self) -> Option<f64> {
        (self.footprint > 0).then(|| self.placed.len() as f64 / self.footprint as f64)
    }
}

/// Sorted, deduplicated raster indices covered by pixel-space polygons.
pub fn footprint_pixels(polys: &[Vec<[f64; 2]>], width: u32, height: u32) -> Vec<usize> {
    let mut idx = Vec::new();
    for poly in polys {
        fill_polygon(poly, width, height, |x, y| idx.push(y as usize * width as usize + x as usize));
    }
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Project and fill `instance`, writing its class only over road pixels.
pub fn rasterize_instance(
    label: &LabelMap,
    instance: &MarkingInstance,
    proj: &GroundProjector,
    cfg: &SceneClassConfig,
) -> Result<Placement> {
    let k = proj.intrinsics();
    if k.image_width != label.width || k.image_height != label.height {
        return Err(Error::DimensionMismatch(format!(
            "rig images are {}x{}, label is {}x{}",
            k.image_width, k.image_height, label.width, label.height
        )));
    }
    let (polys, dropped_polygons) = project_instance(instance, proj)?;
    let footprint = footprint_pixels(&polys, label.width, label.height);
    let mut out = label.clone();
    let placed: Vec<usize> = footprint
        .iter()
        .copied()
        .filter(|&i| label.data[i] == cfg.road_id)
        .collect();
    for &i in &placed {
        out.data[i] = instance.class.id;
    }
    Ok(Placement {
        label: out,
        placed,
        footprint: footprint.len(),
        dropped_polygons,
    })
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != 3 * width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, rgb.repeat(width as usize * height as usize))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, i: usize) -> [u8; 3] {
        [self.data[3 * i], self.data[3 * i + 1], self.data[3 * i + 2]]
    }
}

/// Take synthesized pixels on the road surface and original pixels elsewhere.
///
/// `feather_radius > 0` blends across the mask edge with a box-filtered mask.
pub fn composite_road_surface(
    original: &RgbImage,
    synthesized: &RgbImage,
    label: &LabelMap,
    cfg: &SceneClassConfig,
    feather_radius: u32,
) -> Result<RgbImage> {
    let dims = (label.width, label.height);
    if (original.width, original.height) != dims || (synthesized.width, synthesized.height) != dims {
        return Err(Error::DimensionMismatch(format!(
            "original {}x{}, synthesized {}x{}, label {}x{}",
            original.width, original.height, synthesized.width, synthesized.height, dims.0, dims.1
        )));
    }
    let mask: Vec<bool> = label.data.iter().map(|&v| cfg.is_road_surface(v)).collect();
    let mut data = Vec::with_capacity(original.data.len());
    if feather_radius == 0 {
        for (i, &m) in mask.iter().enumerate() {
            let src = if m { synthesized } else { original };
            data.extend_from_slice(&src.data[3 * i..3 * i + 3]);
        }
    } else {
        let alpha = box_mean(&mask, label.width as usize, label.height as usize, feather_radius as usize);
        for (i, a) in alpha.into_iter().enumerate() {
            for c in 0..3 {
                let s = f64::from(synthesized.data[3 * i + c]);
                let o = f64::from(original.data[3 * i + c]);
                data.push((a * s + (1.0 - a) * o).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::new(original.width, original.height, data)
}

/// Mean of a boolean mask over a (2r+1)^2 window clipped to the image.
fn box_mean(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<f64> {
    // Summed-area table with a zero border row and column.
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(mask[y * w + x]);
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0];
            out.push(f64::from(s) / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, GroundPlanePose};
    use crate::markings::{instantiate, MarkingPose, Palette, Params};
    use crate::polygon::contains_even_odd;

    const ROAD: u8 = 0;
    const ZIGZAG: u8 = 1;
    const CAR: u8 = 22;

    fn projector(w: u32, h: u32) -> GroundProjector {
        GroundProjector::new(
            &CameraIntrinsics {
                focal_u: 300.0,
                focal_v: 300.0,
                center_u: w as f64 / 2.0,
                center_v: h as f64 / 3.0,
                image_width: w,
                image_height: h,
            },
            &GroundPlanePose {
                camera_height: 1.5,
                pitch: 0.05,
                yaw: 0.0,
            },
        )
        .unwrap()
    }

    fn instance(class: &str, anchor: GroundPoint, yaw: f64) -> MarkingInstance {
        instantiate(&Palette::builtin(), class, &Params::new(), MarkingPose::new(anchor, yaw)).unwrap()
    }

    #[test]
    fn erase_replaces_markings_only() {
        let label = LabelMap::new(4, 1, vec![ROAD, ZIGZAG, CAR, ZIGZAG]).unwrap();
        let cfg = SceneClassConfig::default();
        let out = erase_markings(&label, &cfg);
        assert_eq!(out.as_slice(), &[ROAD, ROAD, CAR, ROAD]);
        assert_eq!(erase_markings(&out, &cfg), out);
    }

    #[test]
    fn erase_counting() {
        let data: Vec<u8> = (0..400u32).map(|i| (i * 7 % 30) as u8).collect();
        let label = LabelMap::new(20, 20, data).unwrap();
        let cfg = SceneClassConfig::default();
        let out = erase_markings(&label, &cfg);
        let markings: usize = label.as_slice().iter().filter(|v| (1..=20).contains(*v)).count();
        assert_eq!(out.count(ROAD), label.count(ROAD) + markings);
    }

    #[test]
    fn fill_matches_point_in_polygon_scan() {
        let polys: Vec<Vec<[f64; 2]>> = vec![
            vec![[2.3, 1.7], [17.9, 4.2], [11.0, 18.6]],
            vec![[0.5, 0.5], [10.5, 0.5], [10.5, 3.5], [0.5, 3.5]],
            vec![[3.0, 3.0], [15.0, 3.0], [15.0, 15.0], [9.0, 8.0], [3.0, 15.0]],
            vec![[-5.0, -2.0], [25.0, 6.0], [-3.0, 30.0]],
        ];
        for poly in &polys {
            let mut got = vec![false; 400];
            fill_polygon(poly, 20, 20, |x, y| got[(y * 20 + x) as usize] = true);
            for y in 0..20 {
                for x in 0..20 {
                    let want = contains_even_odd(poly, x as f64 + 0.5, y as f64 + 0.5);
                    assert_eq!(got[y * 20 + x], want, "pixel ({x}, {y}) of {poly:?}");
                }
            }
        }
    }

    #[test]
    fn placement_on_clear_road() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(160, 96, ROAD).unwrap();
        let inst = instance("stop_line", GroundPoint::new(0.0, 8.0), 0.0);
        let placed = rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()).unwrap();
        assert!(!placed.placed.is_empty());
        assert_eq!(placed.placed.len(), placed.footprint);
        assert_eq!(placed.label.count(8), placed.placed.len());
    }

    #[test]
    fn placement_on_car_writes_nothing() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(160, 96, CAR).unwrap();
        let inst = instance("zigzag", GroundPoint::new(0.0, 10.0), 0.0);
        let placed = rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()).unwrap();
        assert!(placed.placed.is_empty());
        assert!(placed.footprint > 0);
        assert_eq!(placed.label, label);
    }

    #[test]
    fn first_writer_wins() {
        let proj = projector(160, 96);
        let cfg = SceneClassConfig::default();
        let label = LabelMap::filled(160, 96, ROAD).unwrap();
        let a = instance("zebra_stripe", GroundPoint::new(0.0, 8.0), 0.0);
        let b = instance("stop_line", GroundPoint::new(0.0, 8.0), 0.0);
        let first = rasterize_instance(&label, &a, &proj, &cfg).unwrap();
        let second = rasterize_instance(&first.label, &b, &proj, &cfg).unwrap();
        for &i in &first.placed {
            assert_eq!(second.label.as_slice()[i], a.class.id);
        }
        for &i in &second.placed {
            assert_eq!(first.label.as_slice()[i], ROAD);
        }
    }

    #[test]
    fn behind_camera_is_not_visible() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(160, 96, ROAD).unwrap();
        let inst = instance("stop_line", GroundPoint::new(0.0, -20.0), 0.0);
        let err = rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotVisible(_)));
    }

    #[test]
    fn straddling_near_plane_is_clipped() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(160, 96, ROAD).unwrap();
        let inst = instance("double_boundary", GroundPoint::new(0.5, 3.0), 0.0);
        let placed = rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()).unwrap();
        assert!(!placed.placed.is_empty());
    }

    #[test]
    fn tiny_far_polygons_are_dropped() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(160, 96, ROAD).unwrap();
        let inst = instance("crossing_dots", GroundPoint::new(0.0, 60.0), 0.0);
        let placed = rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()).unwrap();
        assert_eq!(placed.dropped_polygons, 16);
        assert!(placed.placed.is_empty());
    }

    #[test]
    fn rasterize_requires_matching_dims() {
        let proj = projector(160, 96);
        let label = LabelMap::filled(100, 96, ROAD).unwrap();
        let inst = instance("stop_line", GroundPoint::new(0.0, 8.0), 0.0);
        assert!(matches!(
            rasterize_instance(&label, &inst, &proj, &SceneClassConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn composite_selects_per_pixel() {
        let cfg = SceneClassConfig::default();
        let orig = RgbImage::new(3, 2, (0..18).collect()).unwrap();
        let synth = RgbImage::new(3, 2, (100..118).collect()).unwrap();
        let all_road = LabelMap::filled(3, 2, ROAD).unwrap();
        assert_eq!(composite_road_surface(&orig, &synth, &all_road, &cfg, 0).unwrap(), synth);
        let none = LabelMap::filled(3, 2, CAR).unwrap();
        assert_eq!(composite_road_surface(&orig, &synth, &none, &cfg, 0).unwrap(), orig);
        let mixed = LabelMap::new(3, 2, vec![ROAD, CAR, ZIGZAG, 255, ROAD, CAR]).unwrap();
        let out = composite_road_surface(&orig, &synth, &mixed, &cfg, 0).unwrap();
        for i in 0..6 {
            let want = if cfg.is_road_surface(mixed.as_slice()[i]) { synth.pixel(i) } else { orig.pixel(i) };
            assert_eq!(out.pixel(i), want);
        }
    }

    #[test]
    fn composite_dimension_mismatch() {
        let cfg = SceneClassConfig::default();
        let a = RgbImage::filled(3, 2, [0; 3]).unwrap();
        let b = RgbImage::filled(2, 2, [0; 3]).unwrap();
        let l = LabelMap::filled(3, 2, ROAD).unwrap();
        assert!(composite_road_surface(&a, &b, &l, &cfg, 0).is_err());
    }

    #[test]
    fn feathering_blends_edges_only() {
        let cfg = SceneClassConfig::default();
        let orig = RgbImage::filled(8, 1, [0; 3]).unwrap();
        let synth = RgbImage::filled(8, 1, [200; 3]).unwrap();
        let label = LabelMap::new(8, 1, vec![ROAD, ROAD, ROAD, ROAD, CAR, CAR, CAR, CAR]).unwrap();
        let out = composite_road_surface(&orig, &synth, &label, &cfg, 1).unwrap();
        assert_eq!(out.pixel(0), [200; 3]);
        assert_eq!(out.pixel(7), [0; 3]);
        assert_eq!(out.pixel(3), [133; 3]);
    }

    #[test]
    fn scene_config_validation() {
        let mut cfg = SceneClassConfig::default();
        cfg.validate().unwrap();
        cfg.marking_ids.insert(0);
        assert!(cfg.validate().is_err());
    }
}
