//! File formats: label and RGB PNGs, JSON / JSONL documents, manifests.
//!
//! Labels are stored as 8-bit indexed PNGs whose pixel values are class ids;
//! the embedded colour table is for viewing only. 8-bit grayscale labels are
//! read as well.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraRig;
use crate::labelmap::{LabelMap, RgbImage};
use crate::markings::{Palette, PaletteEntry};

/// 256-entry id -> RGB colour table.
pub type ColourTable = [[u8; 3]; 256];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

struct Decoded {
    width: u32,
    height: u32,
    colour: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
}

fn decode(path: &Path, transform: png::Transformations) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(BufReader::new(open(path)?));
    decoder.set_transformations(transform);
    let err = |e: png::DecodingError| Error::PngDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = decoder.read_info().map_err(err)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width,
        height: info.height,
        colour: info.color_type,
        depth: info.bit_depth,
        data: buf,
    })
}

fn encode(path: &Path, width: u32, height: u32, colour: png::ColorType, palette: Option<Vec<u8>>, data: &[u8]) -> Result<()> {
    let out = create(path)?;
    let err = |e: png::EncodingError| Error::PngEncode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut enc = png::Encoder::new(out, width, height);
    enc.set_color(colour);
    enc.set_depth(png::BitDepth::Eight);
    if let Some(p) = palette {
        enc.set_palette(p);
    }
    let mut writer = enc.write_header().map_err(err)?;
    writer.write_image_data(data).map_err(err)?;
    writer.finish().map_err(err)
}

/// Read a label PNG: 8-bit indexed (palette indices are ids) or 8-bit gray.
pub fn read_label(path: &Path) -> Result<LabelMap> {
    let d = decode(path, png::Transformations::IDENTITY)?;
    if d.depth != png::BitDepth::Eight || !matches!(d.colour, png::ColorType::Indexed | png::ColorType::Grayscale) {
        return Err(Error::PngDecode {
            path: path.to_path_buf(),
            message: format!("label must be 8-bit indexed or grayscale, found {:?} {:?}", d.colour, d.depth),
        });
    }
    LabelMap::new(d.width, d.height, d.data)
}

/// Write a label as an indexed PNG with `table` as its colour table.
pub fn write_label(path: &Path, label: &LabelMap, table: &ColourTable) -> Result<()> {
    let plte = table.iter().flatten().copied().collect();
    encode(path, label.width(), label.height(), png::ColorType::Indexed, Some(plte), label.as_slice())
}

/// Read an 8-bit RGB image; gray is replicated, alpha dropped, palettes expanded.
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let d = decode(path, png::Transformations::EXPAND)?;
    if d.depth != png::BitDepth::Eight {
        return Err(Error::PngDecode {
            path: path.to_path_buf(),
            message: format!("expected 8-bit samples, found {:?}", d.depth),
        });
    }
    let data = match d.colour {
        png::ColorType::Rgb => d.data,
        png::ColorType::Rgba => d.data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => d.data.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => d.data.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => unreachable!("EXPAND converts indexed images"),
    };
    RgbImage::new(d.width, d.height, data)
}

pub fn write_rgb(path: &Path, image: &RgbImage) -> Result<()> {
    encode(path, image.width(), image.height(), png::ColorType::Rgb, None, image.as_slice())
}

/// Render a label through a colour table.
pub fn colourize(label: &LabelMap, table: &ColourTable) -> RgbImage {
    let data = label.as_slice().iter().flat_map(|&id| table[id as usize]).collect();
    RgbImage::new(label.width(), label.height(), data).expect("three bytes per label pixel")
}

/// Viewing colours: road dark grey, markings spread over the hue circle,
/// ignore black, other ids a muted grey ramp.
pub fn colour_table(palette: &Palette, road_id: u8, ignore_id: u8) -> ColourTable {
    let mut t = [[0u8; 3]; 256];
    for (id, c) in t.iter_mut().enumerate() {
        let g = 96 + (id as u8 % 8) * 16;
        *c = [g, g / 2 + 48, g];
    }
    let markings: Vec<u8> = palette.marking_ids();
    let n = markings.len().max(1) as f64;
    for (k, id) in markings.into_iter().enumerate() {
        t[id as usize] = hsv(k as f64 / n, 0.85, 1.0);
    }
    t[road_id as usize] = [64, 64, 64];
    t[ignore_id as usize] = [0, 0, 0];
    t
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, r) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (a, b, c) = match i as u8 {
        0 => (v, r, p),
        1 => (q, v, p),
        2 => (p, v, r),
        3 => (p, q, v),
        4 => (r, p, v),
        _ => (v, p, q),
    };
    [a, b, c].map(|x| (x * 255.0).round() as u8)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    writeln!(out, "{text}").and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// One JSON value per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", n + 1),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut out = create(path)?;
    for v in values {
        let line = serde_json::to_string(v).expect("serializable value");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rig(path: &Path) -> Result<CameraRig> {
    let rig: CameraRig = read_json(path)?;
    rig.validate()?;
    Ok(rig)
}

pub fn read_palette(path: &Path) -> Result<Palette> {
    Palette::from_entries(read_json::<Vec<PaletteEntry>>(path)?)
}

/// One dataset entry. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb: Option<PathBuf>,
    pub label: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calib: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl ManifestEntry {
    pub fn label(path: impl Into<PathBuf>) -> Self {
        Self {
            rgb: None,
            label: path.into(),
            calib: None,
            split: None,
            tags: Vec::new(),
        }
    }

    fn resolved(mut self, base: &Path) -> Self {
        self.label = rebase(base, self.label);
        self.rgb = self.rgb.map(|p| rebase(base, p));
        self.calib = self.calib.map(|p| rebase(base, p));
        self
    }
}

fn rebase(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

/// Read a dataset manifest, resolving paths; label paths must be unique.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let entries: Vec<ManifestEntry> = read_jsonl(path)?;
    let entries: Vec<ManifestEntry> = entries.into_iter().map(|e| e.resolved(base)).collect();
    let mut seen = BTreeSet::new();
    for (n, e) in entries.iter().enumerate() {
        if !seen.insert(&e.label) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("entry {}: duplicate label path {}", n + 1, e.label.display()),
            });
        }
    }
    Ok(entries)
}

/// `path` relative to `base` when it lies below it.
pub fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf())
}
