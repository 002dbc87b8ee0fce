//! Dataset class statistics and class-balancing loss weights.
//!
//! Three schemes are provided:
//!
//! - **EQ**: every class weighs 1.
//! - **FB** (median frequency balancing): `w_c = median(F) / f_c` where `f_c`
//!   is the pixel count of class `c` divided by the total pixel count of the
//!   labels in which `c` appears.
//! - **TB** (median total balancing): `w_c = median(G) / (f_c + n_c)` where
//!   `n_c` is the fraction of labels containing `c`. FB is blind to how many
//!   images contain a class; TB also corrects for occurrence imbalance, which
//!   is exactly what adding many synthetic rare-class labels creates.
//!
//! Classes that never occur are left out of the medians and get weight 0
//! with an [`WeightFlag::Absent`] flag. The background class is left out of
//! the medians unless [`BalanceOptions::include_background`] is set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelmap::LabelMap;
use crate::markings::{Palette, BACKGROUND_ID};

/// Exact integer counts for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub id: u8,
    pub name: String,
    pub pixel_count: u64,
    /// Total pixels of all labels in which the class appears.
    pub pixels_in_present_labels: u64,
    /// Labels containing at least one pixel of the class.
    pub image_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub total_images: u64,
    pub classes: Vec<ClassCount>,
}

impl ClassCount {
    pub fn is_present(&self) -> bool {
        self.image_count > 0
    }
}

impl ClassStats {
    /// Zero counts for every palette class.
    pub fn empty(palette: &Palette) -> Self {
        let mut classes: Vec<ClassCount> = palette
            .entries
            .iter()
            .map(|e| ClassCount {
                id: e.id,
                name: e.name.clone(),
                pixel_count: 0,
                pixels_in_present_labels: 0,
                image_count: 0,
            })
            .collect();
        classes.sort_by_key(|c| c.id);
        Self {
            total_images: 0,
            classes,
        }
    }

    /// Add one label's counts.
    pub fn add_label(&mut self, label: &LabelMap) {
        let mut hist = [0u64; 256];
        for &v in label.as_slice() {
            hist[v as usize] += 1;
        }
        let total = label.len() as u64;
        for c in &mut self.classes {
            let n = hist[c.id as usize];
            if n > 0 {
                c.pixel_count += n;
                c.pixels_in_present_labels += total;
                c.image_count += 1;
            }
        }
        self.total_images += 1;
    }

    /// Merge counts from a disjoint shard of the same palette.
    pub fn merge(&mut self, other: &ClassStats) -> Result<()> {
        if self.classes.len() != other.classes.len()
            || self.classes.iter().zip(&other.classes).any(|(a, b)| a.id != b.id)
        {
            return Err(Error::ShapeMismatch("stats over different class sets".into()));
        }
        self.total_images += other.total_images;
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.pixel_count += b.pixel_count;
            a.pixels_in_present_labels += b.pixels_in_present_labels;
            a.image_count += b.image_count;
        }
        Ok(())
    }

    pub fn class(&self, id: u8) -> Option<&ClassCount> {
        self.classes.iter().find(|c| c.id == id)
    }

    /// Pixel frequency within labels containing the class; `None` if absent.
    pub fn frequency(&self, id: u8) -> Option<f64> {
        let c = self.class(id)?;
        c.is_present()
            .then(|| c.pixel_count as f64 / c.pixels_in_present_labels as f64)
    }

    /// Fraction of labels that contain the class.
    pub fn occurrence(&self, id: u8) -> Option<f64> {
        let c = self.class(id)?;
        (self.total_images > 0).then(|| c.image_count as f64 / self.total_images as f64)
    }

    /// Stats with derived ratios, in the stats.json layout.
    pub fn report(&self) -> StatsReport {
        StatsReport {
            total_images: self.total_images,
            classes: self
                .classes
                .iter()
                .map(|c| ClassStatsRow {
                    count: c.clone(),
                    frequency: self.frequency(c.id),
                    occurrence: self.occurrence(c.id).unwrap_or(0.0),
                    absent: !c.is_present(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassStatsRow {
    #[serde(flatten)]
    pub count: ClassCount,
    /// f_c; null when the class is absent.
    pub frequency: Option<f64>,
    /// n_c.
    pub occurrence: f64,
    pub absent: bool,
}

/// Serialized form of [`ClassStats`]; counts are authoritative, ratios are
/// informational and recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsReport {
    pub total_images: u64,
    pub classes: Vec<ClassStatsRow>,
}

impl StatsReport {
    pub fn into_stats(self) -> Result<ClassStats> {
        let stats = ClassStats {
            total_images: self.total_images,
            classes: self.classes.into_iter().map(|r| r.count).collect(),
        };
        for c in &stats.classes {
            if c.image_count > stats.total_images
                || c.pixel_count > c.pixels_in_present_labels
                || (c.image_count == 0) != (c.pixels_in_present_labels == 0)
            {
                return Err(Error::InvalidConfig(format!("inconsistent counts for class {}", c.id)));
            }
        }
        Ok(stats)
    }
}

/// Count class pixels and occurrences over a set of labels.
pub fn compute_stats<'a>(labels: impl IntoIterator<Item = &'a LabelMap>, palette: &Palette) -> Result<ClassStats> {
    let mut stats = ClassStats::empty(palette);
    for label in labels {
        stats.add_label(label);
    }
    if stats.total_images == 0 {
        return Err(Error::EmptyInput("no labels to count"));
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "EQ", alias = "eq")]
    Equal,
    #[serde(rename = "FB", alias = "fb")]
    MedianFrequency,
    #[serde(rename = "TB", alias = "tb")]
    MedianTotal,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eq" => Ok(Scheme::Equal),
            "fb" => Ok(Scheme::MedianFrequency),
            "tb" => Ok(Scheme::MedianTotal),
            other => Err(Error::InvalidConfig(format!("unknown weighting scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFlag {
    /// Never occurs in the dataset; weight forced to 0.
    Absent,
    /// Weighted by the formula but not part of the median set.
    ExcludedFromMedian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeight {
    pub id: u8,
    pub name: String,
    pub weight: f64,
    pub flags: Vec<WeightFlag>,
}

/// Per-class weights; the weights.json layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub scheme: Scheme,
    pub classes: Vec<ClassWeight>,
}

impl WeightVector {
    pub fn weight(&self, id: u8) -> Option<f64> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.weight)
    }

    /// Dense vector indexed by class id, `0.0` for ids not listed.
    pub fn dense(&self, channels: usize) -> Vec<f64> {
        let mut out = vec![0.0; channels];
        for c in &self.classes {
            if (c.id as usize) < channels {
                out[c.id as usize] = c.weight;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BalanceOptions {
    /// Let the background class enter the median set.
    pub include_background: bool,
}

/// Median with the two-middle-value mean for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

pub fn weights_eq(palette: &Palette) -> WeightVector {
    let mut classes: Vec<ClassWeight> = palette
        .entries
        .iter()
        .map(|e| ClassWeight {
            id: e.id,
            name: e.name.clone(),
            weight: 1.0,
            flags: Vec::new(),
        })
        .collect();
    classes.sort_by_key(|c| c.id);
    WeightVector {
        scheme: Scheme::Equal,
        classes,
    }
}

pub fn weights_fb(stats: &ClassStats, opts: BalanceOptions) -> Result<WeightVector> {
    median_balanced(stats, opts, Scheme::MedianFrequency, |_, f, _| f)
}

pub fn weights_tb(stats: &ClassStats, opts: BalanceOptions) -> Result<WeightVector> {
    median_balanced(stats, opts, Scheme::MedianTotal, |_, f, n| f + n)
}

pub fn weights_for(scheme: Scheme, stats: &ClassStats, palette: &Palette, opts: BalanceOptions) -> Result<WeightVector> {
    match scheme {
        Scheme::Equal => Ok(weights_eq(palette)),
        Scheme::MedianFrequency => weights_fb(stats, opts),
        Scheme::MedianTotal => weights_tb(stats, opts),
    }
}

fn median_balanced(
    stats: &ClassStats,
    opts: BalanceOptions,
    scheme: Scheme,
    score: impl Fn(u8, f64, f64) -> f64,
) -> Result<WeightVector> {
    if stats.total_images == 0 {
        return Err(Error::EmptyInput("stats cover no images"));
    }
    let in_median = |id: u8| opts.include_background || id != BACKGROUND_ID;
    let mut scores = Vec::with_capacity(stats.classes.len());
    for c in &stats.classes {
        let value = stats
            .frequency(c.id)
            .map(|f| score(c.id, f, c.image_count as f64 / stats.total_images as f64));
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DegenerateClass {
                    id: c.id,
                    reason: format!("balancing denominator is {v}"),
                });
            }
        }
        scores.push(value);
    }
    let median_set: Vec<f64> = stats
        .classes
        .iter()
        .zip(&scores)
        .filter(|(c, _)| in_median(c.id))
        .filter_map(|(_, s)| *s)
        .collect();
    let m = median(&median_set).ok_or(Error::EmptyInput("no present classes to balance"))?;
    let classes = stats
        .classes
        .iter()
        .zip(&scores)
        .map(|(c, s)| {
            let mut flags = Vec::new();
            if !in_median(c.id) {
                flags.push(WeightFlag::ExcludedFromMedian);
            }
            let weight = match s {
                Some(v) => m / v,
                None => {
                    flags.push(WeightFlag::Absent);
                    0.0
                }
            };
            ClassWeight {
                id: c.id,
                name: c.name.clone(),
                weight,
                flags,
            }
        })
        .collect();
    Ok(WeightVector { scheme, classes })
}
