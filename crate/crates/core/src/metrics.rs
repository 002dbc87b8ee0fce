//! Pixel-wise segmentation metrics at the argmax operating point.
//!
//! Metrics are computed per image and averaged over the images where the
//! class is defined (present in the ground truth or the prediction). Pixels
//! whose ground truth is the ignore id are excluded from every count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelmap::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PixelCounts {
    pub fn add(&mut self, other: PixelCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
}

pub fn count_pixels(pred: &LabelMap, gt: &LabelMap, class: u8, ignore_id: u8) -> Result<PixelCounts> {
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{}, ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = PixelCounts::default();
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        if g == ignore_id {
            continue;
        }
        match (p == class, g == class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// PRE, REC, F1 and IoU; `None` when the class is absent from both maps.
pub fn image_metrics(c: PixelCounts) -> Option<ImageMetrics> {
    if c.tp + c.fp + c.fn_ == 0 {
        return None;
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Some(ImageMetrics {
        precision,
        recall,
        f1,
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of per-image metrics.
    #[default]
    PerImage,
    /// Metrics of counts pooled over the whole set.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub id: u8,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    /// Images where the class was defined and entered the average.
    pub images_evaluated: usize,
    /// False when no image defined the class; metrics are then 0.
    pub evaluable: bool,
    pub counts: PixelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub ignore_id: u8,
    /// Images where a class is absent from both prediction and ground truth
    /// are skipped for that class rather than scored.
    pub skips_undefined_images: bool,
    pub images: usize,
    pub classes: Vec<ClassReport>,
    /// Means over evaluable classes.
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub miou: f64,
    pub not_evaluable: Vec<String>,
}

/// Mean of per-class IoU values.
pub fn mean_iou(per_class: &[f64]) -> Option<f64> {
    (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64)
}

pub fn evaluate_set(
    pairs: &[(LabelMap, LabelMap)],
    classes: &[(u8, String)],
    ignore_id: u8,
    averaging: Averaging,
) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no prediction / ground-truth pairs"));
    }
    let mut reports = Vec::with_capacity(classes.len());
    for (id, name) in classes {
        let mut pooled = PixelCounts::default();
        let mut per_image = Vec::new();
        for (pred, gt) in pairs {
            let c = count_pixels(pred, gt, *id, ignore_id)?;
            pooled.add(c);
            if let Some(m) = image_metrics(c) {
                per_image.push(m);
            }
        }
        let agg = match averaging {
            Averaging::PerImage => {
                let n = per_image.len() as f64;
                (!per_image.is_empty()).then(|| ImageMetrics {
                    precision: per_image.iter().map(|m| m.precision).sum::<f64>() / n,
                    recall: per_image.iter().map(|m| m.recall).sum::<f64>() / n,
                    f1: per_image.iter().map(|m| m.f1).sum::<f64>() / n,
                    iou: per_image.iter().map(|m| m.iou).sum::<f64>() / n,
                })
            }
            Averaging::Pooled => image_metrics(pooled),
        };
        let evaluable = agg.is_some();
        let m = agg.unwrap_or(ImageMetrics {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            iou: 0.0,
        });
        reports.push(ClassReport {
            id: *id,
            name: name.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            iou: m.iou,
            images_evaluated: per_image.len(),
            evaluable,
            counts: pooled,
        });
    }
    let ok: Vec<&ClassReport> = reports.iter().filter(|r| r.evaluable).collect();
    let mean = |f: fn(&ClassReport) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    Ok(MetricsReport {
        averaging,
        ignore_id,
        skips_undefined_images: true,
        images: pairs.len(),
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        mean_f1: mean(|r| r.f1),
        miou: mean_iou(&ok.iter().map(|r| r.iou).collect::<Vec<_>>()).unwrap_or(0.0),
        not_evaluable: reports.iter().filter(|r| !r.evaluable).map(|r| r.name.clone()).collect(),
        classes: reports,
    })
}

impl MetricsReport {
    /// Header and one row laid out as PRE/REC/F1/IoU per class, then a MEAN
    /// block; values in percent.
    pub fn table_rows(&self) -> (Vec<String>, Vec<String>) {
        let mut header = Vec::new();
        let mut row = Vec::new();
        let pct = |v: f64| format!("{:.1}", 100.0 * v);
        for c in &self.classes {
            let tag = c.name.to_uppercase();
            for (k, v) in [("PRE", c.precision), ("REC", c.recall), ("F1", c.f1), ("IoU", c.iou)] {
                header.push(format!("{tag} {k}"));
                // Classes with no defined image get an empty cell, not 0.0.
                row.push(if c.evaluable { pct(v) } else { String::new() });
            }
        }
        for (k, v) in [
            ("PRE", self.mean_precision),
            ("REC", self.mean_recall),
            ("F1", self.mean_f1),
            ("mIoU", self.miou),
        ] {
            header.push(format!("MEAN {k}"));
            row.push(pct(v));
        }
        (header, row)
    }
}
