//! Independent reference implementations used as test oracles. They share no
//! code with the library: plain loops, sorting medians, naive formulas.
#![allow(dead_code)]

/// Per-class (pixel_count, pixels_in_present_labels, image_count) by brute force.
pub fn recount(labels: &[Vec<u8>], class: u8) -> (u64, u64, u64) {
    let mut pix = 0;
    let mut present = 0;
    let mut images = 0;
    for l in labels {
        let n = l.iter().filter(|&&v| v == class).count() as u64;
        if n > 0 {
            pix += n;
            present += l.len() as u64;
            images += 1;
        }
    }
    (pix, present, images)
}

pub fn sorted_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// FB and TB weights for `classes` (all present), background excluded from
/// the medians but still weighted.
pub fn balance_weights(labels: &[Vec<u8>], classes: &[u8], background: u8) -> (Vec<f64>, Vec<f64>) {
    let total = labels.len() as f64;
    let f: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let (p, q, _) = recount(labels, c);
            p as f64 / q as f64
        })
        .collect();
    let n: Vec<f64> = classes
        .iter()
        .map(|&c| recount(labels, c).2 as f64 / total)
        .collect();
    let in_median: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] != background).collect();
    let mf = sorted_median(in_median.iter().map(|&i| f[i]).collect());
    let mg = sorted_median(in_median.iter().map(|&i| f[i] + n[i]).collect());
    let fb = f.iter().map(|fi| mf / fi).collect();
    let tb = f.iter().zip(&n).map(|(fi, ni)| mg / (fi + ni)).collect();
    (fb, tb)
}

/// Weighted cross-entropy averaged over non-ignored pixels, computed with
/// a naive log-sum-exp. `logits` is HWC.
pub fn cross_entropy(logits: &[f64], channels: usize, target: &[u8], weights: &[f64], ignore: u8) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (p, &t) in target.iter().enumerate() {
        if t == ignore {
            continue;
        }
        let x = &logits[p * channels..(p + 1) * channels];
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += weights[t as usize] * (lse - x[t as usize]);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Crossing-number point-in-polygon test written from scratch.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// (tp, fp, fn) by visiting every pixel.
pub fn confusion(pred: &[u8], gt: &[u8], class: u8, ignore: u8) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..gt.len() {
        if gt[i] == ignore {
            continue;
        }
        if pred[i] == class && gt[i] == class {
            tp += 1;
        } else if pred[i] == class {
            fp += 1;
        } else if gt[i] == class {
            fn_ += 1;
        }
    }
    (tp, fp, fn_)
}

/// PRE, REC, F1, IoU from counts, as plain formulas; None when undefined.
pub fn metric_formulas(tp: u64, fp: u64, fn_: u64) -> Option<[f64; 4]> {
    if tp + fp + fn_ == 0 {
        return None;
    }
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let pre = div(tp, tp + fp);
    let rec = div(tp, tp + fn_);
    let f1 = if pre + rec == 0.0 { 0.0 } else { 2.0 * pre * rec / (pre + rec) };
    Some([pre, rec, f1, div(tp, tp + fp + fn_)])
}

/// Generator and discriminator GAN terms by direct elementwise sums.
pub fn gan_terms(real: &[f64], fake: &[f64]) -> (f64, f64) {
    let mr = real.iter().map(|r| r.ln()).sum::<f64>() / real.len() as f64;
    let mf = fake.iter().map(|f| (1.0 - f).ln()).sum::<f64>() / fake.len() as f64;
    let g = fake.iter().map(|f| f.ln()).sum::<f64>() / fake.len() as f64;
    (-mr - mf, -g)
}
