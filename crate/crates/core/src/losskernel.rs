//! Channel softmax, class-weighted cross-entropy with its analytic gradient,
//! and argmax decoding. Maps are stored pixel-major with channels contiguous.

use crate::error::{Error, Result};
use crate::labelmap::LabelMap;

/// Raw network outputs, `height x width x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMap {
    height: u32,
    width: u32,
    channels: usize,
    data: Vec<f64>,
}

/// Per-pixel class probabilities, same layout as [`LogitMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: u32,
    width: u32,
    channels: usize,
    data: Vec<f64>,
}

fn check_shape(height: u32, width: u32, channels: usize, len: usize) -> Result<()> {
    if !(2..=256).contains(&channels) {
        return Err(Error::ShapeMismatch(format!("channel count {channels} outside 2..=256")));
    }
    if height == 0 || width == 0 || len != height as usize * width as usize * channels {
        return Err(Error::ShapeMismatch(format!(
            "{len} values for {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

impl LogitMap {
    pub fn new(height: u32, width: u32, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels(&self) -> usize {
        self.height as usize * self.width as usize
    }
}

impl ProbMap {
    pub fn new(height: u32, width: u32, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Anything with a per-pixel channel vector.
pub trait ChannelMap {
    fn height(&self) -> u32;
    fn width(&self) -> u32;
    fn channels(&self) -> usize;
    fn values(&self) -> &[f64];
}

macro_rules! channel_map {
    ($t:ty) => {
        impl ChannelMap for $t {
            fn height(&self) -> u32 {
                self.height
            }
            fn width(&self) -> u32 {
                self.width
            }
            fn channels(&self) -> usize {
                self.channels
            }
            fn values(&self) -> &[f64] {
                &self.data
            }
        }
    };
}

channel_map!(LogitMap);
channel_map!(ProbMap);

/// Sum with a fixed binary-tree order, independent of how work is split.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax_channelwise(logits: &LogitMap) -> Result<ProbMap> {
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let c = logits.channels;
    let mut data = vec![0.0; logits.data.len()];
    for (src, dst) in logits.data.chunks_exact(c).zip(data.chunks_exact_mut(c)) {
        softmax_into(src, dst);
    }
    Ok(ProbMap {
        height: logits.height,
        width: logits.width,
        channels: c,
        data,
    })
}

/// How the per-pixel weighted losses are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Divide by the number of non-ignored pixels.
    #[default]
    PixelMean,
    /// Divide by the sum of the target-class weights.
    WeightedMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// d loss / d logits, same layout as the logits.
    pub grad: Vec<f64>,
    pub evaluated_pixels: usize,
    /// Every pixel carried the ignore id; loss and gradient are zero.
    pub all_ignored: bool,
}

pub fn weighted_cross_entropy(
    logits: &LogitMap,
    target: &LabelMap,
    weights: &[f64],
    ignore_id: u8,
) -> Result<CrossEntropy> {
    weighted_cross_entropy_with(logits, target, weights, ignore_id, Reduction::PixelMean)
}

/// Mean of `w[t] * -log softmax(x)[t]` over non-ignored pixels, with the
/// exact gradient `(w[t] / N) * (softmax(x) - onehot(t))` per pixel.
pub fn weighted_cross_entropy_with(
    logits: &LogitMap,
    target: &LabelMap,
    weights: &[f64],
    ignore_id: u8,
    reduction: Reduction,
) -> Result<CrossEntropy> {
    if target.width() != logits.width || target.height() != logits.height {
        return Err(Error::ShapeMismatch(format!(
            "logits {}x{}, target {}x{}",
            logits.height,
            logits.width,
            target.height(),
            target.width()
        )));
    }
    let c = logits.channels;
    if weights.len() < c {
        return Err(Error::ShapeMismatch(format!("{} weights for {c} channels", weights.len())));
    }
    if weights[..c].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Domain("class weights must be finite and non-negative".into()));
    }
    let ids = target.as_slice();
    for (pixel, &t) in ids.iter().enumerate() {
        if t != ignore_id && t as usize >= c {
            return Err(Error::InvalidTarget { id: t, pixel });
        }
    }

    let mut terms = Vec::with_capacity(ids.len());
    let mut target_weights = Vec::with_capacity(ids.len());
    let mut grad = vec![0.0; logits.data.len()];
    for ((x, g), &t) in logits.data.chunks_exact(c).zip(grad.chunks_exact_mut(c)).zip(ids) {
        if t == ignore_id {
            continue;
        }
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + pairwise_sum(&x.iter().map(|v| (v - max).exp()).collect::<Vec<_>>()).ln();
        let w = weights[t as usize];
        terms.push(w * (lse - x[t as usize]));
        target_weights.push(w);
        softmax_into(x, g);
        g[t as usize] -= 1.0;
        for v in g.iter_mut() {
            *v *= w;
        }
    }
    let n = terms.len();
    if n == 0 {
        return Ok(CrossEntropy {
            loss: 0.0,
            grad,
            evaluated_pixels: 0,
            all_ignored: true,
        });
    }
    let norm = match reduction {
        Reduction::PixelMean => n as f64,
        Reduction::WeightedMean => pairwise_sum(&target_weights),
    };
    if norm == 0.0 {
        return Ok(CrossEntropy {
            loss: 0.0,
            grad: vec![0.0; logits.data.len()],
            evaluated_pixels: n,
            all_ignored: false,
        });
    }
    for v in grad.iter_mut() {
        *v /= norm;
    }
    Ok(CrossEntropy {
        loss: pairwise_sum(&terms) / norm,
        grad,
        evaluated_pixels: n,
        all_ignored: false,
    })
}

/// Per-pixel channel argmax; ties go to the lowest class id.
pub fn argmax_decode(output: &impl ChannelMap) -> LabelMap {
    let c = output.channels();
    let data = output
        .values()
        .chunks_exact(c)
        .map(|px| {
            let mut best = 0;
            for k in 1..c {
                if px[k] > px[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(output.width(), output.height(), data).expect("shape checked at construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(logits: &[f64]) -> LogitMap {
        LogitMap::new(1, 1, logits.len(), logits.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_softmax() {
        let p = softmax_channelwise(&single(&[0.0, 0.0])).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax_channelwise(&single(&[1000.0, 0.0])).unwrap();
        assert_eq!(p.as_slice()[0], 1.0);
        assert!(p.as_slice()[1] >= 0.0 && p.as_slice()[1] < 1e-300);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax_channelwise(&single(&[0.3, -1.2, 2.5, 0.0])).unwrap();
        let b = softmax_channelwise(&single(&[100.3, 98.8, 102.5, 100.0])).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(matches!(LogitMap::new(1, 1, 2, vec![f64::NAN, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn ln2_case() {
        let target = LabelMap::new(1, 1, vec![0]).unwrap();
        let ce = weighted_cross_entropy(&single(&[0.0, 0.0]), &target, &[1.0, 1.0], 255).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(ce.grad, vec![-0.5, 0.5]);
    }

    #[test]
    fn doubling_weights_doubles_everything() {
        let logits = LogitMap::new(1, 2, 3, vec![0.1, 0.5, -0.3, 1.0, -2.0, 0.4]).unwrap();
        let target = LabelMap::new(2, 1, vec![2, 0]).unwrap();
        let a = weighted_cross_entropy(&logits, &target, &[0.5, 1.0, 3.0], 255).unwrap();
        let b = weighted_cross_entropy(&logits, &target, &[1.0, 2.0, 6.0], 255).unwrap();
        assert_eq!(b.loss, 2.0 * a.loss);
        for (x, y) in a.grad.iter().zip(&b.grad) {
            assert_eq!(*y, 2.0 * x);
        }
    }

    #[test]
    fn ignored_pixels_contribute_nothing() {
        let logits = LogitMap::new(1, 2, 2, vec![0.0, 0.0, 3.0, -1.0]).unwrap();
        let target = LabelMap::new(2, 1, vec![0, 255]).unwrap();
        let ce = weighted_cross_entropy(&logits, &target, &[1.0, 1.0], 255).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(&ce.grad[2..], &[0.0, 0.0]);
        assert_eq!(ce.evaluated_pixels, 1);
    }

    #[test]
    fn all_ignored_is_zero_with_flag() {
        let logits = LogitMap::new(1, 2, 2, vec![0.0, 1.0, 3.0, -1.0]).unwrap();
        let target = LabelMap::new(2, 1, vec![255, 255]).unwrap();
        let ce = weighted_cross_entropy(&logits, &target, &[1.0, 1.0], 255).unwrap();
        assert!(ce.all_ignored);
        assert_eq!(ce.loss, 0.0);
        assert!(ce.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn invalid_target_rejected() {
        let target = LabelMap::new(1, 1, vec![5]).unwrap();
        let err = weighted_cross_entropy(&single(&[0.0, 0.0]), &target, &[1.0, 1.0], 255).unwrap_err();
        assert!(matches!(err, Error::InvalidTarget { id: 5, pixel: 0 }));
    }

    #[test]
    fn weighted_mean_reduction() {
        let logits = LogitMap::new(1, 2, 2, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let target = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        let ce = weighted_cross_entropy_with(&logits, &target, &[1.0, 3.0], 255, Reduction::WeightedMean).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn argmax_and_ties() {
        let p = ProbMap::new(1, 2, 3, vec![0.1, 0.7, 0.2, 0.4, 0.2, 0.4]).unwrap();
        assert_eq!(argmax_decode(&p).as_slice(), &[1, 0]);
        let t = ProbMap::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_decode(&t).as_slice(), &[0]);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }
}
