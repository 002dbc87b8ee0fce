//! Loss combinators of the label-to-image synthesis objective.
//!
//! These evaluate the scalar objective over outputs supplied by the caller
//! (discriminator score maps, discriminator and perception-network feature
//! pyramids); no network is run here.
//!
//! Layer `i` of `l` is weighted by `1 / w_i` with `w_i = 2^(l - i)`, so the
//! deepest layer counts fully and each shallower layer half as much as the
//! next.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losskernel::pairwise_sum;

/// Dense real tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!("{} values for shape {:?}", data.len(), shape)));
        }
        Ok(Self { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Per-scale, per-layer features: `scales[k][i]` is layer `i + 1` at scale `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePyramid {
    pub scales: Vec<Vec<Tensor>>,
}

/// Per-scale discriminator outputs in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub scales: Vec<Tensor>,
}

/// Default discriminator count.
pub const DEFAULT_SCALES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_fm: f64,
    pub lambda_vgg: f64,
    /// Discriminator layers entering the feature-matching loss.
    pub discriminator_layers: usize,
    /// Perception-network layers entering the perceptual loss.
    pub perceptual_layers: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_fm: 10.0,
            lambda_vgg: 10.0,
            discriminator_layers: 4,
            perceptual_layers: 5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_fm >= 0.0 && self.lambda_fm.is_finite() && self.lambda_vgg >= 0.0 && self.lambda_vgg.is_finite())
        {
            return Err(Error::Domain("loss lambdas must be finite and non-negative".into()));
        }
        if self.discriminator_layers == 0 || self.perceptual_layers == 0 {
            return Err(Error::Domain("layer counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// How `‖a - b‖_1` reduces over a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Mode {
    #[default]
    Sum,
    Mean,
}

/// `w_i = 2^(l - i)` for `1 <= i <= l`.
pub fn layer_weight(i: usize, l: usize) -> Result<f64> {
    if i == 0 || i > l {
        return Err(Error::LayerIndex { index: i, layers: l });
    }
    let exp = i32::try_from(l - i).map_err(|_| Error::LayerIndex { index: i, layers: l })?;
    Ok(2f64.powi(exp))
}

fn l1(a: &Tensor, b: &Tensor, mode: L1Mode) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch(format!("layer shapes {:?} vs {:?}", a.shape, b.shape)));
    }
    let diffs: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).collect();
    let s = pairwise_sum(&diffs);
    Ok(match mode {
        L1Mode::Sum => s,
        L1Mode::Mean if a.is_empty() => 0.0,
        L1Mode::Mean => s / a.len() as f64,
    })
}

fn check_layers(real: &[Tensor], fake: &[Tensor], layers: usize) -> Result<()> {
    if real.len() != fake.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} layers", real.len(), fake.len())));
    }
    if layers == 0 || layers > real.len() {
        return Err(Error::LayerIndex {
            index: layers,
            layers: real.len(),
        });
    }
    Ok(())
}

/// `Σ_{i=1..layers} (1 / w_i) ‖real_i - fake_i‖_1` for one scale.
pub fn layered_l1(real: &[Tensor], fake: &[Tensor], layers: usize, mode: L1Mode) -> Result<f64> {
    check_layers(real, fake, layers)?;
    let mut terms = Vec::with_capacity(layers);
    for i in 1..=layers {
        terms.push(l1(&real[i - 1], &fake[i - 1], mode)? / layer_weight(i, layers)?);
    }
    Ok(pairwise_sum(&terms))
}

fn check_pyramids(real: &FeaturePyramid, fake: &FeaturePyramid) -> Result<()> {
    if real.scales.len() != fake.scales.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} scales",
            real.scales.len(),
            fake.scales.len()
        )));
    }
    Ok(())
}

/// Feature-matching loss per scale.
pub fn feature_matching_per_scale(
    real: &FeaturePyramid,
    fake: &FeaturePyramid,
    layers: usize,
    mode: L1Mode,
) -> Result<Vec<f64>> {
    check_pyramids(real, fake)?;
    real.scales
        .iter()
        .zip(&fake.scales)
        .map(|(r, f)| layered_l1(r, f, layers, mode))
        .collect()
}

/// Feature-matching loss summed over all scales.
pub fn feature_matching_loss(real: &FeaturePyramid, fake: &FeaturePyramid, layers: usize, mode: L1Mode) -> Result<f64> {
    Ok(feature_matching_per_scale(real, fake, layers, mode)?.iter().sum())
}

/// Perceptual loss over a single-scale feature list.
pub fn perceptual_loss(real: &[Tensor], fake: &[Tensor], layers: usize, mode: L1Mode) -> Result<f64> {
    layered_l1(real, fake, layers, mode)
}

/// Gradient of [`layered_l1`] with respect to `fake`; zero where the
/// difference is exactly zero and for layers beyond `layers`.
pub fn layered_l1_grad(real: &[Tensor], fake: &[Tensor], layers: usize, mode: L1Mode) -> Result<Vec<Tensor>> {
    check_layers(real, fake, layers)?;
    let mut out = Vec::with_capacity(fake.len());
    for (i, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.shape != f.shape {
            return Err(Error::ShapeMismatch(format!("layer shapes {:?} vs {:?}", r.shape, f.shape)));
        }
        let scale = if i < layers {
            let s = 1.0 / layer_weight(i + 1, layers)?;
            match mode {
                L1Mode::Sum => s,
                L1Mode::Mean if f.is_empty() => 0.0,
                L1Mode::Mean => s / f.len() as f64,
            }
        } else {
            0.0
        };
        let data = r
            .data
            .iter()
            .zip(&f.data)
            .map(|(&a, &b)| {
                let d = b - a;
                if d > 0.0 {
                    scale
                } else if d < 0.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        out.push(Tensor {
            shape: f.shape.clone(),
            data,
        });
    }
    Ok(out)
}

pub fn feature_matching_grad(
    real: &FeaturePyramid,
    fake: &FeaturePyramid,
    layers: usize,
    mode: L1Mode,
) -> Result<FeaturePyramid> {
    check_pyramids(real, fake)?;
    Ok(FeaturePyramid {
        scales: real
            .scales
            .iter()
            .zip(&fake.scales)
            .map(|(r, f)| layered_l1_grad(r, f, layers, mode))
            .collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanTerms {
    /// `-mean(log real) - mean(log(1 - fake))`.
    pub discriminator: f64,
    /// `-mean(log fake)`.
    pub generator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanLoss {
    pub per_scale: Vec<GanTerms>,
    pub discriminator: f64,
    pub generator: f64,
}

fn check_scores(t: &Tensor) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Domain("empty score map".into()));
    }
    if let Some(v) = t.data.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Domain(format!("discriminator score {v} outside (0, 1)")));
    }
    Ok(())
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    pairwise_sum(&v) / v.len() as f64
}

/// Saturating GAN loss per scale and summed over scales.
pub fn gan_loss(real: &ScoreMap, fake: &ScoreMap) -> Result<GanLoss> {
    if real.scales.len() != fake.scales.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} scales",
            real.scales.len(),
            fake.scales.len()
        )));
    }
    let mut per_scale = Vec::with_capacity(real.scales.len());
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        check_scores(r)?;
        check_scores(f)?;
        let real_term = -mean_of(r.data.iter().map(|v| v.ln()));
        let fake_term = -mean_of(f.data.iter().map(|v| (1.0 - v).ln()));
        per_scale.push(GanTerms {
            discriminator: real_term + fake_term,
            generator: -mean_of(f.data.iter().map(|v| v.ln())),
        });
    }
    Ok(GanLoss {
        discriminator: per_scale.iter().map(|t| t.discriminator).sum(),
        generator: per_scale.iter().map(|t| t.generator).sum(),
        per_scale,
    })
}

/// Gradient of the summed generator term with respect to the fake scores.
pub fn gan_generator_grad(fake: &ScoreMap) -> Result<ScoreMap> {
    let mut scales = Vec::with_capacity(fake.scales.len());
    for f in &fake.scales {
        check_scores(f)?;
        let n = f.len() as f64;
        scales.push(Tensor {
            shape: f.shape.clone(),
            data: f.data.iter().map(|v| -1.0 / (n * v)).collect(),
        });
    }
    Ok(ScoreMap { scales })
}

/// Generator-side objective: `Σ_k gan_k + λ_FM · fm + λ_VGG · vgg`.
pub fn total_objective(gan_generator_terms: &[f64], fm: f64, vgg: f64, lw: &LossWeights) -> Result<f64> {
    if gan_generator_terms.iter().chain([&fm, &vgg]).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective terms"));
    }
    lw.validate()?;
    Ok(gan_generator_terms.iter().sum::<f64>() + lw.lambda_fm * fm + lw.lambda_vgg * vgg)
}
