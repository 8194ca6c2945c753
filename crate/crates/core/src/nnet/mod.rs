//! Differentiable-model kernel: shared extractor, selector and classifier
//! heads, cross-entropy, exact reverse-mode gradients with freezable
//! parameter blocks, and the stabilized optimizer stack.

mod checkpoint;
pub mod extractor;
mod optim;

pub use checkpoint::{load_model, save_model, CheckpointMeta};
pub use extractor::{
    band_log_features, cnn_kernel_len, feature_dim, ArchKind, ArchShape, CnnParams,
    ExtractorCache, ExtractorParams, MlpParams, BANDS, CNN_POOL, CNN_SPATIAL_MAPS,
    CNN_TEMPORAL_FILTERS, LOG_POWER_EPS, MLP_FEATURES, MLP_HIDDEN,
};
pub use optim::{cosine_lr, sgd_step, AdamConfig, OptimizerState};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mat::{norm2, Mat};
use crate::num::Real;
use crate::signal::RngSeed;

/// Default max-norm bound on weight-matrix rows.
pub const DEFAULT_MAX_NORM: f64 = 2.0;

/// Affine head: `weight * feat + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<F> {
    pub weight: Mat<F>,
    pub bias: Vec<F>,
}

impl<F: Real> Head<F> {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Head {
            weight: Mat::zeros(outputs, inputs),
            bias: vec![F::zero(); outputs],
        }
    }

    pub fn forward(&self, feat: &[F]) -> Vec<F> {
        let mut out = self.weight.matvec(feat);
        for (o, &b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[F]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

/// Parameters of the full model: shared extractor `q`, selector head, and
/// classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub shape: ArchShape,
    pub extractor: ExtractorParams<F>,
    /// One-logit head producing the retention probability.
    pub selector: Head<F>,
    /// K-logit proxy classification head.
    pub classifier: Head<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn arch(&self) -> ArchKind {
        self.extractor.kind()
    }

    pub fn feature_dim(&self) -> usize {
        self.selector.weight.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.extractor
            .tensors()
            .iter()
            .chain(self.selector.tensors().iter())
            .chain(self.classifier.tensors().iter())
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Which parameter blocks participate in an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMask {
    pub extractor: bool,
    pub selector: bool,
    pub classifier: bool,
}

impl BlockMask {
    pub const ALL: BlockMask = BlockMask {
        extractor: true,
        selector: true,
        classifier: true,
    };

    /// Step A of the collaborative scheme: only the selector head moves.
    pub const SELECTOR_ONLY: BlockMask = BlockMask {
        extractor: false,
        selector: true,
        classifier: false,
    };

    /// Step B / pretraining: extractor plus classifier head.
    pub const PROXY: BlockMask = BlockMask {
        extractor: true,
        selector: false,
        classifier: true,
    };
}

/// Gradient holder mirroring [`ModelParams`]; absent blocks are frozen.
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub extractor: Option<ExtractorParams<F>>,
    pub selector: Option<Head<F>>,
    pub classifier: Option<Head<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros(params: &ModelParams<F>, mask: BlockMask) -> Self {
        Gradients {
            extractor: mask.extractor.then(|| params.extractor.zeros_like()),
            selector: mask.selector.then(|| {
                Head::zeros(params.selector.weight.rows(), params.selector.weight.cols())
            }),
            classifier: mask.classifier.then(|| {
                Head::zeros(
                    params.classifier.weight.rows(),
                    params.classifier.weight.cols(),
                )
            }),
        }
    }

    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        if let Some(e) = &self.extractor {
            out.extend(e.tensors());
        }
        if let Some(s) = &self.selector {
            out.extend(s.tensors());
        }
        if let Some(c) = &self.classifier {
            out.extend(c.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        if let Some(e) = &mut self.extractor {
            out.extend(e.tensors_mut());
        }
        if let Some(s) = &mut self.selector {
            out.extend(s.tensors_mut());
        }
        if let Some(c) = &mut self.classifier {
            out.extend(c.tensors_mut());
        }
        out
    }

    pub fn scale(&mut self, factor: F) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    /// Global L2 norm across every present block.
    pub fn global_norm(&self) -> F {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|&v| v * v)
            .fold(F::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// Parameter views for the same mask, in the same tensor order as
/// [`Gradients::tensors`]; feed these to the optimizer.
pub fn masked_tensors_mut<F: Real>(
    params: &mut ModelParams<F>,
    mask: BlockMask,
) -> Vec<&mut [F]> {
    let mut out = Vec::new();
    if mask.extractor {
        out.extend(params.extractor.tensors_mut());
    }
    if mask.selector {
        out.extend(params.selector.tensors_mut());
    }
    if mask.classifier {
        out.extend(params.classifier.tensors_mut());
    }
    out
}

pub fn masked_tensors<F: Real>(params: &ModelParams<F>, mask: BlockMask) -> Vec<&[F]> {
    let mut out = Vec::new();
    if mask.extractor {
        out.extend(params.extractor.tensors());
    }
    if mask.selector {
        out.extend(params.selector.tensors());
    }
    if mask.classifier {
        out.extend(params.classifier.tensors());
    }
    out
}

fn uniform_mat<F: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Mat<F> {
    Mat::from_fn(rows, cols, |_, _| F::of(rng.gen_range(-bound..bound)))
}

/// Fresh extractor + classifier parameters for the given architecture.
///
/// Weights are uniform in `+/- 1/sqrt(fan_in)`, biases zero, every draw from
/// the seeded generator. The selector head starts zeroed; training installs
/// it via [`init_selector_head`] once pretraining is done.
pub fn init_params<F: Real>(
    arch: ArchKind,
    shape: &ArchShape,
    seed: RngSeed,
) -> Result<ModelParams<F>> {
    if shape.num_classes < 2 {
        return Err(Error::validation("need at least two classes"));
    }
    let features = feature_dim(arch, shape)?;
    let mut rng = seed.rng();
    let extractor = match arch {
        ArchKind::BandPowerMlp => {
            let in_dim = shape.channels * BANDS.len();
            let w1 = uniform_mat(&mut rng, MLP_HIDDEN, in_dim, 1.0 / (in_dim as f64).sqrt());
            let w2 = uniform_mat(
                &mut rng,
                MLP_FEATURES,
                MLP_HIDDEN,
                1.0 / (MLP_HIDDEN as f64).sqrt(),
            );
            ExtractorParams::BandPowerMlp(MlpParams {
                w1,
                b1: vec![F::zero(); MLP_HIDDEN],
                w2,
                b2: vec![F::zero(); MLP_FEATURES],
            })
        }
        ArchKind::CompactCnn => {
            let kl = cnn_kernel_len(shape.fs);
            let temporal = uniform_mat(
                &mut rng,
                CNN_TEMPORAL_FILTERS,
                kl,
                1.0 / (kl as f64).sqrt(),
            );
            let spatial = uniform_mat(
                &mut rng,
                CNN_SPATIAL_MAPS,
                shape.channels,
                1.0 / (shape.channels as f64).sqrt(),
            );
            let pointwise = uniform_mat(
                &mut rng,
                CNN_SPATIAL_MAPS,
                CNN_SPATIAL_MAPS,
                1.0 / (CNN_SPATIAL_MAPS as f64).sqrt(),
            );
            ExtractorParams::CompactCnn(CnnParams {
                temporal,
                b_temporal: vec![F::zero(); CNN_TEMPORAL_FILTERS],
                spatial,
                b_spatial: vec![F::zero(); CNN_SPATIAL_MAPS],
                pointwise,
                b_pointwise: vec![F::zero(); CNN_SPATIAL_MAPS],
            })
        }
    };
    let classifier = Head {
        weight: uniform_mat(
            &mut rng,
            shape.num_classes,
            features,
            1.0 / (features as f64).sqrt(),
        ),
        bias: vec![F::zero(); shape.num_classes],
    };
    Ok(ModelParams {
        shape: *shape,
        extractor,
        selector: Head::zeros(1, features),
        classifier,
    })
}

/// Bias the selector toward retention: logit starts at +2 (probability about
/// 0.88) with small uniform weights, so the initial reconstruction is close
/// to the raw signal and the pretrained proxy stays valid.
pub fn init_selector_head<F: Real>(params: &mut ModelParams<F>, seed: RngSeed) {
    let mut rng = seed.rng();
    let features = params.feature_dim();
    params.selector = Head {
        weight: uniform_mat(&mut rng, 1, features, 1e-3),
        bias: vec![F::of(2.0)],
    };
}

/// Extractor forward from a raw matrix; validates the input shape.
pub fn extractor_forward<F: Real>(
    params: &ModelParams<F>,
    x: &Mat<F>,
) -> Result<(Vec<F>, ExtractorCache<F>)> {
    if x.rows() != params.shape.channels || x.cols() != params.shape.samples {
        return Err(Error::validation(format!(
            "input {}x{} does not match model shape {}x{}",
            x.rows(),
            x.cols(),
            params.shape.channels,
            params.shape.samples
        )));
    }
    Ok(extractor::forward_raw(
        &params.extractor,
        x,
        params.shape.fs,
    ))
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Retention probability `sigmoid(w . feat + b)`.
pub fn selector_forward<F: Real>(params: &ModelParams<F>, feat: &[F]) -> F {
    sigmoid(params.selector.forward(feat)[0])
}

/// Proxy-task logits; softmax is applied only inside the loss.
pub fn classifier_forward<F: Real>(params: &ModelParams<F>, feat: &[F]) -> Vec<F> {
    params.classifier.forward(feat)
}

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy in nats via the log-sum-exp trick; never negative.
pub fn cross_entropy<F: Real>(logits: &[F], label: usize) -> Result<F> {
    if label >= logits.len() {
        return Err(Error::validation(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<F>().ln();
    Ok((lse - logits[label]).max(F::zero()))
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_backward<F: Real>(logits: &[F], label: usize) -> Vec<F> {
    let mut g = softmax(logits);
    g[label] -= F::one();
    g
}

/// Backward through an affine head: accumulates parameter gradients when a
/// holder is given and always returns the feature gradient.
pub fn head_backward<F: Real>(
    head: &Head<F>,
    feat: &[F],
    dout: &[F],
    grads: Option<&mut Head<F>>,
) -> Vec<F> {
    if let Some(g) = grads {
        for (r, &d) in dout.iter().enumerate() {
            for (gw, &f) in g.weight.row_mut(r).iter_mut().zip(feat) {
                *gw += d * f;
            }
            g.bias[r] += d;
        }
    }
    head.weight.tr_matvec(dout)
}

/// Global-norm gradient clipping.
///
/// Leaves gradients whose global L2 norm is at most `threshold` untouched;
/// otherwise scales the whole bundle to that norm. Returns the pre-clip norm.
pub fn clip_gradients<F: Real>(grads: &mut Gradients<F>, threshold: f64) -> Result<F> {
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(Error::numerical("non-finite gradient norm"));
    }
    let threshold_f = F::of(threshold);
    if norm > threshold_f {
        grads.scale(threshold_f / norm);
    }
    Ok(norm)
}

/// Rescales every weight-matrix row with L2 norm above `rho` back to `rho`;
/// biases are untouched. Idempotent.
pub fn max_norm_project<F: Real>(params: &mut ModelParams<F>, rho: f64) {
    let rho_f = F::of(rho);
    let mut mats: Vec<&mut Mat<F>> = params.extractor.weight_matrices_mut();
    mats.push(&mut params.selector.weight);
    mats.push(&mut params.classifier.weight);
    for mat in mats {
        for r in 0..mat.rows() {
            let row = mat.row_mut(r);
            let norm = norm2(row);
            if norm > rho_f {
                let scale = rho_f / norm;
                for v in row {
                    *v *= scale;
                }
            }
        }
    }
}
