//! The two shared feature extractors.
//!
//! `BandPowerMlp` maps per-channel log band powers through one hidden layer;
//! its band-power stage is parameter-free, so the features of a fixed input
//! can be precomputed once and reused across training steps. `CompactCnn`
//! is a small convolutional path: per-channel temporal filters, spatial
//! collapse, two average-pool stages, and a pointwise mix.
//!
//! Both use ELU activations and provide exact reverse-mode gradients with
//! respect to parameters and, when requested, the input matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::Real;
use crate::spectrum::{band_powers_backward, band_powers_cached, BandPowerCache};

/// Fixed analysis bands (Hz) for the band-power stage.
pub const BANDS: [(f64, f64); 5] = [(1.0, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, 45.0)];
/// Floor inside the per-sample RMS input normalization.
pub const INPUT_NORM_EPS: f64 = 1e-12;
/// Hidden width of the band-power MLP.
pub const MLP_HIDDEN: usize = 64;
/// Feature width of the band-power MLP.
pub const MLP_FEATURES: usize = 32;
/// Additive floor inside `ln(power + eps)`.
pub const LOG_POWER_EPS: f64 = 1e-12;

/// Temporal filters in the compact CNN.
pub const CNN_TEMPORAL_FILTERS: usize = 8;
/// Spatial maps (two per temporal filter).
pub const CNN_SPATIAL_MAPS: usize = 16;
/// Average-pool factor, applied twice.
pub const CNN_POOL: usize = 8;

/// Extractor architecture tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    BandPowerMlp,
    CompactCnn,
}

impl std::str::FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "band_power_mlp" | "bandpower" | "mlp" => Ok(ArchKind::BandPowerMlp),
            "compact_cnn" | "cnn" => Ok(ArchKind::CompactCnn),
            other => Err(Error::validation(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Input geometry the parameters are built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchShape {
    pub channels: usize,
    pub samples: usize,
    pub fs: f64,
    pub num_classes: usize,
}

/// Odd-rounded temporal kernel length, half the sampling rate.
pub fn cnn_kernel_len(fs: f64) -> usize {
    let mut k = (fs / 2.0).round() as usize;
    if k % 2 == 0 {
        k += 1;
    }
    k.max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<F> {
    pub w1: Mat<F>, // hidden x (C*5)
    pub b1: Vec<F>,
    pub w2: Mat<F>, // features x hidden
    pub b2: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams<F> {
    pub temporal: Mat<F>, // filters x kernel_len
    pub b_temporal: Vec<F>,
    pub spatial: Mat<F>, // maps x C
    pub b_spatial: Vec<F>,
    pub pointwise: Mat<F>, // maps x maps
    pub b_pointwise: Vec<F>,
}

/// Parameter bundle of the shared extractor `q`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorParams<F> {
    BandPowerMlp(MlpParams<F>),
    CompactCnn(CnnParams<F>),
}

impl<F: Real> ExtractorParams<F> {
    pub fn kind(&self) -> ArchKind {
        match self {
            ExtractorParams::BandPowerMlp(_) => ArchKind::BandPowerMlp,
            ExtractorParams::CompactCnn(_) => ArchKind::CompactCnn,
        }
    }

    /// Flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<&[F]> {
        match self {
            ExtractorParams::BandPowerMlp(p) => vec![
                p.w1.as_slice(),
                &p.b1,
                p.w2.as_slice(),
                &p.b2,
            ],
            ExtractorParams::CompactCnn(p) => vec![
                p.temporal.as_slice(),
                &p.b_temporal,
                p.spatial.as_slice(),
                &p.b_spatial,
                p.pointwise.as_slice(),
                &p.b_pointwise,
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        match self {
            ExtractorParams::BandPowerMlp(p) => vec![
                p.w1.as_mut_slice(),
                &mut p.b1,
                p.w2.as_mut_slice(),
                &mut p.b2,
            ],
            ExtractorParams::CompactCnn(p) => vec![
                p.temporal.as_mut_slice(),
                &mut p.b_temporal,
                p.spatial.as_mut_slice(),
                &mut p.b_spatial,
                p.pointwise.as_mut_slice(),
                &mut p.b_pointwise,
            ],
        }
    }

    /// Weight matrices subject to the max-norm row constraint.
    pub fn weight_matrices_mut(&mut self) -> Vec<&mut Mat<F>> {
        match self {
            ExtractorParams::BandPowerMlp(p) => vec![&mut p.w1, &mut p.w2],
            ExtractorParams::CompactCnn(p) => {
                vec![&mut p.temporal, &mut p.spatial, &mut p.pointwise]
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            ExtractorParams::BandPowerMlp(p) => ExtractorParams::BandPowerMlp(MlpParams {
                w1: Mat::zeros(p.w1.rows(), p.w1.cols()),
                b1: vec![F::zero(); p.b1.len()],
                w2: Mat::zeros(p.w2.rows(), p.w2.cols()),
                b2: vec![F::zero(); p.b2.len()],
            }),
            ExtractorParams::CompactCnn(p) => ExtractorParams::CompactCnn(CnnParams {
                temporal: Mat::zeros(p.temporal.rows(), p.temporal.cols()),
                b_temporal: vec![F::zero(); p.b_temporal.len()],
                spatial: Mat::zeros(p.spatial.rows(), p.spatial.cols()),
                b_spatial: vec![F::zero(); p.b_spatial.len()],
                pointwise: Mat::zeros(p.pointwise.rows(), p.pointwise.cols()),
                b_pointwise: vec![F::zero(); p.b_pointwise.len()],
            }),
        }
    }
}

/// Per-sample global-RMS normalization applied in front of both extractors.
///
/// Makes the feature maps invariant to a uniform rescaling of the input, so
/// the selector can only influence the proxy by changing the reconstruction's
/// shape, never by inflating its amplitude. Deterministic and per-sample; no
/// cross-sample statistics are involved.
#[derive(Debug, Clone)]
pub struct NormCache<F> {
    /// Original (pre-normalization) input.
    original: Mat<F>,
    /// 1 / (rms + eps).
    scale: F,
    /// rms of the original input.
    rms: F,
}

fn normalize_input<F: Real>(x: &Mat<F>) -> (Mat<F>, NormCache<F>) {
    let n = (x.rows() * x.cols()) as f64;
    let sum_sq: F = x.iter().map(|&v| v * v).sum();
    let rms = (sum_sq / F::of(n)).sqrt();
    let scale = F::one() / (rms + F::of(INPUT_NORM_EPS));
    let mut y = x.clone();
    y.scale(scale);
    (
        y,
        NormCache {
            original: x.clone(),
            scale,
            rms,
        },
    )
}

/// Chain rule through [`normalize_input`]: given `dL/dy`, returns `dL/dx`.
fn normalize_backward<F: Real>(cache: &NormCache<F>, upstream: &Mat<F>) -> Mat<F> {
    let mut dx = upstream.clone();
    dx.scale(cache.scale);
    if cache.rms > F::zero() {
        let n = F::of((cache.original.rows() * cache.original.cols()) as f64);
        let s = upstream.frobenius_dot(&cache.original);
        let coeff = s * cache.scale * cache.scale / (n * cache.rms);
        dx.add_scaled(-coeff, &cache.original);
    }
    dx
}

fn elu<F: Real>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        x.exp() - F::one()
    }
}

/// ELU derivative from the pre-activation and activation values.
fn elu_prime<F: Real>(pre: F, act: F) -> F {
    if pre > F::zero() {
        F::one()
    } else {
        act + F::one()
    }
}

/// Per-channel log band powers of the RMS-normalized input, flattened to
/// `C * 5` (the MLP's input).
///
/// These depend only on the signal, so callers may compute them once per
/// fixed input and feed [`mlp_forward_features`] afterwards.
pub fn band_log_features<F: Real>(x: &Mat<F>, fs: f64) -> Vec<F> {
    let (normalized, _) = normalize_input(x);
    let mut out = Vec::with_capacity(x.rows() * BANDS.len());
    for c in 0..x.rows() {
        let (powers, _) = band_powers_cached(normalized.row(c), fs, &BANDS);
        for p in powers {
            out.push((p + F::of(LOG_POWER_EPS)).ln());
        }
    }
    out
}

/// Forward cache of the MLP trunk (shared by the spectral and static paths).
#[derive(Debug, Clone)]
pub struct MlpTrunkCache<F> {
    pub logf: Vec<F>,
    pub h_pre: Vec<F>,
    pub h: Vec<F>,
}

/// Spectral half of the MLP cache; present only when the forward pass came
/// from a raw matrix, which is what makes input gradients possible.
#[derive(Debug, Clone)]
pub struct MlpSpectralCache<F> {
    pub per_channel: Vec<BandPowerCache<F>>,
    pub powers: Vec<F>,
    pub fs: f64,
    pub samples: usize,
    norm: NormCache<F>,
}

#[derive(Debug, Clone)]
pub struct CnnCache<F> {
    /// RMS-normalized input (what the convolution actually sees).
    pub input: Mat<F>,
    /// Temporal conv output, `filters` matrices of `C x T`.
    pub y: Vec<Mat<F>>,
    pub z_pre: Mat<F>,  // maps x T
    pub z_act: Mat<F>,  // maps x T
    pub p1: Mat<F>,     // maps x T/8
    pub u_pre: Mat<F>,  // maps x T/8
    pub u_act: Mat<F>,  // maps x T/8
    norm: NormCache<F>,
}

/// Activation cache retained by `extractor_forward` for the backward pass.
#[derive(Debug, Clone)]
pub enum ExtractorCache<F> {
    Mlp {
        spectral: Option<MlpSpectralCache<F>>,
        trunk: MlpTrunkCache<F>,
    },
    Cnn(CnnCache<F>),
}

fn mlp_trunk_forward<F: Real>(p: &MlpParams<F>, logf: Vec<F>) -> (Vec<F>, MlpTrunkCache<F>) {
    let mut h_pre = p.w1.matvec(&logf);
    for (v, &b) in h_pre.iter_mut().zip(&p.b1) {
        *v += b;
    }
    let h: Vec<F> = h_pre.iter().map(|&v| elu(v)).collect();
    let mut feat = p.w2.matvec(&h);
    for (v, &b) in feat.iter_mut().zip(&p.b2) {
        *v += b;
    }
    (feat, MlpTrunkCache { logf, h_pre, h })
}

/// MLP forward from precomputed log band features (no input gradient path).
pub fn mlp_forward_features<F: Real>(p: &MlpParams<F>, logf: &[F]) -> (Vec<F>, ExtractorCache<F>) {
    let (feat, trunk) = mlp_trunk_forward(p, logf.to_vec());
    (
        feat,
        ExtractorCache::Mlp {
            spectral: None,
            trunk,
        },
    )
}

fn mlp_forward_raw<F: Real>(
    p: &MlpParams<F>,
    x: &Mat<F>,
    fs: f64,
) -> (Vec<F>, ExtractorCache<F>) {
    let (normalized, norm) = normalize_input(x);
    let mut per_channel = Vec::with_capacity(x.rows());
    let mut powers = Vec::with_capacity(x.rows() * BANDS.len());
    let mut logf = Vec::with_capacity(x.rows() * BANDS.len());
    for c in 0..x.rows() {
        let (p_bands, cache) = band_powers_cached(normalized.row(c), fs, &BANDS);
        for &pw in &p_bands {
            powers.push(pw);
            logf.push((pw + F::of(LOG_POWER_EPS)).ln());
        }
        per_channel.push(cache);
    }
    let (feat, trunk) = mlp_trunk_forward(p, logf);
    (
        feat,
        ExtractorCache::Mlp {
            spectral: Some(MlpSpectralCache {
                per_channel,
                powers,
                fs,
                samples: x.cols(),
                norm,
            }),
            trunk,
        },
    )
}

fn cnn_forward<F: Real>(p: &CnnParams<F>, raw_input: &Mat<F>) -> (Vec<F>, ExtractorCache<F>) {
    let (x, norm) = normalize_input(raw_input);
    let x = &x;
    let c = x.rows();
    let t = x.cols();
    let kl = p.temporal.cols();
    let off = (kl - 1) / 2;
    let nf = p.temporal.rows();
    let maps = p.spatial.rows();

    // Per-channel temporal convolution with same-padding.
    let mut y = Vec::with_capacity(nf);
    for f in 0..nf {
        let kernel = p.temporal.row(f);
        let bias = p.b_temporal[f];
        let mut yf = Mat::zeros(c, t);
        for ch in 0..c {
            let row = x.row(ch);
            let dst = yf.row_mut(ch);
            for ti in 0..t {
                let mut acc = bias;
                for (j, &k) in kernel.iter().enumerate() {
                    let src = ti + j;
                    if src >= off && src - off < t {
                        acc += k * row[src - off];
                    }
                }
                dst[ti] = acc;
            }
        }
        y.push(yf);
    }

    // Spatial collapse: two maps per temporal filter.
    let mut z_pre = Mat::zeros(maps, t);
    for s in 0..maps {
        let f = s / 2;
        let w = p.spatial.row(s);
        let dst = z_pre.row_mut(s);
        for (ch, &wc) in w.iter().enumerate() {
            for (d, &v) in dst.iter_mut().zip(y[f].row(ch)) {
                *d += wc * v;
            }
        }
        for d in dst.iter_mut() {
            *d += p.b_spatial[s];
        }
    }
    let z_act = Mat::from_fn(maps, t, |r, cc| elu(z_pre[(r, cc)]));

    let t1 = t / CNN_POOL;
    let pool_inv = F::one() / F::of(CNN_POOL as f64);
    let p1 = Mat::from_fn(maps, t1, |r, cc| {
        (0..CNN_POOL)
            .map(|j| z_act[(r, cc * CNN_POOL + j)])
            .fold(F::zero(), |a, b| a + b)
            * pool_inv
    });

    let mut u_pre = Mat::zeros(maps, t1);
    for m in 0..maps {
        let w = p.pointwise.row(m);
        let dst = u_pre.row_mut(m);
        for (mp, &wm) in w.iter().enumerate() {
            for (d, &v) in dst.iter_mut().zip(p1.row(mp)) {
                *d += wm * v;
            }
        }
        for d in dst.iter_mut() {
            *d += p.b_pointwise[m];
        }
    }
    let u_act = Mat::from_fn(maps, t1, |r, cc| elu(u_pre[(r, cc)]));

    let t2 = t1 / CNN_POOL;
    let mut feat = Vec::with_capacity(maps * t2);
    for m in 0..maps {
        for cc in 0..t2 {
            feat.push(
                (0..CNN_POOL)
                    .map(|j| u_act[(m, cc * CNN_POOL + j)])
                    .fold(F::zero(), |a, b| a + b)
                    * pool_inv,
            );
        }
    }

    (
        feat,
        ExtractorCache::Cnn(CnnCache {
            input: x.clone(),
            y,
            z_pre,
            z_act,
            p1,
            u_pre,
            u_act,
            norm,
        }),
    )
}

/// Feature width produced for a given shape.
pub fn feature_dim(kind: ArchKind, shape: &ArchShape) -> Result<usize> {
    match kind {
        ArchKind::BandPowerMlp => Ok(MLP_FEATURES),
        ArchKind::CompactCnn => {
            let t2 = shape.samples / CNN_POOL / CNN_POOL;
            if t2 == 0 {
                return Err(Error::validation(format!(
                    "compact CNN needs at least {} samples, got {}",
                    CNN_POOL * CNN_POOL,
                    shape.samples
                )));
            }
            Ok(CNN_SPATIAL_MAPS * t2)
        }
    }
}

/// Extractor forward from a raw matrix; the cache supports both parameter
/// and input gradients.
pub fn forward_raw<F: Real>(
    params: &ExtractorParams<F>,
    x: &Mat<F>,
    fs: f64,
) -> (Vec<F>, ExtractorCache<F>) {
    match params {
        ExtractorParams::BandPowerMlp(p) => mlp_forward_raw(p, x, fs),
        ExtractorParams::CompactCnn(p) => cnn_forward(p, x),
    }
}

/// Backward through the extractor.
///
/// Adds parameter gradients into `grads` when provided (a frozen block simply
/// passes `None`) and returns the input gradient when `want_input` is set.
/// Requesting the input gradient from a features-only MLP cache is a caller
/// bug and panics.
pub fn backward<F: Real>(
    params: &ExtractorParams<F>,
    cache: &ExtractorCache<F>,
    dfeat: &[F],
    grads: Option<&mut ExtractorParams<F>>,
    want_input: bool,
) -> Option<Mat<F>> {
    match (params, cache) {
        (ExtractorParams::BandPowerMlp(p), ExtractorCache::Mlp { spectral, trunk }) => {
            let dh: Vec<F> = p.w2.tr_matvec(dfeat);
            let dh_pre: Vec<F> = dh
                .iter()
                .zip(trunk.h_pre.iter().zip(&trunk.h))
                .map(|(&g, (&pre, &act))| g * elu_prime(pre, act))
                .collect();
            if let Some(g) = grads {
                let ExtractorParams::BandPowerMlp(g) = g else {
                    panic!("gradient holder does not match architecture");
                };
                for (r, &d) in dfeat.iter().enumerate() {
                    for (gw, &h) in g.w2.row_mut(r).iter_mut().zip(&trunk.h) {
                        *gw += d * h;
                    }
                    g.b2[r] += d;
                }
                for (r, &d) in dh_pre.iter().enumerate() {
                    for (gw, &l) in g.w1.row_mut(r).iter_mut().zip(&trunk.logf) {
                        *gw += d * l;
                    }
                    g.b1[r] += d;
                }
            }
            if !want_input {
                return None;
            }
            let spectral = spectral
                .as_ref()
                .expect("input gradient requested from a features-only cache");
            let dlogf = p.w1.tr_matvec(&dh_pre);
            let channels = spectral.per_channel.len();
            let mut dnorm = Mat::zeros(channels, spectral.samples);
            for c in 0..channels {
                let dpowers: Vec<F> = (0..BANDS.len())
                    .map(|b| {
                        let idx = c * BANDS.len() + b;
                        dlogf[idx] / (spectral.powers[idx] + F::of(LOG_POWER_EPS))
                    })
                    .collect();
                let grad_row = band_powers_backward(
                    &spectral.per_channel[c],
                    spectral.fs,
                    &BANDS,
                    &dpowers,
                );
                dnorm.row_mut(c).copy_from_slice(&grad_row);
            }
            Some(normalize_backward(&spectral.norm, &dnorm))
        }
        (ExtractorParams::CompactCnn(p), ExtractorCache::Cnn(cache)) => {
            let maps = p.spatial.rows();
            let c = cache.input.rows();
            let t = cache.input.cols();
            let t1 = cache.p1.cols();
            let t2 = t1 / CNN_POOL;
            let kl = p.temporal.cols();
            let off = (kl - 1) / 2;
            let pool_inv = F::one() / F::of(CNN_POOL as f64);

            // Unpool feat -> u, through ELU.
            let mut du = Mat::zeros(maps, t1);
            for m in 0..maps {
                for cc in 0..t2 {
                    let g = dfeat[m * t2 + cc] * pool_inv;
                    for j in 0..CNN_POOL {
                        let col = cc * CNN_POOL + j;
                        du[(m, col)] =
                            g * elu_prime(cache.u_pre[(m, col)], cache.u_act[(m, col)]);
                    }
                }
            }

            // Pointwise mix backward.
            let mut dp1 = Mat::<F>::zeros(maps, t1);
            for m in 0..maps {
                for mp in 0..maps {
                    let w = p.pointwise[(m, mp)];
                    for cc in 0..t1 {
                        dp1[(mp, cc)] += w * du[(m, cc)];
                    }
                }
            }

            // Unpool p1 -> z, through ELU.
            let mut dz = Mat::zeros(maps, t);
            for s in 0..maps {
                for cc in 0..t1 {
                    let g = dp1[(s, cc)] * pool_inv;
                    for j in 0..CNN_POOL {
                        let col = cc * CNN_POOL + j;
                        dz[(s, col)] = g * elu_prime(cache.z_pre[(s, col)], cache.z_act[(s, col)]);
                    }
                }
            }

            if let Some(g) = grads {
                let ExtractorParams::CompactCnn(g) = g else {
                    panic!("gradient holder does not match architecture");
                };
                for m in 0..maps {
                    for mp in 0..maps {
                        let mut acc = F::zero();
                        for cc in 0..t1 {
                            acc += du[(m, cc)] * cache.p1[(mp, cc)];
                        }
                        g.pointwise[(m, mp)] += acc;
                    }
                    let mut acc = F::zero();
                    for cc in 0..t1 {
                        acc += du[(m, cc)];
                    }
                    g.b_pointwise[m] += acc;
                }
                for s in 0..maps {
                    let f = s / 2;
                    for ch in 0..c {
                        let mut acc = F::zero();
                        for cc in 0..t {
                            acc += dz[(s, cc)] * cache.y[f][(ch, cc)];
                        }
                        g.spatial[(s, ch)] += acc;
                    }
                    let mut acc = F::zero();
                    for cc in 0..t {
                        acc += dz[(s, cc)];
                    }
                    g.b_spatial[s] += acc;
                }
                // Temporal kernels: gather dy implicitly from dz.
                for f in 0..p.temporal.rows() {
                    let mut dk = vec![F::zero(); kl];
                    let mut db = F::zero();
                    for ch in 0..c {
                        let x_row = cache.input.row(ch);
                        // dy[f][ch][ti] = sum over the two child maps.
                        for ti in 0..t {
                            let dy = p.spatial[(2 * f, ch)] * dz[(2 * f, ti)]
                                + p.spatial[(2 * f + 1, ch)] * dz[(2 * f + 1, ti)];
                            if dy == F::zero() {
                                continue;
                            }
                            db += dy;
                            for (j, dkj) in dk.iter_mut().enumerate() {
                                let src = ti + j;
                                if src >= off && src - off < t {
                                    *dkj += dy * x_row[src - off];
                                }
                            }
                        }
                    }
                    for (gk, &d) in g.temporal.row_mut(f).iter_mut().zip(&dk) {
                        *gk += d;
                    }
                    g.b_temporal[f] += db;
                }
            }

            if !want_input {
                return None;
            }
            let mut dnorm = Mat::zeros(c, t);
            for f in 0..p.temporal.rows() {
                let kernel = p.temporal.row(f);
                for ch in 0..c {
                    let dst = dnorm.row_mut(ch);
                    for ti in 0..t {
                        let dy = p.spatial[(2 * f, ch)] * dz[(2 * f, ti)]
                            + p.spatial[(2 * f + 1, ch)] * dz[(2 * f + 1, ti)];
                        if dy == F::zero() {
                            continue;
                        }
                        for (j, &k) in kernel.iter().enumerate() {
                            let src = ti + j;
                            if src >= off && src - off < t {
                                dst[src - off] += dy * k;
                            }
                        }
                    }
                }
            }
            Some(normalize_backward(&cache.norm, &dnorm))
        }
        _ => panic!("extractor cache does not match architecture"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_length_is_odd() {
        assert_eq!(cnn_kernel_len(128.0), 65);
        assert_eq!(cnn_kernel_len(100.0), 51);
        assert_eq!(cnn_kernel_len(31.0), 17);
        assert_eq!(cnn_kernel_len(32.0), 17);
    }

    #[test]
    fn band_stage_isolates_a_pure_tone() {
        // 10 Hz lands exactly on bin 20 at fs = 128, T = 256.
        let fs = 128.0;
        let x = Mat::<f64>::from_fn(1, 256, |_, i| {
            (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin()
        });
        let (powers, _) = band_powers_cached(x.row(0), fs, &BANDS);
        let alpha = powers[2];
        for (b, &p) in powers.iter().enumerate() {
            if b != 2 {
                assert!(
                    alpha >= 100.0 * (p + LOG_POWER_EPS),
                    "band {b} power {p} too close to alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn zero_input_and_zero_weights_forward_bias() {
        let c = 3;
        let in_dim = c * BANDS.len();
        let bias: Vec<f64> = (0..MLP_HIDDEN).map(|i| i as f64 * 0.01 - 0.2).collect();
        // w2 picks out hidden units one-to-one for the first MLP_FEATURES.
        let mut w2 = Mat::zeros(MLP_FEATURES, MLP_HIDDEN);
        for i in 0..MLP_FEATURES {
            w2[(i, i)] = 1.0;
        }
        let p = MlpParams {
            w1: Mat::zeros(MLP_HIDDEN, in_dim),
            b1: bias.clone(),
            w2,
            b2: vec![0.0; MLP_FEATURES],
        };
        let x = Mat::<f64>::zeros(c, 64);
        let (feat, _) = mlp_forward_raw(&p, &x, 64.0);
        for (i, &f) in feat.iter().enumerate() {
            let expect = if bias[i] > 0.0 { bias[i] } else { bias[i].exp() - 1.0 };
            assert!((f - expect).abs() < 1e-12, "unit {i}: {f} vs {expect}");
        }
    }

    #[test]
    fn feature_dims() {
        let shape = ArchShape {
            channels: 4,
            samples: 256,
            fs: 128.0,
            num_classes: 2,
        };
        assert_eq!(feature_dim(ArchKind::BandPowerMlp, &shape).unwrap(), 32);
        assert_eq!(feature_dim(ArchKind::CompactCnn, &shape).unwrap(), 64);
        let short = ArchShape { samples: 63, ..shape };
        assert!(feature_dim(ArchKind::CompactCnn, &short).is_err());
    }
}
