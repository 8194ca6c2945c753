//! End-to-end training: supervised pretraining of the proxy model, then
//! alternating collaborative optimization of selector and proxy, plus
//! denoising inference.
//!
//! One collaborative step processes a batch twice. Step A scores every
//! component, reconstructs the probability-weighted signal, and updates only
//! the selector head; the gradient reaches it through the proxy's forward
//! maps (which stay frozen) via `d loss / d p_i = <d loss / d Xhat, C_i>`.
//! Step B recomputes the forward pass with the new selector and updates the
//! extractor and classifier head, with the selector frozen. Components are
//! decomposed once per trial up front since the decomposition depends only
//! on the input signal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{self, ComponentSet, DecompConfig};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nnet::{
    self, clip_gradients, cosine_lr, cross_entropy, cross_entropy_backward, extractor_forward,
    head_backward, init_params, init_selector_head, max_norm_project, AdamConfig, ArchKind,
    ArchShape, BlockMask, ExtractorCache, Gradients, ModelParams, OptimizerState,
};
use crate::num::Real;
use crate::signal::{RngSeed, Trial, TrialSet};

// Seed-derivation tags keeping every random stream independent.
const TAG_INIT: u64 = 1;
const TAG_SELECTOR: u64 = 2;
const TAG_PRETRAIN_SHUFFLE: u64 = 1_000;
const TAG_COLLAB_SHUFFLE: u64 = 2_000;
const TAG_DECOMP: u64 = 3_000_000;

/// Hyperparameters for the full pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchKind,
    pub epochs_pretrain: usize,
    pub epochs_collab: usize,
    pub batch_size: usize,
    pub lr_selector: f64,
    pub lr_proxy: f64,
    pub clip_threshold: f64,
    pub cosine_alpha: f64,
    pub weight_decay: f64,
    pub max_norm: f64,
    pub decomposition: DecompConfig,
    pub seed: RngSeed,
    /// Diagnostic mode for the descent property: whole-set batches, no
    /// shuffling, constant learning rates, and plain gradient steps (no
    /// momentum, weight decay, or max-norm), matching the assumptions of the
    /// block-descent analysis.
    pub full_batch_descent_mode: bool,
}

impl TrainConfig {
    pub fn new(arch: ArchKind, decomposition: DecompConfig, seed: RngSeed) -> Self {
        TrainConfig {
            arch,
            epochs_pretrain: 50,
            epochs_collab: 50,
            batch_size: 32,
            lr_selector: 1e-3,
            lr_proxy: 1e-3,
            clip_threshold: 1.0,
            cosine_alpha: 0.9,
            weight_decay: 1e-4,
            max_norm: nnet::DEFAULT_MAX_NORM,
            decomposition,
            seed,
            full_batch_descent_mode: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if !(self.lr_selector > 0.0 && self.lr_proxy > 0.0) {
            return Err(Error::validation("learning rates must be positive"));
        }
        if !(self.clip_threshold > 0.0) {
            return Err(Error::validation("clip_threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.cosine_alpha) {
            return Err(Error::validation("cosine_alpha must lie in [0, 1]"));
        }
        Ok(())
    }

    fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: if self.full_batch_descent_mode {
                0.0
            } else {
                self.weight_decay
            },
            ..AdamConfig::default()
        }
    }
}

/// Training phase of a history record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Collab,
}

/// One optimizer step's bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: Stage,
    pub epoch: usize,
    pub step: usize,
    /// Batch-mean loss at the start of the step.
    pub loss: f64,
    pub lr_selector: f64,
    pub lr_proxy: f64,
    /// Pre-clip global gradient norms; zero for the block a stage freezes.
    pub grad_norm_selector: f64,
    pub grad_norm_proxy: f64,
}

/// Chronological step records for one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
}

impl TrainHistory {
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "stage,epoch,step,loss,lr_selector,lr_proxy,grad_norm_selector,grad_norm_proxy"
        )?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                match s.stage {
                    Stage::Pretrain => "pretrain",
                    Stage::Collab => "collab",
                },
                s.epoch,
                s.step,
                s.loss,
                s.lr_selector,
                s.lr_proxy,
                s.grad_norm_selector,
                s.grad_norm_proxy
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of [`denoise`]: retention probabilities, component energies, and
/// the probability-weighted reconstruction.
#[derive(Debug, Clone)]
pub struct SelectionResult<F> {
    pub probabilities: Vec<F>,
    pub energies: Vec<F>,
    pub reconstructed: Trial<F>,
}

/// Extractor input prepared once per fixed signal.
#[derive(Debug, Clone)]
enum Prepared<F> {
    /// Cached log band powers (band-power MLP; the band stage has no
    /// parameters, so these stay valid across updates).
    Features(Vec<F>),
    /// No caching possible; run the full extractor on the stored matrix.
    Direct,
}

/// A trial with its precomputed decomposition and prepared extractor inputs.
#[derive(Debug, Clone)]
pub struct TrialComponents<F> {
    pub components: ComponentSet<F>,
    pub label: usize,
    prepared: Vec<Prepared<F>>,
}

fn prepare<F: Real>(params: &ModelParams<F>, x: &Mat<F>) -> Prepared<F> {
    match params.arch() {
        ArchKind::BandPowerMlp => Prepared::Features(nnet::band_log_features(x, params.shape.fs)),
        ArchKind::CompactCnn => Prepared::Direct,
    }
}

fn forward_prepared<F: Real>(
    params: &ModelParams<F>,
    prepared: &Prepared<F>,
    x: &Mat<F>,
) -> Result<(Vec<F>, ExtractorCache<F>)> {
    match (prepared, &params.extractor) {
        (Prepared::Features(logf), nnet::ExtractorParams::BandPowerMlp(p)) => {
            Ok(nnet::extractor::mlp_forward_features(p, logf))
        }
        (Prepared::Direct, _) => extractor_forward(params, x),
        _ => Err(Error::validation(
            "prepared input does not match the architecture",
        )),
    }
}

/// Decomposes every trial of a set once, deriving one seed per trial.
///
/// `seed_offset` keeps the per-trial decomposition seeds of different splits
/// disjoint while staying reproducible.
pub fn precompute_components<F: Real>(
    params: &ModelParams<F>,
    data: &TrialSet<F>,
    dcfg: &DecompConfig,
    seed: RngSeed,
    seed_offset: u64,
) -> Result<Vec<TrialComponents<F>>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let trial_seed = seed.derive(TAG_DECOMP + seed_offset + i as u64);
            let cs = decomp::decompose(data.trial(i), dcfg, trial_seed)?;
            let prepared = cs
                .components()
                .iter()
                .map(|c| prepare(params, c))
                .collect();
            Ok(TrialComponents {
                components: cs,
                label: data.label(i),
                prepared,
            })
        })
        .collect()
}

struct TrialForward<F> {
    comp_feats: Vec<Vec<F>>,
    comp_caches: Vec<ExtractorCache<F>>,
    probs: Vec<F>,
    xhat_cache: ExtractorCache<F>,
    xhat_feat: Vec<F>,
    logits: Vec<F>,
    loss: F,
}

fn collab_forward<F: Real>(
    params: &ModelParams<F>,
    item: &TrialComponents<F>,
) -> Result<TrialForward<F>> {
    let n = item.components.n();
    let mut comp_feats = Vec::with_capacity(n);
    let mut comp_caches = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    let (c, t) = item.components.component(0).shape();
    let mut xhat = Mat::zeros(c, t);
    for i in 0..n {
        let comp = item.components.component(i);
        let (feat, cache) = forward_prepared(params, &item.prepared[i], comp)?;
        let p = nnet::selector_forward(params, &feat);
        xhat.add_scaled(p, comp);
        comp_feats.push(feat);
        comp_caches.push(cache);
        probs.push(p);
    }
    let (xhat_feat, xhat_cache) = extractor_forward(params, &xhat)?;
    let logits = nnet::classifier_forward(params, &xhat_feat);
    let loss = cross_entropy(&logits, item.label)?;
    Ok(TrialForward {
        comp_feats,
        comp_caches,
        probs,
        xhat_cache,
        xhat_feat,
        logits,
        loss,
    })
}

/// Batch-mean collaborative loss (forward only).
pub fn collab_loss<F: Real>(
    params: &ModelParams<F>,
    items: &[&TrialComponents<F>],
) -> Result<f64> {
    let mut total = 0.0;
    for item in items {
        total += collab_forward(params, item)?.loss.to_f64_lossy();
    }
    Ok(total / items.len() as f64)
}

/// Result of one collaborative (A, B) step.
#[derive(Debug, Clone, Copy)]
pub struct CollabOutcome {
    /// Batch-mean loss before any update.
    pub loss_before: f64,
    /// Batch-mean loss after both updates, freshly evaluated.
    pub loss_after: f64,
    pub grad_norm_selector: f64,
    pub grad_norm_proxy: f64,
}

fn ensure_finite(loss: f64, stage: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(format!(
            "non-finite loss in collaborative {stage}"
        )))
    }
}

fn apply_update<F: Real>(
    params: &mut ModelParams<F>,
    grads: &Gradients<F>,
    opt: &mut OptimizerState<F>,
    mask: BlockMask,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    let mut param_tensors = nnet::masked_tensors_mut(params, mask);
    if cfg.full_batch_descent_mode {
        nnet::sgd_step(&mut param_tensors, &grad_tensors, lr)?;
    } else {
        opt.adamw_step(&mut param_tensors, &grad_tensors, lr)?;
        drop(param_tensors);
        max_norm_project(params, cfg.max_norm);
    }
    Ok(())
}

/// One collaborative optimization step over a batch: Step A updates the
/// selector head with the proxy frozen, Step B recomputes the forward with
/// the new selector and updates extractor plus classifier head.
#[allow(clippy::too_many_arguments)]
pub fn collab_step<F: Real>(
    params: &mut ModelParams<F>,
    opt_selector: &mut OptimizerState<F>,
    opt_proxy: &mut OptimizerState<F>,
    batch: &[&TrialComponents<F>],
    cfg: &TrainConfig,
    lr_selector: f64,
    lr_proxy: f64,
) -> Result<CollabOutcome> {
    if batch.is_empty() {
        return Err(Error::validation("empty collaborative batch"));
    }
    let inv_batch = F::one() / F::of(batch.len() as f64);

    // ---- Step A: update the selector head. ----
    let mut grads = Gradients::zeros(params, BlockMask::SELECTOR_ONLY);
    let mut loss_before = 0.0;
    for item in batch {
        let fw = collab_forward(params, item)?;
        loss_before += fw.loss.to_f64_lossy();
        let mut dlogits = cross_entropy_backward(&fw.logits, item.label);
        for d in &mut dlogits {
            *d *= inv_batch;
        }
        let dfeat_xhat = head_backward(&params.classifier, &fw.xhat_feat, &dlogits, None);
        let dxhat = nnet::extractor::backward(
            &params.extractor,
            &fw.xhat_cache,
            &dfeat_xhat,
            None,
            true,
        )
        .expect("input gradient of the reconstruction");
        for i in 0..item.components.n() {
            let dp = dxhat.frobenius_dot(item.components.component(i));
            let p = fw.probs[i];
            let dlogit_s = dp * p * (F::one() - p);
            head_backward(
                &params.selector,
                &fw.comp_feats[i],
                &[dlogit_s],
                grads.selector.as_mut(),
            );
        }
    }
    loss_before /= batch.len() as f64;
    ensure_finite(loss_before, "step A")?;
    let grad_norm_selector = clip_gradients(&mut grads, cfg.clip_threshold)
        .map_err(|_| Error::numerical("non-finite selector gradient in collaborative step A"))?
        .to_f64_lossy();
    apply_update(
        params,
        &grads,
        opt_selector,
        BlockMask::SELECTOR_ONLY,
        lr_selector,
        cfg,
    )?;

    // ---- Step B: update extractor and classifier with the new selector. ----
    let mut grads = Gradients::zeros(params, BlockMask::PROXY);
    let mut loss_mid = 0.0;
    for item in batch {
        let fw = collab_forward(params, item)?;
        loss_mid += fw.loss.to_f64_lossy();
        let mut dlogits = cross_entropy_backward(&fw.logits, item.label);
        for d in &mut dlogits {
            *d *= inv_batch;
        }
        let dfeat_xhat = head_backward(
            &params.classifier,
            &fw.xhat_feat,
            &dlogits,
            grads.classifier.as_mut(),
        );
        // Extractor gradients through the reconstruction path, plus the
        // input gradient that feeds the selector path below.
        let dxhat = nnet::extractor::backward(
            &params.extractor,
            &fw.xhat_cache,
            &dfeat_xhat,
            grads.extractor.as_mut(),
            true,
        )
        .expect("input gradient of the reconstruction");
        // The probabilities depend on the shared extractor as well: chain
        // the signal through the frozen selector head into q's parameters.
        for i in 0..item.components.n() {
            let dp = dxhat.frobenius_dot(item.components.component(i));
            let p = fw.probs[i];
            let dlogit_s = dp * p * (F::one() - p);
            let dfeat_i = head_backward(&params.selector, &fw.comp_feats[i], &[dlogit_s], None);
            nnet::extractor::backward(
                &params.extractor,
                &fw.comp_caches[i],
                &dfeat_i,
                grads.extractor.as_mut(),
                false,
            );
        }
    }
    loss_mid /= batch.len() as f64;
    ensure_finite(loss_mid, "step B")?;
    let grad_norm_proxy = clip_gradients(&mut grads, cfg.clip_threshold)
        .map_err(|_| Error::numerical("non-finite proxy gradient in collaborative step B"))?
        .to_f64_lossy();
    apply_update(params, &grads, opt_proxy, BlockMask::PROXY, lr_proxy, cfg)?;

    let mut loss_after = 0.0;
    for item in batch {
        loss_after += collab_forward(params, item)?.loss.to_f64_lossy();
    }
    loss_after /= batch.len() as f64;
    ensure_finite(loss_after, "step B (post-update evaluation)")?;

    Ok(CollabOutcome {
        loss_before,
        loss_after,
        grad_norm_selector,
        grad_norm_proxy,
    })
}

fn shuffled_order(n: usize, seed: RngSeed) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    order
}

/// Supervised pretraining of extractor + classifier on raw trials, followed
/// by retention-biased selector initialization.
pub fn pretrain<F: Real>(
    data: &TrialSet<F>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<F>, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::validation("cannot pretrain on an empty trial set"));
    }
    let shape = ArchShape {
        channels: data.channels(),
        samples: data.samples(),
        fs: data.fs(),
        num_classes: data.num_classes(),
    };
    let mut params = init_params::<F>(cfg.arch, &shape, cfg.seed.derive(TAG_INIT))?;
    let mut history = TrainHistory::default();

    let prepared: Vec<Prepared<F>> = data
        .trials()
        .iter()
        .map(|t| prepare(&params, t.data()))
        .collect();

    let mut opt = OptimizerState::new(
        cfg.adam_config(),
        &nnet::masked_tensors(&params, BlockMask::PROXY),
    );
    let n = data.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs_pretrain * steps_per_epoch;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs_pretrain {
        let order = shuffled_order(n, cfg.seed.derive(TAG_PRETRAIN_SHUFFLE + epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let lr = cosine_lr(step, total_steps, cfg.lr_proxy, cfg.cosine_alpha);
            let inv_batch = F::one() / F::of(batch.len() as f64);
            let mut grads = Gradients::zeros(&params, BlockMask::PROXY);
            let mut loss_sum = 0.0;
            for &idx in batch {
                let x = data.trial(idx).data();
                let (feat, cache) = forward_prepared(&params, &prepared[idx], x)?;
                let logits = nnet::classifier_forward(&params, &feat);
                loss_sum += cross_entropy(&logits, data.label(idx))?.to_f64_lossy();
                let mut dlogits = cross_entropy_backward(&logits, data.label(idx));
                for d in &mut dlogits {
                    *d *= inv_batch;
                }
                let dfeat = head_backward(
                    &params.classifier,
                    &feat,
                    &dlogits,
                    grads.classifier.as_mut(),
                );
                nnet::extractor::backward(
                    &params.extractor,
                    &cache,
                    &dfeat,
                    grads.extractor.as_mut(),
                    false,
                );
            }
            let loss = loss_sum / batch.len() as f64;
            if !loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite pretraining loss at step {step}"
                )));
            }
            let grad_norm = clip_gradients(&mut grads, cfg.clip_threshold)?.to_f64_lossy();
            let grad_tensors = grads.tensors();
            let mut param_tensors = nnet::masked_tensors_mut(&mut params, BlockMask::PROXY);
            opt.adamw_step(&mut param_tensors, &grad_tensors, lr)?;
            max_norm_project(&mut params, cfg.max_norm);
            history.steps.push(StepRecord {
                stage: Stage::Pretrain,
                epoch,
                step,
                loss,
                lr_selector: 0.0,
                lr_proxy: lr,
                grad_norm_selector: 0.0,
                grad_norm_proxy: grad_norm,
            });
            step += 1;
        }
    }
    init_selector_head(&mut params, cfg.seed.derive(TAG_SELECTOR));
    Ok((params, history))
}

/// Full pipeline: pretrain, decompose every trial once, run the
/// collaborative stage, and return the final parameters (or the
/// best-validation-loss checkpoint when a validation set is supplied).
pub fn train_with_validation<F: Real>(
    data: &TrialSet<F>,
    validation: Option<&TrialSet<F>>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<F>, TrainHistory)> {
    let (mut params, mut history) = pretrain(data, cfg)?;
    let items = precompute_components(&params, data, &cfg.decomposition, cfg.seed, 0)?;
    let val_items = match validation {
        Some(v) => Some(precompute_components(
            &params,
            v,
            &cfg.decomposition,
            cfg.seed,
            1_000_000,
        )?),
        None => None,
    };

    let mut opt_selector = OptimizerState::new(
        cfg.adam_config(),
        &nnet::masked_tensors(&params, BlockMask::SELECTOR_ONLY),
    );
    let mut opt_proxy = OptimizerState::new(
        cfg.adam_config(),
        &nnet::masked_tensors(&params, BlockMask::PROXY),
    );

    let n = items.len();
    let batch_size = if cfg.full_batch_descent_mode {
        n
    } else {
        cfg.batch_size
    };
    let steps_per_epoch = n.div_ceil(batch_size);
    let total_steps = cfg.epochs_collab * steps_per_epoch;
    let mut best: Option<(f64, ModelParams<F>)> = None;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs_collab {
        let order: Vec<usize> = if cfg.full_batch_descent_mode {
            (0..n).collect()
        } else {
            shuffled_order(n, cfg.seed.derive(TAG_COLLAB_SHUFFLE + epoch as u64))
        };
        for chunk in order.chunks(batch_size) {
            let (lr_s, lr_p) = if cfg.full_batch_descent_mode {
                (cfg.lr_selector, cfg.lr_proxy)
            } else {
                (
                    cosine_lr(step, total_steps, cfg.lr_selector, cfg.cosine_alpha),
                    cosine_lr(step, total_steps, cfg.lr_proxy, cfg.cosine_alpha),
                )
            };
            let batch: Vec<&TrialComponents<F>> = chunk.iter().map(|&i| &items[i]).collect();
            let outcome = collab_step(
                &mut params,
                &mut opt_selector,
                &mut opt_proxy,
                &batch,
                cfg,
                lr_s,
                lr_p,
            )?;
            history.steps.push(StepRecord {
                stage: Stage::Collab,
                epoch,
                step,
                loss: outcome.loss_before,
                lr_selector: lr_s,
                lr_proxy: lr_p,
                grad_norm_selector: outcome.grad_norm_selector,
                grad_norm_proxy: outcome.grad_norm_proxy,
            });
            step += 1;
        }
        if let Some(val) = &val_items {
            let refs: Vec<&TrialComponents<F>> = val.iter().collect();
            let val_loss = collab_loss(&params, &refs)?;
            if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
                best = Some((val_loss, params.clone()));
            }
        }
    }
    if let Some((_, best_params)) = best {
        params = best_params;
    }
    Ok((params, history))
}

/// [`train_with_validation`] without a validation split.
pub fn train<F: Real>(
    data: &TrialSet<F>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<F>, TrainHistory)> {
    train_with_validation(data, None, cfg)
}

/// Scores precomputed components and reconstructs the denoised trial.
pub fn denoise_components<F: Real>(
    params: &ModelParams<F>,
    cs: &ComponentSet<F>,
) -> Result<SelectionResult<F>> {
    let mut probabilities = Vec::with_capacity(cs.n());
    for comp in cs.components() {
        let (feat, _) = extractor_forward(params, comp)?;
        probabilities.push(nnet::selector_forward(params, &feat));
    }
    let reconstructed = decomp::reconstruct(cs, &probabilities)?;
    Ok(SelectionResult {
        probabilities,
        energies: cs.energies().to_vec(),
        reconstructed,
    })
}

/// Denoising inference on one trial: decompose, score each component with
/// the selector, and rebuild the probability-weighted signal.
pub fn denoise<F: Real>(
    params: &ModelParams<F>,
    x: &Trial<F>,
    dcfg: &DecompConfig,
    seed: RngSeed,
) -> Result<SelectionResult<F>> {
    let cs = decomp::decompose(x, dcfg, seed)?;
    denoise_components(params, &cs)
}

/// Proxy-classification prediction for one trial.
pub fn predict<F: Real>(params: &ModelParams<F>, x: &Trial<F>) -> Result<usize> {
    let (feat, _) = extractor_forward(params, x.data())?;
    let logits = nnet::classifier_forward(params, &feat);
    Ok(logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0))
}

/// Predictions for every trial of a set.
pub fn predict_set<F: Real>(params: &ModelParams<F>, data: &TrialSet<F>) -> Result<Vec<usize>> {
    data.trials().iter().map(|t| predict(params, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::Method;
    use crate::synth::{gen_dataset, SynthConfig};

    fn tiny_erd(seed: u64, trials_per_class: usize) -> TrialSet<f64> {
        let cfg = SynthConfig {
            channels: 4,
            samples: 256,
            trials_per_class,
            ..SynthConfig::erd_default(RngSeed::new(seed))
        };
        gen_dataset::<f64>(&cfg).unwrap().1
    }

    fn base_cfg(seed: u64) -> TrainConfig {
        TrainConfig::new(
            ArchKind::BandPowerMlp,
            DecompConfig::new(Method::Svd),
            RngSeed::new(seed),
        )
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = tiny_erd(1, 4);
        let mut cfg = base_cfg(5);
        cfg.epochs_pretrain = 0;
        let (params, history) = pretrain(&data, &cfg).unwrap();
        assert!(history.steps.is_empty());

        let shape = ArchShape {
            channels: data.channels(),
            samples: data.samples(),
            fs: data.fs(),
            num_classes: data.num_classes(),
        };
        let mut expect = init_params::<f64>(cfg.arch, &shape, cfg.seed.derive(TAG_INIT)).unwrap();
        init_selector_head(&mut expect, cfg.seed.derive(TAG_SELECTOR));
        assert_eq!(params, expect);
    }

    #[test]
    fn pretraining_single_class_reaches_near_zero_loss() {
        // Every label 0 with K = 2: trivially separable, the bias alone
        // solves it.
        let source = tiny_erd(2, 10);
        let mut data = TrialSet::empty(
            source.channels(),
            source.samples(),
            source.fs(),
            2,
            "single",
        )
        .unwrap();
        for trial in source.trials() {
            data.push(trial.clone(), 0).unwrap();
        }
        let mut cfg = base_cfg(6);
        cfg.epochs_pretrain = 50;
        let (_, history) = pretrain(&data, &cfg).unwrap();
        let final_loss = history.steps.last().unwrap().loss;
        assert!(
            final_loss < 0.01,
            "final pretraining loss {final_loss} too high"
        );
    }

    #[test]
    fn pretraining_two_class_learns_the_task() {
        let data = tiny_erd(2, 10);
        let mut cfg = base_cfg(6);
        cfg.epochs_pretrain = 120;
        let (params, history) = pretrain(&data, &cfg).unwrap();
        let first_loss = history.steps.first().unwrap().loss;
        let final_loss = history.steps.last().unwrap().loss;
        assert!(
            final_loss < 0.5 * first_loss,
            "loss barely moved: {first_loss} -> {final_loss}"
        );
        let preds = predict_set(&params, &data).unwrap();
        let correct = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, t)| p == t)
            .count();
        assert!(
            correct as f64 >= 0.9 * data.len() as f64,
            "training accuracy {correct}/{}",
            data.len()
        );
    }

    #[test]
    fn pretrain_is_bitwise_deterministic() {
        let data = tiny_erd(3, 6);
        let cfg = {
            let mut c = base_cfg(7);
            c.epochs_pretrain = 5;
            c
        };
        let (p1, h1) = pretrain(&data, &cfg).unwrap();
        let (p2, h2) = pretrain(&data, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn collab_step_freezing_contract() {
        let data = tiny_erd(4, 6);
        let mut cfg = base_cfg(8);
        cfg.epochs_pretrain = 5;
        let (mut params, _) = pretrain(&data, &cfg).unwrap();
        let items = precompute_components(&params, &data, &cfg.decomposition, cfg.seed, 0).unwrap();
        let batch: Vec<&TrialComponents<f64>> = items.iter().collect();

        let mut opt_s = OptimizerState::new(
            cfg.adam_config(),
            &nnet::masked_tensors(&params, BlockMask::SELECTOR_ONLY),
        );
        let mut opt_p = OptimizerState::new(
            cfg.adam_config(),
            &nnet::masked_tensors(&params, BlockMask::PROXY),
        );

        // Zero weight decay isolates the pure gradient updates for the
        // freezing check below.
        cfg.weight_decay = 0.0;
        let before = params.clone();
        let outcome = collab_step(
            &mut params,
            &mut opt_s,
            &mut opt_p,
            &batch,
            &cfg,
            1e-3,
            1e-30,
        )
        .unwrap();
        assert!(outcome.loss_before.is_finite());
        // Step A must move the selector; with a vanishing proxy lr, step B's
        // update is numerically zero, so extractor and classifier stay put.
        assert_ne!(params.selector, before.selector);
        let moved: f64 = params
            .extractor
            .tensors()
            .iter()
            .zip(before.extractor.tensors())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        assert!(moved < 1e-12, "extractor drifted {moved} under ~zero lr");
    }

    #[test]
    fn full_batch_descent_mode_is_monotone() {
        let data = tiny_erd(5, 8);
        let mut cfg = base_cfg(9);
        cfg.epochs_pretrain = 20;
        cfg.epochs_collab = 0;
        cfg.lr_selector = 1e-4;
        cfg.lr_proxy = 1e-4;
        cfg.full_batch_descent_mode = true;
        let (mut params, _) = pretrain(&data, &cfg).unwrap();
        let items = precompute_components(&params, &data, &cfg.decomposition, cfg.seed, 0).unwrap();
        let batch: Vec<&TrialComponents<f64>> = items.iter().collect();
        let mut opt_s = OptimizerState::new(
            cfg.adam_config(),
            &nnet::masked_tensors(&params, BlockMask::SELECTOR_ONLY),
        );
        let mut opt_p = OptimizerState::new(
            cfg.adam_config(),
            &nnet::masked_tensors(&params, BlockMask::PROXY),
        );
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            let out = collab_step(
                &mut params,
                &mut opt_s,
                &mut opt_p,
                &batch,
                &cfg,
                cfg.lr_selector,
                cfg.lr_proxy,
            )
            .unwrap();
            assert!(
                out.loss_after <= out.loss_before + 1e-8,
                "within-step increase: {} -> {}",
                out.loss_before,
                out.loss_after
            );
            assert!(
                out.loss_before <= last + 1e-8,
                "across-step increase: {last} -> {}",
                out.loss_before
            );
            last = out.loss_before;
        }
    }

    #[test]
    fn collab_training_is_deterministic() {
        let data = tiny_erd(6, 6);
        let mut cfg = base_cfg(10);
        cfg.epochs_pretrain = 3;
        cfg.epochs_collab = 3;
        let (p1, h1) = train(&data, &cfg).unwrap();
        let (p2, h2) = train(&data, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn zero_collab_epochs_keeps_retention_bias() {
        let data = tiny_erd(7, 5);
        let mut cfg = base_cfg(11);
        cfg.epochs_pretrain = 5;
        cfg.epochs_collab = 0;
        let (params, _) = train(&data, &cfg).unwrap();
        let result = denoise(
            &params,
            data.trial(0),
            &cfg.decomposition,
            RngSeed::new(99),
        )
        .unwrap();
        for &p in &result.probabilities {
            assert!((p - 0.88).abs() < 0.05, "retention probability {p}");
        }
    }

    #[test]
    fn denoise_extremes_reproduce_or_zero_the_signal() {
        let data = tiny_erd(8, 5);
        let mut cfg = base_cfg(12);
        cfg.epochs_pretrain = 2;
        cfg.epochs_collab = 0;
        let (mut params, _) = train(&data, &cfg).unwrap();
        let x = data.trial(0);

        // Saturate the selector toward 1: reconstruction equals the input.
        params.selector.bias[0] = 40.0;
        for v in params.selector.weight.as_mut_slice() {
            *v = 0.0;
        }
        let all_pass = denoise(&params, x, &cfg.decomposition, RngSeed::new(1)).unwrap();
        let mut diff = all_pass.reconstructed.data().clone();
        diff.add_scaled(-1.0, x.data());
        let rel = diff.frobenius_norm() / x.data().frobenius_norm();
        assert!(rel < 1e-9, "all-pass reconstruction off by {rel}");

        // Saturate toward 0: reconstruction vanishes.
        params.selector.bias[0] = -40.0;
        let none_pass = denoise(&params, x, &cfg.decomposition, RngSeed::new(1)).unwrap();
        let norm = none_pass.reconstructed.data().frobenius_norm() / x.data().frobenius_norm();
        assert!(norm < 1e-9, "all-zero reconstruction has norm {norm}");
    }

    #[test]
    fn denoise_equals_reconstruct_with_probabilities() {
        let data = tiny_erd(9, 4);
        let mut cfg = base_cfg(13);
        cfg.epochs_pretrain = 3;
        cfg.epochs_collab = 2;
        let (params, _) = train(&data, &cfg).unwrap();
        let cs = decomp::decompose(data.trial(1), &cfg.decomposition, RngSeed::new(5)).unwrap();
        let result = denoise_components(&params, &cs).unwrap();
        let direct = decomp::reconstruct(&cs, &result.probabilities).unwrap();
        assert_eq!(result.reconstructed, direct);
        assert!(result
            .probabilities
            .iter()
            .all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn history_csv_has_one_row_per_step() {
        let data = tiny_erd(10, 5);
        let mut cfg = base_cfg(14);
        cfg.epochs_pretrain = 2;
        cfg.epochs_collab = 2;
        let (_, history) = train(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        history.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim().lines().count(), history.steps.len() + 1);
        assert!(text.starts_with("stage,epoch,step,loss"));
    }
}
