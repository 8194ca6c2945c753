//! Experiment configuration: dataset source, contamination, pipeline and
//! evaluator settings, cross-validation layout, and seeds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use taskdenoise_core::decomp::{DecompConfig, IcaNonlinearity, Method};
use taskdenoise_core::error::{Error, Result};
use taskdenoise_core::nnet::ArchKind;
use taskdenoise_core::signal::RngSeed;
use taskdenoise_core::synth::{NoiseSpec, SynthConfig};
use taskdenoise_core::train::TrainConfig;

/// Where the trials come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// Synthetic data with ground truth; the seed field inside is replaced
    /// per run seed.
    Synth(SynthConfig),
    /// A trial-set file (no clean ground truth available).
    File(PathBuf),
}

/// Pipeline hyperparameters; the decomposition method and all seeds are
/// injected per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epochs_pretrain: usize,
    pub epochs_collab: usize,
    pub batch_size: usize,
    pub lr_selector: f64,
    pub lr_proxy: f64,
    pub clip_threshold: f64,
    pub cosine_alpha: f64,
    pub weight_decay: f64,
    pub max_norm: f64,
    pub ica_max_iter: usize,
    pub ica_tol: f64,
    pub ica_nonlinearity: IcaNonlinearity,
    pub center: bool,
}

impl PipelineConfig {
    /// Paper-style settings for oscillatory (SSVEP-like) tasks.
    pub fn ssvep_like() -> Self {
        PipelineConfig {
            epochs_pretrain: 500,
            epochs_collab: 500,
            ..PipelineConfig::erd_like()
        }
    }

    /// Paper-style settings for motor (ERD-like) tasks.
    pub fn erd_like() -> Self {
        PipelineConfig {
            epochs_pretrain: 50,
            epochs_collab: 50,
            batch_size: 32,
            lr_selector: 1e-3,
            lr_proxy: 1e-3,
            clip_threshold: 1.0,
            cosine_alpha: 0.9,
            weight_decay: 1e-4,
            max_norm: 2.0,
            ica_max_iter: 200,
            ica_tol: 1e-4,
            ica_nonlinearity: IcaNonlinearity::Tanh,
            center: true,
        }
    }

    pub fn decomposition(&self, method: Method) -> DecompConfig {
        DecompConfig {
            method,
            ica_max_iter: self.ica_max_iter,
            ica_tol: self.ica_tol,
            ica_nonlinearity: self.ica_nonlinearity,
            center: self.center,
        }
    }

    pub fn train_config(&self, arch: ArchKind, method: Method, seed: RngSeed) -> TrainConfig {
        TrainConfig {
            arch,
            epochs_pretrain: self.epochs_pretrain,
            epochs_collab: self.epochs_collab,
            batch_size: self.batch_size,
            lr_selector: self.lr_selector,
            lr_proxy: self.lr_proxy,
            clip_threshold: self.clip_threshold,
            cosine_alpha: self.cosine_alpha,
            weight_decay: self.weight_decay,
            max_norm: self.max_norm,
            decomposition: self.decomposition(method),
            seed,
            full_batch_descent_mode: false,
        }
    }
}

/// Fresh per-condition evaluator classifier settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            epochs: 300,
            lr: 3e-3,
            weight_decay: 0.0,
        }
    }
}

/// Component-probe settings (probe classifiers are band-power MLPs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub enabled: bool,
    pub epochs: usize,
    pub lr: f64,
    /// Bins with fewer components than this are skipped.
    pub min_bin_size: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            enabled: false,
            epochs: 100,
            lr: 3e-3,
            min_bin_size: 10,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Artifact contamination applied to the raw set; `None` keeps only the
    /// inherent background.
    pub noise: Option<NoiseSpec>,
    pub methods: Vec<Method>,
    pub arch: ArchKind,
    pub pipeline: PipelineConfig,
    pub evaluator: EvaluatorConfig,
    pub probe: ProbeConfig,
    pub folds: usize,
    /// Train : validation : test proportions, normalized internally.
    pub split_ratio: [f64; 3],
    pub seeds: Vec<u64>,
    /// Abort the whole run when any fold fails.
    pub strict: bool,
}

impl ExperimentConfig {
    /// A paper-defaults template around a synthetic dataset.
    pub fn new_synth(synth: SynthConfig, pipeline: PipelineConfig) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synth(synth),
            noise: None,
            methods: vec![Method::Ica],
            arch: ArchKind::BandPowerMlp,
            pipeline,
            evaluator: EvaluatorConfig::default(),
            probe: ProbeConfig::default(),
            folds: 5,
            split_ratio: [6.0, 2.0, 2.0],
            seeds: (0..10).collect(),
            strict: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::validation("at least one decomposition method"));
        }
        if self.folds < 2 {
            return Err(Error::validation("folds must be >= 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("at least one seed"));
        }
        if self.split_ratio.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::validation("split ratio parts must be positive"));
        }
        if let Some(noise) = &self.noise {
            noise.snr_db.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding; ties every report to the
    /// exact configuration that produced it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&json);
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(format!("config parse: {e}")))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use taskdenoise_core::signal::RngSeed;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::new_synth(
            SynthConfig::erd_default(RngSeed::new(0)),
            PipelineConfig::erd_like(),
        )
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = sample();
        let json = cfg.to_json_pretty();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let cfg = sample();
        assert_eq!(cfg.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.folds = 4;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = sample();
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.folds = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.split_ratio = [6.0, 0.0, 2.0];
        assert!(cfg.validate().is_err());
        assert!(sample().validate().is_ok());
    }
}
