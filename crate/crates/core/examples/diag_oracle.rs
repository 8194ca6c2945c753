//! Upper-bound check: evaluator accuracy trained on noisy vs on raw
//! (= perfect artifact removal), same protocol.

use taskdenoise_core::decomp::{DecompConfig, Method};
use taskdenoise_core::metrics;
use taskdenoise_core::nnet::ArchKind;
use taskdenoise_core::signal::{RngSeed, TrialSet};
use taskdenoise_core::synth::{gen_artifact, gen_dataset, mix_noise, NoiseKind, SynthConfig};
use taskdenoise_core::train::{self, TrainConfig};

fn main() {
    let bg: f64 = std::env::var("BG").ok().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let tpc: usize = std::env::var("TPC").ok().and_then(|s| s.parse().ok()).unwrap_or(40);
    let evep: usize = std::env::var("EVEP").ok().and_then(|s| s.parse().ok()).unwrap_or(300);
    let arch = match std::env::var("ARCH").as_deref() {
        Ok("cnn") => ArchKind::CompactCnn,
        _ => ArchKind::BandPowerMlp,
    };
    let samples: usize = std::env::var("T").ok().and_then(|s| s.parse().ok()).unwrap_or(256);
    let fs: f64 = std::env::var("FS").ok().and_then(|s| s.parse().ok()).unwrap_or(128.0);
    let channels: usize = std::env::var("C").ok().and_then(|s| s.parse().ok()).unwrap_or(8);
    let mut gains = Vec::new();
    let mut noisy_accs = Vec::new();
    for seed in 0..6u64 {
        let root = RngSeed::new(seed);
        let synth = SynthConfig {
            samples,
            fs,
            channels,
            background_amp: bg,
            trials_per_class: tpc,
            ..SynthConfig::erd_default(root.derive(1))
        };
        let (_, raw) = gen_dataset::<f64>(&synth).unwrap();
        let mut noisy = TrialSet::empty(raw.channels(), raw.samples(), raw.fs(), 2, "n").unwrap();
        for i in 0..raw.len() {
            let nseed = root.derive(100 + i as u64);
            let art = gen_artifact::<f64>(NoiseKind::Eog, raw.channels(), raw.samples(), raw.fs(), nseed).unwrap();
            use rand::Rng;
            let snr = nseed.derive(7).rng().gen_range(-5.0..5.0);
            let (n, _) = mix_noise(raw.trial(i), &art, snr).unwrap();
            noisy.push(n, raw.label(i)).unwrap();
        }
        let per_class = tpc;
        let (mut tr, mut te) = (Vec::new(), Vec::new());
        for class in 0..2 {
            for j in 0..per_class {
                let idx = class * per_class + j;
                if j < per_class * 6 / 10 { tr.push(idx); } else if j >= per_class * 8 / 10 { te.push(idx); }
            }
        }
        let mut ecfg = TrainConfig::new(arch, DecompConfig::new(Method::Svd), root.derive(3));
        ecfg.epochs_pretrain = evep;
        ecfg.lr_proxy = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
        ecfg.weight_decay = std::env::var("WD").ok().and_then(|s| s.parse().ok()).unwrap_or(0.0);
        let (eval_noisy, _) = train::pretrain(&noisy.subset(&tr).unwrap(), &ecfg).unwrap();
        let (eval_raw, _) = train::pretrain(&raw.subset(&tr).unwrap(), &ecfg).unwrap();
        let acc = |p: &taskdenoise_core::ModelParams64, set: &TrialSet<f64>| {
            let sub = set.subset(&te).unwrap();
            let preds = train::predict_set(p, &sub).unwrap();
            metrics::class_report(&preds, sub.labels(), 2).unwrap().accuracy
        };
        let a_noisy = acc(&eval_noisy, &noisy);
        let a_raw = acc(&eval_raw, &raw);
        // Also: train on raw, test on raw == oracle-denoised everywhere.
        println!("seed {seed}: noisy {a_noisy:.3} oracle-clean {a_raw:.3} gain {:+.3}", a_raw - a_noisy);
        gains.push(a_raw - a_noisy);
        noisy_accs.push(a_noisy);
    }
    println!(
        "mean noisy acc {:.3}, mean oracle gain {:+.4}",
        noisy_accs.iter().sum::<f64>() / noisy_accs.len() as f64,
        gains.iter().sum::<f64>() / gains.len() as f64
    );
}
