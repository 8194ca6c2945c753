//! Measures the per-component loss gradient dL/dp_i against each
//! component's true artifact share, for a pretrained proxy.

use taskdenoise_core::decomp::{decompose, DecompConfig, Method};
use taskdenoise_core::mat::Mat;
use taskdenoise_core::nnet::{self, ArchKind};
use taskdenoise_core::signal::{RngSeed, TrialSet};
use taskdenoise_core::synth::{gen_artifact, gen_dataset, mix_noise, NoiseKind, SynthConfig};
use taskdenoise_core::train::{self, TrainConfig};

fn main() {
    let arch = match std::env::var("ARCH").as_deref() {
        Ok("mlp") => ArchKind::BandPowerMlp,
        _ => ArchKind::CompactCnn,
    };
    let wd: f64 = std::env::var("WD").ok().and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let root = RngSeed::new(3);
    let synth = SynthConfig {
        channels: 4,
        samples: 128,
        fs: 32.0,
        background_amp: 1.0,
        trials_per_class: 40,
        ..SynthConfig::erd_default(root.derive(1))
    };
    let (_, raw) = gen_dataset::<f64>(&synth).unwrap();
    let mut noisy = TrialSet::empty(4, 128, 32.0, 2, "n").unwrap();
    let mut artifacts: Vec<Mat<f64>> = Vec::new();
    for i in 0..raw.len() {
        let nseed = root.derive(100 + i as u64);
        let art = gen_artifact::<f64>(NoiseKind::Eog, 4, 128, 32.0, nseed).unwrap();
        use rand::Rng;
        let snr = nseed.derive(7).rng().gen_range(-5.0..5.0);
        let (n, lambda) = mix_noise(raw.trial(i), &art, snr).unwrap();
        let mut scaled = art.data().clone();
        scaled.scale(lambda);
        artifacts.push(scaled);
        noisy.push(n, raw.label(i)).unwrap();
    }
    let mut cfg = TrainConfig::new(arch, DecompConfig::new(Method::Svd), root.derive(2));
    cfg.epochs_pretrain = 150;
    cfg.lr_proxy = 3e-3;
    cfg.weight_decay = wd;
    let (params, hist) = train::pretrain(&noisy, &cfg).unwrap();
    println!("pretrain CE end {:.4}", hist.steps.last().unwrap().loss);

    // dL/dp_i at the all-retained point (p = 1) and at p = 0.88.
    let mut pairs: Vec<(f64, f64)> = Vec::new(); // (eog_share, dL/dp)
    for i in 0..noisy.len() {
        let cs = decompose(noisy.trial(i), &cfg.decomposition, root.derive(500 + i as u64)).unwrap();
        let art = &artifacts[i];
        let art_sq = art.frobenius_dot(art);
        // Forward at p = 0.88 uniform.
        let p0 = 0.88;
        let (cmat, tmat) = cs.component(0).shape();
        let mut xhat = Mat::zeros(cmat, tmat);
        for comp in cs.components() {
            xhat.add_scaled(p0, comp);
        }
        let (feat, cache) = nnet::extractor_forward(&params, &xhat).unwrap();
        let logits = nnet::classifier_forward(&params, &feat);
        let dlogits = nnet::cross_entropy_backward(&logits, noisy.label(i));
        let dfeat = nnet::head_backward(&params.classifier, &feat, &dlogits, None);
        let dxhat = nnet::extractor::backward(&params.extractor, &cache, &dfeat, None, true).unwrap();
        for comp in cs.components() {
            let share = comp.frobenius_dot(art) / art_sq;
            let dp = dxhat.frobenius_dot(comp);
            pairs.push((share, dp));
        }
    }
    // Components with high EOG share vs low.
    let mut hi = Vec::new();
    let mut lo = Vec::new();
    for &(share, dp) in &pairs {
        if share > 0.5 {
            hi.push(dp);
        } else if share < 0.1 {
            lo.push(dp);
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "n_hi {} mean dL/dp {:+.3e} | n_lo {} mean dL/dp {:+.3e}",
        hi.len(),
        mean(&hi),
        lo.len(),
        mean(&lo)
    );
    let shares: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let dps: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    println!(
        "corr(eog_share, dL/dp) = {:?}",
        taskdenoise_core::metrics::pearson(&shares, &dps)
    );
}
