//! End-to-end sanity run: ERD + EOG denoising, accuracy and SNR direction.

use taskdenoise_core::decomp::{DecompConfig, Method};
use taskdenoise_core::metrics;
use taskdenoise_core::nnet::ArchKind;
use taskdenoise_core::signal::{RngSeed, TrialSet};
use taskdenoise_core::synth::{gen_artifact, gen_dataset, mix_noise, NoiseKind, SynthConfig};
use taskdenoise_core::train::{self, TrainConfig};

fn main() {
    let t0 = std::time::Instant::now();
    let method = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "ica".into())
        .parse::<Method>()
        .unwrap();
    let bg: f64 = std::env::var("BG").ok().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let arch = match std::env::var("ARCH").as_deref() {
        Ok("cnn") => ArchKind::CompactCnn,
        _ => ArchKind::BandPowerMlp,
    };
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let fs: f64 = std::env::var("FS").ok().and_then(|s| s.parse().ok()).unwrap_or(128.0);
    let t_len: usize = std::env::var("T").ok().and_then(|s| s.parse().ok()).unwrap_or(256);
    let c_ch: usize = std::env::var("C").ok().and_then(|s| s.parse().ok()).unwrap_or(8);
    let prep: usize = std::env::var("PREP").ok().and_then(|s| s.parse().ok()).unwrap_or(50);
    let evep: usize = std::env::var("EVEP").ok().and_then(|s| s.parse().ok()).unwrap_or(60);
    let collab: usize = std::env::var("COLLAB").ok().and_then(|s| s.parse().ok()).unwrap_or(150);
    let mut acc_gains = Vec::new();
    let mut snr_gains = Vec::new();
    for seed in 0..6u64 {
        let root = RngSeed::new(seed);
        let tpc: usize = std::env::var("TPC").ok().and_then(|s| s.parse().ok()).unwrap_or(40);
        let synth = SynthConfig {
            channels: c_ch,
            samples: t_len,
            fs,
            background_amp: bg,
            trials_per_class: tpc,
            ..SynthConfig::erd_default(root.derive(1))
        };
        let (clean, raw) = gen_dataset::<f64>(&synth).unwrap();

        // Contaminate every trial with EOG at uniform [-5, 5] dB.
        let mut noisy = TrialSet::empty(
            raw.channels(),
            raw.samples(),
            raw.fs(),
            raw.num_classes(),
            raw.subject_id(),
        )
        .unwrap();
        let mut snrs = Vec::new();
        let mut artifacts = Vec::new();
        for i in 0..raw.len() {
            let nseed = root.derive(100 + i as u64);
            let art =
                gen_artifact::<f64>(NoiseKind::Eog, raw.channels(), raw.samples(), raw.fs(), nseed)
                    .unwrap();
            use rand::Rng;
            let snr = nseed.derive(7).rng().gen_range(-5.0..5.0);
            snrs.push(snr);
            let (n, lambda) = mix_noise(raw.trial(i), &art, snr).unwrap();
            let mut scaled = art.data().clone();
            scaled.scale(lambda);
            artifacts.push(scaled);
            noisy.push(n, raw.label(i)).unwrap();
        }

        // Plain 6:2:2 split, stratified by construction (class-major order,
        // take within-class prefixes).
        let n = noisy.len();
        let _ = n;
        let per_class = tpc;
        let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
        for class in 0..2 {
            for j in 0..per_class {
                let idx = class * per_class + j;
                if j < per_class * 6 / 10 {
                    tr.push(idx);
                } else if j < per_class * 8 / 10 {
                    va.push(idx);
                } else {
                    te.push(idx);
                }
            }
        }
        let train_set = noisy.subset(&tr).unwrap();
        let val_set = noisy.subset(&va).unwrap();

        let mut tcfg = TrainConfig::new(arch, DecompConfig::new(method), root.derive(2));
        tcfg.decomposition.ica_max_iter = 500;
        tcfg.epochs_pretrain = prep;
        tcfg.epochs_collab = collab;
        tcfg.lr_proxy = std::env::var("LRP").ok().and_then(|s| s.parse().ok()).unwrap_or(lr);
        tcfg.lr_selector = std::env::var("LRS").ok().and_then(|s| s.parse().ok()).unwrap_or(lr);
        if let Some(wd) = std::env::var("WD").ok().and_then(|s| s.parse().ok()) {
            tcfg.weight_decay = wd;
        }
        let (params, hist) = train::train_with_validation(&train_set, Some(&val_set), &tcfg).unwrap();
        let pre_last = hist.steps.iter().filter(|s| matches!(s.stage, taskdenoise_core::train::Stage::Pretrain)).last().map(|s| s.loss).unwrap_or(f64::NAN);
        let collab_steps: Vec<f64> = hist.steps.iter().filter(|s| matches!(s.stage, taskdenoise_core::train::Stage::Collab)).map(|s| s.loss).collect();
        let sel_norms: Vec<f64> = hist.steps.iter().filter(|s| matches!(s.stage, taskdenoise_core::train::Stage::Collab)).map(|s| s.grad_norm_selector).collect();
        println!("  pretrain final CE {pre_last:.4}; collab CE {:.4} -> {:.4}; sel grad norm median {:.2e}",
            collab_steps.first().unwrap_or(&f64::NAN), collab_steps.last().unwrap_or(&f64::NAN),
            { let mut s = sel_norms.clone(); s.sort_by(f64::total_cmp); s[s.len()/2] });

        // Denoise everything.
        let mut denoised = TrialSet::empty(
            noisy.channels(),
            noisy.samples(),
            noisy.fs(),
            noisy.num_classes(),
            "denoised",
        )
        .unwrap();
        let mut probs_sample = Vec::new();
        let mut eog_kept = Vec::new();
        let mut sig_kept = Vec::new();
        for i in 0..noisy.len() {
            let cs = taskdenoise_core::decomp::decompose(
                noisy.trial(i), &tcfg.decomposition, root.derive(500 + i as u64)).unwrap();
            let r = train::denoise_components(&params, &cs).unwrap();
            if i < 3 {
                probs_sample.push(r.probabilities.clone());
            }
            // Retention shares: projection of each component onto the true
            // injected artifact resp. the raw signal.
            let art = &artifacts[i];
            let art_sq = art.frobenius_dot(art);
            let raw_mat = raw.trial(i).data();
            let raw_sq = raw_mat.frobenius_dot(raw_mat);
            let mut eog_r = 0.0;
            let mut sig_r = 0.0;
            for (ci, p) in cs.components().iter().zip(&r.probabilities) {
                eog_r += p * ci.frobenius_dot(art) / art_sq;
                sig_r += p * ci.frobenius_dot(raw_mat) / raw_sq;
            }
            eog_kept.push(eog_r);
            sig_kept.push(sig_r);
            denoised.push(r.reconstructed, noisy.label(i)).unwrap();
        }
        let mean_eog: f64 = eog_kept.iter().sum::<f64>() / eog_kept.len() as f64;
        let mean_sig: f64 = sig_kept.iter().sum::<f64>() / sig_kept.len() as f64;
        println!("  retention: eog {mean_eog:.3} signal {mean_sig:.3}");

        // Signal quality on test trials.
        let mut snr_noisy = 0.0;
        let mut snr_den = 0.0;
        for &i in &te {
            snr_noisy += metrics::snr_db(noisy.trial(i).data(), clean.trial(i).data()).unwrap();
            snr_den += metrics::snr_db(denoised.trial(i).data(), clean.trial(i).data()).unwrap();
        }
        snr_noisy /= te.len() as f64;
        snr_den /= te.len() as f64;

        // Evaluators: identical fresh classifiers per condition.
        let mut ecfg = tcfg.clone();
        ecfg.seed = root.derive(3);
        ecfg.epochs_pretrain = evep;
        ecfg.lr_proxy = lr;
        ecfg.weight_decay = 0.0;
        let (eval_noisy, _) = train::pretrain(&noisy.subset(&tr).unwrap(), &ecfg).unwrap();
        let (eval_den, _) = train::pretrain(&denoised.subset(&tr).unwrap(), &ecfg).unwrap();

        let acc = |params: &taskdenoise_core::ModelParams64, set: &TrialSet<f64>| -> f64 {
            let sub = set.subset(&te).unwrap();
            let preds = train::predict_set(params, &sub).unwrap();
            metrics::class_report(&preds, sub.labels(), 2).unwrap().accuracy
        };
        let acc_noisy = acc(&eval_noisy, &noisy);
        let acc_den = acc(&eval_den, &denoised);
        let all_probs: Vec<f64> = probs_sample.iter().flatten().copied().collect();
        let pmin = all_probs.iter().cloned().fold(1.0f64, f64::min);
        let pmax = all_probs.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "seed {seed}: acc noisy {acc_noisy:.3} denoised {acc_den:.3} | snr noisy {snr_noisy:+.2} dB denoised {snr_den:+.2} dB | p range [{pmin:.2},{pmax:.2}] probs[0] {:?}",
            probs_sample[0]
                .iter()
                .map(|p| (p * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
        acc_gains.push(acc_den - acc_noisy);
        snr_gains.push(snr_den - snr_noisy);
    }
    let mean_acc: f64 = acc_gains.iter().sum::<f64>() / acc_gains.len() as f64;
    let mean_snr: f64 = snr_gains.iter().sum::<f64>() / snr_gains.len() as f64;
    println!("mean accuracy gain {mean_acc:+.4}, mean SNR gain {mean_snr:+.2} dB");
    println!("elapsed {:?}", t0.elapsed());
}
