//! CompactCnn trainability probe on clean/raw ERD data.

use taskdenoise_core::decomp::{DecompConfig, Method};
use taskdenoise_core::metrics;
use taskdenoise_core::nnet::ArchKind;
use taskdenoise_core::signal::{RngSeed, TrialSet};
use taskdenoise_core::synth::{gen_dataset, SynthConfig};
use taskdenoise_core::train::{self, TrainConfig};

fn main() {
    let bg: f64 = std::env::var("BG").ok().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let tpc: usize = std::env::var("TPC").ok().and_then(|s| s.parse().ok()).unwrap_or(40);
    let epochs: usize = std::env::var("EP").ok().and_then(|s| s.parse().ok()).unwrap_or(300);
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let fs: f64 = std::env::var("FS").ok().and_then(|s| s.parse().ok()).unwrap_or(32.0);
    let t: usize = std::env::var("T").ok().and_then(|s| s.parse().ok()).unwrap_or(128);
    let c: usize = std::env::var("C").ok().and_then(|s| s.parse().ok()).unwrap_or(4);
    let t0 = std::time::Instant::now();
    let mut accs = Vec::new();
    for seed in 0..6u64 {
        let root = RngSeed::new(seed);
        let synth = SynthConfig {
            channels: c,
            samples: t,
            fs,
            background_amp: bg,
            trials_per_class: tpc,
            ..SynthConfig::erd_default(root.derive(1))
        };
        let (_, raw) = gen_dataset::<f64>(&synth).unwrap();
        let (mut tr, mut te) = (Vec::new(), Vec::new());
        for class in 0..2 {
            for j in 0..tpc {
                let idx = class * tpc + j;
                if j < tpc * 6 / 10 { tr.push(idx); } else if j >= tpc * 8 / 10 { te.push(idx); }
            }
        }
        let mut cfg = TrainConfig::new(ArchKind::CompactCnn, DecompConfig::new(Method::Svd), root.derive(3));
        cfg.epochs_pretrain = epochs;
        cfg.lr_proxy = lr;
        let (params, hist) = train::pretrain(&raw.subset(&tr).unwrap(), &cfg).unwrap();
        let sub = raw.subset(&te).unwrap();
        let preds = train::predict_set(&params, &sub).unwrap();
        let acc = metrics::class_report(&preds, sub.labels(), 2).unwrap().accuracy;
        let train_sub = raw.subset(&tr).unwrap();
        let tpreds = train::predict_set(&params, &train_sub).unwrap();
        let tacc = metrics::class_report(&tpreds, train_sub.labels(), 2).unwrap().accuracy;
        println!("seed {seed}: train acc {tacc:.3} test acc {acc:.3} final CE {:.4}", hist.steps.last().unwrap().loss);
        accs.push(acc);
    }
    println!("mean test acc {:.3}  ({:?})", accs.iter().sum::<f64>() / accs.len() as f64, t0.elapsed());
}
