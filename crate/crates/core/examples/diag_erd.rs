use taskdenoise_core::metrics;
use taskdenoise_core::signal::RngSeed;
use taskdenoise_core::synth::{erd_groups, gen_dataset, SynthConfig};

fn main() {
    let cfg = SynthConfig::erd_default(RngSeed::new(6));
    let (_, raw) = gen_dataset::<f64>(&cfg).unwrap();
    let (_, right) = erd_groups(cfg.channels);
    let t_total = cfg.samples as f64 / cfg.fs;
    let (att_lo, att_hi) = (0.25 * t_total, 0.75 * t_total);
    let mut ratios = Vec::new();
    for (ti, (trial, &label)) in raw.trials().iter().zip(raw.labels()).enumerate() {
        if label != 0 { continue; }
        let channel = right.start;
        let points = metrics::band_power_ratio(trial.data().row(channel), cfg.fs, (8.0, 12.0), (12.0, 30.0)).unwrap();
        let mid: Vec<f64> = points.iter().filter(|p| p.time_sec >= att_lo + 0.5 && p.time_sec <= att_hi - 0.5).map(|p| p.ratio).collect();
        let edge: Vec<f64> = points.iter().filter(|p| p.time_sec <= att_lo - 0.5 || p.time_sec >= att_hi + 0.5).map(|p| p.ratio).collect();
        let mid_mean = mid.iter().sum::<f64>() / mid.len() as f64;
        let edge_mean = edge.iter().sum::<f64>() / edge.len() as f64;
        if ti < 8 {
            let edge_str: Vec<String> = edge.iter().map(|r| format!("{r:.1}")).collect();
            let mid_str: Vec<String> = mid.iter().map(|r| format!("{r:.1}")).collect();
            println!("trial {ti}: edges [{}] mids [{}] -> {:.3}", edge_str.join(","), mid_str.join(","), mid_mean/edge_mean);
        }
        ratios.push(mid_mean/edge_mean);
    }
    println!("overall mean {:.3}", ratios.iter().sum::<f64>()/ratios.len() as f64);
    let gm: f64 = (ratios.iter().map(|r| r.ln()).sum::<f64>()/ratios.len() as f64).exp();
    println!("geometric mean {:.3}", gm);
}
