//! Synthetic labeled datasets with ground-truth clean signals, parametric
//! EOG/EMG artifact templates, and exact-SNR noise mixing.
//!
//! [`gen_dataset`] returns two label-identical sets: the pure task signal
//! (the clean ground truth) and the "raw" measurement, which adds 1/f
//! background noise. The harness contaminates the raw set and can then score
//! denoising against both references.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::metrics::rms;
use crate::num::Real;
use crate::signal::{RngSeed, Trial, TrialSet};
use crate::spectrum::{bandpass_brickwall, ifft_unnormalized};

const TAU: f64 = std::f64::consts::TAU;

/// Task paradigm of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    /// Steady-state response: class = stimulus frequency plus its second
    /// harmonic, strongest over the rear channel group.
    Ssvep,
    /// Event-related desynchronization: class = which channel group has its
    /// alpha activity attenuated mid-trial.
    Erd,
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssvep" => Ok(Paradigm::Ssvep),
            "erd" => Ok(Paradigm::Erd),
            other => Err(Error::validation(format!("unknown paradigm '{other}'"))),
        }
    }
}

/// Synthetic dataset settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub paradigm: Paradigm,
    pub channels: usize,
    pub samples: usize,
    pub fs: f64,
    pub num_classes: usize,
    pub trials_per_class: usize,
    /// Stimulus frequencies per class (SSVEP only); `None` uses the default
    /// grid 9.25, 9.75, ... in 0.5 Hz steps.
    pub stimulus_freqs: Option<Vec<f64>>,
    /// RMS of the per-channel 1/f background added to the raw set.
    pub background_amp: f64,
    pub seed: RngSeed,
}

impl SynthConfig {
    pub fn ssvep_default(seed: RngSeed) -> Self {
        SynthConfig {
            paradigm: Paradigm::Ssvep,
            channels: 8,
            samples: 1024,
            fs: 256.0,
            num_classes: 12,
            trials_per_class: 15,
            stimulus_freqs: None,
            background_amp: 0.3,
            seed,
        }
    }

    pub fn erd_default(seed: RngSeed) -> Self {
        SynthConfig {
            paradigm: Paradigm::Erd,
            channels: 8,
            samples: 512,
            fs: 128.0,
            num_classes: 2,
            trials_per_class: 40,
            stimulus_freqs: None,
            background_amp: 0.35,
            seed,
        }
    }

    /// Stimulus frequencies after validation, snapped to the trial's DFT bin
    /// grid so a clean tone occupies exactly one periodogram bin.
    pub fn resolved_freqs(&self) -> Result<Vec<f64>> {
        let freqs: Vec<f64> = match &self.stimulus_freqs {
            Some(f) => f.clone(),
            None => (0..self.num_classes).map(|k| 9.25 + 0.5 * k as f64).collect(),
        };
        if freqs.len() != self.num_classes {
            return Err(Error::validation(format!(
                "{} stimulus frequencies for {} classes",
                freqs.len(),
                self.num_classes
            )));
        }
        let df = self.fs / self.samples as f64;
        let snapped: Vec<f64> = freqs.iter().map(|f| (f / df).round() * df).collect();
        for (i, &f) in snapped.iter().enumerate() {
            if !(f > 0.0 && f < self.fs / 2.0) {
                return Err(Error::validation(format!(
                    "stimulus frequency {f} Hz (class {i}) outside (0, fs/2)"
                )));
            }
            if snapped[..i].iter().any(|&g| g == f) {
                return Err(Error::validation(format!(
                    "stimulus frequencies for classes collide at {f} Hz after grid snapping"
                )));
            }
        }
        Ok(snapped)
    }

    fn validate(&self) -> Result<()> {
        if self.channels < 1 || self.samples < 2 {
            return Err(Error::validation("need C >= 1 and T >= 2"));
        }
        if !(self.fs > 0.0) {
            return Err(Error::validation("fs must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::validation("need at least two classes"));
        }
        if self.trials_per_class < 1 {
            return Err(Error::validation("need at least one trial per class"));
        }
        if self.background_amp < 0.0 {
            return Err(Error::validation("background amplitude must be >= 0"));
        }
        if self.paradigm == Paradigm::Erd && self.num_classes != 2 {
            return Err(Error::validation(
                "the ERD generator models two classes (left/right attenuation)",
            ));
        }
        Ok(())
    }
}

/// Artifact family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Eog,
    Emg,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eog" => Ok(NoiseKind::Eog),
            "emg" => Ok(NoiseKind::Emg),
            other => Err(Error::validation(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// Contamination level: fixed, or drawn uniformly per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrSpec {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl SnrSpec {
    pub fn validate(&self) -> Result<()> {
        if let SnrSpec::Uniform { lo, hi } = self {
            if lo > hi {
                return Err(Error::validation(format!(
                    "SNR range lower bound {lo} exceeds upper bound {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            SnrSpec::Fixed(v) => v,
            SnrSpec::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..hi)
                }
            }
        }
    }
}

impl Default for SnrSpec {
    fn default() -> Self {
        SnrSpec::Uniform { lo: -5.0, hi: 5.0 }
    }
}

/// What to mix into the raw signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: SnrSpec,
}

/// Unit-RMS 1/f noise via spectral synthesis.
fn pink_noise<F: Real>(t: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<F> {
    let mut spec = vec![Complex::new(F::zero(), F::zero()); t];
    for k in 1..(t + 1) / 2 {
        let f = k as f64 * fs / t as f64;
        let amp = 1.0 / f.sqrt();
        let phase = rng.gen_range(0.0..TAU);
        let c = Complex::new(F::of(amp * phase.cos()), F::of(amp * phase.sin()));
        spec[k] = c;
        spec[t - k] = c.conj();
    }
    ifft_unnormalized(&mut spec);
    let mut x: Vec<F> = spec.iter().map(|c| c.re).collect();
    normalize_rms(&mut x);
    x
}

fn normalize_rms<F: Real>(x: &mut [F]) {
    let ms: F = x.iter().map(|&v| v * v).sum::<F>() / F::of(x.len() as f64);
    let r = ms.sqrt();
    if r > F::zero() {
        for v in x.iter_mut() {
            *v /= r;
        }
    }
}

fn white_noise<F: Real>(t: usize, rng: &mut ChaCha8Rng) -> Vec<F> {
    (0..t).map(|_| F::of(rng.gen_range(-1.0..1.0))).collect()
}

/// Rear-peaked smooth spatial gain profile for the SSVEP tones.
fn ssvep_gains<F: Real>(channels: usize) -> Vec<F> {
    let occ = channels.div_ceil(3);
    let mu = (channels - 1) as f64 - (occ - 1) as f64 / 2.0;
    let sigma = (channels as f64 / 4.0).max(1.0);
    (0..channels)
        .map(|c| {
            let z = (c as f64 - mu) / sigma;
            F::of(0.15 + 0.85 * (-0.5 * z * z).exp())
        })
        .collect()
}

/// Channel index with the strongest SSVEP gain.
pub fn ssvep_peak_channel(channels: usize) -> usize {
    let gains = ssvep_gains::<f64>(channels);
    gains
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Channel groups used by the ERD generator and the EOG gain profile:
/// `left` is the first third of channels, `right` the second.
pub fn erd_groups(channels: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let third = channels.div_ceil(3);
    (0..third, third..(2 * third).min(channels))
}

fn ssvep_clean_trial<F: Real>(cfg: &SynthConfig, freq: f64, rng: &mut ChaCha8Rng) -> Mat<F> {
    let t = cfg.samples;
    let phase1 = rng.gen_range(0.0..TAU);
    let phase2 = rng.gen_range(0.0..TAU);
    let harmonic = 2.0 * freq;
    let use_harmonic = harmonic < cfg.fs / 2.0;
    let tone: Vec<f64> = (0..t)
        .map(|i| {
            let arg = TAU * i as f64 / cfg.fs;
            let mut v = (freq * arg + phase1).sin();
            if use_harmonic {
                v += 0.4 * (harmonic * arg + phase2).sin();
            }
            v
        })
        .collect();
    let gains = ssvep_gains::<F>(cfg.channels);
    Mat::from_fn(cfg.channels, t, |r, c| gains[r] * F::of(tone[c]))
}

fn erd_clean_trial<F: Real>(cfg: &SynthConfig, label: usize, rng: &mut ChaCha8Rng) -> Mat<F> {
    let t = cfg.samples;
    let (left, right) = erd_groups(cfg.channels);
    // Class 0 attenuates the right group mid-trial, class 1 the left.
    let window = t / 4..(3 * t) / 4;
    let attenuated_left = label == 1;
    let mut data = Mat::zeros(cfg.channels, t);
    for c in 0..cfg.channels {
        let attenuated = if left.contains(&c) {
            attenuated_left
        } else if right.contains(&c) {
            !attenuated_left
        } else {
            continue;
        };
        // Independent alpha-band carrier per channel.
        let mut carrier: Vec<F> =
            bandpass_brickwall(&white_noise::<F>(t, rng), cfg.fs, 8.0, 12.0);
        normalize_rms(&mut carrier);
        let row = data.row_mut(c);
        for (i, dst) in row.iter_mut().enumerate() {
            let env = if attenuated && window.contains(&i) {
                F::of(0.4)
            } else {
                F::one()
            };
            *dst = env * carrier[i];
        }
    }
    data
}

/// Generates the labeled dataset: `(clean ground truth, raw measurement)`.
///
/// Both sets share labels and ordering; the raw set is the clean signal plus
/// per-channel 1/f background at `background_amp` RMS. With zero background
/// the two sets are identical.
pub fn gen_dataset<F: Real>(cfg: &SynthConfig) -> Result<(TrialSet<F>, TrialSet<F>)> {
    cfg.validate()?;
    let freqs = match cfg.paradigm {
        Paradigm::Ssvep => cfg.resolved_freqs()?,
        Paradigm::Erd => Vec::new(),
    };
    let subject = format!("synth-{:?}-{}", cfg.paradigm, cfg.seed.seed).to_lowercase();
    let mut clean_set = TrialSet::empty(
        cfg.channels,
        cfg.samples,
        cfg.fs,
        cfg.num_classes,
        subject.clone(),
    )?;
    let mut raw_set =
        TrialSet::empty(cfg.channels, cfg.samples, cfg.fs, cfg.num_classes, subject)?;

    let mut index = 0u64;
    for class in 0..cfg.num_classes {
        for _ in 0..cfg.trials_per_class {
            let mut rng = cfg.seed.derive(index).rng();
            let clean = match cfg.paradigm {
                Paradigm::Ssvep => ssvep_clean_trial::<F>(cfg, freqs[class], &mut rng),
                Paradigm::Erd => erd_clean_trial::<F>(cfg, class, &mut rng),
            };
            let mut raw = clean.clone();
            if cfg.background_amp > 0.0 {
                let amp = F::of(cfg.background_amp);
                for c in 0..cfg.channels {
                    let noise = pink_noise::<F>(cfg.samples, cfg.fs, &mut rng);
                    for (dst, &n) in raw.row_mut(c).iter_mut().zip(&noise) {
                        *dst += amp * n;
                    }
                }
            }
            clean_set.push(Trial::new(clean, cfg.fs)?, class)?;
            raw_set.push(Trial::new(raw, cfg.fs)?, class)?;
            index += 1;
        }
    }
    Ok((clean_set, raw_set))
}

/// EOG artifact template: a sub-3 Hz filtered random walk plus one to three
/// half-cosine blink pulses, projected front-to-back (leading third of the
/// channels at gain 1.0, then linear decay to 0.1).
fn eog_template<F: Real>(
    channels: usize,
    t: usize,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Mat<F>> {
    let blink_width = (0.3 * fs).round() as usize;
    if t < blink_width || blink_width < 2 {
        return Err(Error::validation(format!(
            "{t} samples at {fs} Hz is too short for a 0.3 s blink pulse"
        )));
    }
    let white = white_noise::<F>(t, rng);
    let mut walk = Vec::with_capacity(t);
    let mut acc = F::zero();
    for w in white {
        acc += w;
        walk.push(acc);
    }
    let mut drift: Vec<F> = bandpass_brickwall(&walk, fs, 0.1, 3.0);
    normalize_rms(&mut drift);

    let n_blinks = rng.gen_range(1..=3usize);
    let mut temporal = drift;
    for _ in 0..n_blinks {
        let center = rng.gen_range(blink_width / 2..t - blink_width / 2 + 1);
        let amp = F::of(rng.gen_range(2.0..4.0));
        for j in 0..blink_width {
            let idx = center + j - blink_width / 2;
            if idx >= t {
                continue;
            }
            let u = (j as f64 - blink_width as f64 / 2.0) / blink_width as f64;
            temporal[idx] += amp * F::of((std::f64::consts::PI * u).cos());
        }
    }

    let front = channels.div_ceil(3);
    let gains: Vec<F> = (0..channels)
        .map(|c| {
            if c < front || channels == front {
                F::one()
            } else {
                F::of(1.0 - 0.9 * (c - front + 1) as f64 / (channels - front) as f64)
            }
        })
        .collect();
    Ok(Mat::outer(&gains, &temporal))
}

/// EMG artifact template: 20-45 Hz noise gated by a handful of smooth burst
/// envelopes, with uniform random channel gains in [0.3, 1].
fn emg_template<F: Real>(
    channels: usize,
    t: usize,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Mat<F>> {
    let min_len = ((0.2 * fs).round() as usize).max(4);
    if t < min_len {
        return Err(Error::validation(format!(
            "{t} samples at {fs} Hz is too short for an EMG burst envelope"
        )));
    }
    let mut base: Vec<F> = bandpass_brickwall(&white_noise::<F>(t, rng), fs, 20.0, 45.0);
    normalize_rms(&mut base);

    let duration = t as f64 / fs;
    let n_bursts = rng.gen_range(2..=5usize);
    let mut envelope = vec![F::zero(); t];
    for _ in 0..n_bursts {
        let width_s = rng.gen_range(0.4..0.8f64).min(duration / 2.0);
        let width = ((width_s * fs).round() as usize).clamp(3, t);
        let start = rng.gen_range(0..=(t - width));
        for j in 0..width {
            let u = j as f64 / width as f64;
            let bump = F::of(0.5 * (1.0 - (TAU * u).cos()));
            if bump > envelope[start + j] {
                envelope[start + j] = bump;
            }
        }
    }
    let mut temporal: Vec<F> = base.iter().zip(&envelope).map(|(&b, &e)| b * e).collect();
    normalize_rms(&mut temporal);

    let gains: Vec<F> = (0..channels)
        .map(|_| F::of(rng.gen_range(0.3..1.0)))
        .collect();
    Ok(Mat::outer(&gains, &temporal))
}

/// Generates one artifact template as a trial.
pub fn gen_artifact<F: Real>(
    kind: NoiseKind,
    channels: usize,
    samples: usize,
    fs: f64,
    seed: RngSeed,
) -> Result<Trial<F>> {
    if channels < 1 || samples < 2 {
        return Err(Error::validation("need C >= 1 and T >= 2"));
    }
    let mut rng = seed.rng();
    let data = match kind {
        NoiseKind::Eog => eog_template(channels, samples, fs, &mut rng)?,
        NoiseKind::Emg => emg_template(channels, samples, fs, &mut rng)?,
    };
    Trial::new(data, fs)
}

/// Mixes `noise` into `x` so the contamination SNR is exactly `snr_db`:
/// `lambda = rms(x) / (rms(noise) * 10^(snr_db/20))`, output `x + lambda n`.
///
/// Returns the noisy trial and `lambda`.
pub fn mix_noise<F: Real>(x: &Trial<F>, noise: &Trial<F>, snr_db: f64) -> Result<(Trial<F>, f64)> {
    if x.data().shape() != noise.data().shape() {
        return Err(Error::validation(format!(
            "signal {:?} and noise {:?} shapes differ",
            x.data().shape(),
            noise.data().shape()
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::validation("snr_db must be finite"));
    }
    let rms_x = rms(x.data())?;
    let rms_n = rms(noise.data())?;
    if rms_x == F::zero() {
        return Err(Error::validation("signal has zero RMS"));
    }
    if rms_n == F::zero() {
        return Err(Error::validation("noise template has zero RMS"));
    }
    let lambda = rms_x.to_f64_lossy() / (rms_n.to_f64_lossy() * 10f64.powf(snr_db / 20.0));
    let mut noisy = x.data().clone();
    noisy.add_scaled(F::of(lambda), noise.data());
    Ok((Trial::new(noisy, x.fs())?, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use crate::spectrum::{band_power, periodogram};

    fn small_ssvep(seed: u64) -> SynthConfig {
        SynthConfig {
            num_classes: 4,
            trials_per_class: 3,
            ..SynthConfig::ssvep_default(RngSeed::new(seed))
        }
    }

    #[test]
    fn ssvep_welch_peak_at_stimulus_frequency() {
        let cfg = small_ssvep(1);
        let (_, raw) = gen_dataset::<f64>(&cfg).unwrap();
        let freqs = cfg.resolved_freqs().unwrap();
        let peak_channel = ssvep_peak_channel(cfg.channels);
        for (trial, &label) in raw.trials().iter().zip(raw.labels()) {
            let (fgrid, psd) = metrics::welch_psd(trial.data().row(peak_channel), cfg.fs);
            let (best, _) = fgrid
                .iter()
                .zip(&psd)
                .filter(|(f, _)| **f >= 5.0 && **f <= 45.0)
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            assert!(
                (best - freqs[label]).abs() <= 0.25,
                "label {label}: peak {best} Hz vs stimulus {} Hz",
                freqs[label]
            );
        }
    }

    #[test]
    fn zero_background_is_exactly_two_tone() {
        let mut cfg = small_ssvep(2);
        cfg.background_amp = 0.0;
        let (clean, raw) = gen_dataset::<f64>(&cfg).unwrap();
        assert_eq!(clean, raw);
        let freqs = cfg.resolved_freqs().unwrap();
        let trial = raw.trial(0);
        let f0 = freqs[raw.label(0)];
        let row = trial.data().row(ssvep_peak_channel(cfg.channels));
        let spectrum_bins = periodogram(row);
        let df = cfg.fs / cfg.samples as f64;
        let mut tone_power = 0.0;
        let mut other_power = 0.0;
        for (k, &p) in spectrum_bins.iter().enumerate() {
            let f = k as f64 * df;
            if (f - f0).abs() <= 1.0 || (f - 2.0 * f0).abs() <= 1.0 {
                tone_power += p;
            } else {
                other_power += p;
            }
        }
        assert!(
            other_power < 1e-10 * (tone_power + other_power),
            "out-of-tone power {other_power:e} vs total {:e}",
            tone_power + other_power
        );
    }

    #[test]
    fn datasets_are_seed_deterministic() {
        let cfg = small_ssvep(3);
        assert_eq!(
            gen_dataset::<f64>(&cfg).unwrap(),
            gen_dataset::<f64>(&cfg).unwrap()
        );
        let erd = SynthConfig::erd_default(RngSeed::new(4));
        assert_eq!(
            gen_dataset::<f64>(&erd).unwrap(),
            gen_dataset::<f64>(&erd).unwrap()
        );
        let other = SynthConfig::erd_default(RngSeed::new(5));
        assert_ne!(
            gen_dataset::<f64>(&erd).unwrap(),
            gen_dataset::<f64>(&other).unwrap()
        );
    }

    #[test]
    fn erd_modulation_shows_in_alpha_beta_trajectory() {
        let cfg = SynthConfig::erd_default(RngSeed::new(6));
        let (_, raw) = gen_dataset::<f64>(&cfg).unwrap();
        let (_, right) = erd_groups(cfg.channels);
        // Class 0 attenuates the right group mid-trial: the alpha/beta ratio
        // there must dip relative to the edges. The raw set's background
        // provides the beta-band floor the ratio is measured against.
        let mut mid_over_edge = Vec::new();
        for (trial, &label) in raw.trials().iter().zip(raw.labels()) {
            if label != 0 {
                continue;
            }
            let channel = right.start;
            let points = metrics::band_power_ratio(
                trial.data().row(channel),
                cfg.fs,
                (8.0, 12.0),
                (12.0, 30.0),
            )
            .unwrap();
            // Attenuation covers [T/4, 3T/4); compare windows fully inside it
            // against windows fully outside (1 s window = 0.5 s half-width).
            let t_total = cfg.samples as f64 / cfg.fs;
            let (att_lo, att_hi) = (0.25 * t_total, 0.75 * t_total);
            let mid: Vec<f64> = points
                .iter()
                .filter(|p| p.time_sec >= att_lo + 0.5 && p.time_sec <= att_hi - 0.5)
                .map(|p| p.ratio)
                .collect();
            let edge: Vec<f64> = points
                .iter()
                .filter(|p| p.time_sec <= att_lo - 0.5 || p.time_sec >= att_hi + 0.5)
                .map(|p| p.ratio)
                .collect();
            let mid_mean = mid.iter().sum::<f64>() / mid.len() as f64;
            let edge_mean = edge.iter().sum::<f64>() / edge.len() as f64;
            mid_over_edge.push(mid_mean / edge_mean);
        }
        let mean: f64 = mid_over_edge.iter().sum::<f64>() / mid_over_edge.len() as f64;
        assert!(mean < 0.8, "attenuation not visible: mid/edge ratio {mean}");
    }

    #[test]
    fn eog_power_is_low_frequency() {
        for seed in 0..5u64 {
            let trial =
                gen_artifact::<f64>(NoiseKind::Eog, 8, 512, 128.0, RngSeed::new(seed)).unwrap();
            // Evaluate on the strongest (front) channel.
            let row = trial.data().row(0);
            let low = band_power(row, 128.0, 0.0, 5.0);
            let total: f64 = periodogram(row).iter().sum();
            assert!(
                low / total > 0.9,
                "seed {seed}: low-frequency share {}",
                low / total
            );
        }
    }

    #[test]
    fn emg_power_is_high_frequency() {
        for seed in 0..5u64 {
            let trial =
                gen_artifact::<f64>(NoiseKind::Emg, 8, 512, 128.0, RngSeed::new(seed)).unwrap();
            let row = trial.data().row(0);
            let high = band_power(row, 128.0, 15.0, 64.0);
            let total: f64 = periodogram(row).iter().sum();
            assert!(
                high / total > 0.9,
                "seed {seed}: high-frequency share {}",
                high / total
            );
        }
    }

    #[test]
    fn artifacts_are_deterministic_and_validated() {
        let a = gen_artifact::<f64>(NoiseKind::Eog, 4, 256, 128.0, RngSeed::new(7)).unwrap();
        let b = gen_artifact::<f64>(NoiseKind::Eog, 4, 256, 128.0, RngSeed::new(7)).unwrap();
        assert_eq!(a, b);
        // 30 samples at 128 Hz cannot hold a 0.3 s blink.
        assert!(gen_artifact::<f64>(NoiseKind::Eog, 4, 30, 128.0, RngSeed::new(7)).is_err());
    }

    #[test]
    fn mix_noise_hits_requested_snr_exactly() {
        let cfg = SynthConfig::erd_default(RngSeed::new(8));
        let (_, raw) = gen_dataset::<f64>(&cfg).unwrap();
        let x = raw.trial(0);
        let noise = gen_artifact::<f64>(
            NoiseKind::Eog,
            cfg.channels,
            cfg.samples,
            cfg.fs,
            RngSeed::new(9),
        )
        .unwrap();

        let (_, lambda) = mix_noise(x, &noise, 0.0).unwrap();
        let rms_x = rms(x.data()).unwrap();
        let rms_n = rms(noise.data()).unwrap();
        assert!((lambda * rms_n - rms_x).abs() < 1e-12 * rms_x);

        let (_, lambda5) = mix_noise(x, &noise, -5.0).unwrap();
        assert!((lambda5 * rms_n / rms_x - 10f64.powf(0.25)).abs() < 1e-12);

        for snr in [-5.0, -2.5, 0.0, 2.5, 5.0] {
            let (noisy, _) = mix_noise(x, &noise, snr).unwrap();
            let measured = metrics::snr_db(noisy.data(), x.data()).unwrap();
            assert!(
                (measured - snr).abs() < 1e-9,
                "requested {snr} dB, measured {measured} dB"
            );
        }
    }

    #[test]
    fn band_power_centroid_oracle_separates_clean_classes() {
        // Nearest-centroid on log band powers, fit on even trials and tested
        // on odd ones; guards against degenerate generators.
        for cfg in [
            SynthConfig {
                num_classes: 3,
                trials_per_class: 10,
                stimulus_freqs: Some(vec![6.0, 10.0, 25.0]),
                ..SynthConfig::ssvep_default(RngSeed::new(10))
            },
            SynthConfig {
                trials_per_class: 15,
                ..SynthConfig::erd_default(RngSeed::new(11))
            },
        ] {
            let (clean, _) = gen_dataset::<f64>(&cfg).unwrap();
            let features: Vec<Vec<f64>> = clean
                .trials()
                .iter()
                .map(|t| crate::nnet::band_log_features(t.data(), cfg.fs))
                .collect();
            let dim = features[0].len();
            let mut centroids = vec![vec![0.0; dim]; cfg.num_classes];
            let mut counts = vec![0usize; cfg.num_classes];
            for i in (0..clean.len()).step_by(2) {
                for (c, f) in centroids[clean.label(i)].iter_mut().zip(&features[i]) {
                    *c += f;
                }
                counts[clean.label(i)] += 1;
            }
            for (c, n) in centroids.iter_mut().zip(&counts) {
                for v in c {
                    *v /= *n as f64;
                }
            }
            let mut correct = 0;
            let mut total = 0;
            for i in (1..clean.len()).step_by(2) {
                let pred = centroids
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        let da: f64 = a
                            .iter()
                            .zip(&features[i])
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum();
                        let db: f64 = b
                            .iter()
                            .zip(&features[i])
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap()
                    .0;
                correct += usize::from(pred == clean.label(i));
                total += 1;
            }
            let acc = correct as f64 / total as f64;
            assert!(
                acc > 0.8,
                "{:?}: oracle accuracy {acc} on clean data",
                cfg.paradigm
            );
        }
    }
}
