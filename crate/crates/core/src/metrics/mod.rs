//! Evaluation math: RMS/MSE/SNR, classification reports, spectral summaries,
//! rank correlations, and the paired Wilcoxon signed-rank test.

mod wilcoxon;

pub use wilcoxon::{
    wilcoxon_exact_by_enumeration, wilcoxon_signed_rank, TestMethod, TestResult, EXACT_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::Real;
use crate::spectrum;

/// Default Welch segment length; fixed so spectral tests are reproducible.
pub const WELCH_SEGMENT: usize = 256;
/// Alpha band in Hz.
pub const ALPHA_BAND: (f64, f64) = (8.0, 12.0);
/// Beta band in Hz.
pub const BETA_BAND: (f64, f64) = (12.0, 30.0);
/// Frequency range whose total power normalizes the fundamental ratio.
pub const FUNDAMENTAL_TOTAL_BAND: (f64, f64) = (5.0, 45.0);

/// Root mean square over all entries.
pub fn rms<F: Real>(x: &Mat<F>) -> Result<F> {
    let n = x.rows() * x.cols();
    if n == 0 {
        return Err(Error::validation("rms of an empty matrix"));
    }
    let sum_sq: F = x.iter().map(|&v| v * v).sum();
    Ok((sum_sq / F::of(n as f64)).sqrt())
}

/// Mean squared elementwise difference.
pub fn mse<F: Real>(xhat: &Mat<F>, xref: &Mat<F>) -> Result<F> {
    if xhat.shape() != xref.shape() {
        return Err(Error::validation(format!(
            "mse shape mismatch: {:?} vs {:?}",
            xhat.shape(),
            xref.shape()
        )));
    }
    let n = xhat.rows() * xhat.cols();
    if n == 0 {
        return Err(Error::validation("mse of empty matrices"));
    }
    let sum: F = xhat
        .iter()
        .zip(xref.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / F::of(n as f64))
}

/// `20 log10(rms(ref) / rms(xhat - ref))` in dB.
///
/// Returns `+inf` when the residual is numerically zero; errors when the
/// reference itself has zero RMS.
pub fn snr_db<F: Real>(xhat: &Mat<F>, xref: &Mat<F>) -> Result<F> {
    let ref_rms = rms(xref)?;
    if ref_rms == F::zero() {
        return Err(Error::validation("snr reference has zero RMS"));
    }
    if xhat.shape() != xref.shape() {
        return Err(Error::validation("snr shape mismatch"));
    }
    let mut diff = xhat.clone();
    diff.add_scaled(-F::one(), xref);
    let residual_rms = rms(&diff)?;
    if residual_rms < F::of(1e-300) {
        return Ok(F::infinity());
    }
    Ok(F::of(20.0) * (ref_rms / residual_rms).log10())
}

/// MSE + SNR of an estimate against a reference, as plain `f64` report values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalQuality {
    pub mse: f64,
    pub snr_db: f64,
}

pub fn signal_quality<F: Real>(xhat: &Mat<F>, xref: &Mat<F>) -> Result<SignalQuality> {
    Ok(SignalQuality {
        mse: mse(xhat, xref)?.to_f64_lossy(),
        snr_db: snr_db(xhat, xref)?.to_f64_lossy(),
    })
}

/// Per-class counts and scores inside a [`ClassReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub support: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when a zero denominator forced a score to 0.
    pub zero_division: bool,
}

/// Accuracy plus macro-averaged precision/recall/F1 and the confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[truth][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassStats>,
    pub total: usize,
}

/// Builds a classification report; zero-division scores become 0 and are
/// flagged per class.
pub fn class_report(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<ClassReport> {
    if pred.len() != truth.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::validation("empty prediction set"));
    }
    if num_classes < 2 {
        return Err(Error::validation("need at least two classes"));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::validation(format!(
                "label out of range: pred {p}, truth {t}, K {num_classes}"
            )));
        }
        confusion[t][p] += 1;
    }
    let total = pred.len();
    let correct: usize = (0..num_classes).map(|k| confusion[k][k]).sum();

    let mut per_class = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = (0..num_classes).map(|t| confusion[t][k]).sum();
        let tp = confusion[k][k] as f64;
        let mut zero_division = false;
        let precision = if predicted > 0 {
            tp / predicted as f64
        } else {
            zero_division = true;
            0.0
        };
        let recall = if support > 0 {
            tp / support as f64
        } else {
            zero_division = true;
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            zero_division = true;
            0.0
        };
        per_class.push(ClassStats {
            support,
            predicted,
            precision,
            recall,
            f1,
            zero_division,
        });
    }
    let kf = num_classes as f64;
    Ok(ClassReport {
        accuracy: correct as f64 / total as f64,
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / kf,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / kf,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / kf,
        confusion,
        per_class,
        total,
    })
}

/// Welch PSD of one channel with the crate-standard parameters
/// ([`WELCH_SEGMENT`]-sample Hann segments, 50% overlap). `(freqs, density)`.
pub fn welch_psd<F: Real>(x: &[F], fs: f64) -> (Vec<f64>, Vec<F>) {
    spectrum::welch_psd(x, fs, WELCH_SEGMENT)
}

/// One point of a sliding band-power-ratio trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    /// Window center in seconds.
    pub time_sec: f64,
    pub ratio: f64,
}

/// Sliding-window ratio of band `a` power to band `b` power (1 s window,
/// 0.125 s hop). Each window is Hann-tapered before its periodogram so that
/// strong content in one band does not leak into the other; the taper scales
/// both band powers identically and cancels in the ratio.
pub fn band_power_ratio<F: Real>(
    x: &[F],
    fs: f64,
    band_a: (f64, f64),
    band_b: (f64, f64),
) -> Result<Vec<RatioPoint>> {
    let window = (fs.round() as usize).max(2);
    let hop = ((fs * 0.125).round() as usize).max(1);
    if x.len() < window {
        return Err(Error::validation(format!(
            "signal of {} samples is shorter than the 1 s window ({window})",
            x.len()
        )));
    }
    let taper: Vec<F> = (0..window)
        .map(|i| {
            F::of(0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / window as f64).cos()))
        })
        .collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + window <= x.len() {
        let seg: Vec<F> = x[start..start + window]
            .iter()
            .zip(&taper)
            .map(|(&v, &w)| v * w)
            .collect();
        let pa = spectrum::band_power(&seg, fs, band_a.0, band_a.1).to_f64_lossy();
        let pb = spectrum::band_power(&seg, fs, band_b.0, band_b.1).to_f64_lossy();
        out.push(RatioPoint {
            time_sec: (start as f64 + window as f64 / 2.0) / fs,
            ratio: pa / pb.max(1e-30),
        });
        start += hop;
    }
    Ok(out)
}

/// Share of `[5, 45]` Hz power concentrated within `f0 +/- 0.25` Hz, from the
/// full-length rectangular periodogram.
pub fn fundamental_power_ratio<F: Real>(x: &[F], fs: f64, f0: f64) -> Result<F> {
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(Error::validation(format!(
            "fundamental {f0} Hz outside (0, fs/2)"
        )));
    }
    let spectrum_bins = spectrum::periodogram(x);
    let n = x.len();
    let df = fs / n as f64;
    let mut numerator = F::zero();
    let mut denominator = F::zero();
    for (k, &p) in spectrum_bins.iter().enumerate() {
        let f = k as f64 * df;
        if (f - f0).abs() <= 0.25 + 1e-9 {
            numerator += p;
        }
        if (FUNDAMENTAL_TOTAL_BAND.0..FUNDAMENTAL_TOTAL_BAND.1).contains(&f) {
            denominator += p;
        }
    }
    Ok(numerator / denominator.max(F::of(1e-300)))
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ties; `None` when degenerate.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&rank_with_ties(a), &rank_with_ties(b))
}
