//! Shared spectral machinery: FFT plumbing, rectangular-periodogram band
//! powers (with an analytic input gradient, used by the band-power feature
//! extractor), Welch PSD, and a brickwall bandpass for the signal generators.
//!
//! Band powers use the "variance contribution" convention: the power of a
//! unit-amplitude sinusoid in its own band is 0.5, and summing all bands of
//! the one-sided spectrum reproduces the mean square of the signal.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::num::Real;

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<(TypeId, usize, bool), Box<dyn Any>>> =
        RefCell::new(HashMap::new());
}

fn plan<F: Real>(len: usize, inverse: bool) -> Arc<dyn Fft<F>> {
    PLAN_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let key = (TypeId::of::<F>(), len, inverse);
        if let Some(entry) = cache.get(&key) {
            return entry
                .downcast_ref::<Arc<dyn Fft<F>>>()
                .expect("cached plan type")
                .clone();
        }
        let mut planner = FftPlanner::<F>::new();
        let p = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        cache.insert(key, Box::new(p.clone()));
        p
    })
}

/// Unnormalized forward DFT of a real signal.
pub fn fft_forward<F: Real>(x: &[F]) -> Vec<Complex<F>> {
    let mut buf: Vec<Complex<F>> = x.iter().map(|&v| Complex::new(v, F::zero())).collect();
    plan::<F>(x.len(), false).process(&mut buf);
    buf
}

/// Unnormalized inverse DFT (no 1/N factor).
pub fn ifft_unnormalized<F: Real>(y: &mut [Complex<F>]) {
    plan::<F>(y.len(), true).process(y);
}

/// Number of one-sided spectrum bins for a length-`n` signal: `n/2 + 1`.
pub fn onesided_bins(n: usize) -> usize {
    n / 2 + 1
}

/// Weight folding the mirrored negative-frequency bin into bin `k`.
fn fold_weight<F: Real>(k: usize, n: usize) -> F {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        F::one()
    } else {
        F::of(2.0)
    }
}

/// One-sided rectangular periodogram as variance contributions per bin.
///
/// `out[k]` is the share of the signal's mean square at frequency
/// `k * fs / n`; the entries sum to `mean(x^2)`.
pub fn periodogram<F: Real>(x: &[F]) -> Vec<F> {
    periodogram_from_spectrum(&fft_forward(x), x.len())
}

fn periodogram_from_spectrum<F: Real>(spectrum: &[Complex<F>], n: usize) -> Vec<F> {
    let scale = F::one() / F::of((n * n) as f64);
    (0..onesided_bins(n))
        .map(|k| fold_weight::<F>(k, n) * spectrum[k].norm_sqr() * scale)
        .collect()
}

/// Sums periodogram bins with frequency in `[lo, hi)`.
pub fn band_power<F: Real>(x: &[F], fs: f64, lo: f64, hi: f64) -> F {
    let spectrum = fft_forward(x);
    band_power_from_spectrum(&spectrum, x.len(), fs, lo, hi)
}

fn band_bins(n: usize, fs: f64, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let df = fs / n as f64;
    let first = (lo / df).ceil() as usize;
    let last = ((hi / df).ceil() as usize).min(onesided_bins(n));
    first.min(last)..last
}

fn band_power_from_spectrum<F: Real>(
    spectrum: &[Complex<F>],
    n: usize,
    fs: f64,
    lo: f64,
    hi: f64,
) -> F {
    let scale = F::one() / F::of((n * n) as f64);
    band_bins(n, fs, lo, hi)
        .map(|k| fold_weight::<F>(k, n) * spectrum[k].norm_sqr() * scale)
        .fold(F::zero(), |a, b| a + b)
}

/// Forward pass of the band-power stage, retaining the spectrum so the
/// backward pass can run.
#[derive(Debug, Clone)]
pub struct BandPowerCache<F> {
    spectrum: Vec<Complex<F>>,
    n: usize,
}

/// Computes the powers of several disjoint bands in one transform.
pub fn band_powers_cached<F: Real>(
    x: &[F],
    fs: f64,
    bands: &[(f64, f64)],
) -> (Vec<F>, BandPowerCache<F>) {
    let spectrum = fft_forward(x);
    let n = x.len();
    let powers = bands
        .iter()
        .map(|&(lo, hi)| band_power_from_spectrum(&spectrum, n, fs, lo, hi))
        .collect();
    (powers, BandPowerCache { spectrum, n })
}

/// Gradient of `sum_b upstream[b] * band_power_b(x)` with respect to `x`.
pub fn band_powers_backward<F: Real>(
    cache: &BandPowerCache<F>,
    fs: f64,
    bands: &[(f64, f64)],
    upstream: &[F],
) -> Vec<F> {
    assert_eq!(bands.len(), upstream.len());
    let n = cache.n;
    let mut y = vec![Complex::new(F::zero(), F::zero()); n];
    for (&(lo, hi), &g) in bands.iter().zip(upstream) {
        for k in band_bins(n, fs, lo, hi) {
            y[k] = y[k] + cache.spectrum[k] * (fold_weight::<F>(k, n) * g);
        }
    }
    ifft_unnormalized(&mut y);
    let scale = F::of(2.0) / F::of((n * n) as f64);
    y.iter().map(|c| c.re * scale).collect()
}

/// Welch power spectral density: Hann window, 50% overlap, one-sided density
/// normalization (integral of the PSD approximates the signal's mean square).
///
/// The segment length is capped at the signal length. Returns `(freqs, psd)`.
pub fn welch_psd<F: Real>(x: &[F], fs: f64, segment_len: usize) -> (Vec<f64>, Vec<F>) {
    assert!(!x.is_empty(), "welch_psd on empty signal");
    assert!(segment_len >= 2, "welch segment length must be >= 2");
    let l = segment_len.min(x.len());
    let step = (l / 2).max(1);

    let window: Vec<F> = (0..l)
        .map(|i| F::of(0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / l as f64).cos())))
        .collect();
    let win_energy: F = window.iter().map(|&w| w * w).sum();

    let bins = onesided_bins(l);
    let mut psd = vec![F::zero(); bins];
    let mut n_segments = 0usize;
    let mut start = 0usize;
    while start + l <= x.len() {
        let seg: Vec<F> = x[start..start + l]
            .iter()
            .zip(&window)
            .map(|(&v, &w)| v * w)
            .collect();
        let spectrum = fft_forward(&seg);
        for (k, p) in psd.iter_mut().enumerate() {
            *p += fold_weight::<F>(k, l) * spectrum[k].norm_sqr();
        }
        n_segments += 1;
        start += step;
    }
    let norm = F::one() / (F::of(fs) * win_energy * F::of(n_segments as f64));
    for p in &mut psd {
        *p *= norm;
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / l as f64).collect();
    (freqs, psd)
}

/// Zeroes every spectral bin outside `[lo, hi)` Hz and returns the filtered
/// signal. Used by the synthetic generators; exact and deterministic. The
/// half-open band matches the band-power convention, so filtered content
/// never sits on a band boundary.
pub fn bandpass_brickwall<F: Real>(x: &[F], fs: f64, lo: f64, hi: f64) -> Vec<F> {
    let n = x.len();
    let mut spectrum = fft_forward(x);
    let df = fs / n as f64;
    for (k, bin) in spectrum.iter_mut().enumerate() {
        // Map bin index to its physical frequency magnitude.
        let f = if k <= n / 2 { k as f64 * df } else { (n - k) as f64 * df };
        if f < lo || f >= hi {
            *bin = Complex::new(F::zero(), F::zero());
        }
    }
    ifft_unnormalized(&mut spectrum);
    let scale = F::one() / F::of(n as f64);
    spectrum.iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn sine(n: usize, fs: f64, f: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / fs + phase).sin())
            .collect()
    }

    #[test]
    fn periodogram_bins_sum_to_mean_square() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let total: f64 = periodogram(&x).iter().sum();
        let ms: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((total - ms).abs() < 1e-12 * ms.max(1.0));
    }

    #[test]
    fn unit_sinusoid_band_power_is_half() {
        // 10 Hz is exactly bin 20 at fs=128, n=256.
        let x = sine(256, 128.0, 10.0, 1.0, 0.4);
        let p = band_power(&x, 128.0, 8.0, 12.0);
        assert!((p - 0.5).abs() < 1e-12, "band power {p}");
        let outside = band_power(&x, 128.0, 12.0, 30.0);
        assert!(outside < 1e-20, "leakage {outside}");
    }

    #[test]
    fn band_power_gradient_matches_finite_differences() {
        let bands = [(1.0, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, 45.0)];
        let fs = 100.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut x: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..bands.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let (_, cache) = band_powers_cached(&x, fs, &bands);
        let grad = band_powers_backward(&cache, fs, &bands, &upstream);

        let h = 1e-6;
        let objective = |x: &[f64]| -> f64 {
            let (p, _) = band_powers_cached(x, fs, &bands);
            p.iter().zip(&upstream).map(|(a, b)| a * b).sum()
        };
        for i in (0..x.len()).step_by(13) {
            let orig = x[i];
            x[i] = orig + h;
            let up = objective(&x);
            x[i] = orig - h;
            let down = objective(&x);
            x[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-7 * fd.abs().max(grad[i].abs()).max(1e-3),
                "grad mismatch at {i}: fd {fd} vs analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn welch_peak_at_tone_and_parseval_for_noise() {
        let fs = 256.0;
        let x = sine(4096, fs, 32.0, 1.0, 0.0);
        let (freqs, psd) = welch_psd(&x, fs, 256);
        let peak = psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(freqs[peak], 32.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..8192).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (freqs, psd) = welch_psd(&noise, fs, 256);
        let df = freqs[1] - freqs[0];
        let integral: f64 = psd.iter().sum::<f64>() * df;
        let variance = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        assert!(
            (integral - variance).abs() < 0.05 * variance,
            "integral {integral} vs variance {variance}"
        );
    }

    #[test]
    fn welch_zero_signal_is_zero() {
        let x = vec![0.0f64; 512];
        let (_, psd) = welch_psd(&x, 100.0, 256);
        assert!(psd.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn brickwall_keeps_inband_and_kills_outband() {
        let fs = 128.0;
        let x: Vec<f64> = sine(512, fs, 10.0, 1.0, 0.2)
            .iter()
            .zip(sine(512, fs, 40.0, 1.0, 1.1))
            .map(|(a, b)| a + b)
            .collect();
        let y = bandpass_brickwall(&x, fs, 8.0, 12.0);
        let inband = band_power(&y, fs, 8.0, 12.0);
        let outband = band_power(&y, fs, 30.0, 45.0);
        assert!((inband - 0.5).abs() < 1e-10);
        assert!(outband < 1e-20);
    }

    #[test]
    fn f32_instantiation_is_consistent() {
        let x64 = sine(256, 128.0, 10.0, 1.0, 0.3);
        let x32: Vec<f32> = x64.iter().map(|&v| v as f32).collect();
        let p64 = band_power(&x64, 128.0, 8.0, 12.0);
        let p32 = band_power(&x32, 128.0, 8.0, 12.0);
        assert!((p64 as f32 - p32).abs() < 1e-4);
    }
}
