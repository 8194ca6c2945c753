//! Paired two-sided Wilcoxon signed-rank test.
//!
//! Zero differences are dropped, tied magnitudes receive average ranks, and
//! the null distribution is exact (dynamic program over doubled ranks, which
//! stay integral under average ties) up to `EXACT_LIMIT` effective pairs.
//! Larger samples use the normal approximation with tie and continuity
//! corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest `n_effective` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

/// Outcome of a signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(T+, T-)`, the conventional W statistic.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

/// Average ranks of `values` (ascending), with ties sharing their mean rank.
/// Returns ranks plus the tie-group sizes for the variance correction.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end share the average 1-based rank.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        tie_sizes.push(end - start);
        start = end;
    }
    (ranks, tie_sizes)
}

/// Exact two-sided p-value for observing `t_plus` given the rank multiset.
///
/// Counts sign assignments by dynamic programming over doubled ranks so the
/// halves produced by average ranks stay integral. Exact for `n <= 63`.
fn exact_p_two_sided(ranks: &[f64], t_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let denom = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * t_plus).round() as usize;
    let below: u64 = counts[..=observed].iter().sum();
    let above: u64 = counts[observed..].iter().sum();
    let p = 2.0 * (below.min(above) as f64) / denom;
    p.min(1.0)
}

/// Two-sided paired Wilcoxon signed-rank test of `a` vs `b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::numerical("non-finite difference in paired sample"));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::validation(
            "all paired differences are zero; the test is undefined",
        ));
    }

    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, tie_sizes) = average_ranks(&magnitudes);
    let t_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&r, _)| r)
        .sum();
    let t_minus: f64 = n as f64 * (n as f64 + 1.0) / 2.0 - t_plus;
    let statistic = t_plus.min(t_minus);

    if n <= EXACT_LIMIT {
        let p_value = exact_p_two_sided(&ranks, t_plus);
        Ok(TestResult {
            statistic,
            p_value,
            n_effective: n,
            method: TestMethod::Exact,
        })
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| {
                let t = t as f64;
                (t * t * t - t) / 48.0
            })
            .sum();
        let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if variance <= 0.0 {
            return Err(Error::numerical("degenerate rank variance"));
        }
        let dev = t_plus - mean;
        // Continuity correction of 0.5 toward the mean.
        let corrected = dev - 0.5 * dev.signum();
        let z = corrected / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let p_value = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
        Ok(TestResult {
            statistic,
            p_value,
            n_effective: n,
            method: TestMethod::NormalApprox,
        })
    }
}

/// Brute-force reference: enumerates all `2^n` sign assignments.
///
/// Intended for verification against the dynamic-program path; only feasible
/// for small `n`.
pub fn wilcoxon_exact_by_enumeration(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Err(Error::validation("all paired differences are zero"));
    }
    assert!(n <= 20, "enumeration oracle limited to n <= 20");
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, _) = average_ranks(&magnitudes);
    let t_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&r, _)| r)
        .sum();
    let t_minus: f64 = n as f64 * (n as f64 + 1.0) / 2.0 - t_plus;

    let mut below = 0u64;
    let mut above = 0u64;
    let eps = 1e-9;
    for mask in 0u64..(1u64 << n) {
        let t: f64 = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if t <= t_plus + eps {
            below += 1;
        }
        if t >= t_plus - eps {
            above += 1;
        }
    }
    let denom = 2f64.powi(n as i32);
    let p_value = (2.0 * (below.min(above) as f64) / denom).min(1.0);
    Ok(TestResult {
        statistic: t_plus.min(t_minus),
        p_value,
        n_effective: n,
        method: TestMethod::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn identical_samples_are_rejected() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &a),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn five_positive_differences_give_exact_p() {
        // One-sided tail is 1/32; two-sided doubles it.
        let a = [2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::Exact);
        assert_eq!(r.n_effective, 5);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15, "p = {}", r.p_value);
    }

    #[test]
    fn dp_matches_enumeration_with_ties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100);
        for case in 0..50 {
            let n = rng.gen_range(2..=12);
            // Quantized values force duplicate magnitudes and zero diffs.
            let a: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(-8i32..8) as f64) * 0.5)
                .collect();
            let b: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(-8i32..8) as f64) * 0.5)
                .collect();
            let fast = wilcoxon_signed_rank(&a, &b);
            let slow = wilcoxon_exact_by_enumeration(&a, &b);
            match (fast, slow) {
                (Ok(f), Ok(s)) => {
                    assert!(
                        (f.p_value - s.p_value).abs() < 1e-12,
                        "case {case}: dp {} vs enum {}",
                        f.p_value,
                        s.p_value
                    );
                    assert_eq!(f.statistic, s.statistic, "case {case}");
                }
                (Err(_), Err(_)) => {}
                other => panic!("case {case}: disagreement {other:?}"),
            }
        }
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0) + 0.3).collect();
        let b: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
        assert!(r.p_value < 0.01, "strong shift should be significant");

        let c: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let d: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r2 = wilcoxon_signed_rank(&c, &d).unwrap();
        assert!(r2.p_value > 0.01, "independent noise should not be tiny-p");
    }

    #[test]
    fn exact_boundary_is_25() {
        let a: Vec<f64> = (0..25).map(|i| i as f64 + 1.5).collect();
        let b: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert_eq!(
            wilcoxon_signed_rank(&a, &b).unwrap().method,
            TestMethod::Exact
        );
        let a: Vec<f64> = (0..26).map(|i| i as f64 + 1.5).collect();
        let b: Vec<f64> = (0..26).map(|i| i as f64).collect();
        assert_eq!(
            wilcoxon_signed_rank(&a, &b).unwrap().method,
            TestMethod::NormalApprox
        );
    }
}
