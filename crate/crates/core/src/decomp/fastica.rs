//! FastICA with PCA whitening and symmetric orthogonalization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{sym_eigen, symmetric_orthogonalize};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::Real;

/// Relative eigenvalue threshold below which directions are treated as rank
/// deficient and left to the residual.
pub const RANK_EPS: f64 = 1e-12;

/// Contrast nonlinearity for the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcaNonlinearity {
    /// g(u) = tanh(u); robust default.
    Tanh,
    /// g(u) = u^3; kurtosis-driven, cheaper but less robust.
    Cube,
}

/// PCA whitening of a centered signal.
#[derive(Debug, Clone)]
pub struct Whitening<F> {
    /// `d x C` projection onto unit-variance principal directions.
    pub forward: Mat<F>,
    /// `C x d` map from whitened space back to channel space.
    pub inverse: Mat<F>,
}

/// Computes the whitening pair for a centered `C x T` matrix, dropping
/// eigendirections below `RANK_EPS` times the largest eigenvalue.
pub fn whiten<F: Real>(centered: &Mat<F>) -> Whitening<F> {
    let c = centered.rows();
    let t = centered.cols();
    let mut cov = centered.matmul_transposed(centered);
    cov.scale(F::one() / F::of((t.max(2) - 1) as f64));
    let (eigenvalues, vectors) = sym_eigen(&cov);
    let cutoff = eigenvalues.first().copied().unwrap_or(F::zero()) * F::of(RANK_EPS);
    let kept: Vec<usize> = (0..c)
        .filter(|&i| eigenvalues[i] > cutoff && eigenvalues[i] > F::zero())
        .collect();
    let d = kept.len();
    let forward = Mat::from_fn(d, c, |r, col| {
        vectors[(col, kept[r])] / eigenvalues[kept[r]].sqrt()
    });
    let inverse = Mat::from_fn(c, d, |r, col| {
        vectors[(r, kept[col])] * eigenvalues[kept[col]].sqrt()
    });
    Whitening { forward, inverse }
}

/// Result of a converged FastICA run on one trial.
#[derive(Debug, Clone)]
pub struct IcaOutcome<F> {
    /// `d x T` unmixed source time courses.
    pub sources: Mat<F>,
    /// `C x d` mixing columns mapped back through the whitening inverse.
    pub mixing: Mat<F>,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Symmetric FastICA on a centered `C x T` matrix.
///
/// The initial unmixing matrix is drawn from `rng` and orthogonalized, so a
/// fixed seed reproduces the outcome bit-for-bit.
///
/// Stabilized variant: when the fixed-point iteration stalls without meeting
/// the tolerance (typical when several whitened directions are effectively
/// Gaussian, leaving the rotation inside their subspace unidentifiable), the
/// update step is progressively damped until the iteration settles on one
/// orthonormal basis of that subspace. Identifiable sources converge before
/// any damping kicks in.
pub fn fast_ica<F: Real>(
    centered: &Mat<F>,
    nonlinearity: IcaNonlinearity,
    max_iter: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<IcaOutcome<F>> {
    let whitening = whiten(centered);
    let d = whitening.forward.rows();
    let t = centered.cols();
    if d == 0 {
        return Ok(IcaOutcome {
            sources: Mat::zeros(0, t),
            mixing: Mat::zeros(centered.rows(), 0),
            iterations: 0,
            final_delta: 0.0,
        });
    }
    let z = whitening.forward.matmul(centered);

    let init = Mat::from_fn(d, d, |_, _| {
        // Box-Muller keeps the draw identical across scalar widths.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        F::of((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
    });
    let mut w = symmetric_orthogonalize(&init);

    let inv_t = F::one() / F::of(t as f64);
    let mut delta = f64::INFINITY;
    let mut best_delta = f64::INFINITY;
    let mut stalled = 0usize;
    let mut damping = 1.0f64;
    for iter in 1..=max_iter {
        let u = w.matmul(&z); // d x T projections
        let mut g = Mat::zeros(d, t);
        let mut g_prime_mean = vec![F::zero(); d];
        for r in 0..d {
            let mut acc = F::zero();
            for (dst, &v) in g.row_mut(r).iter_mut().zip(u.row(r)) {
                match nonlinearity {
                    IcaNonlinearity::Tanh => {
                        let th = v.tanh();
                        *dst = th;
                        acc += F::one() - th * th;
                    }
                    IcaNonlinearity::Cube => {
                        *dst = v * v * v;
                        acc += F::of(3.0) * v * v;
                    }
                }
            }
            g_prime_mean[r] = acc * inv_t;
        }
        let mut w_new = g.matmul_transposed(&z);
        w_new.scale(inv_t);
        for r in 0..d {
            let shrink = g_prime_mean[r];
            for (dst, &old) in w_new.row_mut(r).iter_mut().zip(w.row(r)) {
                *dst -= shrink * old;
            }
        }
        if damping < 1.0 {
            // Blend toward the previous estimate to break limit cycles.
            let mu = F::of(damping);
            let keep = F::one() - mu;
            for r in 0..d {
                for (dst, &old) in w_new.row_mut(r).iter_mut().zip(w.row(r)) {
                    *dst = mu * *dst + keep * old;
                }
            }
        }
        let w_next = symmetric_orthogonalize(&w_new);

        delta = (0..d)
            .map(|r| {
                let dot = crate::mat::dot(w_next.row(r), w.row(r)).to_f64_lossy();
                (1.0 - dot.abs()).abs()
            })
            .fold(0.0f64, f64::max);
        w = w_next;
        if delta < tol {
            let sources = w.matmul(&z);
            let mixing = whitening.inverse.matmul_transposed(&w);
            return Ok(IcaOutcome {
                sources,
                mixing,
                iterations: iter,
                final_delta: delta,
            });
        }
        if delta < 0.9 * best_delta {
            best_delta = delta;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 8 {
                damping *= 0.5;
                stalled = 0;
            }
        }
    }
    Err(Error::Convergence {
        algorithm: "FastICA",
        iterations: max_iter,
        last_delta: delta,
        tolerance: tol,
    })
}
