//! Small dense symmetric eigenproblems via cyclic Jacobi rotations.
//!
//! Channel counts are tiny (tens at most), so an in-crate Jacobi sweep is
//! plenty fast, fully deterministic, and works at any scalar width.

use crate::mat::Mat;
use crate::num::Real;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// matrix columns. Only the lower/upper symmetric content of `a` is used.
pub fn sym_eigen<F: Real>(a: &Mat<F>) -> (Vec<F>, Mat<F>) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Mat::from_fn(n, n, |r, c| if r == c { F::one() } else { F::zero() });

    let frobenius = m.frobenius_norm();
    let tol = F::epsilon() * frobenius.max(F::one());
    let max_sweeps = 64;

    for _ in 0..max_sweeps {
        let mut off = F::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * F::of(1e-3) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (F::of(2.0) * apq);
                let t = if theta >= F::zero() {
                    F::one() / (theta + (F::one() + theta * theta).sqrt())
                } else {
                    -F::one() / (-theta + (F::one() + theta * theta).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    (eigenvalues, eigenvectors)
}

/// `(m mᵀ)^(-1/2) · m`, the symmetric orthogonalization used by FastICA.
///
/// Eigenvalues of `m mᵀ` are clamped away from zero so a freak singular
/// iterate cannot produce non-finite output.
pub fn symmetric_orthogonalize<F: Real>(m: &Mat<F>) -> Mat<F> {
    let gram = m.matmul_transposed(m);
    let (eigenvalues, vectors) = sym_eigen(&gram);
    let floor = eigenvalues
        .first()
        .copied()
        .unwrap_or(F::zero())
        .max(F::one())
        * F::of(1e-24);
    let n = gram.rows();
    // vectors * diag(lambda^-1/2) * vectorsᵀ
    let mut inv_sqrt = Mat::zeros(n, n);
    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        let w = F::one() / lambda.max(floor).sqrt();
        for r in 0..n {
            for c in 0..n {
                inv_sqrt[(r, c)] += vectors[(r, idx)] * w * vectors[(c, idx)];
            }
        }
    }
    inv_sqrt.matmul(m)
}
