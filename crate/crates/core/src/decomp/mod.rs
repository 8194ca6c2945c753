//! Trial decomposition into accumulated rank-1 spatial-temporal components.
//!
//! Every backend factors a `C x T` trial into `M` pairs of a spatial pattern
//! `a_i` (length `C`) and a temporal pattern `b_i` (length `T`), plus a
//! residual that is always materialized as the last component. The component
//! sum reproduces the input to numerical precision by construction, so any
//! reweighting of components is an exact linear edit of the trial.

mod fastica;
pub mod linalg;

pub use fastica::{fast_ica, whiten, IcaNonlinearity, IcaOutcome, Whitening, RANK_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{norm2, Mat};
use crate::num::Real;
use crate::signal::{RngSeed, Trial};

/// Decomposition backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Svd,
    Ica,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Svd => "svd",
            Method::Ica => "ica",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "svd" => Ok(Method::Svd),
            "ica" => Ok(Method::Ica),
            other => Err(Error::validation(format!("unknown method '{other}'"))),
        }
    }
}

/// Decomposition settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompConfig {
    pub method: Method,
    pub ica_max_iter: usize,
    pub ica_tol: f64,
    pub ica_nonlinearity: IcaNonlinearity,
    /// Subtract the per-channel mean before PCA/ICA. SVD always factors the
    /// raw matrix.
    pub center: bool,
}

impl DecompConfig {
    pub fn new(method: Method) -> Self {
        DecompConfig {
            method,
            ica_max_iter: 200,
            ica_tol: 1e-4,
            ica_nonlinearity: IcaNonlinearity::Tanh,
            center: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ica_max_iter < 1 {
            return Err(Error::validation("ica_max_iter must be >= 1"));
        }
        if !(self.ica_tol > 0.0) {
            return Err(Error::validation("ica_tol must be > 0"));
        }
        Ok(())
    }
}

/// Convergence record for an ICA decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaInfo {
    pub iterations: usize,
    pub final_delta: f64,
}

/// `N = M + 1` components of one trial: `M` rank-1 factor pairs plus the
/// residual stored as the final component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet<F> {
    method: Method,
    fs: f64,
    components: Vec<Mat<F>>,
    spatial: Vec<Vec<F>>,
    temporal: Vec<Vec<F>>,
    energies: Vec<F>,
    ica: Option<IcaInfo>,
}

impl<F: Real> ComponentSet<F> {
    /// Number of components including the residual.
    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// Number of rank-1 factor pairs (excludes the residual).
    pub fn m(&self) -> usize {
        self.components.len() - 1
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn components(&self) -> &[Mat<F>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Mat<F> {
        &self.components[i]
    }

    pub fn residual(&self) -> &Mat<F> {
        self.components.last().expect("residual always present")
    }

    pub fn spatial(&self) -> &[Vec<F>] {
        &self.spatial
    }

    pub fn temporal(&self) -> &[Vec<F>] {
        &self.temporal
    }

    /// Frobenius norm of each component, residual included.
    pub fn energies(&self) -> &[F] {
        &self.energies
    }

    pub fn ica_info(&self) -> Option<IcaInfo> {
        self.ica
    }
}

fn channel_means<F: Real>(x: &Mat<F>) -> Vec<F> {
    let inv = F::one() / F::of(x.cols() as f64);
    (0..x.rows())
        .map(|r| x.row(r).iter().copied().sum::<F>() * inv)
        .collect()
}

fn subtract_means<F: Real>(x: &Mat<F>, means: &[F]) -> Mat<F> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let m = means[r];
        for v in out.row_mut(r) {
            *v -= m;
        }
    }
    out
}

struct FactorPairs<F> {
    spatial: Vec<Vec<F>>,
    temporal: Vec<Vec<F>>,
    ica: Option<IcaInfo>,
}

fn pca_factors<F: Real>(x: &Mat<F>, cfg: &DecompConfig) -> FactorPairs<F> {
    let centered = if cfg.center {
        subtract_means(x, &channel_means(x))
    } else {
        x.clone()
    };
    let t = x.cols();
    let mut cov = centered.matmul_transposed(&centered);
    cov.scale(F::one() / F::of((t.max(2) - 1) as f64));
    let (eigenvalues, vectors) = linalg::sym_eigen(&cov);
    let cutoff = eigenvalues.first().copied().unwrap_or(F::zero()) * F::of(RANK_EPS);
    let mut spatial = Vec::new();
    let mut temporal = Vec::new();
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= F::zero() {
            continue;
        }
        let a: Vec<F> = (0..x.rows()).map(|r| vectors[(r, i)]).collect();
        let b = centered.tr_matvec(&a);
        spatial.push(a);
        temporal.push(b);
    }
    FactorPairs {
        spatial,
        temporal,
        ica: None,
    }
}

fn svd_factors<F: Real>(x: &Mat<F>) -> FactorPairs<F> {
    // Left singular vectors from the C x C Gram matrix; b_i = Xᵀ u_i equals
    // sigma_i v_i without ever dividing by a singular value.
    let gram = x.matmul_transposed(x);
    let (eigenvalues, vectors) = linalg::sym_eigen(&gram);
    let cutoff = eigenvalues.first().copied().unwrap_or(F::zero()) * F::of(RANK_EPS);
    let mut spatial = Vec::new();
    let mut temporal = Vec::new();
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= F::zero() {
            continue;
        }
        let u: Vec<F> = (0..x.rows()).map(|r| vectors[(r, i)]).collect();
        let b = x.tr_matvec(&u);
        spatial.push(u);
        temporal.push(b);
    }
    FactorPairs {
        spatial,
        temporal,
        ica: None,
    }
}

fn ica_factors<F: Real>(x: &Mat<F>, cfg: &DecompConfig, seed: RngSeed) -> Result<FactorPairs<F>> {
    let centered = if cfg.center {
        subtract_means(x, &channel_means(x))
    } else {
        x.clone()
    };
    let mut rng = seed.rng();
    let outcome = fast_ica(
        &centered,
        cfg.ica_nonlinearity,
        cfg.ica_max_iter,
        cfg.ica_tol,
        &mut rng,
    )?;
    let d = outcome.sources.rows();
    let spatial: Vec<Vec<F>> = (0..d)
        .map(|i| (0..x.rows()).map(|r| outcome.mixing[(r, i)]).collect())
        .collect();
    let temporal: Vec<Vec<F>> = (0..d).map(|i| outcome.sources.row(i).to_vec()).collect();
    Ok(FactorPairs {
        spatial,
        temporal,
        ica: Some(IcaInfo {
            iterations: outcome.iterations,
            final_delta: outcome.final_delta,
        }),
    })
}

/// Decomposes one trial into `M + 1` components (the last is the residual).
///
/// Ordering: PCA/SVD components arrive sorted by decreasing eigen/singular
/// value; ICA components are sorted by decreasing Frobenius energy. Each
/// `(a_i, b_i)` pair is sign-flipped so the maximum-magnitude entry of `a_i`
/// is positive, which makes the output reproducible across runs.
pub fn decompose<F: Real>(
    trial: &Trial<F>,
    cfg: &DecompConfig,
    seed: RngSeed,
) -> Result<ComponentSet<F>> {
    cfg.validate()?;
    let x = trial.data();
    if trial.samples() <= trial.channels() {
        log::warn!(
            "decomposing a {}x{} trial: fewer samples than channels weakens the factorization",
            trial.channels(),
            trial.samples()
        );
    }

    let mut pairs = match cfg.method {
        Method::Pca => pca_factors(x, cfg),
        Method::Svd => svd_factors(x),
        Method::Ica => ica_factors(x, cfg, seed)?,
    };

    // Canonical sign: largest-magnitude entry of each spatial pattern positive.
    for (a, b) in pairs.spatial.iter_mut().zip(pairs.temporal.iter_mut()) {
        let mut idx = 0;
        for (j, v) in a.iter().enumerate() {
            if v.abs() > a[idx].abs() {
                idx = j;
            }
        }
        if a[idx] < F::zero() {
            for v in a.iter_mut() {
                *v = -*v;
            }
            for v in b.iter_mut() {
                *v = -*v;
            }
        }
    }

    if cfg.method == Method::Ica {
        // Energy of a rank-1 component is ||a|| * ||b||.
        let mut order: Vec<usize> = (0..pairs.spatial.len()).collect();
        let energy: Vec<F> = order
            .iter()
            .map(|&i| norm2(&pairs.spatial[i]) * norm2(&pairs.temporal[i]))
            .collect();
        order.sort_by(|&i, &j| {
            energy[j]
                .partial_cmp(&energy[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        pairs.spatial = order.iter().map(|&i| pairs.spatial[i].clone()).collect();
        pairs.temporal = order.iter().map(|&i| pairs.temporal[i].clone()).collect();
    }

    let mut components: Vec<Mat<F>> = pairs
        .spatial
        .iter()
        .zip(&pairs.temporal)
        .map(|(a, b)| Mat::outer(a, b))
        .collect();
    let mut residual = x.clone();
    for c in &components {
        residual.add_scaled(-F::one(), c);
    }
    components.push(residual);
    let energies = components.iter().map(|c| c.frobenius_norm()).collect();

    Ok(ComponentSet {
        method: cfg.method,
        fs: trial.fs(),
        components,
        spatial: pairs.spatial,
        temporal: pairs.temporal,
        energies,
        ica: pairs.ica,
    })
}

/// Weighted component sum `sum_i weights[i] * C_i` as a new trial.
pub fn reconstruct<F: Real>(cs: &ComponentSet<F>, weights: &[F]) -> Result<Trial<F>> {
    if weights.len() != cs.n() {
        return Err(Error::validation(format!(
            "{} weights for {} components",
            weights.len(),
            cs.n()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::validation("non-finite component weight"));
    }
    let (c, t) = cs.components[0].shape();
    let mut out = Mat::zeros(c, t);
    for (&w, comp) in weights.iter().zip(&cs.components) {
        out.add_scaled(w, comp);
    }
    Trial::new(out, cs.fs)
}
