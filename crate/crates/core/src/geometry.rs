//! Affine-invariant geometry of symmetric positive definite matrices.
//!
//! Covariances live on the SPD manifold. This module provides the pieces
//! the classification pipeline is built from: Ledoit–Wolf shrinkage, the
//! affine-invariant distance, the Fréchet (geometric) mean, the tangent-space
//! embedding and re-centering to the identity.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigen, sym_eigen_from, Matrix, SymEigen};

const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// A symmetric positive definite matrix.
///
/// Symmetry (relative Frobenius asymmetry ≤ 1e-12) and positivity (a
/// successful Cholesky factorization) are checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        if m.asymmetry() > 1e-12 {
            return Err(Error::NotSymmetric);
        }
        let m = m.symmetrized();
        cholesky(&m)?;
        Ok(Self(m))
    }

    /// Wraps a matrix that is SPD by construction (a congruence or spectral
    /// function of an SPD matrix). Only symmetrizes.
    pub(crate) fn from_trusted(m: Matrix) -> Self {
        debug_assert!(m.is_square());
        Self(m.symmetrized())
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diag(diag))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn eigen(&self) -> SymEigen {
        sym_eigen(&self.0)
    }

    pub fn sqrt(&self) -> SpdMatrix {
        Self::from_trusted(self.eigen().map(libm::sqrt))
    }

    pub fn inv_sqrt(&self) -> SpdMatrix {
        Self::from_trusted(self.eigen().map(|v| 1.0 / libm::sqrt(v)))
    }

    pub fn inverse(&self) -> SpdMatrix {
        Self::from_trusted(self.eigen().map(|v| 1.0 / v))
    }

    /// Matrix logarithm (symmetric, not necessarily positive definite).
    pub fn log(&self) -> Matrix {
        self.eigen().map(libm::log)
    }

    /// Matrix exponential of a symmetric matrix.
    pub fn exp_sym(s: &Matrix) -> SpdMatrix {
        Self::from_trusted(sym_eigen(s).map(libm::exp))
    }

    /// `Wᵀ C W`. Errors if the result is not positive definite (singular `W`).
    pub fn congruence(&self, w: &Matrix) -> Result<SpdMatrix> {
        if w.rows() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: w.rows(),
            });
        }
        let m = self.0.congruence(w).symmetrized();
        cholesky(&m)?;
        Ok(Self(m))
    }

    /// `S C S` for symmetric `S` of matching size; positive by construction
    /// when `S` is invertible.
    pub(crate) fn sandwich(&self, s: &SpdMatrix) -> SpdMatrix {
        Self::from_trusted(s.0.matmul(&self.0).matmul(&s.0))
    }
}

/// How the shrinkage intensity is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// Data-driven Ledoit–Wolf intensity.
    LedoitWolf,
    /// Fixed intensity in `[0, 1]` (diagnostic override).
    Fixed(f64),
}

/// Ledoit–Wolf shrinkage intensity for the uncentered covariance of a
/// `P × T` epoch, clamped to `[0, 1]`.
pub fn ledoit_wolf_shrinkage(x: &Matrix) -> Result<f64> {
    let cov = empirical_covariance(x)?;
    Ok(lw_intensity(x, &cov))
}

fn empirical_covariance(x: &Matrix) -> Result<Matrix> {
    let t = x.cols();
    if t < 2 {
        return Err(Error::DegenerateInput { samples: t });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let p = x.rows();
    let mut c = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = crate::linalg::dot(x.row(i), x.row(j)) / t as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

fn lw_intensity(x: &Matrix, cov: &Matrix) -> f64 {
    let (p, t) = (x.rows(), x.cols());
    let mu = cov.trace() / p as f64;
    let cov_sq = cov.as_slice().iter().map(|v| v * v).sum::<f64>();
    // ‖S − μI‖²_F / p
    let delta = (cov_sq - 2.0 * mu * cov.trace() + p as f64 * mu * mu) / p as f64;
    if !(delta > 0.0) {
        return 0.0;
    }
    // Σ_t ‖x_t x_tᵀ − S‖²_F / (p T²), with ‖x_t x_tᵀ‖_F = ‖x_t‖²
    let mut fourth = 0.0;
    for k in 0..t {
        let sq: f64 = (0..p).map(|i| x[(i, k)] * x[(i, k)]).sum();
        fourth += sq * sq;
    }
    let beta = (fourth - t as f64 * cov_sq) / (p as f64 * (t * t) as f64);
    (beta.min(delta) / delta).clamp(0.0, 1.0)
}

/// Regularized covariance `(1 − s) XXᵀ/T + s μ I` of a `P × T` epoch with
/// the Ledoit–Wolf intensity `s` and `μ = tr(C)/P`.
pub fn shrink_covariance(x: &Matrix) -> Result<SpdMatrix> {
    shrink_covariance_with(x, Shrinkage::LedoitWolf)
}

pub fn shrink_covariance_with(x: &Matrix, shrinkage: Shrinkage) -> Result<SpdMatrix> {
    let cov = empirical_covariance(x)?;
    let s = match shrinkage {
        Shrinkage::LedoitWolf => lw_intensity(x, &cov),
        Shrinkage::Fixed(s) => {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument("shrinkage must lie in [0, 1]".into()));
            }
            s
        }
    };
    let p = cov.rows();
    let mu = cov.trace() / p as f64;
    let shrunk = Matrix::from_fn(p, p, |i, j| {
        let v = (1.0 - s) * cov[(i, j)];
        if i == j {
            v + s * mu
        } else {
            v
        }
    });
    SpdMatrix::new(shrunk)
}

fn check_dims(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Affine-invariant distance `sqrt(Σ log² λ_k)`, `λ_k` the eigenvalues of
/// `C1⁻¹ C2`.
pub fn riemannian_distance(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64> {
    check_dims(c1, c2)?;
    let isq = c1.inv_sqrt();
    let w = c2.sandwich(&isq);
    let sum: f64 = w
        .eigen()
        .values
        .iter()
        .map(|&l| {
            let lg = libm::log(l);
            lg * lg
        })
        .sum();
    Ok(libm::sqrt(sum))
}

/// Tangent vector `Upper(log(C̄^{-1/2} C C̄^{-1/2}))`.
///
/// Diagonal entries have weight 1 and off-diagonal entries √2, so the
/// Euclidean norm equals the affine-invariant distance to the reference.
/// Entries are the upper triangle in row order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangentVector {
    values: Vec<f64>,
    reference_dim: usize,
}

impl TangentVector {
    pub fn new(values: Vec<f64>, reference_dim: usize) -> Result<Self> {
        let expected = tangent_len(reference_dim);
        if values.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            reference_dim,
        })
    }

    pub fn zeros(reference_dim: usize) -> Self {
        Self {
            values: alloc::vec![0.0; tangent_len(reference_dim)],
            reference_dim,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn reference_dim(&self) -> usize {
        self.reference_dim
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

#[inline]
pub const fn tangent_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Weighted upper-triangle vectorization of a symmetric matrix.
pub fn upper(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut out = Vec::with_capacity(tangent_len(n));
    for i in 0..n {
        out.push(m[(i, i)]);
        for j in (i + 1)..n {
            out.push(SQRT_2 * m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`upper`].
pub fn unupper(v: &[f64], n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = v[k];
        k += 1;
        for j in (i + 1)..n {
            let x = v[k] / SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

pub fn tangent_map(c: &SpdMatrix, reference: &SpdMatrix) -> Result<TangentVector> {
    check_dims(c, reference)?;
    let isq = reference.inv_sqrt();
    Ok(tangent_map_whitened(&c.sandwich(&isq)))
}

/// Tangent vector of a covariance already whitened by its reference
/// (reference = identity).
pub fn tangent_map_whitened(c: &SpdMatrix) -> TangentVector {
    TangentVector {
        values: upper(&c.log()),
        reference_dim: c.dim(),
    }
}

/// Exact inverse of [`tangent_map`]: `C̄^{1/2} exp(unupper(z)) C̄^{1/2}`.
pub fn tangent_unmap(z: &TangentVector, reference: &SpdMatrix) -> Result<SpdMatrix> {
    if z.reference_dim != reference.dim() {
        return Err(Error::DimMismatch {
            expected: reference.dim(),
            found: z.reference_dim,
        });
    }
    let s = unupper(&z.values, z.reference_dim);
    Ok(SpdMatrix::exp_sym(&s).sandwich(&reference.sqrt()))
}

/// Outcome of the geometric mean iteration.
#[derive(Debug, Clone)]
pub struct MeanEstimate {
    pub mean: SpdMatrix,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MeanOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Fréchet mean under the affine-invariant metric.
///
/// Fixed point `C̄ ← C̄^{1/2} exp(θ·mean_i log(C̄^{-1/2} C_i C̄^{-1/2})) C̄^{1/2}`
/// started from the arithmetic mean. The step `θ = ‖G‖²/⟨G, H G⟩` minimizes
/// the local quadratic model of the cost along the gradient `G`; it equals
/// the unit step for commuting sets and shrinks for widely spread ones. Stops
/// as soon as the Riemannian gradient norm `‖mean_i log(·)‖_F` is at most
/// `tol`; the reduction over the set runs in input order.
pub fn geometric_mean(set: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<MeanEstimate> {
    let first = set
        .first()
        .ok_or_else(|| Error::InvalidArgument("geometric mean of an empty set".into()))?;
    let n = first.dim();
    for c in set {
        check_dims(first, c)?;
    }
    if set.len() == 1 {
        return Ok(MeanEstimate {
            mean: first.clone(),
            iterations: 0,
            final_gradient_norm: 0.0,
        });
    }
    let mut acc = Matrix::zeros(n, n);
    for c in set {
        acc = acc.add(c.matrix());
    }
    let mut mean = SpdMatrix::from_trusted(acc.scale(1.0 / set.len() as f64));

    // Eigenbases of the whitened matrices from the previous iteration.
    let mut bases: Vec<Option<Matrix>> = alloc::vec![None; set.len()];
    let mut logs: Vec<Vec<f64>> = alloc::vec![Vec::new(); set.len()];
    let mut iterations = 0;
    loop {
        let eig = mean.eigen();
        let sq = SpdMatrix::from_trusted(eig.map(libm::sqrt));
        let isq = SpdMatrix::from_trusted(eig.map(|v| 1.0 / libm::sqrt(v)));
        let mut grad = Matrix::zeros(n, n);
        for (i, c) in set.iter().enumerate() {
            let w = c.sandwich(&isq);
            let e = match bases[i].as_ref() {
                Some(b) => sym_eigen_from(w.matrix(), b),
                None => w.eigen(),
            };
            grad = grad.add(&e.map(libm::log));
            logs[i] = e.values.iter().map(|&v| libm::log(v)).collect();
            bases[i] = Some(e.vectors);
        }
        let grad = grad.scale(1.0 / set.len() as f64);
        let norm = grad.frobenius_norm();
        if norm <= tol {
            return Ok(MeanEstimate {
                mean,
                iterations,
                final_gradient_norm: norm,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        let curvature: f64 = bases
            .iter()
            .zip(&logs)
            .map(|(b, l)| hessian_form(&grad, b.as_ref().expect("set in this iteration"), l))
            .sum::<f64>()
            / set.len() as f64;
        let step = (norm * norm / curvature).min(1.0);
        mean = SpdMatrix::exp_sym(&grad.scale(step)).sandwich(&sq);
        iterations += 1;
    }
}

/// `⟨G, H G⟩` for the Hessian `H` of `½δ_R²(·, C)` at the reference, given
/// the eigenbasis `U` and log-eigenvalues `l` of the whitened `C`:
/// `Σ_jk (UᵀGU)_jk² · φ((l_j − l_k)/2)` with `φ(x) = x·coth(x)`.
fn hessian_form(g: &Matrix, u: &Matrix, l: &[f64]) -> f64 {
    let gt = u.transpose().matmul(g).matmul(u);
    let n = l.len();
    let mut sum = 0.0;
    for j in 0..n {
        for k in 0..n {
            let x = 0.5 * (l[j] - l[k]);
            let phi = if x.abs() < 1e-8 { 1.0 } else { x / libm::tanh(x) };
            sum += gt[(j, k)] * gt[(j, k)] * phi;
        }
    }
    sum
}

/// Whitens every matrix by the reference: `C̄^{-1/2} C_i C̄^{-1/2}`.
pub fn recenter(set: &[SpdMatrix], mean: &SpdMatrix) -> Result<Vec<SpdMatrix>> {
    for c in set {
        check_dims(mean, c)?;
    }
    let isq = mean.inv_sqrt();
    Ok(set.iter().map(|c| c.sandwich(&isq)).collect())
}
