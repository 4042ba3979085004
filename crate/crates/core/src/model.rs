//! Covariance → re-center → tangent space → logistic regression, with each
//! subject treated as its own domain.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{geometric_mean, tangent_len, tangent_map_whitened, MeanOptions, SpdMatrix};
use crate::linalg::{dot, Matrix};

pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainId {
    pub dataset: String,
    pub subject: u32,
}

/// Which epochs estimate the whitening mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeanScope {
    AllData,
    FirstSession,
    FirstRun,
    FirstHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Alignment {
    #[default]
    Recenter,
    /// Ablation: whitening replaced by the identity.
    None,
}

/// Per-epoch session and run ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochOrigin {
    pub session: u32,
    pub run: u32,
}

/// Calibration scope of a target subject: the first session if there are
/// several, else the first run if there are several, else the first half
/// of the epochs.
pub fn calibration_scope(origins: &[EpochOrigin]) -> (MeanScope, Vec<usize>) {
    let mut sessions: Vec<u32> = origins.iter().map(|o| o.session).collect();
    sessions.sort_unstable();
    sessions.dedup();
    if sessions.len() > 1 {
        let first = sessions[0];
        let idx = (0..origins.len()).filter(|&i| origins[i].session == first).collect();
        return (MeanScope::FirstSession, idx);
    }
    let mut runs: Vec<u32> = origins.iter().map(|o| o.run).collect();
    runs.sort_unstable();
    runs.dedup();
    if runs.len() > 1 {
        let first = runs[0];
        let idx = (0..origins.len()).filter(|&i| origins[i].run == first).collect();
        return (MeanScope::FirstRun, idx);
    }
    let half = (origins.len() / 2).max(1.min(origins.len()));
    (MeanScope::FirstHalf, (0..half).collect())
}

/// One subject's covariances with the mean used to whiten them.
#[derive(Debug, Clone)]
pub struct DomainRecord {
    pub id: DomainId,
    pub covariances: Vec<SpdMatrix>,
    pub labels: Vec<u8>,
    pub whitening_mean: SpdMatrix,
    pub mean_scope: MeanScope,
    pub alignment: Alignment,
}

impl DomainRecord {
    /// Training domain: whitening mean over all of its data.
    pub fn training(id: DomainId, covariances: Vec<SpdMatrix>, labels: Vec<u8>, alignment: Alignment) -> Result<Self> {
        let all: Vec<usize> = (0..covariances.len()).collect();
        Self::build(id, covariances, labels, alignment, MeanScope::AllData, &all)
    }

    /// Target domain: whitening mean over the calibration scope only.
    pub fn target(
        id: DomainId,
        covariances: Vec<SpdMatrix>,
        labels: Vec<u8>,
        origins: &[EpochOrigin],
        alignment: Alignment,
    ) -> Result<Self> {
        if origins.len() != covariances.len() {
            return Err(Error::DimMismatch {
                expected: covariances.len(),
                found: origins.len(),
            });
        }
        let (scope, idx) = calibration_scope(origins);
        Self::build(id, covariances, labels, alignment, scope, &idx)
    }

    fn build(
        id: DomainId,
        covariances: Vec<SpdMatrix>,
        labels: Vec<u8>,
        alignment: Alignment,
        scope: MeanScope,
        mean_idx: &[usize],
    ) -> Result<Self> {
        if labels.len() != covariances.len() {
            return Err(Error::DimMismatch {
                expected: covariances.len(),
                found: labels.len(),
            });
        }
        let dim = covariances
            .first()
            .map(SpdMatrix::dim)
            .ok_or_else(|| Error::InvalidArgument("domain without epochs".into()))?;
        let whitening_mean = match alignment {
            Alignment::None => SpdMatrix::identity(dim),
            Alignment::Recenter => {
                let subset: Vec<SpdMatrix> = mean_idx.iter().map(|&i| covariances[i].clone()).collect();
                let opts = MeanOptions::default();
                geometric_mean(&subset, opts.tol, opts.max_iter)?.mean
            }
        };
        Ok(Self {
            id,
            covariances,
            labels,
            whitening_mean,
            mean_scope: scope,
            alignment,
        })
    }

    pub fn dim(&self) -> usize {
        self.whitening_mean.dim()
    }

    /// Tangent vectors at the identity after whitening, one row per epoch.
    pub fn tangent_vectors(&self) -> Result<Matrix> {
        let dim = self.dim();
        let isq = self.whitening_mean.inv_sqrt();
        let d = tangent_len(dim);
        let mut z = Matrix::zeros(self.covariances.len(), d);
        for (i, c) in self.covariances.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
            let w = match self.alignment {
                Alignment::None => c.clone(),
                Alignment::Recenter => c.sandwich(&isq),
            };
            z.row_mut(i).copy_from_slice(tangent_map_whitened(&w).as_slice());
        }
        Ok(z)
    }
}

/// `f(w, b) = ½‖w‖² + C Σᵢ log(1 + exp(−yᵢ(w·zᵢ + b)))`, `yᵢ ∈ {−1, +1}`.
/// Parameters are packed as `[w; b]`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticObjective<'a> {
    pub z: &'a Matrix,
    pub y: &'a [f64],
    pub c: f64,
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl<'a> LogisticObjective<'a> {
    pub fn new(z: &'a Matrix, y: &'a [f64], c: f64) -> Self {
        Self { z, y, c }
    }

    fn margins(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.z.cols();
        let b = theta[d];
        (0..self.z.rows())
            .map(|i| self.y[i] * (dot(self.z.row(i), &theta[..d]) + b))
            .collect()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let d = self.z.cols();
        let reg = 0.5 * dot(&theta[..d], &theta[..d]);
        reg + self.c * self.margins(theta).iter().map(|&m| softplus(-m)).sum::<f64>()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.z.cols();
        let mut g = theta.to_vec();
        g[d] = 0.0;
        for (i, m) in self.margins(theta).into_iter().enumerate() {
            let coef = -self.c * self.y[i] * sigmoid(-m);
            for (gk, zk) in g[..d].iter_mut().zip(self.z.row(i)) {
                *gk += coef * zk;
            }
            g[d] += coef;
        }
        g
    }

    /// `H v` with `H = diag(1, …, 1, 0) + C Z̃ᵀ D Z̃`, `D = σ(m)(1 − σ(m))`.
    fn hessian_vec(&self, curvature: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.z.cols();
        let mut out = v.to_vec();
        out[d] = 0.0;
        for (i, &w) in curvature.iter().enumerate() {
            let row = self.z.row(i);
            let zv = dot(row, &v[..d]) + v[d];
            let s = self.c * w * zv;
            for (o, zk) in out[..d].iter_mut().zip(row) {
                *o += s * zk;
            }
            out[d] += s;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Truncated Newton: each step solves `H p = −g` by conjugate gradients to
/// a relative residual of `min(½, √‖g‖)`, then backtracks on the objective.
pub fn fit_logistic(z: &Matrix, labels: &[u8], c: f64, opts: &FitOptions) -> Result<LogisticFit> {
    if labels.len() != z.rows() {
        return Err(Error::DimMismatch {
            expected: z.rows(),
            found: labels.len(),
        });
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass);
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let obj = LogisticObjective::new(z, &y, c);
    let d = z.cols();
    let mut theta = vec![0.0; d + 1];
    let mut f = obj.value(&theta);
    let mut iterations = 0;
    loop {
        let g = obj.gradient(&theta);
        let gnorm = libm::sqrt(dot(&g, &g));
        if gnorm <= opts.tol {
            return Ok(finish(theta, iterations, gnorm));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: gnorm,
            });
        }
        let curvature: Vec<f64> = obj
            .margins(&theta)
            .iter()
            .map(|&m| {
                let s = sigmoid(m);
                s * (1.0 - s)
            })
            .collect();
        let forcing = gnorm.sqrt().min(0.5);
        let p = conjugate_gradient(|v| obj.hessian_vec(&curvature, v), &g, forcing * gnorm, 4 * (d + 1));
        let slope = dot(&g, &p);
        iterations += 1;
        if -slope <= 64.0 * f64::EPSILON * f.abs().max(1.0) {
            // Predicted decrease below the rounding of f: the quadratic
            // model is exact enough, take the full Newton step.
            theta.iter_mut().zip(&p).for_each(|(t, pk)| *t += pk);
            f = obj.value(&theta);
            continue;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&p).map(|(t, pk)| t + step * pk).collect();
            let ft = obj.value(&trial);
            if ft <= f + 1e-4 * step * slope {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Rounding floor of the objective: accept if already near-stationary.
            if gnorm <= 1e-6 {
                return Ok(finish(theta, iterations, gnorm));
            }
            return Err(Error::NoConvergence {
                iterations,
                residual: gnorm,
            });
        }
    }
}

fn finish(mut theta: Vec<f64>, iterations: usize, gradient_norm: f64) -> LogisticFit {
    let intercept = theta.pop().expect("intercept slot");
    LogisticFit {
        weights: theta,
        intercept,
        iterations,
        gradient_norm,
    }
}

/// Solves `A x = −g` for symmetric positive definite `A` given as a product.
fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, g: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.len();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if libm::sqrt(rr) <= tol {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    if x.iter().all(|v| *v == 0.0) {
        // Steepest descent if CG made no progress.
        return g.iter().map(|v| -v).collect();
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Classifier {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    /// Channel names of the feature space (empty when unknown).
    pub channels: Vec<String>,
    pub alignment: Alignment,
}

impl Classifier {
    pub fn dim(&self) -> usize {
        // Invert d = p(p+1)/2.
        let d = self.weights.len();
        let mut p = 0;
        while tangent_len(p) < d {
            p += 1;
        }
        p
    }
}

/// Stacks the tangent vectors of all training domains and fits the
/// logistic regression.
pub fn fit_pipeline(train: &[DomainRecord], c: f64) -> Result<Classifier> {
    let tangents = train
        .iter()
        .map(|d| Ok((d.tangent_vectors()?, d.labels.clone())))
        .collect::<Result<Vec<_>>>()?;
    let alignment = train.first().map(|d| d.alignment).unwrap_or_default();
    fit_tangents(&tangents, c, alignment)
}

/// Same as [`fit_pipeline`] on precomputed per-domain tangent vectors.
pub fn fit_tangents(domains: &[(Matrix, Vec<u8>)], c: f64, alignment: Alignment) -> Result<Classifier> {
    let d = domains
        .first()
        .map(|(z, _)| z.cols())
        .ok_or(Error::SingleClass)?;
    let n: usize = domains.iter().map(|(z, _)| z.rows()).sum();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (z, l) in domains {
        if z.cols() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: z.cols(),
            });
        }
        data.extend_from_slice(z.as_slice());
        labels.extend_from_slice(l);
    }
    let z = Matrix::new(n, d, data)?;
    let fit = fit_logistic(&z, &labels, c, &FitOptions::default())?;
    Ok(Classifier {
        weights: fit.weights,
        intercept: fit.intercept,
        c,
        channels: Vec::new(),
        alignment,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    /// Probability of class 1.
    pub probabilities: Vec<f64>,
}

/// Classifies the target epochs. Only covariances and the whitening mean
/// are read; target labels are never touched.
pub fn predict(clf: &Classifier, target: &DomainRecord) -> Result<Prediction> {
    if tangent_len(target.dim()) != clf.weights.len() {
        return Err(Error::DimMismatch {
            expected: clf.weights.len(),
            found: tangent_len(target.dim()),
        });
    }
    Ok(predict_tangents(clf, &target.tangent_vectors()?))
}

pub fn predict_tangents(clf: &Classifier, z: &Matrix) -> Prediction {
    let probabilities: Vec<f64> = (0..z.rows())
        .map(|i| sigmoid(dot(z.row(i), &clf.weights) + clf.intercept))
        .collect();
    let labels = probabilities.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Prediction { labels, probabilities }
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn blobs(rng: &mut SimRng, n: usize, d: usize, sep: f64) -> (Matrix, Vec<u8>) {
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let z = Matrix::from_fn(n, d, |i, k| {
            let shift = if k == 0 { sep * (labels[i] as f64 - 0.5) } else { 0.0 };
            rng.normal() + shift
        });
        (z, labels)
    }

    #[test]
    fn converges_when_objective_is_large() {
        // Nearly uninformative feature: the optimum sits where the
        // objective (~ n log 2) hides the last Newton decrements.
        let mut rng = SimRng::seed_from(17);
        for n in [500usize, 1000, 2000] {
            let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let z = Matrix::from_fn(n, 1, |i, _| 0.3 * rng.normal() + 0.02 * labels[i] as f64);
            let fit = fit_logistic(&z, &labels, 1.0, &FitOptions::default()).unwrap();
            assert!(fit.gradient_norm <= 1e-8);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SimRng::seed_from(31);
        let (z, labels) = blobs(&mut rng, 40, 6, 1.0);
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let obj = LogisticObjective::new(&z, &y, 1.0);
        let theta: Vec<f64> = (0..7).map(|_| 0.3 * rng.normal()).collect();
        let g = obj.gradient(&theta);
        let h = 1e-6;
        for k in 0..7 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (obj.value(&tp) - obj.value(&tm)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn separable_and_symmetric() {
        let mut rng = SimRng::seed_from(32);
        let (z, labels) = blobs(&mut rng, 60, 4, 8.0);
        let fit = fit_logistic(&z, &labels, 1.0, &FitOptions::default()).unwrap();
        assert!(fit.gradient_norm <= 1e-6);
        let clf = Classifier {
            weights: fit.weights.clone(),
            intercept: fit.intercept,
            c: 1.0,
            channels: Vec::new(),
            alignment: Alignment::Recenter,
        };
        assert_eq!(accuracy(&predict_tangents(&clf, &z).labels, &labels), 1.0);
        let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let neg = fit_logistic(&z, &swapped, 1.0, &FitOptions::default()).unwrap();
        for (a, b) in fit.weights.iter().zip(&neg.weights) {
            assert!((a + b).abs() <= 1e-6);
        }
        assert!((fit.intercept + neg.intercept).abs() <= 1e-6);
    }

    #[test]
    fn single_class_rejected() {
        let z = Matrix::zeros(3, 2);
        assert_eq!(fit_logistic(&z, &[1, 1, 1], 1.0, &FitOptions::default()), Err(Error::SingleClass));
    }

    #[test]
    fn zero_model_is_undecided() {
        let clf = Classifier {
            weights: vec![0.0; 3],
            intercept: 0.0,
            c: 1.0,
            channels: Vec::new(),
            alignment: Alignment::Recenter,
        };
        let p = predict_tangents(&clf, &Matrix::from_fn(4, 3, |i, j| (i * j) as f64));
        assert!(p.probabilities.iter().all(|&v| v == 0.5));
        assert_eq!(clf.dim(), 2);
    }

    #[test]
    fn scope_selection() {
        let o = |session, run| EpochOrigin { session, run };
        let one = [o(0, 0); 6];
        assert_eq!(calibration_scope(&one), (MeanScope::FirstHalf, vec![0, 1, 2]));
        let runs = [o(0, 1), o(0, 1), o(0, 2), o(0, 2)];
        assert_eq!(calibration_scope(&runs), (MeanScope::FirstRun, vec![0, 1]));
        let sessions = [o(1, 0), o(0, 0), o(1, 1), o(0, 1)];
        assert_eq!(calibration_scope(&sessions), (MeanScope::FirstSession, vec![1, 3]));
    }

    fn random_spd(rng: &mut SimRng, n: usize) -> SpdMatrix {
        let a = Matrix::from_fn(n, n + 2, |_, _| rng.normal());
        SpdMatrix::new(a.matmul_t(&a).add(&Matrix::identity(n).scale(0.1)).symmetrized()).unwrap()
    }

    #[test]
    fn prediction_invariant_to_congruence() {
        // Whitening turns W·C·Wᵀ into U·(M^{-1/2} C M^{-1/2})·Uᵀ where U is the
        // orthogonal polar factor of W·M^{1/2}. Predictions are invariant
        // when U = I (W = A·M^{-1/2}, A SPD); tangent norms for every W.
        let mut rng = SimRng::seed_from(33);
        let covs: Vec<SpdMatrix> = (0..10).map(|_| random_spd(&mut rng, 3)).collect();
        let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let id = DomainId { dataset: "a".into(), subject: 1 };
        let origins = vec![EpochOrigin { session: 0, run: 0 }; 10];
        let dom = DomainRecord::target(id.clone(), covs.clone(), labels.clone(), &origins, Alignment::Recenter).unwrap();
        let clf = Classifier {
            weights: (0..6).map(|_| rng.normal()).collect(),
            intercept: 0.1,
            c: 1.0,
            channels: Vec::new(),
            alignment: Alignment::Recenter,
        };
        let p1 = predict(&clf, &dom).unwrap();
        let z1 = dom.tangent_vectors().unwrap();

        let a = random_spd(&mut rng, 3);
        let w = a.matrix().matmul(dom.whitening_mean.inv_sqrt().matrix());
        let moved: Vec<SpdMatrix> = covs.iter().map(|c| c.congruence(&w.transpose()).unwrap()).collect();
        let dom2 = DomainRecord::target(id.clone(), moved, labels.clone(), &origins, Alignment::Recenter).unwrap();
        let p2 = predict(&clf, &dom2).unwrap();
        for (a, b) in p1.probabilities.iter().zip(&p2.probabilities) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }

        let general = Matrix::from_fn(3, 3, |_, _| rng.normal());
        let moved: Vec<SpdMatrix> = covs.iter().map(|c| c.congruence(&general).unwrap()).collect();
        let z3 = DomainRecord::target(id, moved, labels, &origins, Alignment::Recenter)
            .unwrap()
            .tangent_vectors()
            .unwrap();
        for i in 0..10 {
            let (n1, n3) = (crate::linalg::norm2(z1.row(i)), crate::linalg::norm2(z3.row(i)));
            assert!((n1 - n3).abs() < 1e-8 * n1.max(1.0));
        }
        assert_eq!(dom.mean_scope, MeanScope::FirstHalf);
    }

    #[test]
    fn labels_never_consulted() {
        let mut rng = SimRng::seed_from(34);
        let covs: Vec<SpdMatrix> = (0..8).map(|_| random_spd(&mut rng, 2)).collect();
        let origins = vec![EpochOrigin { session: 0, run: 0 }; 8];
        let id = DomainId { dataset: "a".into(), subject: 1 };
        let a = DomainRecord::target(id.clone(), covs.clone(), vec![0; 8], &origins, Alignment::Recenter).unwrap();
        let b = DomainRecord::target(id, covs, vec![1, 0, 0, 1, 1, 1, 0, 1], &origins, Alignment::Recenter).unwrap();
        let clf = Classifier {
            weights: vec![1.0, -2.0, 0.5],
            intercept: 0.0,
            c: 1.0,
            channels: Vec::new(),
            alignment: Alignment::Recenter,
        };
        assert_eq!(predict(&clf, &a).unwrap(), predict(&clf, &b).unwrap());
    }

    #[test]
    fn no_alignment_uses_identity() {
        let mut rng = SimRng::seed_from(35);
        let covs: Vec<SpdMatrix> = (0..4).map(|_| random_spd(&mut rng, 2)).collect();
        let id = DomainId { dataset: "a".into(), subject: 1 };
        let d = DomainRecord::training(id, covs.clone(), vec![0, 1, 0, 1], Alignment::None).unwrap();
        assert_eq!(d.whitening_mean, SpdMatrix::identity(2));
        let z = d.tangent_vectors().unwrap();
        assert_eq!(z.row(0), tangent_map_whitened(&covs[0]).as_slice());
    }

    #[test]
    fn deterministic_weights() {
        let mut rng = SimRng::seed_from(36);
        let (z, labels) = blobs(&mut rng, 80, 10, 1.0);
        let a = fit_logistic(&z, &labels, 1.0, &FitOptions::default()).unwrap();
        let b = fit_logistic(&z, &labels, 1.0, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
