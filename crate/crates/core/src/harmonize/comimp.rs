//! Round-robin regression imputation of channels missing from some
//! datasets. Every time sample is a row, every union channel a feature.
//!
//! Within one training set the completed data is an affine function of its
//! observed channels, so the fit runs entirely on per-set second moments of
//! `[x_obs; 1]` and never revisits individual samples.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, Matrix};
use crate::montage::normalize_name;
use crate::signal::EpochSet;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImputerParams {
    /// Ridge penalty as a multiple of the mean predictor variance.
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ImputerParams {
    fn default() -> Self {
        Self {
            ridge: 1e-3,
            max_iter: 10,
            tol: 1e-3,
        }
    }
}

/// `x_j ≈ weights · x + intercept`, with `weights[j] = 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Regression {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImputerModel {
    pub union_names: Vec<String>,
    pub channel_means: Vec<f64>,
    /// One regression per union channel, in union order.
    pub regressions: Vec<Regression>,
    /// Union channels by ascending number of training samples.
    pub visit_order: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

struct Block {
    observed: Vec<usize>,
    n: f64,
    /// Moments of `[x_obs; 1]`.
    moments: Matrix,
    /// Completion map: union channels (plus a trailing constant row) from `[x_obs; 1]`.
    map: Matrix,
    /// `map · moments`.
    mixed: Matrix,
    /// `map · moments · mapᵀ`.
    gram: Matrix,
}

impl Block {
    fn new(x: &EpochSet, observed: Vec<usize>, p: usize) -> Self {
        let k = observed.len();
        let mut moments = Matrix::zeros(k + 1, k + 1);
        for e in x.epochs() {
            let xx = e.matmul_t(&e);
            for i in 0..k {
                let s: f64 = e.row(i).iter().sum();
                for j in 0..k {
                    moments[(i, j)] += xx[(i, j)];
                }
                moments[(i, k)] += s;
                moments[(k, i)] += s;
            }
        }
        let n = (x.n_epochs() * x.n_times()) as f64;
        moments[(k, k)] = n;
        let mut map = Matrix::zeros(p + 1, k + 1);
        for (i, &u) in observed.iter().enumerate() {
            map[(u, i)] = 1.0;
        }
        map[(p, k)] = 1.0;
        let mut b = Self {
            observed,
            n,
            moments,
            map,
            mixed: Matrix::zeros(p + 1, k + 1),
            gram: Matrix::zeros(p + 1, p + 1),
        };
        b.mixed = b.map.matmul(&b.moments);
        b.gram = b.mixed.matmul_t(&b.map);
        b
    }

    fn observes(&self, u: usize) -> bool {
        self.observed.contains(&u)
    }

    /// Replaces the completion row of channel `j`; returns the mean squared
    /// change of the imputed values.
    fn set_row(&mut self, j: usize, row: &[f64]) -> f64 {
        let k1 = row.len();
        let delta: Vec<f64> = (0..k1).map(|i| row[i] - self.map[(j, i)]).collect();
        let md = self.moments.matvec(&delta);
        let change = delta.iter().zip(&md).map(|(a, b)| a * b).sum::<f64>() / self.n;
        self.map.row_mut(j).copy_from_slice(row);
        let fj = self.moments.matvec(row);
        self.mixed.row_mut(j).copy_from_slice(&fj);
        for u in 0..self.map.rows() {
            let v: f64 = self.map.row(u).iter().zip(&fj).map(|(a, b)| a * b).sum();
            self.gram[(j, u)] = v;
            self.gram[(u, j)] = v;
        }
        change.max(0.0)
    }
}

fn union_index(union: &[String], channels: &[String]) -> Result<Vec<usize>> {
    let keys: Vec<String> = union.iter().map(|n| normalize_name(n)).collect();
    channels
        .iter()
        .map(|c| {
            let key = normalize_name(c);
            keys.iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::UnknownChannel(c.clone()))
        })
        .collect()
}

/// Ridge regression of channel `j` on every other channel from the summed
/// moments `z` (union channels plus a constant), intercept unpenalized.
fn regress(z: &Matrix, j: usize, ridge: f64, means: &[f64]) -> Result<Regression> {
    let p = z.rows() - 1;
    let n = z[(p, p)];
    let mu: Vec<f64> = (0..p).map(|u| z[(u, p)] / n).collect();
    let q: Vec<usize> = (0..p).filter(|&u| u != j).collect();
    let mut weights = vec![0.0; p];
    if q.is_empty() {
        return Ok(Regression {
            weights,
            intercept: means[j],
        });
    }
    let mut c = Matrix::from_fn(q.len(), q.len(), |a, b| z[(q[a], q[b])] - n * mu[q[a]] * mu[q[b]]);
    let rhs: Vec<f64> = q.iter().map(|&u| z[(u, j)] - n * mu[u] * mu[j]).collect();
    let mean_var = c.trace() / (q.len() as f64 * n);
    let alpha = ridge * mean_var;
    if !(alpha > 0.0) {
        return Ok(Regression {
            weights,
            intercept: mu[j],
        });
    }
    for a in 0..q.len() {
        c[(a, a)] += alpha;
    }
    let l = cholesky(&c).map_err(|_| Error::SingularSystem)?;
    let w = cholesky_solve(&l, &rhs);
    let mut intercept = mu[j];
    for (a, &u) in q.iter().enumerate() {
        weights[u] = w[a];
        intercept -= w[a] * mu[u];
    }
    Ok(Regression { weights, intercept })
}

/// Completion row for channel `j` given the current completion of the other
/// channels.
fn predicted_row(reg: &Regression, map: &Matrix, j: usize) -> Vec<f64> {
    let p = reg.weights.len();
    let mut row = vec![0.0; map.cols()];
    for u in 0..p {
        let w = reg.weights[u];
        if u == j || w == 0.0 {
            continue;
        }
        for (r, m) in row.iter_mut().zip(map.row(u)) {
            *r += w * m;
        }
    }
    *row.last_mut().expect("constant column") += reg.intercept;
    row
}

pub fn comimp_fit(training: &[EpochSet], union_names: &[String]) -> Result<ImputerModel> {
    comimp_fit_with(training, union_names, &ImputerParams::default())
}

pub fn comimp_fit_with(training: &[EpochSet], union_names: &[String], params: &ImputerParams) -> Result<ImputerModel> {
    let p = union_names.len();
    let mut blocks = Vec::with_capacity(training.len());
    for x in training {
        let observed = union_index(union_names, &x.channels)?;
        blocks.push(Block::new(x, observed, p));
    }

    let mut counts = vec![0.0; p];
    let mut sums = vec![0.0; p];
    for b in &blocks {
        let k = b.observed.len();
        for (i, &u) in b.observed.iter().enumerate() {
            counts[u] += b.n;
            sums[u] += b.moments[(i, k)];
        }
    }
    if let Some(u) = (0..p).find(|&u| !(counts[u] > 0.0)) {
        return Err(Error::UncoveredChannel(union_names[u].clone()));
    }
    let means: Vec<f64> = (0..p).map(|u| sums[u] / counts[u]).collect();
    let mut visit_order: Vec<usize> = (0..p).collect();
    visit_order.sort_by(|&a, &b| counts[a].total_cmp(&counts[b]).then(a.cmp(&b)));

    for b in blocks.iter_mut() {
        let k = b.observed.len();
        for u in 0..p {
            if !b.observes(u) {
                let mut row = vec![0.0; k + 1];
                row[k] = means[u];
                b.set_row(u, &row);
            }
        }
    }

    // Scale for the relative change: mean square of the observed data.
    let (mut ss, mut cnt) = (0.0, 0.0);
    for b in &blocks {
        let k = b.observed.len();
        ss += (0..k).map(|i| b.moments[(i, i)]).sum::<f64>();
        cnt += b.n * k as f64;
    }
    let scale = if cnt > 0.0 && ss > 0.0 { ss / cnt } else { 1.0 };

    let missing_somewhere: Vec<usize> = visit_order
        .iter()
        .copied()
        .filter(|&u| blocks.iter().any(|b| !b.observes(u)))
        .collect();
    let mut regressions: Vec<Option<Regression>> = vec![None; p];
    let mut iterations = 0;
    let mut converged = missing_somewhere.is_empty();
    let sum_gram = |blocks: &[Block], j: usize| {
        let mut z = Matrix::zeros(p + 1, p + 1);
        for b in blocks.iter().filter(|b| b.observes(j)) {
            z = z.add(&b.gram);
        }
        z
    };
    while !converged && iterations < params.max_iter {
        iterations += 1;
        let mut worst: f64 = 0.0;
        for &j in &missing_somewhere {
            let reg = regress(&sum_gram(&blocks, j), j, params.ridge, &means)?;
            for b in blocks.iter_mut().filter(|b| !b.observes(j)) {
                let row = predicted_row(&reg, &b.map, j);
                worst = worst.max(b.set_row(j, &row));
            }
            regressions[j] = Some(reg);
        }
        converged = libm::sqrt(worst / scale) < params.tol;
    }
    let regressions = (0..p)
        .map(|j| match regressions[j].take() {
            Some(r) => Ok(r),
            None => regress(&sum_gram(&blocks, j), j, params.ridge, &means),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ImputerModel {
        union_names: union_names.to_vec(),
        channel_means: means,
        regressions,
        visit_order,
        iterations,
        converged,
    })
}

/// Expands `epochs` to the union channels. Observed channels are copied
/// unchanged; missing ones start at the training means and are refined by
/// the fitted regressions for as many rounds as the fit took.
pub fn comimp_transform(model: &ImputerModel, epochs: &EpochSet) -> Result<EpochSet> {
    let p = model.union_names.len();
    let observed = union_index(&model.union_names, &epochs.channels)?;
    let k = observed.len();
    let mut source = vec![None; p];
    for (i, &u) in observed.iter().enumerate() {
        source[u] = Some(i);
    }
    let mut map = Matrix::zeros(p + 1, k + 1);
    for u in 0..p {
        match source[u] {
            Some(i) => map[(u, i)] = 1.0,
            None => map[(u, k)] = model.channel_means[u],
        }
    }
    map[(p, k)] = 1.0;
    for _ in 0..model.iterations.max(1) {
        for &j in &model.visit_order {
            if source[j].is_none() {
                let row = predicted_row(&model.regressions[j], &map, j);
                map.row_mut(j).copy_from_slice(&row);
            }
        }
    }

    let t = epochs.n_times();
    let mut data = Vec::with_capacity(epochs.n_epochs() * p * t);
    for e in 0..epochs.n_epochs() {
        let block = epochs.epoch_slice(e);
        for u in 0..p {
            match source[u] {
                Some(i) => data.extend_from_slice(&block[i * t..(i + 1) * t]),
                None => {
                    let row = map.row(u);
                    for s in 0..t {
                        let mut v = row[k];
                        for i in 0..k {
                            v += row[i] * block[i * t + s];
                        }
                        data.push(v);
                    }
                }
            }
        }
    }
    EpochSet::new(
        data,
        (epochs.n_epochs(), p, t),
        epochs.labels.clone(),
        model.union_names.clone(),
        epochs.sfreq,
    )
}
