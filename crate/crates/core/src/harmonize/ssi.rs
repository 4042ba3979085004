use alloc::vec::Vec;

use super::{InterpMethod, InterpOperator};
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, Matrix};
use crate::montage::{dot3, project_unit_sphere, Montage};
use crate::special::legendre_table;

pub const SSI_REG: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsiParams {
    /// Spline stiffness `m`.
    pub m_order: u32,
    /// Number of Legendre terms.
    pub n_terms: usize,
    pub reg: f64,
}

impl Default for SsiParams {
    fn default() -> Self {
        Self {
            m_order: 4,
            n_terms: 50,
            reg: SSI_REG,
        }
    }
}

/// Spherical-spline kernel `g(x) = 1/(4π) Σₙ (2n+1) / (n(n+1))ᵐ · Pₙ(x)`.
pub fn perrin_kernel(x: f64, m_order: u32, n_terms: usize) -> f64 {
    let p = legendre_table(x.clamp(-1.0, 1.0), n_terms);
    let mut acc = 0.0;
    for n in 1..=n_terms {
        let nf = n as f64;
        let mut denom = 1.0;
        for _ in 0..m_order {
            denom *= nf * (nf + 1.0);
        }
        acc += (2.0 * nf + 1.0) / denom * p[n];
    }
    acc / (4.0 * core::f64::consts::PI)
}

pub fn ssi_operator(src: &Montage, dst: &Montage, m_order: u32, reg: f64) -> Result<InterpOperator> {
    ssi_operator_with(
        src,
        dst,
        &SsiParams {
            m_order,
            reg,
            ..SsiParams::default()
        },
    )
}

/// Spherical-spline interpolation from `src` to `dst` electrodes.
///
/// Solves the bordered system `[[G + reg·I, 1], [1ᵀ, 0]]` for the spline
/// weights and constant term, then evaluates the spline at the targets.
pub fn ssi_operator_with(src: &Montage, dst: &Montage, params: &SsiParams) -> Result<InterpOperator> {
    let n = src.len();
    if n < 3 {
        return Err(Error::TooFewChannels { needed: 3, found: n });
    }
    if !(params.reg >= 0.0) {
        return Err(Error::InvalidArgument("ssi regularization must be non-negative".into()));
    }
    let s = project_unit_sphere(src)?;
    let d = project_unit_sphere(dst)?;
    let g = |a: &[f64; 3], b: &[f64; 3]| perrin_kernel(dot3(a, b), params.m_order, params.n_terms);

    let mut k = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in i..n {
            let v = g(&s[i], &s[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += params.reg;
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    let rhs = Matrix::from_fn(n + 1, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let inv = lu_solve(&k, &rhs)?;

    let mut a = Matrix::zeros(d.len(), n);
    let mut row = Vec::with_capacity(n + 1);
    for (t, dir) in d.iter().enumerate() {
        row.clear();
        row.extend(s.iter().map(|si| g(dir, si)));
        row.push(1.0);
        for j in 0..n {
            a[(t, j)] = (0..=n).map(|i| row[i] * inv[(i, j)]).sum();
        }
    }
    InterpOperator::new(a, src.names(), dst.names(), InterpMethod::Ssi, params.reg)
}
