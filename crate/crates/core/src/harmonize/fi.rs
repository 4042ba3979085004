use super::{same_channels, InterpMethod, InterpOperator};
use crate::error::{Error, Result};
use crate::headmodel::{fibonacci_source_grid_with_radius, leadfield, Leadfield, SourceSpace, GRID_LOCATIONS, RADIUS_FRACTION};
use crate::linalg::{cholesky, cholesky_solve, Matrix};
use crate::montage::Montage;

pub const FI_REG: f64 = 1e-3;

/// Minimum-norm field interpolation
/// `A = G_dst G_srcᵀ (G_src G_srcᵀ + λI)⁻¹` with `λ = reg · mean diag(G_src G_srcᵀ)`.
pub fn fi_operator(src: &Montage, dst: &Montage, lf_src: &Leadfield, lf_dst: &Leadfield, reg: f64) -> Result<InterpOperator> {
    if lf_src.source_fingerprint != lf_dst.source_fingerprint || lf_src.matrix.cols() != lf_dst.matrix.cols() {
        return Err(Error::SourceSpaceMismatch);
    }
    if !same_channels(&lf_src.channels, &src.names()) || !same_channels(&lf_dst.channels, &dst.names()) {
        return Err(Error::ChannelOrderMismatch);
    }
    if !(reg >= 0.0) {
        return Err(Error::InvalidArgument("fi regularization must be non-negative".into()));
    }
    let gs = &lf_src.matrix;
    let gd = &lf_dst.matrix;
    let n = gs.rows();
    let mut gram = gs.matmul_t(gs);
    let lambda = reg * gram.trace() / n as f64;
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    // Average referencing leaves the Gram matrix singular; a vanishing
    // regularizer falls back to the tiniest ridge that keeps it factorable.
    let l = match cholesky(&gram) {
        Ok(l) => l,
        Err(_) => {
            let floor = 1e-12 * gram.trace() / n as f64;
            for i in 0..n {
                gram[(i, i)] += floor;
            }
            cholesky(&gram).map_err(|_| Error::SingularSystem)?
        }
    };
    // K symmetric: A = (K⁻¹ G_src G_dstᵀ)ᵀ.
    let cross = gs.matmul_t(gd);
    let mut a = Matrix::zeros(gd.rows(), n);
    for t in 0..gd.rows() {
        let col = cholesky_solve(&l, &cross.column(t));
        a.row_mut(t).copy_from_slice(&col);
    }
    InterpOperator::new(a, src.names(), dst.names(), InterpMethod::Fi, reg)
}

/// Source space plus cached construction of FI operators over it.
#[derive(Debug, Clone)]
pub struct FieldInterpolator {
    pub sources: SourceSpace,
}

impl FieldInterpolator {
    /// Default grid: 642 locations at 0.7 of the head radius, three
    /// orientations each.
    pub fn new(head_radius: f64) -> Result<Self> {
        Ok(Self {
            sources: fibonacci_source_grid_with_radius(GRID_LOCATIONS, RADIUS_FRACTION, head_radius)?,
        })
    }

    pub fn operator(&self, src: &Montage, dst: &Montage, reg: f64) -> Result<InterpOperator> {
        let lf_src = leadfield(&self.sources, src)?;
        let lf_dst = leadfield(&self.sources, dst)?;
        fi_operator(src, dst, &lf_src, &lf_dst, reg)
    }
}
