//! Strategies for bringing datasets with different montages into one
//! feature space.
//!
//! * common-channel selection ([`common_channels`], [`selection_operator`])
//! * covariance expansion to the channel union ([`dt_expand`])
//! * iterative regression imputation of missing channels ([`comimp_fit`])
//! * spherical-spline interpolation to a template ([`ssi_operator`])
//! * field interpolation through a forward model ([`fi_operator`])

mod comimp;
mod dt;
mod fi;
mod ssi;

pub use comimp::{comimp_fit, comimp_fit_with, comimp_transform, ImputerModel, ImputerParams, Regression};
pub use dt::{dt_expand, union_channels, ExpandedCov};
pub use fi::{fi_operator, FieldInterpolator, FI_REG};
pub use ssi::{perrin_kernel, ssi_operator, ssi_operator_with, SsiParams, SSI_REG};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::montage::{canonical_order, normalize_name, Montage};
use crate::signal::EpochSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InterpMethod {
    Ssi,
    Fi,
    /// Plain channel selection (rows of the identity).
    Selection,
}

/// Linear map from source channels to target channels, `X̂ = A X`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpOperator {
    pub matrix: Matrix,
    pub source_names: Vec<String>,
    pub target_names: Vec<String>,
    pub method: InterpMethod,
    pub reg: f64,
}

impl InterpOperator {
    pub fn new(
        matrix: Matrix,
        source_names: Vec<String>,
        target_names: Vec<String>,
        method: InterpMethod,
        reg: f64,
    ) -> Result<Self> {
        if matrix.rows() != target_names.len() || matrix.cols() != source_names.len() {
            return Err(Error::DimMismatch {
                expected: target_names.len() * source_names.len(),
                found: matrix.rows() * matrix.cols(),
            });
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            matrix,
            source_names,
            target_names,
            method,
            reg,
        })
    }

    pub fn identity(names: Vec<String>) -> Self {
        Self {
            matrix: Matrix::identity(names.len()),
            source_names: names.clone(),
            target_names: names,
            method: InterpMethod::Selection,
            reg: 0.0,
        }
    }
}

fn same_channels(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| normalize_name(x) == normalize_name(y))
}

/// Maps every epoch through the operator. Epoch channel order must equal
/// the operator's source order.
pub fn apply_operator(op: &InterpOperator, epochs: &EpochSet) -> Result<EpochSet> {
    if !same_channels(&op.source_names, &epochs.channels) {
        return Err(Error::ChannelOrderMismatch);
    }
    let mapped: Vec<Matrix> = epochs.epochs().map(|x| op.matrix.matmul(&x)).collect();
    if mapped.is_empty() {
        return EpochSet::new(
            Vec::new(),
            (0, op.target_names.len(), epochs.n_times()),
            Vec::new(),
            op.target_names.clone(),
            epochs.sfreq,
        );
    }
    EpochSet::from_epochs(&mapped, epochs.labels.clone(), op.target_names.clone(), epochs.sfreq)
}

/// Channels present in every montage (after alias normalization), template
/// channels first in template order, then alphabetical.
pub fn common_channels(montages: &[Montage]) -> Result<Montage> {
    let first = montages.first().ok_or(Error::EmptyIntersection)?;
    let shared: Vec<String> = first
        .channels
        .iter()
        .filter(|c| montages[1..].iter().all(|m| m.index_of(&c.name).is_some()))
        .map(|c| c.name.clone())
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    first.select(&canonical_order(&shared))
}

/// Operator that picks `keep` out of `src`.
pub fn selection_operator(src: &Montage, keep: &Montage) -> Result<InterpOperator> {
    let mut a = Matrix::zeros(keep.len(), src.len());
    for (row, ch) in keep.channels.iter().enumerate() {
        let col = src
            .index_of(&ch.name)
            .ok_or_else(|| Error::UnknownChannel(ch.name.clone()))?;
        a[(row, col)] = 1.0;
    }
    InterpOperator::new(a, src.names(), keep.names(), InterpMethod::Selection, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shrink_covariance_with;
    use crate::geometry::Shrinkage;
    use crate::montage::template_17;
    use crate::rng::SimRng;
    use alloc::string::ToString;
    use alloc::vec;

    fn random_epochs(rng: &mut SimRng, names: &[&str], n: usize, t: usize) -> EpochSet {
        let data = (0..n * names.len() * t).map(|_| rng.normal()).collect();
        EpochSet::new(
            data,
            (n, names.len(), t),
            (0..n).map(|i| (i % 2) as u8).collect(),
            names.iter().map(|s| s.to_string()).collect(),
            128.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let mut rng = SimRng::seed_from(1);
        let x = random_epochs(&mut rng, &["C3", "Cz", "C4"], 3, 20);
        let id = InterpOperator::identity(x.channels.clone());
        assert_eq!(apply_operator(&id, &x).unwrap(), x);
        let zero = EpochSet::new(vec![0.0; 60], (1, 3, 20), vec![0], x.channels.clone(), 128.0).unwrap();
        let op = InterpOperator::new(
            Matrix::from_fn(2, 3, |i, j| (i + j) as f64),
            x.channels.clone(),
            vec!["a".into(), "b".into()],
            InterpMethod::Fi,
            0.0,
        )
        .unwrap();
        let y = apply_operator(&op, &zero).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.labels, vec![0]);
    }

    #[test]
    fn order_mismatch() {
        let mut rng = SimRng::seed_from(2);
        let x = random_epochs(&mut rng, &["C3", "Cz"], 1, 10);
        let op = InterpOperator::identity(vec!["Cz".into(), "C3".into()]);
        assert_eq!(apply_operator(&op, &x), Err(Error::ChannelOrderMismatch));
    }

    #[test]
    fn covariance_is_bilinear() {
        let mut rng = SimRng::seed_from(3);
        let x = random_epochs(&mut rng, &["C3", "Cz", "C4", "Pz"], 1, 64);
        let a = Matrix::from_fn(3, 4, |_, _| rng.normal());
        let op = InterpOperator::new(a.clone(), x.channels.clone(), vec!["a".into(), "b".into(), "c".into()], InterpMethod::Fi, 0.0).unwrap();
        let y = apply_operator(&op, &x).unwrap();
        let cx = shrink_covariance_with(&x.epoch(0), Shrinkage::Fixed(0.0)).unwrap();
        let cy = y.epoch(0).matmul_t(&y.epoch(0)).scale(1.0 / 64.0);
        let want = a.matmul(cx.matrix()).matmul_t(&a);
        assert!(cy.sub(&want).frobenius_norm() <= 1e-10 * want.frobenius_norm());
    }

    #[test]
    fn common_channel_cases() {
        let t = template_17();
        assert_eq!(common_channels(&[t.clone(), t.clone()]).unwrap().names(), t.names());
        let a = Montage::from_names(&["O1", "Cz", "C3"]).unwrap();
        let b = Montage::from_names(&["Cz", "AFF1h", "O1"]).unwrap();
        assert_eq!(common_channels(&[a.clone(), b]).unwrap().names(), vec!["Cz", "O1"]);
        let c = Montage::from_names(&["Pz"]).unwrap();
        assert_eq!(common_channels(&[a, c]), Err(Error::EmptyIntersection));
        let old = Montage::from_names(&["T3", "Cz"]).unwrap();
        let new = Montage::from_names(&["T7", "Cz"]).unwrap();
        assert_eq!(common_channels(&[old, new]).unwrap().len(), 2);
    }

    #[test]
    fn selection_picks_rows() {
        let src = Montage::from_names(&["C3", "Cz", "C4"]).unwrap();
        let keep = Montage::from_names(&["Cz"]).unwrap();
        let op = selection_operator(&src, &keep).unwrap();
        assert_eq!(op.matrix.as_slice(), &[0.0, 1.0, 0.0]);
    }
}
