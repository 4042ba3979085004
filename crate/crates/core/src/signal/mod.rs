//! Epoched multichannel signals and the preprocessing chain:
//! band-pass, resampling, segmentation and covariance extraction.

mod filter;
mod resample;

pub use filter::{bandpass_filtfilt, bandpass_filtfilt_order, butter_bandpass, Sos};
pub use resample::{rational_ratio, resample, resample_poly};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{shrink_covariance, SpdMatrix};
use crate::linalg::Matrix;

/// Trials `[n_epochs × n_channels × n_times]` (C order) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    data: Vec<f64>,
    n_epochs: usize,
    n_channels: usize,
    n_times: usize,
    pub labels: Vec<u8>,
    pub channels: Vec<String>,
    pub sfreq: f64,
}

impl EpochSet {
    pub fn new(
        data: Vec<f64>,
        shape: (usize, usize, usize),
        labels: Vec<u8>,
        channels: Vec<String>,
        sfreq: f64,
    ) -> Result<Self> {
        let (n_epochs, n_channels, n_times) = shape;
        if data.len() != n_epochs * n_channels * n_times {
            return Err(Error::DimMismatch {
                expected: n_epochs * n_channels * n_times,
                found: data.len(),
            });
        }
        if labels.len() != n_epochs {
            return Err(Error::DimMismatch {
                expected: n_epochs,
                found: labels.len(),
            });
        }
        if channels.len() != n_channels {
            return Err(Error::DimMismatch {
                expected: n_channels,
                found: channels.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if !(sfreq > 0.0) {
            return Err(Error::InvalidArgument("sampling rate must be positive".into()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            data,
            n_epochs,
            n_channels,
            n_times,
            labels,
            channels,
            sfreq,
        })
    }

    /// Builds a set from per-epoch `channels × times` matrices.
    pub fn from_epochs(epochs: &[Matrix], labels: Vec<u8>, channels: Vec<String>, sfreq: f64) -> Result<Self> {
        let (c, t) = epochs
            .first()
            .map(|m| (m.rows(), m.cols()))
            .unwrap_or((channels.len(), 0));
        let mut data = Vec::with_capacity(epochs.len() * c * t);
        for e in epochs {
            if e.rows() != c || e.cols() != t {
                return Err(Error::DimMismatch {
                    expected: c * t,
                    found: e.rows() * e.cols(),
                });
            }
            data.extend_from_slice(e.as_slice());
        }
        Self::new(data, (epochs.len(), c, t), labels, channels, sfreq)
    }

    #[inline]
    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    #[inline]
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_epochs, self.n_channels, self.n_times)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Raw `channels × times` block of one epoch.
    pub fn epoch_slice(&self, i: usize) -> &[f64] {
        let len = self.n_channels * self.n_times;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn epoch(&self, i: usize) -> Matrix {
        Matrix::new(self.n_channels, self.n_times, self.epoch_slice(i).to_vec())
            .expect("epoch block has the declared shape")
    }

    pub fn epochs(&self) -> impl Iterator<Item = Matrix> + '_ {
        (0..self.n_epochs).map(|i| self.epoch(i))
    }

    /// Subset of epochs, in the given order.
    pub fn select_epochs(&self, indices: &[usize]) -> EpochSet {
        let len = self.n_channels * self.n_times;
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            data.extend_from_slice(self.epoch_slice(i));
        }
        EpochSet {
            data,
            n_epochs: indices.len(),
            n_channels: self.n_channels,
            n_times: self.n_times,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            channels: self.channels.clone(),
            sfreq: self.sfreq,
        }
    }

    /// Subset of channels, by index, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> EpochSet {
        let t = self.n_times;
        let mut data = Vec::with_capacity(self.n_epochs * indices.len() * t);
        for e in 0..self.n_epochs {
            let block = self.epoch_slice(e);
            for &c in indices {
                data.extend_from_slice(&block[c * t..(c + 1) * t]);
            }
        }
        EpochSet {
            data,
            n_epochs: self.n_epochs,
            n_channels: indices.len(),
            n_times: t,
            labels: self.labels.clone(),
            channels: indices.iter().map(|&c| self.channels[c].clone()).collect(),
            sfreq: self.sfreq,
        }
    }

    /// Applies `f` to every channel trace independently.
    pub(crate) fn map_traces(&self, n_times_out: usize, sfreq: f64, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> EpochSet {
        let mut data = Vec::with_capacity(self.n_epochs * self.n_channels * n_times_out);
        for trace in self.data.chunks(self.n_times.max(1)).take(self.n_epochs * self.n_channels) {
            let out = f(trace);
            debug_assert_eq!(out.len(), n_times_out);
            data.extend_from_slice(&out);
        }
        EpochSet {
            data,
            n_epochs: self.n_epochs,
            n_channels: self.n_channels,
            n_times: n_times_out,
            labels: self.labels.clone(),
            channels: self.channels.clone(),
            sfreq,
        }
    }

    /// Concatenates sets with identical channels and sampling rate.
    pub fn concat(sets: &[EpochSet]) -> Result<EpochSet> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut n = 0;
        for s in sets {
            if s.channels != first.channels || s.n_times != first.n_times || s.sfreq != first.sfreq {
                return Err(Error::ChannelOrderMismatch);
            }
            data.extend_from_slice(&s.data);
            labels.extend_from_slice(&s.labels);
            n += s.n_epochs;
        }
        Ok(EpochSet {
            data,
            n_epochs: n,
            n_channels: first.n_channels,
            n_times: first.n_times,
            labels,
            channels: first.channels.clone(),
            sfreq: first.sfreq,
        })
    }
}

/// One shrunk covariance per epoch, in epoch order.
pub fn epochs_to_covs(x: &EpochSet) -> Result<Vec<SpdMatrix>> {
    x.epochs().map(|e| shrink_covariance(&e)).collect()
}

/// Cuts a continuous `channels × times` recording into consecutive,
/// non-overlapping epochs of `epoch_len` samples, one per label. Trailing
/// samples that do not fill an epoch are dropped.
pub fn segment(
    continuous: &Matrix,
    epoch_len: usize,
    labels: Vec<u8>,
    channels: Vec<String>,
    sfreq: f64,
) -> Result<EpochSet> {
    if epoch_len == 0 {
        return Err(Error::InvalidArgument("epoch length must be positive".into()));
    }
    let available = continuous.cols() / epoch_len;
    if labels.len() > available {
        return Err(Error::DimMismatch {
            expected: available,
            found: labels.len(),
        });
    }
    let c = continuous.rows();
    let mut data = Vec::with_capacity(labels.len() * c * epoch_len);
    for e in 0..labels.len() {
        for ch in 0..c {
            let row = continuous.row(ch);
            data.extend_from_slice(&row[e * epoch_len..(e + 1) * epoch_len]);
        }
    }
    EpochSet::new(data, (labels.len(), c, epoch_len), labels, channels, sfreq)
}
