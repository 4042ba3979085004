use alloc::vec::Vec;

use num_complex::Complex64;

use super::EpochSet;
use crate::error::{Error, Result};

/// Cascade of second-order sections `[b0, b1, b2, a1, a2]` (`a0 = 1`),
/// run in transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 5]>,
}

/// Butterworth band-pass of prototype order `order` (`2·order` poles),
/// designed by bilinear transform with pre-warped band edges and scaled to
/// unit gain at the band centre.
pub fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Sos> {
    let nyquist = fs / 2.0;
    if !(low > 0.0 && low < high && high < nyquist) {
        return Err(Error::InvalidBand { low, high, nyquist });
    }
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be positive".into()));
    }
    let pi = core::f64::consts::PI;
    let warp = |f: f64| 2.0 * fs * libm::tan(pi * f / fs);
    let (wl, wh) = (warp(low), warp(high));
    let bw = wh - wl;
    let w0 = libm::sqrt(wl * wh);
    let two_fs = Complex64::new(2.0 * fs, 0.0);

    let mut poles: Vec<Complex64> = Vec::with_capacity(2 * order);
    for k in 1..=order {
        let theta = pi * (2 * k + order - 1) as f64 / (2 * order) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((two_fs + s) / (two_fs - s));
        }
    }

    // Pair conjugates; remaining real poles pair among themselves.
    let eps = 1e-12;
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > eps).collect();
    let mut reals: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= eps).map(|p| p.re).collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    reals.sort_by(f64::total_cmp);
    let mut denominators: Vec<[f64; 2]> = upper.iter().map(|p| [-2.0 * p.re, p.norm_sqr()]).collect();
    for pair in reals.chunks(2) {
        match pair {
            [a, b] => denominators.push([-(a + b), a * b]),
            [a] => denominators.push([-a, 0.0]),
            _ => unreachable!(),
        }
    }

    // Every section gets one zero at z = 1 and one at z = −1.
    let centre = 2.0 * libm::atan(w0 / (2.0 * fs));
    let z = Complex64::from_polar(1.0, centre);
    let z1 = z.inv();
    let z2 = z1 * z1;
    let sections = denominators
        .into_iter()
        .map(|[a1, a2]| {
            let num = Complex64::new(1.0, 0.0) - z2;
            let den = Complex64::new(1.0, 0.0) + z1 * a1 + z2 * a2;
            let g = 1.0 / (num / den).norm();
            [g, 0.0, -g, a1, a2]
        })
        .collect();
    Ok(Sos { sections })
}

impl Sos {
    /// Frequency response magnitude at `f` Hz.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * core::f64::consts::PI * f / fs);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = z1 * s[1] + z2 * s[2] + s[0];
                let den = z1 * s[3] + z2 * s[4] + 1.0;
                (num / den).norm()
            })
            .product()
    }

    /// Causal filtering in place. `x0` scales the steady-state initial
    /// conditions (step response to a constant `x0`).
    pub fn filter_in_place(&self, x: &mut [f64], x0: f64) {
        let mut level = x0;
        for s in &self.sections {
            let [b0, b1, b2, a1, a2] = *s;
            let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
            let mut z1 = level * (gain - b0);
            let mut z2 = level * (b2 - a2 * gain);
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z1;
                z1 = b1 * input - a1 * y + z2;
                z2 = b2 * input - a2 * y;
                *v = y;
            }
            level *= gain;
        }
    }

    /// Zero-phase forward-backward filtering with odd reflection padding of
    /// `3·(2·n_sections + 1)` samples at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let first = ext[0];
        self.filter_in_place(&mut ext, first);
        ext.reverse();
        let first = ext[0];
        self.filter_in_place(&mut ext, first);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Order-4 Butterworth band-pass applied forward and backward to every
/// channel of every epoch.
pub fn bandpass_filtfilt(x: &EpochSet, low: f64, high: f64) -> Result<EpochSet> {
    bandpass_filtfilt_order(x, low, high, 4)
}

pub fn bandpass_filtfilt_order(x: &EpochSet, low: f64, high: f64, order: usize) -> Result<EpochSet> {
    let sos = butter_bandpass(order, low, high, x.sfreq)?;
    Ok(x.map_traces(x.n_times(), x.sfreq, |trace| sos.filtfilt(trace)))
}
