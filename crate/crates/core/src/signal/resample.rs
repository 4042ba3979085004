use alloc::vec;
use alloc::vec::Vec;

use super::EpochSet;
use crate::error::{Error, Result};
use crate::special::bessel_i0;

const KAISER_BETA: f64 = 5.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduced `(up, down)` with `to / from = up / down`. Rates are taken to
/// millihertz precision.
pub fn rational_ratio(from: f64, to: f64) -> (usize, usize) {
    let f = libm::round(from * 1000.0) as u64;
    let t = libm::round(to * 1000.0) as u64;
    let g = gcd(f, t).max(1);
    ((t / g) as usize, (f / g) as usize)
}

/// Kaiser-windowed sinc low-pass for an `up/down` rate change: cutoff at
/// `1/max(up, down)` of the upsampled Nyquist, `20·max(up, down) + 1` taps,
/// unit DC gain times `up`.
fn design_antialias(up: usize, down: usize) -> (Vec<f64>, usize) {
    let max_rate = up.max(down);
    let half_len = 10 * max_rate;
    let n_taps = 2 * half_len + 1;
    let cutoff = 1.0 / max_rate as f64;
    let denom = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..n_taps)
        .map(|k| {
            let m = k as f64 - half_len as f64;
            let arg = core::f64::consts::PI * cutoff * m;
            let sinc = if m == 0.0 { 1.0 } else { libm::sin(arg) / arg };
            let r = m / half_len as f64;
            let w = bessel_i0(KAISER_BETA * libm::sqrt((1.0 - r * r).max(0.0))) / denom;
            cutoff * sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in h.iter_mut() {
        *v *= up as f64 / sum;
    }
    (h, half_len)
}

/// Polyphase rational resampling with zero-delay anti-alias filtering and
/// zero padding beyond the signal ends. Output length is
/// `floor(len · up / down)`.
pub fn resample_poly(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    assert!(up > 0 && down > 0);
    if up == down {
        return x.to_vec();
    }
    let (h, half_len) = design_antialias(up, down);
    resample_with(x, up, down, &h, half_len)
}

fn resample_with(x: &[f64], up: usize, down: usize, h: &[f64], half_len: usize) -> Vec<f64> {
    let n = x.len();
    let n_out = n * up / down;
    let mut out = vec![0.0; n_out];
    for (m, o) in out.iter_mut().enumerate() {
        // Position in the zero-stuffed signal aligned with tap `half_len`.
        let t = m * down + half_len;
        let mut acc = 0.0;
        let mut k = t % up;
        while k < h.len() {
            let idx = (t - k) / up;
            if idx < n {
                acc += h[k] * x[idx];
            }
            if k + up > t {
                break;
            }
            k += up;
        }
        *o = acc;
    }
    out
}

/// Downsamples every trace to `target` Hz.
pub fn resample(x: &EpochSet, target: f64) -> Result<EpochSet> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    if target > x.sfreq {
        return Err(Error::UpsamplingUnsupported {
            from: x.sfreq,
            to: target,
        });
    }
    if target == x.sfreq {
        return Ok(x.clone());
    }
    let (up, down) = rational_ratio(x.sfreq, target);
    let (h, half_len) = design_antialias(up, down);
    let n_out = x.n_times() * up / down;
    Ok(x.map_traces(n_out, target, |trace| resample_with(trace, up, down, &h, half_len)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(2.0 * core::f64::consts::PI * f * i as f64 / fs))
            .collect()
    }

    #[test]
    fn ratios() {
        assert_eq!(rational_ratio(256.0, 128.0), (1, 2));
        assert_eq!(rational_ratio(250.0, 128.0), (64, 125));
        assert_eq!(rational_ratio(160.0, 128.0), (4, 5));
    }

    #[test]
    fn halving_preserves_tone() {
        let x = EpochSet::new(tone(20.0, 256.0, 512), (1, 1, 512), alloc::vec![1], alloc::vec!["Cz".to_string()], 256.0).unwrap();
        let y = resample(&x, 128.0).unwrap();
        assert_eq!(y.n_times(), 256);
        assert_eq!(y.sfreq, 128.0);
        let want = tone(20.0, 128.0, 256);
        let got = y.epoch_slice(0);
        let mid = 64..192;
        let num: f64 = mid.clone().map(|i| (got[i] - want[i]) * (got[i] - want[i])).sum();
        let den: f64 = mid.map(|i| want[i] * want[i]).sum();
        assert!(libm::sqrt(num / den) < 0.02);
    }

    #[test]
    fn four_to_one_tone_amplitude() {
        let y = resample_poly(&tone(20.0, 512.0, 2048), 1, 4);
        assert_eq!(y.len(), 512);
        let mid = &y[128..384];
        let amp = libm::sqrt(2.0 * mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64);
        assert!((amp - 1.0).abs() < 0.02, "{amp}");
    }

    #[test]
    fn rejects_alias_band() {
        // 90 Hz folds back into the output band unless filtered out.
        let y = resample_poly(&tone(90.0, 512.0, 2048), 1, 4);
        let mid = &y[128..384];
        let amp = libm::sqrt(2.0 * mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64);
        assert!(amp < 0.01, "{amp}");
    }

    #[test]
    fn identity_and_upsampling() {
        let x = EpochSet::new(tone(5.0, 100.0, 50), (1, 1, 50), alloc::vec![0], alloc::vec!["Cz".to_string()], 100.0).unwrap();
        assert_eq!(resample(&x, 100.0).unwrap(), x);
        assert!(matches!(resample(&x, 200.0), Err(Error::UpsamplingUnsupported { .. })));
        let y = resample(&x, 64.0).unwrap();
        assert_eq!(y.n_times(), 32);
    }
}
