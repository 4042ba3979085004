//! Synthetic two-class motor-imagery datasets with heterogeneous montages.
//!
//! Every trial mixes two radial motor dipoles beneath C3 and C4 (8–30 Hz
//! band-limited noise), 20 background dipoles with 1/f noise and white
//! sensor noise:
//!
//! ```text
//! X = gain · W_subject · G · S + N
//! ```
//!
//! where `W_subject = expm(Σ)` with `Σ` random symmetric. Class 0 (left hand)
//! attenuates the right-hemisphere source by `erd_factor`, class 1 (right
//! hand) the left-hemisphere source.
//!
//! Random streams are split as `[dataset, subject, kind, …]` through
//! [`crate::rng::derive_seed`], so any trial can be regenerated on its own.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::SpdMatrix;
use crate::headmodel::{leadfield, Dipole, SourceSpace, RADIUS_FRACTION};
use crate::linalg::Matrix;
use crate::montage::{scale3, standard_direction, Montage, HEAD_RADIUS};
use crate::rng::SimRng;
use crate::signal::{butter_bandpass, EpochSet};

/// Dipole moment of each motor source, A·m.
pub const MOTOR_MOMENT: f64 = 20e-9;
/// Dipole moment of each background source, A·m.
pub const BACKGROUND_MOMENT: f64 = 30e-9;
/// Standard deviation of the per-trial log-amplitude of each motor source.
pub const MOTOR_JITTER: f64 = 0.6;
pub const N_BACKGROUND: usize = 20;
pub const MOTOR_BAND: (f64, f64) = (8.0, 30.0);

const KIND_SUBJECT: u64 = 0;
const KIND_LABELS: u64 = 1;
const KIND_TRIAL: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSpec {
    pub name: String,
    pub montage: Vec<String>,
    pub n_subjects: u32,
    pub n_sessions: u32,
    pub n_runs: u32,
    pub trials_per_run: u32,
    pub sfreq: f64,
    pub trial_sec: f64,
    pub gain: f64,
    pub noise_std: f64,
    pub subject_shift_std: f64,
}

impl DatasetSpec {
    pub fn n_times(&self) -> usize {
        libm::round(self.sfreq * self.trial_sec) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSpec {
    pub datasets: Vec<DatasetSpec>,
    pub erd_factor: f64,
    pub seed: u64,
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Montages shaped like the six public corpora: 22, 3, 64, 30, 60 and 14
/// channels, with Cz as the only channel shared by all.
pub fn bench6_montages() -> [(&'static str, Vec<String>); 6] {
    [
        (
            "B1",
            strings(&[
                "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CP1", "CPz",
                "CP2", "CP4", "P1", "Pz", "P2", "POz",
            ]),
        ),
        ("B4", strings(&["C3", "Cz", "C4"])),
        (
            "P",
            strings(&[
                "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP5", "CP3",
                "CP1", "CPz", "CP2", "CP4", "CP6", "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5",
                "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "FT7", "FT8", "T7", "T8", "T9", "T10", "TP7", "TP8", "P7",
                "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2",
                "Iz",
            ]),
        ),
        (
            "S",
            strings(&[
                "F7", "AFF5h", "F3", "AFp1", "AFp2", "AFF6h", "F4", "F8", "AFF1h", "AFF2h", "Cz", "Pz", "FCC5h",
                "FCC3h", "CCP5h", "CCP3h", "T7", "P7", "P3", "PPO1h", "POO1", "POO2", "PPO2h", "P4", "CCP4h", "CCP6h",
                "P8", "T8", "FCC4h", "FCC6h",
            ]),
        ),
        (
            "W",
            strings(&[
                "Fp1", "Fpz", "Fp2", "AF3", "AF4", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "FT7", "FC5",
                "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8",
                "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "P7", "P5", "P3", "P1", "Pz", "P2", "P4",
                "P6", "P8", "PO7", "PO5", "PO3", "POz", "PO4", "PO6", "PO8", "O1", "Oz", "O2",
            ]),
        ),
        (
            "Z",
            strings(&["Fp1", "Fp2", "FC3", "FCz", "FC4", "C3", "Cz", "C4", "CP3", "CPz", "CP4", "O1", "Oz", "O2"]),
        ),
    ]
}

impl SimSpec {
    /// Six-dataset benchmark with the original datasets' session/run layout scaled to
    /// desk size.
    pub fn bench6(seed: u64) -> Self {
        // (sessions, runs, trials per run, sfreq, gain, noise)
        let layout = [
            (2, 6, 4, 250.0, 1.0, 1.0e-6),
            (5, 1, 10, 250.0, 0.6, 0.8e-6),
            (1, 1, 48, 160.0, 1.5, 1.5e-6),
            (3, 1, 16, 200.0, 0.8, 1.0e-6),
            (1, 1, 48, 200.0, 1.2, 1.2e-6),
            (3, 2, 8, 250.0, 2.0, 2.0e-6),
        ];
        let datasets = bench6_montages()
            .into_iter()
            .zip(layout)
            .map(|((name, montage), (n_sessions, n_runs, trials, sfreq, gain, noise))| DatasetSpec {
                name: name.to_string(),
                montage,
                n_subjects: 4,
                n_sessions,
                n_runs,
                trials_per_run: trials,
                sfreq,
                trial_sec: 2.0,
                gain,
                noise_std: noise,
                subject_shift_std: 0.1,
            })
            .collect();
        Self {
            datasets,
            erd_factor: 0.5,
            seed,
        }
    }

    /// Bench6 montages without any class effect, at reduced size.
    pub fn null(seed: u64) -> Self {
        let mut spec = Self::bench6(seed);
        spec.erd_factor = 1.0;
        for d in &mut spec.datasets {
            d.n_subjects = 3;
            d.trials_per_run = (d.trials_per_run * 3 / 4).max(2);
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if !(self.erd_factor > 0.0 && self.erd_factor <= 1.0) {
            return bad(format!("erd_factor {} outside (0, 1]", self.erd_factor));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if self.datasets[..i].iter().any(|o| o.name == d.name) {
                return bad(format!("duplicate dataset name {}", d.name));
            }
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                return bad(format!("invalid dataset name {:?}", d.name));
            }
            if d.n_subjects == 0 || d.n_sessions == 0 || d.n_runs == 0 || d.trials_per_run == 0 {
                return bad(format!("{}: counts must be at least 1", d.name));
            }
            if !(d.sfreq > 2.0 * MOTOR_BAND.1) {
                return bad(format!("{}: sfreq {} too low for the 8–30 Hz sources", d.name, d.sfreq));
            }
            if !(d.trial_sec > 0.0) || d.n_times() < 2 {
                return bad(format!("{}: trial too short", d.name));
            }
            if !(d.gain > 0.0) || !(d.noise_std >= 0.0) || !(d.subject_shift_std >= 0.0) {
                return bad(format!("{}: gain must be positive, noise and shift non-negative", d.name));
            }
            if d.montage.is_empty() {
                return bad(format!("{}: empty montage", d.name));
            }
            for ch in &d.montage {
                if standard_direction(ch).is_err() {
                    return bad(format!("{}: unknown channel {ch}", d.name));
                }
            }
            Montage::from_names(&d.montage).map_err(|e| Error::InvalidSpec(format!("{}: {e}", d.name)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub session: u32,
    pub run: u32,
    pub epochs: EpochSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSubject {
    pub id: u32,
    pub runs: Vec<SimRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub name: String,
    pub montage: Montage,
    pub sfreq: f64,
    pub subjects: Vec<SimSubject>,
}

/// Per-subject mixing: sensor signals are `mixing · sources`.
#[derive(Debug, Clone)]
pub struct SubjectModel {
    /// `gain · W · G`, channels × (2 motor + background) sources.
    pub mixing: Matrix,
    pub shift: SpdMatrix,
    pub sources: SourceSpace,
}

fn motor_dipoles() -> [Dipole; 2] {
    ["C3", "C4"].map(|name| {
        let dir = standard_direction(name).expect("standard position");
        Dipole {
            pos: scale3(&dir, RADIUS_FRACTION * HEAD_RADIUS),
            ori: dir,
        }
    })
}

fn random_unit(rng: &mut SimRng) -> [f64; 3] {
    loop {
        let v = [rng.normal(), rng.normal(), rng.normal()];
        let n = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if n > 1e-6 {
            return scale3(&v, 1.0 / n);
        }
    }
}

pub fn subject_model(spec: &SimSpec, dataset: usize, subject: u32) -> Result<SubjectModel> {
    let d = spec
        .datasets
        .get(dataset)
        .ok_or_else(|| Error::InvalidSpec(format!("no dataset {dataset}")))?;
    let montage = Montage::from_names(&d.montage)?;
    let mut rng = SimRng::stream(spec.seed, &[dataset as u64, subject as u64, KIND_SUBJECT]);
    let mut dipoles: Vec<Dipole> = motor_dipoles().to_vec();
    for _ in 0..N_BACKGROUND {
        let radius = (0.3 + 0.5 * rng.uniform()) * HEAD_RADIUS;
        let pos = scale3(&random_unit(&mut rng), radius);
        dipoles.push(Dipole {
            pos,
            ori: random_unit(&mut rng),
        });
    }
    let sources = SourceSpace::new(dipoles, RADIUS_FRACTION, HEAD_RADIUS)?;
    let g = leadfield(&sources, &montage)?.matrix;
    let p = montage.len();
    let mut s = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = d.subject_shift_std * rng.normal();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let shift = SpdMatrix::exp_sym(&s);
    let mixing = shift.matrix().matmul(&g).scale(d.gain);
    Ok(SubjectModel { mixing, shift, sources })
}

/// Balanced labels of one run, shuffled.
pub fn run_labels(spec: &SimSpec, dataset: usize, subject: u32, session: u32, run: u32) -> Vec<u8> {
    let n = spec.datasets[dataset].trials_per_run as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let mut rng = SimRng::stream(
        spec.seed,
        &[dataset as u64, subject as u64, KIND_LABELS, session as u64, run as u64],
    );
    rng.shuffle(&mut labels);
    labels
}

/// Source time courses (2 motor + background rows, moments in A·m) and
/// sensor noise of one trial.
pub fn trial_sources(
    spec: &SimSpec,
    dataset: usize,
    subject: u32,
    session: u32,
    run: u32,
    trial: u32,
    label: u8,
    n_channels: usize,
) -> Result<(Matrix, Matrix)> {
    let d = &spec.datasets[dataset];
    let t = d.n_times();
    let mut rng = SimRng::stream(
        spec.seed,
        &[dataset as u64, subject as u64, KIND_TRIAL, session as u64, run as u64, trial as u64],
    );
    let sos = butter_bandpass(4, MOTOR_BAND.0, MOTOR_BAND.1, d.sfreq)?;
    let mut s = Matrix::zeros(2 + N_BACKGROUND, t);
    for k in 0..2 {
        let jitter = libm::exp(MOTOR_JITTER * rng.normal());
        let white: Vec<f64> = (0..t).map(|_| rng.normal()).collect();
        let mut x = sos.filtfilt(&white);
        unit_rms(&mut x);
        // Row 0 is the left (C3) source, row 1 the right (C4) source.
        let attenuate = (k == 1 && label == 0) || (k == 0 && label == 1);
        let amp = MOTOR_MOMENT * jitter * if attenuate { spec.erd_factor } else { 1.0 };
        for (dst, v) in s.row_mut(k).iter_mut().zip(&x) {
            *dst = amp * v;
        }
    }
    let burn_in = d.sfreq as usize;
    for k in 0..N_BACKGROUND {
        let mut x = pink_noise(&mut rng, t, burn_in);
        unit_rms(&mut x);
        for (dst, v) in s.row_mut(2 + k).iter_mut().zip(&x) {
            *dst = BACKGROUND_MOMENT * v;
        }
    }
    let noise = Matrix::from_fn(n_channels, t, |_, _| d.noise_std * rng.normal());
    Ok((s, noise))
}

fn unit_rms(x: &mut [f64]) {
    let rms = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64);
    if rms > 0.0 {
        for v in x.iter_mut() {
            *v /= rms;
        }
    }
}

/// 1/f noise from white noise through a three-pole shaping filter
/// (poles at 0.99765, 0.963, 0.57).
fn pink_noise(rng: &mut SimRng, n: usize, burn_in: usize) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn_in {
        let w = rng.normal();
        b0 = 0.99765 * b0 + w * 0.099_046;
        b1 = 0.963 * b1 + w * 0.296_516_4;
        b2 = 0.57 * b2 + w * 1.052_691_3;
        if i >= burn_in {
            out.push(b0 + b1 + b2 + w * 0.1848);
        }
    }
    out
}

pub fn generate_subject(spec: &SimSpec, dataset: usize, subject: u32) -> Result<SimSubject> {
    let d = &spec.datasets[dataset];
    let model = subject_model(spec, dataset, subject)?;
    let p = d.montage.len();
    let t = d.n_times();
    let mut runs = Vec::with_capacity((d.n_sessions * d.n_runs) as usize);
    for session in 0..d.n_sessions {
        for run in 0..d.n_runs {
            let labels = run_labels(spec, dataset, subject, session, run);
            let mut data = Vec::with_capacity(labels.len() * p * t);
            for (trial, &label) in labels.iter().enumerate() {
                let (s, noise) = trial_sources(spec, dataset, subject, session, run, trial as u32, label, p)?;
                let x = model.mixing.matmul(&s).add(&noise);
                data.extend_from_slice(x.as_slice());
            }
            let epochs = EpochSet::new(data, (labels.len(), p, t), labels, d.montage.clone(), d.sfreq)?;
            runs.push(SimRun { session, run, epochs });
        }
    }
    Ok(SimSubject { id: subject, runs })
}

pub fn generate(spec: &SimSpec) -> Result<Vec<SimDataset>> {
    spec.validate()?;
    spec.datasets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let subjects = (1..=d.n_subjects)
                .map(|s| generate_subject(spec, i, s))
                .collect::<Result<Vec<_>>>()?;
            Ok(SimDataset {
                name: d.name.clone(),
                montage: Montage::from_names(&d.montage)?,
                sfreq: d.sfreq,
                subjects,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonize::{common_channels, union_channels};
    use alloc::vec;

    fn tiny(erd: f64) -> SimSpec {
        let mut spec = SimSpec::bench6(3);
        spec.erd_factor = erd;
        spec.datasets.truncate(2);
        for d in &mut spec.datasets {
            d.n_subjects = 1;
            d.n_sessions = 1;
            d.n_runs = 1;
            d.trials_per_run = 40;
            d.trial_sec = 1.0;
        }
        spec
    }

    #[test]
    fn bench_montages_match_the_original_layout() {
        let m = bench6_montages();
        let sizes: Vec<usize> = m.iter().map(|(_, n)| n.len()).collect();
        assert_eq!(sizes, vec![22, 3, 64, 30, 60, 14]);
        let montages: Vec<Montage> = m.iter().map(|(_, n)| Montage::from_names(n).unwrap()).collect();
        assert_eq!(common_channels(&montages).unwrap().names(), vec!["Cz"]);
        let lists: Vec<Vec<String>> = m.iter().map(|(_, n)| n.clone()).collect();
        assert_eq!(union_channels(&lists).len(), 84);
        SimSpec::bench6(1).validate().unwrap();
        SimSpec::null(1).validate().unwrap();
    }

    #[test]
    fn deterministic_and_independent_of_order() {
        let spec = tiny(0.5);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_subject(&spec, 1, 1).unwrap(), a[1].subjects[0]);
    }

    #[test]
    fn data_is_mixture_plus_noise() {
        let spec = tiny(0.5);
        let subj = generate_subject(&spec, 0, 1).unwrap();
        let model = subject_model(&spec, 0, 1).unwrap();
        let run = &subj.runs[0];
        for trial in [0usize, 7] {
            let label = run.epochs.labels[trial];
            let (s, noise) = trial_sources(&spec, 0, 1, 0, 0, trial as u32, label, 22).unwrap();
            let want = model.mixing.matmul(&s).add(&noise);
            assert_eq!(run.epochs.epoch(trial), want);
        }
    }

    #[test]
    fn contralateral_desynchronization() {
        let mut spec = tiny(0.3);
        spec.datasets[0].trials_per_run = 80;
        let subj = generate_subject(&spec, 0, 1).unwrap();
        let x = &subj.runs[0].epochs;
        let c3 = x.channels.iter().position(|c| c == "C3").unwrap();
        let (mut var, mut count) = ([0.0; 2], [0usize; 2]);
        for e in 0..x.n_epochs() {
            let row = x.epoch(e);
            let v = row.row(c3).iter().map(|v| v * v).sum::<f64>();
            var[x.labels[e] as usize] += v;
            count[x.labels[e] as usize] += 1;
        }
        // Right-hand trials (1) attenuate the left source under C3.
        assert!(var[1] / (count[1] as f64) < var[0] / (count[0] as f64));
    }

    #[test]
    fn labels_balanced() {
        let spec = tiny(0.5);
        let l = run_labels(&spec, 0, 1, 0, 0);
        assert_eq!(l.iter().filter(|&&v| v == 1).count(), 20);
    }

    #[test]
    fn invalid_specs() {
        let mut s = tiny(0.5);
        s.erd_factor = 0.0;
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        let mut s = tiny(0.5);
        s.datasets[0].n_subjects = 0;
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        let mut s = tiny(0.5);
        s.datasets[0].montage.push("XX9".into());
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        let mut s = tiny(0.5);
        s.datasets[1].name = s.datasets[0].name.clone();
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
    }
}
