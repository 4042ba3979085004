#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fieldmap_core::simulate::{DatasetSpec, SimSpec};

pub fn dataset(name: &str, montage: &[&str], n_subjects: u32, trials: u32) -> DatasetSpec {
    DatasetSpec {
        name: name.into(),
        montage: montage.iter().map(|s| s.to_string()).collect(),
        n_subjects,
        n_sessions: 1,
        n_runs: 2,
        trials_per_run: trials,
        sfreq: 160.0,
        trial_sec: 2.0,
        gain: 1.0,
        noise_std: 1e-6,
        subject_shift_std: 0.1,
    }
}

/// Three small datasets whose only shared channel is Cz.
pub fn tiny_spec(seed: u64) -> SimSpec {
    SimSpec {
        datasets: vec![
            dataset("A", &["Fz", "F3", "F4", "C3", "Cz", "C4", "P3", "Pz", "P4"], 2, 12),
            dataset("B", &["FC1", "FC2", "C3", "Cz", "C4", "CP1", "CP2"], 2, 12),
            dataset("C", &["FCz", "C5", "C1", "Cz", "C2", "C6", "CPz", "Oz"], 2, 12),
        ],
        erd_factor: 0.3,
        seed,
    }
}

pub fn fieldmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldmap"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn fieldmap_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn write_spec(dir: &Path, spec: &SimSpec) -> PathBuf {
    let path = dir.join("spec.json");
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

/// Writes `spec` to `dir/data` through the `simulate` subcommand.
pub fn simulate(dir: &Path, spec: &SimSpec) -> PathBuf {
    let spec_path = write_spec(dir, spec);
    let data = dir.join("data");
    let out = fieldmap(&["simulate", "--config", spec_path.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    data
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
