//! On-disk formats: `.f32` epoch binaries with JSON sidecars, dataset
//! manifests, and JSON dumps of montages, operators and classifiers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fieldmap_core::montage::Montage;
use fieldmap_core::signal::EpochSet;
use fieldmap_core::simulate::{SimDataset, SimRun, SimSubject};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n_epochs: usize,
    pub n_channels: usize,
    pub n_times: usize,
    pub sfreq: f64,
    pub labels: Vec<u8>,
    pub channels: Vec<String>,
}

/// Sidecar fields without the labels, for target data.
#[derive(Debug, Deserialize)]
struct UnlabeledSidecar {
    n_epochs: usize,
    n_channels: usize,
    n_times: usize,
    sfreq: f64,
    channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub session: u32,
    pub run: u32,
    /// File stem relative to the dataset directory.
    pub file: String,
    pub n_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: u32,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub montage: Vec<String>,
    pub sfreq: f64,
    pub class_map: Vec<String>,
    pub subjects: Vec<SubjectEntry>,
}

pub fn class_map() -> Vec<String> {
    vec!["left_hand".into(), "right_hand".into()]
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes `stem.f32` (little-endian, C order) and `stem.json`.
pub fn write_epochs(stem: &Path, x: &EpochSet) -> Result<()> {
    let mut bytes = Vec::with_capacity(x.data().len() * 4);
    for v in x.data() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let bin = with_ext(stem, "f32");
    fs::write(&bin, bytes).with_context(|| format!("writing {}", bin.display()))?;
    let (n_epochs, n_channels, n_times) = x.shape();
    let side = Sidecar {
        n_epochs,
        n_channels,
        n_times,
        sfreq: x.sfreq,
        labels: x.labels.clone(),
        channels: x.channels.clone(),
    };
    write_json(&with_ext(stem, "json"), &side)
}

fn read_samples(stem: &Path, expected: usize) -> Result<Vec<f64>> {
    let bin = with_ext(stem, "f32");
    let bytes = fs::read(&bin).with_context(|| format!("reading {}", bin.display()))?;
    if bytes.len() != expected * 4 {
        bail!("{}: expected {} samples, found {} bytes", bin.display(), expected, bytes.len());
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

pub fn read_epochs(stem: &Path) -> Result<EpochSet> {
    let side: Sidecar = read_json(&with_ext(stem, "json"))?;
    let data = read_samples(stem, side.n_epochs * side.n_channels * side.n_times)?;
    Ok(EpochSet::new(
        data,
        (side.n_epochs, side.n_channels, side.n_times),
        side.labels,
        side.channels,
        side.sfreq,
    )?)
}

/// Reads an epoch file while discarding its labels (all set to 0).
pub fn read_epochs_unlabeled(stem: &Path) -> Result<EpochSet> {
    let side: UnlabeledSidecar = read_json(&with_ext(stem, "json"))?;
    let data = read_samples(stem, side.n_epochs * side.n_channels * side.n_times)?;
    Ok(EpochSet::new(
        data,
        (side.n_epochs, side.n_channels, side.n_times),
        vec![0; side.n_epochs],
        side.channels,
        side.sfreq,
    )?)
}

/// Labels of one run, for scoring.
pub fn read_labels(stem: &Path) -> Result<Vec<u8>> {
    let side: Sidecar = read_json(&with_ext(stem, "json"))?;
    Ok(side.labels)
}

fn run_stem(subject: u32, session: u32, run: u32) -> String {
    format!("sub-{subject:03}_ses-{session}_run-{run}")
}

pub fn write_dataset(root: &Path, ds: &SimDataset) -> Result<PathBuf> {
    let dir = root.join(&ds.name);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut subjects = Vec::new();
    for s in &ds.subjects {
        let mut runs = Vec::new();
        for r in &s.runs {
            let file = run_stem(s.id, r.session, r.run);
            write_epochs(&dir.join(&file), &r.epochs)?;
            runs.push(RunEntry {
                session: r.session,
                run: r.run,
                file,
                n_epochs: r.epochs.n_epochs(),
            });
        }
        subjects.push(SubjectEntry { id: s.id, runs });
    }
    let manifest = Manifest {
        name: ds.name.clone(),
        montage: ds.montage.names(),
        sfreq: ds.sfreq,
        class_map: class_map(),
        subjects,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(dir)
}

/// A dataset on disk: its manifest and directory.
#[derive(Debug, Clone)]
pub struct DatasetDir {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl DatasetDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn run_stem(&self, run: &RunEntry) -> PathBuf {
        self.dir.join(&run.file)
    }

    /// Loads every run. Labels are read only when `labeled`.
    pub fn load(&self, labeled: bool) -> Result<SimDataset> {
        let m = &self.manifest;
        let montage = Montage::from_names(&m.montage).with_context(|| format!("montage of {}", m.name))?;
        let mut subjects = Vec::new();
        for s in &m.subjects {
            let mut runs = Vec::new();
            for r in &s.runs {
                let stem = self.run_stem(r);
                let epochs = if labeled {
                    read_epochs(&stem)?
                } else {
                    read_epochs_unlabeled(&stem)?
                };
                if epochs.channels != m.montage {
                    bail!("{}: channels differ from the manifest montage", stem.display());
                }
                runs.push(SimRun {
                    session: r.session,
                    run: r.run,
                    epochs,
                });
            }
            subjects.push(SimSubject { id: s.id, runs });
        }
        Ok(SimDataset {
            name: m.name.clone(),
            montage,
            sfreq: m.sfreq,
            subjects,
        })
    }

    /// Labels of one subject, run by run in manifest order.
    pub fn subject_labels(&self, subject: u32) -> Result<Vec<u8>> {
        let s = self
            .manifest
            .subjects
            .iter()
            .find(|s| s.id == subject)
            .with_context(|| format!("{} has no subject {subject}", self.manifest.name))?;
        let mut labels = Vec::new();
        for r in &s.runs {
            labels.extend(read_labels(&self.run_stem(r))?);
        }
        Ok(labels)
    }
}

/// Every dataset directory (one holding a manifest) directly under `root`,
/// sorted by name.
pub fn discover(root: &Path) -> Result<Vec<DatasetDir>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.join(MANIFEST).is_file() {
            out.push(DatasetDir::open(&path)?);
        }
    }
    out.sort_by(|a, b| a.manifest.name.cmp(&b.manifest.name));
    if out.is_empty() {
        bail!("no dataset directories under {}", root.display());
    }
    Ok(out)
}

/// Template montage file: a JSON list of channel names.
pub fn read_montage(path: &Path) -> Result<Montage> {
    let names: Vec<String> = read_json(path)?;
    Ok(Montage::from_names(&names)?)
}
