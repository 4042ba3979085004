//! Evaluation harness: preprocessing, harmonization, leave-one-dataset-out
//! folds, learning curves and the calibration upper bound.
//!
//! Per-subject features (harmonized covariances, whitening mean, tangent
//! vectors) are cached per feature space, so datasets shared between folds
//! are processed once. Each cached entry keeps the stage times measured
//! when it was computed, and every fold reports the sum over the entries it
//! uses: the timings describe a standalone run of that fold.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fieldmap_core::evaluate::{RunResult, StageTimings, SubjectScore};
use fieldmap_core::geometry::SpdMatrix;
use fieldmap_core::harmonize::{
    apply_operator, comimp_fit_with, comimp_transform, common_channels, dt_expand, selection_operator,
    ssi_operator_with, union_channels, FieldInterpolator, ImputerModel, InterpOperator, SsiParams,
};
use fieldmap_core::linalg::Matrix;
use fieldmap_core::model::{
    accuracy, fit_tangents, predict_tangents, Alignment, DomainId, DomainRecord, EpochOrigin,
};
use fieldmap_core::montage::{normalize_name, Montage};
use fieldmap_core::signal::{bandpass_filtfilt_order, epochs_to_covs, resample, EpochSet};
use fieldmap_core::simulate::SimDataset;
use fieldmap_core::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Align, Method, RunConfig};

pub const MIN_PER_CLASS: usize = 4;

/// One subject after band-pass filtering and resampling, runs concatenated.
#[derive(Debug, Clone)]
pub struct Subject {
    pub id: u32,
    pub epochs: EpochSet,
    pub origins: Vec<EpochOrigin>,
}

impl Subject {
    /// The same epochs with every label replaced by 0.
    fn blind(&self) -> EpochSet {
        let mut x = self.epochs.clone();
        x.labels.iter_mut().for_each(|l| *l = 0);
        x
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub montage: Montage,
    pub subjects: Vec<Subject>,
}

pub fn preprocess(ds: &SimDataset, cfg: &RunConfig) -> Result<Prepared> {
    let subjects = ds
        .subjects
        .par_iter()
        .map(|s| {
            let mut sets = Vec::with_capacity(s.runs.len());
            let mut origins = Vec::new();
            for r in &s.runs {
                let mut x = bandpass_filtfilt_order(&r.epochs, cfg.band[0], cfg.band[1], cfg.filter_order)?;
                if x.sfreq != cfg.resample {
                    x = resample(&x, cfg.resample)?;
                }
                origins.extend(std::iter::repeat(EpochOrigin {
                    session: r.session,
                    run: r.run,
                }).take(x.n_epochs()));
                sets.push(x);
            }
            let epochs = EpochSet::concat(&sets).with_context(|| format!("{} subject {}", ds.name, s.id))?;
            Ok(Subject {
                id: s.id,
                epochs,
                origins,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        name: ds.name.clone(),
        montage: ds.montage.clone(),
        subjects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Role {
    Train,
    Target,
}

#[derive(Debug)]
struct Features {
    z: Matrix,
    timing: StageTimings,
}

#[derive(Debug)]
struct TimedOp {
    op: InterpOperator,
    seconds: f64,
}

enum Space {
    Operators { key: String, ops: HashMap<usize, Arc<TimedOp>> },
    Union { key: String, names: Vec<String> },
    Imputed { key: String, model: Arc<ImputerModel>, seconds: f64 },
}

impl Space {
    fn key(&self) -> &str {
        match self {
            Space::Operators { key, .. } | Space::Union { key, .. } | Space::Imputed { key, .. } => key,
        }
    }

    fn build_seconds(&self, datasets: &[usize]) -> f64 {
        match self {
            Space::Operators { ops, .. } => datasets.iter().filter_map(|d| ops.get(d)).map(|o| o.seconds).sum(),
            Space::Union { .. } => 0.0,
            Space::Imputed { seconds, .. } => *seconds,
        }
    }

    fn channels(&self, target: usize) -> Vec<String> {
        match self {
            Space::Operators { ops, .. } => ops[&target].op.target_names.clone(),
            Space::Union { names, .. } => names.clone(),
            Space::Imputed { model, .. } => model.union_names.clone(),
        }
    }
}

/// Outcome of one fold plus the feature space it used.
#[derive(Debug, Clone)]
pub struct FoldOutput {
    pub result: RunResult,
    pub train: Vec<String>,
    /// Channels of the harmonized space.
    pub channels: Vec<String>,
}

/// Channels of the target montage covered by the training montages.
pub fn channels_seen(target: &Montage, train: &[&Montage]) -> usize {
    let seen: Vec<String> = train.iter().flat_map(|m| m.names()).map(|n| normalize_name(&n)).collect();
    target
        .names()
        .iter()
        .filter(|n| seen.contains(&normalize_name(n)))
        .count()
}

type FeatureKey = (String, usize, usize, Role);

pub struct Harness {
    pub cfg: RunConfig,
    pub template: Montage,
    pub datasets: Vec<Prepared>,
    interpolator: OnceLock<(FieldInterpolator, f64)>,
    ops: Mutex<HashMap<(String, usize), Arc<TimedOp>>>,
    features: Mutex<HashMap<FeatureKey, Arc<Features>>>,
}

impl Harness {
    /// Preprocesses the datasets; they are kept sorted by name.
    pub fn new(cfg: RunConfig, datasets: &[SimDataset]) -> Result<Self> {
        cfg.validate()?;
        let template = cfg.template_montage()?;
        let mut prepared = datasets.iter().map(|d| preprocess(d, &cfg)).collect::<Result<Vec<_>>>()?;
        prepared.sort_by(|a, b| a.name.cmp(&b.name));
        for w in prepared.windows(2) {
            if w[0].name == w[1].name {
                bail!("duplicate dataset {}", w[0].name);
            }
        }
        Ok(Self {
            cfg,
            template,
            datasets: prepared,
            interpolator: OnceLock::new(),
            ops: Mutex::new(HashMap::new()),
            features: Mutex::new(HashMap::new()),
        })
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.datasets
            .iter()
            .position(|d| d.name == name)
            .with_context(|| format!("unknown dataset {name}"))
    }

    pub fn names(&self) -> Vec<String> {
        self.datasets.iter().map(|d| d.name.clone()).collect()
    }

    fn interpolator(&self) -> Result<&(FieldInterpolator, f64)> {
        if let Some(fi) = self.interpolator.get() {
            return Ok(fi);
        }
        let t = Instant::now();
        let fi = FieldInterpolator::new(self.template.head_radius)?;
        Ok(self.interpolator.get_or_init(|| (fi, t.elapsed().as_secs_f64())))
    }

    fn operator(&self, key: &str, d: usize, build: impl FnOnce() -> Result<InterpOperator>) -> Result<Arc<TimedOp>> {
        let k = (key.to_string(), d);
        if let Some(op) = self.ops.lock().unwrap().get(&k) {
            return Ok(op.clone());
        }
        let t = Instant::now();
        let op = build()?;
        let timed = Arc::new(TimedOp {
            op,
            seconds: t.elapsed().as_secs_f64(),
        });
        self.ops.lock().unwrap().insert(k, timed.clone());
        Ok(timed)
    }

    fn space(&self, method: Method, train: &[usize], target: usize) -> Result<Space> {
        let mut involved: Vec<usize> = train.to_vec();
        involved.push(target);
        let cfg = &self.cfg;
        let template_key = self.template.names().join(",");
        match method {
            Method::Fi => {
                let (fi, grid_s) = self.interpolator()?;
                let key = format!("fi|{}|{template_key}", cfg.fi_reg);
                let mut ops = HashMap::new();
                for &d in &involved {
                    let src = &self.datasets[d].montage;
                    let mut op = self.operator(&key, d, || Ok(fi.operator(src, &self.template, cfg.fi_reg)?))?;
                    if d == involved[0] {
                        // The source grid is shared; charge it once per fold.
                        op = Arc::new(TimedOp {
                            op: op.op.clone(),
                            seconds: op.seconds + grid_s,
                        });
                    }
                    ops.insert(d, op);
                }
                Ok(Space::Operators { key, ops })
            }
            Method::Ssi => {
                let params = SsiParams {
                    m_order: cfg.ssi_order,
                    reg: cfg.ssi_reg,
                    ..SsiParams::default()
                };
                let key = format!("ssi|{}|{}|{template_key}", cfg.ssi_order, cfg.ssi_reg);
                let mut ops = HashMap::new();
                for &d in &involved {
                    let src = &self.datasets[d].montage;
                    ops.insert(d, self.operator(&key, d, || Ok(ssi_operator_with(src, &self.template, &params)?))?);
                }
                Ok(Space::Operators { key, ops })
            }
            Method::Common => {
                let montages: Vec<Montage> = involved.iter().map(|&d| self.datasets[d].montage.clone()).collect();
                let keep = common_channels(&montages)?;
                let key = format!("common|{}", keep.names().join(","));
                let mut ops = HashMap::new();
                for &d in &involved {
                    let src = &self.datasets[d].montage;
                    ops.insert(d, self.operator(&key, d, || Ok(selection_operator(src, &keep)?))?);
                }
                Ok(Space::Operators { key, ops })
            }
            Method::Dt => {
                let lists: Vec<Vec<String>> = involved.iter().map(|&d| self.datasets[d].montage.names()).collect();
                let names = union_channels(&lists);
                let key = format!("dt|{}", names.join(","));
                Ok(Space::Union { key, names })
            }
            Method::Comimp => {
                let lists: Vec<Vec<String>> = train.iter().map(|&d| self.datasets[d].montage.names()).collect();
                let union = union_channels(&lists);
                let t = Instant::now();
                let training: Vec<EpochSet> = train
                    .iter()
                    .flat_map(|&d| self.datasets[d].subjects.iter().map(|s| s.epochs.clone()))
                    .collect();
                let model = comimp_fit_with(&training, &union, &cfg.comimp)?;
                let seconds = t.elapsed().as_secs_f64();
                let train_names: Vec<&str> = train.iter().map(|&d| self.datasets[d].name.as_str()).collect();
                let p = &cfg.comimp;
                let key = format!("comimp|{}|{}|{}|{}", train_names.join(","), p.ridge, p.max_iter, p.tol);
                Ok(Space::Imputed {
                    key,
                    model: Arc::new(model),
                    seconds,
                })
            }
            Method::Calibration => bail!("calibration does not use a shared feature space"),
        }
    }

    fn harmonized_covs(&self, space: &Space, d: usize, x: &EpochSet) -> Result<Vec<SpdMatrix>> {
        Ok(match space {
            Space::Operators { ops, .. } => epochs_to_covs(&apply_operator(&ops[&d].op, x)?)?,
            Space::Union { names, .. } => epochs_to_covs(x)?
                .iter()
                .map(|c| Ok(dt_expand(c, &x.channels, names)?.matrix))
                .collect::<Result<Vec<_>>>()?,
            Space::Imputed { model, .. } => {
                let union: Vec<String> = model.union_names.iter().map(|n| normalize_name(n)).collect();
                let keep: Vec<usize> = (0..x.n_channels())
                    .filter(|&i| union.contains(&normalize_name(&x.channels[i])))
                    .collect();
                epochs_to_covs(&comimp_transform(model, &x.select_channels(&keep))?)?
            }
        })
    }

    fn features(&self, space: &Space, align: Alignment, d: usize, s: usize, role: Role) -> Result<Arc<Features>> {
        let key = (format!("{}|{align:?}", space.key()), d, s, role);
        if let Some(f) = self.features.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let ds = &self.datasets[d];
        let subject = &ds.subjects[s];
        let id = DomainId {
            dataset: ds.name.clone(),
            subject: subject.id,
        };
        let mut timing = StageTimings::default();

        let t = Instant::now();
        let x = match role {
            Role::Train => subject.epochs.clone(),
            Role::Target => subject.blind(),
        };
        let covs = self.harmonized_covs(space, d, &x)?;
        timing.harmonize_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let record = match role {
            Role::Train => DomainRecord::training(id, covs, x.labels.clone(), align)?,
            Role::Target => DomainRecord::target(id, covs, x.labels.clone(), &subject.origins, align)?,
        };
        timing.mean_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let z = record.tangent_vectors()?;
        let elapsed = t.elapsed().as_secs_f64();
        match role {
            Role::Train => timing.fit_s = elapsed,
            Role::Target => timing.predict_s = elapsed,
        }
        let f = Arc::new(Features { z, timing });
        self.features.lock().unwrap().insert(key, f.clone());
        Ok(f)
    }

    /// Trains on `train` and scores each subject of `target`.
    pub fn run_fold(&self, method: Method, align: Align, train: &[usize], target: usize) -> Result<FoldOutput> {
        if method == Method::Calibration {
            return self.calibration(target).map(|result| FoldOutput {
                result,
                train: Vec::new(),
                channels: self.datasets[target].montage.names(),
            });
        }
        let mut train = train.to_vec();
        train.sort_by(|&a, &b| self.datasets[a].name.cmp(&self.datasets[b].name));
        train.dedup();
        if train.is_empty() || train.contains(&target) {
            bail!("training pool must be non-empty and exclude the target");
        }
        let align = Alignment::from(align);
        let space = self.space(method, &train, target)?;
        let mut involved = train.clone();
        involved.push(target);
        let mut timing = StageTimings {
            harmonize_s: space.build_seconds(&involved),
            ..StageTimings::default()
        };

        let jobs: Vec<(usize, usize)> = train
            .iter()
            .flat_map(|&d| (0..self.datasets[d].subjects.len()).map(move |s| (d, s)))
            .collect();
        let train_features = jobs
            .par_iter()
            .map(|&(d, s)| self.features(&space, align, d, s, Role::Train))
            .collect::<Result<Vec<_>>>()?;
        let domains: Vec<(Matrix, Vec<u8>)> = jobs
            .iter()
            .zip(&train_features)
            .map(|(&(d, s), f)| (f.z.clone(), self.datasets[d].subjects[s].epochs.labels.clone()))
            .collect();
        for f in &train_features {
            timing.add(&f.timing);
        }
        let t = Instant::now();
        let mut clf = fit_tangents(&domains, self.cfg.c, align)?;
        timing.fit_s += t.elapsed().as_secs_f64();
        clf.channels = space.channels(target);

        let n_target = self.datasets[target].subjects.len();
        let target_features = (0..n_target)
            .into_par_iter()
            .map(|s| self.features(&space, align, target, s, Role::Target))
            .collect::<Result<Vec<_>>>()?;
        let mut subjects = Vec::with_capacity(n_target);
        for (s, f) in target_features.iter().enumerate() {
            timing.add(&f.timing);
            let t = Instant::now();
            let pred = predict_tangents(&clf, &f.z);
            timing.predict_s += t.elapsed().as_secs_f64();
            let subject = &self.datasets[target].subjects[s];
            subjects.push(score(subject, &pred.labels));
        }
        Ok(FoldOutput {
            result: RunResult {
                method: method.to_string(),
                target: self.datasets[target].name.clone(),
                subjects,
                timing,
            },
            train: train.iter().map(|&d| self.datasets[d].name.clone()).collect(),
            channels: clf.channels,
        })
    }

    /// Leave-one-dataset-out over every dataset, or only `target`.
    pub fn lodo(&self, method: Method, align: Align, target: Option<&str>) -> Result<Vec<FoldOutput>> {
        if self.datasets.len() < 2 {
            bail!("leave-one-dataset-out needs at least 2 datasets, found {}", self.datasets.len());
        }
        let targets: Vec<usize> = match target {
            Some(name) => vec![self.index_of(name)?],
            None => (0..self.datasets.len()).collect(),
        };
        targets
            .into_iter()
            .map(|t| {
                let train: Vec<usize> = (0..self.datasets.len()).filter(|&d| d != t).collect();
                self.run_fold(method, align, &train, t)
            })
            .collect()
    }

    /// Adds training datasets one at a time in `order`, comparing each
    /// point with field interpolation on the same training pool.
    pub fn learning_curve(&self, method: Method, align: Align, target: usize, order: &[usize]) -> Result<Vec<CurvePoint>> {
        if order.is_empty() || order.contains(&target) {
            bail!("order must list training datasets other than the target");
        }
        let mut points = Vec::with_capacity(order.len());
        for k in 1..=order.len() {
            let included = &order[..k];
            let out = self.run_fold(method, align, included, target)?;
            let reference = if method == Method::Fi {
                out.result.clone()
            } else {
                self.run_fold(Method::Fi, align, included, target)?.result
            };
            let difference = out
                .result
                .subjects
                .iter()
                .zip(&reference.subjects)
                .map(|(a, b)| a.accuracy - b.accuracy)
                .collect();
            let train: Vec<&Montage> = included.iter().map(|&d| &self.datasets[d].montage).collect();
            points.push(CurvePoint {
                included: included.iter().map(|&d| self.datasets[d].name.clone()).collect(),
                target_channels_seen: channels_seen(&self.datasets[target].montage, &train),
                result: out.result,
                difference_vs_fi: difference,
            });
        }
        Ok(points)
    }

    /// Within-subject upper bound: the first half of each subject's epochs
    /// (in recording order) trains, the second half is scored.
    pub fn calibration(&self, target: usize) -> Result<RunResult> {
        let ds = &self.datasets[target];
        let align = Alignment::from(self.cfg.align);
        let c = self.cfg.c;
        let scored = ds
            .subjects
            .par_iter()
            .map(|subject| {
                let mut timing = StageTimings::default();
                let n = subject.epochs.n_epochs();
                let half = n / 2;
                let first: Vec<usize> = (0..half).collect();
                let second: Vec<usize> = (half..n).collect();
                let labels = &subject.epochs.labels;
                for part in [&first, &second] {
                    for class in 0..2u8 {
                        let found = part.iter().filter(|&&i| labels[i] == class).count();
                        if found < MIN_PER_CLASS {
                            return Err(Error::TooFewEpochs {
                                needed: MIN_PER_CLASS,
                                found,
                            }
                            .into());
                        }
                    }
                }
                let id = DomainId {
                    dataset: ds.name.clone(),
                    subject: subject.id,
                };
                let t = Instant::now();
                let train_x = subject.epochs.select_epochs(&first);
                let test_x = subject.epochs.select_epochs(&second);
                let train_covs = epochs_to_covs(&train_x)?;
                let test_covs = epochs_to_covs(&test_x)?;
                timing.harmonize_s = t.elapsed().as_secs_f64();

                let t = Instant::now();
                let train = DomainRecord::training(id.clone(), train_covs, train_x.labels.clone(), align)?;
                timing.mean_s = t.elapsed().as_secs_f64();
                let test = DomainRecord {
                    id,
                    labels: vec![0; test_covs.len()],
                    covariances: test_covs,
                    whitening_mean: train.whitening_mean.clone(),
                    mean_scope: train.mean_scope,
                    alignment: align,
                };

                let t = Instant::now();
                let clf = fit_tangents(&[(train.tangent_vectors()?, train.labels.clone())], c, align)?;
                timing.fit_s = t.elapsed().as_secs_f64();

                let t = Instant::now();
                let pred = predict_tangents(&clf, &test.tangent_vectors()?);
                timing.predict_s = t.elapsed().as_secs_f64();
                let acc = accuracy(&pred.labels, &test_x.labels);
                Ok((
                    SubjectScore {
                        id: subject_id(subject.id),
                        accuracy: acc,
                        n_epochs: second.len(),
                    },
                    timing,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut timing = StageTimings::default();
        let mut subjects = Vec::with_capacity(scored.len());
        for (s, t) in scored {
            timing.add(&t);
            subjects.push(s);
        }
        Ok(RunResult {
            method: Method::Calibration.to_string(),
            target: ds.name.clone(),
            subjects,
            timing,
        })
    }
}

pub fn subject_id(id: u32) -> String {
    format!("sub-{id:03}")
}

/// Scoring step: the only place target labels are read.
fn score(subject: &Subject, predicted: &[u8]) -> SubjectScore {
    SubjectScore {
        id: subject_id(subject.id),
        accuracy: accuracy(predicted, &subject.epochs.labels),
        n_epochs: predicted.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub included: Vec<String>,
    pub target_channels_seen: usize,
    pub result: RunResult,
    /// Per-subject accuracy minus the field-interpolation accuracy.
    pub difference_vs_fi: Vec<f64>,
}
