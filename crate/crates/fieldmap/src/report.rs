//! Results files and the paired significance report.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use fieldmap_core::evaluate::{stars, wilcoxon_signed_rank, RunResult, StageTimings, SubjectScore};
use fieldmap_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRatio {
    pub reference: String,
    /// Harmonize + mean + fit seconds of this method.
    pub preparation_s: f64,
    pub reference_preparation_s: f64,
    /// `preparation_s / reference_preparation_s`.
    pub ratio: f64,
}

impl TimingRatio {
    pub fn new(reference: &str, this: &StageTimings, other: &StageTimings) -> Self {
        let (a, b) = (this.preparation(), other.preparation());
        Self {
            reference: reference.to_string(),
            preparation_s: a,
            reference_preparation_s: b,
            ratio: a / b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub method: String,
    pub target: String,
    pub config_hash: String,
    pub subjects: Vec<SubjectScore>,
    pub timing: StageTimings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ratio: Option<TimingRatio>,
}

impl ResultsFile {
    pub fn new(result: RunResult, config_hash: &str) -> Self {
        Self {
            method: result.method,
            target: result.target,
            config_hash: config_hash.to_string(),
            subjects: result.subjects,
            timing: result.timing,
            timing_ratio: None,
        }
    }

    pub fn mean_accuracy(&self) -> f64 {
        if self.subjects.is_empty() {
            return 0.0;
        }
        self.subjects.iter().map(|s| s.accuracy).sum::<f64>() / self.subjects.len() as f64
    }
}

/// A results file holds one object, or an array of them for several
/// targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultsDoc {
    One(ResultsFile),
    Many(Vec<ResultsFile>),
}

impl ResultsDoc {
    pub fn from_results(mut results: Vec<ResultsFile>) -> Self {
        if results.len() == 1 {
            ResultsDoc::One(results.remove(0))
        } else {
            ResultsDoc::Many(results)
        }
    }

    pub fn into_vec(self) -> Vec<ResultsFile> {
        match self {
            ResultsDoc::One(r) => vec![r],
            ResultsDoc::Many(v) => v,
        }
    }
}

pub fn read_results(path: &Path) -> Result<Vec<ResultsFile>> {
    Ok(crate::io::read_json::<ResultsDoc>(path)?.into_vec())
}

/// The JSON value with every timing field removed, for reproducibility
/// comparisons.
pub fn without_timing(value: &serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(map) => serde_json::Value::Object(
            map.iter()
                .filter(|(k, _)| !matches!(k.as_str(), "timing" | "timing_ratio"))
                .map(|(k, v)| (k.clone(), without_timing(v)))
                .collect(),
        ),
        serde_json::Value::Array(items) => serde_json::Value::Array(items.iter().map(without_timing).collect()),
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub method_a: String,
    pub method_b: String,
    pub n_pairs: usize,
    pub zero_pairs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub w_plus: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub exact: Option<bool>,
    pub stars: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Subject-paired Wilcoxon test between two sets of results. Subjects are
/// matched on (target dataset, subject id); both sides must cover exactly
/// the same subjects.
pub fn compare(a: &[ResultsFile], b: &[ResultsFile]) -> Result<StatsReport> {
    let collect = |files: &[ResultsFile]| -> Result<BTreeMap<(String, String), f64>> {
        let mut map = BTreeMap::new();
        for f in files {
            for s in &f.subjects {
                if map.insert((f.target.clone(), s.id.clone()), s.accuracy).is_some() {
                    bail!("subject {} of {} appears twice", s.id, f.target);
                }
            }
        }
        Ok(map)
    };
    let (ma, mb) = (collect(a)?, collect(b)?);
    if ma.keys().ne(mb.keys()) {
        bail!("the two results cover different subjects");
    }
    let xa: Vec<f64> = ma.values().copied().collect();
    let xb: Vec<f64> = mb.values().copied().collect();
    let n = xa.len();
    let mean = |x: &[f64]| if x.is_empty() { 0.0 } else { x.iter().sum::<f64>() / x.len() as f64 };
    let name = |files: &[ResultsFile]| {
        let mut m: Vec<&str> = files.iter().map(|f| f.method.as_str()).collect();
        m.dedup();
        m.join("+")
    };
    let mut report = StatsReport {
        method_a: name(a),
        method_b: name(b),
        n_pairs: n,
        zero_pairs: 0,
        mean_a: mean(&xa),
        mean_b: mean(&xb),
        w_plus: None,
        statistic: None,
        p_value: None,
        exact: None,
        stars: "ns".into(),
        note: None,
    };
    match wilcoxon_signed_rank(&xa, &xb) {
        Ok(w) => {
            report.zero_pairs = w.zero_pairs;
            report.w_plus = Some(w.w_plus);
            report.statistic = Some(w.statistic);
            report.p_value = Some(w.p_value);
            report.exact = Some(w.exact);
            report.stars = stars(w.p_value).into();
            if w.zero_pairs > 0 {
                report.note = Some(format!("{} zero differences dropped", w.zero_pairs));
            }
        }
        Err(Error::TooFewPairs { nonzero }) => {
            report.zero_pairs = n - nonzero;
            report.note = Some(format!(
                "{} of {n} pairs have zero difference; {nonzero} non-zero pairs are too few to test",
                n - nonzero
            ));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(method: &str, acc: &[f64]) -> ResultsFile {
        ResultsFile {
            method: method.into(),
            target: "T".into(),
            config_hash: String::new(),
            subjects: acc
                .iter()
                .enumerate()
                .map(|(i, &a)| SubjectScore {
                    id: format!("sub-{i:03}"),
                    accuracy: a,
                    n_epochs: 10,
                })
                .collect(),
            timing: StageTimings::default(),
            timing_ratio: None,
        }
    }

    #[test]
    fn identical_results_are_ns() {
        let a = file("fi", &[0.6, 0.7, 0.8, 0.9, 0.5, 0.6]);
        let r = compare(&[a.clone()], &[a]).unwrap();
        assert_eq!(r.stars, "ns");
        assert_eq!(r.zero_pairs, 6);
        assert!(r.p_value.is_none());
        assert!(r.note.unwrap().contains("zero difference"));
    }

    #[test]
    fn paired_test() {
        let a = file("fi", &[0.9, 0.8, 0.85, 0.95, 0.7, 0.75]);
        let b = file("ssi", &[0.6, 0.7, 0.8, 0.9, 0.5, 0.6]);
        let r = compare(&[a], &[b]).unwrap();
        assert_eq!(r.p_value, Some(0.03125));
        assert_eq!(r.stars, "*");
    }

    #[test]
    fn mismatched_subjects() {
        let a = file("fi", &[0.9, 0.8, 0.85, 0.95, 0.7, 0.75]);
        let b = file("ssi", &[0.6, 0.7, 0.8, 0.9, 0.5]);
        assert!(compare(&[a], &[b]).is_err());
    }

    #[test]
    fn timing_stripped() {
        let mut f = file("fi", &[0.5]);
        f.timing.fit_s = 3.0;
        f.timing_ratio = Some(TimingRatio::new("fi", &f.timing, &StageTimings { fit_s: 1.5, ..Default::default() }));
        assert_eq!(f.timing_ratio.as_ref().unwrap().ratio, 2.0);
        let v = without_timing(&serde_json::to_value(ResultsDoc::Many(vec![f.clone(), f])).unwrap());
        let text = v.to_string();
        assert!(!text.contains("timing"));
        assert!(text.contains("accuracy"));
    }
}
