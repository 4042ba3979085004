//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fieldmap::config::{Align, Method, RunConfig};
use fieldmap::harness::Harness;
use fieldmap::io::discover;
use fieldmap::report::{read_results, without_timing, ResultsFile};
use fieldmap_core::evaluate::wilcoxon_signed_rank;
use fieldmap_core::geometry::{geometric_mean, recenter, riemannian_distance, SpdMatrix};
use fieldmap_core::harmonize::{dt_expand, fi_operator, ssi_operator, union_channels, FieldInterpolator, FI_REG};
use fieldmap_core::headmodel::leadfield;
use fieldmap_core::linalg::Matrix;
use fieldmap_core::model::LogisticObjective;
use fieldmap_core::montage::{normalize_name, template_17, ten_five_names, Montage, HEAD_RADIUS};
use fieldmap_core::rng::SimRng;
use fieldmap_core::simulate::{bench6_montages, generate, SimSpec};
use fieldmap_core::Error;
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn report(line: &str) {
    // Written to the process stdout so the line survives test capture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn run_criterion(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    report(&format!("{status} [{id}] {name} ({secs:.1} s): {detail}"));
    outcome.is_ok()
}

// Independent oracles in nalgebra.

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn na_spectral(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn na_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let isq = na_spectral(a, |v| 1.0 / v.sqrt());
    let w = &isq * b * &isq;
    let w = (&w + w.transpose()) * 0.5;
    w.symmetric_eigen().eigenvalues.iter().map(|v| v.ln().powi(2)).sum::<f64>().sqrt()
}

fn random_spd(rng: &mut SimRng, n: usize) -> SpdMatrix {
    let a = Matrix::from_fn(n, 2 * n, |_, _| rng.normal());
    let scale = (2.0 * rng.uniform() - 1.0).exp();
    SpdMatrix::new(a.matmul_t(&a).scale(scale / n as f64).add(&Matrix::identity(n).scale(0.05)).symmetrized()).unwrap()
}

fn geometry_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = SimRng::seed_from(2024);
    let (mut ident, mut sym, mut tri, mut aff, mut oracle) = (0f64, 0f64, f64::INFINITY, 0f64, 0f64);
    for _ in 0..1000 {
        let n = 4 + (rng.next_u64() % 14) as usize;
        let (a, b, c) = (random_spd(&mut rng, n), random_spd(&mut rng, n), random_spd(&mut rng, n));
        let w = Matrix::from_fn(n, n, |i, j| rng.normal() * 0.4 + if i == j { 1.0 } else { 0.0 });
        let d = |x: &SpdMatrix, y: &SpdMatrix| riemannian_distance(x, y).unwrap();
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        ident = ident.max(d(&a, &a));
        sym = sym.max((ab - ba).abs());
        tri = tri.min(ab + bc - ac);
        let moved = d(&a.congruence(&w).unwrap(), &b.congruence(&w).unwrap());
        aff = aff.max((moved - ab).abs() / ab.max(1.0));
        oracle = oracle.max((ab - na_distance(&to_na(a.matrix()), &to_na(b.matrix()))).abs() / ab.max(1.0));
    }

    let mut midpoint = 0f64;
    for _ in 0..50 {
        let n = 4 + (rng.next_u64() % 14) as usize;
        let (a, b) = (random_spd(&mut rng, n), random_spd(&mut rng, n));
        let got = to_na(geometric_mean(&[a.clone(), b.clone()], 1e-10, 50).unwrap().mean.matrix());
        let (na, nb) = (to_na(a.matrix()), to_na(b.matrix()));
        let sq = na_spectral(&na, f64::sqrt);
        let isq = na_spectral(&na, |v| 1.0 / v.sqrt());
        let inner = &isq * nb * &isq;
        let want = &sq * na_spectral(&((&inner + inner.transpose()) * 0.5), f64::sqrt) * &sq;
        midpoint = midpoint.max((&got - &want).norm() / want.norm());
    }

    let mut recentred = 0f64;
    for _ in 0..20 {
        let n = 4 + (rng.next_u64() % 14) as usize;
        let set: Vec<SpdMatrix> = (0..12).map(|_| random_spd(&mut rng, n)).collect();
        let mean = geometric_mean(&set, 1e-10, 50).unwrap().mean;
        let white = recenter(&set, &mean).unwrap();
        let m = geometric_mean(&white, 1e-10, 50).unwrap().mean;
        recentred = recentred.max(riemannian_distance(&m, &SpdMatrix::identity(n)).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let tol = 1e-8;
    check(
        ident <= tol && sym <= tol && tri >= -tol && aff <= tol && oracle <= tol && midpoint <= tol && recentred <= 1e-6 && secs < 60.0,
        format!(
            "identity {ident:.1e}, symmetry {sym:.1e}, triangle slack min {tri:.2e}, affine {aff:.1e}, \
             oracle {oracle:.1e}, midpoint {midpoint:.1e}, recentred mean {recentred:.1e}"
        ),
    )
}

fn dt_isometry() -> Outcome {
    let mut rng = SimRng::seed_from(7);
    let all = ten_five_names();
    let mut worst = 0f64;
    for _ in 0..100 {
        let mut idx: Vec<usize> = (0..all.len()).collect();
        rng.shuffle(&mut idx);
        let names: Vec<String> = idx[..5].iter().map(|&i| all[i].clone()).collect();
        let union = union_channels(&[names.clone(), idx[5..12].iter().map(|&i| all[i].clone()).collect()]);
        assert_eq!(union.len(), 12);
        let (a, b) = (random_spd(&mut rng, 5), random_spd(&mut rng, 5));
        let ea = dt_expand(&a, &names, &union).unwrap().matrix;
        let eb = dt_expand(&b, &names, &union).unwrap().matrix;
        let d = riemannian_distance(&a, &b).unwrap();
        worst = worst.max((riemannian_distance(&ea, &eb).unwrap() - d).abs());
    }
    check(worst < 1e-8, format!("max |Δδ_R| = {worst:.1e} over 100 pairs, 5 → 12"))
}

fn fi_error(src: &Montage, fi: &FieldInterpolator, reg: f64, draws: usize) -> (f64, f64) {
    let dst = template_17();
    let lf_s = leadfield(&fi.sources, src).unwrap();
    let lf_d = leadfield(&fi.sources, &dst).unwrap();
    let a = fi_operator(src, &dst, &lf_s, &lf_d, reg).unwrap();
    let mut rng = SimRng::seed_from(99);
    let (mut worst, mut total) = (0f64, 0f64);
    for _ in 0..draws {
        let s: Vec<f64> = (0..fi.sources.n_components()).map(|_| rng.normal()).collect();
        let x = lf_s.matrix.matvec(&s);
        let want = lf_d.matrix.matvec(&s);
        let got = a.matrix.matvec(&x);
        let num: f64 = got.iter().zip(&want).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|w| w * w).sum::<f64>().sqrt();
        worst = worst.max(num / den);
        total += num / den;
    }
    (worst, total / draws as f64)
}

fn interpolation_fidelity() -> Outcome {
    let held: Vec<String> = template_17().names().iter().map(|n| normalize_name(n)).collect();
    let without_template = |names: Vec<String>| {
        let kept: Vec<String> = names.into_iter().filter(|n| !held.contains(&normalize_name(n))).collect();
        Montage::from_names(&kept).unwrap()
    };
    let fi = FieldInterpolator::new(HEAD_RADIUS).unwrap();
    let dense = without_template(ten_five_names());
    // Noise-free data: a vanishing regularizer, with the default shown too.
    let (worst, mean) = fi_error(&dense, &fi, 1e-6, 50);
    let (default_worst, _) = fi_error(&dense, &fi, FI_REG, 50);
    let lists: Vec<Vec<String>> = bench6_montages().into_iter().map(|(_, m)| m).collect();
    let sparse = without_template(union_channels(&lists));
    let (sparse_worst, sparse_mean) = fi_error(&sparse, &fi, 1e-6, 50);

    let src = Montage::from_names(&lists[2]).unwrap();
    let ssi = ssi_operator(&src, &template_17(), 4, fieldmap_core::harmonize::SSI_REG).unwrap();
    let constant = (0..ssi.matrix.rows())
        .map(|r| (ssi.matrix.row(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0f64, f64::max);

    let targets: Vec<String> = template_17().names().into_iter().filter(|n| src.index_of(n).is_some()).collect();
    let dst = Montage::from_names(&targets).unwrap();
    let mut rng = SimRng::seed_from(5);
    let x: Vec<f64> = (0..src.len()).map(|_| rng.normal()).collect();
    let scale = x.iter().fold(0f64, |m, v| m.max(v.abs()));
    let mut coincident = 0f64;
    for reg in [1e-9, 1e-12, 0.0] {
        let y = ssi_operator(&src, &dst, 4, reg).unwrap().matrix.matvec(&x);
        coincident = targets
            .iter()
            .enumerate()
            .map(|(t, n)| (y[t] - x[src.index_of(n).unwrap()]).abs() / scale)
            .fold(0f64, f64::max);
    }
    check(
        worst <= 0.02 && constant <= 1e-9 && coincident <= 1e-6,
        format!(
            "FI error {:.2}% worst / {:.2}% mean ({} electrodes, 10-5, reg 1e-6; {:.2}% worst at reg {FI_REG:e}); {:.1}% worst / {:.1}% mean with the \
             {}-electrode benchmark union; SSI |A·1 − 1| {constant:.1e}; SSI coincident {coincident:.1e} at {} electrodes",
            100.0 * worst,
            100.0 * mean,
            dense.len(),
            100.0 * default_worst,
            100.0 * sparse_worst,
            100.0 * sparse_mean,
            sparse.len(),
            targets.len()
        ),
    )
}

fn logistic_gradient() -> Outcome {
    let mut rng = SimRng::seed_from(17);
    let mut worst = 0f64;
    for _ in 0..10 {
        let (n, d) = (60, 12);
        let z = Matrix::from_fn(n, d, |_, _| rng.normal());
        let y: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
        let f = LogisticObjective::new(&z, &y, 0.5 + rng.uniform() * 4.0);
        let theta: Vec<f64> = (0..=d).map(|_| rng.normal()).collect();
        let g = f.gradient(&theta);
        let fd: Vec<f64> = (0..=d)
            .map(|k| {
                let h = 1e-5 * theta[k].abs().max(1.0);
                let (mut p, mut m) = (theta.clone(), theta.clone());
                p[k] += h;
                m[k] -= h;
                (f.value(&p) - f.value(&m)) / (2.0 * h)
            })
            .collect();
        let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    check(worst <= 1e-5, format!("max relative error {worst:.1e} over 10 problems"))
}

/// Two-sided p from all 2ⁿ sign assignments of the mid-ranked |differences|.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = (0..n)
        .map(|i| {
            let below = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
            let equal = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let (mut low, mut high) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            low += 1;
        }
        if w >= observed - 1e-9 {
            high += 1;
        }
    }
    (2.0 * low.min(high) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon() -> Outcome {
    let mut rng = SimRng::seed_from(31);
    let mut worst = 0f64;
    let mut cases = 0;
    for n in 5..=12 {
        for trial in 0..40 {
            let a: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            if trial % 2 == 1 {
                // Coarse values produce ties and zero differences.
                b = b.iter().map(|v| (v * 4.0).round() / 4.0).collect();
                let a: Vec<f64> = a.iter().map(|v| (v * 4.0).round() / 4.0).collect();
                match wilcoxon_signed_rank(&a, &b) {
                    Ok(r) => {
                        worst = worst.max((r.p_value - brute_force_p(&a, &b)).abs());
                        cases += 1;
                    }
                    Err(Error::TooFewPairs { .. }) => {}
                    Err(e) => return Err(format!("unexpected error {e}")),
                }
                continue;
            }
            let r = wilcoxon_signed_rank(&a, &b).unwrap();
            worst = worst.max((r.p_value - brute_force_p(&a, &b)).abs());
            cases += 1;
        }
    }
    let six = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).unwrap();
    let few = matches!(wilcoxon_signed_rank(&[1.0; 4], &[0.0; 4]), Err(Error::TooFewPairs { nonzero: 4 }));
    check(
        worst <= 1e-12 && six.p_value == 0.03125 && few,
        format!(
            "max |p − brute force| {worst:.1e} over {cases} samples (n = 5..12); n = 6 all positive p = {}; n < 5 rejected: {few}",
            six.p_value
        ),
    )
}

fn fieldmap(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fieldmap")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("fieldmap {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn lodo(data: &Path, out: &Path, extra: &[&str]) -> Result<Vec<ResultsFile>, String> {
    let mut args = vec!["lodo", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fieldmap(&args)?;
    read_results(out).map_err(|e| e.to_string())
}

fn mean_of(results: &[ResultsFile]) -> f64 {
    results.iter().map(|r| r.mean_accuracy()).sum::<f64>() / results.len() as f64
}

const BENCH_SEED: &str = "1";

fn benchmark_ordering(work: &Path) -> Outcome {
    let data = work.join("bench6");
    fieldmap(&["simulate", "--preset", "bench6", "--seed", BENCH_SEED, "--out", data.to_str().unwrap()])?;
    let dirs = discover(&data).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = dirs.iter().map(|d| d.manifest.montage.len()).collect();
    let mut sorted = sizes.clone();
    sorted.sort();
    let mut intersection: Vec<String> = dirs[0].manifest.montage.iter().map(|n| normalize_name(n)).collect();
    for d in &dirs[1..] {
        let names: Vec<String> = d.manifest.montage.iter().map(|n| normalize_name(n)).collect();
        intersection.retain(|n| names.contains(n));
    }
    if sorted != [3, 14, 22, 30, 60, 64] || intersection != ["CZ"] {
        return Err(format!("montage sizes {sizes:?}, intersection {intersection:?}"));
    }

    let fi = lodo(&data, &work.join("fi.json"), &["--method", "fi"])?;
    let fi_none = lodo(&data, &work.join("fi_none.json"), &["--method", "fi", "--align", "none"])?;
    let common = lodo(&data, &work.join("common.json"), &["--method", "common"])?;
    let per_target: Vec<String> = fi.iter().map(|r| format!("{} {:.3}", r.target, r.mean_accuracy())).collect();
    let worst = fi.iter().map(|r| r.mean_accuracy()).fold(1.0, f64::min);
    let (m_fi, m_none, m_common) = (mean_of(&fi), mean_of(&fi_none), mean_of(&common));
    check(
        m_fi - m_common >= 0.10 && worst - 0.5 >= 0.15 && m_fi >= m_none,
        format!(
            "FI {m_fi:.3} vs common {m_common:.3} (+{:.1} points); FI without re-centering {m_none:.3}; FI per target [{}]",
            100.0 * (m_fi - m_common),
            per_target.join(", ")
        ),
    )
}

fn runtime_claim(work: &Path) -> Outcome {
    let data = work.join("bench6");
    let out = work.join("dt_vs_fi.json");
    let dt = lodo(&data, &out, &["--method", "dt", "--compare-timing", "fi"])?;
    let mut lines = Vec::new();
    let mut ok = true;
    let (mut dt_total, mut fi_total) = (0.0, 0.0);
    for r in &dt {
        let ratio = r.timing_ratio.as_ref().ok_or("results.json lacks timing_ratio")?;
        ok &= ratio.reference_preparation_s < ratio.preparation_s;
        dt_total += ratio.preparation_s;
        fi_total += ratio.reference_preparation_s;
        lines.push(format!("{} {:.1}×", r.target, ratio.ratio));
    }
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    ok &= text.contains("\"timing_ratio\"");
    check(
        ok,
        format!(
            "harmonize+mean+fit FI {fi_total:.1} s vs DT {dt_total:.1} s; DT/FI per target [{}]",
            lines.join(", ")
        ),
    )
}

fn null_check() -> Outcome {
    let data = generate(&SimSpec::null(1)).map_err(|e| e.to_string())?;
    let harness = Harness::new(RunConfig::default(), &data).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut lines = Vec::new();
    for method in Method::ALL {
        let folds = harness.lodo(method, Align::Recenter, None).map_err(|e| format!("{method}: {e:#}"))?;
        let mean = folds.iter().map(|f| f.result.mean_accuracy()).sum::<f64>() / folds.len() as f64;
        ok &= (mean - 0.5).abs() <= 0.05;
        lines.push(format!("{method} {mean:.3}"));
    }
    check(ok, format!("mean accuracy with erd_factor 1: {}", lines.join(", ")))
}

fn determinism(work: &Path) -> Outcome {
    let data = work.join("bench6_again");
    fieldmap(&["simulate", "--preset", "bench6", "--seed", BENCH_SEED, "--out", data.to_str().unwrap()])?;
    let second = work.join("fi_again.json");
    lodo(&data, &second, &["--method", "fi"])?;
    let read = |p: &Path| -> Result<serde_json::Value, String> {
        let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    let (a, b) = (without_timing(&read(&work.join("fi.json"))?), without_timing(&read(&second)?));
    let bytes_a = serde_json::to_vec_pretty(&a).unwrap();
    let bytes_b = serde_json::to_vec_pretty(&b).unwrap();
    check(
        bytes_a == bytes_b,
        format!("results.json without timing: {} bytes, identical = {}", bytes_a.len(), bytes_a == bytes_b),
    )
}

#[test]
fn acceptance_suite() {
    let start = Instant::now();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let results = [
        run_criterion(1, "geometry suite", geometry_suite),
        run_criterion(2, "DT isometry", dt_isometry),
        run_criterion(3, "interpolation fidelity", interpolation_fidelity),
        run_criterion(4, "logistic gradient", logistic_gradient),
        run_criterion(5, "Wilcoxon exact test", wilcoxon),
        run_criterion(6, "benchmark ordering", || benchmark_ordering(w)),
        run_criterion(7, "runtime FI < DT", || runtime_claim(w)),
        run_criterion(8, "null check", null_check),
        run_criterion(9, "determinism", || determinism(w)),
    ];
    let passed = results.iter().filter(|ok| **ok).count();
    report(&format!(
        "acceptance: {passed}/{} criteria passed in {:.0} s",
        results.len(),
        start.elapsed().as_secs_f64()
    ));
    assert_eq!(passed, results.len(), "acceptance criteria failed");
}
