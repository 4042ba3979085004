//! Command-line interface. Exit codes: 0 success, 1 runtime failure,
//! 2 configuration or usage error.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldmap_core::harmonize::{
    comimp_fit_with, common_channels, selection_operator, ssi_operator_with, union_channels, FieldInterpolator,
    SsiParams,
};
use fieldmap_core::montage::Montage;
use fieldmap_core::simulate::{generate, SimDataset, SimSpec};
use serde::Serialize;

use crate::config::{Align, Method, RunConfig};
use crate::harness::Harness;
use crate::io::{discover, write_dataset, write_json};
use crate::report::{compare, read_results, ResultsDoc, ResultsFile, TimingRatio};

#[derive(Debug, Parser)]
#[command(name = "fieldmap", version, about = "Cross-montage EEG transfer: simulate, harmonize, evaluate")]
pub struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic datasets.
    Simulate(SimulateArgs),
    /// Build and save harmonization operators for every dataset.
    Harmonize(HarmonizeArgs),
    /// Leave-one-dataset-out evaluation.
    Lodo(LodoArgs),
    /// Accuracy as training datasets are added one by one.
    LearningCurve(CurveArgs),
    /// Paired Wilcoxon test between two results files.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Bench6,
    Null,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation spec (JSON). Without it the preset is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bench6")]
    pub preset: Preset,
    /// Overrides the seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub align: Option<Align>,
    /// `builtin-17` or a JSON list of channel names.
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub fi_reg: Option<f64>,
    #[arg(long)]
    pub ssi_reg: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub resample: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"])]
    pub band: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct HarmonizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LodoArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Held-out dataset; all datasets in turn when omitted.
    #[arg(long)]
    pub target: Option<String>,
    /// Also run this method and report the preparation-time ratio.
    #[arg(long, value_enum)]
    pub compare_timing: Option<Method>,
    #[arg(long, default_value = "results.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub target: String,
    /// Comma-separated training datasets; default: the others by name.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    #[arg(long, default_value = "curve.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.align {
            cfg.align = v;
        }
        if let Some(v) = &self.template {
            cfg.template = v.clone();
        }
        if let Some(v) = self.fi_reg {
            cfg.fi_reg = v;
        }
        if let Some(v) = self.ssi_reg {
            cfg.ssi_reg = v;
        }
        if let Some(v) = self.c {
            cfg.c = v;
        }
        if let Some(v) = self.resample {
            cfg.resample = v;
        }
        if let Some(v) = &self.band {
            cfg.band = [v[0], v[1]];
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if cfg.data.is_none() {
            anyhow::bail!("no data directory (use --data or set \"data\" in the config)");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    command: &'a str,
    config: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

fn print_resolved<T: Serialize>(command: &str, config: &T, hash: Option<String>) {
    let r = Resolved {
        command,
        config,
        config_hash: hash,
    };
    println!("{}", serde_json::to_string_pretty(&r).expect("config serializes"));
}

fn load_data(cfg: &RunConfig) -> CliResult<Vec<SimDataset>> {
    let root = cfg.data.as_deref().expect("resolved config has data");
    let dirs = discover(root).map_err(usage)?;
    dirs.iter().map(|d| d.load(true).map_err(runtime)).collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let mut spec = match &args.config {
        Some(p) => crate::io::read_json::<SimSpec>(p).map_err(usage)?,
        None => match args.preset {
            Preset::Bench6 => SimSpec::bench6(0),
            Preset::Null => SimSpec::null(0),
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(usage)?;
    print_resolved("simulate", &spec, None);
    let datasets = generate(&spec).map_err(runtime)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(runtime)?;
    write_json(&args.out.join("simulation.json"), &spec).map_err(runtime)?;
    let mut dirs = Vec::new();
    for ds in &datasets {
        let dir = write_dataset(&args.out, ds).map_err(runtime)?;
        eprintln!("wrote {} ({} subjects, {} channels)", dir.display(), ds.subjects.len(), ds.montage.len());
        dirs.push(dir);
    }
    Ok(dirs)
}

pub fn cmd_harmonize(args: &HarmonizeArgs) -> CliResult<()> {
    let cfg = args.run.resolve().map_err(usage)?;
    print_resolved("harmonize", &cfg, Some(cfg.hash()));
    let data = load_data(&cfg)?;
    let template = cfg.template_montage().map_err(usage)?;
    let montages: Vec<Montage> = data.iter().map(|d| d.montage.clone()).collect();
    std::fs::create_dir_all(&args.out).map_err(runtime)?;
    match cfg.method {
        Method::Fi | Method::Ssi | Method::Common => {
            let fi = match cfg.method {
                Method::Fi => Some(FieldInterpolator::new(template.head_radius).map_err(runtime)?),
                _ => None,
            };
            let keep = if cfg.method == Method::Common {
                let keep = common_channels(&montages).map_err(runtime)?;
                eprintln!("common channels: {} ({})", keep.len(), keep.names().join(", "));
                Some(keep)
            } else {
                None
            };
            for ds in &data {
                let op = match cfg.method {
                    Method::Fi => fi.as_ref().unwrap().operator(&ds.montage, &template, cfg.fi_reg),
                    Method::Ssi => {
                        let params = SsiParams {
                            m_order: cfg.ssi_order,
                            reg: cfg.ssi_reg,
                            ..SsiParams::default()
                        };
                        ssi_operator_with(&ds.montage, &template, &params)
                    }
                    _ => selection_operator(&ds.montage, keep.as_ref().unwrap()),
                }
                .map_err(runtime)?;
                let path = args.out.join(format!("{}_{}.json", ds.name, cfg.method));
                write_json(&path, &op).map_err(runtime)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Method::Dt => {
            let lists: Vec<Vec<String>> = montages.iter().map(|m| m.names()).collect();
            let union = union_channels(&lists);
            eprintln!("union channels: {}", union.len());
            write_json(&args.out.join("dt_union.json"), &union).map_err(runtime)?;
        }
        Method::Comimp => {
            let lists: Vec<Vec<String>> = montages.iter().map(|m| m.names()).collect();
            let union = union_channels(&lists);
            let harness = Harness::new(cfg.clone(), &data).map_err(runtime)?;
            let training: Vec<_> = harness
                .datasets
                .iter()
                .flat_map(|d| d.subjects.iter().map(|s| s.epochs.clone()))
                .collect();
            let model = comimp_fit_with(&training, &union, &cfg.comimp).map_err(runtime)?;
            eprintln!(
                "imputer over {} channels: {} iterations, converged = {}",
                union.len(),
                model.iterations,
                model.converged
            );
            write_json(&args.out.join("comimp_model.json"), &model).map_err(runtime)?;
        }
        Method::Calibration => return Err(usage(anyhow!("calibration has no harmonization operator"))),
    }
    Ok(())
}

/// Runs the folds and returns one results record per target.
pub fn lodo_results(harness: &Harness, target: Option<&str>, compare_timing: Option<Method>) -> anyhow::Result<Vec<ResultsFile>> {
    let cfg = &harness.cfg;
    let hash = cfg.hash();
    let folds = harness.lodo(cfg.method, cfg.align, target)?;
    let reference = match compare_timing {
        Some(m) => Some(harness.lodo(m, cfg.align, target)?),
        None => None,
    };
    let mut out = Vec::with_capacity(folds.len());
    for (i, fold) in folds.into_iter().enumerate() {
        eprintln!(
            "target {}: trained on [{}], {} channels{}, mean accuracy {:.3}",
            fold.result.target,
            fold.train.join(", "),
            fold.channels.len(),
            if fold.channels.len() <= 3 {
                format!(" ({})", fold.channels.join(", "))
            } else {
                String::new()
            },
            fold.result.mean_accuracy()
        );
        let mut record = ResultsFile::new(fold.result, &hash);
        if let (Some(m), Some(r)) = (compare_timing, &reference) {
            record.timing_ratio = Some(TimingRatio::new(m.as_str(), &record.timing, &r[i].result.timing));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn cmd_lodo(args: &LodoArgs) -> CliResult<Vec<ResultsFile>> {
    let cfg = args.run.resolve().map_err(usage)?;
    print_resolved("lodo", &cfg, Some(cfg.hash()));
    let data = load_data(&cfg)?;
    let harness = Harness::new(cfg, &data).map_err(runtime)?;
    if let Some(t) = &args.target {
        harness.index_of(t).map_err(usage)?;
    }
    let results = lodo_results(&harness, args.target.as_deref(), args.compare_timing).map_err(runtime)?;
    let doc = ResultsDoc::from_results(results.clone());
    write_json(&args.out, &doc).map_err(runtime)?;
    eprintln!("wrote {}", args.out.display());
    Ok(results)
}

#[derive(Serialize)]
struct CurveDoc {
    method: String,
    target: String,
    config_hash: String,
    points: Vec<crate::harness::CurvePoint>,
}

pub fn cmd_learning_curve(args: &CurveArgs) -> CliResult<()> {
    let cfg = args.run.resolve().map_err(usage)?;
    print_resolved("learning-curve", &cfg, Some(cfg.hash()));
    let data = load_data(&cfg)?;
    let harness = Harness::new(cfg.clone(), &data).map_err(runtime)?;
    let target = harness.index_of(&args.target).map_err(usage)?;
    let order: Vec<usize> = match &args.order {
        Some(names) => names.iter().map(|n| harness.index_of(n)).collect::<anyhow::Result<_>>().map_err(usage)?,
        None => (0..harness.datasets.len()).filter(|&d| d != target).collect(),
    };
    let points = harness
        .learning_curve(cfg.method, cfg.align, target, &order)
        .map_err(runtime)?;
    for p in &points {
        eprintln!(
            "[{}] channels seen {}: accuracy {:.3}",
            p.included.join(", "),
            p.target_channels_seen,
            p.result.mean_accuracy()
        );
    }
    let doc = CurveDoc {
        method: cfg.method.to_string(),
        target: args.target.clone(),
        config_hash: cfg.hash(),
        points,
    };
    write_json(&args.out, &doc).map_err(runtime)?;
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs) -> CliResult<()> {
    let a = read_results(&args.a).map_err(usage)?;
    let b = read_results(&args.b).map_err(usage)?;
    let report = compare(&a, &b).map_err(usage)?;
    let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
    println!("{text}");
    match report.p_value {
        Some(p) => eprintln!("{} vs {}: p = {p:.4e} {}", report.method_a, report.method_b, report.stars),
        None => eprintln!("{} vs {}: {}", report.method_a, report.method_b, report.stars),
    }
    if let Some(note) = &report.note {
        eprintln!("note: {note}");
    }
    if let Some(out) = &args.out {
        write_json(out, &report).map_err(runtime)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage(anyhow!("--threads must be positive")));
        }
        // A second initialization (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| ()),
        Command::Harmonize(a) => cmd_harmonize(a),
        Command::Lodo(a) => cmd_lodo(a).map(|_| ()),
        Command::LearningCurve(a) => cmd_learning_curve(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(err) | CliError::Runtime(err)) = &e;
            eprintln!("error: {err:#}");
            e.exit_code()
        }
    }
}

