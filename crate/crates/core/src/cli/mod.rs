//! Command-line front end.
//!
//! Every command writes into its own output directory together with a
//! `manifest.json` holding the full configuration, so a run can be repeated
//! exactly. Results do not depend on the worker count; only `timing*.csv`
//! reflect the machine.

mod error;
mod heatmap;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

pub use error::{CliError, EXIT_NUMERICAL, EXIT_USER};
pub use heatmap::render_svg;

use crate::classifiers::PipelineKind;
use crate::data::{read_epochset, sine_dataset, write_epoch_csv, write_epochset, generate_ar_dataset, ArSpec, EpochSet};
use crate::embedding::{
    estimate_ami_cao, estimate_mdop, write_curve_csv, AmiCaoConfig, Diagnostics, MdopConfig, DEFAULT_BINS,
    DEFAULT_CAO_THRESHOLD, DEFAULT_MAX_DIM, DEFAULT_MAX_LAG,
};
use crate::eval::{evaluate, meta_analysis, EvalKind, EvalOptions, EvalReport, MetaOptions, ParamSource, PipelineSpec};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser, Serialize)]
#[command(name = "acm", version, about = "Augmented covariance classification of multichannel epochs")]
pub struct Cli {
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true, env = "ACM_WORKERS")]
    #[serde(skip)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an AR dataset and write it as an epoch container.
    Simulate(SimulateArgs),
    /// Estimate lag and order with AMI + Cao or MDOP.
    EstimateParams(EstimateArgs),
    /// Evaluate pipelines within or across sessions.
    Evaluate(EvaluateArgs),
    /// Pairwise tests, Stouffer combination and Bonferroni correction over
    /// evaluation reports.
    Stats(StatsArgs),
    /// Write the epochs and labels of a container as CSV.
    ExportCsv(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Two classes with identical spatial covariance and opposite lag-1
    /// dynamics (4 channels, 512 samples).
    Matched,
    /// Two-channel sinusoids of period 64 with light noise.
    Sine,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Generator configuration as JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the seed of the generator configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs per class of the preset.
    #[arg(long, default_value_t = 100)]
    pub epochs_per_class: usize,
    /// Sessions of the matched preset.
    #[arg(long, default_value_t = 1)]
    pub sessions: usize,
    #[arg(long, default_value = "synthetic")]
    pub subject: String,
    /// Container file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[value(name = "ami_cao", alias = "ami-cao")]
    AmiCao,
    Mdop,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "ami_cao")]
    pub param_source: Estimator,
    #[arg(long, default_value_t = DEFAULT_MAX_LAG)]
    pub max_lag: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_DIM)]
    pub max_dim: usize,
    #[arg(long, default_value_t = DEFAULT_CAO_THRESHOLD)]
    pub cao_threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 0.05)]
    pub fnn_threshold: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceArg {
    Grid,
    #[value(name = "ami_cao", alias = "ami-cao")]
    AmiCao,
    Mdop,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalArg {
    Ws,
    Cs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Epoch containers, one subject each.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// MDM, ACM+MDM, TANG+SVM or ACM+TANG+SVM; repeat to compare several.
    #[arg(long, required = true, num_args = 1.., value_parser = parse_kind)]
    #[serde(serialize_with = "kind_names")]
    pub pipeline: Vec<PipelineKind>,
    /// How augmented pipelines choose order and lag.
    #[arg(long, value_enum, default_value = "grid")]
    pub param_source: SourceArg,
    /// Order for `--param-source fixed`.
    #[arg(long)]
    pub order: Option<usize>,
    /// Lag for `--param-source fixed`.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long = "eval", value_enum, default_value = "ws")]
    pub eval: EvalArg,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 5)]
    pub inner_folds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub grid_max_order: usize,
    #[arg(long, default_value_t = 10)]
    pub grid_max_lag: usize,
    /// Dataset name used when combining reports; defaults to the stem of the
    /// first input.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Skip the per-split grid score maps.
    #[arg(long)]
    pub no_grids: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Report JSON files (`report.json` of `evaluate`).
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; the analysis is always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> std::result::Result<PipelineKind, String> {
    s.parse::<PipelineKind>().map_err(|e| e.to_string())
}

fn kind_names<S: serde::Serializer>(kinds: &[PipelineKind], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(kinds.iter().map(|k| k.name()))
}

/// Parses `args` (including the program name), runs the command on a pool
/// of the requested size and returns the process exit code. Errors are
/// printed to stderr as one JSON line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::user("Usage", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return EXIT_USER;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::user("InvalidConfig", "--workers must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::user("InvalidConfig", format!("worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::EstimateParams(a) => estimate_params(a),
        Command::Evaluate(a) => evaluate_cmd(a, &cli.command),
        Command::Stats(a) => stats(a, &cli.command),
        Command::ExportCsv(a) => export_csv(a),
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::user("Io", format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::user("Io", format!("{}: {e}", path.display())))
}

fn read_input(path: &Path) -> Result<EpochSet> {
    if !path.is_file() {
        return Err(CliError::user("MissingInput", format!("{} does not exist", path.display())));
    }
    Ok(read_epochset(path)?)
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn write_manifest(dir: &Path, command: &Command, extra: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": command,
        "outputs": extra,
    });
    write(&dir.join("manifest.json"), pretty(&manifest))
}

fn summary(set: &EpochSet) -> serde_json::Value {
    json!({
        "subject": set.subject(),
        "classes": set.class_names(),
        "sessions": set.sessions().iter().map(|s| json!({"id": s.id, "n_epochs": s.epochs.len()})).collect::<Vec<_>>(),
        "n_epochs": set.n_epochs(),
        "channels": set.channels(),
        "samples": set.samples(),
        "sample_rate": set.sample_rate(),
    })
}

/// Spatial covariance of the matched preset: `0.5^|i−j|`.
fn matched_sigma(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| 0.5f64.powi(i.abs_diff(j) as i32))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let set = match (&a.spec, a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::user("Io", format!("{}: {e}", path.display())))?;
            let mut spec: ArSpec =
                serde_json::from_str(&text).map_err(|e| CliError::user("InvalidSpec", e.to_string()))?;
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            generate_ar_dataset(&spec)?
        }
        (None, Some(Preset::Matched)) => {
            let mut spec = ArSpec::matched_covariance_pair(&matched_sigma(4), 0.8, 512, a.epochs_per_class, a.seed.unwrap_or(0));
            spec.n_sessions = a.sessions;
            spec.subject = a.subject.clone();
            generate_ar_dataset(&spec)?
        }
        (None, Some(Preset::Sine)) => {
            let set = sine_dataset(2, 512, 64.0, 2 * a.epochs_per_class, 0.1, a.seed.unwrap_or(0))?;
            EpochSet::new(a.subject.clone(), set.class_names().to_vec(), set.sample_rate(), set.sessions().to_vec())?
        }
        (None, None) => return Err(CliError::user("InvalidConfig", "give --spec or --preset")),
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_epochset(&set, &a.out)?;
    let mut s = summary(&set);
    s["path"] = json!(a.out.display().to_string());
    print!("{}", pretty(&s));
    Ok(())
}

fn estimate_params(a: &EstimateArgs) -> Result<()> {
    let set = read_input(&a.input)?;
    create_dir(&a.out)?;
    let (estimate, files) = match a.param_source {
        Estimator::AmiCao => {
            let config = AmiCaoConfig {
                max_lag: a.max_lag,
                bins: a.bins,
                max_dim: a.max_dim,
                threshold: a.cao_threshold,
            };
            let est = estimate_ami_cao(&set, &config)?;
            let Diagnostics::AmiCao { ami, e1, .. } = &est.diagnostics else {
                unreachable!("AMI + Cao diagnostics")
            };
            let mut ami_csv = Vec::new();
            write_curve_csv(&mut ami_csv, "lag,ami", 0, ami)?;
            write(&a.out.join("ami.csv"), ami_csv)?;
            let mut e1_csv = Vec::new();
            write_curve_csv(&mut e1_csv, "dim,e1", 1, e1)?;
            write(&a.out.join("cao_e1.csv"), e1_csv)?;
            (est, vec!["ami.csv", "cao_e1.csv"])
        }
        Estimator::Mdop => {
            let config = MdopConfig {
                max_lag: a.max_lag,
                max_cycles: a.max_cycles,
                fnn_threshold: a.fnn_threshold,
                ..MdopConfig::default()
            };
            let est = estimate_mdop(&set, &config)?;
            let Diagnostics::Mdop { cycles, .. } = &est.diagnostics else {
                unreachable!("MDOP diagnostics")
            };
            let mut csv = String::from("cycle,lag,fnn\n");
            let mut beta = String::from("cycle,candidate_lag,beta\n");
            for (i, c) in cycles.iter().enumerate() {
                csv.push_str(&format!("{},{},{}\n", i + 1, c.lag, c.fnn));
                for (j, b) in c.beta.iter().enumerate() {
                    let b = if b.is_finite() { b.to_string() } else { String::new() };
                    beta.push_str(&format!("{},{},{}\n", i + 1, j + 1, b));
                }
            }
            write(&a.out.join("mdop_cycles.csv"), csv)?;
            write(&a.out.join("mdop_beta.csv"), beta)?;
            (est, vec!["mdop_cycles.csv", "mdop_beta.csv"])
        }
    };
    let method = match a.param_source {
        Estimator::AmiCao => "ami_cao",
        Estimator::Mdop => "mdop",
    };
    let out = json!({
        "tau": estimate.tau,
        "D": estimate.dim,
        "method": method,
        "clean": estimate.is_clean(),
        "diagnostics": files,
        "details": estimate.diagnostics,
    });
    write(&a.out.join("estimate.json"), pretty(&out))?;
    write_manifest(&a.out, &Command::EstimateParams(a.clone()), json!(["estimate.json", files]))?;
    let short = json!({"tau": estimate.tau, "D": estimate.dim, "method": method, "clean": estimate.is_clean(), "diagnostics": files});
    print!("{}", pretty(&short));
    Ok(())
}

/// File-name-safe form of a label.
fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn pipeline_specs(a: &EvaluateArgs) -> Result<Vec<PipelineSpec>> {
    let source = match (a.param_source, a.order, a.lag) {
        (SourceArg::Fixed, Some(order), Some(lag)) => ParamSource::Fixed { order, lag },
        (SourceArg::Fixed, _, _) => {
            return Err(CliError::user("InvalidConfig", "--param-source fixed needs --order and --lag"))
        }
        (_, Some(_), _) | (_, _, Some(_)) => {
            return Err(CliError::user("InvalidConfig", "--order and --lag need --param-source fixed"))
        }
        (SourceArg::Grid, ..) => ParamSource::Grid,
        (SourceArg::AmiCao, ..) => ParamSource::AmiCao,
        (SourceArg::Mdop, ..) => ParamSource::Mdop,
    };
    let mut specs: Vec<PipelineSpec> = Vec::new();
    for &kind in &a.pipeline {
        let spec = PipelineSpec::new(kind, source);
        if specs.contains(&spec) {
            return Err(CliError::user("InvalidConfig", format!("pipeline {kind} given twice")));
        }
        specs.push(spec);
    }
    Ok(specs)
}

fn evaluate_cmd(a: &EvaluateArgs, command: &Command) -> Result<()> {
    let specs = pipeline_specs(a)?;
    let subjects = a.input.iter().map(|p| read_input(p)).collect::<Result<Vec<_>>>()?;
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.input[0]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let opts = EvalOptions {
        dataset,
        folds: a.folds,
        inner_folds: a.inner_folds,
        seed: a.seed,
        grid_max_order: a.grid_max_order,
        grid_max_lag: a.grid_max_lag,
        ..EvalOptions::default()
    };
    let kind = match a.eval {
        EvalArg::Ws => EvalKind::Ws,
        EvalArg::Cs => EvalKind::Cs,
    };
    let report = evaluate(kind, &subjects, &specs, &opts)?;

    create_dir(&a.out)?;
    write(&a.out.join("report.json"), report.to_json())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&a.out.join("report.csv"), csv)?;
    let mut timing = Vec::new();
    report.write_timing_csv(&mut timing)?;
    write(&a.out.join("timing.csv"), timing)?;
    let mut totals = String::from("pipeline,estimation,grid_search,covariance,fit,predict,total\n");
    for (p, t) in report.timing_by_pipeline() {
        totals.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p,
            t.estimation,
            t.grid_search,
            t.covariance,
            t.fit,
            t.predict,
            t.total()
        ));
    }
    write(&a.out.join("timing_summary.csv"), totals)?;

    let mut grids = Vec::new();
    if !a.no_grids {
        let dir = a.out.join("grids");
        for r in report.splits.iter() {
            let Some(g) = &r.grid else { continue };
            if !dir.exists() {
                create_dir(&dir)?;
            }
            let stem = format!("{}__{}__{}__{}", slug(&r.subject), slug(&r.session), slug(&r.split), slug(&r.pipeline));
            let mut csv = Vec::new();
            g.write_csv(&mut csv)?;
            write(&dir.join(format!("{stem}.csv")), csv)?;
            let (orders, lags, rows) = g.order_lag_map();
            let title = format!("{} / {} / {} / {}", r.subject, r.session, r.split, r.pipeline);
            write(&dir.join(format!("{stem}.svg")), render_svg(&title, &orders, &lags, &rows))?;
            grids.push(format!("grids/{stem}.csv"));
        }
    }
    let inputs: Vec<serde_json::Value> = subjects
        .iter()
        .zip(&a.input)
        .map(|(s, p)| json!({"path": p.display().to_string(), "subject": s.subject(), "n_epochs": s.n_epochs()}))
        .collect();
    write_manifest(
        &a.out,
        command,
        json!({
            "inputs": inputs,
            "options": opts,
            "pipelines": report.pipelines,
            "files": ["report.json", "report.csv", "timing.csv", "timing_summary.csv"],
            "grids": grids,
        }),
    )?;
    let out = json!({
        "dataset": report.dataset,
        "evaluation": report.evaluation,
        "metric": report.metric,
        "summary": report.summary,
        "out": a.out.display().to_string(),
    });
    print!("{}", pretty(&out));
    Ok(())
}

fn stats(a: &StatsArgs, command: &Command) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| {
            if !p.is_file() {
                return Err(CliError::user("MissingInput", format!("{} does not exist", p.display())));
            }
            let text = fs::read_to_string(p)?;
            Ok(EvalReport::from_json(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = meta_analysis(
        &reports,
        &MetaOptions {
            n_perm: a.n_perm,
            seed: a.seed,
        },
    )?;
    let text = meta.to_json();
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write(&dir.join("meta.json"), &text)?;
        let mut csv = String::from("hypothesis,p_combined,p_corrected,smd\n");
        for h in &meta.hypotheses {
            let smd = h.smd.map(|v| v.to_string()).unwrap_or_default();
            csv.push_str(&format!("\"{}\",{},{},{}\n", h.hypothesis, h.p_combined, h.p_corrected, smd));
        }
        write(&dir.join("meta.csv"), csv)?;
        write_manifest(dir, command, json!(["meta.json", "meta.csv"]))?;
    }
    print!("{text}");
    Ok(())
}

fn export_csv(a: &ExportArgs) -> Result<()> {
    let set = read_input(&a.input)?;
    let epochs_dir = a.out.join("epochs");
    create_dir(&epochs_dir)?;
    let mut labels = String::from("session,index,label,class,file\n");
    for s in set.sessions() {
        for (i, (e, &l)) in s.epochs.iter().zip(&s.labels).enumerate() {
            let name = format!("{}_{i:04}.csv", slug(&s.id));
            let mut csv = Vec::new();
            write_epoch_csv(e, &mut csv)?;
            write(&epochs_dir.join(&name), csv)?;
            labels.push_str(&format!("{},{i},{l},{},epochs/{name}\n", s.id, set.class_names()[l]));
        }
    }
    write(&a.out.join("labels.csv"), labels)?;
    write(&a.out.join("summary.json"), pretty(&summary(&set)))?;
    print!("{}", pretty(&json!({"out": a.out.display().to_string(), "n_epochs": set.n_epochs()})));
    Ok(())
}
