//! Batch commands behind the `sdn-ddos` binary. Each command is a plain
//! function of its arguments, so the same code paths are usable from tests
//! and examples.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::formats;
use crate::labels::{ClassMode, TrafficClass};
use crate::metrics::RocCurve;
use crate::pipeline::{self, ModelKind, ReplayConfig};
use crate::sae::Hyperparams;
use crate::switch::Topology;
use crate::trafficgen::{self, ScenarioSpec, DEFAULT_INTERVAL};

#[derive(Debug, Parser)]
#[command(
    name = "sdn-ddos",
    version,
    about = "Multi-vector DDoS detection for a simulated SDN switch"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic packet trace and its ground-truth labels.
    Gen(GenArgs),
    /// Replay a trace through the switch and write the labelled feature dataset.
    Extract(ExtractArgs),
    /// Train a classifier on a dataset.
    Train(TrainArgs),
    /// Evaluate a model on a dataset and write report files.
    Eval(EvalArgs),
    /// Classify every host-interval of a trace.
    Detect(DetectArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario TOML file.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub pcap: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    pub interval: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Switch port map; defaults to one port per labelled host plus an uplink.
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Layer widths, input first.
    #[arg(long, value_delimiter = ',', default_values_t = vec![68usize, 34, 17])]
    pub arch: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    /// sae, nn (no pretraining) or softmax (no hidden layers).
    #[arg(long, default_value = "sae", value_parser = parse_kind)]
    pub kind: ModelKind,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs_pretrain: Option<usize>,
    #[arg(long)]
    pub epochs_softmax: Option<usize>,
    #[arg(long)]
    pub epochs_finetune: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// 8class or 2class.
    #[arg(long, default_value = "8class", value_parser = parse_mode)]
    pub mode: ClassMode,
    /// Directory for the report files; created if missing.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    pub interval: f64,
    /// Switch port map; when given, only its hosts are reported.
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    match s {
        "sae" => Ok(ModelKind::Sae),
        "nn" => Ok(ModelKind::Nn),
        "softmax" => Ok(ModelKind::Softmax),
        other => Err(format!(
            "unknown model kind `{other}` (expected sae, nn or softmax)"
        )),
    }
}

fn parse_mode(s: &str) -> std::result::Result<ClassMode, String> {
    s.parse()
}

fn load_topology(path: &Path) -> Result<Topology> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Topology::parse(&text)
}

fn check_interval(interval: f64) -> Result<()> {
    if interval.is_finite() && interval > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "--interval must be positive, got {interval}"
        )))
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Extract(a) => cmd_extract(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Detect(a) => cmd_detect(&a, out),
    }
}

fn say(out: &mut dyn Write, msg: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{msg}").map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
    let spec = ScenarioSpec::from_toml(&text)?;
    let generated = trafficgen::generate(&spec)?;
    formats::save_trace(&a.out, &generated.packets)?;
    formats::save_labels(&a.labels, &generated.ground_truth)?;
    if let Some(pcap) = &a.pcap {
        formats::save_pcap(pcap, &generated.packets)?;
    }
    say(
        out,
        format_args!(
            "{} packets, {} labelled host-intervals",
            generated.packets.len(),
            generated.ground_truth.len()
        ),
    )?;
    for (class, n) in generated.ground_truth.class_counts() {
        say(out, format_args!("  {class:>2}: {n}"))?;
    }
    Ok(())
}

pub fn cmd_extract(a: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    check_interval(a.interval)?;
    let trace = formats::load_trace(&a.trace)?;
    let labels = formats::load_labels(&a.labels)?;
    let topology = match &a.topology {
        Some(p) => load_topology(p)?,
        None => Topology::from_hosts(labels.keys().map(|(h, _)| *h).collect::<BTreeSet<_>>()),
    };
    let replayed = pipeline::replay(&trace, &ReplayConfig::new(a.interval, topology))?;
    let records = pipeline::label_vectors(replayed.vectors, &labels)?;
    formats::save_dataset(&a.out, &records)?;
    let s = replayed.stats;
    say(
        out,
        format_args!(
            "{} records; {} packets, {} table misses, {} rules installed",
            records.len(),
            s.packets,
            s.table_misses,
            s.rules_installed
        ),
    )
}

fn hyperparams(a: &TrainArgs) -> Result<Hyperparams> {
    let d = Hyperparams::default();
    let hp = Hyperparams {
        lambda: a.lambda.unwrap_or(d.lambda),
        beta: a.beta.unwrap_or(d.beta),
        rho: a.rho.unwrap_or(d.rho),
        layer_sizes: a.arch.clone(),
        epochs_pretrain: a.epochs_pretrain.unwrap_or(d.epochs_pretrain),
        epochs_softmax: a.epochs_softmax.unwrap_or(d.epochs_softmax),
        epochs_finetune: a.epochs_finetune.unwrap_or(d.epochs_finetune),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        seed: a.seed.unwrap_or(d.seed),
        decay_biases: d.decay_biases,
    };
    if hp.layer_sizes.first() != Some(&crate::features::NUM_FEATURES) {
        return Err(Error::Config(format!(
            "--arch must start with the feature count {}",
            crate::features::NUM_FEATURES
        )));
    }
    hp.validate()?;
    Ok(hp)
}

fn trajectory(costs: &[f64]) -> String {
    match (costs.first(), costs.last()) {
        (Some(first), Some(last)) => {
            format!("{first:.6} -> {last:.6} ({} epochs)", costs.len() - 1)
        }
        _ => "skipped".into(),
    }
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    if a.classes != TrafficClass::ALL.len() {
        return Err(Error::Config(format!(
            "--classes {} unsupported: models are trained on the {}-class taxonomy (use eval --mode 2class for the binary view)",
            a.classes,
            TrafficClass::ALL.len()
        )));
    }
    let hp = hyperparams(a)?;
    let records = formats::load_dataset(&a.train)?;
    if records.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let (model, log) = pipeline::train_model(a.kind, &records, &hp)?;
    formats::save_model(&a.model, &model)?;
    say(
        out,
        format_args!("trained {} on {} records", a.kind.label(), records.len()),
    )?;
    for (i, layer) in log.pretrain.iter().enumerate() {
        say(
            out,
            format_args!("  pretrain layer {}: {}", i + 1, trajectory(layer)),
        )?;
    }
    if !log.softmax.is_empty() {
        say(
            out,
            format_args!("  soft-max: {}", trajectory(&log.softmax)),
        )?;
    }
    if !log.finetune.is_empty() {
        say(
            out,
            format_args!("  fine-tune: {}", trajectory(&log.finetune)),
        )?;
    }
    Ok(())
}

fn write_csv(path: &Path, rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| formats::csv_err(path, e))?;
    for row in rows {
        w.write_record(&row)
            .map_err(|e| formats::csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn roc_rows(curve: &RocCurve) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["fpr".to_string(), "tpr".to_string()]];
    rows.extend(
        curve
            .points
            .iter()
            .map(|(f, t)| vec![f.to_string(), t.to_string()]),
    );
    rows
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = formats::load_model(&a.model)?;
    let test = formats::load_dataset(&a.test)?;
    let report = pipeline::evaluate(&model, &test, a.mode)?;
    fs::create_dir_all(&a.report).map_err(|e| Error::io(&a.report, e))?;

    let names = report.confusion.class_names().to_vec();
    let mut matrix = vec![std::iter::once("predicted\\actual".to_string())
        .chain(names.iter().cloned())
        .collect::<Vec<_>>()];
    for (i, row) in report.confusion.counts().iter().enumerate() {
        matrix.push(
            std::iter::once(names[i].clone())
                .chain(row.iter().map(u64::to_string))
                .collect(),
        );
    }
    write_csv(&a.report.join("confusion.csv"), matrix)?;

    let mut stats = vec![[
        "class",
        "precision",
        "recall",
        "f_measure",
        "auc",
        "support",
    ]
    .map(String::from)
    .to_vec()];
    for (s, roc) in report.class_stats.iter().zip(&report.roc) {
        stats.push(vec![
            s.class.clone(),
            s.precision.to_string(),
            s.recall.to_string(),
            s.f_measure.to_string(),
            roc.as_ref().map_or_else(String::new, |r| r.auc.to_string()),
            s.support.to_string(),
        ]);
    }
    write_csv(&a.report.join("class_stats.csv"), stats)?;

    for (name, roc) in names.iter().zip(&report.roc) {
        if let Some(curve) = roc {
            write_csv(&a.report.join(format!("roc_{name}.csv")), roc_rows(curve))?;
        }
    }
    let text = report.to_text();
    let summary = a.report.join("summary.txt");
    fs::write(&summary, &text).map_err(|e| Error::io(&summary, e))?;
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_detect(a: &DetectArgs, out: &mut dyn Write) -> Result<()> {
    check_interval(a.interval)?;
    let model = formats::load_model(&a.model)?;
    let trace = formats::load_trace(&a.trace)?;
    let (topology, monitored) = match &a.topology {
        Some(p) => {
            let t = load_topology(p)?;
            let hosts: BTreeSet<Ipv4Addr> = t.hosts.keys().copied().collect();
            (t, Some(hosts))
        }
        None => {
            let hosts: BTreeSet<Ipv4Addr> = trace.iter().map(|p| p.dst_ip).collect();
            let mut t = Topology::from_hosts(hosts);
            t.default_port = None;
            (t, None)
        }
    };
    let detections = pipeline::detect(
        &model,
        &trace,
        &ReplayConfig::new(a.interval, topology),
        monitored.as_ref(),
    )?;
    for d in detections {
        say(
            out,
            format_args!(
                "{},{},{},{}",
                d.interval_start, d.host, d.class, d.probability
            ),
        )?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and maps the
/// outcome to a process exit code: 0 success, 1 validation error, 2
/// runtime or numeric failure.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
