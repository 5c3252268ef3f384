//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 usage or invalid input values, 3 data or file
//! errors, 4 training failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, TrainedModel};
use crate::encoders::{self, FeatureVector};
use crate::error::Error;
use crate::market::{self, SplitDataset, SyntheticSpec};
use crate::metrics::fmt_sig12;
use crate::mlp::MlpParams;
use crate::state::QuditRegister;
use crate::train::{self, ModelStream, OptimizerKind, TrainConfig, TrainHistory};
use crate::vqc::{self, FdScheme, ParameterizedCircuit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

const SPLIT_RATIO: f64 = 0.8;
const DEFAULT_OUT: &str = "qforecast-out";

#[derive(Debug, Parser)]
#[command(name = "qforecast", version, about = "Classical and variational quantum stock-direction models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write its checkpoint, history and plot data.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint on the test split.
    Eval(EvalArgs),
    /// Train and compare all three models.
    Bench(BenchArgs),
    /// Print the encoded statevector of a feature vector.
    Encode(EncodeArgs),
    /// Write a seeded synthetic OHLCV series.
    SynthData(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelName {
    Ann,
    Qqbn,
    Qqtn,
}

impl ModelName {
    fn as_str(self) -> &'static str {
        match self {
            ModelName::Ann => "ann",
            ModelName::Qqbn => "qqbn",
            ModelName::Qqtn => "qqtn",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FdSchemeArg {
    Forward,
    Central,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    PlainGd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Amplitude,
    PhaseQubit,
    PhaseQutrit,
}

#[derive(Debug, Args)]
struct TrainingFlags {
    /// JSON file with TrainConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for initialization and synthetic data.
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs; defaults to 200 classical, 100 quantum.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Finite-difference step for circuit gradients.
    #[arg(long = "delta-theta")]
    delta_theta: Option<f64>,
    /// Finite-difference scheme for circuit gradients.
    #[arg(long = "fd-scheme", value_enum)]
    fd_scheme: Option<FdSchemeArg>,
    /// Parameter update rule.
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Worker threads for gradient coordinates and concurrent trainings.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory.
    #[arg(long, env = "QFORECAST_OUT", default_value = DEFAULT_OUT)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    /// OHLCV CSV with header date,open,high,low,close,volume.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TrainingFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    /// OHLCV CSV; evaluated on its test split.
    #[arg(long)]
    data: PathBuf,
    /// Directory holding checkpoint_<model>.json; results are written there.
    #[arg(long, env = "QFORECAST_OUT", default_value = DEFAULT_OUT)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// OHLCV CSV; a synthetic series is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic series length when --data is omitted.
    #[arg(long, default_value_t = 500)]
    days: usize,
    /// Synthetic momentum strength in [0, 1] when --data is omitted.
    #[arg(long, default_value_t = 0.0)]
    signal: f64,
    /// Print the published reference values beside the measured ones.
    #[arg(long = "paper-reference")]
    paper_reference: bool,
    #[command(flatten)]
    flags: TrainingFlags,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Comma-separated values in [0, 1].
    #[arg(long, conflicts_with_all = ["data", "row"])]
    features: Option<String>,
    /// OHLCV CSV to take a normalized sample from, with --row.
    #[arg(long, requires = "row")]
    data: Option<PathBuf>,
    /// Sample index into the labelled series of --data.
    #[arg(long, requires = "data")]
    row: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    days: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    signal: f64,
    /// Log drift per day.
    #[arg(long, default_value_t = 0.0)]
    trend: f64,
    /// Daily shock scale.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Destination CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    Training(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Training(_) => EXIT_TRAINING,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Training(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn data(e: impl ToString) -> Failure {
    Failure::Data(e.to_string())
}

fn training(e: Error) -> Failure {
    if e.is_data_error() {
        Failure::Data(e.to_string())
    } else {
        Failure::Training(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => with_threads(a.flags.threads, || cmd_train(&a)),
        Command::Eval(a) => cmd_eval(&a),
        Command::Bench(a) => with_threads(a.flags.threads, || cmd_bench(&a)),
        Command::Encode(a) => cmd_encode(&a),
        Command::SynthData(a) => cmd_synth_data(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn with_threads(threads: usize, f: impl FnOnce() -> CmdResult + Send) -> CmdResult {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Training(e.to_string()))?;
    pool.install(f)
}

/// Parses a comma-separated list of finite numbers.
pub fn parse_feature_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let v: f64 = part
                .parse()
                .map_err(|_| format!("'{part}' is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("'{part}' is not finite"))
            }
        })
        .collect()
}

fn resolve_config(flags: &TrainingFlags) -> std::result::Result<TrainConfig, Failure> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| data(format!("{}: {e}", path.display())))?;
            TrainConfig::from_json(&text).map_err(usage)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(epochs) = flags.epochs {
        config.epochs = Some(epochs);
    }
    if let Some(lr) = flags.lr {
        config.learning_rate = lr;
    }
    if let Some(batch) = flags.batch {
        config.batch_size = batch;
    }
    if let Some(d) = flags.delta_theta {
        config.delta_theta = d;
    }
    if let Some(s) = flags.fd_scheme {
        config.fd_scheme = match s {
            FdSchemeArg::Forward => FdScheme::Forward,
            FdSchemeArg::Central => FdScheme::Central,
        };
    }
    if let Some(o) = flags.optimizer {
        config.optimizer = match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::PlainGd => OptimizerKind::PlainGd,
        };
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

fn load_dataset(path: &Path) -> std::result::Result<SplitDataset, Failure> {
    let rows = market::load_csv(path).map_err(data)?;
    market::prepare_dataset(&rows, SPLIT_RATIO).map_err(data)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn checkpoint_path(dir: &Path, model: ModelName) -> PathBuf {
    dir.join(format!("checkpoint_{}.json", model.as_str()))
}

fn history_csv(history: &TrainHistory) -> String {
    let mut s = String::from("epoch,loss,accuracy,cumulative_ops\n");
    for r in &history.records {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.epoch,
            fmt_sig12(r.loss),
            fmt_sig12(r.accuracy),
            r.cumulative_ops
        );
    }
    s
}

fn print_metrics(label: &str, m: &bench::ModelMetrics) {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{label}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} sharpe {} ic {}",
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        opt(m.sharpe),
        opt(m.ic)
    );
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let config = resolve_config(&args.flags)?;
    let dataset = load_dataset(&args.data)?;
    let out = &args.flags.out;
    create_dir(out)?;
    let (model, history, checkpoint) = match args.model {
        ModelName::Ann => {
            let (p, h) = train::train_classical(&dataset, &config).map_err(training)?;
            let json = p.to_json().map_err(training)?;
            (TrainedModel::Ann(p), h, json)
        }
        ModelName::Qqbn | ModelName::Qqtn => {
            let (circuit, stream) = if args.model == ModelName::Qqbn {
                (vqc::build_qbn_ansatz(), ModelStream::Qbn)
            } else {
                (vqc::build_qqtn_ansatz(), ModelStream::Qqtn)
            };
            let start = train::initialized_ansatz(circuit, &config, stream);
            let (c, h) = train::train_quantum(start, &dataset, &config).map_err(training)?;
            let json = c.to_json().map_err(training)?;
            (TrainedModel::Circuit(c), h, json)
        }
    };
    let name = args.model.as_str();
    write_text(&checkpoint_path(out, args.model), &(checkpoint + "\n"))?;
    write_text(&out.join(format!("history_{name}.csv")), &history_csv(&history))?;
    let scores = model.scores(&dataset.test).map_err(training)?;
    let actuals: Vec<u8> = dataset.test.iter().map(|s| s.label).collect();
    bench::emit_plot_data(&[(name, &history)], &[(name, &scores)], &actuals, out)
        .map_err(data)?;

    let train_scores = model.scores(&dataset.train).map_err(training)?;
    let train_metrics = bench::evaluate(&train_scores, &dataset.train).map_err(training)?;
    let test_metrics = bench::evaluate(&scores, &dataset.test).map_err(training)?;
    println!("model {name}: {} epochs", history.records.len());
    print_metrics("train", &train_metrics);
    print_metrics("test", &test_metrics);
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let path = checkpoint_path(&args.out, args.model);
    let text = fs::read_to_string(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let model = match args.model {
        ModelName::Ann => TrainedModel::Ann(MlpParams::from_json(&text).map_err(data)?),
        ModelName::Qqbn | ModelName::Qqtn => {
            TrainedModel::Circuit(ParameterizedCircuit::from_json(&text).map_err(data)?)
        }
    };
    let dataset = load_dataset(&args.data)?;
    let scores = model.scores(&dataset.test).map_err(training)?;
    let metrics = bench::evaluate(&scores, &dataset.test).map_err(training)?;
    let name = args.model.as_str();
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| Failure::Training(e.to_string()))?;
    write_text(&args.out.join(format!("eval_{name}.json")), &(json + "\n"))?;
    print_metrics("test", &metrics);
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let config = resolve_config(&args.flags)?;
    let dataset = match &args.data {
        Some(path) => load_dataset(path)?,
        None => {
            let spec = SyntheticSpec {
                seed: config.seed,
                n_days: args.days,
                signal_strength: args.signal,
                ..SyntheticSpec::default()
            };
            let rows = market::synthetic_series(&spec).map_err(usage)?;
            market::prepare_dataset(&rows, SPLIT_RATIO).map_err(usage)?
        }
    };
    let out = &args.flags.out;
    create_dir(out)?;
    let comparison = bench::run_comparison(&dataset, &config).map_err(training)?;
    let json = comparison.report.to_json().map_err(training)?;
    write_text(&out.join("report.json"), &json)?;
    bench::emit_comparison_plots(&comparison, &dataset, out).map_err(data)?;
    print!("{}", bench::summary_table(&comparison.report, args.paper_reference));
    if comparison.report.any_failed() {
        return Err(Failure::Training("at least one model failed; see report.json".into()));
    }
    Ok(())
}

fn render_register(reg: &QuditRegister) -> String {
    let mut s = String::new();
    let probs = reg.born_probabilities().probs;
    for (i, (a, p)) in reg.amplitudes().iter().zip(&probs).enumerate() {
        let _ = writeln!(
            s,
            "{}  amplitude {:>10.6} {:+.6}i  probability {:.6}",
            reg.ket_label(i),
            a.re,
            a.im,
            p
        );
    }
    s
}

fn cmd_encode(args: &EncodeArgs) -> CmdResult {
    let values = match (&args.features, &args.data, args.row) {
        (Some(text), _, _) => parse_feature_list(text).map_err(usage)?,
        (None, Some(path), Some(row)) => {
            let rows = market::load_csv(path).map_err(data)?;
            let n = rows.len().saturating_sub(1);
            let fit = market::train_len(n, SPLIT_RATIO);
            let (samples, _) = market::normalize_and_label(&rows, fit).map_err(data)?;
            let sample = samples
                .get(row)
                .ok_or_else(|| usage(format!("row {row} out of range (0..{})", samples.len())))?;
            sample.features.values().to_vec()
        }
        _ => return Err(usage("pass --features or --data with --row")),
    };
    let x = FeatureVector::new(values).map_err(usage)?;
    let reg = match args.scheme {
        SchemeArg::Amplitude => {
            encoders::encode_feature_register(&x, encoders::EncodingScheme::Amplitude, 2)
        }
        SchemeArg::PhaseQubit => {
            encoders::encode_feature_register(&x, encoders::EncodingScheme::Phase, 2)
        }
        SchemeArg::PhaseQutrit => {
            encoders::encode_feature_register(&x, encoders::EncodingScheme::Phase, 3)
        }
    }
    .map_err(usage)?;
    println!("d = {}, wires = {}", reg.dim(), reg.wires());
    print!("{}", render_register(&reg));
    Ok(())
}

fn cmd_synth_data(args: &SynthArgs) -> CmdResult {
    let spec = SyntheticSpec {
        seed: args.seed,
        n_days: args.days,
        trend: args.trend,
        noise: args.noise,
        signal_strength: args.signal,
    };
    let rows = market::synthetic_series(&spec).map_err(usage)?;
    let mut buf = Vec::new();
    market::write_ohlcv(&rows, &mut buf).map_err(data)?;
    match &args.out {
        Some(path) => fs::write(path, &buf).map_err(|e| data(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| data(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_list() {
        assert_eq!(parse_feature_list("0.6, 0.4,0").unwrap(), vec![0.6, 0.4, 0.0]);
        assert!(parse_feature_list("0.1,,0.2").is_err());
        assert!(parse_feature_list("nan").is_err());
        assert!(parse_feature_list("abc").is_err());
    }

    #[test]
    fn clap_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_exit_codes() {
        assert_eq!(run(["qforecast", "train", "--model", "svm", "--data", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["qforecast", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["qforecast", "--help"]), EXIT_OK);
        assert_eq!(run(["qforecast", "synth-data", "--days", "1"]), EXIT_USAGE);
        assert_eq!(run(["qforecast", "encode", "--scheme", "amplitude", "--features", "1.5"]), EXIT_USAGE);
    }
}
