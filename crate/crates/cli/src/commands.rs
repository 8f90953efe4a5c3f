//! Subcommand dispatch and exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage or validation error, nothing computed |
//! | 2 | runtime failure (I/O, malformed input file, divergence) |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::Value;

use qfcn_core::circuit::{build_qfcn, forward, ArchitectureConfig, ParamVector, UpsampleMode};
use qfcn_core::data::{generate, Dataset};
use qfcn_core::hybrid::{
    compare_models_with_clock, hybrid_forward, targets_of, train_hybrid_with_clock, Experiment,
    HybridConfig, HybridModel,
};
use qfcn_core::training::{accuracy, mse_loss, train_with_clock, Clock, NoClock, TrainingTrace};

use crate::config::{data_issues, parse_config, set_field, Issue, ModelKind, RunConfig, Timing};
use crate::dataset_io::{format_dataset, load_dataset, DatasetFileError};
use crate::report::{params_to_json, sha256_hex, DatasetEntry, ParamsFile, ReportFile};
use crate::svg::{render_svg, PlotError};
use crate::trace_csv::{format_trace_csv, TraceCsvError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// File name of the dataset copy written into the output directory.
pub const DATASET_FILE: &str = "dataset.txt";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<qfcn_core::Error> for CliError {
    fn from(e: qfcn_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<DatasetFileError> for CliError {
    fn from(e: DatasetFileError) -> Self {
        CliError::Runtime(format!("dataset: {e}"))
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        match e {
            PlotError::NoInputs => CliError::Usage(e.to_string()),
            PlotError::Trace(TraceCsvError::Io { .. }) | PlotError::Io { .. } => {
                CliError::Runtime(e.to_string())
            }
            PlotError::Trace(t) => CliError::Invalid(vec![Issue::new("", "inputs", t.to_string())]),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Parser, Debug)]
#[command(
    name = "qfcn",
    version,
    about = "Train and compare quantum fully convolutional networks on seeded segmentation data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded dataset file.
    GenData {
        #[command(flatten)]
        run: RunArgs,
        /// Output file; defaults to `<out-dir>/dataset.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and write its trace and parameters.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train both arms of an experiment and write traces and a report.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print loss and accuracy of saved parameters on a dataset.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter file written by `train` or `compare`.
        #[arg(long)]
        params: PathBuf,
    },
    /// Render trace CSV files to an SVG with loss and accuracy panels.
    Plot {
        /// Trace CSV files, one curve each.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Configuration file plus one override flag per configuration field.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, help_heading = "Architecture")]
    n_qubits: Option<usize>,
    /// JSON list of kept positions per pooling stage, e.g. `[[0,2,4,6],[0,2]]`.
    #[arg(long, help_heading = "Architecture")]
    pool_schedule: Option<String>,
    /// JSON list of ancilla counts per upsampling stage, e.g. `[2,4]`.
    #[arg(long, help_heading = "Architecture")]
    upsample_schedule: Option<String>,
    #[arg(long, help_heading = "Architecture")]
    conv_reps_per_stage: Option<usize>,
    /// shared | per_site
    #[arg(long, help_heading = "Architecture")]
    upsample_mode: Option<String>,
    /// full_su4 | controlled_su2
    #[arg(long, help_heading = "Architecture")]
    upsample_gate: Option<String>,

    #[arg(long, help_heading = "Training", allow_hyphen_values = true)]
    step_size: Option<f64>,
    #[arg(long, help_heading = "Training", allow_hyphen_values = true)]
    tolerance: Option<f64>,
    #[arg(long, help_heading = "Training")]
    max_epochs: Option<usize>,
    /// param_shift | central_fd
    #[arg(long, help_heading = "Training")]
    grad_method: Option<String>,
    #[arg(long, help_heading = "Training", allow_hyphen_values = true)]
    fd_step: Option<f64>,
    #[arg(long, help_heading = "Training", allow_hyphen_values = true)]
    init_scale: Option<f64>,
    #[arg(long, help_heading = "Training")]
    init_seed: Option<u64>,

    /// Dataset file to use instead of generating one.
    #[arg(long = "data-path", visible_alias = "data", help_heading = "Data")]
    data_path: Option<PathBuf>,
    #[arg(long = "n-samples", visible_alias = "n", help_heading = "Data")]
    n_samples: Option<usize>,
    #[arg(long, help_heading = "Data")]
    seed: Option<u64>,
    #[arg(long, help_heading = "Data", allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, help_heading = "Data", allow_hyphen_values = true)]
    theta_a: Option<f64>,
    #[arg(long, help_heading = "Data", allow_hyphen_values = true)]
    theta_b: Option<f64>,
    #[arg(long, help_heading = "Data")]
    data_n_qubits: Option<usize>,

    /// hybrid_vs_pure | shared_vs_per_site
    #[arg(long, help_heading = "Run")]
    experiment: Option<String>,
    /// pure | hybrid
    #[arg(long, help_heading = "Run")]
    model: Option<String>,
    #[arg(long, help_heading = "Run", action = ArgAction::Set)]
    freeze_quantum: Option<bool>,
    /// off | wall
    #[arg(long, help_heading = "Run")]
    timing: Option<String>,
    #[arg(long, help_heading = "Run")]
    out_dir: Option<PathBuf>,
}

fn json_list(issues: &mut Vec<Issue>, section: &str, field: &str, raw: &str) -> Option<Value> {
    match serde_json::from_str(raw) {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(Issue::new(
                section,
                field,
                format!("`{raw}` is not a JSON list: {e}"),
            ));
            None
        }
    }
}

impl RunArgs {
    /// Flag values as `(section, field, value)` triples.
    fn overrides(&self, issues: &mut Vec<Issue>) -> Vec<(&'static str, &'static str, Value)> {
        let s = |v: &Option<String>| v.clone().map(Value::String);
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| Value::String(p.display().to_string()));
        let n = |v: Option<f64>| v.map(Value::from);
        let u = |v: Option<usize>| v.map(Value::from);
        let pool = self
            .pool_schedule
            .as_deref()
            .and_then(|raw| json_list(issues, "architecture", "pool_schedule", raw));
        let ups = self
            .upsample_schedule
            .as_deref()
            .and_then(|raw| json_list(issues, "architecture", "upsample_schedule", raw));
        let entries = [
            ("architecture", "n_qubits", u(self.n_qubits)),
            ("architecture", "pool_schedule", pool),
            ("architecture", "upsample_schedule", ups),
            (
                "architecture",
                "conv_reps_per_stage",
                u(self.conv_reps_per_stage),
            ),
            ("architecture", "upsample_mode", s(&self.upsample_mode)),
            ("architecture", "upsample_gate", s(&self.upsample_gate)),
            ("training", "step_size", n(self.step_size)),
            ("training", "tolerance", n(self.tolerance)),
            ("training", "max_epochs", u(self.max_epochs)),
            ("training", "grad_method", s(&self.grad_method)),
            ("training", "fd_step", n(self.fd_step)),
            ("training", "init_scale", n(self.init_scale)),
            ("training", "init_seed", self.init_seed.map(Value::from)),
            ("data", "path", p(&self.data_path)),
            ("data", "n_samples", u(self.n_samples)),
            ("data", "seed", self.seed.map(Value::from)),
            ("data", "sigma", n(self.sigma)),
            ("data", "theta_a", n(self.theta_a)),
            ("data", "theta_b", n(self.theta_b)),
            ("data", "n_qubits", u(self.data_n_qubits)),
            ("", "experiment", s(&self.experiment)),
            ("", "model", s(&self.model)),
            (
                "hybrid",
                "freeze_quantum",
                self.freeze_quantum.map(Value::Bool),
            ),
            ("", "timing", s(&self.timing)),
            ("", "out_dir", p(&self.out_dir)),
        ];
        entries
            .into_iter()
            .filter_map(|(sec, field, v)| v.map(|v| (sec, field, v)))
            .collect()
    }

    /// Configuration file, then flags, with every decoding problem collected.
    /// Semantic checks are left to the caller.
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut issues = Vec::new();
        let mut cfg = match &self.config {
            None => RunConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Invalid(vec![Issue::new(
                        "",
                        "config",
                        format!("{}: {e}", path.display()),
                    )])
                })?;
                parse_config(&text).unwrap_or_else(|found| {
                    issues.extend(found);
                    RunConfig::default()
                })
            }
        };
        for (section, field, value) in self.overrides(&mut issues) {
            set_field(&mut cfg, section, field, value, &mut issues);
        }
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Invalid(issues))
        }
    }

    fn resolve_valid(&self) -> Result<RunConfig, CliError> {
        let cfg = self.resolve()?;
        let issues = cfg.issues();
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Invalid(issues))
        }
    }
}

/// The dataset named by the configuration and the bytes it is stored as.
struct LoadedData {
    dataset: Dataset,
    text: String,
    /// Where the dataset lives after the run.
    file: PathBuf,
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out_dir.display())))
}

/// Loads the configured dataset file, or generates one and stores it in the
/// output directory.
fn obtain_dataset(cfg: &RunConfig) -> Result<LoadedData, CliError> {
    match &cfg.data.path {
        Some(path) => {
            let dataset = load_dataset(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            if dataset.n_qubits() != cfg.architecture.n_qubits {
                return Err(CliError::Invalid(vec![Issue::new(
                    "data",
                    "path",
                    format!(
                        "{} holds {}-qubit samples but architecture.n_qubits = {}",
                        path.display(),
                        dataset.n_qubits(),
                        cfg.architecture.n_qubits
                    ),
                )]));
            }
            Ok(LoadedData {
                dataset,
                text,
                file: path.clone(),
            })
        }
        None => {
            let dataset = generate(&cfg.data.meta(), cfg.data.n_samples)?;
            let text = format_dataset(&dataset);
            let file = cfg.out_dir.join(DATASET_FILE);
            write_file(&file, &text)?;
            Ok(LoadedData {
                dataset,
                text,
                file,
            })
        }
    }
}

/// Wall-clock milliseconds since construction, or zeros when timing is off.
enum RunClock {
    Off(NoClock),
    Wall(Instant),
}

impl RunClock {
    fn start(timing: Timing) -> Self {
        match timing {
            Timing::Off => RunClock::Off(NoClock),
            Timing::Wall => RunClock::Wall(Instant::now()),
        }
    }
}

impl Clock for RunClock {
    fn elapsed_ms(&mut self) -> f64 {
        match self {
            RunClock::Off(c) => c.elapsed_ms(),
            RunClock::Wall(t0) => t0.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn cmd_gen_data(run: &RunArgs, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = run.resolve()?;
    let mut issues = data_issues(&cfg.data, None);
    if cfg.data.path.is_some() {
        issues.push(Issue::new(
            "data",
            "path",
            "gen-data writes a dataset; use --out for its location",
        ));
    }
    if !issues.is_empty() {
        return Err(CliError::Invalid(issues));
    }
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => {
            prepare_out_dir(&cfg)?;
            cfg.out_dir.join(DATASET_FILE)
        }
    };
    let dataset = generate(&cfg.data.meta(), cfg.data.n_samples)?;
    let text = format_dataset(&dataset);
    write_file(&target, &text)?;
    let _ = writeln!(
        stdout,
        "wrote {} samples to {} (sha256 {})",
        dataset.len(),
        target.display(),
        sha256_hex(text.as_bytes())
    );
    Ok(())
}

fn trained_model(
    cfg: &RunConfig,
    data: &Dataset,
) -> Result<(ParamVector, TrainingTrace), CliError> {
    let mut clock = RunClock::start(cfg.timing);
    Ok(match cfg.model {
        ModelKind::Pure => {
            let spec = build_qfcn(&cfg.architecture)?;
            train_with_clock(&spec, data, &cfg.training, &mut clock)?
        }
        ModelKind::Hybrid => {
            let model = HybridModel::from_architecture(&cfg.architecture)?;
            let hcfg = HybridConfig {
                train: cfg.training.clone(),
                freeze_quantum: cfg.hybrid.freeze_quantum,
            };
            train_hybrid_with_clock(&model, data, &hcfg, &mut clock)?
        }
    })
}

fn cmd_train(run: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = run.resolve_valid()?;
    prepare_out_dir(&cfg)?;
    let data = obtain_dataset(&cfg)?;
    let (params, trace) = trained_model(&cfg, &data.dataset)?;
    let name = cfg.model.as_str();
    let csv_path = cfg.out_dir.join(format!("{name}_trace.csv"));
    write_file(&csv_path, &format_trace_csv(&trace))?;
    let params_path = cfg.out_dir.join(format!("{name}_params.json"));
    let file = ParamsFile {
        model: cfg.model,
        architecture: cfg.architecture.clone(),
        params,
    };
    write_file(&params_path, &params_to_json(&file))?;
    let _ = writeln!(
        stdout,
        "{name}: {} epochs ({:?}), loss {:.6} -> {:.6}, accuracy {:.4} -> {:.4}",
        trace.len(),
        trace.stop_reason,
        trace.initial.loss,
        trace.final_loss(),
        trace.initial.accuracy,
        trace.final_accuracy()
    );
    let _ = writeln!(
        stdout,
        "dataset {} (sha256 {})",
        data.file.display(),
        sha256_hex(data.text.as_bytes())
    );
    let _ = writeln!(
        stdout,
        "wrote {} and {}",
        csv_path.display(),
        params_path.display()
    );
    Ok(())
}

/// Output file names for one comparison arm.
pub fn arm_file_names(experiment: &str, label: &str) -> (String, String) {
    (
        format!("{experiment}_{label}.csv"),
        format!("{experiment}_{label}_params.json"),
    )
}

pub fn report_file_name(experiment: &str) -> String {
    format!("{experiment}_report.json")
}

fn cmd_compare(run: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = run.resolve_valid()?;
    prepare_out_dir(&cfg)?;
    let data = obtain_dataset(&cfg)?;
    let timing = cfg.timing;
    let report = compare_models_with_clock(
        cfg.experiment,
        &cfg.architecture,
        &data.dataset,
        &cfg.training,
        &mut || RunClock::start(timing),
    )?;
    let dataset_sha = sha256_hex(data.text.as_bytes());
    let entry = DatasetEntry {
        file: data.file.display().to_string(),
        sha256: dataset_sha.clone(),
        n_samples: report.dataset_len,
        fingerprint: format!("{:016x}", report.dataset_fingerprint),
        meta: report.dataset_meta,
    };
    let mut doc = ReportFile::new(&cfg, &report, entry);
    let exp = report.experiment.as_str();
    for (arm, summary) in report.arms.iter().zip(doc.arms.iter_mut()) {
        let (csv_name, params_name) = arm_file_names(exp, &arm.label);
        let csv = format_trace_csv(&arm.trace);
        write_file(&cfg.out_dir.join(&csv_name), &csv)?;
        let model = if arm.label == "hybrid" {
            ModelKind::Hybrid
        } else {
            ModelKind::Pure
        };
        let architecture = match report.experiment {
            Experiment::SharedVsPerSite => ArchitectureConfig {
                upsample_mode: if arm.label == "per_site" {
                    UpsampleMode::PerSite
                } else {
                    UpsampleMode::Shared
                },
                ..cfg.architecture.clone()
            },
            Experiment::HybridVsPure => cfg.architecture.clone(),
        };
        let params = ParamsFile {
            model,
            architecture,
            params: arm.params.clone(),
        };
        write_file(&cfg.out_dir.join(&params_name), &params_to_json(&params))?;
        summary.trace_sha256 = sha256_hex(csv.as_bytes());
        summary.trace_csv = csv_name;
        summary.params_file = params_name;
        summary.dataset_sha256 = dataset_sha.clone();
    }
    let report_path = cfg.out_dir.join(report_file_name(exp));
    write_file(&report_path, &doc.to_json())?;
    for arm in &doc.arms {
        let _ = writeln!(
            stdout,
            "{}: {} params, {} epochs, loss {:.6} -> {:.6}, accuracy {:.4}",
            arm.label,
            arm.n_params,
            arm.epochs,
            arm.initial_loss,
            arm.final_loss,
            arm.final_accuracy
        );
    }
    for o in &doc.observations {
        let _ = writeln!(stdout, "observation: {o}");
    }
    let _ = writeln!(stdout, "wrote {}", report_path.display());
    Ok(())
}

fn cmd_eval(run: &RunArgs, params_path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = run.resolve_valid()?;
    if !params_path.is_file() {
        return Err(CliError::Invalid(vec![Issue::new(
            "",
            "params",
            format!("{} is not a readable file", params_path.display()),
        )]));
    }
    let text = std::fs::read_to_string(params_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", params_path.display())))?;
    let file: ParamsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", params_path.display())))?;
    let dataset = match &cfg.data.path {
        Some(path) => load_dataset(path)?,
        None => generate(&cfg.data.meta(), cfg.data.n_samples)?,
    };
    let samples = dataset.samples();
    let predictions: Vec<Vec<f64>> = match file.model {
        ModelKind::Pure => {
            let spec = build_qfcn(&file.architecture)?;
            let theta = ParamVector::new(spec.layout().clone(), file.params.values().to_vec())?;
            if file.params.layout() != spec.layout() {
                return Err(CliError::Runtime(format!(
                    "{}: parameter layout does not match its architecture",
                    params_path.display()
                )));
            }
            samples
                .iter()
                .map(|s| forward(&spec, &theta, &s.x))
                .collect::<Result<_, _>>()?
        }
        ModelKind::Hybrid => {
            let model = HybridModel::from_architecture(&file.architecture)?;
            let theta = ParamVector::new(model.layout().clone(), file.params.values().to_vec())?;
            if file.params.layout() != model.layout() {
                return Err(CliError::Runtime(format!(
                    "{}: parameter layout does not match its architecture",
                    params_path.display()
                )));
            }
            samples
                .iter()
                .map(|s| hybrid_forward(&model, &theta, &s.x))
                .collect::<Result<_, _>>()?
        }
    };
    let targets = targets_of(samples);
    let loss = mse_loss(&predictions, &targets)?;
    let acc = accuracy(&predictions, &targets)?;
    let _ = writeln!(
        stdout,
        "model={} samples={} loss={loss:.12e} accuracy={acc:.12e}",
        file.model.as_str(),
        dataset.len()
    );
    Ok(())
}

fn cmd_plot(inputs: &[PathBuf], out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let missing: Vec<Issue> = inputs
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| {
            Issue::new(
                "",
                "inputs",
                format!("{} is not a readable file", p.display()),
            )
        })
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Invalid(missing));
    }
    render_svg(inputs, out)?;
    let _ = writeln!(stdout, "wrote {}", out.display());
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { run, out } => cmd_gen_data(&run, out.as_deref(), stdout),
        Command::Train { run } => cmd_train(&run, stdout),
        Command::Compare { run } => cmd_compare(&run, stdout),
        Command::Eval { run, params } => cmd_eval(&run, &params, stdout),
        Command::Plot { inputs, out } => cmd_plot(&inputs, &out, stdout),
    }
}

/// Runs one invocation with explicit output streams and returns its exit
/// code. `argv[0]` is the program name.
pub fn run_with_io<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one invocation against the process's standard streams.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with_io(argv, &mut out, &mut err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("qfcn").chain(args.iter().copied());
        let code = run_with_io(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, _, err) = run(&["frobnicate"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(run(&[]).0, EXIT_INVALID);
        assert_eq!(run(&["train", "--max-epochs", "many"]).0, EXIT_INVALID);
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("gen-data") && out.contains("compare"));
    }

    #[test]
    fn flags_report_every_problem_before_computing() {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().join("out");
        let (code, _, err) = run(&[
            "train",
            "--step-size",
            "-1",
            "--upsample-mode",
            "diagonal",
            "--n-samples",
            "0",
            "--timing",
            "sometimes",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("architecture.upsample_mode"), "{err}");
        assert!(err.contains("timing"), "{err}");
        assert!(!out_dir.exists());

        let (code, _, err) = run(&[
            "train",
            "--step-size",
            "-1",
            "--n-samples",
            "0",
            "--max-epochs",
            "0",
        ]);
        assert_eq!(code, EXIT_INVALID);
        for key in [
            "training.step_size",
            "training.max_epochs",
            "data.n_samples",
        ] {
            assert!(err.contains(key), "{key} missing from {err}");
        }
    }

    #[test]
    fn divergence_maps_to_runtime_exit_naming_the_epoch() {
        let e = CliError::from(qfcn_core::Error::Diverged {
            epoch: 3,
            loss: 4.7e7,
        });
        assert_eq!(e.exit_code(), EXIT_RUNTIME);
        assert!(e.to_string().contains("epoch 3"));
    }

    #[test]
    fn malformed_dataset_is_a_runtime_failure() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "#version=1\n#seed=1\nnot a sample\n").unwrap();
        let (code, _, err) = run(&[
            "train",
            "--data",
            bad.to_str().unwrap(),
            "--out-dir",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_RUNTIME, "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn missing_inputs_are_validation_errors() {
        let (code, _, err) = run(&["plot", "/nonexistent/a.csv", "--out", "x.svg"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("/nonexistent/a.csv"));
        let (code, _, err) = run(&["train", "--data", "/nonexistent/d.txt"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("data.path"));
        let (code, _, err) = run(&["eval", "--params", "/nonexistent/p.json"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("params"));
    }
}
