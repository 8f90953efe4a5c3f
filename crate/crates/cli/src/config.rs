//! Run configuration: a JSON document with one object per section, every
//! field of which can be overridden from the command line.
//!
//! ```json
//! {
//!   "architecture": { "n_qubits": 8, "upsample_mode": "shared" },
//!   "training": { "step_size": 0.05, "max_epochs": 200 },
//!   "data": { "n_samples": 40, "seed": 3, "sigma": 0.1 },
//!   "experiment": "hybrid_vs_pure",
//!   "model": "pure",
//!   "hybrid": { "freeze_quantum": false },
//!   "timing": "off",
//!   "out_dir": "out"
//! }
//! ```
//!
//! Parsing never stops at the first problem. Each field is decoded on its
//! own and every failure is collected as an [`Issue`] naming its section and
//! field.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qfcn_core::circuit::ArchitectureConfig;
use qfcn_core::data::{DatasetMeta, DEFAULT_N_QUBITS, DEFAULT_THETA_A, DEFAULT_THETA_B};
use qfcn_core::hybrid::Experiment;
use qfcn_core::training::TrainConfig;
use qfcn_core::{Error as CoreError, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pure,
    Hybrid,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Pure => "pure",
            ModelKind::Hybrid => "hybrid",
        }
    }
}

/// Whether epoch records carry wall-clock time. `Off` writes zeros so that
/// repeated runs produce identical files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Off,
    Wall,
}

/// Where samples come from: a dataset file when `path` is set, otherwise a
/// freshly generated set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub n_samples: usize,
    pub seed: u64,
    pub sigma: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub n_qubits: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: None,
            n_samples: 40,
            seed: 3,
            sigma: 0.1,
            theta_a: DEFAULT_THETA_A,
            theta_b: DEFAULT_THETA_B,
            n_qubits: DEFAULT_N_QUBITS,
        }
    }
}

impl DataSection {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            seed: self.seed,
            noise_sigma: self.sigma,
            theta_a: self.theta_a,
            theta_b: self.theta_b,
            n_qubits: self.n_qubits,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HybridSection {
    pub freeze_quantum: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub architecture: ArchitectureConfig,
    pub training: TrainConfig,
    pub data: DataSection,
    pub experiment: Experiment,
    pub model: ModelKind,
    pub hybrid: HybridSection,
    pub timing: Timing,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            architecture: ArchitectureConfig::default(),
            training: TrainConfig::default(),
            data: DataSection::default(),
            experiment: Experiment::HybridVsPure,
            model: ModelKind::Pure,
            hybrid: HybridSection::default(),
            timing: Timing::Off,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// One invalid setting. `section` is empty for top-level fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub section: String,
    pub field: String,
    pub reason: String,
}

impl Issue {
    pub fn new(section: &str, field: &str, reason: impl Into<String>) -> Self {
        Self {
            section: section.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn key(&self) -> String {
        if self.section.is_empty() {
            self.field.clone()
        } else {
            format!("{}.{}", self.section, self.field)
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key(), self.reason)
    }
}

/// Decodes `value` into `slot`, recording a problem instead of failing.
fn decode<T: DeserializeOwned>(
    issues: &mut Vec<Issue>,
    section: &str,
    field: &str,
    value: Value,
    slot: &mut T,
) {
    match serde_json::from_value(value) {
        Ok(v) => *slot = v,
        Err(e) => issues.push(Issue::new(section, field, e.to_string())),
    }
}

/// Sets one field by name. Used for both file entries and flag overrides.
pub fn set_field(
    cfg: &mut RunConfig,
    section: &str,
    field: &str,
    value: Value,
    issues: &mut Vec<Issue>,
) {
    let unknown =
        |issues: &mut Vec<Issue>| issues.push(Issue::new(section, field, "unknown field"));
    match section {
        "architecture" => {
            let a = &mut cfg.architecture;
            match field {
                "n_qubits" => decode(issues, section, field, value, &mut a.n_qubits),
                "pool_schedule" => decode(issues, section, field, value, &mut a.pool_schedule),
                "upsample_schedule" => {
                    decode(issues, section, field, value, &mut a.upsample_schedule)
                }
                "conv_reps_per_stage" => {
                    decode(issues, section, field, value, &mut a.conv_reps_per_stage)
                }
                "upsample_mode" => decode(issues, section, field, value, &mut a.upsample_mode),
                "upsample_gate" => decode(issues, section, field, value, &mut a.upsample_gate),
                _ => unknown(issues),
            }
        }
        "training" => {
            let t = &mut cfg.training;
            match field {
                "step_size" => decode(issues, section, field, value, &mut t.step_size),
                "tolerance" => decode(issues, section, field, value, &mut t.tolerance),
                "max_epochs" => decode(issues, section, field, value, &mut t.max_epochs),
                "grad_method" => decode(issues, section, field, value, &mut t.grad_method),
                "fd_step" => decode(issues, section, field, value, &mut t.fd_step),
                "init_scale" => decode(issues, section, field, value, &mut t.init_scale),
                "init_seed" => decode(issues, section, field, value, &mut t.init_seed),
                _ => unknown(issues),
            }
        }
        "data" => {
            let d = &mut cfg.data;
            match field {
                "path" => decode(issues, section, field, value, &mut d.path),
                "n_samples" => decode(issues, section, field, value, &mut d.n_samples),
                "seed" => decode(issues, section, field, value, &mut d.seed),
                "sigma" => decode(issues, section, field, value, &mut d.sigma),
                "theta_a" => decode(issues, section, field, value, &mut d.theta_a),
                "theta_b" => decode(issues, section, field, value, &mut d.theta_b),
                "n_qubits" => decode(issues, section, field, value, &mut d.n_qubits),
                _ => unknown(issues),
            }
        }
        "hybrid" => match field {
            "freeze_quantum" => decode(
                issues,
                section,
                field,
                value,
                &mut cfg.hybrid.freeze_quantum,
            ),
            _ => unknown(issues),
        },
        "" => match field {
            "experiment" => match value.as_str().map(str::parse::<Experiment>) {
                Some(Ok(e)) => cfg.experiment = e,
                Some(Err(e)) => issues.push(Issue::new(section, field, e.to_string())),
                None => issues.push(Issue::new(
                    section,
                    field,
                    format!("expected a string, found {value}"),
                )),
            },
            "model" => decode(issues, section, field, value, &mut cfg.model),
            "timing" => decode(issues, section, field, value, &mut cfg.timing),
            "out_dir" => decode(issues, section, field, value, &mut cfg.out_dir),
            _ => unknown(issues),
        },
        _ => issues.push(Issue::new(section, "", "unknown section")),
    }
}

const SECTIONS: [&str; 4] = ["architecture", "training", "data", "hybrid"];

/// Reads a configuration document on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<Issue>> {
    let root: Map<String, Value> = match serde_json::from_str(text) {
        Ok(Value::Object(m)) => m,
        Ok(other) => {
            return Err(vec![Issue::new(
                "",
                "",
                format!("expected a JSON object, found {other}"),
            )])
        }
        Err(e) => return Err(vec![Issue::new("", "", format!("not valid JSON: {e}"))]),
    };
    let mut cfg = RunConfig::default();
    let mut issues = Vec::new();
    for (key, value) in root {
        if SECTIONS.contains(&key.as_str()) {
            match value {
                Value::Object(fields) => {
                    for (field, v) in fields {
                        set_field(&mut cfg, &key, &field, v, &mut issues);
                    }
                }
                other => issues.push(Issue::new(
                    &key,
                    "",
                    format!("expected an object, found {other}"),
                )),
            }
        } else {
            set_field(&mut cfg, "", &key, value, &mut issues);
        }
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(issues)
    }
}

fn architecture_issues(a: &ArchitectureConfig) -> Vec<Issue> {
    const S: &str = "architecture";
    let mut out = Vec::new();
    if !(2..=MAX_QUBITS).contains(&a.n_qubits) {
        out.push(Issue::new(
            S,
            "n_qubits",
            format!("{} is outside 2..={MAX_QUBITS}", a.n_qubits),
        ));
        return out;
    }
    if a.conv_reps_per_stage == 0 {
        out.push(Issue::new(S, "conv_reps_per_stage", "must be at least 1"));
    }
    let schedules = ArchitectureConfig {
        conv_reps_per_stage: 1,
        ..a.clone()
    };
    match schedules.validate() {
        Ok(()) => {}
        Err(CoreError::Schedule(msg)) => {
            let field = if msg.starts_with("pool") || msg.starts_with("at least one pooling") {
                "pool_schedule"
            } else {
                "upsample_schedule"
            };
            out.push(Issue::new(S, field, msg));
        }
        Err(CoreError::QubitCount(w)) => out.push(Issue::new(
            S,
            "upsample_schedule",
            format!("reaches {w} qubits, above {MAX_QUBITS}"),
        )),
        Err(CoreError::Config { field, reason }) => out.push(Issue::new(S, field, reason)),
        Err(other) => out.push(Issue::new(S, "", other.to_string())),
    }
    out
}

/// Problems in the data section. The width is compared against
/// `arch_qubits` when given.
pub fn data_issues(d: &DataSection, arch_qubits: Option<usize>) -> Vec<Issue> {
    const S: &str = "data";
    let mut out = Vec::new();
    if let Some(path) = &d.path {
        if !path.is_file() {
            out.push(Issue::new(
                S,
                "path",
                format!("{} is not a readable file", path.display()),
            ));
        }
        return out;
    }
    if d.n_samples == 0 {
        out.push(Issue::new(S, "n_samples", "must be at least 1"));
    }
    if !(d.sigma.is_finite() && d.sigma >= 0.0) {
        out.push(Issue::new(
            S,
            "sigma",
            format!("{} is not a finite non-negative value", d.sigma),
        ));
    }
    for (name, v) in [("theta_a", d.theta_a), ("theta_b", d.theta_b)] {
        if !v.is_finite() {
            out.push(Issue::new(S, name, format!("{v} is not finite")));
        }
    }
    if !(2..=MAX_QUBITS).contains(&d.n_qubits) {
        out.push(Issue::new(
            S,
            "n_qubits",
            format!("{} is outside 2..={MAX_QUBITS}", d.n_qubits),
        ));
    } else if let Some(w) = arch_qubits.filter(|&w| w != d.n_qubits) {
        out.push(Issue::new(
            S,
            "n_qubits",
            format!("{} does not match architecture.n_qubits = {w}", d.n_qubits),
        ));
    }
    out
}

impl RunConfig {
    /// Every invalid setting across all sections.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = architecture_issues(&self.architecture);
        for p in self.training.problems() {
            match p {
                CoreError::Config { field, reason } => {
                    out.push(Issue::new("training", field, reason))
                }
                other => out.push(Issue::new("training", "", other.to_string())),
            }
        }
        out.extend(data_issues(&self.data, Some(self.architecture.n_qubits)));
        if self.out_dir.as_os_str().is_empty() {
            out.push(Issue::new("", "out_dir", "must not be empty"));
        }
        out
    }

    /// Pretty JSON of the full configuration, ending in a newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configuration serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qfcn_core::circuit::UpsampleMode;
    use qfcn_core::training::GradMethod;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(parse_config("{}").unwrap(), RunConfig::default());
        assert!(RunConfig::default().issues().is_empty());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.architecture.upsample_mode = UpsampleMode::PerSite;
        cfg.training.grad_method = GradMethod::CentralFd;
        cfg.training.max_epochs = 17;
        cfg.data.path = Some(PathBuf::from("d.txt"));
        cfg.experiment = Experiment::SharedVsPerSite;
        cfg.model = ModelKind::Hybrid;
        cfg.hybrid.freeze_quantum = true;
        cfg.timing = Timing::Wall;
        cfg.out_dir = PathBuf::from("runs/a");
        assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn decoding_reports_every_bad_field() {
        let text = r#"{
            "architecture": {"upsample_mode": "diagonal", "colour": 1},
            "training": {"step_size": "fast", "max_epochs": -1},
            "data": {"seed": 1.5},
            "experiment": "a_vs_b",
            "timing": "sometimes",
            "plots": true
        }"#;
        let issues = parse_config(text).unwrap_err();
        let keys: Vec<String> = issues.iter().map(Issue::key).collect();
        for k in [
            "architecture.upsample_mode",
            "architecture.colour",
            "training.step_size",
            "training.max_epochs",
            "data.seed",
            "experiment",
            "timing",
            "plots",
        ] {
            assert!(keys.contains(&k.to_string()), "{k} missing from {keys:?}");
        }
        assert_eq!(issues.len(), 8);
    }

    #[test]
    fn semantic_validation_is_total() {
        let mut cfg = RunConfig::default();
        cfg.architecture.conv_reps_per_stage = 0;
        cfg.architecture.upsample_schedule = vec![2, 3];
        cfg.training.step_size = -1.0;
        cfg.training.max_epochs = 0;
        cfg.data.n_samples = 0;
        cfg.data.sigma = f64::NAN;
        cfg.data.n_qubits = 6;
        cfg.out_dir = PathBuf::new();
        let keys: Vec<String> = cfg.issues().iter().map(Issue::key).collect();
        assert_eq!(
            keys,
            [
                "architecture.conv_reps_per_stage",
                "architecture.upsample_schedule",
                "training.step_size",
                "training.max_epochs",
                "data.n_samples",
                "data.sigma",
                "data.n_qubits",
                "out_dir",
            ]
        );
    }

    #[test]
    fn pool_schedule_problems_are_attributed() {
        let mut cfg = RunConfig::default();
        cfg.architecture.pool_schedule = vec![vec![0, 2, 4, 6], vec![1, 0]];
        let issues = cfg.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].key(), "architecture.pool_schedule");
        cfg.architecture.n_qubits = 40;
        assert_eq!(cfg.issues()[0].key(), "architecture.n_qubits");
    }

    #[test]
    fn missing_data_file_is_reported() {
        let mut cfg = RunConfig::default();
        cfg.data.path = Some(PathBuf::from("/nonexistent/dataset.txt"));
        let issues = cfg.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].key(), "data.path");
    }

    #[test]
    fn malformed_documents() {
        assert_eq!(parse_config("[1]").unwrap_err().len(), 1);
        assert!(parse_config("{").unwrap_err()[0]
            .reason
            .contains("not valid JSON"));
        let issues = parse_config(r#"{"training": 3}"#).unwrap_err();
        assert_eq!(issues[0].section, "training");
    }
}
