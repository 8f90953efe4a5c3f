//! JSON artifacts written next to the trace files: trained parameters and
//! comparison reports with content checksums.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qfcn_core::circuit::{ArchitectureConfig, ParamVector};
use qfcn_core::data::DatasetMeta;
use qfcn_core::hybrid::ComparisonReport;
use qfcn_core::training::{StopReason, TrainingTrace};

use crate::config::{ModelKind, RunConfig};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Trained parameters together with everything needed to rebuild the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub model: ModelKind,
    pub architecture: ArchitectureConfig,
    pub params: ParamVector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetEntry {
    pub file: String,
    pub sha256: String,
    pub n_samples: usize,
    pub fingerprint: String,
    pub meta: DatasetMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmEntry {
    pub label: String,
    pub n_params: usize,
    pub trace_csv: String,
    pub trace_sha256: String,
    pub params_file: String,
    pub dataset_sha256: String,
    pub epochs: usize,
    pub stop_reason: StopReason,
    pub initial_loss: f64,
    pub initial_accuracy: f64,
    pub final_loss: f64,
    pub final_accuracy: f64,
}

impl ArmEntry {
    pub fn summarize(label: &str, n_params: usize, trace: &TrainingTrace) -> Self {
        Self {
            label: label.into(),
            n_params,
            trace_csv: String::new(),
            trace_sha256: String::new(),
            params_file: String::new(),
            dataset_sha256: String::new(),
            epochs: trace.len(),
            stop_reason: trace.stop_reason,
            initial_loss: trace.initial.loss,
            initial_accuracy: trace.initial.accuracy,
            final_loss: trace.final_loss(),
            final_accuracy: trace.final_accuracy(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportFile<'a> {
    pub experiment: String,
    pub config: &'a RunConfig,
    pub dataset: DatasetEntry,
    pub arms: Vec<ArmEntry>,
    /// Descriptive comparisons; nothing here is a pass/fail judgement.
    pub observations: Vec<String>,
}

impl<'a> ReportFile<'a> {
    /// Report skeleton for `report`; file names and checksums are filled in
    /// by the caller once the artifacts are written.
    pub fn new(config: &'a RunConfig, report: &ComparisonReport, dataset: DatasetEntry) -> Self {
        Self {
            experiment: report.experiment.to_string(),
            config,
            dataset,
            arms: report
                .arms
                .iter()
                .map(|a| ArmEntry::summarize(&a.label, a.n_params, &a.trace))
                .collect(),
            observations: report.observations.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn params_to_json(p: &ParamsFile) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("parameters serialize");
    s.push('\n');
    s
}
