//! Hybrid baseline (truncated circuit + classical head) and the two-arm
//! comparison harness.
//!
//! The head maps the bottleneck readouts `r` to `Y_q = tanh(Σ_k W_qk r_k + b_q)`
//! and its parameters are appended to the circuit parameters as the slices
//! `head.weights` (row-major, one row per output position) and `head.biases`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::circuit::{
    build_qcnn, build_qfcn, ArchitectureConfig, CircuitSpec, ParamLayout, ParamVector, UpsampleMode,
};
use crate::data::{Dataset, DatasetMeta, Sample};
use crate::training::{
    accuracy, grad_central_fd, init_params, mse_loss, optimize, train_with_clock, Clock,
    Evaluation, GradMethod, NoClock, Objective, QfcnObjective, TrainConfig, TrainingTrace,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalHead {
    n_out: usize,
    n_in: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl ClassicalHead {
    /// `weights` is row-major `n_out × n_in`.
    pub fn new(n_out: usize, n_in: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != n_out * n_in {
            return Err(Error::Length {
                expected: n_out * n_in,
                found: weights.len(),
            });
        }
        if biases.len() != n_out {
            return Err(Error::Length {
                expected: n_out,
                found: biases.len(),
            });
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head parameters"));
        }
        Ok(Self {
            n_out,
            n_in,
            weights,
            biases,
        })
    }

    pub fn zeros(n_out: usize, n_in: usize) -> Self {
        Self {
            n_out,
            n_in,
            weights: vec![0.0; n_out * n_in],
            biases: vec![0.0; n_out],
        }
    }

    /// Splits `[weights…, biases…]`.
    pub fn from_flat(n_out: usize, n_in: usize, flat: &[f64]) -> Result<Self> {
        let nw = n_out * n_in;
        if flat.len() != nw + n_out {
            return Err(Error::Length {
                expected: nw + n_out,
                found: flat.len(),
            });
        }
        Self::new(n_out, n_in, flat[..nw].to_vec(), flat[nw..].to_vec())
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn pre_activation(&self, r: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(r).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// `Y_q = tanh(Σ_k W_qk r_k + b_q)`.
pub fn classical_upsample(r: &[f64], head: &ClassicalHead) -> Result<Vec<f64>> {
    if r.len() != head.n_in {
        return Err(Error::Length {
            expected: head.n_in,
            found: r.len(),
        });
    }
    Ok(head.pre_activation(r).into_iter().map(libm::tanh).collect())
}

/// Truncated circuit followed by a classical head covering every input
/// position.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    spec: CircuitSpec,
    layout: ParamLayout,
}

impl HybridModel {
    pub fn new(spec: CircuitSpec) -> Result<Self> {
        if !spec.is_truncated() {
            return Err(Error::Schedule(
                "the hybrid model needs a circuit truncated at the bottleneck".into(),
            ));
        }
        let mut layout = spec.layout().clone();
        let (n_out, n_in) = (spec.n_qubits(), spec.output_width());
        layout.push("head.weights", n_out * n_in);
        layout.push("head.biases", n_out);
        Ok(Self { spec, layout })
    }

    pub fn from_architecture(cfg: &ArchitectureConfig) -> Result<Self> {
        Self::new(build_qcnn(cfg)?)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.total()
    }

    pub fn n_quantum_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn head(&self, theta: &ParamVector) -> Result<ClassicalHead> {
        self.check(theta)?;
        ClassicalHead::from_flat(
            self.spec.n_qubits(),
            self.spec.output_width(),
            &theta.values()[self.n_quantum_params()..],
        )
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.layout() != &self.layout {
            return Err(Error::Layout {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

/// Per-position predictions of the hybrid model.
pub fn hybrid_forward(model: &HybridModel, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let head = model.head(theta)?;
    let nq = model.n_quantum_params();
    let quantum = ParamVector::new(model.spec.layout().clone(), theta.values()[..nq].to_vec())?;
    let r = crate::circuit::forward_qcnn(&model.spec, &quantum, x)?;
    classical_upsample(&r, &head)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridConfig {
    pub train: TrainConfig,
    /// Train the head only, keeping the circuit at its initial parameters.
    pub freeze_quantum: bool,
}

impl From<TrainConfig> for HybridConfig {
    fn from(train: TrainConfig) -> Self {
        Self {
            train,
            freeze_quantum: false,
        }
    }
}

struct HybridObjective<'a> {
    model: &'a HybridModel,
    circuit: QfcnObjective<'a>,
    method: GradMethod,
    fd_step: f64,
}

impl HybridObjective<'_> {
    fn split<'t>(&self, theta: &'t [f64]) -> Result<(&'t [f64], ClassicalHead)> {
        let nq = self.model.n_quantum_params();
        let head = ClassicalHead::from_flat(
            self.model.spec.n_qubits(),
            self.model.spec.output_width(),
            &theta[nq..],
        )?;
        Ok((&theta[..nq], head))
    }

    fn predict(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (quantum, head) = self.split(theta)?;
        self.circuit
            .predict(quantum)?
            .iter()
            .map(|r| classical_upsample(r, &head))
            .collect()
    }
}

impl Objective for HybridObjective<'_> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let pred = self.predict(theta)?;
        let targets = self.circuit.targets();
        Ok(Evaluation {
            loss: mse_loss(&pred, targets)?,
            accuracy: accuracy(&pred, targets)?,
        })
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if self.method == GradMethod::CentralFd {
            return grad_central_fd(
                |t| mse_loss(&self.predict(t)?, self.circuit.targets()),
                theta,
                self.fd_step,
            );
        }
        let (quantum, head) = self.split(theta)?;
        let targets = self.circuit.targets();
        let scale = 2.0 / targets.len() as f64;
        let (n_out, n_in) = (head.n_out, head.n_in);
        let mut head_grad = vec![0.0; head.n_params()];
        let mut grad = self.circuit.backprop(quantum, |j, r| {
            let dz: Vec<f64> = head
                .pre_activation(r)
                .into_iter()
                .zip(&targets[j])
                .map(|(z, t)| {
                    let y = libm::tanh(z);
                    scale * (y - t) * (1.0 - y * y)
                })
                .collect();
            for (q, d) in dz.iter().enumerate() {
                for (k, rk) in r.iter().enumerate() {
                    head_grad[q * n_in + k] += d * rk;
                }
                head_grad[n_out * n_in + q] += d;
            }
            (0..n_in)
                .map(|k| {
                    dz.iter()
                        .enumerate()
                        .map(|(q, d)| d * head.weights[q * n_in + k])
                        .sum()
                })
                .collect()
        })?;
        grad.extend(head_grad);
        Ok(grad)
    }
}

pub fn train_hybrid(
    model: &HybridModel,
    dataset: &Dataset,
    cfg: &HybridConfig,
) -> Result<(ParamVector, TrainingTrace)> {
    train_hybrid_with_clock(model, dataset, cfg, &mut NoClock)
}

pub fn train_hybrid_with_clock<C: Clock + ?Sized>(
    model: &HybridModel,
    dataset: &Dataset,
    cfg: &HybridConfig,
    clock: &mut C,
) -> Result<(ParamVector, TrainingTrace)> {
    cfg.train.validate()?;
    if dataset.n_qubits() != model.spec.n_qubits() {
        return Err(Error::Length {
            expected: model.spec.n_qubits(),
            found: dataset.n_qubits(),
        });
    }
    let objective = HybridObjective {
        model,
        circuit: QfcnObjective::unchecked(
            &model.spec,
            dataset.samples(),
            cfg.train.grad_method,
            cfg.train.fd_step,
        )?,
        method: cfg.train.grad_method,
        fd_step: cfg.train.fd_step,
    };
    let theta0 = init_params(model.n_params(), cfg.train.init_scale, cfg.train.init_seed);
    let mask: Option<Vec<bool>> = cfg.freeze_quantum.then(|| {
        (0..model.n_params())
            .map(|i| i >= model.n_quantum_params())
            .collect()
    });
    let (theta, trace) = optimize(&objective, theta0, &cfg.train, mask.as_deref(), clock)?;
    Ok((ParamVector::new(model.layout.clone(), theta)?, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Experiment {
    HybridVsPure,
    SharedVsPerSite,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::HybridVsPure => "hybrid_vs_pure",
            Experiment::SharedVsPerSite => "shared_vs_per_site",
        }
    }

    /// Arm labels; the first is the arm the original experiment favoured.
    pub fn arm_labels(self) -> [&'static str; 2] {
        match self {
            Experiment::HybridVsPure => ["pure", "hybrid"],
            Experiment::SharedVsPerSite => ["per_site", "shared"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid_vs_pure" => Ok(Experiment::HybridVsPure),
            "shared_vs_per_site" => Ok(Experiment::SharedVsPerSite),
            other => Err(Error::Config {
                field: "experiment",
                reason: format!(
                    "unknown experiment `{other}` (expected hybrid_vs_pure or shared_vs_per_site)"
                ),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArmReport {
    pub label: String,
    pub n_params: usize,
    pub params: ParamVector,
    pub trace: TrainingTrace,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub experiment: Experiment,
    pub dataset_meta: DatasetMeta,
    pub dataset_len: usize,
    pub dataset_fingerprint: u64,
    pub arms: Vec<ArmReport>,
    /// Descriptive comparisons of the two arms; not pass/fail judgements.
    pub observations: Vec<String>,
}

impl ComparisonReport {
    pub fn arm(&self, label: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.label == label)
    }
}

fn first_epoch_below(trace: &TrainingTrace, level: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.loss <= level)
        .map(|r| r.epoch)
}

fn observations(arms: &[ArmReport]) -> Vec<String> {
    let (a, b) = (&arms[0], &arms[1]);
    let cmp = |x: f64, y: f64, lower_is: &str| -> String {
        if x == y {
            "equal".into()
        } else if (x < y) == (lower_is == "lower") {
            format!("{} {lower_is}", a.label)
        } else {
            format!("{} {lower_is}", b.label)
        }
    };
    let mut out = vec![
        format!(
            "final loss: {}={:.6}, {}={:.6} ({})",
            a.label,
            a.trace.final_loss(),
            b.label,
            b.trace.final_loss(),
            cmp(a.trace.final_loss(), b.trace.final_loss(), "lower")
        ),
        format!(
            "final accuracy: {}={:.4}, {}={:.4} ({})",
            a.label,
            a.trace.final_accuracy(),
            b.label,
            b.trace.final_accuracy(),
            cmp(a.trace.final_accuracy(), b.trace.final_accuracy(), "higher")
        ),
    ];
    let halfway = |arm: &ArmReport| {
        let level = 0.5 * arm.trace.initial.loss;
        first_epoch_below(&arm.trace, level)
            .map_or_else(|| "not reached".into(), |e| format!("epoch {e}"))
    };
    out.push(format!(
        "half of initial loss: {} {}, {} {}",
        a.label,
        halfway(a),
        b.label,
        halfway(b)
    ));
    out.push(format!(
        "parameters: {}={}, {}={}",
        a.label, a.n_params, b.label, b.n_params
    ));
    out
}

/// Trains both arms of `experiment` on `dataset` with identical settings.
pub fn compare_models(
    experiment: Experiment,
    arch: &ArchitectureConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<ComparisonReport> {
    compare_models_with_clock(experiment, arch, dataset, cfg, &mut || NoClock)
}

/// As [`compare_models`], with a fresh clock per arm from `make_clock`.
pub fn compare_models_with_clock<C: Clock, F: FnMut() -> C>(
    experiment: Experiment,
    arch: &ArchitectureConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
    make_clock: &mut F,
) -> Result<ComparisonReport> {
    let [first, second] = experiment.arm_labels();
    let arms = match experiment {
        Experiment::HybridVsPure => {
            let pure = build_qfcn(arch)?;
            let (theta, trace) = train_with_clock(&pure, dataset, cfg, &mut make_clock())?;
            let pure_arm = ArmReport {
                label: first.into(),
                n_params: pure.n_params(),
                params: theta,
                trace,
            };
            let model = HybridModel::from_architecture(arch)?;
            let (theta, trace) = train_hybrid_with_clock(
                &model,
                dataset,
                &HybridConfig::from(cfg.clone()),
                &mut make_clock(),
            )?;
            let hybrid_arm = ArmReport {
                label: second.into(),
                n_params: model.n_params(),
                params: theta,
                trace,
            };
            vec![pure_arm, hybrid_arm]
        }
        Experiment::SharedVsPerSite => [
            (first, UpsampleMode::PerSite),
            (second, UpsampleMode::Shared),
        ]
        .into_iter()
        .map(|(label, mode)| {
            let spec = build_qfcn(&ArchitectureConfig {
                upsample_mode: mode,
                ..arch.clone()
            })?;
            let (theta, trace) = train_with_clock(&spec, dataset, cfg, &mut make_clock())?;
            Ok(ArmReport {
                label: label.into(),
                n_params: spec.n_params(),
                params: theta,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?,
    };
    Ok(ComparisonReport {
        experiment,
        dataset_meta: *dataset.meta(),
        dataset_len: dataset.len(),
        dataset_fingerprint: dataset.fingerprint(),
        observations: observations(&arms),
        arms,
    })
}

/// Targets of every sample, for evaluating externally produced predictions.
pub fn targets_of(samples: &[Sample]) -> Vec<Vec<f64>> {
    samples.iter().map(Sample::targets).collect()
}
