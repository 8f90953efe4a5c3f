//! Full-batch gradient descent with a successive-loss stopping rule.

mod grad;
mod loss;

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use grad::{grad_central_fd, grad_param_shift, QfcnObjective};
pub use loss::{accuracy, mse_loss};

use crate::circuit::{CircuitSpec, ParamVector};
use crate::data::{standard_normal, Dataset};
use crate::{Error, Result};

/// Loss above which a run is aborted as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum GradMethod {
    CentralFd,
    ParamShift,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct TrainConfig {
    pub step_size: f64,
    /// Training stops once `|L(θ_{k+1}) − L(θ_k)| ≤ tolerance`. Zero is
    /// accepted and disables the rule unless the loss is exactly stationary.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub grad_method: GradMethod,
    pub fd_step: f64,
    pub init_scale: f64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            tolerance: 1e-6,
            max_epochs: 200,
            grad_method: GradMethod::ParamShift,
            fd_step: 1e-5,
            init_scale: 0.1,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every invalid field, in declaration order.
    pub fn problems(&self) -> Vec<Error> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, reason: alloc::string::String| {
            out.push(Error::Config { field, reason })
        };
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            bad(
                "step_size",
                format!("{} is not a positive finite number", self.step_size),
            );
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            bad(
                "tolerance",
                format!("{} is not a finite non-negative number", self.tolerance),
            );
        }
        if self.max_epochs == 0 {
            bad("max_epochs", "must be at least 1".into());
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            bad(
                "fd_step",
                format!("{} is not a positive finite number", self.fd_step),
            );
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            bad(
                "init_scale",
                format!("{} is not a finite non-negative number", self.init_scale),
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum StopReason {
    ToleranceMet,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingTrace {
    /// Loss and accuracy of the initial parameters (epoch 0).
    pub initial: Evaluation,
    pub records: Vec<EpochRecord>,
    pub stop_reason: StopReason,
}

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial.loss, |r| r.loss)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial.accuracy, |r| r.accuracy)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Epochs numbered `1..=len`, finite non-negative losses, accuracies in
    /// `[0, 1]`, at most `max_epochs` records.
    pub fn is_well_formed(&self, max_epochs: usize) -> bool {
        self.records.len() <= max_epochs
            && self.records.iter().enumerate().all(|(i, r)| {
                r.epoch == i + 1
                    && r.loss.is_finite()
                    && r.loss >= 0.0
                    && (0.0..=1.0).contains(&r.accuracy)
            })
    }
}

/// A differentiable training objective over a flat parameter vector.
pub trait Objective {
    fn n_params(&self) -> usize;
    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// Milliseconds since the start of a run.
pub trait Clock {
    fn elapsed_ms(&mut self) -> f64;
}

/// Reports zero elapsed time; keeps traces reproducible byte for byte.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&mut self) -> f64 {
        0.0
    }
}

impl<F: FnMut() -> f64> Clock for F {
    fn elapsed_ms(&mut self) -> f64 {
        self()
    }
}

/// `n` independent draws from `N(0, scale²)` seeded by `seed`.
pub fn init_params(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| scale * standard_normal(&mut rng)).collect()
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { epoch, loss });
    }
    Ok(())
}

/// Gradient descent `θ ← θ − δ·∇L` from `theta`, updating only entries whose
/// `trainable` flag is set (all of them when `None`).
pub fn optimize<O, C>(
    objective: &O,
    mut theta: Vec<f64>,
    cfg: &TrainConfig,
    trainable: Option<&[bool]>,
    clock: &mut C,
) -> Result<(Vec<f64>, TrainingTrace)>
where
    O: Objective + ?Sized,
    C: Clock + ?Sized,
{
    cfg.validate()?;
    if theta.len() != objective.n_params() {
        return Err(Error::Layout {
            expected: objective.n_params(),
            found: theta.len(),
        });
    }
    if let Some(mask) = trainable {
        if mask.len() != theta.len() {
            return Err(Error::Layout {
                expected: theta.len(),
                found: mask.len(),
            });
        }
    }
    let initial = objective.evaluate(&theta)?;
    check_loss(0, initial.loss)?;
    let mut previous = initial.loss;
    let mut records = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let g = objective.gradient(&theta)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        for (i, (t, gi)) in theta.iter_mut().zip(&g).enumerate() {
            if trainable.map_or(true, |m| m[i]) {
                *t -= cfg.step_size * gi;
            }
        }
        let eval = objective.evaluate(&theta)?;
        check_loss(epoch, eval.loss)?;
        records.push(EpochRecord {
            epoch,
            loss: eval.loss,
            accuracy: eval.accuracy,
            elapsed_ms: clock.elapsed_ms(),
        });
        if (eval.loss - previous).abs() <= cfg.tolerance {
            return Ok((
                theta,
                TrainingTrace {
                    initial,
                    records,
                    stop_reason: StopReason::ToleranceMet,
                },
            ));
        }
        previous = eval.loss;
    }
    Ok((
        theta,
        TrainingTrace {
            initial,
            records,
            stop_reason: StopReason::MaxEpochs,
        },
    ))
}

pub(crate) fn check_dataset(spec: &CircuitSpec, dataset: &Dataset) -> Result<()> {
    if dataset.n_qubits() != spec.n_qubits() {
        return Err(Error::Length {
            expected: spec.n_qubits(),
            found: dataset.n_qubits(),
        });
    }
    Ok(())
}

/// Trains a full-readout circuit on `dataset` from a seeded initialization.
pub fn train(
    spec: &CircuitSpec,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainingTrace)> {
    train_with_clock(spec, dataset, cfg, &mut NoClock)
}

pub fn train_with_clock<C: Clock + ?Sized>(
    spec: &CircuitSpec,
    dataset: &Dataset,
    cfg: &TrainConfig,
    clock: &mut C,
) -> Result<(ParamVector, TrainingTrace)> {
    cfg.validate()?;
    check_dataset(spec, dataset)?;
    if spec.output_width() != spec.n_qubits() {
        return Err(Error::Schedule(format!(
            "the circuit reads out {} of {} positions; a truncated circuit needs a classical head",
            spec.output_width(),
            spec.n_qubits()
        )));
    }
    let objective = QfcnObjective::new(spec, dataset.samples(), cfg.grad_method, cfg.fd_step)?;
    let theta0 = init_params(spec.n_params(), cfg.init_scale, cfg.init_seed);
    let (theta, trace) = optimize(&objective, theta0, cfg, None, clock)?;
    Ok((ParamVector::new(spec.layout().clone(), theta)?, trace))
}
