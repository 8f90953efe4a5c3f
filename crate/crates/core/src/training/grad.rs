use alloc::vec;
use alloc::vec::Vec;

use super::loss::{accuracy, mse_loss};
use super::{Evaluation, GradMethod, Objective};
use crate::circuit::{encode, CircuitSpec, Op, ParamVector, Tape};
use crate::data::Sample;
use crate::qstate::PureState;
use crate::{Error, Result};

/// `g_i = (L(θ + h·e_i) − L(θ − h·e_i)) / 2h`.
pub fn grad_central_fd<F>(mut loss_at: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config {
            field: "fd_step",
            reason: alloc::format!("{h} is not a positive step"),
        });
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        point[i] = theta[i] + h;
        let up = loss_at(&point)?;
        point[i] = theta[i] - h;
        let down = loss_at(&point)?;
        point[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("loss evaluation"));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Every parameter read by a gate must be covered by one of its shift-rule
/// factors.
pub(crate) fn check_shift_eligible(tape: &Tape) -> Result<()> {
    for op in tape.ops() {
        if let Op::Gate { gate, offset, .. } = op {
            for p in 0..gate.n_params() {
                if !gate.factors().iter().any(|f| f.param == p) {
                    return Err(Error::NotShiftEligible(offset + p));
                }
            }
        }
    }
    Ok(())
}

/// Exact gradient of the batch MSE by the two-term shift rule.
pub fn grad_param_shift(
    spec: &CircuitSpec,
    theta: &ParamVector,
    batch: &[Sample],
) -> Result<Vec<f64>> {
    if theta.layout() != spec.layout() {
        return Err(Error::Layout {
            expected: spec.n_params(),
            found: theta.len(),
        });
    }
    let objective = QfcnObjective::new(spec, batch, GradMethod::ParamShift, 1e-5)?;
    objective.gradient(theta.values())
}

/// Batch MSE of a full-readout circuit against the sample labels.
#[derive(Clone, Debug)]
pub struct QfcnObjective<'a> {
    spec: &'a CircuitSpec,
    tape: Tape,
    inputs: Vec<PureState>,
    targets: Vec<Vec<f64>>,
    method: GradMethod,
    fd_step: f64,
}

impl<'a> QfcnObjective<'a> {
    pub fn new(
        spec: &'a CircuitSpec,
        batch: &[Sample],
        method: GradMethod,
        fd_step: f64,
    ) -> Result<Self> {
        let objective = Self::unchecked(spec, batch, method, fd_step)?;
        if let Some(t) = objective
            .targets
            .iter()
            .find(|t| t.len() != spec.output_width())
        {
            return Err(Error::Length {
                expected: spec.output_width(),
                found: t.len(),
            });
        }
        Ok(objective)
    }

    /// Like [`QfcnObjective::new`] without requiring the readout width to
    /// match the label width.
    pub(crate) fn unchecked(
        spec: &'a CircuitSpec,
        batch: &[Sample],
        method: GradMethod,
        fd_step: f64,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let tape = spec.tape();
        check_shift_eligible(&tape)?;
        let inputs = batch
            .iter()
            .map(|s| encode(&s.x, spec.n_qubits()))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<Vec<f64>> = batch.iter().map(Sample::targets).collect();
        Ok(Self {
            spec,
            tape,
            inputs,
            targets,
            method,
            fd_step,
        })
    }

    pub fn spec(&self) -> &CircuitSpec {
        self.spec
    }

    /// Readouts for every sample.
    pub fn predict(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.inputs
            .iter()
            .map(|x| self.tape.readout(x, theta))
            .collect()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        mse_loss(&self.predict(theta)?, &self.targets)
    }

    /// Gradient of `Σ_j c_j(Y_j)` given `dc/dY` per sample, by the shift rule.
    pub(crate) fn backprop<F>(&self, theta: &[f64], mut weights_for: F) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        let mut grad = vec![0.0; theta.len()];
        for (j, input) in self.inputs.iter().enumerate() {
            let rec = self.tape.record(input, theta)?;
            let w = weights_for(j, &rec.readout());
            rec.accumulate_gradient(&w, &mut grad)?;
        }
        Ok(grad)
    }

    pub(crate) fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }
}

impl Objective for QfcnObjective<'_> {
    fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let pred = self.predict(theta)?;
        Ok(Evaluation {
            loss: mse_loss(&pred, &self.targets)?,
            accuracy: accuracy(&pred, &self.targets)?,
        })
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match self.method {
            GradMethod::CentralFd => grad_central_fd(|t| self.loss(t), theta, self.fd_step),
            GradMethod::ParamShift => {
                let scale = 2.0 / self.inputs.len() as f64;
                self.backprop(theta, |j, y| {
                    y.iter()
                        .zip(&self.targets[j])
                        .map(|(y, t)| scale * (y - t))
                        .collect()
                })
            }
        }
    }
}
