//! Primitive register operations and the exact gradient engines.
//!
//! A [`Tape`] is a flat list of gate, trace, append and permute operations.
//! [`Tape::run`] executes it on density matrices. For gradients, a
//! [`Recording`] keeps the intermediate states of one forward pass and sweeps
//! backwards once. Two engines are available:
//!
//! * [`GradientEngine::Adjoint`] never traces anything out. Traced qubits stay
//!   in the state vector as untouched environment qubits, which leaves every
//!   reduced state on the active qubits unchanged. The sweep carries the
//!   co-state `λ = O|ψ⟩` back through the gates and reads each factor's
//!   derivative off a `d × d` cross term between `λ` and the recorded state.
//!   Its register holds the input plus every appended ancilla.
//! * [`GradientEngine::DensityShift`] carries the weighted Z observable back
//!   through the adjoint of every density-matrix operation and evaluates the
//!   two-term shift rule for each factor at `φ ± π/2` against the contracted
//!   state/observable pair. It works for any register that fits
//!   [`crate::MAX_QUBITS`].
//!
//! For Pauli generators the two agree identically; the tests hold them to
//! each other and to finite differences.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::gates::{GateMatrix, ParamGate};
use crate::kernel::{self, Embedding};
use crate::qstate::mixed::check_keep;
use crate::qstate::{check_qubit_count, z_sign, MixedState, PureState};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Register contents: pure until the first trace, mixed afterwards.
#[derive(Clone, Debug, PartialEq)]
pub enum Register {
    Pure(PureState),
    Mixed(MixedState),
}

impl Register {
    pub fn n_qubits(&self) -> usize {
        match self {
            Register::Pure(s) => s.n_qubits(),
            Register::Mixed(s) => s.n_qubits(),
        }
    }

    pub fn to_density(&self) -> MixedState {
        match self {
            Register::Pure(s) => s.to_density(),
            Register::Mixed(s) => s.clone(),
        }
    }

    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        match self {
            Register::Pure(s) => s.expect_z(qubit),
            Register::Mixed(s) => s.expect_z(qubit),
        }
    }

    /// `⟨Z_q⟩` for every qubit.
    pub fn readout(&self) -> Vec<f64> {
        (0..self.n_qubits())
            .map(|q| self.expect_z(q).expect("qubit in range"))
            .collect()
    }

    fn apply(&mut self, u: &GateMatrix, targets: &[usize]) -> Result<()> {
        match self {
            Register::Pure(s) => s.apply_mut(u, targets),
            Register::Mixed(s) => s.apply_mut(u, targets),
        }
    }

    fn reduce(&self, keep: &[usize]) -> Result<Register> {
        Ok(Register::Mixed(match self {
            Register::Pure(s) => s.reduce_to(keep)?,
            Register::Mixed(s) => s.reduce_to(keep)?,
        }))
    }

    fn append(&self, ancilla: &PureState) -> Result<Register> {
        Ok(match self {
            Register::Pure(s) => Register::Pure(s.tensor(ancilla)?),
            Register::Mixed(s) => Register::Mixed(s.tensor(&ancilla.to_density())?),
        })
    }

    fn permute(&self, order: &[usize]) -> Result<Register> {
        Ok(match self {
            Register::Pure(s) => Register::Pure(s.permute(order)?),
            Register::Mixed(s) => Register::Mixed(s.permute(order)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// `gate` on `targets`, reading its parameters from `offset..`.
    Gate {
        gate: ParamGate,
        targets: Vec<usize>,
        offset: usize,
    },
    /// Keep `keep` (in that order), trace out the rest.
    Trace { keep: Vec<usize> },
    /// Tensor a fixed pure state onto the end of the register.
    Append { ancilla: PureState },
    /// New qubit `i` is old qubit `order[i]`.
    Permute { order: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    input_qubits: usize,
    width: usize,
    /// Input qubits plus every appended ancilla.
    purified_width: usize,
    n_params: usize,
    ops: Vec<Op>,
}

impl Tape {
    pub fn new(input_qubits: usize, n_params: usize) -> Result<Self> {
        check_qubit_count(input_qubits)?;
        Ok(Self {
            input_qubits,
            width: input_qubits,
            purified_width: input_qubits,
            n_params,
            ops: Vec::new(),
        })
    }

    pub fn input_qubits(&self) -> usize {
        self.input_qubits
    }

    pub fn output_width(&self) -> usize {
        self.width
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Register size the adjoint engine needs.
    pub fn purified_width(&self) -> usize {
        self.purified_width
    }

    /// The adjoint engine when its register stays within
    /// [`ADJOINT_MAX_QUBITS`], the density engine otherwise.
    pub fn default_engine(&self) -> GradientEngine {
        if self.purified_width <= ADJOINT_MAX_QUBITS {
            GradientEngine::Adjoint
        } else {
            GradientEngine::DensityShift
        }
    }

    pub fn gate(&mut self, gate: ParamGate, targets: &[usize], offset: usize) -> Result<()> {
        if targets.len() != gate.n_qubits() {
            return Err(Error::Length {
                expected: gate.n_qubits(),
                found: targets.len(),
            });
        }
        kernel::check_targets(self.width, targets)?;
        if offset + gate.n_params() > self.n_params {
            return Err(Error::Layout {
                expected: self.n_params,
                found: offset + gate.n_params(),
            });
        }
        self.ops.push(Op::Gate {
            gate,
            targets: targets.to_vec(),
            offset,
        });
        Ok(())
    }

    pub fn trace(&mut self, keep: &[usize]) -> Result<()> {
        check_keep(self.width, keep)?;
        self.width = keep.len();
        self.ops.push(Op::Trace {
            keep: keep.to_vec(),
        });
        Ok(())
    }

    pub fn append(&mut self, ancilla: PureState) -> Result<()> {
        let width = self.width + ancilla.n_qubits();
        check_qubit_count(width)?;
        self.width = width;
        self.purified_width += ancilla.n_qubits();
        self.ops.push(Op::Append { ancilla });
        Ok(())
    }

    pub fn permute(&mut self, order: &[usize]) -> Result<()> {
        if order.len() != self.width {
            return Err(Error::Length {
                expected: self.width,
                found: order.len(),
            });
        }
        kernel::check_targets(self.width, order)?;
        self.ops.push(Op::Permute {
            order: order.to_vec(),
        });
        Ok(())
    }

    fn check_inputs(&self, input: &PureState, params: &[f64]) -> Result<()> {
        if input.n_qubits() != self.input_qubits {
            return Err(Error::Length {
                expected: self.input_qubits,
                found: input.n_qubits(),
            });
        }
        if params.len() != self.n_params {
            return Err(Error::Layout {
                expected: self.n_params,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(())
    }

    fn step(op: &Op, reg: Register, params: &[f64]) -> Result<Register> {
        match op {
            Op::Gate {
                gate,
                targets,
                offset,
            } => {
                let mut reg = reg;
                let u = gate.matrix(&params[*offset..offset + gate.n_params()])?;
                reg.apply(&u, targets)?;
                Ok(reg)
            }
            Op::Trace { keep } => reg.reduce(keep),
            Op::Append { ancilla } => reg.append(ancilla),
            Op::Permute { order } => reg.permute(order),
        }
    }

    /// Final register.
    pub fn run(&self, input: &PureState, params: &[f64]) -> Result<Register> {
        self.check_inputs(input, params)?;
        self.ops
            .iter()
            .try_fold(Register::Pure(input.clone()), |reg, op| {
                Self::step(op, reg, params)
            })
    }

    /// `⟨Z_q⟩` on every output qubit, computed with the default engine's
    /// forward pass.
    pub fn readout(&self, input: &PureState, params: &[f64]) -> Result<Vec<f64>> {
        match self.default_engine() {
            GradientEngine::Adjoint => {
                self.check_inputs(input, params)?;
                let mut state = Purified::new(input);
                for op in &self.ops {
                    state.step(op, params)?;
                }
                Ok(state.readout())
            }
            GradientEngine::DensityShift => Ok(self.run(input, params)?.readout()),
        }
    }

    /// Forward pass with the default engine, keeping what its backward sweep
    /// needs.
    pub fn record<'t>(&'t self, input: &PureState, params: &[f64]) -> Result<Recording<'t>> {
        self.record_with(self.default_engine(), input, params)
    }

    pub fn record_with<'t>(
        &'t self,
        engine: GradientEngine,
        input: &PureState,
        params: &[f64],
    ) -> Result<Recording<'t>> {
        self.check_inputs(input, params)?;
        let pass = match engine {
            GradientEngine::Adjoint => {
                if self.purified_width > ADJOINT_MAX_QUBITS {
                    return Err(Error::QubitCount(self.purified_width));
                }
                let mut before = Vec::with_capacity(self.ops.len());
                let mut state = Purified::new(input);
                for op in &self.ops {
                    let snapshot = matches!(op, Op::Gate { .. }).then(|| state.amps.clone());
                    before.push((snapshot, state.active.clone()));
                    state.step(op, params)?;
                }
                Pass::Adjoint {
                    before,
                    output: state,
                }
            }
            GradientEngine::DensityShift => {
                let mut before = Vec::with_capacity(self.ops.len());
                let mut reg = Register::Pure(input.clone());
                for op in &self.ops {
                    let next = Self::step(op, reg.clone(), params)?;
                    before.push(reg);
                    reg = next;
                }
                Pass::Density {
                    before,
                    output: reg,
                }
            }
        };
        Ok(Recording {
            tape: self,
            params: params.to_vec(),
            pass,
        })
    }
}

/// Largest register the adjoint engine allocates (2^20 amplitudes, 16 MiB).
pub const ADJOINT_MAX_QUBITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientEngine {
    Adjoint,
    DensityShift,
}

/// State vector over the active qubits plus every traced-out qubit.
/// `active[i]` is the register position of logical qubit `i`.
#[derive(Clone, Debug)]
struct Purified {
    n: usize,
    amps: Vec<C64>,
    active: Vec<usize>,
}

impl Purified {
    fn new(input: &PureState) -> Self {
        Self {
            n: input.n_qubits(),
            amps: input.amplitudes().to_vec(),
            active: (0..input.n_qubits()).collect(),
        }
    }

    fn step(&mut self, op: &Op, params: &[f64]) -> Result<()> {
        match op {
            Op::Gate {
                gate,
                targets,
                offset,
            } => {
                let u = gate.matrix(&params[*offset..offset + gate.n_params()])?;
                let full: Vec<usize> = targets.iter().map(|&t| self.active[t]).collect();
                kernel::apply_vec(&mut self.amps, u.entries(), &Embedding::new(self.n, &full));
            }
            Op::Trace { keep } => self.active = keep.iter().map(|&k| self.active[k]).collect(),
            Op::Append { ancilla } => {
                let phi = ancilla.amplitudes();
                self.amps = self
                    .amps
                    .iter()
                    .flat_map(|a| phi.iter().map(move |b| a * b))
                    .collect();
                self.active.extend(self.n..self.n + ancilla.n_qubits());
                self.n += ancilla.n_qubits();
            }
            Op::Permute { order } => self.active = order.iter().map(|&i| self.active[i]).collect(),
        }
        Ok(())
    }

    fn readout(&self) -> Vec<f64> {
        self.active
            .iter()
            .map(|&pos| {
                self.amps
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z_sign(self.n, pos, i) * z.norm_sqr())
                    .sum()
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Pass {
    /// Per op: the state vector before gates, and the active map before it.
    Adjoint {
        before: Vec<(Option<Vec<C64>>, Vec<usize>)>,
        output: Purified,
    },
    Density {
        before: Vec<Register>,
        output: Register,
    },
}

/// A forward pass with every intermediate register retained.
#[derive(Clone, Debug)]
pub struct Recording<'t> {
    tape: &'t Tape,
    params: Vec<f64>,
    pass: Pass,
}

impl Recording<'_> {
    pub fn engine(&self) -> GradientEngine {
        match self.pass {
            Pass::Adjoint { .. } => GradientEngine::Adjoint,
            Pass::Density { .. } => GradientEngine::DensityShift,
        }
    }

    pub fn readout(&self) -> Vec<f64> {
        match &self.pass {
            Pass::Adjoint { output, .. } => output.readout(),
            Pass::Density { output, .. } => output.readout(),
        }
    }

    /// Adds `∂/∂θ Σ_q weights[q]·⟨Z_q⟩` to `grad`.
    pub fn accumulate_gradient(&self, weights: &[f64], grad: &mut [f64]) -> Result<()> {
        let n = self.tape.width;
        if weights.len() != n {
            return Err(Error::Length {
                expected: n,
                found: weights.len(),
            });
        }
        if grad.len() != self.tape.n_params {
            return Err(Error::Layout {
                expected: self.tape.n_params,
                found: grad.len(),
            });
        }
        match &self.pass {
            Pass::Adjoint { before, output } => self.adjoint_sweep(before, output, weights, grad),
            Pass::Density { before, .. } => self.density_sweep(before, weights, grad),
        }
    }

    fn adjoint_sweep(
        &self,
        before: &[(Option<Vec<C64>>, Vec<usize>)],
        output: &Purified,
        weights: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        let mut n = output.n;
        let mut lambda: Vec<C64> = output
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let w: f64 = weights
                    .iter()
                    .zip(&output.active)
                    .map(|(w, &pos)| w * z_sign(n, pos, i))
                    .sum();
                a * w
            })
            .collect();
        for (op, (snapshot, active)) in self.tape.ops.iter().zip(before).rev() {
            match op {
                Op::Gate {
                    gate,
                    targets,
                    offset,
                } => {
                    let psi = snapshot.as_ref().expect("gate snapshots are recorded");
                    let params = &self.params[*offset..offset + gate.n_params()];
                    let full: Vec<usize> = targets.iter().map(|&t| active[t]).collect();
                    let emb = Embedding::new(n, &full);
                    let d = emb.local_dim();
                    // cross[q·d + p] = Σ_r ψ[(q,r)]·λ*[(p,r)]
                    let mut cross = vec![ZERO; d * d];
                    for &base in &emb.rest {
                        for q in 0..d {
                            let a = psi[base + emb.offsets[q]];
                            for p in 0..d {
                                cross[q * d + p] += a * lambda[base + emb.offsets[p]].conj();
                            }
                        }
                    }
                    let derivs = gate.factor_derivatives(params);
                    for (factor, dg) in gate.factors().iter().zip(&derivs) {
                        let mut tr = ZERO;
                        for p in 0..d {
                            for q in 0..d {
                                tr += dg[p * d + q] * cross[q * d + p];
                            }
                        }
                        grad[offset + factor.param] += factor.coeff * 2.0 * tr.re;
                    }
                    let u = gate.matrix(params)?;
                    kernel::apply_vec(&mut lambda, &kernel::dagger(u.entries(), d), &emb);
                }
                Op::Append { ancilla } => {
                    let phi = ancilla.amplitudes();
                    lambda = lambda
                        .chunks_exact(phi.len())
                        .map(|block| block.iter().zip(phi).map(|(l, f)| l * f.conj()).sum())
                        .collect();
                    n -= ancilla.n_qubits();
                }
                Op::Trace { .. } | Op::Permute { .. } => {}
            }
        }
        Ok(())
    }

    fn density_sweep(&self, before: &[Register], weights: &[f64], grad: &mut [f64]) -> Result<()> {
        let n = self.tape.width;
        let dim = 1usize << n;
        let mut obs = vec![ZERO; dim * dim];
        for i in 0..dim {
            let w: f64 = weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * z_sign(n, q, i))
                .sum();
            obs[i * dim + i] = C64::new(w, 0.0);
        }
        let mut width = n;
        for (op, state) in self.tape.ops.iter().zip(before).rev() {
            match op {
                Op::Gate {
                    gate,
                    targets,
                    offset,
                } => {
                    let params = &self.params[*offset..offset + gate.n_params()];
                    let emb = Embedding::new(width, targets);
                    let k = contract(state, &obs, &emb);
                    let d = emb.local_dim();
                    for (idx, factor) in gate.factors().iter().enumerate() {
                        let plus = gate.factor_product(params, Some((idx, FRAC_PI_2)));
                        let minus = gate.factor_product(params, Some((idx, -FRAC_PI_2)));
                        let diff =
                            sandwich(&k, plus.entries(), d) - sandwich(&k, minus.entries(), d);
                        grad[offset + factor.param] += factor.coeff * diff / 2.0;
                    }
                    let u = gate.matrix(params)?;
                    kernel::left_apply(
                        &mut obs,
                        dim_of(width),
                        &kernel::dagger(u.entries(), d),
                        &emb,
                    );
                    kernel::right_apply(&mut obs, dim_of(width), u.entries(), &emb);
                }
                Op::Trace { keep } => {
                    let before = state.n_qubits();
                    obs = embed_traced(&obs, before, keep);
                    width = before;
                }
                Op::Append { ancilla } => {
                    obs = contract_ancilla(&obs, width, ancilla);
                    width -= ancilla.n_qubits();
                }
                Op::Permute { order } => {
                    let map = kernel::permutation_map(width, order)?;
                    let dim = dim_of(width);
                    let mut old = vec![ZERO; dim * dim];
                    for (a, &ma) in map.iter().enumerate() {
                        for (b, &mb) in map.iter().enumerate() {
                            old[ma * dim + mb] = obs[a * dim + b];
                        }
                    }
                    obs = old;
                }
            }
        }
        Ok(())
    }

    pub fn gradient(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.tape.n_params];
        self.accumulate_gradient(weights, &mut grad)?;
        Ok(grad)
    }
}

#[inline]
fn dim_of(width: usize) -> usize {
    1 << width
}

/// `K[q,q',p',p] = Σ_{r,r'} S[(q,r),(q',r')]·O[(p',r'),(p,r)]`, flattened in
/// that index order, so that `Tr(O·G S G†) = Σ G[p,q]·K[q,q',p',p]·G*[p',q']`.
fn contract(state: &Register, obs: &[C64], emb: &Embedding) -> Vec<C64> {
    let d = emb.local_dim();
    let dim = emb.local_dim() * emb.rest.len();
    let mut k = vec![ZERO; d * d * d * d];
    let at = |l: usize, r: usize| emb.offsets[l] + emb.rest[r];
    let n_rest = emb.rest.len();
    match state {
        Register::Pure(psi) => {
            let amp = psi.amplitudes();
            // A[p', q', p, r] = Σ_{r'} ψ*[(q',r')]·O[(p',r'),(p,r)]
            let mut a = vec![ZERO; d * d * d * n_rest];
            for pp in 0..d {
                for rp in 0..n_rest {
                    let row = &obs[at(pp, rp) * dim..(at(pp, rp) + 1) * dim];
                    for qp in 0..d {
                        let c = amp[at(qp, rp)].conj();
                        if c == ZERO {
                            continue;
                        }
                        let base = (pp * d + qp) * d * n_rest;
                        for p in 0..d {
                            for r in 0..n_rest {
                                a[base + p * n_rest + r] += c * row[at(p, r)];
                            }
                        }
                    }
                }
            }
            for q in 0..d {
                for qp in 0..d {
                    for pp in 0..d {
                        for p in 0..d {
                            let base = ((pp * d + qp) * d + p) * n_rest;
                            let s: C64 = (0..n_rest).map(|r| amp[at(q, r)] * a[base + r]).sum();
                            k[((q * d + qp) * d + pp) * d + p] = s;
                        }
                    }
                }
            }
        }
        Register::Mixed(rho) => {
            let m = rho.matrix();
            for q in 0..d {
                for r in 0..n_rest {
                    let srow = &m[at(q, r) * dim..(at(q, r) + 1) * dim];
                    for qp in 0..d {
                        for rp in 0..n_rest {
                            let s = srow[at(qp, rp)];
                            if s == ZERO {
                                continue;
                            }
                            for pp in 0..d {
                                let orow = &obs[at(pp, rp) * dim..(at(pp, rp) + 1) * dim];
                                let kbase = ((q * d + qp) * d + pp) * d;
                                for p in 0..d {
                                    k[kbase + p] += s * orow[at(p, r)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    k
}

fn sandwich(k: &[C64], g: &[C64], d: usize) -> f64 {
    let mut acc = ZERO;
    for p in 0..d {
        for q in 0..d {
            let gpq = g[p * d + q];
            for pp in 0..d {
                for qp in 0..d {
                    acc += gpq * k[((q * d + qp) * d + pp) * d + p] * g[pp * d + qp].conj();
                }
            }
        }
    }
    acc.re
}

/// Adjoint of keeping `keep`: the observable on the kept qubits, tensored
/// with the identity on the traced ones.
fn embed_traced(obs: &[C64], before: usize, keep: &[usize]) -> Vec<C64> {
    let dim = dim_of(before);
    let dk = dim_of(keep.len());
    let kept = Embedding::new(before, keep).offsets;
    let traced = kernel::complement(before, keep);
    let tr = Embedding::new(before, &traced).offsets;
    let mut out = vec![ZERO; dim * dim];
    for j in 0..dk {
        for l in 0..dk {
            let v = obs[j * dk + l];
            if v == ZERO {
                continue;
            }
            for &t in &tr {
                out[(kept[j] + t) * dim + kept[l] + t] = v;
            }
        }
    }
    out
}

/// Adjoint of appending `|φ⟩`: `O'[i,j] = Σ_{a,b} φ*_a·O[(i,a),(j,b)]·φ_b`.
fn contract_ancilla(obs: &[C64], width: usize, ancilla: &PureState) -> Vec<C64> {
    let phi = ancilla.amplitudes();
    let da = phi.len();
    let dim = dim_of(width);
    let dn = dim / da;
    let mut out = vec![ZERO; dn * dn];
    for i in 0..dn {
        for a in 0..da {
            let ca = phi[a].conj();
            if ca == ZERO {
                continue;
            }
            let row = &obs[(i * da + a) * dim..(i * da + a + 1) * dim];
            for j in 0..dn {
                let s: C64 = (0..da).map(|b| row[j * da + b] * phi[b]).sum();
                out[i * dn + j] += ca * s;
            }
        }
    }
    out
}
