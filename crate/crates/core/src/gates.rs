//! Gate matrices: single-qubit rotations, the 15-parameter two-qubit gate,
//! controlled gates and the fixed named constants.
//!
//! Rotations follow `R_P(θ) = exp(-iθP/2)`. Global phases are not tracked.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;
use core::str::FromStr;

use crate::kernel::{self, max_abs};
use crate::{Error, Result, C64};

/// Tolerance for accepting caller-supplied matrices as unitary.
pub const UNITARY_INPUT_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// A unitary acting on `log2(dim)` qubits, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl GateMatrix {
    /// Validates shape, finiteness and unitarity (at [`UNITARY_INPUT_TOL`]).
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Dimension {
                expected: dim.next_power_of_two().max(2),
                found: dim,
            });
        }
        if entries.len() != dim * dim {
            return Err(Error::Length {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("gate matrix"));
        }
        let gate = Self { dim, entries };
        let dev = gate.unitarity_deviation();
        if dev > UNITARY_INPUT_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(gate)
    }

    pub(crate) fn new_unchecked(dim: usize, entries: Vec<C64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &GateMatrix) -> Result<GateMatrix> {
        if rhs.dim != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        Ok(Self::new_unchecked(
            self.dim,
            kernel::matmul(&self.entries, &rhs.entries, self.dim),
        ))
    }

    /// Kronecker product; `self` acts on the leading (more significant) qubits.
    pub fn kron(&self, rhs: &GateMatrix) -> GateMatrix {
        Self::new_unchecked(
            self.dim * rhs.dim,
            kernel::kron(&self.entries, self.dim, &rhs.entries, rhs.dim),
        )
    }

    pub fn dagger(&self) -> GateMatrix {
        Self::new_unchecked(self.dim, kernel::dagger(&self.entries, self.dim))
    }

    /// `max |G†G − I|` over all entries.
    pub fn unitarity_deviation(&self) -> f64 {
        let gg = kernel::matmul(
            &kernel::dagger(&self.entries, self.dim),
            &self.entries,
            self.dim,
        );
        let d = self.dim;
        max_abs(
            gg.iter()
                .enumerate()
                .map(|(k, &z)| if k / d == k % d { z - ONE } else { z }),
        )
    }

    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        max_abs(self.entries.iter().zip(&other.entries).map(|(a, b)| a - b))
    }

    /// Distance to `other` after removing the best global phase.
    pub fn phase_insensitive_diff(&self, other: &GateMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        let overlap: C64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let norm = libm::hypot(overlap.re, overlap.im);
        if norm == 0.0 {
            return f64::INFINITY;
        }
        let phase = overlap / norm;
        max_abs(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * phase - b),
        )
    }
}

/// Pauli operators; also the rotation axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

pub type Axis = Pauli;

impl Pauli {
    pub fn matrix(self) -> [C64; 4] {
        match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        }
    }
}

fn pauli_string(paulis: &[Pauli]) -> Vec<C64> {
    paulis.iter().fold(vec![ONE], |acc, p| {
        let d = libm::sqrt(acc.len() as f64) as usize;
        kernel::kron(&acc, d, &p.matrix(), 2)
    })
}

/// `exp(-iφP/2) = cos(φ/2) I − i sin(φ/2) P` for a Pauli string `P`.
fn pauli_exp(paulis: &[Pauli], phi: f64) -> Vec<C64> {
    let p = pauli_string(paulis);
    let d = 1usize << paulis.len();
    let (s, c) = (libm::sin(phi / 2.0), libm::cos(phi / 2.0));
    p.iter()
        .enumerate()
        .map(|(k, &x)| {
            let diag = if k / d == k % d { c } else { 0.0 };
            C64::new(diag, 0.0) - I * s * x
        })
        .collect()
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `exp(-iθσ/2)` about the given axis.
pub fn rotation(axis: Axis, theta: f64) -> Result<GateMatrix> {
    check_finite(&[theta], "rotation angle")?;
    if axis == Pauli::I {
        return Err(Error::UnknownGate("rotation about I".to_string()));
    }
    let (s, c) = (libm::sin(theta / 2.0), libm::cos(theta / 2.0));
    let entries = match axis {
        Pauli::X => vec![
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, -s),
            C64::new(c, 0.0),
        ],
        Pauli::Y => vec![
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
        Pauli::Z => vec![C64::new(c, -s), ZERO, ZERO, C64::new(c, s)],
        Pauli::I => unreachable!(),
    };
    Ok(GateMatrix::new_unchecked(2, entries))
}

/// ZYZ Euler rotation `RZ(a[0]) · RY(a[1]) · RZ(a[2])`.
pub fn zyz(angles: [f64; 3]) -> Result<GateMatrix> {
    rotation(Pauli::Z, angles[0])?
        .matmul(&rotation(Pauli::Y, angles[1])?)?
        .matmul(&rotation(Pauli::Z, angles[2])?)
}

/// Parameters of the general two-qubit gate
/// `(A₁ ⊗ A₂) · exp(i(α XX + β YY + γ ZZ)) · (B₁ ⊗ B₂)`, where the `pre_*`
/// blocks give `B` (applied first) and the `post_*` blocks give `A`. Each
/// block holds ZYZ Euler angles.
///
/// Flat order: `pre_a, pre_b, canonical, post_a, post_b`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Su4Params {
    pub pre_a: [f64; 3],
    pub pre_b: [f64; 3],
    pub canonical: [f64; 3],
    pub post_a: [f64; 3],
    pub post_b: [f64; 3],
}

impl Su4Params {
    pub const LEN: usize = 15;

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != Self::LEN {
            return Err(Error::Length {
                expected: Self::LEN,
                found: values.len(),
            });
        }
        check_finite(values, "su4 parameters")?;
        let block = |k: usize| [values[3 * k], values[3 * k + 1], values[3 * k + 2]];
        Ok(Self {
            pre_a: block(0),
            pre_b: block(1),
            canonical: block(2),
            post_a: block(3),
            post_b: block(4),
        })
    }

    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        for (k, block) in [
            self.pre_a,
            self.pre_b,
            self.canonical,
            self.post_a,
            self.post_b,
        ]
        .iter()
        .enumerate()
        {
            out[3 * k..3 * k + 3].copy_from_slice(block);
        }
        out
    }
}

/// `exp(i(α X⊗X + β Y⊗Y + γ Z⊗Z))`. The three terms commute.
pub fn canonical(alpha: f64, beta: f64, gamma: f64) -> Result<GateMatrix> {
    check_finite(&[alpha, beta, gamma], "canonical parameters")?;
    let term = |p: Pauli, t: f64| pauli_exp(&[p, p], -2.0 * t);
    let m = kernel::matmul(
        &kernel::matmul(&term(Pauli::X, alpha), &term(Pauli::Y, beta), 4),
        &term(Pauli::Z, gamma),
        4,
    );
    Ok(GateMatrix::new_unchecked(4, m))
}

/// The 15-parameter two-qubit gate.
pub fn su4(p: &Su4Params) -> Result<GateMatrix> {
    check_finite(&p.to_array(), "su4 parameters")?;
    let pre = zyz(p.pre_a)?.kron(&zyz(p.pre_b)?);
    let post = zyz(p.post_a)?.kron(&zyz(p.post_b)?);
    let [a, b, c] = p.canonical;
    post.matmul(&canonical(a, b, c)?)?.matmul(&pre)
}

/// Block-diagonal `[[I, 0], [0, u]]`; the control is the most significant qubit.
pub fn controlled(u: &GateMatrix) -> Result<GateMatrix> {
    let dev = u.unitarity_deviation();
    if !(dev <= UNITARY_INPUT_TOL) {
        return Err(Error::NotUnitary(dev));
    }
    let d = u.dim;
    let n = 2 * d;
    let mut entries = vec![ZERO; n * n];
    for i in 0..d {
        entries[i * n + i] = ONE;
        for j in 0..d {
            entries[(d + i) * n + d + j] = u.get(i, j);
        }
    }
    Ok(GateMatrix::new_unchecked(n, entries))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedGate {
    H,
    X,
    Y,
    Z,
    Cnot,
    Cz,
}

impl NamedGate {
    pub fn matrix(self) -> GateMatrix {
        let pauli = |p: Pauli| GateMatrix::new_unchecked(2, p.matrix().to_vec());
        match self {
            NamedGate::H => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                GateMatrix::new_unchecked(2, vec![h, h, h, -h])
            }
            NamedGate::X => pauli(Pauli::X),
            NamedGate::Y => pauli(Pauli::Y),
            NamedGate::Z => pauli(Pauli::Z),
            NamedGate::Cnot => controlled(&pauli(Pauli::X)).expect("X is unitary"),
            NamedGate::Cz => controlled(&pauli(Pauli::Z)).expect("Z is unitary"),
        }
    }
}

impl FromStr for NamedGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Self::H),
            "X" => Ok(Self::X),
            "Y" => Ok(Self::Y),
            "Z" => Ok(Self::Z),
            "CNOT" | "CX" => Ok(Self::Cnot),
            "CZ" => Ok(Self::Cz),
            other => Err(Error::UnknownGate(other.to_string())),
        }
    }
}

impl fmt::Display for NamedGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::H => "H",
            Self::X => "X",
            Self::Y => "Y",
            Self::Z => "Z",
            Self::Cnot => "CNOT",
            Self::Cz => "CZ",
        };
        f.write_str(s)
    }
}

pub fn named_gate(name: &str) -> Result<GateMatrix> {
    name.parse::<NamedGate>().map(NamedGate::matrix)
}

/// One rotation-generated factor `exp(-i·coeff·θ_param·P/2)` of a
/// parameterized gate, with `P` a Pauli string over the gate's qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor {
    pub param: usize,
    pub coeff: f64,
    pub generator: &'static [Pauli],
}

const fn f(param: usize, coeff: f64, generator: &'static [Pauli]) -> Factor {
    Factor {
        param,
        coeff,
        generator,
    }
}

use Pauli::{I as PI, X as PX, Y as PY, Z as PZ};

// Application order: the first factor acts first.
const SU4_FACTORS: [Factor; 15] = [
    f(2, 1.0, &[PZ, PI]),
    f(1, 1.0, &[PY, PI]),
    f(0, 1.0, &[PZ, PI]),
    f(5, 1.0, &[PI, PZ]),
    f(4, 1.0, &[PI, PY]),
    f(3, 1.0, &[PI, PZ]),
    f(6, -2.0, &[PX, PX]),
    f(7, -2.0, &[PY, PY]),
    f(8, -2.0, &[PZ, PZ]),
    f(11, 1.0, &[PZ, PI]),
    f(10, 1.0, &[PY, PI]),
    f(9, 1.0, &[PZ, PI]),
    f(14, 1.0, &[PI, PZ]),
    f(13, 1.0, &[PI, PY]),
    f(12, 1.0, &[PI, PZ]),
];

// controlled-R_P(θ) = exp(-i(θ/2)(I⊗P)/2) · exp(-i(θ/2)(-Z⊗P)/2)
const CONTROLLED_ZYZ_FACTORS: [Factor; 6] = [
    f(2, 0.5, &[PI, PZ]),
    f(2, -0.5, &[PZ, PZ]),
    f(1, 0.5, &[PI, PY]),
    f(1, -0.5, &[PZ, PY]),
    f(0, 0.5, &[PI, PZ]),
    f(0, -0.5, &[PZ, PZ]),
];

const RX_FACTORS: [Factor; 1] = [f(0, 1.0, &[PX])];
const RY_FACTORS: [Factor; 1] = [f(0, 1.0, &[PY])];
const RZ_FACTORS: [Factor; 1] = [f(0, 1.0, &[PZ])];

/// Parameterized gate families used by the circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGate {
    /// Single-qubit rotation, 1 parameter.
    Rotation(Axis),
    /// General two-qubit gate, 15 parameters ([`Su4Params`] order).
    Su4,
    /// `controlled(zyz(p))`, 3 parameters, control on the first target.
    ControlledZyz,
}

impl ParamGate {
    pub fn n_params(self) -> usize {
        match self {
            ParamGate::Rotation(_) => 1,
            ParamGate::Su4 => Su4Params::LEN,
            ParamGate::ControlledZyz => 3,
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            ParamGate::Rotation(_) => 1,
            ParamGate::Su4 | ParamGate::ControlledZyz => 2,
        }
    }

    /// Builds the matrix with the direct constructors.
    pub fn matrix(self, params: &[f64]) -> Result<GateMatrix> {
        if params.len() != self.n_params() {
            return Err(Error::Length {
                expected: self.n_params(),
                found: params.len(),
            });
        }
        match self {
            ParamGate::Rotation(axis) => rotation(axis, params[0]),
            ParamGate::Su4 => su4(&Su4Params::from_slice(params)?),
            ParamGate::ControlledZyz => controlled(&zyz([params[0], params[1], params[2]])?),
        }
    }

    /// The gate as an ordered product of rotation-generated factors. Every
    /// generator squares to the identity, so each factor obeys the two-term
    /// shift rule.
    pub fn factors(self) -> &'static [Factor] {
        match self {
            ParamGate::Rotation(Pauli::X) => &RX_FACTORS,
            ParamGate::Rotation(Pauli::Y) => &RY_FACTORS,
            ParamGate::Rotation(Pauli::Z) => &RZ_FACTORS,
            ParamGate::Rotation(Pauli::I) => &[],
            ParamGate::Su4 => &SU4_FACTORS,
            ParamGate::ControlledZyz => &CONTROLLED_ZYZ_FACTORS,
        }
    }

    /// Product of the factors, with the angle of factor `shifted.0` offset by
    /// `shifted.1`.
    pub fn factor_product(self, params: &[f64], shifted: Option<(usize, f64)>) -> GateMatrix {
        let d = 1usize << self.n_qubits();
        let mut m = GateMatrix::identity(d).entries;
        for (k, fac) in self.factors().iter().enumerate() {
            let mut phi = fac.coeff * params[fac.param];
            if let Some((which, delta)) = shifted {
                if which == k {
                    phi += delta;
                }
            }
            m = kernel::matmul(&pauli_exp(fac.generator, phi), &m, d);
        }
        GateMatrix::new_unchecked(d, m)
    }

    /// `∂G/∂φ_k = G_{>k} · (−i/2)P_k · G_{≤k}` for every factor `k`, where
    /// `φ_k` is the factor's own angle and `G_{≤k}` the product of the
    /// factors up to and including `k`.
    pub(crate) fn factor_derivatives(self, params: &[f64]) -> Vec<Vec<C64>> {
        let d = 1usize << self.n_qubits();
        let factors = self.factors();
        let mut prefixes = Vec::with_capacity(factors.len());
        let mut m = GateMatrix::identity(d).entries;
        for fac in factors {
            m = kernel::matmul(
                &pauli_exp(fac.generator, fac.coeff * params[fac.param]),
                &m,
                d,
            );
            prefixes.push(m.clone());
        }
        let full = m;
        factors
            .iter()
            .zip(&prefixes)
            .map(|(fac, prefix)| {
                let suffix = kernel::matmul(&full, &kernel::dagger(prefix, d), d);
                let half_p: Vec<C64> = pauli_string(fac.generator)
                    .iter()
                    .map(|x| -I * 0.5 * x)
                    .collect();
                kernel::matmul(&suffix, &kernel::matmul(&half_p, prefix, d), d)
            })
            .collect()
    }
}
