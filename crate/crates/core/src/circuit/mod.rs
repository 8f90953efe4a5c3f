//! QCNN/QFCN architectures: configuration, layer layout, parameter layout and
//! forward evaluation.
//!
//! A QFCN is `Encode → (Conv+ → Pool)* → Upsample* → Readout`. Convolution
//! layers share one 15-parameter two-qubit gate across all of their pairs,
//! pooling traces out qubits, and upsampling appends a cluster-state ancilla
//! batch that is entangled back with the retained qubits.

mod layers;
mod tape;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

pub use layers::{
    conv_layer, conv_pairs, encode, interleave_order, pool_layer, upsample_layer, UpsampleStage,
};
pub use tape::{GradientEngine, Op, Recording, Register, Tape, ADJOINT_MAX_QUBITS};

use crate::gates::{ParamGate, Su4Params};
use crate::{Error, Result, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum UpsampleMode {
    /// One coupling gate per upsampling layer, reused at every site.
    Shared,
    /// An independent coupling gate for every source/ancilla pair.
    PerSite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum UpsampleGate {
    /// General 15-parameter two-qubit gate on (source, ancilla).
    FullSu4,
    /// Controlled ZYZ rotation, source as control, ancilla as target.
    ControlledSu2,
}

impl UpsampleGate {
    pub fn param_gate(self) -> ParamGate {
        match self {
            UpsampleGate::FullSu4 => ParamGate::Su4,
            UpsampleGate::ControlledSu2 => ParamGate::ControlledZyz,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct ArchitectureConfig {
    pub n_qubits: usize,
    /// Positions kept by each pooling stage, relative to that stage's register.
    pub pool_schedule: Vec<Vec<usize>>,
    /// Ancillas appended by each upsampling stage.
    pub upsample_schedule: Vec<usize>,
    pub conv_reps_per_stage: usize,
    pub upsample_mode: UpsampleMode,
    pub upsample_gate: UpsampleGate,
}

impl Default for ArchitectureConfig {
    /// 8 → 4 → 2 → 4 → 8, pooling keeps even positions.
    fn default() -> Self {
        Self {
            n_qubits: 8,
            pool_schedule: vec![vec![0, 2, 4, 6], vec![0, 2]],
            upsample_schedule: vec![2, 4],
            conv_reps_per_stage: 1,
            upsample_mode: UpsampleMode::Shared,
            upsample_gate: UpsampleGate::FullSu4,
        }
    }
}

impl ArchitectureConfig {
    /// Halving schedule down to `bottleneck` qubits, keeping even positions,
    /// mirrored back up by doubling.
    pub fn halving(n_qubits: usize, bottleneck: usize) -> Self {
        let mut pool_schedule = Vec::new();
        let mut upsample_schedule = Vec::new();
        let mut w = n_qubits;
        while w > bottleneck && w >= 2 {
            let keep: Vec<usize> = (0..w).step_by(2).collect();
            let next = keep.len();
            upsample_schedule.insert(0, w - next);
            pool_schedule.push(keep);
            w = next;
        }
        Self {
            n_qubits,
            pool_schedule,
            upsample_schedule,
            ..Self::default()
        }
    }

    /// Register width after every stage, starting with `n_qubits`.
    pub fn widths(&self) -> Result<Vec<usize>> {
        self.validate()?;
        Ok(self.stage_widths())
    }

    fn stage_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.n_qubits];
        let mut w = self.n_qubits;
        for keep in &self.pool_schedule {
            w = keep.len();
            widths.push(w);
        }
        for &k in &self.upsample_schedule {
            w += k;
            widths.push(w);
        }
        widths
    }

    pub fn bottleneck_width(&self) -> usize {
        self.pool_schedule.last().map_or(self.n_qubits, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::Config {
                field: "n_qubits",
                reason: format!("{} is outside 2..={MAX_QUBITS}", self.n_qubits),
            });
        }
        if self.conv_reps_per_stage == 0 {
            return Err(Error::Config {
                field: "conv_reps_per_stage",
                reason: "must be at least 1".into(),
            });
        }
        if self.pool_schedule.is_empty() {
            return Err(Error::Schedule(
                "at least one pooling stage is required".into(),
            ));
        }
        let mut w = self.n_qubits;
        for (stage, keep) in self.pool_schedule.iter().enumerate() {
            if w < 2 {
                return Err(Error::Schedule(format!(
                    "pooling stage {stage} starts from {w} qubit(s); convolution needs two"
                )));
            }
            if keep.is_empty() || keep.len() >= w {
                return Err(Error::Schedule(format!(
                    "pooling stage {stage} must keep a proper non-empty subset of {w} qubits"
                )));
            }
            if keep.windows(2).any(|p| p[0] >= p[1]) || keep.iter().any(|&q| q >= w) {
                return Err(Error::Schedule(format!(
                    "pooling stage {stage}: kept positions must be strictly increasing and below {w}"
                )));
            }
            w = keep.len();
        }
        for (stage, &k) in self.upsample_schedule.iter().enumerate() {
            if k == 0 || k > w {
                return Err(Error::Schedule(format!(
                    "upsampling stage {stage} adds {k} ancillas to {w} qubits; needs 1..={w}"
                )));
            }
            w += k;
            if w > MAX_QUBITS {
                return Err(Error::QubitCount(w));
            }
        }
        if w != self.n_qubits {
            return Err(Error::Schedule(format!(
                "schedules end at width {w} instead of {}",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

/// One structural layer of a circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Encode {
        width: usize,
    },
    Conv {
        stage: usize,
        rep: usize,
        width: usize,
        pairs: Vec<[usize; 2]>,
        params: Range<usize>,
    },
    Pool {
        stage: usize,
        in_width: usize,
        keep: Vec<usize>,
    },
    Upsample {
        stage: usize,
        in_width: usize,
        config: UpsampleStage,
        /// Parameter range of each site's coupling gate (all equal when shared).
        site_params: Vec<Range<usize>>,
    },
    Readout {
        width: usize,
    },
}

impl Layer {
    pub fn output_width(&self) -> usize {
        match self {
            Layer::Encode { width } | Layer::Conv { width, .. } | Layer::Readout { width } => {
                *width
            }
            Layer::Pool { keep, .. } => keep.len(),
            Layer::Upsample {
                in_width, config, ..
            } => in_width + config.ancillas,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSlice {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl ParamSlice {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Named, contiguous, disjoint slices covering a flat parameter vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamLayout {
    slices: Vec<ParamSlice>,
}

impl ParamLayout {
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let start = self.total();
        self.slices.push(ParamSlice {
            name: name.into(),
            start,
            len,
        });
        start..start + len
    }

    pub fn total(&self) -> usize {
        self.slices.last().map_or(0, |s| s.start + s.len)
    }

    pub fn slices(&self) -> &[ParamSlice] {
        &self.slices
    }

    pub fn get(&self, name: &str) -> Option<&ParamSlice> {
        self.slices.iter().find(|s| s.name == name)
    }

    /// Slices are contiguous from zero with no gaps or overlaps.
    pub fn is_well_formed(&self) -> bool {
        let mut next = 0;
        self.slices.iter().all(|s| {
            let ok = s.start == next;
            next = s.start + s.len;
            ok
        })
    }

    /// Appends every slice of `other` after this layout's slices.
    pub fn extend(&mut self, other: &ParamLayout) {
        for s in &other.slices {
            self.push(s.name.clone(), s.len);
        }
    }
}

/// Flat parameter vector paired with its layout.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(Error::Layout {
                expected: layout.total(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: &ParamLayout) -> Self {
        Self {
            values: vec![0.0; layout.total()],
            layout: layout.clone(),
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|s| &self.values[s.range()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A built circuit: its ordered layers and parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    n_qubits: usize,
    layers: Vec<Layer>,
    layout: ParamLayout,
}

impl CircuitSpec {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.total()
    }

    pub fn output_width(&self) -> usize {
        self.layers
            .last()
            .map_or(self.n_qubits, Layer::output_width)
    }

    /// Width after each layer, starting with the encoded register.
    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::output_width).collect()
    }

    /// True when the circuit stops at the bottleneck (no upsampling).
    pub fn is_truncated(&self) -> bool {
        !self
            .layers
            .iter()
            .any(|l| matches!(l, Layer::Upsample { .. }))
    }

    /// Lowers the layers onto primitive register operations.
    pub fn tape(&self) -> Tape {
        let mut tape = Tape::new(self.n_qubits, self.n_params()).expect("validated width");
        for layer in &self.layers {
            let built = match layer {
                Layer::Encode { .. } | Layer::Readout { .. } => Ok(()),
                Layer::Conv { pairs, params, .. } => pairs
                    .iter()
                    .try_for_each(|p| tape.gate(ParamGate::Su4, p, params.start)),
                Layer::Pool { keep, .. } => tape.trace(keep),
                Layer::Upsample {
                    in_width,
                    config,
                    site_params,
                    ..
                } => layers::lower_upsample(&mut tape, *in_width, config, site_params),
            };
            built.expect("layers are consistent by construction");
        }
        tape
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.layout() != &self.layout {
            return Err(Error::Layout {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

fn build(cfg: &ArchitectureConfig, with_upsampling: bool) -> Result<CircuitSpec> {
    cfg.validate()?;
    let mut layers = vec![Layer::Encode {
        width: cfg.n_qubits,
    }];
    let mut layout = ParamLayout::default();
    let mut w = cfg.n_qubits;
    for (stage, keep) in cfg.pool_schedule.iter().enumerate() {
        for rep in 0..cfg.conv_reps_per_stage {
            let pairs = conv_pairs(w, rep);
            if pairs.is_empty() {
                continue;
            }
            let params = layout.push(format!("conv{stage}.{rep}"), Su4Params::LEN);
            layers.push(Layer::Conv {
                stage,
                rep,
                width: w,
                pairs,
                params,
            });
        }
        layers.push(Layer::Pool {
            stage,
            in_width: w,
            keep: keep.clone(),
        });
        w = keep.len();
    }
    if with_upsampling {
        for (stage, &ancillas) in cfg.upsample_schedule.iter().enumerate() {
            let config = UpsampleStage {
                ancillas,
                gate: cfg.upsample_gate,
                mode: cfg.upsample_mode,
            };
            let len = cfg.upsample_gate.param_gate().n_params();
            let site_params = match cfg.upsample_mode {
                UpsampleMode::Shared => vec![layout.push(format!("up{stage}"), len); ancillas],
                UpsampleMode::PerSite => (0..ancillas)
                    .map(|j| layout.push(format!("up{stage}.site{j}"), len))
                    .collect(),
            };
            layers.push(Layer::Upsample {
                stage,
                in_width: w,
                config,
                site_params,
            });
            w += ancillas;
        }
    }
    layers.push(Layer::Readout { width: w });
    Ok(CircuitSpec {
        n_qubits: cfg.n_qubits,
        layers,
        layout,
    })
}

/// Full encoder/decoder circuit with all-qubit readout.
pub fn build_qfcn(cfg: &ArchitectureConfig) -> Result<CircuitSpec> {
    build(cfg, true)
}

/// The encoder half only; reads out the bottleneck qubits.
pub fn build_qcnn(cfg: &ArchitectureConfig) -> Result<CircuitSpec> {
    build(cfg, false)
}

/// `encode → layers → ⟨Z⟩` on every output qubit.
pub fn forward(spec: &CircuitSpec, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_theta(theta)?;
    let input = encode(x, spec.n_qubits)?;
    spec.tape().readout(&input, theta.values())
}

/// Bottleneck readout of a truncated (QCNN) circuit.
pub fn forward_qcnn(spec: &CircuitSpec, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    if !spec.is_truncated() {
        return Err(Error::Schedule(
            "forward_qcnn needs a circuit truncated at the bottleneck".into(),
        ));
    }
    forward(spec, theta, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_qfcn_structure() {
        let spec = build_qfcn(&ArchitectureConfig::default()).unwrap();
        assert_eq!(spec.n_params(), 60);
        assert!(spec.layout().is_well_formed());
        let kinds: Vec<&str> = spec
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Encode { .. } => "E",
                Layer::Conv { .. } => "C",
                Layer::Pool { .. } => "P",
                Layer::Upsample { .. } => "U",
                Layer::Readout { .. } => "R",
            })
            .collect();
        assert_eq!(kinds.concat(), "ECPCPUUR");
        assert_eq!(spec.layer_widths(), vec![8, 8, 4, 4, 2, 4, 8, 8]);
        let names: Vec<&str> = spec
            .layout()
            .slices()
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        assert_eq!(names, ["conv0.0", "conv1.0", "up0", "up1"]);
    }

    #[test]
    fn per_site_layout_arithmetic() {
        let cfg = ArchitectureConfig {
            upsample_mode: UpsampleMode::PerSite,
            ..Default::default()
        };
        let spec = build_qfcn(&cfg).unwrap();
        assert_eq!(spec.n_params(), 120);
        let up: usize = spec
            .layout()
            .slices()
            .iter()
            .filter(|s| s.name.starts_with("up"))
            .map(|s| s.len)
            .sum();
        assert_eq!(up, 90);

        let cfg = ArchitectureConfig {
            upsample_mode: UpsampleMode::PerSite,
            upsample_gate: UpsampleGate::ControlledSu2,
            ..Default::default()
        };
        assert_eq!(build_qfcn(&cfg).unwrap().n_params(), 30 + 3 * 6);
    }

    #[test]
    fn conv_reps_add_offset_layers() {
        let cfg = ArchitectureConfig {
            conv_reps_per_stage: 2,
            ..Default::default()
        };
        let spec = build_qfcn(&cfg).unwrap();
        let conv: Vec<&Vec<[usize; 2]>> = spec
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Conv { pairs, .. } => Some(pairs),
                _ => None,
            })
            .collect();
        assert_eq!(conv.len(), 4);
        assert_eq!(conv[1], &vec![[1, 2], [3, 4], [5, 6]]);
        assert_eq!(conv[3], &vec![[1, 2]]);
        assert_eq!(spec.n_params(), 4 * 15 + 30);
    }

    #[test]
    fn schedule_errors() {
        let bad = ArchitectureConfig {
            pool_schedule: vec![vec![0, 2, 4, 6], vec![0, 1, 2]],
            upsample_schedule: vec![2, 4],
            ..Default::default()
        };
        assert!(matches!(build_qfcn(&bad), Err(Error::Schedule(_))));
        let unsorted = ArchitectureConfig {
            pool_schedule: vec![vec![2, 0, 4, 6], vec![0, 2]],
            ..Default::default()
        };
        assert!(matches!(unsorted.validate(), Err(Error::Schedule(_))));
        let too_many = ArchitectureConfig {
            upsample_schedule: vec![3, 3],
            ..Default::default()
        };
        assert!(too_many.validate().is_err());
        let reps = ArchitectureConfig {
            conv_reps_per_stage: 0,
            ..Default::default()
        };
        assert!(matches!(
            reps.validate(),
            Err(Error::Config {
                field: "conv_reps_per_stage",
                ..
            })
        ));
    }

    #[test]
    fn halving_reproduces_default() {
        assert_eq!(
            ArchitectureConfig::halving(8, 2),
            ArchitectureConfig::default()
        );
        let six = ArchitectureConfig::halving(6, 2);
        assert_eq!(six.widths().unwrap(), vec![6, 3, 2, 3, 6]);
    }

    #[test]
    fn qcnn_is_truncated() {
        let spec = build_qcnn(&ArchitectureConfig::default()).unwrap();
        assert!(spec.is_truncated());
        assert_eq!(spec.output_width(), 2);
        assert_eq!(spec.n_params(), 30);
        let qfcn = build_qfcn(&ArchitectureConfig::default()).unwrap();
        let theta = ParamVector::zeros(qfcn.layout());
        assert!(forward_qcnn(&qfcn, &theta, &[0.0; 8]).is_err());
    }

    #[test]
    fn forward_rejects_mismatched_inputs() {
        let spec = build_qfcn(&ArchitectureConfig::default()).unwrap();
        let theta = ParamVector::zeros(spec.layout());
        assert_eq!(
            forward(&spec, &theta, &[0.0; 7]),
            Err(Error::Length {
                expected: 8,
                found: 7
            })
        );
        let mut other = ParamLayout::default();
        other.push("x", 60);
        assert!(matches!(
            forward(&spec, &ParamVector::zeros(&other), &[0.0; 8]),
            Err(Error::Layout { .. })
        ));
    }
}
