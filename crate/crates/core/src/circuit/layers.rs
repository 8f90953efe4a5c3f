use alloc::vec::Vec;
use core::ops::Range;

use super::tape::Tape;
use super::{UpsampleGate, UpsampleMode};
use crate::gates::{rotation, su4, Pauli, Su4Params};
use crate::qstate::{MixedState, PureState};
use crate::{Error, Result};

/// Cluster state on `x.len()` qubits followed by `RX(x_q)` on each qubit.
pub fn encode(x: &[f64], n_qubits: usize) -> Result<PureState> {
    if x.len() != n_qubits {
        return Err(Error::Length {
            expected: n_qubits,
            found: x.len(),
        });
    }
    let mut state = PureState::cluster(n_qubits)?;
    for (q, &angle) in x.iter().enumerate() {
        state.apply_mut(&rotation(Pauli::X, angle)?, &[q])?;
    }
    Ok(state)
}

/// Brickwork pairs for repetition `rep` of a convolution stage: even
/// repetitions pair `(0,1),(2,3),…`, odd ones `(1,2),(3,4),…`.
pub fn conv_pairs(width: usize, rep: usize) -> Vec<[usize; 2]> {
    let start = rep % 2;
    (start..width.saturating_sub(1))
        .step_by(2)
        .map(|a| [a, a + 1])
        .collect()
}

/// Applies the shared gate `su4(theta)` to every pair in order.
pub fn conv_layer(rho: &MixedState, theta: &[f64], pairs: &[[usize; 2]]) -> Result<MixedState> {
    let u = su4(&Su4Params::from_slice(theta)?)?;
    let mut out = rho.clone();
    for pair in pairs {
        out.apply_mut(&u, pair)?;
    }
    Ok(out)
}

/// Traces out every qubit not in `keep`.
pub fn pool_layer(rho: &MixedState, keep: &[usize]) -> Result<MixedState> {
    rho.reduce_to(keep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpsampleStage {
    pub ancillas: usize,
    pub gate: UpsampleGate,
    pub mode: UpsampleMode,
}

impl UpsampleStage {
    pub fn n_params(&self) -> usize {
        let per_gate = self.gate.param_gate().n_params();
        match self.mode {
            UpsampleMode::Shared => per_gate,
            UpsampleMode::PerSite => per_gate * self.ancillas,
        }
    }

    fn site_ranges(&self, offset: usize) -> Vec<Range<usize>> {
        let len = self.gate.param_gate().n_params();
        (0..self.ancillas)
            .map(|j| match self.mode {
                UpsampleMode::Shared => offset..offset + len,
                UpsampleMode::PerSite => offset + j * len..offset + (j + 1) * len,
            })
            .collect()
    }
}

/// Output ordering after appending `ancillas` qubits to `width` sources:
/// source `j` and ancilla `j` become neighbours `(2j, 2j+1)`, and any
/// uncoupled sources follow in order. Entry `i` is the pre-permutation qubit.
pub fn interleave_order(width: usize, ancillas: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(width + ancillas);
    for j in 0..ancillas {
        order.push(j);
        order.push(width + j);
    }
    order.extend(ancillas..width);
    order
}

/// `ρ → ρ ⊗ |c⟩⟨c|` with `|c⟩` the ancilla batch's cluster state (`|+⟩` for a
/// single ancilla), then the coupling gate on every (source, ancilla) site.
pub fn upsample_layer(
    rho: &MixedState,
    theta: &[f64],
    stage: &UpsampleStage,
) -> Result<MixedState> {
    if theta.len() != stage.n_params() {
        return Err(Error::Length {
            expected: stage.n_params(),
            found: theta.len(),
        });
    }
    let width = rho.n_qubits();
    if stage.ancillas == 0 || stage.ancillas > width {
        return Err(Error::Schedule(alloc::format!(
            "{} ancillas cannot couple to {width} sources",
            stage.ancillas
        )));
    }
    let ancilla = PureState::cluster(stage.ancillas)?;
    let mut out = rho
        .tensor(&ancilla.to_density())?
        .permute(&interleave_order(width, stage.ancillas))?;
    let gate = stage.gate.param_gate();
    for (j, range) in stage.site_ranges(0).into_iter().enumerate() {
        out.apply_mut(&gate.matrix(&theta[range])?, &[2 * j, 2 * j + 1])?;
    }
    Ok(out)
}

pub(super) fn lower_upsample(
    tape: &mut Tape,
    width: usize,
    stage: &UpsampleStage,
    site_params: &[Range<usize>],
) -> Result<()> {
    debug_assert_eq!(
        site_params,
        stage.site_ranges(site_params[0].start).as_slice()
    );
    tape.append(PureState::cluster(stage.ancillas)?)?;
    tape.permute(&interleave_order(width, stage.ancillas))?;
    let gate = stage.gate.param_gate();
    for (j, range) in site_params.iter().enumerate() {
        tape.gate(gate, &[2 * j, 2 * j + 1], range.start)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_qcnn, build_qfcn, forward, forward_qcnn, ArchitectureConfig, Layer, ParamVector,
    };
    use crate::gates::{named_gate, zyz};
    use crate::C64;
    use alloc::vec;
    use core::f64::consts::PI;

    fn pseudo(n: usize, seed: f64) -> Vec<f64> {
        (0..n)
            .map(|k| libm::sin(seed * (k as f64 + 1.0) + 0.37 * seed))
            .collect()
    }

    fn random_density(n: usize, seed: f64) -> MixedState {
        let d = 1 << n;
        let raw = pseudo(2 * d, seed);
        let v: Vec<C64> = (0..d)
            .map(|k| C64::new(raw[2 * k], raw[2 * k + 1]))
            .collect();
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        let psi = PureState::from_amplitudes(v.into_iter().map(|z| z / norm).collect()).unwrap();
        // mix with a second state so the input is genuinely mixed
        let other = PureState::cluster(n).unwrap().to_density();
        let m = psi
            .to_density()
            .matrix()
            .iter()
            .zip(other.matrix())
            .map(|(a, b)| a * 0.7 + b * 0.3)
            .collect();
        MixedState::from_matrix(n, m).unwrap()
    }

    #[test]
    fn encode_examples() {
        let e = encode(&[0.0, 0.0], 2).unwrap();
        assert_eq!(e, PureState::cluster(2).unwrap());
        assert_eq!(
            encode(&[0.0; 7], 8),
            Err(Error::Length {
                expected: 8,
                found: 7
            })
        );

        // x = (π, π): equals (X⊗X)·cluster up to phase; Z readouts flip sign.
        let flipped = encode(&[PI, PI], 2).unwrap();
        let x = named_gate("X").unwrap();
        let oracle = PureState::cluster(2)
            .unwrap()
            .apply(&x, &[0])
            .unwrap()
            .apply(&x, &[1])
            .unwrap();
        let overlap: C64 = flipped
            .amplitudes()
            .iter()
            .zip(oracle.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((overlap.norm_sqr() - 1.0).abs() < 1e-14);
        // Z readouts of the 2-qubit cluster are 0, so compare via a tilted input.
        let base = encode(&[0.4, -0.9], 2).unwrap();
        let shifted = encode(&[0.4 + PI, -0.9 + PI], 2).unwrap();
        for q in 0..2 {
            assert!((base.expect_z(q).unwrap() + shifted.expect_z(q).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn conv_layer_examples() {
        let rho = random_density(2, 0.8);
        let same = conv_layer(&rho, &[0.0; 15], &[[0, 1]]).unwrap();
        assert!(same.max_abs_diff(&rho) < 1e-15);

        let theta = pseudo(15, 1.9);
        let u = su4(&Su4Params::from_slice(&theta).unwrap()).unwrap();
        let direct = rho.apply(&u, &[0, 1]).unwrap();
        assert_eq!(conv_layer(&rho, &theta, &[[0, 1]]).unwrap(), direct);

        assert!(matches!(
            conv_layer(&rho, &theta, &[[1, 2]]),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn every_shared_parameter_moves_every_pair() {
        let rho = random_density(4, 0.55);
        let pairs = conv_pairs(4, 0);
        let theta = pseudo(15, 2.3);
        let base = conv_layer(&rho, &theta, &pairs).unwrap();
        for i in 0..15 {
            let mut t = theta.clone();
            t[i] += 1e-3;
            let moved = conv_layer(&rho, &t, &pairs).unwrap();
            for pair in &pairs {
                let a = base.reduce_to(pair).unwrap();
                let b = moved.reduce_to(pair).unwrap();
                assert!(
                    a.max_abs_diff(&b) > 1e-9,
                    "parameter {i} leaves pair {pair:?} unchanged"
                );
            }
        }
    }

    #[test]
    fn pool_layer_examples() {
        let rho = random_density(8, 0.3);
        let out = pool_layer(&rho, &[0, 2, 4, 6]).unwrap();
        assert_eq!(out.dim(), 16);
        assert!((out.trace().re - 1.0).abs() < 1e-12);

        let a = random_density(2, 0.1);
        let b = random_density(2, 0.9);
        let ab = a.tensor(&b).unwrap();
        assert!(pool_layer(&ab, &[0, 1]).unwrap().max_abs_diff(&a) < 1e-14);
        assert!(pool_layer(&ab, &[]).is_err());
        assert!(pool_layer(&ab, &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn pool_layer_matches_summation_oracle() {
        let rho = random_density(4, 1.7);
        let out = pool_layer(&rho, &[0, 2]).unwrap();
        // Σ over traced bits (qubits 1 and 3) of ρ[(j,n),(l,n)]
        let idx = |j: usize, n: usize| ((j >> 1) << 3) | ((n >> 1) << 2) | ((j & 1) << 1) | (n & 1);
        for j in 0..4 {
            for l in 0..4 {
                let s: C64 = (0..4).map(|n| rho.get(idx(j, n), idx(l, n))).sum();
                assert!((out.get(j, l) - s).norm() < 1e-12);
            }
        }
    }

    fn stage(ancillas: usize, gate: UpsampleGate) -> UpsampleStage {
        UpsampleStage {
            ancillas,
            gate,
            mode: UpsampleMode::Shared,
        }
    }

    #[test]
    fn zero_parameter_upsampling_is_a_plain_tensor() {
        let rho = random_density(2, 0.45);
        let out = upsample_layer(&rho, &[0.0; 15], &stage(2, UpsampleGate::FullSu4)).unwrap();
        let cluster = PureState::cluster(2).unwrap().to_density();
        let oracle = rho
            .tensor(&cluster)
            .unwrap()
            .permute(&[0, 2, 1, 3])
            .unwrap();
        assert!(out.max_abs_diff(&oracle) < 1e-15);
        assert!(out.reduce_to(&[0, 2]).unwrap().max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn controlled_upsampling_follows_the_control() {
        let plus = PureState::cluster(1).unwrap().to_density();
        let st = stage(1, UpsampleGate::ControlledSu2);

        let zero = PureState::zero(1).unwrap().to_density();
        let out = upsample_layer(&zero, &pseudo(3, 0.77), &st).unwrap();
        assert!(out.reduce_to(&[1]).unwrap().max_abs_diff(&plus) < 1e-15);

        let one = PureState::basis(1, 1).unwrap().to_density();
        // ZYZ(π/2, π, −π/2) = iX
        let w_x = [PI / 2.0, PI, -PI / 2.0];
        assert!(
            zyz(w_x)
                .unwrap()
                .phase_insensitive_diff(&named_gate("X").unwrap())
                < 1e-15
        );
        let out = upsample_layer(&one, &w_x, &st).unwrap();
        assert!(out.reduce_to(&[1]).unwrap().max_abs_diff(&plus) < 1e-15);

        // W = RZ(π) sends |+⟩ to |−⟩
        let out = upsample_layer(&one, &[PI, 0.0, 0.0], &st).unwrap();
        let minus = PureState::from_amplitudes(vec![
            C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(-core::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap()
        .to_density();
        assert!(out.reduce_to(&[1]).unwrap().max_abs_diff(&minus) < 1e-15);
    }

    #[test]
    fn upsample_rejects_bad_slices() {
        let rho = random_density(2, 0.2);
        assert!(upsample_layer(&rho, &[0.0; 14], &stage(2, UpsampleGate::FullSu4)).is_err());
        let per_site = UpsampleStage {
            mode: UpsampleMode::PerSite,
            ..stage(2, UpsampleGate::FullSu4)
        };
        assert!(upsample_layer(&rho, &[0.0; 30], &per_site).is_ok());
        assert!(upsample_layer(&rho, &[0.0; 15], &per_site).is_err());
        assert!(upsample_layer(&rho, &[0.0; 15], &stage(3, UpsampleGate::FullSu4)).is_err());
        let big = random_density(7, 0.2);
        assert!(matches!(
            upsample_layer(&big, &[0.0; 15], &stage(6, UpsampleGate::FullSu4)),
            Err(Error::QubitCount(13))
        ));
    }

    #[test]
    fn interleaving() {
        assert_eq!(interleave_order(2, 2), vec![0, 2, 1, 3]);
        assert_eq!(interleave_order(3, 2), vec![0, 3, 1, 4, 2]);
    }

    /// Layer-by-layer composition of the public layer functions.
    fn compose(spec: &crate::circuit::CircuitSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let mut rho = encode(x, spec.n_qubits()).unwrap().to_density();
        for layer in spec.layers() {
            rho = match layer {
                Layer::Conv { pairs, params, .. } => {
                    conv_layer(&rho, &theta[params.clone()], pairs).unwrap()
                }
                Layer::Pool { keep, .. } => pool_layer(&rho, keep).unwrap(),
                Layer::Upsample {
                    config,
                    site_params,
                    ..
                } => {
                    let span = site_params[0].start..site_params.last().unwrap().end;
                    upsample_layer(&rho, &theta[span], config).unwrap()
                }
                _ => rho,
            };
        }
        (0..rho.n_qubits())
            .map(|q| rho.expect_z(q).unwrap())
            .collect()
    }

    #[test]
    fn forward_matches_layer_composition() {
        for cfg in [
            ArchitectureConfig::default(),
            ArchitectureConfig {
                upsample_mode: UpsampleMode::PerSite,
                upsample_gate: UpsampleGate::ControlledSu2,
                conv_reps_per_stage: 2,
                ..Default::default()
            },
        ] {
            let spec = build_qfcn(&cfg).unwrap();
            let theta =
                ParamVector::new(spec.layout().clone(), pseudo(spec.n_params(), 0.61)).unwrap();
            let x = pseudo(8, 1.3);
            let y = forward(&spec, &theta, &x).unwrap();
            let oracle = compose(&spec, theta.values(), &x);
            assert_eq!(y.len(), 8);
            for (a, b) in y.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_parameter_forward_matches_hand_pipeline() {
        let spec = build_qfcn(&ArchitectureConfig::default()).unwrap();
        let theta = ParamVector::zeros(spec.layout());
        let y = forward(&spec, &theta, &[0.0; 8]).unwrap();

        // cluster → trace → trace → re-tensor with ancilla clusters, no couplings
        let rho = PureState::cluster(8).unwrap().to_density();
        let rho = rho.partial_trace(&[1, 3, 5, 7]).unwrap();
        let rho = rho.partial_trace(&[1, 3]).unwrap();
        let c2 = PureState::cluster(2).unwrap().to_density();
        let rho = rho.tensor(&c2).unwrap().permute(&[0, 2, 1, 3]).unwrap();
        let c4 = PureState::cluster(4).unwrap().to_density();
        let rho = rho
            .tensor(&c4)
            .unwrap()
            .permute(&[0, 4, 1, 5, 2, 6, 3, 7])
            .unwrap();
        for (q, v) in y.iter().enumerate() {
            assert!((v - rho.expect_z(q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn qcnn_zero_parameters_matches_manual_pipeline() {
        let spec = build_qcnn(&ArchitectureConfig::default()).unwrap();
        let theta = ParamVector::zeros(spec.layout());
        let y = forward_qcnn(&spec, &theta, &[0.0; 8]).unwrap();
        assert_eq!(y.len(), 2);
        let rho = encode(&[0.0; 8], 8).unwrap().to_density();
        let rho = conv_layer(&rho, &[0.0; 15], &conv_pairs(8, 0)).unwrap();
        let rho = pool_layer(&rho, &[0, 2, 4, 6]).unwrap();
        let rho = conv_layer(&rho, &[0.0; 15], &conv_pairs(4, 0)).unwrap();
        let rho = pool_layer(&rho, &[0, 2]).unwrap();
        for q in 0..2 {
            assert!((y[q] - rho.expect_z(q).unwrap()).abs() < 1e-12);
            assert!(y[q].abs() <= 1.0 + 1e-9);
        }
    }
}
