//! Synthetic two-segment step signals with per-position ±1 labels.
//!
//! Every sample picks a cut point `c` in `1..n_qubits`; positions before the
//! cut carry angle `theta_a` and label −1, the rest carry `theta_b` and label
//! +1. Gaussian noise is added to every angle. Draws come from ChaCha8 seeded
//! with `seed_from_u64(seed)`, in this order per sample: the cut point, then
//! one standard normal per position (Box–Muller, cosine branch only, using
//! two uniform draws). Noise is drawn even when `noise_sigma` is zero.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, MAX_QUBITS};

pub const DEFAULT_THETA_A: f64 = FRAC_PI_4;
pub const DEFAULT_THETA_B: f64 = 3.0 * FRAC_PI_4;
pub const DEFAULT_N_QUBITS: usize = 8;

/// One standard normal deviate.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub x: Vec<f64>,
    pub labels: Vec<i8>,
}

impl Sample {
    pub fn new(x: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        let s = Self { x, labels };
        s.validate()?;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.x.len()
    }

    /// Labels as regression targets.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.x.len() != self.labels.len() {
            return Err(Error::Dataset(format!(
                "{} angles but {} labels",
                self.x.len(),
                self.labels.len()
            )));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite angle".into()));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::Dataset(format!("label {l} is not ±1")));
        }
        Ok(())
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    pub seed: u64,
    pub noise_sigma: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub n_qubits: usize,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_sigma: 0.1,
            theta_a: DEFAULT_THETA_A,
            theta_b: DEFAULT_THETA_B,
            n_qubits: DEFAULT_N_QUBITS,
        }
    }
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config {
                field: "noise_sigma",
                reason: format!("{} is not a finite non-negative number", self.noise_sigma),
            });
        }
        if !self.theta_a.is_finite() || !self.theta_b.is_finite() {
            return Err(Error::Config {
                field: "theta_a/theta_b",
                reason: "base angles must be finite".into(),
            });
        }
        if !(2..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::Config {
                field: "n_qubits",
                reason: format!("{} is outside 2..={MAX_QUBITS}", self.n_qubits),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    meta: DatasetMeta,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, samples: Vec<Sample>) -> Result<Self> {
        meta.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::Dataset(format!("sample {i}: {e}")))?;
            if s.n_qubits() != meta.n_qubits {
                return Err(Error::Dataset(format!(
                    "sample {i} has width {} but the dataset has {}",
                    s.n_qubits(),
                    meta.n_qubits
                )));
            }
        }
        Ok(Self { meta, samples })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.meta.n_qubits
    }

    /// 64-bit FNV-1a over the meta fields and every angle and label bit
    /// pattern; equal for bit-identical datasets.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&self.meta.seed.to_le_bytes());
        eat(&self.meta.noise_sigma.to_bits().to_le_bytes());
        eat(&self.meta.theta_a.to_bits().to_le_bytes());
        eat(&self.meta.theta_b.to_bits().to_le_bytes());
        eat(&(self.meta.n_qubits as u64).to_le_bytes());
        for s in &self.samples {
            for v in &s.x {
                eat(&v.to_bits().to_le_bytes());
            }
            for &l in &s.labels {
                eat(&[l as u8]);
            }
        }
        h
    }
}

/// `n_samples` step signals on the default 8-qubit width.
pub fn gen_dataset(
    n_samples: usize,
    seed: u64,
    noise_sigma: f64,
    theta_a: f64,
    theta_b: f64,
) -> Result<Dataset> {
    generate(
        &DatasetMeta {
            seed,
            noise_sigma,
            theta_a,
            theta_b,
            n_qubits: DEFAULT_N_QUBITS,
        },
        n_samples,
    )
}

/// Regenerates `n_samples` samples from `meta`.
pub fn generate(meta: &DatasetMeta, n_samples: usize) -> Result<Dataset> {
    meta.validate()?;
    if n_samples == 0 {
        return Err(Error::Config {
            field: "n_samples",
            reason: "must be at least 1".into(),
        });
    }
    let n = meta.n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(meta.seed);
    let samples = (0..n_samples)
        .map(|_| {
            let cut = rng.random_range(1..n);
            let mut x = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for q in 0..n {
                let (base, label) = if q < cut {
                    (meta.theta_a, -1)
                } else {
                    (meta.theta_b, 1)
                };
                x.push(base + meta.noise_sigma * standard_normal(&mut rng));
                labels.push(label);
            }
            Sample { x, labels }
        })
        .collect();
    Dataset::new(*meta, samples)
}
