use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest denominator used when normalizing residuals, so that exact-zero
/// comparisons never divide by zero.
pub const MIN_DENOM: f64 = 1e-300;

/// Magnitude used to clamp log-margins that would otherwise be infinite,
/// keeping every reported number finite and serializable.
pub const LOG_CLAMP: f64 = 1e300;

/// Norm placed on the finite-dimensional state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    pub fn norm(self, components: &[f64]) -> f64 {
        match self {
            NormKind::L1 => components.iter().map(|c| c.abs()).sum(),
            NormKind::L2 => components.iter().map(|c| c * c).sum::<f64>().sqrt(),
        }
    }
}

/// A state vector together with the norm its space carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub components: Vec<f64>,
    pub norm_kind: NormKind,
}

impl StateVector {
    pub fn new(components: Vec<f64>, norm_kind: NormKind) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Param("state vector must have dimension >= 1".into()));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::Param("state vector components must be finite".into()));
        }
        Ok(Self { components, norm_kind })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm_kind.norm(&self.components)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == 0.0)
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a - b)
            .collect();
        Ok(StateVector { components, norm_kind: self.norm_kind })
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a + b)
            .collect();
        Ok(StateVector { components, norm_kind: self.norm_kind })
    }
}

/// `ln || (c_i * e^{f_i})_i ||`, evaluated without forming the scaled vector,
/// so large exponents cannot overflow. Returns `None` when every scaled
/// component is zero (the norm is zero and the logarithm undefined).
pub fn log_norm_scaled(components: &[f64], log_factors: &[f64], norm_kind: NormKind) -> Option<f64> {
    debug_assert_eq!(components.len(), log_factors.len());
    let mut peak = f64::NEG_INFINITY;
    for (c, f) in components.iter().zip(log_factors) {
        if *c != 0.0 && *f > peak {
            peak = *f;
        }
    }
    if peak == f64::NEG_INFINITY {
        return None;
    }
    let scaled: Vec<f64> = components
        .iter()
        .zip(log_factors)
        .map(|(c, f)| c * (f - peak).exp())
        .collect();
    Some(peak + norm_kind.norm(&scaled).ln())
}

/// Deterministic probe set: every nonzero 0/1 indicator vector (all coordinate
/// axes and their combinations) in ascending mask order, followed by
/// `random_count` seeded pseudo-random vectors normalized to unit length in
/// the given norm.
pub fn probe_set(dim: usize, norm_kind: NormKind, seed: u64, random_count: usize) -> Result<Vec<StateVector>> {
    if dim == 0 || dim > 16 {
        return Err(Error::Param(format!("probe dimension {dim} outside 1..=16")));
    }
    let mut probes = Vec::new();
    for mask in 1u32..(1u32 << dim) {
        let components: Vec<f64> = (0..dim)
            .map(|i| if mask >> i & 1 == 1 { 1.0 } else { 0.0 })
            .collect();
        probes.push(StateVector { components, norm_kind });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut added = 0;
    while added < random_count {
        let components: Vec<f64> = (0..dim).map(|_| unit_interval(&mut rng) * 2.0 - 1.0).collect();
        let l2 = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if l2 < 1e-3 {
            continue;
        }
        let n = norm_kind.norm(&components);
        let components = components.into_iter().map(|c| c / n).collect();
        probes.push(StateVector { components, norm_kind });
        added += 1;
    }
    Ok(probes)
}

/// Uniform sample in [0, 1) with 53 random bits.
fn unit_interval(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}
