use serde::{Deserialize, Serialize};

use crate::basespace::BasePoint;
use crate::error::{Error, Result};
use crate::semiflow::{eval_semiflow, SemiflowKind};
use crate::state::StateVector;

/// How the drift coefficient of a neutral component is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeutralAnchor {
    /// One space-wide coefficient. The resulting multipliers are additive in
    /// time, so the two-step composition law holds exactly.
    Fixed(f64),
    /// Re-read the coefficient from each evaluation's own base point. For
    /// non-constant trajectories this breaks the composition law; kept as a
    /// diagnostic.
    PointValue,
}

/// Per-component scalar evolution law. Each law turns the accumulated
/// trajectory integral `I = ∫_0^{t-t0} x(u) du` into a log-multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentLaw {
    /// `exp(+I)`
    Growth,
    /// `exp(-I)`
    Decay,
    /// `exp(-mu (t - t0) + I)`: contraction at rate `mu` fighting the drift.
    Stable { mu: f64 },
    /// `exp(-c (t - t0) + I)`: drift compensated by an anchored coefficient.
    Neutral { anchor: NeutralAnchor },
}

impl ComponentLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ComponentLaw::Stable { mu } => {
                if !mu.is_finite() || mu <= 0.0 {
                    return Err(Error::Param(format!("stable rate mu must be positive, got {mu}")));
                }
                Ok(())
            }
            ComponentLaw::Neutral { anchor: NeutralAnchor::Fixed(c) } => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(Error::Param(format!("neutral anchor must be positive, got {c}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Natural log of this component's multiplier over `[t0, t]` at base point `x`.
    pub fn log_multiplier(&self, t: f64, t0: f64, x: &BasePoint) -> Result<f64> {
        let i = x.log_growth(t0, t)?;
        let gap = t - t0;
        Ok(match *self {
            ComponentLaw::Growth => i,
            ComponentLaw::Decay => -i,
            ComponentLaw::Stable { mu } => -mu * gap + i,
            ComponentLaw::Neutral { anchor: NeutralAnchor::Fixed(c) } => -c * gap + i,
            ComponentLaw::Neutral { anchor: NeutralAnchor::PointValue } => -x.value(0.0)? * gap + i,
        })
    }
}

/// A skew pairing of base dynamics with a diagonal linear cocycle: each state
/// component is scaled by its own law's multiplier, driven by the base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewEvolution {
    pub semiflow: SemiflowKind,
    pub laws: Vec<ComponentLaw>,
}

impl SkewEvolution {
    pub fn new(semiflow: SemiflowKind, laws: Vec<ComponentLaw>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::Param("need at least one component law".into()));
        }
        for law in &laws {
            law.validate()?;
        }
        Ok(Self { semiflow, laws })
    }

    pub fn dim(&self) -> usize {
        self.laws.len()
    }

    /// Base point moved from `s` to `t`.
    pub fn base_evolve(&self, t: f64, s: f64, x: &BasePoint) -> Result<BasePoint> {
        eval_semiflow(self.semiflow, t, s, x)
    }

    /// Log-multipliers of all components over `[t0, t]` at `x`.
    pub fn log_multipliers(&self, t: f64, t0: f64, x: &BasePoint) -> Result<Vec<f64>> {
        if t < t0 {
            return Err(Error::TimeOrder(format!("need t >= t0, got t={t}, t0={t0}")));
        }
        self.laws.iter().map(|law| law.log_multiplier(t, t0, x)).collect()
    }

    /// Apply the linear operator attached to `(t, t0, x)` to `v`.
    pub fn apply(&self, t: f64, t0: f64, x: &BasePoint, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.dim() });
        }
        let mults = self.log_multipliers(t, t0, x)?;
        let components = v
            .components
            .iter()
            .zip(&mults)
            .map(|(c, m)| c * m.exp())
            .collect();
        Ok(StateVector { components, norm_kind: v.norm_kind })
    }
}
