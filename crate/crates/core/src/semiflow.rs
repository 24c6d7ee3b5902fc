use serde::{Deserialize, Serialize};

use crate::basespace::BasePoint;
use crate::error::{Error, Result};

/// Base-space dynamics: how a point moves between two times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemiflowKind {
    /// Advance the trajectory by `t - s`. Satisfies both the identity and
    /// the two-step composition laws.
    Shift,
    /// Diagnostic variant that advances by `(t - s)^2`. It still fixes points
    /// at equal times but deliberately breaks the composition law.
    ShiftSquared,
}

/// Move `x` from time `s` to time `t >= s`.
pub fn eval_semiflow(kind: SemiflowKind, t: f64, s: f64, x: &BasePoint) -> Result<BasePoint> {
    if !t.is_finite() || !s.is_finite() {
        return Err(Error::Param("times must be finite".into()));
    }
    if t < s {
        return Err(Error::TimeOrder(format!("need t >= s, got t={t}, s={s}")));
    }
    match kind {
        SemiflowKind::Shift => x.shifted(t - s),
        SemiflowKind::ShiftSquared => x.shifted((t - s) * (t - s)),
    }
}
