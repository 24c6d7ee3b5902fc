use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generating trajectory for a base space, with closed-form values and integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `level + amplitude * e^{-t}` on `[0, inf)`; decays monotonically to `level`.
    ExpDecayToLevel { level: f64, amplitude: f64 },
    /// `1/(2n+1) + e^{-t} / (4n(2n+1))` on `[0, inf)`; decays to `1/(2n+1)`.
    IntervalDecay { n: u32 },
    /// Constant trajectory, defined on all of the real line.
    Constant { value: f64 },
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrajectorySpec::ExpDecayToLevel { level, amplitude } => {
                if !level.is_finite() || !amplitude.is_finite() {
                    return Err(Error::Param("trajectory parameters must be finite".into()));
                }
                // Positivity on [0, inf) reduces to positivity at both ends
                // because the trajectory is monotone.
                if level <= 0.0 || level + amplitude <= 0.0 {
                    return Err(Error::Param(format!(
                        "trajectory must stay positive: level={level}, initial value={}",
                        level + amplitude
                    )));
                }
                Ok(())
            }
            TrajectorySpec::IntervalDecay { n } => {
                if n == 0 {
                    return Err(Error::Param("interval index n must be >= 1".into()));
                }
                Ok(())
            }
            TrajectorySpec::Constant { value } => {
                if !value.is_finite() || value <= 0.0 {
                    return Err(Error::Param(format!("constant trajectory must be positive, got {value}")));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TrajectorySpec::ExpDecayToLevel { level, amplitude } => level + amplitude * (-t).exp(),
            TrajectorySpec::IntervalDecay { n } => {
                let n = f64::from(n);
                1.0 / (2.0 * n + 1.0) + (-t).exp() / (4.0 * n * (2.0 * n + 1.0))
            }
            TrajectorySpec::Constant { value } => value,
        }
    }

    /// Exact integral of `value` over `[from, to]`.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        match *self {
            TrajectorySpec::ExpDecayToLevel { level, amplitude } => {
                level * (to - from) + amplitude * ((-from).exp() - (-to).exp())
            }
            TrajectorySpec::IntervalDecay { n } => {
                let n = f64::from(n);
                (to - from) / (2.0 * n + 1.0)
                    + ((-from).exp() - (-to).exp()) / (4.0 * n * (2.0 * n + 1.0))
            }
            TrajectorySpec::Constant { value } => value * (to - from),
        }
    }

    /// Value the trajectory approaches as its argument grows without bound.
    pub fn limit_value(&self) -> f64 {
        match *self {
            TrajectorySpec::ExpDecayToLevel { level, .. } => level,
            TrajectorySpec::IntervalDecay { n } => 1.0 / (2.0 * f64::from(n) + 1.0),
            TrajectorySpec::Constant { value } => value,
        }
    }

    /// Earliest argument at which the trajectory is defined.
    fn domain_start(&self) -> f64 {
        match self {
            TrajectorySpec::Constant { .. } => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            TrajectorySpec::ExpDecayToLevel { level, amplitude } => {
                format!("exp-decay(level={level}, amplitude={amplitude})")
            }
            TrajectorySpec::IntervalDecay { n } => format!("interval-decay(n={n})"),
            TrajectorySpec::Constant { value } => format!("constant({value})"),
        }
    }
}

/// `∫_s^t x(u - s) du` for the trajectory translated by `shift`, in closed form.
pub fn closed_form_log_growth(traj: &TrajectorySpec, shift: f64, s: f64, t: f64) -> Result<f64> {
    if t < s {
        return Err(Error::TimeOrder(format!("need t >= s, got t={t}, s={s}")));
    }
    if shift < traj.domain_start() {
        return Err(Error::Domain(format!("shift {shift} precedes trajectory start")));
    }
    Ok(traj.integral(shift, shift + (t - s)))
}

/// Where a base point sits inside its space: a translate of the generator,
/// or the limiting constant trajectory the translates converge to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointPosition {
    Shift { shift: f64 },
    Limit,
}

/// A point of the base space: the generator translated by a nonnegative shift,
/// or the limit trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub generator: TrajectorySpec,
    pub position: PointPosition,
}

impl BasePoint {
    /// Trajectory value at argument `tau` (relative to this point's own origin).
    pub fn value(&self, tau: f64) -> Result<f64> {
        match self.position {
            PointPosition::Limit => Ok(self.generator.limit_value()),
            PointPosition::Shift { shift } => {
                let arg = shift + tau;
                if arg < self.generator.domain_start() {
                    return Err(Error::Domain(format!(
                        "argument {arg} precedes trajectory start (shift {shift}, tau {tau})"
                    )));
                }
                Ok(self.generator.value(arg))
            }
        }
    }

    /// `∫_s^t value(u - s) du` in closed form: the accumulated log-scale the
    /// point contributes between times `s` and `t`.
    pub fn log_growth(&self, s: f64, t: f64) -> Result<f64> {
        match self.position {
            PointPosition::Limit => {
                if t < s {
                    return Err(Error::TimeOrder(format!("need t >= s, got t={t}, s={s}")));
                }
                Ok(self.generator.limit_value() * (t - s))
            }
            PointPosition::Shift { shift } => closed_form_log_growth(&self.generator, shift, s, t),
        }
    }

    /// The point advanced forward by `dt >= 0` (the limit point is invariant).
    pub fn shifted(&self, dt: f64) -> Result<BasePoint> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::TimeOrder(format!("advance must be nonnegative and finite, got {dt}")));
        }
        Ok(match self.position {
            PointPosition::Limit => *self,
            PointPosition::Shift { shift } => BasePoint {
                generator: self.generator,
                position: PointPosition::Shift { shift: shift + dt },
            },
        })
    }

    /// Earliest relative argument at which `value` is defined.
    pub fn lowest_tau(&self) -> f64 {
        match self.position {
            PointPosition::Limit => f64::NEG_INFINITY,
            PointPosition::Shift { shift } => self.generator.domain_start() - shift,
        }
    }

    pub fn label(&self) -> String {
        match self.position {
            PointPosition::Limit => "limit".into(),
            PointPosition::Shift { shift } => format!("shift={shift}"),
        }
    }

    pub fn same_space(&self, other: &BasePoint) -> bool {
        self.generator == other.generator
    }
}

/// The base space generated by translating one trajectory, optionally
/// including its limiting constant trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSpace {
    pub generator: TrajectorySpec,
    pub includes_limit: bool,
}

impl BaseSpace {
    pub fn new(generator: TrajectorySpec, includes_limit: bool) -> Result<Self> {
        generator.validate()?;
        Ok(Self { generator, includes_limit })
    }

    pub fn point(&self, shift: f64) -> Result<BasePoint> {
        if !shift.is_finite() || shift < 0.0 {
            return Err(Error::Param(format!("shift must be finite and nonnegative, got {shift}")));
        }
        Ok(BasePoint {
            generator: self.generator,
            position: PointPosition::Shift { shift },
        })
    }

    pub fn limit_point(&self) -> Result<BasePoint> {
        if !self.includes_limit {
            return Err(Error::Domain("this space does not include its limit point".into()));
        }
        Ok(BasePoint { generator: self.generator, position: PointPosition::Limit })
    }

    /// Base points at the given shifts, plus the limit point when both the
    /// space and the request include it.
    pub fn sample_points(&self, shifts: &[f64], include_limit: bool) -> Result<Vec<BasePoint>> {
        let mut out = Vec::with_capacity(shifts.len() + 1);
        for &s in shifts {
            out.push(self.point(s)?);
        }
        if include_limit && self.includes_limit {
            out.push(self.limit_point()?);
        }
        if out.is_empty() {
            return Err(Error::EmptyGrid("no base points sampled".into()));
        }
        Ok(out)
    }
}

/// Parameters for the truncated product metric on trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// Number of expanding windows summed; the discarded tail is below `2^-depth`.
    pub depth: u32,
    /// Evaluation step inside each window.
    pub tau_step: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { depth: 12, tau_step: 0.01 }
    }
}

/// Truncated metric `sum_{n=1..depth} 2^-n * d_n / (1 + d_n)` where `d_n` is
/// the sampled sup-distance over the window `[max(-n, domain), n]`.
/// Returns `(value, tail_bound)`; the true metric lies within `tail_bound`
/// of `value` (ignoring in-window sampling error).
pub fn metric_d(x: &BasePoint, y: &BasePoint, params: &MetricParams) -> Result<(f64, f64)> {
    if !x.same_space(y) {
        return Err(Error::SpaceMismatch(format!(
            "{} vs {}",
            x.generator.describe(),
            y.generator.describe()
        )));
    }
    if params.depth == 0 || params.depth > 64 {
        return Err(Error::Param(format!("metric depth {} outside 1..=64", params.depth)));
    }
    if !(params.tau_step > 0.0) || !params.tau_step.is_finite() {
        return Err(Error::Param("metric tau_step must be positive and finite".into()));
    }
    let lowest = x.lowest_tau().max(y.lowest_tau());
    let mut value = 0.0;
    for n in 1..=params.depth {
        let hi = f64::from(n);
        let lo = (-hi).max(lowest);
        let mut sup: f64 = 0.0;
        let mut tau = lo;
        loop {
            let diff = (x.value(tau)? - y.value(tau)?).abs();
            if diff > sup {
                sup = diff;
            }
            if tau >= hi {
                break;
            }
            tau = (tau + params.tau_step).min(hi);
        }
        value += 2f64.powi(-(n as i32)) * sup / (1.0 + sup);
    }
    Ok((value, 2f64.powi(-(params.depth as i32))))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.367_879_441_171_442_33;

    fn decay_space() -> BaseSpace {
        BaseSpace::new(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 }, true).unwrap()
    }

    #[test]
    fn exp_decay_values_and_integral() {
        let traj = TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 };
        assert_eq!(traj.value(0.0), 2.0);
        assert!((traj.value(1.0) - (1.0 + E_INV)).abs() < 1e-15);
        // ∫_0^1 (1 + e^-u) du = 1 + (1 - e^-1)
        assert!((traj.integral(0.0, 1.0) - 1.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(traj.integral(3.0, 3.0), 0.0);
    }

    #[test]
    fn interval_decay_integral_closed_form() {
        let traj = TrajectorySpec::IntervalDecay { n: 1 };
        assert!((traj.value(0.0) - 5.0 / 12.0).abs() < 1e-15);
        // ∫_0^3 x_1 = 3/3 + (1 - e^-3)/12
        let expected = 1.0 + (1.0 - (-3.0f64).exp()) / 12.0;
        assert!((traj.integral(0.0, 3.0) - expected).abs() < 1e-15);
        assert!((expected - 1.079_184_410_969_344_7).abs() < 1e-14);
    }

    #[test]
    fn trajectory_positivity_is_enforced() {
        assert!(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: -2.0 }.validate().is_err());
        assert!(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: -0.5 }.validate().is_ok());
        assert!(TrajectorySpec::IntervalDecay { n: 0 }.validate().is_err());
        assert!(TrajectorySpec::Constant { value: 0.0 }.validate().is_err());
    }

    #[test]
    fn log_growth_translates_with_shift() {
        let space = decay_space();
        let x = space.point(2.0).unwrap();
        // log_growth(5, 8) integrates the point's own values over a window of
        // length 3 starting at its origin: generator on [2, 5].
        let direct = x.generator.integral(2.0, 5.0);
        assert_eq!(x.log_growth(5.0, 8.0).unwrap(), direct);
        assert_eq!(x.log_growth(5.0, 8.0).unwrap(), x.log_growth(0.0, 3.0).unwrap());
        let lim = space.limit_point().unwrap();
        assert_eq!(lim.log_growth(1.0, 4.0).unwrap(), 3.0);
    }

    #[test]
    fn domain_guard_rejects_early_arguments() {
        let space = decay_space();
        let x = space.point(1.0).unwrap();
        assert!(x.value(-1.0).is_ok());
        assert!(x.value(-1.5).is_err());
        assert!(space.limit_point().unwrap().value(-100.0).is_ok());
    }

    #[test]
    fn metric_distance_generator_to_limit() {
        // Every window's sup distance is sup_{tau} |a e^-(shift+tau)| = e^0 = 1
        // at the left end tau = 0 for the unshifted generator, so each term is
        // 2^-n * 1/2 and the sum telescopes to (1 - 2^-depth)/2.
        let space = decay_space();
        let x = space.point(0.0).unwrap();
        let lim = space.limit_point().unwrap();
        let (d, tail) = metric_d(&x, &lim, &MetricParams { depth: 20, tau_step: 0.01 }).unwrap();
        assert_eq!(d, (1.0 - 2f64.powi(-20)) / 2.0);
        assert_eq!(tail, 2f64.powi(-20));
    }

    #[test]
    fn metric_is_symmetric_and_zero_on_identical_points() {
        let space = decay_space();
        let a = space.point(0.5).unwrap();
        let b = space.point(2.0).unwrap();
        let p = MetricParams::default();
        let (dab, _) = metric_d(&a, &b, &p).unwrap();
        let (dba, _) = metric_d(&b, &a, &p).unwrap();
        assert_eq!(dab, dba);
        assert!(dab > 0.0);
        let (daa, _) = metric_d(&a, &a, &p).unwrap();
        assert_eq!(daa, 0.0);
    }
}
