//! Envelope-function and integral characterizations of rate certificates.
//!
//! Two independent routes to the same conclusions as the direct three-way
//! sweep: bounding evolved legs by decreasing envelope functions, and bounding
//! weighted integrals of leg norms.  The module also searches sampled data for
//! the one-step hypotheses (a contraction factor, an expansion factor, and
//! two-sided exponential bounds) and assembles a rate certificate from them.

use serde::{Deserialize, Serialize};

use crate::basespace::BasePoint;
use crate::cocycle::SkewEvolution;
use crate::error::{Error, Result};
use crate::projectors::{check_compatibility, ProjIndex, ProjectionFamily, Regime};
use crate::state::{log_norm_scaled, StateVector, MIN_DENOM};
use crate::time::GridSpec;
use crate::trichotomy::{
    linear_rate_grid, ln_norm, CellRecord, DirectionConstraints, MarginTracker, RateCertificate,
    Scope, VerificationVerdict, VerifyMode, PRECHECK_TOL,
};

/// Subdivision cap for adaptive quadrature.
const MAX_DEPTH: u32 = 20;

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// Returns the integral estimate together with a bound on the accumulated
/// acceptance error.  A panel is accepted when the Richardson defect between
/// one and two Simpson steps is within fifteen times the tolerance scaled by
/// the panel's own magnitude, so integrands spanning many orders of magnitude
/// are resolved relative to their local size rather than to an absolute
/// threshold they could never meet (or could meet vacuously).
pub fn quadrature<F>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Param(format!("quadrature limits must be finite, got [{a}, {b}]")));
    }
    if b < a {
        return Err(Error::TimeOrder(format!("quadrature needs b >= a, got a={a}, b={b}")));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Param(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain(format!("integrand is not finite at {x}")))
        }
    };
    let m = 0.5 * (a + b);
    let fa = eval(a)?;
    let fm = eval(m)?;
    let fb = eval(b)?;
    let whole = simpson(a, b, fa, fm, fb);
    adapt(&eval, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let defect = left + right - whole;
    // Relative acceptance with a roundoff floor: the total error stays within
    // the tolerance times the integral of |f|, at any magnitude.
    let scale = (left.abs() + right.abs()).max(MIN_DENOM);
    if defect.abs() <= 15.0 * scale * tol.max(1e-14) {
        return Ok((left + right + defect / 15.0, defect.abs() / 15.0));
    }
    if depth == 0 {
        return Err(Error::NonConvergence(format!("subdivision cap reached on [{a}, {b}]")));
    }
    let (lv, le) = adapt(f, a, m, fa, flm, fm, left, tol, depth - 1)?;
    let (rv, re) = adapt(f, m, b, fm, frm, fb, right, tol, depth - 1)?;
    Ok((lv + rv, le + re))
}

/// A positive envelope on `t >= 0`, decreasing in `t`.
///
/// Values are produced through the validating constructors so ill-shaped
/// envelopes cannot enter the checks silently; deserialized values are
/// re-validated by every function that consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiFunction {
    /// `scale * exp(-rate * t)`.
    Exponential { scale: f64, rate: f64 },
    /// Piecewise-linear interpolation through strictly decreasing samples
    /// starting at time zero, held at the final value past the last sample.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl PhiFunction {
    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        let phi = PhiFunction::Exponential { scale, rate };
        phi.validate()?;
        Ok(phi)
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let phi = PhiFunction::Tabulated { times, values };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhiFunction::Exponential { scale, rate } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::Param(format!("envelope scale must be positive, got {scale}")));
                }
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::Param(format!("envelope rate must be positive, got {rate}")));
                }
            }
            PhiFunction::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Param(format!(
                        "tabulated envelope needs matching nonempty samples, got {} times and {} values",
                        times.len(),
                        values.len()
                    )));
                }
                if times[0] != 0.0 {
                    return Err(Error::Param(format!(
                        "tabulated envelope must start at time zero, got {}",
                        times[0]
                    )));
                }
                for w in times.windows(2) {
                    if !(w[1] > w[0]) || !w[1].is_finite() {
                        return Err(Error::Param("envelope sample times must increase".into()));
                    }
                }
                for &v in values {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::Param(format!("envelope values must be positive, got {v}")));
                    }
                }
                for w in values.windows(2) {
                    if !(w[1] < w[0]) {
                        return Err(Error::Param("envelope values must strictly decrease".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluate the envelope; arguments left of zero clamp to the start value.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PhiFunction::Exponential { scale, rate } => scale * (-rate * t.max(0.0)).exp(),
            PhiFunction::Tabulated { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                match times.iter().position(|&u| u >= t) {
                    None => *values.last().expect("validated nonempty"),
                    Some(i) => {
                        let (t0, t1) = (times[i - 1], times[i]);
                        let (v0, v1) = (values[i - 1], values[i]);
                        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                    }
                }
            }
        }
    }
}

/// Envelope pair implied by a rate certificate: the neutral constant and rate
/// give the slow envelope, and the worse of the stable/unstable bounds gives
/// the fast one.
pub fn phi_from_constants(cert: &RateCertificate) -> Result<(PhiFunction, PhiFunction)> {
    cert.validate()?;
    let phi1 = PhiFunction::Exponential { scale: cert.n0, rate: cert.nu0 };
    let phi2 =
        PhiFunction::Exponential { scale: cert.n1.max(cert.n2), rate: cert.nu1.min(cert.nu2) };
    Ok((phi1, phi2))
}

/// Read rate constants back off a pair of envelopes.
///
/// The gap is searched on the grid `1 + k * delta_step` for the smallest entry
/// where the envelope drops below one; the rate is the log-drop there and the
/// constant is the envelope at gap one.  Both derived envelopes use the same
/// extraction.
pub fn constants_from_phi(
    phi1: &PhiFunction,
    phi2: &PhiFunction,
    scope: Scope,
    delta_step: f64,
    delta_max: f64,
) -> Result<RateCertificate> {
    phi1.validate()?;
    phi2.validate()?;
    if !(delta_step > 0.0) || !delta_step.is_finite() {
        return Err(Error::Param(format!("gap step must be positive, got {delta_step}")));
    }
    if !(delta_max > 1.0 + delta_step) || !delta_max.is_finite() {
        return Err(Error::Param(format!(
            "gap ceiling must exceed 1 + step, got {delta_max} with step {delta_step}"
        )));
    }
    let (nu0, n0) = extract_rate(phi1, delta_step, delta_max)?;
    let (nu1, n1) = extract_rate(phi2, delta_step, delta_max)?;
    let cert = RateCertificate { n0, n1, n2: n1, nu0, nu1, nu2: nu1, scope };
    cert.validate()?;
    Ok(cert)
}

fn extract_rate(phi: &PhiFunction, delta_step: f64, delta_max: f64) -> Result<(f64, f64)> {
    let k_max = ((delta_max - 1.0) / delta_step).floor() as u64;
    let at = |k: u64| 1.0 + k as f64 * delta_step;
    if k_max == 0 || !(phi.eval(at(k_max)) < 1.0) {
        return Err(Error::NoDelta(format!(
            "envelope stays at or above one out to gap {}",
            at(k_max)
        )));
    }
    // The envelope never increases, so admissibility is monotone in k and a
    // bisection lands on the same entry a linear scan of the grid would find.
    let (mut lo, mut hi) = (1u64, k_max);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if phi.eval(at(mid)) < 1.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let nu = -phi.eval(at(lo)).max(MIN_DENOM).ln();
    let n = phi.eval(1.0).max(1.0 + 1e-9);
    Ok((nu, n))
}

pub const LABEL_LOWER_ENVELOPE: &str = "lower-envelope";
pub const LABEL_UPPER_ENVELOPE_DUAL: &str = "upper-envelope-dual";
pub const LABEL_STABLE_ENVELOPE: &str = "stable-envelope";
pub const LABEL_UNSTABLE_ENVELOPE: &str = "unstable-envelope";

const PHI_LABELS: [&str; 4] = [
    LABEL_LOWER_ENVELOPE,
    LABEL_UPPER_ENVELOPE_DUAL,
    LABEL_STABLE_ENVELOPE,
    LABEL_UNSTABLE_ENVELOPE,
];

/// Check the envelope characterization along the forward orbit of `x0`.
///
/// With `A` the operator over `[s, t]` rooted at the orbit of `x0` and
/// complements taken of the two families, four inequalities are swept:
/// the complement of the stable range shrinks no faster than `phi1`,
/// dually for the complement of the unstable range, the stable range
/// contracts at least as fast as `phi2`, and the unstable range expands
/// at least as fast as `1/phi2`.  Families must first pass the two-family
/// compatibility conditions.
#[allow(clippy::too_many_arguments)]
pub fn check_phi_characterization(
    xi: &SkewEvolution,
    x0: &BasePoint,
    stable: &ProjectionFamily,
    unstable: &ProjectionFamily,
    phi1: &PhiFunction,
    phi2: &PhiFunction,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    mut records: Option<&mut Vec<CellRecord>>,
) -> Result<VerificationVerdict> {
    phi1.validate()?;
    phi2.validate()?;
    grid.validate()?;
    if let Some(p) = points.first() {
        if !x0.same_space(p) {
            return Err(Error::SpaceMismatch(
                "anchor point lives outside the sampled trajectory space".into(),
            ));
        }
    }
    let compat = check_compatibility(
        Regime::Two,
        &[stable.clone(), unstable.clone()],
        xi,
        points,
        probes,
        grid,
        PRECHECK_TOL,
    )?;
    if !compat.pass {
        let (condition, residual) = compat
            .residuals
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k.clone(), *v))
            .unwrap_or_default();
        return Err(Error::IncompatibleFamilies {
            regime: Regime::Two.name().into(),
            condition,
            residual,
        });
    }

    let co_stable = stable.complement();
    let co_unstable = unstable.complement();
    let mut tracker = MarginTracker::new(&PHI_LABELS);

    for pair in grid.pairs() {
        let (t, s) = (pair.t, pair.t0);
        let gap = t - s;
        let y = xi.base_evolve(t, s, x0)?;
        let mults = xi.log_multipliers(t, s, &y)?;
        let ln_phi1 = phi1.eval(gap).max(MIN_DENOM).ln();
        let ln_phi2 = phi2.eval(gap).max(MIN_DENOM).ln();
        for (pi, v) in probes.iter().enumerate() {
            let start = ProjIndex::Time(s);
            let end = ProjIndex::Time(t);
            let c1_s = co_stable.apply(start, v)?;
            let c1_t = co_stable.apply(end, v)?;
            let c2_s = co_unstable.apply(start, v)?;
            let c2_t = co_unstable.apply(end, v)?;
            let q1_s = stable.apply(start, v)?;
            let q2_s = unstable.apply(start, v)?;

            let witness = |lbl: &'static str| move || format!("{lbl} t={t} s={s} probe={pi}");
            let cell = |label: &'static str| {
                let base = x0.label();
                move |m: f64| CellRecord {
                    t,
                    s,
                    t0: s,
                    base: base.clone(),
                    probe: pi,
                    label: label.into(),
                    log_margin: m,
                }
            };

            // phi1(gap) ||c1(s) v|| <= ||c1(t) A v||
            tracker.record(
                LABEL_LOWER_ENVELOPE,
                log_norm_scaled(&c1_t.components, &mults, v.norm_kind),
                ln_norm(&c1_s).map(|a| ln_phi1 + a),
                witness(LABEL_LOWER_ENVELOPE),
                cell(LABEL_LOWER_ENVELOPE),
                &mut records,
            );
            // phi1(gap) ||c2(t) A v|| <= ||c2(s) v||
            tracker.record(
                LABEL_UPPER_ENVELOPE_DUAL,
                ln_norm(&c2_s),
                log_norm_scaled(&c2_t.components, &mults, v.norm_kind).map(|l| ln_phi1 + l),
                witness(LABEL_UPPER_ENVELOPE_DUAL),
                cell(LABEL_UPPER_ENVELOPE_DUAL),
                &mut records,
            );
            // ||A q1(s) v|| <= phi2(gap) ||q1(s) v||
            tracker.record(
                LABEL_STABLE_ENVELOPE,
                ln_norm(&q1_s).map(|a| ln_phi2 + a),
                log_norm_scaled(&q1_s.components, &mults, v.norm_kind),
                witness(LABEL_STABLE_ENVELOPE),
                cell(LABEL_STABLE_ENVELOPE),
                &mut records,
            );
            // ||q2(s) v|| <= phi2(gap) ||A q2(s) v||
            tracker.record(
                LABEL_UNSTABLE_ENVELOPE,
                log_norm_scaled(&q2_s.components, &mults, v.norm_kind).map(|l| ln_phi2 + l),
                ln_norm(&q2_s),
                witness(LABEL_UNSTABLE_ENVELOPE),
                cell(LABEL_UNSTABLE_ENVELOPE),
                &mut records,
            );
        }
    }
    Ok(tracker.finish(VerifyMode::Pointwise, tol))
}

/// Which integral characterization to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralKind {
    /// Weighted mass of the neutral-and-up leg from the start time stays
    /// proportional to the starting norm.
    NeutralWeighted,
    /// Dual weighting against the endpoint leg over intermediate windows.
    NeutralWeightedDual,
    /// Total stable mass over an infinite horizon: quadrature out to the
    /// configured horizon plus a fitted exponential tail.
    StableTotal,
    /// Unstable mass up to the endpoint stays proportional to the endpoint leg.
    UnstableRatio,
}

impl IntegralKind {
    pub fn name(&self) -> &'static str {
        match self {
            IntegralKind::NeutralWeighted => "neutral-weighted",
            IntegralKind::NeutralWeightedDual => "neutral-weighted-dual",
            IntegralKind::StableTotal => "stable-total",
            IntegralKind::UnstableRatio => "unstable-ratio",
        }
    }

    fn needs_alpha(&self) -> bool {
        matches!(self, IntegralKind::NeutralWeighted | IntegralKind::NeutralWeightedDual)
    }
}

/// Tuning for one integral check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegralParams {
    /// Weight rate for the neutral kinds; ignored elsewhere.
    pub alpha: Option<f64>,
    /// Proportionality constant the integrals must stay below.
    pub bound: f64,
    /// Quadrature horizon for the infinite-horizon kind.
    pub horizon: f64,
    /// Local quadrature tolerance.
    pub quad_tol: f64,
    /// Ceiling of the decay-rate grid used by the tail fit.
    pub tail_beta_max: f64,
    /// Step of the decay-rate grid used by the tail fit.
    pub tail_beta_step: f64,
    /// Largest acceptable constant in the tail decay fit.
    pub tail_constant_cap: f64,
}

impl Default for IntegralParams {
    fn default() -> Self {
        Self {
            alpha: None,
            bound: 1.0,
            horizon: 40.0,
            quad_tol: 1e-8,
            tail_beta_max: 4.0,
            tail_beta_step: 0.1,
            tail_constant_cap: 100.0,
        }
    }
}

/// Per-direction integral bounds and weight rate implied by a rate certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegralBudget {
    pub alpha: f64,
    pub neutral_bound: f64,
    pub stable_bound: f64,
    pub unstable_bound: f64,
}

/// Constants under which a certificate's integral characterizations hold:
/// each direction integrates its exponential bound, and the neutral weight
/// is taken at twice the neutral rate so both weighted forms converge.
pub fn integral_budget_from_certificate(cert: &RateCertificate) -> Result<IntegralBudget> {
    cert.validate()?;
    Ok(IntegralBudget {
        alpha: 2.0 * cert.nu0,
        neutral_bound: cert.n0 / cert.nu0,
        stable_bound: cert.n1 / cert.nu1,
        unstable_bound: cert.n2 / cert.nu2,
    })
}

/// Outcome of sweeping one integral characterization over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralCheckResult {
    pub kind: IntegralKind,
    pub alpha: Option<f64>,
    pub bound_constant: f64,
    pub cells_checked: usize,
    pub vacuous_cells: usize,
    /// Largest integral-to-budget ratio across cells.
    pub worst_ratio: f64,
    pub worst_cell: String,
    /// Integral value at the worst cell (tail included where applicable).
    pub computed_integral: f64,
    /// Budget (bound constant times reference norm) at the worst cell.
    pub reference: f64,
    /// Quadrature error bound at the worst cell.
    pub quadrature_error: f64,
    pub tail_constant: Option<f64>,
    pub tail_rate: Option<f64>,
    pub pass: bool,
}

struct CellAccumulator {
    cells: usize,
    vacuous: usize,
    worst_ratio: f64,
    worst_cell: String,
    computed: f64,
    reference: f64,
    err: f64,
    pass: bool,
}

impl CellAccumulator {
    fn new() -> Self {
        Self {
            cells: 0,
            vacuous: 0,
            worst_ratio: f64::NEG_INFINITY,
            worst_cell: String::new(),
            computed: 0.0,
            reference: 0.0,
            err: 0.0,
            pass: true,
        }
    }

    fn vacuous(&mut self) {
        self.vacuous += 1;
    }

    fn cell(&mut self, total: f64, reference: f64, err: f64, desc: impl Fn() -> String) {
        self.cells += 1;
        if total > reference + err {
            self.pass = false;
        }
        let ratio = total / (reference + err).max(MIN_DENOM);
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
            self.worst_cell = desc();
            self.computed = total;
            self.reference = reference;
            self.err = err;
        }
    }

    fn finish(
        self,
        kind: IntegralKind,
        alpha: Option<f64>,
        bound: f64,
        tail: Option<(f64, f64)>,
    ) -> IntegralCheckResult {
        IntegralCheckResult {
            kind,
            alpha,
            bound_constant: bound,
            cells_checked: self.cells,
            vacuous_cells: self.vacuous,
            worst_ratio: if self.cells == 0 { 0.0 } else { self.worst_ratio },
            worst_cell: self.worst_cell,
            computed_integral: self.computed,
            reference: self.reference,
            quadrature_error: self.err,
            tail_constant: tail.map(|(k, _)| k),
            tail_rate: tail.map(|(_, b)| b),
            pass: self.pass,
        }
    }
}

/// Sweep one integral characterization along the forward orbit of `x0`.
///
/// Legs are rooted at the sweep's start time on the orbit of `x0` and the
/// projection family supplies the mask.  Each cell passes when its integral
/// stays within the budget plus the quadrature error bound.
#[allow(clippy::too_many_arguments)]
pub fn integral_bound(
    kind: IntegralKind,
    xi: &SkewEvolution,
    x0: &BasePoint,
    family: &ProjectionFamily,
    params: &IntegralParams,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<IntegralCheckResult> {
    grid.validate()?;
    if !(params.bound > 0.0) || !params.bound.is_finite() {
        return Err(Error::Param(format!("integral bound must be positive, got {}", params.bound)));
    }
    if !(params.quad_tol > 0.0) || !params.quad_tol.is_finite() {
        return Err(Error::Param(format!(
            "quadrature tolerance must be positive, got {}",
            params.quad_tol
        )));
    }
    let alpha = if kind.needs_alpha() {
        let a = params
            .alpha
            .ok_or_else(|| Error::Param(format!("{} needs a weight rate", kind.name())))?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Param(format!("weight rate must be positive, got {a}")));
        }
        Some(a)
    } else {
        None
    };

    // One tail fit serves every cell of the infinite-horizon kind.
    let tail = if matches!(kind, IntegralKind::StableTotal) {
        if !(params.horizon > 0.0) || !params.horizon.is_finite() {
            return Err(Error::Param(format!(
                "quadrature horizon must be positive, got {}",
                params.horizon
            )));
        }
        let beta_grid = linear_rate_grid(params.tail_beta_max, params.tail_beta_step)?;
        Some(fit_decay(
            xi,
            family,
            0.0,
            points,
            probes,
            grid,
            &beta_grid,
            params.tail_constant_cap,
        )?)
    } else {
        None
    };

    // Norm of the masked start vector carried to time tau, linear scale.
    let leg_norm = |w: &StateVector, tau: f64, start: f64| -> Result<f64> {
        let y = xi.base_evolve(tau, start, x0)?;
        let m = xi.log_multipliers(tau, start, &y)?;
        Ok(log_norm_scaled(&w.components, &m, w.norm_kind).map_or(0.0, f64::exp))
    };

    let mut acc = CellAccumulator::new();
    match kind {
        IntegralKind::NeutralWeighted => {
            let a = alpha.expect("validated above");
            for pair in grid.pairs() {
                let (t, t0) = (pair.t, pair.t0);
                for (pi, v) in probes.iter().enumerate() {
                    let w = family.apply(ProjIndex::Time(t0), v)?;
                    if w.is_zero() {
                        acc.vacuous();
                        continue;
                    }
                    let f = |tau: f64| {
                        let leg = leg_norm(&w, tau, t0)?;
                        Ok((-a * (tau - t0)).exp() * leg)
                    };
                    let (quad, err) = quadrature(f, t0, t, params.quad_tol)?;
                    let reference = params.bound * w.norm();
                    acc.cell(quad, reference, err, || format!("t={t} t0={t0} probe={pi}"));
                }
            }
        }
        IntegralKind::NeutralWeightedDual => {
            let a = alpha.expect("validated above");
            for tr in grid.triples() {
                let (t, s, t0) = (tr.t, tr.s, tr.t0);
                for (pi, v) in probes.iter().enumerate() {
                    let w = family.apply(ProjIndex::Time(t0), v)?;
                    if w.is_zero() {
                        acc.vacuous();
                        continue;
                    }
                    let f = |tau: f64| {
                        let leg = leg_norm(&w, tau, t0)?;
                        Ok((-a * (t - tau)).exp() * leg)
                    };
                    let (quad, err) = quadrature(f, s, t, params.quad_tol)?;
                    let reference = params.bound * leg_norm(&w, t, t0)?;
                    acc.cell(quad, reference, err, || format!("t={t} s={s} t0={t0} probe={pi}"));
                }
            }
        }
        IntegralKind::StableTotal => {
            let (k_tail, beta_tail) = tail.expect("fitted above");
            for &t0 in &grid.t0_values {
                for (pi, v) in probes.iter().enumerate() {
                    let w = family.apply(ProjIndex::Time(t0), v)?;
                    if w.is_zero() {
                        acc.vacuous();
                        continue;
                    }
                    let horizon_t = t0 + params.horizon;
                    let (quad, err) =
                        quadrature(|tau| leg_norm(&w, tau, t0), t0, horizon_t, params.quad_tol)?;
                    let tail_mass = k_tail * leg_norm(&w, horizon_t, t0)? / beta_tail;
                    let reference = params.bound * w.norm();
                    acc.cell(quad + tail_mass, reference, err, || format!("t0={t0} probe={pi}"));
                }
            }
        }
        IntegralKind::UnstableRatio => {
            for pair in grid.pairs() {
                let (t, t0) = (pair.t, pair.t0);
                for (pi, v) in probes.iter().enumerate() {
                    let w = family.apply(ProjIndex::Time(t0), v)?;
                    if w.is_zero() {
                        acc.vacuous();
                        continue;
                    }
                    let (quad, err) =
                        quadrature(|tau| leg_norm(&w, tau, t0), t0, t, params.quad_tol)?;
                    let reference = params.bound * leg_norm(&w, t, t0)?;
                    acc.cell(quad, reference, err, || format!("t={t} t0={t0} probe={pi}"));
                }
            }
        }
    }
    Ok(acc.finish(kind, alpha, params.bound, tail))
}

/// Fit `K e^{-beta gap}` over the `alpha_shift`-weighted leg ratios on `family`.
///
/// Constraints are harvested from doubly-evolved legs between the two later
/// times of every sampled triple at every sampled point; the largest grid rate
/// whose minimal constant stays within `constant_cap` wins.  The fit certifies
/// the sampled gaps only — tails computed from it extrapolate beyond the grid.
#[allow(clippy::too_many_arguments)]
pub fn fit_decay(
    xi: &SkewEvolution,
    family: &ProjectionFamily,
    alpha_shift: f64,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    beta_grid: &[f64],
    constant_cap: f64,
) -> Result<(f64, f64)> {
    grid.validate()?;
    if beta_grid.is_empty() {
        return Err(Error::EmptyGrid("decay-rate grid".into()));
    }
    for w in beta_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Param("decay-rate grid must increase".into()));
        }
    }
    if !(beta_grid[0] > 0.0) || !beta_grid.last().expect("nonempty").is_finite() {
        return Err(Error::Param("decay-rate grid must be positive and finite".into()));
    }
    if !(constant_cap > 1.0) || !constant_cap.is_finite() {
        return Err(Error::Param(format!("constant cap must exceed one, got {constant_cap}")));
    }
    if !(alpha_shift >= 0.0) || !alpha_shift.is_finite() {
        return Err(Error::Param(format!("weight shift must be nonnegative, got {alpha_shift}")));
    }

    let mut dir = DirectionConstraints::default();
    for x in points {
        for tr in grid.triples() {
            let gap = tr.t - tr.s;
            let ys = xi.base_evolve(tr.s, tr.t0, x)?;
            let ms = xi.log_multipliers(tr.s, tr.t0, &ys)?;
            let yt = xi.base_evolve(tr.t, tr.t0, x)?;
            let mt = xi.log_multipliers(tr.t, tr.t0, &yt)?;
            for v in probes {
                let w = family.apply(ProjIndex::Time(tr.t0), v)?;
                if w.is_zero() {
                    continue;
                }
                let s_leg = log_norm_scaled(&w.components, &ms, v.norm_kind);
                let t_leg = log_norm_scaled(&w.components, &mt, v.norm_kind);
                dir.push(gap, s_leg.map(|a| a + alpha_shift * gap), t_leg);
            }
        }
    }
    if dir.impossible {
        return Err(Error::TailUnbounded { beta: 0.0 });
    }
    for &beta in beta_grid.iter().rev() {
        let k = dir.minimal_n(beta);
        if k <= constant_cap {
            return Ok((k, beta));
        }
    }
    Err(Error::TailUnbounded { beta: beta_grid[0] })
}

pub const LABEL_CONTRACTION_STEP: &str = "contraction-step";
pub const LABEL_EXPANSION_STEP: &str = "expansion-step";
pub const LABEL_GROWTH_BOUND: &str = "growth-bound";
pub const LABEL_DECAY_BOUND: &str = "decay-bound";

/// Grids for the one-step hypothesis searches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisSearch {
    /// Candidate step gaps for the contraction and expansion factors.
    pub step_gaps: Vec<f64>,
    /// Candidate one-step factors, each strictly inside (0, 1).
    pub factor_grid: Vec<f64>,
    /// Ceiling of the growth/decay rate grid.
    pub rate_max: f64,
    /// Step of the growth/decay rate grid.
    pub rate_step: f64,
    /// Largest acceptable constant for the growth and decay bounds.
    pub constant_cap: f64,
}

impl Default for HypothesisSearch {
    fn default() -> Self {
        Self {
            step_gaps: vec![0.5, 1.0, 2.0, 5.0],
            factor_grid: vec![
                (-0.5f64).exp(),
                (-1.0f64).exp(),
                (-1.5f64).exp(),
                (-2.0f64).exp(),
            ],
            rate_max: 4.0,
            rate_step: 0.1,
            constant_cap: 1.0 + 1e-6,
        }
    }
}

impl HypothesisSearch {
    pub fn validate(&self) -> Result<()> {
        if self.step_gaps.is_empty() {
            return Err(Error::EmptyGrid("step gaps".into()));
        }
        for &g in &self.step_gaps {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Param(format!("step gaps must be positive, got {g}")));
            }
        }
        if self.factor_grid.is_empty() {
            return Err(Error::EmptyGrid("factor grid".into()));
        }
        for &c in &self.factor_grid {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Param(format!("factors must lie strictly in (0, 1), got {c}")));
            }
        }
        if !(self.rate_step > 0.0) || !(self.rate_max >= self.rate_step) {
            return Err(Error::Param(format!(
                "bad rate grid: max={}, step={}",
                self.rate_max, self.rate_step
            )));
        }
        if !(self.constant_cap > 1.0) || !self.constant_cap.is_finite() {
            return Err(Error::Param(format!(
                "constant cap must exceed one, got {}",
                self.constant_cap
            )));
        }
        Ok(())
    }
}

/// One-step constants established from sampled data.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub contraction_gap: f64,
    pub contraction_factor: f64,
    pub expansion_gap: f64,
    pub expansion_factor: f64,
    pub growth_constant: f64,
    pub growth_rate: f64,
    pub decay_constant: f64,
    pub decay_rate: f64,
    pub cells_checked: usize,
}

/// Search a fixed-gap step factor: the smallest grid factor dominating the
/// sampled one-step ratios, tie-broken toward the smallest gap.
#[allow(clippy::too_many_arguments)]
fn step_factor_search(
    xi: &SkewEvolution,
    family: &ProjectionFamily,
    invert: bool,
    gaps: &[f64],
    factors: &[f64],
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    cells: &mut usize,
) -> Result<Option<(f64, f64)>> {
    let mut best: Option<(f64, f64)> = None; // (factor, gap)
    for &gap in gaps {
        let mut attained = f64::NEG_INFINITY;
        let mut live = false;
        for x in points {
            for &t0 in &grid.t0_values {
                let y = xi.base_evolve(t0 + gap, t0, x)?;
                let m = xi.log_multipliers(t0 + gap, t0, &y)?;
                for v in probes {
                    let w = family.apply(ProjIndex::Time(t0), v)?;
                    if w.is_zero() {
                        continue;
                    }
                    *cells += 1;
                    let Some(leg) = log_norm_scaled(&w.components, &m, v.norm_kind) else {
                        continue;
                    };
                    let anchor = w.norm().ln();
                    let r = if invert { anchor - leg } else { leg - anchor };
                    if r > attained {
                        attained = r;
                    }
                    live = true;
                }
            }
        }
        let ratio = if live { attained.exp() } else { 0.0 };
        if let Some(&c) = factors.iter().find(|&&c| ratio <= c) {
            match best {
                Some((bc, _)) if bc <= c => {}
                _ => best = Some((c, gap)),
            }
        }
    }
    Ok(best.map(|(c, g)| (g, c)))
}

/// Search a two-sided exponential bound: the smallest grid rate whose minimal
/// constant over the sampled single-leg ratios stays within the cap.
#[allow(clippy::too_many_arguments)]
fn bound_rate_search(
    xi: &SkewEvolution,
    masks: [&ProjectionFamily; 2],
    invert: bool,
    rate_grid: &[f64],
    cap: f64,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    cells: &mut usize,
) -> Result<Option<(f64, f64)>> {
    let mut dir = DirectionConstraints::default();
    for x in points {
        for tr in grid.triples() {
            let gap = tr.t - tr.s;
            let ms = xi.log_multipliers(tr.s, tr.t0, x)?;
            let mt = xi.log_multipliers(tr.t, tr.t0, x)?;
            for mask in masks {
                for v in probes {
                    let w = mask.apply(ProjIndex::Time(tr.t0), v)?;
                    if w.is_zero() {
                        continue;
                    }
                    *cells += 1;
                    let s_leg = log_norm_scaled(&w.components, &ms, v.norm_kind);
                    let t_leg = log_norm_scaled(&w.components, &mt, v.norm_kind);
                    if invert {
                        dir.push(-gap, t_leg, s_leg);
                    } else {
                        dir.push(-gap, s_leg, t_leg);
                    }
                }
            }
        }
    }
    if dir.impossible {
        return Ok(None);
    }
    for &omega in rate_grid {
        let n = dir.minimal_n(omega);
        if n <= cap {
            return Ok(Some((n, omega)));
        }
    }
    Ok(None)
}

/// Establish the four one-step hypotheses from sampled data.
///
/// The first two families carry the contraction and expansion steps
/// (doubly-evolved legs at the searched gaps); the growth bound covers the
/// first and third families and the decay bound the second and fourth
/// (single legs over sampled triples).  Families must pass the four-family
/// compatibility conditions first.  Any hypothesis that cannot be
/// established is reported by name in the error.
pub fn check_integral_hypotheses(
    xi: &SkewEvolution,
    families: &[ProjectionFamily],
    search: &HypothesisSearch,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<HypothesisReport> {
    search.validate()?;
    grid.validate()?;
    if families.len() != 4 {
        return Err(Error::FamilyCount {
            regime: Regime::Four.name().into(),
            expected: 4,
            got: families.len(),
        });
    }
    let compat =
        check_compatibility(Regime::Four, families, xi, points, probes, grid, PRECHECK_TOL)?;
    if !compat.pass {
        let (condition, residual) = compat
            .residuals
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k.clone(), *v))
            .unwrap_or_default();
        return Err(Error::IncompatibleFamilies {
            regime: Regime::Four.name().into(),
            condition,
            residual,
        });
    }

    let mut gaps = search.step_gaps.clone();
    gaps.sort_by(f64::total_cmp);
    let mut factors = search.factor_grid.clone();
    factors.sort_by(f64::total_cmp);
    let rate_grid = linear_rate_grid(search.rate_max, search.rate_step)?;

    let mut cells = 0usize;
    let contraction = step_factor_search(
        xi,
        &families[0],
        false,
        &gaps,
        &factors,
        points,
        probes,
        grid,
        &mut cells,
    )?;
    let expansion = step_factor_search(
        xi,
        &families[1],
        true,
        &gaps,
        &factors,
        points,
        probes,
        grid,
        &mut cells,
    )?;
    let growth = bound_rate_search(
        xi,
        [&families[0], &families[2]],
        false,
        &rate_grid,
        search.constant_cap,
        points,
        probes,
        grid,
        &mut cells,
    )?;
    let decay = bound_rate_search(
        xi,
        [&families[1], &families[3]],
        true,
        &rate_grid,
        search.constant_cap,
        points,
        probes,
        grid,
        &mut cells,
    )?;

    let mut missing: Vec<&str> = Vec::new();
    if contraction.is_none() {
        missing.push(LABEL_CONTRACTION_STEP);
    }
    if expansion.is_none() {
        missing.push(LABEL_EXPANSION_STEP);
    }
    if growth.is_none() {
        missing.push(LABEL_GROWTH_BOUND);
    }
    if decay.is_none() {
        missing.push(LABEL_DECAY_BOUND);
    }
    if !missing.is_empty() {
        return Err(Error::HypothesisFail { missing: missing.join(", ") });
    }

    let (contraction_gap, contraction_factor) = contraction.expect("checked above");
    let (expansion_gap, expansion_factor) = expansion.expect("checked above");
    let (growth_constant, growth_rate) = growth.expect("checked above");
    let (decay_constant, decay_rate) = decay.expect("checked above");
    Ok(HypothesisReport {
        contraction_gap,
        contraction_factor,
        expansion_gap,
        expansion_factor,
        growth_constant,
        growth_rate,
        decay_constant,
        decay_rate,
        cells_checked: cells,
    })
}

/// A rate certificate assembled from the one-step hypotheses plus a weighted
/// tail fit, with the intermediate quantities preserved.
#[derive(Debug, Clone, Serialize)]
pub struct SufficiencyDerivation {
    pub certificate: RateCertificate,
    pub hypotheses: HypothesisReport,
    /// Log-factor per unit time read straight off the contraction step (negative).
    pub raw_rate_from_contraction: f64,
    /// The stable rate actually certified, with the sign corrected.
    pub corrected_nu1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tail_constant: f64,
}

/// Derive a rate certificate along the orbit of `x0` from the one-step
/// hypotheses.
///
/// Stable and unstable rates come from iterating the contraction/expansion
/// steps, their constants absorb one growth/decay window across a step gap,
/// and the neutral pair comes from fitting the `alpha`-weighted legs of the
/// third family: the neutral rate is the weight left over the fitted decay
/// when the weight dominates, and a unit rate otherwise.
#[allow(clippy::too_many_arguments)]
pub fn sufficiency_certificate(
    xi: &SkewEvolution,
    families: &[ProjectionFamily],
    alpha: f64,
    x0: &BasePoint,
    search: &HypothesisSearch,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<SufficiencyDerivation> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Param(format!("weight rate must be positive, got {alpha}")));
    }
    let hypotheses = check_integral_hypotheses(xi, families, search, points, probes, grid)?;

    let raw = hypotheses.contraction_factor.ln() / hypotheses.contraction_gap;
    let nu1 = -raw;
    let nu2 = -hypotheses.expansion_factor.ln() / hypotheses.expansion_gap;
    let n1 = hypotheses.growth_constant
        * ((hypotheses.growth_rate + nu1) * hypotheses.contraction_gap).exp();
    let n2 = hypotheses.decay_constant * (hypotheses.decay_rate * hypotheses.expansion_gap).exp();

    let beta_grid = linear_rate_grid(search.rate_max, search.rate_step)?;
    let (tail_constant, beta) = fit_decay(
        xi,
        &families[2],
        alpha,
        points,
        probes,
        grid,
        &beta_grid,
        search.constant_cap,
    )?;
    let nu0 = if alpha > beta { alpha - beta } else { 1.0 };
    let n0 = tail_constant.max(1.0) * (1.0 + 1e-9);

    let certificate = RateCertificate {
        n0,
        n1: n1.max(1.0 + 1e-9),
        n2: n2.max(1.0 + 1e-9),
        nu0,
        nu1,
        nu2,
        scope: Scope::Pointwise { x0: *x0 },
    };
    certificate.validate()?;
    Ok(SufficiencyDerivation {
        certificate,
        hypotheses,
        raw_rate_from_contraction: raw,
        corrected_nu1: nu1,
        alpha,
        beta,
        tail_constant,
    })
}
