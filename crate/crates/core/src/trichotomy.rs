use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basespace::BasePoint;
use crate::cocycle::SkewEvolution;
use crate::error::{Error, Result};
use crate::projectors::{check_compatibility, ProjIndex, ProjectionFamily, ProjectorKind, Regime};
use crate::state::{log_norm_scaled, StateVector, LOG_CLAMP};
use crate::time::GridSpec;

/// The three complementary directions a trichotomy separates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeFamilies {
    pub neutral: ProjectionFamily,
    pub stable: ProjectionFamily,
    pub unstable: ProjectionFamily,
}

impl ThreeFamilies {
    pub fn as_slice(&self) -> [ProjectionFamily; 3] {
        [self.neutral.clone(), self.stable.clone(), self.unstable.clone()]
    }
}

/// Whether a certificate claims uniform bounds over the whole base space or
/// bounds along the forward orbit of one anchor point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum Scope {
    Global,
    Pointwise { x0: BasePoint },
}

/// Claimed exponential bounds: a constant and a rate for each direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub scope: Scope,
}

impl RateCertificate {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n0", self.n0), ("n1", self.n1), ("n2", self.n2)] {
            if !n.is_finite() || n <= 1.0 {
                return Err(Error::Param(format!("constant {name} must be finite and > 1, got {n}")));
            }
        }
        for (name, nu) in [("nu0", self.nu0), ("nu1", self.nu1), ("nu2", self.nu2)] {
            if !nu.is_finite() || nu <= 0.0 {
                return Err(Error::Param(format!("rate {name} must be finite and > 0, got {nu}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Global,
    Pointwise,
}

/// One evaluated inequality cell, for margin dumps.
#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    pub t: f64,
    pub s: f64,
    pub t0: f64,
    pub base: String,
    pub probe: usize,
    pub label: String,
    pub log_margin: f64,
}

/// Sweep outcome: the worst log-margin per inequality (None when every cell
/// of that inequality was vacuous), with witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationVerdict {
    pub mode: VerifyMode,
    pub margins: BTreeMap<String, Option<f64>>,
    pub witnesses: BTreeMap<String, String>,
    pub cells_checked: usize,
    pub vacuous_cells: usize,
    pub tolerance: f64,
    pub pass: bool,
}

pub const LABEL_NEUTRAL_LOWER: &str = "neutral-lower";
pub const LABEL_NEUTRAL_UPPER: &str = "neutral-upper";
pub const LABEL_STABLE: &str = "stable-decay";
pub const LABEL_UNSTABLE: &str = "unstable-growth";

const ALL_LABELS: [&str; 4] =
    [LABEL_NEUTRAL_LOWER, LABEL_NEUTRAL_UPPER, LABEL_STABLE, LABEL_UNSTABLE];

/// Tolerance applied to the structural prechecks that gate verification.
pub(crate) const PRECHECK_TOL: f64 = 1e-9;

pub(crate) struct MarginTracker {
    margins: BTreeMap<String, Option<f64>>,
    witnesses: BTreeMap<String, String>,
    cells: usize,
    vacuous: usize,
}

pub(crate) enum CellOutcome {
    /// Both sides vanish: the inequality says nothing here.
    Vacuous,
    /// The bounded side vanishes while the bound does not: holds trivially.
    FreePass,
    /// Finite log-margin (negative means violated by that many nats).
    Finite(f64),
    /// The bound side vanishes under a nonzero bounded side.
    Broken,
}

pub(crate) fn outcome(bound: Option<f64>, bounded: Option<f64>) -> CellOutcome {
    match (bound, bounded) {
        (None, None) => CellOutcome::Vacuous,
        (Some(_), None) => CellOutcome::FreePass,
        (None, Some(_)) => CellOutcome::Broken,
        (Some(a), Some(b)) => CellOutcome::Finite((a - b).clamp(-LOG_CLAMP, LOG_CLAMP)),
    }
}

impl MarginTracker {
    pub(crate) fn new(labels: &[&str]) -> Self {
        let mut margins = BTreeMap::new();
        let mut witnesses = BTreeMap::new();
        for l in labels {
            margins.insert(l.to_string(), None);
            witnesses.insert(l.to_string(), String::new());
        }
        Self { margins, witnesses, cells: 0, vacuous: 0 }
    }

    pub(crate) fn record(
        &mut self,
        label: &str,
        bound: Option<f64>,
        bounded: Option<f64>,
        witness: impl Fn() -> String,
        cell: impl Fn(f64) -> CellRecord,
        records: &mut Option<&mut Vec<CellRecord>>,
    ) {
        self.cells += 1;
        let margin = match outcome(bound, bounded) {
            CellOutcome::Vacuous | CellOutcome::FreePass => {
                self.vacuous += 1;
                return;
            }
            CellOutcome::Finite(m) => m,
            CellOutcome::Broken => -LOG_CLAMP,
        };
        if let Some(out) = records.as_deref_mut() {
            out.push(cell(margin));
        }
        let slot = self.margins.get_mut(label).expect("label registered");
        if slot.is_none_or(|current| margin < current) {
            *slot = Some(margin);
            self.witnesses.insert(label.to_string(), witness());
        }
    }

    pub(crate) fn finish(self, mode: VerifyMode, tol: f64) -> VerificationVerdict {
        let pass = self.margins.values().all(|m| m.is_none_or(|v| v >= -tol));
        VerificationVerdict {
            mode,
            margins: self.margins,
            witnesses: self.witnesses,
            cells_checked: self.cells,
            vacuous_cells: self.vacuous,
            tolerance: tol,
            pass,
        }
    }
}

pub(crate) fn ln_norm(v: &StateVector) -> Option<f64> {
    if v.is_zero() {
        None
    } else {
        Some(v.norm().ln())
    }
}

/// Verify a rate certificate against sampled inequalities.
///
/// Global mode bounds single evolution legs against the starting vector at
/// every sampled base point; pointwise mode compares two evolved legs rooted
/// at the certificate's anchor, with projections indexed by the start time.
/// Families must first pass the compatibility conditions of the matching
/// regime, otherwise the sweep is refused.
#[allow(clippy::too_many_arguments)]
pub fn verify_trichotomy(
    mode: VerifyMode,
    xi: &SkewEvolution,
    families: &ThreeFamilies,
    cert: &RateCertificate,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    mut records: Option<&mut Vec<CellRecord>>,
) -> Result<VerificationVerdict> {
    cert.validate()?;
    grid.validate()?;
    let x0 = match (mode, &cert.scope) {
        (VerifyMode::Global, Scope::Global) => None,
        (VerifyMode::Pointwise, Scope::Pointwise { x0 }) => Some(x0),
        (VerifyMode::Global, Scope::Pointwise { .. }) => {
            return Err(Error::ScopeMismatch { expected: "global".into(), found: "pointwise".into() })
        }
        (VerifyMode::Pointwise, Scope::Global) => {
            return Err(Error::ScopeMismatch { expected: "pointwise".into(), found: "global".into() })
        }
    };

    let regime = match mode {
        VerifyMode::Global => Regime::ThreeGlobal,
        VerifyMode::Pointwise => Regime::ThreePointwise,
    };
    let compat =
        check_compatibility(regime, &families.as_slice(), xi, points, probes, grid, PRECHECK_TOL)?;
    if !compat.pass {
        let (condition, residual) = compat
            .residuals
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k.clone(), *v))
            .unwrap_or_default();
        return Err(Error::IncompatibleFamilies { regime: regime.name().into(), condition, residual });
    }

    let mut tracker = MarginTracker::new(&ALL_LABELS);
    let ln_n0 = cert.n0.ln();
    let ln_n1 = cert.n1.ln();
    let ln_n2 = cert.n2.ln();

    match mode {
        VerifyMode::Global => {
            for x in points {
                let idx = ProjIndex::Point(x);
                for pair in grid.pairs() {
                    let (t, t0) = (pair.t, pair.t0);
                    let gap = t - t0;
                    let mults = xi.log_multipliers(t, t0, x)?;
                    for (pi, v) in probes.iter().enumerate() {
                        let w0 = families.neutral.apply(idx, v)?;
                        let w1 = families.stable.apply(idx, v)?;
                        let w2 = families.unstable.apply(idx, v)?;
                        let a0 = ln_norm(&w0);
                        let a1 = ln_norm(&w1);
                        let a2 = ln_norm(&w2);
                        let l0 = log_norm_scaled(&w0.components, &mults, v.norm_kind);
                        let l1 = log_norm_scaled(&w1.components, &mults, v.norm_kind);
                        let l2 = log_norm_scaled(&w2.components, &mults, v.norm_kind);

                        let witness = |lbl: &'static str| {
                            let base = x.label();
                            move || format!("{lbl} t={t} t0={t0} base={base} probe={pi}")
                        };
                        let cell = |label: &'static str| {
                            let base = x.label();
                            move |m: f64| CellRecord {
                                t,
                                s: t0,
                                t0,
                                base: base.clone(),
                                probe: pi,
                                label: label.into(),
                                log_margin: m,
                            }
                        };

                        // Evolved stable leg decays: L1 <= ln n1 - nu1 gap + A1.
                        tracker.record(
                            LABEL_STABLE,
                            a1.map(|a| ln_n1 - cert.nu1 * gap + a),
                            l1,
                            witness(LABEL_STABLE),
                            cell(LABEL_STABLE),
                            &mut records,
                        );
                        // Starting unstable vector is dominated by its evolved leg.
                        tracker.record(
                            LABEL_UNSTABLE,
                            l2.map(|l| ln_n2 - cert.nu2 * gap + l),
                            a2,
                            witness(LABEL_UNSTABLE),
                            cell(LABEL_UNSTABLE),
                            &mut records,
                        );
                        // Neutral leg pinched from below and above.
                        tracker.record(
                            LABEL_NEUTRAL_LOWER,
                            l0.map(|l| ln_n0 + cert.nu0 * gap + l),
                            a0,
                            witness(LABEL_NEUTRAL_LOWER),
                            cell(LABEL_NEUTRAL_LOWER),
                            &mut records,
                        );
                        tracker.record(
                            LABEL_NEUTRAL_UPPER,
                            a0.map(|a| ln_n0 + cert.nu0 * gap + a),
                            l0,
                            witness(LABEL_NEUTRAL_UPPER),
                            cell(LABEL_NEUTRAL_UPPER),
                            &mut records,
                        );
                    }
                }
            }
        }
        VerifyMode::Pointwise => {
            let x0 = x0.expect("pointwise scope carries an anchor");
            if let Some(p) = points.first() {
                if !p.same_space(x0) {
                    return Err(Error::SpaceMismatch(
                        "certificate anchor lies outside the sampled space".into(),
                    ));
                }
            }
            for tr in grid.triples() {
                let (t, s, t0) = (tr.t, tr.s, tr.t0);
                let gap = t - s;
                let idx = ProjIndex::Time(t0);
                let leg_s = xi.log_multipliers(s, t0, &xi.base_evolve(s, t0, x0)?)?;
                let leg_t = xi.log_multipliers(t, t0, &xi.base_evolve(t, t0, x0)?)?;
                for (pi, v) in probes.iter().enumerate() {
                    let w0 = families.neutral.apply(idx, v)?;
                    let w1 = families.stable.apply(idx, v)?;
                    let w2 = families.unstable.apply(idx, v)?;
                    let s0 = log_norm_scaled(&w0.components, &leg_s, v.norm_kind);
                    let s1 = log_norm_scaled(&w1.components, &leg_s, v.norm_kind);
                    let s2 = log_norm_scaled(&w2.components, &leg_s, v.norm_kind);
                    let t0n = log_norm_scaled(&w0.components, &leg_t, v.norm_kind);
                    let t1n = log_norm_scaled(&w1.components, &leg_t, v.norm_kind);
                    let t2n = log_norm_scaled(&w2.components, &leg_t, v.norm_kind);

                    let witness = |lbl: &'static str| {
                        move || format!("{lbl} t={t} s={s} t0={t0} probe={pi}")
                    };
                    let cell = |label: &'static str| {
                        move |m: f64| CellRecord {
                            t,
                            s,
                            t0,
                            base: "anchor".into(),
                            probe: pi,
                            label: label.into(),
                            log_margin: m,
                        }
                    };

                    // Later stable leg decays relative to the earlier one.
                    tracker.record(
                        LABEL_STABLE,
                        s1.map(|a| ln_n1 - cert.nu1 * gap + a),
                        t1n,
                        witness(LABEL_STABLE),
                        cell(LABEL_STABLE),
                        &mut records,
                    );
                    // Earlier unstable leg is dominated by the later one.
                    tracker.record(
                        LABEL_UNSTABLE,
                        t2n.map(|a| ln_n2 - cert.nu2 * gap + a),
                        s2,
                        witness(LABEL_UNSTABLE),
                        cell(LABEL_UNSTABLE),
                        &mut records,
                    );
                    // Neutral legs pinched in both directions.
                    tracker.record(
                        LABEL_NEUTRAL_LOWER,
                        t0n.map(|a| ln_n0 + cert.nu0 * gap + a),
                        s0,
                        witness(LABEL_NEUTRAL_LOWER),
                        cell(LABEL_NEUTRAL_LOWER),
                        &mut records,
                    );
                    tracker.record(
                        LABEL_NEUTRAL_UPPER,
                        s0.map(|a| ln_n0 + cert.nu0 * gap + a),
                        t0n,
                        witness(LABEL_NEUTRAL_UPPER),
                        cell(LABEL_NEUTRAL_UPPER),
                        &mut records,
                    );
                }
            }
        }
    }

    Ok(tracker.finish(mode, tol))
}

/// Estimation target: uniform bounds over sampled points, or bounds along one
/// anchor's orbit.
#[derive(Debug, Clone, Copy)]
pub enum EstimateMode<'a> {
    Global,
    Pointwise(&'a BasePoint),
}

/// Result of a rate search: a certificate, or the direction that admitted none.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EstimateOutcome {
    Certificate { certificate: RateCertificate },
    NoCertificate { direction: String, detail: String },
}

/// Linear constraint `ln N >= coef * nu + rhs` harvested from one cell.
#[derive(Debug, Clone, Copy)]
struct RateConstraint {
    coef: f64,
    rhs: f64,
}

#[derive(Debug, Default)]
pub(crate) struct DirectionConstraints {
    constraints: Vec<RateConstraint>,
    pub(crate) impossible: bool,
}

impl DirectionConstraints {
    pub(crate) fn push(&mut self, coef: f64, bound_base: Option<f64>, bounded: Option<f64>) {
        match (bound_base, bounded) {
            (None, None) => {}
            (Some(_), None) => {}
            (None, Some(_)) => self.impossible = true,
            (Some(a), Some(b)) => self.constraints.push(RateConstraint { coef, rhs: b - a }),
        }
    }

    /// Minimal admissible constant at rate `nu`, inflated so the certificate
    /// strictly dominates the data.
    pub(crate) fn minimal_n(&self, nu: f64) -> f64 {
        let sup = self
            .constraints
            .iter()
            .map(|c| c.coef * nu + c.rhs)
            .fold(0.0f64, f64::max);
        sup.exp() * (1.0 + 1e-9)
    }
}

pub(crate) fn pick_rate(dir: &DirectionConstraints, nu_grid: &[f64], n_cap: f64) -> Option<(f64, f64)> {
    if dir.impossible {
        return None;
    }
    for &nu in nu_grid.iter().rev() {
        let n = dir.minimal_n(nu);
        if n <= n_cap {
            return Some((nu, n));
        }
    }
    None
}

/// Ascending rate grid `step, 2 step, ..., <= max`.
pub fn linear_rate_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= step) || !max.is_finite() {
        return Err(Error::Param(format!("bad rate grid: max={max}, step={step}")));
    }
    let count = (max / step + 1e-9).floor() as usize;
    Ok((1..=count).map(|k| k as f64 * step).collect())
}

/// Collected inequality data for all three directions.
struct Harvest {
    neutral: DirectionConstraints,
    stable: DirectionConstraints,
    unstable: DirectionConstraints,
}

fn harvest_constraints(
    xi: &SkewEvolution,
    families: &ThreeFamilies,
    mode: EstimateMode<'_>,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<Harvest> {
    let mut h = Harvest {
        neutral: DirectionConstraints::default(),
        stable: DirectionConstraints::default(),
        unstable: DirectionConstraints::default(),
    };
    match mode {
        EstimateMode::Global => {
            for x in points {
                let idx = ProjIndex::Point(x);
                for pair in grid.pairs() {
                    let (t, t0) = (pair.t, pair.t0);
                    let gap = t - t0;
                    let mults = xi.log_multipliers(t, t0, x)?;
                    for v in probes {
                        let w0 = families.neutral.apply(idx, v)?;
                        let w1 = families.stable.apply(idx, v)?;
                        let w2 = families.unstable.apply(idx, v)?;
                        let a0 = ln_norm(&w0);
                        let a1 = ln_norm(&w1);
                        let a2 = ln_norm(&w2);
                        let l0 = log_norm_scaled(&w0.components, &mults, v.norm_kind);
                        let l1 = log_norm_scaled(&w1.components, &mults, v.norm_kind);
                        let l2 = log_norm_scaled(&w2.components, &mults, v.norm_kind);
                        // ln N1 >= nu1 gap + (L1 - A1)
                        h.stable.push(gap, a1, l1.map(|l| l - 0.0));
                        // ln N2 >= nu2 gap + (A2 - L2)
                        h.unstable.push(gap, l2, a2);
                        // ln N0 >= -nu0 gap + |A0 - L0|
                        h.neutral.push(-gap, l0, a0);
                        h.neutral.push(-gap, a0, l0);
                    }
                }
            }
        }
        EstimateMode::Pointwise(x0) => {
            for tr in grid.triples() {
                let (t, s, t0) = (tr.t, tr.s, tr.t0);
                let gap = t - s;
                let idx = ProjIndex::Time(t0);
                let leg_s = xi.log_multipliers(s, t0, &xi.base_evolve(s, t0, x0)?)?;
                let leg_t = xi.log_multipliers(t, t0, &xi.base_evolve(t, t0, x0)?)?;
                for v in probes {
                    let w0 = families.neutral.apply(idx, v)?;
                    let w1 = families.stable.apply(idx, v)?;
                    let w2 = families.unstable.apply(idx, v)?;
                    let s0 = log_norm_scaled(&w0.components, &leg_s, v.norm_kind);
                    let s1 = log_norm_scaled(&w1.components, &leg_s, v.norm_kind);
                    let s2 = log_norm_scaled(&w2.components, &leg_s, v.norm_kind);
                    let t0n = log_norm_scaled(&w0.components, &leg_t, v.norm_kind);
                    let t1n = log_norm_scaled(&w1.components, &leg_t, v.norm_kind);
                    let t2n = log_norm_scaled(&w2.components, &leg_t, v.norm_kind);
                    h.stable.push(gap, s1, t1n);
                    h.unstable.push(gap, t2n, s2);
                    h.neutral.push(-gap, t0n, s0);
                    h.neutral.push(-gap, s0, t0n);
                }
            }
        }
    }
    Ok(h)
}

/// Search the rate grid for the weakest certificate the sampled data supports:
/// per direction, the largest rate whose minimal constant stays within `n_cap`.
/// Directions whose projections vanish everywhere impose no constraints and
/// receive the grid's largest rate with the minimal constant.
#[allow(clippy::too_many_arguments)]
pub fn estimate_rate_constants(
    xi: &SkewEvolution,
    families: &ThreeFamilies,
    mode: EstimateMode<'_>,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    nu_grid: &[f64],
    n_cap: f64,
) -> Result<EstimateOutcome> {
    grid.validate()?;
    if nu_grid.is_empty() {
        return Err(Error::EmptyGrid("rate grid is empty".into()));
    }
    if nu_grid.windows(2).any(|w| w[0] >= w[1]) || nu_grid[0] <= 0.0 {
        return Err(Error::Param("rate grid must be positive and strictly increasing".into()));
    }
    if !(n_cap > 1.0) {
        return Err(Error::Param(format!("constant cap must exceed 1, got {n_cap}")));
    }
    let h = harvest_constraints(xi, families, mode, points, probes, grid)?;

    let missing = |direction: &str| EstimateOutcome::NoCertificate {
        direction: direction.into(),
        detail: format!("no rate in the grid keeps the constant within {n_cap}"),
    };
    let Some((nu1, n1)) = pick_rate(&h.stable, nu_grid, n_cap) else {
        return Ok(missing("stable"));
    };
    let Some((nu2, n2)) = pick_rate(&h.unstable, nu_grid, n_cap) else {
        return Ok(missing("unstable"));
    };
    let Some((nu0, n0)) = pick_rate(&h.neutral, nu_grid, n_cap) else {
        return Ok(missing("neutral"));
    };
    let scope = match mode {
        EstimateMode::Global => Scope::Global,
        EstimateMode::Pointwise(x0) => Scope::Pointwise { x0: *x0 },
    };
    Ok(EstimateOutcome::Certificate {
        certificate: RateCertificate { n0, n1, n2, nu0, nu1, nu2, scope },
    })
}

/// Collapsed regimes obtained by zeroing directions of a three-way splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCaseKind {
    /// No neutral direction: stable becomes the complement of unstable.
    Dichotomy,
    /// Everything decays: stable swallows the whole space.
    Stability,
}

/// Derive the projection families of a degenerate special case from a
/// three-way family set.
pub fn derive_special_case(kind: SpecialCaseKind, families: &ThreeFamilies) -> ThreeFamilies {
    let zero_like = |f: &ProjectionFamily, label: &str| ProjectionFamily {
        label: label.into(),
        indexing: f.indexing,
        kind: ProjectorKind::Zero,
        dim: f.dim,
    };
    match kind {
        SpecialCaseKind::Dichotomy => ThreeFamilies {
            neutral: zero_like(&families.neutral, "zero"),
            stable: families.unstable.complement(),
            unstable: families.unstable.clone(),
        },
        SpecialCaseKind::Stability => ThreeFamilies {
            neutral: zero_like(&families.neutral, "zero"),
            stable: ProjectionFamily {
                label: "identity".into(),
                indexing: families.stable.indexing,
                kind: ProjectorKind::Identity,
                dim: families.stable.dim,
            },
            unstable: zero_like(&families.unstable, "zero"),
        },
    }
}

/// One member of a family of per-point systems sharing a state space.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub id: String,
    pub xi: SkewEvolution,
    pub families: ThreeFamilies,
    pub x0: BasePoint,
    pub points: Vec<BasePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberRate {
    pub id: String,
    pub nu1: f64,
    pub n1: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    pub member: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformCapRow {
    pub n_cap: f64,
    pub admissible: bool,
}

/// Evidence that per-point certificates exist while their rates sink below
/// every threshold, so no uniform certificate at the strongest witnessed rate
/// stays affordable.
#[derive(Debug, Clone, Serialize)]
pub struct FalsificationReport {
    pub member_rates: Vec<MemberRate>,
    pub strictly_decreasing: bool,
    pub thresholds: Vec<ThresholdHit>,
    pub per_point_all_certified: bool,
    pub uniform_rate: f64,
    /// Minimal constant making one certificate at `uniform_rate` cover every
    /// member simultaneously.
    pub uniform_minimal_n: f64,
    pub uniform_caps: Vec<UniformCapRow>,
    /// Ratio of the uniform constant to the strongest member's own constant.
    pub escalation_factor: f64,
    pub conclusion: bool,
}

/// Minimal constant for one shared certificate at stable/unstable rate `nu`
/// (neutral rate fixed at 1) covering every member's sampled cells.
pub fn uniform_certificate_minimal_n(
    members: &[FamilyMember],
    nu: f64,
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<f64> {
    let mut worst = 1.0f64 + 1e-9;
    for m in members {
        let h = harvest_constraints(
            &m.xi,
            &m.families,
            EstimateMode::Pointwise(&m.x0),
            &m.points,
            probes,
            grid,
        )?;
        if h.stable.impossible || h.unstable.impossible || h.neutral.impossible {
            return Err(Error::Param(format!("member {} admits no finite constant", m.id)));
        }
        worst = worst
            .max(h.stable.minimal_n(nu))
            .max(h.unstable.minimal_n(nu))
            .max(h.neutral.minimal_n(1.0));
    }
    Ok(worst)
}

/// Per-member rate estimation plus a uniform-certificate search showing that
/// individual certifiability does not produce a shared certificate: member
/// rates undercut every threshold while the uniform constant escalates.
#[allow(clippy::too_many_arguments)]
pub fn falsify_global(
    members: &[FamilyMember],
    thresholds: &[f64],
    probes: &[StateVector],
    grid: &GridSpec,
    nu_grid: &[f64],
    n_cap_tight: f64,
    uniform_caps: &[f64],
    tol: f64,
) -> Result<FalsificationReport> {
    if members.is_empty() {
        return Err(Error::EmptyGrid("no family members supplied".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::EmptyGrid("no thresholds supplied".into()));
    }
    let mut member_rates = Vec::with_capacity(members.len());
    for m in members {
        let outcome = estimate_rate_constants(
            &m.xi,
            &m.families,
            EstimateMode::Pointwise(&m.x0),
            &m.points,
            probes,
            grid,
            nu_grid,
            n_cap_tight,
        )?;
        match outcome {
            EstimateOutcome::Certificate { certificate } => {
                let verdict = verify_trichotomy(
                    VerifyMode::Pointwise,
                    &m.xi,
                    &m.families,
                    &certificate,
                    &m.points,
                    probes,
                    grid,
                    tol,
                    None,
                )?;
                member_rates.push(MemberRate {
                    id: m.id.clone(),
                    nu1: certificate.nu1,
                    n1: certificate.n1,
                    certified: verdict.pass,
                });
            }
            EstimateOutcome::NoCertificate { .. } => {
                member_rates.push(MemberRate { id: m.id.clone(), nu1: 0.0, n1: f64::NAN, certified: false });
            }
        }
    }

    let strictly_decreasing = member_rates.windows(2).all(|w| w[0].nu1 > w[1].nu1);
    let hits: Vec<ThresholdHit> = thresholds
        .iter()
        .map(|&threshold| ThresholdHit {
            threshold,
            member: member_rates.iter().find(|r| r.certified && r.nu1 < threshold).map(|r| r.id.clone()),
        })
        .collect();
    let per_point_all_certified = member_rates.iter().all(|r| r.certified);

    let uniform_rate = member_rates[0].nu1;
    let uniform_minimal_n = uniform_certificate_minimal_n(members, uniform_rate, probes, grid)?;
    let caps: Vec<UniformCapRow> = uniform_caps
        .iter()
        .map(|&n_cap| UniformCapRow { n_cap, admissible: uniform_minimal_n <= n_cap })
        .collect();
    let escalation_factor = uniform_minimal_n / member_rates[0].n1;

    let conclusion = per_point_all_certified && hits.iter().all(|h| h.member.is_some());
    Ok(FalsificationReport {
        member_rates,
        strictly_decreasing,
        thresholds: hits,
        per_point_all_certified,
        uniform_rate,
        uniform_minimal_n,
        uniform_caps: caps,
        escalation_factor,
        conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basespace::{BaseSpace, TrajectorySpec};
    use crate::cocycle::{ComponentLaw, NeutralAnchor};
    use crate::projectors::Indexing;
    use crate::semiflow::SemiflowKind;
    use crate::state::{probe_set, NormKind};
    use crate::time::GridPreset;

    fn space() -> BaseSpace {
        BaseSpace::new(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 }, true).unwrap()
    }

    fn xi() -> SkewEvolution {
        SkewEvolution::new(
            SemiflowKind::Shift,
            vec![
                ComponentLaw::Stable { mu: 3.0 },
                ComponentLaw::Growth,
                ComponentLaw::Neutral { anchor: NeutralAnchor::Fixed(2.0) },
            ],
        )
        .unwrap()
    }

    fn coord_family(label: &str, indexing: Indexing, coords: Vec<usize>) -> ProjectionFamily {
        ProjectionFamily::new(label, indexing, ProjectorKind::Coordinates { coords }, 3).unwrap()
    }

    fn point_families() -> ThreeFamilies {
        ThreeFamilies {
            neutral: coord_family("neutral", Indexing::ByBasePoint, vec![2]),
            stable: coord_family("stable", Indexing::ByBasePoint, vec![0]),
            unstable: coord_family("unstable", Indexing::ByBasePoint, vec![1]),
        }
    }

    fn time_families() -> ThreeFamilies {
        ThreeFamilies {
            neutral: coord_family("neutral", Indexing::ByTime, vec![2]),
            stable: coord_family("stable", Indexing::ByTime, vec![0]),
            unstable: coord_family("unstable", Indexing::ByTime, vec![1]),
        }
    }

    fn analytic_cert() -> RateCertificate {
        RateCertificate {
            n0: 1.0 + 1e-9,
            n1: 1.0 + 1e-9,
            n2: 1.0 + 1e-9,
            nu0: 2.0,
            nu1: 1.0,
            nu2: 1.0,
            scope: Scope::Global,
        }
    }

    #[test]
    fn global_verification_accepts_the_analytic_certificate() {
        let points = space().sample_points(&[0.0, 0.5, 1.0, 2.0, 5.0], true).unwrap();
        let probes = probe_set(3, NormKind::L2, 7, 8).unwrap();
        let grid = GridPreset::Default.spec();
        let mut records = Vec::new();
        let verdict = verify_trichotomy(
            VerifyMode::Global,
            &xi(),
            &point_families(),
            &analytic_cert(),
            &points,
            &probes,
            &grid,
            1e-9,
            Some(&mut records),
        )
        .unwrap();
        assert!(verdict.pass, "{verdict:?}");
        assert!(!records.is_empty());
        for label in ALL_LABELS {
            let worst = verdict.margins[label].expect("direction exercised");
            assert!(worst >= -1e-9, "{label}: {worst}");
        }
    }

    #[test]
    fn verification_rejects_wrong_scope_and_incompatible_families() {
        let points = space().sample_points(&[0.0, 1.0], true).unwrap();
        let probes = probe_set(3, NormKind::L2, 7, 4).unwrap();
        let grid = GridPreset::Small.spec();

        let err = verify_trichotomy(
            VerifyMode::Pointwise,
            &xi(),
            &time_families(),
            &analytic_cert(),
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScopeMismatch { .. }));

        // Overlapping families break the partition precondition.
        let bad = ThreeFamilies {
            neutral: coord_family("neutral", Indexing::ByBasePoint, vec![2]),
            stable: coord_family("stable", Indexing::ByBasePoint, vec![0, 2]),
            unstable: coord_family("unstable", Indexing::ByBasePoint, vec![1]),
        };
        let err = verify_trichotomy(
            VerifyMode::Global,
            &xi(),
            &bad,
            &analytic_cert(),
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::IncompatibleFamilies { .. }));
    }

    #[test]
    fn too_strong_stable_rate_fails_with_unit_constant() {
        let points = space().sample_points(&[0.0, 1.0], true).unwrap();
        let probes = probe_set(3, NormKind::L2, 7, 4).unwrap();
        let grid = GridPreset::Default.spec();
        let mut cert = analytic_cert();
        cert.nu1 = 2.5; // decay is only e^{-2 gap} at the unshifted point
        let verdict = verify_trichotomy(
            VerifyMode::Global,
            &xi(),
            &point_families(),
            &cert,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )
        .unwrap();
        assert!(!verdict.pass);
        assert!(verdict.margins[LABEL_STABLE].unwrap() < -1.0);
    }

    #[test]
    fn global_estimation_matches_hand_derived_rates_on_the_default_grid() {
        let points = space().sample_points(&[0.0, 0.5, 1.0, 2.0, 5.0], true).unwrap();
        let probes = probe_set(3, NormKind::L2, 7, 8).unwrap();
        let grid = GridPreset::Default.spec();
        let nu_grid = linear_rate_grid(2.0, 0.1).unwrap();
        let outcome = estimate_rate_constants(
            &xi(),
            &point_families(),
            EstimateMode::Global,
            &points,
            &probes,
            &grid,
            &nu_grid,
            1.0 + 1e-6,
        )
        .unwrap();
        let EstimateOutcome::Certificate { certificate } = outcome else {
            panic!("expected a certificate");
        };
        // Smallest positive gap sampled is 0.5, which admits rates up to
        // 2 - (1 - e^{-1/2})/(1/2) ~ 1.213 in the stable direction.
        assert!((certificate.nu1 - 1.2).abs() < 1e-12, "nu1={}", certificate.nu1);
        assert!((certificate.nu2 - 1.0).abs() < 1e-12, "nu2={}", certificate.nu2);
        assert!((certificate.nu0 - 2.0).abs() < 1e-12, "nu0={}", certificate.nu0);
        assert!(certificate.n1 <= 1.0 + 1e-6);

        // Round trip: the estimated certificate verifies on the same grid.
        let verdict = verify_trichotomy(
            VerifyMode::Global,
            &xi(),
            &point_families(),
            &certificate,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )
        .unwrap();
        assert!(verdict.pass, "{verdict:?}");
    }

    #[test]
    fn estimation_reports_the_failing_direction() {
        let points = space().sample_points(&[0.0], false).unwrap();
        let probes = probe_set(3, NormKind::L2, 7, 2).unwrap();
        let grid = GridPreset::Small.spec();
        // Swapping stable and unstable makes the stable direction grow, so no
        // positive rate with a tight constant can certify it.
        let swapped = ThreeFamilies {
            neutral: coord_family("neutral", Indexing::ByBasePoint, vec![2]),
            stable: coord_family("stable", Indexing::ByBasePoint, vec![1]),
            unstable: coord_family("unstable", Indexing::ByBasePoint, vec![0]),
        };
        let outcome = estimate_rate_constants(
            &xi(),
            &swapped,
            EstimateMode::Global,
            &points,
            &probes,
            &grid,
            &linear_rate_grid(2.0, 0.1).unwrap(),
            1.0 + 1e-6,
        )
        .unwrap();
        assert!(matches!(
            outcome,
            EstimateOutcome::NoCertificate { ref direction, .. } if direction == "stable"
        ));
    }

    #[test]
    fn zero_directions_are_vacuous_and_get_the_weakest_rate() {
        let growth_only =
            SkewEvolution::new(SemiflowKind::Shift, vec![ComponentLaw::Growth]).unwrap();
        let fams = ThreeFamilies {
            neutral: ProjectionFamily::new("zero0", Indexing::ByBasePoint, ProjectorKind::Zero, 1).unwrap(),
            stable: ProjectionFamily::new("zero1", Indexing::ByBasePoint, ProjectorKind::Zero, 1).unwrap(),
            unstable: ProjectionFamily::new("all", Indexing::ByBasePoint, ProjectorKind::Identity, 1)
                .unwrap(),
        };
        let points = space().sample_points(&[0.0, 1.0], true).unwrap();
        let probes = probe_set(1, NormKind::L2, 7, 2).unwrap();
        let grid = GridPreset::Small.spec();
        let outcome = estimate_rate_constants(
            &growth_only,
            &fams,
            EstimateMode::Global,
            &points,
            &probes,
            &grid,
            &linear_rate_grid(2.0, 0.1).unwrap(),
            1.0 + 1e-6,
        )
        .unwrap();
        let EstimateOutcome::Certificate { certificate } = outcome else {
            panic!("expected a certificate");
        };
        assert_eq!(certificate.nu1, 2.0);
        assert_eq!(certificate.nu0, 2.0);
        assert_eq!(certificate.nu2, 1.0);

        let verdict = verify_trichotomy(
            VerifyMode::Global,
            &growth_only,
            &fams,
            &certificate,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )
        .unwrap();
        assert!(verdict.pass);
        assert!(verdict.margins[LABEL_STABLE].is_none());
        assert!(verdict.vacuous_cells > 0);
    }

    #[test]
    fn special_cases_collapse_families() {
        let derived = derive_special_case(SpecialCaseKind::Dichotomy, &point_families());
        assert_eq!(derived.neutral.kind, ProjectorKind::Zero);
        assert_eq!(derived.stable.kind, ProjectorKind::Coordinates { coords: vec![0, 2] });
        let derived = derive_special_case(SpecialCaseKind::Stability, &point_families());
        assert_eq!(derived.stable.kind, ProjectorKind::Identity);
        assert_eq!(derived.unstable.kind, ProjectorKind::Zero);
    }
}
