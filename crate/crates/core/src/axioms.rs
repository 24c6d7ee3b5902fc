use serde::Serialize;

use crate::basespace::{metric_d, BasePoint, MetricParams};
use crate::cocycle::SkewEvolution;
use crate::error::{Error, Result};
use crate::semiflow::{eval_semiflow, SemiflowKind};
use crate::state::{StateVector, MIN_DENOM};
use crate::time::GridSpec;

/// The four structural laws checked on sampled data: two for the base
/// dynamics (identity at equal times, two-step composition) and two for the
/// linear layer (identity operator at equal times, two-step composition of
/// operators along the base motion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomLaw {
    BaseIdentity,
    BaseComposition,
    OperatorIdentity,
    OperatorComposition,
}

/// Worst offending sample of one law.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomWitness {
    pub t: f64,
    pub s: f64,
    pub t0: f64,
    pub base: String,
    pub probe: Option<usize>,
}

/// Outcome of sweeping one law over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub law: AxiomLaw,
    pub max_residual: f64,
    pub worst_case: Option<AxiomWitness>,
    pub cases_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

fn finish(law: AxiomLaw, max_residual: f64, worst: Option<AxiomWitness>, cases: usize, tol: f64) -> AxiomReport {
    AxiomReport {
        law,
        max_residual,
        worst_case: worst,
        cases_checked: cases,
        tolerance: tol,
        pass: max_residual <= tol,
    }
}

/// Check the base-dynamics laws over all sampled points and grid times.
/// Residuals are trajectory-space distances, so "equal" means equal as
/// trajectories, not equal bookkeeping.
pub fn check_semiflow_axioms(
    kind: SemiflowKind,
    points: &[BasePoint],
    grid: &GridSpec,
    metric: &MetricParams,
    tol: f64,
) -> Result<[AxiomReport; 2]> {
    grid.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyGrid("no base points supplied".into()));
    }

    let mut id_max = 0.0f64;
    let mut id_worst = None;
    let mut id_cases = 0;
    for x in points {
        for &t in &grid.sample_times() {
            let moved = eval_semiflow(kind, t, t, x)?;
            let (d, _) = metric_d(&moved, x, metric)?;
            id_cases += 1;
            if d > id_max {
                id_max = d;
                id_worst = Some(AxiomWitness { t, s: t, t0: t, base: x.label(), probe: None });
            }
        }
    }

    let mut comp_max = 0.0f64;
    let mut comp_worst = None;
    let mut comp_cases = 0;
    for x in points {
        for tr in grid.triples() {
            let via_s = eval_semiflow(kind, tr.t, tr.s, &eval_semiflow(kind, tr.s, tr.t0, x)?)?;
            let direct = eval_semiflow(kind, tr.t, tr.t0, x)?;
            let (d, _) = metric_d(&via_s, &direct, metric)?;
            comp_cases += 1;
            if d > comp_max {
                comp_max = d;
                comp_worst =
                    Some(AxiomWitness { t: tr.t, s: tr.s, t0: tr.t0, base: x.label(), probe: None });
            }
        }
    }

    Ok([
        finish(AxiomLaw::BaseIdentity, id_max, id_worst, id_cases, tol),
        finish(AxiomLaw::BaseComposition, comp_max, comp_worst, comp_cases, tol),
    ])
}

/// Relative deviation between two state vectors, normalized by the largest
/// scale in sight so that huge multipliers do not manufacture huge residuals.
fn relative_gap(a: &StateVector, b: &StateVector, reference: &StateVector) -> Result<f64> {
    let diff = a.sub(b)?.norm();
    let denom = a.norm().max(b.norm()).max(reference.norm()).max(MIN_DENOM);
    Ok(diff / denom)
}

/// Check the linear-layer laws over sampled points, grid times, and probes.
pub fn check_cocycle_axioms(
    xi: &SkewEvolution,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
) -> Result<[AxiomReport; 2]> {
    grid.validate()?;
    if points.is_empty() || probes.is_empty() {
        return Err(Error::EmptyGrid("no base points or probes supplied".into()));
    }

    let mut id_max = 0.0f64;
    let mut id_worst = None;
    let mut id_cases = 0;
    for x in points {
        for &t in &grid.sample_times() {
            for (pi, v) in probes.iter().enumerate() {
                let w = xi.apply(t, t, x, v)?;
                let r = relative_gap(&w, v, v)?;
                id_cases += 1;
                if r > id_max {
                    id_max = r;
                    id_worst = Some(AxiomWitness { t, s: t, t0: t, base: x.label(), probe: Some(pi) });
                }
            }
        }
    }

    let mut comp_max = 0.0f64;
    let mut comp_worst = None;
    let mut comp_cases = 0;
    for x in points {
        for tr in grid.triples() {
            let mid = xi.base_evolve(tr.s, tr.t0, x)?;
            for (pi, v) in probes.iter().enumerate() {
                let direct = xi.apply(tr.t, tr.t0, x, v)?;
                let staged = xi.apply(tr.t, tr.s, &mid, &xi.apply(tr.s, tr.t0, x, v)?)?;
                let r = relative_gap(&direct, &staged, v)?;
                comp_cases += 1;
                if r > comp_max {
                    comp_max = r;
                    comp_worst = Some(AxiomWitness {
                        t: tr.t,
                        s: tr.s,
                        t0: tr.t0,
                        base: x.label(),
                        probe: Some(pi),
                    });
                }
            }
        }
    }

    Ok([
        finish(AxiomLaw::OperatorIdentity, id_max, id_worst, id_cases, tol),
        finish(AxiomLaw::OperatorComposition, comp_max, comp_worst, comp_cases, tol),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basespace::{BaseSpace, TrajectorySpec};
    use crate::cocycle::{ComponentLaw, NeutralAnchor};
    use crate::state::{probe_set, NormKind};
    use crate::time::GridPreset;

    fn points() -> Vec<BasePoint> {
        let space =
            BaseSpace::new(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 }, true).unwrap();
        space.sample_points(&[0.0, 1.0], true).unwrap()
    }

    #[test]
    fn shift_semiflow_passes_both_laws() {
        let grid = GridPreset::Small.spec();
        let reports = check_semiflow_axioms(
            SemiflowKind::Shift,
            &points(),
            &grid,
            &MetricParams::default(),
            1e-9,
        )
        .unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
        assert_eq!(reports[0].max_residual, 0.0);
        assert_eq!(reports[1].max_residual, 0.0);
    }

    #[test]
    fn squared_advance_fails_composition_only() {
        let grid = GridPreset::Small.spec();
        let reports = check_semiflow_axioms(
            SemiflowKind::ShiftSquared,
            &points(),
            &grid,
            &MetricParams::default(),
            1e-9,
        )
        .unwrap();
        assert!(reports[0].pass);
        assert!(!reports[1].pass);
        assert!(reports[1].max_residual > 1e-3);
            }

    #[test]
    fn anchored_cocycle_passes_and_reread_anchor_fails() {
        let grid = GridPreset::Small.spec();
        let probes = probe_set(1, NormKind::L2, 7, 4).unwrap();

        let good = SkewEvolution::new(
            SemiflowKind::Shift,
            vec![ComponentLaw::Neutral { anchor: NeutralAnchor::Fixed(2.0) }],
        )
        .unwrap();
        let reports = check_cocycle_axioms(&good, &points(), &probes, &grid, 1e-9).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");

        let bad = SkewEvolution::new(
            SemiflowKind::Shift,
            vec![ComponentLaw::Neutral { anchor: NeutralAnchor::PointValue }],
        )
        .unwrap();
        let reports = check_cocycle_axioms(&bad, &points(), &probes, &grid, 1e-9).unwrap();
        assert!(reports[0].pass);
        assert!(!reports[1].pass);
        assert!(reports[1].max_residual > 0.1);
    }
}
