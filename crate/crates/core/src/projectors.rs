use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basespace::{BasePoint, PointPosition};
use crate::cocycle::SkewEvolution;
use crate::error::{Error, Result};
use crate::state::{StateVector, MIN_DENOM};
use crate::time::GridSpec;

/// Shape of an individual projector in a family. All built-in projectors are
/// coordinate masks, which keeps their algebra exact in floating point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectorKind {
    Zero,
    Identity,
    /// Keep exactly the listed coordinates (0-based, strictly increasing).
    Coordinates { coords: Vec<usize> },
    /// Keep `even` coordinates when the index parameter has even integer
    /// part, `odd` otherwise. Deliberately non-invariant; diagnostic.
    AlternatingByIntegerPart { even: Vec<usize>, odd: Vec<usize> },
}

/// What a family is indexed by: one projector per base point, or one per time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    ByBasePoint,
    ByTime,
}

/// Index value at which a family member is selected.
#[derive(Debug, Clone, Copy)]
pub enum ProjIndex<'a> {
    Time(f64),
    Point(&'a BasePoint),
}

/// A parameterized family of diagonal projectors on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFamily {
    pub label: String,
    pub indexing: Indexing,
    pub kind: ProjectorKind,
    pub dim: usize,
}

impl ProjectionFamily {
    pub fn new(label: impl Into<String>, indexing: Indexing, kind: ProjectorKind, dim: usize) -> Result<Self> {
        let family = Self { label: label.into(), indexing, kind, dim };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Param("projection family dimension must be >= 1".into()));
        }
        let check_coords = |coords: &[usize]| -> Result<()> {
            if coords.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Param(format!(
                    "coordinates of '{}' must be strictly increasing",
                    self.label
                )));
            }
            if coords.iter().any(|c| *c >= self.dim) {
                return Err(Error::Param(format!(
                    "coordinate out of range in '{}' (dim {})",
                    self.label, self.dim
                )));
            }
            Ok(())
        };
        match &self.kind {
            ProjectorKind::Coordinates { coords } => check_coords(coords),
            ProjectorKind::AlternatingByIntegerPart { even, odd } => {
                check_coords(even)?;
                check_coords(odd)
            }
            _ => Ok(()),
        }
    }

    fn index_parameter(&self, index: ProjIndex<'_>) -> Result<f64> {
        match (self.indexing, index) {
            (Indexing::ByTime, ProjIndex::Time(t)) => Ok(t),
            (Indexing::ByBasePoint, ProjIndex::Point(p)) => Ok(match p.position {
                PointPosition::Shift { shift } => shift,
                PointPosition::Limit => 0.0,
            }),
            (Indexing::ByTime, ProjIndex::Point(_)) => {
                Err(Error::IndexKind { label: self.label.clone(), expected: "time".into() })
            }
            (Indexing::ByBasePoint, ProjIndex::Time(_)) => {
                Err(Error::IndexKind { label: self.label.clone(), expected: "base-point".into() })
            }
        }
    }

    /// Coordinate mask of the member selected by `index`.
    pub fn mask_at(&self, index: ProjIndex<'_>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.dim];
        match &self.kind {
            ProjectorKind::Zero => {}
            ProjectorKind::Identity => mask.iter_mut().for_each(|m| *m = true),
            ProjectorKind::Coordinates { coords } => {
                for &c in coords {
                    mask[c] = true;
                }
            }
            ProjectorKind::AlternatingByIntegerPart { even, odd } => {
                let param = self.index_parameter(index)?;
                let coords = if (param.floor() as i64).rem_euclid(2) == 0 { even } else { odd };
                for &c in coords {
                    mask[c] = true;
                }
            }
        }
        // Constant masks still verify that the index kind matches, so misuse
        // is caught even where it would not change the answer.
        if !matches!(self.kind, ProjectorKind::AlternatingByIntegerPart { .. }) {
            self.index_parameter(index)?;
        }
        Ok(mask)
    }

    /// Apply the member selected by `index` to `v`.
    pub fn apply(&self, index: ProjIndex<'_>, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: v.dim() });
        }
        let mask = self.mask_at(index)?;
        let components = v
            .components
            .iter()
            .zip(&mask)
            .map(|(c, keep)| if *keep { *c } else { 0.0 })
            .collect();
        Ok(StateVector { components, norm_kind: v.norm_kind })
    }

    /// The pointwise complement `I - P`, formed eagerly on the mask shape.
    pub fn complement(&self) -> ProjectionFamily {
        let kind = match &self.kind {
            ProjectorKind::Zero => ProjectorKind::Identity,
            ProjectorKind::Identity => ProjectorKind::Zero,
            ProjectorKind::Coordinates { coords } => ProjectorKind::Coordinates {
                coords: (0..self.dim).filter(|c| !coords.contains(c)).collect(),
            },
            ProjectorKind::AlternatingByIntegerPart { even, odd } => {
                ProjectorKind::AlternatingByIntegerPart {
                    even: (0..self.dim).filter(|c| !even.contains(c)).collect(),
                    odd: (0..self.dim).filter(|c| !odd.contains(c)).collect(),
                }
            }
        };
        ProjectionFamily {
            label: format!("compl_{}", self.label),
            indexing: self.indexing,
            kind,
            dim: self.dim,
        }
    }

    /// Product family `self ∘ other` for index-constant masks.
    pub fn intersection(&self, other: &ProjectionFamily) -> Result<ProjectionFamily> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let coords_of = |kind: &ProjectorKind| -> Result<Vec<usize>> {
            Ok(match kind {
                ProjectorKind::Zero => vec![],
                ProjectorKind::Identity => (0..self.dim).collect(),
                ProjectorKind::Coordinates { coords } => coords.clone(),
                ProjectorKind::AlternatingByIntegerPart { .. } => {
                    return Err(Error::Param(
                        "intersection of index-varying projectors is not supported".into(),
                    ))
                }
            })
        };
        let a = coords_of(&self.kind)?;
        let b = coords_of(&other.kind)?;
        let coords: Vec<usize> = a.into_iter().filter(|c| b.contains(c)).collect();
        let kind = if coords.is_empty() {
            ProjectorKind::Zero
        } else if coords.len() == self.dim {
            ProjectorKind::Identity
        } else {
            ProjectorKind::Coordinates { coords }
        };
        Ok(ProjectionFamily {
            label: format!("{}_and_{}", self.label, other.label),
            indexing: self.indexing,
            kind,
            dim: self.dim,
        })
    }
}

/// Compatibility regime: which structural conditions a set of families must
/// satisfy before it can drive a verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Three point-indexed families: partition of the identity plus
    /// invariance along the evolution.
    ThreeGlobal,
    /// Three time-indexed families: partition, invariance along evolved
    /// trajectories, and orthogonal splitting of norms.
    ThreePointwise,
    /// Two time-indexed families: mutual annihilation, three norm splits,
    /// and invariance.
    Two,
    /// Four time-indexed families: two complementary pairs with annihilation,
    /// commutation, norm splits, and invariance.
    Four,
}

impl Regime {
    pub fn family_count(self) -> usize {
        match self {
            Regime::ThreeGlobal | Regime::ThreePointwise => 3,
            Regime::Two => 2,
            Regime::Four => 4,
        }
    }

    pub fn expected_indexing(self) -> Indexing {
        match self {
            Regime::ThreeGlobal => Indexing::ByBasePoint,
            _ => Indexing::ByTime,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::ThreeGlobal => "three-global",
            Regime::ThreePointwise => "three-pointwise",
            Regime::Two => "two",
            Regime::Four => "four",
        }
    }
}

/// Residuals of every condition in a regime, with the worst witness per condition.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub regime: Regime,
    pub residuals: BTreeMap<String, f64>,
    pub worst: BTreeMap<String, String>,
    pub cases_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

struct ConditionTracker {
    residuals: BTreeMap<String, f64>,
    worst: BTreeMap<String, String>,
    cases: usize,
}

impl ConditionTracker {
    fn new(labels: &[&str]) -> Self {
        let mut residuals = BTreeMap::new();
        let mut worst = BTreeMap::new();
        for l in labels {
            residuals.insert((*l).to_string(), 0.0);
            worst.insert((*l).to_string(), String::new());
        }
        Self { residuals, worst, cases: 0 }
    }

    fn record(&mut self, label: &str, residual: f64, witness: impl Fn() -> String) {
        self.cases += 1;
        let slot = self.residuals.get_mut(label).expect("condition label registered");
        if residual > *slot {
            *slot = residual;
            self.worst.insert(label.to_string(), witness());
        }
    }

    fn finish(self, regime: Regime, tol: f64) -> CompatibilityReport {
        let pass = self.residuals.values().all(|r| *r <= tol);
        CompatibilityReport {
            regime,
            residuals: self.residuals,
            worst: self.worst,
            cases_checked: self.cases,
            tolerance: tol,
            pass,
        }
    }
}

fn relative_gap(a: &StateVector, b: &StateVector, reference: &StateVector) -> Result<f64> {
    let diff = a.sub(b)?.norm();
    Ok(diff / a.norm().max(b.norm()).max(reference.norm()).max(MIN_DENOM))
}

/// Worst relative invariance defect of one point-indexed family: projecting
/// after the motion must agree with moving the projected vector.
fn invariance_point_indexed(
    family: &ProjectionFamily,
    xi: &SkewEvolution,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tracker: &mut ConditionTracker,
    label: &str,
) -> Result<()> {
    for x in points {
        for pair in grid.pairs() {
            let (t, s) = (pair.t, pair.t0);
            let moved = xi.base_evolve(t, s, x)?;
            for (pi, v) in probes.iter().enumerate() {
                let lhs = family.apply(ProjIndex::Point(&moved), &xi.apply(t, s, x, v)?)?;
                let rhs = xi.apply(t, s, x, &family.apply(ProjIndex::Point(x), v)?)?;
                let r = relative_gap(&lhs, &rhs, v)?;
                tracker.record(label, r, || {
                    format!("{} t={t} s={s} base={} probe={pi}", family.label, x.label())
                });
            }
        }
    }
    Ok(())
}

/// Worst relative invariance defect of one time-indexed family along evolved
/// trajectories: the operator attached to `(t, s)` must intertwine the members
/// at times `s` and `t + s`.
fn invariance_time_indexed(
    family: &ProjectionFamily,
    xi: &SkewEvolution,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tracker: &mut ConditionTracker,
    label: &str,
) -> Result<()> {
    for x in points {
        for pair in grid.pairs() {
            let (t, s) = (pair.t, pair.t0);
            let moved = xi.base_evolve(t, s, x)?;
            for (pi, v) in probes.iter().enumerate() {
                let forward = |w: &StateVector| xi.apply(t, s, &moved, w);
                let lhs = family.apply(ProjIndex::Time(t + s), &forward(v)?)?;
                let rhs = forward(&family.apply(ProjIndex::Time(s), v)?)?;
                let r = relative_gap(&lhs, &rhs, v)?;
                tracker.record(label, r, || {
                    format!("{} t={t} s={s} base={} probe={pi}", family.label, x.label())
                });
            }
        }
    }
    Ok(())
}

fn norm_sq(v: &StateVector) -> f64 {
    let n = v.norm();
    n * n
}

/// Check every structural condition of `regime` on the given families,
/// sweeping grid times, base points, and probes. Algebraic and splitting
/// residuals are absolute (probes are at unit scale); invariance residuals
/// are relative to the largest vector in the identity.
pub fn check_compatibility(
    regime: Regime,
    families: &[ProjectionFamily],
    xi: &SkewEvolution,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
) -> Result<CompatibilityReport> {
    grid.validate()?;
    if families.len() != regime.family_count() {
        return Err(Error::FamilyCount {
            regime: regime.name().into(),
            expected: regime.family_count(),
            got: families.len(),
        });
    }
    for f in families {
        f.validate()?;
        if f.indexing != regime.expected_indexing() {
            return Err(Error::IndexKind {
                label: f.label.clone(),
                expected: match regime.expected_indexing() {
                    Indexing::ByTime => "time".into(),
                    Indexing::ByBasePoint => "base-point".into(),
                },
            });
        }
        if f.dim != xi.dim() {
            return Err(Error::Dimension { expected: xi.dim(), got: f.dim });
        }
    }
    if points.is_empty() || probes.is_empty() {
        return Err(Error::EmptyGrid("no base points or probes supplied".into()));
    }

    match regime {
        Regime::ThreeGlobal => {
            let mut tracker = ConditionTracker::new(&["invariance", "partition"]);
            for f in families {
                invariance_point_indexed(f, xi, points, probes, grid, &mut tracker, "invariance")?;
            }
            for x in points {
                let idx = ProjIndex::Point(x);
                for (pi, v) in probes.iter().enumerate() {
                    partition_residuals(families, idx, v, &mut tracker, "partition", || {
                        format!("base={} probe={pi}", x.label())
                    })?;
                }
            }
            Ok(tracker.finish(regime, tol))
        }
        Regime::ThreePointwise => {
            let mut tracker = ConditionTracker::new(&["invariance", "partition", "orthogonal-split"]);
            for f in families {
                invariance_time_indexed(f, xi, points, probes, grid, &mut tracker, "invariance")?;
            }
            for &time in &grid.sample_times() {
                let idx = ProjIndex::Time(time);
                for (pi, v) in probes.iter().enumerate() {
                    partition_residuals(families, idx, v, &mut tracker, "partition", || {
                        format!("time={time} probe={pi}")
                    })?;
                    for i in 0..families.len() {
                        for j in 0..families.len() {
                            if i == j {
                                continue;
                            }
                            let a = families[i].apply(idx, v)?;
                            let b = families[j].apply(idx, v)?;
                            let r = (norm_sq(&a.add(&b)?) - norm_sq(&a) - norm_sq(&b)).abs();
                            tracker.record("orthogonal-split", r, || {
                                format!(
                                    "{}+{} time={time} probe={pi}",
                                    families[i].label, families[j].label
                                )
                            });
                        }
                    }
                }
            }
            Ok(tracker.finish(regime, tol))
        }
        Regime::Two => {
            let labels =
                ["annihilation", "pair-split", "complement-split-1", "complement-split-2", "invariance"];
            let mut tracker = ConditionTracker::new(&labels);
            let (q1, q2) = (&families[0], &families[1]);
            for f in families {
                invariance_time_indexed(f, xi, points, probes, grid, &mut tracker, "invariance")?;
            }
            for &time in &grid.sample_times() {
                let idx = ProjIndex::Time(time);
                for (pi, v) in probes.iter().enumerate() {
                    let witness = |what: &str| format!("{what} time={time} probe={pi}");
                    let q1v = q1.apply(idx, v)?;
                    let q2v = q2.apply(idx, v)?;
                    let q1q2 = q1.apply(idx, &q2v)?.norm();
                    let q2q1 = q2.apply(idx, &q1v)?.norm();
                    tracker.record("annihilation", q1q2.max(q2q1), || witness("product"));

                    let r = (norm_sq(&q1v.add(&q2v)?) - norm_sq(&q1v) - norm_sq(&q2v)).abs();
                    tracker.record("pair-split", r, || witness("sum"));

                    // core = v - Q1 v - Q2 v
                    let core = v.sub(&q1v)?.sub(&q2v)?;
                    let r1 = (norm_sq(&v.sub(&q1v)?) - norm_sq(&core) - norm_sq(&q2v)).abs();
                    tracker.record("complement-split-1", r1, || witness("minus-first"));
                    let r2 = (norm_sq(&v.sub(&q2v)?) - norm_sq(&core) - norm_sq(&q1v)).abs();
                    tracker.record("complement-split-2", r2, || witness("minus-second"));
                }
            }
            Ok(tracker.finish(regime, tol))
        }
        Regime::Four => {
            let labels = [
                "partition-pairs",
                "annihilation-commutation",
                "pair-split",
                "core-split-1",
                "core-split-2",
                "invariance",
            ];
            let mut tracker = ConditionTracker::new(&labels);
            let (r1, r2, r3, r4) = (&families[0], &families[1], &families[2], &families[3]);
            for f in families {
                invariance_time_indexed(f, xi, points, probes, grid, &mut tracker, "invariance")?;
            }
            for &time in &grid.sample_times() {
                let idx = ProjIndex::Time(time);
                for (pi, v) in probes.iter().enumerate() {
                    let witness = |what: &str| format!("{what} time={time} probe={pi}");
                    let r1v = r1.apply(idx, v)?;
                    let r2v = r2.apply(idx, v)?;
                    let r3v = r3.apply(idx, v)?;
                    let r4v = r4.apply(idx, v)?;

                    let first = r1v.add(&r3v)?.sub(v)?.norm();
                    let second = r2v.add(&r4v)?.sub(v)?.norm();
                    tracker.record("partition-pairs", first.max(second), || witness("pairs"));

                    let ann = r1.apply(idx, &r2v)?.norm().max(r2.apply(idx, &r1v)?.norm());
                    let comm = r3.apply(idx, &r4v)?.sub(&r4.apply(idx, &r3v)?)?.norm();
                    tracker.record("annihilation-commutation", ann.max(comm), || witness("products"));

                    let split = (norm_sq(&r1v.add(&r2v)?) - norm_sq(&r1v) - norm_sq(&r2v)).abs();
                    tracker.record("pair-split", split, || witness("sum"));

                    let core = r3.apply(idx, &r4v)?;
                    let c1 = (norm_sq(&r1v.add(&core)?) - norm_sq(&r1v) - norm_sq(&core)).abs();
                    tracker.record("core-split-1", c1, || witness("first-plus-core"));
                    let c2 = (norm_sq(&r2v.add(&core)?) - norm_sq(&r2v) - norm_sq(&core)).abs();
                    tracker.record("core-split-2", c2, || witness("second-plus-core"));
                }
            }
            Ok(tracker.finish(regime, tol))
        }
    }
}

/// Shared partition conditions: members sum to the identity and annihilate
/// each other pairwise at a fixed index.
fn partition_residuals(
    families: &[ProjectionFamily],
    idx: ProjIndex<'_>,
    v: &StateVector,
    tracker: &mut ConditionTracker,
    label: &str,
    witness: impl Fn() -> String + Copy,
) -> Result<()> {
    let mut sum = families[0].apply(idx, v)?;
    for f in &families[1..] {
        sum = sum.add(&f.apply(idx, v)?)?;
    }
    tracker.record(label, sum.sub(v)?.norm(), witness);
    for i in 0..families.len() {
        for j in 0..families.len() {
            if i == j {
                continue;
            }
            let prod = families[i].apply(idx, &families[j].apply(idx, v)?)?.norm();
            tracker.record(label, prod, witness);
        }
    }
    Ok(())
}
