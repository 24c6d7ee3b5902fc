//! Built-in systems with closed-form base trajectories, wired to projection
//! families in every regime shape, plus the hand-derived certificates that
//! hold for the documented default parameters.

use crate::basespace::{BasePoint, BaseSpace, TrajectorySpec};
use crate::cocycle::{ComponentLaw, NeutralAnchor, SkewEvolution};
use crate::error::{Error, Result};
use crate::projectors::{Indexing, ProjectionFamily, ProjectorKind};
use crate::semiflow::SemiflowKind;
use crate::state::{probe_set, NormKind, StateVector};
use crate::time::GridSpec;
use crate::trichotomy::{FamilyMember, RateCertificate, Scope, ThreeFamilies};

/// Number of seeded random probes appended to the exhaustive indicator probes.
pub const DEFAULT_PROBE_COUNT: usize = 8;

/// Constant cap used when a rate search should concede nothing: barely above
/// the floor every estimated constant carries.
pub const TIGHT_CONSTANT_CAP: f64 = 1.0 + 1e-6;

/// Member sizes of the built-in per-point family used to refute uniformity.
pub const FALSIFICATION_MEMBER_SIZES: [u32; 4] = [1, 2, 5, 10];

/// Rate thresholds the member rates must successively undercut.
pub const FALSIFICATION_THRESHOLDS: [f64; 4] = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0];

/// Constant ceilings against which the uniform certificate is priced.
pub const FALSIFICATION_UNIFORM_CAPS: [f64; 3] = [1e2, 1e4, 1e6];

/// Hand-derived certificates available for a scenario's default parameters.
#[derive(Debug, Clone)]
pub struct AnalyticCertificates {
    pub global: Option<RateCertificate>,
    pub pointwise: Option<RateCertificate>,
}

/// A ready-to-run system: base space, componentwise evolution, and projection
/// families laid out for each regime a check can ask for.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub space: BaseSpace,
    pub xi: SkewEvolution,
    pub norm_kind: NormKind,
    /// Shift of the distinguished orbit anchor used by pointwise checks.
    pub anchor_shift: f64,
    /// Point-indexed neutral/stable/unstable families.
    pub global_families: ThreeFamilies,
    /// Time-indexed neutral/stable/unstable families.
    pub pointwise_families: ThreeFamilies,
    /// Time-indexed (stable, unstable) pair for the envelope checks.
    pub two_families: [ProjectionFamily; 2],
    /// Time-indexed contraction/expansion families with their complements,
    /// in the order the one-step hypothesis searches consume them.
    pub four_families: [ProjectionFamily; 4],
}

fn family(label: &str, indexing: Indexing, kind: ProjectorKind, dim: usize) -> ProjectionFamily {
    ProjectionFamily::new(label, indexing, kind, dim).expect("built-in family is well formed")
}

fn coords(c: &[usize]) -> ProjectorKind {
    ProjectorKind::Coordinates { coords: c.to_vec() }
}

/// Three-way splitting of a coordinate space from the coordinate lists of its
/// neutral, stable, and unstable directions.
fn three(
    indexing: Indexing,
    dim: usize,
    neutral: ProjectorKind,
    stable: ProjectorKind,
    unstable: ProjectorKind,
) -> ThreeFamilies {
    ThreeFamilies {
        neutral: family("neutral", indexing, neutral, dim),
        stable: family("stable", indexing, stable, dim),
        unstable: family("unstable", indexing, unstable, dim),
    }
}

impl Scenario {
    /// Scalar system on the decaying-to-one trajectory space whose single
    /// component grows; the splitting is pure dichotomy with an empty
    /// stable direction.
    pub fn example1() -> Result<Scenario> {
        let space = BaseSpace::new(TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 }, true)?;
        let xi = SkewEvolution::new(SemiflowKind::Shift, vec![ComponentLaw::Growth])?;
        let dim = xi.dim();
        Ok(Scenario {
            name: "example1".into(),
            space,
            xi,
            norm_kind: NormKind::L2,
            anchor_shift: 0.0,
            global_families: three(
                Indexing::ByBasePoint,
                dim,
                ProjectorKind::Zero,
                ProjectorKind::Zero,
                ProjectorKind::Identity,
            ),
            pointwise_families: three(
                Indexing::ByTime,
                dim,
                ProjectorKind::Zero,
                ProjectorKind::Zero,
                ProjectorKind::Identity,
            ),
            two_families: [
                family("stable", Indexing::ByTime, ProjectorKind::Zero, dim),
                family("unstable", Indexing::ByTime, ProjectorKind::Identity, dim),
            ],
            four_families: [
                family("contraction", Indexing::ByTime, ProjectorKind::Zero, dim),
                family("expansion", Indexing::ByTime, ProjectorKind::Identity, dim),
                family("contraction-complement", Indexing::ByTime, ProjectorKind::Identity, dim),
                family("expansion-complement", Indexing::ByTime, ProjectorKind::Zero, dim),
            ],
        })
    }

    /// Three-component system on the decaying trajectory space: one component
    /// contracts at rate `mu` against the drift, one grows with it, and one is
    /// held neutral by anchoring at the trajectory's starting value.
    ///
    /// `mu` must exceed the trajectory's largest value, otherwise the first
    /// component does not actually contract.
    pub fn example2(level: f64, amplitude: f64, mu: f64) -> Result<Scenario> {
        let space =
            BaseSpace::new(TrajectorySpec::ExpDecayToLevel { level, amplitude }, true)?;
        let peak = level.max(level + amplitude);
        if !mu.is_finite() || mu <= peak {
            return Err(Error::Param(format!(
                "contraction rate mu must exceed the trajectory peak {peak}, got {mu}"
            )));
        }
        let xi = SkewEvolution::new(
            SemiflowKind::Shift,
            vec![
                ComponentLaw::Stable { mu },
                ComponentLaw::Growth,
                ComponentLaw::Neutral { anchor: NeutralAnchor::Fixed(level + amplitude) },
            ],
        )?;
        Ok(Self::coordinate_scenario("example2", space, xi))
    }

    /// Three-component system over the interval-decay trajectory of size `n`:
    /// the stable component decays with the drift, the other two grow with it.
    /// Larger `n` makes the drift (and every rate with it) smaller.
    pub fn example3(n: u32) -> Result<Scenario> {
        let space = BaseSpace::new(TrajectorySpec::IntervalDecay { n }, true)?;
        let xi = SkewEvolution::new(
            SemiflowKind::Shift,
            vec![ComponentLaw::Decay, ComponentLaw::Growth, ComponentLaw::Growth],
        )?;
        Ok(Self::coordinate_scenario("example3", space, xi))
    }

    /// Shared three-coordinate layout: stable on 0, unstable on 1, neutral on 2.
    fn coordinate_scenario(name: &str, space: BaseSpace, xi: SkewEvolution) -> Scenario {
        let dim = xi.dim();
        Scenario {
            name: name.into(),
            space,
            xi,
            norm_kind: NormKind::L2,
            anchor_shift: 0.0,
            global_families: three(
                Indexing::ByBasePoint,
                dim,
                coords(&[2]),
                coords(&[0]),
                coords(&[1]),
            ),
            pointwise_families: three(
                Indexing::ByTime,
                dim,
                coords(&[2]),
                coords(&[0]),
                coords(&[1]),
            ),
            two_families: [
                family("stable", Indexing::ByTime, coords(&[0]), dim),
                family("unstable", Indexing::ByTime, coords(&[1]), dim),
            ],
            four_families: [
                family("contraction", Indexing::ByTime, coords(&[0]), dim),
                family("expansion", Indexing::ByTime, coords(&[1]), dim),
                family("contraction-complement", Indexing::ByTime, coords(&[1, 2]), dim),
                family("expansion-complement", Indexing::ByTime, coords(&[0, 2]), dim),
            ],
        }
    }

    /// Look up a built-in scenario by name, with its documented default
    /// parameters.
    pub fn by_name(name: &str) -> Result<Scenario> {
        match name {
            "example1" => Self::example1(),
            "example2" => Self::example2(1.0, 1.0, 3.0),
            "example3" => Self::example3(1),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected example1, example2, or example3)"
            ))),
        }
    }

    /// The distinguished orbit anchor.
    pub fn anchor(&self) -> Result<BasePoint> {
        self.space.point(self.anchor_shift)
    }

    /// Base points selected by a grid's shifts (plus the limit point when the
    /// grid asks for it).
    pub fn sample_points(&self, grid: &GridSpec) -> Result<Vec<BasePoint>> {
        self.space.sample_points(&grid.base_shifts, grid.include_limit_point)
    }

    /// Probe vectors in this scenario's norm: exhaustive indicators plus
    /// seeded random directions.
    pub fn probes(&self, seed: u64, random_count: usize) -> Result<Vec<StateVector>> {
        probe_set(self.xi.dim(), self.norm_kind, seed, random_count)
    }

    /// Hand-derived certificates, available only at the documented default
    /// parameters (where the margins were worked out in closed form).
    pub fn analytic_certificates(&self) -> Result<AnalyticCertificates> {
        let anchor = self.anchor()?;
        let near_one = 1.0 + 1e-9;
        let snug = 1.0 + 1e-12;
        match self.name.as_str() {
            "example1" => Ok(AnalyticCertificates {
                global: Some(RateCertificate {
                    n0: near_one,
                    n1: near_one,
                    n2: near_one,
                    nu0: 1.0,
                    nu1: 1.0,
                    nu2: 1.0,
                    scope: Scope::Global,
                }),
                pointwise: Some(RateCertificate {
                    n0: snug,
                    n1: snug,
                    // One quarter is the largest hump the doubly-evolved legs
                    // can lose between two windows of the same orbit.
                    n2: 0.25f64.exp() * snug,
                    nu0: 1.0,
                    nu1: 1.0,
                    nu2: 1.0,
                    scope: Scope::Pointwise { x0: anchor },
                }),
            }),
            "example2" if self.is_default_example2() => Ok(AnalyticCertificates {
                global: Some(RateCertificate {
                    n0: near_one,
                    n1: near_one,
                    n2: near_one,
                    nu0: 2.0,
                    nu1: 1.0,
                    nu2: 1.0,
                    scope: Scope::Global,
                }),
                pointwise: Some(RateCertificate {
                    n0: snug,
                    n1: snug,
                    n2: 0.25f64.exp() * snug,
                    nu0: 2.0,
                    nu1: 1.0,
                    nu2: 1.0,
                    scope: Scope::Pointwise { x0: anchor },
                }),
            }),
            _ => Ok(AnalyticCertificates { global: None, pointwise: None }),
        }
    }

    fn is_default_example2(&self) -> bool {
        self.space.generator == TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 }
            && self.xi.laws.first() == Some(&ComponentLaw::Stable { mu: 3.0 })
    }
}

/// The per-point family members used by the uniformity refutation: one
/// interval-decay system per size, each anchored at its unshifted point.
pub fn example3_members(sizes: &[u32]) -> Result<Vec<FamilyMember>> {
    if sizes.is_empty() {
        return Err(Error::EmptyGrid("no member sizes supplied".into()));
    }
    sizes
        .iter()
        .map(|&n| {
            let sc = Scenario::example3(n)?;
            Ok(FamilyMember {
                id: format!("n={n}"),
                x0: sc.space.point(0.0)?,
                points: sc.space.sample_points(&[0.0, 1.0], true)?,
                xi: sc.xi,
                families: sc.pointwise_families,
            })
        })
        .collect()
}
