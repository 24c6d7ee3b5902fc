//! Numerical toolkit for skew-product evolution systems over trajectory
//! spaces: structural law checks, projection-family compatibility, exponential
//! trichotomy verification (global and per-point), rate-constant estimation,
//! envelope-function and integral characterizations, and report generation
//! for a family of built-in closed-form scenarios.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod basespace;
pub mod cocycle;
pub mod error;
pub mod integral;
pub mod projectors;
pub mod report;
pub mod scenario;
pub mod semiflow;
pub mod state;
pub mod time;
pub mod trichotomy;

pub use axioms::{check_cocycle_axioms, check_semiflow_axioms, AxiomLaw, AxiomReport, AxiomWitness};
pub use basespace::{
    closed_form_log_growth, metric_d, BasePoint, BaseSpace, MetricParams, PointPosition,
    TrajectorySpec,
};
pub use cocycle::{ComponentLaw, NeutralAnchor, SkewEvolution};
pub use error::{Error, Result};
pub use integral::{
    check_integral_hypotheses, check_phi_characterization, constants_from_phi, fit_decay,
    integral_bound, integral_budget_from_certificate, phi_from_constants, quadrature,
    sufficiency_certificate, HypothesisReport, HypothesisSearch, IntegralBudget,
    IntegralCheckResult, IntegralKind, IntegralParams, PhiFunction, SufficiencyDerivation,
};
pub use projectors::{
    check_compatibility, CompatibilityReport, Indexing, ProjIndex, ProjectionFamily,
    ProjectorKind, Regime,
};
pub use report::{
    fine_rate_grid, run_report, standard_rate_grid, AnalysisKind, ConfigDocument, ReportDocument,
    AXIOM_TOL, COMPAT_TOL, DEFAULT_MARGIN_TOL, ENVELOPE_GAP_MAX, ENVELOPE_GAP_STEP,
    SCHEMA_VERSION,
};
pub use scenario::{
    example3_members, AnalyticCertificates, Scenario, DEFAULT_PROBE_COUNT,
    FALSIFICATION_MEMBER_SIZES, FALSIFICATION_THRESHOLDS, FALSIFICATION_UNIFORM_CAPS,
    TIGHT_CONSTANT_CAP,
};
pub use semiflow::{eval_semiflow, SemiflowKind};
pub use state::{log_norm_scaled, probe_set, NormKind, StateVector};
pub use time::{GridPreset, GridSpec, TimePair, TimeTriple};
pub use trichotomy::{
    derive_special_case, estimate_rate_constants, falsify_global, linear_rate_grid,
    uniform_certificate_minimal_n, verify_trichotomy, CellRecord, EstimateMode, EstimateOutcome,
    FalsificationReport, FamilyMember, RateCertificate, Scope, SpecialCaseKind, ThreeFamilies,
    VerificationVerdict, VerifyMode,
};
