//! Report assembly: run a configured set of analyses over one built-in system
//! and collect the outcomes into a single deterministic, serializable document.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::axioms::{check_cocycle_axioms, check_semiflow_axioms};
use crate::basespace::{BasePoint, MetricParams};
use crate::error::{Error, Result};
use crate::integral::{
    check_phi_characterization, constants_from_phi, integral_bound,
    integral_budget_from_certificate, phi_from_constants, sufficiency_certificate,
    HypothesisSearch, IntegralKind, IntegralParams,
};
use crate::projectors::{check_compatibility, Regime};
use crate::scenario::{
    example3_members, Scenario, DEFAULT_PROBE_COUNT, FALSIFICATION_MEMBER_SIZES,
    FALSIFICATION_THRESHOLDS, FALSIFICATION_UNIFORM_CAPS, TIGHT_CONSTANT_CAP,
};
use crate::state::StateVector;
use crate::time::{GridPreset, GridSpec};
use crate::trichotomy::{
    estimate_rate_constants, falsify_global, linear_rate_grid, verify_trichotomy, CellRecord,
    EstimateMode, EstimateOutcome, RateCertificate, Scope, VerifyMode,
};

/// Version of the report document layout.
pub const SCHEMA_VERSION: &str = "1";

/// Tolerance for the structural-law sweeps inside a report.
pub const AXIOM_TOL: f64 = 1e-9;

/// Tolerance for the projector-compatibility sweeps inside a report.
/// Coordinate-mask families satisfy their algebra exactly in floating point.
pub const COMPAT_TOL: f64 = 1e-12;

/// Default margin tolerance for verification sweeps. Estimated constants carry
/// a 1e-9 inflation whose logarithm resurfaces as a slightly-below-zero margin
/// on zero-gap cells, so the default leaves an order of magnitude of room.
pub const DEFAULT_MARGIN_TOL: f64 = 1e-8;

/// Gap-search step used when converting envelopes back into rate constants.
pub const ENVELOPE_GAP_STEP: f64 = 1e-12;

/// Gap-search ceiling used when converting envelopes back into rate constants.
pub const ENVELOPE_GAP_MAX: f64 = 50.0;

/// Rate grid used by in-report estimation: 0.1 steps up to 2.
pub fn standard_rate_grid() -> Vec<f64> {
    linear_rate_grid(2.0, 0.1).expect("static grid is valid")
}

/// Finer rate grid used by the uniformity refutation: 0.01 steps up to 2.
pub fn fine_rate_grid() -> Vec<f64> {
    linear_rate_grid(2.0, 0.01).expect("static grid is valid")
}

/// One analysis a report can contain. Names match the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisKind {
    Axioms,
    Compat,
    Verify,
    Estimate,
    PhiCheck,
    Integrals,
    FalsifyGlobal,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Axioms => "axioms",
            AnalysisKind::Compat => "compat",
            AnalysisKind::Verify => "verify",
            AnalysisKind::Estimate => "estimate",
            AnalysisKind::PhiCheck => "phi-check",
            AnalysisKind::Integrals => "integrals",
            AnalysisKind::FalsifyGlobal => "falsify-global",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "axioms" => Ok(AnalysisKind::Axioms),
            "compat" => Ok(AnalysisKind::Compat),
            "verify" => Ok(AnalysisKind::Verify),
            "estimate" => Ok(AnalysisKind::Estimate),
            "phi-check" => Ok(AnalysisKind::PhiCheck),
            "integrals" => Ok(AnalysisKind::Integrals),
            "falsify-global" => Ok(AnalysisKind::FalsifyGlobal),
            other => Err(Error::Config(format!("unknown analysis '{other}'"))),
        }
    }

    /// The analyses a report runs when the configuration does not pick any.
    pub fn defaults_for(scenario: &str) -> Vec<AnalysisKind> {
        match scenario {
            "example1" => vec![AnalysisKind::Axioms, AnalysisKind::Compat, AnalysisKind::Verify],
            "example3" => {
                vec![AnalysisKind::Axioms, AnalysisKind::Compat, AnalysisKind::FalsifyGlobal]
            }
            _ => vec![
                AnalysisKind::Axioms,
                AnalysisKind::Compat,
                AnalysisKind::Verify,
                AnalysisKind::Estimate,
                AnalysisKind::PhiCheck,
                AnalysisKind::Integrals,
            ],
        }
    }
}

/// User-facing configuration for one report run. Unknown keys are rejected so
/// typos cannot silently fall back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub scenario: String,
    /// Built-in grid density by name; mutually exclusive with `grid`.
    pub grid_preset: Option<String>,
    /// Explicit sweep grid; mutually exclusive with `grid_preset`.
    pub grid: Option<GridSpec>,
    pub seed: u64,
    /// Number of seeded random probes added to the exhaustive indicators.
    pub probe_count: usize,
    /// Margin tolerance for verification sweeps.
    pub tol: f64,
    /// Analyses to run; omitted means the scenario's default set.
    pub analyses: Option<Vec<AnalysisKind>>,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            scenario: "example2".into(),
            grid_preset: None,
            grid: None,
            seed: 7,
            probe_count: DEFAULT_PROBE_COUNT,
            tol: DEFAULT_MARGIN_TOL,
            analyses: None,
        }
    }
}

impl ConfigDocument {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!("tol must be positive and finite, got {}", self.tol)));
        }
        if self.grid.is_some() && self.grid_preset.is_some() {
            return Err(Error::Config("grid and grid_preset are mutually exclusive".into()));
        }
        if let Some(kinds) = &self.analyses {
            if kinds.is_empty() {
                return Err(Error::Config("analyses, when given, must not be empty".into()));
            }
        }
        Ok(())
    }

    /// The sweep grid this configuration selects.
    pub fn resolve_grid(&self) -> Result<GridSpec> {
        let grid = if let Some(g) = &self.grid {
            g.clone()
        } else if let Some(name) = &self.grid_preset {
            GridPreset::from_name(name)?.spec()
        } else {
            GridSpec::default()
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// The assembled report: provenance header, one JSON value per analysis, and
/// the conjunction of their pass flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub tool_version: String,
    pub generated_unix_ms: u64,
    pub scenario: String,
    pub grid: GridSpec,
    pub seed: u64,
    pub tolerance: f64,
    pub sections: BTreeMap<String, Value>,
    pub overall_pass: bool,
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).unwrap_or_else(|e| json!({ "serialization_error": e.to_string() }))
}

fn section_pass(section: &Value) -> bool {
    section.get("pass").and_then(Value::as_bool).unwrap_or(false)
}

/// Run every configured analysis and assemble the document. Analysis-level
/// failures are embedded as failing sections rather than aborting the report;
/// only configuration and construction errors abort. When `collect_margins`
/// is set, every verification sweep also dumps its per-cell margins.
pub fn run_report(
    config: &ConfigDocument,
    collect_margins: bool,
) -> Result<(ReportDocument, Vec<CellRecord>)> {
    config.validate()?;
    let sc = Scenario::by_name(&config.scenario)?;
    let grid = config.resolve_grid()?;
    let points = sc.sample_points(&grid)?;
    let probes = sc.probes(config.seed, config.probe_count)?;
    let analyses =
        config.analyses.clone().unwrap_or_else(|| AnalysisKind::defaults_for(&sc.name));

    let mut records = Vec::new();
    let mut sections = BTreeMap::new();
    for kind in analyses {
        let mut sink = collect_margins.then(Vec::new);
        let outcome = run_section(kind, &sc, &points, &probes, &grid, config, &mut sink);
        if let Some(cells) = sink {
            records.extend(cells);
        }
        let value = match outcome {
            Ok(v) => v,
            Err(e) => json!({ "error": e.to_string(), "pass": false }),
        };
        sections.insert(kind.name().to_string(), value);
    }

    let overall_pass = !sections.is_empty() && sections.values().all(section_pass);
    let generated_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let doc = ReportDocument {
        schema_version: SCHEMA_VERSION.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generated_unix_ms,
        scenario: sc.name.clone(),
        grid,
        seed: config.seed,
        tolerance: config.tol,
        sections,
        overall_pass,
    };
    Ok((doc, records))
}

#[allow(clippy::too_many_arguments)]
fn run_section(
    kind: AnalysisKind,
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    config: &ConfigDocument,
    records: &mut Option<Vec<CellRecord>>,
) -> Result<Value> {
    match kind {
        AnalysisKind::Axioms => axioms_section(sc, points, probes, grid),
        AnalysisKind::Compat => compat_section(sc, points, probes, grid),
        AnalysisKind::Verify => verify_section(sc, points, probes, grid, config.tol, records),
        AnalysisKind::Estimate => estimate_section(sc, points, probes, grid, config.tol, records),
        AnalysisKind::PhiCheck => phi_section(sc, points, probes, grid, config.tol, records),
        AnalysisKind::Integrals => integrals_section(sc, points, probes, grid, config.tol, records),
        AnalysisKind::FalsifyGlobal => falsify_section(sc, probes, grid, config.tol),
    }
}

fn axioms_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<Value> {
    let semiflow =
        check_semiflow_axioms(sc.xi.semiflow, points, grid, &MetricParams::default(), AXIOM_TOL)?;
    let cocycle = check_cocycle_axioms(&sc.xi, points, probes, grid, AXIOM_TOL)?;
    let pass = semiflow.iter().chain(cocycle.iter()).all(|r| r.pass);
    Ok(json!({
        "semiflow": to_value(&semiflow),
        "cocycle": to_value(&cocycle),
        "pass": pass,
    }))
}

fn compat_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<Value> {
    let mut regimes = BTreeMap::new();
    let mut pass = true;
    let runs: [(Regime, Vec<_>); 4] = [
        (Regime::ThreeGlobal, sc.global_families.as_slice().to_vec()),
        (Regime::ThreePointwise, sc.pointwise_families.as_slice().to_vec()),
        (Regime::Two, sc.two_families.to_vec()),
        (Regime::Four, sc.four_families.to_vec()),
    ];
    for (regime, families) in runs {
        let report =
            check_compatibility(regime, &families, &sc.xi, points, probes, grid, COMPAT_TOL)?;
        pass &= report.pass;
        regimes.insert(regime.name().to_string(), to_value(&report));
    }
    Ok(json!({ "regimes": regimes, "pass": pass }))
}

fn verify_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    records: &mut Option<Vec<CellRecord>>,
) -> Result<Value> {
    let certs = sc.analytic_certificates()?;
    if let (Some(global), Some(pointwise)) = (certs.global, certs.pointwise) {
        let gv = verify_trichotomy(
            VerifyMode::Global,
            &sc.xi,
            &sc.global_families,
            &global,
            points,
            probes,
            grid,
            tol,
            records.as_mut(),
        )?;
        let pv = verify_trichotomy(
            VerifyMode::Pointwise,
            &sc.xi,
            &sc.pointwise_families,
            &pointwise,
            points,
            probes,
            grid,
            tol,
            records.as_mut(),
        )?;
        let pass = gv.pass && pv.pass;
        return Ok(json!({
            "source": "analytic",
            "global": { "certificate": to_value(&global), "verdict": to_value(&gv) },
            "pointwise": { "certificate": to_value(&pointwise), "verdict": to_value(&pv) },
            "pass": pass,
        }));
    }

    // No closed-form certificate: verify whatever the data supports, member by
    // member for the per-point family, or on the scenario's own orbit.
    if sc.name == "example3" {
        let members = example3_members(&FALSIFICATION_MEMBER_SIZES)?;
        let nu_grid = standard_rate_grid();
        let mut entries = Vec::new();
        let mut pass = true;
        for m in &members {
            let outcome = estimate_rate_constants(
                &m.xi,
                &m.families,
                EstimateMode::Pointwise(&m.x0),
                &m.points,
                probes,
                grid,
                &nu_grid,
                TIGHT_CONSTANT_CAP,
            )?;
            let entry = match &outcome {
                EstimateOutcome::Certificate { certificate } => {
                    let verdict = verify_trichotomy(
                        VerifyMode::Pointwise,
                        &m.xi,
                        &m.families,
                        certificate,
                        &m.points,
                        probes,
                        grid,
                        tol,
                        records.as_mut(),
                    )?;
                    pass &= verdict.pass;
                    json!({ "id": m.id, "estimate": to_value(&outcome), "verdict": to_value(&verdict) })
                }
                EstimateOutcome::NoCertificate { .. } => {
                    pass = false;
                    json!({ "id": m.id, "estimate": to_value(&outcome) })
                }
            };
            entries.push(entry);
        }
        return Ok(json!({ "source": "per-member-estimate", "members": entries, "pass": pass }));
    }

    estimate_section(sc, points, probes, grid, tol, records)
}

fn estimate_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    records: &mut Option<Vec<CellRecord>>,
) -> Result<Value> {
    let nu_grid = standard_rate_grid();
    let anchor = sc.anchor()?;
    let mut pass = true;

    let mut run = |mode: EstimateMode<'_>,
                   vmode: VerifyMode,
                   families,
                   records: &mut Option<Vec<CellRecord>>|
     -> Result<Value> {
        let outcome = estimate_rate_constants(
            &sc.xi,
            families,
            mode,
            points,
            probes,
            grid,
            &nu_grid,
            TIGHT_CONSTANT_CAP,
        )?;
        Ok(match &outcome {
            EstimateOutcome::Certificate { certificate } => {
                let verdict = verify_trichotomy(
                    vmode,
                    &sc.xi,
                    families,
                    certificate,
                    points,
                    probes,
                    grid,
                    tol,
                    records.as_mut(),
                )?;
                pass &= verdict.pass;
                json!({ "estimate": to_value(&outcome), "verdict": to_value(&verdict) })
            }
            EstimateOutcome::NoCertificate { .. } => {
                pass = false;
                json!({ "estimate": to_value(&outcome) })
            }
        })
    };

    let global = run(EstimateMode::Global, VerifyMode::Global, &sc.global_families, records)?;
    let pointwise = run(
        EstimateMode::Pointwise(&anchor),
        VerifyMode::Pointwise,
        &sc.pointwise_families,
        records,
    )?;
    Ok(json!({ "global": global, "pointwise": pointwise, "pass": pass }))
}

fn phi_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    records: &mut Option<Vec<CellRecord>>,
) -> Result<Value> {
    let anchor = sc.anchor()?;
    let nu_grid = standard_rate_grid();
    let outcome = estimate_rate_constants(
        &sc.xi,
        &sc.pointwise_families,
        EstimateMode::Pointwise(&anchor),
        points,
        probes,
        grid,
        &nu_grid,
        TIGHT_CONSTANT_CAP,
    )?;
    let EstimateOutcome::Certificate { certificate } = outcome else {
        return Ok(json!({ "estimate": to_value(&outcome), "pass": false }));
    };

    let (phi1, phi2) = phi_from_constants(&certificate)?;
    let envelope_verdict = check_phi_characterization(
        &sc.xi,
        &anchor,
        &sc.two_families[0],
        &sc.two_families[1],
        &phi1,
        &phi2,
        points,
        probes,
        grid,
        tol,
        records.as_mut(),
    )?;

    let roundtrip = constants_from_phi(
        &phi1,
        &phi2,
        Scope::Pointwise { x0: anchor },
        ENVELOPE_GAP_STEP,
        ENVELOPE_GAP_MAX,
    )?;
    let roundtrip_verdict = verify_trichotomy(
        VerifyMode::Pointwise,
        &sc.xi,
        &sc.pointwise_families,
        &roundtrip,
        points,
        probes,
        grid,
        tol,
        records.as_mut(),
    )?;

    let pass = envelope_verdict.pass && roundtrip_verdict.pass;
    Ok(json!({
        "source_certificate": to_value(&certificate),
        "phi1": to_value(&phi1),
        "phi2": to_value(&phi2),
        "envelope_verdict": to_value(&envelope_verdict),
        "roundtrip_certificate": to_value(&roundtrip),
        "roundtrip_verdict": to_value(&roundtrip_verdict),
        "pass": pass,
    }))
}

/// Budget certificate for the integral checks: the closed-form global one
/// when the scenario carries it, otherwise the estimated orbit certificate.
fn budget_certificate(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
) -> Result<(String, RateCertificate)> {
    let certs = sc.analytic_certificates()?;
    if let Some(global) = certs.global {
        return Ok(("analytic-global".into(), global));
    }
    let anchor = sc.anchor()?;
    let outcome = estimate_rate_constants(
        &sc.xi,
        &sc.pointwise_families,
        EstimateMode::Pointwise(&anchor),
        points,
        probes,
        grid,
        &standard_rate_grid(),
        TIGHT_CONSTANT_CAP,
    )?;
    match outcome {
        EstimateOutcome::Certificate { certificate } => {
            Ok(("pointwise-estimate".into(), certificate))
        }
        EstimateOutcome::NoCertificate { direction, detail } => Err(Error::Param(format!(
            "no budget certificate: {direction} direction failed ({detail})"
        ))),
    }
}

fn integrals_section(
    sc: &Scenario,
    points: &[BasePoint],
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
    records: &mut Option<Vec<CellRecord>>,
) -> Result<Value> {
    let (budget_source, cert) = budget_certificate(sc, points, probes, grid)?;
    let budget = integral_budget_from_certificate(&cert)?;
    // The integrals are probed on the most uniform orbit available.
    let x0 = sc.space.limit_point().or_else(|_| sc.anchor())?;

    let runs = [
        (IntegralKind::StableTotal, 0usize, budget.stable_bound),
        (IntegralKind::UnstableRatio, 1, budget.unstable_bound),
        (IntegralKind::NeutralWeighted, 2, budget.neutral_bound),
        (IntegralKind::NeutralWeightedDual, 3, budget.neutral_bound),
    ];
    let mut checks = BTreeMap::new();
    let mut pass = true;
    for (kind, family_index, bound) in runs {
        let params =
            IntegralParams { alpha: Some(budget.alpha), bound, ..IntegralParams::default() };
        let result = integral_bound(
            kind,
            &sc.xi,
            &x0,
            &sc.four_families[family_index],
            &params,
            points,
            probes,
            grid,
        )?;
        pass &= result.pass;
        checks.insert(kind.name().to_string(), to_value(&result));
    }

    // One-step hypotheses and the certificate they are sufficient for.
    let anchor = sc.anchor()?;
    let search = HypothesisSearch::default();
    let sufficiency = sufficiency_certificate(
        &sc.xi,
        &sc.four_families,
        budget.alpha,
        &anchor,
        &search,
        points,
        probes,
        grid,
    )?;
    let sufficiency_verdict = verify_trichotomy(
        VerifyMode::Pointwise,
        &sc.xi,
        &sc.pointwise_families,
        &sufficiency.certificate,
        points,
        probes,
        grid,
        tol,
        records.as_mut(),
    )?;
    pass &= sufficiency_verdict.pass;

    Ok(json!({
        "budget_source": budget_source,
        "budget_certificate": to_value(&cert),
        "budget": to_value(&budget),
        "orbit": x0.label(),
        "checks": checks,
        "sufficiency": to_value(&sufficiency),
        "sufficiency_verdict": to_value(&sufficiency_verdict),
        "pass": pass,
    }))
}

fn falsify_section(
    sc: &Scenario,
    probes: &[StateVector],
    grid: &GridSpec,
    tol: f64,
) -> Result<Value> {
    if sc.name != "example3" {
        return Err(Error::Config(format!(
            "the uniformity refutation runs over the example3 member family, not '{}'",
            sc.name
        )));
    }
    let members = example3_members(&FALSIFICATION_MEMBER_SIZES)?;
    let report = falsify_global(
        &members,
        &FALSIFICATION_THRESHOLDS,
        probes,
        grid,
        &fine_rate_grid(),
        TIGHT_CONSTANT_CAP,
        &FALSIFICATION_UNIFORM_CAPS,
        tol,
    )?;
    let pass = report.conclusion;
    Ok(json!({ "report": to_value(&report), "pass": pass }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let config: ConfigDocument = serde_json::from_str("{}").unwrap();
        assert_eq!(config.scenario, "example2");
        assert_eq!(config.seed, 7);
        assert_eq!(config.probe_count, DEFAULT_PROBE_COUNT);
        assert_eq!(config.tol, DEFAULT_MARGIN_TOL);
        assert!(config.analyses.is_none());
        assert_eq!(config.resolve_grid().unwrap(), GridSpec::default());

        // Unknown keys and contradictory grids are rejected.
        assert!(serde_json::from_str::<ConfigDocument>(r#"{"scenari": "x"}"#).is_err());
        let both: ConfigDocument = serde_json::from_str(
            r#"{"grid_preset": "small", "grid": {
                "t0_values": [0.0], "s_offsets": [0.0], "t_offsets": [1.0],
                "base_shifts": [0.0], "include_limit_point": true}}"#,
        )
        .unwrap();
        assert!(both.validate().is_err());
        let preset: ConfigDocument =
            serde_json::from_str(r#"{"grid_preset": "small"}"#).unwrap();
        assert_eq!(preset.resolve_grid().unwrap(), GridPreset::Small.spec());
        let bad_tol: ConfigDocument = serde_json::from_str(r#"{"tol": 0.0}"#).unwrap();
        assert!(bad_tol.validate().is_err());
    }

    #[test]
    fn analysis_names_round_trip() {
        for kind in [
            AnalysisKind::Axioms,
            AnalysisKind::Compat,
            AnalysisKind::Verify,
            AnalysisKind::Estimate,
            AnalysisKind::PhiCheck,
            AnalysisKind::Integrals,
            AnalysisKind::FalsifyGlobal,
        ] {
            assert_eq!(AnalysisKind::from_name(kind.name()).unwrap(), kind);
            let as_json = serde_json::to_value(kind).unwrap();
            assert_eq!(as_json, Value::String(kind.name().into()));
        }
        assert!(AnalysisKind::from_name("axiom").is_err());
    }

    #[test]
    fn scalar_scenario_report_passes_and_is_deterministic() {
        let config = ConfigDocument {
            scenario: "example1".into(),
            grid_preset: Some("small".into()),
            ..ConfigDocument::default()
        };
        let (doc, records) = run_report(&config, true).unwrap();
        assert_eq!(doc.schema_version, SCHEMA_VERSION);
        assert_eq!(doc.scenario, "example1");
        let keys: Vec<&str> = doc.sections.keys().map(String::as_str).collect();
        assert_eq!(keys, ["axioms", "compat", "verify"]);
        assert!(doc.overall_pass, "{:?}", doc.sections);
        assert!(!records.is_empty());

        let (doc2, _) = run_report(&config, false).unwrap();
        let mut a = serde_json::to_value(&doc).unwrap();
        let mut b = serde_json::to_value(&doc2).unwrap();
        a["generated_unix_ms"] = json!(0);
        b["generated_unix_ms"] = json!(0);
        assert_eq!(a, b);
    }

    #[test]
    fn per_point_family_report_reaches_the_refutation() {
        let config = ConfigDocument {
            scenario: "example3".into(),
            grid_preset: Some("small".into()),
            ..ConfigDocument::default()
        };
        let (doc, _) = run_report(&config, false).unwrap();
        let keys: Vec<&str> = doc.sections.keys().map(String::as_str).collect();
        assert_eq!(keys, ["axioms", "compat", "falsify-global"]);
        assert!(doc.overall_pass, "{:?}", doc.sections);
        let falsify = &doc.sections["falsify-global"]["report"];
        assert_eq!(falsify["member_rates"].as_array().unwrap().len(), 4);
        assert_eq!(falsify["strictly_decreasing"], json!(true));
    }

    #[test]
    fn report_embeds_section_failures_instead_of_aborting() {
        // The refutation is tied to the example3 member family, so asking for
        // it elsewhere yields a failing section, not an abort.
        let config = ConfigDocument {
            scenario: "example1".into(),
            grid_preset: Some("small".into()),
            analyses: Some(vec![AnalysisKind::Axioms, AnalysisKind::FalsifyGlobal]),
            ..ConfigDocument::default()
        };
        let (doc, _) = run_report(&config, false).unwrap();
        assert!(!doc.overall_pass);
        assert!(section_pass(&doc.sections["axioms"]));
        let bad = &doc.sections["falsify-global"];
        assert_eq!(bad["pass"], json!(false));
        assert!(bad["error"].as_str().unwrap().contains("example3"));

        // Configuration problems abort instead of producing a document.
        let empty = ConfigDocument { analyses: Some(vec![]), ..ConfigDocument::default() };
        assert!(run_report(&empty, false).is_err());
        let unknown = ConfigDocument { scenario: "nope".into(), ..ConfigDocument::default() };
        assert!(run_report(&unknown, false).is_err());
    }

    #[test]
    fn default_scenario_report_passes_end_to_end() {
        let config = ConfigDocument::default();
        let (doc, _) = run_report(&config, false).unwrap();
        assert_eq!(doc.scenario, "example2");
        let keys: Vec<&str> = doc.sections.keys().map(String::as_str).collect();
        assert_eq!(keys, ["axioms", "compat", "estimate", "integrals", "phi-check", "verify"]);
        for (name, section) in &doc.sections {
            assert!(section_pass(section), "section {name} failed: {section}");
        }
        assert!(doc.overall_pass);

        // The integral budget comes from the closed-form certificate here.
        assert_eq!(doc.sections["integrals"]["budget_source"], json!("analytic-global"));
        assert_eq!(doc.sections["integrals"]["budget"]["alpha"], json!(4.0));
    }

    #[test]
    fn report_document_round_trips_through_json() {
        let config = ConfigDocument {
            scenario: "example1".into(),
            grid_preset: Some("small".into()),
            analyses: Some(vec![AnalysisKind::Axioms]),
            ..ConfigDocument::default()
        };
        let (doc, _) = run_report(&config, false).unwrap();
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: ReportDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.scenario, doc.scenario);
        assert_eq!(back.sections, doc.sections);
        assert_eq!(back.overall_pass, doc.overall_pass);
    }
}
