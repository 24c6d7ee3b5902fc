//! Acceptance checklist: nine end-to-end criteria covering the whole toolkit,
//! each printing one PASS/FAIL line (visible with `--nocapture`) and each
//! pinned to explicit numeric tolerances.

use std::collections::BTreeMap;
use std::process::Command;

use skewflow::{
    check_cocycle_axioms, check_compatibility, check_integral_hypotheses,
    check_phi_characterization, check_semiflow_axioms, closed_form_log_growth, constants_from_phi,
    estimate_rate_constants, example3_members, falsify_global, fine_rate_grid,
    integral_bound, integral_budget_from_certificate, phi_from_constants, probe_set, quadrature,
    standard_rate_grid, sufficiency_certificate, verify_trichotomy, ComponentLaw, EstimateMode,
    EstimateOutcome, GridPreset, HypothesisSearch, IntegralKind, IntegralParams, MetricParams,
    NeutralAnchor, NormKind, Regime, Scenario, Scope, SemiflowKind, TrajectorySpec, VerifyMode,
    FALSIFICATION_MEMBER_SIZES, FALSIFICATION_THRESHOLDS, FALSIFICATION_UNIFORM_CAPS,
    TIGHT_CONSTANT_CAP,
};

type CheckResult = Result<(), Box<dyn std::error::Error>>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+).into());
        }
    };
}

fn criterion(number: u32, title: &str, body: impl FnOnce() -> CheckResult) {
    match body() {
        Ok(()) => println!("criterion {number} ({title}): PASS"),
        Err(msg) => {
            println!("criterion {number} ({title}): FAIL - {msg}");
            panic!("criterion {number} ({title}) failed: {msg}");
        }
    }
}

const SEED: u64 = 7;
const PROBES: usize = 8;

#[test]
fn criterion_1_structural_laws_hold_at_1e9_on_the_default_grid() {
    criterion(1, "structural laws, residuals <= 1e-9", || {
        let grid = GridPreset::Default.spec();
        for name in ["example1", "example2", "example3"] {
            let sc = Scenario::by_name(name)?;
            let points = sc.sample_points(&grid)?;
            let probes = sc.probes(SEED, PROBES)?;
            let flow = check_semiflow_axioms(
                sc.xi.semiflow,
                &points,
                &grid,
                &MetricParams::default(),
                1e-9,
            )?;
            let cocycle = check_cocycle_axioms(&sc.xi, &points, &probes, &grid, 1e-9)?;
            for report in flow.iter().chain(cocycle.iter()) {
                ensure!(
                    report.pass && report.max_residual <= 1e-9,
                    "{name}: {:?} residual {} exceeds 1e-9",
                    report.law,
                    report.max_residual
                );
            }
        }
        // Every member system of the per-point family obeys the same laws.
        for member in example3_members(&FALSIFICATION_MEMBER_SIZES)? {
            let probes = probe_set(member.xi.dim(), NormKind::L2, SEED, PROBES)?;
            let cocycle =
                check_cocycle_axioms(&member.xi, &member.points, &probes, &grid, 1e-9)?;
            for report in &cocycle {
                ensure!(
                    report.pass,
                    "member {}: {:?} residual {}",
                    member.id,
                    report.law,
                    report.max_residual
                );
            }
        }

        // Negative controls: the checks can actually fail. A squared time
        // step keeps the identity law but breaks two-step composition, and a
        // point-read neutral coefficient breaks operator composition.
        let sc = Scenario::by_name("example2")?;
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;
        let broken = check_semiflow_axioms(
            SemiflowKind::ShiftSquared,
            &points,
            &grid,
            &MetricParams::default(),
            1e-9,
        )?;
        ensure!(broken[0].pass, "squared step must still fix points at equal times");
        ensure!(!broken[1].pass, "squared step must fail the composition law");
        let mut bad_xi = sc.xi.clone();
        bad_xi.laws[2] = ComponentLaw::Neutral { anchor: NeutralAnchor::PointValue };
        let cocycle = check_cocycle_axioms(&bad_xi, &points, &probes, &grid, 1e-9)?;
        ensure!(
            !cocycle[1].pass && cocycle[1].max_residual > 0.1,
            "point-read coefficient must break composition visibly, got {}",
            cocycle[1].max_residual
        );
        Ok(())
    });
}

#[test]
fn criterion_2_projector_compatibility_at_1e12_with_a_norm_witness() {
    criterion(2, "projector compatibility, residuals <= 1e-12", || {
        let sc = Scenario::by_name("example2")?;
        let grid = GridPreset::Default.spec();
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;

        let runs: [(Regime, Vec<_>); 4] = [
            (Regime::ThreeGlobal, sc.global_families.as_slice().to_vec()),
            (Regime::ThreePointwise, sc.pointwise_families.as_slice().to_vec()),
            (Regime::Two, sc.two_families.to_vec()),
            (Regime::Four, sc.four_families.to_vec()),
        ];
        for (regime, families) in runs {
            let report =
                check_compatibility(regime, &families, &sc.xi, &points, &probes, &grid, 1e-12)?;
            ensure!(report.pass, "{} regime failed: {:?}", regime.name(), report.residuals);
            for (label, residual) in &report.residuals {
                ensure!(
                    *residual <= 1e-12,
                    "{} regime, condition {label}: residual {residual}",
                    regime.name()
                );
            }
        }

        // Norm sensitivity: the pairwise norm splitting is a squared-norm
        // identity, so under the sum norm the probe (1,1,0) violates it by
        // |2^2 - 1 - 1| = 2 exactly.
        let l1_probes = probe_set(3, NormKind::L1, SEED, 0)?;
        let report = check_compatibility(
            Regime::Two,
            &sc.two_families,
            &sc.xi,
            &points,
            &l1_probes,
            &grid,
            1e-12,
        )?;
        ensure!(!report.pass, "sum-norm probes must break the norm splitting");
        let worst = report.residuals["pair-split"];
        ensure!(worst == 2.0, "expected pair-split residual exactly 2, got {worst}");
        Ok(())
    });
}

#[test]
fn criterion_3_closed_form_rates_are_verified_and_recovered() {
    criterion(3, "rate verification and recovery on the planar-plus-drift system", || {
        let sc = Scenario::by_name("example2")?;
        let grid = GridPreset::Default.spec();
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;

        let cert = sc
            .analytic_certificates()?
            .global
            .ok_or("default scenario must carry a closed-form certificate")?;
        ensure!(
            cert.nu1 == 1.0 && cert.nu2 == 1.0 && cert.nu0 == 2.0,
            "closed-form rates changed: ({}, {}, {})",
            cert.nu0,
            cert.nu1,
            cert.nu2
        );
        ensure!(
            cert.n0 <= 1.0 + 1e-6 && cert.n1 <= 1.0 + 1e-6 && cert.n2 <= 1.0 + 1e-6,
            "constants must be within 1e-6 of 1"
        );
        let verdict = verify_trichotomy(
            VerifyMode::Global,
            &sc.xi,
            &sc.global_families,
            &cert,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )?;
        ensure!(verdict.pass, "closed-form certificate rejected: {:?}", verdict.margins);

        // Estimation from sweep data alone recovers the decay and growth
        // rates to within one rate-grid step of 1.
        let dense = GridPreset::Dense.spec();
        let dense_points = sc.sample_points(&dense)?;
        let outcome = estimate_rate_constants(
            &sc.xi,
            &sc.global_families,
            EstimateMode::Global,
            &dense_points,
            &probes,
            &dense,
            &standard_rate_grid(),
            TIGHT_CONSTANT_CAP,
        )?;
        let EstimateOutcome::Certificate { certificate: est } = outcome else {
            return Err("estimation must certify the dense sweep".into());
        };
        ensure!(
            (est.nu1 - 1.0).abs() <= 0.1 && (est.nu2 - 1.0).abs() <= 0.1,
            "estimated rates ({}, {}) not within one grid step of 1.0",
            est.nu1,
            est.nu2
        );
        ensure!(
            est.n1 <= TIGHT_CONSTANT_CAP && est.n2 <= TIGHT_CONSTANT_CAP,
            "estimated constants exceed the tight cap"
        );
        Ok(())
    });
}

#[test]
fn criterion_4_per_point_rates_sink_while_no_uniform_certificate_stays_tight() {
    criterion(4, "per-point certificates exist, uniform constants escalate", || {
        let members = example3_members(&FALSIFICATION_MEMBER_SIZES)?;
        let probes = probe_set(3, NormKind::L2, SEED, PROBES)?;
        let grid = GridPreset::Default.spec();
        let report = falsify_global(
            &members,
            &FALSIFICATION_THRESHOLDS,
            &probes,
            &grid,
            &fine_rate_grid(),
            TIGHT_CONSTANT_CAP,
            &FALSIFICATION_UNIFORM_CAPS,
            1e-9,
        )?;

        ensure!(report.per_point_all_certified, "every member must certify on its own");
        for (rate, n) in report.member_rates.iter().zip([1.0_f64, 2.0, 5.0, 10.0]) {
            let lower = 1.0 / (2.0 * n + 1.0) - 0.02;
            let upper = 1.0 / (2.0 * n) + 0.02;
            ensure!(
                rate.certified && rate.nu1 >= lower && rate.nu1 <= upper,
                "member {}: rate {} outside [{lower:.4}, {upper:.4}]",
                rate.id,
                rate.nu1
            );
        }
        ensure!(report.strictly_decreasing, "rates must sink strictly with the member index");
        for hit in &report.thresholds {
            ensure!(
                hit.member.is_some(),
                "threshold {} never crossed; rates do not sink far enough",
                hit.threshold
            );
        }

        // At the strongest witnessed rate, one shared constant must escalate
        // far beyond the per-member constants (which sit at 1), while staying
        // finite: a large-enough cap always readmits it on a finite sweep.
        ensure!(
            report.uniform_minimal_n > 1e2 && report.uniform_minimal_n <= 1e6,
            "uniform constant {} outside the expected escalation window",
            report.uniform_minimal_n
        );
        ensure!(
            report.escalation_factor > 1e2,
            "escalation factor {} too small",
            report.escalation_factor
        );
        let admissibility: BTreeMap<u64, bool> =
            report.uniform_caps.iter().map(|row| (row.n_cap as u64, row.admissible)).collect();
        ensure!(
            admissibility == BTreeMap::from([(100, false), (10_000, true), (1_000_000, true)]),
            "cap admissibility pattern changed: {admissibility:?}"
        );
        ensure!(report.conclusion, "the refutation must conclude non-uniformity");
        Ok(())
    });
}

#[test]
fn criterion_5_envelope_round_trip_keeps_margins_above_minus_1e9() {
    criterion(5, "envelope characterization round trip, margins >= -1e-9", || {
        let sc = Scenario::by_name("example2")?;
        let grid = GridPreset::Default.spec();
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;
        let anchor = sc.anchor()?;

        let cert = sc
            .analytic_certificates()?
            .pointwise
            .ok_or("default scenario must carry a closed-form orbit certificate")?;
        let base = verify_trichotomy(
            VerifyMode::Pointwise,
            &sc.xi,
            &sc.pointwise_families,
            &cert,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )?;
        ensure!(base.pass, "source certificate rejected: {:?}", base.margins);

        let (phi1, phi2) = phi_from_constants(&cert)?;
        let envelope = check_phi_characterization(
            &sc.xi,
            &anchor,
            &sc.two_families[0],
            &sc.two_families[1],
            &phi1,
            &phi2,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )?;
        ensure!(envelope.pass, "envelope bounds rejected: {:?}", envelope.margins);
        for (label, margin) in &envelope.margins {
            if let Some(m) = margin {
                ensure!(*m >= -1e-9, "envelope margin {label} = {m} below -1e-9");
            }
        }

        let back = constants_from_phi(
            &phi1,
            &phi2,
            Scope::Pointwise { x0: anchor },
            1e-12,
            50.0,
        )?;
        let verdict = verify_trichotomy(
            VerifyMode::Pointwise,
            &sc.xi,
            &sc.pointwise_families,
            &back,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )?;
        ensure!(verdict.pass, "extracted certificate rejected: {:?}", verdict.margins);
        for (label, margin) in &verdict.margins {
            if let Some(m) = margin {
                ensure!(*m >= -1e-9, "round-trip margin {label} = {m} below -1e-9");
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_6_integral_bounds_hold_with_certificate_budgets() {
    criterion(6, "integral characterizations under derived budgets", || {
        let sc = Scenario::by_name("example2")?;
        let grid = GridPreset::Default.spec();
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;

        let cert = sc
            .analytic_certificates()?
            .global
            .ok_or("default scenario must carry a closed-form certificate")?;
        let budget = integral_budget_from_certificate(&cert)?;
        ensure!(budget.alpha == 4.0, "weight rate must be twice the neutral rate");
        let x0 = sc.space.limit_point()?;

        let runs = [
            (IntegralKind::StableTotal, 0usize, budget.stable_bound),
            (IntegralKind::UnstableRatio, 1, budget.unstable_bound),
            (IntegralKind::NeutralWeighted, 2, budget.neutral_bound),
            (IntegralKind::NeutralWeightedDual, 3, budget.neutral_bound),
        ];
        for (kind, family_index, bound) in runs {
            let params =
                IntegralParams { alpha: Some(budget.alpha), bound, ..IntegralParams::default() };
            let result = integral_bound(
                kind,
                &sc.xi,
                &x0,
                &sc.four_families[family_index],
                &params,
                &points,
                &probes,
                &grid,
            )?;
            ensure!(
                result.pass,
                "{} failed: ratio {} at {}",
                kind.name(),
                result.worst_ratio,
                result.worst_cell
            );
            if kind == IntegralKind::StableTotal {
                // On the constant-limit orbit the stable component contracts
                // at net rate 2, so the full-tail integral is exactly 1/2.
                ensure!(
                    (result.computed_integral - 0.5).abs() <= 1e-6,
                    "stable tail integral {} not within 1e-6 of 0.5",
                    result.computed_integral
                );
            }
        }

        // Negative control: on the decaying orbit the growth-direction ratio
        // exceeds a unit budget, so the same check must reject it.
        let anchor = sc.anchor()?;
        let params = IntegralParams { bound: 1.0, ..IntegralParams::default() };
        let rejected = integral_bound(
            IntegralKind::UnstableRatio,
            &sc.xi,
            &anchor,
            &sc.four_families[1],
            &params,
            &points,
            &probes,
            &grid,
        )?;
        ensure!(
            !rejected.pass && rejected.worst_ratio > 1.0,
            "unit budget must be exceeded on the decaying orbit, got ratio {}",
            rejected.worst_ratio
        );
        Ok(())
    });
}

#[test]
fn criterion_7_one_step_hypotheses_yield_a_working_certificate() {
    criterion(7, "one-step hypotheses to certificate, step factor e^-2 at gap 2", || {
        let sc = Scenario::by_name("example2")?;
        let grid = GridPreset::Dense.spec();
        let points = sc.sample_points(&grid)?;
        let probes = sc.probes(SEED, PROBES)?;
        let search = HypothesisSearch::default();

        let hyp = check_integral_hypotheses(
            &sc.xi,
            &sc.four_families,
            &search,
            &points,
            &probes,
            &grid,
        )?;
        let target = (-2.0_f64).exp();
        ensure!(
            hyp.contraction_gap == 2.0 && (hyp.contraction_factor - target).abs() <= 1e-6,
            "contraction step ({}, {}) not (2, e^-2)",
            hyp.contraction_gap,
            hyp.contraction_factor
        );
        ensure!(
            hyp.expansion_gap == 2.0 && (hyp.expansion_factor - target).abs() <= 1e-6,
            "expansion step ({}, {}) not (2, e^-2)",
            hyp.expansion_gap,
            hyp.expansion_factor
        );
        ensure!(
            (hyp.growth_rate - 2.0).abs() <= 1e-9 && (hyp.decay_rate - 2.0).abs() <= 1e-9,
            "auxiliary growth/decay rates ({}, {}) drifted from 2",
            hyp.growth_rate,
            hyp.decay_rate
        );

        let anchor = sc.anchor()?;
        let derivation = sufficiency_certificate(
            &sc.xi,
            &sc.four_families,
            4.0,
            &anchor,
            &search,
            &points,
            &probes,
            &grid,
        )?;
        let cert = &derivation.certificate;
        ensure!(
            (cert.nu1 - 1.0).abs() <= 1e-9 && (cert.nu2 - 1.0).abs() <= 1e-9,
            "derived rates ({}, {}) drifted from the step factors",
            cert.nu1,
            cert.nu2
        );
        ensure!(cert.nu0 > 0.0, "derived neutral rate must be positive");
        ensure!(
            derivation.beta > 1.5 && derivation.beta < 2.5,
            "tail decay rate {} outside (1.5, 2.5)",
            derivation.beta
        );
        let verdict = verify_trichotomy(
            VerifyMode::Pointwise,
            &sc.xi,
            &sc.pointwise_families,
            cert,
            &points,
            &probes,
            &grid,
            1e-9,
            None,
        )?;
        ensure!(verdict.pass, "derived certificate rejected: {:?}", verdict.margins);
        Ok(())
    });
}

#[test]
fn criterion_8_closed_form_integrals_match_quadrature_within_1e8() {
    criterion(8, "closed-form vs adaptive quadrature, 200 pairs per generator", || {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let generators = [
            TrajectorySpec::ExpDecayToLevel { level: 1.0, amplitude: 1.0 },
            TrajectorySpec::ExpDecayToLevel { level: 2.0, amplitude: 3.0 },
            TrajectorySpec::IntervalDecay { n: 1 },
            TrajectorySpec::IntervalDecay { n: 10 },
            TrajectorySpec::Constant { value: 1.5 },
        ];
        for spec in &generators {
            for _ in 0..200 {
                let a: f64 = rng.gen::<f64>() * 40.0;
                let b: f64 = rng.gen::<f64>() * 40.0;
                let (s, t) = if a <= b { (a, b) } else { (b, a) };
                let closed = closed_form_log_growth(spec, s, s, t)?;
                let (numeric, err) = quadrature(|tau| Ok(spec.value(tau)), s, t, 1e-12)?;
                ensure!(
                    (closed - numeric).abs() <= 1e-8,
                    "{spec:?} on [{s:.4}, {t:.4}]: closed {closed} vs quadrature {numeric} \
                     (reported error {err:.2e})"
                );
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_9_report_runs_are_reproducible_byte_for_byte() {
    criterion(9, "byte-identical reports modulo timestamp, exit 0", || {
        let dir = tempfile::tempdir()?;
        let mut texts = Vec::new();
        for name in ["a.json", "b.json"] {
            let path = dir.path().join(name);
            let output = Command::new(env!("CARGO_BIN_EXE_skewflow"))
                .args(["report", "--scenario", "example2", "--seed", "7", "--out"])
                .arg(&path)
                .output()?;
            ensure!(
                output.status.code() == Some(0),
                "expected exit 0, got {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr)
            );
            texts.push(std::fs::read_to_string(&path)?);
        }
        let strip = |text: &str| -> String {
            text.lines()
                .filter(|line| !line.trim_start().starts_with("\"generated_unix_ms\""))
                .collect::<Vec<_>>()
                .join("\n")
        };
        ensure!(strip(&texts[0]) == strip(&texts[1]), "reports differ beyond the timestamp");
        ensure!(
            texts[0].contains("\"overall_pass\": true"),
            "the reproducible report must also pass"
        );
        Ok(())
    });
}
