use alloc::vec;
use alloc::vec::Vec;

use super::checks::{admissible_radii, Hypothesis, ThetaRow};
use super::*;
use crate::domain::{sample_boundary, DomainSpec, ModeTerm, RadiiPair, StarDomain};
use crate::math::{asin, cos, exp, sqrt, PI};
use crate::potential::{DimensionConstants, GradientShellRow};

fn c() -> DimensionConstants {
    DimensionConstants::new(2)
}

fn hyp(eps: f64) -> Hypothesis {
    Hypothesis {
        eps_meas: eps,
        eps_stderr: 0.0,
        epsilon: eps,
        k0: PI,
        coverage: 1.0,
    }
}

fn unit_radius() -> f64 {
    1.0 / sqrt(4.0 * PI)
}

fn row(width: f64, sup: f64, se: f64) -> GradientShellRow {
    GradientShellRow {
        width,
        sup_grad: sup,
        stderr: se,
        argmax_sample: 0,
        probes: 1,
        reprojected: 0,
        values: vec![sup],
    }
}

#[test]
fn worst_entry_decides_pass() {
    let mut r = CheckResult::new(CheckName::Sandwich, "x");
    let mut w = Worst::default();
    w.push(0.5, 0.0);
    w.push(-0.01, 0.02);
    r.decide(&w);
    assert_eq!((r.margin, r.slack), (-0.01, 0.02));
    assert!(r.pass);
    w.push(-0.03, 0.02);
    r.decide(&w);
    assert_eq!(r.status, Status::Fail);
    assert!(!r.pass);
    assert_eq!(r.pass, r.margin >= -r.slack);
}

#[test]
fn sandwich_on_exact_unit_ball() {
    let r = unit_radius();
    let radii = RadiiPair {
        r1: r,
        r2: r,
        r1_lower: r,
        r2_upper: r,
    };
    for eps in [0.0, 0.01, 0.3] {
        let res = check_sandwich(&radii, &hyp(eps), &c());
        assert!(res.pass, "{res:?}");
        assert!((res.conclusion["sigma_n_r1_n"] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sandwich_fails_with_zero_epsilon_on_perturbed_domain() {
    let d = DomainSpec::perturbed(
        1.0,
        vec![ModeTerm {
            degree: 2,
            order: 2,
            coeff: 1.0,
        }],
        0.05,
        true,
    )
    .build()
    .unwrap();
    let res = check_sandwich(&d.radii(), &hyp(0.0), &c());
    assert_eq!(res.status, Status::Fail);
    assert!(res.margin < -res.slack);
    let ok = check_sandwich(&d.radii(), &hyp(0.2), &c());
    assert!(ok.pass);
}

#[test]
fn stability_distance_on_unit_ball_is_within_sampling_slack() {
    let d = StarDomain::ball(unit_radius()).unwrap();
    let cloud = sample_boundary(&d, 4000).unwrap();
    let m = stability_distance(&cloud, &c(), 4000).unwrap();
    assert!(m.distance <= m.slack, "{m:?}");
    assert!(check_stability_distance(&m, &hyp(0.0)).pass);
    let forced = StabilityDistance { distance: 1.0, ..m };
    assert_eq!(check_stability_distance(&forced, &hyp(0.01)).status, Status::Fail);
}

#[test]
fn stability_distance_of_a_larger_sphere() {
    // concentric spheres: both one-sided deviations equal the radius gap
    let r = unit_radius();
    let d = StarDomain::ball(1.1 * r).unwrap();
    let cloud = sample_boundary(&d, 4000).unwrap();
    let m = stability_distance(&cloud, &c(), 4000).unwrap();
    assert!((m.distance - 0.2 * r).abs() <= m.slack, "{m:?}");
}

#[test]
fn main_lemma_bound_and_trend() {
    let g = GradientMeasurement {
        rows: vec![
            row(0.04, 1.05, 0.01),
            row(0.02, 1.03, 0.01),
            row(0.01, 1.02, 0.01),
        ],
        min_width: 0.005,
        coarsened: false,
    };
    assert!(check_main_lemma(&g, &hyp(0.05)).pass);
    // bound e^0.01 < 1.02 - 2 se
    assert_eq!(check_main_lemma(&g, &hyp(0.0)).status, Status::Fail);
    let mut doubled = g.clone();
    for r in &mut doubled.rows {
        r.sup_grad *= 2.0;
        r.stderr *= 2.0;
    }
    assert_eq!(check_main_lemma(&doubled, &hyp(0.05)).status, Status::Fail);
    // gradient growing toward the boundary beyond noise breaks the trend
    let rising = GradientMeasurement {
        rows: vec![
            row(0.04, 1.0, 0.005),
            row(0.02, 1.05, 0.005),
            row(0.01, 1.1, 0.005),
        ],
        ..g
    };
    let res = check_main_lemma(&rising, &hyp(0.5));
    assert_eq!(res.status, Status::Fail);
    assert!((res.margin + 0.05).abs() < 1e-12);
}

#[test]
fn admissible_radii_respect_resolution() {
    let radii = admissible_radii(1.0, 0.01, 4);
    assert_eq!(radii.len(), 7);
    assert!((radii[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    assert!(admissible_radii(0.05, 0.01, 4).is_empty());
}

#[test]
fn reifenberg_unresolvable_below_resolution() {
    let d = StarDomain::ball(unit_radius()).unwrap();
    let cloud = sample_boundary(&d, 2000).unwrap();
    let m = reifenberg_measurement(&cloud, d.radii().r1, &hyp(1e-5), 10, 3);
    let res = check_reifenberg(&m, &hyp(1e-5), 0.1);
    assert_eq!(res.status, Status::Unresolvable);
    assert!(!res.pass);
}

#[test]
fn reifenberg_on_the_ball_follows_the_sphere_profile() {
    // ε with √2 √(e^{2ε} - 1) = 0.4, so ρ = 0.4 R
    let eps = 0.5 * (1.0 + 0.08f64).ln();
    let h = hyp(eps);
    let r = unit_radius();
    let d = StarDomain::ball(r).unwrap();
    let cloud = sample_boundary(&d, 40_000).unwrap();
    let m = reifenberg_measurement(&cloud, r, &h, 12, 2);
    assert!((m.rho - 0.4 * r).abs() < 1e-12);
    // θ of a sphere of radius R at scale s is about s / R
    for t in &m.profile {
        assert!((t.theta - t.radius / r).abs() <= 0.01 + t.slack, "{t:?}");
    }
    assert!(m.profile.len() >= 24);
    let res = check_reifenberg(&m, &h, 0.3);
    assert!(res.pass, "{res:?}");
    let tight = check_reifenberg(&m, &h, 0.1);
    assert_eq!(tight.status, Status::Fail);
}

#[test]
fn reifenberg_fails_on_a_curved_theta_row() {
    let m = ReifenbergMeasurement {
        rho: 0.5,
        r1: 1.0,
        radii: vec![0.35],
        profile: vec![ThetaRow {
            center_index: 0,
            radius: 0.35,
            theta: 0.3,
            slack: 0.01,
            reliable: true,
        }],
        at_rho: vec![ThetaRow {
            center_index: 0,
            radius: 0.5,
            theta: 0.4,
            slack: 0.01,
            reliable: true,
        }],
        r_min: 0.01,
        skipped: 0,
    };
    let res = check_reifenberg(&m, &hyp(0.1), 0.1);
    assert_eq!(res.status, Status::Fail);
    assert!((res.margin + 0.2).abs() < 1e-12);
}

#[test]
fn ahlfors_on_the_ball() {
    let r = unit_radius();
    let d = StarDomain::ball(r).unwrap();
    let cloud = sample_boundary(&d, 20_000).unwrap();
    // balls centered on a sphere cut caps of area exactly π s²
    let m = ahlfors_measurement(&cloud, 0.4 * r, 20, 3, &c());
    let res = check_ahlfors(&m, &hyp(0.1), 0.05, &c());
    assert!(res.pass, "{res:?}");
    assert!((res.conclusion["ratio_max"] - 1.0).abs() < 0.03);
    // r comparable to R: still exact on the sphere and inside the coarse bounds
    let big = ahlfors_measurement(&cloud, 1.5 * r, 10, 1, &c());
    assert!(check_ahlfors(&big, &hyp(0.1), 0.05, &c()).pass);
    let mut doubled = m.clone();
    for e in &mut doubled.entries {
        e.ratio *= 2.0;
    }
    assert_eq!(check_ahlfors(&doubled, &hyp(0.1), 0.1, &c()).status, Status::Fail);
}

#[test]
fn bmo_on_the_ball() {
    let r = unit_radius();
    let d = StarDomain::ball(r).unwrap();
    let cloud = sample_boundary(&d, 40_000).unwrap();
    let s = 0.1 * r;
    let b = bmo_measurement(&cloud, s, 20).unwrap().unwrap();
    // mean normal over a cap of half-angle α has length (1 + cos α) / 2
    let alpha = 2.0 * asin(s / (2.0 * r));
    let mean = (1.0 + cos(alpha)) / 2.0;
    let exact = sqrt(1.0 - mean * mean);
    assert!(
        (b.norm - exact).abs() < 0.03 * exact + b.slack,
        "{} vs {exact}",
        b.norm
    );
    assert!(check_bmo(Some(&b), s, &hyp(0.1), 0.1).pass);
    assert_eq!(check_bmo(Some(&b), s, &hyp(0.1), 0.05).status, Status::Fail);
    assert!(bmo_measurement(&cloud, 1e-4, 20).unwrap().is_none());
    assert_eq!(check_bmo(None, 1e-4, &hyp(0.1), 0.1).status, Status::Unresolvable);
}

#[test]
fn rho_formula() {
    let h = hyp(0.1);
    assert!((h.rho(2.0) - 2.0 * sqrt(2.0) * sqrt(exp(0.2) - 1.0)).abs() < 1e-15);
}

fn base_spec() -> ScenarioSpec {
    ScenarioSpec::new(5, DomainSpec::ball(1.0, true))
}

#[test]
fn scenario_validation() {
    assert!(base_spec().validate().is_ok());
    let mut s = base_spec();
    s.schema = 2;
    assert!(s.validate().unwrap_err().is_usage());
    let mut s = base_spec();
    s.checks = vec![CheckName::Bmo, CheckName::Bmo];
    assert!(s.validate().is_err());
    let mut s = base_spec();
    s.checks.clear();
    assert!(s.validate().is_err());
    let mut s = base_spec();
    s.domain.normalize = false;
    assert!(s.validate().is_err());
    s.checks = vec![CheckName::Bmo];
    assert!(s.validate().is_ok());
    let mut s = base_spec();
    s.family = vec![0.01, 0.02];
    assert!(s.validate().is_err(), "a family needs modes");
    s.domain.modes = vec![ModeTerm {
        degree: 2,
        order: 0,
        coeff: 1.0,
    }];
    assert!(s.validate().is_ok());
    s.family.push(0.4);
    assert!(matches!(s.validate(), Err(crate::Error::AmplitudeCap(_))));
    let mut s = base_spec();
    s.domain.amplitude = 0.4;
    s.domain.modes = vec![ModeTerm {
        degree: 2,
        order: 0,
        coeff: 1.0,
    }];
    assert!(s.validate().is_err());
    let mut s = base_spec();
    s.targets.sigma = 0.0;
    assert!(s.validate().is_err());
    let mut s = base_spec();
    s.budgets.widths = vec![0.01, 0.02];
    assert!(s.validate().is_err());
    let mut s = base_spec();
    s.tamper.gradient_scale = Some(0.0);
    assert!(s.validate().is_err());
}

#[test]
fn scenario_json_rejects_unknown_checks_and_fields() {
    let ok = r#"{"schema": 1, "seed": 3, "domain": {"dim": 2, "normalize": true}, "checks": ["sandwich"]}"#;
    let s: ScenarioSpec = serde_json::from_str(ok).unwrap();
    assert_eq!(s.budgets, Budgets::default());
    let bad = r#"{"schema": 1, "seed": 3, "domain": {"dim": 2}, "checks": ["flatness"]}"#;
    assert!(serde_json::from_str::<ScenarioSpec>(bad).is_err());
    let extra = r#"{"schema": 1, "seed": 3, "domain": {"dim": 2}, "checks": [], "colour": 1}"#;
    assert!(serde_json::from_str::<ScenarioSpec>(extra).is_err());
}

#[test]
fn family_members_share_modes() {
    let mut s = base_spec();
    s.domain.modes = vec![ModeTerm {
        degree: 3,
        order: 1,
        coeff: 1.0,
    }];
    s.family = vec![0.01, 0.02, 0.05];
    let m = s.member_domains();
    assert_eq!(m.len(), 3);
    assert_eq!(m[2].amplitude, 0.05);
    assert_eq!(m[2].modes, s.domain.modes);
}

fn run_fixture(name: CheckName) -> VerificationReport {
    let spec = self_test_fixtures(11)
        .into_iter()
        .find(|s| s.checks == vec![name])
        .unwrap();
    run_scenario(&spec).unwrap()
}

#[test]
fn self_test_fixtures_cover_every_check() {
    let f = self_test_fixtures(1);
    let mut names: Vec<CheckName> = f.iter().flat_map(|s| s.checks.clone()).collect();
    names.sort();
    assert_eq!(names, CheckName::ALL.to_vec());
    for s in &f {
        assert!(!s.tamper.is_none());
        s.validate().unwrap();
    }
}

#[test]
fn cheap_self_test_fixtures_fail() {
    for name in [
        CheckName::Ahlfors,
        CheckName::Bmo,
        CheckName::Reifenberg,
        CheckName::Sandwich,
        CheckName::StabilityDistance,
    ] {
        let rep = run_fixture(name);
        let c = rep.check(0, name).unwrap();
        assert_eq!(c.status, Status::Fail, "{c:?}");
        assert!(!rep.all_pass());
        assert_eq!(rep.tally.failed, 1);
    }
}

#[test]
fn report_is_deterministic_and_round_trips() {
    let mut spec = self_test_fixtures(4).remove(0);
    spec.tamper = Tamper::default();
    spec.checks = vec![
        CheckName::Ahlfors,
        CheckName::Sandwich,
        CheckName::StabilityDistance,
    ];
    let a = run_scenario(&spec).unwrap();
    let b = run_scenario(&spec).unwrap();
    assert_eq!(a, b);
    let text = serde_json::to_string_pretty(&a).unwrap();
    let back: VerificationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    assert_eq!(a.members[0].checks.len(), 3);
    assert!(a.members[0].checks.windows(2).all(|w| w[0].name < w[1].name));
    assert_eq!(a.trend.len(), 1);
    assert!(a.render_table().contains("stability_distance"));
}

#[test]
fn stage_errors_are_recorded_per_check() {
    let mut spec = self_test_fixtures(4).remove(0);
    spec.tamper = Tamper::default();
    spec.checks = vec![CheckName::Ahlfors, CheckName::Bmo];
    // one step per walk censors every trajectory
    spec.budgets.kernel.max_steps = 1;
    let rep = run_scenario(&spec).unwrap();
    assert!(rep.members[0].stage_error.is_some());
    assert_eq!(rep.tally.errors, 2);
    assert!(rep.members[0]
        .checks
        .iter()
        .all(|c| c.status == Status::Error && !c.pass));
}
