use pfl_core::domain::{sample_boundary, DomainSpec};
use pfl_core::potential::{wos_harmonic_measure, WosConfig};
use pfl_core::verify::{run_scenario, Budgets, CheckName, RunBudget, ScenarioSpec, Status};

#[test]
fn hemisphere_carries_half_the_harmonic_measure() {
    let d = DomainSpec::ball(1.0, false).build().unwrap();
    let cloud = sample_boundary(&d, 4000).unwrap();
    let cfg = WosConfig {
        trajectories: 20_000,
        ..WosConfig::kernel_default(5)
    };
    let est = wos_harmonic_measure(&d, &cloud, &cfg).unwrap();
    assert_eq!(est.censored, 0);
    let upper = est
        .exits
        .iter()
        .filter(|e| cloud.points()[e.sample as usize].0[2] > 0.0)
        .count();
    let n = est.exits.len() as f64;
    let frac = upper as f64 / n;
    let se = (0.25 / n).sqrt();
    assert!((frac - 0.5).abs() < 4.0 * se, "upper fraction {frac}");
}

#[test]
fn scenario_survives_json_and_reruns_identically() {
    let spec = ScenarioSpec {
        budgets: Budgets {
            samples: 4000,
            kernel: RunBudget {
                trajectories: 20_000,
                stop_shell: 1e-3,
                max_steps: 10_000,
            },
            kernel_sites: 100,
            ..Budgets::default()
        },
        checks: vec![CheckName::Sandwich],
        ..ScenarioSpec::new(3, DomainSpec::ball(1.0, true))
    };
    let json = serde_json::to_string(&spec).unwrap();
    let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);

    let a = run_scenario(&spec).unwrap();
    let b = run_scenario(&back).unwrap();
    assert_eq!(a, b);
    let c = a.check(0, CheckName::Sandwich).unwrap();
    assert_eq!(c.status, Status::Pass, "{:?}", c.notes);
    assert!(a.all_pass());
}
