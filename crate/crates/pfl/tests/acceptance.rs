//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p pfl --test acceptance -- 3 7` runs a subset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use pfl::artifacts::read_json;
use pfl::{Command, Invocation};
use pfl_core::domain::{sample_boundary, DomainSpec, ModeTerm, StarDomain};
use pfl_core::geometry::P3;
use pfl_core::potential::{
    ball_green, ball_green_gradient_magnitude, ball_poisson_kernel, estimate_green, flux_identity_check,
    riesz_mean_identity_check, wos_harmonic_measure, DimensionConstants, WosConfig,
};
use pfl_core::rng::{derive_seed, Stream, TAG_AUDIT};
use pfl_core::sphere::{fibonacci_directions, gauss_grid, gauss_legendre};
use pfl_core::verify::{
    check_sandwich, check_stability_distance, self_test_fixtures, stability_distance, Budgets, CheckName,
    RunBudget, ScenarioSpec, Status, Targets, VerificationReport,
};

type Outcome = Result<String, String>;
type FamilyCriterion = fn(&Family) -> Outcome;

const SEED: u64 = 7;
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

fn constants() -> DimensionConstants {
    DimensionConstants::new(2)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64())
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn bumpy(amplitude: f64) -> DomainSpec {
    DomainSpec::perturbed(
        1.0,
        vec![ModeTerm {
            degree: 2,
            order: 2,
            coeff: 1.0,
        }],
        amplitude,
        true,
    )
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_spec(dir: &Path, spec: &ScenarioSpec) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_vec_pretty(spec).unwrap()).unwrap();
    path
}

/// Runs `verify` in-process and returns the stored report.
fn verify(name: &str, spec: &ScenarioSpec) -> Result<(VerificationReport, PathBuf), String> {
    let dir = scratch(name);
    let inv = Invocation {
        config: write_spec(&dir, spec),
        out: Some(dir.join("out")),
        ..Invocation::default()
    };
    pfl::run(Command::Verify, &inv).map_err(|e| e.to_string())?;
    let report = read_json(&dir.join("out/report.json")).map_err(|e| e.to_string())?;
    Ok((report, dir.join("out")))
}

fn summarize(report: &VerificationReport, name: CheckName) -> Vec<String> {
    report
        .members
        .iter()
        .filter_map(|m| {
            let r = m.checks.iter().find(|c| c.name == name)?;
            Some(format!(
                "a={} {:?} margin {:.4} slack {:.4}",
                m.amplitude, r.status, r.margin, r.slack
            ))
        })
        .collect()
}

fn all_pass(report: &VerificationReport, name: CheckName) -> Result<(), String> {
    for m in &report.members {
        let r = m
            .checks
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| format!("{} missing", name.as_str()))?;
        ensure(r.status == Status::Pass, || {
            format!(
                "{} at amplitude {}: {:?}, margin {:.4}, slack {:.4}, {:?}",
                name.as_str(),
                m.amplitude,
                r.status,
                r.margin,
                r.slack,
                r.notes
            )
        })?;
    }
    Ok(())
}

// Green function of B(0, R) with the pole at p, by Kelvin reflection.
fn kelvin_green(x: &P3, p: &P3, radius: f64) -> f64 {
    let f = |t: f64| 1.0 / (FOUR_PI * t);
    let a = p.norm();
    if a == 0.0 {
        return f(x.norm()) - f(radius);
    }
    let star = *p * (radius * radius / (a * a));
    f(x.dist(p)) - (radius / a) * f(x.dist(&star))
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let c = constants();
    let radius = 0.8;
    let (gl_x, gl_w) = gauss_legendre(40);
    let mut worst: f64 = 0.0;
    for (k, u) in fibonacci_directions(25).iter().enumerate() {
        let t = radius * (0.05 + 0.9 * k as f64 / 24.0);
        let x = *u * t;
        // G(x) = ∫_|x|^R dt / (4π t²) by Gauss-Legendre
        let half = 0.5 * (radius - t);
        let quad: f64 = gl_x
            .iter()
            .zip(&gl_w)
            .map(|(z, w)| {
                let s = t + half * (z + 1.0);
                w * half / (FOUR_PI * s * s)
            })
            .sum();
        let g = ball_green(&x, radius, &c).map_err(|e| e.to_string())?;
        worst = worst.max(rel(g, quad));
        // |∇G| by central differences of the Green function along x/|x|
        let h = 1e-5 * t;
        let gp = ball_green(&(*u * (t + h)), radius, &c).map_err(|e| e.to_string())?;
        let gm = ball_green(&(*u * (t - h)), radius, &c).map_err(|e| e.to_string())?;
        let fd = (gm - gp) / (2.0 * h);
        let gm_mag = ball_green_gradient_magnitude(&x, radius, &c).map_err(|e| e.to_string())?;
        worst = worst.max(rel(gm_mag, fd));
    }
    // Poisson kernel: inward normal derivative of the Kelvin Green function,
    // and the reproducing property for a harmonic polynomial.
    let grid = gauss_grid(120, 240);
    for (k, v) in fibonacci_directions(6).iter().enumerate() {
        let pole = *v * (radius * 0.12 * (k + 1) as f64);
        for u in fibonacci_directions(12) {
            let q = u * radius;
            let h = 1e-5 * radius;
            let fd = (kelvin_green(&(u * (radius - h)), &pole, radius)
                - kelvin_green(&(u * (radius + h)), &pole, radius))
                / (2.0 * h);
            let p = ball_poisson_kernel(&q, &pole, radius, &c).map_err(|e| e.to_string())?;
            worst = worst.max(rel(p, fd));
        }
        let harmonic =
            |y: &P3| y.0[0] * y.0[1] + 2.0 * y.0[2] * y.0[2] - y.0[0] * y.0[0] - y.0[1] * y.0[1] + y.0[2];
        let (mut mass, mut repro) = (0.0, 0.0);
        for (u, w) in &grid {
            let q = *u * radius;
            let p =
                ball_poisson_kernel(&q, &pole, radius, &c).map_err(|e| e.to_string())? * w * radius * radius;
            mass += p;
            repro += p * harmonic(&q);
        }
        worst = worst.max((mass - 1.0).abs());
        // relative to the size of the polynomial on the sphere
        worst = worst.max((repro - harmonic(&pole)).abs() / (radius * radius));
    }
    let elapsed = t0.elapsed();
    ensure(worst < 1e-6, || format!("worst relative deviation {worst:.3e}"))?;
    within(elapsed, 10.0)?;
    Ok(format!(
        "worst relative deviation {worst:.2e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

/// Integral over the cap of the unit sphere around `axis` with chord radius
/// `chord`, in cap-aligned coordinates.
fn cap_integral(axis: &P3, chord: f64, f: impl Fn(&P3) -> f64) -> f64 {
    let (a, b) = axis.tangent_frame();
    let z0 = 1.0 - chord * chord / 2.0;
    let half = 0.5 * (1.0 - z0);
    let (zs, ws) = gauss_legendre(64);
    let n_phi = 128;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut s = 0.0;
    for (z, w) in zs.iter().zip(&ws) {
        let zc = z0 + half * (z + 1.0);
        let st = (1.0 - zc * zc).sqrt();
        for j in 0..n_phi {
            let phi = dphi * (j as f64 + 0.5);
            let v = *axis * zc + (a * phi.cos() + b * phi.sin()) * st;
            s += f(&v) * w * half * dphi;
        }
    }
    s
}

fn kernel_cfg(trajectories: usize, seed: u64) -> WosConfig {
    WosConfig {
        trajectories,
        ..WosConfig::kernel_default(seed)
    }
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let n = 100_000;
    let ball = StarDomain::ball(1.0).map_err(|e| e.to_string())?;
    let cloud = sample_boundary(&ball, 40_000).map_err(|e| e.to_string())?;
    let est = wos_harmonic_measure(&ball, &cloud, &kernel_cfg(n, SEED)).map_err(|e| e.to_string())?;
    let mut worst_z: f64 = 0.0;
    for (i, u) in fibonacci_directions(20).iter().enumerate() {
        let chord = 0.25 + 0.05 * i as f64;
        let (p, _) = est.cap(&cloud, u, chord);
        // solid-angle fraction of the cap with chord radius s on the unit sphere
        let truth = chord * chord / 4.0;
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        worst_z = worst_z.max((p - truth).abs() / se);
    }

    let center = P3::new([0.0, 0.0, 0.5]);
    let shifted = StarDomain::shifted_sphere(center, 1.0).map_err(|e| e.to_string())?;
    let cloud = sample_boundary(&shifted, 40_000).map_err(|e| e.to_string())?;
    let est = wos_harmonic_measure(&shifted, &cloud, &kernel_cfg(n, SEED + 1)).map_err(|e| e.to_string())?;
    let c = constants();
    let pole = -center;
    let mut worst_off: f64 = 0.0;
    for (i, u) in fibonacci_directions(10).iter().enumerate() {
        let q = center + *u;
        let chord = 0.4 + 0.05 * i as f64;
        let (p, _) = est.cap(&cloud, &q, chord);
        let truth = cap_integral(u, chord, |v| ball_poisson_kernel(v, &pole, 1.0, &c).unwrap());
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        worst_off = worst_off.max((p - truth).abs() / se);
    }
    let elapsed = t0.elapsed();
    let detail = format!(
        "20 ball caps worst |z| {worst_z:.2}, 10 off-center caps worst |z| {worst_off:.2}, {:.1} s",
        elapsed.as_secs_f64()
    );
    ensure(worst_z <= 3.0 && worst_off <= 3.0, || detail.clone())?;
    within(elapsed, 120.0)?;
    Ok(detail)
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let c = constants();
    let d = bumpy(0.05).build().map_err(|e| e.to_string())?;
    let cloud = sample_boundary(&d, 20_000).map_err(|e| e.to_string())?;
    let radii = d.radii();
    let mut min_margin = f64::INFINITY;
    for (k, u) in fibonacci_directions(50).iter().enumerate() {
        let frac = 0.1 + 0.88 * (k % 10) as f64 / 9.0;
        let x = *u * (d.radius(u) * frac);
        let g = estimate_green(
            &d,
            &cloud,
            &x,
            &WosConfig::green_default(derive_seed(SEED, 3, k as u64)),
            &c,
        )
        .map_err(|e| e.to_string())?;
        let lo = if x.norm() < radii.r1 {
            ball_green(&x, radii.r1, &c).map_err(|e| e.to_string())?
        } else {
            0.0
        };
        let hi = ball_green(&x, radii.r2, &c).map_err(|e| e.to_string())?;
        let slack = 2.0 * g.stderr;
        let margin = (g.value - (lo - slack)).min(hi + slack - g.value);
        ensure(margin >= 0.0, || {
            format!(
                "probe {k} at |x| = {:.4}: {lo:.5} <= {:.5} <= {hi:.5} fails (2se {slack:.5})",
                x.norm(),
                g.value
            )
        })?;
        min_margin = min_margin.min(margin);
    }
    let elapsed = t0.elapsed();
    within(elapsed, 300.0)?;
    Ok(format!(
        "50 probes inside the sandwich, smallest margin {min_margin:.3e}, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

/// Family run shared by criteria 4 to 6.
struct Family {
    report: VerificationReport,
    trend: String,
    elapsed: Duration,
}

fn family() -> Result<Family, String> {
    let t0 = Instant::now();
    let spec = ScenarioSpec {
        family: vec![0.01, 0.02, 0.05],
        checks: vec![
            CheckName::MainLemma,
            CheckName::Sandwich,
            CheckName::StabilityDistance,
        ],
        ..ScenarioSpec::new(SEED, bumpy(0.05))
    };
    let (report, out) = verify("family", &spec)?;
    let trend = std::fs::read_to_string(out.join("trend.csv")).map_err(|e| e.to_string())?;
    Ok(Family {
        report,
        trend,
        elapsed: t0.elapsed(),
    })
}

fn criterion_4(f: &Family) -> Outcome {
    all_pass(&f.report, CheckName::MainLemma)?;
    within(f.elapsed, 900.0)?;
    Ok(format!(
        "{}; family run {:.0} s",
        summarize(&f.report, CheckName::MainLemma).join("; "),
        f.elapsed.as_secs_f64()
    ))
}

/// Times the sandwich and stability checks alone on each member's cloud.
fn post_solve_timing(f: &Family, stability: bool) -> Result<Duration, String> {
    let c = constants();
    let mut worst = Duration::ZERO;
    for m in &f.report.members {
        let meas = m.measurements.as_ref().ok_or("member has no measurements")?;
        let d = bumpy(m.amplitude).build().map_err(|e| e.to_string())?;
        let cloud = sample_boundary(&d, f.report.scenario.budgets.samples).map_err(|e| e.to_string())?;
        let t0 = Instant::now();
        let r = if stability {
            let s = stability_distance(&cloud, &c, f.report.scenario.budgets.sphere_samples)
                .map_err(|e| e.to_string())?;
            check_stability_distance(&s, &meas.hypothesis)
        } else {
            check_sandwich(&d.radii(), &meas.hypothesis, &c)
        };
        worst = worst.max(t0.elapsed());
        let stored = m
            .checks
            .iter()
            .find(|x| x.name == r.name)
            .ok_or("stored check missing")?;
        ensure(stored.margin == r.margin && stored.status == r.status, || {
            format!("recomputed {} differs from the report", r.name.as_str())
        })?;
    }
    Ok(worst)
}

fn criterion_5(f: &Family) -> Outcome {
    all_pass(&f.report, CheckName::Sandwich)?;
    let t = post_solve_timing(f, false)?;
    within(t, 1.0)?;
    Ok(format!(
        "{}; check time {:.2e} s",
        summarize(&f.report, CheckName::Sandwich).join("; "),
        t.as_secs_f64()
    ))
}

fn criterion_6(f: &Family) -> Outcome {
    all_pass(&f.report, CheckName::StabilityDistance)?;
    let t = post_solve_timing(f, true)?;
    within(t, 60.0)?;
    // distance column of the trend table, rows in amplitude order
    let mut rows = f.trend.lines();
    let header: Vec<&str> = rows.next().ok_or("empty trend table")?.split(',').collect();
    let col = header
        .iter()
        .position(|h| *h == "distance")
        .ok_or("no distance column")?;
    let dist: Vec<f64> = rows
        .map(|l| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.parse().ok())
                .ok_or("bad trend row")
        })
        .collect::<Result<_, _>>()?;
    ensure(dist.len() == 3 && dist.windows(2).all(|w| w[0] < w[1]), || {
        format!("distance does not shrink with the amplitude: {dist:?}")
    })?;
    Ok(format!(
        "{}; D by amplitude {:?}; check time {:.2} s",
        summarize(&f.report, CheckName::StabilityDistance).join("; "),
        dist.iter().map(|d| format!("{d:.5}")).collect::<Vec<_>>(),
        t.as_secs_f64()
    ))
}

fn value(m: &BTreeMap<String, f64>, key: &str) -> String {
    m.get(key).map_or_else(|| "missing".into(), |v| format!("{v:.4}"))
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let spec = ScenarioSpec {
        checks: vec![CheckName::Reifenberg],
        ..ScenarioSpec::new(SEED, bumpy(0.05))
    };
    let (report, _) = verify("reifenberg", &spec)?;
    let elapsed = t0.elapsed();
    let r = report
        .check(0, CheckName::Reifenberg)
        .ok_or("reifenberg missing")?;
    let detail = format!(
        "status {:?}, margin {:.4}, slack {:.4}, theta sup {} at r {}, theta at rho {} vs coarse bound {}, {:.0} s",
        r.status,
        r.margin,
        r.slack,
        value(&r.conclusion, "theta_sup"),
        value(&r.conclusion, "theta_sup_radius"),
        value(&r.conclusion, "theta_at_rho_sup"),
        value(&r.conclusion, "coarse_bound"),
        elapsed.as_secs_f64()
    );
    ensure(r.status == Status::Pass, || detail.clone())?;
    within(elapsed, 600.0)?;
    Ok(detail)
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let spec = ScenarioSpec {
        checks: vec![CheckName::Ahlfors, CheckName::Bmo],
        targets: Targets {
            sigma: 0.1,
            delta: 0.1,
            bmo_delta: Some(0.15),
        },
        ..ScenarioSpec::new(SEED, bumpy(0.05))
    };
    let (report, _) = verify("density", &spec)?;
    let elapsed = t0.elapsed();
    let a = report.check(0, CheckName::Ahlfors).ok_or("ahlfors missing")?;
    let b = report.check(0, CheckName::Bmo).ok_or("bmo missing")?;
    let detail = format!(
        "ahlfors {:?} margin {:.4}; bmo {:?} norm {} vs 0.15 at scale {}; {:.0} s",
        a.status,
        a.margin,
        b.status,
        value(&b.conclusion, "norm"),
        value(&b.conclusion, "rho"),
        elapsed.as_secs_f64()
    );
    ensure(a.status == Status::Pass && b.status == Status::Pass, || {
        detail.clone()
    })?;
    within(elapsed, 300.0)?;
    Ok(detail)
}

fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let c = constants();
    let mut lines = Vec::new();
    for (label, spec) in [("ball", DomainSpec::ball(1.0, true)), ("perturbed", bumpy(0.05))] {
        let d = spec.build().map_err(|e| e.to_string())?;
        let cloud = sample_boundary(&d, 40_000).map_err(|e| e.to_string())?;
        let est =
            wos_harmonic_measure(&d, &cloud, &WosConfig::kernel_default(SEED)).map_err(|e| e.to_string())?;
        let r1 = d.radii().r1;
        let mut worst: f64 = 0.0;
        for (k, u) in fibonacci_directions(5).iter().enumerate() {
            let q = d.boundary_point(u);
            let probe = |trajectories, tag: u64| WosConfig {
                trajectories,
                ..WosConfig::green_default(derive_seed(SEED, tag, k as u64))
            };
            let riesz = riesz_mean_identity_check(&d, &cloud, &est, &q, 0.3 * r1, &probe(1_000, 91), &c)
                .map_err(|e| format!("{label} riesz {k}: {e}"))?;
            let flux = flux_identity_check(&d, &cloud, &est, &q, 0.2 * r1, &probe(2_400, 92))
                .map_err(|e| format!("{label} flux {k}: {e}"))?;
            for (name, chk) in [("riesz", riesz), ("flux", flux)] {
                ensure(chk.agrees(3.0), || {
                    format!(
                        "{label} {name} at point {k}: lhs {:.5e} rhs {:.5e} z {:.2}",
                        chk.lhs,
                        chk.rhs,
                        chk.z_score()
                    )
                })?;
                worst = worst.max(chk.z_score());
            }
        }
        lines.push(format!("{label} worst z {worst:.2}"));
    }
    let elapsed = t0.elapsed();
    within(elapsed, 900.0)?;
    Ok(format!("{}, {:.0} s", lines.join(", "), elapsed.as_secs_f64()))
}

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let d = bumpy(0.005).build().map_err(|e| e.to_string())?;
    let r1 = d.radii().r1;
    let phi = |x: &P3| d.ball_homeomorphism(x).map_err(|e| e.to_string());
    let mut rng = Stream::new(derive_seed(SEED, TAG_AUDIT, 10), 0);
    // identity on B(0, R1/4)
    for _ in 0..10_000 {
        let x = rng.unit_vector() * (0.25 * r1 * rng.uniform());
        ensure(phi(&x)? == x, || format!("not the identity at {x:?}"))?;
    }
    // boundary goes to the sphere of radius R1
    let mut worst_boundary: f64 = 0.0;
    for u in fibonacci_directions(10_000) {
        let y = phi(&d.boundary_point(&u))?;
        worst_boundary = worst_boundary.max((y.norm() - r1).abs());
    }
    ensure(worst_boundary <= 1e-12, || {
        format!("boundary image off by {worst_boundary:.2e}")
    })?;
    // injectivity on random pairs and the inverse round trip
    let mut inside = || {
        let u = rng.unit_vector();
        u * (d.radius(&u) * rng.uniform().sqrt())
    };
    let mut collisions = 0usize;
    let mut worst_round: f64 = 0.0;
    for _ in 0..100_000 {
        let (x, y) = (inside(), inside());
        let (px, py) = (phi(&x)?, phi(&y)?);
        if x.dist(&y) > 1e-12 && px.dist(&py) <= 1e-12 {
            collisions += 1;
        }
        let back = d.inverse_ball_homeomorphism(&px).map_err(|e| e.to_string())?;
        worst_round = worst_round.max(back.dist(&x));
    }
    ensure(collisions == 0, || format!("{collisions} collisions"))?;
    ensure(worst_round <= 1e-8, || {
        format!("inverse round trip off by {worst_round:.2e}")
    })?;
    let elapsed = t0.elapsed();
    within(elapsed, 60.0)?;
    Ok(format!(
        "boundary error {worst_boundary:.1e}, 0 collisions in 1e5 pairs, round trip {worst_round:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn pfl_bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_pfl"))
}

fn run_bin(args: &[&str]) -> Result<i32, String> {
    let out = pfl_bin().args(args).output().map_err(|e| e.to_string())?;
    out.status
        .code()
        .ok_or_else(|| "terminated by a signal".to_string())
}

fn small_budgets() -> Budgets {
    Budgets {
        samples: 6000,
        kernel: RunBudget {
            trajectories: 20_000,
            stop_shell: 1e-3,
            max_steps: 10_000,
        },
        kernel_sites: 120,
        gradient: RunBudget {
            trajectories: 1200,
            stop_shell: 1e-4,
            max_steps: 10_000,
        },
        gradient_probes: 6,
        centers: 12,
        levels: 2,
        sphere_samples: 6000,
        ..Budgets::default()
    }
}

/// Every file except the manifests, which carry timestamps and thread counts.
fn artifacts(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with("manifest."))
        .map(|n| {
            let bytes = std::fs::read(dir.join(&n)).unwrap_or_default();
            (n, bytes)
        })
        .collect();
    files.sort();
    Ok(files)
}

fn criterion_11() -> Outcome {
    let t0 = Instant::now();
    let dir = scratch("determinism");
    let spec = ScenarioSpec {
        family: vec![0.01, 0.05],
        budgets: small_budgets(),
        ..ScenarioSpec::new(SEED, bumpy(0.05))
    };
    let scenario = write_spec(&dir, &spec);
    let generate = dir.join("generate.json");
    std::fs::write(
        &generate,
        serde_json::json!({"schema": 1, "domain": bumpy(0.02), "samples": 6000}).to_string(),
    )
    .map_err(|e| e.to_string())?;
    let solve = dir.join("solve.json");
    let analyze = dir.join("analyze.json");
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.join(format!("threads{threads}"));
        let out_s = out.to_str().ok_or("path")?;
        std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        std::fs::write(
            &solve,
            serde_json::json!({
                "schema": 1,
                "domain_file": out.join("domain.json"),
                "cloud_file": out.join("cloud.csv"),
                "kernel": {"trajectories": 20000, "stop_shell": 0.001, "max_steps": 10000},
                "kernel_sites": 120
            })
            .to_string(),
        )
        .map_err(|e| e.to_string())?;
        std::fs::write(
            &analyze,
            serde_json::json!({
                "schema": 1,
                "domain_file": out.join("domain.json"),
                "cloud_file": out.join("cloud.csv"),
                "centers": 12,
                "sphere_samples": 6000
            })
            .to_string(),
        )
        .map_err(|e| e.to_string())?;
        for (cmd, cfg) in [
            ("generate", &generate),
            ("solve", &solve),
            ("analyze", &analyze),
            ("verify", &scenario),
        ] {
            let code = run_bin(&[
                cmd,
                "--config",
                cfg.to_str().ok_or("path")?,
                "--seed",
                "11",
                "--threads",
                threads,
                "--out",
                out_s,
            ])?;
            ensure(code == 0 || (cmd == "verify" && code == 1), || {
                format!("{cmd} with {threads} threads exited {code}")
            })?;
        }
        runs.push(artifacts(&out)?);
    }
    ensure(runs[0].len() >= 10, || {
        format!("only {} artifacts", runs[0].len())
    })?;
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    ensure(runs[0] == runs[1], || {
        let differing: Vec<&str> = runs[0]
            .iter()
            .zip(&runs[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        format!("artifacts differ between 1 and 3 threads: {differing:?}")
    })?;
    Ok(format!(
        "{} artifacts byte-identical across 1 and 3 threads ({}), {:.0} s",
        names.len(),
        names.join(" "),
        t0.elapsed().as_secs_f64()
    ))
}

fn criterion_12() -> Outcome {
    let t0 = Instant::now();
    let dir = scratch("self_test");
    let mut seen = Vec::new();
    for spec in self_test_fixtures(SEED) {
        let name = spec.checks[0].as_str();
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).map_err(|e| e.to_string())?;
        let cfg = write_spec(&sub, &spec);
        let code = run_bin(&[
            "verify",
            "--config",
            cfg.to_str().ok_or("path")?,
            "--out",
            sub.join("out").to_str().ok_or("path")?,
        ])?;
        ensure(code == 1, || format!("{name} fixture exited {code}, expected 1"))?;
        seen.push(spec.checks[0]);
    }
    seen.sort();
    ensure(seen == CheckName::ALL.to_vec(), || {
        format!("fixtures cover {seen:?} only")
    })?;
    Ok(format!(
        "{} fixtures exit 1 ({}), {:.0} s",
        seen.len(),
        seen.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" "),
        t0.elapsed().as_secs_f64()
    ))
}

fn report(n: usize, outcome: std::thread::Result<Outcome>) -> bool {
    let (ok, detail) = match outcome {
        Ok(Ok(s)) => (true, s),
        Ok(Err(s)) => (false, s),
        Err(p) => (
            false,
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()),
        ),
    };
    println!("criterion {n:>2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let guard = |f: &dyn Fn() -> Outcome| std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let mut failed = Vec::new();
    let singles: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    for (n, f) in singles.iter().take(3) {
        if run(*n) && !report(*n, guard(f)) {
            failed.push(*n);
        }
    }
    if run(4) || run(5) || run(6) {
        match std::panic::catch_unwind(family) {
            Ok(Ok(fam)) => {
                let checks: [(usize, FamilyCriterion); 3] =
                    [(4, criterion_4), (5, criterion_5), (6, criterion_6)];
                for (n, f) in checks {
                    if run(n) && !report(n, guard(&|| f(&fam))) {
                        failed.push(n);
                    }
                }
            }
            other => {
                let msg = match other {
                    Ok(Err(e)) => e,
                    _ => "family run panicked".into(),
                };
                for n in 4..=6 {
                    if run(n) {
                        report(n, Ok(Err(msg.clone())));
                        failed.push(n);
                    }
                }
            }
        }
    }
    for (n, f) in singles.iter().skip(3) {
        if run(*n) && !report(*n, guard(f)) {
            failed.push(*n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
