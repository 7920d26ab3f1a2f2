use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::checks::{
    ahlfors_measurement, bmo_measurement, check_ahlfors, check_bmo, check_main_lemma, check_reifenberg,
    check_sandwich, check_stability_distance, gradient_measurement, reifenberg_measurement,
    stability_distance, Hypothesis,
};
use super::{CheckName, CheckResult, Environment, MemberReport, Status, TrendRow, VerificationReport};
use crate::domain::{
    sample_boundary, BoundaryCloud, DomainSpec, ModeTerm, ShapeKind, StarDomain, AMPLITUDE_CAP,
};
use crate::error::{Error, Result};
use crate::geometry::P3;
use crate::potential::{
    default_cap_radius, default_sites, estimate_poisson_kernel, growth_constant, wos_harmonic_measure,
    DimensionConstants, WosConfig,
};
use crate::rng::{derive_seed, Stream, TAG_AUDIT};

pub const SCHEMA_VERSION: u32 = 1;

/// Walk-on-spheres budget without a seed; seeds come from the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBudget {
    pub trajectories: usize,
    pub stop_shell: f64,
    pub max_steps: usize,
}

impl RunBudget {
    pub fn config(&self, seed: u64) -> WosConfig {
        WosConfig {
            trajectories: self.trajectories,
            stop_shell: self.stop_shell,
            max_steps: self.max_steps,
            master_seed: seed,
        }
    }
}

impl From<WosConfig> for RunBudget {
    fn from(c: WosConfig) -> Self {
        RunBudget {
            trajectories: c.trajectories,
            stop_shell: c.stop_shell,
            max_steps: c.max_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Boundary sample count.
    pub samples: usize,
    pub kernel: RunBudget,
    pub kernel_sites: usize,
    /// Cap radius of the kernel estimate; defaults to about 1000 expected
    /// exits per cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap_radius: Option<f64>,
    /// Budget of one gradient probe.
    pub gradient: RunBudget,
    pub gradient_probes: usize,
    /// Planned gradient shell widths as fractions of `R1`.
    pub widths: Vec<f64>,
    /// Boundary centers for flatness, density, growth and BMO suprema.
    pub centers: usize,
    /// Radii `ρ 2^{-k/2}` for `k = 1..=2 levels`.
    pub levels: usize,
    /// Samples of the reference sphere in the stability distance.
    pub sphere_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            samples: 20_000,
            kernel: WosConfig::kernel_default(0).into(),
            kernel_sites: 400,
            cap_radius: None,
            gradient: RunBudget {
                trajectories: 19_200,
                stop_shell: 1e-4,
                max_steps: 10_000,
            },
            gradient_probes: 48,
            widths: vec![0.04, 0.02, 0.01],
            centers: 50,
            levels: 4,
            sphere_samples: 20_000,
        }
    }
}

impl Budgets {
    fn validate(&self) -> Result<()> {
        if self.samples < 100 || self.sphere_samples < 100 {
            return Err(Error::invalid("sample counts must be at least 100"));
        }
        self.kernel.config(0).validate()?;
        self.gradient.config(0).validate()?;
        if self.kernel_sites == 0 || self.gradient_probes == 0 || self.centers == 0 {
            return Err(Error::invalid("site, probe and center counts must be positive"));
        }
        if let Some(c) = self.cap_radius {
            if !(c > 0.0) {
                return Err(Error::invalid("cap_radius must be positive"));
            }
        }
        if self.widths.len() < 3 || self.widths.iter().any(|w| !(*w > 0.0 && *w < 0.5)) {
            return Err(Error::invalid(
                "at least three gradient widths in (0, 0.5) are required",
            ));
        }
        if !(1..=12).contains(&self.levels) {
            return Err(Error::invalid("levels must lie in 1..=12"));
        }
        Ok(())
    }
}

/// Targets of the conclusion checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Targets {
    /// Reifenberg flatness target.
    pub sigma: f64,
    /// Density-ratio target.
    pub delta: f64,
    /// BMO target; `delta` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bmo_delta: Option<f64>,
}

impl Default for Targets {
    fn default() -> Self {
        Targets {
            sigma: 0.1,
            delta: 0.1,
            bmo_delta: None,
        }
    }
}

/// Engineered violations for harness self-tests. Each field tampers with the
/// measured input of the named check only (`epsilon` replaces the measured
/// ε for every check).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tamper {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Replaces the stability distance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// Multiplies every gradient value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_scale: Option<f64>,
    /// Multiplies the boundary measures seen by the density check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_scale: Option<f64>,
    /// Adds random vectors of this length to the normals seen by the BMO
    /// check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_jitter: Option<f64>,
}

impl Tamper {
    pub fn is_none(&self) -> bool {
        *self == Tamper::default()
    }

    fn validate(&self) -> Result<()> {
        let nonneg = [self.epsilon, self.distance, self.normal_jitter];
        let pos = [self.gradient_scale, self.measure_scale];
        if nonneg.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite()))
            || pos.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(
                "tamper values must be finite and non-negative (scales positive)",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema: u32,
    pub seed: u64,
    pub domain: DomainSpec,
    /// Amplitudes of a perturbation family sharing the domain's modes. When
    /// empty the domain runs as given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family: Vec<f64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub targets: Targets,
    pub checks: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Tamper::is_none")]
    pub tamper: Tamper,
}

impl ScenarioSpec {
    /// All registered checks at default budgets.
    pub fn new(seed: u64, domain: DomainSpec) -> Self {
        ScenarioSpec {
            schema: SCHEMA_VERSION,
            seed,
            domain,
            family: Vec::new(),
            budgets: Budgets::default(),
            targets: Targets::default(),
            checks: CheckName::ALL.to_vec(),
            output_dir: None,
            tamper: Tamper::default(),
        }
    }

    /// Domain specs of the members, in run order.
    pub fn member_domains(&self) -> Vec<DomainSpec> {
        if self.family.is_empty() {
            return vec![self.domain.clone()];
        }
        self.family
            .iter()
            .map(|&a| DomainSpec {
                amplitude: a,
                ..self.domain.clone()
            })
            .collect()
    }

    /// Schema and value checks; builds every member domain.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "schema {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.checks.is_empty() {
            return Err(Error::invalid("no checks requested"));
        }
        let mut sorted = self.checks.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.checks.len() {
            return Err(Error::invalid("a check is listed twice"));
        }
        let needs_unit = self
            .checks
            .iter()
            .any(|c| matches!(c, CheckName::Sandwich | CheckName::StabilityDistance));
        if needs_unit && !self.domain.normalize {
            return Err(Error::invalid(
                "sandwich and stability_distance need a domain normalized to unit boundary measure",
            ));
        }
        if !self.family.is_empty() {
            if self.domain.shape != ShapeKind::PerturbedBall || self.domain.modes.is_empty() {
                return Err(Error::invalid(
                    "a family needs a perturbed ball with at least one mode",
                ));
            }
            if self.family.iter().any(|a| !(*a >= 0.0 && *a < AMPLITUDE_CAP)) {
                return Err(Error::AmplitudeCap(
                    self.family
                        .iter()
                        .copied()
                        .find(|a| !(*a >= 0.0 && *a < AMPLITUDE_CAP))
                        .unwrap_or(f64::NAN),
                ));
            }
        }
        let t = &self.targets;
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(t.sigma) || !in_unit(t.delta) || t.bmo_delta.is_some_and(|v| !in_unit(v)) {
            return Err(Error::invalid("targets must lie in (0, 1)"));
        }
        self.budgets.validate()?;
        self.tamper.validate()?;
        for d in self.member_domains() {
            d.build()?;
        }
        Ok(())
    }
}

/// Pipeline quantities of one member shared by its checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub r1: f64,
    pub r2: f64,
    pub samples: usize,
    pub spacing: f64,
    pub cover_radius: f64,
    pub total_measure: f64,
    pub trajectories: usize,
    pub censored: usize,
    pub cap_radius: f64,
    pub sites_used: usize,
    pub hypothesis: Hypothesis,
    /// Admissible flatness scale from the hypothesis ε.
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

struct Pipeline {
    domain: StarDomain,
    cloud: BoundaryCloud,
    field: crate::potential::KernelField,
    m: Measurements,
}

fn growth_radii(r1: f64) -> Vec<f64> {
    [0.05, 0.1, 0.2, 0.4, 0.8]
        .iter()
        .map(|f| f * r1)
        .filter(|r| *r < 1.0)
        .collect()
}

fn pipeline(spec: &ScenarioSpec, dspec: &DomainSpec, c: &DimensionConstants) -> Result<Pipeline> {
    let b = &spec.budgets;
    let domain = dspec.build()?;
    let cloud = sample_boundary(&domain, b.samples)?;
    let kcfg = b.kernel.config(spec.seed);
    let est = wos_harmonic_measure(&domain, &cloud, &kcfg)?;
    let cap = b
        .cap_radius
        .unwrap_or_else(|| default_cap_radius(&cloud, kcfg.trajectories));
    let field = estimate_poisson_kernel(&est, &cloud, &default_sites(&domain, b.kernel_sites), cap)?;
    let radii = domain.radii();
    let k0 = growth_constant(
        &cloud,
        &growth_radii(radii.r1),
        &cloud.center_subset(b.centers),
        c,
    )?;
    let mut hypothesis = Hypothesis::from_field(&field, k0.k0);
    if let Some(e) = spec.tamper.epsilon {
        hypothesis.eps_meas = e;
        hypothesis.eps_stderr = 0.0;
        hypothesis.epsilon = e;
    }
    let m = Measurements {
        r1: radii.r1,
        r2: radii.r2,
        samples: cloud.len(),
        spacing: cloud.spacing(),
        cover_radius: cloud.cover_radius(),
        total_measure: cloud.total_measure(),
        trajectories: est.trajectories(),
        censored: est.censored,
        cap_radius: cap,
        sites_used: field.sites.iter().filter(|s| s.used).count(),
        rho: hypothesis.rho(radii.r1),
        hypothesis,
        warnings: field.warnings.clone(),
    };
    Ok(Pipeline {
        domain,
        cloud,
        field,
        m,
    })
}

fn jittered(cloud: &BoundaryCloud, size: f64, seed: u64) -> Result<BoundaryCloud> {
    let s = derive_seed(seed, TAG_AUDIT, 7);
    let normals: Vec<P3> = cloud
        .normals()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let v = *n + Stream::new(s, i as u64).unit_vector() * size;
            v.normalized().unwrap_or(*n)
        })
        .collect();
    cloud.with_normals(normals)
}

fn run_check(
    spec: &ScenarioSpec,
    p: &Pipeline,
    name: CheckName,
    c: &DimensionConstants,
) -> Result<CheckResult> {
    let b = &spec.budgets;
    let h = &p.m.hypothesis;
    let t = &spec.tamper;
    Ok(match name {
        CheckName::Sandwich => check_sandwich(&p.domain.radii(), h, c),
        CheckName::StabilityDistance => {
            let mut m = stability_distance(&p.cloud, c, b.sphere_samples)?;
            if let Some(dist) = t.distance {
                m.distance = dist;
            }
            check_stability_distance(&m, h)
        }
        CheckName::MainLemma => {
            let cfg = b.gradient.config(spec.seed);
            let mut g =
                gradient_measurement(&p.domain, &p.cloud, &p.field, &cfg, &b.widths, b.gradient_probes)?;
            if let Some(k) = t.gradient_scale {
                for row in &mut g.rows {
                    row.sup_grad *= k;
                    row.stderr *= k;
                    row.values.iter_mut().for_each(|v| *v *= k);
                }
            }
            check_main_lemma(&g, h)
        }
        CheckName::Reifenberg => {
            let m = reifenberg_measurement(&p.cloud, p.m.r1, h, b.centers, b.levels);
            check_reifenberg(&m, h, spec.targets.sigma)
        }
        CheckName::Ahlfors => {
            let mut m = ahlfors_measurement(&p.cloud, p.m.rho, b.centers, b.levels, c);
            if let Some(k) = t.measure_scale {
                for e in &mut m.entries {
                    e.measure *= k;
                    e.ratio *= k;
                }
            }
            check_ahlfors(&m, h, spec.targets.delta, c)
        }
        CheckName::Bmo => {
            let m = match t.normal_jitter {
                Some(j) => bmo_measurement(&jittered(&p.cloud, j, spec.seed)?, p.m.rho, b.centers)?,
                None => bmo_measurement(&p.cloud, p.m.rho, b.centers)?,
            };
            let delta = spec.targets.bmo_delta.unwrap_or(spec.targets.delta);
            check_bmo(m.as_ref(), p.m.rho, h, delta)
        }
    })
}

const STAGE_INEQUALITY: &str = "not evaluated";

/// Runs the pipeline and every requested check on each member. Stage errors
/// are recorded per check; only an invalid spec is an error.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<VerificationReport> {
    spec.validate()?;
    let c = DimensionConstants::new(crate::domain::DIM);
    let mut names = spec.checks.clone();
    names.sort();
    let domains = spec.member_domains();
    let mut members = Vec::with_capacity(domains.len());
    for dspec in &domains {
        let mut member = MemberReport {
            amplitude: dspec.amplitude,
            measurements: None,
            stage_error: None,
            checks: Vec::new(),
        };
        match pipeline(spec, dspec, &c) {
            Ok(p) => {
                for &name in &names {
                    let r = run_check(spec, &p, name, &c)
                        .unwrap_or_else(|e| CheckResult::errored(name, STAGE_INEQUALITY, format!("{e}")));
                    member.checks.push(r);
                }
                member.measurements = Some(p.m);
            }
            Err(e) => {
                let msg = format!("{e}");
                for &name in &names {
                    member
                        .checks
                        .push(CheckResult::errored(name, STAGE_INEQUALITY, msg.clone()));
                }
                member.stage_error = Some(msg);
            }
        }
        members.push(member);
    }
    let trend = members
        .iter()
        .filter_map(|m| {
            let h = m.measurements.as_ref()?.hypothesis;
            let mut margins = BTreeMap::new();
            let mut distance = None;
            for c in &m.checks {
                if matches!(c.status, Status::Pass | Status::Fail) {
                    margins.insert(c.name.as_str().to_string(), c.margin);
                }
                if c.name == CheckName::StabilityDistance {
                    distance = c.conclusion.get("distance").copied();
                }
            }
            Some(TrendRow {
                amplitude: m.amplitude,
                eps_meas: h.eps_meas,
                epsilon: h.epsilon,
                distance,
                distance_bound: 4.0 * h.epsilon,
                margins,
            })
        })
        .collect();
    Ok(VerificationReport {
        scenario: spec.clone(),
        environment: Environment {
            seed: spec.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        tally: VerificationReport::tally_checks(&members),
        members,
        trend,
    })
}

/// One small scenario per check with an engineered violation that the
/// check must report as a failure.
pub fn self_test_fixtures(seed: u64) -> Vec<ScenarioSpec> {
    let small = Budgets {
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
        centers: 20,
        levels: 3,
        sphere_samples: 6000,
        ..Budgets::default()
    };
    let ball = DomainSpec::ball(1.0, true);
    let bumpy = DomainSpec::perturbed(
        1.0,
        vec![ModeTerm {
            degree: 2,
            order: 2,
            coeff: 1.0,
        }],
        0.05,
        true,
    );
    let ellipsoid = DomainSpec {
        shape: ShapeKind::Ellipsoid,
        semi_axes: Some([1.5, 1.0, 1.0]),
        ..DomainSpec::ball(1.0, true)
    };
    let fixture = |name: CheckName, domain: DomainSpec, tamper: Tamper| ScenarioSpec {
        budgets: small.clone(),
        checks: vec![name],
        tamper,
        ..ScenarioSpec::new(seed, domain)
    };
    vec![
        fixture(
            CheckName::Ahlfors,
            ball.clone(),
            Tamper {
                measure_scale: Some(2.0),
                ..Tamper::default()
            },
        ),
        fixture(
            CheckName::Bmo,
            ball.clone(),
            Tamper {
                normal_jitter: Some(1.0),
                ..Tamper::default()
            },
        ),
        fixture(
            CheckName::MainLemma,
            ball.clone(),
            Tamper {
                gradient_scale: Some(2.0),
                ..Tamper::default()
            },
        ),
        // the ε = 0.05 radii need a finer cloud to be resolvable
        ScenarioSpec {
            budgets: Budgets {
                samples: 20_000,
                ..small.clone()
            },
            ..fixture(
                CheckName::Reifenberg,
                ellipsoid,
                Tamper {
                    epsilon: Some(0.05),
                    ..Tamper::default()
                },
            )
        },
        fixture(
            CheckName::Sandwich,
            bumpy,
            Tamper {
                epsilon: Some(0.0),
                ..Tamper::default()
            },
        ),
        fixture(
            CheckName::StabilityDistance,
            ball,
            Tamper {
                epsilon: Some(0.01),
                distance: Some(1.0),
                ..Tamper::default()
            },
        ),
    ]
}
