use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pfl_core::domain::{ahlfors_ratios, bmo_normal_norm, sample_boundary, BmoResult, StarDomain, DIM};
use pfl_core::geometry::{flatness_profile, PlaneSearchConfig, P3};
use pfl_core::potential::{
    default_cap_radius, default_sites, estimate_poisson_kernel, growth_constant, wos_harmonic_measure,
    DimensionConstants, GrowthConstant,
};
use pfl_core::verify::{
    run_scenario, stability_distance, ScenarioSpec, StabilityDistance, VerificationReport,
};

use crate::artifacts::{
    cloud_csv, exits_csv, kernel_csv, read_cloud_csv, read_json, sha256_hex, to_json, unix_seconds,
    write_report, ArtifactWriter, DomainArtifact, ExitsSidecar, KernelSummary, RunManifest, MANIFEST_SCHEMA,
};
use crate::config::{check_schema, AnalyzeConfig, GenerateConfig, LoadedConfig, SolveConfig};
use crate::error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_OK, EXIT_RUNTIME};

pub const DEFAULT_OUT: &str = "pfl-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Solve,
    Analyze,
    Verify,
    Report,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Solve => "solve",
            Command::Analyze => "analyze",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
    /// `None` falls back to `PFL_THREADS`; 0 lets rayon decide.
    pub threads: Option<usize>,
}

/// What a finished command reports back to `main`.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: u8,
    pub message: String,
    pub manifest: RunManifest,
}

pub fn resolve_threads(flag: Option<usize>) -> CliResult<usize> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("PFL_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("PFL_THREADS=`{v}` is not a thread count"))),
        _ => Ok(0),
    }
}

/// Runs one subcommand inside a dedicated thread pool.
pub fn run(cmd: Command, inv: &Invocation) -> CliResult<Outcome> {
    let threads = resolve_threads(inv.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let used = pool.current_num_threads();
    pool.install(|| {
        let ctx = Context::new(cmd, inv, used);
        match cmd {
            Command::Generate => generate(ctx),
            Command::Solve => solve(ctx),
            Command::Analyze => analyze(ctx),
            Command::Verify => verify(ctx),
            Command::Report => report(ctx),
        }
    })
}

struct Context<'a> {
    inv: &'a Invocation,
    manifest: RunManifest,
}

impl<'a> Context<'a> {
    fn new(cmd: Command, inv: &'a Invocation, threads: usize) -> Self {
        Context {
            inv,
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                schema: MANIFEST_SCHEMA,
                command: cmd.as_str().to_string(),
                started_unix: unix_seconds(),
                finished_unix: 0.0,
                seed: 0,
                threads,
                config: inv.config.display().to_string(),
                overrides: inv.overrides.clone(),
                input_hashes: BTreeMap::new(),
                files: Vec::new(),
            },
        }
    }

    fn load(&mut self) -> CliResult<LoadedConfig> {
        let cfg = LoadedConfig::load(&self.inv.config, &self.inv.overrides, self.inv.seed)?;
        self.manifest
            .input_hashes
            .insert(cfg.path.display().to_string(), sha256_hex(&cfg.bytes));
        Ok(cfg)
    }

    fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
        self.manifest
            .input_hashes
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn writer(&self, fallback: Option<&str>) -> CliResult<ArtifactWriter> {
        let dir = match (&self.inv.out, fallback) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => PathBuf::from(d),
            (None, None) => PathBuf::from(DEFAULT_OUT),
        };
        ArtifactWriter::new(&dir)
    }

    fn finish(self, w: ArtifactWriter, exit_code: u8, message: String) -> CliResult<Outcome> {
        let manifest = w.finish(self.manifest)?;
        Ok(Outcome {
            exit_code,
            message,
            manifest,
        })
    }
}

fn constants() -> DimensionConstants {
    DimensionConstants::new(DIM)
}

fn generate(mut ctx: Context) -> CliResult<Outcome> {
    let cfg = ctx.load()?;
    let g: GenerateConfig = cfg.parse()?;
    check_schema(g.schema, &cfg.path)?;
    ctx.manifest.seed = g.seed;
    let domain = g.domain.build()?;
    let cloud = sample_boundary(&domain, g.samples)?;
    let art = DomainArtifact {
        schema: 1,
        domain: g.domain.clone(),
        radii: domain.radii(),
        lipschitz: domain.lipschitz(),
        surface_measure: domain.surface_measure(),
        samples: cloud.len(),
        spacing: cloud.spacing(),
        cover_radius: cloud.cover_radius(),
        cloud_total_measure: cloud.total_measure(),
    };
    let mut w = ctx.writer(None)?;
    w.write("domain.json", &to_json(&art)?)?;
    w.write("cloud.csv", &cloud_csv(&cloud)?)?;
    let msg = format!(
        "generated {} samples, surface measure {:.6}, R1 {:.6}, R2 {:.6}",
        cloud.len(),
        art.surface_measure,
        art.radii.r1,
        art.radii.r2
    );
    ctx.finish(w, EXIT_OK, msg)
}

/// Domain and cloud written by `generate`.
fn load_generated(
    ctx: &mut Context,
    cfg: &LoadedConfig,
    domain_file: &Path,
    cloud_file: &Path,
) -> CliResult<(
    DomainArtifact,
    StarDomain,
    pfl_core::domain::BoundaryCloud,
    String,
)> {
    let dpath = cfg.resolve(domain_file);
    let cpath = cfg.resolve(cloud_file);
    ctx.read_input(&dpath)?;
    let cloud_bytes = ctx.read_input(&cpath)?;
    let art: DomainArtifact = read_json(&dpath)?;
    check_schema(art.schema, &dpath)?;
    let domain = art.domain.build()?;
    let cloud = read_cloud_csv(&cpath)?;
    Ok((art, domain, cloud, sha256_hex(&cloud_bytes)))
}

fn solve(mut ctx: Context) -> CliResult<Outcome> {
    let cfg = ctx.load()?;
    let s: SolveConfig = cfg.parse()?;
    check_schema(s.schema, &cfg.path)?;
    ctx.manifest.seed = s.seed;
    if s.kernel_sites == 0 {
        return Err(CliError::input(&cfg.path, "kernel_sites must be positive"));
    }
    let (_, domain, cloud, cloud_hash) = load_generated(&mut ctx, &cfg, &s.domain_file, &s.cloud_file)?;
    let wcfg = s.kernel.config(s.seed);
    wcfg.validate()?;
    let est = wos_harmonic_measure(&domain, &cloud, &wcfg)?;
    let cap = s
        .cap_radius
        .unwrap_or_else(|| default_cap_radius(&cloud, wcfg.trajectories));
    let field = estimate_poisson_kernel(&est, &cloud, &default_sites(&domain, s.kernel_sites), cap)?;
    let sidecar = ExitsSidecar {
        schema: 1,
        pole: est.pole,
        config: est.config,
        trajectories: est.trajectories(),
        exits: est.exits.len(),
        censored: est.censored,
        cloud_sha256: cloud_hash,
    };
    let summary = KernelSummary::new(&field, cap);
    let mut w = ctx.writer(None)?;
    w.write("exits.csv", &exits_csv(&est)?)?;
    w.write("exits.json", &to_json(&sidecar)?)?;
    w.write("kernel.csv", &kernel_csv(&field)?)?;
    w.write("kernel_summary.json", &to_json(&summary)?)?;
    let mut msg = format!(
        "{} trajectories, {} censored; eps_meas {:.4} +- {:.4}, epsilon {:.4}, {} of {} sites used",
        sidecar.trajectories,
        sidecar.censored,
        summary.eps_meas,
        summary.eps_stderr,
        summary.epsilon,
        summary.sites_used,
        summary.sites
    );
    for warn in &summary.warnings {
        msg.push_str("\nwarning: ");
        msg.push_str(warn);
    }
    ctx.finish(w, EXIT_OK, msg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub schema: u32,
    pub r1: f64,
    pub r2: f64,
    pub spacing: f64,
    pub radii: Vec<f64>,
    pub centers: usize,
    pub theta_sup: Option<f64>,
    pub theta_sup_slack: Option<f64>,
    pub theta_unreliable: usize,
    pub ahlfors_min: Option<f64>,
    pub ahlfors_max: Option<f64>,
    pub growth: GrowthConstant,
    pub bmo_scale: f64,
    pub bmo: Option<BmoResult>,
    pub bmo_error: Option<String>,
    pub stability: StabilityDistance,
}

fn analyze(mut ctx: Context) -> CliResult<Outcome> {
    let cfg = ctx.load()?;
    let a: AnalyzeConfig = cfg.parse()?;
    check_schema(a.schema, &cfg.path)?;
    ctx.manifest.seed = a.seed;
    if a.centers == 0 || a.radii.is_empty() || a.radii.iter().any(|r| !(*r > 0.0 && *r <= 2.0)) {
        return Err(CliError::input(
            &cfg.path,
            "centers must be positive and radii must lie in (0, 2]",
        ));
    }
    if a.bmo_scale.is_nan() || a.bmo_scale <= 0.0 || a.sphere_samples == 0 {
        return Err(CliError::input(
            &cfg.path,
            "bmo_scale and sphere_samples must be positive",
        ));
    }
    let (art, _, cloud, _) = load_generated(&mut ctx, &cfg, &a.domain_file, &a.cloud_file)?;
    let c = constants();
    let r1 = art.radii.r1;
    let radii: Vec<f64> = a.radii.iter().map(|f| f * r1).collect();
    let idx = cloud.center_subset(a.centers);
    let centers: Vec<P3> = idx.iter().map(|&i| cloud.points()[i]).collect();

    let profile = flatness_profile(
        cloud.point_set(),
        &centers,
        &radii,
        &PlaneSearchConfig::with_resolution(cloud.spacing()),
    );
    let ahlfors = ahlfors_ratios(&cloud, &centers, &radii, &c);
    let growth_radii: Vec<f64> = radii.iter().copied().filter(|r| *r < 1.0).collect();
    let growth = growth_constant(&cloud, &growth_radii, &idx, &c)?;
    let bmo_scale = a.bmo_scale * r1;
    let (bmo, bmo_error) = match bmo_normal_norm(&cloud, bmo_scale, &idx) {
        Ok(b) => (Some(b), None),
        Err(e) if !e.is_usage() => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let stability = stability_distance(&cloud, &c, a.sphere_samples)?;

    let (theta_sup, theta_sup_slack) = profile
        .sup_reliable()
        .map_or((None, None), |(t, s)| (Some(t), Some(s)));
    let reliable = || ahlfors.iter().filter(|e| e.reliable).map(|e| e.ratio);
    let summary = AnalysisSummary {
        schema: 1,
        r1,
        r2: art.radii.r2,
        spacing: cloud.spacing(),
        radii: radii.clone(),
        centers: idx.len(),
        theta_sup,
        theta_sup_slack,
        theta_unreliable: profile
            .entries
            .iter()
            .filter(|e| !e.reliable || e.skipped.is_some())
            .count(),
        ahlfors_min: reliable().reduce(f64::min),
        ahlfors_max: reliable().reduce(f64::max),
        growth,
        bmo_scale,
        bmo,
        bmo_error,
        stability,
    };

    let flat_rows = profile.entries.iter().map(|e| {
        vec![
            idx[e.center_index].to_string(),
            format!("{:?}", e.radius),
            format!("{:?}", e.theta),
            format!("{:?}", e.slack),
            format!("{:?}", e.plane.normal.0[0]),
            format!("{:?}", e.plane.normal.0[1]),
            format!("{:?}", e.plane.normal.0[2]),
            e.reliable.to_string(),
            e.skipped.clone().unwrap_or_default(),
        ]
    });
    let flat = crate::artifacts::csv_table(
        &[
            "center", "radius", "theta", "slack", "nx", "ny", "nz", "reliable", "skipped",
        ],
        flat_rows,
    )?;
    let ahl_rows = ahlfors.iter().map(|e| {
        vec![
            idx[e.center_index].to_string(),
            format!("{:?}", e.radius),
            format!("{:?}", e.measure),
            format!("{:?}", e.ratio),
            format!("{:?}", e.slack),
            e.count.to_string(),
            e.reliable.to_string(),
        ]
    });
    let ahl = crate::artifacts::csv_table(
        &[
            "center", "radius", "measure", "ratio", "slack", "count", "reliable",
        ],
        ahl_rows,
    )?;

    let mut w = ctx.writer(None)?;
    w.write("flatness.csv", &flat)?;
    w.write("ahlfors.csv", &ahl)?;
    w.write("analysis.json", &to_json(&summary)?)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    let msg = format!(
        "theta sup {}, Ahlfors ratios [{}, {}], K0 {:.4}, BMO {}, D {:.5}",
        opt(summary.theta_sup),
        opt(summary.ahlfors_min),
        opt(summary.ahlfors_max),
        summary.growth.k0,
        opt(summary.bmo.map(|b| b.norm)),
        summary.stability.distance
    );
    ctx.finish(w, EXIT_OK, msg)
}

/// Exit code for a finished report: failures win over errors.
pub fn report_exit_code(r: &VerificationReport) -> u8 {
    if r.tally.failed > 0 {
        EXIT_CHECK_FAILED
    } else if r.tally.errors > 0 {
        EXIT_RUNTIME
    } else {
        EXIT_OK
    }
}

fn verify(mut ctx: Context) -> CliResult<Outcome> {
    let cfg = ctx.load()?;
    let spec: ScenarioSpec = cfg.parse()?;
    ctx.manifest.seed = spec.seed;
    let report = run_scenario(&spec)?;
    let mut w = ctx.writer(spec.output_dir.as_deref())?;
    write_report(&mut w, &report)?;
    let code = report_exit_code(&report);
    let msg = report.render_table();
    ctx.finish(w, code, msg)
}

fn report(mut ctx: Context) -> CliResult<Outcome> {
    let path = ctx.inv.config.clone();
    let bytes = ctx.read_input(&path)?;
    let report: VerificationReport = serde_json::from_slice(&bytes).map_err(|e| CliError::input(&path, e))?;
    ctx.manifest.seed = report.scenario.seed;
    let mut w = ctx.writer(None)?;
    write_report(&mut w, &report)?;
    let code = report_exit_code(&report);
    let msg = report.render_table();
    ctx.finish(w, code, msg)
}
