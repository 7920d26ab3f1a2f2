//! Walk-on-spheres estimators: harmonic measure with pole at the origin and
//! the Green function `G = F - u`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ball::fundamental_radial;
use super::DimensionConstants;
use crate::domain::{BoundaryCloud, StarDomain};
use crate::error::{Error, Result};
use crate::geometry::P3;
use crate::math::{powi, sqrt};
use crate::rng::{derive_seed, mix, Stream, TAG_GREEN, TAG_HARMONIC};

/// Censored trajectories at or above this fraction abort an estimate.
pub const CENSOR_LIMIT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WosConfig {
    pub trajectories: usize,
    /// Absorption distance as a fraction of `R1`.
    pub stop_shell: f64,
    pub max_steps: usize,
    pub master_seed: u64,
}

impl WosConfig {
    /// Budget for harmonic-measure runs.
    pub fn kernel_default(master_seed: u64) -> Self {
        WosConfig {
            trajectories: 100_000,
            stop_shell: 1e-3,
            max_steps: 10_000,
            master_seed,
        }
    }

    /// Budget for one Green probe. The thinner shell keeps the absorption
    /// bias small next to `G ≈ h·d` at probes close to the boundary.
    pub fn green_default(master_seed: u64) -> Self {
        WosConfig {
            trajectories: 10_000,
            stop_shell: 1e-4,
            max_steps: 10_000,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stop_shell > 0.0 && self.stop_shell <= 0.01) {
            return Err(Error::invalid("stop_shell must lie in (0, 0.01]"));
        }
        if self.trajectories < 1000 {
            return Err(Error::invalid("at least 1000 trajectories are required"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be positive"));
        }
        Ok(())
    }

    pub(crate) fn shell(&self, d: &StarDomain) -> f64 {
        self.stop_shell * d.radii().r1
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Exit {
    pub sample: usize,
    /// Boundary point reached by projecting the absorbed position.
    pub point: P3,
}

/// One walk. `None` if it is still running after `max_steps` jumps.
pub(crate) fn walk(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    start: &P3,
    shell: f64,
    max_steps: usize,
    rng: &mut Stream,
) -> Option<Exit> {
    let mut x = *start;
    for _ in 0..max_steps {
        let dist = d.distance_to_boundary(cloud, &x);
        if dist <= shell {
            let (sample, _) = cloud.nearest(&x);
            let (point, _) = d.project_to_boundary(&x, &cloud.directions()[sample]);
            return Some(Exit { sample, point });
        }
        x += rng.unit_vector() * dist;
    }
    None
}

fn check_start(d: &StarDomain, cloud: &BoundaryCloud, x: &P3, shell: f64) -> Result<()> {
    if !d.is_inside(x) {
        return Err(Error::OutsideDomain);
    }
    let dist = d.distance_to_boundary(cloud, x);
    if dist <= 10.0 * shell {
        return Err(Error::invalid(
            "start point is within ten absorption shells of the boundary",
        ));
    }
    Ok(())
}

fn censor_check(censored: usize, total: usize) -> Result<()> {
    let fraction = censored as f64 / total as f64;
    if fraction >= CENSOR_LIMIT {
        return Err(Error::Censored { fraction });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub sample: u32,
    pub trajectory: u64,
}

/// Exit tallies of walks started at the pole, in trajectory order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMeasureEstimate {
    pub pole: P3,
    pub config: WosConfig,
    pub exits: Vec<ExitRecord>,
    pub censored: usize,
}

impl HarmonicMeasureEstimate {
    pub fn trajectories(&self) -> usize {
        self.config.trajectories
    }

    /// Exit count per boundary sample.
    pub fn tallies(&self, samples: usize) -> Vec<u64> {
        let mut t = alloc::vec![0u64; samples];
        for e in &self.exits {
            t[e.sample as usize] += 1;
        }
        t
    }

    /// `ω̂(B(q, r))` and the number of exits in the ball.
    pub fn cap(&self, cloud: &BoundaryCloud, q: &P3, r: f64) -> (f64, usize) {
        let pts = cloud.points();
        let r2 = r * r;
        let k = self
            .exits
            .iter()
            .filter(|e| pts[e.sample as usize].dist2(q) <= r2)
            .count();
        (k as f64 / self.trajectories() as f64, k)
    }

    /// Checks that every exit refers to a sample of `cloud`.
    pub fn validate_against(&self, cloud: &BoundaryCloud) -> Result<()> {
        self.config.validate()?;
        if self.exits.len() + self.censored > self.config.trajectories {
            return Err(Error::invalid("more exits than trajectories"));
        }
        if self.exits.iter().any(|e| e.sample as usize >= cloud.len()) {
            return Err(Error::invalid("exit refers to a sample outside the cloud"));
        }
        Ok(())
    }
}

/// Harmonic measure of `d` with pole at the origin.
pub fn wos_harmonic_measure(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    cfg: &WosConfig,
) -> Result<HarmonicMeasureEstimate> {
    wos_harmonic_measure_from(d, cloud, &P3::zero(), cfg)
}

pub(crate) fn wos_harmonic_measure_from(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    pole: &P3,
    cfg: &WosConfig,
) -> Result<HarmonicMeasureEstimate> {
    cfg.validate()?;
    let shell = cfg.shell(d);
    if d.distance_to_boundary(cloud, pole) == 0.0 {
        return Err(Error::invalid("distance oracle returns 0 at the pole"));
    }
    check_start(d, cloud, pole, shell)?;
    let seed = derive_seed(cfg.master_seed, TAG_HARMONIC, 0);
    let ends = crate::par::map_indexed(cfg.trajectories, |j| {
        let mut rng = Stream::new(seed, j as u64);
        walk(d, cloud, pole, shell, cfg.max_steps, &mut rng).map(|e| e.sample)
    });
    let mut exits = Vec::with_capacity(ends.len());
    let mut censored = 0;
    for (j, e) in ends.into_iter().enumerate() {
        match e {
            Some(s) => exits.push(ExitRecord {
                sample: s as u32,
                trajectory: j as u64,
            }),
            None => censored += 1,
        }
    }
    censor_check(censored, cfg.trajectories)?;
    Ok(HarmonicMeasureEstimate {
        pole: *pole,
        config: *cfg,
        exits,
        censored,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenSample {
    pub x: P3,
    pub value: f64,
    pub stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<P3>,
    /// Standard error of `|gradient|`.
    pub gradient_stderr: f64,
    /// Radius of the quadrature sphere (0 for value-only samples).
    pub rho: f64,
    pub trajectories: usize,
    pub censored: usize,
}

/// Stream batch for walks launched on behalf of the probe at `x`.
fn probe_seed(master: u64, x: &P3) -> u64 {
    let c = x.coords();
    let key = mix(mix(c[0].to_bits(), c[1].to_bits()), c[2].to_bits());
    derive_seed(master, TAG_GREEN, key)
}

fn fundamental(x: &P3, c: &DimensionConstants) -> f64 {
    fundamental_radial(x.norm(), c)
}

/// `Ĝ(x) = F(x) - mean F(exit)` with the standard error of the mean.
pub fn estimate_green(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    x: &P3,
    cfg: &WosConfig,
    c: &DimensionConstants,
) -> Result<GreenSample> {
    cfg.validate()?;
    check_dims(d, c)?;
    let shell = cfg.shell(d);
    check_start(d, cloud, x, shell)?;
    if x.norm() == 0.0 {
        return Err(Error::invalid("the Green function is infinite at the pole"));
    }
    let seed = probe_seed(cfg.master_seed, x);
    let vals = crate::par::map_indexed(cfg.trajectories, |j| {
        let mut rng = Stream::new(seed, j as u64);
        walk(d, cloud, x, shell, cfg.max_steps, &mut rng).map(|e| fundamental(&e.point, c))
    });
    let mut censored = 0;
    let mut m = 0usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in vals {
        match v {
            Some(v) => {
                m += 1;
                s1 += v;
                s2 += v * v;
            }
            None => censored += 1,
        }
    }
    censor_check(censored, cfg.trajectories)?;
    let mean = s1 / m as f64;
    let var = ((s2 - s1 * mean) / (m as f64 - 1.0)).max(0.0);
    Ok(GreenSample {
        x: *x,
        value: fundamental(x, c) - mean,
        stderr: sqrt(var / m as f64),
        gradient: None,
        gradient_stderr: 0.0,
        rho: 0.0,
        trajectories: cfg.trajectories,
        censored,
    })
}

fn check_dims(d: &StarDomain, c: &DimensionConstants) -> Result<()> {
    if c.n != d.dim() {
        return Err(Error::invalid("dimension constants do not match the domain"));
    }
    Ok(())
}

/// Gradient of `G` at `x` from the spherical-mean derivative formula on
/// `∂B(x, ρ)`, `ρ = min(d(x), |x|) / 2`.
///
/// `G = F - u` with `F` known in closed form, so the quadrature is applied
/// to the harmonic part `u` only and `∇F(x)` is added exactly. Every node
/// uses the same random streams (common random numbers), which keeps the
/// gradient noise proportional to the variation of `u` across the small
/// sphere rather than to its size. The error bar comes from the spread of
/// the per-round gradient vectors.
pub fn estimate_green_gradient(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    x: &P3,
    cfg: &WosConfig,
) -> Result<GreenSample> {
    gradient_with_cov(d, cloud, x, cfg).map(|(g, _)| g)
}

/// Gradient sample together with the covariance matrix of the gradient
/// mean.
pub(crate) fn gradient_with_cov(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    x: &P3,
    cfg: &WosConfig,
) -> Result<(GreenSample, [[f64; 3]; 3])> {
    cfg.validate()?;
    let c = DimensionConstants::new(d.dim());
    let shell = cfg.shell(d);
    check_start(d, cloud, x, shell)?;
    let t = x.norm();
    if t == 0.0 {
        return Err(Error::invalid("the Green function is singular at the pole"));
    }
    let rho = d.distance_to_boundary(cloud, x).min(t) / 2.0;
    if rho < 20.0 * shell {
        return Err(Error::invalid(
            "quadrature sphere is within twenty absorption shells of the boundary",
        ));
    }
    let nodes: Vec<P3> = crate::sphere::icosahedral_design(2)
        .into_iter()
        .map(|v| *x + v * rho)
        .collect();
    let k = nodes.len();
    let rounds = (cfg.trajectories / k).max(2);
    let seed = probe_seed(cfg.master_seed, x);
    let per_round = crate::par::map_indexed(rounds, |j| {
        let mut acc = P3::zero();
        let mut mean_u = 0.0;
        for z in &nodes {
            let mut rng = Stream::new(seed, j as u64);
            let e = walk(d, cloud, z, shell, cfg.max_steps, &mut rng)?;
            let u = fundamental(&e.point, &c);
            mean_u += u;
            acc += (*z - *x) * u;
        }
        Some((acc * (1.0 / k as f64), mean_u / k as f64))
    });
    // ∫_{∂B(x,ρ)} u(ζ)(x - ζ) dζ = -σ_n ρ^n · mean[u(ζ)(ζ - x)], and the formula
    // divides by -ω_{n+1} ρ^{n+2}; σ_n / ω_{n+1} = n + 1.
    let scale = (c.n + 1) as f64 / (rho * rho);
    let mut censored = 0usize;
    let mut grads = Vec::with_capacity(rounds);
    let mut us = Vec::with_capacity(rounds);
    for r in per_round {
        match r {
            Some((g, u)) => {
                grads.push(g * scale);
                us.push(u);
            }
            None => censored += 1,
        }
    }
    censor_check(censored, rounds)?;
    let m = grads.len() as f64;
    let mut gu = P3::zero();
    for g in &grads {
        gu += *g;
    }
    gu = gu * (1.0 / m);
    let mut cov = [[0.0f64; 3]; 3];
    for g in &grads {
        let e = *g - gu;
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += e.0[a] * e.0[b];
            }
        }
    }
    let grad_f = *x * (-1.0 / (c.sigma_n * powi(t, c.n as i32 + 1)));
    let grad = grad_f - gu;
    let gn = grad.norm();
    let dir = if gn > 0.0 { grad * (1.0 / gn) } else { P3::zero() };
    let mut var = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let w = if gn > 0.0 {
                dir.0[a] * dir.0[b]
            } else if a == b {
                1.0
            } else {
                0.0
            };
            var += w * cov[a][b];
        }
    }
    var /= m - 1.0;
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= (m - 1.0) * m;
        }
    }
    let (u_mean, u_var) = mean_var(&us);
    let sample = GreenSample {
        x: *x,
        value: fundamental(x, &c) - u_mean,
        stderr: sqrt(u_var / m),
        gradient: Some(grad),
        gradient_stderr: sqrt(var.max(0.0) / m),
        rho,
        trajectories: rounds * k,
        censored,
    };
    Ok((sample, cov))
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, var)
}
