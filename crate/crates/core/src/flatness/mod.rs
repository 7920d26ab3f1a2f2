//! Membership in the flatness class `F(σ+, σ-; τ)` and multi-scale decay
//! scans.
//!
//! `G ∈ F(σ+, σ-; τ)` in `B(Q0, ρ)` in direction `ν` (outward) means
//!
//! * `G(X) = 0` where `⟨X - Q0, ν⟩ ≥ σ+ ρ`,
//! * `G(X) ≥ -h(Q0) [⟨X - Q0, ν⟩ + σ- ρ]` where `⟨X - Q0, ν⟩ ≤ -σ- ρ`,
//! * `sup |∇G| ≤ h(Q0)(1 + τ)` and `osc h ≤ τ h(Q0)` on the ball.
//!
//! Every condition is tested on a finite quasi-random probe set and passes
//! when no violation exceeds its Monte Carlo slack.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryCloud, StarDomain};
use crate::error::{Error, Result};
use crate::geometry::{clip_to_ball, fit_plane, MIN_RELIABLE_CLIP, P3};
use crate::math::{acos, sqrt};
use crate::potential::{
    estimate_green, estimate_green_gradient, min_resolvable_width, DimensionConstants, KernelField, WosConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessClassQuery {
    pub q0: P3,
    pub rho: f64,
    /// Unit normal pointing out of the domain.
    pub nu: P3,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub tau: f64,
}

impl FlatnessClassQuery {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(open(self.sigma_plus) && open(self.sigma_minus) && open(self.tau)) {
            return Err(Error::invalid(
                "sigma_plus, sigma_minus and tau must lie in (0, 1)",
            ));
        }
        if !(self.rho > 0.0) {
            return Err(Error::invalid("rho must be positive"));
        }
        if (self.nu.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("direction must be a unit vector"));
        }
        Ok(())
    }
}

/// Probe counts and walk budgets of a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBudget {
    /// Quasi-random points in `B(Q0, ρ)` for the two slab conditions.
    pub points: usize,
    /// Interior points at which `|∇G|` is estimated.
    pub gradient_points: usize,
    pub green: WosConfig,
    pub gradient: WosConfig,
}

impl ProbeBudget {
    pub fn standard(master_seed: u64) -> Self {
        ProbeBudget {
            points: 2048,
            gradient_points: 24,
            green: WosConfig {
                trajectories: 1000,
                ..WosConfig::green_default(master_seed)
            },
            gradient: WosConfig {
                trajectories: 2400,
                ..WosConfig::green_default(master_seed)
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.green.validate()?;
        self.gradient.validate()?;
        if self.points < 256 || self.gradient_points == 0 {
            return Err(Error::insufficient("probe budget too small for slab coverage"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub pass: bool,
    /// Signed margin at the worst probe; negative means a violation.
    pub margin: f64,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst: Option<P3>,
    pub tested: usize,
}

impl ConditionOutcome {
    fn new(margin: f64, slack: f64, worst: Option<P3>, tested: usize) -> Self {
        ConditionOutcome {
            pass: margin >= -slack,
            margin,
            slack,
            worst,
            tested,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessCertificate {
    pub query: FlatnessClassQuery,
    pub vanishing: ConditionOutcome,
    pub lower_bound: ConditionOutcome,
    pub grad_bound: ConditionOutcome,
    pub osc_bound: ConditionOutcome,
    pub h0: f64,
    pub h0_stderr: f64,
    /// Largest slack used by any condition.
    pub mc_slack: f64,
    pub pass: bool,
}

/// `max h - min h` over the kernel sites in `B(q0, ρ)` and its standard
/// error.
pub fn kernel_oscillation(field: &KernelField, q0: &P3, rho: f64) -> Result<(f64, f64)> {
    let inside: Vec<_> = field
        .sites
        .iter()
        .filter(|s| s.h > 0.0 && s.q.dist(q0) <= rho)
        .collect();
    if inside.len() < 2 {
        return Err(Error::insufficient("fewer than two kernel sites in the ball"));
    }
    let hi = inside.iter().max_by(|a, b| a.h.total_cmp(&b.h)).unwrap();
    let lo = inside.iter().min_by(|a, b| a.h.total_cmp(&b.h)).unwrap();
    Ok((hi.h - lo.h, sqrt(hi.stderr * hi.stderr + lo.stderr * lo.stderr)))
}

/// Boundary points in `B(q0, ρ)`: `q0` and two rings of six, at `0.45 ρ`
/// and `0.85 ρ` along the tangent plane, lifted radially onto `∂Ω`.
pub fn local_sites(d: &StarDomain, q0: &P3, rho: f64) -> Vec<P3> {
    let u = q0.normalized().unwrap_or(P3::axis(2));
    let (a, b) = u.tangent_frame();
    let mut out = alloc::vec![d.boundary_point(&u)];
    for s in [0.45, 0.85] {
        for k in 0..6 {
            let phi = k as f64 * core::f64::consts::PI / 3.0 + s;
            let t = a * crate::math::cos(phi) + b * crate::math::sin(phi);
            if let Some(v) = (*q0 + t * (s * rho)).normalized() {
                let p = d.boundary_point(&v);
                if p.dist(q0) <= rho {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Probes of one ball, with the Green estimates cached so that `σ` can be
/// varied without new walks.
struct ProbeSet {
    rho: f64,
    /// `(point, height ⟨X - q0, ν⟩, inside)`.
    points: Vec<(P3, f64, bool)>,
    /// `(Ĝ, stderr)` for probes below the tangent level, `None` above.
    green: Vec<Option<(f64, f64)>>,
    grad_sup: f64,
    grad_stderr: f64,
    grad_worst: P3,
    grad_tested: usize,
    osc: f64,
    osc_stderr: f64,
    h0: f64,
    h0_stderr: f64,
}

pub struct FlatnessEngine<'a> {
    pub domain: &'a StarDomain,
    pub cloud: &'a BoundaryCloud,
    pub field: &'a KernelField,
    pub budget: ProbeBudget,
}

impl<'a> FlatnessEngine<'a> {
    pub fn new(
        domain: &'a StarDomain,
        cloud: &'a BoundaryCloud,
        field: &'a KernelField,
        budget: ProbeBudget,
    ) -> Self {
        FlatnessEngine {
            domain,
            cloud,
            field,
            budget,
        }
    }

    /// `h(q0)` from the nearest kernel site, which must lie within its cap
    /// radius of `q0`.
    fn h_at(&self, q0: &P3) -> Result<(f64, f64)> {
        let site = self
            .field
            .sites
            .iter()
            .filter(|s| s.h > 0.0)
            .min_by(|a, b| a.q.dist2(q0).total_cmp(&b.q.dist2(q0)))
            .ok_or_else(|| Error::insufficient("kernel field has no usable site"))?;
        if site.q.dist(q0) > site.cap_radius {
            return Err(Error::insufficient("no kernel site within its cap radius of q0"));
        }
        Ok((site.h, site.stderr))
    }

    fn probe(&self, q0: &P3, rho: f64, nu: &P3) -> Result<ProbeSet> {
        self.budget.validate()?;
        let d = self.domain;
        let (h0, h0_stderr) = self.h_at(q0)?;
        let (osc, osc_stderr) = kernel_oscillation(self.field, q0, rho)?;
        let c = DimensionConstants::new(d.dim());
        let r1 = d.radii().r1;
        let green_shell = 10.0 * self.budget.green.stop_shell * r1;
        let points: Vec<(P3, f64, bool)> = crate::sphere::quasi_ball(self.budget.points)
            .into_iter()
            .map(|z| {
                let x = *q0 + z * rho;
                (x, (x - *q0).dot(nu), d.is_inside(&x))
            })
            .collect();
        let green = crate::par::map_indexed(points.len(), |i| {
            let (x, t, inside) = points[i];
            if t >= 0.0 {
                return Ok(None);
            }
            if !inside {
                return Ok(Some((0.0, 0.0)));
            }
            // near the boundary the shell is thinned so that the probe stays
            // ten shells clear of absorption
            let dist = d.distance_to_boundary(self.cloud, &x);
            let mut cfg = self.budget.green;
            if dist <= green_shell {
                cfg.stop_shell = dist / (20.0 * r1);
                if cfg.stop_shell < 1e-9 {
                    return Ok(Some((0.0, 0.0)));
                }
            }
            estimate_green(d, self.cloud, &x, &cfg, &c).map(|g| Some((g.value, g.stderr)))
        });
        let green: Vec<Option<(f64, f64)>> = green.into_iter().collect::<Result<_>>()?;

        let min_d = min_resolvable_width(d, &self.budget.gradient);
        let mut grad_points = Vec::with_capacity(self.budget.gradient_points);
        let deepest = *q0 - *nu * (0.95 * rho);
        if d.is_inside(&deepest) && d.distance_to_boundary(self.cloud, &deepest) >= min_d {
            grad_points.push(deepest);
        }
        for z in crate::sphere::quasi_ball(16 * self.budget.gradient_points) {
            if grad_points.len() >= self.budget.gradient_points {
                break;
            }
            let x = *q0 + z * rho;
            if (x - *q0).dot(nu) < 0.0 && d.is_inside(&x) && d.distance_to_boundary(self.cloud, &x) >= min_d {
                grad_points.push(x);
            }
        }
        if grad_points.is_empty() {
            return Err(Error::insufficient("no gradient probe fits in the ball"));
        }
        let grads = crate::par::map_indexed(grad_points.len(), |i| {
            estimate_green_gradient(d, self.cloud, &grad_points[i], &self.budget.gradient)
        });
        let mut set = ProbeSet {
            rho,
            points,
            green,
            grad_sup: 0.0,
            grad_stderr: 0.0,
            grad_worst: grad_points[0],
            grad_tested: grad_points.len(),
            osc,
            osc_stderr,
            h0,
            h0_stderr,
        };
        for (i, g) in grads.into_iter().enumerate() {
            let g = g?;
            let v = g.gradient.map(|v| v.norm()).unwrap_or(0.0);
            if v > set.grad_sup {
                set.grad_sup = v;
                set.grad_stderr = g.gradient_stderr;
                set.grad_worst = grad_points[i];
            }
        }
        Ok(set)
    }

    fn vanishing(set: &ProbeSet, sigma_plus: f64) -> ConditionOutcome {
        let level = sigma_plus * set.rho;
        let mut tested = 0;
        let mut worst: Option<(f64, P3)> = None;
        for (x, t, inside) in &set.points {
            if *t >= level {
                tested += 1;
            }
            if *inside && worst.is_none_or(|(w, _)| *t > w) {
                worst = Some((*t, *x));
            }
        }
        match worst {
            Some((t, x)) => {
                let margin = level - t;
                let worst = if margin <= 0.0 { Some(x) } else { None };
                ConditionOutcome {
                    pass: margin > 0.0,
                    margin,
                    slack: 0.0,
                    worst,
                    tested,
                }
            }
            None => ConditionOutcome::new(level, 0.0, None, tested),
        }
    }

    fn lower_bound(set: &ProbeSet, sigma_minus: f64) -> ConditionOutcome {
        let level = sigma_minus * set.rho;
        let mut tested = 0;
        let mut worst: Option<(f64, f64, P3)> = None;
        for ((x, t, _), g) in set.points.iter().zip(&set.green) {
            let Some((g, se)) = g else { continue };
            if *t > -level {
                continue;
            }
            tested += 1;
            let gap = t + level;
            let margin = g + set.h0 * gap;
            let slack = 2.0 * sqrt(se * se + (gap * set.h0_stderr) * (gap * set.h0_stderr));
            if worst.is_none_or(|(m, s, _)| margin + slack < m + s) {
                worst = Some((margin, slack, *x));
            }
        }
        match worst {
            Some((m, s, x)) => ConditionOutcome::new(m, s, Some(x), tested),
            None => ConditionOutcome::new(0.0, 0.0, None, 0),
        }
    }

    /// Empty slabs pass vacuously here; [`Self::certify_membership`] rejects
    /// them.
    fn assemble(set: &ProbeSet, query: FlatnessClassQuery) -> Result<FlatnessCertificate> {
        let vanishing = Self::vanishing(set, query.sigma_plus);
        let lower_bound = Self::lower_bound(set, query.sigma_minus);
        let tau = query.tau;
        let gslack = 2.0
            * sqrt(
                set.grad_stderr * set.grad_stderr
                    + ((1.0 + tau) * set.h0_stderr) * ((1.0 + tau) * set.h0_stderr),
            );
        let grad_bound = ConditionOutcome::new(
            set.h0 * (1.0 + tau) - set.grad_sup,
            gslack,
            Some(set.grad_worst),
            set.grad_tested,
        );
        let oslack =
            2.0 * sqrt(set.osc_stderr * set.osc_stderr + (tau * set.h0_stderr) * (tau * set.h0_stderr));
        let osc_bound = ConditionOutcome::new(tau * set.h0 - set.osc, oslack, None, 0);
        let mc_slack = [
            vanishing.slack,
            lower_bound.slack,
            grad_bound.slack,
            osc_bound.slack,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        Ok(FlatnessCertificate {
            query,
            pass: vanishing.pass && lower_bound.pass && grad_bound.pass && osc_bound.pass,
            vanishing,
            lower_bound,
            grad_bound,
            osc_bound,
            h0: set.h0,
            h0_stderr: set.h0_stderr,
            mc_slack,
        })
    }

    pub fn certify_membership(&self, query: &FlatnessClassQuery) -> Result<FlatnessCertificate> {
        query.validate()?;
        let set = self.probe(&query.q0, query.rho, &query.nu)?;
        let cert = Self::assemble(&set, *query)?;
        if cert.vanishing.tested == 0 || cert.lower_bound.tested == 0 {
            return Err(Error::insufficient("probe budget too small for slab coverage"));
        }
        Ok(cert)
    }

    /// Outward normal of the least-squares plane of `∂Ω ∩ B(q0, ρ)` through
    /// `q0`. Sparse or degenerate clips fall back to the radial direction,
    /// the plane orthogonal to the line from the origin to `q0`.
    fn plane_direction(&self, q0: &P3, rho: f64) -> Result<P3> {
        let radial = q0
            .normalized()
            .ok_or_else(|| Error::invalid("q0 is at the origin"))?;
        let clip = clip_to_ball(self.cloud.point_set(), q0, rho);
        if clip.len() < MIN_RELIABLE_CLIP {
            return Ok(radial);
        }
        let fit = fit_plane(clip.points(), q0)?;
        if fit.degenerate {
            return Ok(radial);
        }
        let nu = fit.plane.normal;
        Ok(if nu.dot(q0) < 0.0 { -nu } else { nu })
    }

    /// Smallest `σ` with `G ∈ F(σ, σ; τ)` certified in `B(q0, ρ)`, in the
    /// direction of the best flatness plane.
    pub fn best_sigma_at_scale(&self, q0: &P3, rho: f64, tau: f64) -> Result<SigmaFit> {
        let nu = self.plane_direction(q0, rho)?;
        let set = self.probe(q0, rho, &nu)?;
        let max_se = set.green.iter().flatten().map(|(_, s)| *s).fold(0.0, f64::max);
        let floor = (2.0 * max_se / (set.h0 * rho)).clamp(1e-4, 0.5);
        let query = |s: f64| FlatnessClassQuery {
            q0: *q0,
            rho,
            nu,
            sigma_plus: s,
            sigma_minus: s,
            tau,
        };
        query(0.5).validate()?;
        let ok = |s: f64| Self::assemble(&set, query(s)).map(|c| c.pass);
        let top = 1.0 - 1e-9;
        if !ok(top)? {
            return Ok(SigmaFit {
                sigma: 1.0,
                nu,
                certified: false,
                floor,
                certificate: Self::assemble(&set, query(top))?,
            });
        }
        let sigma = if ok(floor)? {
            floor
        } else {
            let (mut lo, mut hi) = (floor, top);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if ok(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        Ok(SigmaFit {
            sigma,
            nu,
            certified: true,
            floor,
            certificate: Self::assemble(&set, query(sigma))?,
        })
    }

    /// `best σ` at the scales `ρ0 (η/2)^k`, `k < levels`.
    pub fn decay_scan(&self, q0: &P3, rho0: f64, levels: usize, eta: f64, tau: f64) -> Result<DecayScan> {
        if levels == 0 || levels > 6 {
            return Err(Error::invalid("decay scans take between 1 and 6 levels"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        let mut scan = DecayScan {
            scales: Vec::new(),
            best_sigma: Vec::new(),
            directions: Vec::new(),
            drift_angles: Vec::new(),
            bounded: true,
            drift_constant: 0.0,
            truncated: false,
        };
        let mut rho = rho0;
        for _ in 0..levels {
            let fit = match self.best_sigma_at_scale(q0, rho, tau) {
                Ok(f) if f.certified => f,
                _ => {
                    scan.truncated = true;
                    break;
                }
            };
            if let Some(prev) = scan.directions.last() {
                let angle = acos(fit.nu.dot(prev).clamp(-1.0, 1.0));
                scan.drift_constant = scan.drift_constant.max(angle / fit.sigma);
                scan.drift_angles.push(angle);
            }
            if let Some(first) = scan.best_sigma.first() {
                if fit.sigma > first + fit.floor {
                    scan.bounded = false;
                }
            }
            scan.scales.push(rho);
            scan.best_sigma.push(fit.sigma);
            scan.directions.push(fit.nu);
            rho *= eta / 2.0;
        }
        Ok(scan)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    pub sigma: f64,
    pub nu: P3,
    pub certified: bool,
    /// Resolution floor of `σ` set by the Green-probe noise.
    pub floor: f64,
    pub certificate: FlatnessCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    pub scales: Vec<f64>,
    pub best_sigma: Vec<f64>,
    pub directions: Vec<P3>,
    /// Angles between consecutive directions.
    pub drift_angles: Vec<f64>,
    /// Whether every level's `σ` stays within its floor of the first one.
    pub bounded: bool,
    /// Fitted `C` in `|ν - ν̄| ≤ C σ`.
    pub drift_constant: f64,
    pub truncated: bool,
}
