//! Cross-checks between harmonic measure and the Green function, the
//! boundary gradient sweep, and the growth constant `K0`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::wos::{gradient_with_cov, GreenSample};
use super::{
    estimate_green, estimate_green_gradient, DimensionConstants, HarmonicMeasureEstimate, WosConfig,
};
use crate::domain::{BoundaryCloud, StarDomain};
use crate::error::{Error, Result};
use crate::geometry::{MIN_RELIABLE_CLIP, P3};
use crate::math::{cos, powi, sin, sqrt, PI};

/// Azimuthal and polar node counts of the sphere quadrature used by the
/// identity checks.
pub const IDENTITY_PHI_NODES: usize = 12;
pub const IDENTITY_POLAR_NODES: usize = 6;
/// Radial steps of the trapezoid rule in the spherical-mean identity.
pub const RIESZ_STEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// Quadrature nodes inside the domain.
    pub nodes: usize,
}

impl IdentityCheck {
    pub fn combined_stderr(&self) -> f64 {
        sqrt(self.lhs_stderr * self.lhs_stderr + self.rhs_stderr * self.rhs_stderr)
    }

    /// `|lhs - rhs|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let s = self.combined_stderr();
        let diff = (self.lhs - self.rhs).abs();
        if s > 0.0 {
            diff / s
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees(&self, k: f64) -> bool {
        self.z_score() <= k
    }
}

/// Inward unit normal of `∂Ω` at the boundary point `q`.
fn inward_normal(d: &StarDomain, q: &P3) -> Result<P3> {
    let u = q
        .normalized()
        .ok_or_else(|| Error::invalid("boundary point at the origin"))?;
    let (r, g) = d.radius_and_gradient(&u);
    (g - u * r)
        .normalized()
        .ok_or_else(|| Error::Numerical("degenerate boundary normal".into()))
}

fn check_on_boundary(d: &StarDomain, q: &P3) -> Result<()> {
    let u = q
        .normalized()
        .ok_or_else(|| Error::invalid("boundary point at the origin"))?;
    if (d.radius(&u) - q.norm()).abs() > 1e-8 * d.radii().r1 {
        return Err(Error::invalid("point is not on the boundary"));
    }
    Ok(())
}

/// Quadrature for `∂B(q, r) ∩ Ω`: along each meridian about the inward
/// normal the crossing of `∂Ω` is located by bisection and Gauss–Legendre
/// nodes fill the inside arc, so the cut does not fall between nodes.
/// Weights carry the area element.
pub(crate) fn inside_sphere_quadrature(
    d: &StarDomain,
    q: &P3,
    r: f64,
    n_phi: usize,
    n_polar: usize,
) -> Result<Vec<(P3, f64)>> {
    let e = inward_normal(d, q)?;
    let (a, b) = e.tangent_frame();
    let (zs, ws) = crate::sphere::gauss_legendre(n_polar);
    let dphi = 2.0 * PI / n_phi as f64;
    let point = |theta: f64, phi: f64| *q + (e * cos(theta) + (a * cos(phi) + b * sin(phi)) * sin(theta)) * r;
    let mut out = Vec::with_capacity(n_phi * n_polar);
    for j in 0..n_phi {
        let phi = (j as f64 + 0.5) * dphi;
        if !d.is_inside(&point(0.0, phi)) {
            return Err(Error::Numerical(
                "sphere pole along the inward normal lies outside".into(),
            ));
        }
        // first outside angle on a coarse scan, then bisection
        let steps = 128;
        let mut cut = PI;
        for s in 1..=steps {
            let th = PI * s as f64 / steps as f64;
            if !d.is_inside(&point(th, phi)) {
                let (mut lo, mut hi) = (PI * (s - 1) as f64 / steps as f64, th);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if d.is_inside(&point(mid, phi)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cut = 0.5 * (lo + hi);
                break;
            }
        }
        let z0 = cos(cut);
        let half = 0.5 * (1.0 - z0);
        for (z, w) in zs.iter().zip(&ws) {
            let zc = z0 + half * (z + 1.0);
            let th = crate::math::acos(zc.clamp(-1.0, 1.0));
            out.push((point(th, phi), w * half * dphi * r * r));
        }
    }
    Ok(out)
}

/// Moves `x` along `dir` until the certified distance reaches `target`.
fn push_inside(d: &StarDomain, cloud: &BoundaryCloud, x: &P3, dir: &P3, target: f64) -> P3 {
    let mut y = *x;
    for _ in 0..16 {
        let dist = d.distance_to_boundary(cloud, &y);
        if dist >= target {
            break;
        }
        y += *dir * (target - dist).max(0.05 * target);
    }
    y
}

/// Spherical-mean identity at the boundary point `q`: the mean of `G` over
/// `∂B(q, r)` (with `G = 0` outside `Ω`) against
/// `(1 / ((n+1) ω_{n+1})) ∫_0^r ω(B(q, t)) / t^n dt`.
#[allow(clippy::too_many_arguments)]
pub fn riesz_mean_identity_check(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    est: &HarmonicMeasureEstimate,
    q: &P3,
    r: f64,
    cfg: &WosConfig,
    c: &DimensionConstants,
) -> Result<IdentityCheck> {
    est.validate_against(cloud)?;
    check_on_boundary(d, q)?;
    if !(r > 0.0 && r < d.radii().r1) {
        return Err(Error::invalid("radius must lie in (0, R1)"));
    }
    if q.norm() <= r {
        return Err(Error::invalid("the pole lies inside B(q, r)"));
    }
    let shell = cfg.shell(d);
    let nodes = inside_sphere_quadrature(d, q, r, IDENTITY_PHI_NODES, IDENTITY_POLAR_NODES)?;
    let area = 4.0 * PI * r * r;
    let vals = crate::par::map_indexed(nodes.len(), |k| {
        let (z, w) = nodes[k];
        // G vanishes to first order at the boundary; nodes inside the
        // exclusion band contribute 0
        if d.distance_to_boundary(cloud, &z) <= 10.0 * shell {
            return Ok((0.0, 0.0));
        }
        estimate_green(d, cloud, &z, cfg, c).map(|g| (w * g.value, w * g.stderr))
    });
    let (mut lhs, mut lvar) = (0.0, 0.0);
    for v in vals {
        let (a, s) = v?;
        lhs += a;
        lvar += s * s;
    }

    // trapezoid in t on [t0, r], constant below t0
    let t0 = (r / RIESZ_STEPS as f64).max(2.0 * cloud.spacing()).min(r / 4.0);
    let ts: Vec<f64> = (0..=RIESZ_STEPS)
        .map(|i| t0 + (r - t0) * i as f64 / RIESZ_STEPS as f64)
        .collect();
    let dt = (r - t0) / RIESZ_STEPS as f64;
    let n = c.n as i32;
    let coef: Vec<f64> = ts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut w = if i == 0 || i == RIESZ_STEPS { 0.5 * dt } else { dt };
            if i == 0 {
                w += t0;
            }
            w / powi(*t, n)
        })
        .collect();
    let pref = 1.0 / ((c.n + 1) as f64 * c.omega_np1);
    let pts = cloud.points();
    let total = est.trajectories() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for e in &est.exits {
        let s = pts[e.sample as usize].dist(q);
        if s > r {
            continue;
        }
        let mut psi = 0.0;
        for (t, w) in ts.iter().zip(&coef) {
            if s <= *t {
                psi += w;
            }
        }
        s1 += psi;
        s2 += psi * psi;
    }
    let mean = s1 / total;
    let var = (s2 / total - mean * mean).max(0.0) * total / (total - 1.0);
    Ok(IdentityCheck {
        lhs: lhs / area,
        lhs_stderr: sqrt(lvar) / area,
        rhs: pref * mean,
        rhs_stderr: pref * sqrt(var / total),
        nodes: nodes.len(),
    })
}

/// Flux identity at the boundary point `q`: `ω(B(q, r))` against the flux of
/// `∇G` through `∂B(q, r) ∩ Ω`.
pub fn flux_identity_check(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    est: &HarmonicMeasureEstimate,
    q: &P3,
    r: f64,
    cfg: &WosConfig,
) -> Result<IdentityCheck> {
    est.validate_against(cloud)?;
    check_on_boundary(d, q)?;
    if !(r > 0.0 && r < d.radii().r1 / 4.0) {
        return Err(Error::invalid("radius must lie in (0, R1/4)"));
    }
    let (p, _) = est.cap(cloud, q, r);
    let total = est.trajectories() as f64;
    let shell = cfg.shell(d);
    let e = inward_normal(d, q)?;
    let nodes = inside_sphere_quadrature(d, q, r, IDENTITY_PHI_NODES, IDENTITY_POLAR_NODES)?;
    let rows = crate::par::map_indexed(nodes.len(), |k| {
        let (z, w) = nodes[k];
        let radial = (z - *q) * (1.0 / r);
        // the gradient is continuous up to the boundary; nodes too close for
        // the quadrature sphere are evaluated slightly further in
        let y = push_inside(d, cloud, &z, &e, 42.0 * shell);
        let (g, cov) = gradient_with_cov(d, cloud, &y, cfg)?;
        let grad = g.gradient.unwrap_or_else(P3::zero);
        let mut var = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                var += radial.0[a] * radial.0[b] * cov[a][b];
            }
        }
        Ok::<_, Error>((w * grad.dot(&radial), w * w * var))
    });
    let (mut rhs, mut rvar) = (0.0, 0.0);
    for row in rows {
        let (v, s) = row?;
        rhs += v;
        rvar += s;
    }
    Ok(IdentityCheck {
        lhs: p,
        lhs_stderr: sqrt(p * (1.0 - p) / total),
        rhs,
        rhs_stderr: sqrt(rvar),
        nodes: nodes.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientShellRow {
    pub width: f64,
    pub sup_grad: f64,
    /// Standard error of `|∇G|` at the maximizing probe.
    pub stderr: f64,
    pub argmax_sample: usize,
    pub probes: usize,
    /// Probes that left the domain along the normal and were re-placed
    /// radially.
    pub reprojected: usize,
    pub values: Vec<f64>,
}

/// Smallest shell width at which the quadrature sphere of a gradient probe
/// stays twenty absorption shells clear of the boundary.
pub fn min_resolvable_width(d: &StarDomain, cfg: &WosConfig) -> f64 {
    42.0 * cfg.shell(d)
}

/// `sup |∇G|` over probes at distance `width` from the boundary, one row per
/// width. Probes are the samples `probe_samples` moved inward along the
/// normal.
pub fn sup_gradient_near_boundary(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    cfg: &WosConfig,
    widths: &[f64],
    probe_samples: &[usize],
) -> Result<Vec<GradientShellRow>> {
    cfg.validate()?;
    if probe_samples.is_empty() || widths.is_empty() {
        return Err(Error::EmptySet);
    }
    let min_w = min_resolvable_width(d, cfg);
    let mut rows = Vec::with_capacity(widths.len());
    for &w in widths {
        if !(w >= min_w) {
            return Err(Error::invalid(alloc::format!(
                "shell width {w} is below the resolvable width {min_w}"
            )));
        }
        let res = crate::par::map_indexed(probe_samples.len(), |k| {
            let i = probe_samples[k];
            let p = cloud.points()[i];
            let mut x = p - cloud.normals()[i] * w;
            let mut moved = false;
            if !d.is_inside(&x) || d.distance_to_boundary(cloud, &x) < 0.5 * w {
                let u = cloud.directions()[i];
                x = u * (d.radius(&u) - w);
                moved = true;
            }
            estimate_green_gradient(d, cloud, &x, cfg).map(|g| (g, moved))
        });
        let mut row = GradientShellRow {
            width: w,
            sup_grad: 0.0,
            stderr: 0.0,
            argmax_sample: probe_samples[0],
            probes: probe_samples.len(),
            reprojected: 0,
            values: Vec::with_capacity(probe_samples.len()),
        };
        for (k, r) in res.into_iter().enumerate() {
            let (g, moved): (GreenSample, bool) = r?;
            let v = g.gradient.map(|v| v.norm()).unwrap_or(0.0);
            row.values.push(v);
            row.reprojected += usize::from(moved);
            if v > row.sup_grad {
                row.sup_grad = v;
                row.stderr = g.gradient_stderr;
                row.argmax_sample = probe_samples[k];
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstant {
    /// `max σ(B(Q, r)) / r^n`.
    pub k0: f64,
    /// Band-area slack at the maximizer, in the same units.
    pub slack: f64,
    pub argmax_center: usize,
    pub argmax_radius: f64,
    pub unreliable: usize,
}

/// `K0 = sup_{r < 1} sup_Q σ(B(Q, r)) / r^n` over sample centers and the
/// given radii.
pub fn growth_constant(
    cloud: &BoundaryCloud,
    radii: &[f64],
    centers: &[usize],
    c: &DimensionConstants,
) -> Result<GrowthConstant> {
    if radii.is_empty() || centers.is_empty() {
        return Err(Error::EmptySet);
    }
    if radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::invalid("growth radii must lie in (0, 1)"));
    }
    let n = c.n as i32;
    let h = cloud.spacing();
    let pts = cloud.points();
    let rows = crate::par::map_indexed(centers.len() * radii.len(), |k| {
        let ci = centers[k / radii.len()];
        let r = radii[k % radii.len()];
        let (m, count) = cloud.measure_within(&pts[ci], r);
        (ci, r, m / powi(r, n), count)
    });
    let mut out = GrowthConstant {
        k0: 0.0,
        slack: 0.0,
        argmax_center: centers[0],
        argmax_radius: radii[0],
        unreliable: 0,
    };
    for (ci, r, ratio, count) in rows {
        if count < MIN_RELIABLE_CLIP {
            out.unreliable += 1;
            continue;
        }
        if ratio > out.k0 {
            out.k0 = ratio;
            out.argmax_center = ci;
            out.argmax_radius = r;
        }
    }
    if out.k0 == 0.0 {
        return Err(Error::insufficient("every growth ball is too sparse"));
    }
    let r = out.argmax_radius;
    out.slack = c.n as f64 * c.omega_n * powi(r, n - 1) * (h / 2.0) / powi(r, n);
    Ok(out)
}
