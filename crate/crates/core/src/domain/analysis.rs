use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{BoundaryCloud, StarDomain};
use crate::error::{Error, Result};
use crate::geometry::{theta_flatness, PlaneSearchConfig, MIN_RELIABLE_CLIP, P3};
use crate::math::sqrt;
use crate::potential::DimensionConstants;

/// `R2 / R1` must stay below this for the ball homeomorphism.
pub const HOMEOMORPHISM_RATIO_LIMIT: f64 = 1.0 + 1.0 / 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationVerdict {
    Separated,
    NotSeparated,
    /// The flatness plane came from a clip too sparse to trust.
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationOutcome {
    pub verdict: SeparationVerdict,
    /// Unit normal of `L(q, r)`, oriented into the domain.
    pub normal: P3,
    pub upper_tested: usize,
    pub lower_tested: usize,
    pub violations: usize,
}

/// Tests the separation property at `(q, r)`: probe points of `B(q, r)` with
/// `⟨X - q, ν⟩ > r/4` must lie in `Ω` and those with `⟨X - q, ν⟩ < -r/4`
/// outside, where `ν` is the flatness-plane normal oriented inward.
pub fn separation_check(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    q: &P3,
    r: f64,
    opt: &PlaneSearchConfig,
    probes: usize,
) -> Result<SeparationOutcome> {
    if r > d.radii().r1 * (1.0 + 1e-12) {
        return Err(Error::invalid("separation radius must not exceed R1"));
    }
    let est = theta_flatness(cloud.point_set(), q, r, opt)?;
    let mut nu = est.plane.normal;
    if nu.dot(q) > 0.0 {
        nu = -nu;
    }
    let mut out = SeparationOutcome {
        verdict: SeparationVerdict::Separated,
        normal: nu,
        upper_tested: 0,
        lower_tested: 0,
        violations: 0,
    };
    for z in crate::sphere::quasi_ball(probes) {
        let x = *q + z * r;
        let t = z.dot(&nu) * r;
        if t > r / 4.0 {
            out.upper_tested += 1;
            if !d.is_inside(&x) {
                out.violations += 1;
            }
        } else if t < -r / 4.0 {
            out.lower_tested += 1;
            if d.is_inside(&x) {
                out.violations += 1;
            }
        }
    }
    out.verdict = if !est.reliable {
        SeparationVerdict::Indeterminate
    } else if out.violations == 0 {
        SeparationVerdict::Separated
    } else {
        SeparationVerdict::NotSeparated
    };
    Ok(out)
}

/// Largest scale `r_max 2^{-k}` (`k < levels`) at which the separation check
/// passes, or `None`.
pub fn separation_scale(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    q: &P3,
    r_max: f64,
    levels: usize,
    opt: &PlaneSearchConfig,
    probes: usize,
) -> Option<f64> {
    let mut r = r_max;
    for _ in 0..levels {
        if let Ok(o) = separation_check(d, cloud, q, r, opt, probes) {
            if o.verdict == SeparationVerdict::Separated {
                return Some(r);
            }
        }
        r *= 0.5;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhlforsEntry {
    pub center_index: usize,
    pub radius: f64,
    /// `σ(B(Q, r))`.
    pub measure: f64,
    /// `σ(B(Q, r)) / (ω_n r^n)`.
    pub ratio: f64,
    /// Area of the band of width one spacing along `∂B(Q, r)`, relative to
    /// `ω_n r^n`.
    pub slack: f64,
    pub count: usize,
    pub reliable: bool,
}

/// Density ratios `σ(B(Q, r)) / (ω_n r^n)` for every center and radius.
pub fn ahlfors_ratios(
    cloud: &BoundaryCloud,
    centers: &[P3],
    radii: &[f64],
    c: &DimensionConstants,
) -> Vec<AhlforsEntry> {
    let h = cloud.spacing();
    let n = c.n as i32;
    crate::par::map_indexed(centers.len() * radii.len(), |k| {
        let ci = k / radii.len();
        let r = radii[k % radii.len()];
        let (measure, count) = cloud.measure_within(&centers[ci], r);
        let flat = c.omega_n * crate::math::powi(r, n);
        // perimeter of the flat n-ball is n ω_n r^{n-1}; band width h/2
        let band = c.n as f64 * c.omega_n * crate::math::powi(r, n - 1) * h / 2.0;
        AhlforsEntry {
            center_index: ci,
            radius: r,
            measure,
            ratio: measure / flat,
            slack: band / flat,
            count,
            reliable: count >= MIN_RELIABLE_CLIP,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoResult {
    /// `sup_{Q, s} (mean_{B(Q,s)} |n - n_{Q,s}|²)^{1/2}` over reliable balls.
    pub norm: f64,
    pub argmax_center: usize,
    pub argmax_scale: f64,
    /// Sampling slack attached to the sup: the value times `spacing / s`.
    pub slack: f64,
    pub evaluated: usize,
    pub unreliable: usize,
}

/// BMO oscillation of the unit normal over dyadic scales
/// `s = scale_cap 2^{-k}` down to the sample spacing.
pub fn bmo_normal_norm(cloud: &BoundaryCloud, scale_cap: f64, centers: &[usize]) -> Result<BmoResult> {
    if !(scale_cap > 0.0) {
        return Err(Error::invalid("BMO scale cap must be positive"));
    }
    let h = cloud.spacing();
    let mut scales = Vec::new();
    let mut s = scale_cap;
    while s >= 2.0 * h && scales.len() < 40 {
        scales.push(s);
        s *= 0.5;
    }
    if scales.is_empty() {
        return Err(Error::insufficient("BMO scale cap is below the sample spacing"));
    }
    let pts = cloud.points();
    let rows = crate::par::map_indexed(centers.len() * scales.len(), |k| {
        let ci = centers[k / scales.len()];
        let s = scales[k % scales.len()];
        let idx = cloud.point_set().indices_within(&pts[ci], s);
        if idx.len() < MIN_RELIABLE_CLIP {
            return None;
        }
        let mut w = 0.0;
        let mut m = P3::zero();
        for &i in &idx {
            w += cloud.weights()[i];
            m += cloud.normals()[i] * cloud.weights()[i];
        }
        let mean = m * (1.0 / w);
        Some(sqrt((1.0 - mean.norm2()).max(0.0)))
    });
    let mut out = BmoResult {
        norm: 0.0,
        argmax_center: centers.first().copied().unwrap_or(0),
        argmax_scale: scales[0],
        slack: 0.0,
        evaluated: 0,
        unreliable: 0,
    };
    for (k, v) in rows.iter().enumerate() {
        match v {
            Some(v) => {
                out.evaluated += 1;
                if *v > out.norm {
                    out.norm = *v;
                    out.argmax_center = centers[k / scales.len()];
                    out.argmax_scale = scales[k % scales.len()];
                }
            }
            None => out.unreliable += 1,
        }
    }
    if out.evaluated == 0 {
        return Err(Error::insufficient("every BMO ball is too sparse"));
    }
    out.slack = out.norm * h / out.argmax_scale;
    Ok(out)
}
