use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{CheckName, CheckResult, Worst};
use crate::domain::{
    ahlfors_ratios, bmo_normal_norm, sample_boundary, AhlforsEntry, BmoResult, BoundaryCloud, RadiiPair,
    StarDomain,
};
use crate::error::{Error, Result};
use crate::geometry::{flatness_profile, hausdorff_distance, PlaneSearchConfig, P3};
use crate::math::{exp, powi, sqrt};
use crate::potential::{
    min_resolvable_width, sup_gradient_near_boundary, DimensionConstants, GradientShellRow, KernelField,
    WosConfig,
};

/// Flatness and density radii must be at least this many sample spacings.
pub const RESOLVABLE_SPACINGS: f64 = 8.0;

/// Hypothesis-side quantities shared by every check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub eps_meas: f64,
    pub eps_stderr: f64,
    /// `eps_meas + 2 eps_stderr`, the value used by every bound.
    pub epsilon: f64,
    pub k0: f64,
    pub coverage: f64,
}

impl Hypothesis {
    pub fn from_field(field: &KernelField, k0: f64) -> Self {
        Hypothesis {
            eps_meas: field.eps_meas,
            eps_stderr: field.eps_stderr,
            epsilon: field.epsilon(),
            k0,
            coverage: field.coverage,
        }
    }

    /// Admissible flatness scale `ρ = √2 √(e^{2ε} - 1) R1`.
    pub fn rho(&self, r1: f64) -> f64 {
        core::f64::consts::SQRT_2 * sqrt(exp(2.0 * self.epsilon) - 1.0) * r1
    }

    fn record(&self, r: &mut CheckResult) {
        r.hyp("eps_meas", self.eps_meas);
        r.hyp("eps_stderr", self.eps_stderr);
        r.hyp("epsilon", self.epsilon);
        r.hyp("k0", self.k0);
        r.hyp("coverage", self.coverage);
    }
}

/// Radii `ρ 2^{-k/2}`, `k = 1..=2 levels`, that are at least
/// [`RESOLVABLE_SPACINGS`] sample spacings.
pub fn admissible_radii(rho: f64, spacing: f64, levels: usize) -> Vec<f64> {
    (1..=2 * levels)
        .map(|k| rho * powi(core::f64::consts::FRAC_1_SQRT_2, k as i32))
        .filter(|r| *r >= RESOLVABLE_SPACINGS * spacing)
        .collect()
}

/// Floating-point allowance of closed-form comparisons.
const ROUNDING: f64 = 1e-12;

const SANDWICH: &str = "exp(-eps) <= sigma_n R1^n <= sigma_n R2^n <= exp(eps)";

/// Inclusion radii of a normalized domain against `e^{±ε}`.
pub fn check_sandwich(radii: &RadiiPair, h: &Hypothesis, c: &DimensionConstants) -> CheckResult {
    let mut r = CheckResult::new(CheckName::Sandwich, SANDWICH);
    h.record(&mut r);
    let n = c.n as i32;
    let a = c.sigma_n * powi(radii.r1, n);
    let b = c.sigma_n * powi(radii.r2, n);
    // R1, R2 come from an optimizer; the Lipschitz-widened extrema bound
    // how far the true extrema can be
    let slack_a = c.sigma_n * (powi(radii.r1, n) - powi(radii.r1_lower.min(radii.r1), n)) + ROUNDING;
    let slack_b = c.sigma_n * (powi(radii.r2_upper.max(radii.r2), n) - powi(radii.r2, n)) + ROUNDING;
    r.concl("r1", radii.r1);
    r.concl("r2", radii.r2);
    r.concl("sigma_n_r1_n", a);
    r.concl("sigma_n_r2_n", b);
    r.concl("exp_minus_eps", exp(-h.epsilon));
    r.concl("exp_eps", exp(h.epsilon));
    let mut w = Worst::default();
    w.push(a - exp(-h.epsilon), slack_a);
    w.push(b - a, slack_a + slack_b);
    w.push(exp(h.epsilon) - b, slack_b);
    r.decide(&w);
    r
}

/// Hausdorff distance between the boundary and the sphere of unit measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityDistance {
    pub distance: f64,
    /// `R = σ_n^{-1/n}`.
    pub radius: f64,
    /// Cover radius of the boundary samples plus that of the sphere samples.
    pub slack: f64,
}

pub fn stability_distance(
    cloud: &BoundaryCloud,
    c: &DimensionConstants,
    sphere_samples: usize,
) -> Result<StabilityDistance> {
    let radius = c.unit_measure_radius();
    let sphere = sample_boundary(&StarDomain::ball(radius)?, sphere_samples)?;
    let distance = hausdorff_distance(cloud.point_set(), sphere.point_set())?;
    Ok(StabilityDistance {
        distance,
        radius,
        slack: cloud.cover_radius() + sphere.cover_radius(),
    })
}

const STABILITY: &str = "D[B(0,R), boundary] < 4 eps";

pub fn check_stability_distance(m: &StabilityDistance, h: &Hypothesis) -> CheckResult {
    let mut r = CheckResult::new(CheckName::StabilityDistance, STABILITY);
    h.record(&mut r);
    r.concl("distance", m.distance);
    r.concl("radius", m.radius);
    r.concl("bound", 4.0 * h.epsilon);
    let mut w = Worst::default();
    w.push(4.0 * h.epsilon - m.distance, m.slack);
    r.decide(&w);
    r
}

/// Gradient sweep toward the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientMeasurement {
    /// Rows ordered by decreasing width.
    pub rows: Vec<GradientShellRow>,
    pub min_width: f64,
    /// The planned widths were raised to stay resolvable.
    pub coarsened: bool,
}

/// `sup |∇G|` at widths `fractions · R1` (coarsened to
/// `[4, 2, 1] · min_resolvable_width` when the smallest is not resolvable),
/// probing `probes` evenly strided samples plus the sample nearest to the
/// kernel maximizer.
pub fn gradient_measurement(
    d: &StarDomain,
    cloud: &BoundaryCloud,
    field: &KernelField,
    cfg: &WosConfig,
    fractions: &[f64],
    probes: usize,
) -> Result<GradientMeasurement> {
    let r1 = d.radii().r1;
    let min_width = min_resolvable_width(d, cfg);
    let mut widths: Vec<f64> = fractions.iter().map(|f| f * r1).collect();
    widths.sort_by(|a, b| b.total_cmp(a));
    let coarsened = widths.last().is_none_or(|w| *w < min_width);
    if coarsened {
        widths = alloc::vec![4.0 * min_width, 2.0 * min_width, min_width];
    }
    let mut samples = cloud.center_subset(probes);
    samples.push(cloud.nearest(&field.sites[field.argmax].q).0);
    samples.sort_unstable();
    samples.dedup();
    let rows = sup_gradient_near_boundary(d, cloud, cfg, &widths, &samples)?;
    Ok(GradientMeasurement {
        rows,
        min_width,
        coarsened,
    })
}

const MAIN_LEMMA: &str =
    "sup |grad G| at the smallest width <= exp(eps), non-increasing as the width shrinks";

pub fn check_main_lemma(g: &GradientMeasurement, h: &Hypothesis) -> CheckResult {
    let mut r = CheckResult::new(CheckName::MainLemma, MAIN_LEMMA);
    h.record(&mut r);
    let Some(last) = g.rows.last() else {
        r.notes.push("no gradient rows".to_string());
        return r;
    };
    let bound = exp(h.epsilon);
    r.concl("bound", bound);
    r.concl("sup_grad", last.sup_grad);
    r.concl("sup_grad_stderr", last.stderr);
    r.concl("width", last.width);
    r.concl("min_resolvable_width", g.min_width);
    for (k, row) in g.rows.iter().enumerate() {
        r.concl(&format!("sup_grad_row{k}"), row.sup_grad);
        r.concl(&format!("width_row{k}"), row.width);
    }
    if g.coarsened {
        r.notes
            .push("planned widths were below the resolvable width and were coarsened".to_string());
    }
    let mut w = Worst::default();
    w.push(bound - last.sup_grad, 2.0 * last.stderr);
    for pair in g.rows.windows(2) {
        let se = sqrt(pair[0].stderr * pair[0].stderr + pair[1].stderr * pair[1].stderr);
        w.push(pair[0].sup_grad - pair[1].sup_grad, 2.0 * se);
    }
    r.decide(&w);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub center_index: usize,
    pub radius: f64,
    pub theta: f64,
    pub slack: f64,
    pub reliable: bool,
}

/// θ profile below the admissible scale and θ at the scale itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReifenbergMeasurement {
    pub rho: f64,
    pub r1: f64,
    pub radii: Vec<f64>,
    pub profile: Vec<ThetaRow>,
    pub at_rho: Vec<ThetaRow>,
    /// Smallest radius that counts as resolvable.
    pub r_min: f64,
    pub skipped: usize,
}

fn theta_rows(cloud: &BoundaryCloud, centers: &[P3], idx: &[usize], radii: &[f64]) -> (Vec<ThetaRow>, usize) {
    let opt = PlaneSearchConfig::with_resolution(cloud.spacing());
    let prof = flatness_profile(cloud.point_set(), centers, radii, &opt);
    let mut rows = Vec::with_capacity(prof.entries.len());
    let mut skipped = 0;
    for e in prof.entries {
        if e.skipped.is_some() {
            skipped += 1;
            continue;
        }
        rows.push(ThetaRow {
            center_index: idx[e.center_index],
            radius: e.radius,
            theta: e.theta,
            slack: e.slack,
            reliable: e.reliable,
        });
    }
    (rows, skipped)
}

pub fn reifenberg_measurement(
    cloud: &BoundaryCloud,
    r1: f64,
    h: &Hypothesis,
    centers: usize,
    levels: usize,
) -> ReifenbergMeasurement {
    let rho = h.rho(r1);
    let r_min = RESOLVABLE_SPACINGS * cloud.spacing();
    let radii = admissible_radii(rho, cloud.spacing(), levels);
    let idx = cloud.center_subset(centers);
    let pts: Vec<P3> = idx.iter().map(|&i| cloud.points()[i]).collect();
    let (profile, s1) = if radii.is_empty() {
        (Vec::new(), 0)
    } else {
        theta_rows(cloud, &pts, &idx, &radii)
    };
    let (at_rho, s2) = if rho >= r_min {
        theta_rows(cloud, &pts, &idx, &[rho])
    } else {
        (Vec::new(), 0)
    };
    ReifenbergMeasurement {
        rho,
        r1,
        radii,
        profile,
        at_rho,
        r_min,
        skipped: s1 + s2,
    }
}

const REIFENBERG: &str = "theta(Q,r) <= sigma for r < rho, and theta(Q,rho) <= sqrt(2) sqrt(exp(2 eps) - 1)";

pub fn check_reifenberg(m: &ReifenbergMeasurement, h: &Hypothesis, sigma: f64) -> CheckResult {
    let mut r = CheckResult::new(CheckName::Reifenberg, REIFENBERG);
    h.record(&mut r);
    r.concl("rho", m.rho);
    r.concl("sigma", sigma);
    r.concl("r_min", m.r_min);
    if m.radii.is_empty() || m.at_rho.is_empty() {
        return r.unresolvable(format!(
            "admissible scale {:.4e} leaves no radius above the resolvable {:.4e}",
            m.rho, m.r_min
        ));
    }
    let coarse = m.rho / m.r1;
    r.concl("coarse_bound", coarse);
    let mut w = Worst::default();
    let mut sup = (0.0f64, 0.0);
    let mut excluded = 0usize;
    for t in &m.profile {
        if !t.reliable {
            excluded += 1;
            continue;
        }
        if t.theta > sup.0 {
            sup = (t.theta, t.radius);
        }
        w.push(sigma - t.theta, t.slack);
    }
    let mut sup_rho = 0.0f64;
    for t in &m.at_rho {
        if !t.reliable {
            excluded += 1;
            continue;
        }
        sup_rho = sup_rho.max(t.theta);
        w.push(coarse - t.theta, t.slack);
    }
    r.concl("theta_sup", sup.0);
    r.concl("theta_sup_radius", sup.1);
    r.concl("theta_at_rho_sup", sup_rho);
    let total = m.profile.len() + m.at_rho.len();
    if total > 0 {
        r.concl("excluded_fraction", excluded as f64 / total as f64);
    }
    if m.skipped > 0 {
        r.notes.push(format!(
            "{} (center, radius) pairs could not be evaluated",
            m.skipped
        ));
    }
    r.decide(&w);
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhlforsMeasurement {
    pub rho: f64,
    pub entries: Vec<AhlforsEntry>,
}

/// Density ratios at the admissible radii below `rho` and at `rho` itself.
pub fn ahlfors_measurement(
    cloud: &BoundaryCloud,
    rho: f64,
    centers: usize,
    levels: usize,
    c: &DimensionConstants,
) -> AhlforsMeasurement {
    let mut radii = admissible_radii(rho, cloud.spacing(), levels);
    if rho >= RESOLVABLE_SPACINGS * cloud.spacing() {
        radii.insert(0, rho);
    }
    let idx = cloud.center_subset(centers);
    let pts: Vec<P3> = idx.iter().map(|&i| cloud.points()[i]).collect();
    let mut entries = ahlfors_ratios(cloud, &pts, &radii, c);
    for e in &mut entries {
        e.center_index = idx[e.center_index];
    }
    AhlforsMeasurement { rho, entries }
}

const AHLFORS: &str =
    "1/2 <= ratio <= 4 omega_{n+1}/omega_n at every radius; 1/(1+delta) <= ratio <= 1+delta below rho";

pub fn check_ahlfors(
    m: &AhlforsMeasurement,
    h: &Hypothesis,
    delta: f64,
    c: &DimensionConstants,
) -> CheckResult {
    let mut r = CheckResult::new(CheckName::Ahlfors, AHLFORS);
    h.record(&mut r);
    r.concl("rho", m.rho);
    r.concl("delta", delta);
    if m.entries.is_empty() {
        return r.unresolvable(format!(
            "admissible scale {:.4e} is below the sample resolution",
            m.rho
        ));
    }
    let coarse_hi = 4.0 * c.omega_np1 / c.omega_n;
    let mut w = Worst::default();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut excluded = 0usize;
    let mut fine = 0usize;
    for e in &m.entries {
        if !e.reliable {
            excluded += 1;
            continue;
        }
        w.push(e.ratio - 0.5, e.slack);
        w.push(coarse_hi - e.ratio, e.slack);
        if e.radius < m.rho {
            fine += 1;
            lo = lo.min(e.ratio);
            hi = hi.max(e.ratio);
            w.push(e.ratio - 1.0 / (1.0 + delta), e.slack);
            w.push(1.0 + delta - e.ratio, e.slack);
        }
    }
    r.concl("ratio_min", lo);
    r.concl("ratio_max", hi);
    r.concl("fine_entries", fine as f64);
    r.concl("excluded_fraction", excluded as f64 / m.entries.len() as f64);
    if fine == 0 {
        return r.unresolvable("no reliable density ratio below the admissible scale".to_string());
    }
    r.decide(&w);
    r
}

/// BMO norm of the normal up to `rho`; `Ok(None)` when `rho` is below the
/// sample resolution.
pub fn bmo_measurement(cloud: &BoundaryCloud, rho: f64, centers: usize) -> Result<Option<BmoResult>> {
    match bmo_normal_norm(cloud, rho, &cloud.center_subset(centers)) {
        Ok(b) => Ok(Some(b)),
        Err(Error::Insufficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

const BMO: &str = "||n||_*(rho) <= delta";

pub fn check_bmo(m: Option<&BmoResult>, rho: f64, h: &Hypothesis, delta: f64) -> CheckResult {
    let mut r = CheckResult::new(CheckName::Bmo, BMO);
    h.record(&mut r);
    r.concl("rho", rho);
    r.concl("delta", delta);
    let Some(b) = m else {
        return r.unresolvable(format!("scale cap {rho:.4e} is below twice the sample spacing"));
    };
    r.concl("norm", b.norm);
    r.concl("argmax_scale", b.argmax_scale);
    r.concl("evaluated", b.evaluated as f64);
    r.concl("unreliable", b.unreliable as f64);
    if b.evaluated == 0 {
        return r.unresolvable(String::from("every BMO ball is too sparse"));
    }
    let mut w = Worst::default();
    w.push(delta - b.norm, b.slack);
    r.decide(&w);
    r
}
