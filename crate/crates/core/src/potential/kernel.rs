//! Poisson kernel as a density ratio of harmonic measure to surface measure
//! over boundary caps.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::HarmonicMeasureEstimate;
use crate::domain::{BoundaryCloud, StarDomain};
use crate::error::{Error, Result};
use crate::geometry::P3;
use crate::math::{ln, sqrt, PI};

/// Sites whose expected exit count falls below this are left out of the sup.
pub const MIN_EXPECTED_EXITS: f64 = 200.0;
/// Sites with fewer observed exits are flagged and left out of the sup.
pub const MIN_OBSERVED_EXITS: usize = 50;
/// Expected exits per cap targeted by [`default_cap_radius`].
pub const TARGET_EXITS: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSite {
    pub q: P3,
    pub h: f64,
    pub stderr: f64,
    pub cap_radius: f64,
    pub exits: usize,
    /// Exits a uniform density would put in the cap.
    pub expected_exits: f64,
    pub cap_measure: f64,
    /// True when the site takes part in `eps_meas`.
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelField {
    pub sites: Vec<KernelSite>,
    /// `max |log h|` over the used sites.
    pub eps_meas: f64,
    /// `stderr(h) / h` at the maximizing site.
    pub eps_stderr: f64,
    pub argmax: usize,
    /// Fraction of surface measure within one cap radius of a used site.
    pub coverage: f64,
    pub warnings: Vec<String>,
}

impl KernelField {
    /// The `ε` used by the theorem checks: `eps_meas + 2 eps_stderr`.
    pub fn epsilon(&self) -> f64 {
        self.eps_meas + 2.0 * self.eps_stderr
    }

    /// Mean and standard error of `log h` over the used sites.
    pub fn log_h_mean(&self) -> (f64, f64) {
        let used: Vec<f64> = self.sites.iter().filter(|s| s.used).map(|s| ln(s.h)).collect();
        let m = used.len() as f64;
        let mean = used.iter().sum::<f64>() / m;
        let se = sqrt(
            self.sites
                .iter()
                .filter(|s| s.used)
                .map(|s| (s.stderr / s.h) * (s.stderr / s.h))
                .sum::<f64>(),
        ) / m;
        (mean, se)
    }
}

/// Cap radius for which a uniform kernel puts [`TARGET_EXITS`] exits in each
/// cap (flat-disc approximation).
pub fn default_cap_radius(cloud: &BoundaryCloud, trajectories: usize) -> f64 {
    sqrt(TARGET_EXITS * cloud.total_measure() / (trajectories as f64 * PI))
}

/// `count` boundary points at spiral directions.
pub fn default_sites(d: &StarDomain, count: usize) -> Vec<P3> {
    crate::sphere::fibonacci_directions(count)
        .iter()
        .map(|u| d.boundary_point(u))
        .collect()
}

/// `h(q) ≈ ω̂(B(q, s)) / σ(B(q, s))` at every site, with binomial errors.
pub fn estimate_poisson_kernel(
    est: &HarmonicMeasureEstimate,
    cloud: &BoundaryCloud,
    sites: &[P3],
    cap_radius: f64,
) -> Result<KernelField> {
    est.validate_against(cloud)?;
    if sites.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(cap_radius > 0.0) {
        return Err(Error::invalid("cap radius must be positive"));
    }
    let n = est.trajectories() as f64;
    let total = cloud.total_measure();
    let tallies = est.tallies(cloud.len());
    let mut warnings = Vec::new();
    let rows = crate::par::map_indexed(sites.len(), |i| {
        let q = sites[i];
        let mut measure = 0.0;
        let mut k = 0u64;
        for j in cloud.point_set().indices_within(&q, cap_radius) {
            measure += cloud.weights()[j];
            k += tallies[j];
        }
        (q, measure, k as usize)
    });
    let mut out = Vec::with_capacity(rows.len());
    for (q, measure, k) in rows {
        let expected = n * measure / total;
        let p = k as f64 / n;
        let (h, stderr) = if measure > 0.0 {
            (p / measure, sqrt(p * (1.0 - p) / n) / measure)
        } else {
            (0.0, 0.0)
        };
        let mut used = expected >= MIN_EXPECTED_EXITS;
        if used && k < MIN_OBSERVED_EXITS {
            used = false;
            warnings.push(alloc::format!(
                "site {:?} has only {} exits and is left out of eps_meas",
                q.0,
                k
            ));
        }
        out.push(KernelSite {
            q,
            h,
            stderr,
            cap_radius,
            exits: k,
            expected_exits: expected,
            cap_measure: measure,
            used,
        });
    }
    let mut argmax = None;
    let mut eps = 0.0;
    for (i, s) in out.iter().enumerate() {
        if s.used {
            let v = ln(s.h).abs();
            if argmax.is_none() || v > eps {
                eps = v;
                argmax = Some(i);
            }
        }
    }
    let argmax = argmax.ok_or_else(|| {
        Error::insufficient("no cap reaches the expected-exit floor; enlarge the cap radius or the budget")
    })?;
    let used_sites: Vec<P3> = out.iter().filter(|s| s.used).map(|s| s.q).collect();
    let r2 = cap_radius * cap_radius;
    let mut covered = 0.0;
    for (p, w) in cloud.points().iter().zip(cloud.weights()) {
        if used_sites.iter().any(|q| q.dist2(p) <= r2) {
            covered += w;
        }
    }
    let s = &out[argmax];
    Ok(KernelField {
        eps_meas: eps,
        eps_stderr: s.stderr / s.h,
        argmax,
        coverage: covered / total,
        sites: out,
        warnings,
    })
}
