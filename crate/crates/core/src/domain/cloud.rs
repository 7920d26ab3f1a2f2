use alloc::vec::Vec;

use super::StarDomain;
use crate::error::{Error, Result};
use crate::geometry::{PointSet, P3};
use crate::math::{sqrt, PI};
use crate::sphere::fibonacci_directions;

/// Ratio between the covering radius of the samples and the largest
/// per-sample length scale `sqrt(weight)`. Spiral nodes cover the sphere with
/// caps of about 0.7 of that scale; 1.5 leaves room for graph distortion.
const COVER_FACTOR: f64 = 1.5;

/// Weighted boundary samples: point, outward unit normal, area weight.
#[derive(Clone, Debug)]
pub struct BoundaryCloud {
    points: PointSet<3>,
    normals: Vec<P3>,
    weights: Vec<f64>,
    directions: Vec<P3>,
    total_measure: f64,
    spacing: f64,
    cover: f64,
}

impl BoundaryCloud {
    /// Assembles a cloud from raw samples (for example a CSV import).
    pub fn from_samples(points: Vec<P3>, normals: Vec<P3>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if points.len() != normals.len() || points.len() != weights.len() {
            return Err(Error::invalid("points, normals and weights differ in length"));
        }
        let mut directions = Vec::with_capacity(points.len());
        for ((p, n), w) in points.iter().zip(&normals).zip(&weights) {
            if !p.is_finite() || !n.is_finite() || !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid("boundary sample is not finite"));
            }
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("boundary normal is not a unit vector"));
            }
            directions.push(
                p.normalized()
                    .ok_or_else(|| Error::invalid("boundary sample at the origin"))?,
            );
        }
        let total_measure: f64 = weights.iter().sum();
        let spacing = sqrt(total_measure / points.len() as f64);
        let cover = COVER_FACTOR * weights.iter().fold(0.0f64, |m, w| m.max(sqrt(*w)));
        Ok(BoundaryCloud {
            points: PointSet::new(points),
            normals,
            weights,
            directions,
            total_measure,
            spacing,
            cover,
        })
    }

    /// Samples with stored radial directions (as written by
    /// [`sample_boundary`]), so a reloaded cloud is bit-identical.
    pub fn from_parts(
        points: Vec<P3>,
        normals: Vec<P3>,
        weights: Vec<f64>,
        directions: Vec<P3>,
    ) -> Result<Self> {
        if directions.len() != points.len() {
            return Err(Error::invalid("directions and points differ in length"));
        }
        if directions
            .iter()
            .any(|u| !u.is_finite() || (u.norm() - 1.0).abs() > 1e-9)
        {
            return Err(Error::invalid("sample direction is not a unit vector"));
        }
        let mut c = BoundaryCloud::from_samples(points, normals, weights)?;
        c.directions = directions;
        Ok(c)
    }

    /// Same samples with replaced unit normals.
    pub fn with_normals(&self, normals: Vec<P3>) -> Result<Self> {
        let mut c =
            BoundaryCloud::from_samples(self.points.points().to_vec(), normals, self.weights.clone())?;
        c.directions = self.directions.clone();
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point_set(&self) -> &PointSet<3> {
        &self.points
    }

    pub fn points(&self) -> &[P3] {
        self.points.points()
    }

    pub fn normals(&self) -> &[P3] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Unit radial directions `p / |p|` of the samples.
    pub fn directions(&self) -> &[P3] {
        &self.directions
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Mean sample spacing `sqrt(totalMeasure / N)`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Radius within which every boundary point has a sample.
    pub fn cover_radius(&self) -> f64 {
        self.cover
    }

    pub fn nearest(&self, x: &P3) -> (usize, f64) {
        self.points.nearest(x).expect("cloud is nonempty")
    }

    /// `σ(B(q, r))` and the number of samples it contains.
    pub fn measure_within(&self, q: &P3, r: f64) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        // visit in index order so the floating sum does not depend on the tree
        for i in self.points.indices_within(q, r) {
            sum += self.weights[i];
            count += 1;
        }
        (sum, count)
    }

    /// Evenly strided sample indices, at most `count` of them.
    pub fn center_subset(&self, count: usize) -> Vec<usize> {
        let n = self.len();
        if count >= n {
            return (0..n).collect();
        }
        (0..count).map(|k| (k * n) / count.max(1)).collect()
    }
}

/// Samples the boundary of `d` at `target_count` spiral directions.
pub fn sample_boundary(d: &StarDomain, target_count: usize) -> Result<BoundaryCloud> {
    if target_count < 100 {
        return Err(Error::invalid("boundary sampling needs at least 100 samples"));
    }
    let dirs = fibonacci_directions(target_count);
    let quad = 4.0 * PI / target_count as f64;
    let samples = crate::par::map_indexed(target_count, |i| {
        let u = dirs[i];
        let (r, g) = d.radius_and_gradient(&u);
        let p = u * r;
        let n = (u * r - g).normalized();
        (p, n, quad * r * sqrt(r * r + g.norm2()), g.is_finite())
    });
    let mut points = Vec::with_capacity(target_count);
    let mut normals = Vec::with_capacity(target_count);
    let mut weights = Vec::with_capacity(target_count);
    for (p, n, w, ok) in samples {
        let n = match n {
            Some(n) if ok && w.is_finite() => n,
            _ => return Err(Error::Numerical("surface gradient is not finite".into())),
        };
        points.push(p);
        normals.push(n);
        weights.push(w);
    }
    let mut cloud = BoundaryCloud::from_samples(points, normals, weights)?;
    cloud.directions = dirs;
    Ok(cloud)
}

impl StarDomain {
    /// Lower bound on the distance from `x` to `∂Ω`.
    ///
    /// Far from the boundary this is `max(R1_lower - |x|, d(x, samples) -
    /// cover)`. Close to the boundary the nearest sample seeds a projection
    /// onto the radial graph and the projected distance is returned, so the
    /// uncertainty shell is set by the projection tolerance and not by the
    /// sample spacing. Returns 0 on the boundary.
    pub fn distance_to_boundary(&self, cloud: &BoundaryCloud, x: &P3) -> f64 {
        let t = x.norm();
        let inner = self.radii.r1_lower - t;
        if t == 0.0 {
            return inner.max(0.0);
        }
        let gap = self.radial_gap(x);
        // the radial gap bounds the distance from above for interior points
        if gap > 0.0 && inner >= 0.9 * gap {
            return inner;
        }
        let (idx, ds) = cloud.nearest(x);
        let cover = cloud.cover_radius();
        if ds > 4.0 * cover {
            return inner.max(ds - cover).max(0.0);
        }
        let (_, dl) = self.project_to_boundary(x, &cloud.directions()[idx]);
        inner.max(dl.min(ds)).max(0.0)
    }

    /// Nearest boundary point to `x` found by alternating tangent-plane
    /// projection and radial lifting, started at direction `u0`. Returns the
    /// point and its distance to `x`.
    pub fn project_to_boundary(&self, x: &P3, u0: &P3) -> (P3, f64) {
        let mut u = *u0;
        let mut best = (self.boundary_point(&u), f64::INFINITY);
        best.1 = best.0.dist(x);
        for _ in 0..24 {
            let (r, g) = self.radius_and_gradient(&u);
            let p = u * r;
            let n = match (u * r - g).normalized() {
                Some(n) => n,
                None => break,
            };
            let foot = *x - n * (*x - p).dot(&n);
            let next = match foot.normalized() {
                Some(v) => v,
                None => break,
            };
            let q = self.boundary_point(&next);
            let dq = q.dist(x);
            let moved = next.dist(&u);
            if dq < best.1 {
                best = (q, dq);
            }
            u = next;
            if moved < 1e-13 {
                break;
            }
        }
        best
    }
}
