//! Euclidean geometry on sampled sets: Hausdorff distance, plane fitting and
//! the flatness functional
//!
//! ```text
//! θ(Q, r) = inf_L  D[Σ ∩ B(Q, r), L ∩ B(Q, r)] / r
//! ```
//!
//! where `L` runs over hyperplanes through `Q` and `D` is the *sum* of the
//! two one-sided deviations.

mod kdtree;
mod linalg;
mod point;

use alloc::string::String;
use alloc::vec::Vec;

pub use kdtree::KdTree;
pub use linalg::symmetric_eigen;
pub use point::{Point, P3};

use crate::error::{Error, Result};
use crate::math::{floor, sqrt};
use crate::par;

/// Point sets at or above this size get a k-d tree; smaller ones are
/// searched by brute force.
pub const INDEX_THRESHOLD: usize = 512;

/// Clips with fewer points than this give unreliable flatness values.
pub const MIN_RELIABLE_CLIP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperplane<const D: usize> {
    pub base: Point<D>,
    pub normal: Point<D>,
}

impl<const D: usize> Hyperplane<D> {
    /// Plane through `base` with the given (not necessarily unit) normal.
    pub fn new(base: Point<D>, normal: Point<D>) -> Result<Self> {
        let normal = normal
            .normalized()
            .ok_or_else(|| Error::invalid("hyperplane normal must be nonzero and finite"))?;
        Ok(Hyperplane { base, normal })
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point<D>) -> f64 {
        (*p - self.base).dot(&self.normal)
    }

    #[inline]
    pub fn project(&self, p: &Point<D>) -> Point<D> {
        *p - self.normal * self.signed_distance(p)
    }

    /// Orthonormal basis of the plane's direction space (`D - 1` vectors).
    pub fn basis(&self) -> Vec<Point<D>> {
        complement_basis(&self.normal)
    }
}

/// Orthonormal basis of the orthogonal complement of a unit vector.
pub fn complement_basis<const D: usize>(normal: &Point<D>) -> Vec<Point<D>> {
    let mut basis: Vec<Point<D>> = Vec::with_capacity(D.saturating_sub(1));
    // Start from the axes least aligned with the normal.
    let mut axes: Vec<usize> = (0..D).collect();
    axes.sort_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()));
    for &a in &axes {
        if basis.len() + 1 == D {
            break;
        }
        let mut v = Point::<D>::axis(a);
        v -= *normal * v.dot(normal);
        for b in &basis {
            v -= *b * v.dot(b);
        }
        if let Some(u) = v.normalized() {
            if v.norm() > 1e-8 {
                basis.push(u);
            }
        }
    }
    basis
}

/// A finite sample of a set, with a spatial index when it is large.
#[derive(Clone, Debug)]
pub struct PointSet<const D: usize> {
    points: Vec<Point<D>>,
    index: Option<KdTree<D>>,
}

impl<const D: usize> PointSet<D> {
    pub fn new(points: Vec<Point<D>>) -> Self {
        let index = (points.len() >= INDEX_THRESHOLD).then(|| KdTree::build(&points));
        PointSet { points, index }
    }

    pub fn points(&self) -> &[Point<D>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_indexed(&self) -> bool {
        self.index.is_some()
    }

    /// Index and distance of the nearest point.
    pub fn nearest(&self, q: &Point<D>) -> Option<(usize, f64)> {
        match &self.index {
            Some(tree) => tree.nearest(q).map(|(i, d2)| (i, sqrt(d2))),
            None => self
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.dist2(q)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(i, d2)| (i, sqrt(d2))),
        }
    }

    /// Visits `(index, squared distance)` for every point in the closed ball.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &Point<D>, radius: f64, mut f: F) {
        match &self.index {
            Some(tree) => tree.for_each_within(q, radius, f),
            None => {
                let r2 = radius * radius;
                for (i, p) in self.points.iter().enumerate() {
                    let d = p.dist2(q);
                    if d <= r2 {
                        f(i, d);
                    }
                }
            }
        }
    }

    /// Indices of the points in the closed ball, ascending.
    pub fn indices_within(&self, q: &Point<D>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }
}

/// `sup_{a in A} d(a, B)`.
pub fn one_sided_deviation<const D: usize>(a: &PointSet<D>, b: &PointSet<D>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let dists = par::map_indexed(a.len(), |i| b.nearest(&a.points[i]).map_or(0.0, |(_, d)| d));
    Ok(dists.into_iter().fold(0.0, f64::max))
}

/// `D[A, B] = sup_{a∈A} d(a, B) + sup_{b∈B} d(b, A)`.
pub fn hausdorff_distance<const D: usize>(a: &PointSet<D>, b: &PointSet<D>) -> Result<f64> {
    Ok(one_sided_deviation(a, b)? + one_sided_deviation(b, a)?)
}

pub fn clip_to_ball<const D: usize>(s: &PointSet<D>, center: &Point<D>, radius: f64) -> PointSet<D> {
    let idx = s.indices_within(center, radius);
    PointSet::new(idx.into_iter().map(|i| s.points[i]).collect())
}

/// Square lattice of spacing `resolution` on `plane`, centered at `center`,
/// restricted to the closed ball `B(center, radius)`.
pub fn plane_sample<const D: usize>(
    plane: &Hyperplane<D>,
    center: &Point<D>,
    radius: f64,
    resolution: f64,
) -> Result<PointSet<D>> {
    Ok(PointSet::new(plane_lattice(plane, center, radius, resolution)?))
}

fn plane_lattice<const D: usize>(
    plane: &Hyperplane<D>,
    center: &Point<D>,
    radius: f64,
    resolution: f64,
) -> Result<Vec<Point<D>>> {
    if !(resolution > 0.0) || !(radius > 0.0) {
        return Err(Error::invalid(
            "plane sampling needs positive radius and resolution",
        ));
    }
    let off = plane.signed_distance(center).abs();
    if off > 1e-9 * (1.0 + radius + center.norm()) {
        return Err(Error::invalid("sampling center is not on the plane"));
    }
    let basis = plane.basis();
    let m = floor(radius / resolution) as i64;
    let dims = basis.len();
    let mut k = alloc::vec![-m; dims];
    let mut out = Vec::new();
    let r2 = radius * radius;
    loop {
        let mut len2 = 0.0;
        for &ki in &k {
            let x = ki as f64 * resolution;
            len2 += x * x;
        }
        if len2 <= r2 * (1.0 + 1e-12) {
            let mut p = *center;
            for (b, &ki) in basis.iter().zip(&k) {
                p += *b * (ki as f64 * resolution);
            }
            out.push(p);
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == dims {
                return Ok(out);
            }
            k[pos] += 1;
            if k[pos] > m {
                k[pos] = -m;
                pos += 1;
            } else {
                break;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PlaneFit<const D: usize> {
    pub plane: Hyperplane<D>,
    /// The least-variance direction is not unique (rank-deficient cloud).
    pub degenerate: bool,
    /// Largest distance from a cloud point to the fitted plane.
    pub residual: f64,
}

/// Plane through `through` whose normal is the least-variance direction of
/// the centered cloud.
pub fn fit_plane<const D: usize>(cloud: &[Point<D>], through: &Point<D>) -> Result<PlaneFit<D>> {
    if cloud.len() < D {
        return Err(Error::invalid("plane fit needs at least n + 1 points"));
    }
    let inv = 1.0 / cloud.len() as f64;
    let mut centroid = Point::<D>::zero();
    for p in cloud {
        centroid += *p;
    }
    centroid = centroid * inv;
    let mut cov = [[0.0; D]; D];
    for p in cloud {
        let d = *p - centroid;
        for i in 0..D {
            for j in 0..D {
                cov[i][j] += d[i] * d[j] * inv;
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(cov);
    let top = vals[D - 1].abs().max(f64::MIN_POSITIVE);
    let degenerate = D > 1 && vals[1].abs() <= 1e-12 * top;
    let plane = Hyperplane::new(*through, Point(vecs[0]))?;
    let residual = cloud
        .iter()
        .map(|p| plane.signed_distance(p).abs())
        .fold(0.0, f64::max);
    Ok(PlaneFit {
        plane,
        degenerate,
        residual,
    })
}

/// Settings for the search over planes in the flatness infimum.
#[derive(Clone, Debug)]
pub struct PlaneSearchConfig {
    /// Lattice spacing of the final plane sample (absolute length). Also the
    /// discretization slack of θ, reported as `resolution / r`.
    pub resolution: f64,
    /// Uniform design size for the multi-start (the PCA normal is added).
    pub design_directions: usize,
    /// Number of best starts that are refined by local descent.
    pub refine_starts: usize,
    /// Stop when an accepted move improves θ by less than this.
    pub improvement_tol: f64,
    /// Lattice divisions per radius used while searching.
    pub search_divisions: usize,
    /// Cap on final lattice size; the resolution is coarsened above it.
    pub max_plane_points: usize,
}

impl PlaneSearchConfig {
    pub fn with_resolution(resolution: f64) -> Self {
        PlaneSearchConfig {
            resolution,
            design_directions: 32,
            refine_starts: 4,
            improvement_tol: 1e-4,
            search_divisions: 20,
            max_plane_points: 120_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ThetaEstimate<const D: usize> {
    pub theta: f64,
    pub plane: Hyperplane<D>,
    /// Discretization slack `resolution / r`.
    pub slack: f64,
    pub clip_count: usize,
    pub reliable: bool,
}

/// Flatness `θ(q, r)` of a sampled boundary.
pub fn theta_flatness<const D: usize>(
    boundary: &PointSet<D>,
    q: &Point<D>,
    r: f64,
    opt: &PlaneSearchConfig,
) -> Result<ThetaEstimate<D>> {
    if !(r > 0.0) {
        return Err(Error::invalid("flatness radius must be positive"));
    }
    let (_, d0) = boundary.nearest(q).ok_or(Error::EmptySet)?;
    if d0 > r * 1e-6 {
        return Err(Error::invalid("flatness center is not a boundary sample"));
    }
    let clip = clip_to_ball(boundary, q, r);
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    let reliable = clip.len() >= MIN_RELIABLE_CLIP;

    let pca = if clip.len() >= D {
        fit_plane(clip.points(), q).ok().map(|f| f.plane.normal)
    } else {
        None
    };
    let pca = pca.unwrap_or_else(|| Point::axis(D - 1));

    let coarse_res = r / opt.search_divisions.max(2) as f64;
    let objective = |normal: &Point<D>| surrogate_theta(&clip, q, r, normal, coarse_res);

    let mut starts: Vec<(Point<D>, f64)> = Vec::with_capacity(opt.design_directions + 1);
    starts.push((pca, objective(&pca)));
    for dir in design_directions::<D>(opt.design_directions) {
        starts.push((dir, objective(&dir)));
    }
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| starts[a].1.total_cmp(&starts[b].1).then(a.cmp(&b)));

    let mut best = starts[0];
    for &k in order.iter().take(opt.refine_starts.max(1)) {
        let refined = local_descent(starts[k], &objective, opt.improvement_tol);
        if refined.1 < best.1 {
            best = refined;
        }
    }

    let mut res = opt.resolution.max(r * 1e-6);
    let n = D as i32 - 1;
    // lattice size ≈ (2r/res)^n
    while crate::math::powi(2.0 * r / res, n) > opt.max_plane_points as f64 {
        res *= 1.25;
    }
    let exact = |normal: &Point<D>| -> Result<f64> {
        let plane = Hyperplane::new(*q, *normal)?;
        let lattice = plane_sample(&plane, q, r, res)?;
        Ok(hausdorff_distance(&clip, &lattice)? / r)
    };
    let theta_best = exact(&best.0)?;
    let theta_pca = exact(&pca)?;
    let (theta, normal) = if theta_pca <= theta_best {
        (theta_pca, pca)
    } else {
        (theta_best, best.0)
    };
    Ok(ThetaEstimate {
        theta,
        plane: Hyperplane::new(*q, normal)?,
        slack: res / r,
        clip_count: clip.len(),
        reliable,
    })
}

/// Fast stand-in for θ used while searching: exact distance from each clip
/// point to the flat disk, plus lattice-to-clip nearest distances.
fn surrogate_theta<const D: usize>(
    clip: &PointSet<D>,
    q: &Point<D>,
    r: f64,
    normal: &Point<D>,
    coarse_res: f64,
) -> f64 {
    let mut to_disk: f64 = 0.0;
    for p in clip.points() {
        let d = *p - *q;
        let h = d.dot(normal);
        let lateral = sqrt((d.norm2() - h * h).max(0.0));
        let over = (lateral - r).max(0.0);
        to_disk = to_disk.max(sqrt(h * h + over * over));
    }
    let plane = Hyperplane {
        base: *q,
        normal: *normal,
    };
    let mut to_clip: f64 = 0.0;
    if let Ok(lattice) = plane_lattice(&plane, q, r, coarse_res) {
        for z in &lattice {
            if let Some((_, d)) = clip.nearest(z) {
                to_clip = to_clip.max(d);
            }
        }
    }
    (to_disk + to_clip) / r
}

fn local_descent<const D: usize, F: Fn(&Point<D>) -> f64>(
    start: (Point<D>, f64),
    objective: &F,
    tol: f64,
) -> (Point<D>, f64) {
    let (mut normal, mut value) = start;
    let mut step = 0.2;
    for _ in 0..80 {
        if step < 1e-3 {
            break;
        }
        let basis = complement_basis(&normal);
        let mut best: Option<(Point<D>, f64)> = None;
        for t in &basis {
            for sign in [1.0, -1.0] {
                let cand = (normal + *t * (sign * step)).normalized().unwrap_or(normal);
                let v = objective(&cand);
                if v < best.map_or(f64::INFINITY, |b| b.1) {
                    best = Some((cand, v));
                }
            }
        }
        match best {
            Some((cand, v)) if v < value => {
                let gain = value - v;
                normal = cand;
                value = v;
                if gain < tol {
                    break;
                }
            }
            _ => step *= 0.5,
        }
    }
    (normal, value)
}

/// Quasi-uniform unit vectors on the upper half sphere (`x_{D-1} >= 0`).
/// Planes are unoriented, so half the sphere covers every plane once.
pub fn design_directions<const D: usize>(count: usize) -> Vec<Point<D>> {
    if D == 3 {
        return crate::sphere::fibonacci_directions(2 * count)
            .into_iter()
            .filter(|u| u[2] >= 0.0)
            .take(count)
            .map(|u| {
                let mut p = Point::<D>::zero();
                for i in 0..3 {
                    p[i] = u[i];
                }
                p
            })
            .collect();
    }
    // R_D low-discrepancy sequence in the cube, kept inside the unit ball.
    let mut phi = 2.0;
    for _ in 0..64 {
        phi = crate::math::pow(1.0 + phi, 1.0 / (D as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=D).map(|k| 1.0 / crate::math::pow(phi, k as f64)).collect();
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count && i < 1_000_000 {
        i += 1;
        let mut p = Point::<D>::zero();
        for k in 0..D {
            let x = 0.5 + alpha[k] * i as f64;
            p[k] = 2.0 * (x - floor(x)) - 1.0;
        }
        let n2 = p.norm2();
        if !(1e-4..=1.0).contains(&n2) {
            continue;
        }
        let mut u = p * (1.0 / sqrt(n2));
        if u[D - 1] < 0.0 {
            u = -u;
        }
        out.push(u);
    }
    out
}

#[derive(Clone, Debug)]
pub struct FlatnessEntry<const D: usize> {
    pub center_index: usize,
    pub center: Point<D>,
    pub radius: f64,
    pub theta: f64,
    pub slack: f64,
    pub plane: Hyperplane<D>,
    pub reliable: bool,
    /// Set when θ could not be computed for this pair.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct FlatnessProfile<const D: usize> {
    pub entries: Vec<FlatnessEntry<D>>,
}

impl<const D: usize> FlatnessProfile<D> {
    /// Largest reliable θ and the slack attached to it.
    pub fn sup_reliable(&self) -> Option<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.reliable && e.skipped.is_none())
            .map(|e| (e.theta, e.slack))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// θ at every `(center, radius)` pair, ordered by center then radius.
pub fn flatness_profile<const D: usize>(
    boundary: &PointSet<D>,
    centers: &[Point<D>],
    radii: &[f64],
    opt: &PlaneSearchConfig,
) -> FlatnessProfile<D> {
    let pairs = centers.len() * radii.len();
    let entries = par::map_indexed(pairs, |k| {
        let ci = k / radii.len();
        let radius = radii[k % radii.len()];
        let center = centers[ci];
        match theta_flatness(boundary, &center, radius, opt) {
            Ok(t) => FlatnessEntry {
                center_index: ci,
                center,
                radius,
                theta: t.theta,
                slack: t.slack,
                plane: t.plane,
                reliable: t.reliable,
                skipped: None,
            },
            Err(e) => FlatnessEntry {
                center_index: ci,
                center,
                radius,
                theta: f64::NAN,
                slack: f64::NAN,
                plane: Hyperplane {
                    base: center,
                    normal: Point::axis(D - 1),
                },
                reliable: false,
                skipped: Some(alloc::format!("{e}")),
            },
        }
    });
    FlatnessProfile { entries }
}
