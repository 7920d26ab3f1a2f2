//! Bounded star-shaped domains `Ω = { t ω : 0 ≤ t < r(ω) }` in R^3, their
//! boundary samples, and geometric measurements on those samples.

mod analysis;
mod cloud;
mod modes;
mod spec;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use analysis::{
    ahlfors_ratios, bmo_normal_norm, separation_check, separation_scale, AhlforsEntry, BmoResult,
    SeparationOutcome, SeparationVerdict, HOMEOMORPHISM_RATIO_LIMIT,
};
pub use cloud::{sample_boundary, BoundaryCloud};
pub use modes::{ModeSum, ModeTerm, MAX_DEGREE};
pub use spec::{DomainSpec, ShapeKind};

use crate::error::{Error, Result};
use crate::geometry::P3;
use crate::math::sqrt;
use crate::sphere::{fibonacci_directions, gauss_grid};

/// Boundary dimension `n`; the ambient space is R^{n+1} = R^3.
pub const DIM: usize = 2;

pub const AMPLITUDE_CAP: f64 = 0.3;

/// Step (radians) of the central differences used for shapes without an
/// analytic surface gradient.
pub const FD_STEP: f64 = 1e-4;

const RADII_GRID: usize = 40_000;

#[derive(Clone, Debug, PartialEq)]
pub enum RadialShape {
    /// `r(ω) = base (1 + amplitude f(ω))` with `sup |f| = 1`.
    PerturbedBall {
        base_radius: f64,
        amplitude: f64,
        modes: ModeSum,
    },
    /// Sphere `|x - center| = radius` seen from the origin. Used as the
    /// translated-ball fixture (pole off center).
    ShiftedSphere { center: P3, radius: f64 },
    /// Axis-aligned ellipsoid centered at the origin.
    Ellipsoid { semi_axes: [f64; 3] },
}

impl RadialShape {
    fn radius(&self, u: &P3) -> f64 {
        match self {
            RadialShape::PerturbedBall {
                base_radius,
                amplitude,
                modes,
            } => base_radius * (1.0 + amplitude * modes.value(u)),
            RadialShape::ShiftedSphere { center, radius } => {
                let b = u.dot(center);
                b + sqrt((b * b - center.norm2() + radius * radius).max(0.0))
            }
            RadialShape::Ellipsoid { semi_axes } => {
                let s: f64 = (0..3).map(|i| u[i] * u[i] / (semi_axes[i] * semi_axes[i])).sum();
                1.0 / sqrt(s)
            }
        }
    }

    fn radius_and_gradient(&self, u: &P3) -> (f64, P3) {
        match self {
            RadialShape::PerturbedBall {
                base_radius,
                amplitude,
                modes,
            } => {
                let (f, g) = modes.value_and_gradient(u);
                let k = base_radius * amplitude;
                (base_radius * (1.0 + amplitude * f), g * k)
            }
            _ => {
                let (t1, t2) = u.tangent_frame();
                let mut grad = P3::zero();
                for t in [t1, t2] {
                    let c = crate::math::cos(FD_STEP);
                    let s = crate::math::sin(FD_STEP);
                    let plus = *u * c + t * s;
                    let minus = *u * c - t * s;
                    let d = (self.radius(&plus) - self.radius(&minus)) / (2.0 * FD_STEP);
                    grad += t * d;
                }
                (self.radius(u), grad)
            }
        }
    }
}

/// Inradius and circumradius about the origin. `r1_lower` and `r2_upper`
/// widen the optimized extrema by the Lipschitz bound over the search grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiiPair {
    pub r1: f64,
    pub r2: f64,
    pub r1_lower: f64,
    pub r2_upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarDomain {
    shape: RadialShape,
    scale: f64,
    radii: RadiiPair,
    lipschitz: f64,
}

impl StarDomain {
    pub fn ball(radius: f64) -> Result<Self> {
        make_perturbed_ball(radius, Vec::new(), 0.0)
    }

    pub fn shifted_sphere(center: P3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() || !radius.is_finite() {
            return Err(Error::invalid("sphere radius must be positive and finite"));
        }
        if center.norm() >= radius {
            return Err(Error::NotStarShaped);
        }
        Self::from_shape(RadialShape::ShiftedSphere { center, radius })
    }

    pub fn ellipsoid(semi_axes: [f64; 3]) -> Result<Self> {
        if semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("ellipsoid semi-axes must be positive and finite"));
        }
        Self::from_shape(RadialShape::Ellipsoid { semi_axes })
    }

    fn from_shape(shape: RadialShape) -> Result<Self> {
        let mut d = StarDomain {
            shape,
            scale: 1.0,
            radii: RadiiPair {
                r1: 0.0,
                r2: 0.0,
                r1_lower: 0.0,
                r2_upper: 0.0,
            },
            lipschitz: 0.0,
        };
        let grid = fibonacci_directions(RADII_GRID);
        let samples: Vec<(f64, f64)> = crate::par::map_indexed(grid.len(), |i| {
            let (r, g) = d.shape.radius_and_gradient(&grid[i]);
            (r, g.norm())
        });
        let mut grid_min = f64::INFINITY;
        let mut grid_max: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for &(r, g) in &samples {
            if !r.is_finite() || !g.is_finite() {
                return Err(Error::Numerical("radial function is not finite".into()));
            }
            grid_min = grid_min.min(r);
            grid_max = grid_max.max(r);
            lip = lip.max(g);
        }
        if !(grid_min > 0.0) {
            return Err(Error::NotStarShaped);
        }
        let r2 = sphere_sup(|u| d.shape.radius(u)).max(grid_max);
        let r1 = (-sphere_sup(|u| -d.shape.radius(u))).min(grid_min);
        // Any direction lies within the covering angle of a grid node.
        let cover = grid_cover_angle(RADII_GRID);
        d.radii = RadiiPair {
            r1,
            r2,
            r1_lower: r1.min(grid_min - lip * cover).max(0.0),
            r2_upper: r2.max(grid_max + lip * cover),
        };
        d.lipschitz = lip;
        Ok(d)
    }

    pub fn shape(&self) -> &RadialShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    /// Multiplier applied to the shape's radial function.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn radii(&self) -> RadiiPair {
        self.radii
    }

    /// Largest tangential gradient `|∇_S r|` seen on the radii grid.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `r(u)` for a unit vector `u`.
    #[inline]
    pub fn radius(&self, u: &P3) -> f64 {
        self.scale * self.shape.radius(u)
    }

    /// `r(u)` and the tangential gradient `∇_S r(u)`.
    #[inline]
    pub fn radius_and_gradient(&self, u: &P3) -> (f64, P3) {
        let (r, g) = self.shape.radius_and_gradient(u);
        (self.scale * r, g * self.scale)
    }

    /// Boundary point `r(u) u` in direction `u`.
    #[inline]
    pub fn boundary_point(&self, u: &P3) -> P3 {
        *u * self.radius(u)
    }

    /// Exact radial membership test `|x| < r(x / |x|)`.
    pub fn is_inside(&self, x: &P3) -> bool {
        let t = x.norm();
        if t == 0.0 {
            return true;
        }
        t < self.radius(&(*x * (1.0 / t)))
    }

    /// Signed radial gap `r(x/|x|) - |x|` (positive inside).
    pub fn radial_gap(&self, x: &P3) -> f64 {
        let t = x.norm();
        if t == 0.0 {
            return self.radii.r1;
        }
        self.radius(&(*x * (1.0 / t))) - t
    }

    /// The same shape scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> StarDomain {
        let mut d = self.clone();
        d.scale *= factor;
        d.radii = RadiiPair {
            r1: self.radii.r1 * factor,
            r2: self.radii.r2 * factor,
            r1_lower: self.radii.r1_lower * factor,
            r2_upper: self.radii.r2_upper * factor,
        };
        d.lipschitz *= factor;
        d
    }

    /// Total boundary area by tensor Gauss quadrature of the radial-graph
    /// area element `r sqrt(r² + |∇_S r|²)`.
    pub fn surface_measure(&self) -> f64 {
        self.surface_measure_with(64, 128)
    }

    pub fn surface_measure_with(&self, n_theta: usize, n_phi: usize) -> f64 {
        let grid = gauss_grid(n_theta, n_phi);
        let parts = crate::par::map_indexed(grid.len(), |i| {
            let (u, w) = &grid[i];
            let (r, g) = self.radius_and_gradient(u);
            w * r * sqrt(r * r + g.norm2())
        });
        parts.iter().sum()
    }

    /// Rescaled copy with total boundary measure 1.
    pub fn normalize_to_unit_boundary_measure(&self) -> StarDomain {
        let area = self.surface_measure();
        // area scales with the square of the length scale (n = 2)
        self.scaled(1.0 / sqrt(area))
    }

    pub fn check_homeomorphism_regime(&self) -> Result<()> {
        if self.radii.r2 / self.radii.r1 < HOMEOMORPHISM_RATIO_LIMIT {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!(
                "R2/R1 = {:.5} is not below 1 + 1/64; the ball homeomorphism is not defined",
                self.radii.r2 / self.radii.r1
            )))
        }
    }

    /// `Φ(x) = g(|x|) x/|x|`: the identity on `B(0, R1/4)`, then the
    /// quadratic blend that sends the boundary point `Q_x` to radius `R1`.
    pub fn ball_homeomorphism(&self, x: &P3) -> Result<P3> {
        self.check_homeomorphism_regime()?;
        let r1 = self.radii.r1;
        let c = r1 / 4.0;
        let t = x.norm();
        if t <= c {
            return Ok(*x);
        }
        let u = *x * (1.0 / t);
        let q = self.radius(&u);
        if t > q * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain);
        }
        let t = t.min(q);
        let a = (r1 - q) / ((q - c) * (q - c));
        let g = if t == q { r1 } else { a * (t - c) * (t - c) + t };
        Ok(u * g)
    }

    /// Inverse of [`Self::ball_homeomorphism`] on the closed ball `B(0, R1)`.
    pub fn inverse_ball_homeomorphism(&self, y: &P3) -> Result<P3> {
        self.check_homeomorphism_regime()?;
        let r1 = self.radii.r1;
        let c = r1 / 4.0;
        let s = y.norm();
        if s <= c {
            return Ok(*y);
        }
        if s > r1 * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain);
        }
        let u = *y * (1.0 / s);
        let q = self.radius(&u);
        let a = (r1 - q) / ((q - c) * (q - c));
        let e = s.min(r1) - c;
        // root of a v² + v - e = 0 that is continuous at a = 0
        let v = 2.0 * e / (1.0 + sqrt((1.0 + 4.0 * a * e).max(0.0)));
        Ok(u * (c + v))
    }
}

/// `make_perturbed_ball(R, modes, η)`: `r(ω) = R (1 + η f(ω))` where `f` is
/// the mode combination normalized to `sup |f| = 1`.
pub fn make_perturbed_ball(base_radius: f64, modes: Vec<ModeTerm>, amplitude: f64) -> Result<StarDomain> {
    if !(0.0..AMPLITUDE_CAP).contains(&amplitude) {
        return Err(Error::AmplitudeCap(amplitude));
    }
    if !(base_radius > 0.0) || !base_radius.is_finite() {
        return Err(Error::invalid("base radius must be positive and finite"));
    }
    let modes = ModeSum::new(modes)?;
    StarDomain::from_shape(RadialShape::PerturbedBall {
        base_radius,
        amplitude,
        modes,
    })
}

/// Covering angle of the spiral node set: every direction is within this
/// geodesic distance of some node.
pub(crate) fn grid_cover_angle(count: usize) -> f64 {
    4.0 / sqrt(count as f64)
}

/// Supremum of `f` on the unit sphere: a dense spiral grid followed by
/// pattern-search refinement of the best candidates.
pub(crate) fn sphere_sup<F: Fn(&P3) -> f64 + Sync>(f: F) -> f64 {
    const GRID: usize = 20_000;
    const STARTS: usize = 8;
    let grid = fibonacci_directions(GRID);
    let values = crate::par::map_indexed(GRID, |i| f(&grid[i]));
    let mut order: Vec<usize> = (0..GRID).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut best = values[order[0]];
    for &k in order.iter().take(STARTS) {
        let mut u = grid[k];
        let mut v = values[k];
        let mut step = 0.5 * grid_cover_angle(GRID);
        while step > 1e-9 {
            let (t1, t2) = u.tangent_frame();
            let mut moved = false;
            for t in [t1, -t1, t2, -t2] {
                let cand = (u + t * step).normalized().unwrap_or(u);
                let fv = f(&cand);
                if fv > v {
                    u = cand;
                    v = fv;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}
