//! Closed-form potentials of balls, used as oracles.

use super::DimensionConstants;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::math::powi;

fn check_dim<const D: usize>(c: &DimensionConstants) -> Result<()> {
    if c.n + 1 != D {
        return Err(Error::invalid("point dimension does not match the constants"));
    }
    Ok(())
}

/// `F(x) = |x|^{1-n} / ((n-1) σ_n)`.
pub fn fundamental_solution<const D: usize>(x: &Point<D>, c: &DimensionConstants) -> Result<f64> {
    check_dim::<D>(c)?;
    let t = x.norm();
    if t == 0.0 {
        return Err(Error::invalid("fundamental solution is singular at the pole"));
    }
    Ok(fundamental_radial(t, c))
}

#[inline]
pub(crate) fn fundamental_radial(t: f64, c: &DimensionConstants) -> f64 {
    powi(t, 1 - c.n as i32) / ((c.n - 1) as f64 * c.sigma_n)
}

/// Green function of `B(0, R)` with pole at the center. Infinite at `x = 0`.
pub fn ball_green<const D: usize>(x: &Point<D>, radius: f64, c: &DimensionConstants) -> Result<f64> {
    check_dim::<D>(c)?;
    let t = x.norm();
    if t > radius * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain);
    }
    if t == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((fundamental_radial(t, c) - fundamental_radial(radius, c)) * 1.0).max(0.0))
}

/// `|∇G_1(x)| = 1 / (σ_n |x|^n)`.
pub fn ball_green_gradient_magnitude<const D: usize>(
    x: &Point<D>,
    radius: f64,
    c: &DimensionConstants,
) -> Result<f64> {
    check_dim::<D>(c)?;
    let t = x.norm();
    if t > radius * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain);
    }
    if t == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (c.sigma_n * powi(t, c.n as i32)))
}

/// `∇G_1(x) = -x / (σ_n |x|^{n+1})` (independent of the radius).
pub fn ball_green_gradient<const D: usize>(x: &Point<D>, c: &DimensionConstants) -> Point<D> {
    let t = x.norm();
    *x * (-1.0 / (c.sigma_n * powi(t, c.n as i32 + 1)))
}

/// Poisson kernel of `B(0, R)` at boundary point `q` for an interior pole:
/// `(R² - |pole|²) / (σ_n R |pole - q|^{n+1})`.
pub fn ball_poisson_kernel<const D: usize>(
    q: &Point<D>,
    pole: &Point<D>,
    radius: f64,
    c: &DimensionConstants,
) -> Result<f64> {
    check_dim::<D>(c)?;
    if (q.norm() - radius).abs() > 1e-9 * radius.max(1.0) {
        return Err(Error::invalid("kernel point is not on the sphere"));
    }
    let p2 = pole.norm2();
    if p2 >= radius * radius {
        return Err(Error::OutsideDomain);
    }
    Ok((radius * radius - p2) / (c.sigma_n * radius * powi(pole.dist(q), c.n as i32 + 1)))
}
