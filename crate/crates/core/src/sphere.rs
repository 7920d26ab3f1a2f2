//! Quadrature and node sets on the unit sphere `S^2`.

use alloc::vec::Vec;

use crate::geometry::P3;
use crate::math::{acos, cos, sin, sqrt, PI};

/// Spiral (Fibonacci) node set: `count` quasi-uniform directions, each
/// carrying the equal weight `4π / count`.
pub fn fibonacci_directions(count: usize) -> Vec<P3> {
    let golden = PI * (3.0 - sqrt(5.0));
    let n = count as f64;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
            let s = sqrt((1.0 - z * z).max(0.0));
            let phi = golden * i as f64;
            P3::new([s * cos(phi), s * sin(phi), z])
        })
        .collect()
}

/// Nodes and weights of `n`-point Gauss–Legendre quadrature on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Tensor-product reference grid: Gauss–Legendre in `cos θ`, uniform
/// trapezoid in `φ`. Exact for spherical polynomials of degree below
/// `min(2·n_theta, n_phi)`.
pub fn gauss_grid(n_theta: usize, n_phi: usize) -> Vec<(P3, f64)> {
    let (zs, ws) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for (z, w) in zs.iter().zip(&ws) {
        let s = sqrt((1.0 - z * z).max(0.0));
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            out.push((P3::new([s * cos(phi), s * sin(phi), *z]), w * dphi));
        }
    }
    out
}

/// The 12 vertices of a regular icosahedron (a spherical 5-design).
pub fn icosahedron() -> [P3; 12] {
    let t = (1.0 + sqrt(5.0)) / 2.0;
    let s = 1.0 / sqrt(1.0 + t * t);
    let a = s;
    let b = t * s;
    [
        P3::new([-a, b, 0.0]),
        P3::new([a, b, 0.0]),
        P3::new([-a, -b, 0.0]),
        P3::new([a, -b, 0.0]),
        P3::new([0.0, -a, b]),
        P3::new([0.0, a, b]),
        P3::new([0.0, -a, -b]),
        P3::new([0.0, a, -b]),
        P3::new([b, 0.0, -a]),
        P3::new([b, 0.0, a]),
        P3::new([-b, 0.0, -a]),
        P3::new([-b, 0.0, a]),
    ]
}

/// Union of `copies` rotated icosahedra: an equal-weight, antipodally
/// symmetric 5-design with `12 · copies` nodes.
pub fn icosahedral_design(copies: usize) -> Vec<P3> {
    let base = icosahedron();
    let mut out = Vec::with_capacity(12 * copies);
    for c in 0..copies {
        // rotation about a fixed generic axis by an irrational fraction of a turn
        let angle = c as f64 * 2.0 * PI * 0.381_966_011_250_105;
        let axis = P3::new([
            0.267_261_241_912_424_4,
            0.534_522_483_824_848_8,
            0.801_783_725_737_273_2,
        ]);
        for v in &base {
            out.push(rotate(v, &axis, angle));
        }
    }
    out
}

/// Rodrigues rotation of `v` about unit `axis`.
pub fn rotate(v: &P3, axis: &P3, angle: f64) -> P3 {
    let (s, c) = (sin(angle), cos(angle));
    *v * c + axis.cross(v) * s + *axis * (axis.dot(v) * (1.0 - c))
}

/// `count` quasi-random points in the closed unit ball of R^3 (the R3
/// low-discrepancy sequence in the cube, rejection to the ball).
pub fn quasi_ball(count: usize) -> Vec<P3> {
    // plastic-number generalization: phi solves x^4 = x + 1
    let mut phi = 2.0;
    for _ in 0..64 {
        phi = crate::math::pow(1.0 + phi, 0.25);
    }
    let alpha = [1.0 / phi, 1.0 / (phi * phi), 1.0 / (phi * phi * phi)];
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count {
        i += 1;
        let mut p = P3::zero();
        for k in 0..3 {
            let x = 0.5 + alpha[k] * i as f64;
            p[k] = 2.0 * (x - crate::math::floor(x)) - 1.0;
        }
        if p.norm2() <= 1.0 {
            out.push(p);
        }
    }
    out
}

/// Geodesic angle between unit vectors.
pub fn angle_between(a: &P3, b: &P3) -> f64 {
    acos(a.dot(b))
}
