//! Real spherical-harmonic mode sums on `S^2`.
//!
//! A mode `(l, m)` is evaluated through its Cartesian form
//! `Q_l^{|m|}(z) · Re/Im (x + i y)^{|m|}`, which is smooth on the whole
//! sphere (no pole singularities) and gives analytic surface gradients.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::P3;

pub const MAX_DEGREE: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    pub degree: u32,
    pub order: i32,
    pub coeff: f64,
}

/// `f(u) = scale · Σ coeff · Y_{l,m}(u)`, with `scale` chosen so that
/// `sup |f| = 1` (unless every coefficient vanishes).
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSum {
    terms: Vec<ModeTerm>,
    scale: f64,
}

impl ModeSum {
    pub fn new(terms: Vec<ModeTerm>) -> Result<Self> {
        for t in &terms {
            if t.order.unsigned_abs() > t.degree {
                return Err(Error::invalid("mode order must satisfy |order| <= degree"));
            }
            if t.degree > MAX_DEGREE {
                return Err(Error::invalid("mode degree above 24 is not supported"));
            }
            if !t.coeff.is_finite() {
                return Err(Error::invalid("mode coefficient must be finite"));
            }
        }
        let mut sum = ModeSum { terms, scale: 1.0 };
        let sup = super::sphere_sup(|u| sum.raw(u).0.abs());
        sum.scale = if sup > 1e-300 { 1.0 / sup } else { 0.0 };
        Ok(sum)
    }

    pub fn terms(&self) -> &[ModeTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    #[inline]
    pub fn value(&self, u: &P3) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.raw(u).0
    }

    /// Tangential gradient `∇_S f` at the unit vector `u`.
    #[inline]
    pub fn surface_gradient(&self, u: &P3) -> P3 {
        if self.scale == 0.0 {
            return P3::zero();
        }
        let (_, g) = self.raw(u);
        (g - *u * g.dot(u)) * self.scale
    }

    pub fn value_and_gradient(&self, u: &P3) -> (f64, P3) {
        if self.scale == 0.0 {
            return (0.0, P3::zero());
        }
        let (v, g) = self.raw(u);
        (v * self.scale, (g - *u * g.dot(u)) * self.scale)
    }

    /// Unscaled value and the ambient gradient of the polynomial extension.
    fn raw(&self, u: &P3) -> (f64, P3) {
        let mut value = 0.0;
        let mut grad = P3::zero();
        for t in &self.terms {
            let (v, g) = mode(t.degree, t.order, u);
            value += t.coeff * v;
            grad += g * t.coeff;
        }
        (value, grad)
    }
}

/// Cartesian real harmonic and the gradient of its polynomial extension.
fn mode(l: u32, m: i32, u: &P3) -> (f64, P3) {
    let [x, y, z] = u.0;
    let am = m.unsigned_abs();
    let (q, dq) = legendre_q(l, am, z);

    // c = (x + i y)^am, w = (x + i y)^(am - 1)
    let (mut wr, mut wi) = (1.0, 0.0);
    for _ in 1..am {
        let nr = wr * x - wi * y;
        wi = wr * y + wi * x;
        wr = nr;
    }
    let (cr, ci) = if am == 0 {
        (1.0, 0.0)
    } else {
        (wr * x - wi * y, wr * y + wi * x)
    };
    let mf = am as f64;
    let (a, ax, ay) = if m >= 0 {
        if am == 0 {
            (1.0, 0.0, 0.0)
        } else {
            (cr, mf * wr, -mf * wi)
        }
    } else {
        (ci, mf * wi, mf * wr)
    };
    (q * a, P3::new([q * ax, q * ay, dq * a]))
}

/// `Q_l^m(z)` with `P_l^m(z) = (1 - z²)^{m/2} Q_l^m(z)`, and `dQ/dz`.
fn legendre_q(l: u32, m: u32, z: f64) -> (f64, f64) {
    let mut qmm = 1.0;
    for k in 1..=m {
        qmm *= (2 * k - 1) as f64;
    }
    if l == m {
        return (qmm, 0.0);
    }
    let mut q0 = qmm;
    let mut d0 = 0.0;
    let mut q1 = (2 * m + 1) as f64 * z * qmm;
    let mut d1 = (2 * m + 1) as f64 * qmm;
    for ll in (m + 2)..=l {
        let a = (2 * ll - 1) as f64;
        let b = (ll + m - 1) as f64;
        let c = (ll - m) as f64;
        let q2 = (a * z * q1 - b * q0) / c;
        let d2 = (a * (q1 + z * d1) - b * d0) / c;
        q0 = q1;
        d0 = d1;
        q1 = q2;
        d1 = d2;
    }
    (q1, d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{fibonacci_directions, gauss_grid};

    fn term(l: u32, m: i32) -> ModeTerm {
        ModeTerm {
            degree: l,
            order: m,
            coeff: 1.0,
        }
    }

    #[test]
    fn low_modes_match_closed_forms() {
        for u in fibonacci_directions(50) {
            let [x, y, z] = u.0;
            assert!((mode(1, 0, &u).0 - z).abs() < 1e-14);
            assert!((mode(1, 1, &u).0 - x).abs() < 1e-14);
            assert!((mode(1, -1, &u).0 - y).abs() < 1e-14);
            assert!((mode(2, 0, &u).0 - (3.0 * z * z - 1.0) / 2.0).abs() < 1e-14);
            assert!((mode(2, 2, &u).0 - 3.0 * (x * x - y * y)).abs() < 1e-14);
            assert!((mode(2, -2, &u).0 - 6.0 * x * y).abs() < 1e-14);
        }
    }

    #[test]
    fn modes_are_orthogonal_on_the_sphere() {
        let grid = gauss_grid(20, 40);
        let pairs = [
            ((2, 0), (2, 2)),
            ((3, 1), (1, 1)),
            ((4, -3), (4, 3)),
            ((2, 1), (3, 1)),
        ];
        for ((l1, m1), (l2, m2)) in pairs {
            let s: f64 = grid
                .iter()
                .map(|(u, w)| w * mode(l1, m1, u).0 * mode(l2, m2, u).0)
                .sum();
            assert!(s.abs() < 1e-10, "({l1},{m1}) vs ({l2},{m2}): {s}");
        }
    }

    #[test]
    fn surface_gradient_matches_central_differences() {
        let sum = ModeSum::new(alloc::vec![
            term(3, 2),
            term(2, -1),
            ModeTerm {
                degree: 4,
                order: 0,
                coeff: 0.5
            }
        ])
        .unwrap();
        for u in fibonacci_directions(40) {
            let g = sum.surface_gradient(&u);
            assert!(g.dot(&u).abs() < 1e-12);
            let (t1, t2) = u.tangent_frame();
            let h = 1e-5;
            for t in [t1, t2] {
                let plus = (u + t * h).normalized().unwrap();
                let minus = (u - t * h).normalized().unwrap();
                let fd = (sum.value(&plus) - sum.value(&minus)) / (2.0 * h);
                assert!((fd - g.dot(&t)).abs() < 1e-6, "{fd} vs {}", g.dot(&t));
            }
        }
    }

    #[test]
    fn normalization_gives_unit_sup() {
        let sum = ModeSum::new(alloc::vec![term(2, 2)]).unwrap();
        let sup = fibonacci_directions(20000)
            .iter()
            .map(|u| sum.value(u).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1.0 + 1e-9 && sup > 0.999);
    }

    #[test]
    fn rejects_bad_terms() {
        assert!(ModeSum::new(alloc::vec![term(1, 2)]).is_err());
        assert!(ModeSum::new(alloc::vec![ModeTerm {
            degree: 2,
            order: 0,
            coeff: f64::NAN
        }])
        .is_err());
    }
}
