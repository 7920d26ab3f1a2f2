use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::math::sqrt;

/// A point (or vector) of the ambient space `R^D`, `D = n + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<const D: usize>(pub [f64; D]);

pub type P3 = Point<3>;

impl<const D: usize> Point<D> {
    #[inline]
    pub const fn new(coords: [f64; D]) -> Self {
        Point(coords)
    }

    #[inline]
    pub const fn zero() -> Self {
        Point([0.0; D])
    }

    /// Unit vector along coordinate axis `axis`.
    pub fn axis(axis: usize) -> Self {
        let mut c = [0.0; D];
        c[axis] = 1.0;
        Point(c)
    }

    #[inline]
    pub fn coords(&self) -> &[f64; D] {
        &self.0
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            s += self.0[i] * other.0[i];
        }
        s
    }

    #[inline]
    pub fn norm2(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        sqrt(self.norm2())
    }

    #[inline]
    pub fn dist2(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            let d = self.0[i] - other.0[i];
            s += d * d;
        }
        s
    }

    #[inline]
    pub fn dist(&self, other: &Self) -> f64 {
        sqrt(self.dist2(other))
    }

    /// `self / |self|`; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(*self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl P3 {
    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Point([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    /// Two unit vectors completing `self` (assumed unit) to a right-handed
    /// orthonormal frame.
    pub fn tangent_frame(&self) -> (P3, P3) {
        let helper = if self.0[0].abs() < 0.6 {
            P3::axis(0)
        } else if self.0[1].abs() < 0.6 {
            P3::axis(1)
        } else {
            P3::axis(2)
        };
        let t1 = helper - *self * helper.dot(self);
        let t1 = t1 * (1.0 / t1.norm());
        let t2 = self.cross(&t1);
        (t1, t2)
    }
}

impl<const D: usize> Default for Point<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> Index<usize> for Point<D> {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const D: usize> IndexMut<usize> for Point<D> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const D: usize> Add for Point<D> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for i in 0..D {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const D: usize> AddAssign for Point<D> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        for i in 0..D {
            self.0[i] += o.0[i];
        }
    }
}

impl<const D: usize> Sub for Point<D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for i in 0..D {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const D: usize> SubAssign for Point<D> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        for i in 0..D {
            self.0[i] -= o.0[i];
        }
    }
}

impl<const D: usize> Mul<f64> for Point<D> {
    type Output = Self;
    #[inline]
    fn mul(mut self, s: f64) -> Self {
        for c in self.0.iter_mut() {
            *c *= s;
        }
        self
    }
}

impl<const D: usize> Neg for Point<D> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const D: usize> serde::Serialize for Point<D> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeTuple;
        let mut t = s.serialize_tuple(D)?;
        for c in &self.0 {
            t.serialize_element(c)?;
        }
        t.end()
    }
}

impl<'de, const D: usize> serde::Deserialize<'de> for Point<D> {
    fn deserialize<De: serde::Deserializer<'de>>(d: De) -> Result<Self, De::Error> {
        struct V<const D: usize>;
        impl<'de, const D: usize> serde::de::Visitor<'de> for V<D> {
            type Value = Point<D>;
            fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
                write!(f, "an array of {D} numbers")
            }
            fn visit_seq<A: serde::de::SeqAccess<'de>>(self, mut seq: A) -> Result<Point<D>, A::Error> {
                let mut p = Point::<D>::zero();
                for i in 0..D {
                    p.0[i] = seq
                        .next_element()?
                        .ok_or_else(|| serde::de::Error::invalid_length(i, &self))?;
                }
                if seq.next_element::<f64>()?.is_some() {
                    return Err(serde::de::Error::invalid_length(D + 1, &self));
                }
                Ok(p)
            }
        }
        d.deserialize_tuple(D, V::<D>)
    }
}
