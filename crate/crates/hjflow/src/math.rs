//! Small fixed-size linear algebra for the planar setting.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point, velocity or momentum in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// p-norm for p >= 1; `p = f64::INFINITY` gives the max norm.
    pub fn norm_p(self, p: f64) -> f64 {
        if p.is_infinite() {
            self.x.abs().max(self.y.abs())
        } else if (p - 1.0).abs() < 1e-15 {
            self.x.abs() + self.y.abs()
        } else if (p - 2.0).abs() < 1e-15 {
            self.norm()
        } else {
            (self.x.abs().powf(p) + self.y.abs().powf(p)).powf(1.0 / p)
        }
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            Vec2::new(self.x / n, self.y / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector at angle `theta` from the positive x-axis.
    pub fn unit(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Symmetric 2x2 matrix [[a, b], [b, c]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SymMat2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        SymMat2 { a, b, c }
    }

    pub fn identity() -> Self {
        SymMat2::new(1.0, 0.0, 1.0)
    }

    pub fn diag(a: f64, c: f64) -> Self {
        SymMat2::new(a, 0.0, c)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.b * v.x + self.c * v.y)
    }

    /// <A v, v>
    pub fn quad_form(&self, v: Vec2) -> f64 {
        self.a * v.x * v.x + 2.0 * self.b * v.x * v.y + self.c * v.y * v.y
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.a + self.c;
        let det = self.a * self.c - self.b * self.b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    pub fn is_positive_definite(&self) -> bool {
        let (lo, _) = self.eigenvalues();
        lo > 0.0
    }

    /// A^{-1/2} for positive-definite A, via the eigendecomposition.
    pub fn inv_sqrt(&self) -> SymMat2 {
        let (l1, l2) = self.eigenvalues();
        assert!(l1 > 0.0, "inv_sqrt requires a positive-definite matrix");
        if self.b.abs() < 1e-300 {
            return SymMat2::diag(1.0 / self.a.sqrt(), 1.0 / self.c.sqrt());
        }
        // eigenvector for l1
        let v = Vec2::new(self.b, l1 - self.a).normalized();
        let w = v.perp();
        let (s1, s2) = (1.0 / l1.sqrt(), 1.0 / l2.sqrt());
        SymMat2::new(
            s1 * v.x * v.x + s2 * w.x * w.x,
            s1 * v.x * v.y + s2 * w.x * w.y,
            s1 * v.y * v.y + s2 * w.y * w.y,
        )
    }
}

/// Rotation matrix sending x/|x| to (1, 0); rows are (x_hat, -x_hat^perp ... ) applied as O(x)p.
///
/// For x = (c, s)|x| the action is O(x)p = (c p1 + s p2, -s p1 + c p2).
#[derive(Debug, Clone, Copy)]
pub struct RadialRotation {
    c: f64,
    s: f64,
}

impl RadialRotation {
    /// Rotation at base point `x`; undefined at the origin, where identity is used.
    pub fn at(x: Vec2) -> Self {
        let n = x.norm();
        if n == 0.0 {
            RadialRotation { c: 1.0, s: 0.0 }
        } else {
            RadialRotation {
                c: x.x / n,
                s: x.y / n,
            }
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.c * p.x + self.s * p.y, -self.s * p.x + self.c * p.y)
    }

    pub fn apply_inverse(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.c * p.x - self.s * p.y, self.s * p.x + self.c * p.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inv_sqrt_roundtrip() {
        let m = SymMat2::new(2.0, 0.5, 1.0);
        let s = m.inv_sqrt();
        // s * m * s should be the identity
        let e1 = s.apply(m.apply(s.apply(Vec2::new(1.0, 0.0))));
        let e2 = s.apply(m.apply(s.apply(Vec2::new(0.0, 1.0))));
        assert_relative_eq!(e1.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(e1.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e2.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_rotation_sends_xhat_to_e1() {
        let x = Vec2::new(3.0, 4.0);
        let o = RadialRotation::at(x);
        let r = o.apply(x.normalized());
        assert_relative_eq!(r.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.y, 0.0, epsilon = 1e-12);
        let back = o.apply_inverse(Vec2::new(1.0, 0.0));
        assert_relative_eq!(back.x, 0.6, epsilon = 1e-12);
        assert_relative_eq!(back.y, 0.8, epsilon = 1e-12);
    }
}
