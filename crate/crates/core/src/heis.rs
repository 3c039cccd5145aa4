//! The Heisenberg group ℍ = ℂ × ℝ with law
//! `(z, t)·(z', t') = (z + z', t + t' + 2 Im(z z̄'))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Mul;

/// A point `(z, t)` of the Heisenberg group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub z: Complex64,
    pub t: f64,
}

/// Derivative `(dz, dt)` of a curve through some point of ℍ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HTangent {
    pub dz: Complex64,
    pub dt: f64,
}

impl HPoint {
    pub const IDENTITY: HPoint = HPoint { z: Complex64::new(0.0, 0.0), t: 0.0 };

    pub fn new(z: Complex64, t: f64) -> Self {
        HPoint { z, t }
    }

    pub fn from_parts(x: f64, y: f64, t: f64) -> Self {
        HPoint { z: Complex64::new(x, y), t }
    }

    pub fn is_finite(&self) -> bool {
        self.z.re.is_finite() && self.z.im.is_finite() && self.t.is_finite()
    }

    /// Anisotropic dilation `(z, t) ↦ (r z, r² t)`.
    pub fn dilate(&self, r: f64) -> Self {
        HPoint { z: self.z * r, t: self.t * r * r }
    }
}

impl HTangent {
    pub fn new(dz: Complex64, dt: f64) -> Self {
        HTangent { dz, dt }
    }

    /// The unique legendrian tangent at a point with horizontal coordinate `z`
    /// whose ℂ-component is `dz`.
    pub fn legendrian(z: Complex64, dz: Complex64) -> Self {
        HTangent { dz, dt: -2.0 * (z.conj() * dz).im }
    }
}

pub fn group_mul(p: HPoint, q: HPoint) -> HPoint {
    HPoint {
        z: p.z + q.z,
        t: p.t + q.t + 2.0 * (p.z * q.z.conj()).im,
    }
}

pub fn group_inv(p: HPoint) -> HPoint {
    HPoint { z: -p.z, t: -p.t }
}

impl Mul for HPoint {
    type Output = HPoint;

    fn mul(self, rhs: HPoint) -> HPoint {
        group_mul(self, rhs)
    }
}

/// Korányi gauge `(t² + |z|⁴)^{1/4}`.
pub fn koranyi_norm(p: HPoint) -> f64 {
    let r2 = p.z.norm_sqr();
    (p.t * p.t + r2 * r2).sqrt().sqrt()
}

/// `dt + 2 Im(z̄ dz)`; vanishes exactly when `v` lies in the contact plane at a
/// point whose ℂ-coordinate is `p_z`.
pub fn legendrian_residual(p_z: Complex64, v: HTangent) -> f64 {
    v.dt + 2.0 * (p_z.conj() * v.dz).im
}

/// Scale against which a legendrian residual is judged.
pub(crate) fn legendrian_scale(p_z: Complex64, v: HTangent) -> f64 {
    v.dt.abs() + 2.0 * p_z.norm() * v.dz.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_inverse() {
        let p = HPoint::new(c(1.5, -2.0), 0.25);
        assert_eq!(group_mul(HPoint::IDENTITY, p), p);
        assert_eq!(group_mul(p, group_inv(p)), HPoint::IDENTITY);
        assert_eq!(group_inv(HPoint::IDENTITY), HPoint::IDENTITY);
        assert_eq!(group_inv(HPoint::new(c(1.0, 1.0), 3.0)), HPoint::new(c(-1.0, -1.0), -3.0));
    }

    #[test]
    fn product_of_real_and_imaginary_unit() {
        let p = group_mul(HPoint::new(c(1.0, 0.0), 0.0), HPoint::new(c(0.0, 1.0), 0.0));
        assert_eq!(p, HPoint::new(c(1.0, 1.0), -2.0));
    }

    #[test]
    fn gauge_values() {
        assert_eq!(koranyi_norm(HPoint::IDENTITY), 0.0);
        assert_eq!(koranyi_norm(HPoint::new(c(1.0, 0.0), 0.0)), 1.0);
        assert!((koranyi_norm(HPoint::new(c(0.0, 0.0), -4.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let s = 0.7;
        assert_eq!(legendrian_residual(c(s, 0.0), HTangent::new(c(1.0, 0.0), 0.0)), 0.0);
        let e = Complex64::from_polar(1.0, s);
        let r = legendrian_residual(e, HTangent::new(Complex64::i() * e, 0.0));
        assert!((r - 2.0).abs() < 1e-15);
    }

    fn arb_point() -> impl Strategy<Value = HPoint> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, t)| HPoint::from_parts(x, y, t))
    }

    proptest! {
        #[test]
        fn associativity(p in arb_point(), q in arb_point(), r in arb_point()) {
            let a = (p * q) * r;
            let b = p * (q * r);
            prop_assert!((a.z - b.z).norm() < 1e-12);
            prop_assert!((a.t - b.t).abs() < 1e-11);
        }

        #[test]
        fn left_cancellation(p in arb_point(), q in arb_point()) {
            let r = group_mul(group_inv(p), group_mul(p, q));
            prop_assert!((r.z - q.z).norm() < 1e-12);
            prop_assert!((r.t - q.t).abs() < 1e-11);
        }

        #[test]
        fn gauge_symmetric_and_homogeneous(p in arb_point(), r in 0.01..10.0f64) {
            prop_assert!((koranyi_norm(group_inv(p)) - koranyi_norm(p)).abs() < 1e-14);
            let lhs = koranyi_norm(p.dilate(r));
            prop_assert!((lhs - r * koranyi_norm(p)).abs() <= 1e-12 * (1.0 + lhs));
        }

        #[test]
        fn residual_is_linear(x in -3.0..3.0f64, y in -3.0..3.0f64,
                              a in -3.0..3.0f64, b in -3.0..3.0f64, dt1 in -3.0..3.0f64,
                              c2 in -3.0..3.0f64, d in -3.0..3.0f64, dt2 in -3.0..3.0f64,
                              k in -4.0..4.0f64) {
            let z = c(x, y);
            let v = HTangent::new(c(a, b), dt1);
            let w = HTangent::new(c(c2, d), dt2);
            let sum = HTangent::new(v.dz + w.dz * k, v.dt + k * w.dt);
            let lhs = legendrian_residual(z, sum);
            let rhs = legendrian_residual(z, v) + k * legendrian_residual(z, w);
            prop_assert!((lhs - rhs).abs() < 1e-11);
            prop_assert!(legendrian_residual(z, HTangent::legendrian(z, v.dz)).abs() < 1e-12);
        }
    }
}
