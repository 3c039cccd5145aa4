//! The differentials and foliations used throughout the examples and tests.

use crate::expr::{parse, Expr};
use crate::foliation::{Foliation, Guard};
use crate::heis::HPoint;
use crate::qdiff::QuadDiff;
use rand::Rng;
use std::f64::consts::PI;

/// `½∫₀^π sin^{-2/3}(s) ds = ½√π Γ(1/6)/Γ(2/3)`, the q₀-length of every
/// horizontal arc of the annulus.
pub const C: f64 = 3.642_975_971_831_372_4;

pub const Q0: &str = "zb^2*(t^2 + (z*zb)^2)^(2/3)/((z*zb)^(4/3)*(t + i*z*zb)^2)";
pub const TRIPLE_KERNEL: &str = "(t - i*z*zb)^2/(t + i*z*zb)^4";

/// `q₀ = z̄²(t²+|z|⁴)^{2/3} / (|z|^{8/3}(t+i|z|²)²)`, defined off the axis.
pub fn q0() -> QuadDiff {
    QuadDiff::parse(Q0).expect("valid")
}

/// `(t−i|z|²)²/(t+i|z|²)⁴`, annihilated by B₂, D′₂ and D″₂.
pub fn triple_kernel() -> QuadDiff {
    QuadDiff::parse(TRIPLE_KERNEL).expect("valid")
}

pub fn axis_guard() -> Guard {
    Guard::new(parse("z*zb").expect("valid")).expect("heisenberg")
}

/// Horizontal arcs of q₀ filling `{1 < ‖p‖ < r}`:
/// `(s, x, θ) ↦ (√(eˣ sin s) e^{i(θ + s/2)}, eˣ cos s)` on `(0,π)×(0,2 ln r)×(0,2π)`.
pub fn annulus_horizontal(r: f64) -> Foliation {
    Foliation::parse(
        "sqrt(exp(p1)*sin(s))*exp(i*(p2 + s/2))",
        "exp(p1)*cos(s)",
        (0.0, PI),
        [(0.0, 2.0 * r.ln()), (0.0, 2.0 * PI)],
    )
    .expect("valid")
    .with_exclusion(axis_guard())
}

/// Vertical radii of q₀ (horizontal for −q₀):
/// `(s, y, θ) ↦ (√(eˢ sin y) e^{i(θ − s cot(y)/2)}, eˢ cos y)` on `(0,2 ln r)×(0,π)×(0,2π)`.
pub fn annulus_vertical(r: f64) -> Foliation {
    Foliation::parse(
        "sqrt(exp(s)*sin(p1))*exp(i*(p2 - s*cos(p1)/(2*sin(p1))))",
        "exp(s)*cos(p1)",
        (0.0, 2.0 * r.ln()),
        [(0.0, PI), (0.0, 2.0 * PI)],
    )
    .expect("valid")
    .with_exclusion(axis_guard())
}

/// `(s, p₁, p₂) ↦ (s + ip₁, p₂ + 2p₁s)` on `(0,a)×(0,b₁)×(0,b₂)`; horizontal for `q = 1`.
pub fn shear(a: f64, b1: f64, b2: f64) -> Foliation {
    Foliation::parse("s + i*p1", "p2 + 2*p1*s", (0.0, a), [(0.0, b1), (0.0, b2)]).expect("valid")
}

/// A uniformly random parameter point of the horizontal annulus foliation,
/// mapped into ℍ.
pub fn random_annulus_point(rng: &mut impl Rng, r: f64) -> HPoint {
    let u = [rng.gen_range(0.01..PI - 0.01), rng.gen_range(0.0..2.0 * r.ln()), rng.gen_range(0.0..2.0 * PI)];
    annulus_horizontal(r).point(u).expect("interior point")
}

/// A random quadratic polynomial in the box-normalized parameters with
/// `sup |g| ≤ 1` on the box and a nonzero linear term in `s`.
pub fn random_polynomial(rng: &mut impl Rng, s_range: (f64, f64), p_box: [(f64, f64); 2]) -> Expr {
    let unit = |v: &str, r: (f64, f64)| parse(&format!("({v} - ({:?}))/({:?})", r.0, r.1 - r.0)).expect("valid");
    let x = [unit("s", s_range), unit("p1", p_box[0]), unit("p2", p_box[1])];
    let mut monomials = vec![Expr::one(), x[0].clone(), x[1].clone(), x[2].clone()];
    for i in 0..3 {
        for j in i..3 {
            monomials.push(x[i].clone() * x[j].clone());
        }
    }
    let mut coeffs: Vec<f64> = (0..monomials.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if coeffs[1].abs() < 0.25 {
        coeffs[1] = 0.25f64.copysign(coeffs[1]);
    }
    let total: f64 = coeffs.iter().map(|c| c.abs()).sum();
    monomials.into_iter().zip(coeffs).fold(Expr::zero(), |acc, (m, c)| acc + Expr::real(c / total) * m)
}

/// Closed-form M₄ of the horizontal family: `4π ln r / C³`.
pub fn m4_horizontal(r: f64) -> f64 {
    4.0 * PI * r.ln() / C.powi(3)
}

/// Closed-form M₄ of the vertical family: `π² / ln³ r`.
pub fn m4_vertical(r: f64) -> f64 {
    PI * PI / r.ln().powi(3)
}

/// Closed-form q₀-volume of the annulus: `4πC ln r`.
pub fn volume_q0(r: f64) -> f64 {
    4.0 * PI * C * r.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_oracle_values() {
        // independently computed to 30 digits
        assert!((m4_horizontal(1.5) - 0.105_388_793_122_922_04).abs() < 1e-16);
        assert!((m4_horizontal(2.0) - 0.180_163_331_825_537_77).abs() < 1e-16);
        assert!((m4_horizontal(4.0) - 0.360_326_663_651_075_5).abs() < 1e-15);
        assert!((volume_q0(2.0) - 31.731_575_214_280_975).abs() < 1e-13);
        assert!((volume_q0(4.0) - 63.463_150_428_561_95).abs() < 1e-13);
        assert!((m4_vertical(2.0) - 29.636_257_682_862_01).abs() < 1e-12);
        assert!((m4_vertical(1.5) - 148.060_524_405_387_15).abs() < 1e-11);
    }

    #[test]
    fn q0_at_unit_point() {
        let v = q0().eval_q(HPoint::from_parts(1.0, 0.0, 0.0)).unwrap();
        // (t + i|z|²)² = i² = -1 at this point
        assert!((v.re + 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
    }
}
