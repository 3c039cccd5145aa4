#![allow(dead_code)]

use hmod_core::expr::{Binding, Expr, Field};
use hmod_core::HPoint;
use num_complex::Complex64;

pub const FD_STEP: f64 = 1e-5;

/// Smooth expressions in `z, zb, t`; every power, root and log has a base
/// bounded away from the negative real axis on `|z| ≤ 1.5, |t| ≤ 1.5`.
pub const CORPUS: [&str; 50] = [
    "z",
    "zb",
    "t",
    "z^2",
    "z*zb",
    "t + i*z*zb",
    "t - i*z*zb",
    "(t + i*z*zb)^2",
    "(t - i*z*zb)^2/(t + i*z*zb + 3)^4",
    "zb^2",
    "z^3 - 2*zb + t",
    "(z*zb + 1)^(2/3)",
    "(z*zb + 0.5)^(-4/3)",
    "(t^2 + (z*zb)^2 + 1)^(1/4)",
    "(t^2 + (z*zb)^2 + 1)^(2/3)/(z*zb + 1)^(4/3)",
    "zb^2*(t^2 + (z*zb)^2 + 1)^(2/3)/((z*zb + 1)^(4/3)*(t + i*z*zb + 3*i)^2)",
    "sqrt(z*zb + 2)",
    "sqrt(t^2 + 1)*z",
    "exp(z)",
    "exp(i*t)*zb",
    "exp(-z*zb)",
    "log(z*zb + 1)",
    "log(t^2 + 2)*z^2",
    "sin(z)",
    "cos(zb*t)",
    "sin(t)*cos(z)",
    "re(z)",
    "im(z)*t",
    "re(z^2) + im(zb^3)",
    "abs2(z)",
    "abs2(z + t)",
    "abs2(t + i*z*zb)",
    "1/(1 + z*zb)",
    "z/(2 + t^2)",
    "(z + 2)/(zb + 3)",
    "(1 + t*z)^3",
    "-z^2",
    "-(t + zb)^2*z",
    "z*zb*t",
    "(z - zb)^2/4",
    "conj(z)*z + i*t",
    "conj(z^2 + t)",
    "(2 + 3*i)*z^2 - (1 - i)*zb",
    "exp(sin(z))",
    "cos(exp(i*t))",
    "sqrt(exp(z*zb))",
    "log(2 + sin(t))*abs2(z)",
    "(z*zb + t^2 + 1)^(1/3)*(z + i)",
    "im(t + i*z*zb)^2",
    "exp(z)*exp(-zb)*t^3",
];

pub fn eval(e: &Expr, p: HPoint) -> Complex64 {
    e.eval(&Binding::heis(p)).expect("corpus expression evaluates")
}

/// Central-difference approximation of `F e` at `p`, using
/// `∂z = (∂x − i∂y)/2` and `∂z̄ = (∂x + i∂y)/2`.
pub fn field_fd(e: &Expr, field: Field, p: HPoint, h: f64) -> Complex64 {
    let at = |dx: f64, dy: f64, dt: f64| eval(e, HPoint::new(p.z + Complex64::new(dx, dy), p.t + dt));
    let dx = (at(h, 0.0, 0.0) - at(-h, 0.0, 0.0)) / (2.0 * h);
    let dy = (at(0.0, h, 0.0) - at(0.0, -h, 0.0)) / (2.0 * h);
    let dt = (at(0.0, 0.0, h) - at(0.0, 0.0, -h)) / (2.0 * h);
    let i = Complex64::i();
    let dz = 0.5 * (dx - i * dy);
    let dzb = 0.5 * (dx + i * dy);
    match field {
        Field::Z => dz + i * p.z.conj() * dt,
        Field::Zbar => dzb - i * p.z * dt,
        Field::T => dt,
    }
}

/// `|symbolic − fd| / max(|symbolic|, 1)`.
pub fn field_error(e: &Expr, field: Field, p: HPoint) -> f64 {
    let sym = eval(&e.apply_field(field).expect("heisenberg expression"), p);
    let fd = field_fd(e, field, p, FD_STEP);
    (sym - fd).norm() / sym.norm().max(1.0)
}
