//! Parametrized legendrian foliations `Φ : I×Λ → ℍ`, their Jacobians, leaf
//! lengths and the λ-decomposition, plus trajectory tracing.

mod trace;

pub use trace::{trace_trajectory, LegendrianPath, PathSample, StopReason, TraceOptions};

use crate::expr::{Binding, Expr, Program, Var};
use crate::heis::{legendrian_scale, HPoint, HTangent};
use crate::qdiff::CoefficientField;
use crate::quad::{integrate, Estimate, Pointwise, Tolerance};
use crate::{legendrian_residual, Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// Below this `|q|` a point is treated as a zero of the differential.
pub const Q_FLOOR: f64 = 1e-12;
/// Relative tolerance for `μ²` being real.
pub const HORIZONTAL_TOL: f64 = 1e-8;
/// Relative tolerance for the contact condition on foliation grids.
pub const LEGENDRIAN_TOL: f64 = 1e-8;

/// Φ and its first partials at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub phi1: Complex64,
    pub phi2: f64,
    pub ds_phi1: Complex64,
    pub ds_phi2: f64,
    pub dp1_phi1: Complex64,
    pub dp1_phi2: f64,
    pub dp2_phi1: Complex64,
    pub dp2_phi2: f64,
}

impl Jet {
    pub fn point(&self) -> HPoint {
        HPoint::new(self.phi1, self.phi2)
    }

    pub fn velocity(&self) -> HTangent {
        HTangent::new(self.ds_phi1, self.ds_phi2)
    }

    /// `∂sΦ₂ + 2 Im(Φ̄₁ ∂sΦ₁)`.
    pub fn legendrian_residual(&self) -> f64 {
        legendrian_residual(self.phi1, self.velocity())
    }

    pub fn legendrian_scale(&self) -> f64 {
        legendrian_scale(self.phi1, self.velocity())
    }

    /// Determinant of `∂(Re Φ₁, Im Φ₁, Φ₂)/∂(s, p₁, p₂)`.
    pub fn jac_det(&self) -> f64 {
        let (a, b, c) = (self.ds_phi1, self.dp1_phi1, self.dp2_phi1);
        self.ds_phi2 * (b.conj() * c).im - self.dp1_phi2 * (a.conj() * c).im + self.dp2_phi2 * (a.conj() * b).im
    }

    /// `−Im(conj(∂sΦ₁)·A)` with
    /// `A = ∂p₁Φ₂ ∂p₂Φ₁ − ∂p₂Φ₂ ∂p₁Φ₁ + 2Φ₁ Im(∂p₁Φ₁ conj(∂p₂Φ₁))`.
    /// Equals [`Jet::jac_det`] when the leaf is legendrian at this point.
    pub fn jac_via_a(&self) -> f64 {
        let (b, c) = (self.dp1_phi1, self.dp2_phi1);
        let a = c * self.dp1_phi2 - b * self.dp2_phi2 + self.phi1 * (2.0 * (b * c.conj()).im);
        -(self.ds_phi1.conj() * a).im
    }
}

/// Points where `guard` does not evaluate to a positive real are excluded
/// from the domain.
#[derive(Clone)]
pub struct Guard {
    expr: Expr,
    program: Arc<Program>,
}

impl Guard {
    pub fn new(expr: Expr) -> Result<Self> {
        if !expr.uses_only(&[Var::Z, Var::Zb, Var::T]) {
            return Err(Error::VariableMismatch);
        }
        let program = Arc::new(Program::compile(&[&expr]));
        Ok(Guard { expr, program })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn allows(&self, p: HPoint) -> bool {
        matches!(self.program.eval(&Binding::heis(p)), Ok(v) if v[0].re > 0.0)
    }
}

impl fmt::Debug for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Guard({})", self.expr)
    }
}

/// A family of legendrian curves `s ↦ Φ(s, p)` indexed by `p ∈ Λ`.
#[derive(Clone)]
pub struct Foliation {
    phi1: Expr,
    phi2: Expr,
    s_range: (f64, f64),
    p_box: [(f64, f64); 2],
    exclusion: Option<Guard>,
    jet: Arc<Program>,
}

impl fmt::Debug for Foliation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Foliation")
            .field("phi1", &self.phi1.to_string())
            .field("phi2", &self.phi2.to_string())
            .field("s_range", &self.s_range)
            .field("p_box", &self.p_box)
            .finish()
    }
}

fn check_range(r: (f64, f64), what: &str) -> Result<()> {
    if r.0.is_finite() && r.1.is_finite() && r.0 < r.1 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} range [{}, {}] is empty or not finite", r.0, r.1)))
    }
}

impl Foliation {
    pub fn new(phi1: Expr, phi2: Expr, s_range: (f64, f64), p_box: [(f64, f64); 2]) -> Result<Self> {
        let params = [Var::S, Var::P1, Var::P2];
        if !phi1.uses_only(&params) || !phi2.uses_only(&params) {
            return Err(Error::VariableMismatch);
        }
        check_range(s_range, "s")?;
        check_range(p_box[0], "p1")?;
        check_range(p_box[1], "p2")?;
        let outputs = [
            phi1.clone(),
            phi2.clone(),
            phi1.diff(Var::S),
            phi2.diff(Var::S),
            phi1.diff(Var::P1),
            phi2.diff(Var::P1),
            phi1.diff(Var::P2),
            phi2.diff(Var::P2),
        ];
        let jet = Arc::new(Program::compile(&outputs.iter().collect::<Vec<_>>()));
        Ok(Foliation { phi1, phi2, s_range, p_box, exclusion: None, jet })
    }

    pub fn parse(phi1: &str, phi2: &str, s_range: (f64, f64), p_box: [(f64, f64); 2]) -> Result<Self> {
        Self::new(crate::expr::parse(phi1)?, crate::expr::parse(phi2)?, s_range, p_box)
    }

    pub fn with_exclusion(mut self, guard: Guard) -> Self {
        self.exclusion = Some(guard);
        self
    }

    pub fn phi1(&self) -> &Expr {
        &self.phi1
    }

    pub fn phi2(&self) -> &Expr {
        &self.phi2
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    pub fn p_box(&self) -> [(f64, f64); 2] {
        self.p_box
    }

    pub fn exclusion(&self) -> Option<&Guard> {
        self.exclusion.as_ref()
    }

    pub fn jet(&self, u: [f64; 3]) -> Result<Jet> {
        let b = Binding::params(u[0], u[1], u[2]);
        let mut o = [Complex64::new(0.0, 0.0); 8];
        self.jet.eval_into(b.values(), &mut o)?;
        Ok(Jet {
            phi1: o[0],
            phi2: o[1].re,
            ds_phi1: o[2],
            ds_phi2: o[3].re,
            dp1_phi1: o[4],
            dp1_phi2: o[5].re,
            dp2_phi1: o[6],
            dp2_phi2: o[7].re,
        })
    }

    pub fn point(&self, u: [f64; 3]) -> Result<HPoint> {
        Ok(self.jet(u)?.point())
    }

    pub fn legendrian_residual(&self, u: [f64; 3]) -> Result<f64> {
        Ok(self.jet(u)?.legendrian_residual())
    }

    pub fn jac_via_a(&self, u: [f64; 3]) -> Result<f64> {
        Ok(self.jet(u)?.jac_via_a())
    }

    pub fn jac_det(&self, u: [f64; 3]) -> Result<f64> {
        Ok(self.jet(u)?.jac_det())
    }

    /// Cell midpoints of a uniform `ns × np × np` grid; never touches the
    /// boundary, where leaf integrands may be singular.
    pub fn interior_grid(&self, ns: usize, np: usize) -> Vec<[f64; 3]> {
        let mid = |r: (f64, f64), n: usize, k: usize| r.0 + (r.1 - r.0) * (k as f64 + 0.5) / n as f64;
        let mut out = Vec::with_capacity(ns * np * np);
        for i in 0..np {
            for j in 0..np {
                for k in 0..ns {
                    out.push([mid(self.s_range, ns, k), mid(self.p_box[0], np, i), mid(self.p_box[1], np, j)]);
                }
            }
        }
        out
    }

    /// Leaf parameters of a uniform `np × np` midpoint grid.
    pub fn leaf_grid(&self, np: usize) -> Vec<[f64; 2]> {
        let mid = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * (k as f64 + 0.5) / np as f64;
        (0..np).flat_map(|i| (0..np).map(move |j| [mid(self.p_box[0], i), mid(self.p_box[1], j)])).collect()
    }

    fn allowed(&self, jet: &Jet) -> bool {
        self.exclusion.as_ref().is_none_or(|g| g.allows(jet.point()))
    }

    /// Largest relative legendrian residual over an interior grid; fails with
    /// `NotLegendrian` above tolerance and `ZeroVelocity` where `∂sΦ₁ = 0`.
    pub fn validate_legendrian(&self, n: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for u in self.interior_grid(n, n) {
            let jet = self.jet(u)?;
            if !self.allowed(&jet) {
                continue;
            }
            if jet.ds_phi1.norm() == 0.0 {
                return Err(Error::ZeroVelocity { s: u[0], p1: u[1], p2: u[2] });
            }
            let rel = jet.legendrian_residual().abs() / jet.legendrian_scale().max(1.0);
            worst = worst.max(rel);
        }
        if worst > LEGENDRIAN_TOL {
            return Err(Error::NotLegendrian { residual: worst });
        }
        Ok(worst)
    }

    /// `μ² = (q∘Φ)(∂sΦ₁)²`, required to be real-positive.
    pub fn mu_squared(&self, field: &dyn CoefficientField, jet: &Jet, u: [f64; 3]) -> Result<f64> {
        let q = field.q_at(jet, u)?;
        if q.norm() < Q_FLOOR {
            return Err(Error::ZeroOfQ);
        }
        let m = q * jet.ds_phi1 * jet.ds_phi1;
        if !(m.re > 0.0) || m.im.abs() > HORIZONTAL_TOL * m.norm() {
            return Err(Error::NegativeQ { re: m.re, im: m.im });
        }
        Ok(m.re)
    }

    /// q-length `∫_I √|q(Φ)| |∂sΦ₁| ds` of the leaf through `p`, checking
    /// horizontality at every quadrature node.
    pub fn leaf_length(&self, field: &dyn CoefficientField, p: [f64; 2], tol: f64) -> Result<Estimate> {
        self.leaf_integral(p, tol, |jet, u| Ok(self.mu_squared(field, jet, u)?.sqrt()))
    }

    /// q-length of the piece `s ∈ [a, b]` of the leaf through `p`.
    pub fn arc_length(&self, field: &dyn CoefficientField, p: [f64; 2], a: f64, b: f64, tol: f64) -> Result<Estimate> {
        let mut f = Pointwise(|s: f64| {
            let u = [s, p[0], p[1]];
            Ok(self.mu_squared(field, &self.jet(u)?, u)?.sqrt())
        });
        integrate(&mut f, a, b, Tolerance::relative(tol))
    }

    /// `∫_I |q(Φ)|² |J_Φ| ds` along the leaf through `p`.
    pub fn leaf_volume(&self, field: &dyn CoefficientField, p: [f64; 2], tol: f64) -> Result<Estimate> {
        self.leaf_integral(p, tol, |jet, u| Ok(field.q_at(jet, u)?.norm_sqr() * jet.jac_det().abs()))
    }

    /// `∫_I g(jet, u) ds` along the leaf through `p`.
    pub fn leaf_integral(
        &self,
        p: [f64; 2],
        tol: f64,
        g: impl Fn(&Jet, [f64; 3]) -> Result<f64>,
    ) -> Result<Estimate> {
        let mut f = Pointwise(|s: f64| {
            let u = [s, p[0], p[1]];
            g(&self.jet(u)?, u)
        });
        integrate(&mut f, self.s_range.0, self.s_range.1, Tolerance::relative(tol))
    }

    /// `λ = μ³ J_Φ / |∂sΦ₁|⁴` with `J_Φ` from [`Jet::jac_via_a`].
    pub fn lambda_field(&self, field: &dyn CoefficientField, u: [f64; 3]) -> Result<f64> {
        let jet = self.jet(u)?;
        let mu = self.mu_squared(field, &jet, u)?.sqrt();
        Ok(mu.powi(3) * jet.jac_via_a() / jet.ds_phi1.norm_sqr().powi(2))
    }

    /// Finds `u` with `Φ(u) = p` by damped Newton iteration seeded from the
    /// nearest point of a parameter grid.
    pub fn invert(&self, p: HPoint) -> Result<[f64; 3]> {
        const SEED_GRID: usize = 14;
        let target = [p.z.re, p.z.im, p.t];
        let resid = |jet: &Jet| [jet.phi1.re - target[0], jet.phi1.im - target[1], jet.phi2 - target[2]];
        let norm = |r: [f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();

        let mut best = None;
        for u in self.interior_grid(SEED_GRID, SEED_GRID) {
            if let Ok(jet) = self.jet(u) {
                let d = norm(resid(&jet));
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, u));
                }
            }
        }
        let (_, mut u) = best.ok_or_else(|| Error::InversionFailure("no evaluable seed".into()))?;
        let scale = 1.0 + p.z.norm() + p.t.abs();
        let lo = [self.s_range.0, self.p_box[0].0, self.p_box[1].0];
        let hi = [self.s_range.1, self.p_box[0].1, self.p_box[1].1];

        let mut jet = self.jet(u)?;
        let mut r = resid(&jet);
        for _ in 0..100 {
            if norm(r) <= 1e-13 * scale {
                return Ok(u);
            }
            let cols = [
                [jet.ds_phi1.re, jet.ds_phi1.im, jet.ds_phi2],
                [jet.dp1_phi1.re, jet.dp1_phi1.im, jet.dp1_phi2],
                [jet.dp2_phi1.re, jet.dp2_phi1.im, jet.dp2_phi2],
            ];
            let step = solve3(cols, r).ok_or_else(|| Error::InversionFailure("singular Jacobian".into()))?;
            let mut damp = 1.0;
            loop {
                let mut cand = u;
                for k in 0..3 {
                    cand[k] = (u[k] - damp * step[k]).clamp(lo[k], hi[k]);
                }
                if let Ok(j) = self.jet(cand) {
                    let rc = resid(&j);
                    if norm(rc) < norm(r) {
                        u = cand;
                        jet = j;
                        r = rc;
                        break;
                    }
                }
                damp *= 0.5;
                if damp < 1e-10 {
                    if norm(r) <= 1e-10 * scale {
                        return Ok(u);
                    }
                    return Err(Error::InversionFailure(format!("stalled at residual {:e}", norm(r))));
                }
            }
        }
        Err(Error::InversionFailure(format!("no convergence, residual {:e}", norm(r))))
    }
}

/// Solves `Σ_k x_k cols[k] = rhs` by Cramer's rule.
fn solve3(cols: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1]) + c[0] * (a[1] * b[2] - a[2] * b[1])
    };
    let d = det(cols[0], cols[1], cols[2]);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([
        det(rhs, cols[1], cols[2]) / d,
        det(cols[0], rhs, cols[2]) / d,
        det(cols[0], cols[1], rhs) / d,
    ])
}
