//! The planar analogue: holomorphic quadratic differentials `q(w)dw²`,
//! foliations of plane domains, and the M₂ modulus.

use crate::expr::{Binding, Expr, Program, Var};
use crate::foliation::{HORIZONTAL_TOL, Q_FLOOR};
use crate::modulus::{integrate_interval, LeafStats, ModulusReport, ResidualStats, Runtime, CONSTANT_LENGTH_TOL};
use crate::quad::{integrate, Estimate, Pointwise, Tolerance};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

/// A quadratic differential `q(w) dw²` in the plane.
#[derive(Clone)]
pub struct PlanarQD {
    q: Expr,
    program: Arc<Program>,
    dwb: Arc<Program>,
}

impl fmt::Debug for PlanarQD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlanarQD({})", self.q)
    }
}

impl PlanarQD {
    pub fn new(q: Expr) -> Result<Self> {
        if !q.uses_only(&[Var::Z, Var::Zb]) {
            return Err(Error::VariableMismatch);
        }
        let program = Arc::new(Program::compile(&[&q]));
        let dwb = Arc::new(Program::compile(&[&q.d_zb()]));
        Ok(PlanarQD { q, program, dwb })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(crate::expr::parse(text)?)
    }

    pub fn expr(&self) -> &Expr {
        &self.q
    }

    pub fn eval(&self, w: Complex64) -> Result<Complex64> {
        Ok(self.program.eval(&Binding::plane(w))?[0])
    }

    /// `∂q/∂w̄` at `w`; zero exactly where `q` is holomorphic.
    pub fn holomorphy_residual(&self, w: Complex64) -> Result<Complex64> {
        Ok(self.dwb.eval(&Binding::plane(w))?[0])
    }
}

/// `Φ` and its partials at `(s, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarJet {
    pub phi: Complex64,
    pub ds: Complex64,
    pub dp: Complex64,
}

impl PlanarJet {
    /// `Im(conj(∂sΦ) ∂pΦ)`.
    pub fn jacobian(&self) -> f64 {
        (self.ds.conj() * self.dp).im
    }

    /// The same Jacobian as a real 2×2 determinant.
    pub fn jacobian_det(&self) -> f64 {
        self.ds.re * self.dp.im - self.dp.re * self.ds.im
    }
}

/// A family of plane curves `s ↦ Φ(s, p)`, `p ∈ J`.
#[derive(Clone)]
pub struct PlanarFoliation {
    phi: Expr,
    s_range: (f64, f64),
    p_range: (f64, f64),
    jet: Arc<Program>,
}

impl fmt::Debug for PlanarFoliation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarFoliation")
            .field("phi", &self.phi.to_string())
            .field("s_range", &self.s_range)
            .field("p_range", &self.p_range)
            .finish()
    }
}

impl PlanarFoliation {
    pub fn new(phi: Expr, s_range: (f64, f64), p_range: (f64, f64)) -> Result<Self> {
        if !phi.uses_only(&[Var::S, Var::P1]) {
            return Err(Error::VariableMismatch);
        }
        for (r, what) in [(s_range, "s"), (p_range, "p")] {
            if !(r.0.is_finite() && r.1.is_finite() && r.0 < r.1) {
                return Err(Error::Invalid(format!("{what} range [{}, {}] is empty or not finite", r.0, r.1)));
            }
        }
        let outs = [phi.clone(), phi.diff(Var::S), phi.diff(Var::P1)];
        let jet = Arc::new(Program::compile(&outs.iter().collect::<Vec<_>>()));
        Ok(PlanarFoliation { phi, s_range, p_range, jet })
    }

    pub fn parse(phi: &str, s_range: (f64, f64), p_range: (f64, f64)) -> Result<Self> {
        Self::new(crate::expr::parse(phi)?, s_range, p_range)
    }

    pub fn phi(&self) -> &Expr {
        &self.phi
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    pub fn p_range(&self) -> (f64, f64) {
        self.p_range
    }

    pub fn jet(&self, s: f64, p: f64) -> Result<PlanarJet> {
        let o = self.jet.eval(&Binding::params(s, p, 0.0))?;
        Ok(PlanarJet { phi: o[0], ds: o[1], dp: o[2] })
    }

    /// Cell midpoints of an `ns × np` grid.
    pub fn interior_grid(&self, ns: usize, np: usize) -> Vec<(f64, f64)> {
        let mid = |r: (f64, f64), n: usize, k: usize| r.0 + (r.1 - r.0) * (k as f64 + 0.5) / n as f64;
        (0..np).flat_map(|j| (0..ns).map(move |k| (mid(self.s_range, ns, k), mid(self.p_range, np, j)))).collect()
    }

    /// `μ² = q(Φ)(∂sΦ)²`, required to be real-positive.
    pub fn mu_squared(&self, q: &PlanarQD, jet: &PlanarJet) -> Result<f64> {
        let qv = q.eval(jet.phi)?;
        if qv.norm() < Q_FLOOR {
            return Err(Error::ZeroOfQ);
        }
        let m = qv * jet.ds * jet.ds;
        if !(m.re > 0.0) || m.im.abs() > HORIZONTAL_TOL * m.norm() {
            return Err(Error::NegativeQ { re: m.re, im: m.im });
        }
        Ok(m.re)
    }

    fn leaf_integral(&self, p: f64, tol: f64, g: impl Fn(&PlanarJet) -> Result<f64>) -> Result<Estimate> {
        let mut f = Pointwise(|s: f64| g(&self.jet(s, p)?));
        integrate(&mut f, self.s_range.0, self.s_range.1, Tolerance::relative(tol))
    }

    /// `∫_I √|q(Φ)| |∂sΦ| ds`.
    pub fn leaf_length(&self, q: &PlanarQD, p: f64, tol: f64) -> Result<Estimate> {
        self.leaf_integral(p, tol, |jet| Ok(self.mu_squared(q, jet)?.sqrt()))
    }

    /// `∫_I |q(Φ)| |J_Φ| ds`.
    pub fn leaf_area(&self, q: &PlanarQD, p: f64, tol: f64) -> Result<Estimate> {
        self.leaf_integral(p, tol, |jet| Ok(q.eval(jet.phi)?.norm() * jet.jacobian().abs()))
    }
}

pub fn holomorphy_residual(q: &PlanarQD, w: Complex64) -> Result<Complex64> {
    q.holomorphy_residual(w)
}

pub fn planar_jacobian(fol: &PlanarFoliation, s: f64, p: f64) -> Result<f64> {
    Ok(fol.jet(s, p)?.jacobian())
}

/// `λ = μ J_Φ / |∂sΦ|²`; independent of `s` when `q` is holomorphic.
pub fn lambda_field_2d(q: &PlanarQD, fol: &PlanarFoliation, s: f64, p: f64) -> Result<f64> {
    let jet = fol.jet(s, p)?;
    let mu = fol.mu_squared(q, &jet)?.sqrt();
    Ok(mu * jet.jacobian() / jet.ds.norm_sqr())
}

/// `Area_q = ∫_J ∫_I |q(Φ)| |J_Φ| ds dp`.
pub fn q_area(q: &PlanarQD, fol: &PlanarFoliation, tol: f64) -> Result<Estimate> {
    let leaf_tol = (tol * 1e-2).max(1e-13);
    integrate_interval(fol.p_range, tol, &|p| fol.leaf_area(q, p, leaf_tol))
}

/// `M₂(Γ) = ∫_J l(p)^{-2} ∫_I |q(Φ)| |J_Φ| ds dp`.
pub fn modulus_m2(q: &PlanarQD, fol: &PlanarFoliation, tol: f64) -> Result<ModulusReport> {
    const CHECK_GRID: usize = 8;
    let leaf_tol = (tol * 1e-2).max(1e-13);
    let mut holo = ResidualStats { max_abs: 0.0, max_relative: 0.0, samples: 0 };
    for (s, p) in fol.interior_grid(CHECK_GRID, CHECK_GRID) {
        let w = fol.jet(s, p)?.phi;
        let r = q.holomorphy_residual(w)?.norm();
        holo.max_abs = holo.max_abs.max(r);
        holo.max_relative = holo.max_relative.max(r / q.eval(w)?.norm().max(1.0));
        holo.samples += 1;
    }
    let mut warnings = Vec::new();
    if holo.max_relative > 1e-9 {
        warnings.push(format!("q is not holomorphic (|∂q/∂w̄| up to {:e})", holo.max_abs));
    }

    let lengths: Mutex<HashMap<u64, Estimate>> = Mutex::default();
    let areas: Mutex<HashMap<u64, Estimate>> = Mutex::default();
    let cached = |map: &Mutex<HashMap<u64, Estimate>>, p: f64, f: &dyn Fn() -> Result<Estimate>| -> Result<Estimate> {
        if let Some(e) = map.lock().unwrap().get(&p.to_bits()) {
            return Ok(*e);
        }
        let e = f()?;
        map.lock().unwrap().insert(p.to_bits(), e);
        Ok(e)
    };
    let length = |p: f64| cached(&lengths, p, &|| fol.leaf_length(q, p, leaf_tol));
    let area = |p: f64| cached(&areas, p, &|| fol.leaf_area(q, p, leaf_tol));
    let rel = |e: Estimate| if e.value == 0.0 { 0.0 } else { e.error / e.value.abs() };

    let m = integrate_interval(fol.p_range, tol, &|p| {
        let l = length(p)?;
        if l.value <= 0.0 {
            return Err(Error::ZeroLeafLength);
        }
        let a = area(p)?;
        let v = a.value / (l.value * l.value);
        Ok(Estimate { value: v, error: v.abs() * (rel(a) + 2.0 * rel(l)) })
    })?;
    let stats = LeafStats::from_values(lengths.lock().unwrap().values().map(|e| e.value).collect())
        .ok_or(Error::ZeroLeafLength)?;
    let (consistency_gap, volume) = if stats.spread() <= CONSTANT_LENGTH_TOL {
        let a = integrate_interval(fol.p_range, tol, &area)?;
        (Some((m.value - a.value / (stats.mean * stats.mean)).abs()), Some(a))
    } else {
        (None, None)
    };
    let leaves = lengths.lock().unwrap().len();
    Ok(ModulusReport {
        modulus: m.value,
        error_estimate: m.error,
        leaf_length_stats: stats,
        consistency_gap,
        volume,
        residual_stats: Some(holo),
        warnings,
        runtime: Runtime { leaves, integrand_evaluations: 0 },
    })
}

/// `Φ = s + ip` on `(0,a)×(0,b)` with `q = 1`.
pub fn rectangle(a: f64, b: f64) -> (PlanarQD, PlanarFoliation) {
    (PlanarQD::parse("1").expect("valid"), PlanarFoliation::parse("s + i*p", (0.0, a), (0.0, b)).expect("valid"))
}

/// Radii `Φ = s e^{ip}` of `{1 < |w| < R}`, horizontal for `q = 1/w²`.
pub fn radial_annulus(r: f64) -> (PlanarQD, PlanarFoliation) {
    (
        PlanarQD::parse("1/w^2").expect("valid"),
        PlanarFoliation::parse("s*exp(i*p)", (1.0, r), (0.0, 2.0 * PI)).expect("valid"),
    )
}

/// Circles `Φ = p e^{is}` of `{1 < |w| < R}`, horizontal for `q = −1/w²`.
pub fn circular_annulus(r: f64) -> (PlanarQD, PlanarFoliation) {
    (
        PlanarQD::parse("-1/w^2").expect("valid"),
        PlanarFoliation::parse("p*exp(i*s)", (0.0, 2.0 * PI), (1.0, r)).expect("valid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn holomorphy() {
        assert_eq!(PlanarQD::parse("w^2").unwrap().holomorphy_residual(c(0.3, 2.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(PlanarQD::parse("1/w^2").unwrap().holomorphy_residual(c(1.0, 1.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(PlanarQD::parse("wb").unwrap().holomorphy_residual(c(1.0, 1.0)).unwrap(), c(1.0, 0.0));
        assert!(PlanarQD::parse("t*w").is_err());
    }

    #[test]
    fn jacobians() {
        let f = PlanarFoliation::parse("s + i*p", (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert_eq!(planar_jacobian(&f, 0.3, 0.4).unwrap(), 1.0);
        let f = PlanarFoliation::parse("s*exp(i*p)", (1.0, 2.0), (0.0, 6.0)).unwrap();
        for (s, p) in f.interior_grid(4, 4) {
            let jet = f.jet(s, p).unwrap();
            assert!((jet.jacobian() - s).abs() < 1e-14);
            assert!((jet.jacobian() - jet.jacobian_det()).abs() < 1e-14);
        }
        let f = PlanarFoliation::parse("s + p", (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert_eq!(planar_jacobian(&f, 0.3, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn lambda_examples() {
        let (q, f) = rectangle(2.0, 1.0);
        assert_eq!(lambda_field_2d(&q, &f, 0.5, 0.5).unwrap(), 1.0);
        let (q, f) = radial_annulus(3.0);
        for (s, p) in f.interior_grid(10, 5) {
            assert!((lambda_field_2d(&q, &f, s, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let anti = PlanarQD::parse("wb^2").unwrap();
        let a = lambda_field_2d(&anti, &f, 1.2, 0.7).unwrap();
        let b = lambda_field_2d(&anti, &f, 2.5, 0.7).unwrap();
        assert!((a - 1.44).abs() < 1e-12 && (b - 6.25).abs() < 1e-12);
    }

    #[test]
    fn classical_moduli() {
        let (q, f) = rectangle(2.0, 3.0);
        let m = modulus_m2(&q, &f, 1e-12).unwrap();
        assert!((m.modulus - 1.5).abs() < 1e-14);
        let (q, f) = radial_annulus(3.0);
        let radial = modulus_m2(&q, &f, 1e-12).unwrap();
        assert!((radial.modulus - 2.0 * PI / 3f64.ln()).abs() < 1e-12);
        assert!(radial.consistency_gap.unwrap() < 1e-12);
        assert!((q_area(&q, &f, 1e-12).unwrap().value - 2.0 * PI * 3f64.ln()).abs() < 1e-11);
        let (q, f) = circular_annulus(3.0);
        let circ = modulus_m2(&q, &f, 1e-12).unwrap();
        assert!((radial.modulus * circ.modulus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_family_is_not_horizontal() {
        let (_, f) = radial_annulus(2.0);
        let q = PlanarQD::parse("-1/w^2").unwrap();
        assert!(matches!(modulus_m2(&q, &f, 1e-8), Err(Error::NegativeQ { .. })));
    }
}
