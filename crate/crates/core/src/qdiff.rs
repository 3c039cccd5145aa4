//! Quadratic differentials `[q dz²]_ω` on domains of ℍ and the residuals of
//! the operators B₂, D′₂ and D″₂.
//!
//! Operators are reported through their scalar coefficients only.

use crate::expr::{Binding, Expr, Field, Program, Var};
use crate::foliation::{Foliation, Jet};
use crate::heis::{legendrian_scale, HPoint, HTangent};
use crate::{legendrian_residual, Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, OnceLock};

const LEGENDRIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorTag {
    B2,
    D2prime,
    D2doubleprime,
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorTag::B2 => "b2",
            OperatorTag::D2prime => "d2prime",
            OperatorTag::D2doubleprime => "d2doubleprime",
        })
    }
}

/// Coefficient of an operator applied to `q`, evaluated at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorResidual {
    pub value: Complex64,
    pub point: HPoint,
    pub operator_tag: OperatorTag,
    /// Largest modulus among the summed terms; the natural size against
    /// which `value` is small or not.
    pub scale: f64,
}

impl OperatorResidual {
    pub fn relative(&self) -> f64 {
        self.value.norm() / self.scale.max(1.0)
    }
}

/// Sign class of `q(γ′)` on a legendrian tangent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Horizontal,
    Vertical,
    Neither,
}

impl Direction {
    pub fn classify(v: Complex64, tol: f64) -> Direction {
        if v.im.abs() > tol * v.norm() || v.re == 0.0 {
            Direction::Neither
        } else if v.re > 0.0 {
            Direction::Horizontal
        } else {
            Direction::Vertical
        }
    }
}

struct Compiled {
    q: Program,
    b2: Program,
    d2p: Program,
    d2pp: Program,
}

/// A quadratic differential given by its coefficient `q` in `(z, zb, t)`.
#[derive(Clone)]
pub struct QuadDiff {
    coeff: Expr,
    compiled: Arc<OnceLock<Compiled>>,
}

impl fmt::Debug for QuadDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadDiff").field("coeff", &self.coeff.to_string()).finish()
    }
}

impl QuadDiff {
    pub fn new(coeff: Expr) -> Result<Self> {
        if !coeff.uses_only(&[Var::Z, Var::Zb, Var::T]) {
            return Err(Error::VariableMismatch);
        }
        Ok(QuadDiff { coeff, compiled: Arc::new(OnceLock::new()) })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(crate::expr::parse(text)?)
    }

    pub fn coeff(&self) -> &Expr {
        &self.coeff
    }

    /// `c·q`.
    pub fn scaled(&self, c: f64) -> QuadDiff {
        QuadDiff::new(Expr::real(c) * self.coeff.clone()).expect("same variables")
    }

    fn compiled(&self) -> &Compiled {
        self.compiled.get_or_init(|| {
            let q = &self.coeff;
            let qb = q.conj();
            let f = |e: &Expr, fld| e.apply_field(fld).expect("heisenberg expression");
            let zq = f(q, Field::Z);
            let zbq = f(q, Field::Zbar);
            let tq = f(q, Field::T);
            let two = Expr::real(2.0);

            let b2 = [f(&(q.clone() * qb.clone()), Field::Zbar), qb * zbq.clone()];
            let d2p = [
                two.clone() * q.clone() * f(&zbq, Field::Z),
                -(zq * zbq.clone()),
                Expr::constant(Complex64::new(0.0, -4.0)) * q.clone() * tq,
            ];
            let d2pp = [two * q.clone() * f(&zbq, Field::Zbar), -(zbq.clone() * zbq)];
            Compiled {
                q: Program::compile(&[q]),
                b2: Program::compile(&b2.iter().collect::<Vec<_>>()),
                d2p: Program::compile(&d2p.iter().collect::<Vec<_>>()),
                d2pp: Program::compile(&d2pp.iter().collect::<Vec<_>>()),
            }
        })
    }

    pub fn eval_q(&self, p: HPoint) -> Result<Complex64> {
        Ok(self.compiled().q.eval(&Binding::heis(p))?[0])
    }

    /// `q(p)·dz²` for a legendrian tangent `v` at `p`.
    pub fn q_on_tangent(&self, p: HPoint, v: HTangent) -> Result<Complex64> {
        let residual = legendrian_residual(p.z, v);
        if residual.abs() > LEGENDRIAN_TOL * legendrian_scale(p.z, v).max(1.0) {
            return Err(Error::NonLegendrianTangent { residual });
        }
        Ok(self.eval_q(p)? * v.dz * v.dz)
    }

    fn residual(&self, prog: &Program, tag: OperatorTag, p: HPoint) -> Result<OperatorResidual> {
        let terms = prog.eval(&Binding::heis(p))?;
        let value = terms.iter().sum();
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        Ok(OperatorResidual { value, point: p, operator_tag: tag, scale })
    }

    /// `Z̄(|q|²) + q̄ Z̄q`.
    pub fn b2_residual(&self, p: HPoint) -> Result<OperatorResidual> {
        self.residual(&self.compiled().b2, OperatorTag::B2, p)
    }

    /// `2q ZZ̄q − Zq Z̄q − 4i q Tq`.
    pub fn d2prime_residual(&self, p: HPoint) -> Result<OperatorResidual> {
        self.residual(&self.compiled().d2p, OperatorTag::D2prime, p)
    }

    /// `2q Z̄²q − (Z̄q)²`.
    pub fn d2doubleprime_residual(&self, p: HPoint) -> Result<OperatorResidual> {
        self.residual(&self.compiled().d2pp, OperatorTag::D2doubleprime, p)
    }

    pub fn residual_of(&self, tag: OperatorTag, p: HPoint) -> Result<OperatorResidual> {
        match tag {
            OperatorTag::B2 => self.b2_residual(p),
            OperatorTag::D2prime => self.d2prime_residual(p),
            OperatorTag::D2doubleprime => self.d2doubleprime_residual(p),
        }
    }
}

/// The values of a quadratic differential along a foliation, `u ↦ (q∘Φ)(u)`.
pub trait CoefficientField: Send + Sync {
    fn q_at(&self, jet: &Jet, u: [f64; 3]) -> Result<Complex64>;

    /// The underlying differential when it is known in ℍ coordinates.
    fn quad_diff(&self) -> Option<&QuadDiff> {
        None
    }
}

impl CoefficientField for QuadDiff {
    fn q_at(&self, jet: &Jet, _u: [f64; 3]) -> Result<Complex64> {
        self.eval_q(jet.point())
    }

    fn quad_diff(&self) -> Option<&QuadDiff> {
        Some(self)
    }
}

/// `c·q` for any field.
pub struct ScaledField<'a> {
    pub inner: &'a dyn CoefficientField,
    pub c: f64,
}

impl CoefficientField for ScaledField<'_> {
    fn q_at(&self, jet: &Jet, u: [f64; 3]) -> Result<Complex64> {
        Ok(self.inner.q_at(jet, u)? * self.c)
    }
}

/// `q_f = f/(∂sΦ₁)²` transported by `Φ`: the differential for which the
/// leaves of `Φ` are horizontal with `q_f(∂sΦ) = f`.
#[derive(Debug, Clone)]
pub struct QfField {
    foliation: Foliation,
    f: Expr,
    program: Arc<Program>,
}

const FACTOR_GRID: usize = 7;

impl QfField {
    /// Checks `f > 0` and `∂sΦ₁ ≠ 0` on an interior grid of the box.
    pub fn new(foliation: &Foliation, f: Expr) -> Result<Self> {
        if !f.uses_only(&[Var::S, Var::P1, Var::P2]) {
            return Err(Error::VariableMismatch);
        }
        let program = Arc::new(Program::compile(&[&f]));
        let field = QfField { foliation: foliation.clone(), f, program };
        for u in foliation.interior_grid(FACTOR_GRID, FACTOR_GRID) {
            let v = field.factor(u)?;
            if !(v.re > 0.0) || v.im.abs() > 1e-12 * v.re {
                return Err(Error::NonPositiveFactor { s: u[0], p1: u[1], p2: u[2] });
            }
            let jet = foliation.jet(u)?;
            if jet.ds_phi1.norm() == 0.0 {
                return Err(Error::ZeroVelocity { s: u[0], p1: u[1], p2: u[2] });
            }
        }
        Ok(field)
    }

    pub fn factor_expr(&self) -> &Expr {
        &self.f
    }

    pub fn factor(&self, u: [f64; 3]) -> Result<Complex64> {
        Ok(self.program.eval(&Binding::params(u[0], u[1], u[2]))?[0])
    }

    /// Evaluates `q_f` at a point of ℍ by inverting `Φ` numerically.
    pub fn eval_at_point(&self, p: HPoint) -> Result<Complex64> {
        let u = self.foliation.invert(p)?;
        let jet = self.foliation.jet(u)?;
        self.q_at(&jet, u)
    }
}

impl CoefficientField for QfField {
    fn q_at(&self, jet: &Jet, u: [f64; 3]) -> Result<Complex64> {
        let d = jet.ds_phi1;
        if d.norm() < 1e-150 {
            return Err(Error::ZeroVelocity { s: u[0], p1: u[1], p2: u[2] });
        }
        Ok(self.factor(u)? / (d * d))
    }
}
