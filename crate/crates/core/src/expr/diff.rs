//! Symbolic differentiation with every variable treated as independent
//! (Wirtinger calculus for `z`, `zb`), structural conjugation, and the CR
//! vector fields of ℍ.

use super::{Expr, Node, Var};
use crate::{Error, Result};

/// Vector fields acting on functions of `(z, zb, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    /// `Z = ∂z + i z̄ ∂t`
    Z,
    /// `Z̄ = ∂z̄ − i z ∂t`
    Zbar,
    /// Reeb field `∂t` of `ω = dt − i z̄ dz + i z dz̄`.
    T,
}

impl Expr {
    /// Structural conjugate: swaps `z` and `zb` and conjugates constants.
    /// Agrees with pointwise conjugation away from branch cuts.
    pub fn conj(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.conj()),
            Node::Var(v) => Expr::var(v.conj()),
            Node::Add(a, b) => a.conj() + b.conj(),
            Node::Sub(a, b) => a.conj() - b.conj(),
            Node::Mul(a, b) => a.conj() * b.conj(),
            Node::Div(a, b) => a.conj() / b.conj(),
            Node::Neg(a) => -a.conj(),
            Node::PowR(a, x) => Expr::powr(a.conj(), *x),
            Node::Sqrt(a) => Expr::sqrt(a.conj()),
            Node::Exp(a) => Expr::exp(a.conj()),
            Node::Log(a) => Expr::log(a.conj()),
            Node::Sin(a) => Expr::sin(a.conj()),
            Node::Cos(a) => Expr::cos(a.conj()),
            // real valued
            Node::Im(_) | Node::Re(_) | Node::Abs2(_) => self.clone(),
        }
    }

    /// Partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(u) => {
                if *u == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => a.diff(v) + b.diff(v),
            Node::Sub(a, b) => a.diff(v) - b.diff(v),
            Node::Mul(a, b) => a.diff(v) * b.clone() + a.clone() * b.diff(v),
            Node::Div(a, b) => {
                let (da, db) = (a.diff(v), b.diff(v));
                if db.is_const(0.0) {
                    da / b.clone()
                } else {
                    (da * b.clone() - a.clone() * db) / Expr::powr(b.clone(), 2.0)
                }
            }
            Node::Neg(a) => -a.diff(v),
            Node::PowR(a, x) => Expr::real(*x) * Expr::powr(a.clone(), x - 1.0) * a.diff(v),
            Node::Sqrt(a) => a.diff(v) / (Expr::real(2.0) * self.clone()),
            Node::Exp(a) => self.clone() * a.diff(v),
            Node::Log(a) => a.diff(v) / a.clone(),
            Node::Sin(a) => Expr::cos(a.clone()) * a.diff(v),
            Node::Cos(a) => -(Expr::sin(a.clone()) * a.diff(v)),
            // ∂v ū = conj(∂v̄ u)
            Node::Re(a) => {
                if v.is_real() {
                    Expr::re(a.diff(v))
                } else {
                    (a.diff(v) + a.diff(v.conj()).conj()) / 2.0
                }
            }
            Node::Im(a) => {
                if v.is_real() {
                    Expr::im(a.diff(v))
                } else {
                    (a.diff(v) - a.diff(v.conj()).conj()) / (Expr::i() * 2.0)
                }
            }
            Node::Abs2(a) => a.diff(v) * a.conj() + a.clone() * a.diff(v.conj()).conj(),
        }
    }

    pub fn d_z(&self) -> Expr {
        self.diff(Var::Z)
    }

    pub fn d_zb(&self) -> Expr {
        self.diff(Var::Zb)
    }

    pub fn d_t(&self) -> Expr {
        self.diff(Var::T)
    }

    /// Applies one of the fields `Z`, `Z̄`, `T`; the expression must live in
    /// the Heisenberg variables.
    pub fn apply_field(&self, field: Field) -> Result<Expr> {
        if !self.uses_only(&[Var::Z, Var::Zb, Var::T]) {
            return Err(Error::VariableMismatch);
        }
        let i = Expr::i();
        Ok(match field {
            Field::Z => self.d_z() + i * Expr::var(Var::Zb) * self.d_t(),
            Field::Zbar => self.d_zb() - i * Expr::var(Var::Z) * self.d_t(),
            Field::T => self.d_t(),
        })
    }
}

impl Var {
    fn is_real(self) -> bool {
        !matches!(self, Var::Z | Var::Zb)
    }
}
