use super::{Expr, Node, Var};
use crate::{Error, HPoint, Result};
use num_complex::Complex64;
use std::collections::HashMap;

const DIV_FLOOR: f64 = 1e-300;

/// Values for the free variables of an expression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Binding {
    vals: [Option<Complex64>; 6],
}

/// Result of an evaluation together with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    /// A `log`, `sqrt` or non-integer power was evaluated on the negative real axis.
    pub branch_cut: bool,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `z`, `zb = conj(z)` and `t` from a point of ℍ.
    pub fn heis(p: HPoint) -> Self {
        Binding::new().with(Var::Z, p.z).with(Var::Zb, p.z.conj()).with_real(Var::T, p.t)
    }

    /// Binds `z` and `zb` only; used for expressions in the plane.
    pub fn plane(w: Complex64) -> Self {
        Binding::new().with(Var::Z, w).with(Var::Zb, w.conj())
    }

    pub fn params(s: f64, p1: f64, p2: f64) -> Self {
        Binding::new().with_real(Var::S, s).with_real(Var::P1, p1).with_real(Var::P2, p2)
    }

    pub fn with(mut self, v: Var, value: Complex64) -> Self {
        self.vals[v.index()] = Some(value);
        self
    }

    pub fn with_real(self, v: Var, value: f64) -> Self {
        self.with(v, Complex64::new(value, 0.0))
    }

    pub fn get(&self, v: Var) -> Option<Complex64> {
        self.vals[v.index()]
    }

    pub(crate) fn values(&self) -> &[Option<Complex64>; 6] {
        &self.vals
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.vals.iter().flatten() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        if let (Some(z), Some(zb)) = (self.get(Var::Z), self.get(Var::Zb)) {
            if (zb - z.conj()).norm() > 1e-12 * (1.0 + z.norm()) {
                return Err(Error::InconsistentBinding);
            }
        }
        Ok(())
    }
}

fn on_negative_axis(u: Complex64) -> bool {
    u.im == 0.0 && u.re < 0.0
}

fn finite(c: Complex64) -> Result<Complex64> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(c)
    } else {
        Err(Error::NonFinite)
    }
}

pub(crate) fn div(a: Complex64, b: Complex64) -> Result<Complex64> {
    if b.norm() < DIV_FLOOR {
        return Err(Error::DivisionNearZero);
    }
    finite(a / b)
}

pub(crate) fn powr(u: Complex64, a: f64, cut: &mut bool) -> Result<Complex64> {
    if u.re == 0.0 && u.im == 0.0 {
        return if a > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::DivisionNearZero)
        };
    }
    if u.im == 0.0 && u.re > 0.0 {
        return finite(Complex64::new(u.re.powf(a), 0.0));
    }
    if a.fract() == 0.0 && a.abs() <= 64.0 {
        return finite(u.powi(a as i32));
    }
    *cut |= on_negative_axis(u);
    finite((u.ln() * a).exp())
}

fn unary(node: &Node, u: Complex64, cut: &mut bool) -> Result<Complex64> {
    let v = match node {
        Node::Neg(_) => -u,
        Node::PowR(_, a) => return powr(u, *a, cut),
        Node::Sqrt(_) => {
            *cut |= on_negative_axis(u);
            u.sqrt()
        }
        Node::Exp(_) => u.exp(),
        Node::Log(_) => {
            if u.norm() < DIV_FLOOR {
                return Err(Error::DivisionNearZero);
            }
            *cut |= on_negative_axis(u);
            u.ln()
        }
        Node::Sin(_) => u.sin(),
        Node::Cos(_) => u.cos(),
        Node::Im(_) => Complex64::new(u.im, 0.0),
        Node::Re(_) => Complex64::new(u.re, 0.0),
        Node::Abs2(_) => Complex64::new(u.norm_sqr(), 0.0),
        _ => unreachable!("not a unary node"),
    };
    finite(v)
}

pub(crate) fn eval_tree(e: &Expr, vals: &[Option<Complex64>; 6], cut: &mut bool) -> Result<Complex64> {
    match e.node() {
        Node::Const(c) => Ok(*c),
        Node::Var(v) => vals[v.index()].ok_or(Error::UnboundVariable(v.name())),
        Node::Add(a, b) => finite(eval_tree(a, vals, cut)? + eval_tree(b, vals, cut)?),
        Node::Sub(a, b) => finite(eval_tree(a, vals, cut)? - eval_tree(b, vals, cut)?),
        Node::Mul(a, b) => finite(eval_tree(a, vals, cut)? * eval_tree(b, vals, cut)?),
        Node::Div(a, b) => div(eval_tree(a, vals, cut)?, eval_tree(b, vals, cut)?),
        n @ (Node::Neg(a)
        | Node::PowR(a, _)
        | Node::Sqrt(a)
        | Node::Exp(a)
        | Node::Log(a)
        | Node::Sin(a)
        | Node::Cos(a)
        | Node::Im(a)
        | Node::Re(a)
        | Node::Abs2(a)) => unary(n, eval_tree(a, vals, cut)?, cut),
    }
}

#[derive(Debug, Clone)]
enum Op {
    Const(Complex64),
    Var(usize),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    PowR(u32, f64),
    Sqrt(u32),
    Exp(u32),
    Log(u32),
    Sin(u32),
    Cos(u32),
    Im(u32),
    Re(u32),
    Abs2(u32),
}

/// Several expressions flattened into one straight-line program with shared
/// subexpressions evaluated once.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    outputs: Vec<u32>,
    var_mask: u8,
}

impl Program {
    pub fn compile(exprs: &[&Expr]) -> Program {
        let mut ops = Vec::new();
        let mut seen: HashMap<Expr, u32> = HashMap::new();
        let outputs = exprs.iter().map(|e| emit(e, &mut ops, &mut seen)).collect();
        let var_mask = exprs.iter().fold(0, |m, e| m | e.var_mask());
        Program { ops, outputs, var_mask }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every output into `out`. Unbound variables used by the
    /// program are reported as errors; the `z`/`zb` consistency check is
    /// left to the caller.
    pub fn eval_into(&self, vals: &[Option<Complex64>; 6], out: &mut [Complex64]) -> Result<()> {
        for v in Var::ALL {
            if self.var_mask & (1 << v.index()) != 0 && vals[v.index()].is_none() {
                return Err(Error::UnboundVariable(v.name()));
            }
        }
        let mut regs: Vec<Complex64> = Vec::with_capacity(self.ops.len());
        let mut cut = false;
        for op in &self.ops {
            let r = |i: &u32| regs[*i as usize];
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => vals[*i].unwrap_or_default(),
                Op::Add(a, b) => finite(r(a) + r(b))?,
                Op::Sub(a, b) => finite(r(a) - r(b))?,
                Op::Mul(a, b) => finite(r(a) * r(b))?,
                Op::Div(a, b) => div(r(a), r(b))?,
                Op::Neg(a) => -r(a),
                Op::PowR(a, x) => powr(r(a), *x, &mut cut)?,
                Op::Sqrt(a) => r(a).sqrt(),
                Op::Exp(a) => finite(r(a).exp())?,
                Op::Log(a) => {
                    if r(a).norm() < DIV_FLOOR {
                        return Err(Error::DivisionNearZero);
                    }
                    r(a).ln()
                }
                Op::Sin(a) => finite(r(a).sin())?,
                Op::Cos(a) => finite(r(a).cos())?,
                Op::Im(a) => Complex64::new(r(a).im, 0.0),
                Op::Re(a) => Complex64::new(r(a).re, 0.0),
                Op::Abs2(a) => finite(Complex64::new(r(a).norm_sqr(), 0.0))?,
            };
            regs.push(v);
        }
        for (slot, &o) in out.iter_mut().zip(&self.outputs) {
            *slot = regs[o as usize];
        }
        Ok(())
    }

    pub fn eval(&self, b: &Binding) -> Result<Vec<Complex64>> {
        b.validate()?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.outputs.len()];
        self.eval_into(b.values(), &mut out)?;
        Ok(out)
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>, seen: &mut HashMap<Expr, u32>) -> u32 {
    if let Some(&i) = seen.get(e) {
        return i;
    }
    let op = match e.node() {
        Node::Const(c) => Op::Const(*c),
        Node::Var(v) => Op::Var(v.index()),
        Node::Add(a, b) => Op::Add(emit(a, ops, seen), emit(b, ops, seen)),
        Node::Sub(a, b) => Op::Sub(emit(a, ops, seen), emit(b, ops, seen)),
        Node::Mul(a, b) => Op::Mul(emit(a, ops, seen), emit(b, ops, seen)),
        Node::Div(a, b) => Op::Div(emit(a, ops, seen), emit(b, ops, seen)),
        Node::Neg(a) => Op::Neg(emit(a, ops, seen)),
        Node::PowR(a, x) => Op::PowR(emit(a, ops, seen), *x),
        Node::Sqrt(a) => Op::Sqrt(emit(a, ops, seen)),
        Node::Exp(a) => Op::Exp(emit(a, ops, seen)),
        Node::Log(a) => Op::Log(emit(a, ops, seen)),
        Node::Sin(a) => Op::Sin(emit(a, ops, seen)),
        Node::Cos(a) => Op::Cos(emit(a, ops, seen)),
        Node::Im(a) => Op::Im(emit(a, ops, seen)),
        Node::Re(a) => Op::Re(emit(a, ops, seen)),
        Node::Abs2(a) => Op::Abs2(emit(a, ops, seen)),
    };
    let idx = ops.len() as u32;
    ops.push(op);
    seen.insert(e.clone(), idx);
    idx
}
