//! Immutable complex-valued expression trees over the Heisenberg variables
//! `z`, `zb`, `t` and the real foliation parameters `s`, `p1`, `p2`.
//!
//! `z` and `zb` are independent symbols; a [`Binding`] ties them together at
//! evaluation time. Derivatives are symbolic, see [`Expr::diff`].

mod diff;
mod eval;
mod parse;

pub use diff::Field;
pub use eval::{Binding, Evaluation, Program};
pub use parse::parse;

use num_complex::Complex64;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Z,
    Zb,
    T,
    S,
    P1,
    P2,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::Z, Var::Zb, Var::T, Var::S, Var::P1, Var::P2];

    pub fn name(self) -> &'static str {
        match self {
            Var::Z => "z",
            Var::Zb => "zb",
            Var::T => "t",
            Var::S => "s",
            Var::P1 => "p1",
            Var::P2 => "p2",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// The variable whose value is the conjugate of this one.
    pub fn conj(self) -> Var {
        match self {
            Var::Z => Var::Zb,
            Var::Zb => Var::Z,
            v => v,
        }
    }

    pub fn is_heisenberg(self) -> bool {
        matches!(self, Var::Z | Var::Zb | Var::T)
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Const(Complex64),
    Var(Var),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    /// Power with a real literal exponent.
    PowR(Expr, f64),
    Sqrt(Expr),
    Exp(Expr),
    Log(Expr),
    Sin(Expr),
    Cos(Expr),
    Im(Expr),
    Re(Expr),
    /// `u · conj(u)`.
    Abs2(Expr),
}

struct Inner {
    node: Node,
    hash: u64,
}

/// Shared handle to an immutable expression node.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Expr {
    fn from_node(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        std::mem::discriminant(&node).hash(&mut h);
        match &node {
            Node::Const(c) => {
                // normalise -0.0 so that equal constants hash equally
                (c.re + 0.0).to_bits().hash(&mut h);
                (c.im + 0.0).to_bits().hash(&mut h);
            }
            Node::Var(v) => v.hash(&mut h),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
            }
            Node::PowR(a, e) => {
                a.0.hash.hash(&mut h);
                e.to_bits().hash(&mut h);
            }
            Node::Neg(a)
            | Node::Sqrt(a)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Im(a)
            | Node::Re(a)
            | Node::Abs2(a) => a.0.hash.hash(&mut h),
        }
        Expr(Arc::new(Inner { node, hash: h.finish() }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn constant(c: Complex64) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn real(x: f64) -> Expr {
        Expr::constant(c64(x, 0.0))
    }

    pub fn zero() -> Expr {
        Expr::real(0.0)
    }

    pub fn one() -> Expr {
        Expr::real(1.0)
    }

    pub fn i() -> Expr {
        Expr::constant(c64(0.0, 1.0))
    }

    pub fn var(v: Var) -> Expr {
        Expr::from_node(Node::Var(v))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, x: f64) -> bool {
        self.as_const() == Some(c64(x, 0.0))
    }

    fn fold1(u: &Expr, node: impl FnOnce(Expr) -> Node) -> Expr {
        let e = Expr::from_node(node(u.clone()));
        if u.as_const().is_some() {
            if let Ok(c) = eval::eval_tree(&e, &[None; 6], &mut false) {
                return Expr::constant(c);
            }
        }
        e
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            _ if a.is_const(0.0) => b,
            _ if b.is_const(0.0) => a,
            _ => Expr::from_node(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            _ if b.is_const(0.0) => a,
            _ if a.is_const(0.0) => Expr::neg(b),
            _ => Expr::from_node(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            _ if a.is_const(0.0) || b.is_const(0.0) => Expr::zero(),
            _ if a.is_const(1.0) => b,
            _ if b.is_const(1.0) => a,
            _ if a.is_const(-1.0) => Expr::neg(b),
            _ if b.is_const(-1.0) => Expr::neg(a),
            _ => Expr::from_node(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y.norm() >= 1e-300 => Expr::constant(x / y),
            _ if b.is_const(1.0) => a,
            _ if a.is_const(0.0) => Expr::zero(),
            _ => Expr::from_node(Node::Div(a, b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        if let Some(x) = a.as_const() {
            return Expr::constant(-x);
        }
        if let Node::Neg(inner) = a.node() {
            return inner.clone();
        }
        Expr::from_node(Node::Neg(a))
    }

    pub fn powr(base: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return base;
        }
        Expr::fold1(&base, |u| Node::PowR(u, exponent))
    }

    pub fn sqrt(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Sqrt)
    }

    pub fn exp(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Exp)
    }

    pub fn log(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Log)
    }

    pub fn sin(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Sin)
    }

    pub fn cos(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Cos)
    }

    pub fn re(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Re)
    }

    pub fn im(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Im)
    }

    pub fn abs2(u: Expr) -> Expr {
        Expr::fold1(&u, Node::Abs2)
    }

    /// Bitmask of the variables occurring in the expression.
    pub fn var_mask(&self) -> u8 {
        fn walk(e: &Expr, mask: &mut u8) {
            match e.node() {
                Node::Const(_) => {}
                Node::Var(v) => *mask |= 1 << v.index(),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, mask);
                    walk(b, mask);
                }
                Node::PowR(a, _)
                | Node::Neg(a)
                | Node::Sqrt(a)
                | Node::Exp(a)
                | Node::Log(a)
                | Node::Sin(a)
                | Node::Cos(a)
                | Node::Im(a)
                | Node::Re(a)
                | Node::Abs2(a) => walk(a, mask),
            }
        }
        let mut m = 0;
        walk(self, &mut m);
        m
    }

    pub fn vars(&self) -> Vec<Var> {
        let m = self.var_mask();
        Var::ALL.into_iter().filter(|v| m & (1 << v.index()) != 0).collect()
    }

    pub fn uses_only(&self, allowed: &[Var]) -> bool {
        let allowed_mask = allowed.iter().fold(0u8, |m, v| m | (1 << v.index()));
        self.var_mask() & !allowed_mask == 0
    }

    /// Number of nodes in the tree, counting shared subtrees once per use.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.size() + b.size()
            }
            Node::PowR(a, _)
            | Node::Neg(a)
            | Node::Sqrt(a)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Im(a)
            | Node::Re(a)
            | Node::Abs2(a) => 1 + a.size(),
        }
    }

    pub fn eval(&self, b: &Binding) -> crate::Result<Complex64> {
        Ok(self.eval_checked(b)?.value)
    }

    /// Evaluates and also reports whether a branch cut was touched.
    pub fn eval_checked(&self, b: &Binding) -> crate::Result<Evaluation> {
        b.validate()?;
        for v in self.vars() {
            if b.get(v).is_none() {
                return Err(crate::Error::UnboundVariable(v.name()));
            }
        }
        let mut branch_cut = false;
        let value = eval::eval_tree(self, b.values(), &mut branch_cut)?;
        Ok(Evaluation { value, branch_cut })
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Add(a, b), Node::Add(c, d))
            | (Node::Sub(a, b), Node::Sub(c, d))
            | (Node::Mul(a, b), Node::Mul(c, d))
            | (Node::Div(a, b), Node::Div(c, d)) => a == c && b == d,
            (Node::PowR(a, x), Node::PowR(b, y)) => x.to_bits() == y.to_bits() && a == b,
            (Node::Neg(a), Node::Neg(b))
            | (Node::Sqrt(a), Node::Sqrt(b))
            | (Node::Exp(a), Node::Exp(b))
            | (Node::Log(a), Node::Log(b))
            | (Node::Sin(a), Node::Sin(b))
            | (Node::Cos(a), Node::Cos(b))
            | (Node::Im(a), Node::Im(b))
            | (Node::Re(a), Node::Re(b))
            | (Node::Abs2(a), Node::Abs2(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn fmt_real(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{:?})", -x)
    } else {
        write!(f, "{x:?}")
    }
}

/// Prints in the parser's own grammar; every compound subexpression is
/// parenthesised so the output re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let func = |f: &mut fmt::Formatter<'_>, name: &str, a: &Expr| write!(f, "{name}({a})");
        match self.node() {
            Node::Const(c) => {
                if c.im == 0.0 {
                    fmt_real(c.re, f)
                } else if c.re == 0.0 {
                    f.write_str("(")?;
                    fmt_real(c.im, f)?;
                    f.write_str("*i)")
                } else {
                    f.write_str("(")?;
                    fmt_real(c.re, f)?;
                    f.write_str(" + ")?;
                    fmt_real(c.im, f)?;
                    f.write_str("*i)")
                }
            }
            Node::Var(v) => f.write_str(v.name()),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::PowR(a, e) => {
                write!(f, "({a})^")?;
                if *e < 0.0 {
                    write!(f, "(-{:?})", -e)
                } else {
                    write!(f, "({e:?})")
                }
            }
            Node::Sqrt(a) => func(f, "sqrt", a),
            Node::Exp(a) => func(f, "exp", a),
            Node::Log(a) => func(f, "log", a),
            Node::Sin(a) => func(f, "sin", a),
            Node::Cos(a) => func(f, "cos", a),
            Node::Im(a) => func(f, "im", a),
            Node::Re(a) => func(f, "re", a),
            Node::Abs2(a) => func(f, "abs2", a),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self, Expr::real(rhs))
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self.clone())
    }
}

impl std::str::FromStr for Expr {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Expr> {
        parse(s)
    }
}
