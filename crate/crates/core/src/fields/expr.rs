use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::FieldError;
use crate::real::Real;

/// Elementary functions available in the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }

    /// Applies the function, reporting domain violations.
    pub(crate) fn apply<T: Real>(self, a: T) -> Result<T, FieldError> {
        let v = a.value();
        match self {
            Func::Sqrt if v < 0.0 => Err(FieldError::Domain { op: "sqrt", value: v }),
            Func::Sqrt if v == 0.0 => Ok(T::zero()),
            Func::Ln if v <= 0.0 => Err(FieldError::Domain { op: "log", value: v }),
            Func::Sqrt => Ok(a.sqrt()),
            Func::Exp => Ok(a.exp()),
            Func::Ln => Ok(a.ln()),
            Func::Sin => Ok(a.sin()),
            Func::Cos => Ok(a.cos()),
            Func::Sinh => Ok(a.sinh()),
            Func::Cosh => Ok(a.cosh()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Coordinate `x^(i+1)`; index is zero based.
    Var(usize),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    Pow(ScalarExpr, i32),
    Call(Func, ScalarExpr),
}

/// Immutable closed-form scalar field on a coordinate box.
#[derive(Clone)]
pub struct ScalarExpr(Arc<Node>);

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({self})")
    }
}

impl ScalarExpr {
    fn wrap(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::wrap(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The coordinate function for zero-based `axis`.
    pub fn var(axis: usize) -> Self {
        Self::wrap(Node::Var(axis))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(c) if c != 0.0 || n > 0 => Self::constant(c.powi(n)),
                _ => Self::wrap(Node::Pow(self.clone(), n)),
            },
        }
    }

    pub fn call(f: Func, a: &ScalarExpr) -> Self {
        if let Some(c) = a.as_const() {
            if let Ok(v) = f.apply(c) {
                if v.is_finite() {
                    return Self::constant(v);
                }
            }
        }
        Self::wrap(Node::Call(f, a.clone()))
    }

    pub fn sqrt(&self) -> Self {
        Self::call(Func::Sqrt, self)
    }
    pub fn exp(&self) -> Self {
        Self::call(Func::Exp, self)
    }
    pub fn ln(&self) -> Self {
        Self::call(Func::Ln, self)
    }
    pub fn sin(&self) -> Self {
        Self::call(Func::Sin, self)
    }
    pub fn cos(&self) -> Self {
        Self::call(Func::Cos, self)
    }
    pub fn sinh(&self) -> Self {
        Self::call(Func::Sinh, self)
    }
    pub fn cosh(&self) -> Self {
        Self::call(Func::Cosh, self)
    }

    /// Exact partial derivative along zero-based `axis`.
    pub fn diff(&self, axis: usize) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => Self::zero(),
            Node::Var(i) => Self::constant(if *i == axis { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff(axis) + b.diff(axis),
            Node::Sub(a, b) => a.diff(axis) - b.diff(axis),
            Node::Mul(a, b) => a.diff(axis) * b + a * &b.diff(axis),
            Node::Div(a, b) => {
                let da = a.diff(axis);
                let db = b.diff(axis);
                if db.is_zero() {
                    da / b
                } else {
                    (da * b - a * &db) / b.powi(2)
                }
            }
            Node::Neg(a) => -a.diff(axis),
            Node::Pow(a, n) => {
                Self::constant(*n as f64) * a.powi(n - 1) * a.diff(axis)
            }
            Node::Call(f, a) => {
                let da = a.diff(axis);
                if da.is_zero() {
                    return da;
                }
                let outer = match f {
                    Func::Sqrt => return da / (Self::constant(2.0) * self),
                    Func::Exp => self.clone(),
                    Func::Ln => return da / a,
                    Func::Sin => a.cos(),
                    Func::Cos => -a.sin(),
                    Func::Sinh => a.cosh(),
                    Func::Cosh => a.sinh(),
                };
                outer * da
            }
        }
    }

    /// Mixed partial along each axis of `axes` in turn.
    pub fn diff_many(&self, axes: &[usize]) -> ScalarExpr {
        axes.iter().fold(self.clone(), |e, &a| e.diff(a))
    }

    /// Replaces every coordinate `x^i` by `vars[i]`.
    pub fn substitute(&self, vars: &[ScalarExpr]) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => vars[*i].clone(),
            Node::Add(a, b) => a.substitute(vars) + b.substitute(vars),
            Node::Sub(a, b) => a.substitute(vars) - b.substitute(vars),
            Node::Mul(a, b) => a.substitute(vars) * b.substitute(vars),
            Node::Div(a, b) => a.substitute(vars) / b.substitute(vars),
            Node::Neg(a) => -a.substitute(vars),
            Node::Pow(a, n) => a.substitute(vars).powi(*n),
            Node::Call(f, a) => Self::call(*f, &a.substitute(vars)),
        }
    }

    /// Shifts every coordinate index by `offset` (pullback along a product projection).
    pub fn shift_vars(&self, offset: usize) -> ScalarExpr {
        let n = self.max_var().map_or(0, |m| m + 1);
        let vars: Vec<_> = (0..n).map(|i| Self::var(i + offset)).collect();
        self.substitute(&vars)
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_var(),
        }
    }

    /// Number of nodes in the tree (shared subtrees counted once per reference).
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.size() + b.size()
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.size(),
        }
    }

    /// Evaluates the tree at `x`.
    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T, FieldError> {
        let v = match self.node() {
            Node::Const(c) => T::cst(*c),
            Node::Var(i) => *x.get(*i).ok_or(FieldError::BadAxis { axis: *i, dim: x.len() })?,
            Node::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Node::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Node::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Node::Div(a, b) => {
                let den = b.eval(x)?;
                if den.value() == 0.0 {
                    return Err(FieldError::Domain { op: "division", value: 0.0 });
                }
                a.eval(x)? / den
            }
            Node::Neg(a) => -a.eval(x)?,
            Node::Pow(a, n) => {
                let base = a.eval(x)?;
                if *n < 0 && base.value() == 0.0 {
                    return Err(FieldError::Domain { op: "negative power", value: 0.0 });
                }
                base.powi(*n)
            }
            Node::Call(f, a) => f.apply(a.eval(x)?)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FieldError::Domain { op: "overflow", value: v.value() })
        }
    }

    /// Renders with custom variable names (the default uses `x1, x2, ...`).
    pub fn display_with<'a>(&'a self, names: &'a [&'a str]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 => 0,
            _ => 5,
        }
    }

    fn render(&self, f: &mut fmt::Formatter<'_>, names: &[&str]) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &ScalarExpr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "(")?;
                e.render(f, names)?;
                write!(f, ")")
            } else {
                e.render(f, names)
            }
        };
        match self.node() {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var(i) => match names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{}", i + 1),
            },
            Node::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Node::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Node::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Node::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, "/")?;
                child(f, b, 3)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 3)
            }
            Node::Pow(a, n) => {
                child(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.render(f, names)?;
                write!(f, ")")
            }
        }
    }
}

struct Named<'a> {
    expr: &'a ScalarExpr,
    names: &'a [&'a str],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.render(f, self.names)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.render(f, &[])
    }
}

impl From<f64> for ScalarExpr {
    fn from(c: f64) -> Self {
        ScalarExpr::constant(c)
    }
}

fn add(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x + y),
        (Some(x), _) if x == 0.0 => b.clone(),
        (_, Some(y)) if y == 0.0 => a.clone(),
        _ => ScalarExpr::wrap(Node::Add(a.clone(), b.clone())),
    }
}

fn sub(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a.clone(),
        _ => ScalarExpr::wrap(Node::Sub(a.clone(), b.clone())),
    }
}

fn mul(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarExpr::constant(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => ScalarExpr::zero(),
        (Some(x), _) if x == 1.0 => b.clone(),
        (_, Some(y)) if y == 1.0 => a.clone(),
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => ScalarExpr::wrap(Node::Mul(a.clone(), b.clone())),
    }
}

fn div(a: &ScalarExpr, b: &ScalarExpr) -> ScalarExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => ScalarExpr::constant(x / y),
        (Some(x), _) if x == 0.0 && b.as_const() != Some(0.0) => ScalarExpr::zero(),
        (_, Some(y)) if y == 1.0 => a.clone(),
        _ => ScalarExpr::wrap(Node::Div(a.clone(), b.clone())),
    }
}

fn neg(a: &ScalarExpr) -> ScalarExpr {
    match a.node() {
        Node::Const(c) => ScalarExpr::constant(-c),
        Node::Neg(inner) => inner.clone(),
        _ => ScalarExpr::wrap(Node::Neg(a.clone())),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $f:ident) => {
        impl $trait<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                $f(&self, &rhs)
            }
        }
        impl $trait<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                $f(&self, rhs)
            }
        }
        impl $trait<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                $f(self, &rhs)
            }
        }
        impl $trait<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                $f(self, rhs)
            }
        }
        impl $trait<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                $f(&self, &ScalarExpr::constant(rhs))
            }
        }
        impl $trait<f64> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                $f(self, &ScalarExpr::constant(rhs))
            }
        }
        impl $trait<ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                $f(&ScalarExpr::constant(self), &rhs)
            }
        }
        impl $trait<&ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                $f(&ScalarExpr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        neg(&self)
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        neg(self)
    }
}

/// `x1^2 + ... + xd^2`.
pub fn norm_squared(dim: usize) -> ScalarExpr {
    (0..dim).fold(ScalarExpr::zero(), |acc, i| acc + ScalarExpr::var(i).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> ScalarExpr {
        ScalarExpr::var(i)
    }

    #[test]
    fn product_rule_simplifies_to_other_factor() {
        let f = x(0) * x(1);
        assert_eq!(f.diff(0), x(1));
    }

    #[test]
    fn constant_derivative_is_zero() {
        assert!(ScalarExpr::constant(5.0).diff(0).is_zero());
    }

    #[test]
    fn round_metric_factor_is_critical_at_origin() {
        let f = 4.0 / (1.0 + norm_squared(3)).powi(2);
        let d = f.diff(0);
        assert_eq!(d.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        // away from the origin: d/dx1 4(1+r²)^-2 = -16 x1 (1+r²)^-3
        let p = [0.3, -0.2, 0.5];
        let r2: f64 = p.iter().map(|v| v * v).sum();
        let expect = -16.0 * p[0] / (1.0 + r2).powi(3);
        assert!((d.eval(&p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(x(0).sin().eval(&[0.0]).unwrap(), 0.0);
        let ball = 4.0 / (1.0 - norm_squared(3)).powi(2);
        assert_eq!(ball.eval(&[0.0, 0.0, 0.0]).unwrap(), 4.0);
        let inv = 1.0 / x(0);
        assert!(matches!(inv.eval(&[0.0]), Err(FieldError::Domain { .. })));
        assert!(matches!(x(0).ln().eval(&[-1.0]), Err(FieldError::Domain { .. })));
    }

    #[test]
    fn folding_identities() {
        assert_eq!(x(0) * 1.0, x(0));
        assert!((x(0) * 0.0).is_zero());
        assert_eq!(x(0) + 0.0, x(0));
        assert_eq!(-(-x(0)), x(0));
        assert_eq!(ScalarExpr::constant(0.0).exp(), ScalarExpr::one());
        assert_eq!((ScalarExpr::constant(2.0) * 3.0).as_const(), Some(6.0));
    }

    #[test]
    fn shift_vars_moves_indices() {
        let f = x(0) * x(1).sin();
        let g = f.shift_vars(2);
        assert_eq!(g.max_var(), Some(3));
        assert_eq!(g.eval(&[9.0, 9.0, 0.5, 0.7]).unwrap(), 0.5 * 0.7f64.sin());
    }
}
