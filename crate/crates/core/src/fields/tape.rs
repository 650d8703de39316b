//! Compiled evaluation of many expressions at once.
//!
//! Roots are flattened into one instruction list with structurally identical
//! subtrees merged, so the dozens of metric derivatives that share factors are
//! evaluated once per point.

use std::collections::HashMap;

use super::expr::{Func, Node, ScalarExpr};
use crate::error::FieldError;
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Pow(u32, i32),
    Call(Func, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(usize),
    Bin(u8, u32, u32),
    Neg(u32),
    Pow(u32, i32),
    Call(Func, u32),
}

#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
}

impl Tape {
    pub fn compile(roots: &[ScalarExpr]) -> Tape {
        let mut b = Builder { ops: Vec::new(), by_key: HashMap::new(), by_ptr: HashMap::new() };
        let outputs = roots.iter().map(|r| b.visit(r)).collect();
        Tape { ops: b.ops, outputs }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every root at `x`, writing them into `out` in root order.
    pub fn eval_into<T: Real>(&self, x: &[T], out: &mut Vec<T>) -> Result<(), FieldError> {
        let mut reg: Vec<T> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => T::cst(c),
                Op::Var(i) => *x.get(i).ok_or(FieldError::BadAxis { axis: i, dim: x.len() })?,
                Op::Add(a, b) => reg[a as usize] + reg[b as usize],
                Op::Sub(a, b) => reg[a as usize] - reg[b as usize],
                Op::Mul(a, b) => reg[a as usize] * reg[b as usize],
                Op::Div(a, b) => {
                    let den = reg[b as usize];
                    if den.value() == 0.0 {
                        return Err(FieldError::Domain { op: "division", value: 0.0 });
                    }
                    reg[a as usize] / den
                }
                Op::Neg(a) => -reg[a as usize],
                Op::Pow(a, n) => {
                    let base = reg[a as usize];
                    if n < 0 && base.value() == 0.0 {
                        return Err(FieldError::Domain { op: "negative power", value: 0.0 });
                    }
                    base.powi(n)
                }
                Op::Call(f, a) => f.apply(reg[a as usize])?,
            };
            reg.push(v);
        }
        out.clear();
        for &o in &self.outputs {
            let v = reg[o as usize];
            if !v.is_finite() {
                return Err(FieldError::Domain { op: "overflow", value: v.value() });
            }
            out.push(v);
        }
        Ok(())
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>, FieldError> {
        let mut out = Vec::with_capacity(self.outputs.len());
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

struct Builder {
    ops: Vec<Op>,
    by_key: HashMap<Key, u32>,
    by_ptr: HashMap<*const Node, u32>,
}

impl Builder {
    fn intern(&mut self, key: Key, op: Op) -> u32 {
        if let Some(&id) = self.by_key.get(&key) {
            return id;
        }
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.by_key.insert(key, id);
        id
    }

    fn visit(&mut self, e: &ScalarExpr) -> u32 {
        if let Some(&id) = self.by_ptr.get(&e.ptr()) {
            return id;
        }
        let id = match e.node() {
            Node::Const(c) => self.intern(Key::Const(c.to_bits()), Op::Const(*c)),
            Node::Var(i) => self.intern(Key::Var(*i), Op::Var(*i)),
            Node::Add(a, b) => {
                let (a, b) = (self.visit(a), self.visit(b));
                // commutative: canonical operand order improves sharing
                let (x, y) = (a.min(b), a.max(b));
                self.intern(Key::Bin(0, x, y), Op::Add(x, y))
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.visit(a), self.visit(b));
                self.intern(Key::Bin(1, a, b), Op::Sub(a, b))
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.visit(a), self.visit(b));
                let (x, y) = (a.min(b), a.max(b));
                self.intern(Key::Bin(2, x, y), Op::Mul(x, y))
            }
            Node::Div(a, b) => {
                let (a, b) = (self.visit(a), self.visit(b));
                self.intern(Key::Bin(3, a, b), Op::Div(a, b))
            }
            Node::Neg(a) => {
                let a = self.visit(a);
                self.intern(Key::Neg(a), Op::Neg(a))
            }
            Node::Pow(a, n) => {
                let a = self.visit(a);
                self.intern(Key::Pow(a, *n), Op::Pow(a, *n))
            }
            Node::Call(f, a) => {
                let a = self.visit(a);
                self.intern(Key::Call(*f, a), Op::Call(*f, a))
            }
        };
        self.by_ptr.insert(e.ptr(), id);
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::expr::norm_squared;
    use crate::real::Grad;

    #[test]
    fn tape_matches_tree_and_shares_subtrees() {
        let f = 4.0 / (1.0 + norm_squared(3)).powi(2);
        let roots: Vec<_> = (0..3).map(|i| f.diff(i)).chain([f.clone()]).collect();
        let tape = Tape::compile(&roots);
        let tree_nodes: usize = roots.iter().map(|r| r.size()).sum();
        assert!(tape.len() < tree_nodes);
        let p = [0.1, -0.4, 0.7];
        let vals = tape.eval(&p).unwrap();
        for (r, v) in roots.iter().zip(&vals) {
            assert_eq!(r.eval(&p).unwrap(), *v);
        }
    }

    #[test]
    fn grad_evaluation_gives_next_derivative() {
        let f = (ScalarExpr::var(0) * ScalarExpr::var(1)).sin();
        let tape = Tape::compile(&[f.diff(0)]);
        let p = Grad::seed(&[0.3, 0.8]);
        let v = tape.eval(&p).unwrap()[0];
        let dxx = f.diff(0).diff(0).eval(&[0.3, 0.8]).unwrap();
        let dxy = f.diff(0).diff(1).eval(&[0.3, 0.8]).unwrap();
        assert!((v.dx(0) - dxx).abs() < 1e-14);
        assert!((v.dx(1) - dxy).abs() < 1e-14);
    }

    #[test]
    fn domain_errors_surface() {
        let tape = Tape::compile(&[1.0 / ScalarExpr::var(0)]);
        assert!(tape.eval(&[0.0]).is_err());
    }
}
