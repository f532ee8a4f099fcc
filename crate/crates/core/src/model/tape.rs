//! Flattened expression with shared subexpressions and reverse-mode gradients.
//!
//! Compiling once and sweeping a flat op list is much cheaper than walking
//! the tree with sparse tangents when the same expression is differentiated
//! thousands of times, as in local refinement. Whenever the sweep meets
//! anything unusual (non-finite values, a domain or singularity condition)
//! the tree methods are re-run so that errors and edge cases match them
//! exactly.

use std::collections::HashMap;

use super::expr::{Exponent, ScalarExpr};
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Sum(Vec<u32>),
    Product(Vec<u32>),
    Pow(u32, Exponent),
    Exp(u32),
    Affine(f64, f64, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(usize),
    Sum(Vec<u32>),
    Product(Vec<u32>),
    Pow(u32, u32, u32),
    Exp(u32),
    Affine(u64, u64, u32),
}

/// Compiled form of a [`ScalarExpr`].
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    source: ScalarExpr,
    max_var: Option<usize>,
}

struct Builder {
    ops: Vec<Op>,
    index: HashMap<Key, u32>,
}

impl Builder {
    fn intern(&mut self, key: Key, op: Op) -> u32 {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.index.insert(key, id);
        id
    }

    fn add(&mut self, e: &ScalarExpr) -> u32 {
        match e {
            ScalarExpr::Const(c) => self.intern(Key::Const(c.to_bits()), Op::Const(*c)),
            ScalarExpr::Var(i) => self.intern(Key::Var(*i), Op::Var(*i)),
            ScalarExpr::Sum(c) => {
                let ids: Vec<u32> = c.iter().map(|x| self.add(x)).collect();
                self.intern(Key::Sum(ids.clone()), Op::Sum(ids))
            }
            ScalarExpr::Product(c) => {
                let ids: Vec<u32> = c.iter().map(|x| self.add(x)).collect();
                self.intern(Key::Product(ids.clone()), Op::Product(ids))
            }
            ScalarExpr::Pow { base, exp } => {
                let b = self.add(base);
                self.intern(Key::Pow(b, exp.num, exp.den), Op::Pow(b, *exp))
            }
            ScalarExpr::Exp(inner) => {
                let a = self.add(inner);
                self.intern(Key::Exp(a), Op::Exp(a))
            }
            ScalarExpr::Affine { scale, shift, inner } => {
                let a = self.add(inner);
                self.intern(
                    Key::Affine(scale.to_bits(), shift.to_bits(), a),
                    Op::Affine(*scale, *shift, a),
                )
            }
        }
    }
}

impl Tape {
    pub fn compile(expr: &ScalarExpr) -> Self {
        let mut b = Builder {
            ops: Vec::new(),
            index: HashMap::new(),
        };
        b.add(expr);
        let max_var = b
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(*i),
                _ => None,
            })
            .max();
        Tape {
            ops: b.ops,
            source: expr.clone(),
            max_var,
        }
    }

    /// Number of distinct nodes after sharing.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn source(&self) -> &ScalarExpr {
        &self.source
    }

    /// Forward sweep; `None` when any value is non-finite or a fractional
    /// power sees a negative base.
    fn forward(&self, x: &[f64], vals: &mut Vec<f64>) -> Option<f64> {
        if self.max_var.is_some_and(|m| m >= x.len()) {
            return None;
        }
        vals.clear();
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => x[*i],
                Op::Sum(c) => c.iter().map(|&k| vals[k as usize]).sum(),
                Op::Product(c) => c.iter().map(|&k| vals[k as usize]).product(),
                Op::Pow(b, e) => {
                    let b = vals[*b as usize];
                    if e.is_integer() {
                        b.powi(e.num as i32)
                    } else if b < 0.0 {
                        return None;
                    } else {
                        b.powf(e.value())
                    }
                }
                Op::Exp(a) => vals[*a as usize].exp(),
                Op::Affine(s, t, a) => s * vals[*a as usize] + t,
            };
            if !v.is_finite() {
                return None;
            }
            vals.push(v);
        }
        vals.last().copied()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ModelError> {
        let mut vals = Vec::with_capacity(self.ops.len());
        match self.forward(x, &mut vals) {
            Some(v) => Ok(v),
            None => self.source.evaluate(x),
        }
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let mut vals = Vec::with_capacity(self.ops.len());
        let Some(value) = self.forward(x, &mut vals) else {
            return self.source.value_and_gradient(x);
        };
        let mut adj = vec![0.0; self.ops.len()];
        let mut grad = vec![0.0; x.len()];
        *adj.last_mut().expect("non-empty tape") = 1.0;
        let mut scratch = Vec::new();
        for (id, op) in self.ops.iter().enumerate().rev() {
            let a = adj[id];
            if a == 0.0 {
                continue;
            }
            match op {
                Op::Const(_) => {}
                Op::Var(i) => grad[*i] += a,
                Op::Sum(c) => {
                    for &k in c {
                        adj[k as usize] += a;
                    }
                }
                Op::Product(c) => {
                    // prefix/suffix products keep exact zeros well-behaved
                    let n = c.len();
                    scratch.clear();
                    scratch.resize(n + 1, 1.0);
                    for i in (0..n).rev() {
                        scratch[i] = scratch[i + 1] * vals[c[i] as usize];
                    }
                    let mut prefix = 1.0;
                    for i in 0..n {
                        adj[c[i] as usize] += a * prefix * scratch[i + 1];
                        prefix *= vals[c[i] as usize];
                    }
                }
                Op::Pow(b, e) => {
                    let bv = vals[*b as usize];
                    let slope = if e.num == 0 {
                        0.0
                    } else if e.is_integer() {
                        e.num as f64 * bv.powi(e.num as i32 - 1)
                    } else if bv == 0.0 {
                        // singular or zero slope: let the tree decide
                        return self.source.value_and_gradient(x);
                    } else {
                        e.value() * bv.powf(e.value() - 1.0)
                    };
                    adj[*b as usize] += a * slope;
                }
                Op::Exp(k) => adj[*k as usize] += a * vals[id],
                Op::Affine(s, _, k) => adj[*k as usize] += a * s,
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return self.source.value_and_gradient(x);
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> ScalarExpr {
        ScalarExpr::var(i)
    }

    #[test]
    fn shares_repeated_subtrees() {
        let g = x(0) * x(1) + ScalarExpr::constant(1.0);
        let e = g.clone().scaled(2.0) + g.clone().powi(2);
        let t = Tape::compile(&e);
        let tree_nodes = e.node_count();
        assert!(t.len() < tree_nodes, "{} vs {}", t.len(), tree_nodes);
        let pt = [0.3, -1.7];
        let (v, gr) = t.value_and_gradient(&pt).unwrap();
        let (v2, gr2) = e.value_and_gradient(&pt).unwrap();
        assert!((v - v2).abs() < 1e-14);
        for (a, b) in gr.iter().zip(&gr2) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn product_with_zero_factor() {
        let e = ScalarExpr::product(vec![x(0), x(1), x(2)]);
        let t = Tape::compile(&e);
        let (_, g) = t.value_and_gradient(&[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, vec![6.0, 0.0, 0.0]);
    }

    #[test]
    fn errors_match_tree() {
        let e = x(0).pow(Exponent::ratio(1, 2).unwrap());
        let t = Tape::compile(&e);
        assert_eq!(t.value_and_gradient(&[0.0]), e.value_and_gradient(&[0.0]));
        assert_eq!(t.evaluate(&[-1.0]), e.evaluate(&[-1.0]));
        let big = x(0).exp().exp();
        assert_eq!(Tape::compile(&big).evaluate(&[10.0]), big.evaluate(&[10.0]));
        assert!(Tape::compile(&x(3)).evaluate(&[1.0]).is_err());
    }
}
