//! Scalar expression trees with exact evaluation and forward-mode gradients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::ModelError;

/// Non-negative rational exponent `num / den` of a power node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exponent {
    pub num: u32,
    pub den: u32,
}

impl Exponent {
    pub fn integer(n: u32) -> Self {
        Self { num: n, den: 1 }
    }

    /// Builds `num / den` in lowest terms. Returns `None` for a zero denominator.
    pub fn ratio(num: u32, den: u32) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den);
        let g = if g == 0 { 1 } else { g };
        Some(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// A node of an expression tree over the variables `x[0..n]`.
///
/// The node set is closed under forward-mode differentiation and contains no
/// division or logarithm, so a tree is finite wherever its exponentials do
/// not overflow.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Const(f64),
    Var(usize),
    Sum(Vec<ScalarExpr>),
    Product(Vec<ScalarExpr>),
    Pow {
        base: Box<ScalarExpr>,
        exp: Exponent,
    },
    Exp(Box<ScalarExpr>),
    /// `scale * inner + shift`
    Affine {
        scale: f64,
        shift: f64,
        inner: Box<ScalarExpr>,
    },
}

/// Sparse gradient entry list, sorted by variable index with no duplicates.
pub(crate) type SparseGrad = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct Dual {
    pub value: f64,
    pub grad: SparseGrad,
}

impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        ScalarExpr::Const(c)
    }

    pub fn var(i: usize) -> Self {
        ScalarExpr::Var(i)
    }

    pub fn sum(terms: Vec<ScalarExpr>) -> Self {
        match terms.len() {
            0 => ScalarExpr::Const(0.0),
            1 => terms.into_iter().next().unwrap(),
            _ => ScalarExpr::Sum(terms),
        }
    }

    pub fn product(factors: Vec<ScalarExpr>) -> Self {
        match factors.len() {
            0 => ScalarExpr::Const(1.0),
            1 => factors.into_iter().next().unwrap(),
            _ => ScalarExpr::Product(factors),
        }
    }

    pub fn powi(self, n: u32) -> Self {
        ScalarExpr::Pow {
            base: Box::new(self),
            exp: Exponent::integer(n),
        }
    }

    pub fn pow(self, exp: Exponent) -> Self {
        ScalarExpr::Pow {
            base: Box::new(self),
            exp,
        }
    }

    pub fn exp(self) -> Self {
        ScalarExpr::Exp(Box::new(self))
    }

    pub fn affine(self, scale: f64, shift: f64) -> Self {
        ScalarExpr::Affine {
            scale,
            shift,
            inner: Box::new(self),
        }
    }

    pub fn scaled(self, scale: f64) -> Self {
        self.affine(scale, 0.0)
    }

    /// Largest variable index referenced plus one (0 for variable-free trees).
    pub fn arity(&self) -> usize {
        let mut max = 0;
        self.visit_vars(&mut |i| max = max.max(i + 1));
        max
    }

    /// Sorted, deduplicated list of referenced variable indices.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_vars(&mut |i| out.push(i));
        out.sort_unstable();
        out.dedup();
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(usize)) {
        match self {
            ScalarExpr::Const(_) => {}
            ScalarExpr::Var(i) => f(*i),
            ScalarExpr::Sum(c) | ScalarExpr::Product(c) => c.iter().for_each(|e| e.visit_vars(f)),
            ScalarExpr::Pow { base, .. } => base.visit_vars(f),
            ScalarExpr::Exp(inner) | ScalarExpr::Affine { inner, .. } => inner.visit_vars(f),
        }
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        match self {
            ScalarExpr::Const(_) | ScalarExpr::Var(_) => 1,
            ScalarExpr::Sum(c) | ScalarExpr::Product(c) => 1 + c.iter().map(ScalarExpr::node_count).sum::<usize>(),
            ScalarExpr::Pow { base, .. } => 1 + base.node_count(),
            ScalarExpr::Exp(inner) | ScalarExpr::Affine { inner, .. } => 1 + inner.node_count(),
        }
    }

    /// Rewrites every variable index through `map`.
    pub fn remap_vars(&self, map: &impl Fn(usize) -> usize) -> ScalarExpr {
        match self {
            ScalarExpr::Const(c) => ScalarExpr::Const(*c),
            ScalarExpr::Var(i) => ScalarExpr::Var(map(*i)),
            ScalarExpr::Sum(c) => ScalarExpr::Sum(c.iter().map(|e| e.remap_vars(map)).collect()),
            ScalarExpr::Product(c) => ScalarExpr::Product(c.iter().map(|e| e.remap_vars(map)).collect()),
            ScalarExpr::Pow { base, exp } => ScalarExpr::Pow {
                base: Box::new(base.remap_vars(map)),
                exp: *exp,
            },
            ScalarExpr::Exp(inner) => ScalarExpr::Exp(Box::new(inner.remap_vars(map))),
            ScalarExpr::Affine { scale, shift, inner } => ScalarExpr::Affine {
                scale: *scale,
                shift: *shift,
                inner: Box::new(inner.remap_vars(map)),
            },
        }
    }

    /// Folds variable-free subtrees into constants. Nothing else is simplified.
    pub fn fold_constants(&self) -> ScalarExpr {
        if self.support().is_empty() {
            if let Ok(v) = self.evaluate(&[]) {
                return ScalarExpr::Const(v);
            }
        }
        match self {
            ScalarExpr::Sum(c) => ScalarExpr::Sum(c.iter().map(|e| e.fold_constants()).collect()),
            ScalarExpr::Product(c) => ScalarExpr::Product(c.iter().map(|e| e.fold_constants()).collect()),
            ScalarExpr::Pow { base, exp } => ScalarExpr::Pow {
                base: Box::new(base.fold_constants()),
                exp: *exp,
            },
            ScalarExpr::Exp(inner) => ScalarExpr::Exp(Box::new(inner.fold_constants())),
            ScalarExpr::Affine { scale, shift, inner } => ScalarExpr::Affine {
                scale: *scale,
                shift: *shift,
                inner: Box::new(inner.fold_constants()),
            },
            other => other.clone(),
        }
    }

    /// Exact recursive evaluation at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ModelError> {
        let v = match self {
            ScalarExpr::Const(c) => *c,
            ScalarExpr::Var(i) => *x.get(*i).ok_or(ModelError::VariableOutOfRange {
                index: *i,
                len: x.len(),
            })?,
            ScalarExpr::Sum(c) => {
                let mut acc = 0.0;
                for e in c {
                    acc += e.evaluate(x)?;
                }
                acc
            }
            ScalarExpr::Product(c) => {
                let mut acc = 1.0;
                for e in c {
                    acc *= e.evaluate(x)?;
                }
                acc
            }
            ScalarExpr::Pow { base, exp } => power(base.evaluate(x)?, *exp, self)?,
            ScalarExpr::Exp(inner) => inner.evaluate(x)?.exp(),
            ScalarExpr::Affine { scale, shift, inner } => scale * inner.evaluate(x)? + shift,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::Overflow {
                node: self.short_label(),
            })
        }
    }

    /// Dense gradient `d expr / d x` by forward-mode dual propagation.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.value_and_gradient(x)?.1)
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let d = self.dual(x)?;
        let mut g = vec![0.0; x.len()];
        for (i, v) in d.grad {
            g[i] += v;
        }
        Ok((d.value, g))
    }

    /// Forward-mode propagation with sparse tangent vectors, so the cost of a
    /// node scales with the number of variables below it.
    pub(crate) fn dual(&self, x: &[f64]) -> Result<Dual, ModelError> {
        let out = match self {
            ScalarExpr::Const(c) => Dual {
                value: *c,
                grad: Vec::new(),
            },
            ScalarExpr::Var(i) => Dual {
                value: *x.get(*i).ok_or(ModelError::VariableOutOfRange {
                    index: *i,
                    len: x.len(),
                })?,
                grad: vec![(*i, 1.0)],
            },
            ScalarExpr::Sum(children) => {
                let mut value = 0.0;
                let mut parts = Vec::with_capacity(children.len());
                for c in children {
                    let d = c.dual(x)?;
                    value += d.value;
                    parts.push((1.0, d.grad));
                }
                Dual {
                    value,
                    grad: combine(parts),
                }
            }
            ScalarExpr::Product(children) => {
                let duals = children.iter().map(|c| c.dual(x)).collect::<Result<Vec<_>, _>>()?;
                let k = duals.len();
                // prefix/suffix products keep exact zeros well-behaved
                let mut prefix = vec![1.0; k + 1];
                for i in 0..k {
                    prefix[i + 1] = prefix[i] * duals[i].value;
                }
                let mut suffix = vec![1.0; k + 1];
                for i in (0..k).rev() {
                    suffix[i] = suffix[i + 1] * duals[i].value;
                }
                let parts = duals
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| (prefix[i] * suffix[i + 1], d.grad))
                    .collect();
                Dual {
                    value: prefix[k],
                    grad: combine(parts),
                }
            }
            ScalarExpr::Pow { base, exp } => {
                let b = base.dual(x)?;
                let value = power(b.value, *exp, self)?;
                let slope = if exp.num == 0 {
                    0.0
                } else if exp.is_integer() {
                    exp.num as f64 * b.value.powi(exp.num as i32 - 1)
                } else {
                    let e = exp.value();
                    if b.value == 0.0 {
                        if e < 1.0 && !b.grad.is_empty() {
                            return Err(ModelError::GradientSingularity {
                                node: self.short_label(),
                            });
                        }
                        0.0
                    } else {
                        e * b.value.powf(e - 1.0)
                    }
                };
                Dual {
                    value,
                    grad: scale_grad(b.grad, slope),
                }
            }
            ScalarExpr::Exp(inner) => {
                let d = inner.dual(x)?;
                let value = d.value.exp();
                Dual {
                    value,
                    grad: scale_grad(d.grad, value),
                }
            }
            ScalarExpr::Affine { scale, shift, inner } => {
                let d = inner.dual(x)?;
                Dual {
                    value: scale * d.value + shift,
                    grad: scale_grad(d.grad, *scale),
                }
            }
        };
        if !out.value.is_finite() || out.grad.iter().any(|(_, g)| !g.is_finite()) {
            return Err(ModelError::Overflow {
                node: self.short_label(),
            });
        }
        Ok(out)
    }

    /// Compact label used in error messages.
    pub fn short_label(&self) -> String {
        let s = self.to_string();
        if s.chars().count() > 80 {
            let head: String = s.chars().take(77).collect();
            format!("{head}...")
        } else {
            s
        }
    }

    /// Prefix form with variables printed through `name`.
    pub fn to_prefix_string(&self, name: &dyn Fn(usize) -> String) -> String {
        let mut out = String::new();
        self.write_prefix(&mut out, name);
        out
    }

    fn write_prefix(&self, out: &mut String, name: &dyn Fn(usize) -> String) {
        use std::fmt::Write;
        match self {
            ScalarExpr::Const(c) => {
                let _ = write!(out, "{}", fmt_f64(*c));
            }
            ScalarExpr::Var(i) => out.push_str(&name(*i)),
            ScalarExpr::Sum(c) | ScalarExpr::Product(c) => {
                out.push('(');
                out.push(if matches!(self, ScalarExpr::Sum(_)) { '+' } else { '*' });
                for e in c {
                    out.push(' ');
                    e.write_prefix(out, name);
                }
                out.push(')');
            }
            ScalarExpr::Pow { base, exp } => {
                out.push_str("(^ ");
                base.write_prefix(out, name);
                let _ = write!(out, " {exp})");
            }
            ScalarExpr::Exp(inner) => {
                out.push_str("(exp ");
                inner.write_prefix(out, name);
                out.push(')');
            }
            ScalarExpr::Affine { scale, shift, inner } => {
                let _ = write!(out, "(affine {} {} ", fmt_f64(*scale), fmt_f64(*shift));
                inner.write_prefix(out, name);
                out.push(')');
            }
        }
    }
}

/// Shortest round-trip decimal form; always distinguishable from a variable name.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn power(b: f64, exp: Exponent, node: &ScalarExpr) -> Result<f64, ModelError> {
    if exp.is_integer() {
        return Ok(b.powi(exp.num as i32));
    }
    if b < 0.0 {
        return Err(ModelError::Domain {
            node: node.short_label(),
            value: b,
        });
    }
    Ok(b.powf(exp.value()))
}

fn scale_grad(mut g: SparseGrad, s: f64) -> SparseGrad {
    for (_, v) in g.iter_mut() {
        *v *= s;
    }
    g
}

/// Merges weighted sparse gradients into one sorted list.
fn combine(parts: Vec<(f64, SparseGrad)>) -> SparseGrad {
    let nonempty = parts.iter().filter(|(_, g)| !g.is_empty()).count();
    if nonempty == 0 {
        return Vec::new();
    }
    if nonempty == 1 {
        let (w, g) = parts.into_iter().find(|(_, g)| !g.is_empty()).unwrap();
        return scale_grad(g, w);
    }
    let mut all: Vec<(usize, f64)> = parts
        .into_iter()
        .flat_map(|(w, g)| g.into_iter().map(move |(i, v)| (i, w * v)))
        .collect();
    all.sort_by_key(|(i, _)| *i);
    let mut out: SparseGrad = Vec::with_capacity(all.len());
    for (i, v) in all {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => out.push((i, v)),
        }
    }
    out
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_prefix_string(&|i| format!("x{i}")))
    }
}

impl From<f64> for ScalarExpr {
    fn from(c: f64) -> Self {
        ScalarExpr::Const(c)
    }
}

impl Add for ScalarExpr {
    type Output = ScalarExpr;

    fn add(self, rhs: ScalarExpr) -> ScalarExpr {
        let mut terms = match self {
            ScalarExpr::Sum(t) => t,
            other => vec![other],
        };
        match rhs {
            ScalarExpr::Sum(t) => terms.extend(t),
            other => terms.push(other),
        }
        ScalarExpr::Sum(terms)
    }
}

impl Sub for ScalarExpr {
    type Output = ScalarExpr;

    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        self + (-rhs)
    }
}

impl Neg for ScalarExpr {
    type Output = ScalarExpr;

    fn neg(self) -> ScalarExpr {
        match self {
            ScalarExpr::Const(c) => ScalarExpr::Const(-c),
            ScalarExpr::Affine { scale, shift, inner } => ScalarExpr::Affine {
                scale: -scale,
                shift: -shift,
                inner,
            },
            other => other.scaled(-1.0),
        }
    }
}

impl Mul for ScalarExpr {
    type Output = ScalarExpr;

    fn mul(self, rhs: ScalarExpr) -> ScalarExpr {
        let mut factors = match self {
            ScalarExpr::Product(t) => t,
            other => vec![other],
        };
        match rhs {
            ScalarExpr::Product(t) => factors.extend(t),
            other => factors.push(other),
        }
        ScalarExpr::Product(factors)
    }
}
