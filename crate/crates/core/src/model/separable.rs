//! Extraction of the separable + bivariate-product objective shape
//! `f(x) = sum_i g_i(x_i) + sum_j p_j(x_k) q_j(x_l) + c`.

use super::expr::ScalarExpr;
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateTerm {
    pub var: usize,
    /// Expression in `x[var]` only.
    pub expr: ScalarExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateTerm {
    pub first: usize,
    pub second: usize,
    /// Factor in `x[first]` only.
    pub p: ScalarExpr,
    /// Factor in `x[second]` only.
    pub q: ScalarExpr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeparableForm {
    /// At most one entry per variable, ordered by variable index.
    pub univariate: Vec<UnivariateTerm>,
    pub bivariate: Vec<BivariateTerm>,
    pub constant: f64,
}

impl SeparableForm {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ModelError> {
        let mut acc = self.constant;
        for t in &self.univariate {
            acc += t.expr.evaluate(x)?;
        }
        for t in &self.bivariate {
            acc += t.p.evaluate(x)? * t.q.evaluate(x)?;
        }
        Ok(acc)
    }

    /// Variables touched by any term.
    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .univariate
            .iter()
            .map(|t| t.var)
            .chain(self.bivariate.iter().flat_map(|t| [t.first, t.second]))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Outcome of [`to_separable`]. Not being separable is an expected answer,
/// not a failure.
#[derive(Debug, Clone, PartialEq)]
pub enum Separability {
    Separable(SeparableForm),
    NotSeparable { reason: String },
}

impl Separability {
    pub fn into_form(self) -> Option<SeparableForm> {
        match self {
            Separability::Separable(f) => Some(f),
            Separability::NotSeparable { .. } => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, Separability::Separable(_))
    }
}

fn flatten<'a>(e: &'a ScalarExpr, coef: f64, terms: &mut Vec<(f64, &'a ScalarExpr)>, constant: &mut f64) {
    match e {
        ScalarExpr::Sum(children) => children.iter().for_each(|c| flatten(c, coef, terms, constant)),
        ScalarExpr::Affine { scale, shift, inner } => {
            *constant += coef * shift;
            flatten(inner, coef * scale, terms, constant);
        }
        ScalarExpr::Const(c) => *constant += coef * c,
        other => terms.push((coef, other)),
    }
}

fn scaled(e: &ScalarExpr, coef: f64) -> ScalarExpr {
    if coef == 1.0 {
        e.clone()
    } else {
        e.clone().scaled(coef)
    }
}

/// Decomposes `expr` into univariate terms and products of two univariate
/// factors. Sums and affine wrappers are distributed; nothing is expanded, so
/// e.g. `(x + y)^2` is reported as not separable.
pub fn to_separable(expr: &ScalarExpr) -> Separability {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    flatten(expr, 1.0, &mut terms, &mut constant);

    let mut uni: Vec<(usize, Vec<ScalarExpr>)> = Vec::new();
    let mut bivariate = Vec::new();
    for (coef, term) in terms {
        let support = term.support();
        match support.len() {
            0 => match term.evaluate(&[]) {
                Ok(v) => constant += coef * v,
                Err(e) => {
                    return Separability::NotSeparable {
                        reason: format!("constant subterm does not evaluate: {e}"),
                    }
                }
            },
            1 => {
                let var = support[0];
                match uni.iter_mut().find(|(v, _)| *v == var) {
                    Some((_, list)) => list.push(scaled(term, coef)),
                    None => uni.push((var, vec![scaled(term, coef)])),
                }
            }
            2 => {
                let (a, b) = (support[0], support[1]);
                let ScalarExpr::Product(factors) = term else {
                    return Separability::NotSeparable {
                        reason: format!("two-variable term is not a product: {}", term.short_label()),
                    };
                };
                let mut p = Vec::new();
                let mut q = Vec::new();
                for f in factors {
                    let s = f.support();
                    if s.iter().all(|&i| i == a) {
                        p.push(f.clone());
                    } else if s.iter().all(|&i| i == b) {
                        q.push(f.clone());
                    } else {
                        return Separability::NotSeparable {
                            reason: format!("factor couples two variables: {}", f.short_label()),
                        };
                    }
                }
                let p = ScalarExpr::product(p);
                bivariate.push(BivariateTerm {
                    first: a,
                    second: b,
                    p: scaled(&p, coef),
                    q: ScalarExpr::product(q),
                });
            }
            n => {
                return Separability::NotSeparable {
                    reason: format!("term couples {n} variables: {}", term.short_label()),
                }
            }
        }
    }
    uni.sort_by_key(|(v, _)| *v);
    let univariate = uni
        .into_iter()
        .map(|(var, list)| UnivariateTerm {
            var,
            expr: ScalarExpr::sum(list),
        })
        .collect();
    Separability::Separable(SeparableForm {
        univariate,
        bivariate,
        constant,
    })
}
