//! Ising embedding of box-constrained objectives.
//!
//! Each variable is discretized to `R` increasing levels and represented by
//! `R - 1` spins in domain-wall form: the level is the number of leading `+1`
//! spins. With `b = (1 + s) / 2` a level value is
//! `v(0) + sum_k b_k (v(k) - v(k-1))`, which is linear in the spins on valid
//! patterns, so univariate terms become fields and products of two
//! univariate factors become couplings between two blocks. The encoding is
//! exact on valid patterns. Invalid patterns pay `A` per `-1, +1` adjacency.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NlpProblem, Point, ScalarExpr, SeparableForm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("objective is not separable; build a quadratic surrogate first ({0})")]
    NotSeparable(String),
    #[error("invalid level grid for variable {var}: {reason}")]
    Levels { var: usize, reason: String },
    #[error("surrogate Hessian entry ({row}, {col}) is not finite")]
    Surrogate { row: usize, col: usize },
    #[error("surrogate center is outside the box")]
    CenterOutsideBox,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("edge-list parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// `E(s) = -½ sum_ij J_ij s_i s_j - sum_i h_i s_i + offset`, `s_i ∈ {-1, +1}`.
///
/// `J` is symmetric with zero diagonal and stored as sorted adjacency rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    pub h: Vec<f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
            h: vec![0.0; n],
            offset: 0.0,
        }
    }

    /// From a dense symmetric matrix; the diagonal must be zero.
    pub fn from_dense(j: &[Vec<f64>], h: Vec<f64>, offset: f64) -> Self {
        let n = h.len();
        let mut m = Self::new(n);
        for (a, row) in j.iter().enumerate() {
            for (b, &v) in row.iter().enumerate().skip(a + 1) {
                if v != 0.0 {
                    m.add_coupling(a, b, v);
                }
            }
        }
        m.h = h;
        m.offset = offset;
        m
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    /// Adds `v` to `J_ab` and `J_ba`.
    pub fn add_coupling(&mut self, a: usize, b: usize, v: f64) {
        assert!(a != b, "Ising couplings have zero diagonal");
        for (r, c) in [(a, b), (b, a)] {
            let row = &mut self.rows[r];
            match row.binary_search_by_key(&c, |(i, _)| *i) {
                Ok(pos) => row[pos].1 += v,
                Err(pos) => row.insert(pos, (c, v)),
            }
        }
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.rows[a]
            .binary_search_by_key(&b, |(i, _)| *i)
            .map(|pos| self.rows[a][pos].1)
            .unwrap_or(0.0)
    }

    /// Nonzero `(j, J_ij)` entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Upper-triangle couplings `(i, j, J_ij)` with `i < j`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |(j, _)| *j > i).map(move |&(j, v)| (i, j, v)))
    }

    pub fn dense_couplings(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[i][j] = v;
            }
        }
        d
    }

    /// `(J s)_i`.
    pub fn local_field(&self, i: usize, s: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * s[j]).sum()
    }

    pub fn energy(&self, s: &[i8]) -> f64 {
        assert_eq!(s.len(), self.n, "spin vector length");
        let mut e = self.offset;
        for (i, row) in self.rows.iter().enumerate() {
            let si = s[i] as f64;
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * s[j] as f64;
            }
            e -= 0.5 * si * acc + self.h[i] * si;
        }
        e
    }

    /// Multiplies `J`, `h` and `offset` by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| (j, v * factor)).collect())
                .collect(),
            h: self.h.iter().map(|v| v * factor).collect(),
            offset: self.offset * factor,
        }
    }

    /// Plain-text edge list: header comments, the spin count, `i j J_ij`
    /// lines for `i < j`, then `i h_i` lines.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# format_version 1");
        let _ = writeln!(out, "# offset {:?}", self.offset);
        let _ = writeln!(out, "{}", self.n);
        for (i, j, v) in self.couplings() {
            let _ = writeln!(out, "{i} {j} {v:?}");
        }
        for (i, v) in self.h.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "{i} {v:?}");
            }
        }
        out
    }

    pub fn from_edge_list(src: &str) -> Result<Self, EmbeddingError> {
        let mut model: Option<IsingModel> = None;
        let mut offset = 0.0;
        for (ln, raw) in src.lines().enumerate() {
            let line = ln + 1;
            let err = |reason: String| EmbeddingError::Parse { line, reason };
            let text = raw.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(comment) = text.strip_prefix('#') {
                let mut it = comment.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("offset"), Some(v)) => offset = v.parse().map_err(|_| err(format!("bad offset `{v}`")))?,
                    (Some("format_version"), Some(v)) if v != "1" => {
                        return Err(err(format!("unsupported format_version {v}")))
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            let Some(m) = model.as_mut() else {
                let n: usize = text
                    .parse()
                    .map_err(|_| err(format!("expected spin count, got `{text}`")))?;
                model = Some(IsingModel::new(n));
                continue;
            };
            let index = |s: &str| -> Result<usize, EmbeddingError> {
                let i: usize = s.parse().map_err(|_| err(format!("bad index `{s}`")))?;
                if i >= m.n {
                    return Err(err(format!("index {i} out of range for {} spins", m.n)));
                }
                Ok(i)
            };
            let value = |s: &str| -> Result<f64, EmbeddingError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad value `{s}`")))
            };
            match fields.as_slice() {
                [i, j, v] => {
                    let (i, j, v) = (index(i)?, index(j)?, value(v)?);
                    if i == j {
                        return Err(err("diagonal coupling".into()));
                    }
                    m.add_coupling(i, j, v);
                }
                [i, v] => {
                    let (i, v) = (index(i)?, value(v)?);
                    m.h[i] += v;
                }
                _ => return Err(err(format!("expected 2 or 3 fields, got {}", fields.len()))),
            }
        }
        let mut m = model.ok_or(EmbeddingError::Parse {
            line: 0,
            reason: "missing spin count".into(),
        })?;
        m.offset = offset;
        Ok(m)
    }
}

/// Spins of one encoded variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub var: usize,
    pub start: usize,
    /// Strictly increasing level coordinates; the block has `levels.len() - 1` spins.
    pub levels: Vec<f64>,
}

impl VariableBlock {
    pub fn spins(&self) -> usize {
        self.levels.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub n_vars: usize,
    pub blocks: Vec<VariableBlock>,
    /// Domain-wall penalty weight `A`.
    pub penalty: f64,
    /// Coordinate used for variables the objective does not touch.
    pub fixed: Vec<f64>,
}

impl Encoding {
    pub fn n_spins(&self) -> usize {
        self.blocks.iter().map(VariableBlock::spins).sum()
    }

    /// Spin pattern for the given level of each block.
    pub fn spins_for_levels(&self, levels: &[usize]) -> Vec<i8> {
        let mut s = vec![-1i8; self.n_spins()];
        for (block, &l) in self.blocks.iter().zip(levels) {
            for k in 0..l.min(block.spins()) {
                s[block.start + k] = 1;
            }
        }
        s
    }
}

/// `R` evenly spaced levels over `[lower, upper]`.
pub fn uniform_levels(lower: f64, upper: f64, r: usize) -> Vec<f64> {
    (0..r)
        .map(|k| {
            if k + 1 == r {
                upper
            } else {
                lower + (upper - lower) * k as f64 / (r - 1) as f64
            }
        })
        .collect()
}

/// Objective values tabulated on the level grids: the per-block numbers the
/// encoder and the penalty weight are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTables {
    /// `(var, values at each level)`.
    pub univariate: Vec<(usize, Vec<f64>)>,
    /// `(first, second, p at first's levels, q at second's levels)`.
    pub bivariate: Vec<(usize, usize, Vec<f64>, Vec<f64>)>,
    pub constant: f64,
}

fn eval_univariate(expr: &ScalarExpr, var: usize, value: f64, scratch: &mut [f64]) -> Result<f64, ModelError> {
    scratch[var] = value;
    expr.evaluate(scratch)
}

impl LevelTables {
    pub fn build(form: &SeparableForm, levels: &[Vec<f64>]) -> Result<Self, EmbeddingError> {
        let n = levels.len();
        for v in form.variables() {
            if v >= n {
                return Err(EmbeddingError::Levels {
                    var: v,
                    reason: format!("no level grid (only {n} supplied)"),
                });
            }
            let lv = &levels[v];
            if lv.len() < 2 {
                return Err(EmbeddingError::Levels {
                    var: v,
                    reason: "need at least 2 levels".into(),
                });
            }
            if lv.windows(2).any(|w| !(w[0] < w[1])) || lv.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::Levels {
                    var: v,
                    reason: "levels must be finite and strictly increasing".into(),
                });
            }
        }
        let mut scratch = vec![0.0; n];
        let mut table = |expr: &ScalarExpr, var: usize| -> Result<Vec<f64>, ModelError> {
            levels[var]
                .iter()
                .map(|&x| eval_univariate(expr, var, x, &mut scratch))
                .collect()
        };
        let mut univariate = Vec::new();
        for t in &form.univariate {
            univariate.push((t.var, table(&t.expr, t.var)?));
        }
        let mut bivariate = Vec::new();
        for t in &form.bivariate {
            if t.first == t.second {
                let p = table(&t.p, t.first)?;
                let q = table(&t.q, t.first)?;
                univariate.push((t.first, p.iter().zip(&q).map(|(a, b)| a * b).collect()));
            } else {
                bivariate.push((t.first, t.second, table(&t.p, t.first)?, table(&t.q, t.second)?));
            }
        }
        Ok(Self {
            univariate,
            bivariate,
            constant: form.constant,
        })
    }

    /// Objective value with every variable at the given level index.
    pub fn value_at(&self, level_of: impl Fn(usize) -> usize) -> f64 {
        let mut acc = self.constant;
        for (v, vals) in &self.univariate {
            acc += vals[level_of(*v)];
        }
        for (a, b, p, q) in &self.bivariate {
            acc += p[level_of(*a)] * q[level_of(*b)];
        }
        acc
    }

    /// Per-variable bound on how far the objective can move between two
    /// levels of that variable, whatever the other spins do (valid or not).
    pub fn level_gaps(&self, n_vars: usize) -> Vec<f64> {
        let tv = |vals: &[f64]| vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        let reach = |vals: &[f64]| vals[0].abs() + tv(vals);
        let mut gaps = vec![0.0; n_vars];
        for (v, vals) in &self.univariate {
            gaps[*v] += tv(vals);
        }
        for (a, b, p, q) in &self.bivariate {
            gaps[*a] += tv(p) * reach(q);
            gaps[*b] += tv(q) * reach(p);
        }
        gaps
    }
}

/// `A = 2 * (largest level-to-level objective gap over blocks) + 1`.
///
/// Any invalid block can be repaired to a valid one while paying less than
/// `A` per removed domain wall, so the Ising ground state is a valid pattern.
pub fn penalty_weight(tables: &LevelTables, n_vars: usize) -> f64 {
    let gap = tables.level_gaps(n_vars).into_iter().fold(0.0, f64::max);
    2.0 * gap + 1.0
}

/// Polynomial in `b ∈ {0,1}^n`: constant, linear and pair coefficients.
#[derive(Default)]
struct Qubo {
    constant: f64,
    linear: Vec<f64>,
    pairs: BTreeMap<(usize, usize), f64>,
}

impl Qubo {
    fn pair(&mut self, a: usize, b: usize, w: f64) {
        if w != 0.0 {
            let key = if a < b { (a, b) } else { (b, a) };
            *self.pairs.entry(key).or_insert(0.0) += w;
        }
    }

    /// Substitutes `b = (1 + s) / 2`.
    fn into_ising(self) -> IsingModel {
        let n = self.linear.len();
        let mut m = IsingModel::new(n);
        let mut offset = self.constant;
        let mut field = vec![0.0; n];
        for (i, &c) in self.linear.iter().enumerate() {
            offset += 0.5 * c;
            field[i] += 0.5 * c;
        }
        for (&(a, b), &w) in &self.pairs {
            // w b_a b_b = w/4 (1 + s_a + s_b + s_a s_b)
            offset += 0.25 * w;
            field[a] += 0.25 * w;
            field[b] += 0.25 * w;
            // energy term w/4 s_a s_b equals -½ (J_ab + J_ba) s_a s_b with J_ab = -w/4
            m.add_coupling(a, b, -0.25 * w);
        }
        m.h = field.into_iter().map(|c| -c).collect();
        m.offset = offset;
        m
    }
}

/// Encodes `form` with one level grid per variable (`levels[v]`, used only
/// for variables the form references).
pub fn encode(form: &SeparableForm, levels: &[Vec<f64>]) -> Result<(IsingModel, Encoding), EmbeddingError> {
    let tables = LevelTables::build(form, levels)?;
    let n_vars = levels.len();
    let penalty = penalty_weight(&tables, n_vars);

    let used = form.variables();
    let mut blocks = Vec::with_capacity(used.len());
    let mut block_of = vec![usize::MAX; n_vars];
    let mut start = 0;
    for &v in &used {
        block_of[v] = blocks.len();
        let lv = levels[v].clone();
        let len = lv.len() - 1;
        blocks.push(VariableBlock {
            var: v,
            start,
            levels: lv,
        });
        start += len;
    }
    let mut q = Qubo {
        linear: vec![0.0; start],
        ..Default::default()
    };

    for (v, vals) in &tables.univariate {
        let blk = &blocks[block_of[*v]];
        q.constant += vals[0];
        for k in 1..vals.len() {
            q.linear[blk.start + k - 1] += vals[k] - vals[k - 1];
        }
    }
    for (a, b, p, qv) in &tables.bivariate {
        let ba = &blocks[block_of[*a]];
        let bb = &blocks[block_of[*b]];
        let (p0, q0) = (p[0], qv[0]);
        q.constant += p0 * q0;
        for k in 1..p.len() {
            q.linear[ba.start + k - 1] += q0 * (p[k] - p[k - 1]);
        }
        for l in 1..qv.len() {
            q.linear[bb.start + l - 1] += p0 * (qv[l] - qv[l - 1]);
        }
        for k in 1..p.len() {
            let dp = p[k] - p[k - 1];
            for l in 1..qv.len() {
                q.pair(ba.start + k - 1, bb.start + l - 1, dp * (qv[l] - qv[l - 1]));
            }
        }
    }
    q.constant += tables.constant;
    // A (1 - b_k) b_{k+1} per adjacent pair inside a block
    for blk in &blocks {
        for k in 0..blk.spins().saturating_sub(1) {
            let (i, j) = (blk.start + k, blk.start + k + 1);
            q.linear[j] += penalty;
            q.pair(i, j, -penalty);
        }
    }

    let fixed = levels
        .iter()
        .map(|lv| lv.get(lv.len() / 2).copied().unwrap_or(0.0))
        .collect();
    Ok((
        q.into_ising(),
        Encoding {
            n_vars,
            blocks,
            penalty,
            fixed,
        },
    ))
}

/// Maps spins back to coordinates. A block's level is its number of `+1`
/// spins, in any order, so every pattern decodes to an in-range point.
pub fn decode(spins: &[i8], enc: &Encoding) -> Point {
    let mut x = enc.fixed.clone();
    for blk in &enc.blocks {
        let ups = spins[blk.start..blk.start + blk.spins()]
            .iter()
            .filter(|&&s| s > 0)
            .count();
        x[blk.var] = blk.levels[ups];
    }
    x
}

/// Second-order Taylor model `f(c) + g·d + ½ dᵀ H d`, `d = x - c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSurrogate {
    pub center: Point,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Dense symmetric Hessian.
    pub hessian: Vec<Vec<f64>>,
}

impl QuadraticSurrogate {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut v = self.value;
        for i in 0..d.len() {
            v += self.gradient[i] * d[i];
            let hd: f64 = self.hessian[i].iter().zip(&d).map(|(h, dj)| h * dj).sum();
            v += 0.5 * d[i] * hd;
        }
        v
    }

    /// The same function written as univariate terms plus bilinear products.
    pub fn to_separable(&self) -> SeparableForm {
        use crate::model::{BivariateTerm, UnivariateTerm};
        let n = self.center.len();
        let dev = |i: usize| ScalarExpr::var(i).affine(1.0, -self.center[i]);
        let mut univariate = Vec::new();
        for i in 0..n {
            let (g, hii) = (self.gradient[i], self.hessian[i][i]);
            if g != 0.0 || hii != 0.0 {
                univariate.push(UnivariateTerm {
                    var: i,
                    expr: dev(i).scaled(g) + dev(i).powi(2).scaled(0.5 * hii),
                });
            }
        }
        let mut bivariate = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let hij = 0.5 * (self.hessian[i][j] + self.hessian[j][i]);
                if hij != 0.0 {
                    bivariate.push(BivariateTerm {
                        first: i,
                        second: j,
                        p: dev(i).scaled(hij),
                        q: dev(j),
                    });
                }
            }
        }
        SeparableForm {
            univariate,
            bivariate,
            constant: self.value,
        }
    }
}

/// Taylor surrogate of a box-only problem's objective at `center`. The
/// Hessian comes from central differences of forward-mode gradients with
/// step `1e-4 * (U - L)` per coordinate.
pub fn quadratic_model(problem: &NlpProblem, center: &[f64]) -> Result<QuadraticSurrogate, EmbeddingError> {
    if !problem.contains(center) {
        return Err(EmbeddingError::CenterOutsideBox);
    }
    let f = &problem.objective;
    let n = problem.dim();
    let (value, gradient) = f.value_and_gradient(center)?;
    let mut hessian = vec![vec![0.0; n]; n];
    let mut probe = center.to_vec();
    for j in 0..n {
        let step = 1e-4 * problem.variables[j].width();
        if step == 0.0 {
            continue;
        }
        probe[j] = center[j] + step;
        let gp = f.gradient(&probe)?;
        probe[j] = center[j] - step;
        let gm = f.gradient(&probe)?;
        probe[j] = center[j];
        for i in 0..n {
            hessian[i][j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for i in 0..n {
        for j in i..n {
            let s = 0.5 * (hessian[i][j] + hessian[j][i]);
            if !s.is_finite() {
                return Err(EmbeddingError::Surrogate { row: i, col: j });
            }
            hessian[i][j] = s;
            hessian[j][i] = s;
        }
    }
    Ok(QuadraticSurrogate {
        center: center.to_vec(),
        value,
        gradient,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{to_separable, Variable};

    fn x(i: usize) -> ScalarExpr {
        ScalarExpr::var(i)
    }

    #[test]
    fn two_level_linear() {
        let form = to_separable(&x(0)).into_form().unwrap();
        let (ising, enc) = encode(&form, &[uniform_levels(0.0, 1.0, 2)]).unwrap();
        assert_eq!(ising.n_spins(), 1);
        assert_eq!(enc.n_spins(), 1);
        let gap = ising.energy(&[1]) - ising.energy(&[-1]);
        assert!((gap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decode_counts_up_spins() {
        let enc = Encoding {
            n_vars: 1,
            blocks: vec![VariableBlock {
                var: 0,
                start: 0,
                levels: uniform_levels(0.0, 6.0, 7),
            }],
            penalty: 1.0,
            fixed: vec![3.0],
        };
        assert_eq!(decode(&[-1; 6], &enc), vec![0.0]);
        assert_eq!(decode(&[1; 6], &enc), vec![6.0]);
        assert_eq!(decode(&[-1, 1, -1, 1, 1, -1], &enc), vec![3.0]);
    }

    #[test]
    fn penalty_from_gap() {
        let tables = LevelTables {
            univariate: vec![(0, vec![0.0, 3.0])],
            bivariate: vec![],
            constant: 0.0,
        };
        assert_eq!(penalty_weight(&tables, 1), 7.0);
        let flat = LevelTables {
            univariate: vec![(0, vec![2.0, 2.0, 2.0])],
            bivariate: vec![],
            constant: 5.0,
        };
        assert_eq!(penalty_weight(&flat, 1), 1.0);
    }

    #[test]
    fn surrogate_of_exp_sum_has_unit_hessian() {
        let p = NlpProblem::box_constrained(
            vec![Variable::new("x", -1.0, 1.0), Variable::new("y", -1.0, 1.0)],
            (x(0) + x(1)).exp(),
        );
        let s = quadratic_model(&p, &[0.0, 0.0]).unwrap();
        for row in &s.hessian {
            for &v in row {
                assert!((v - 1.0).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn surrogate_reproduces_quadratic() {
        let f = x(0).powi(2).scaled(3.0) + (x(0) * x(1)).scaled(-2.0) + x(1).scaled(0.5) + ScalarExpr::constant(1.0);
        let p = NlpProblem::box_constrained(
            vec![Variable::new("x", -2.0, 2.0), Variable::new("y", 0.0, 4.0)],
            f.clone(),
        );
        let s = quadratic_model(&p, &[0.3, 1.7]).unwrap();
        let form = s.to_separable();
        for pt in [[-2.0, 0.0], [1.1, 3.3], [0.3, 1.7], [2.0, 4.0]] {
            let want = f.evaluate(&pt).unwrap();
            assert!((s.evaluate(&pt) - want).abs() < 1e-8);
            assert!((form.evaluate(&pt).unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn center_must_be_in_box() {
        let p = NlpProblem::box_constrained(vec![Variable::new("x", 0.0, 1.0)], x(0));
        assert!(matches!(
            quadratic_model(&p, &[2.0]),
            Err(EmbeddingError::CenterOutsideBox)
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut m = IsingModel::new(3);
        m.add_coupling(0, 2, -1.25);
        m.add_coupling(1, 2, 0.1);
        m.h[1] = 0.3;
        m.offset = 2.5;
        let text = m.to_edge_list();
        assert_eq!(IsingModel::from_edge_list(&text).unwrap(), m);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        let err = IsingModel::from_edge_list("2\n0 5 1.0\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 2, .. }));
        assert!(IsingModel::from_edge_list("2\n1 1 1.0\n").is_err());
        assert!(IsingModel::from_edge_list("# nothing\n").is_err());
    }
}
