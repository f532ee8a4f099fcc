//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls the solver paths it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use qhdalm::embedding::IsingModel;
use qhdalm::hydrogen::HydrogenParams;
use qhdalm::model::{
    parse_expr, BivariateTerm, Exponent, NlpProblem, ScalarExpr, SeparableForm, UnivariateTerm, Variable,
};
use qhdalm::qhd::{laplacian, Complex64, Grid, QhdSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------- Ising

pub fn gaussian_ising(n: usize, seed: u64, fields: bool) -> IsingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = IsingModel::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.sample(StandardNormal);
            m.add_coupling(i, j, v);
        }
    }
    if fields {
        for i in 0..n {
            m.h[i] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Ground energy and a minimizer over all `2^n` spin vectors, computed from
/// the dense couplings with its own double loop.
pub fn ising_ground(m: &IsingModel) -> (f64, Vec<i8>) {
    let n = m.n_spins();
    let j = m.dense_couplings();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << n) {
        let s: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut e = m.offset;
        for a in 0..n {
            e -= m.h[a] * s[a];
            for b in a + 1..n {
                e -= j[a][b] * s[a] * s[b];
            }
        }
        if e < best.0 {
            best = (e, s.iter().map(|&v| v as i8).collect());
        }
    }
    best
}

// ---------------------------------------------------------- expressions

pub const TREE_VARS: usize = 3;

/// Random tree that stays finite on `[-1, 1]^3`: fractional powers only see
/// `e^2 + 0.5`, exponentials only see a damped argument.
pub fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> ScalarExpr {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.7) {
            ScalarExpr::var(rng.random_range(0..TREE_VARS))
        } else {
            ScalarExpr::constant(rng.random_range(-2.0..2.0))
        };
    }
    match rng.random_range(0..6) {
        0 => {
            let n = rng.random_range(2..4);
            ScalarExpr::sum((0..n).map(|_| random_tree(rng, depth - 1)).collect())
        }
        1 => {
            let n = rng.random_range(2..4);
            ScalarExpr::product((0..n).map(|_| random_tree(rng, depth - 1)).collect())
        }
        2 => random_tree(rng, depth - 1).powi(rng.random_range(0..4)),
        3 => {
            let inner = random_tree(rng, depth - 1);
            let positive = inner.powi(2) + ScalarExpr::constant(0.5);
            let (num, den) = [(1, 2), (3, 2), (1, 3), (5, 4)][rng.random_range(0..4)];
            positive.pow(Exponent::ratio(num, den).unwrap())
        }
        4 => random_tree(rng, depth - 1).scaled(0.3).exp(),
        _ => random_tree(rng, depth - 1).affine(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)),
    }
}

pub fn central_difference(e: &ScalarExpr, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (e.evaluate(&up).unwrap() - e.evaluate(&down).unwrap()) / (2.0 * h)
        })
        .collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Checks `count` random trees; returns the worst relative mismatch.
pub fn gradient_fd_sweep(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < count {
        let e = random_tree(&mut rng, 4);
        let x: Vec<f64> = (0..TREE_VARS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(g) = e.gradient(&x) else { continue };
        if g.iter().any(|v| v.abs() > 1e6) {
            continue;
        }
        let fd = central_difference(&e, &x);
        for (a, b) in g.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
        checked += 1;
    }
    worst
}

// ------------------------------------------------------------ embedding

fn random_univariate(rng: &mut ChaCha8Rng, v: usize) -> ScalarExpr {
    let x = ScalarExpr::var(v);
    let mut terms = vec![ScalarExpr::constant(rng.random_range(-1.0..1.0))];
    for k in 1..=3 {
        terms.push(x.clone().powi(k).scaled(rng.random_range(-2.0..2.0)));
    }
    if rng.random_bool(0.3) {
        terms.push(x.scaled(rng.random_range(-1.0..1.0)).exp());
    }
    ScalarExpr::sum(terms)
}

/// Random separable + bivariate-product objective in `d` variables.
pub fn random_form(rng: &mut ChaCha8Rng, d: usize) -> SeparableForm {
    let mut univariate = Vec::new();
    for v in 0..d {
        if rng.random_bool(0.85) {
            univariate.push(UnivariateTerm {
                var: v,
                expr: random_univariate(rng, v),
            });
        }
    }
    let mut bivariate = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            if rng.random_bool(0.6) {
                bivariate.push(BivariateTerm {
                    first: a,
                    second: b,
                    p: random_univariate(rng, a),
                    q: random_univariate(rng, b),
                });
            }
        }
    }
    SeparableForm {
        univariate,
        bivariate,
        constant: rng.random_range(-3.0..3.0),
    }
}

/// Every tuple `(l_0, ..., l_{d-1})` with `l_v < sizes[v]`.
pub fn all_level_tuples(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &r in sizes {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..r).map(move |l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    out
}

// ------------------------------------------------------------------ QHD

/// `H(t) = a(t) (-½ L) + b(t) V` on a 1D grid as a dense symmetric matrix.
pub fn dense_hamiltonian_1d(grid: &Grid, v: &[f64], a: f64, b: f64) -> DMatrix<f64> {
    let l = laplacian(grid).axis_matrix(0);
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| {
        let kin = -0.5 * a * l[i][j];
        if i == j {
            kin + b * v[i]
        } else {
            kin
        }
    })
}

/// Product of exact exponentials of `H` frozen at each substep midpoint.
pub fn dense_evolve_1d(
    grid: &Grid,
    v: &[f64],
    sched: &QhdSchedule,
    substeps: usize,
    psi0: &[Complex64],
) -> Vec<Complex64> {
    let mut psi = DVector::from_vec(psi0.to_vec());
    let dt = sched.total_time / substeps as f64;
    for s in 0..substeps {
        let t = (s as f64 + 0.5) * dt;
        let h = dense_hamiltonian_1d(grid, v, sched.kinetic_weight(t), sched.potential_weight(t));
        let eig = SymmetricEigen::new(h);
        let u = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let phases = DVector::from_iterator(
            v.len(),
            eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)),
        );
        let coeffs = u.adjoint() * &psi;
        psi = &u * coeffs.component_mul(&phases);
    }
    psi.iter().copied().collect()
}

pub fn overlap_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

/// Double-well test potential on `[0, 1]`.
pub fn double_well(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let x = grid.coordinate(0, k);
            8.0 * (x - 0.3).powi(2) * (x - 0.8).powi(2) + 0.5 * x
        })
        .collect()
}

// -------------------------------------------------------- convex QPs

/// A QP with its hand-derived KKT point. Multipliers follow
/// `∇f + Σ λ_i ∇g_i + Σ μ_j ∇h_j = 0` with `g = 0`, `h <= 0`, `μ >= 0`.
pub struct KktCase {
    pub name: &'static str,
    pub problem: NlpProblem,
    pub x: Vec<f64>,
    pub objective: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// False when box bounds are active and the multipliers are not unique.
    pub unique_multipliers: bool,
}

fn qp(vars: &[(&str, f64, f64)], objective: &str, eq: &[&str], ineq: &[&str]) -> NlpProblem {
    let variables: Vec<Variable> = vars.iter().map(|(n, l, u)| Variable::new(*n, *l, *u)).collect();
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let lookup = |s: &str| names.iter().position(|n| n == s);
    let parse = |s: &str| parse_expr(s, &lookup).unwrap();
    let mut p = NlpProblem::box_constrained(variables, parse(objective));
    p.equalities = eq.iter().map(|s| parse(s)).collect();
    p.inequalities = ineq.iter().map(|s| parse(s)).collect();
    p
}

pub fn kkt_cases() -> Vec<KktCase> {
    let b = 5.0;
    vec![
        // 2(x-2) + μ = 0 at x = 1
        KktCase {
            name: "bound-by-inequality",
            problem: qp(&[("x", -b, b)], "(^ (+ x -2) 2)", &[], &["(+ x -1)"]),
            x: vec![1.0],
            objective: 1.0,
            lambda: vec![],
            mu: vec![2.0],
            unique_multipliers: true,
        },
        KktCase {
            name: "sphere-on-line",
            problem: qp(
                &[("x", -b, b), ("y", -b, b)],
                "(+ (^ x 2) (^ y 2))",
                &["(+ x y -1)"],
                &[],
            ),
            x: vec![0.5, 0.5],
            objective: 0.5,
            lambda: vec![-1.0],
            mu: vec![],
            unique_multipliers: true,
        },
        // (2(x-1), 2(y-2)) + λ(1,1) + μ(-1,0) = 0 at (0.25, 0.75)
        KktCase {
            name: "line-and-halfplane",
            problem: qp(
                &[("x", -b, b), ("y", -b, b)],
                "(+ (^ (+ x -1) 2) (^ (+ y -2) 2))",
                &["(+ x y -1)"],
                &["(+ 0.25 (* -1 x))"],
            ),
            x: vec![0.25, 0.75],
            objective: 2.125,
            lambda: vec![2.5],
            mu: vec![1.0],
            unique_multipliers: true,
        },
        // x = -λ/2, y = -λ/4, z = -λ/6 with sum 1
        KktCase {
            name: "weighted-simplex",
            problem: qp(
                &[("x", -2.0, 2.0), ("y", -2.0, 2.0), ("z", -2.0, 2.0)],
                "(+ (^ x 2) (* 2 (^ y 2)) (* 3 (^ z 2)))",
                &["(+ x y z -1)"],
                &[],
            ),
            x: vec![6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0],
            objective: 6.0 / 11.0,
            lambda: vec![-12.0 / 11.0],
            mu: vec![],
            unique_multipliers: true,
        },
        // x = y = 1; 2(x-3) + λ + μ = 0, 2(y-3) - λ + μ = 0
        KktCase {
            name: "diagonal-under-cut",
            problem: qp(
                &[("x", -b, b), ("y", -b, b)],
                "(+ (^ (+ x -3) 2) (^ (+ y -3) 2))",
                &["(+ x (* -1 y))"],
                &["(+ x y -2)"],
            ),
            x: vec![1.0, 1.0],
            objective: 8.0,
            lambda: vec![0.0],
            mu: vec![4.0],
            unique_multipliers: true,
        },
        // unconstrained minimizer (2/3, 1/3) violates y >= 1
        KktCase {
            name: "coupled-with-floor",
            problem: qp(
                &[("x", -b, b), ("y", -b, b)],
                "(+ (^ x 2) (^ y 2) (* -1 x y) (* -1 x))",
                &[],
                &["(+ 1 (* -1 y))"],
            ),
            x: vec![1.0, 1.0],
            objective: 0.0,
            lambda: vec![],
            mu: vec![1.0],
            unique_multipliers: true,
        },
        KktCase {
            name: "corner-of-orthant",
            problem: qp(
                &[("x", -2.0, 2.0), ("y", -2.0, 2.0)],
                "(+ (^ (+ x 1) 2) (^ (+ y 1) 2))",
                &[],
                &["(* -1 x)", "(* -1 y)"],
            ),
            x: vec![0.0, 0.0],
            objective: 2.0,
            lambda: vec![],
            mu: vec![2.0, 2.0],
            unique_multipliers: true,
        },
        // (x, y, z) = t (1, 2, 3), 14 t = 14
        KktCase {
            name: "nearest-on-plane",
            problem: qp(
                &[("x", -5.0, 5.0), ("y", -5.0, 5.0), ("z", -5.0, 5.0)],
                "(+ (^ x 2) (^ y 2) (^ z 2))",
                &["(+ x (* 2 y) (* 3 z) -14)"],
                &[],
            ),
            x: vec![1.0, 2.0, 3.0],
            objective: 14.0,
            lambda: vec![-2.0],
            mu: vec![],
            unique_multipliers: true,
        },
        // both cuts active: x + y = 3, x - y = 0.5
        KktCase {
            name: "two-active-cuts",
            problem: qp(
                &[("x", -b, b), ("y", -b, b)],
                "(+ (* 0.5 (^ x 2)) (^ y 2))",
                &[],
                &["(+ 3 (* -1 x) (* -1 y))", "(+ x (* -1 y) -0.5)"],
            ),
            x: vec![1.75, 1.25],
            objective: 3.09375,
            lambda: vec![],
            mu: vec![2.125, 0.375],
            unique_multipliers: true,
        },
        // on y = 1 - x the objective decreases up to the box edge x = 1
        KktCase {
            name: "box-active-line",
            problem: qp(
                &[("x", 0.0, 1.0), ("y", 0.0, 1.0)],
                "(+ x (* 2 y) (* 0.1 (^ x 2)) (* 0.1 (^ y 2)))",
                &["(+ x y -1)"],
                &[],
            ),
            x: vec![1.0, 0.0],
            objective: 1.1,
            lambda: vec![-2.0],
            mu: vec![],
            unique_multipliers: false,
        },
    ]
}

// ------------------------------------------------------------- hydrogen

/// Exact `h1`: `λ U(p) - n1 - n2 exp(c / I(p))`, from the raw coefficients.
pub fn h1_exact(p: &HydrogenParams, p_el: f64, lambda: f64) -> f64 {
    let (i, u, n) = (&p.i, &p.u, &p.n);
    let current = i[0] - i[1] * (i[2] * p_el).exp() + i[3] * p_el;
    let voltage = u[0] + u[1] * p_el - u[2] * p_el.powi(2) + u[3] * p_el.powi(3) - u[4] * p_el.powi(4);
    let c = n[2] + n[3] * p.t_cell + n[4] * p.t_cell.powi(2);
    lambda * voltage - n[0] - n[1] * (c / current).exp()
}

/// Exact `h2`: `λ - m1 - m2 P_max - m3 exp(m4 · 100 p / P_max)`.
pub fn h2_exact(p: &HydrogenParams, p_el: f64, lambda: f64) -> f64 {
    let m = &p.m;
    lambda - m[0] - m[1] * p.p_max - m[2] * (m[3] * 100.0 * p_el / p.p_max).exp()
}

pub struct GridOracle {
    pub best: f64,
    pub second: f64,
    /// Spread of feasible cells within two grid steps of the best cell.
    pub local_range: f64,
    pub best_cell: [f64; 4],
}

/// Feasibility-filtered exhaustive grid over `(p_el, λ)` per slot for a
/// two-slot instance, `g` points per axis on `[0, P_max] x [0, 100]`.
pub fn hydrogen_grid_two_slots(p: &HydrogenParams, g: usize) -> GridOracle {
    assert_eq!(p.horizon(), 2);
    let pg: Vec<f64> = (0..g).map(|k| p.p_max * k as f64 / (g - 1) as f64).collect();
    let lg: Vec<f64> = (0..g).map(|k| 100.0 * k as f64 / (g - 1) as f64).collect();
    let buy_cap = p.m_ac * p.p_max + p.k_ac;
    // per slot and cell: storage change and cost, or None if infeasible
    let slot = |t: usize| -> Vec<Option<(f64, f64)>> {
        let mut out = Vec::with_capacity(g * g);
        for &pe in &pg {
            for &la in &lg {
                let buy = p.m_ac * pe + p.k_ac - p.p_renewable[t];
                let ok = h1_exact(p, pe, la) <= 0.0 && h2_exact(p, pe, la) <= 0.0 && (0.0..=buy_cap).contains(&buy);
                out.push(ok.then(|| (p.dt * pe * la / 100.0 / p.hhv - p.demand[t], p.c_power[t] * buy)));
            }
        }
        out
    };
    let (a, b) = (slot(0), slot(1));
    let in_store = |s: f64| (p.s_min..=p.s_max).contains(&s);
    let value = |i: usize, j: usize| -> Option<f64> {
        let (d0, c0) = a[i]?;
        let (d1, c1) = b[j]?;
        let s1 = p.s_0 + d0;
        let s2 = s1 + d1;
        (in_store(s1) && in_store(s2)).then(|| -p.c_hyo * (s2 - p.s_0) + c0 + c1)
    };
    let (mut best, mut second) = (f64::INFINITY, f64::INFINITY);
    let mut arg = (0, 0);
    for (i, cell) in a.iter().enumerate() {
        if cell.is_none() {
            continue;
        }
        for j in 0..b.len() {
            if let Some(v) = value(i, j) {
                if v < best {
                    second = best;
                    best = v;
                    arg = (i, j);
                } else if v < second {
                    second = v;
                }
            }
        }
    }
    let (pi, li) = (arg.0 / g, arg.0 % g);
    let (pj, lj) = (arg.1 / g, arg.1 % g);
    let near = |c: usize| c.saturating_sub(2)..(c + 3).min(g);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i0 in near(pi) {
        for i1 in near(li) {
            for j0 in near(pj) {
                for j1 in near(lj) {
                    if let Some(v) = value(i0 * g + i1, j0 * g + j1) {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
        }
    }
    GridOracle {
        best,
        second,
        local_range: hi - lo,
        best_cell: [pg[pi], lg[li], pg[pj], lg[lj]],
    }
}

/// Minimum of the fixed-efficiency LP by enumerating basic solutions.
/// Variables per slot: `p_el, p_buy, s_next`; returns `(objective, point)`.
pub fn fixed_efficiency_lp_min(p: &HydrogenParams, lambda: f64) -> (f64, Vec<f64>) {
    let n = p.horizon();
    let nv = 3 * n;
    let rate = p.dt * lambda / (100.0 * p.hhv);
    let mut a = DMatrix::<f64>::zeros(2 * n, nv);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for t in 0..n {
        // s_{t+1} - s_t - rate p_el = -demand
        a[(2 * t, 3 * t + 2)] = 1.0;
        if t > 0 {
            a[(2 * t, 3 * (t - 1) + 2)] = -1.0;
        }
        a[(2 * t, 3 * t)] = -rate;
        rhs[2 * t] = -p.demand[t] + if t == 0 { p.s_0 } else { 0.0 };
        // p_buy - m_ac p_el = k_ac - p_ren
        a[(2 * t + 1, 3 * t + 1)] = 1.0;
        a[(2 * t + 1, 3 * t)] = -p.m_ac;
        rhs[2 * t + 1] = p.k_ac - p.p_renewable[t];
    }
    let lower: Vec<f64> = (0..n).flat_map(|_| [0.0, 0.0, p.s_min]).collect();
    let upper: Vec<f64> = (0..n)
        .flat_map(|_| [p.p_max, p.m_ac * p.p_max + p.k_ac, p.s_max])
        .collect();
    let mut cost = vec![0.0; nv];
    for t in 0..n {
        cost[3 * t + 1] = p.c_power[t];
    }
    cost[3 * (n - 1) + 2] -= p.c_hyo;
    let constant = p.c_hyo * p.s_0;

    let free = nv - 2 * n;
    let mut best = (f64::INFINITY, Vec::new());
    let combos = subsets(nv, free);
    for fixed in combos {
        for bits in 0u32..(1 << free) {
            let mut x = vec![f64::NAN; nv];
            for (k, &v) in fixed.iter().enumerate() {
                x[v] = if bits >> k & 1 == 1 { upper[v] } else { lower[v] };
            }
            let basic: Vec<usize> = (0..nv).filter(|v| !fixed.contains(v)).collect();
            let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
            let mut r = rhs.clone();
            for row in 0..2 * n {
                for (c, &v) in basic.iter().enumerate() {
                    m[(row, c)] = a[(row, v)];
                }
                for &v in &fixed {
                    r[row] -= a[(row, v)] * x[v];
                }
            }
            let Some(sol) = m.lu().solve(&r) else { continue };
            for (c, &v) in basic.iter().enumerate() {
                x[v] = sol[c];
            }
            if (0..nv).any(|v| x[v] < lower[v] - 1e-9 || x[v] > upper[v] + 1e-9 || !x[v].is_finite()) {
                continue;
            }
            let f = constant + cost.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    best
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}
