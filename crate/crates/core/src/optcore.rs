//! Smooth equality-constrained minimization.
//!
//! An augmented Lagrangian outer loop drives the constraints to zero while
//! L-BFGS with a strong-Wolfe line search minimizes each subproblem. All
//! gradients are supplied by the caller.

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{NeighborClass, SymmetryOrbits};

/// Objective returning value and gradient.
type ValueGrad<'a> = &'a dyn Fn(&DVector<f64>) -> (f64, DVector<f64>);

/// Cost with gradient.
pub type CostFn<'a> = dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + 'a;
/// Vector of equality constraints with their Jacobian (rows = constraints).
pub type ConstraintFn<'a> = dyn Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>) + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    /// Outer (multiplier) iterations.
    pub max_iter: usize,
    /// L-BFGS iterations per subproblem.
    pub max_inner: usize,
    pub tol_c: f64,
    pub tol_g: f64,
    pub penalty_growth: f64,
    pub initial_penalty: f64,
    pub memory: usize,
    /// Seed for callers that draw random starting points.
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iter: 50,
            max_inner: 2000,
            tol_c: 1e-8,
            tol_g: 1e-6,
            penalty_growth: 10.0,
            initial_penalty: 10.0,
            memory: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub constraint_residual: f64,
    pub stationarity: f64,
    /// (cost, constraint residual) after each outer iteration.
    pub history: Vec<(f64, f64)>,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

struct Eval {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

/// Strong-Wolfe line search along `p`; returns the accepted point.
fn line_search(
    fg: ValueGrad<'_>,
    cur: &Eval,
    p: &DVector<f64>,
    step0: f64,
    evals: &mut usize,
) -> Option<Eval> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let d0 = cur.g.dot(p);
    if d0.is_nan() || d0 >= 0.0 {
        return None;
    }
    let at = |a: f64, evals: &mut usize| -> (Eval, f64) {
        *evals += 1;
        let x = &cur.x + p * a;
        let (f, g) = fg(&x);
        let d = g.dot(p);
        (Eval { x, f, g }, d)
    };
    let sufficient = |a: f64, f: f64| f <= cur.f + C1 * a * d0;

    let zoom = |mut lo: (f64, f64, f64),
                mut hi: (f64, f64, f64),
                best: Option<Eval>,
                evals: &mut usize| {
        // tuples are (step, value, slope)
        let mut best = best;
        for _ in 0..40 {
            let (a0, f0, g0) = lo;
            let (a1, f1, g1) = hi;
            let w = (a1 - a0).abs();
            if w < 1e-16 * a0.abs().max(1.0) {
                break;
            }
            // cubic interpolation, safeguarded
            let d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1);
            let disc = d1 * d1 - g0 * g1;
            let mut a = if disc >= 0.0 {
                let d2 = (a1 - a0).signum() * disc.sqrt();
                a1 - (a1 - a0) * (g1 + d2 - d1) / (g1 - g0 + 2.0 * d2)
            } else {
                f64::NAN
            };
            let (lo_b, hi_b) = (a0.min(a1) + 0.1 * w, a0.max(a1) - 0.1 * w);
            if !a.is_finite() || a < lo_b || a > hi_b {
                a = 0.5 * (a0 + a1);
            }
            let (e, d) = at(a, evals);
            if !e.f.is_finite() || !sufficient(a, e.f) || e.f >= f0 {
                hi = (a, e.f, d);
            } else {
                if d.abs() <= -C2 * d0 {
                    return Some(e);
                }
                if d * (a1 - a0) >= 0.0 {
                    hi = lo;
                }
                lo = (a, e.f, d);
                best = Some(e);
            }
        }
        best
    };

    let mut prev = (0.0, cur.f, d0);
    let mut a = step0;
    for i in 0..40 {
        let (e, d) = at(a, evals);
        if !e.f.is_finite() {
            a *= 0.5;
            continue;
        }
        if !sufficient(a, e.f) || (i > 0 && e.f >= prev.1) {
            return zoom(prev, (a, e.f, d), None, evals);
        }
        if d.abs() <= -C2 * d0 {
            return Some(e);
        }
        if d >= 0.0 {
            let cur_pt = (a, e.f, d);
            return zoom(cur_pt, prev, Some(e), evals);
        }
        prev = (a, e.f, d);
        a *= 2.0;
    }
    None
}

/// L-BFGS on an unconstrained smooth function. Returns the final point
/// and the number of iterations.
fn lbfgs(
    fg: ValueGrad<'_>,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    memory: usize,
) -> (DVector<f64>, f64, DVector<f64>, usize) {
    let (f, g) = fg(x0);
    let mut cur = Eval {
        x: x0.clone(),
        f,
        g,
    };
    let mut s_hist: Vec<DVector<f64>> = Vec::new();
    let mut y_hist: Vec<DVector<f64>> = Vec::new();
    let mut evals = 0;
    let mut iters = 0;
    let mut stalled = 0;
    while iters < max_iter && inf_norm(&cur.g) > tol {
        iters += 1;
        let mut q = cur.g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        let rho: Vec<f64> = (0..k).map(|i| 1.0 / y_hist[i].dot(&s_hist[i])).collect();
        for i in (0..k).rev() {
            alpha[i] = rho[i] * s_hist[i].dot(&q);
            q -= &y_hist[i] * alpha[i];
        }
        if k > 0 {
            let gamma = s_hist[k - 1].dot(&y_hist[k - 1]) / y_hist[k - 1].norm_squared();
            q *= gamma;
        }
        for i in 0..k {
            let beta = rho[i] * y_hist[i].dot(&q);
            q += &s_hist[i] * (alpha[i] - beta);
        }
        let p = -q;
        let step0 = if k == 0 {
            (1.0 / inf_norm(&cur.g)).min(1.0)
        } else {
            1.0
        };
        match line_search(fg, &cur, &p, step0, &mut evals) {
            Some(next) => {
                let s = &next.x - &cur.x;
                let y = &next.g - &cur.g;
                let df = (cur.f - next.f).abs();
                if s.dot(&y) > 1e-12 * s.norm() * y.norm() {
                    s_hist.push(s);
                    y_hist.push(y);
                    if s_hist.len() > memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                }
                stalled = if df <= 1e-16 * cur.f.abs().max(1e-300) {
                    stalled + 1
                } else {
                    0
                };
                cur = next;
                if stalled > 5 {
                    break;
                }
            }
            None if !s_hist.is_empty() => {
                s_hist.clear();
                y_hist.clear();
            }
            None => break,
        }
    }
    (cur.x, cur.f, cur.g, iters)
}

/// Minimizes `cost` subject to `constraints(x) = 0` (if given).
///
/// Never fails after a finite start: when tolerances are not reached the
/// last iterate is returned with `converged = false`.
pub fn minimize(
    cost: &CostFn,
    constraints: Option<&ConstraintFn>,
    x0: &DVector<f64>,
    opts: &Options,
) -> Result<(DVector<f64>, Report)> {
    let (f0, g0) = cost(x0);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost at the starting point".into()));
    }
    let Some(cons) = constraints else {
        let (x, f, g, it) = lbfgs(cost, x0, opts.tol_g, opts.max_inner, opts.memory);
        let stat = inf_norm(&g);
        return Ok((
            x,
            Report {
                converged: stat <= opts.tol_g,
                outer_iterations: 1,
                inner_iterations: it,
                initial_cost: f0,
                final_cost: f,
                constraint_residual: 0.0,
                stationarity: stat,
                history: vec![(f, 0.0)],
            },
        ));
    };

    let (c0, _) = cons(x0);
    let mut lambda = DVector::zeros(c0.len());
    let mut mu = opts.initial_penalty;
    let mut x = x0.clone();
    let mut prev_res = inf_norm(&c0);
    let mut report = Report {
        converged: false,
        outer_iterations: 0,
        inner_iterations: 0,
        initial_cost: f0,
        final_cost: f0,
        constraint_residual: prev_res,
        stationarity: f64::INFINITY,
        history: Vec::new(),
    };
    for outer in 0..opts.max_iter {
        let inner_tol = (0.1f64.powi(outer as i32 + 1)).max(0.1 * opts.tol_g);
        let lag = |x: &DVector<f64>| {
            let (f, g) = cost(x);
            let (c, j) = cons(x);
            let w = &c * mu - &lambda;
            (
                f - lambda.dot(&c) + 0.5 * mu * c.norm_squared(),
                g + j.transpose() * w,
            )
        };
        let (xn, _, _, it) = lbfgs(&lag, &x, inner_tol, opts.max_inner, opts.memory);
        x = xn;
        report.inner_iterations += it;
        report.outer_iterations = outer + 1;
        let (f, g) = cost(&x);
        let (c, j) = cons(&x);
        let res = inf_norm(&c);
        lambda -= &c * mu;
        let stat = inf_norm(&(g - j.transpose() * &lambda));
        report.final_cost = f;
        report.constraint_residual = res;
        report.stationarity = stat;
        report.history.push((f, res));
        debug!("outer {outer}: f={f:.6e} |c|={res:.3e} stat={stat:.3e} mu={mu:.1e}");
        if res <= opts.tol_c && stat <= opts.tol_g {
            report.converged = true;
            break;
        }
        if res > 0.25 * prev_res {
            mu *= opts.penalty_growth;
        }
        prev_res = res;
    }
    Ok((x, report))
}

/// Largest relative deviation between the analytic gradient and central
/// differences of step `h`. Near-zero gradients are compared absolutely.
pub fn check_gradient(f: &CostFn, x: &DVector<f64>, h: f64) -> f64 {
    let (_, ga) = f(x);
    let mut gfd = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp).0;
        xp[i] = xi - h;
        let fm = f(&xp).0;
        xp[i] = xi;
        gfd[i] = (fp - fm) / (2.0 * h);
    }
    let scale = inf_norm(&ga).max(inf_norm(&gfd));
    let diff = inf_norm(&(ga - gfd));
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

/// Marks a maximal linearly independent subset of the Jacobian rows,
/// scanning in order (RREF of the transpose with partial pivoting).
pub fn independent_constraints(jacobian: &DMatrix<f64>) -> Vec<bool> {
    let mut m = jacobian.transpose();
    let (rows, cols) = m.shape();
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * scale.max(1.0);
    let mut mask = vec![false; cols];
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold(
                (r, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if val <= tol {
            continue;
        }
        m.swap_rows(r, piv);
        let p = m[(r, c)];
        for k in c..cols {
            m[(r, k)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let factor = m[(i, c)];
                if factor != 0.0 {
                    for k in c..cols {
                        let v = m[(r, k)];
                        m[(i, k)] -= factor * v;
                    }
                }
            }
        }
        mask[c] = true;
        r += 1;
    }
    mask
}

/// Restricts a constraint function to the rows selected by `mask`.
pub fn select_constraints<'a>(
    cons: &'a ConstraintFn<'a>,
    mask: &'a [bool],
) -> impl Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>) + 'a {
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    move |x| {
        let (c, j) = cons(x);
        (c.select_rows(&idx), j.select_rows(&idx))
    }
}

/// Gauss-Newton minimal-norm steps onto `constraints(x) = 0`.
pub fn project_to_feasible(
    cons: &ConstraintFn,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let mut x = x0.clone();
    for _ in 0..max_iter {
        let (c, j) = cons(&x);
        if inf_norm(&c) <= tol {
            return Ok(x);
        }
        let step = j
            .svd(true, true)
            .solve(&c, 1e-12)
            .map_err(|e| Error::Infeasible(e.to_string()))?;
        x -= step;
    }
    let (c, _) = cons(&x);
    if inf_norm(&c) <= tol {
        Ok(x)
    } else {
        Err(Error::Infeasible(format!(
            "residual {:.3e} after {max_iter} projection steps",
            inf_norm(&c)
        )))
    }
}

/// Linear map from a reduced parameter vector to a flat vector of full
/// entries: every entry is either pinned to zero or `coef * param`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMap {
    entries: Vec<Option<(usize, f64)>>,
    n_params: usize,
}

impl ParamMap {
    pub fn identity(n: usize) -> Self {
        Self {
            entries: (0..n).map(|i| Some((i, 1.0))).collect(),
            n_params: n,
        }
    }

    /// One parameter per group; each group lists `(entry, coef)` pairs.
    /// Entries outside every group are pinned to zero.
    pub fn from_groups(full_len: usize, groups: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut entries = vec![None; full_len];
        for (p, g) in groups.iter().enumerate() {
            for &(e, coef) in g {
                if e >= full_len {
                    return Err(Error::IndexOutOfRange {
                        index: e,
                        size: full_len,
                    });
                }
                if entries[e].is_some() {
                    return Err(Error::OverlappingGroups(format!(
                        "entry {e} is claimed by more than one parameter"
                    )));
                }
                entries[e] = Some((p, coef));
            }
        }
        Ok(Self {
            entries,
            n_params: groups.len(),
        })
    }

    /// Two maps side by side: parameters and entries are concatenated.
    pub fn concat(&self, other: &ParamMap) -> ParamMap {
        let shift = self.n_params;
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|e| e.map(|(p, c)| (p + shift, c))));
        ParamMap {
            entries,
            n_params: self.n_params + other.n_params,
        }
    }

    /// Same parameters with every entry index `e` moved to `to(e)`.
    pub fn remap_entries(&self, to: impl Fn(usize) -> usize) -> ParamMap {
        let mut entries = vec![None; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate() {
            entries[to(i)] = *e;
        }
        ParamMap {
            entries,
            n_params: self.n_params,
        }
    }

    pub fn free_count(&self) -> usize {
        self.n_params
    }

    pub fn full_len(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize) -> Option<(usize, f64)> {
        self.entries[i]
    }

    pub fn upscale(&self, params: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.entries.len(),
            self.entries
                .iter()
                .map(|e| e.map_or(0.0, |(p, c)| c * params[p])),
        )
    }

    /// Least-squares inverse of [`ParamMap::upscale`]: each parameter is
    /// the coefficient-weighted mean of its entries.
    pub fn downscale(&self, full: &DVector<f64>) -> DVector<f64> {
        let mut num = DVector::<f64>::zeros(self.n_params);
        let mut den = DVector::<f64>::zeros(self.n_params);
        for (i, e) in self.entries.iter().enumerate() {
            if let Some((p, c)) = *e {
                num[p] += c * full[i];
                den[p] += c * c;
            }
        }
        num.zip_map(&den, |n, d| if d > 0.0 { n / d } else { 0.0 })
    }

    /// Gradient with respect to the parameters from the full gradient.
    pub fn pullback(&self, grad_full: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_params);
        for (i, e) in self.entries.iter().enumerate() {
            if let Some((p, c)) = *e {
                g[p] += c * grad_full[i];
            }
        }
        g
    }

    /// Jacobian with respect to the parameters from a full Jacobian.
    pub fn pullback_jacobian(&self, jac_full: &DMatrix<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(jac_full.nrows(), self.n_params);
        for (i, e) in self.entries.iter().enumerate() {
            if let Some((p, c)) = *e {
                for r in 0..jac_full.nrows() {
                    j[(r, p)] += c * jac_full[(r, i)];
                }
            }
        }
        j
    }
}

/// Reduced parameterization of a constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub map: ParamMap,
    pub free_params: DVector<f64>,
    /// Independent rows of the constraint set at `free_params`.
    pub independent: Vec<bool>,
}

impl ReducedProblem {
    pub fn new(map: ParamMap, free_params: DVector<f64>, cons: &ConstraintFn) -> Self {
        let (_, j) = cons(&free_params);
        let independent = independent_constraints(&j);
        Self {
            map,
            free_params,
            independent,
        }
    }

    pub fn independent_count(&self) -> usize {
        self.independent.iter().filter(|&&b| b).count()
    }
}

/// Orbit-and-group parameterization of a `K x M` matrix (stored column
/// major) whose rows are indexed by coarse vertices and columns by fine
/// vertices. Each orbit representative gets one parameter per neighbour
/// class in `free`; orbit members reuse it through their permutations.
pub fn reduce_dofs(orbits: &SymmetryOrbits, free: &[NeighborClass]) -> Result<ParamMap> {
    let k = orbits.orbit_of.len();
    let m = orbits
        .orbits
        .first()
        .and_then(|o| o.members.first())
        .map_or(0, |mem| mem.fine_perm.len());
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    for (oi, orbit) in orbits.orbits.iter().enumerate() {
        for (class, cols) in &orbits.column_groups[oi] {
            if !free.contains(class) {
                continue;
            }
            let mut g = Vec::new();
            for mem in &orbit.members {
                for &c in cols {
                    let col = mem.fine_perm[c];
                    g.push((mem.vertex + col * k, 1.0));
                }
            }
            groups.push(g);
        }
    }
    ParamMap::from_groups(k * m, &groups)
}
