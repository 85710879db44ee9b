//! Numerical synthesis of the optimized ("OPT") filter family.
//!
//! Stage 1 finds the scaling filters A, P level by level under AP = I.
//! Stage 2 completes B, Q algebraically.

use std::fmt::Write as _;

use log::info;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::fmt_real;
use crate::mesh::{neighbor_sets, symmetry_orbits, NeighborClass, SubdivisionMesh};
use crate::optcore::{self, independent_constraints, project_to_feasible, reduce_dofs, ParamMap};
use crate::wavelets::{
    dual_lift, lazy_filters, prediction_weights, sint_filters, Family, FilterBank, LevelFilters,
};

/// Target for P·A at fine level `level`, one column per fine vertex.
pub fn build_lambda(mesh: &SubdivisionMesh, level: usize) -> Result<DMatrix<f64>> {
    let ns = neighbor_sets(mesh, level)?;
    let m = mesh.vertex_count(level);
    let mut lambda = DMatrix::zeros(m, m);
    for o in &ns.odd {
        let g = 1.0 / 3.0;
        lambda[(o.vertex, o.vertex)] = g;
        for &k in o.v.iter().chain(&o.f) {
            lambda[(k, o.vertex)] += g / 2.0;
        }
    }
    for k in 0..ns.coarse_count {
        let inc = ns.incident_odd(k);
        let g = 2.0 / (2.0 + inc.len() as f64);
        lambda[(k, k)] = g;
        for l in inc {
            lambda[(l, k)] = g / 2.0;
        }
    }
    Ok(lambda)
}

/// Number of entries of A at `level` before any reduction.
pub fn unreduced_unknowns(mesh: &SubdivisionMesh, level: usize) -> usize {
    mesh.vertex_count(level - 1) * mesh.vertex_count(level)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Sint,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletOptConfig {
    pub alpha_lambda: f64,
    pub alpha_p1: f64,
    pub alpha_p2: f64,
    pub alpha_neg: f64,
    /// Impose unit column sums of A as equality constraints on top of the
    /// C_p1 penalty.
    pub exact_pressure: bool,
    pub init: Init,
    pub optimizer: optcore::Options,
}

impl Default for WaveletOptConfig {
    fn default() -> Self {
        Self {
            alpha_lambda: 1.0,
            alpha_p1: 10.0,
            alpha_p2: 10.0,
            alpha_neg: 100.0,
            exact_pressure: true,
            init: Init::Sint,
            optimizer: optcore::Options::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub unreduced: usize,
    pub free_params: usize,
    pub constraints: usize,
    pub independent_constraints: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub constraint_residual: f64,
    pub converged: bool,
    pub history: Vec<(f64, f64)>,
}

/// (row, col, coefficient) of one matrix entry driven by a parameter.
type Entry = (usize, usize, f64);

/// Parameterization of (A, P) at one level, concatenated as
/// `[vec(A), vec(P)]` in column-major order.
pub struct FilterTemplate {
    pub map: ParamMap,
    pub coarse: usize,
    pub fine: usize,
    /// Per parameter: (row, col, coefficient) of its A entries, then of its
    /// P entries.
    support: Vec<(Vec<Entry>, Vec<Entry>)>,
}

impl FilterTemplate {
    pub fn new(mesh: &SubdivisionMesh, level: usize) -> Result<Self> {
        let orbits = symmetry_orbits(mesh, level)?;
        let classes = [
            NeighborClass::Itself,
            NeighborClass::V,
            NeighborClass::F,
            NeighborClass::E,
        ];
        let a = reduce_dofs(&orbits, &classes)?;
        let (k, m) = (mesh.vertex_count(level - 1), mesh.vertex_count(level));
        // A is K x M with index r + c K; P is M x K with index c + r M.
        let p = a.remap_entries(|e| (e / k) + (e % k) * m);
        let map = a.concat(&p);
        let mut support = vec![(Vec::new(), Vec::new()); map.free_count()];
        for i in 0..map.full_len() {
            if let Some((q, coef)) = map.entry(i) {
                if i < k * m {
                    support[q].0.push((i % k, i / k, coef));
                } else {
                    let e = i - k * m;
                    support[q].1.push((e % m, e / m, coef));
                }
            }
        }
        Ok(Self {
            map,
            coarse: k,
            fine: m,
            support,
        })
    }

    /// AP − I (row-major), optionally followed by the column sums of A
    /// minus one, with the Jacobian in the reduced parameters.
    pub fn constraints(
        &self,
        params: &DVector<f64>,
        exact_pressure: bool,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let (k, m) = (self.coarse, self.fine);
        let (a, p) = self.matrices(params);
        let ap = &a * &p;
        let rows = k * k + if exact_pressure { m } else { 0 };
        let mut c = DVector::zeros(rows);
        for x in 0..k {
            for y in 0..k {
                c[x * k + y] = ap[(x, y)] - if x == y { 1.0 } else { 0.0 };
            }
        }
        if exact_pressure {
            for col in 0..m {
                c[k * k + col] = a.column(col).sum() - 1.0;
            }
        }
        let mut jac = DMatrix::zeros(rows, self.support.len());
        for (q, (sa, sp)) in self.support.iter().enumerate() {
            let mut col = jac.column_mut(q);
            for &(r, l, coef) in sa {
                for y in 0..k {
                    col[r * k + y] += coef * p[(l, y)];
                }
                if exact_pressure {
                    col[k * k + l] += coef;
                }
            }
            for &(l, y, coef) in sp {
                for x in 0..k {
                    col[x * k + y] += coef * a[(x, l)];
                }
            }
        }
        (c, jac)
    }

    pub fn split(&self, full: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.coarse * self.fine;
        (
            DMatrix::from_column_slice(self.coarse, self.fine, &full.as_slice()[..n]),
            DMatrix::from_column_slice(self.fine, self.coarse, &full.as_slice()[n..]),
        )
    }

    pub fn join(&self, a: &DMatrix<f64>, p: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.coarse * self.fine,
            a.as_slice().iter().chain(p.as_slice()).copied(),
        )
    }

    pub fn matrices(&self, params: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        self.split(&self.map.upscale(params))
    }
}

/// Stage-1 objective at one level.
struct LevelCost {
    lambda: DMatrix<f64>,
    /// Frozen chains P^{j-1}..P^{k+1} A^{k+1}..A^{j-1}, one per depth k.
    chains: Vec<DMatrix<f64>>,
    cfg: WaveletOptConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageOneTerms {
    pub lambda: f64,
    pub p1: f64,
    pub p2: f64,
    pub neg: f64,
}

impl LevelCost {
    fn eval(
        &self,
        a: &DMatrix<f64>,
        p: &DMatrix<f64>,
    ) -> (StageOneTerms, DMatrix<f64>, DMatrix<f64>) {
        let (k, m) = a.shape();
        let mut ga = DMatrix::zeros(k, m);
        let mut gp = DMatrix::zeros(m, k);
        let mut t = StageOneTerms::default();

        let r = p * a - &self.lambda;
        let nl = (m * m) as f64;
        t.lambda = r.norm_squared() / nl;
        ga += p.transpose() * &r * (2.0 * self.cfg.alpha_lambda / nl);
        gp += &r * a.transpose() * (2.0 * self.cfg.alpha_lambda / nl);

        let colsum = DVector::from_iterator(m, a.column_iter().map(|c| c.sum() - 1.0));
        t.p1 = colsum.norm_squared() / m as f64;
        for c in 0..m {
            let g = 2.0 * self.cfg.alpha_p1 * colsum[c] / m as f64;
            for r in 0..k {
                ga[(r, c)] += g;
            }
        }

        let depths = self.chains.len() as f64;
        let u = DVector::from_iterator(k, p.column_iter().map(|c| c.sum()));
        for chain in &self.chains {
            let ma = chain * a;
            let res = DVector::from_iterator(m, (ma.transpose() * &u).iter().map(|x| x - 1.0));
            t.p2 += res.norm_squared() / (m as f64 * depths);
            let scale = 2.0 * self.cfg.alpha_p2 / (m as f64 * depths);
            // d/dA: (uᵀM)ᵀ rᵀ
            let um = chain.transpose() * &u;
            ga += &um * res.transpose() * scale;
            // d/dP[l, c]: (M A r)_c for every row l
            let mar = &ma * &res * scale;
            for l in 0..m {
                for c in 0..k {
                    gp[(l, c)] += mar[c];
                }
            }
        }

        let nn = (k * m) as f64;
        for (x, g) in a.iter().zip(ga.iter_mut()) {
            if *x < 0.0 {
                t.neg += x * x / nn;
                *g += 2.0 * self.cfg.alpha_neg * x / nn;
            }
        }
        for (x, g) in p.iter().zip(gp.iter_mut()) {
            if *x < 0.0 {
                t.neg += x * x / nn;
                *g += 2.0 * self.cfg.alpha_neg * x / nn;
            }
        }
        (t, ga, gp)
    }

    fn total(&self, t: &StageOneTerms) -> f64 {
        self.cfg.alpha_lambda * t.lambda
            + self.cfg.alpha_p1 * t.p1
            + self.cfg.alpha_p2 * t.p2
            + self.cfg.alpha_neg * t.neg
    }
}

/// AP − I (row-major over the K x K entries) and its Jacobian with respect
/// to `[vec(A), vec(P)]`.
pub fn orthonormality(a: &DMatrix<f64>, p: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (k, m) = a.shape();
    let ap = a * p;
    let mut c = DVector::zeros(k * k);
    let mut j = DMatrix::zeros(k * k, 2 * k * m);
    for x in 0..k {
        for y in 0..k {
            let row = x * k + y;
            c[row] = ap[(x, y)] - if x == y { 1.0 } else { 0.0 };
            for l in 0..m {
                // ∂/∂A[x,l] = P[l,y]; ∂/∂P[l,y] = A[x,l]
                j[(row, x + l * k)] = p[(l, y)];
                j[(row, k * m + l + y * m)] = a[(x, l)];
            }
        }
    }
    (c, j)
}

fn frozen_chains(frozen: &[LevelFilters], k: usize) -> Vec<DMatrix<f64>> {
    let top = frozen.len();
    (0..=top)
        .map(|depth| {
            let mut c = DMatrix::identity(k, k);
            for j in (depth + 1..=top).rev() {
                c = &frozen[j - 1].a * c;
            }
            for j in depth + 1..=top {
                c = &frozen[j - 1].p * c;
            }
            c
        })
        .collect()
}

/// Optimizes A, P at `level` with the coarser levels held fixed.
pub fn optimize_level(
    mesh: &SubdivisionMesh,
    level: usize,
    frozen: &[LevelFilters],
    cfg: &WaveletOptConfig,
) -> Result<(LevelFilters, LevelReport)> {
    if level == 0 || level > mesh.max_level() {
        return Err(Error::LevelOutOfRange {
            level,
            max: mesh.max_level(),
        });
    }
    if frozen.len() != level - 1 {
        return Err(Error::InvalidArgument(format!(
            "level {level} needs {} frozen levels, got {}",
            level - 1,
            frozen.len()
        )));
    }
    let tpl = FilterTemplate::new(mesh, level)?;
    let (k, m) = (tpl.coarse, tpl.fine);
    let cost = LevelCost {
        lambda: build_lambda(mesh, level)?,
        chains: frozen_chains(frozen, k),
        cfg: cfg.clone(),
    };
    let map = &tpl.map;
    let reduced_cons = |x: &DVector<f64>| tpl.constraints(x, cfg.exact_pressure);

    let start = match cfg.init {
        Init::Sint => {
            let s = sint_filters(mesh, level)?;
            map.downscale(&tpl.join(&s.a, &s.p))
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DVector::from_fn(map.free_count(), |_, _| rng.gen_range(0.0..1.0))
        }
    };
    // interpolating prediction with the lazy split lies in the template and
    // is feasible, which gives a full-rank reference point for the
    // constraint selection
    let reference = {
        let predicted = dual_lift(
            &lazy_filters(mesh, level)?,
            &prediction_weights(mesh, level)?,
        )?;
        map.downscale(&tpl.join(&predicted.a, &predicted.p))
    };
    let mask = independent_constraints(&reduced_cons(&reference).1);
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let selected = |x: &DVector<f64>| {
        let (c, j) = reduced_cons(x);
        (c.select_rows(&idx), j.select_rows(&idx))
    };
    let x0 = project_to_feasible(&selected, &start, 1e-12, 200)?;

    let f = |x: &DVector<f64>| {
        let (a, p) = tpl.matrices(x);
        let (t, ga, gp) = cost.eval(&a, &p);
        (cost.total(&t), map.pullback(&tpl.join(&ga, &gp)))
    };
    let (x, rep) = optcore::minimize(&f, Some(&selected), &x0, &cfg.optimizer)?;
    let x = project_to_feasible(&reduced_cons, &x, 1e-13, 50)?;
    let (a, p) = tpl.matrices(&x);
    let (c, _) = tpl.constraints(&x, cfg.exact_pressure);
    let residual = c.amax();
    info!(
        "level {level}: {} params, {} of {} constraints independent, f {:.6e} -> {:.6e}, |AP-I| {:.2e}",
        map.free_count(),
        idx.len(),
        c.len(),
        rep.initial_cost,
        f(&x).0,
        residual
    );
    let report = LevelReport {
        level,
        unreduced: k * m,
        free_params: map.free_count(),
        constraints: c.len(),
        independent_constraints: idx.len(),
        initial_cost: rep.initial_cost,
        final_cost: f(&x).0,
        constraint_residual: residual,
        converged: rep.converged,
        history: rep.history,
    };
    Ok((LevelFilters::new(level, a, p, None, None)?, report))
}

/// Breakdown of the stage-1 cost for given filters.
pub fn stage_one_terms(
    mesh: &SubdivisionMesh,
    level: usize,
    frozen: &[LevelFilters],
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    cfg: &WaveletOptConfig,
) -> Result<StageOneTerms> {
    let cost = LevelCost {
        lambda: build_lambda(mesh, level)?,
        chains: frozen_chains(frozen, mesh.vertex_count(level - 1)),
        cfg: cfg.clone(),
    };
    Ok(cost.eval(a, p).0)
}

/// Stage 1 for levels 1..=top, each level frozen once optimized.
pub fn optimize_scaling_filters(
    mesh: &SubdivisionMesh,
    top: usize,
    cfg: &WaveletOptConfig,
) -> Result<(Vec<LevelFilters>, Vec<LevelReport>)> {
    let mut levels = Vec::new();
    let mut reports = Vec::new();
    for j in 1..=top {
        let (l, r) = optimize_level(mesh, j, &levels, cfg)?;
        levels.push(l);
        reports.push(r);
    }
    Ok((levels, reports))
}

/// Detail filters completing a biorthogonal set: Q spans ker A with
/// orthonormal columns, B = Qᵀ(I − PA).
pub fn complete_wavelet_filters(
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (k, m) = a.shape();
    if p.shape() != (m, k) {
        return Err(Error::ShapeMismatch(
            "P must be the transpose shape of A".into(),
        ));
    }
    let ap = a * p;
    let res = (&ap - DMatrix::identity(k, k)).amax();
    if res > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "AP differs from I by {res:.2e}"
        )));
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
    if rank != k {
        return Err(Error::RankDeficient(format!(
            "A has rank {rank}, kernel dimension {} instead of {}",
            m - rank,
            m - k
        )));
    }
    let mut padded = DMatrix::zeros(m, m);
    padded.view_mut((0, 0), (m, k)).copy_from(&a.transpose());
    let q_full = padded.qr().q();
    let q = q_full.columns(k, m - k).into_owned();
    let b = q.transpose() * (DMatrix::identity(m, m) - p * a);
    Ok((b, q))
}

/// Full OPT bank up to `top` with completed detail filters.
pub fn optimized_bank(
    mesh: &SubdivisionMesh,
    top: usize,
    cfg: &WaveletOptConfig,
) -> Result<(FilterBank, Vec<LevelReport>)> {
    let (levels, reports) = optimize_scaling_filters(mesh, top, cfg)?;
    let full = levels
        .into_iter()
        .map(|l| {
            let (b, q) = complete_wavelet_filters(&l.a, &l.p)?;
            LevelFilters::new(l.level, l.a, l.p, Some(b), Some(q))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((FilterBank::new(Family::Optimized, full)?, reports))
}

/// Σ min(a, 0)² + Σ min(p, 0)².
pub fn negative_mass(a: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    a.iter().chain(p.iter()).map(|x| x.min(0.0).powi(2)).sum()
}

/// Run report as CSV: one summary line per level, then the cost
/// trajectory.
pub fn reports_to_csv(reports: &[LevelReport]) -> String {
    let mut s = String::from(
        "level,unreduced,free_params,constraints,independent,initial_cost,final_cost,residual,converged\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.level,
            r.unreduced,
            r.free_params,
            r.constraints,
            r.independent_constraints,
            fmt_real(r.initial_cost),
            fmt_real(r.final_cost),
            fmt_real(r.constraint_residual),
            r.converged
        );
    }
    s.push_str("\nlevel,outer_iteration,cost,residual\n");
    for r in reports {
        for (i, (c, res)) in r.history.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.level,
                i + 1,
                fmt_real(*c),
                fmt_real(*res)
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::wavelets::interpolating_filters;

    #[test]
    fn lambda_columns() {
        let mesh = build_mesh(2);
        for level in 1..=2 {
            let l = build_lambda(&mesh, level).unwrap();
            for c in 0..l.ncols() {
                assert!((l.column(c).sum() - 1.0).abs() < 1e-15);
            }
        }
        let l1 = build_lambda(&mesh, 1).unwrap();
        assert!((l1[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(l1.column(0).iter().filter(|&&x| x == 1.0 / 6.0).count(), 4);
        assert!((l1[(6, 6)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(l1.column(6).iter().filter(|&&x| x == 1.0 / 6.0).count(), 4);
        let l2 = build_lambda(&mesh, 2).unwrap();
        assert!((l2[(6, 6)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unreduced_counts() {
        let mesh = build_mesh(2);
        assert_eq!(unreduced_unknowns(&mesh, 1), 108);
        assert_eq!(unreduced_unknowns(&mesh, 2), 1188);
    }

    #[test]
    fn template_round_trip() {
        let mesh = build_mesh(2);
        let tpl = FilterTemplate::new(&mesh, 2).unwrap();
        let x = DVector::from_fn(tpl.map.free_count(), |i, _| i as f64 + 1.0);
        let (a, p) = tpl.matrices(&x);
        assert_eq!(tpl.map.downscale(&tpl.join(&a, &p)), x);
        // the same parameters populate matching entries of A and Pᵀ
        assert_eq!(
            a.iter().filter(|v| **v != 0.0).count(),
            p.iter().filter(|v| **v != 0.0).count()
        );
    }

    #[test]
    fn reduced_constraints_match_full() {
        let mesh = build_mesh(2);
        let tpl = FilterTemplate::new(&mesh, 2).unwrap();
        let x = DVector::from_fn(tpl.map.free_count(), |i, _| 0.05 * i as f64 - 0.3);
        let (a, p) = tpl.matrices(&x);
        let (c, j) = orthonormality(&a, &p);
        let (cr, jr) = tpl.constraints(&x, false);
        assert!((c - cr).amax() < 1e-14);
        assert!((tpl.map.pullback_jacobian(&j) - &jr).amax() < 1e-12);
        let (cp, jp) = tpl.constraints(&x, true);
        let (k, m) = (tpl.coarse, tpl.fine);
        assert_eq!(cp.len(), k * k + m);
        assert!((cp[k * k] - (a.column(0).sum() - 1.0)).abs() < 1e-14);
        let h = 1e-7;
        for q in 0..tpl.map.free_count() {
            let mut xp = x.clone();
            xp[q] += h;
            let fd = (tpl.constraints(&xp, true).0 - &cp) / h;
            assert!((fd - jp.column(q)).amax() < 1e-5);
        }
    }

    #[test]
    fn orthonormality_jacobian() {
        let mesh = build_mesh(1);
        let f = interpolating_filters(&mesh, 1).unwrap();
        let (c, j) = orthonormality(&f.a, &f.p);
        assert!(c.amax() < 1e-12);
        let tpl = FilterTemplate::new(&mesh, 1).unwrap();
        let x = DVector::from_fn(tpl.map.free_count(), |i, _| 0.1 * i as f64 - 0.2);
        let full = tpl.map.upscale(&x);
        let (a, p) = tpl.split(&full);
        let (c0, j0) = orthonormality(&a, &p);
        let h = 1e-6;
        for e in [0, 7, 130, 200] {
            let mut fp = full.clone();
            fp[e] += h;
            let (ap, pp) = tpl.split(&fp);
            let (c1, _) = orthonormality(&ap, &pp);
            let fd = (c1 - &c0) / h;
            assert!((fd - j0.column(e)).amax() < 1e-6);
        }
        assert_eq!(j.nrows(), 36);
    }

    #[test]
    fn stage_one_gradient() {
        let mesh = build_mesh(2);
        let (levels, _) = optimize_scaling_filters(&mesh, 1, &WaveletOptConfig::default()).unwrap();
        let cfg = WaveletOptConfig::default();
        let cost = LevelCost {
            lambda: build_lambda(&mesh, 2).unwrap(),
            chains: frozen_chains(&levels, 18),
            cfg,
        };
        let tpl = FilterTemplate::new(&mesh, 2).unwrap();
        let f = |x: &DVector<f64>| {
            let (a, p) = tpl.split(x);
            let (t, ga, gp) = cost.eval(&a, &p);
            (cost.total(&t), tpl.join(&ga, &gp))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_fn(2 * 18 * 66, |_, _| rng.gen_range(-0.2..0.6));
        assert!(optcore::check_gradient(&f, &x, 1e-6) < 1e-4);
    }

    #[test]
    fn completion_of_lazy_and_interpolating() {
        let mesh = build_mesh(2);
        for f in [
            lazy_filters(&mesh, 2).unwrap(),
            interpolating_filters(&mesh, 2).unwrap(),
        ] {
            let (b, q) = complete_wavelet_filters(&f.a, &f.p).unwrap();
            let full = LevelFilters::new(2, f.a.clone(), f.p.clone(), Some(b), Some(q)).unwrap();
            assert!(full.biorthogonality().unwrap().max() < 1e-10);
        }
        let f = lazy_filters(&mesh, 1).unwrap();
        let mut a = f.a.clone();
        a.set_row(1, &f.a.row(0).clone_owned());
        assert!(complete_wavelet_filters(&a, &f.p).is_err());
    }

    #[test]
    fn level_one_optimization_properties() {
        let mesh = build_mesh(1);
        let (f, rep) = optimize_level(&mesh, 1, &[], &WaveletOptConfig::default()).unwrap();
        assert!(rep.constraint_residual < 1e-10);
        assert!(rep.independent_constraints < 36);
        assert!(rep.final_cost <= rep.initial_cost + 1e-12);
        for c in 0..f.fine_len() {
            assert!((f.a.column(c).sum() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn frozen_levels_are_untouched() {
        let mesh = build_mesh(2);
        let cfg = WaveletOptConfig::default();
        let (levels, _) = optimize_scaling_filters(&mesh, 1, &cfg).unwrap();
        let before = levels[0].clone();
        let _ = optimize_level(&mesh, 2, &levels, &cfg).unwrap();
        assert_eq!(levels[0], before);
    }
}
