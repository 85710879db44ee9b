//! Filter banks on the subdivision mesh and the transforms built on them.
//!
//! Level `j` filters connect level `j` (fine, `M` vertices) and level
//! `j - 1` (coarse, `K` vertices): `A` is `K x M`, `B` is `(M-K) x M`,
//! `P` is `M x K`, `Q` is `M x (M-K)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::{read_matrix_csv, write_matrix_csv};
use crate::mesh::{neighbor_sets, vertex_areas, AreaMethod, MeshLevel, SubdivisionMesh, Vertex};
use crate::sphere::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Lazy,
    Interpolating,
    Sint,
    Vbap,
    Optimized,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Lazy => "lazy",
            Family::Interpolating => "interpolating",
            Family::Sint => "sint",
            Family::Vbap => "vbap",
            Family::Optimized => "optimized",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "lazy" => Family::Lazy,
            "interpolating" | "int" => Family::Interpolating,
            "sint" => Family::Sint,
            "vbap" => Family::Vbap,
            "optimized" | "opt" => Family::Optimized,
            "custom" => Family::Custom,
            other => return Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelFilters {
    pub level: usize,
    pub a: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub b: Option<DMatrix<f64>>,
    pub q: Option<DMatrix<f64>>,
}

/// Max-abs residuals of the biorthogonality identities for one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biorthogonality {
    pub ap: f64,
    pub bq: f64,
    pub aq: f64,
    pub bp: f64,
    pub reconstruction: f64,
}

impl Biorthogonality {
    pub fn max(&self) -> f64 {
        self.ap
            .max(self.bq)
            .max(self.aq)
            .max(self.bp)
            .max(self.reconstruction)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn identity_residual(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - DMatrix::identity(m.nrows(), m.ncols())))
}

impl LevelFilters {
    pub fn new(
        level: usize,
        a: DMatrix<f64>,
        p: DMatrix<f64>,
        b: Option<DMatrix<f64>>,
        q: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let (k, m) = a.shape();
        if k >= m || p.shape() != (m, k) {
            return Err(Error::ShapeMismatch(format!(
                "level {level}: A is {k}x{m}, P is {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if b.is_some() != q.is_some() {
            return Err(Error::ShapeMismatch(format!(
                "level {level}: B and Q must be given together"
            )));
        }
        if let (Some(b), Some(q)) = (&b, &q) {
            if b.shape() != (m - k, m) || q.shape() != (m, m - k) {
                return Err(Error::ShapeMismatch(format!(
                    "level {level}: B is {}x{}, Q is {}x{}, expected {}x{m} and {m}x{}",
                    b.nrows(),
                    b.ncols(),
                    q.nrows(),
                    q.ncols(),
                    m - k,
                    m - k
                )));
            }
        }
        Ok(Self { level, a, p, b, q })
    }

    pub fn coarse_len(&self) -> usize {
        self.a.nrows()
    }

    pub fn fine_len(&self) -> usize {
        self.a.ncols()
    }

    pub fn detail_len(&self) -> usize {
        self.fine_len() - self.coarse_len()
    }

    pub fn has_details(&self) -> bool {
        self.b.is_some()
    }

    pub fn b(&self) -> Result<&DMatrix<f64>> {
        self.b
            .as_ref()
            .ok_or(Error::MissingDetailFilters(self.level))
    }

    pub fn q(&self) -> Result<&DMatrix<f64>> {
        self.q
            .as_ref()
            .ok_or(Error::MissingDetailFilters(self.level))
    }

    /// Residuals of AP = I, BQ = I, AQ = 0, BP = 0 and PA + QB = I.
    pub fn biorthogonality(&self) -> Result<Biorthogonality> {
        let (b, q) = (self.b()?, self.q()?);
        Ok(Biorthogonality {
            ap: identity_residual(&(&self.a * &self.p)),
            bq: identity_residual(&(b * q)),
            aq: max_abs(&(&self.a * q)),
            bp: max_abs(&(b * &self.p)),
            reconstruction: identity_residual(&(&self.p * &self.a + q * b)),
        })
    }

    /// Biorthogonal counterpart with the roles of analysis and synthesis
    /// exchanged: (A, B, P, Q) -> (Pᵀ, Qᵀ, Aᵀ, Bᵀ).
    pub fn swapped(&self) -> Result<Self> {
        LevelFilters::new(
            self.level,
            self.p.transpose(),
            self.a.transpose(),
            self.q.as_ref().map(|q| q.transpose()),
            self.b.as_ref().map(|b| b.transpose()),
        )
    }
}

/// Selector of the first `k` of `m` entries (even vertices).
pub fn even_selector(k: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, m, |r, c| if r == c { 1.0 } else { 0.0 })
}

/// Selector of the last `m - k` of `m` entries (odd vertices).
pub fn odd_selector(k: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m - k, m, |r, c| if r + k == c { 1.0 } else { 0.0 })
}

fn level_sizes(mesh: &SubdivisionMesh, level: usize) -> Result<(usize, usize)> {
    if level == 0 || level > mesh.max_level() {
        return Err(Error::LevelOutOfRange {
            level,
            max: mesh.max_level(),
        });
    }
    Ok((mesh.vertex_count(level - 1), mesh.vertex_count(level)))
}

pub fn lazy_filters(mesh: &SubdivisionMesh, level: usize) -> Result<LevelFilters> {
    let (k, m) = level_sizes(mesh, level)?;
    let e = even_selector(k, m);
    let d = odd_selector(k, m);
    LevelFilters::new(
        level,
        e.clone(),
        e.transpose(),
        Some(d.clone()),
        Some(d.transpose()),
    )
}

/// A ← A + S·B, Q ← Q − P·S.
pub fn lift(f: &LevelFilters, s: &DMatrix<f64>) -> Result<LevelFilters> {
    let (b, q) = (f.b()?, f.q()?);
    if s.shape() != (f.coarse_len(), f.detail_len()) {
        return Err(Error::ShapeMismatch(format!(
            "lifting operator is {}x{}, expected {}x{}",
            s.nrows(),
            s.ncols(),
            f.coarse_len(),
            f.detail_len()
        )));
    }
    LevelFilters::new(
        f.level,
        &f.a + s * b,
        f.p.clone(),
        Some(b.clone()),
        Some(q - &f.p * s),
    )
}

/// P ← P + Q·S̃, B ← B − S̃·A.
pub fn dual_lift(f: &LevelFilters, s_tilde: &DMatrix<f64>) -> Result<LevelFilters> {
    let (b, q) = (f.b()?, f.q()?);
    if s_tilde.shape() != (f.detail_len(), f.coarse_len()) {
        return Err(Error::ShapeMismatch(format!(
            "dual lifting operator is {}x{}, expected {}x{}",
            s_tilde.nrows(),
            s_tilde.ncols(),
            f.detail_len(),
            f.coarse_len()
        )));
    }
    LevelFilters::new(
        f.level,
        f.a.clone(),
        &f.p + q * s_tilde,
        Some(b - s_tilde * &f.a),
        Some(q.clone()),
    )
}

/// Linear prediction: every odd vertex is the mean of its parent edge.
pub fn prediction_weights(mesh: &SubdivisionMesh, level: usize) -> Result<DMatrix<f64>> {
    let (k, m) = level_sizes(mesh, level)?;
    let ns = neighbor_sets(mesh, level)?;
    let mut s = DMatrix::zeros(m - k, k);
    for (i, o) in ns.odd.iter().enumerate() {
        for &v in &o.v {
            s[(i, v)] = 0.5;
        }
    }
    Ok(s)
}

fn predicted_filters(mesh: &SubdivisionMesh, level: usize) -> Result<LevelFilters> {
    dual_lift(
        &lazy_filters(mesh, level)?,
        &prediction_weights(mesh, level)?,
    )
}

/// Integrals of the interpolating scaling functions at every level,
/// starting from vertex areas on the finest level of `mesh`.
pub fn scaling_integrals(mesh: &SubdivisionMesh) -> Result<Vec<DVector<f64>>> {
    let n = mesh.max_level();
    let mut out = vec![DVector::zeros(0); n + 1];
    out[n] = vertex_areas(mesh, n, AreaMethod::Voronoi)?;
    for j in (1..=n).rev() {
        let p = predicted_filters(mesh, j)?.p;
        out[j - 1] = p.transpose() * &out[j];
    }
    Ok(out)
}

/// Update weights giving the synthesis wavelets zero integral.
pub fn update_weights(
    mesh: &SubdivisionMesh,
    level: usize,
    integrals: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let (k, m) = level_sizes(mesh, level)?;
    let ns = neighbor_sets(mesh, level)?;
    let (fine, coarse) = (&integrals[level], &integrals[level - 1]);
    let mut s = DMatrix::zeros(k, m - k);
    for (i, o) in ns.odd.iter().enumerate() {
        for &v in &o.v {
            s[(v, i)] = fine[k + i] / (2.0 * coarse[v]);
        }
    }
    Ok(s)
}

fn interpolating_with(
    mesh: &SubdivisionMesh,
    level: usize,
    integrals: &[DVector<f64>],
) -> Result<LevelFilters> {
    lift(
        &predicted_filters(mesh, level)?,
        &update_weights(mesh, level, integrals)?,
    )
}

pub fn interpolating_filters(mesh: &SubdivisionMesh, level: usize) -> Result<LevelFilters> {
    interpolating_with(mesh, level, &scaling_integrals(mesh)?)
}

pub fn sint_filters(mesh: &SubdivisionMesh, level: usize) -> Result<LevelFilters> {
    interpolating_filters(mesh, level)?.swapped()
}

/// Barycentric gains of `source` over the containing triangle of `level`,
/// normalized to sum 1.
pub fn vbap_gains(level: &MeshLevel, source: &Direction) -> Result<DVector<f64>> {
    vbap_gains_vec(level, &source.to_vector())
}

pub fn vbap_gains_vec(level: &MeshLevel, source: &Vertex) -> Result<DVector<f64>> {
    const EPS: f64 = 1e-12;
    let v = &level.vertices;
    for &[a, b, c] in &level.triangles {
        let det = v[a].dot(&v[b].cross(&v[c]));
        if det.abs() < EPS {
            continue;
        }
        let g = [
            source.dot(&v[b].cross(&v[c])) / det,
            v[a].dot(&source.cross(&v[c])) / det,
            v[a].dot(&v[b].cross(source)) / det,
        ];
        if g.iter().all(|&x| x >= -EPS) && g.iter().sum::<f64>() > 0.0 {
            let g = g.map(|x| if x < EPS { 0.0 } else { x });
            let sum: f64 = g.iter().sum();
            let mut out = DVector::zeros(v.len());
            out[a] += g[0] / sum;
            out[b] += g[1] / sum;
            out[c] += g[2] / sum;
            return Ok(out);
        }
    }
    Err(Error::NoContainingTriangle)
}

pub fn vbap_filters(mesh: &SubdivisionMesh, level: usize) -> Result<LevelFilters> {
    let (k, m) = level_sizes(mesh, level)?;
    let coarse = mesh.level(level - 1);
    let fine = mesh.level(level);
    let mut a = DMatrix::zeros(k, m);
    for l in 0..m {
        a.set_column(l, &vbap_gains_vec(coarse, &fine.vertices[l])?);
    }
    LevelFilters::new(level, a, even_selector(k, m).transpose(), None, None)
}

pub fn family_filters(
    mesh: &SubdivisionMesh,
    level: usize,
    family: Family,
) -> Result<LevelFilters> {
    match family {
        Family::Lazy => lazy_filters(mesh, level),
        Family::Interpolating => interpolating_filters(mesh, level),
        Family::Sint => sint_filters(mesh, level),
        Family::Vbap => vbap_filters(mesh, level),
        Family::Optimized | Family::Custom => Err(Error::InvalidArgument(format!(
            "family `{family}` has no closed-form construction"
        ))),
    }
}

/// Filters for levels 1..=n of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub family: Family,
    levels: Vec<LevelFilters>,
}

impl FilterBank {
    pub fn new(family: Family, levels: Vec<LevelFilters>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument(
                "filter bank needs at least one level".into(),
            ));
        }
        for (i, l) in levels.iter().enumerate() {
            if l.level != i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "filter levels must run 1..=n, found {} at position {i}",
                    l.level
                )));
            }
            if i > 0 && levels[i - 1].fine_len() != l.coarse_len() {
                return Err(Error::ShapeMismatch(format!(
                    "level {} coarse size {} does not match level {} fine size {}",
                    l.level,
                    l.coarse_len(),
                    i,
                    levels[i - 1].fine_len()
                )));
            }
        }
        Ok(Self { family, levels })
    }

    /// Closed-form bank for every level of `mesh`.
    pub fn build(mesh: &SubdivisionMesh, family: Family) -> Result<Self> {
        let levels = match family {
            Family::Interpolating | Family::Sint => {
                let integrals = scaling_integrals(mesh)?;
                (1..=mesh.max_level())
                    .map(|j| {
                        let f = interpolating_with(mesh, j, &integrals)?;
                        if family == Family::Sint {
                            f.swapped()
                        } else {
                            Ok(f)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            _ => (1..=mesh.max_level())
                .map(|j| family_filters(mesh, j, family))
                .collect::<Result<Vec<_>>>()?,
        };
        Self::new(family, levels)
    }

    pub fn finest_level(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelFilters] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> Result<&LevelFilters> {
        if j == 0 || j > self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level: j,
                max: self.levels.len(),
            });
        }
        Ok(&self.levels[j - 1])
    }

    /// Number of scaling coefficients at level `j`.
    pub fn size(&self, j: usize) -> Result<usize> {
        if j == 0 {
            Ok(self.levels[0].coarse_len())
        } else {
            Ok(self.level(j)?.fine_len())
        }
    }

    pub fn has_details(&self) -> bool {
        self.levels.iter().all(|l| l.has_details())
    }

    /// Applies A^{from} ... A^{to+1} to a level-`from` vector.
    pub fn downsample(&self, c: &DVector<f64>, from: usize, to: usize) -> Result<DVector<f64>> {
        self.check_range(to, from)?;
        self.check_len(c, from)?;
        let mut c = c.clone();
        for j in (to + 1..=from).rev() {
            c = &self.level(j)?.a * c;
        }
        Ok(c)
    }

    /// Applies P^{to} ... P^{from+1} to a level-`from` vector.
    pub fn upsample(&self, c: &DVector<f64>, from: usize, to: usize) -> Result<DVector<f64>> {
        self.check_range(from, to)?;
        self.check_len(c, from)?;
        let mut c = c.clone();
        for j in from + 1..=to {
            c = &self.level(j)?.p * c;
        }
        Ok(c)
    }

    /// Matrix of the chain A^{from} ... A^{to+1}.
    pub fn analysis_chain(&self, from: usize, to: usize) -> Result<DMatrix<f64>> {
        self.check_range(to, from)?;
        let mut m = DMatrix::identity(self.size(from)?, self.size(from)?);
        for j in (to + 1..=from).rev() {
            m = &self.level(j)?.a * m;
        }
        Ok(m)
    }

    /// Matrix of the chain P^{to} ... P^{from+1}.
    pub fn synthesis_chain(&self, from: usize, to: usize) -> Result<DMatrix<f64>> {
        self.check_range(from, to)?;
        let mut m = DMatrix::identity(self.size(from)?, self.size(from)?);
        for j in from + 1..=to {
            m = &self.level(j)?.p * m;
        }
        Ok(m)
    }

    fn check_range(&self, lo: usize, hi: usize) -> Result<()> {
        let max = self.finest_level();
        if lo > hi || hi > max {
            return Err(Error::LevelOutOfRange {
                level: if hi > max { hi } else { lo },
                max,
            });
        }
        Ok(())
    }

    fn check_len(&self, c: &DVector<f64>, level: usize) -> Result<()> {
        let n = self.size(level)?;
        if c.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} at level {level}, expected {n}",
                c.len()
            )));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for l in &self.levels {
            let mut mats = vec![("A", &l.a), ("P", &l.p)];
            if let (Some(b), Some(q)) = (&l.b, &l.q) {
                mats.push(("B", b));
                mats.push(("Q", q));
            }
            for (name, m) in mats {
                let header = format!(
                    "matrix={name} level={} rows={} cols={} family={}",
                    l.level,
                    m.nrows(),
                    m.ncols(),
                    self.family
                );
                std::fs::write(
                    dir.join(format!("{name}_{}.csv", l.level)),
                    write_matrix_csv(&header, m),
                )?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut levels = Vec::new();
        let mut family = None;
        let mut j = 1;
        while dir.join(format!("A_{j}.csv")).exists() {
            let mut read = |name: &str| -> Result<Option<DMatrix<f64>>> {
                let path = dir.join(format!("{name}_{j}.csv"));
                if !path.exists() {
                    return Ok(None);
                }
                let (meta, m) = read_matrix_csv(&std::fs::read_to_string(path)?)?;
                if let Some(f) = meta.get("family") {
                    family.get_or_insert(f.parse::<Family>().unwrap_or(Family::Custom));
                }
                Ok(Some(m))
            };
            let a = read("A")?.expect("checked above");
            let p =
                read("P")?.ok_or_else(|| Error::InvalidArgument(format!("missing P_{j}.csv")))?;
            let b = read("B")?;
            let q = read("Q")?;
            levels.push(LevelFilters::new(j, a, p, b, q)?);
            j += 1;
        }
        if levels.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no A_1.csv in {}",
                dir.display()
            )));
        }
        Self::new(family.unwrap_or(Family::Custom), levels)
    }
}

/// Coarse scaling coefficients plus the detail coefficients below the
/// truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoefficients {
    pub c0: DVector<f64>,
    /// `details[j]` is d^j, for j < truncation.
    pub details: Vec<DVector<f64>>,
    pub truncation: usize,
    pub finest: usize,
}

impl WaveletCoefficients {
    pub fn dimension(&self) -> usize {
        self.c0.len() + self.details.iter().map(|d| d.len()).sum::<usize>()
    }
}

/// Recursive analysis of a finest-level signal down to level 0. Details
/// are kept only for levels below `truncation`.
pub fn forward_transform(
    bank: &FilterBank,
    f: &DVector<f64>,
    truncation: usize,
) -> Result<WaveletCoefficients> {
    let n = bank.finest_level();
    if truncation > n {
        return Err(Error::LevelOutOfRange {
            level: truncation,
            max: n,
        });
    }
    bank.check_len(f, n)?;
    let mut c = f.clone();
    let mut details = vec![DVector::zeros(0); truncation];
    for j in (1..=n).rev() {
        let l = bank.level(j)?;
        if j - 1 < truncation {
            details[j - 1] = l.b()? * &c;
        }
        c = &l.a * c;
    }
    Ok(WaveletCoefficients {
        c0: c,
        details,
        truncation,
        finest: n,
    })
}

/// Synthesis from level 0 up to `to_level`; missing details count as zero.
pub fn inverse_transform(
    bank: &FilterBank,
    coeffs: &WaveletCoefficients,
    to_level: usize,
) -> Result<DVector<f64>> {
    bank.check_range(0, to_level)?;
    bank.check_len(&coeffs.c0, 0)?;
    let mut c = coeffs.c0.clone();
    for j in 1..=to_level {
        let l = bank.level(j)?;
        c = &l.p * c;
        if let Some(d) = coeffs.details.get(j - 1) {
            c += l.q()? * d;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Scaling,
    Wavelet,
    DualScaling,
    DualWavelet,
}

/// Samples one basis function of level `j` on the finest level.
pub fn materialize(
    bank: &FilterBank,
    j: usize,
    kind: FunctionKind,
    index: usize,
) -> Result<DVector<f64>> {
    let n = bank.finest_level();
    let wavelet = matches!(kind, FunctionKind::Wavelet | FunctionKind::DualWavelet);
    if j > n || (wavelet && j >= n) {
        return Err(Error::LevelOutOfRange { level: j, max: n });
    }
    let size = if wavelet {
        bank.level(j + 1)?.detail_len()
    } else {
        bank.size(j)?
    };
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut e = DVector::zeros(size);
    e[index] = 1.0;
    match kind {
        FunctionKind::Scaling => bank.upsample(&e, j, n),
        FunctionKind::Wavelet => bank.upsample(&(bank.level(j + 1)?.q()? * e), j + 1, n),
        FunctionKind::DualScaling => Ok(bank.analysis_chain(n, j)?.transpose() * e),
        FunctionKind::DualWavelet => {
            let chain = bank.level(j + 1)?.b()? * bank.analysis_chain(n, j + 1)?;
            Ok(chain.transpose() * e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, symmetry_orbits};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn biorthogonal_families() {
        let mesh = build_mesh(3);
        for fam in [Family::Lazy, Family::Interpolating, Family::Sint] {
            let bank = FilterBank::build(&mesh, fam).unwrap();
            for l in bank.levels() {
                let r = l.biorthogonality().unwrap();
                assert!(r.max() < 1e-9, "{fam} level {}: {r:?}", l.level);
            }
        }
    }

    #[test]
    fn lazy_round_trip_and_restriction() {
        let mesh = build_mesh(2);
        let bank = FilterBank::build(&mesh, Family::Lazy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_vec(66, &mut rng);
        let w = forward_transform(&bank, &f, 2).unwrap();
        assert_eq!(w.c0.as_slice(), &f.as_slice()[..6]);
        let back = inverse_transform(&bank, &w, 2).unwrap();
        assert!((back - f).amax() < 1e-12);
    }

    #[test]
    fn interpolating_constant_signal() {
        let mesh = build_mesh(2);
        let bank = FilterBank::build(&mesh, Family::Interpolating).unwrap();
        let w = forward_transform(&bank, &DVector::from_element(66, 1.0), 2).unwrap();
        assert!(w.details.iter().all(|d| d.amax() < 1e-12));
        assert!((w.c0.add_scalar(-1.0)).amax() < 1e-12);
    }

    #[test]
    fn wavelets_have_zero_integral() {
        let mesh = build_mesh(3);
        let bank = FilterBank::build(&mesh, Family::Interpolating).unwrap();
        let areas = vertex_areas(&mesh, 3, AreaMethod::Voronoi).unwrap();
        for j in 0..3 {
            for m in 0..bank.level(j + 1).unwrap().detail_len() {
                let psi = materialize(&bank, j, FunctionKind::Wavelet, m).unwrap();
                assert!(psi.dot(&areas).abs() < 1e-6);
                let dual = materialize(&bank, j, FunctionKind::DualWavelet, m).unwrap();
                assert!(dual.sum().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lifting_reproduces_interpolating() {
        let mesh = build_mesh(2);
        let integrals = scaling_integrals(&mesh).unwrap();
        for j in 1..=2 {
            let lazy = lazy_filters(&mesh, j).unwrap();
            let built = lift(
                &dual_lift(&lazy, &prediction_weights(&mesh, j).unwrap()).unwrap(),
                &update_weights(&mesh, j, &integrals).unwrap(),
            )
            .unwrap();
            assert_eq!(built, interpolating_filters(&mesh, j).unwrap());
        }
    }

    #[test]
    fn lifting_with_zero_is_identity_and_random_preserves_biorthogonality() {
        let mesh = build_mesh(2);
        let f = interpolating_filters(&mesh, 2).unwrap();
        let (k, d) = (f.coarse_len(), f.detail_len());
        assert_eq!(lift(&f, &DMatrix::zeros(k, d)).unwrap(), f);
        assert_eq!(dual_lift(&f, &DMatrix::zeros(d, k)).unwrap(), f);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = DMatrix::from_fn(k, d, |_, _| rng.gen_range(-0.3..0.3));
        let st = DMatrix::from_fn(d, k, |_, _| rng.gen_range(-0.3..0.3));
        let g = dual_lift(&lift(&f, &s).unwrap(), &st).unwrap();
        assert!(g.biorthogonality().unwrap().max() < 1e-9);
        assert!(lift(&f, &DMatrix::zeros(d, k)).is_err());
    }

    #[test]
    fn sint_properties() {
        let mesh = build_mesh(3);
        let bank = FilterBank::build(&mesh, Family::Sint).unwrap();
        for l in bank.levels() {
            for c in 0..l.fine_len() {
                assert!((l.a.column(c).sum() - 1.0).abs() < 1e-9);
            }
            let multi = (0..l.fine_len())
                .filter(|&r| l.p.row(r).iter().filter(|x| x.abs() > 1e-12).count() > 1)
                .count();
            assert!(multi > 0);
        }
    }

    #[test]
    fn vbap_filters_properties() {
        let mesh = build_mesh(3);
        let bank = FilterBank::build(&mesh, Family::Vbap).unwrap();
        for l in bank.levels() {
            let k = l.coarse_len();
            for c in 0..l.fine_len() {
                let col = l.a.column(c);
                assert!((col.sum() - 1.0).abs() < 1e-12);
                assert!(col.iter().all(|&x| (0.0..=1.0).contains(&x)));
                assert!(col.iter().filter(|&&x| x > 0.0).count() <= 3);
                if c < k {
                    assert_eq!(col[c], 1.0);
                }
            }
            let ns = neighbor_sets(&mesh, l.level).unwrap();
            for o in &ns.odd {
                for &v in &o.v {
                    assert!((l.a[(v, o.vertex)] - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vbap_gains_basic_cases() {
        let mesh = build_mesh(0);
        let l = mesh.level(0);
        let g = vbap_gains(l, &Direction::from_degrees(90.0, 0.0)).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12);
        let c = (l.vertices[0] + l.vertices[1] + l.vertices[4]).normalize();
        let g = vbap_gains_vec(l, &c).unwrap();
        for i in [0, 1, 4] {
            assert!((g[i] - 1.0 / 3.0).abs() < 1e-12);
        }
        let empty = MeshLevel {
            vertices: l.vertices.clone(),
            triangles: vec![],
            parent_edge: vec![],
        };
        assert!(matches!(
            vbap_gains_vec(&empty, &c),
            Err(Error::NoContainingTriangle)
        ));
    }

    #[test]
    fn vbap_upsampling_activates_even_only() {
        let mesh = build_mesh(1);
        let bank = FilterBank::build(&mesh, Family::Vbap).unwrap();
        let up = bank.upsample(&DVector::from_element(6, 1.0), 0, 1).unwrap();
        assert!(up.rows(6, 12).iter().all(|&x| x == 0.0));
        assert!(forward_transform(&bank, &DVector::zeros(18), 1).is_err());
        assert!(forward_transform(&bank, &DVector::zeros(18), 0).is_ok());
    }

    #[test]
    fn truncated_reconstruction_sums_detail_contribution() {
        let mesh = build_mesh(2);
        let bank = FilterBank::build(&mesh, Family::Interpolating).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_vec(66, &mut rng);
        let c1 = bank.downsample(&f, 2, 1).unwrap();
        let w = forward_transform(&bank, &f, 1).unwrap();
        let l = bank.level(1).unwrap();
        let rec = &l.p * &w.c0 + l.q().unwrap() * &w.details[0];
        assert!((rec - &c1).amax() < 1e-9);
        assert!((inverse_transform(&bank, &w, 1).unwrap() - c1).amax() < 1e-9);
        assert_eq!(w.dimension(), 18);
    }

    #[test]
    fn materialize_edge_cases() {
        let mesh = build_mesh(2);
        let bank = FilterBank::build(&mesh, Family::Sint).unwrap();
        let phi = materialize(&bank, 2, FunctionKind::Scaling, 5).unwrap();
        assert_eq!(phi[5], 1.0);
        assert_eq!(phi.sum(), 1.0);
        assert!(materialize(&bank, 0, FunctionKind::Scaling, 6).is_err());
        assert!(materialize(&bank, 2, FunctionKind::Wavelet, 0).is_err());
    }

    #[test]
    fn materialized_scaling_functions_follow_orbits() {
        let mesh = build_mesh(2);
        let bank = FilterBank::build(&mesh, Family::Interpolating).unwrap();
        let orbits = symmetry_orbits(&mesh, 2).unwrap();
        let fine_perm = |member: &crate::mesh::OrbitMember| member.fine_perm.clone();
        for orbit in &orbits.orbits {
            let rep = materialize(&bank, 1, FunctionKind::Scaling, orbit.representative).unwrap();
            for mem in &orbit.members {
                let phi = materialize(&bank, 1, FunctionKind::Scaling, mem.vertex).unwrap();
                let perm = fine_perm(mem);
                for (i, &pi) in perm.iter().enumerate() {
                    assert!((phi[pi] - rep[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bank_csv_round_trip() {
        let mesh = build_mesh(2);
        let dir = std::env::temp_dir().join(format!("sphwave-bank-{}", std::process::id()));
        let bank = FilterBank::build(&mesh, Family::Sint).unwrap();
        bank.save(&dir).unwrap();
        let back = FilterBank::load(&dir).unwrap();
        assert_eq!(back, bank);
        std::fs::remove_dir_all(&dir).ok();
    }
}
