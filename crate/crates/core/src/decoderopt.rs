//! Psychoacoustic observables, the decoder objective and its optimization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{read_matrix_csv, write_matrix_csv};
use crate::mesh::{vertex_permutation, SubdivisionMesh};
use crate::optcore::{self, ParamMap};
use crate::sphere::{
    angle_between, apply_degree_weights, channel_count, decode_analytic, sample_directions,
    sh_vector, AnalyticMode, DegreeScheme, Direction, SamplingScheme, SpeakerLayout,
};
use crate::wavelets::{vbap_gains, Family, FilterBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Lf,
    Hf,
    Universal,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Lf => "lf",
            Band::Hf => "hf",
            Band::Universal => "universal",
        })
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lf" => Ok(Band::Lf),
            "hf" => Ok(Band::Hf),
            "universal" => Ok(Band::Universal),
            _ => Err(Error::InvalidArgument(format!("unknown band `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Ambisonics { order: usize },
    Swf { family: Family, level: usize },
}

impl Format {
    pub fn channels(&self) -> usize {
        match *self {
            Format::Ambisonics { order } => channel_count(order),
            // octahedral subdivision: 4·4^ℓ + 2 vertices
            Format::Swf { level, .. } => 4 * 4usize.pow(level as u32) + 2,
        }
    }

    fn header(&self) -> String {
        match self {
            Format::Ambisonics { order } => format!("format=ambisonics order={order}"),
            Format::Swf { family, level } => format!("format=swf family={family} level={level}"),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Ambisonics { order } => write!(f, "ambi:{order}"),
            Format::Swf { family, level } => write!(f, "swf:{family}:{level}"),
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    /// `ambi:L` or `swf:FAMILY:LEVEL`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{t}` in format `{s}`")))
        };
        match parts.as_slice() {
            ["ambi", l] => Ok(Format::Ambisonics { order: num(l)? }),
            ["swf", fam, l] => Ok(Format::Swf {
                family: fam.parse()?,
                level: num(l)?,
            }),
            _ => Err(Error::InvalidArgument(format!(
                "format `{s}` is not `ambi:L` or `swf:FAMILY:LEVEL`"
            ))),
        }
    }
}

/// Speakers × channels gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingMatrix {
    pub gains: DMatrix<f64>,
    pub format: Format,
    pub layout: String,
    pub band: Band,
}

impl DecodingMatrix {
    pub fn new(gains: DMatrix<f64>, format: Format, layout: String, band: Band) -> Result<Self> {
        if gains.ncols() != format.channels() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns for format {format} with {} channels",
                gains.ncols(),
                format.channels()
            )));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("decoding gains".into()));
        }
        Ok(Self {
            gains,
            format,
            layout,
            band,
        })
    }

    pub fn speakers(&self) -> usize {
        self.gains.nrows()
    }

    pub fn channels(&self) -> usize {
        self.gains.ncols()
    }

    pub fn with_band(mut self, band: Band) -> Self {
        self.band = band;
        self
    }

    pub fn to_csv(&self) -> String {
        let header = format!(
            "layout={} {} band={} rows={} cols={}",
            self.layout,
            self.format.header(),
            self.band,
            self.speakers(),
            self.channels()
        );
        write_matrix_csv(&header, &self.gains)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let (meta, gains) = read_matrix_csv(text)?;
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::parse(1, format!("header lacks `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse(1, format!("`{k}` is not an integer")))
        };
        let format = match get("format")?.as_str() {
            "ambisonics" => Format::Ambisonics {
                order: num("order")?,
            },
            "swf" => Format::Swf {
                family: get("family")?.parse()?,
                level: num("level")?,
            },
            other => return Err(Error::parse(1, format!("unknown format `{other}`"))),
        };
        let band = meta
            .get("band")
            .map_or(Ok(Band::Universal), |b| b.parse())?;
        Self::new(
            gains,
            format,
            meta.get("layout").cloned().unwrap_or_default(),
            band,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }
}

/// SWF encoder: VBAP on the finest mesh, then analysis down to `level`.
#[derive(Debug, Clone)]
pub struct SwfEncoder {
    mesh: SubdivisionMesh,
    bank: FilterBank,
    level: usize,
}

impl SwfEncoder {
    pub fn new(mesh: SubdivisionMesh, bank: FilterBank, level: usize) -> Result<Self> {
        if bank.finest_level() != mesh.max_level() {
            return Err(Error::ShapeMismatch(format!(
                "filter bank has {} levels, mesh has {}",
                bank.finest_level(),
                mesh.max_level()
            )));
        }
        if level > mesh.max_level() {
            return Err(Error::LevelOutOfRange {
                level,
                max: mesh.max_level(),
            });
        }
        Ok(Self { mesh, bank, level })
    }

    /// Closed-form family on a mesh refined to `max(2, level)`.
    pub fn with_family(family: Family, level: usize) -> Result<Self> {
        let mesh = crate::mesh::build_mesh(level.max(2));
        let bank = FilterBank::build(&mesh, family)?;
        Self::new(mesh, bank, level)
    }

    pub fn mesh(&self) -> &SubdivisionMesh {
        &self.mesh
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Scaling coefficients at the finest level for a point source.
    pub fn encode_finest(&self, dir: &Direction) -> Result<DVector<f64>> {
        vbap_gains(self.mesh.level(self.mesh.max_level()), dir)
    }

    pub fn encode(&self, dir: &Direction) -> Result<DVector<f64>> {
        let n = self.mesh.max_level();
        self.bank
            .downsample(&self.encode_finest(dir)?, n, self.level)
    }

    pub fn vertex_directions(&self, level: usize) -> Vec<Direction> {
        self.mesh
            .level(level)
            .vertices
            .iter()
            .map(Direction::from_vector)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Ambisonics { order: usize },
    Swf(Box<SwfEncoder>),
}

impl Encoder {
    pub fn format(&self) -> Format {
        match self {
            Encoder::Ambisonics { order } => Format::Ambisonics { order: *order },
            Encoder::Swf(s) => Format::Swf {
                family: s.bank.family,
                level: s.level,
            },
        }
    }

    pub fn channels(&self) -> usize {
        self.format().channels()
    }

    pub fn encode(&self, dir: &Direction) -> Result<DVector<f64>> {
        match self {
            Encoder::Ambisonics { order } => Ok(sh_vector(*order, dir)),
            Encoder::Swf(s) => s.encode(dir),
        }
    }

    /// Channels × directions.
    pub fn encode_all(&self, dirs: &[Direction]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.channels(), dirs.len());
        for (j, d) in dirs.iter().enumerate() {
            m.set_column(j, &self.encode(d)?);
        }
        Ok(m)
    }

    /// Left/right mirror as (source channel, sign) per channel: the
    /// mirrored signal has `y'[c] = sign * y[source]`.
    pub fn channel_mirror(&self) -> Result<Vec<(usize, f64)>> {
        match self {
            Encoder::Ambisonics { order } => {
                let mut out = Vec::with_capacity(self.channels());
                for l in 0..=*order as i64 {
                    for m in -l..=l {
                        let c = out.len();
                        out.push((c, if m < 0 { -1.0 } else { 1.0 }));
                    }
                }
                Ok(out)
            }
            Encoder::Swf(s) => {
                let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
                let perm = vertex_permutation(s.mesh.level(s.level), &flip)?;
                Ok(perm.into_iter().map(|p| (p, 1.0)).collect())
            }
        }
    }

    /// Default evaluation directions: finest mesh vertices for SWF,
    /// 900 Fibonacci points for Ambisonics.
    pub fn default_directions(&self) -> Vec<Direction> {
        match self {
            Encoder::Ambisonics { .. } => sample_directions(900, SamplingScheme::Fibonacci),
            Encoder::Swf(s) => s.vertex_directions(s.mesh.max_level()),
        }
    }
}

/// Per-direction observables. Intensity entries are NaN where E = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub directions: Vec<Direction>,
    pub p: Vec<f64>,
    pub e: Vec<f64>,
    pub vr: Vec<f64>,
    pub vt: Vec<f64>,
    pub ir: Vec<f64>,
    pub it: Vec<f64>,
    pub eph: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    finite.iter().sum::<f64>() / finite.len().max(1) as f64
}

impl Observables {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn mean_ir(&self) -> f64 {
        mean(&self.ir)
    }

    pub fn mean_eph(&self) -> f64 {
        mean(&self.eph)
    }
}

/// Observables of given speaker signals (speakers × directions).
pub fn observables_from_signals(
    signals: &DMatrix<f64>,
    speakers: &[Vector3<f64>],
    directions: &[Direction],
) -> Observables {
    let n = directions.len();
    let mut o = Observables {
        directions: directions.to_vec(),
        p: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
        vr: Vec::with_capacity(n),
        vt: Vec::with_capacity(n),
        ir: Vec::with_capacity(n),
        it: Vec::with_capacity(n),
        eph: Vec::with_capacity(n),
    };
    for (j, dir) in directions.iter().enumerate() {
        let d = dir.to_vector();
        let s = signals.column(j);
        let mut p = 0.0;
        let mut e = 0.0;
        let mut eph = 0.0;
        let mut v = Vector3::zeros();
        let mut iv = Vector3::zeros();
        for (i, u) in speakers.iter().enumerate() {
            let si = s[i];
            p += si;
            e += si * si;
            v += u * si;
            iv += u * (si * si);
            if si < 0.0 {
                eph += si * si;
            }
        }
        o.p.push(p);
        o.e.push(e);
        o.eph.push(eph);
        o.vr.push(v.dot(&d));
        o.vt.push(v.cross(&d).norm());
        if e > 0.0 {
            let i = iv / e;
            o.ir.push(i.dot(&d));
            o.it.push(i.cross(&d).norm());
        } else {
            o.ir.push(f64::NAN);
            o.it.push(f64::NAN);
        }
    }
    o
}

pub fn speaker_signals(
    d: &DecodingMatrix,
    encoder: &Encoder,
    dir: &Direction,
) -> Result<DVector<f64>> {
    check_format(d, encoder)?;
    Ok(&d.gains * encoder.encode(dir)?)
}

fn check_format(d: &DecodingMatrix, encoder: &Encoder) -> Result<()> {
    if d.format != encoder.format() {
        return Err(Error::InvalidArgument(format!(
            "decoder format {} does not match encoder format {}",
            d.format,
            encoder.format()
        )));
    }
    Ok(())
}

pub fn observables(
    d: &DecodingMatrix,
    layout: &SpeakerLayout,
    encoder: &Encoder,
    directions: &[Direction],
) -> Result<Observables> {
    check_format(d, encoder)?;
    if d.speakers() != layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "decoder has {} rows, layout has {} speakers",
            d.speakers(),
            layout.len()
        )));
    }
    let signals = &d.gains * encoder.encode_all(directions)?;
    Ok(observables_from_signals(
        &signals,
        &layout.unit_vectors(),
        directions,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub alpha_p: f64,
    pub alpha_vr: f64,
    pub alpha_vt: f64,
    pub alpha_e: f64,
    pub alpha_ir: f64,
    pub alpha_it: f64,
    pub alpha_ph: f64,
    pub beta: f64,
    /// Mask radius in radians; `None` means 1.5 × the mean nearest-speaker
    /// distance of the layout.
    pub d_tilde: Option<f64>,
    pub preset: String,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            alpha_p: 0.0,
            alpha_vr: 0.0,
            alpha_vt: 0.0,
            alpha_e: 0.0,
            alpha_ir: 0.0,
            alpha_it: 0.0,
            alpha_ph: 0.0,
            beta: 0.25,
            d_tilde: None,
            preset: "custom".into(),
        }
    }
}

impl CostWeights {
    pub const PRESETS: [&'static str; 5] = ["smooth", "focus", "lf", "hf", "max_re"];

    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            preset: name.to_string(),
            ..Self::default()
        };
        let w = match name {
            "smooth" => Self {
                alpha_e: 8.0,
                alpha_ir: 1.0,
                alpha_it: 0.5,
                alpha_ph: 2.0,
                ..base
            },
            "focus" => Self {
                alpha_e: 0.5,
                alpha_ir: 4.0,
                alpha_it: 0.5,
                alpha_ph: 2.0,
                ..base
            },
            "lf" => Self {
                alpha_p: 1.0,
                alpha_vr: 1.0,
                alpha_vt: 1.0,
                ..base
            },
            "hf" => Self {
                alpha_e: 1.0,
                alpha_ir: 1.0,
                alpha_it: 1.0,
                alpha_ph: 10.0,
                ..base
            },
            "max_re" => Self {
                alpha_e: 1.0,
                alpha_ir: 1.0,
                alpha_it: 1.0,
                ..base
            },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{name}` (known: {})",
                    Self::PRESETS.join(", ")
                )))
            }
        };
        Ok(w)
    }

    fn alphas(&self) -> [f64; 7] {
        [
            self.alpha_p,
            self.alpha_vr,
            self.alpha_vt,
            self.alpha_e,
            self.alpha_ir,
            self.alpha_it,
            self.alpha_ph,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alphas();
        if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and >= 0".into(),
            ));
        }
        if a.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidArgument(
                "at least one weight must be > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument("beta must lie in [0, 1]".into()));
        }
        if let Some(d) = self.d_tilde {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidArgument(
                    "d_tilde must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// w_j per direction: 1 near some speaker, β elsewhere.
    pub fn mask(&self, layout: &SpeakerLayout, directions: &[Direction]) -> Vec<f64> {
        let d_tilde = self
            .d_tilde
            .unwrap_or_else(|| 1.5 * layout.mean_nearest_distance());
        let spk = layout.unit_vectors();
        directions
            .iter()
            .map(|d| {
                let v = d.to_vector();
                let near = spk
                    .iter()
                    .map(|u| angle_between(u, &v))
                    .fold(f64::INFINITY, f64::min);
                if near < d_tilde {
                    1.0
                } else {
                    self.beta
                }
            })
            .collect()
    }
}

/// Individual cost terms C_P, C_VR, C_VT, C_E, C_IR, C_IT, C_ph.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTerms {
    pub p: f64,
    pub vr: f64,
    pub vt: f64,
    pub e: f64,
    pub ir: f64,
    pub it: f64,
    pub ph: f64,
}

/// The decoder objective on a fixed set of directions.
#[derive(Debug, Clone)]
pub struct Objective {
    encoded: DMatrix<f64>,
    dirs: Vec<Vector3<f64>>,
    speakers: Vec<Vector3<f64>>,
    mask: Vec<f64>,
    weights: CostWeights,
    skipped: std::cell::Cell<bool>,
}

impl Objective {
    pub fn new(
        layout: &SpeakerLayout,
        encoder: &Encoder,
        directions: &[Direction],
        weights: &CostWeights,
    ) -> Result<Self> {
        weights.validate()?;
        if directions.is_empty() {
            return Err(Error::InvalidArgument("no evaluation directions".into()));
        }
        Ok(Self {
            encoded: encoder.encode_all(directions)?,
            dirs: directions.iter().map(|d| d.to_vector()).collect(),
            speakers: layout.unit_vectors(),
            mask: weights.mask(layout, directions),
            weights: weights.clone(),
            skipped: std::cell::Cell::new(false),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.speakers.len(), self.encoded.nrows())
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn terms(&self, gains: &DMatrix<f64>) -> CostTerms {
        self.evaluate(gains, false).0
    }

    pub fn value(&self, gains: &DMatrix<f64>) -> f64 {
        self.total(&self.terms(gains))
    }

    fn total(&self, t: &CostTerms) -> f64 {
        let a = self.weights.alphas();
        a[0] * t.p
            + a[1] * t.vr
            + a[2] * t.vt
            + a[3] * t.e
            + a[4] * t.ir
            + a[5] * t.it
            + a[6] * t.ph
    }

    /// Cost and its gradient with respect to the gains.
    pub fn value_grad(&self, gains: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (t, g) = self.evaluate(gains, true);
        (self.total(&t), g)
    }

    /// True if some direction had zero energy in the last evaluation.
    pub fn had_silent_directions(&self) -> bool {
        self.skipped.get()
    }

    fn evaluate(&self, gains: &DMatrix<f64>, want_grad: bool) -> (CostTerms, DMatrix<f64>) {
        let a = self.weights.alphas();
        let n = self.dirs.len() as f64;
        let signals = gains * &self.encoded;
        let ns = self.speakers.len();
        let mut t = CostTerms::default();
        let mut gs = DMatrix::zeros(ns, self.dirs.len());
        let mut skipped = false;
        for (j, d) in self.dirs.iter().enumerate() {
            let w = self.mask[j] / n;
            if w == 0.0 {
                continue;
            }
            let s = signals.column(j);
            let mut p = 0.0;
            let mut e = 0.0;
            let mut eph = 0.0;
            let mut v = Vector3::zeros();
            let mut iv = Vector3::zeros();
            for (i, u) in self.speakers.iter().enumerate() {
                let si = s[i];
                p += si;
                e += si * si;
                v += u * si;
                iv += u * (si * si);
                eph += si.min(0.0).powi(2);
            }
            let vr = v.dot(d);
            let tv = v - d * vr;
            t.p += w * (p - 1.0).powi(2);
            t.vr += w * (vr - 1.0).powi(2);
            t.vt += w * tv.norm_squared();
            t.e += w * (e - 1.0).powi(2);
            t.ph += w * eph * eph;
            let intensity = if e > 0.0 {
                let i = iv / e;
                let ir = i.dot(d);
                let ti = i - d * ir;
                let it2 = ti.norm_squared();
                t.ir += w * (ir - 1.0).powi(2);
                t.it += w * it2;
                Some((ir, ti, it2))
            } else {
                skipped = true;
                None
            };
            if !want_grad {
                continue;
            }
            for (i, u) in self.speakers.iter().enumerate() {
                let si = s[i];
                let ud = u.dot(d);
                let mut g = a[0] * 2.0 * (p - 1.0)
                    + a[1] * 2.0 * (vr - 1.0) * ud
                    + a[2] * 2.0 * tv.dot(u)
                    + a[3] * 2.0 * (e - 1.0) * 2.0 * si
                    + a[6] * 2.0 * eph * 2.0 * si.min(0.0);
                if let Some((ir, ti, it2)) = intensity {
                    g += a[4] * 2.0 * (ir - 1.0) * 2.0 * si * (ud - ir) / e
                        + a[5] * 4.0 * si / e * (ti.dot(u) - it2);
                }
                gs[(i, j)] = w * g;
            }
        }
        self.skipped.set(skipped);
        let grad = if want_grad {
            gs * self.encoded.transpose()
        } else {
            DMatrix::zeros(0, 0)
        };
        (t, grad)
    }
}

/// Objective value and gradient for a decoder.
pub fn idhoa_cost(
    d: &DecodingMatrix,
    layout: &SpeakerLayout,
    encoder: &Encoder,
    directions: &[Direction],
    weights: &CostWeights,
) -> Result<(f64, DMatrix<f64>)> {
    check_format(d, encoder)?;
    let obj = Objective::new(layout, encoder, directions, weights)?;
    if obj.shape() != d.gains.shape() {
        return Err(Error::ShapeMismatch(format!(
            "decoder is {}x{}, objective expects {}x{}",
            d.gains.nrows(),
            d.gains.ncols(),
            obj.shape().0,
            obj.shape().1
        )));
    }
    Ok(obj.value_grad(&d.gains))
}

/// Index of each speaker's left/right mirror image within 1°, if any.
pub fn mirror_pairs(layout: &SpeakerLayout) -> Vec<Option<usize>> {
    let tol = 1f64.to_radians();
    let v = layout.unit_vectors();
    v.iter()
        .map(|u| {
            let m = Vector3::new(u.x, -u.y, u.z);
            v.iter()
                .enumerate()
                .map(|(k, w)| (k, angle_between(&m, w)))
                .filter(|&(_, a)| a < tol)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k)
        })
        .collect()
}

/// Parameterization of a decoder that is symmetric under the layout's
/// mirror map combined with the format's channel mirror. Entries are
/// stored column major (speaker fastest).
pub fn symmetric_param_map(layout: &SpeakerLayout, encoder: &Encoder) -> Result<ParamMap> {
    let ns = layout.len();
    let mirror = encoder.channel_mirror()?;
    let nc = mirror.len();
    let pairs = mirror_pairs(layout);
    let idx = |i: usize, c: usize| i + c * ns;
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut done = vec![false; ns * nc];
    for i in 0..ns {
        let partner = match pairs[i] {
            Some(k) if pairs[k] == Some(i) => k,
            _ => {
                for c in 0..nc {
                    groups.push(vec![(idx(i, c), 1.0)]);
                    done[idx(i, c)] = true;
                }
                continue;
            }
        };
        for c in 0..nc {
            if done[idx(i, c)] {
                continue;
            }
            // D[partner, q] = sign_q * D[i, src_q]
            let mut g = vec![(idx(i, c), 1.0)];
            done[idx(i, c)] = true;
            let mut pinned = false;
            for (q, &(src, sign)) in mirror.iter().enumerate() {
                if src != c {
                    continue;
                }
                let e = idx(partner, q);
                if e == idx(i, c) {
                    if sign < 0.0 {
                        pinned = true;
                    }
                    continue;
                }
                if !done[e] {
                    g.push((e, sign));
                    done[e] = true;
                }
            }
            if !pinned {
                groups.push(g);
            }
        }
    }
    ParamMap::from_groups(ns * nc, &groups)
}

/// Where the starting point of an optimization came from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Analytic {
        mode: AnalyticMode,
        scheme: DegreeScheme,
    },
    Random {
        seed: u64,
    },
    Given,
}

#[derive(Debug, Clone)]
pub struct DecoderOptions {
    pub directions: Option<Vec<Direction>>,
    pub pairing: bool,
    pub band: Band,
    pub seed: u64,
    pub initial: Option<DMatrix<f64>>,
    pub optimizer: optcore::Options,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            directions: None,
            pairing: true,
            band: Band::Universal,
            seed: 0,
            initial: None,
            optimizer: optcore::Options::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderReport {
    pub init: InitKind,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub free_parameters: usize,
}

fn analytic_candidates(
    layout: &SpeakerLayout,
    order: usize,
    band: Band,
) -> Vec<(InitKind, DMatrix<f64>)> {
    let schemes: &[DegreeScheme] = match band {
        Band::Lf => &[DegreeScheme::Basic],
        Band::Hf => &[DegreeScheme::MaxRe],
        Band::Universal => &[
            DegreeScheme::Basic,
            DegreeScheme::MaxRe,
            DegreeScheme::InPhase,
        ],
    };
    let mut out = Vec::new();
    for mode in [AnalyticMode::Projection, AnalyticMode::Pseudoinverse] {
        let base = match decode_analytic(layout, order, mode, 0.0) {
            Ok(d) => d,
            Err(e) => {
                warn!("skipping {mode:?} start: {e}");
                continue;
            }
        };
        for &scheme in schemes {
            if let Ok(d) = apply_degree_weights(&base, scheme) {
                out.push((InitKind::Analytic { mode, scheme }, d.gains));
            }
        }
    }
    out
}

/// Optimizes a decoding matrix for `layout` and the format of `encoder`.
pub fn optimize_decoder(
    layout: &SpeakerLayout,
    encoder: &Encoder,
    weights: &CostWeights,
    opts: &DecoderOptions,
) -> Result<(DecodingMatrix, DecoderReport)> {
    let format = encoder.format();
    if let Format::Swf { .. } = format {
        let n = encoder.default_directions().len();
        if layout.len() >= n {
            return Err(Error::InvalidArgument(format!(
                "layout has {} speakers, finest mesh only {n} points",
                layout.len()
            )));
        }
    }
    let dirs = opts
        .directions
        .clone()
        .unwrap_or_else(|| encoder.default_directions());
    let obj = Objective::new(layout, encoder, &dirs, weights)?;
    let (ns, nc) = obj.shape();
    let map = if opts.pairing {
        symmetric_param_map(layout, encoder)?
    } else {
        ParamMap::identity(ns * nc)
    };
    let flat = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());
    let unflat = |v: &DVector<f64>| DMatrix::from_column_slice(ns, nc, v.as_slice());
    let project = |m: &DMatrix<f64>| unflat(&map.upscale(&map.downscale(&flat(m))));

    let candidates: Vec<(InitKind, DMatrix<f64>)> = if let Some(m) = &opts.initial {
        if m.shape() != (ns, nc) {
            return Err(Error::ShapeMismatch("initial decoder shape".into()));
        }
        vec![(InitKind::Given, m.clone())]
    } else {
        match format {
            Format::Ambisonics { order } => analytic_candidates(layout, order, opts.band),
            Format::Swf { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                let scale = 2.0 / (ns as f64).sqrt();
                let m = DMatrix::from_fn(ns, nc, |_, _| rng.gen_range(0.0..scale));
                vec![(InitKind::Random { seed: opts.seed }, m)]
            }
        }
    };
    let (init, start) = candidates
        .into_iter()
        .map(|(k, m)| {
            let m = project(&m);
            let f = obj.value(&m);
            (k, m, f)
        })
        .filter(|c| c.2.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(k, m, _)| (k, m))
        .ok_or_else(|| Error::NonFinite("no finite starting decoder".into()))?;

    let cost = |x: &DVector<f64>| {
        let (f, g) = obj.value_grad(&unflat(&map.upscale(x)));
        (f, map.pullback(&flat(&g)))
    };
    let x0 = map.downscale(&flat(&start));
    let (x, rep) = optcore::minimize(&cost, None, &x0, &opts.optimizer)?;
    if !rep.converged {
        warn!(
            "decoder optimization stopped before convergence (|g| = {:.2e})",
            rep.stationarity
        );
    }
    if obj.had_silent_directions() {
        warn!("some directions receive no energy; their intensity terms were skipped");
    }
    let gains = unflat(&map.upscale(&x));
    let d = DecodingMatrix::new(gains, format, layout.name.clone(), opts.band)?;
    Ok((
        d,
        DecoderReport {
            init,
            initial_cost: rep.initial_cost,
            final_cost: rep.final_cost,
            converged: rep.converged,
            iterations: rep.inner_iterations,
            free_parameters: map.free_count(),
        },
    ))
}

/// Separate low- and high-frequency decoders.
pub fn dual_band_decoders(
    layout: &SpeakerLayout,
    encoder: &Encoder,
    lf: &CostWeights,
    hf: &CostWeights,
    opts: &DecoderOptions,
) -> Result<(DecodingMatrix, DecodingMatrix)> {
    let run = |w: &CostWeights, band: Band| {
        let o = DecoderOptions {
            band,
            ..opts.clone()
        };
        optimize_decoder(layout, encoder, w, &o).map(|(d, _)| d)
    };
    Ok((run(lf, Band::Lf)?, run(hf, Band::Hf)?))
}
