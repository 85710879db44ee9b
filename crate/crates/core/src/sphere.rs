//! Spherical geometry, real spherical harmonics (ACN ordering, N3D
//! normalization) and the analytic Ambisonics decoders.
//!
//! Angles are radians everywhere in the API. Azimuth is measured
//! counterclockwise from the front, so +90° is left; elevation is positive
//! upwards. The matching Cartesian frame is x = front, y = left, z = up.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::decoderopt::{Band, DecodingMatrix, Format};
use crate::error::{Error, Result};

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into (−π, π] and clamping
    /// elevation to [−π/2, π/2].
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth: wrap_azimuth(azimuth),
            elevation: elevation.clamp(-PI / 2.0, PI / 2.0),
        }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn front() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Direction of a nonzero vector; the length is discarded.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let n = v.norm();
        let (x, y, z) = (v.x / n, v.y / n, v.z / n);
        let elevation = z.clamp(-1.0, 1.0).asin();
        let azimuth = if x.abs() < 1e-300 && y.abs() < 1e-300 {
            0.0
        } else {
            y.atan2(x)
        };
        Self::new(azimuth, elevation)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vector3::new(ce * ca, ce * sa, se)
    }

    /// Left/right mirror image (azimuth negated).
    pub fn mirrored(&self) -> Self {
        Self::new(-self.azimuth, self.elevation)
    }
}

fn wrap_azimuth(az: f64) -> f64 {
    let mut a = az % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Great-circle angle between two directions, in [0, π].
pub fn haversine(a: &Direction, b: &Direction) -> f64 {
    let dlat = b.elevation - a.elevation;
    let dlon = b.azimuth - a.azimuth;
    let h = (dlat / 2.0).sin().powi(2)
        + a.elevation.cos() * b.elevation.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * h.sqrt().clamp(0.0, 1.0).asin()
}

/// Great-circle angle between two unit vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate near 0 and π
    a.cross(b).norm().atan2(a.dot(b))
}

/// Number of Ambisonics channels for an order.
pub fn channel_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// ACN channel index of degree `l`, index `m`.
pub fn acn(l: usize, m: i64) -> usize {
    (l * l) + (l as i64 + m) as usize
}

/// Real spherical harmonics up to `order`, ACN order, N3D normalization,
/// no Condon–Shortley phase.
pub fn sh_vector(order: usize, dir: &Direction) -> DVector<f64> {
    let mut out = DVector::zeros(channel_count(order));
    let x = dir.elevation.sin();
    let legendre = associated_legendre(order, x);
    for l in 0..=order {
        for m in 0..=l {
            let norm = n3d_norm(l, m);
            let p = legendre[l][m];
            if m == 0 {
                out[acn(l, 0)] = norm * p;
            } else {
                let (s, c) = (m as f64 * dir.azimuth).sin_cos();
                out[acn(l, m as i64)] = norm * p * c;
                out[acn(l, -(m as i64))] = norm * p * s;
            }
        }
    }
    out[0] = 1.0;
    out
}

fn n3d_norm(l: usize, m: usize) -> f64 {
    // (l-m)!/(l+m)! accumulated as a product to avoid overflow
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    let delta = if m == 0 { 1.0 } else { 2.0 };
    ((2 * l + 1) as f64 * delta * ratio).sqrt()
}

/// P_l^m(x) for 0 ≤ m ≤ l ≤ order, without Condon–Shortley phase.
fn associated_legendre(order: usize, x: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; order + 1]; order + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0][0] = 1.0;
    for m in 1..=order {
        p[m][m] = p[m - 1][m - 1] * (2 * m - 1) as f64 * s;
    }
    for m in 0..order {
        p[m + 1][m] = x * (2 * m + 1) as f64 * p[m][m];
    }
    #[allow(clippy::needless_range_loop)]
    for m in 0..=order {
        for l in (m + 2)..=order {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m])
                / (l - m) as f64;
        }
    }
    p
}

/// Legendre polynomial P_n(x) and its predecessor P_{n-1}(x).
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_pair(n, x).0
}

/// Largest root of P_n, n ≥ 1, by Newton iteration.
pub fn largest_legendre_root(n: usize) -> f64 {
    assert!(n >= 1);
    let nf = n as f64;
    let mut x = (PI * 0.75 / (nf + 0.5)).cos();
    for _ in 0..100 {
        let (p, pm1) = legendre_pair(n, x);
        let dp = nf * (x * p - pm1) / (x * x - 1.0);
        let step = p / dp;
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    x
}

/// A plane-wave encoded Ambisonics signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbisonicsSignal {
    order: usize,
    coeffs: DVector<f64>,
}

impl AmbisonicsSignal {
    pub fn new(order: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != channel_count(order) {
            return Err(Error::ShapeMismatch(format!(
                "order {order} needs {} coefficients, got {}",
                channel_count(order),
                coeffs.len()
            )));
        }
        Ok(Self { order, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }
}

pub fn encode_plane_wave(order: usize, dir: &Direction, gain: f64) -> AmbisonicsSignal {
    AmbisonicsSignal {
        order,
        coeffs: sh_vector(order, dir) * gain,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingScheme {
    Fibonacci,
    HorizontalRing,
    VerticalRing,
}

/// Evaluation directions. Rings start at the front and advance
/// counterclockwise (horizontal) or upwards over the top (vertical).
pub fn sample_directions(count: usize, scheme: SamplingScheme) -> Vec<Direction> {
    let n = count.max(1);
    match scheme {
        SamplingScheme::Fibonacci => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    Direction::new(i as f64 * golden, z.asin())
                })
                .collect()
        }
        SamplingScheme::HorizontalRing => (0..n)
            .map(|i| Direction::new(2.0 * PI * i as f64 / n as f64, 0.0))
            .collect(),
        SamplingScheme::VerticalRing => (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Direction::from_vector(&Vector3::new(t.cos(), 0.0, t.sin()))
            })
            .collect(),
    }
}

/// Angle along the ring for a direction produced by
/// [`sample_directions`] with a ring scheme, in [0, 2π).
pub fn ring_angle(dir: &Direction, scheme: SamplingScheme) -> f64 {
    let v = dir.to_vector();
    let a = match scheme {
        SamplingScheme::VerticalRing => v.z.atan2(v.x),
        _ => v.y.atan2(v.x),
    };
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speaker {
    pub name: String,
    pub dir: Direction,
    /// Parsed but not used by any decoder math.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerLayout {
    pub name: String,
    speakers: Vec<Speaker>,
}

impl SpeakerLayout {
    pub fn new(name: impl Into<String>, speakers: Vec<Speaker>) -> Result<Self> {
        if speakers.is_empty() {
            return Err(Error::InvalidArgument("layout has no speakers".into()));
        }
        for (i, a) in speakers.iter().enumerate() {
            for b in &speakers[i + 1..] {
                if a.name == b.name {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate speaker name {}",
                        a.name
                    )));
                }
                if angle_between(&a.dir.to_vector(), &b.dir.to_vector()) < 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "speakers {} and {} coincide",
                        a.name, b.name
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            speakers,
        })
    }

    /// Layout with generated names `S1..Sn`.
    pub fn from_directions(name: impl Into<String>, dirs: &[Direction]) -> Result<Self> {
        let speakers = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| Speaker {
                name: format!("S{}", i + 1),
                dir: *d,
                distance: None,
            })
            .collect();
        Self::new(name, speakers)
    }

    pub fn from_vectors(name: impl Into<String>, vecs: &[Vector3<f64>]) -> Result<Self> {
        let dirs: Vec<_> = vecs.iter().map(Direction::from_vector).collect();
        Self::from_directions(name, &dirs)
    }

    pub fn speakers(&self) -> &[Speaker] {
        &self.speakers
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.speakers.iter().map(|s| s.dir).collect()
    }

    pub fn unit_vectors(&self) -> Vec<Vector3<f64>> {
        self.speakers.iter().map(|s| s.dir.to_vector()).collect()
    }

    /// Parses `name azimuth_deg elevation_deg [distance_m]` lines; `#`
    /// starts a comment.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut speakers = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::parse(
                    lineno + 1,
                    "expected `name azimuth_deg elevation_deg [distance_m]`",
                ));
            }
            let num = |s: &str| -> Result<f64> {
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::parse(lineno + 1, format!("not a number: {s}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(lineno + 1, format!("not finite: {s}")));
                }
                Ok(v)
            };
            let az = num(fields[1])?;
            let el = num(fields[2])?;
            if !(-90.0..=90.0).contains(&el) {
                return Err(Error::parse(lineno + 1, "elevation outside [-90, 90]"));
            }
            let distance = fields.get(3).map(|s| num(s)).transpose()?;
            speakers.push(Speaker {
                name: fields[0].to_string(),
                dir: Direction::from_degrees(az, el),
                distance,
            });
        }
        Self::new(name, speakers)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.speakers {
            let _ = write!(
                out,
                "{} {:.17e} {:.17e}",
                s.name,
                s.dir.azimuth.to_degrees(),
                s.dir.elevation.to_degrees()
            );
            if let Some(d) = s.distance {
                let _ = write!(out, " {d:.17e}");
            }
            out.push('\n');
        }
        out
    }

    /// Mean great-circle distance from each speaker to its nearest neighbour.
    pub fn mean_nearest_distance(&self) -> f64 {
        if self.len() < 2 {
            return PI;
        }
        let v = self.unit_vectors();
        let total: f64 = v
            .iter()
            .enumerate()
            .map(|(i, a)| {
                v.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, b)| angle_between(a, b))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / self.len() as f64
    }
}

/// Some common layouts.
pub mod layouts {
    use super::*;

    pub fn octahedron() -> SpeakerLayout {
        let dirs = [
            Direction::from_degrees(0.0, 0.0),
            Direction::from_degrees(90.0, 0.0),
            Direction::from_degrees(180.0, 0.0),
            Direction::from_degrees(-90.0, 0.0),
            Direction::from_degrees(0.0, 90.0),
            Direction::from_degrees(0.0, -90.0),
        ];
        SpeakerLayout::from_directions("octahedron", &dirs).expect("valid layout")
    }

    pub fn icosahedron() -> SpeakerLayout {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-phi, phi] {
                v.push(Vector3::new(0.0, a, b));
                v.push(Vector3::new(a, b, 0.0));
                v.push(Vector3::new(b, 0.0, a));
            }
        }
        SpeakerLayout::from_vectors("icosahedron", &v).expect("valid layout")
    }

    /// ITU 5.0 (L, R, C, Ls, Rs).
    pub fn itu_5_0() -> SpeakerLayout {
        let spk = |n: &str, az: f64| Speaker {
            name: n.into(),
            dir: Direction::from_degrees(az, 0.0),
            distance: None,
        };
        SpeakerLayout::new(
            "5.0",
            vec![
                spk("L", 30.0),
                spk("R", -30.0),
                spk("C", 0.0),
                spk("Ls", 110.0),
                spk("Rs", -110.0),
            ],
        )
        .expect("valid layout")
    }

    /// 7.0.4: seven ear-level speakers and four height speakers at 45°.
    pub fn l704() -> SpeakerLayout {
        let spk = |n: &str, az: f64, el: f64| Speaker {
            name: n.into(),
            dir: Direction::from_degrees(az, el),
            distance: None,
        };
        SpeakerLayout::new(
            "7.0.4",
            vec![
                spk("L", 30.0, 0.0),
                spk("R", -30.0, 0.0),
                spk("C", 0.0, 0.0),
                spk("Lss", 90.0, 0.0),
                spk("Rss", -90.0, 0.0),
                spk("Lrs", 135.0, 0.0),
                spk("Rrs", -135.0, 0.0),
                spk("Ltf", 45.0, 45.0),
                spk("Rtf", -45.0, 45.0),
                spk("Ltr", 135.0, 45.0),
                spk("Rtr", -135.0, 45.0),
            ],
        )
        .expect("valid layout")
    }
}

/// Encoding matrix C: channels × speakers, column i = Y(û_i).
pub fn encoding_matrix(order: usize, dirs: &[Direction]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(channel_count(order), dirs.len());
    for (i, d) in dirs.iter().enumerate() {
        c.set_column(i, &sh_vector(order, d));
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticMode {
    Projection,
    Pseudoinverse,
}

/// Projection (Cᵀ/N) or pseudoinverse (Cᵀ(CCᵀ + λI)⁻¹) decoder.
pub fn decode_analytic(
    layout: &SpeakerLayout,
    order: usize,
    mode: AnalyticMode,
    regularization: f64,
) -> Result<DecodingMatrix> {
    if !regularization.is_finite() || regularization < 0.0 {
        return Err(Error::InvalidArgument(
            "regularization must be a finite value >= 0".into(),
        ));
    }
    let c = encoding_matrix(order, &layout.directions());
    let n = layout.len() as f64;
    let gains = match mode {
        AnalyticMode::Projection => c.transpose() / n,
        AnalyticMode::Pseudoinverse => {
            let k = c.nrows();
            let gram = &c * c.transpose() + DMatrix::identity(k, k) * regularization;
            let scale = gram.diagonal().amax().max(1.0);
            let svd = gram.clone().svd(false, false);
            let smin = svd.singular_values.min();
            if smin <= 1e-10 * scale {
                return Err(Error::SingularGram);
            }
            let inv = gram.try_inverse().ok_or(Error::SingularGram)?;
            c.transpose() * inv
        }
    };
    DecodingMatrix::new(
        gains,
        Format::Ambisonics { order },
        layout.name.clone(),
        Band::Universal,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeScheme {
    Basic,
    MaxRe,
    InPhase,
}

/// Per-degree gains w_0..w_L.
pub fn degree_weights(order: usize, scheme: DegreeScheme) -> DVector<f64> {
    match scheme {
        DegreeScheme::Basic => DVector::from_element(order + 1, 1.0),
        DegreeScheme::MaxRe => {
            if order == 0 {
                return DVector::from_element(1, 1.0);
            }
            let rho = largest_legendre_root(order + 1);
            DVector::from_iterator(order + 1, (0..=order).map(|l| legendre(l, rho)))
        }
        DegreeScheme::InPhase => {
            // L!(L+1)! / ((L+l+1)!(L-l)!) as a running product
            DVector::from_iterator(
                order + 1,
                (0..=order).map(|l| {
                    let mut w = 1.0;
                    for k in 0..l {
                        w *= (order - k) as f64 / (order + k + 2) as f64;
                    }
                    w
                }),
            )
        }
    }
}

/// Expands per-degree weights to per-channel weights.
pub fn channel_weights(weights: &DVector<f64>) -> DVector<f64> {
    let order = weights.len() - 1;
    DVector::from_iterator(
        channel_count(order),
        (0..=order).flat_map(|l| std::iter::repeat_n(weights[l], 2 * l + 1)),
    )
}

/// Multiplies each channel column by its degree weight.
pub fn apply_degree_weights(d: &DecodingMatrix, scheme: DegreeScheme) -> Result<DecodingMatrix> {
    let order = match d.format {
        Format::Ambisonics { order } => order,
        _ => {
            return Err(Error::InvalidArgument(
                "degree weights apply to Ambisonics decoders only".into(),
            ))
        }
    };
    let w = channel_weights(&degree_weights(order, scheme));
    let mut out = d.clone();
    for (c, mut col) in out.gains.column_iter_mut().enumerate() {
        col *= w[c];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const S3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn first_order_channels_match_explicit_n3d_expressions() {
        let y = sh_vector(1, &Direction::new(0.0, 0.0));
        assert_abs_diff_eq!(
            y.as_slice(),
            [1.0, 0.0, 0.0, S3].as_slice(),
            epsilon = 1e-12
        );
        let y = sh_vector(1, &Direction::new(PI / 2.0, 0.0));
        assert_abs_diff_eq!(
            y.as_slice(),
            [1.0, S3, 0.0, 0.0].as_slice(),
            epsilon = 1e-12
        );
        for az in [0.0, 1.0, -2.5] {
            let y = sh_vector(1, &Direction::new(az, PI / 2.0));
            assert_abs_diff_eq!(
                y.as_slice(),
                [1.0, 0.0, S3, 0.0].as_slice(),
                epsilon = 1e-12
            );
        }
        assert_eq!(sh_vector(0, &Direction::new(0.3, -0.2)).as_slice(), &[1.0]);
    }

    #[test]
    fn second_order_against_closed_form() {
        // closed-form N3D second-order terms
        let d = Direction::new(0.7, 0.4);
        let v = d.to_vector();
        let y = sh_vector(2, &d);
        let s15 = 15f64.sqrt();
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(y[4], s15 * v.x * v.y, epsilon = 1e-12);
        assert_abs_diff_eq!(y[5], s15 * v.y * v.z, epsilon = 1e-12);
        assert_abs_diff_eq!(y[6], s5 / 2.0 * (3.0 * v.z * v.z - 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(y[7], s15 * v.x * v.z, epsilon = 1e-12);
        assert_abs_diff_eq!(y[8], s15 / 2.0 * (v.x * v.x - v.y * v.y), epsilon = 1e-12);
    }

    #[test]
    fn orthonormality_on_fibonacci_grid() {
        let dirs = sample_directions(12_000, SamplingScheme::Fibonacci);
        let c = encoding_matrix(5, &dirs);
        let gram = &c * c.transpose() / dirs.len() as f64;
        let err = (gram - DMatrix::identity(36, 36)).amax();
        assert!(err < 1e-2, "max deviation {err}");
    }

    #[test]
    fn encode_is_linear_in_gain() {
        let d = Direction::new(0.3, 0.2);
        assert_eq!(encode_plane_wave(2, &d, 0.0).coeffs(), &DVector::zeros(9));
        let one = encode_plane_wave(3, &d, 1.0);
        let two = encode_plane_wave(3, &d, 2.0);
        assert_abs_diff_eq!(
            two.coeffs().as_slice(),
            (one.coeffs() * 2.0).as_slice(),
            epsilon = 1e-15
        );
        assert!(AmbisonicsSignal::new(1, DVector::zeros(3)).is_err());
    }

    #[test]
    fn haversine_reference_values() {
        let f = Direction::front();
        assert_eq!(haversine(&f, &f), 0.0);
        assert_abs_diff_eq!(
            haversine(&f, &Direction::new(PI / 2.0, 0.0)),
            PI / 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(haversine(&f, &Direction::new(PI, 0.0)), PI, epsilon = 1e-12);
    }

    #[test]
    fn sampling_schemes() {
        let ring = sample_directions(4, SamplingScheme::HorizontalRing);
        let az: Vec<f64> = ring.iter().map(|d| d.azimuth).collect();
        assert_abs_diff_eq!(
            az.as_slice(),
            [0.0, PI / 2.0, PI, -PI / 2.0].as_slice(),
            epsilon = 1e-12
        );
        assert!(ring.iter().all(|d| d.elevation == 0.0));
        let v = sample_directions(1, SamplingScheme::VerticalRing);
        assert_eq!(v, vec![Direction::front()]);
        let fib = sample_directions(360, SamplingScheme::Fibonacci);
        for (i, a) in fib.iter().enumerate() {
            for b in &fib[i + 1..] {
                assert!(haversine(a, b) > 0.0);
            }
        }
    }

    #[test]
    fn octahedron_gram_is_six_identity() {
        let c = encoding_matrix(1, &layouts::octahedron().directions());
        let gram = &c * c.transpose();
        assert_abs_diff_eq!(
            gram.as_slice(),
            (DMatrix::<f64>::identity(4, 4) * 6.0).as_slice(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn regular_layout_modes_coincide() {
        let l = layouts::octahedron();
        let p = decode_analytic(&l, 1, AnalyticMode::Projection, 0.0).unwrap();
        let q = decode_analytic(&l, 1, AnalyticMode::Pseudoinverse, 0.0).unwrap();
        assert!((p.gains - q.gains).amax() < 1e-12);
    }

    #[test]
    fn order_zero_projection_is_uniform() {
        let l = layouts::itu_5_0();
        let p = decode_analytic(&l, 0, AnalyticMode::Projection, 0.0).unwrap();
        assert_eq!(p.gains.shape(), (5, 1));
        assert!(p.gains.iter().all(|g| (g - 0.2).abs() < 1e-15));
    }

    #[test]
    fn itu_projection_differs_from_pseudoinverse() {
        let l = layouts::itu_5_0();
        let p = decode_analytic(&l, 1, AnalyticMode::Projection, 0.0);
        let q = decode_analytic(&l, 1, AnalyticMode::Pseudoinverse, 0.0);
        // a horizontal layout has no Z information: CCᵀ is singular
        assert!(matches!(q, Err(Error::SingularGram)));
        let q = decode_analytic(&l, 1, AnalyticMode::Pseudoinverse, 1e-3).unwrap();
        assert!((p.unwrap().gains - q.gains).amax() > 1e-3);
    }

    #[test]
    fn projection_reconstructs_pressure_on_octahedron() {
        let l = layouts::octahedron();
        let d = decode_analytic(&l, 1, AnalyticMode::Projection, 0.0).unwrap();
        for dir in sample_directions(200, SamplingScheme::Fibonacci) {
            let s = &d.gains * sh_vector(1, &dir);
            assert!((s.sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degree_weight_formulas() {
        let w = degree_weights(1, DegreeScheme::MaxRe);
        assert_abs_diff_eq!(w[1], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        let w = degree_weights(1, DegreeScheme::InPhase);
        assert_abs_diff_eq!(w.as_slice(), [1.0, 1.0 / 3.0].as_slice(), epsilon = 1e-15);
        let w = degree_weights(3, DegreeScheme::InPhase);
        // L!(L+1)!/((L+l+1)!(L-l)!) for L = 3
        assert_abs_diff_eq!(
            w.as_slice(),
            [1.0, 0.6, 0.2, 1.0 / 35.0].as_slice(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            largest_legendre_root(4),
            0.861_136_311_594_052_6,
            epsilon = 1e-14
        );
        assert_eq!(degree_weights(2, DegreeScheme::Basic).as_slice(), &[1.0; 3]);
    }

    #[test]
    fn layout_parsing() {
        let text = "# comment\nL 30 0\nR -30 0 2.5 # trailing\n\nC 0 0\n";
        let l = SpeakerLayout::parse("t", text).unwrap();
        assert_eq!(l.len(), 3);
        assert_eq!(l.speakers()[1].distance, Some(2.5));
        assert_abs_diff_eq!(l.speakers()[0].dir.azimuth, PI / 6.0, epsilon = 1e-15);
        let back = SpeakerLayout::parse("t", &l.to_text()).unwrap();
        assert_eq!(back, l);
        assert!(SpeakerLayout::parse("t", "L 30\n").is_err());
        assert!(SpeakerLayout::parse("t", "L 30 0\nL 40 0\n").is_err());
        assert!(SpeakerLayout::parse("t", "L 30 0\nM 30 0\n").is_err());
        assert!(SpeakerLayout::parse("t", "# nothing\n").is_err());
        assert!(SpeakerLayout::parse("t", "L abc 0\n").is_err());
    }

    #[test]
    fn direction_wrapping() {
        let d = Direction::new(3.0 * PI / 2.0, 0.0);
        assert_abs_diff_eq!(d.azimuth, -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(Direction::new(-PI, 0.0).azimuth, PI, epsilon = 1e-12);
        let v = Direction::new(1.1, -0.4).to_vector();
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}
