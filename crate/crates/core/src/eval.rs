//! Ring sweeps, summary tables and crosstalk.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::decoderopt::{observables_from_signals, DecodingMatrix, Encoder, Observables};
use crate::error::{Error, Result};
use crate::io::fmt_real;
use crate::sphere::{ring_angle, sample_directions, Direction, SamplingScheme, SpeakerLayout};

pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Horizontal,
    Vertical,
}

impl Plane {
    fn scheme(self) -> SamplingScheme {
        match self {
            Plane::Horizontal => SamplingScheme::HorizontalRing,
            Plane::Vertical => SamplingScheme::VerticalRing,
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(Plane::Horizontal),
            "vertical" => Ok(Plane::Vertical),
            _ => Err(Error::InvalidArgument(format!("unknown plane `{s}`"))),
        }
    }
}

/// What produces the speaker signals for a source direction.
#[derive(Debug, Clone, Copy)]
pub enum Pipeline<'a> {
    /// Encoder followed by a decoding matrix for a real layout.
    Decoded {
        encoder: &'a Encoder,
        decoder: &'a DecodingMatrix,
        layout: &'a SpeakerLayout,
    },
    /// SWF channels played on the mesh vertices of the format level,
    /// optionally upsampled to a finer level first.
    Virtual {
        encoder: &'a Encoder,
        upsample_to: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub plane: Plane,
    pub angles_deg: Vec<f64>,
    pub speaker_names: Vec<String>,
    /// speakers × directions
    pub gains: DMatrix<f64>,
    pub observables: Observables,
}

pub fn to_db(e: f64) -> f64 {
    if e > 0.0 {
        (10.0 * e.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// asin of a transverse component, in degrees.
pub fn transverse_deg(x: f64) -> f64 {
    x.clamp(0.0, 1.0).asin().to_degrees()
}

impl SweepReport {
    pub fn e_db(&self) -> Vec<f64> {
        self.observables.e.iter().map(|&e| to_db(e)).collect()
    }

    pub fn it_deg(&self) -> Vec<f64> {
        self.observables
            .it
            .iter()
            .map(|&x| transverse_deg(x))
            .collect()
    }

    pub fn vt_deg(&self) -> Vec<f64> {
        self.observables
            .vt
            .iter()
            .map(|&x| transverse_deg(x))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,P,E_dB,vR,vT,vT_deg,IR,IT,IT_deg");
        for n in &self.speaker_names {
            let _ = write!(s, ",g_{n}");
        }
        s.push('\n');
        let (edb, itd, vtd) = (self.e_db(), self.it_deg(), self.vt_deg());
        let o = &self.observables;
        for j in 0..self.angles_deg.len() {
            let vals = [
                self.angles_deg[j],
                o.p[j],
                edb[j],
                o.vr[j],
                o.vt[j],
                vtd[j],
                o.ir[j],
                o.it[j],
                itd[j],
            ];
            let row: Vec<String> = vals
                .iter()
                .copied()
                .chain(self.gains.column(j).iter().copied())
                .map(fmt_real)
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

pub fn sweep(pipeline: Pipeline, plane: Plane, n: usize) -> Result<SweepReport> {
    if n < 4 {
        return Err(Error::InvalidArgument(
            "a sweep needs at least 4 directions".into(),
        ));
    }
    let dirs = sample_directions(n, plane.scheme());
    sweep_directions(pipeline, plane, &dirs)
}

pub fn sweep_directions(
    pipeline: Pipeline,
    plane: Plane,
    dirs: &[Direction],
) -> Result<SweepReport> {
    let (gains, speakers, names) = match pipeline {
        Pipeline::Decoded {
            encoder,
            decoder,
            layout,
        } => {
            if decoder.format != encoder.format() || decoder.speakers() != layout.len() {
                return Err(Error::ShapeMismatch(
                    "decoder does not match the encoder format or the layout".into(),
                ));
            }
            let g = &decoder.gains * encoder.encode_all(dirs)?;
            let names = layout.speakers().iter().map(|s| s.name.clone()).collect();
            (g, layout.unit_vectors(), names)
        }
        Pipeline::Virtual {
            encoder,
            upsample_to,
        } => {
            let Encoder::Swf(swf) = encoder else {
                return Err(Error::InvalidArgument(
                    "only SWF channels can be played on virtual speakers".into(),
                ));
            };
            let mut g = encoder.encode_all(dirs)?;
            let mut level = swf.level();
            if let Some(to) = upsample_to {
                g = swf.bank().synthesis_chain(level, to)? * g;
                level = to;
            }
            let verts = swf.mesh().level(level).vertices.clone();
            let names = (0..verts.len()).map(|i| format!("v{i}")).collect();
            (g, verts, names)
        }
    };
    Ok(SweepReport {
        plane,
        angles_deg: dirs
            .iter()
            .map(|d| ring_angle(d, plane.scheme()).to_degrees())
            .collect(),
        speaker_names: names,
        observables: observables_from_signals(&gains, &speakers, dirs),
        gains,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: &'static str,
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// E_max − E_min in dB.
    pub delta_e: f64,
}

impl Summary {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("observable,avg,max,min\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.name,
                fmt_real(r.avg),
                fmt_real(r.max),
                fmt_real(r.min)
            );
        }
        let _ = writeln!(s, "delta_E_dB,{},,", fmt_real(self.delta_e));
        s
    }
}

fn stats(name: &'static str, v: &[f64]) -> SummaryRow {
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    let n = finite.len().max(1) as f64;
    SummaryRow {
        name,
        avg: finite.iter().sum::<f64>() / n,
        max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: finite.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Unweighted avg/max/min per observable over the sweep samples.
pub fn summarize(report: &SweepReport) -> Summary {
    let o = &report.observables;
    let e = stats("E_dB", &report.e_db());
    let delta_e = e.max - e.min;
    Summary {
        rows: vec![
            e,
            stats("IR", &o.ir),
            stats("IT", &o.it),
            stats("IT_deg", &report.it_deg()),
            stats("vR", &o.vr),
            stats("vT", &o.vt),
            stats("vT_deg", &report.vt_deg()),
            stats("P", &o.p),
        ],
        delta_e,
    }
}

/// Energy leaking to other speakers when panning exactly onto each
/// speaker, in dB. `+inf` marks a silent target speaker, `-inf` a
/// leak-free one.
pub fn crosstalk(
    d: &DecodingMatrix,
    layout: &SpeakerLayout,
    encoder: &Encoder,
) -> Result<Vec<f64>> {
    let dirs = layout.directions();
    let s = &d.gains * encoder.encode_all(&dirs)?;
    Ok((0..layout.len())
        .map(|k| {
            let col = s.column(k);
            let own = col[k] * col[k];
            let others: f64 = col
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, x)| x * x)
                .sum();
            if own == 0.0 {
                f64::INFINITY
            } else if others == 0.0 {
                f64::NEG_INFINITY
            } else {
                10.0 * (others / own).log10()
            }
        })
        .collect())
}

pub fn crosstalk_csv(layout: &SpeakerLayout, values: &[f64]) -> String {
    let mut s = String::from("speaker,crosstalk_dB\n");
    for (spk, v) in layout.speakers().iter().zip(values) {
        let text = if v.is_infinite() {
            if *v > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            }
        } else {
            fmt_real(*v)
        };
        let _ = writeln!(s, "{},{}", spk.name, text);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoderopt::{Band, Format, SwfEncoder};
    use crate::sphere::{decode_analytic, layouts, AnalyticMode};
    use crate::wavelets::Family;

    #[test]
    fn constant_summary() {
        let r = stats("x", &[0.5, 0.5, 0.5]);
        assert_eq!((r.avg, r.max, r.min), (0.5, 0.5, 0.5));
    }

    #[test]
    fn db_floor_and_degrees() {
        assert_eq!(to_db(0.0), DB_FLOOR);
        assert!((to_db(0.5) + 3.0103).abs() < 1e-4);
        assert!((transverse_deg(1.2) - 90.0).abs() < 1e-12);
    }

    #[test]
    fn identity_on_mesh_has_no_crosstalk() {
        let enc = SwfEncoder::with_family(Family::Vbap, 0).unwrap();
        let layout = SpeakerLayout::from_directions("mesh0", &enc.vertex_directions(0)).unwrap();
        let e = Encoder::Swf(Box::new(enc));
        let d = DecodingMatrix::new(
            DMatrix::identity(6, 6),
            Format::Swf {
                family: Family::Vbap,
                level: 0,
            },
            "mesh0".into(),
            Band::Universal,
        )
        .unwrap();
        let c = crosstalk(&d, &layout, &e).unwrap();
        assert!(c.iter().all(|&x| x == f64::NEG_INFINITY));
        assert!(crosstalk_csv(&layout, &c).contains("-inf"));
    }

    #[test]
    fn two_speaker_equal_gains() {
        let layout = SpeakerLayout::from_directions(
            "pair",
            &[Direction::front(), Direction::from_degrees(90.0, 0.0)],
        )
        .unwrap();
        let d = DecodingMatrix::new(
            DMatrix::from_element(2, 1, 1.0),
            Format::Ambisonics { order: 0 },
            "pair".into(),
            Band::Universal,
        )
        .unwrap();
        let c = crosstalk(&d, &layout, &Encoder::Ambisonics { order: 0 }).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn octahedron_crosstalk_is_uniform() {
        let layout = layouts::octahedron();
        let d = decode_analytic(&layout, 1, AnalyticMode::Projection, 0.0).unwrap();
        let c = crosstalk(&d, &layout, &Encoder::Ambisonics { order: 1 }).unwrap();
        assert!(c.iter().all(|x| (x - 10.0 * 0.5f64.log10()).abs() < 1e-9));
        assert!(c.iter().all(|x| (x - c[0]).abs() < 1e-9));
    }

    #[test]
    fn virtual_sweep_hits_vertices() {
        let enc = Encoder::Swf(Box::new(SwfEncoder::with_family(Family::Vbap, 1).unwrap()));
        let r = sweep(
            Pipeline::Virtual {
                encoder: &enc,
                upsample_to: None,
            },
            Plane::Horizontal,
            360,
        )
        .unwrap();
        for j in [0, 45, 90, 180] {
            assert!((r.observables.ir[j] - 1.0).abs() < 1e-12);
            assert!(r.observables.it[j].abs() < 1e-12);
        }
        assert!(r.observables.p.iter().all(|p| (p - 1.0).abs() < 1e-9));
        let csv = r.to_csv();
        assert!(csv.starts_with("angle_deg,P,E_dB,vR,vT,vT_deg,IR,IT,IT_deg,g_v0"));
        assert_eq!(csv.lines().count(), 361);
    }

    #[test]
    fn symmetric_pipeline_gives_mirrored_sweep() {
        let enc = Encoder::Swf(Box::new(SwfEncoder::with_family(Family::Sint, 1).unwrap()));
        let r = sweep(
            Pipeline::Virtual {
                encoder: &enc,
                upsample_to: None,
            },
            Plane::Horizontal,
            360,
        )
        .unwrap();
        let o = &r.observables;
        for j in 1..360 {
            let k = 360 - j;
            assert!((o.e[j] - o.e[k]).abs() < 1e-9);
            assert!((o.ir[j] - o.ir[k]).abs() < 1e-9);
            assert!((o.it[j] - o.it[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn ambisonics_needs_decoder() {
        let enc = Encoder::Ambisonics { order: 1 };
        assert!(sweep(
            Pipeline::Virtual {
                encoder: &enc,
                upsample_to: None
            },
            Plane::Horizontal,
            8
        )
        .is_err());
        assert!(sweep(
            Pipeline::Virtual {
                encoder: &enc,
                upsample_to: None
            },
            Plane::Horizontal,
            3
        )
        .is_err());
    }
}
