use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use nalgebra::DMatrix;
use sphwave::decoderopt::{optimize_decoder, DecoderOptions, DecoderReport};
use sphwave::eval::{crosstalk, crosstalk_csv, summarize, sweep, Pipeline, Plane};
use sphwave::io::{fmt_real, parse_rows};
use sphwave::mesh::{build_mesh, SubdivisionMesh};
use sphwave::sphere::{apply_degree_weights, decode_analytic, AnalyticMode, DegreeScheme};
use sphwave::waveletopt::{optimized_bank, reports_to_csv};
use sphwave::{
    Band, DecodingMatrix, Encoder, Family, FilterBank, Format, SpeakerLayout, SwfEncoder,
};

use crate::config::RunConfig;
use crate::{
    BandArg, Cli, Command, DecoderCmd, EvalCmd, FiltersCmd, GenFamily, MeshCmd, Mode, PlaneArg,
    Scheme, SwfSource,
};

/// 2 for numerical failures, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .filter_map(|c| c.downcast_ref::<sphwave::Error>())
        .any(|c| c.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cfg.seed(cli.seed)?;
    match cli.command {
        Command::Mesh(MeshCmd::Build { levels, out }) => {
            let levels = levels.or(cfg.mesh.levels).unwrap_or(2);
            let mesh = build_mesh(levels);
            mesh.save(&out)?;
            info!("mesh with vertex counts {:?} written", mesh.vertex_counts());
            Ok(())
        }
        Command::Filters(FiltersCmd::Gen { family, mesh, out }) => {
            let mesh = SubdivisionMesh::load(&mesh)?;
            let family = match family {
                GenFamily::Lazy => Family::Lazy,
                GenFamily::Interpolating => Family::Interpolating,
                GenFamily::Sint => Family::Sint,
                GenFamily::Vbap => Family::Vbap,
            };
            FilterBank::build(&mesh, family)?.save(&out)?;
            Ok(())
        }
        Command::Filters(FiltersCmd::Opt { mesh, levels, out }) => {
            let mesh = SubdivisionMesh::load(&mesh)?;
            let top = levels.or(cfg.family.levels).unwrap_or(mesh.max_level());
            if top == 0 || top > mesh.max_level() {
                bail!("--levels must lie in 1..={}", mesh.max_level());
            }
            let (bank, reports) = optimized_bank(&mesh, top, &cfg.wavelet_opt(seed))?;
            bank.save(&out)?;
            fs::write(out.join("report.csv"), reports_to_csv(&reports))?;
            for r in &reports {
                if !r.converged {
                    warn!("level {} stopped before convergence", r.level);
                }
            }
            Ok(())
        }
        Command::Decoder(DecoderCmd::Analytic {
            layout,
            order,
            mode,
            scheme,
            reg,
            out,
        }) => {
            let layout = load_layout(&layout)?;
            let mode = match mode {
                Mode::Proj => AnalyticMode::Projection,
                Mode::Pinv => AnalyticMode::Pseudoinverse,
            };
            let scheme = match scheme {
                Scheme::Basic => DegreeScheme::Basic,
                Scheme::MaxRe => DegreeScheme::MaxRe,
                Scheme::InPhase => DegreeScheme::InPhase,
            };
            let d = apply_degree_weights(&decode_analytic(&layout, order, mode, reg)?, scheme)?;
            emit(out.as_deref(), &d.to_csv())
        }
        Command::Decoder(DecoderCmd::Opt {
            layout,
            format,
            preset,
            band,
            no_pairing,
            swf,
            out,
        }) => {
            let layout = load_layout(&layout)?;
            let format = parse_format(&format)?;
            let encoder = build_encoder(format, &swf)?;
            let runs: Vec<(Band, String, PathBuf)> = match band {
                BandArg::Both => vec![
                    (Band::Lf, "lf".into(), suffixed(&out, "lf")),
                    (
                        Band::Hf,
                        preset.unwrap_or_else(|| "hf".into()),
                        suffixed(&out, "hf"),
                    ),
                ],
                BandArg::Lf => vec![(Band::Lf, preset.unwrap_or_else(|| "lf".into()), out)],
                BandArg::Hf => vec![(Band::Hf, preset.unwrap_or_else(|| "hf".into()), out)],
                BandArg::Universal => vec![(
                    Band::Universal,
                    preset.unwrap_or_else(|| "smooth".into()),
                    out,
                )],
            };
            for (band, preset, path) in runs {
                let weights = cfg.weights(&preset)?;
                let opts = DecoderOptions {
                    pairing: !no_pairing,
                    band,
                    seed,
                    optimizer: cfg.optimizer(seed),
                    ..DecoderOptions::default()
                };
                let (d, report) = optimize_decoder(&layout, &encoder, &weights, &opts)?;
                log_report(band, &preset, &report);
                d.save(&path)?;
            }
            Ok(())
        }
        Command::Eval(EvalCmd::Sweep {
            plane,
            n,
            format,
            decoder,
            layout,
            upsample,
            swf,
            out,
            summary,
        }) => {
            let plane = match plane {
                Some(PlaneArg::Horizontal) => Plane::Horizontal,
                Some(PlaneArg::Vertical) => Plane::Vertical,
                None => cfg
                    .eval
                    .plane
                    .as_deref()
                    .unwrap_or("horizontal")
                    .parse::<Plane>()?,
            };
            let n = n.or(cfg.eval.n).unwrap_or(360);
            let format = parse_format(&format)?;
            let encoder = build_encoder(format, &swf)?;
            let report = match (decoder, layout) {
                (Some(d), Some(l)) => {
                    let d = DecodingMatrix::load(&d)?;
                    let l = load_layout(&l)?;
                    sweep(
                        Pipeline::Decoded {
                            encoder: &encoder,
                            decoder: &d,
                            layout: &l,
                        },
                        plane,
                        n,
                    )?
                }
                (None, _) => sweep(
                    Pipeline::Virtual {
                        encoder: &encoder,
                        upsample_to: upsample,
                    },
                    plane,
                    n,
                )?,
                (Some(_), None) => bail!("--decoder needs --layout"),
            };
            fs::write(&out, report.to_csv())
                .with_context(|| format!("cannot write {}", out.display()))?;
            let table = summarize(&report).to_csv();
            match summary {
                Some(p) => {
                    fs::write(&p, table).with_context(|| format!("cannot write {}", p.display()))?
                }
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Eval(EvalCmd::Crosstalk {
            decoder,
            layout,
            swf,
            out,
        }) => {
            let d = DecodingMatrix::load(&decoder)?;
            let layout = load_layout(&layout)?;
            let encoder = build_encoder(d.format, &swf)?;
            let values = crosstalk(&d, &layout, &encoder)?;
            emit(out.as_deref(), &crosstalk_csv(&layout, &values))
        }
        Command::Apply { matrix, input, out } => {
            let d = DecodingMatrix::load(&matrix)?;
            let text = fs::read_to_string(&input)
                .with_context(|| format!("cannot read {}", input.display()))?;
            let frames = apply_frames(&d.gains, &text)?;
            fs::write(&out, frames).with_context(|| format!("cannot write {}", out.display()))?;
            Ok(())
        }
    }
}

fn load_layout(path: &Path) -> Result<SpeakerLayout> {
    SpeakerLayout::load(path).with_context(|| format!("layout {}", path.display()))
}

fn parse_format(s: &str) -> Result<Format> {
    s.parse::<Format>()
        .with_context(|| format!("bad --format `{s}` (expected ambi:L or swf:FAMILY:LEVEL)"))
}

fn build_encoder(format: Format, src: &SwfSource) -> Result<Encoder> {
    match format {
        Format::Ambisonics { order } => Ok(Encoder::Ambisonics { order }),
        Format::Swf { family, level } => {
            let enc = match &src.filters {
                Some(dir) => {
                    let bank = FilterBank::load(dir)
                        .with_context(|| format!("filters {}", dir.display()))?;
                    if bank.family != family {
                        warn!("format names family {family}, filters are {}", bank.family);
                    }
                    let mesh = build_mesh(bank.finest_level());
                    SwfEncoder::new(mesh, bank, level)?
                }
                None => SwfEncoder::with_family(family, level)
                    .with_context(|| format!("family {family} needs stored filters (--filters)"))?,
            };
            Ok(Encoder::Swf(Box::new(enc)))
        }
    }
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("decoder");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{tag}.{ext}"),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

fn log_report(band: Band, preset: &str, r: &DecoderReport) {
    info!(
        "{band} decoder ({preset}): start {:?}, f {:.6e} -> {:.6e}, {} free parameters, {} iterations",
        r.init, r.initial_cost, r.final_cost, r.free_parameters, r.iterations
    );
    if !r.converged {
        warn!("{band} decoder optimization did not converge; best iterate written");
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// One output row (speaker signals) per input row (channel samples).
pub fn apply_frames(gains: &DMatrix<f64>, text: &str) -> Result<String> {
    let rows = parse_rows(text)?;
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != gains.ncols() {
            bail!(
                "frame {} has {} channels, matrix expects {}",
                i + 1,
                r.len(),
                gains.ncols()
            );
        }
        let s = gains * nalgebra::DVector::from_column_slice(r);
        let line: Vec<String> = s.iter().map(|&x| fmt_real(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_apply_is_exact() {
        let text = "0.1,-2.5e-3,7\n# comment\n1e300,0,-0\n";
        let out = apply_frames(&DMatrix::identity(3, 3), text).unwrap();
        let a = parse_rows(text).unwrap();
        let b = parse_rows(&out).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn apply_rejects_wrong_width() {
        assert!(apply_frames(&DMatrix::identity(2, 2), "1,2,3\n").is_err());
    }

    #[test]
    fn suffix_paths() {
        assert_eq!(
            suffixed(Path::new("out/d.csv"), "lf"),
            PathBuf::from("out/d_lf.csv")
        );
        assert_eq!(suffixed(Path::new("d"), "hf"), PathBuf::from("d_hf"));
    }

    #[test]
    fn numerical_errors_map_to_two() {
        let e = anyhow::Error::new(sphwave::Error::SingularGram).context("decoder");
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(sphwave::Error::InvalidArgument("x".into()));
        assert_eq!(exit_code(&e), 1);
    }
}
