//! `sphwave` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "sphwave",
    version,
    about = "Ambisonics and spherical wavelet format tools"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for stochastic steps; overrides SPHWAVE_SEED and the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Subdivision mesh files.
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Wavelet filter banks.
    #[command(subcommand)]
    Filters(FiltersCmd),
    /// Decoding matrices.
    #[command(subcommand)]
    Decoder(DecoderCmd),
    /// Sweeps and crosstalk reports.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Multiplies every frame of a CSV signal by a decoding matrix.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum MeshCmd {
    Build {
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum FiltersCmd {
    /// Closed-form families.
    Gen {
        #[arg(long)]
        family: GenFamily,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Numerically optimized filters.
    Opt {
        #[arg(long)]
        mesh: PathBuf,
        /// Highest level to optimize (default: the mesh's finest level).
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GenFamily {
    Lazy,
    Interpolating,
    Sint,
    Vbap,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Mode {
    Proj,
    Pinv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Scheme {
    Basic,
    MaxRe,
    InPhase,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandArg {
    Lf,
    Hf,
    Universal,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PlaneArg {
    Horizontal,
    Vertical,
}

/// Where SWF filters come from when the family has no closed form or a
/// stored bank is wanted.
#[derive(Args, Debug, Clone, Default)]
pub struct SwfSource {
    /// Filter bank directory (required for the optimized family).
    #[arg(long)]
    pub filters: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DecoderCmd {
    /// Projection or pseudoinverse Ambisonics decoder.
    Analytic {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum, default_value = "proj")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "basic")]
        scheme: Scheme,
        /// Tikhonov regularization for the pseudoinverse.
        #[arg(long, default_value_t = 0.0)]
        reg: f64,
        /// Output CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimized decoder for any format.
    Opt {
        #[arg(long)]
        layout: PathBuf,
        /// `ambi:L` or `swf:FAMILY:LEVEL`
        #[arg(long)]
        format: String,
        /// Weight preset; defaults to `lf`, `hf` or `smooth` by band.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_enum, default_value = "universal")]
        band: BandArg,
        /// Disable left/right pairing of mirrored speakers.
        #[arg(long)]
        no_pairing: bool,
        #[command(flatten)]
        swf: SwfSource,
        /// Output CSV; with `--band both`, `_lf` and `_hf` are appended to
        /// the file stem.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum EvalCmd {
    /// Observables along a ring of source directions.
    Sweep {
        #[arg(long, value_enum)]
        plane: Option<PlaneArg>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        format: String,
        /// Decoding matrix; without it SWF channels play on the mesh
        /// vertices.
        #[arg(long, requires = "layout")]
        decoder: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Upsample virtual-speaker signals to this mesh level.
        #[arg(long, conflicts_with = "decoder")]
        upsample: Option<usize>,
        #[command(flatten)]
        swf: SwfSource,
        #[arg(long)]
        out: PathBuf,
        /// Summary table CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Energy leaking to other speakers when panning onto each speaker.
    Crosstalk {
        #[arg(long)]
        decoder: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[command(flatten)]
        swf: SwfSource,
        /// Output CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
