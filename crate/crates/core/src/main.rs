use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use halfspace::cli::{parse_box, run, Command, Format, Overrides, RunConfig, EXIT_ERROR};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Classify,
    Solve,
    Verify,
    Audit,
    Oracle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fmt {
    Json,
    Csv,
    Text,
}

/// Classifier and verifier for nonnegative solutions of -div(A grad u) = u - g
/// on the half-space with zero Dirichlet data.
#[derive(Debug, Parser)]
#[command(name = "halfspace", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Problem file (JSON).
    spec: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Fmt,
    #[arg(long = "tol-zero")]
    tol_zero: Option<f64>,
    #[arg(long = "tol-res")]
    tol_res: Option<f64>,
    /// Points per axis of the verification grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of 2pi periods scanned in xN.
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long = "oracle-R")]
    oracle_r: Option<f64>,
    #[arg(long = "oracle-h")]
    oracle_h: Option<f64>,
    /// Verification box for x', as lo:hi[,lo:hi].
    #[arg(long = "box")]
    bbox: Option<String>,
    /// Sampled field (CSV: x1[,x2],xN,value) for `audit`.
    #[arg(long)]
    field: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = std::env::var("HALFSPACE_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let bbox = match args.bbox.as_deref().map(parse_box).transpose() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: --box: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let cfg = RunConfig {
        command: match args.command {
            Cmd::Classify => Command::Classify,
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
            Cmd::Audit => Command::Audit,
            Cmd::Oracle => Command::Oracle,
        },
        input: args.spec,
        output: args.out,
        format: match args.format {
            Fmt::Json => Format::Json,
            Fmt::Csv => Format::Csv,
            Fmt::Text => Format::Text,
        },
        overrides: Overrides {
            tol_zero: args.tol_zero,
            tol_res: args.tol_res,
            grid: args.grid,
            periods: args.periods,
            oracle_r: args.oracle_r,
            oracle_h: args.oracle_h,
            bbox,
        },
        field: args.field,
    };
    match run(&cfg) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
