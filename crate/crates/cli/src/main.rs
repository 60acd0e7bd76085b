mod commands;
mod config;
mod output;
mod reproduce;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use bellhd_core::Family;
use config::{FileConfig, Overrides, RunConfig};
use output::Format;

#[derive(Parser)]
#[command(name = "bellhd", version, about = "High-dimensional Bell tests: bounds, see-saw, binarisation and count statistics")]
struct Cli {
    /// Master seed for every randomised routine.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol_lp: Option<f64>,
    #[arg(long, global = true)]
    tol_sdp: Option<f64>,
    /// Worker threads (falls back to CLI_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Full-precision JSON output.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    /// JSON file with seed, tol_lp, tol_sdp, threads, restarts, trials.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct FunctionalArgs {
    #[arg(long, default_value = "cglmp", value_parser = parse_family)]
    pub family: Family,
    /// Outcomes per measurement.
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Functional JSON file; replaces --family/--d.
    #[arg(long)]
    pub functional: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: bellhd_core::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    One,
    OneAb,
    OneAbAa,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolverArg {
    Auto,
    Sdp,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    Auto,
    Uniform,
    InputsOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Ratio,
    ShiftedRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurveMode {
    Multi,
    Binarised,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a functional on a behavior: uniform, optimal, a count CSV or a behavior JSON.
    Eval {
        #[command(flatten)]
        f: FunctionalArgs,
        #[arg(long)]
        behavior: String,
    },
    /// Local, see-saw and dimension-restricted bounds for D = 1, 2, ...
    Bounds {
        #[command(flatten)]
        f: FunctionalArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        dims: Vec<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, value_enum, default_value = "one-ab")]
        level: LevelArg,
    },
    /// Local bound by enumerating deterministic strategies.
    Lhv {
        #[command(flatten)]
        f: FunctionalArgs,
    },
    /// Optimal locality witness for a behavior (linear program).
    Witness {
        #[command(flatten)]
        f: FunctionalArgs,
        #[arg(long, default_value = "optimal")]
        behavior: String,
        /// Witness the click/no-click image instead of the behavior itself.
        #[arg(long)]
        binarised: bool,
        #[arg(long, value_enum, default_value = "auto")]
        noise: NoiseArg,
        /// Write the witness functional as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// See-saw lower bound in local dimension D.
    Seesaw {
        #[command(flatten)]
        f: FunctionalArgs,
        /// Local dimension (defaults to d).
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        minimize: bool,
        #[arg(long, value_enum, default_value = "auto")]
        solver: SolverArg,
        /// Write the optimal model as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound on the functional over D-dimensional projective models.
    Dimbound {
        #[command(flatten)]
        f: FunctionalArgs,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "one-ab")]
        level: LevelArg,
        /// Solve every rank profile instead of one per symmetry orbit.
        #[arg(long)]
        full_enumeration: bool,
        /// List the per-profile bounds.
        #[arg(long)]
        profiles: bool,
    },
    /// Binarised witness of the ideal behavior and its see-saw minima.
    Binarise {
        #[command(flatten)]
        f: FunctionalArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
    },
    /// Bell value, Monte-Carlo error and Chernoff bound for a count table.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "cglmp", value_parser = parse_family)]
        family: Family,
        /// Quantum maximum used for normalisation (default: see-saw).
        #[arg(long)]
        quantum_max: Option<f64>,
        /// Raw threshold to beat (default: dimension bound at D = d − 1).
        #[arg(long)]
        threshold: Option<f64>,
        /// Normalisation (default: ratio for cglmp, shifted-ratio for satwap).
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, default_value_t = 1e-30)]
        p_target: f64,
        #[arg(long)]
        trials: Option<usize>,
        /// Added to every count before resampling.
        #[arg(long, default_value_t = 0.0)]
        pseudo_count: f64,
    },
    /// Critical white-noise visibility against d.
    NoiseCurve {
        #[arg(long, default_value = "cglmp", value_parser = parse_family)]
        family: Family,
        #[arg(long, default_value_t = 2)]
        d_min: usize,
        #[arg(long, default_value_t = 4)]
        d_max: usize,
        #[arg(long, value_enum, default_value = "multi")]
        mode: CurveMode,
    },
    /// Recompute every published number and write a pass/fail manifest.
    Reproduce {
        /// Skip the dimension-bound rows.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "manifest.json")]
        out: PathBuf,
        /// Directory holding table4/table5 CSV files and sidecars.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub format: Format,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides { seed: cli.seed, tol_lp: cli.tol_lp, tol_sdp: cli.tol_sdp, threads: cli.threads };
    let cfg = RunConfig::resolve(flags, file, std::env::var("CLI_THREADS").ok())?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        Format::Text
    };
    let ctx = Ctx { cfg, format };

    use commands::*;
    match cli.command {
        Command::Eval { f, behavior } => eval(&ctx, &f, &behavior)?,
        Command::Bounds { f, dims, restarts, level } => bounds(&ctx, &f, &dims, restarts, level)?,
        Command::Lhv { f } => lhv(&ctx, &f)?,
        Command::Witness { f, behavior, binarised, noise, out } => witness(&ctx, &f, &behavior, binarised, noise, out.as_deref())?,
        Command::Seesaw { f, dim, restarts, minimize, solver, out } => seesaw(&ctx, &f, dim, restarts, minimize, solver, out.as_deref())?,
        Command::Dimbound { f, dim, level, full_enumeration, profiles } => dimbound(&ctx, &f, dim, level, full_enumeration, profiles)?,
        Command::Binarise { f, dims, restarts } => binarise(&ctx, &f, &dims, restarts)?,
        Command::Stats { data, family, quantum_max, threshold, mode, p_target, trials, pseudo_count } => {
            stats(&ctx, &data, family, quantum_max, threshold, mode, p_target, trials, pseudo_count)?
        }
        Command::NoiseCurve { family, d_min, d_max, mode } => noise_curve(&ctx, family, d_min, d_max, mode)?,
        Command::Reproduce { quick, out, data_dir } => return reproduce::run(&ctx, quick, &out, data_dir.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // Wrapped errors often repeat their source in their own message.
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
