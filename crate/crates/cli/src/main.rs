//! `fqlens`: differentiation spectra over phased haplotype panels, with
//! bootstrap bands and a pedigree-aware forward simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 parse error,
//! 4 undefined statistic, 5 extinction, 1 I/O failure.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fqlens_core::error::Error;
use output::OutputFormat;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_UNDEFINED: u8 = 4;
pub const EXIT_EXTINCT: u8 = 5;

/// Maps an error to the documented exit-code contract.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::Format(_) => EXIT_PARSE,
        Error::UndefinedStatistic(_) => EXIT_UNDEFINED,
        Error::Io { .. } => 1,
    }
}

#[derive(Parser)]
#[command(
    name = "fqlens",
    version,
    about = "Differentiation spectra over haplotype panels, with bootstrap bands and a forward simulator",
    after_help = "Set FQLENS_LOG=info (or debug, trace) for progress diagnostics."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

/// Flags accepted by every subcommand.
#[derive(Args)]
pub struct CommonArgs {
    /// Root seed for resampling; for simulate, overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread count (default: all cores). Results never depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Comma-separated, strictly increasing diversity orders.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1,2")]
    pub q_grid: Vec<f64>,

    /// Attach bootstrap percentile bands to the reported statistics.
    #[arg(long, global = true)]
    pub bootstrap: bool,

    /// Bootstrap replicate count.
    #[arg(long, global = true, default_value_t = 100)]
    pub replicates: usize,

    /// Largest number of haplotypes resampled from any one population.
    #[arg(long, global = true, default_value_t = 40)]
    pub cap: usize,

    /// Central confidence mass of the percentile band.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub ci: f64,

    /// Drop loci whose panel-wide minor-allele frequency is below this.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub min_maf: f64,

    /// Table format for results.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Output file (tables) or directory (simulate). Tables default to
    /// stdout; file outputs get a sibling manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a phased biallelic VCF plus sample map into the native panel container.
    Convert(ConvertArgs),
    /// Regional differentiation spectrum per region (equal population weights).
    Compute(ComputeArgs),
    /// One-vs-rest spectrum per focal population within its region.
    Ovr(OvrArgs),
    /// Leave-one-out influence of each population on its region.
    Loo(LooArgs),
    /// Run a forward simulation from a TOML or JSON config.
    Simulate(SimArgs),
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Phased, biallelic, tab-separated VCF.
    #[arg(long)]
    pub vcf: PathBuf,

    /// Two-column TSV mapping sample id to population id.
    #[arg(long)]
    pub samples: PathBuf,
}

#[derive(Args)]
pub struct ComputeArgs {
    /// Native panel container (from `fqlens convert`).
    #[arg(long)]
    pub panel: PathBuf,

    /// Region file (.toml/.json) grouping populations. Default: one region
    /// named `all` spanning every panel population.
    #[arg(long)]
    pub regions: Option<PathBuf>,

    /// Also write a per-locus table (region, locus, order, gap, total, ratio) here.
    #[arg(long)]
    pub per_locus: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("focal_sel").required(true).multiple(false))]
pub struct OvrArgs {
    /// Native panel container (from `fqlens convert`).
    #[arg(long)]
    pub panel: PathBuf,

    /// Region file (.toml/.json) grouping populations. Default: one region
    /// named `all` spanning every panel population.
    #[arg(long)]
    pub regions: Option<PathBuf>,

    /// Focal population (must belong to a region).
    #[arg(long, group = "focal_sel")]
    pub focal: Option<String>,

    /// Every population of every region in turn.
    #[arg(long, group = "focal_sel")]
    pub all: bool,
}

#[derive(Args)]
pub struct LooArgs {
    /// Native panel container (from `fqlens convert`).
    #[arg(long)]
    pub panel: PathBuf,

    /// Region file (.toml/.json) grouping populations. Default: one region
    /// named `all` spanning every panel population.
    #[arg(long)]
    pub regions: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimArgs {
    /// Simulation recipe (.toml or .json).
    #[arg(long)]
    pub config: PathBuf,

    /// Write every cohort's haplotype panel under <out>/panels/.
    #[arg(long)]
    pub export_panels: bool,

    /// Write the full pedigree as <out>/pedigree.tsv.
    #[arg(long)]
    pub export_pedigree: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FQLENS_LOG", "warn"))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("fqlens: could not size the worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let outcome = match &cli.command {
        Command::Convert(args) => commands::convert::run(&cli.common, args),
        Command::Compute(args) => commands::stats::compute(&cli.common, args),
        Command::Ovr(args) => commands::stats::ovr(&cli.common, args),
        Command::Loo(args) => commands::stats::loo(&cli.common, args),
        Command::Simulate(args) => commands::simulate::run(&cli.common, args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fqlens: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
