use clap::{Args, Parser, Subcommand};
use kroninfer::cli::{self, CliError, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kroninfer",
    version,
    about = "Random Kronecker multiplex graphs: generation, denoising, inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; also collapses the sweep seed list to this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep sizes, comma separated (each a power of q = m*l).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Max concurrent grid points for the figure sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Replication depth K (required by gen/infer unless set in the config).
    #[arg(short = 'K', long)]
    replication: Option<u32>,
    /// Write edges as flattened "u v" pairs instead of "i alpha j beta".
    #[arg(long)]
    flat: bool,
    /// Also write dense tensors as KTEN1 files.
    #[arg(long)]
    dense: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph and write the edge list plus metadata sidecar.
    Gen(CommonArgs),
    /// Run the inference pipeline and write the result JSON.
    Infer {
        #[command(flatten)]
        common: CommonArgs,
        /// Edge-list file to infer from (generated in memory when omitted).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Shrinkage error sweep: empirical vs predicted, per (d, seed).
    FigShrinkage(CommonArgs),
    /// Operator-norm residual of the signal-plus-noise decomposition.
    FigOpnorm(CommonArgs),
    /// Normalized singular-value spectrum with the limiting law and spikes.
    FigSpectrum(CommonArgs),
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let overrides = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        sizes: common.sizes.clone(),
        jobs: common.jobs,
        replication: common.replication,
    };
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(common) => {
            let cfg = load(&common)?;
            let summary = cli::cmd_gen(&cfg, common.flat, common.dense)?;
            println!(
                "generated d={} edges={} density={:.6} -> {}",
                summary.d,
                summary.edges,
                summary.density,
                summary.edge_file.display()
            );
        }
        Command::Infer { common, input } => {
            let cfg = load(&common)?;
            let path = cli::cmd_infer(&cfg, input.as_deref(), common.dense)?;
            println!("inference written to {}", path.display());
        }
        Command::FigShrinkage(common) => {
            let cfg = load(&common)?;
            let path = cli::cmd_fig_shrinkage(&cfg)?;
            println!("shrinkage figure data written to {}", path.display());
        }
        Command::FigOpnorm(common) => {
            let cfg = load(&common)?;
            let path = cli::cmd_fig_opnorm(&cfg)?;
            println!("operator-norm figure data written to {}", path.display());
        }
        Command::FigSpectrum(common) => {
            let cfg = load(&common)?;
            let path = cli::cmd_fig_spectrum(&cfg)?;
            println!("spectrum figure data written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
