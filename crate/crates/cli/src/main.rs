use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bfcb_cli::commands::{
    cmd_cross_metric, cmd_dataset, cmd_kpi, cmd_sweep, cmd_train, cmd_train_ifor, CodebookInputs,
    CommonOpts,
};
use bfcb_cli::exit_code;
use bfcb_cli::report::OutputFormat;
use bfcb_core::codebook::DistanceMetric;
use bfcb_core::error::Result;

#[derive(Parser)]
#[command(
    name = "bfcb",
    about = "Beamforming feedback codebooks: dataset generation, training, KPI evaluation, and link sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = default pool).
    #[arg(long)]
    threads: Option<usize>,
    /// Report format for kpi/sweep/cross-metric.
    #[arg(long, default_value = "csv")]
    format: String,
}

impl Common {
    fn opts(&self) -> Result<CommonOpts> {
        Ok(CommonOpts {
            config: self.config.clone(),
            out_dir: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
            format: self.format.parse::<OutputFormat>()?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training dataset.
    Dataset {
        #[command(flatten)]
        common: Common,
    },
    /// Train a codebook from a dataset file.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file produced by `dataset`.
        #[arg(long)]
        dataset: PathBuf,
        /// Clustering metric for the serialized-V codebook.
        #[arg(long, default_value = "cd")]
        metric: String,
        /// Train the angle-index codebook instead.
        #[arg(long)]
        ifor: bool,
        /// Output file name within the output directory.
        #[arg(long)]
        output: Option<String>,
    },
    /// Evaluate intermediate KPIs (rho, NMSE).
    Kpi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        books: BookArgs,
    },
    /// Run the link-level SNR sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        books: BookArgs,
    },
    /// Run the 2x2 train-metric x select-metric experiment.
    CrossMetric {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        books: BookArgs,
    },
}

#[derive(Args)]
struct BookArgs {
    /// CD-trained serialized-V codebook file.
    #[arg(long)]
    codebook_cd: Option<PathBuf>,
    /// SED-trained serialized-V codebook file.
    #[arg(long)]
    codebook_sed: Option<PathBuf>,
    /// Angle-index codebook file.
    #[arg(long)]
    ifor_codebook: Option<PathBuf>,
}

impl BookArgs {
    fn inputs(&self) -> CodebookInputs {
        CodebookInputs {
            cd: self.codebook_cd.clone(),
            sed: self.codebook_sed.clone(),
            ifor: self.ifor_codebook.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset { common } => {
            let summary = cmd_dataset(&common.opts()?)?;
            println!(
                "dataset: {} points={} sha256={}",
                summary.path.display(),
                summary.points,
                summary.digest_hex
            );
        }
        Command::Train { common, dataset, metric, ifor, output } => {
            let opts = common.opts()?;
            let summary = if ifor {
                cmd_train_ifor(&opts, &dataset, output.as_deref())?
            } else {
                let metric = metric.parse::<DistanceMetric>()?;
                cmd_train(&opts, &dataset, metric, output.as_deref())?
            };
            println!(
                "codebook: {} iterations={} objective={} sha256={}",
                summary.path.display(),
                summary.iterations,
                summary.final_objective,
                summary.digest_hex
            );
        }
        Command::Kpi { common, books } => {
            let (path, rows) = cmd_kpi(&common.opts()?, &books.inputs())?;
            println!("kpi: {} rows={}", path.display(), rows.len());
        }
        Command::Sweep { common, books } => {
            let (path, rows) = cmd_sweep(&common.opts()?, &books.inputs())?;
            println!("sweep: {} rows={}", path.display(), rows.len());
        }
        Command::CrossMetric { common, books } => {
            let (path, rows) = cmd_cross_metric(&common.opts()?, &books.inputs())?;
            println!("cross-metric: {} rows={}", path.display(), rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
