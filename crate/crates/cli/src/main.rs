use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use selfsort_cli::commands::{self, ReportFormat};

#[derive(Parser)]
#[command(
    name = "selfsort",
    about = "Distribution-adaptive sorting harness: generate worlds, learn their \
             hidden structure, and sort fresh instances with entropy-proportional cost",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world and its validation report.
    Generate {
        /// Config file (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// World seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Learn a model from a world (drawing fresh instances) or from a
    /// recorded instance stream.
    Learn {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Learning draw seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Outcome-sampling multiplier in (0, 1].
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Learn only the hidden partition from a sample file.
    LearnPartition {
        /// Instance file providing the sample rows.
        #[arg(long)]
        samples: PathBuf,
        /// Extrema budget for the statistic threshold 2*mu + 1.
        #[arg(long)]
        mu: u32,
        /// Output file (prints to stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the capped pairwise statistic matrix.
        #[arg(long)]
        matrix: bool,
    },
    /// Sort instances with a learned model; prints one rank per line.
    Sort {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        /// Optional JSON report of per-run counters.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sort many fresh instances, cross-check each against the reference
    /// sort, and write per-run and summary reports.
    Bench {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluation draw seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of fresh instances (overrides the config).
        #[arg(long)]
        runs: Option<u32>,
        /// Per-run report format (summary is always JSON).
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Concentration and bucket-occupancy diagnostics.
    Diagnose {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Learning repetitions for the concentration check.
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out, seed } => {
            commands::cmd_generate(config.as_deref(), &out, seed)
        }
        Command::Learn { world, instances, out, config, seed, rho } => commands::cmd_learn(
            world.as_deref(),
            instances.as_deref(),
            &out,
            config.as_deref(),
            seed,
            rho,
        ),
        Command::LearnPartition { samples, mu, out, matrix } => {
            commands::cmd_learn_partition(&samples, mu, out.as_deref(), matrix)
        }
        Command::Sort { model, instance, report } => {
            commands::cmd_sort(&model, &instance, report.as_deref())
        }
        Command::Bench { world, model, out, config, seed, runs, format } => commands::cmd_bench(
            &world,
            &model,
            &out,
            config.as_deref(),
            seed,
            runs,
            match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            },
        ),
        Command::Diagnose { world, model, out, config, reps, seed } => {
            commands::cmd_diagnose(&world, &model, &out, config.as_deref(), reps, seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("selfsort: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
