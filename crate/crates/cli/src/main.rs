//! `subchain`: design and evaluate sub-chain beam codebooks for quantized
//! phased arrays. Thin argument layer over the pipeline library; exit codes
//! are 0 on success, 2 for configuration errors, 3 for data errors, and 4
//! for internal failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subchain_core::EFieldFormat;

use subchain_cli::{
    load_pipeline_config, run_compare, run_design_pipeline, run_metrics_pipeline, run_synth,
    validate_codebook_file, validate_efield_file, CliError, CliResult, Method, Overrides,
};

#[derive(Parser)]
#[command(
    name = "subchain",
    version,
    about = "Design and evaluate sub-chain beam codebooks for quantized phased arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Single JSON bundle per array.
    Json,
    /// Response CSV plus a `<stem>.grid.csv` companion.
    Csv,
}

impl From<FormatArg> for EFieldFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => EFieldFormat::Json,
            FormatArg::Csv => EFieldFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: E-fields, codebook family per array, metrics.
    Design {
        /// Pipeline config JSON, or a run manifest from a previous run.
        #[arg(long)]
        config: PathBuf,
        /// Directory for codebooks, metric CSVs, and the run manifest.
        #[arg(long)]
        out: PathBuf,
        /// Override the design seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the activation levels, e.g. `5,4,3`.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Override the sub-chain design method.
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Also write per-stage objective traces (traces.jsonl).
        #[arg(long)]
        emit_traces: bool,
    },
    /// Recompute metric CSVs for previously designed codebooks.
    Metrics {
        /// Pipeline config JSON (or run manifest) describing the E-fields.
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the codebook_a<i>_l<level>.json files.
        #[arg(long)]
        codebooks: PathBuf,
        /// Directory for the recomputed metric CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge metric tables from several runs into comparison CSVs.
    Compare {
        /// Two or more run directories (repeat or comma-separate).
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        runs: Vec<PathBuf>,
        /// Directory for the comparison CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the configured synthetic E-field data and stop.
    SynthEfield {
        /// Pipeline config JSON (or run manifest) with a synthetic source.
        #[arg(long)]
        config: PathBuf,
        /// Directory for the efield_a<i> files.
        #[arg(long)]
        out: PathBuf,
        /// On-disk encoding to write.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Check data files against their documented schemas.
    Validate {
        /// E-field file to check.
        #[arg(long)]
        efield: Option<PathBuf>,
        /// Encoding of the --efield file.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Codebook JSON file to check.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Design {
            config,
            out,
            seed,
            levels,
            method,
            emit_traces,
        } => {
            let mut cfg = load_pipeline_config(&config)?;
            Overrides {
                seed,
                levels,
                method,
                emit_traces,
            }
            .apply(&mut cfg);
            let arts = run_design_pipeline(&cfg, &out)?;
            println!(
                "designed {} array(s) x {} level(s); wrote {} files to {}",
                arts.families.len(),
                cfg.levels.len(),
                arts.files.len(),
                out.display()
            );
            Ok(())
        }
        Command::Metrics {
            config,
            codebooks,
            out,
        } => {
            let cfg = load_pipeline_config(&config)?;
            let files = run_metrics_pipeline(&cfg, &codebooks, &out)?;
            println!("wrote {} metric files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Compare { runs, out } => {
            let files = run_compare(&runs, &out)?;
            println!(
                "compared {} runs; wrote {} files to {}",
                runs.len(),
                files.len(),
                out.display()
            );
            Ok(())
        }
        Command::SynthEfield {
            config,
            out,
            format,
        } => {
            let cfg = load_pipeline_config(&config)?;
            let files = run_synth(&cfg, &out, format.into())?;
            println!("wrote {} e-field files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Validate {
            efield,
            format,
            codebook,
        } => {
            if efield.is_none() && codebook.is_none() {
                return Err(CliError::Config(
                    "validate needs --efield and/or --codebook".into(),
                ));
            }
            if let Some(path) = efield {
                println!("{}", validate_efield_file(&path, format.into())?);
            }
            if let Some(path) = codebook {
                println!("{}", validate_codebook_file(&path)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
