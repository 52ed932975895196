mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qmeval_core::Variant;

#[derive(Parser)]
#[command(
    name = "qmeval",
    version,
    about = "Evaluates software product quality against a hierarchical quality model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Check a quality model file against the structural rules
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Derive weights from pairwise comparisons and rewrite the model
    Weigh {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        comparisons: PathBuf,
        /// Output path for the reweighted model (default: standard output)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate measurement datasets against a model
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Dataset file (CSV or JSON); repeat to evaluate several products
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "direct", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantify grade stability under weight and threshold perturbations
    Sensitivity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "direct", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Additive weight deltas, comma separated (default ±0.01/0.05/0.10/0.20)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weight_deltas: Option<Vec<f64>>,
        /// Relative threshold deltas, comma separated (default ±0.05/0.10/0.25)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        threshold_deltas: Option<Vec<f64>>,
        /// Restrict the sweep to these targets (node id or full label)
        #[arg(long)]
        target: Vec<String>,
    },
    /// Convert a static-analysis findings report into a dataset
    FindingsConvert {
        #[arg(long)]
        findings: PathBuf,
        /// JSON object mapping rule ids to measure ids
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

/// A command failure with its contract exit code: 1 parse, 2 validation,
/// 3 completeness, 4 evaluation.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn completeness(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    fn evaluation(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { model } => commands::validate(&model),
        Command::Weigh {
            model,
            comparisons,
            out,
        } => commands::weigh(&model, &comparisons, out.as_deref()),
        Command::Evaluate {
            model,
            data,
            variant,
            format,
            out,
        } => commands::evaluate(&model, &data, variant, format, out.as_deref()),
        Command::Sensitivity {
            model,
            data,
            variant,
            format,
            out,
            weight_deltas,
            threshold_deltas,
            target,
        } => commands::sensitivity(
            &model,
            &data,
            variant,
            format,
            out.as_deref(),
            weight_deltas,
            threshold_deltas,
            target,
        ),
        Command::FindingsConvert {
            findings,
            mapping,
            out,
        } => commands::findings_convert(&findings, &mapping, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if !failure.message.is_empty() {
                eprintln!("{}", failure.message);
            }
            ExitCode::from(failure.code)
        }
    }
}
