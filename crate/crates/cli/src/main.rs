//! `constructive` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 provider
//! failure, 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use constructive::pipeline::{self, ExperimentConfig, PipelineError};
use constructive::registry::FeatureSet;
use constructive::synth::SynthParams;

#[derive(Parser)]
#[command(
    name = "constructive",
    version,
    about = "Interpretable dialogue constructiveness experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted signals.
    Synth(SynthArgs),
    /// Validate the corpus and copy it into the output directory.
    Ingest(ConfigArgs),
    /// Collect language-model annotations (resumable).
    Annotate(ConfigArgs),
    /// Build the dialogue feature matrix.
    Extract(ConfigArgs),
    /// Cross-validate the model and baselines and write reports.
    TrainEval(ConfigArgs),
    /// Permutation importance and feature correlations.
    Explain(ConfigArgs),
    /// Per-topic metrics from saved predictions.
    Robustness(ConfigArgs),
    /// Write an annotation audit sheet or score a completed one.
    Audit(AuditArgs),
    /// Summary table of aggregate metrics.
    Report(ConfigArgs),
    /// Every stage from ingest to report.
    Run(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    PlantedBinary,
    PlantedRegression,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl and truth.json.
    #[arg(long)]
    out: PathBuf,
    /// TOML or JSON generator parameters; overrides the preset.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "planted-binary")]
    preset: Preset,
    #[arg(long, default_value_t = 200)]
    n_dialogues: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment TOML file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Fold seeds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    k: Option<usize>,
    /// Feature sets, comma-separated (PM,CM,DT,QoA,IC,ST).
    #[arg(long, value_delimiter = ',')]
    feature_sets: Option<Vec<FeatureSet>>,
    #[arg(long)]
    disaggregate: Option<bool>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 100)]
    sample_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Completed audit sheet to score.
    #[arg(long)]
    human_sheet: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, PipelineError> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = &self.seeds {
            c.seeds = v.clone();
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = &self.feature_sets {
            c.feature_sets = v.clone();
        }
        if let Some(v) = self.disaggregate {
            c.disaggregate = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn synth_params(args: &SynthArgs) -> Result<SynthParams, PipelineError> {
    let Some(path) = &args.params else {
        return Ok(match args.preset {
            Preset::PlantedBinary => SynthParams::planted_binary(args.n_dialogues, args.seed),
            Preset::PlantedRegression => {
                SynthParams::planted_regression(args.n_dialogues, args.seed)
            }
        });
    };
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = |message: String| PipelineError::Format {
        path: path.display().to_string(),
        message,
    };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| format(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| format(e.to_string()))
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth(args) => {
            let params = synth_params(&args)?;
            pipeline::cmd_synth(&params, &args.out)?;
            println!("wrote {}", args.out.join("corpus.jsonl").display());
        }
        Command::Ingest(args) => print_json(&pipeline::cmd_ingest(&args.load()?)?),
        Command::Annotate(args) => print_json(&pipeline::cmd_annotate(&args.load()?)?),
        Command::Extract(args) => {
            let m = pipeline::cmd_extract(&args.load()?)?;
            println!("{} dialogues x {} columns", m.n_rows(), m.n_cols());
        }
        Command::TrainEval(args) => {
            let config = args.load()?;
            pipeline::cmd_train_eval(&config)?;
            print!("{}", pipeline::cmd_report(&config)?);
        }
        Command::Explain(args) => {
            let report = pipeline::cmd_explain(&args.load()?)?;
            for e in report
                .importance
                .ranked()
                .into_iter()
                .take(pipeline::TOP_IMPORTANCE_ROWS)
            {
                println!(
                    "{:>8.4} {:>7.2}%  {}",
                    e.coefficient, e.fi_percent, e.column
                );
            }
        }
        Command::Robustness(args) => {
            let rows = pipeline::cmd_robustness(&args.load()?)?;
            println!("{} per-topic rows", rows.len());
        }
        Command::Audit(args) => {
            let config = args.config.load()?;
            let sheet = args.human_sheet.as_deref();
            match pipeline::cmd_audit(&config, args.sample_size, args.seed, sheet)? {
                Some(report) => print_json(&report),
                None => println!(
                    "wrote {}",
                    report_path(&config, "audit_sheet.csv").display()
                ),
            }
        }
        Command::Report(args) => print!("{}", pipeline::cmd_report(&args.load()?)?),
        Command::Run(args) => {
            let config = args.load()?;
            pipeline::run_all(&config)?;
            print!(
                "{}",
                std::fs::read_to_string(report_path(&config, "summary.md")).unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn report_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.layout().report(name)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; that code is taken by provider failures.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
