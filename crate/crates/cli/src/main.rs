use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampgan::pipeline::{self, Overrides, RunConfig};
use ampgan::toy::{generate_toy, ToySpec};
use ampgan::Error;
use clap::{Parser, Subcommand};

/// Antimicrobial-peptide classification with GAN-based rebalancing.
#[derive(Parser, Debug)]
#[command(name = "ampgan", version)]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only process the named dataset.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Balance before splitting with the published GAN learning rate.
    #[arg(long, global = true)]
    paper_faithful: bool,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode every configured dataset to a feature CSV.
    Encode,
    /// Oversample the minority class of a feature CSV.
    Balance {
        #[arg(long)]
        features: PathBuf,
        /// Defaults to <out>/balanced/<name>.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit one model on a feature CSV and save a checkpoint.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// logistic, forest, gaussian_nb, tree, mlp or stacking.
        #[arg(long)]
        model: String,
        /// Defaults to <out>/models/<name>__<model>.json.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a checkpoint on a feature CSV, or cross-validate every
    /// configured model on it when no checkpoint is given.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Metrics file for checkpoint scoring; defaults to <out>/metrics/<name>.json.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full pipeline: every dataset × model × {-G, +G}.
    Run,
    /// Merge report JSONs into an MCC table.
    Report {
        /// Directory holding reports; defaults to the output directory.
        dir: Option<PathBuf>,
        /// Also write the table CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the synthetic toy corpus as FASTA files.
    Toy {
        #[arg(long, default_value = "data/toy")]
        dir: PathBuf,
    },
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn is_missing_file(e: &Error) -> bool {
    match e {
        Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        Error::Record { source, .. } | Error::Fold { source, .. } => is_missing_file(source),
        _ => false,
    }
}

fn exit_for(errors: &[&Error]) -> ExitCode {
    if errors.is_empty() {
        ExitCode::SUCCESS
    } else if errors.iter().any(|e| is_missing_file(e)) {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.resolve(&Overrides {
        seed: cli.seed,
        output_dir: cli.out.clone(),
        dataset: cli.dataset.clone(),
        paper_faithful: cli.paper_faithful,
    })
}

fn report_failures(failures: &[(String, Error)]) -> ExitCode {
    for (d, e) in failures {
        eprintln!("error: dataset {d}: {e}");
    }
    if !failures.is_empty() {
        eprintln!("{} dataset(s) failed", failures.len());
    }
    exit_for(&failures.iter().map(|(_, e)| e).collect::<Vec<_>>())
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    if let Command::Toy { dir } = &cli.command {
        for spec in [ToySpec::balanced(), ToySpec::imbalanced()] {
            let path = dir.join(format!("{}.fasta", spec.name));
            pipeline::write_file(&path, &generate_toy(&spec)?.to_fasta())?;
            println!("{}", path.display());
        }
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = load_config(cli)?;
    let out = &cfg.output_dir;
    match &cli.command {
        Command::Encode => {
            let s = pipeline::cmd_encode(&cfg)?;
            for p in &s.written {
                println!("{}", p.display());
            }
            Ok(report_failures(&s.failures))
        }
        Command::Balance { features, output } => {
            let dest = output
                .clone()
                .unwrap_or_else(|| out.join("balanced").join(format!("{}.csv", stem(features))));
            println!("{}", pipeline::cmd_balance(&cfg, features, &dest)?.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            features,
            model,
            output,
        } => {
            let dest = output.clone().unwrap_or_else(|| {
                out.join("models").join(format!("{}__{model}.json", stem(features)))
            });
            println!("{}", pipeline::cmd_train(&cfg, features, model, &dest)?.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            features,
            model: Some(model),
            output,
        } => {
            let dest = output
                .clone()
                .unwrap_or_else(|| out.join("metrics").join(format!("{}.json", stem(features))));
            let v = pipeline::cmd_evaluate_model(&cfg, model, features, &dest)?;
            println!("{:#}", v["metrics"]);
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            features,
            model: None,
            ..
        } => {
            let reports = pipeline::cmd_evaluate_features(&cfg, features)?;
            print!("{}", pipeline::mcc_table(&reports));
            Ok(ExitCode::SUCCESS)
        }
        Command::Run => {
            let o = pipeline::cmd_run(&cfg)?;
            print!("{}", pipeline::summary_text(&o.reports, &o.checks));
            println!("outputs in {}", out.display());
            Ok(report_failures(&o.failures))
        }
        Command::Report { dir, output } => {
            let dir = dir.clone().unwrap_or_else(|| out.clone());
            let (table, summary) = pipeline::cmd_report(&dir)?;
            if let Some(p) = output {
                pipeline::write_file(p, &table)?;
            }
            print!("{table}");
            print!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Toy { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&[&e])
        }
    }
}
