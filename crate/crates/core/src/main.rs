use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopsense::experiment::{self, summary_csv, ExperimentConfig, SweepAxis};
use coopsense::Error;

#[derive(Parser)]
#[command(name = "coopsense", version, about = "Cooperative spectrum sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/test datasets
    Generate(Common),
    /// Train all classifiers on the datasets in the output directory
    Train(Common),
    /// Evaluate saved models on the test set
    Eval(Common),
    /// generate + train + eval
    Run(Common),
    /// Run once per value of one parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        /// M, snr_db, N or L
        #[arg(long)]
        axis: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Print the default config
    DefaultConfig,
}

fn resolve(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    let out = config.output_dir.clone();
    Ok((config, out))
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let (config, out) = resolve(&c)?;
            let (train, test) = experiment::generate_stage(&config, &out)?;
            println!("wrote {} training and {} test events to {}", train.len(), test.len(), out.display());
        }
        Command::Train(c) => {
            let (config, out) = resolve(&c)?;
            for (name, model) in experiment::train_stage(&config, &out)? {
                match model {
                    Ok(_) => println!("{name}: ok"),
                    Err(e) => println!("{name}: failed: {e}"),
                }
            }
        }
        Command::Eval(c) => {
            let (config, out) = resolve(&c)?;
            print!("{}", summary_csv(&experiment::eval_stage(&config, &out)?.rows));
        }
        Command::Run(c) => {
            let (config, out) = resolve(&c)?;
            print!("{}", summary_csv(&experiment::run(&config, &out)?.rows));
        }
        Command::Sweep { common, axis, values } => {
            let (config, out) = resolve(&common)?;
            let axis = SweepAxis::parse(&axis)?;
            let results = experiment::sweep(&config, axis, &values, &out)?;
            println!("axis_value,classifier,auc");
            for (v, o) in results {
                for r in o.rows {
                    println!("{v},{},{}", r.classifier, r.auc);
                }
            }
        }
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::Config { key, .. } = &e {
                line["key"] = serde_json::Value::String(key.clone());
            }
            eprintln!("{line}");
            match e {
                Error::Config { .. } | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
