//! `bam`: batch driver for budget argument mining.

mod commands;
mod error;
mod manifest;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bam_core::config::PipelineConfig;
use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::{Invocation, SUBCOMMANDS};
use error::CliError;

const OVERRIDES_HELP: &str = "\
Every subcommand accepts `--config FILE` plus `--KEY VALUE` overrides for any
config key, with dots for nesting: `--train data/train.json --rid.threshold 0.3
--classifier.epochs 10`. Values are parsed as JSON and fall back to strings.

Subcommand options that are not config keys:
  evaluate       --predictions FILE --gold FILE
  export-corpus  --split train|test|all
  synth          --small";

#[derive(Parser)]
#[command(name = "bam", version, about = "Budget argument mining over political minutes", after_help = OVERRIDES_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the configured files and report corpus statistics.
    Validate(Raw),
    /// Confusion of the rule gate against gold labels of the training file.
    GateStats(Raw),
    /// Train the argument classifier.
    TrainAc(Raw),
    /// Train the relation pair classifier.
    TrainRid(Raw),
    /// Write line-JSON predictions for the test file.
    Predict(Raw),
    /// Score a prediction file against gold.
    Evaluate(Raw),
    /// Stratified cross-validation on the training file.
    Cv(Raw),
    /// Write the corpus interchange line-JSON, with propositions.
    ExportCorpus(Raw),
    /// Write a synthetic corpus in the task schema.
    Synth(Raw),
    /// Replay a manifest and check that its outputs are reproduced bit for bit.
    Rerun {
        manifest: PathBuf,
        /// Write the replayed outputs here instead of the recorded location.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Raw {
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    args: Vec<String>,
}

/// Options that are not config keys, per subcommand; `true` means the
/// option takes a path.
fn extra_options(subcommand: &str) -> &'static [(&'static str, bool)] {
    match subcommand {
        "evaluate" => &[("predictions", true), ("gold", true)],
        "export-corpus" => &[("split", false)],
        "synth" => &[("small", false)],
        _ => &[],
    }
}

fn parse_invocation(subcommand: &str, args: Vec<String>) -> Result<Invocation, CliError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut it = args.iter();
    while let Some(tok) = it.next() {
        let key = tok.strip_prefix("--").ok_or_else(|| {
            CliError::Usage(format!("unexpected argument `{tok}`; expected --KEY VALUE"))
        })?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None if key == "small" => (key.to_string(), "true".into()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
    }

    let mut config = match pairs.iter().find(|(k, _)| k == "config") {
        Some((_, path)) => PipelineConfig::from_file(path.as_ref())?,
        None => PipelineConfig::default(),
    };
    let mut inputs = BTreeMap::new();
    let mut options = BTreeMap::new();
    let extras = extra_options(subcommand);
    for (key, value) in pairs.iter().filter(|(k, _)| k != "config") {
        match extras.iter().find(|(name, _)| name == key) {
            Some((_, true)) => {
                inputs.insert(key.clone(), PathBuf::from(value));
            }
            Some((_, false)) => {
                let v =
                    serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.clone()));
                options.insert(key.clone(), v);
            }
            None => config
                .set(key, value)
                .map_err(|e| CliError::Usage(e.to_string()))?,
        }
    }
    let mut inv = Invocation {
        subcommand: subcommand.to_string(),
        args,
        config,
        inputs,
        options,
    };
    commands::resolve_paths(&mut inv)?;
    Ok(inv)
}

fn run_invocation(inv: &Invocation) -> Result<Value, CliError> {
    let result = commands::execute(inv)?;
    let m = manifest::build(inv, &result.outputs)?;
    let path = manifest::save(&m)?;
    if let Some(table) = result.table {
        eprintln!("{table}");
    }
    Ok(serde_json::json!({ "result": result.summary, "manifest": path }))
}

fn rerun(manifest_file: PathBuf, output_dir: Option<PathBuf>) -> Result<Value, CliError> {
    let recorded = manifest::read(&manifest_file)?;
    let mut inv = recorded.invocation.clone();
    if !SUBCOMMANDS.contains(&inv.subcommand.as_str()) {
        return Err(CliError::Usage(format!(
            "manifest names unknown subcommand `{}`",
            inv.subcommand
        )));
    }
    if let Some(dir) = output_dir {
        inv.config.output_dir = std::path::absolute(&dir)
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    }
    let result = commands::execute(&inv)?;
    let replayed = manifest::build(&inv, &result.outputs)?;
    let diffs = manifest::differences(&recorded, &replayed);
    if !diffs.is_empty() {
        return Err(CliError::Mismatch(diffs));
    }
    let path = manifest::save(&replayed)?;
    Ok(serde_json::json!({
        "reproduced": true,
        "manifest": path,
        "outputs": replayed.outputs,
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let (name, raw) = match cli.command {
        Command::Validate(r) => ("validate", r),
        Command::GateStats(r) => ("gate-stats", r),
        Command::TrainAc(r) => ("train-ac", r),
        Command::TrainRid(r) => ("train-rid", r),
        Command::Predict(r) => ("predict", r),
        Command::Evaluate(r) => ("evaluate", r),
        Command::Cv(r) => ("cv", r),
        Command::ExportCorpus(r) => ("export-corpus", r),
        Command::Synth(r) => ("synth", r),
        Command::Rerun {
            manifest,
            output_dir,
        } => return finish(rerun(manifest, output_dir)),
    };
    finish(parse_invocation(name, raw.args).and_then(|inv| run_invocation(&inv)))
}

fn finish(result: Result<Value, CliError>) -> ExitCode {
    match result {
        Ok(v) => {
            // a closed stdout (e.g. piped into `head`) is not a run failure
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
