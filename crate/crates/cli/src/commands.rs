use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bam_core::cascade_ac::AcModelFile;
use bam_core::config::{BackendConfig, PipelineConfig};
use bam_core::corpus;
use bam_core::evalkit::render_table;
use bam_core::pipeline::{self, read_json, write_json, Pipeline};
use bam_core::rid::RidModel;
use bam_core::synthetic::{self, SynthShape};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SUBCOMMANDS: [&str; 9] = [
    "validate",
    "gate-stats",
    "train-ac",
    "train-rid",
    "predict",
    "evaluate",
    "cv",
    "export-corpus",
    "synth",
];

/// Everything a run depends on; a manifest stores exactly this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub subcommand: String,
    pub args: Vec<String>,
    pub config: PipelineConfig,
    /// Non-config input files, e.g. the prediction and gold files of `evaluate`.
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    /// Subcommand options that are not config keys.
    #[serde(default)]
    pub options: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub name: String,
    pub path: PathBuf,
}

pub struct RunResult {
    pub outputs: Vec<Output>,
    /// Printed on stdout.
    pub summary: Value,
    /// Printed on stderr, for humans.
    pub table: Option<String>,
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| {
        CliError::Core(bam_core::Error::InvalidConfig(format!(
            "{}: {e}",
            p.display()
        )))
    })
}

fn absolute_opt(p: &mut Option<PathBuf>) -> Result<(), CliError> {
    if let Some(path) = p {
        *path = absolute(path)?;
    }
    Ok(())
}

/// Pins every input path to an absolute location so that a manifest can be
/// replayed from any working directory.
pub fn resolve_paths(inv: &mut Invocation) -> Result<(), CliError> {
    let c = &mut inv.config;
    absolute_opt(&mut c.budget)?;
    absolute_opt(&mut c.train)?;
    absolute_opt(&mut c.test)?;
    absolute_opt(&mut c.gate_rules)?;
    if let BackendConfig::Embeddings {
        propositions,
        budget,
    } = &mut c.backend
    {
        *propositions = absolute(propositions)?;
        *budget = absolute(budget)?;
    }
    c.output_dir = absolute(&c.output_dir)?;
    if inv.subcommand == "predict" {
        c.ac_model = Some(c.ac_model_path());
        c.rid_model = Some(c.rid_model_path());
    }
    absolute_opt(&mut c.ac_model)?;
    absolute_opt(&mut c.rid_model)?;
    for p in inv.inputs.values_mut() {
        *p = absolute(p)?;
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn report(
    out_dir: &Path,
    name: &str,
    file: &str,
    value: &impl Serialize,
) -> Result<Output, CliError> {
    let path = out_dir.join(file);
    write_json(&path, value)?;
    Ok(Output {
        name: name.into(),
        path,
    })
}

fn input<'a>(inv: &'a Invocation, name: &str) -> Result<&'a Path, CliError> {
    let p = inv
        .inputs
        .get(name)
        .ok_or_else(|| CliError::Usage(format!("`{}` requires --{name}", inv.subcommand)))?;
    if !p.exists() {
        return Err(CliError::Usage(format!(
            "--{name} file {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

pub fn execute(inv: &Invocation) -> Result<RunResult, CliError> {
    let cfg = &inv.config;
    let out_dir = cfg.output_dir.clone();
    let pipe = Pipeline::new(cfg.clone())?;
    fs::create_dir_all(&out_dir).map_err(|e| bam_core::Error::Io {
        path: out_dir.clone(),
        source: e,
    })?;

    let mut table = None;
    let (outputs, summary) = match inv.subcommand.as_str() {
        "validate" => {
            let r = pipe.validate_report()?;
            (
                vec![report(&out_dir, "report", "validate.json", &r)?],
                to_value(&r),
            )
        }
        "gate-stats" => {
            let r = pipe.gate_report()?;
            (
                vec![report(&out_dir, "report", "gate_stats.json", &r)?],
                to_value(&r),
            )
        }
        "train-ac" => {
            let model = pipe.train_ac()?;
            let path = cfg.ac_model_path();
            ensure_parent(&path)?;
            write_json(&path, &model)?;
            let summary = serde_json::json!({
                "strategy": model.model.strategy(),
                "balanced": model.balanced,
                "path": path,
            });
            (
                vec![Output {
                    name: "ac_model".into(),
                    path,
                }],
                summary,
            )
        }
        "train-rid" => {
            let model = pipe.train_rid()?;
            let path = cfg.rid_model_path();
            ensure_parent(&path)?;
            write_json(&path, &model)?;
            let summary =
                serde_json::json!({ "final_loss": model.classifier.final_loss, "path": path });
            (
                vec![Output {
                    name: "rid_model".into(),
                    path,
                }],
                summary,
            )
        }
        "predict" => {
            let ac: AcModelFile = read_json(&model_path(cfg.ac_model_path(), "ac_model")?)?;
            let rid: RidModel = read_json(&model_path(cfg.rid_model_path(), "rid_model")?)?;
            let preds = pipe.predict(&ac, &rid)?;
            let path = out_dir.join("predictions.jsonl");
            pipeline::write_predictions(&path, &preds)?;
            let linked = preds
                .iter()
                .filter(|p| p.predicted_relation_id.is_some())
                .count();
            let summary =
                serde_json::json!({ "predictions": preds.len(), "linked": linked, "path": path });
            (
                vec![Output {
                    name: "predictions".into(),
                    path,
                }],
                summary,
            )
        }
        "evaluate" => {
            let r = pipeline::evaluate_files(input(inv, "predictions")?, input(inv, "gold")?)?;
            (
                vec![report(&out_dir, "report", "evaluation.json", &r)?],
                to_value(&r),
            )
        }
        "cv" => {
            let r = pipe.cross_validate()?;
            let rows: Vec<(String, &_)> = r
                .strategies
                .iter()
                .map(|(s, rep)| (format!("{} (pooled)", s.name()), &rep.pooled))
                .collect();
            table = Some(render_table(&rows));
            (
                vec![report(&out_dir, "report", "cv.json", &r)?],
                to_value(&r),
            )
        }
        "export-corpus" => {
            let split = inv
                .options
                .get("split")
                .and_then(Value::as_str)
                .unwrap_or("all");
            let splits: Vec<&str> = match split {
                "all" => [("train", &cfg.train), ("test", &cfg.test)]
                    .into_iter()
                    .filter(|(_, p)| p.is_some())
                    .map(|(n, _)| n)
                    .collect(),
                one => vec![one],
            };
            let budget = match &cfg.budget {
                Some(_) => pipe.load_budget()?,
                None => Vec::new(),
            };
            let (minutes, props) = pipe.export_minutes(&splits)?;
            let path = out_dir.join("corpus.jsonl");
            corpus::write_interchange(&path, &budget, &minutes, Some(&props))?;
            let summary = serde_json::json!({
                "budget_items": budget.len(),
                "utterances": minutes.utterances.len(),
                "expressions": minutes.expressions.len(),
                "path": path,
            });
            (
                vec![Output {
                    name: "corpus".into(),
                    path,
                }],
                summary,
            )
        }
        "synth" => {
            let small = inv
                .options
                .get("small")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            let shape = if small {
                SynthShape::small(cfg.seed)
            } else {
                SynthShape {
                    seed: cfg.seed,
                    ..SynthShape::default()
                }
            };
            let files = synthetic::write_to_dir(&shape, &out_dir)?;
            let summary = to_value(&files);
            let outputs = files
                .into_iter()
                .map(|(name, path)| Output {
                    name: name.into(),
                    path,
                })
                .collect();
            (outputs, summary)
        }
        other => return Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    };
    Ok(RunResult {
        outputs,
        summary,
        table,
    })
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| bam_core::Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    Ok(())
}

fn model_path(path: PathBuf, key: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!(
            "{key} file {} does not exist; run the training subcommand or set --{key}",
            path.display()
        )))
    }
}
