//! End-to-end commands: load, gate, segment, train, predict, evaluate and
//! cross-validate, driven by a [`PipelineConfig`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade_ac::{self, AcModel, AcModelFile, AcStrategy, AC_MODEL_SCHEMA};
use crate::class::ArgumentClass;
use crate::config::{BackendConfig, PipelineConfig};
use crate::corpus::{self, BudgetItem, Minutes, Source};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::evalkit::{self, CvReport, EvalReport, TaskRecord};
use crate::money_gate::{self, GateDecision, GateStats, MoneyGate};
use crate::rid::{BudgetIndex, RidModel, RidQuery, RID_MODEL_SCHEMA};
use crate::segmenter::{Proposition, Segmenter};
use crate::textclf::{load_embeddings, EmbeddingStore, FeatureSource, FeatureVector, Featurizer};

/// One expression after gating and segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub expr_id: String,
    pub surface: String,
    pub region: String,
    pub proposition: Proposition,
    pub decision: GateDecision,
    pub gold_class: Option<ArgumentClass>,
    pub gold_relation_id: Option<String>,
}

impl Prepared {
    pub fn rid_query(&self) -> RidQuery {
        RidQuery {
            expr_id: self.expr_id.clone(),
            proposition: self.proposition.text.clone(),
            region: self.region.clone(),
            gold_relation_id: self.gold_relation_id.clone(),
        }
    }
}

pub fn prepare(
    minutes: &Minutes,
    gate: &MoneyGate,
    segmenter: &Segmenter,
) -> Result<Vec<Prepared>> {
    minutes
        .expressions
        .iter()
        .map(|e| {
            let host = minutes.host(e);
            let proposition = segmenter.segment(e, host)?;
            let decision = gate.gate_text(&e.surface, &proposition.text, &host.text);
            Ok(Prepared {
                expr_id: e.expr_id.clone(),
                surface: e.surface.clone(),
                region: host.region.clone(),
                proposition,
                decision,
                gold_class: e.gold_class,
                gold_relation_id: e.gold_relation_id.clone(),
            })
        })
        .collect()
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub expr_id: String,
    pub predicted_class: ArgumentClass,
    pub predicted_relation_id: Option<String>,
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in preds {
        let line = serde_json::to_string(p).expect("prediction serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&raw, &path.display().to_string())
}

pub fn parse_predictions(raw: &str, origin: &str) -> Result<Vec<Prediction>> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::malformed(origin, format!("line {}: {e}", n + 1)))
        })
        .collect()
}

/// `(expr_id, class, relation)` labels from a prediction line-JSON file or
/// from a labeled minutes JSON document.
pub fn read_labels(path: &Path) -> Result<Vec<(String, ArgumentClass, Option<String>)>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    if raw.trim_start().starts_with('[') {
        let minutes = corpus::parse_minutes(&raw, &origin)?;
        minutes
            .expressions
            .into_iter()
            .map(|e| {
                let class = e
                    .gold_class
                    .or(e.predicted_class)
                    .ok_or_else(|| Error::MissingGoldLabel(e.expr_id.clone()))?;
                let rel = if e.gold_class.is_some() {
                    e.gold_relation_id
                } else {
                    e.predicted_relation_id
                };
                Ok((e.expr_id, class, rel))
            })
            .collect()
    } else {
        Ok(parse_predictions(&raw, &origin)?
            .into_iter()
            .map(|p| (p.expr_id, p.predicted_class, p.predicted_relation_id))
            .collect())
    }
}

/// Scores predictions against gold; every gold expression needs a prediction.
pub fn evaluate_files(predictions: &Path, gold: &Path) -> Result<EvalReport> {
    let preds: HashMap<String, (ArgumentClass, Option<String>)> = read_labels(predictions)?
        .into_iter()
        .map(|(id, c, r)| (id, (c, r)))
        .collect();
    let records = read_labels(gold)?
        .into_iter()
        .map(|(id, gc, gr)| {
            let (pc, pr) = preds.get(&id).cloned().ok_or_else(|| {
                Error::malformed(
                    predictions.display().to_string(),
                    format!("no prediction for `{id}`"),
                )
            })?;
            Ok(TaskRecord {
                expr_id: id,
                gold_class: gc,
                pred_class: pc,
                gold_rel: gr,
                pred_rel: pr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evalkit::task_score(&records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub local_documents: usize,
    pub local_utterances: usize,
    pub diet_documents: usize,
    pub diet_speeches: usize,
    pub expressions: usize,
    pub labeled: usize,
    pub histogram: Option<BTreeMap<ArgumentClass, usize>>,
}

pub fn split_stats(m: &Minutes) -> SplitStats {
    let count = |src: Source| {
        let utts: Vec<_> = m.utterances.iter().filter(|u| u.source == src).collect();
        let docs: BTreeSet<&str> = utts.iter().map(|u| u.doc_id.as_str()).collect();
        (docs.len(), utts.len())
    };
    let (local_documents, local_utterances) = count(Source::LocalProceeding);
    let (diet_documents, diet_speeches) = count(Source::NationalDietSpeech);
    let labeled = m.labeled().count();
    SplitStats {
        local_documents,
        local_utterances,
        diet_documents,
        diet_speeches,
        expressions: m.expressions.len(),
        labeled,
        histogram: (labeled > 0)
            .then(|| corpus::class_histogram(m.labeled()).expect("labeled subset")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub budget_items: Option<usize>,
    pub train: Option<SplitStats>,
    pub test: Option<SplitStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    pub seed: u64,
    pub strategies: BTreeMap<AcStrategy, CvReport>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub gate: MoneyGate,
    pub segmenter: Segmenter,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let gate = match &config.gate_rules {
            Some(p) => MoneyGate::from_file(p)?,
            None => MoneyGate::with_default_rules(),
        };
        let segmenter = Segmenter::with_context(config.segment_context);
        Ok(Pipeline {
            config,
            gate,
            segmenter,
        })
    }

    fn ac_seed(&self) -> u64 {
        derive_seed(self.config.seed, "ac")
    }

    fn rid_seed(&self) -> u64 {
        derive_seed(self.config.seed, "rid")
    }

    pub fn load_budget(&self) -> Result<Vec<BudgetItem>> {
        corpus::load_budget(self.config.require("budget", &self.config.budget)?)
    }

    pub fn load_train(&self) -> Result<Minutes> {
        corpus::load_minutes(self.config.require("train", &self.config.train)?)
    }

    pub fn load_test(&self) -> Result<Minutes> {
        corpus::load_minutes(self.config.require("test", &self.config.test)?)
    }

    pub fn validate_report(&self) -> Result<ValidateReport> {
        let cfg = &self.config;
        if cfg.budget.is_none() && cfg.train.is_none() && cfg.test.is_none() {
            return Err(Error::InvalidConfig(
                "nothing to validate: set budget, train or test".into(),
            ));
        }
        let budget = cfg
            .budget
            .as_ref()
            .map(|_| self.load_budget())
            .transpose()?;
        let train = cfg.train.as_ref().map(|_| self.load_train()).transpose()?;
        let test = cfg.test.as_ref().map(|_| self.load_test()).transpose()?;
        if let Some(t) = &train {
            // training samples must carry gold labels
            if let Some(e) = t.expressions.iter().find(|e| e.gold_class.is_none()) {
                return Err(Error::MissingGoldLabel(e.expr_id.clone()));
            }
        }
        Ok(ValidateReport {
            budget_items: budget.map(|b| b.len()),
            train: train.as_ref().map(split_stats),
            test: test.as_ref().map(split_stats),
        })
    }

    pub fn gate_report(&self) -> Result<GateStats> {
        let train = self.load_train()?;
        let prepared = prepare(&train, &self.gate, &self.segmenter)?;
        let pairs = prepared
            .iter()
            .map(|p| {
                Ok((
                    p.gold_class
                        .ok_or_else(|| Error::MissingGoldLabel(p.expr_id.clone()))?,
                    p.decision,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(money_gate::gate_stats_from_decisions(&pairs))
    }

    /// Feature source for the classifiers; loads the proposition embedding
    /// file for the embeddings backend.
    pub fn feature_source(&self) -> Result<FeatureSource> {
        Ok(match &self.config.backend {
            BackendConfig::Hashed => FeatureSource::Hashed(self.config.featurizer),
            BackendConfig::Embeddings { propositions, .. } => {
                FeatureSource::Embeddings(load_embeddings(propositions)?)
            }
        })
    }

    /// Vectors for cosine reranking, keyed by expression id and budget id.
    pub fn cosine_embeddings(
        &self,
        prepared: &[&Prepared],
        budget: &[BudgetItem],
    ) -> Result<EmbeddingStore> {
        match &self.config.backend {
            BackendConfig::Embeddings {
                propositions,
                budget: budget_path,
            } => {
                let mut store = load_embeddings(propositions)?;
                store.extend(load_embeddings(budget_path)?)?;
                Ok(store)
            }
            BackendConfig::Hashed => {
                let f = Featurizer {
                    dim: self.config.rid.embedding_dim,
                    ..self.config.featurizer
                };
                let budget_texts: Vec<(String, String)> = budget
                    .iter()
                    .map(|b| (b.id.clone(), b.pairing_text()))
                    .collect();
                let items = prepared
                    .iter()
                    .map(|p| (p.expr_id.as_str(), p.proposition.text.as_str()))
                    .chain(budget_texts.iter().map(|(a, b)| (a.as_str(), b.as_str())));
                EmbeddingStore::hashed(&f, items)
            }
        }
    }

    fn features(
        &self,
        source: &FeatureSource,
        prepared: &[Prepared],
    ) -> Result<Vec<FeatureVector>> {
        prepared
            .par_iter()
            .map(|p| source.features(&p.expr_id, &p.proposition.text))
            .collect()
    }

    pub fn train_ac(&self) -> Result<AcModelFile> {
        let train = self.load_train()?;
        let prepared = prepare(&train, &self.gate, &self.segmenter)?;
        let source = self.feature_source()?;
        let feats = self.features(&source, &prepared)?;
        let labeled = prepared
            .iter()
            .zip(feats)
            .map(|(p, x)| {
                Ok((
                    x,
                    p.gold_class
                        .ok_or_else(|| Error::MissingGoldLabel(p.expr_id.clone()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let hp = self.config.classifier.hyperparams(self.ac_seed());
        let model =
            cascade_ac::train_ac(self.config.strategy, &labeled, &hp, self.config.balanced)?;
        Ok(AcModelFile {
            schema: AC_MODEL_SCHEMA.into(),
            backend: source.spec(),
            segmenter: self.segmenter.clone(),
            gate_rules: self.gate.rules().cloned().collect(),
            balanced: self.config.balanced,
            model,
        })
    }

    fn rid_training_queries(prepared: &[&Prepared]) -> Vec<RidQuery> {
        prepared
            .iter()
            .filter(|p| p.gold_class.is_some_and(|c| !c.is_gated()))
            .map(|p| p.rid_query())
            .collect()
    }

    pub fn train_rid(&self) -> Result<RidModel> {
        let budget = self.load_budget()?;
        let train = self.load_train()?;
        let prepared = prepare(&train, &self.gate, &self.segmenter)?;
        let refs: Vec<&Prepared> = prepared.iter().collect();
        let index = BudgetIndex::new(&self.config.featurizer, &budget);
        let hp = self.config.classifier.hyperparams(self.rid_seed());
        crate::rid::train_pair_classifier(
            &self.config.featurizer,
            &Self::rid_training_queries(&refs),
            &index,
            &self.config.rid.rid_config(),
            &hp,
        )
    }

    /// Documents of the configured splits (`train`, `test`) merged, with
    /// their segmented propositions.
    pub fn export_minutes(&self, splits: &[&str]) -> Result<(Minutes, Vec<String>)> {
        let mut merged = Minutes::default();
        for split in splits {
            let m = match *split {
                "train" => self.load_train()?,
                "test" => self.load_test()?,
                other => return Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
            };
            merged.append(m)?;
        }
        let props = prepare(&merged, &self.gate, &self.segmenter)?
            .into_iter()
            .map(|p| p.proposition.text)
            .collect();
        Ok((merged, props))
    }

    /// Classifies and links every expression of the test file.
    pub fn predict(&self, ac: &AcModelFile, rid: &RidModel) -> Result<Vec<Prediction>> {
        if ac.schema != AC_MODEL_SCHEMA {
            return Err(Error::InvalidConfig(format!(
                "unsupported AC model schema `{}`",
                ac.schema
            )));
        }
        if rid.schema != RID_MODEL_SCHEMA {
            return Err(Error::InvalidConfig(format!(
                "unsupported RID model schema `{}`",
                rid.schema
            )));
        }
        let budget = self.load_budget()?;
        let test = self.load_test()?;
        let gate = MoneyGate::new(ac.gate_rules.clone())?;
        let prepared = prepare(&test, &gate, &ac.segmenter)?;
        let source = self.feature_source()?;
        source.check_matches(&ac.backend)?;

        let classes: Vec<ArgumentClass> = prepared
            .par_iter()
            .map(|p| {
                ac.model.classify(p.decision, || {
                    source.features(&p.expr_id, &p.proposition.text)
                })
            })
            .collect::<Result<_>>()?;

        let refs: Vec<&Prepared> = prepared.iter().collect();
        let embeddings = self.cosine_embeddings(&refs, &budget)?;
        let index = BudgetIndex::new(&rid.featurizer, &budget);
        let queries: Vec<RidQuery> = prepared.iter().map(Prepared::rid_query).collect();
        let relations =
            rid.detect_all(&queries, &index, &embeddings, &self.config.rid.rid_config())?;

        Ok(prepared
            .iter()
            .zip(classes)
            .zip(relations)
            .map(|((p, c), r)| Prediction {
                expr_id: p.expr_id.clone(),
                predicted_class: c,
                predicted_relation_id: r,
            })
            .collect())
    }

    /// Stratified k-fold protocol on the training file, every configured
    /// strategy on the same folds.
    pub fn cross_validate(&self) -> Result<CvSummary> {
        let train = self.load_train()?;
        let prepared = prepare(&train, &self.gate, &self.segmenter)?;
        let labels = prepared
            .iter()
            .map(|p| {
                p.gold_class
                    .ok_or_else(|| Error::MissingGoldLabel(p.expr_id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let source = self.feature_source()?;
        let feats = self.features(&source, &prepared)?;
        let with_rid = self.config.rid.in_cv;
        let budget = if with_rid {
            self.load_budget()?
        } else {
            Vec::new()
        };
        let refs: Vec<&Prepared> = prepared.iter().collect();
        let embeddings = if with_rid {
            Some(self.cosine_embeddings(&refs, &budget)?)
        } else {
            None
        };
        let index = BudgetIndex::new(&self.config.featurizer, &budget);
        let ac_hp = self.config.classifier.hyperparams(self.ac_seed());
        let rid_hp = self.config.classifier.hyperparams(self.rid_seed());
        let rid_cfg = self.config.rid.rid_config();
        let cv_seed = derive_seed(self.config.seed, "cv");

        let mut strategies = BTreeMap::new();
        for &strategy in &self.config.cv.strategies {
            let report = evalkit::cross_validate(
                &labels,
                self.config.cv.folds,
                cv_seed,
                with_rid,
                |train_idx, test_idx| {
                    let data: Vec<(FeatureVector, ArgumentClass)> = train_idx
                        .iter()
                        .map(|&i| (feats[i].clone(), labels[i]))
                        .collect();
                    let model: AcModel =
                        cascade_ac::train_ac(strategy, &data, &ac_hp, self.config.balanced)?;
                    let relations: Vec<Option<String>> = match &embeddings {
                        Some(emb) => {
                            let fold_train: Vec<&Prepared> =
                                train_idx.iter().map(|&i| &prepared[i]).collect();
                            let rid = crate::rid::train_pair_classifier(
                                &self.config.featurizer,
                                &Self::rid_training_queries(&fold_train),
                                &index,
                                &rid_cfg,
                                &rid_hp,
                            )?;
                            let queries: Vec<RidQuery> =
                                test_idx.iter().map(|&i| prepared[i].rid_query()).collect();
                            rid.detect_all(&queries, &index, emb, &rid_cfg)?
                        }
                        None => vec![None; test_idx.len()],
                    };
                    test_idx
                        .iter()
                        .zip(relations)
                        .map(|(&i, rel)| {
                            let p = &prepared[i];
                            Ok(TaskRecord {
                                expr_id: p.expr_id.clone(),
                                gold_class: labels[i],
                                pred_class: model.classify(p.decision, || Ok(feats[i].clone()))?,
                                gold_rel: p.gold_relation_id.clone(),
                                pred_rel: rel,
                            })
                        })
                        .collect()
                },
            )?;
            strategies.insert(strategy, report);
        }
        Ok(CvSummary {
            folds: self.config.cv.folds,
            seed: self.config.seed,
            strategies,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::malformed(path.display().to_string(), e))
}
