//! Relation ID detection: pair each proposition with every budget item,
//! keep pairs the binary relatedness model accepts, and rerank the survivors
//! by embedding cosine similarity.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BudgetItem;
use crate::error::{Error, Result};
use crate::segmenter::Proposition;
use crate::textclf::{
    self, EmbeddingStore, EmbeddingVector, FeatureVector, Featurizer, Hyperparams, LinearModel,
};

pub const RID_MODEL_SCHEMA: &str = "bam-rid-model/v1";
pub const PAIR_SEPARATOR: char = '\t';
/// Cosines closer than this are treated as tied.
pub const COSINE_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub expr_id: String,
    pub budget_id: String,
    pub pair_text: String,
    pub related_prob: Option<f64>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidConfig {
    pub threshold: f64,
    /// Negative pairs sampled per training expression.
    pub negatives: usize,
    pub region_filter: bool,
}

impl Default for RidConfig {
    fn default() -> Self {
        RidConfig {
            threshold: 0.5,
            negatives: 5,
            region_filter: false,
        }
    }
}

pub fn pair_text(prop_text: &str, item: &BudgetItem) -> String {
    format!(
        "{prop_text}{PAIR_SEPARATOR}{}{PAIR_SEPARATOR}{}",
        item.item, item.description
    )
}

pub fn make_pairs(prop: &Proposition, budget: &[BudgetItem]) -> Vec<CandidatePair> {
    budget
        .iter()
        .map(|b| CandidatePair {
            expr_id: prop.expr_id.clone(),
            budget_id: b.id.clone(),
            pair_text: pair_text(&prop.text, b),
            related_prob: None,
            cosine: None,
        })
        .collect()
}

pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `dot(a, b) / (‖a‖‖b‖)`, or 0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_slices(&a.values, &b.values)
}

/// Budget-side n-gram counts, one per item, computed once and reused for
/// every expression.
#[derive(Debug, Clone)]
pub struct BudgetIndex<'a> {
    pub items: &'a [BudgetItem],
    counts: Vec<FeatureVector>,
}

fn field_counts(f: &Featurizer, fields: &[&str]) -> FeatureVector {
    let mut entries = Vec::new();
    for t in fields {
        f.ngram_entries(t, &mut entries);
    }
    FeatureVector::from_entries(entries, f.dim).expect("buckets are reduced mod dim")
}

impl<'a> BudgetIndex<'a> {
    pub fn new(featurizer: &Featurizer, items: &'a [BudgetItem]) -> Self {
        let counts = items
            .par_iter()
            .map(|b| field_counts(featurizer, &[&b.item, &b.description]))
            .collect();
        BudgetIndex { items, counts }
    }

    /// Candidate item indices for an utterance region.
    pub fn candidates(&self, region: &str, region_filter: bool) -> Vec<usize> {
        if region_filter && !region.is_empty() {
            let hits: Vec<usize> = (0..self.items.len())
                .filter(|&i| self.items[i].title.contains(region))
                .collect();
            if !hits.is_empty() {
                return hits;
            }
        }
        (0..self.items.len()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidModel {
    pub schema: String,
    pub featurizer: Featurizer,
    /// Classes `["unrelated", "related"]`.
    pub classifier: LinearModel,
}

/// One proposition that takes part in relation training or detection.
#[derive(Debug, Clone, PartialEq)]
pub struct RidQuery {
    pub expr_id: String,
    pub proposition: String,
    pub region: String,
    pub gold_relation_id: Option<String>,
}

/// `(query index, budget item index, related)` triples: the gold item as a
/// positive plus `k` distinct non-gold items sampled uniformly as negatives.
/// Queries whose gold id is absent from the budget contribute nothing.
pub fn training_pairs(
    queries: &[RidQuery],
    index: &BudgetIndex,
    cfg: &RidConfig,
    seed: u64,
) -> Vec<(usize, usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (q, query) in queries.iter().enumerate() {
        let Some(gold) = query
            .gold_relation_id
            .as_deref()
            .and_then(|g| index.position(g))
        else {
            continue;
        };
        out.push((q, gold, true));
        let pool: Vec<usize> = index
            .candidates(&query.region, cfg.region_filter)
            .into_iter()
            .filter(|&i| i != gold)
            .collect();
        let k = cfg.negatives.min(pool.len());
        let mut picks: Vec<usize> = sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|i| (q, i, false)));
    }
    out
}

pub fn train_pair_classifier(
    featurizer: &Featurizer,
    queries: &[RidQuery],
    index: &BudgetIndex,
    cfg: &RidConfig,
    hp: &Hyperparams,
) -> Result<RidModel> {
    let pairs = training_pairs(
        queries,
        index,
        cfg,
        crate::derive_seed(hp.seed, "rid-negatives"),
    );
    let prop_counts: Vec<FeatureVector> = queries
        .par_iter()
        .map(|q| featurizer.counts(&q.proposition))
        .collect();
    let samples: Vec<(FeatureVector, usize)> = pairs
        .par_iter()
        .map(|&(q, i, related)| {
            (
                featurizer.pair_features(&prop_counts[q], &index.counts[i]),
                usize::from(related),
            )
        })
        .collect();
    let classes = ["unrelated".to_string(), "related".to_string()];
    if samples.is_empty() {
        return Err(Error::EmptyClass(classes[1].clone()));
    }
    let classifier = textclf::train(&samples, &classes, hp)?;
    Ok(RidModel {
        schema: RID_MODEL_SCHEMA.into(),
        featurizer: *featurizer,
        classifier,
    })
}

impl RidModel {
    /// Candidate pairs for one query with `related_prob` filled in, and
    /// `cosine` filled in for pairs at or above `threshold`.
    pub fn score_candidates(
        &self,
        query: &RidQuery,
        index: &BudgetIndex,
        embeddings: &EmbeddingStore,
        cfg: &RidConfig,
    ) -> Result<Vec<CandidatePair>> {
        let prop_counts = self.featurizer.counts(&query.proposition);
        let mut ap: Option<&EmbeddingVector> = None;
        index
            .candidates(&query.region, cfg.region_filter)
            .into_iter()
            .map(|i| {
                let item = &index.items[i];
                let x = self
                    .featurizer
                    .pair_features(&prop_counts, &index.counts[i]);
                let p = self.classifier.predict_proba(&x)?[1];
                let cos = if p >= cfg.threshold {
                    let a = match ap {
                        Some(a) => a,
                        None => *ap.insert(embeddings.get(&query.expr_id)?),
                    };
                    Some(cosine(a, embeddings.get(&item.id)?)?)
                } else {
                    None
                };
                Ok(CandidatePair {
                    expr_id: query.expr_id.clone(),
                    budget_id: item.id.clone(),
                    pair_text: pair_text(&query.proposition, item),
                    related_prob: Some(p),
                    cosine: cos,
                })
            })
            .collect()
    }

    pub fn detect_relation(
        &self,
        query: &RidQuery,
        index: &BudgetIndex,
        embeddings: &EmbeddingStore,
        cfg: &RidConfig,
    ) -> Result<Option<String>> {
        let scored = self.score_candidates(query, index, embeddings, cfg)?;
        Ok(select_best(
            scored
                .iter()
                .filter_map(|c| Some((c.budget_id.as_str(), c.cosine?))),
        )
        .map(str::to_string))
    }

    /// Order-stable batch detection.
    pub fn detect_all(
        &self,
        queries: &[RidQuery],
        index: &BudgetIndex,
        embeddings: &EmbeddingStore,
        cfg: &RidConfig,
    ) -> Result<Vec<Option<String>>> {
        queries
            .par_iter()
            .map(|q| self.detect_relation(q, index, embeddings, cfg))
            .collect()
    }
}

/// Highest cosine wins; near-ties go to the lexicographically smallest id.
pub fn select_best<'a>(scored: impl IntoIterator<Item = (&'a str, f64)>) -> Option<&'a str> {
    let scored: Vec<(&str, f64)> = scored.into_iter().collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scored
        .iter()
        .filter(|(_, c)| *c >= best - COSINE_TIE_EPS)
        .map(|(id, _)| *id)
        .min()
}
