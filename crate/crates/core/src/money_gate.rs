//! Handcrafted rules that settle `NonMonetary` / `Other` before any model runs.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::class::ArgumentClass;
use crate::corpus::{Minutes, MonetaryExpression, Utterance};
use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_MONEY_MARKERS: [&str; 6] = ["円", "¥", "億円", "万円", "千円", "兆円"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Fires when any lexicon entry occurs in the scoped text.
    LexiconPresence,
    /// Fires when no lexicon entry occurs in the scoped text.
    LexiconAbsence,
    /// Fires when any of the payload regexes matches.
    Pattern,
}

/// Which text a rule inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleScope {
    #[default]
    Surface,
    /// The sentence(s) around the expression.
    Proposition,
    Host,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NonMonetary,
    Other,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRule {
    pub name: String,
    pub kind: RuleKind,
    pub payload: Vec<String>,
    pub verdict: Verdict,
    #[serde(default)]
    pub scope: RuleScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateDecision {
    Gated(ArgumentClass),
    Pass,
}

#[derive(Debug)]
struct CompiledRule {
    rule: GateRule,
    patterns: Vec<Regex>,
}

impl CompiledRule {
    fn fires(&self, haystack: &str) -> bool {
        match self.rule.kind {
            RuleKind::LexiconPresence => self
                .rule
                .payload
                .iter()
                .any(|w| haystack.contains(w.as_str())),
            RuleKind::LexiconAbsence => !self
                .rule
                .payload
                .iter()
                .any(|w| haystack.contains(w.as_str())),
            RuleKind::Pattern => self.patterns.iter().any(|p| p.is_match(haystack)),
        }
    }
}

/// Ordered, first-match-wins rule list.
#[derive(Debug)]
pub struct MoneyGate {
    rules: Vec<CompiledRule>,
}

impl MoneyGate {
    pub fn new(rules: Vec<GateRule>) -> Result<Self> {
        let rules = rules
            .into_iter()
            .map(|mut rule| {
                // lexicon entries are matched against normalized text
                rule.payload = rule.payload.iter().map(|p| text::normalize(p)).collect();
                let patterns = if rule.kind == RuleKind::Pattern {
                    rule.payload
                        .iter()
                        .map(|p| {
                            Regex::new(p).map_err(|e| {
                                Error::InvalidConfig(format!("gate rule `{}`: {e}", rule.name))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?
                } else {
                    Vec::new()
                };
                Ok(CompiledRule { rule, patterns })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MoneyGate { rules })
    }

    /// No rules: every expression passes.
    pub fn identity() -> Self {
        MoneyGate { rules: Vec::new() }
    }

    pub fn default_rules() -> Vec<GateRule> {
        vec![GateRule {
            name: "no-monetary-marker".into(),
            kind: RuleKind::LexiconAbsence,
            payload: DEFAULT_MONEY_MARKERS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            verdict: Verdict::NonMonetary,
            scope: RuleScope::Surface,
        }]
    }

    pub fn with_default_rules() -> Self {
        MoneyGate::new(Self::default_rules()).expect("default rules compile")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rules: Vec<GateRule> = serde_json::from_str(&raw)
            .map_err(|e| Error::malformed(path.display().to_string(), e))?;
        MoneyGate::new(rules)
    }

    pub fn rules(&self) -> impl Iterator<Item = &GateRule> {
        self.rules.iter().map(|r| &r.rule)
    }

    /// Decides on one expression. `proposition` is only consulted by
    /// proposition-scoped rules; pass the host text when unavailable.
    pub fn gate_text(&self, surface: &str, proposition: &str, host: &str) -> GateDecision {
        for r in &self.rules {
            if r.rule.verdict == Verdict::PassThrough {
                continue;
            }
            let haystack = match r.rule.scope {
                RuleScope::Surface => surface,
                RuleScope::Proposition => proposition,
                RuleScope::Host => host,
            };
            if r.fires(haystack) {
                return match r.rule.verdict {
                    Verdict::NonMonetary => GateDecision::Gated(ArgumentClass::NonMonetary),
                    Verdict::Other => GateDecision::Gated(ArgumentClass::Other),
                    Verdict::PassThrough => unreachable!(),
                };
            }
        }
        GateDecision::Pass
    }

    pub fn gate(&self, expr: &MonetaryExpression, host: &Utterance) -> GateDecision {
        self.gate_text(&expr.surface, &host.text, &host.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedClassStats {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub precision: f64,
    /// False when nothing was gated into this class; `precision` is then 0.
    pub precision_defined: bool,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    pub per_class: BTreeMap<ArgumentClass, GatedClassStats>,
    /// gold class -> decision label ("Pass" or the gated class) -> count
    pub confusion: BTreeMap<ArgumentClass, BTreeMap<String, usize>>,
    pub n: usize,
}

pub fn gate_stats_from_decisions(pairs: &[(ArgumentClass, GateDecision)]) -> GateStats {
    let mut per_class = BTreeMap::new();
    for target in [ArgumentClass::NonMonetary, ArgumentClass::Other] {
        let gated_as = |d: &GateDecision| *d == GateDecision::Gated(target);
        let tp = pairs
            .iter()
            .filter(|(g, d)| *g == target && gated_as(d))
            .count();
        let fp = pairs
            .iter()
            .filter(|(g, d)| *g != target && gated_as(d))
            .count();
        let fn_ = pairs
            .iter()
            .filter(|(g, d)| *g == target && !gated_as(d))
            .count();
        let precision_defined = tp + fp > 0;
        per_class.insert(
            target,
            GatedClassStats {
                true_positive: tp,
                false_positive: fp,
                false_negative: fn_,
                precision: if precision_defined {
                    tp as f64 / (tp + fp) as f64
                } else {
                    0.0
                },
                precision_defined,
                recall: if tp + fn_ > 0 {
                    tp as f64 / (tp + fn_) as f64
                } else {
                    0.0
                },
            },
        );
    }
    let mut confusion: BTreeMap<ArgumentClass, BTreeMap<String, usize>> = BTreeMap::new();
    for (g, d) in pairs {
        let key = match d {
            GateDecision::Pass => "Pass".to_string(),
            GateDecision::Gated(c) => c.name().to_string(),
        };
        *confusion.entry(*g).or_default().entry(key).or_default() += 1;
    }
    GateStats {
        per_class,
        confusion,
        n: pairs.len(),
    }
}

pub fn gate_stats(gate: &MoneyGate, minutes: &Minutes) -> Result<GateStats> {
    let pairs = minutes
        .expressions
        .iter()
        .map(|e| {
            let gold = e
                .gold_class
                .ok_or_else(|| Error::MissingGoldLabel(e.expr_id.clone()))?;
            Ok((gold, gate.gate(e, minutes.host(e))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gate_stats_from_decisions(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::ArgumentClass::*;

    #[test]
    fn yen_passes() {
        let g = MoneyGate::with_default_rules();
        assert_eq!(g.gate_text("五億円", "", ""), GateDecision::Pass);
        assert_eq!(g.gate_text("¥300", "", ""), GateDecision::Pass);
    }

    #[test]
    fn no_marker_is_non_monetary() {
        let g = MoneyGate::with_default_rules();
        assert_eq!(
            g.gate_text("百点", "試験で百点を取った。", "試験で百点を取った。"),
            GateDecision::Gated(NonMonetary)
        );
    }

    #[test]
    fn identity_gate_passes_everything() {
        let g = MoneyGate::identity();
        assert_eq!(g.gate_text("百点", "", ""), GateDecision::Pass);
    }

    #[test]
    fn first_match_wins_and_passthrough_is_skipped() {
        let rules = vec![
            GateRule {
                name: "noop".into(),
                kind: RuleKind::LexiconPresence,
                payload: vec!["点".into()],
                verdict: Verdict::PassThrough,
                scope: RuleScope::Surface,
            },
            GateRule {
                name: "percent".into(),
                kind: RuleKind::Pattern,
                payload: vec![r"^\d+%$".into()],
                verdict: Verdict::Other,
                scope: RuleScope::Surface,
            },
            GateRule {
                name: "points".into(),
                kind: RuleKind::LexiconPresence,
                payload: vec!["点".into()],
                verdict: Verdict::NonMonetary,
                scope: RuleScope::Surface,
            },
        ];
        let g = MoneyGate::new(rules).unwrap();
        // full-width input matches after normalization
        assert_eq!(
            g.gate_text(&text::normalize("５０％"), "", ""),
            GateDecision::Gated(Other)
        );
        assert_eq!(
            g.gate_text("百点", "", ""),
            GateDecision::Gated(NonMonetary)
        );
        assert_eq!(g.gate_text("五億円", "", ""), GateDecision::Pass);
    }

    #[test]
    fn host_scope() {
        let rules = vec![GateRule {
            name: "ratio".into(),
            kind: RuleKind::LexiconPresence,
            payload: vec!["割合".into()],
            verdict: Verdict::Other,
            scope: RuleScope::Host,
        }];
        let g = MoneyGate::new(rules).unwrap();
        assert_eq!(
            g.gate_text("3億円", "", "その割合は"),
            GateDecision::Gated(Other)
        );
        assert_eq!(g.gate_text("3億円", "割合", "無関係"), GateDecision::Pass);
    }

    #[test]
    fn bad_regex_is_config_error() {
        let rules = vec![GateRule {
            name: "bad".into(),
            kind: RuleKind::Pattern,
            payload: vec!["(".into()],
            verdict: Verdict::Other,
            scope: RuleScope::Surface,
        }];
        assert_eq!(MoneyGate::new(rules).unwrap_err().kind(), "InvalidConfig");
    }

    #[test]
    fn perfect_rules_score_one() {
        let mut pairs = Vec::new();
        for i in 0..10 {
            let gold = match i % 5 {
                0 => NonMonetary,
                1 => Other,
                _ => PremiseFuture,
            };
            let d = if gold.is_gated() {
                GateDecision::Gated(gold)
            } else {
                GateDecision::Pass
            };
            pairs.push((gold, d));
        }
        let s = gate_stats_from_decisions(&pairs);
        for c in [NonMonetary, Other] {
            assert_eq!(s.per_class[&c].precision, 1.0);
            assert_eq!(s.per_class[&c].recall, 1.0);
            assert!(s.per_class[&c].precision_defined);
        }
    }

    #[test]
    fn gating_nothing_reports_undefined_precision() {
        let pairs = vec![
            (NonMonetary, GateDecision::Pass),
            (PremisePast, GateDecision::Pass),
        ];
        let s = gate_stats_from_decisions(&pairs);
        let nm = &s.per_class[&NonMonetary];
        assert_eq!(nm.recall, 0.0);
        assert_eq!(nm.precision, 0.0);
        assert!(!nm.precision_defined);
        assert_eq!(s.confusion[&NonMonetary]["Pass"], 1);
    }

    #[test]
    fn rule_file_round_trip() {
        let json = serde_json::to_string(&MoneyGate::default_rules()).unwrap();
        let back: Vec<GateRule> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, MoneyGate::default_rules());
        let minimal: Vec<GateRule> = serde_json::from_str(
            r#"[{"name":"x","kind":"lexicon_absence","payload":["円"],"verdict":"NonMonetary"}]"#,
        )
        .unwrap();
        assert_eq!(minimal[0].scope, RuleScope::Surface);
    }
}
