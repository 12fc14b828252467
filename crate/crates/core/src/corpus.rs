//! Task documents: budget list, training minutes and test minutes.
//!
//! The loaders accept the snake_case field names of the internal data model
//! and the camelCase names used by the task release; unknown keys are
//! ignored. See `docs/data-formats.md` for the full key table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::class::ArgumentClass;
use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetItem {
    pub id: String,
    pub title: String,
    pub url: String,
    pub item: String,
    pub budget_amount: String,
    pub categories: Vec<String>,
    pub types_of_account: String,
    pub department: String,
    pub last_year_budget: String,
    pub description: String,
    pub budget_difference: String,
}

impl BudgetItem {
    /// The text side of a relation pair: item name and description.
    pub fn pairing_text(&self) -> String {
        format!("{} {}", self.item, self.description)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    LocalProceeding,
    NationalDietSpeech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub source: Source,
    pub region: String,
    pub doc_id: String,
    pub utterance_id: String,
    pub text: String,
    /// Indices into the expression list of the owning [`Minutes`].
    pub expressions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonetaryExpression {
    pub expr_id: String,
    /// Index of the host utterance in the owning [`Minutes`].
    pub utterance: usize,
    pub surface: String,
    /// Char offsets into the normalized host text, end exclusive.
    pub span: (usize, usize),
    pub gold_class: Option<ArgumentClass>,
    pub gold_relation_id: Option<String>,
    pub predicted_class: Option<ArgumentClass>,
    pub predicted_relation_id: Option<String>,
}

impl MonetaryExpression {
    pub fn is_test_sample(&self) -> bool {
        self.gold_class.is_none()
    }
}

/// A loaded minutes document: utterances plus the expressions they host.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Minutes {
    pub utterances: Vec<Utterance>,
    pub expressions: Vec<MonetaryExpression>,
}

impl Minutes {
    pub fn host(&self, expr: &MonetaryExpression) -> &Utterance {
        &self.utterances[expr.utterance]
    }

    pub fn labeled(&self) -> impl Iterator<Item = &MonetaryExpression> {
        self.expressions.iter().filter(|e| e.gold_class.is_some())
    }

    /// Appends another document set, rejecting expression ids seen already.
    pub fn append(&mut self, other: Minutes) -> Result<()> {
        let seen: std::collections::HashSet<&str> = self
            .expressions
            .iter()
            .map(|e| e.expr_id.as_str())
            .collect();
        if let Some(dup) = other
            .expressions
            .iter()
            .find(|e| seen.contains(e.expr_id.as_str()))
        {
            return Err(Error::DuplicateId(dup.expr_id.clone()));
        }
        let (u0, e0) = (self.utterances.len(), self.expressions.len());
        self.utterances
            .extend(other.utterances.into_iter().map(|mut u| {
                u.expressions.iter_mut().for_each(|i| *i += e0);
                u
            }));
        self.expressions
            .extend(other.expressions.into_iter().map(|mut e| {
                e.utterance += u0;
                e
            }));
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Accepts a JSON string, number, bool or null as text.
fn textish<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    let v = Value::deserialize(d)?;
    Ok(value_text(&v))
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn categories<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::Null => Vec::new(),
        Value::Array(xs) => xs.iter().map(value_text).collect(),
        other => vec![value_text(&other)],
    })
}

#[derive(Deserialize)]
struct RawBudgetItem {
    #[serde(alias = "budgetId", alias = "budget_id", deserialize_with = "textish")]
    id: String,
    #[serde(default, alias = "budgetTitle", deserialize_with = "textish")]
    title: String,
    #[serde(default, deserialize_with = "textish")]
    url: String,
    #[serde(alias = "budgetItem", deserialize_with = "textish")]
    item: String,
    #[serde(
        default,
        alias = "budget",
        alias = "budgetAmount",
        deserialize_with = "textish"
    )]
    budget_amount: String,
    #[serde(default, alias = "category", deserialize_with = "categories")]
    categories: Vec<String>,
    #[serde(
        default,
        alias = "typesOfAccount",
        alias = "typeOfAccount",
        deserialize_with = "textish"
    )]
    types_of_account: String,
    #[serde(default, deserialize_with = "textish")]
    department: String,
    #[serde(
        default,
        alias = "budgetLastYear",
        alias = "lastYearBudget",
        deserialize_with = "textish"
    )]
    last_year_budget: String,
    #[serde(deserialize_with = "textish")]
    description: String,
    #[serde(default, alias = "budgetDifference", deserialize_with = "textish")]
    budget_difference: String,
}

impl From<RawBudgetItem> for BudgetItem {
    fn from(r: RawBudgetItem) -> Self {
        let n = |s: String| text::normalize(&s);
        BudgetItem {
            id: r.id,
            title: n(r.title),
            url: r.url,
            item: n(r.item),
            budget_amount: n(r.budget_amount),
            categories: r.categories.into_iter().map(n).collect(),
            types_of_account: n(r.types_of_account),
            department: n(r.department),
            last_year_budget: n(r.last_year_budget),
            description: n(r.description),
            budget_difference: n(r.budget_difference),
        }
    }
}

pub fn parse_budget(json: &str, origin: &str) -> Result<Vec<BudgetItem>> {
    let raw: Vec<RawBudgetItem> =
        serde_json::from_str(json).map_err(|e| Error::malformed(origin, e))?;
    let items: Vec<BudgetItem> = raw.into_iter().map(BudgetItem::from).collect();
    check_budget(&items)?;
    Ok(items)
}

fn check_budget(items: &[BudgetItem]) -> Result<()> {
    let mut seen = HashSet::new();
    for it in items {
        if it.id.is_empty() {
            return Err(Error::malformed("budget", "budget item with empty id"));
        }
        if !seen.insert(it.id.as_str()) {
            return Err(Error::DuplicateId(it.id.clone()));
        }
    }
    Ok(())
}

pub fn load_budget(path: &Path) -> Result<Vec<BudgetItem>> {
    parse_budget(&read_to_string(path)?, &display(path))
}

pub fn load_minutes(path: &Path) -> Result<Minutes> {
    parse_minutes(&read_to_string(path)?, &display(path))
}

fn field<'a>(obj: &'a Value, keys: &[&str]) -> Option<&'a Value> {
    keys.iter()
        .find_map(|k| obj.get(*k))
        .filter(|v| !v.is_null())
}

fn field_text(obj: &Value, keys: &[&str]) -> Option<String> {
    field(obj, keys).map(value_text)
}

/// Parses a minutes document (training or test).
///
/// Each top-level entry is a local proceeding (`proceeding` array of
/// `utterance` records), a national-diet record (`speechRecord` array of
/// `speech` records), or a canonical document (`utterances` array).
pub fn parse_minutes(json: &str, origin: &str) -> Result<Minutes> {
    let root: Value = serde_json::from_str(json).map_err(|e| Error::malformed(origin, e))?;
    let docs = root
        .as_array()
        .ok_or_else(|| Error::malformed(origin, "top level must be an array of documents"))?;

    let mut minutes = Minutes::default();
    let mut seen_ids = HashSet::new();

    for (d, doc) in docs.iter().enumerate() {
        let (source, entries, region) = if let Some(p) = field(doc, &["proceeding"]) {
            let region = field_text(doc, &["localGovernmentName", "region"]).unwrap_or_default();
            (Source::LocalProceeding, p, region)
        } else if let Some(s) = field(doc, &["speechRecord"]) {
            let region = field_text(doc, &["region"]).unwrap_or_else(|| "national_diet".into());
            (Source::NationalDietSpeech, s, region)
        } else if let Some(u) = field(doc, &["utterances"]) {
            let source = match field_text(doc, &["source"]).as_deref() {
                None | Some("local_proceeding") => Source::LocalProceeding,
                Some("national_diet_speech") => Source::NationalDietSpeech,
                Some(other) => {
                    return Err(Error::malformed(
                        origin,
                        format!("document {d}: unknown source `{other}`"),
                    ))
                }
            };
            (source, u, field_text(doc, &["region"]).unwrap_or_default())
        } else {
            return Err(Error::malformed(
                origin,
                format!("document {d}: expected `proceeding`, `speechRecord` or `utterances`"),
            ));
        };
        let entries = entries.as_array().ok_or_else(|| {
            Error::malformed(
                origin,
                format!("document {d}: utterance list is not an array"),
            )
        })?;
        let doc_id = field_text(doc, &["doc_id", "proceedingId", "issueID", "id"])
            .unwrap_or_else(|| format!("doc{d}"));

        for (u, entry) in entries.iter().enumerate() {
            let raw_text =
                field_text(entry, &["text", "utterance", "speech"]).ok_or_else(|| {
                    Error::malformed(
                        origin,
                        format!("document {d} entry {u}: missing utterance text"),
                    )
                })?;
            let text = text::normalize(&raw_text);
            let utterance_id =
                field_text(entry, &["utterance_id", "utteranceId", "speechID", "id"])
                    .unwrap_or_else(|| format!("{doc_id}-{u}"));
            let uidx = minutes.utterances.len();
            let mut anchors = Vec::new();
            // next search position per surface, so repeated surfaces map to successive occurrences
            let mut cursors: HashMap<String, usize> = HashMap::new();

            let exprs = field(entry, &["expressions", "moneyExpressions"]);
            let exprs: &[Value] = match exprs {
                None => &[],
                Some(Value::Array(xs)) => xs,
                Some(_) => {
                    return Err(Error::malformed(
                        origin,
                        format!("document {d} entry {u}: expression list is not an array"),
                    ))
                }
            };
            for (e, raw) in exprs.iter().enumerate() {
                let expr_id = field_text(raw, &["expr_id", "exprId", "id"])
                    .unwrap_or_else(|| format!("{utterance_id}-{e}"));
                let surface = text::normalize(
                    &field_text(raw, &["surface", "moneyExpression"]).ok_or_else(|| {
                        Error::malformed(origin, format!("expression `{expr_id}`: missing surface"))
                    })?,
                );
                let span = locate(&text, &surface, raw, &expr_id, &mut cursors, origin)?;
                let gold_class = parse_class(
                    field(raw, &["gold_class", "argumentClass"]),
                    &expr_id,
                    origin,
                )?;
                let gold_relation_id =
                    parse_relation(field(raw, &["gold_relation_id", "relatedID"]));
                let predicted_class =
                    parse_class(field(raw, &["predicted_class"]), &expr_id, origin)?;
                let predicted_relation_id = parse_relation(field(raw, &["predicted_relation_id"]));
                if !seen_ids.insert(expr_id.clone()) {
                    return Err(Error::DuplicateId(expr_id));
                }
                anchors.push(minutes.expressions.len());
                minutes.expressions.push(MonetaryExpression {
                    expr_id,
                    utterance: uidx,
                    surface,
                    span,
                    gold_class,
                    gold_relation_id,
                    predicted_class,
                    predicted_relation_id,
                });
            }
            minutes.utterances.push(Utterance {
                source,
                region: region.clone(),
                doc_id: doc_id.clone(),
                utterance_id,
                text,
                expressions: anchors,
            });
        }
    }
    Ok(minutes)
}

fn locate(
    text: &str,
    surface: &str,
    raw: &Value,
    expr_id: &str,
    cursors: &mut HashMap<String, usize>,
    origin: &str,
) -> Result<(usize, usize)> {
    let len = text::char_len(text);
    if let Some(span) = field(raw, &["span"]) {
        let pair = span
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
            .ok_or_else(|| {
                Error::malformed(
                    origin,
                    format!("expression `{expr_id}`: span must be [start, end]"),
                )
            })?;
        let (start, end) = pair;
        let Some(found) = text::char_slice(text, start, end) else {
            return Err(Error::SpanOutOfBounds {
                expr_id: expr_id.into(),
                start,
                end,
                len,
                detail: "span exceeds text".into(),
            });
        };
        if found != surface {
            return Err(Error::SpanOutOfBounds {
                expr_id: expr_id.into(),
                start,
                end,
                len,
                detail: format!("text at span is `{found}`, surface is `{surface}`"),
            });
        }
        return Ok(pair);
    }
    let surface_len = text::char_len(surface);
    let from = cursors.get(surface).copied().unwrap_or(0);
    let start = text::find_chars(text, surface, from)
        .or_else(|| text::find_chars(text, surface, 0))
        .filter(|_| !surface.is_empty())
        .ok_or_else(|| Error::SpanOutOfBounds {
            expr_id: expr_id.into(),
            start: 0,
            end: surface_len,
            len,
            detail: format!("surface `{surface}` not found in host text"),
        })?;
    cursors.insert(surface.to_string(), start + surface_len.max(1));
    Ok((start, start + surface_len))
}

fn parse_class(v: Option<&Value>, expr_id: &str, origin: &str) -> Result<Option<ArgumentClass>> {
    let Some(v) = v else { return Ok(None) };
    let s = value_text(v);
    if s.trim().is_empty() {
        return Ok(None);
    }
    ArgumentClass::parse_label(&s).map(Some).ok_or_else(|| {
        Error::malformed(
            origin,
            format!("expression `{expr_id}`: unknown class `{s}`"),
        )
    })
}

fn parse_relation(v: Option<&Value>) -> Option<String> {
    let s = match v? {
        Value::Array(xs) => xs.iter().map(value_text).find(|s| !s.trim().is_empty())?,
        other => value_text(other),
    };
    let s = s.trim().to_string();
    (!s.is_empty()).then_some(s)
}

pub fn class_histogram<'a>(
    expressions: impl IntoIterator<Item = &'a MonetaryExpression>,
) -> Result<BTreeMap<ArgumentClass, usize>> {
    let mut hist: BTreeMap<ArgumentClass, usize> =
        ArgumentClass::ALL.iter().map(|c| (*c, 0)).collect();
    for e in expressions {
        let c = e
            .gold_class
            .ok_or_else(|| Error::MissingGoldLabel(e.expr_id.clone()))?;
        *hist.entry(c).or_default() += 1;
    }
    Ok(hist)
}

/// One line of the corpus interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterchangeRecord {
    BudgetItem(BudgetItem),
    Utterance {
        source: Source,
        region: String,
        doc_id: String,
        utterance_id: String,
        text: String,
    },
    Expression {
        #[serde(flatten)]
        expression: MonetaryExpression,
        /// Segmented proposition text; informational, ignored on reload.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        proposition: Option<String>,
    },
}

/// Writes budget items, utterances and expressions as line-JSON.
///
/// `propositions`, when given, must be parallel to `minutes.expressions`.
pub fn write_interchange(
    path: &Path,
    budget: &[BudgetItem],
    minutes: &Minutes,
    propositions: Option<&[String]>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |rec: &InterchangeRecord| -> Result<()> {
        let line = serde_json::to_string(rec).map_err(|e| Error::malformed(display(path), e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))
    };
    for b in budget {
        emit(&InterchangeRecord::BudgetItem(b.clone()))?;
    }
    for u in &minutes.utterances {
        emit(&InterchangeRecord::Utterance {
            source: u.source,
            region: u.region.clone(),
            doc_id: u.doc_id.clone(),
            utterance_id: u.utterance_id.clone(),
            text: u.text.clone(),
        })?;
    }
    for (i, e) in minutes.expressions.iter().enumerate() {
        emit(&InterchangeRecord::Expression {
            expression: e.clone(),
            proposition: propositions.map(|p| p[i].clone()),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_interchange(path: &Path) -> Result<(Vec<BudgetItem>, Minutes)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = display(path);
    let mut budget = Vec::new();
    let mut minutes = Minutes::default();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InterchangeRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(&origin, format!("line {}: {e}", n + 1)))?;
        match rec {
            InterchangeRecord::BudgetItem(b) => budget.push(b),
            InterchangeRecord::Utterance {
                source,
                region,
                doc_id,
                utterance_id,
                text,
            } => minutes.utterances.push(Utterance {
                source,
                region,
                doc_id,
                utterance_id,
                text,
                expressions: Vec::new(),
            }),
            InterchangeRecord::Expression { expression, .. } => {
                let host = minutes
                    .utterances
                    .get_mut(expression.utterance)
                    .ok_or_else(|| {
                        Error::malformed(
                            &origin,
                            format!("line {}: unknown utterance index", n + 1),
                        )
                    })?;
                let (s, e) = expression.span;
                if text::char_slice(&host.text, s, e) != Some(expression.surface.as_str()) {
                    return Err(Error::SpanOutOfBounds {
                        expr_id: expression.expr_id.clone(),
                        start: s,
                        end: e,
                        len: text::char_len(&host.text),
                        detail: "surface does not match host text".into(),
                    });
                }
                host.expressions.push(minutes.expressions.len());
                minutes.expressions.push(expression);
            }
        }
    }
    check_budget(&budget)?;
    Ok((budget, minutes))
}
