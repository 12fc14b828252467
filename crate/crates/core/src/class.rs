//! The seven-value argument class taxonomy and its two-level structure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArgumentClass {
    PremisePast,
    PremiseFuture,
    PremiseOther,
    ClaimOpinions,
    ClaimOther,
    NonMonetary,
    Other,
}

/// First level of the cascade: which branch a class belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level1 {
    Premise,
    Claim,
    /// Assigned by the rule gate, never by a learned model.
    Gated,
}

impl ArgumentClass {
    pub const ALL: [ArgumentClass; 7] = [
        ArgumentClass::PremisePast,
        ArgumentClass::PremiseFuture,
        ArgumentClass::PremiseOther,
        ArgumentClass::ClaimOpinions,
        ArgumentClass::ClaimOther,
        ArgumentClass::NonMonetary,
        ArgumentClass::Other,
    ];

    /// The five classes the learned models are responsible for.
    pub const LEARNED: [ArgumentClass; 5] = [
        ArgumentClass::PremisePast,
        ArgumentClass::PremiseFuture,
        ArgumentClass::PremiseOther,
        ArgumentClass::ClaimOpinions,
        ArgumentClass::ClaimOther,
    ];

    pub const PREMISES: [ArgumentClass; 3] = [
        ArgumentClass::PremisePast,
        ArgumentClass::PremiseFuture,
        ArgumentClass::PremiseOther,
    ];

    pub const CLAIMS: [ArgumentClass; 2] =
        [ArgumentClass::ClaimOpinions, ArgumentClass::ClaimOther];

    pub fn level1(self) -> Level1 {
        match self {
            ArgumentClass::PremisePast
            | ArgumentClass::PremiseFuture
            | ArgumentClass::PremiseOther => Level1::Premise,
            ArgumentClass::ClaimOpinions | ArgumentClass::ClaimOther => Level1::Claim,
            ArgumentClass::NonMonetary | ArgumentClass::Other => Level1::Gated,
        }
    }

    /// Index of the class within its level-1 branch.
    pub fn level2(self) -> usize {
        match self {
            ArgumentClass::PremisePast
            | ArgumentClass::ClaimOpinions
            | ArgumentClass::NonMonetary => 0,
            ArgumentClass::PremiseFuture | ArgumentClass::ClaimOther | ArgumentClass::Other => 1,
            ArgumentClass::PremiseOther => 2,
        }
    }

    pub fn is_gated(self) -> bool {
        self.level1() == Level1::Gated
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ArgumentClass::PremisePast => "PremisePast",
            ArgumentClass::PremiseFuture => "PremiseFuture",
            ArgumentClass::PremiseOther => "PremiseOther",
            ArgumentClass::ClaimOpinions => "ClaimOpinions",
            ArgumentClass::ClaimOther => "ClaimOther",
            ArgumentClass::NonMonetary => "NonMonetary",
            ArgumentClass::Other => "Other",
        }
    }

    /// Human-readable label as used in the task's class list.
    pub fn description(self) -> &'static str {
        match self {
            ArgumentClass::PremisePast => "Premise: Past and Decisions",
            ArgumentClass::PremiseFuture => "Premise: Current and Future",
            ArgumentClass::PremiseOther => "Premise: Other",
            ArgumentClass::ClaimOpinions => "Claim: Opinions, suggestions and questions",
            ArgumentClass::ClaimOther => "Claim: Other",
            ArgumentClass::NonMonetary => "Not monetary expression",
            ArgumentClass::Other => "Other",
        }
    }

    /// Parses the label strings found in task files.
    ///
    /// Accepts the canonical variant names, the English descriptions and the
    /// Japanese labels of the task release (`Premise : 過去・決定事項`,
    /// `Claim : 意見・提案・質問`, `金額表現ではない`, `その他`, ...).
    pub fn parse_label(raw: &str) -> Option<ArgumentClass> {
        let norm: String = raw.nfkc().collect::<String>().to_lowercase();
        let compact: String = norm
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .collect();
        if let Some(c) = ArgumentClass::ALL
            .iter()
            .find(|c| c.name().to_lowercase() == compact)
        {
            return Some(*c);
        }
        if let Some(rest) = compact.strip_prefix("premise") {
            return Some(if rest.contains("過去") || rest.contains("past") {
                ArgumentClass::PremisePast
            } else if rest.contains("未来")
                || rest.contains("現在")
                || rest.contains("future")
                || rest.contains("current")
            {
                ArgumentClass::PremiseFuture
            } else {
                ArgumentClass::PremiseOther
            });
        }
        if let Some(rest) = compact.strip_prefix("claim") {
            return Some(if rest.contains("意見") || rest.contains("opinion") {
                ArgumentClass::ClaimOpinions
            } else {
                ArgumentClass::ClaimOther
            });
        }
        if compact.contains("金額表現ではない")
            || compact.contains("nonmonetary")
            || compact.contains("non-monetary")
            || compact.contains("notmonetary")
        {
            return Some(ArgumentClass::NonMonetary);
        }
        if compact == "その他" || compact == "other" {
            return Some(ArgumentClass::Other);
        }
        None
    }
}

impl fmt::Display for ArgumentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArgumentClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArgumentClass::parse_label(s).ok_or_else(|| format!("unknown argument class `{s}`"))
    }
}
