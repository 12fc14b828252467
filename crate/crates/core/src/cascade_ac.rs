//! Argument classification: the two-level cascade, the flat 7-class and
//! 5-class baselines, and level-1 balanced resampling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::class::{ArgumentClass, Level1};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::money_gate::{GateDecision, GateRule};
use crate::segmenter::Segmenter;
use crate::textclf::{self, BackendSpec, FeatureVector, Hyperparams, LinearModel};

pub const AC_MODEL_SCHEMA: &str = "bam-ac-model/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcStrategy {
    /// One 7-class model, no gate.
    Flat7,
    /// Gate, then one 5-class model.
    Flat5PlusRules,
    /// Gate, premise/claim router, then per-branch heads.
    Cascade,
}

impl AcStrategy {
    pub const ALL: [AcStrategy; 3] = [
        AcStrategy::Flat7,
        AcStrategy::Flat5PlusRules,
        AcStrategy::Cascade,
    ];

    pub fn uses_gate(self) -> bool {
        self != AcStrategy::Flat7
    }

    pub fn name(self) -> &'static str {
        match self {
            AcStrategy::Flat7 => "flat7",
            AcStrategy::Flat5PlusRules => "flat5_plus_rules",
            AcStrategy::Cascade => "cascade",
        }
    }
}

impl std::str::FromStr for AcStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AcStrategy::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (flat7, flat5_plus_rules, cascade)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub level1: LinearModel,
    pub premise_head: LinearModel,
    pub claim_head: LinearModel,
}

impl CascadeModel {
    /// Level-1 branch chosen by the router and the final label.
    pub fn route(&self, x: &FeatureVector) -> Result<(Level1, ArgumentClass)> {
        let branch = match self.level1.predict(x)? {
            0 => Level1::Premise,
            _ => Level1::Claim,
        };
        let label = match branch {
            Level1::Premise => ArgumentClass::PREMISES[self.premise_head.predict(x)?],
            _ => ArgumentClass::CLAIMS[self.claim_head.predict(x)?],
        };
        Ok((branch, label))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AcModel {
    Flat7 { model: LinearModel },
    Flat5PlusRules { model: LinearModel },
    Cascade(Box<CascadeModel>),
}

impl AcModel {
    pub fn strategy(&self) -> AcStrategy {
        match self {
            AcModel::Flat7 { .. } => AcStrategy::Flat7,
            AcModel::Flat5PlusRules { .. } => AcStrategy::Flat5PlusRules,
            AcModel::Cascade(_) => AcStrategy::Cascade,
        }
    }

    /// Final 7-class label. Gated decisions short-circuit every learned
    /// model for the gated strategies; `features` is not evaluated then.
    pub fn classify(
        &self,
        decision: GateDecision,
        features: impl FnOnce() -> Result<FeatureVector>,
    ) -> Result<ArgumentClass> {
        if let (true, GateDecision::Gated(c)) = (self.strategy().uses_gate(), decision) {
            return Ok(c);
        }
        let x = features()?;
        Ok(match self {
            AcModel::Flat7 { model } => ArgumentClass::ALL[model.predict(&x)?],
            AcModel::Flat5PlusRules { model } => ArgumentClass::LEARNED[model.predict(&x)?],
            AcModel::Cascade(c) => c.route(&x)?.1,
        })
    }
}

fn class_names(classes: &[ArgumentClass]) -> Vec<String> {
    classes.iter().map(|c| c.name().to_string()).collect()
}

/// One model over `classes`; samples whose label is outside `classes` are an error.
pub fn train_flat(
    labeled: &[(FeatureVector, ArgumentClass)],
    classes: &[ArgumentClass],
    hp: &Hyperparams,
) -> Result<LinearModel> {
    let samples = labeled
        .iter()
        .map(|(x, c)| {
            let idx = classes.iter().position(|k| k == c).ok_or_else(|| {
                Error::InvalidConfig(format!("label {c} outside the model's classes"))
            })?;
            Ok((x.clone(), idx))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(Error::EmptyClass(
            classes.first().map(|c| c.name()).unwrap_or("?").into(),
        ));
    }
    textclf::train(&samples, &class_names(classes), hp)
}

/// Trains the router on level-1 projections of all samples and each head on
/// its own branch's gold-labeled samples only.
pub fn train_cascade(
    labeled: &[(FeatureVector, ArgumentClass)],
    hp: &Hyperparams,
) -> Result<CascadeModel> {
    if let Some((_, c)) = labeled.iter().find(|(_, c)| c.is_gated()) {
        return Err(Error::InvalidConfig(format!(
            "gated label {c} in cascade training data"
        )));
    }
    let router: Vec<(FeatureVector, usize)> = labeled
        .iter()
        .map(|(x, c)| (x.clone(), usize::from(c.level1() == Level1::Claim)))
        .collect();
    if router.is_empty() {
        return Err(Error::EmptyClass("Premise".into()));
    }
    let level1 = textclf::train(&router, &["Premise".to_string(), "Claim".to_string()], hp)?;
    let branch = |want: Level1| -> Vec<(FeatureVector, ArgumentClass)> {
        labeled
            .iter()
            .filter(|(_, c)| c.level1() == want)
            .cloned()
            .collect()
    };
    let premise_head = train_flat(
        &branch(Level1::Premise),
        &ArgumentClass::PREMISES,
        &Hyperparams {
            seed: derive_seed(hp.seed, "premise-head"),
            ..*hp
        },
    )?;
    let claim_head = train_flat(
        &branch(Level1::Claim),
        &ArgumentClass::CLAIMS,
        &Hyperparams {
            seed: derive_seed(hp.seed, "claim-head"),
            ..*hp
        },
    )?;
    Ok(CascadeModel {
        level1,
        premise_head,
        claim_head,
    })
}

/// Trains `strategy` on gold-labeled samples. For the gated strategies the
/// gold-gated samples are dropped first; `balanced` applies level-1
/// downsampling to what remains.
pub fn train_ac(
    strategy: AcStrategy,
    labeled: &[(FeatureVector, ArgumentClass)],
    hp: &Hyperparams,
    balanced: bool,
) -> Result<AcModel> {
    let mut data: Vec<(FeatureVector, ArgumentClass)> = match strategy {
        AcStrategy::Flat7 => labeled.to_vec(),
        _ => labeled
            .iter()
            .filter(|(_, c)| !c.is_gated())
            .cloned()
            .collect(),
    };
    if balanced {
        data = balance_resample(&data, |(_, c)| *c, derive_seed(hp.seed, "balance"));
    }
    Ok(match strategy {
        AcStrategy::Flat7 => AcModel::Flat7 {
            model: train_flat(&data, &ArgumentClass::ALL, hp)?,
        },
        AcStrategy::Flat5PlusRules => AcModel::Flat5PlusRules {
            model: train_flat(&data, &ArgumentClass::LEARNED, hp)?,
        },
        AcStrategy::Cascade => AcModel::Cascade(Box::new(train_cascade(&data, hp)?)),
    })
}

/// Downsamples the larger of the premise/claim branches to the size of the
/// smaller, keeping within-branch class proportions (largest-remainder
/// rounding). Gated samples are kept. Output preserves input order.
pub fn balance_resample<T: Clone>(
    labeled: &[T],
    label_of: impl Fn(&T) -> ArgumentClass,
    seed: u64,
) -> Vec<T> {
    let mut by_class: BTreeMap<ArgumentClass, Vec<usize>> = BTreeMap::new();
    for (i, s) in labeled.iter().enumerate() {
        by_class.entry(label_of(s)).or_default().push(i);
    }
    let branch_total = |b: Level1| -> usize {
        by_class
            .iter()
            .filter(|(c, _)| c.level1() == b)
            .map(|(_, v)| v.len())
            .sum()
    };
    let (premise, claim) = (branch_total(Level1::Premise), branch_total(Level1::Claim));
    let (major, target, total) = if premise > claim {
        (Level1::Premise, claim, premise)
    } else if claim > premise {
        (Level1::Claim, premise, claim)
    } else {
        return labeled.to_vec();
    };

    let members: Vec<(ArgumentClass, usize)> = by_class
        .iter()
        .filter(|(c, _)| c.level1() == major)
        .map(|(c, v)| (*c, v.len()))
        .collect();
    let mut quotas: Vec<usize> = members.iter().map(|(_, n)| target * n / total).collect();
    let mut short = target - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..members.len()).collect();
    // largest remainder first; ties to the earlier class
    order.sort_by(|&a, &b| {
        let ra = (target * members[a].1) % total;
        let rb = (target * members[b].1) % total;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &k in &order {
        if short == 0 {
            break;
        }
        quotas[k] += 1;
        short -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; labeled.len()];
    for ((class, _), quota) in members.iter().zip(&quotas) {
        let mut idx = by_class[class].clone();
        idx.shuffle(&mut rng);
        for &i in &idx[*quota..] {
            keep[i] = false;
        }
    }
    labeled
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect()
}

/// Self-contained persisted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcModelFile {
    pub schema: String,
    pub backend: BackendSpec,
    pub segmenter: Segmenter,
    pub gate_rules: Vec<GateRule>,
    pub balanced: bool,
    pub model: AcModel,
}
