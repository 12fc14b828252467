//! Deterministic synthetic corpora in the task-release JSON schema.
//!
//! Used by tests and demos when the real task files are not at hand. The
//! default shape mirrors the task corpus sizes: 768 budget items, a
//! training file with 1573 local utterances and 363 diet speeches carrying
//! 1248 labeled expressions, and a test file with 760 + 123 utterances
//! carrying 520 unlabeled expressions.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::class::ArgumentClass;

/// Class counts of the task training file.
pub const TRAINING_CLASS_COUNTS: [(ArgumentClass, usize); 7] = [
    (ArgumentClass::PremisePast, 260),
    (ArgumentClass::PremiseFuture, 622),
    (ArgumentClass::PremiseOther, 212),
    (ArgumentClass::ClaimOpinions, 98),
    (ArgumentClass::ClaimOther, 23),
    (ArgumentClass::NonMonetary, 27),
    (ArgumentClass::Other, 6),
];

const REGIONS: [&str; 3] = ["小樽市", "茨木市", "福岡市"];

#[derive(Debug, Clone)]
pub struct SplitShape {
    pub proceedings: usize,
    pub local_utterances: usize,
    pub diet_records: usize,
    pub diet_speeches: usize,
    pub class_counts: Vec<(ArgumentClass, usize)>,
}

impl SplitShape {
    pub fn expressions(&self) -> usize {
        self.class_counts.iter().map(|(_, n)| n).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SynthShape {
    pub seed: u64,
    pub budget_items: usize,
    pub train: SplitShape,
    pub test: SplitShape,
    /// Probability that a learned-class expression is voiced with another
    /// class's template.
    pub template_noise: f64,
}

impl Default for SynthShape {
    fn default() -> Self {
        // Test labels are unpublished; the test split is drawn with the
        // same class proportions, rounded to 520.
        let test_counts = vec![
            (ArgumentClass::PremisePast, 108),
            (ArgumentClass::PremiseFuture, 259),
            (ArgumentClass::PremiseOther, 89),
            (ArgumentClass::ClaimOpinions, 41),
            (ArgumentClass::ClaimOther, 10),
            (ArgumentClass::NonMonetary, 11),
            (ArgumentClass::Other, 2),
        ];
        SynthShape {
            seed: 2022,
            budget_items: 768,
            train: SplitShape {
                proceedings: 29,
                local_utterances: 1573,
                diet_records: 2,
                diet_speeches: 363,
                class_counts: TRAINING_CLASS_COUNTS.to_vec(),
            },
            test: SplitShape {
                proceedings: 12,
                local_utterances: 760,
                diet_records: 1,
                diet_speeches: 123,
                class_counts: test_counts,
            },
            template_noise: 0.2,
        }
    }
}

impl SynthShape {
    /// A small corpus with every class present, for fast tests.
    pub fn small(seed: u64) -> Self {
        let counts = |k: usize| {
            vec![
                (ArgumentClass::PremisePast, 6 * k),
                (ArgumentClass::PremiseFuture, 12 * k),
                (ArgumentClass::PremiseOther, 5 * k),
                (ArgumentClass::ClaimOpinions, 4 * k),
                (ArgumentClass::ClaimOther, 3 * k),
                (ArgumentClass::NonMonetary, 3 * k),
                (ArgumentClass::Other, 2 * k),
            ]
        };
        SynthShape {
            seed,
            budget_items: 24,
            train: SplitShape {
                proceedings: 3,
                local_utterances: 40,
                diet_records: 1,
                diet_speeches: 10,
                class_counts: counts(2),
            },
            test: SplitShape {
                proceedings: 2,
                local_utterances: 20,
                diet_records: 1,
                diet_speeches: 5,
                class_counts: counts(1),
            },
            template_noise: 0.1,
        }
    }
}

/// Generated documents, serialized as task-schema JSON.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub budget: String,
    pub train: String,
    /// Test minutes without labels.
    pub test: String,
    /// The same test minutes with gold labels.
    pub test_gold: String,
}

const PREFIXES: [&str; 16] = [
    "市道",
    "学校",
    "保育",
    "公園",
    "港湾",
    "福祉",
    "防災",
    "観光",
    "上下水道",
    "図書館",
    "高齢者",
    "子育て",
    "商店街",
    "農業",
    "環境",
    "交通",
];
const NOUNS: [&str; 12] = [
    "整備",
    "補修",
    "支援",
    "運営",
    "改修",
    "推進",
    "対策",
    "振興",
    "保全",
    "施設管理",
    "給付",
    "調査",
];
const KINDS: [&str; 4] = ["事業", "事業費", "経費", "補助金"];
const DEPARTMENTS: [&str; 6] = [
    "建設部",
    "教育委員会",
    "福祉部",
    "総務部",
    "経済部",
    "環境部",
];

const FILLERS: [&str; 10] = [
    "ただいま議長より発言の許可をいただきました。",
    "通告に従い質問いたします。",
    "以上で質問を終わります。",
    "よろしくお願いいたします。",
    "市民の皆様から多くの声が寄せられております。",
    "この点について少し整理させていただきます。",
    "委員会でも議論がありました。",
    "次の項目に移ります。",
    "私からは以上です。",
    "ご答弁をお願いいたします。",
];

fn templates(class: ArgumentClass) -> &'static [&'static str] {
    match class {
        ArgumentClass::PremisePast => &[
            "昨年度は{item}に{amt}を支出いたしました。",
            "既に{item}として{amt}を執行済みであります。",
            "前年度の決算では{item}が{amt}となりました。",
            "議会で{item}の{amt}を決定した経緯がございます。",
        ],
        ArgumentClass::PremiseFuture => &[
            "来年度は{item}に{amt}を計上しております。",
            "今後{item}として{amt}を見込んでおります。",
            "本年度予算では{item}に{amt}を予定しています。",
            "{item}については{amt}の見積もりとなっております。",
        ],
        ArgumentClass::PremiseOther => &[
            "例えば他市の{item}では{amt}という事例がございます。",
            "先ほどの{item}の{amt}は訂正いたします。",
            "参考までに{item}の{amt}を例示いたします。",
        ],
        ArgumentClass::ClaimOpinions => &[
            "{item}の{amt}は増額すべきではないでしょうか。",
            "{item}に{amt}を充てることを提案いたします。",
            "{item}の{amt}について市長の見解を伺います。",
        ],
        ArgumentClass::ClaimOther => &[
            "{item}に{amt}もかけるのは到底認められません。",
            "{item}の{amt}は問題であると言わざるを得ません。",
        ],
        ArgumentClass::NonMonetary => &[
            "{item}の利用者は{amt}に上ります。",
            "{item}の件数は{amt}となっております。",
        ],
        ArgumentClass::Other => &[
            "{amt}という数字だけが独り歩きしております。",
            "ちなみに{amt}とは{item}とは関係のない話です。",
        ],
    }
}

struct Gen {
    rng: ChaCha8Rng,
    items: Vec<(String, String)>, // (id, item name)
    noise: f64,
}

impl Gen {
    fn amount(&mut self) -> String {
        let digits_full = self.rng.gen_bool(0.3);
        let num = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| -> String {
            let n = rng.gen_range(lo..hi).to_string();
            if digits_full {
                n.chars()
                    .map(|c| char::from_u32(c as u32 - '0' as u32 + '０' as u32).unwrap())
                    .collect()
            } else {
                n
            }
        };
        match self.rng.gen_range(0..4) {
            0 => format!("{}億円", num(&mut self.rng, 1, 90)),
            1 => format!(
                "{}億{}万円",
                num(&mut self.rng, 1, 20),
                num(&mut self.rng, 1000, 9999)
            ),
            2 => format!("{}万円", num(&mut self.rng, 10, 9000)),
            _ => format!("{}千円", num(&mut self.rng, 100, 999)),
        }
    }

    fn counter(&mut self) -> String {
        let n = self.rng.gen_range(2..5000);
        let unit = ["人", "件", "%", "世帯", "か所"][self.rng.gen_range(0..5)];
        format!("{n}{unit}")
    }

    /// One sentence voicing `class`, returning (sentence, surface, relation).
    fn sentence(
        &mut self,
        class: ArgumentClass,
        taken: &[String],
    ) -> (String, String, Option<String>) {
        let voice = if !class.is_gated() && self.rng.gen_bool(self.noise) {
            *ArgumentClass::LEARNED.choose(&mut self.rng).unwrap()
        } else {
            class
        };
        let surface = loop {
            let s = if class == ArgumentClass::NonMonetary {
                self.counter()
            } else {
                self.amount()
            };
            let norm = crate::text::normalize(&s);
            let clash = taken.iter().any(|t| {
                let t = crate::text::normalize(t);
                t.contains(&norm) || norm.contains(&t)
            });
            if !clash {
                break s;
            }
        };
        let k = self.rng.gen_range(0..self.items.len());
        let (id, item) = self.items[k].clone();
        let tpl = templates(voice).choose(&mut self.rng).unwrap();
        let text = tpl.replace("{item}", &item).replace("{amt}", &surface);
        let relation = (!class.is_gated() && self.rng.gen_bool(0.9)).then_some(id);
        (text, surface, relation)
    }
}

fn budget_items(rng: &mut ChaCha8Rng, n: usize) -> (Value, Vec<(String, String)>) {
    let mut names: Vec<String> = Vec::new();
    'outer: for p in PREFIXES {
        for nn in NOUNS {
            for k in KINDS {
                names.push(format!("{p}{nn}{k}"));
                if names.len() >= n.max(1) * 2 {
                    break 'outer;
                }
            }
        }
    }
    names.shuffle(rng);
    let mut pairs = Vec::new();
    let mut out = Vec::new();
    for i in 0..n {
        let name = names[i % names.len()].clone();
        let name = if i >= names.len() {
            format!("{name}{}", i / names.len() + 1)
        } else {
            name
        };
        let id = format!("ID{:04}", i + 1);
        let region = if i % 4 == 3 { "国" } else { REGIONS[i % 3] };
        let amount = rng.gen_range(100..900_000) * 1000;
        let last = amount - rng.gen_range(0..amount / 2 + 1);
        out.push(json!({
            "budgetId": id,
            "budgetTitle": format!("令和3年度{region}一般会計予算"),
            "url": format!("https://example.invalid/budget/{}", i + 1),
            "budgetItem": name,
            "budget": format!("{amount}"),
            "categories": [DEPARTMENTS[i % DEPARTMENTS.len()].trim_end_matches('部'), "一般"],
            "typesOfAccount": "一般会計",
            "department": DEPARTMENTS[i % DEPARTMENTS.len()],
            "budgetLastYear": format!("{last}"),
            "description": format!("{name}に係る経費であり、{}を目的とする。", NOUNS[i % NOUNS.len()]),
            "budgetDifference": format!("{}", amount - last),
        }));
        pairs.push((id, name));
    }
    (Value::Array(out), pairs)
}

fn split_counts(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// Returns (unlabeled, labeled) minutes documents.
fn minutes(gen: &mut Gen, shape: &SplitShape, tag: &str) -> (Value, Value) {
    let n_utts = shape.local_utterances + shape.diet_speeches;
    let mut classes: Vec<ArgumentClass> = shape
        .class_counts
        .iter()
        .flat_map(|(c, n)| std::iter::repeat_n(*c, *n))
        .collect();
    classes.shuffle(&mut gen.rng);
    let mut hosted: Vec<Vec<ArgumentClass>> = vec![Vec::new(); n_utts];
    for c in classes {
        let u = gen.rng.gen_range(0..n_utts);
        hosted[u].push(c);
    }

    let mut utterances: Vec<(Value, Value)> = Vec::with_capacity(n_utts);
    for (u, classes) in hosted.iter().enumerate() {
        let mut sentences: Vec<String> = Vec::new();
        let mut labeled_exprs = Vec::new();
        let mut bare_exprs = Vec::new();
        let mut taken: Vec<String> = Vec::new();
        if gen.rng.gen_bool(0.7) {
            sentences.push(FILLERS.choose(&mut gen.rng).unwrap().to_string());
        }
        for (e, class) in classes.iter().enumerate() {
            let (s, surface, rel) = gen.sentence(*class, &taken);
            sentences.push(s);
            if gen.rng.gen_bool(0.4) {
                sentences.push(FILLERS.choose(&mut gen.rng).unwrap().to_string());
            }
            taken.push(surface.clone());
            let expr_id = format!("{tag}-{u:04}-{e}");
            labeled_exprs.push(json!({
                "exprId": expr_id,
                "moneyExpression": surface,
                "relatedID": rel.map(|r| vec![r]).unwrap_or_default(),
                "argumentClass": class.description(),
            }));
            bare_exprs.push(json!({ "exprId": expr_id, "moneyExpression": surface }));
        }
        if sentences.is_empty() || gen.rng.gen_bool(0.5) {
            sentences.push(FILLERS.choose(&mut gen.rng).unwrap().to_string());
        }
        let text = sentences.concat();
        utterances.push((
            json!({ "speaker": format!("議員{}", u % 40), "utterance": text, "moneyExpressions": bare_exprs }),
            json!({ "speaker": format!("議員{}", u % 40), "utterance": text, "moneyExpressions": labeled_exprs }),
        ));
    }

    let mut bare_docs = Vec::new();
    let mut gold_docs = Vec::new();
    let mut cursor = 0;
    for (p, n) in split_counts(shape.local_utterances, shape.proceedings.max(1))
        .into_iter()
        .enumerate()
    {
        let chunk = &utterances[cursor..cursor + n];
        cursor += n;
        let region = REGIONS[p % REGIONS.len()];
        let head = |list: Vec<Value>| {
            json!({
                "proceedingId": format!("{tag}-P{p:02}"),
                "localGovernmentName": region,
                "proceedingTitle": format!("第{}回定例会", p + 1),
                "proceeding": list,
            })
        };
        bare_docs.push(head(chunk.iter().map(|c| c.0.clone()).collect()));
        gold_docs.push(head(chunk.iter().map(|c| c.1.clone()).collect()));
    }
    for (r, n) in split_counts(shape.diet_speeches, shape.diet_records.max(1))
        .into_iter()
        .enumerate()
    {
        let chunk = &utterances[cursor..cursor + n];
        cursor += n;
        let rename = |v: &Value| {
            let mut m = v.as_object().unwrap().clone();
            let text = m.remove("utterance").unwrap();
            m.insert("speech".into(), text);
            Value::Object(m)
        };
        let head = |list: Vec<Value>| json!({ "issueID": format!("{tag}-D{r:02}"), "meetingName": "予算委員会", "speechRecord": list });
        bare_docs.push(head(chunk.iter().map(|c| rename(&c.0)).collect()));
        gold_docs.push(head(chunk.iter().map(|c| rename(&c.1)).collect()));
    }
    (Value::Array(bare_docs), Value::Array(gold_docs))
}

pub fn generate(shape: &SynthShape) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let (budget, items) = budget_items(&mut rng, shape.budget_items);
    let mut gen = Gen {
        rng,
        items,
        noise: shape.template_noise,
    };
    let (_, train) = minutes(&mut gen, &shape.train, "tr");
    let (test, test_gold) = minutes(&mut gen, &shape.test, "te");
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("json");
    SynthCorpus {
        budget: pretty(&budget),
        train: pretty(&train),
        test: pretty(&test),
        test_gold: pretty(&test_gold),
    }
}

/// Writes `budget.json`, `train.json`, `test.json` and `test_gold.json`.
pub fn write_to_dir(
    shape: &SynthShape,
    dir: &std::path::Path,
) -> crate::Result<BTreeMap<&'static str, std::path::PathBuf>> {
    let corpus = generate(shape);
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for (name, body) in [
        ("budget", &corpus.budget),
        ("train", &corpus.train),
        ("test", &corpus.test),
        ("test_gold", &corpus.test_gold),
    ] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, body).map_err(|e| crate::Error::io(&path, e))?;
        out.insert(name, path);
    }
    Ok(out)
}
