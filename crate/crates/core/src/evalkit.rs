//! Accuracy, macro-F1, the task's AC / RID / combined scores and stratified
//! k-fold cross-validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class::ArgumentClass;
use crate::error::{Error, Result};

fn check_lengths<L>(gold: &[L], pred: &[L]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(gold.len(), pred.len()));
    }
    Ok(())
}

pub fn accuracy<L: PartialEq>(gold: &[L], pred: &[L]) -> Result<f64> {
    check_lengths(gold, pred)?;
    if gold.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Per-class F1 as `2·tp / (2·tp + fp + fn)`; a class with no gold and no
/// predicted instances scores 0.
pub fn per_class_f1<L: PartialEq>(gold: &[L], pred: &[L], classes: &[L]) -> Result<Vec<f64>> {
    check_lengths(gold, pred)?;
    Ok(classes
        .iter()
        .map(|c| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for (g, p) in gold.iter().zip(pred) {
                match (g == c, p == c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1 over `classes`.
pub fn macro_f1<L: PartialEq>(gold: &[L], pred: &[L], classes: &[L]) -> Result<f64> {
    let f1 = per_class_f1(gold, pred, classes)?;
    if f1.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub expr_id: String,
    pub gold_class: ArgumentClass,
    pub pred_class: ArgumentClass,
    pub gold_rel: Option<String>,
    pub pred_rel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<ArgumentClass, f64>,
    pub ac_score: f64,
    /// Absent when relation detection was not part of the run.
    pub rid_score: Option<f64>,
    pub combined_score: Option<f64>,
    pub n: usize,
}

fn class_report(gold: &[ArgumentClass], pred: &[ArgumentClass]) -> Result<EvalReport> {
    let acc = accuracy(gold, pred)?;
    let f1 = per_class_f1(gold, pred, &ArgumentClass::ALL)?;
    Ok(EvalReport {
        accuracy: acc,
        macro_f1: f1.iter().sum::<f64>() / f1.len() as f64,
        per_class_f1: ArgumentClass::ALL.iter().copied().zip(f1).collect(),
        ac_score: acc,
        rid_score: None,
        combined_score: None,
        n: gold.len(),
    })
}

/// AC-only report over the 7-class taxonomy.
pub fn ac_report(records: &[TaskRecord]) -> Result<EvalReport> {
    let gold: Vec<ArgumentClass> = records.iter().map(|r| r.gold_class).collect();
    let pred: Vec<ArgumentClass> = records.iter().map(|r| r.pred_class).collect();
    class_report(&gold, &pred)
}

/// Full task score: AC accuracy, RID accuracy (null matches null) and the
/// fraction with both correct.
pub fn task_score(records: &[TaskRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut report = ac_report(records)?;
    let n = records.len() as f64;
    let rid_ok = |r: &TaskRecord| r.gold_rel == r.pred_rel;
    let rid = records.iter().filter(|r| rid_ok(r)).count();
    let both = records
        .iter()
        .filter(|r| rid_ok(r) && r.gold_class == r.pred_class)
        .count();
    report.rid_score = Some(rid as f64 / n);
    report.combined_score = Some(both as f64 / n);
    Ok(report)
}

/// Stratified, seeded fold index for every sample.
///
/// Classes are visited in sorted order; each class's samples are shuffled and
/// dealt round-robin, continuing the deal across classes so that fold sizes
/// differ by at most one and small classes spread over distinct folds.
pub fn stratified_folds<L: Ord + Clone>(
    labels: &[L],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 || labels.len() < folds {
        return Err(Error::TooFewSamples {
            samples: labels.len(),
            folds,
        });
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut deal = 0usize;
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assignment[i] = deal % folds;
            deal += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<EvalReport>,
    pub mean: EvalReport,
    pub std: EvalReport,
    /// Scores over all out-of-fold predictions at once.
    pub pooled: EvalReport,
    pub assignment: Vec<usize>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(reports: &[EvalReport]) -> (EvalReport, EvalReport) {
    let pick =
        |f: &dyn Fn(&EvalReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    let pick_opt = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> (Option<f64>, Option<f64>) {
        let xs: Option<Vec<f64>> = reports.iter().map(f).collect();
        match xs {
            Some(xs) if !xs.is_empty() => {
                let (m, s) = mean_std(&xs);
                (Some(m), Some(s))
            }
            _ => (None, None),
        }
    };
    let (acc_m, acc_s) = pick(&|r| r.accuracy);
    let (f1_m, f1_s) = pick(&|r| r.macro_f1);
    let (ac_m, ac_s) = pick(&|r| r.ac_score);
    let (rid_m, rid_s) = pick_opt(&|r| r.rid_score);
    let (comb_m, comb_s) = pick_opt(&|r| r.combined_score);
    let mut pc_m = BTreeMap::new();
    let mut pc_s = BTreeMap::new();
    for c in ArgumentClass::ALL {
        let (m, s) = pick(&|r| r.per_class_f1.get(&c).copied().unwrap_or(0.0));
        pc_m.insert(c, m);
        pc_s.insert(c, s);
    }
    let n = reports.iter().map(|r| r.n).sum();
    (
        EvalReport {
            accuracy: acc_m,
            macro_f1: f1_m,
            per_class_f1: pc_m,
            ac_score: ac_m,
            rid_score: rid_m,
            combined_score: comb_m,
            n,
        },
        EvalReport {
            accuracy: acc_s,
            macro_f1: f1_s,
            per_class_f1: pc_s,
            ac_score: ac_s,
            rid_score: rid_s,
            combined_score: comb_s,
            n,
        },
    )
}

/// Runs `run_fold(train_indices, test_indices)` for each fold in parallel and
/// aggregates. `run_fold` returns one record per test index; whether RID is
/// scored is decided by whether any record carries relation fields
/// (`with_rid`).
pub fn cross_validate<F>(
    labels: &[ArgumentClass],
    folds: usize,
    seed: u64,
    with_rid: bool,
    run_fold: F,
) -> Result<CvReport>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<TaskRecord>> + Sync,
{
    let assignment = stratified_folds(labels, folds, seed)?;
    let per_fold: Vec<Vec<TaskRecord>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != k).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == k).collect();
            let records = run_fold(&train, &test)?;
            if records.len() != test.len() {
                return Err(Error::LengthMismatch(test.len(), records.len()));
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;
    let score = |rs: &[TaskRecord]| {
        if with_rid {
            task_score(rs)
        } else {
            ac_report(rs)
        }
    };
    let reports = per_fold
        .iter()
        .map(|rs| score(rs))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = aggregate(&reports);
    let all: Vec<TaskRecord> = per_fold.into_iter().flatten().collect();
    Ok(CvReport {
        pooled: score(&all)?,
        folds: reports,
        mean,
        std,
        assignment,
    })
}

/// Plain-text table of one or more named reports.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let mut out = String::new();
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let _ = writeln!(
        out,
        "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
        "run", "acc", "macroF1", "AC", "RID", "AC+RID", "n"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<28} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>8} {:>6}",
            name,
            r.accuracy,
            r.macro_f1,
            r.ac_score,
            fmt_opt(r.rid_score),
            fmt_opt(r.combined_score),
            r.n
        );
    }
    if let Some((_, r)) = rows.first() {
        let _ = writeln!(out, "\nper-class F1 ({}):", rows[0].0);
        for (c, f) in &r.per_class_f1 {
            let _ = writeln!(out, "  {:<16} {f:.4}", c.name());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::ArgumentClass::*;

    #[test]
    fn two_class_example() {
        // A: tp=1 fp=0 fn=1 -> 2/3 ; B: tp=1 fp=1 fn=0 -> 2/3
        let f = macro_f1(&["A", "A", "B"], &["A", "B", "B"], &["A", "B"]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_disjoint() {
        let g = ["A", "B", "A"];
        assert_eq!(macro_f1(&g, &g, &["A", "B"]).unwrap(), 1.0);
        assert_eq!(macro_f1(&g, &["B", "A", "B"], &["A", "B"]).unwrap(), 0.0);
    }

    #[test]
    fn empty_class_counts_as_zero() {
        let f = macro_f1(&["A", "A"], &["A", "A"], &["A", "B"]).unwrap();
        assert_eq!(f, 0.5);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            macro_f1(&["A"], &[], &["A"]),
            Err(Error::LengthMismatch(1, 0))
        ));
    }

    fn rec(gc: ArgumentClass, pc: ArgumentClass, gr: Option<&str>, pr: Option<&str>) -> TaskRecord {
        TaskRecord {
            expr_id: String::new(),
            gold_class: gc,
            pred_class: pc,
            gold_rel: gr.map(String::from),
            pred_rel: pr.map(String::from),
        }
    }

    #[test]
    fn task_score_by_hand() {
        let rs = vec![
            rec(PremisePast, PremisePast, Some("1"), Some("1")),
            rec(PremisePast, PremisePast, Some("1"), Some("2")),
            rec(ClaimOther, PremisePast, Some("1"), None),
        ];
        let r = task_score(&rs).unwrap();
        assert!((r.ac_score - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.rid_score.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.combined_score.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn task_score_all_correct_and_null_match() {
        let rs = vec![
            rec(Other, Other, None, None),
            rec(PremiseFuture, PremiseFuture, Some("x"), Some("x")),
        ];
        let r = task_score(&rs).unwrap();
        assert_eq!(
            (r.ac_score, r.rid_score, r.combined_score),
            (1.0, Some(1.0), Some(1.0))
        );
        assert!(matches!(task_score(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn folds_of_ten() {
        let labels: Vec<usize> = (0..100).map(|i| i % 7).collect();
        let a = stratified_folds(&labels, 10, 5).unwrap();
        for k in 0..10 {
            assert_eq!(a.iter().filter(|&&f| f == k).count(), 10);
        }
        assert_eq!(a, stratified_folds(&labels, 10, 5).unwrap());
        assert!(matches!(
            stratified_folds(&labels[..5], 10, 5),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            stratified_folds(&labels, 1, 5),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn small_class_spreads_over_folds() {
        let mut labels = vec![0usize; 94];
        labels.extend([1; 6]);
        let a = stratified_folds(&labels, 10, 1).unwrap();
        let mut rare: Vec<usize> = (94..100).map(|i| a[i]).collect();
        rare.sort();
        rare.dedup();
        assert_eq!(rare.len(), 6);
    }

    #[test]
    fn cross_validate_oracle_model() {
        let labels: Vec<ArgumentClass> = (0..50).map(|i| ArgumentClass::ALL[i % 5]).collect();
        let cv = cross_validate(&labels, 5, 3, true, |_, test| {
            Ok(test
                .iter()
                .map(|&i| rec(labels[i], labels[i], None, None))
                .collect())
        })
        .unwrap();
        assert_eq!(cv.folds.len(), 5);
        assert_eq!(cv.mean.accuracy, 1.0);
        assert_eq!(cv.std.accuracy, 0.0);
        assert_eq!(cv.pooled.n, 50);
        assert_eq!(cv.mean.combined_score, Some(1.0));
    }
}
