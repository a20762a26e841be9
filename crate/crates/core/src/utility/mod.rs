//! Downstream-utility evaluation: train classifiers on synthetic data, test
//! on held-out real folds (TSTR), with a train-on-real baseline (TRTR) over
//! the same folds.

pub mod classifiers;

use serde::{Deserialize, Serialize};

use crate::data::{split_dataset, stratified_kfold, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::fidelity::{evaluate_all, FidelityVector};
use crate::generators::GeneratorSpec;
use crate::rng::{derive_seed, RngSeed};

pub use classifiers::{ClassifierKind, FittedClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Train on synthetic, test on real.
    Tstr,
    /// Train on real, test on real (baseline).
    Trtr,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Tstr => "tstr",
            Strategy::Trtr => "trtr",
        }
    }
}

/// Binary confusion counts at the 0.5 decision threshold (probability ties go
/// to class 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_probs(probs: &[f64], labels: &[u8]) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::LengthMismatch(format!(
                "{} probabilities vs {} labels",
                probs.len(),
                labels.len()
            )));
        }
        let mut c = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 0 };
        for (&p, &y) in probs.iter().zip(labels) {
            let pred = p > 0.5;
            match (pred, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

/// (precision, recall, f1) with the 0/0 = 0 convention. F1 is computed from
/// the counts directly, 2tp / (2tp + fp + fn), which is the harmonic mean of
/// precision and recall without intermediate rounding.
pub fn confusion_metrics(c: &ConfusionCounts) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    (precision, recall, f1)
}

/// ROC AUC by the rank statistic (Mann-Whitney), with average ranks over
/// score ties. Equals the tie-corrected pairwise comparison count.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged over the tie run
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// One classifier's scores on one fold under one training strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub strategy: Strategy,
    pub classifier: ClassifierKind,
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc_roc: f64,
    /// True when the synthetic data came from an ingested external file.
    #[serde(default)]
    pub external: bool,
}

/// Everything produced by one generator on one dataset: per-fold fidelity of
/// the synthetic sample against the training split, plus TSTR and TRTR
/// reports for every classifier.
#[derive(Debug, Clone)]
pub struct TstrOutcome {
    pub reports: Vec<UtilityReport>,
    pub fold_fidelity: Vec<FidelityVector>,
    pub plan: FoldPlan,
}

fn evaluate_fold(
    strategy: Strategy,
    classifier: ClassifierKind,
    fold: usize,
    train: &Dataset,
    test: &Dataset,
    seed: RngSeed,
) -> Result<UtilityReport> {
    let model = classifiers::train_on_matrix(classifier, train.features(), train.labels(), seed)?;
    let probs = model.predict_proba(test.features())?;
    let counts = ConfusionCounts::from_probs(&probs, test.labels())?;
    let (precision, recall, f1) = confusion_metrics(&counts);
    Ok(UtilityReport {
        strategy,
        classifier,
        fold,
        precision,
        recall,
        f1,
        auc_roc: auc_roc(&probs, test.labels())?,
        external: false,
    })
}

/// Run the full per-fold protocol: fit the generator on the real training
/// split, sample a balanced synthetic set of (at least) the same total size,
/// score its fidelity against the training split, then train every classifier
/// on the synthetic set (TSTR) and on the real split (TRTR), always testing
/// on the held-out real fold.
pub fn run_tstr(
    real: &Dataset,
    generator: &GeneratorSpec,
    classifiers_to_run: &[ClassifierKind],
    k: usize,
    seed: RngSeed,
) -> Result<TstrOutcome> {
    if classifiers_to_run.is_empty() {
        return Err(Error::InvalidParameter("no classifiers requested".into()));
    }
    let plan = stratified_kfold(real, k, derive_seed(seed, &["folds"]))?;
    let mut reports = Vec::with_capacity(2 * k * classifiers_to_run.len());
    let mut fold_fidelity = Vec::with_capacity(k);
    for fold in 0..k {
        let (train, test) = split_dataset(real, &plan, fold);
        let fitted = generator.fit(&train)?;
        let n_per_class = train.n_rows().div_ceil(2);
        let fold_label = fold.to_string();
        let syn = fitted.sample(
            n_per_class,
            derive_seed(seed, &["sample", &fold_label]),
        )?;
        fold_fidelity.push(evaluate_all(
            &train,
            &syn,
            derive_seed(seed, &["pmse", &fold_label]),
        )?);
        for &clf in classifiers_to_run {
            let clf_seed = derive_seed(seed, &["train", clf.name(), &fold_label]);
            reports.push(evaluate_fold(Strategy::Tstr, clf, fold, &syn, &test, clf_seed)?);
            reports.push(evaluate_fold(Strategy::Trtr, clf, fold, &train, &test, clf_seed)?);
        }
    }
    Ok(TstrOutcome {
        reports,
        fold_fidelity,
        plan,
    })
}

/// Same protocol with a fixed externally supplied synthetic set instead of a
/// fitted generator: every fold trains TSTR models on the whole set and
/// scores its fidelity against that fold's training split. Fold assignment
/// and per-classifier seeds derive exactly as in `run_tstr`.
pub fn run_tstr_external(
    real: &Dataset,
    synthetic: &Dataset,
    classifiers_to_run: &[ClassifierKind],
    k: usize,
    seed: RngSeed,
) -> Result<TstrOutcome> {
    if classifiers_to_run.is_empty() {
        return Err(Error::InvalidParameter("no classifiers requested".into()));
    }
    if real.schema() != synthetic.schema() {
        return Err(Error::SchemaMismatch(
            "synthetic schema differs from the real dataset".into(),
        ));
    }
    let plan = stratified_kfold(real, k, derive_seed(seed, &["folds"]))?;
    let mut reports = Vec::with_capacity(2 * k * classifiers_to_run.len());
    let mut fold_fidelity = Vec::with_capacity(k);
    for fold in 0..k {
        let (train, test) = split_dataset(real, &plan, fold);
        let fold_label = fold.to_string();
        fold_fidelity.push(evaluate_all(
            &train,
            synthetic,
            derive_seed(seed, &["pmse", &fold_label]),
        )?);
        for &clf in classifiers_to_run {
            let clf_seed = derive_seed(seed, &["train", clf.name(), &fold_label]);
            let mut tstr = evaluate_fold(Strategy::Tstr, clf, fold, synthetic, &test, clf_seed)?;
            let mut trtr = evaluate_fold(Strategy::Trtr, clf, fold, &train, &test, clf_seed)?;
            tstr.external = true;
            trtr.external = true;
            reports.push(tstr);
            reports.push(trtr);
        }
    }
    Ok(TstrOutcome {
        reports,
        fold_fidelity,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, FeatureSchema, Matrix};
    use crate::generators::GeneratorKind;
    use approx::assert_relative_eq;

    #[test]
    fn confusion_metrics_known_values() {
        let c = ConfusionCounts { tp: 8, fp: 2, fn_: 2, tn: 8 };
        assert_eq!(confusion_metrics(&c), (0.8, 0.8, 0.8));
    }

    #[test]
    fn confusion_zero_conventions() {
        // nothing predicted positive: precision 0/0 -> 0
        let c = ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 7 };
        assert_eq!(confusion_metrics(&c), (0.0, 0.0, 0.0));
        // everything negative labeled, nothing positive predicted
        let c = ConfusionCounts { tp: 0, fp: 2, fn_: 0, tn: 8 };
        assert_eq!(confusion_metrics(&c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn threshold_ties_go_to_class_zero() {
        let c = ConfusionCounts::from_probs(&[0.5, 0.500001], &[1, 1]).unwrap();
        assert_eq!((c.tp, c.fn_), (1, 1));
    }

    #[test]
    fn auc_perfect_and_reversed() {
        let labels = [0, 0, 1, 1];
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
    }

    #[test]
    fn auc_with_ties_uses_average_ranks() {
        // one tie across classes contributes half a pair
        let auc = auc_roc(&[0.3, 0.5, 0.5, 0.7], &[0, 0, 1, 1]).unwrap();
        assert_relative_eq!(auc, 0.875, max_relative = 1e-12);
        // all scores equal: AUC is exactly 0.5
        assert_eq!(auc_roc(&[0.4; 6], &[0, 1, 0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn auc_requires_both_classes() {
        assert!(matches!(
            auc_roc(&[0.1, 0.9], &[1, 1]),
            Err(Error::SingleClass)
        ));
    }

    fn planted_dataset(n_per_class: usize) -> Dataset {
        // strongly separable: feature 0 tracks the class with a little noise
        let mut rng = crate::rng::Rng::from_seed(RngSeed(400));
        let schema = FeatureSchema::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![FeatureKind::Binary; 3],
            "label".into(),
        )
        .unwrap();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for class in [0u8, 1u8] {
            for _ in 0..n_per_class {
                let flip = rng.bernoulli(0.05);
                let v = f64::from((class == 1) != flip);
                data.push(v);
                data.push(f64::from(rng.bernoulli(0.5)));
                data.push(f64::from(class == 1));
                labels.push(class);
            }
        }
        Dataset::from_parts(
            schema,
            Matrix::from_flat(data, 2 * n_per_class, 3),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn run_tstr_produces_complete_report_grid() {
        let real = planted_dataset(60);
        let spec = crate::generators::GeneratorSpec::new(GeneratorKind::IndependentMarginals);
        let clfs = [ClassifierKind::Logistic, ClassifierKind::BernoulliNb];
        let out = run_tstr(&real, &spec, &clfs, 5, RngSeed(9)).unwrap();
        assert_eq!(out.fold_fidelity.len(), 5);
        assert_eq!(out.reports.len(), 2 * 5 * 2);
        for strategy in [Strategy::Tstr, Strategy::Trtr] {
            for &clf in &clfs {
                for fold in 0..5 {
                    assert_eq!(
                        out.reports
                            .iter()
                            .filter(|r| r.strategy == strategy
                                && r.classifier == clf
                                && r.fold == fold)
                            .count(),
                        1
                    );
                }
            }
        }
    }

    #[test]
    fn faithful_generator_tracks_the_baseline() {
        let real = planted_dataset(100);
        let spec = crate::generators::GeneratorSpec::new(GeneratorKind::NoisyCopy {
            flip_rate: 0.0,
        });
        let out = run_tstr(&real, &spec, &[ClassifierKind::Logistic], 5, RngSeed(2)).unwrap();
        for fold in 0..5 {
            let f1 = |strategy: Strategy| {
                out.reports
                    .iter()
                    .find(|r| r.strategy == strategy && r.fold == fold)
                    .unwrap()
                    .f1
            };
            assert!((f1(Strategy::Tstr) - f1(Strategy::Trtr)).abs() <= 0.05);
        }
    }

    #[test]
    fn run_tstr_is_seed_deterministic() {
        let real = planted_dataset(30);
        let spec = crate::generators::GeneratorSpec::new(GeneratorKind::IndependentMarginals);
        let a = run_tstr(&real, &spec, &[ClassifierKind::Knn], 3, RngSeed(5)).unwrap();
        let b = run_tstr(&real, &spec, &[ClassifierKind::Knn], 3, RngSeed(5)).unwrap();
        assert_eq!(a.reports, b.reports);
        assert_eq!(a.fold_fidelity, b.fold_fidelity);
    }
}
