//! Confusion-matrix metrics, Monte-Carlo cross-validation splits, and the
//! per-fold experiment loop.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifiers::stacking::{fit_meta, train_stacking_with};
use crate::classifiers::{train_with, ClassifierSpec, StackingMode, TrainedModel};
use crate::encoding::{Encoder, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gan::{balance_dataset, GanConfig, Provenance};
use crate::par::Exec;
use crate::rng;
use crate::sequence_io::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Precondition("confusion of empty label vectors".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => {
                return Err(Error::Precondition(format!(
                    "labels must be binary, found ({t}, {p})"
                )))
            }
        }
    }
    Ok(cm)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0.0) {
        return 0.0;
    }
    // The product stays finite for counts up to ~1e75.
    let denom = (factors[0] * factors[1] * factors[2] * factors[3]).sqrt();
    ((tp * tn - fp * fn_) / denom).clamp(-1.0, 1.0)
}

/// `(accuracy, f1)`; f1 is 0 when it would be 0/0.
pub fn accuracy_f1(cm: &ConfusionMatrix) -> Result<(f64, f64)> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::Precondition("accuracy of an empty confusion matrix".into()));
    }
    let acc = (cm.tp + cm.tn) as f64 / n as f64;
    let d = 2 * cm.tp + cm.fp + cm.fn_;
    let f1 = if d == 0 { 0.0 } else { (2 * cm.tp) as f64 / d as f64 };
    Ok((acc, f1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Split>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Test rows drawn from a class of size `n`: nearest integer to
/// `fraction * n`, kept within `1..n`.
pub fn class_test_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Independent stratified shuffle-splits, one per fold.
pub fn mccv_splits(labels: &[u8], n_folds: usize, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if n_folds == 0 {
        return Err(Error::Config("n_folds must be >= 1".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => classes[l as usize].push(i),
            _ => return Err(Error::Precondition(format!("labels must be binary, found {l}"))),
        }
    }
    for (c, idx) in classes.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Precondition(format!(
                "class {c} has {} member(s); stratified splitting needs at least 2",
                idx.len()
            )));
        }
    }
    let folds = (0..n_folds)
        .map(|f| {
            let mut rng = rng::rng(rng::derive(seed, f as u64));
            let mut test = Vec::new();
            for idx in &classes {
                let mut shuffled = idx.clone();
                shuffled.shuffle(&mut rng);
                test.extend_from_slice(&shuffled[..class_test_size(idx.len(), test_fraction)]);
            }
            test.sort_unstable();
            let mut in_test = vec![false; labels.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            Split { train, test }
        })
        .collect();
    Ok(SplitPlan {
        folds,
        seed,
        test_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    Off,
    /// GAN trained on each training fold; test rows stay real.
    #[default]
    PerFold,
    /// Whole dataset balanced before splitting; synthetic rows can be scored.
    PaperFaithful,
}

impl BalanceMode {
    pub fn name(self) -> &'static str {
        match self {
            BalanceMode::Off => "off",
            BalanceMode::PerFold => "per_fold",
            BalanceMode::PaperFaithful => "paper_faithful",
        }
    }

    /// Column suffix in result tables.
    pub fn flag(self) -> &'static str {
        match self {
            BalanceMode::Off => "-G",
            _ => "+G",
        }
    }
}

impl fmt::Display for BalanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub n_folds: usize,
    pub test_fraction: f64,
    pub threshold: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            n_folds: 5,
            test_fraction: 0.2,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelChoice {
    Base(ClassifierSpec),
    Ensemble {
        bases: Vec<ClassifierSpec>,
        meta: ClassifierSpec,
        mode: StackingMode,
    },
}

impl ModelChoice {
    pub fn name(&self) -> String {
        match self {
            ModelChoice::Base(s) => s.kind().name().to_string(),
            ModelChoice::Ensemble { .. } => "stacking".to_string(),
        }
    }

    pub fn short(&self) -> String {
        match self {
            ModelChoice::Base(s) => s.kind().short().to_string(),
            ModelChoice::Ensemble { .. } => "Ensemble".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub mcc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_synthetic_train: usize,
    /// Always 0 unless balancing ran before the split.
    pub n_synthetic_test: usize,
    pub gan_seed: Option<u64>,
    pub wall_time_s: f64,
}

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub dataset: String,
    pub encoders: Vec<String>,
    pub n_features: usize,
    /// `-G` or `+G`.
    pub balancing: String,
    pub balance_mode: BalanceMode,
    pub classifier: String,
    pub model: ModelChoice,
    pub split_seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_mcc: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std_mcc: f64,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvaluationReport {
    fn aggregate(mut self) -> Self {
        let m: Vec<f64> = self.folds.iter().map(|f| f.mcc).collect();
        (self.mean_mcc, self.std_mcc) = mean_std(&m);
        let a: Vec<f64> = self.folds.iter().map(|f| f.accuracy).collect();
        self.mean_accuracy = mean_std(&a).0;
        let f: Vec<f64> = self.folds.iter().map(|f| f.f1).collect();
        self.mean_f1 = mean_std(&f).0;
        self
    }

    /// Rows of synthetic origin that reached a scored test set.
    pub fn synthetic_rows_scored(&self) -> usize {
        self.folds.iter().map(|f| f.n_synthetic_test).sum()
    }
}

/// Everything an experiment needs besides the data and the model list.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub balance: BalanceMode,
    pub gan: GanConfig,
    pub cv: CvConfig,
    pub seed: u64,
    pub exec: Exec,
}

/// Rows available to one fold after optional balancing.
struct FoldData {
    x: ndarray::Array2<f64>,
    y: Vec<u8>,
    test_x: ndarray::Array2<f64>,
    test_y: Vec<u8>,
    n_synthetic_train: usize,
    n_synthetic_test: usize,
    gan_seed: Option<u64>,
}

fn fold_gan(cfg: &GanConfig, seed: u64) -> GanConfig {
    GanConfig {
        seed,
        ..cfg.clone()
    }
}

/// Encode `dataset` and evaluate each model under the same splits and
/// balanced folds.
pub fn run_experiment(
    dataset: &Dataset,
    encoder: &Encoder,
    models: &[ModelChoice],
    setup: &ExperimentSetup,
) -> Result<Vec<EvaluationReport>> {
    let fm = encoder.encode_dataset(dataset, setup.exec)?;
    evaluate_features(&dataset.name, &fm, models, setup)
}

/// As [`run_experiment`] on an already encoded matrix.
pub fn evaluate_features(
    name: &str,
    fm: &FeatureMatrix,
    models: &[ModelChoice],
    setup: &ExperimentSetup,
) -> Result<Vec<EvaluationReport>> {
    if models.is_empty() {
        return Err(Error::Config("no models to evaluate".into()));
    }
    let split_seed = rng::derive_tag(setup.seed, "splits");
    let gan_root = rng::derive_tag(setup.seed, "gan");

    // Paper-faithful mode balances once, before any split.
    let (x_all, y_all, prov_all) = match setup.balance {
        BalanceMode::PaperFaithful => {
            let b = balance_dataset(fm.rows.view(), &fm.labels, &fold_gan(&setup.gan, gan_root))?;
            (b.features, b.labels, b.provenance)
        }
        _ => (fm.rows.clone(), fm.labels.clone(), vec![Provenance::Real; fm.labels.len()]),
    };
    let plan = mccv_splits(&y_all, setup.cv.n_folds, setup.cv.test_fraction, split_seed)?;

    let per_fold: Vec<Result<Vec<FoldResult>>> = setup.exec.map_range(plan.folds.len(), |f| {
        let split = &plan.folds[f];
        let data = prepare_fold(&x_all, &y_all, &prov_all, split, setup, gan_root, f)
            .map_err(|e| e.in_fold(f))?;
        score_models(&data, models, setup, f).map_err(|e| e.in_fold(f))
    });

    let mut reports: Vec<EvaluationReport> = models
        .iter()
        .map(|m| EvaluationReport {
            schema_version: REPORT_SCHEMA,
            dataset: name.to_string(),
            encoders: fm.schema.blocks.iter().map(|b| b.name.clone()).collect(),
            n_features: fm.n_features(),
            balancing: setup.balance.flag().to_string(),
            balance_mode: setup.balance,
            classifier: m.name(),
            model: m.clone(),
            split_seed,
            folds: Vec::new(),
            mean_mcc: 0.0,
            std_mcc: 0.0,
            mean_accuracy: 0.0,
            mean_f1: 0.0,
        })
        .collect();
    for fold in per_fold {
        for (r, res) in reports.iter_mut().zip(fold?) {
            r.folds.push(res);
        }
    }
    Ok(reports.into_iter().map(EvaluationReport::aggregate).collect())
}

fn prepare_fold(
    x: &ndarray::Array2<f64>,
    y: &[u8],
    prov: &[Provenance],
    split: &Split,
    setup: &ExperimentSetup,
    gan_root: u64,
    fold: usize,
) -> Result<FoldData> {
    let take = |idx: &[usize]| (x.select(Axis(0), idx), idx.iter().map(|&i| y[i]).collect::<Vec<u8>>());
    let (tx, ty) = take(&split.train);
    let (test_x, test_y) = take(&split.test);
    let count_syn = |idx: &[usize]| idx.iter().filter(|&&i| prov[i] == Provenance::Synthetic).count();
    let n_synthetic_test = count_syn(&split.test);

    if setup.balance != BalanceMode::PerFold {
        return Ok(FoldData {
            x: tx,
            y: ty,
            test_x,
            test_y,
            n_synthetic_train: count_syn(&split.train),
            n_synthetic_test,
            gan_seed: (setup.balance == BalanceMode::PaperFaithful).then_some(gan_root),
        });
    }
    let seed = rng::derive(gan_root, fold as u64);
    let b = balance_dataset(tx.view(), &ty, &fold_gan(&setup.gan, seed))?;
    let n_synthetic_train = b.n_synthetic();
    Ok(FoldData {
        x: b.features,
        y: b.labels,
        test_x,
        test_y,
        n_synthetic_train,
        n_synthetic_test,
        gan_seed: Some(seed),
    })
}

fn score_models(
    data: &FoldData,
    models: &[ModelChoice],
    setup: &ExperimentSetup,
    fold: usize,
) -> Result<Vec<FoldResult>> {
    // Base models fitted once per fold and reused by paper-mode ensembles.
    let mut fitted: BTreeMap<String, TrainedModel> = BTreeMap::new();
    let key = |s: &ClassifierSpec| serde_json::to_string(s).expect("spec serializes");
    let mut out = Vec::with_capacity(models.len());
    for m in models {
        let start = Instant::now();
        let proba = match m {
            ModelChoice::Base(spec) => {
                let k = key(spec);
                if !fitted.contains_key(&k) {
                    fitted.insert(k.clone(), train_with(spec, data.x.view(), &data.y, setup.exec)?);
                }
                fitted[&k].predict_proba(data.test_x.view())?
            }
            ModelChoice::Ensemble { bases, meta, mode } => {
                let model = match mode {
                    StackingMode::Paper => {
                        let mut trained = Vec::with_capacity(bases.len());
                        for spec in bases {
                            let k = key(spec);
                            if !fitted.contains_key(&k) {
                                let t = train_with(spec, data.x.view(), &data.y, setup.exec)?;
                                fitted.insert(k.clone(), t);
                            }
                            trained.push(fitted[&k].clone());
                        }
                        fit_meta(trained, meta, data.x.view(), &data.y)?
                    }
                    StackingMode::OutOfFold => train_stacking_with(
                        bases,
                        meta,
                        data.x.view(),
                        &data.y,
                        StackingMode::OutOfFold,
                        setup.exec,
                    )?,
                };
                model.predict_proba(data.test_x.view())?
            }
        };
        let pred = crate::classifiers::threshold_labels(&proba, setup.cv.threshold)?;
        let cm = confusion(&data.test_y, &pred)?;
        let (accuracy, f1) = accuracy_f1(&cm)?;
        out.push(FoldResult {
            fold,
            confusion: cm,
            mcc: mcc(&cm),
            accuracy,
            f1,
            n_train: data.y.len(),
            n_test: data.test_y.len(),
            n_synthetic_train: data.n_synthetic_train,
            n_synthetic_test: data.n_synthetic_test,
            gan_seed: data.gan_seed,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 0, 1], &[1, 0, 1]).unwrap(), cm(2, 1, 0, 0));
        let c = confusion(&[1, 0, 1], &[0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&[1, 0], &[1]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&cm(10, 10, 0, 0)), 1.0);
        assert_eq!(mcc(&cm(0, 0, 10, 10)), -1.0);
        let expected = 1950.0 / (60.0f64 * 55.0 * 50.0 * 45.0).sqrt();
        assert!((mcc(&cm(50, 40, 10, 5)) - expected).abs() < 1e-15);
        assert!((expected - 0.7157).abs() < 1e-4);
        assert_eq!(mcc(&cm(5, 0, 5, 0)), 0.0);
    }

    #[test]
    fn mcc_large_counts_finite() {
        let v = mcc(&cm(1_000_000, 1_000_000, 1, 1));
        assert!(v > 0.99999 && v <= 1.0);
    }

    #[test]
    fn accuracy_f1_examples() {
        assert_eq!(accuracy_f1(&cm(3, 2, 0, 0)).unwrap(), (1.0, 1.0));
        assert_eq!(accuracy_f1(&cm(0, 5, 0, 0)).unwrap(), (1.0, 0.0));
        assert_eq!(accuracy_f1(&cm(50, 40, 10, 5)).unwrap(), (90.0 / 105.0, 100.0 / 115.0));
        assert!(accuracy_f1(&cm(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn split_ten_and_ten() {
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let plan = mccv_splits(&y, 5, 0.2, 9).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for s in &plan.folds {
            let pos = s.test.iter().filter(|&&i| y[i] == 1).count();
            assert_eq!((pos, s.test.len() - pos), (2, 2));
            assert_eq!(s.train.len() + s.test.len(), 20);
        }
        assert_eq!(plan, mccv_splits(&y, 5, 0.2, 9).unwrap());
    }

    #[test]
    fn split_rejects_tiny_class() {
        assert!(mccv_splits(&[1, 0, 0, 0], 5, 0.2, 0).is_err());
    }

    #[test]
    fn test_size_rounding() {
        assert_eq!(class_test_size(398, 0.2), 80);
        assert_eq!(class_test_size(187, 0.2), 37);
        assert_eq!(class_test_size(2, 0.2), 1);
        assert_eq!(class_test_size(3, 0.9), 2);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
