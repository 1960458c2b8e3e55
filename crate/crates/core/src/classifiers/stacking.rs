//! Stacked generalization: base-model positive-class probabilities become
//! the features of a logistic meta-classifier.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_training_data, train_with, ClassifierKind, ClassifierSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StackingMode {
    /// Bases are fitted on the full training set and the meta-classifier is
    /// fitted on their in-sample probabilities.
    #[default]
    Paper,
    /// Meta-features come from internal 5-fold cross-fitted predictions;
    /// bases are then refitted on the full training set.
    OutOfFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    pub base: Vec<TrainedModel>,
    pub meta: TrainedModel,
    pub mode: StackingMode,
}

const INNER_FOLDS: usize = 5;

/// One column per base model.
pub fn meta_features(bases: &[TrainedModel], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), bases.len()));
    for (k, b) in bases.iter().enumerate() {
        out.column_mut(k).assign(&b.predict_proba(x)?);
    }
    Ok(out)
}

fn check_specs(specs: &[ClassifierSpec], meta: &ClassifierSpec) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Config(format!(
            "a stacking ensemble needs at least 2 base classifiers, got {}",
            specs.len()
        )));
    }
    if meta.kind() != ClassifierKind::Logistic {
        return Err(Error::Config("the meta-classifier must be logistic".into()));
    }
    Ok(())
}

/// Stratified assignment of rows to `k` folds (round-robin over each
/// shuffled class).
fn inner_folds(y: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut rng = rng::rng(seed);
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    fold
}

/// Fit the meta-classifier on top of already trained `bases`.
pub fn fit_meta(
    bases: Vec<TrainedModel>,
    meta_spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[u8],
) -> Result<StackingModel> {
    let specs: Vec<ClassifierSpec> = bases.iter().map(|b| b.spec.clone()).collect();
    check_specs(&specs, meta_spec)?;
    let z = meta_features(&bases, x)?;
    let meta = train_with(meta_spec, z.view(), y, Exec::Sequential)?;
    Ok(StackingModel {
        base: bases,
        meta,
        mode: StackingMode::Paper,
    })
}

pub fn train_stacking(
    specs: &[ClassifierSpec],
    meta_spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[u8],
    mode: StackingMode,
) -> Result<StackingModel> {
    train_stacking_with(specs, meta_spec, x, y, mode, Exec::default())
}

pub fn train_stacking_with(
    specs: &[ClassifierSpec],
    meta_spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[u8],
    mode: StackingMode,
    exec: Exec,
) -> Result<StackingModel> {
    check_specs(specs, meta_spec)?;
    check_training_data(x, y)?;
    let fit_all = |xs: ArrayView2<f64>, ys: &[u8]| -> Result<Vec<TrainedModel>> {
        exec.map_slice(specs, |s| train_with(s, xs, ys, exec))
            .into_iter()
            .collect()
    };

    let z = match mode {
        StackingMode::Paper => None,
        StackingMode::OutOfFold => {
            let folds = inner_folds(y, INNER_FOLDS, rng::derive_tag(meta_spec.seed, "stacking-folds"));
            let mut z = Array2::zeros((y.len(), specs.len()));
            for f in 0..INNER_FOLDS {
                let train_idx: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
                let test_idx: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
                if test_idx.is_empty() {
                    continue;
                }
                let xt = x.select(Axis(0), &train_idx);
                let yt: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
                let bases = fit_all(xt.view(), &yt)?;
                let zt = meta_features(&bases, x.select(Axis(0), &test_idx).view())?;
                for (r, &i) in test_idx.iter().enumerate() {
                    z.row_mut(i).assign(&zt.row(r));
                }
            }
            Some(z)
        }
    };

    let bases = fit_all(x, y)?;
    let z = match z {
        Some(z) => z,
        None => meta_features(&bases, x)?,
    };
    let meta = train_with(meta_spec, z.view(), y, Exec::Sequential)?;
    Ok(StackingModel {
        base: bases,
        meta,
        mode,
    })
}

impl StackingModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let z = meta_features(&self.base, x)?;
        self.meta.predict_proba(z.view())
    }

    pub fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
        super::threshold_labels(&self.predict_proba(x)?, threshold)
    }

    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&serde_json::json!({
            "format": "ampgan-stacking",
            "version": 1,
            "model": self,
        }))
        .expect("model serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Ck {
            format: String,
            version: u32,
            model: StackingModel,
        }
        let ck: Ck = serde_json::from_str(text)?;
        if ck.format != "ampgan-stacking" || ck.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck.model)
    }
}

pub fn predict_stacking(model: &StackingModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{FittedParams, LogisticModel};
    use ndarray::array;

    #[test]
    fn one_base_is_config_error() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let specs = [ClassifierSpec::default_for(ClassifierKind::Tree, 0)];
        let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
        assert!(matches!(
            train_stacking(&specs, &meta, x.view(), &[0, 0, 1, 1], StackingMode::Paper),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn inner_folds_are_stratified() {
        let y: Vec<u8> = (0..50).map(|i| u8::from(i < 20)).collect();
        let f = inner_folds(&y, 5, 1);
        for k in 0..5 {
            let pos = (0..50).filter(|&i| f[i] == k && y[i] == 1).count();
            let neg = (0..50).filter(|&i| f[i] == k && y[i] == 0).count();
            assert_eq!((pos, neg), (4, 6));
        }
    }

    #[test]
    fn zero_meta_gives_half() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0, 0, 1, 1];
        let base = vec![
            crate::classifiers::train(&ClassifierSpec::default_for(ClassifierKind::Tree, 0), x.view(), &y)
                .unwrap(),
            crate::classifiers::train(
                &ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0),
                x.view(),
                &y,
            )
            .unwrap(),
        ];
        let meta = TrainedModel {
            spec: ClassifierSpec::default_for(ClassifierKind::Logistic, 0),
            feature_dim: 2,
            fitted: FittedParams::Logistic(LogisticModel::zeros(2)),
        };
        let m = StackingModel {
            base,
            meta,
            mode: StackingMode::Paper,
        };
        assert!(m.predict_proba(x.view()).unwrap().iter().all(|&p| p == 0.5));
    }
}
