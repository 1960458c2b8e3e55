//! Base classifiers and the stacking ensemble.

mod logistic;
mod mlp;
mod naive_bayes;
pub mod stacking;
mod tree;

use std::fmt;

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{MlpModel, MlpParams};
pub use naive_bayes::{NaiveBayesModel, NaiveBayesParams};
pub use stacking::{predict_stacking, train_stacking, StackingMode, StackingModel};
pub use tree::{ForestModel, ForestParams, Node, TreeModel, TreeParams};

use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    Forest,
    GaussianNb,
    Tree,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Logistic,
        ClassifierKind::Forest,
        ClassifierKind::GaussianNb,
        ClassifierKind::Tree,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Forest => "forest",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Column label used in result tables.
    pub fn short(self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "LR",
            ClassifierKind::Forest => "RF",
            ClassifierKind::GaussianNb => "GN",
            ClassifierKind::Tree => "DT",
            ClassifierKind::Mlp => "MLP",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hyperparams {
    Logistic(LogisticParams),
    Forest(ForestParams),
    GaussianNb(NaiveBayesParams),
    Tree(TreeParams),
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub params: Hyperparams,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind, seed: u64) -> Self {
        let params = match kind {
            ClassifierKind::Logistic => Hyperparams::Logistic(LogisticParams::default()),
            ClassifierKind::Forest => Hyperparams::Forest(ForestParams::default()),
            ClassifierKind::GaussianNb => Hyperparams::GaussianNb(NaiveBayesParams::default()),
            ClassifierKind::Tree => Hyperparams::Tree(TreeParams::default()),
            ClassifierKind::Mlp => Hyperparams::Mlp(MlpParams::default()),
        };
        ClassifierSpec { params, seed }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            Hyperparams::Logistic(_) => ClassifierKind::Logistic,
            Hyperparams::Forest(_) => ClassifierKind::Forest,
            Hyperparams::GaussianNb(_) => ClassifierKind::GaussianNb,
            Hyperparams::Tree(_) => ClassifierKind::Tree,
            Hyperparams::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.kind())));
        match &self.params {
            Hyperparams::Logistic(p) => {
                if !(p.l2 >= 0.0) || !(p.tolerance > 0.0) || p.max_iter == 0 {
                    return bad("need l2 >= 0, tolerance > 0, max_iter >= 1");
                }
            }
            Hyperparams::Forest(p) => {
                if p.n_trees == 0 || p.max_features == Some(0) {
                    return bad("need n_trees >= 1 and max_features >= 1");
                }
                validate_tree(&p.tree).or_else(|m| bad(&m))?;
            }
            Hyperparams::Tree(p) => validate_tree(p).or_else(|m| bad(&m))?,
            Hyperparams::GaussianNb(p) => {
                if !(p.var_smoothing >= 0.0) {
                    return bad("var_smoothing must be >= 0");
                }
            }
            Hyperparams::Mlp(p) => {
                if p.hidden == 0 || p.batch_size == 0 || !(p.learning_rate > 0.0) {
                    return bad("need hidden >= 1, batch_size >= 1, learning_rate > 0");
                }
            }
        }
        Ok(())
    }
}

fn validate_tree(p: &TreeParams) -> std::result::Result<(), String> {
    if p.max_depth == Some(0) || p.min_samples_split < 2 {
        return Err("need max_depth >= 1 and min_samples_split >= 2".into());
    }
    Ok(())
}

/// Per-column z-scoring; constant columns are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 0.0 { s } else { 1.0 });
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> ndarray::Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Logistic(LogisticModel),
    Forest(ForestModel),
    GaussianNb(NaiveBayesModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub feature_dim: usize,
    pub fitted: FittedParams,
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::Precondition("need at least 2 training rows".into()));
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::Precondition(format!("labels must be binary, found {bad}")));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Precondition(
            "training labels contain a single class".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite feature value".into()));
    }
    Ok(())
}

/// Fit one base classifier.
pub fn train(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[u8]) -> Result<TrainedModel> {
    train_with(spec, x, y, Exec::default())
}

pub fn train_with(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[u8], exec: Exec) -> Result<TrainedModel> {
    spec.validate()?;
    check_training_data(x, y)?;
    let fitted = match &spec.params {
        Hyperparams::Logistic(p) => FittedParams::Logistic(logistic::fit(x, y, p)),
        Hyperparams::Forest(p) => FittedParams::Forest(tree::fit_forest(x, y, p, spec.seed, exec)),
        Hyperparams::GaussianNb(p) => FittedParams::GaussianNb(naive_bayes::fit(x, y, p)),
        Hyperparams::Tree(p) => FittedParams::Tree(tree::fit_tree(x, y, p)),
        Hyperparams::Mlp(p) => FittedParams::Mlp(mlp::fit(x, y, p, spec.seed)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_dim: x.ncols(),
        fitted,
    })
}

impl TrainedModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.feature_dim {
            return Err(Error::Dimension {
                expected: self.feature_dim,
                got: x.ncols(),
            });
        }
        Ok(match &self.fitted {
            FittedParams::Logistic(m) => m.predict_proba(x),
            FittedParams::Forest(m) => m.predict_proba(x),
            FittedParams::GaussianNb(m) => m.predict_proba(x),
            FittedParams::Tree(m) => m.predict_proba(x),
            FittedParams::Mlp(m) => m.predict_proba(x),
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
        let p = self.predict_proba(x)?;
        threshold_labels(&p, threshold)
    }

    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&serde_json::json!({
            "format": "ampgan-classifier",
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
            model: TrainedModel,
        }
        let ck: Ck = serde_json::from_str(text)?;
        if ck.format != "ampgan-classifier" || ck.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck.model)
    }
}

/// Label 1 iff `p >= threshold`.
pub fn threshold_labels(p: &Array1<f64>, threshold: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    Ok(p.iter().map(|&v| u8::from(v >= threshold)).collect())
}

pub fn predict_proba(model: &TrainedModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    model.predict_proba(x)
}

pub fn predict(model: &TrainedModel, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
    model.predict(x, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_logistic_is_half() {
        let m = TrainedModel {
            spec: ClassifierSpec::default_for(ClassifierKind::Logistic, 0),
            feature_dim: 2,
            fitted: FittedParams::Logistic(LogisticModel::zeros(2)),
        };
        let p = m.predict_proba(array![[1.0, -3.0], [100.0, 2.0]].view()).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn threshold_convention() {
        let p = array![0.49, 0.5, 0.51];
        assert_eq!(threshold_labels(&p, 0.5).unwrap(), vec![0, 1, 1]);
        assert_eq!(threshold_labels(&p, 0.0).unwrap(), vec![1, 1, 1]);
        assert!(matches!(threshold_labels(&p, 1.0 + 1e-9), Err(Error::Config(_))));
        assert!(threshold_labels(&p, -0.1).is_err());
    }

    #[test]
    fn single_class_and_non_finite_rejected() {
        let spec = ClassifierSpec::default_for(ClassifierKind::Tree, 0);
        assert!(train(&spec, array![[0.0], [1.0]].view(), &[1, 1]).is_err());
        assert!(train(&spec, array![[0.0], [f64::NAN]].view(), &[0, 1]).is_err());
    }

    #[test]
    fn width_mismatch_on_predict() {
        let spec = ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0);
        let m = train(&spec, array![[0.0, 1.0], [1.0, 0.0]].view(), &[0, 1]).unwrap();
        assert!(matches!(
            m.predict_proba(array![[0.0]].view()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn nb_symmetric_classes() {
        let spec = ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0);
        let x = array![[-1.0], [-1.0], [1.0], [1.0]];
        let m = train(&spec, x.view(), &[0, 0, 1, 1]).unwrap();
        let FittedParams::GaussianNb(nb) = &m.fitted else { unreachable!() };
        assert_eq!(nb.mean[0][0], -1.0);
        assert_eq!(nb.mean[1][0], 1.0);
        assert_eq!(m.predict_proba(array![[0.0]].view()).unwrap()[0], 0.5);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ClassifierSpec::default_for(ClassifierKind::Forest, 0);
        if let Hyperparams::Forest(p) = &mut spec.params {
            p.n_trees = 0;
        }
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn spec_toml_shape() {
        let spec: ClassifierSpec = toml::from_str("kind = \"forest\"\nn_trees = 7\nseed = 3\n").unwrap();
        assert_eq!(spec.kind(), ClassifierKind::Forest);
        assert_eq!(spec.seed, 3);
        let Hyperparams::Forest(p) = spec.params else { unreachable!() };
        assert_eq!(p.n_trees, 7);
        assert!(p.bootstrap);
    }

    #[test]
    fn checkpoint_round_trip() {
        let x = array![[0.0, 1.0], [1.0, 0.3], [0.2, 0.9], [0.8, 0.1]];
        let y = [0, 1, 0, 1];
        for kind in ClassifierKind::ALL {
            let mut spec = ClassifierSpec::default_for(kind, 4);
            if let Hyperparams::Mlp(p) = &mut spec.params {
                p.epochs = 3;
            }
            let m = train(&spec, x.view(), &y).unwrap();
            assert_eq!(TrainedModel::from_checkpoint(&m.to_checkpoint()).unwrap(), m, "{kind}");
        }
    }
}
