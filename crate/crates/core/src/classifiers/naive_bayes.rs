use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Index 0 is class 0, index 1 is class 1.
    pub log_prior: [f64; 2],
    pub mean: [Array1<f64>; 2],
    pub var: [Array1<f64>; 2],
}

impl NaiveBayesModel {
    fn log_likelihood(&self, class: usize, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut s = self.log_prior[class];
        for ((x, m), v) in row.iter().zip(&self.mean[class]).zip(&self.var[class]) {
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
        }
        s
    }

    /// Normalized posterior of class 1.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.outer_iter()
            .map(|row| {
                let l0 = self.log_likelihood(0, row);
                let l1 = self.log_likelihood(1, row);
                // p1 = 1 / (1 + exp(l0 - l1)), written to avoid overflow.
                crate::nn::sigmoid(l1 - l0)
            })
            .collect()
    }
}

pub(super) fn fit(x: ArrayView2<f64>, y: &[u8], params: &NaiveBayesParams) -> NaiveBayesModel {
    let n = y.len() as f64;
    let max_var = x
        .var_axis(Axis(0), 0.0)
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    // Floor keeps all-constant inputs finite.
    let eps = (params.var_smoothing * max_var).max(1e-12);
    let class_stats = |c: u8| {
        let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        let rows = x.select(Axis(0), &idx);
        let mean = rows.mean_axis(Axis(0)).expect("class present");
        let var = rows.var_axis(Axis(0), 0.0) + eps;
        ((idx.len() as f64 / n).ln(), mean, var)
    };
    let (p0, m0, v0) = class_stats(0);
    let (p1, m1, v1) = class_stats(1);
    NaiveBayesModel {
        log_prior: [p0, p1],
        mean: [m0, m1],
        var: [v0, v1],
    }
}
