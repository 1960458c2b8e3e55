use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::nn::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// L2 strength on the weights (bias is not penalized).
    pub l2: f64,
    /// Stop when the gradient norm of the objective drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Fit on z-scored features.
    pub standardize: bool,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: 1e-4,
            tolerance: 1e-6,
            max_iter: 1000,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub scaler: Option<Standardizer>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: Array1::zeros(dim),
            bias: 0.0,
            scaler: None,
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        }
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let z = match &self.scaler {
            Some(s) => s.apply(x).dot(&self.weights),
            None => x.dot(&self.weights),
        };
        z + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.decision(x).mapv(sigmoid)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2/2 ‖w‖²`, and its gradient.
/// `theta` holds the weights followed by the bias.
fn objective(x: &ArrayView2<f64>, y: &ArrayView1<f64>, l2: f64, theta: &Array1<f64>) -> (f64, Array1<f64>) {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let w = theta.slice(ndarray::s![..d]);
    let b = theta[d];
    let z = x.dot(&w) + b;
    let mut loss = 0.0;
    let mut resid = Array1::zeros(z.len());
    for i in 0..z.len() {
        loss += softplus(z[i]) - y[i] * z[i];
        resid[i] = sigmoid(z[i]) - y[i];
    }
    loss = loss / n + 0.5 * l2 * w.dot(&w);
    let mut grad = Array1::zeros(d + 1);
    let gw = x.t().dot(&resid) / n + &(&w * l2);
    grad.slice_mut(ndarray::s![..d]).assign(&gw);
    grad[d] = resid.sum() / n;
    (loss, grad)
}

const MEMORY: usize = 10;

/// L-BFGS with Armijo backtracking.
pub(super) fn fit(x: ArrayView2<f64>, y: &[u8], params: &LogisticParams) -> LogisticModel {
    let scaler = params.standardize.then(|| Standardizer::fit(x));
    let xs = match &scaler {
        Some(s) => s.apply(x),
        None => x.to_owned(),
    };
    let xv = xs.view();
    let yf: Array1<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let yv = yf.view();
    let d = x.ncols();

    let mut theta = Array1::<f64>::zeros(d + 1);
    let (mut f, mut g) = objective(&xv, &yv, params.l2, &theta);
    let mut history: std::collections::VecDeque<(Array1<f64>, Array1<f64>, f64)> =
        std::collections::VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut gnorm = g.dot(&g).sqrt();

    while gnorm > params.tolerance && iterations < params.max_iter {
        iterations += 1;
        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yk, rho) in history.iter().rev() {
            let a = rho * s.dot(&q);
            q.scaled_add(-a, yk);
            alphas.push(a);
        }
        let gamma = match history.back() {
            Some((s, yk, _)) => s.dot(yk) / yk.dot(yk),
            None => 1.0 / gnorm.max(1.0),
        };
        q *= gamma;
        for ((s, yk, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * yk.dot(&q);
            q.scaled_add(a - beta, s);
        }
        let mut dir = -q;
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            history.clear();
            dir = -&g;
            slope = -gnorm * gnorm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = &theta + &(&dir * step);
            let (fc, gc) = objective(&xv, &yv, params.l2, &cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        let s = &cand - &theta;
        let yk = &gc - &g;
        let sy = s.dot(&yk);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, yk, 1.0 / sy));
        }
        theta = cand;
        f = fc;
        g = gc;
        gnorm = g.dot(&g).sqrt();
    }

    LogisticModel {
        weights: theta.slice(ndarray::s![..d]).to_owned(),
        bias: theta[d],
        scaler,
        iterations,
        gradient_norm: gnorm,
        converged: gnorm <= params.tolerance,
    }
}
