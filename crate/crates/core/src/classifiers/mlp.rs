use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::Result;
use crate::nn::{adam_step, init_net, sigmoid, Activation, AdamConfig, AdamState, DenseNet};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub standardize: bool,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 100,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            standardize: true,
        }
    }
}

/// One ReLU hidden layer and a sigmoid output. The net's last layer is
/// linear (it emits the logit); the sigmoid is applied in `predict_proba`
/// so cross-entropy gradients stay exact at saturated outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub net: DenseNet,
    pub scaler: Option<Standardizer>,
}

impl MlpModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let xs;
        let input = match &self.scaler {
            Some(s) => {
                xs = s.apply(x);
                xs.view()
            }
            None => x,
        };
        self.net
            .predict(input)
            .expect("width checked by caller")
            .column(0)
            .mapv(sigmoid)
    }
}

pub(super) fn fit(x: ArrayView2<f64>, y: &[u8], params: &MlpParams, seed: u64) -> Result<MlpModel> {
    let scaler = params.standardize.then(|| Standardizer::fit(x));
    let xs = match &scaler {
        Some(s) => s.apply(x),
        None => x.to_owned(),
    };
    let mut net = init_net(
        &[x.ncols(), params.hidden, 1],
        &[Activation::Relu, Activation::Identity],
        rng::derive_tag(seed, "mlp-init"),
    )?;
    let mut opt = AdamState::new(&net, AdamConfig::classifier(params.learning_rate));
    let mut rng = rng::rng(rng::derive_tag(seed, "mlp-batches"));
    let mut order: Vec<usize> = (0..y.len()).collect();
    let batch = params.batch_size.max(1);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = xs.select(Axis(0), chunk);
            let trace = net.forward(xb.view())?;
            let inv = 1.0 / chunk.len() as f64;
            let up: Array2<f64> = Array2::from_shape_fn((chunk.len(), 1), |(i, _)| {
                (sigmoid(trace.output[[i, 0]]) - f64::from(y[chunk[i]])) * inv
            });
            let grads = net.backward_impl(&trace, up.view(), false)?;
            adam_step(&mut net, &grads, &mut opt)?;
        }
    }
    Ok(MlpModel { net, scaler })
}
