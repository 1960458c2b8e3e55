//! Minority-class oversampling with a WGAN-GP trained in min–max scaled
//! feature space.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, init_net, Activation, AdamConfig, AdamState, DenseNet};
use crate::rng::{self, Rng};

/// Learning rate printed in the original workflow description. It is too
/// small to move the weights at this scale, so it is opt-in.
pub const PUBLISHED_LEARNING_RATE: f64 = 1e-10;

pub const HIDDEN_SLOPE: f64 = 0.2;

const OUTPUT_BIAS_INIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub generator_hidden: [usize; 2],
    pub critic_hidden: [usize; 2],
    pub gp_lambda: f64,
    pub n_critic: usize,
    pub generator_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            latent_dim: 64,
            generator_hidden: [128, 256],
            critic_hidden: [256, 128],
            gp_lambda: 10.0,
            n_critic: 5,
            generator_steps: 2000,
            batch_size: 64,
            learning_rate: 1e-4,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("latent_dim", self.latent_dim),
            ("generator_hidden[0]", self.generator_hidden[0]),
            ("generator_hidden[1]", self.generator_hidden[1]),
            ("critic_hidden[0]", self.critic_hidden[0]),
            ("critic_hidden[1]", self.critic_hidden[1]),
            ("n_critic", self.n_critic),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("gan.{name} must be >= 1")));
            }
        }
        if !(self.gp_lambda >= 0.0) {
            return Err(Error::Config("gan.gp_lambda must be >= 0".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "gan.learning_rate must be > 0 and weight_decay >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-column affine map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Array1<f64>,
    pub max: Array1<f64>,
}

impl FeatureScaler {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Precondition("cannot fit a scaler on zero rows".into()));
        }
        let min = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let max = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        Ok(FeatureScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Constant columns map to 0.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            Zip::from(&mut row)
                .and(&self.min)
                .and(&self.max)
                .for_each(|v, &lo, &hi| {
                    *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
                });
        }
        out
    }

    /// Constant columns invert to their constant.
    pub fn invert(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            Zip::from(&mut row)
                .and(&self.min)
                .and(&self.max)
                .for_each(|v, &lo, &hi| {
                    *v = if hi > lo { *v * (hi - lo) + lo } else { lo };
                });
        }
        out
    }

    /// Clip to `[0, 1]`, invert, and clamp to the fitted column ranges.
    pub fn invert_clipped(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = self.invert(x.mapv(|v| v.clamp(0.0, 1.0)).view());
        for mut row in out.outer_iter_mut() {
            Zip::from(&mut row)
                .and(&self.min)
                .and(&self.max)
                .for_each(|v, &lo, &hi| *v = v.clamp(lo, hi));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    /// Critic objective at the last critic update of this step.
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub penalty: f64,
    /// Zero-norm penalty rows skipped over this step's critic updates.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub config: GanConfig,
    pub generator: DenseNet,
    pub critic: DenseNet,
    pub scaler: FeatureScaler,
    pub training_log: Vec<StepLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLoss {
    pub loss: f64,
    /// `mean D(fake) − mean D(real)`
    pub wasserstein_term: f64,
    pub penalty: f64,
    pub skipped: usize,
}

fn check_width(critic: &DenseNet, m: &ArrayView2<f64>) -> Result<()> {
    if m.ncols() != critic.input_dim() {
        return Err(Error::Dimension {
            expected: critic.input_dim(),
            got: m.ncols(),
        });
    }
    Ok(())
}

/// `mean D(fake) − mean D(real) + λ·mean (‖∇D(x̂)‖₂ − 1)²`
pub fn critic_objective(
    critic: &DenseNet,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    interp: ArrayView2<f64>,
    gp_lambda: f64,
) -> Result<CriticLoss> {
    for m in [&real, &fake, &interp] {
        check_width(critic, m)?;
    }
    let d_real = critic.predict(real)?.mean().unwrap_or(0.0);
    let d_fake = critic.predict(fake)?.mean().unwrap_or(0.0);
    let pg = critic.penalty_parameter_gradient(interp)?;
    let wasserstein_term = d_fake - d_real;
    Ok(CriticLoss {
        loss: wasserstein_term + gp_lambda * pg.penalty,
        wasserstein_term,
        penalty: pg.penalty,
        skipped: pg.skipped,
    })
}

fn normal_batch(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn sample_rows(rng: &mut Rng, data: &Array2<f64>, batch: usize) -> Array2<f64> {
    let n = data.nrows();
    let idx: Vec<usize> = if batch <= n {
        rand::seq::index::sample(rng, n, batch).into_vec()
    } else {
        (0..batch).map(|_| rng.random_range(0..n)).collect()
    };
    data.select(Axis(0), &idx)
}

fn build_nets(cfg: &GanConfig, dim: usize) -> Result<(DenseNet, DenseNet)> {
    let leaky = Activation::leaky_relu(HIDDEN_SLOPE);
    let mut generator = init_net(
        &[cfg.latent_dim, cfg.generator_hidden[0], cfg.generator_hidden[1], dim],
        &[leaky, leaky, Activation::Relu],
        rng::derive_tag(cfg.seed, "generator-init"),
    )?;
    // Start the ReLU outputs at the centre of the scaled range so no
    // output unit begins dead.
    generator.layers.last_mut().expect("3 layers").bias.fill(OUTPUT_BIAS_INIT);
    let critic = init_net(
        &[dim, cfg.critic_hidden[0], cfg.critic_hidden[1], 1],
        &[leaky, leaky, Activation::Identity],
        rng::derive_tag(cfg.seed, "critic-init"),
    )?;
    Ok((generator, critic))
}

fn non_finite(step: usize, log: &[StepLog], last: f64) -> Error {
    let mut trace: Vec<f64> = log.iter().rev().take(9).map(|l| l.critic_loss).collect();
    trace.reverse();
    trace.push(last);
    Error::NonFinite { step, trace }
}

/// Train a WGAN-GP on the rows of `minority`.
pub fn train_wgan_gp(minority: ArrayView2<f64>, cfg: &GanConfig) -> Result<GanModel> {
    cfg.validate()?;
    if minority.nrows() < 2 {
        return Err(Error::Precondition(format!(
            "WGAN-GP needs at least 2 minority rows, got {}",
            minority.nrows()
        )));
    }
    if minority.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite feature value".into()));
    }
    let scaler = FeatureScaler::fit(minority)?;
    let data = scaler.apply(minority);
    let dim = data.ncols();
    let (mut generator, mut critic) = build_nets(cfg, dim)?;
    let mut gen_opt = AdamState::new(&generator, AdamConfig::gan(cfg.learning_rate, cfg.weight_decay));
    let mut critic_opt = AdamState::new(&critic, AdamConfig::gan(cfg.learning_rate, cfg.weight_decay));
    let mut rng = rng::rng(rng::derive_tag(cfg.seed, "train"));
    let b = cfg.batch_size;
    let inv_b = 1.0 / b as f64;
    let mut log = Vec::with_capacity(cfg.generator_steps);

    for step in 0..cfg.generator_steps {
        let mut last = (0.0, 0.0);
        let mut skipped = 0;
        for _ in 0..cfg.n_critic {
            let real = sample_rows(&mut rng, &data, b);
            let z = normal_batch(&mut rng, b, cfg.latent_dim);
            let fake = generator.predict(z.view())?;
            let eps: Array1<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
            let mut interp = fake.clone();
            Zip::from(interp.rows_mut())
                .and(real.rows())
                .and(&eps)
                .for_each(|mut x, r, &e| {
                    Zip::from(&mut x).and(&r).for_each(|x, &r| *x = e * r + (1.0 - e) * *x);
                });

            let tr_real = critic.forward(real.view())?;
            let tr_fake = critic.forward(fake.view())?;
            let up_real = Array2::from_elem((b, 1), -inv_b);
            let up_fake = Array2::from_elem((b, 1), inv_b);
            let mut grads = critic.backward_impl(&tr_real, up_real.view(), false)?;
            grads.add_scaled(&critic.backward_impl(&tr_fake, up_fake.view(), false)?, 1.0);
            let pg = critic.penalty_parameter_gradient(interp.view())?;
            grads.add_scaled(&pg.grads, cfg.gp_lambda);

            let w_term = tr_fake.output.mean().unwrap_or(0.0) - tr_real.output.mean().unwrap_or(0.0);
            let loss = w_term + cfg.gp_lambda * pg.penalty;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(non_finite(step, &log, loss));
            }
            adam_step(&mut critic, &grads, &mut critic_opt)?;
            last = (loss, pg.penalty);
            skipped += pg.skipped;
        }

        let z = normal_batch(&mut rng, b, cfg.latent_dim);
        let tr_gen = generator.forward(z.view())?;
        let tr_critic = critic.forward(tr_gen.output.view())?;
        let gen_loss = -tr_critic.output.mean().unwrap_or(0.0);
        let up = Array2::from_elem((b, 1), -inv_b);
        let d_fake = critic
            .backward_impl(&tr_critic, up.view(), true)?
            .input
            .expect("input gradient requested");
        let gen_grads = generator.backward_impl(&tr_gen, d_fake.view(), false)?;
        if !gen_loss.is_finite() || !gen_grads.is_finite() {
            return Err(non_finite(step, &log, gen_loss));
        }
        adam_step(&mut generator, &gen_grads, &mut gen_opt)?;

        log.push(StepLog {
            step,
            critic_loss: last.0,
            generator_loss: gen_loss,
            penalty: last.1,
            skipped,
        });
    }

    Ok(GanModel {
        config: cfg.clone(),
        generator,
        critic,
        scaler,
        training_log: log,
    })
}

impl GanModel {
    /// Generator output in scaled space, before clipping.
    pub fn sample_scaled(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        let mut rng = rng::rng(seed);
        let z = normal_batch(&mut rng, n, self.config.latent_dim);
        self.generator.predict(z.view())
    }

    /// `n` synthetic rows in the original feature space.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        if n == 0 {
            return Ok(Array2::zeros((0, self.scaler.dim())));
        }
        let scaled = self.sample_scaled(n, seed)?;
        Ok(self.scaler.invert_clipped(scaled.view()))
    }

    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&serde_json::json!({
            "format": "ampgan-wgan-gp",
            "version": 1,
            "model": self,
        }))
        .expect("gan serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Ck {
            format: String,
            version: u32,
            model: GanModel,
        }
        let ck: Ck = serde_json::from_str(text)?;
        if ck.format != "ampgan-wgan-gp" || ck.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck.model)
    }
}

pub fn generate(gan: &GanModel, n: usize, seed: u64) -> Result<Array2<f64>> {
    gan.generate(n, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Synthetic => "synthetic",
        }
    }
}

/// Real rows (unchanged, original order) followed by synthetic minority rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSet {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
    /// Class that was oversampled, `None` if the input was already balanced.
    pub minority_label: Option<u8>,
    pub training_log: Vec<StepLog>,
}

impl BalancedSet {
    pub fn n_synthetic(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| **p == Provenance::Synthetic)
            .count()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.labels.len() - pos)
    }
}

/// Oversample the minority class until both classes have equal counts.
pub fn balance_dataset(x: ArrayView2<f64>, y: &[u8], cfg: &GanConfig) -> Result<BalancedSet> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::Precondition(format!("labels must be binary, found {bad}")));
    }
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == n_neg {
        return Ok(BalancedSet {
            features: x.to_owned(),
            labels: y.to_vec(),
            provenance: vec![Provenance::Real; y.len()],
            minority_label: None,
            training_log: Vec::new(),
        });
    }
    let (minority, n_min, n_maj) = if n_pos < n_neg {
        (1u8, n_pos, n_neg)
    } else {
        (0u8, n_neg, n_pos)
    };
    if n_min < 2 {
        return Err(Error::Precondition(format!(
            "minority class {minority} has {n_min} row(s); at least 2 are needed to train the GAN"
        )));
    }
    let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let rows = x.select(Axis(0), &idx);
    let model = train_wgan_gp(rows.view(), cfg)?;
    let n_new = n_maj - n_min;
    let synthetic = model.generate(n_new, rng::derive_tag(cfg.seed, "generate"))?;

    let features = ndarray::concatenate(Axis(0), &[x, synthetic.view()])
        .expect("synthetic rows share the feature width");
    let mut labels = y.to_vec();
    labels.extend(std::iter::repeat_n(minority, n_new));
    let mut provenance = vec![Provenance::Real; y.len()];
    provenance.extend(std::iter::repeat_n(Provenance::Synthetic, n_new));
    Ok(BalancedSet {
        features,
        labels,
        provenance,
        minority_label: Some(minority),
        training_log: model.training_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_cfg() -> GanConfig {
        GanConfig {
            latent_dim: 4,
            generator_hidden: [8, 8],
            critic_hidden: [8, 8],
            generator_steps: 3,
            n_critic: 2,
            batch_size: 4,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn scaler_identity_on_unit_column() {
        let x = array![[0.0, 5.0], [1.0, 5.0], [0.5, 5.0]];
        let s = FeatureScaler::fit(x.view()).unwrap();
        let a = s.apply(x.view());
        assert_eq!(a.column(0), x.column(0));
        assert!(a.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(s.invert(a.view()), x);
    }

    #[test]
    fn constant_critic_objective_is_lambda() {
        let critic = DenseNet::new(vec![crate::nn::Layer {
            weight: Array2::zeros((1, 3)),
            bias: array![2.5],
            activation: Activation::Identity,
        }])
        .unwrap();
        let a = array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]];
        let b = array![[0.9, 0.1, 0.0], [0.3, 0.3, 0.3]];
        let l = critic_objective(&critic, a.view(), b.view(), a.view(), 10.0).unwrap();
        assert_eq!(l.wasserstein_term, 0.0);
        assert_eq!(l.loss, 10.0);
        assert_eq!(l.skipped, 2);
    }

    #[test]
    fn unit_linear_critic_identical_batches() {
        let critic = DenseNet::new(vec![crate::nn::Layer {
            weight: array![[0.6, 0.0, 0.8]],
            bias: array![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let a = array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]];
        let l = critic_objective(&critic, a.view(), a.view(), a.view(), 10.0).unwrap();
        approx::assert_abs_diff_eq!(l.loss, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_steps_returns_initial_nets() {
        let cfg = GanConfig {
            generator_steps: 0,
            ..tiny_cfg()
        };
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let m = train_wgan_gp(x.view(), &cfg).unwrap();
        let (g, c) = build_nets(&cfg, 2).unwrap();
        assert_eq!(m.generator, g);
        assert_eq!(m.critic, c);
        assert!(m.training_log.is_empty());
    }

    #[test]
    fn generate_zero_rows_keeps_width() {
        let x = array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0]];
        let m = train_wgan_gp(x.view(), &tiny_cfg()).unwrap();
        assert_eq!(m.generate(0, 1).unwrap().dim(), (0, 3));
        assert_eq!(m.training_log.len(), 3);
        assert_eq!(m.generate(5, 4).unwrap(), m.generate(5, 4).unwrap());
    }

    #[test]
    fn balanced_input_is_identity() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let b = balance_dataset(x.view(), &[0, 1], &tiny_cfg()).unwrap();
        assert_eq!(b.features, x);
        assert_eq!(b.n_synthetic(), 0);
        assert_eq!(b.minority_label, None);
    }

    #[test]
    fn single_minority_row_is_error() {
        let x = Array2::<f64>::zeros((11, 2));
        let mut y = vec![1u8; 11];
        y[0] = 0;
        assert!(matches!(
            balance_dataset(x.view(), &y, &tiny_cfg()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let x = array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [0.2, 0.3, 2.5]];
        let m = train_wgan_gp(x.view(), &tiny_cfg()).unwrap();
        assert_eq!(GanModel::from_checkpoint(&m.to_checkpoint()).unwrap(), m);
    }
}
