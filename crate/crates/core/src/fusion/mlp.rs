use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dims, check_labels, EpochRecord, FusionInput, Split, TrainingRecord};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub split: Split,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Consecutive epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_units: 10,
            split: Split::default(),
            max_epochs: 1000,
            learning_rate: 2.0,
            patience: 6,
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// One hidden layer of sigmoid units feeding a sigmoid output.
///
/// Inputs are centered and scaled per feature (median and MAD of the
/// training partition) before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFuser {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// `hidden_units` rows of `input_dim` weights.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub input_center: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub threshold: f64,
    pub seed: u64,
    pub trained: bool,
    pub stop_epoch: usize,
    pub training_record: TrainingRecord,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Largest double below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

impl MlpFuser {
    /// Fresh network with weights uniform in `[-0.5, 0.5]` drawn from `seed`
    /// and identity input scaling.
    pub fn initialized(input_dim: usize, hidden_units: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_units == 0 {
            return Err(Error::Config(format!(
                "MLP needs input_dim >= 1 and hidden_units >= 1, got {input_dim} and {hidden_units}"
            )));
        }
        let mut rng = stream(seed, Purpose::WeightInit, 0, 0);
        let mut draw = || rng.gen_range(-0.5..=0.5);
        let hidden_weights = (0..hidden_units)
            .map(|_| (0..input_dim).map(|_| draw()).collect())
            .collect();
        let hidden_biases = (0..hidden_units).map(|_| draw()).collect();
        let output_weights = (0..hidden_units).map(|_| draw()).collect();
        let output_bias = draw();
        Ok(Self {
            input_dim,
            hidden_units,
            hidden_weights,
            hidden_biases,
            output_weights,
            output_bias,
            input_center: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
            threshold: 0.5,
            seed,
            trained: false,
            stop_epoch: 0,
            training_record: TrainingRecord::default(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.hidden_units * (self.input_dim + 2) + 1
    }

    /// Flattened parameters: hidden weights (row-major), hidden biases,
    /// output weights, output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for row in &self.hidden_weights {
            p.extend_from_slice(row);
        }
        p.extend_from_slice(&self.hidden_biases);
        p.extend_from_slice(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Usage(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                p.len()
            )));
        }
        let d = self.input_dim;
        let h = self.hidden_units;
        for (j, row) in self.hidden_weights.iter_mut().enumerate() {
            row.copy_from_slice(&p[j * d..(j + 1) * d]);
        }
        self.hidden_biases.copy_from_slice(&p[h * d..h * d + h]);
        self.output_weights.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.output_bias = p[h * d + 2 * h];
        Ok(())
    }

    fn check_input(&self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.input_dim {
            return Err(Error::Usage(format!(
                "MLP expects {} features, got {}",
                self.input_dim,
                raw.len()
            )));
        }
        Ok(())
    }

    fn normalize_into(&self, raw: &[f64], out: &mut [f64]) {
        for ((o, x), (c, s)) in out.iter_mut().zip(raw).zip(self.input_center.iter().zip(&self.input_scale)) {
            *o = (x - c) / s;
        }
    }

    /// Hidden activations and output score for normalized input `x`.
    fn forward_normalized(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let mut z_out = self.output_bias;
        for (j, a) in hidden.iter_mut().enumerate() {
            let z: f64 = self.hidden_biases[j]
                + self.hidden_weights[j].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *a = sigmoid(z);
            z_out += self.output_weights[j] * *a;
        }
        sigmoid(z_out)
    }

    /// Network output for raw (unnormalized) per-user features.
    pub fn forward(&self, raw: &[f64]) -> Result<f64> {
        self.check_input(raw)?;
        let mut x = vec![0.0; self.input_dim];
        let mut hidden = vec![0.0; self.hidden_units];
        self.normalize_into(raw, &mut x);
        Ok(self.forward_normalized(&x, &mut hidden))
    }

    /// Mean squared error over `data` (per-user features, bias entry ignored).
    pub fn mse(&self, data: &[FusionInput]) -> Result<f64> {
        Ok(self.mse_and_gradient(data)?.0)
    }

    /// Mean squared error and its gradient with respect to [`Self::params`],
    /// by backpropagation.
    pub fn mse_and_gradient(&self, data: &[FusionInput]) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::Input("MSE of an empty dataset".into()));
        }
        let d = self.input_dim;
        let h = self.hidden_units;
        let mut grad = vec![0.0; self.param_count()];
        let mut x = vec![0.0; d];
        let mut hidden = vec![0.0; h];
        let mut loss = 0.0;
        let scale = 2.0 / data.len() as f64;
        for sample in data {
            let raw = sample.raw();
            self.check_input(raw)?;
            self.normalize_into(raw, &mut x);
            let y = self.forward_normalized(&x, &mut hidden);
            let err = y - f64::from(sample.label);
            loss += err * err;
            let delta_out = scale * err * y * (1.0 - y);
            for j in 0..h {
                grad[h * d + h + j] += delta_out * hidden[j];
                let delta_h = delta_out * self.output_weights[j] * hidden[j] * (1.0 - hidden[j]);
                grad[h * d + j] += delta_h;
                for (g, xi) in grad[j * d..(j + 1) * d].iter_mut().zip(&x) {
                    *g += delta_h * xi;
                }
            }
            grad[h * d + 2 * h] += delta_out;
        }
        Ok((loss / data.len() as f64, grad))
    }
}

/// Score and decision of a trained network.
///
/// The score lies strictly inside `(0, 1)`; the bit is `score > threshold`.
pub fn mlp_predict(fuser: &MlpFuser, raw: &[f64]) -> Result<(f64, u8)> {
    if !fuser.trained {
        return Err(Error::Usage("MLP fuser has not been trained".into()));
    }
    let score = fuser.forward(raw)?.clamp(f64::MIN_POSITIVE, BELOW_ONE);
    Ok((score, u8::from(score > fuser.threshold)))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median and 1.4826 * MAD per feature, falling back to the standard
/// deviation and then to 1 for degenerate columns.
fn robust_scaling(train: &[&FusionInput], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut center = Vec::with_capacity(dim);
    let mut scale = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut col: Vec<f64> = train.iter().map(|s| s.features[i]).collect();
        let c = median(&mut col);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        let mut dev: Vec<f64> = col.iter().map(|v| (v - c).abs()).collect();
        let mad = 1.4826 * median(&mut dev);
        let s = if mad > 1e-12 {
            mad
        } else if sd > 1e-12 {
            sd
        } else {
            1.0
        };
        center.push(c);
        scale.push(s);
    }
    (center, scale)
}

/// Full-batch gradient descent on mean squared error with early stopping on
/// the validation partition. The parameters of the best validation epoch are
/// returned.
pub fn train_mlp(data: &[FusionInput], params: &MlpParams) -> Result<MlpFuser> {
    params.split.validate()?;
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be finite and > 0, got {}",
            params.learning_rate
        )));
    }
    if params.patience == 0 {
        return Err(Error::Config("patience must be at least 1".into()));
    }
    let dim = check_dims(data)? - 1;
    check_labels(data)?;
    let mut fuser = MlpFuser::initialized(dim, params.hidden_units, params.seed)?;
    fuser.threshold = params.threshold;
    if params.max_epochs == 0 {
        return Ok(fuser);
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream(params.seed, Purpose::DataSplit, 0, 0));
    let (n_train, n_val, _) = params.split.sizes(data.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    let train = pick(&order[..n_train]);
    let val = pick(&order[n_train..n_train + n_val]);
    let test = pick(&order[n_train + n_val..]);
    check_labels(&train).map_err(|_| {
        Error::Training("training partition must contain both hypotheses".into())
    })?;

    let refs: Vec<&FusionInput> = train.iter().collect();
    let (center, scale) = robust_scaling(&refs, dim);
    fuser.input_center = center;
    fuser.input_scale = scale;

    let mut record = TrainingRecord::default();
    let mut best_params = fuser.params();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut p = fuser.params();
    for epoch in 1..=params.max_epochs {
        let (_, grad) = fuser.mse_and_gradient(&train)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        for (w, g) in p.iter_mut().zip(&grad) {
            *w -= params.learning_rate * g;
        }
        fuser.set_params(&p)?;

        let train_mse = fuser.mse(&train)?;
        let val_mse = if val.is_empty() { None } else { Some(fuser.mse(&val)?) };
        let test_mse = if test.is_empty() { None } else { Some(fuser.mse(&test)?) };
        record.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            test_mse,
            grad_norm,
        });
        record.stop_epoch = epoch;

        let monitored = val_mse.unwrap_or(train_mse);
        if monitored < best {
            best = monitored;
            best_params.clone_from(&p);
            record.best_epoch = epoch;
            record.best_mse = Some(monitored);
            since_best = 0;
        } else if val_mse.is_some() {
            since_best += 1;
            if since_best >= params.patience {
                break;
            }
        }
    }
    fuser.set_params(&best_params)?;
    fuser.trained = true;
    fuser.stop_epoch = record.stop_epoch;
    fuser.training_record = record;
    Ok(fuser)
}
