use serde::{Deserialize, Serialize};

use super::{check_dims, check_labels, mse, EpochRecord, FusionInput, Split, TrainingRecord};
use crate::error::{Error, Result};

/// Additive guard on `|Y|^2` in the normalized update.
pub const NLMS_EPSILON: f64 = 1e-12;

/// Adaptive linear combiner followed by a threshold device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveFuser {
    /// One weight per user plus the bias weight (last).
    pub weights: Vec<f64>,
    pub step_size: f64,
    pub threshold: f64,
    pub update_count: u64,
}

impl AdaptiveFuser {
    /// Zero-initialized fuser for `dim` inputs (users + bias).
    pub fn new(dim: usize, step_size: f64, threshold: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size < 2.0) {
            return Err(Error::Config(format!(
                "NLMS step size must lie in (0, 2), got {step_size}"
            )));
        }
        if !threshold.is_finite() {
            return Err(Error::Config("NLMS output threshold must be finite".into()));
        }
        if dim == 0 {
            return Err(Error::Config("NLMS fuser needs at least one input".into()));
        }
        Ok(Self {
            weights: vec![0.0; dim],
            step_size,
            threshold,
            update_count: 0,
        })
    }

    fn output(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Usage(format!(
                "feature length {} does not match {} weights",
                features.len(),
                self.weights.len()
            )));
        }
        Ok(self.weights.iter().zip(features).map(|(w, y)| w * y).sum())
    }
}

/// One normalized LMS update:
///
/// ```text
/// e_k     = d_k - W_k . Y_k
/// W_{k+1} = W_k + alpha e_k Y_k / (|Y_k|^2 + eps)
/// ```
///
/// Returns the a-priori error `e_k`.
pub fn nlms_step(fuser: &mut AdaptiveFuser, input: &FusionInput) -> Result<f64> {
    let error = f64::from(input.label) - fuser.output(&input.features)?;
    let energy: f64 = input.features.iter().map(|y| y * y).sum();
    let gain = fuser.step_size * error / (energy + NLMS_EPSILON);
    for (w, y) in fuser.weights.iter_mut().zip(&input.features) {
        *w += gain * y;
    }
    fuser.update_count += 1;
    Ok(error)
}

/// Linear output `r = W . Y` and the thresholded bit `r > threshold`.
pub fn adaline_predict(fuser: &AdaptiveFuser, features: &[f64]) -> Result<(f64, u8)> {
    let r = fuser.output(features)?;
    Ok((r, u8::from(r > fuser.threshold)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlmsParams {
    pub step_size: f64,
    pub epochs: usize,
    pub threshold: f64,
    pub split: Split,
}

impl Default for NlmsParams {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            epochs: 1,
            threshold: 0.5,
            split: Split::new(0.85, 0.15, 0.0).expect("valid split"),
        }
    }
}

/// Sequential NLMS training over the leading split of `data` (in time
/// order), `epochs` passes, with supervised desired response `d_k = label`.
pub fn train_nlms(data: &[FusionInput], params: &NlmsParams) -> Result<(AdaptiveFuser, TrainingRecord)> {
    params.split.validate()?;
    let dim = check_dims(data)?;
    check_labels(data)?;
    let mut fuser = AdaptiveFuser::new(dim, params.step_size, params.threshold)?;
    let (n_train, n_val, _) = params.split.sizes(data.len());
    let (train, rest) = data.split_at(n_train);
    let (val, test) = rest.split_at(n_val);

    let frozen_mse = |fuser: &AdaptiveFuser, part: &[FusionInput]| -> Result<Option<f64>> {
        let errors = part
            .iter()
            .map(|x| Ok(f64::from(x.label) - fuser.output(&x.features)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(mse(errors.into_iter()))
    };

    let mut record = TrainingRecord::default();
    for epoch in 1..=params.epochs {
        let mut sq = 0.0;
        for x in train {
            let e = nlms_step(&mut fuser, x)?;
            sq += e * e;
        }
        let mut grad = vec![0.0; dim];
        for x in train {
            let e = f64::from(x.label) - fuser.output(&x.features)?;
            for (g, y) in grad.iter_mut().zip(&x.features) {
                *g -= e * y;
            }
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / train.len() as f64;
        let val_mse = frozen_mse(&fuser, val)?;
        record.epochs.push(EpochRecord {
            epoch,
            train_mse: sq / train.len() as f64,
            val_mse,
            test_mse: frozen_mse(&fuser, test)?,
            grad_norm,
        });
        record.best_epoch = epoch;
        record.stop_epoch = epoch;
        record.best_mse = val_mse.or(Some(sq / train.len() as f64));
    }
    Ok((fuser, record))
}
