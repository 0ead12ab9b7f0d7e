//! Fusion-center decision making.
//!
//! Hard combining rules operate on recovered bits. The adaptive fusers
//! (NLMS adaline and a one-hidden-layer perceptron) operate on the per-user
//! features produced by [`crate::reporting::fusion_feature`].

mod mlp;
mod nlms;
mod rules;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mlp::{mlp_predict, train_mlp, MlpFuser, MlpParams};
pub use nlms::{adaline_predict, nlms_step, train_nlms, AdaptiveFuser, NlmsParams, NLMS_EPSILON};
pub use rules::{fuse_and, fuse_k_of_m, fuse_majority, fuse_or, majority_k, HardRule};

/// One fusion-center observation: per-user features with a constant 1
/// appended, and the true hypothesis as the desired response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub features: Vec<f64>,
    pub label: u8,
    pub time_index: usize,
}

impl FusionInput {
    pub fn new(raw: &[f64], label: u8, time_index: usize) -> Self {
        let mut features = Vec::with_capacity(raw.len() + 1);
        features.extend_from_slice(raw);
        features.push(1.0);
        Self {
            features,
            label,
            time_index,
        }
    }

    /// Number of users `M` (features without the bias entry).
    pub fn users(&self) -> usize {
        self.features.len() - 1
    }

    /// The per-user features.
    pub fn raw(&self) -> &[f64] {
        &self.features[..self.users()]
    }
}

/// Train / validation / test fractions of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl Split {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let split = Self {
            train,
            validation,
            test,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(*p >= 0.0 && p.is_finite())) || !(self.train > 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be >= 0 with a positive training share, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items: `(train, validation, test)`.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = ((self.validation * n as f64).round() as usize).min(n);
        let test = ((self.test * n as f64).round() as usize).min(n - val);
        (n - val - test, val, test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub grad_norm: f64,
}

/// Per-epoch training history of an adaptive fuser.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 when untrained).
    pub best_epoch: usize,
    /// Last epoch run.
    pub stop_epoch: usize,
    /// Validation MSE at `best_epoch` (training MSE when there is no
    /// validation partition).
    pub best_mse: Option<f64>,
}

pub(crate) fn mse(errors: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = errors.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub(crate) fn check_labels(data: &[FusionInput]) -> Result<()> {
    let positives = data.iter().filter(|d| d.label == 1).count();
    if let Some(bad) = data.iter().find(|d| d.label > 1) {
        return Err(Error::Input(format!("label {} is not a bit", bad.label)));
    }
    if positives == 0 || positives == data.len() {
        return Err(Error::Training("training data must contain both hypotheses".into()));
    }
    Ok(())
}

pub(crate) fn check_dims(data: &[FusionInput]) -> Result<usize> {
    let dim = data
        .first()
        .map(|d| d.features.len())
        .ok_or_else(|| Error::Training("empty training set".into()))?;
    if dim < 2 {
        return Err(Error::Input("fusion inputs need at least one user plus bias".into()));
    }
    if let Some(bad) = data.iter().find(|d| d.features.len() != dim) {
        return Err(Error::Usage(format!(
            "feature length {} at time {} differs from {dim}",
            bad.features.len(),
            bad.time_index
        )));
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_is_appended() {
        let x = FusionInput::new(&[0.2, 0.4], 1, 3);
        assert_eq!(x.features, vec![0.2, 0.4, 1.0]);
        assert_eq!(x.users(), 2);
        assert_eq!(x.raw(), &[0.2, 0.4]);
    }

    #[test]
    fn split_validation_and_sizes() {
        assert!(Split::new(0.5, 0.3, 0.3).is_err());
        assert!(Split::new(0.0, 0.5, 0.5).is_err());
        let s = Split::default();
        let (a, b, c) = s.sizes(100);
        assert_eq!((a, b, c), (70, 15, 15));
        assert_eq!(Split::new(1.0, 0.0, 0.0).unwrap().sizes(8), (8, 0, 0));
        let (a, b, c) = s.sizes(3);
        assert_eq!(a + b + c, 3);
    }
}
