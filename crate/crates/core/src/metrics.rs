//! ROC curves, AUC, confusion matrices, error histograms and a
//! Kolmogorov-Smirnov statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. `+inf` and `-inf` mark
    /// the two endpoints.
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
}

/// Points sorted by ascending false-alarm rate, from (0,0) to (1,1).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks sortedness, rate ranges and the two endpoints.
    pub fn validate(&self) -> Result<()> {
        let first = self.points.first().ok_or_else(|| Error::Input("empty ROC curve".into()))?;
        let last = self.points.last().expect("non-empty");
        if (first.p_fa, first.p_d) != (0.0, 0.0) || (last.p_fa, last.p_d) != (1.0, 1.0) {
            return Err(Error::Input("ROC curve must run from (0,0) to (1,1)".into()));
        }
        for p in &self.points {
            if !(0.0..=1.0).contains(&p.p_fa) || !(0.0..=1.0).contains(&p.p_d) {
                return Err(Error::Input(format!("ROC rate out of [0,1]: {p:?}")));
            }
        }
        for w in self.points.windows(2) {
            if w[1].p_fa < w[0].p_fa || w[1].p_d < w[0].p_d {
                return Err(Error::Input("ROC curve is not monotone".into()));
            }
        }
        Ok(())
    }
}

fn check_labels(labels: &[u8]) -> Result<(usize, usize)> {
    if let Some(b) = labels.iter().find(|&&b| b > 1) {
        return Err(Error::Input(format!("label {b} is not a bit")));
    }
    let pos = labels.iter().filter(|&&b| b == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Exact sweep over every distinct score, plus the `+inf` and `-inf`
/// endpoints.
pub fn roc_from_scores(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let (pos, neg) = check_labels(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Input("ROC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    points.push(RocPoint {
        threshold: f64::INFINITY,
        p_fa: 0.0,
        p_d: 0.0,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            p_fa: fp as f64 / neg as f64,
            p_d: tp as f64 / pos as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        p_fa: 1.0,
        p_d: 1.0,
    });
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].p_fa - w[0].p_fa) * (w[1].p_d + w[0].p_d) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

/// Cell percentages of the total sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPercentages {
    pub true_positive: f64,
    pub false_positive: f64,
    pub false_negative: f64,
    pub true_negative: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    /// `(TP + TN) / total`; NaN for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }

    pub fn percentages(&self) -> ConfusionPercentages {
        let t = self.total() as f64;
        let pct = |c: u64| 100.0 * c as f64 / t;
        ConfusionPercentages {
            true_positive: pct(self.true_positive),
            false_positive: pct(self.false_positive),
            false_negative: pct(self.false_negative),
            true_negative: pct(self.true_negative),
        }
    }

    /// `TP / (TP + FN)`, or `None` without positives.
    pub fn detection_rate(&self) -> Option<f64> {
        let p = self.true_positive + self.false_negative;
        (p > 0).then(|| self.true_positive as f64 / p as f64)
    }

    /// `FP / (FP + TN)`, or `None` without negatives.
    pub fn false_alarm_rate(&self) -> Option<f64> {
        let n = self.false_positive + self.true_negative;
        (n > 0).then(|| self.false_positive as f64 / n as f64)
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    check_labels(labels)?;
    check_labels(predictions)?;
    let mut m = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => m.true_positive += 1,
            (1, 0) => m.false_positive += 1,
            (0, 1) => m.false_negative += 1,
            _ => m.true_negative += 1,
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Uniform bins over `[min, max]`. The last bin is closed on the right. A
/// constant input gets a unit-width range centered on the value.
pub fn error_histogram(errors: &[f64], n_bins: usize) -> Result<ErrorHistogram> {
    if errors.is_empty() {
        return Err(Error::Input("histogram of an empty error sequence".into()));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::Input("non-finite error value".into()));
    }
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for &e in errors {
        let idx = (((e - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    Ok(ErrorHistogram { bin_edges, counts })
}

/// Two-sided Kolmogorov-Smirnov statistic `sup |F_n - F|` of a sample
/// against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// CDF of the Rayleigh distribution with scale `sigma`.
pub fn rayleigh_cdf(r: f64, sigma: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-r * r / (2.0 * sigma * sigma)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn perfect_separation() {
        let c = roc_from_scores(&[0.9, 0.1], &[1, 0]).unwrap();
        assert!(c.points.iter().any(|p| p.p_fa == 0.0 && p.p_d == 1.0));
        assert_eq!(auc(&c), 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn constant_scores_give_the_diagonal() {
        let c = roc_from_scores(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        let mut distinct: Vec<(f64, f64)> = c.points.iter().map(|p| (p.p_fa, p.p_d)).collect();
        distinct.dedup();
        assert_eq!(distinct, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&c), 0.5);
        assert_eq!(c.len(), 1 + 2);
    }

    #[test]
    fn roc_input_errors() {
        assert!(roc_from_scores(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_from_scores(&[0.1], &[1, 0]).is_err());
        assert!(roc_from_scores(&[f64::NAN, 0.2], &[1, 0]).is_err());
    }

    #[test]
    fn diagonal_and_step_areas() {
        let pt = |f, d| RocPoint {
            threshold: 0.0,
            p_fa: f,
            p_d: d,
        };
        let diag = RocCurve {
            points: vec![pt(0.0, 0.0), pt(0.5, 0.5), pt(1.0, 1.0)],
        };
        assert_eq!(auc(&diag), 0.5);
        let step = RocCurve {
            points: vec![pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0)],
        };
        assert_eq!(auc(&step), 1.0);
    }

    #[test]
    fn random_scores_are_uninformative() {
        let mut rng = stream(5, Purpose::Signal, 0, 0);
        let labels: Vec<u8> = (0..10_000).map(|_| rng.gen_range(0..2)).collect();
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        let a = auc(&roc_from_scores(&scores, &labels).unwrap());
        assert!((a - 0.5).abs() < 0.02, "auc = {a}");
    }

    #[test]
    fn confusion_examples() {
        let m = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((m.false_positive, m.false_negative), (0, 0));
        assert_eq!(m.accuracy(), 1.0);
        let m = confusion(&[0, 1, 0], &[1, 0, 1]).unwrap();
        assert_eq!((m.true_positive, m.true_negative), (0, 0));
        assert_eq!(m.accuracy(), 0.0);
        let m = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(
            m,
            ConfusionMatrix {
                true_positive: 1,
                false_positive: 1,
                false_negative: 1,
                true_negative: 1
            }
        );
        let p = m.percentages();
        let sum = p.true_positive + p.false_positive + p.false_negative + p.true_negative;
        assert!((sum - 100.0).abs() < 1e-9);
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = error_histogram(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(h.counts, vec![3]);
        let h = error_histogram(&[-1.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.bin_edges, vec![-1.0, 0.0, 1.0]);
        assert!(error_histogram(&[], 3).is_err());
        assert!(error_histogram(&[1.0], 0).is_err());
    }

    #[test]
    fn histogram_mode_contains_zero() {
        let mut rng = stream(6, Purpose::Noise, 0, 0);
        let errs: Vec<f64> = (0..10_000).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let h = error_histogram(&errs, 20).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 10_000);
        let mode = (0..20).max_by_key(|&i| h.counts[i]).unwrap();
        let (lo, hi) = (h.bin_edges[mode], h.bin_edges[mode + 1]);
        assert!(lo <= 0.0 && 0.0 <= hi, "mode bin [{lo}, {hi}]");
    }

    #[test]
    fn ks_accepts_matching_distribution() {
        let mut rng = stream(7, Purpose::Noise, 0, 0);
        let x: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
        let d = ks_statistic(&x, |v| v.clamp(0.0, 1.0));
        assert!(d < ks_critical_value(x.len(), 0.01));
        let shifted: Vec<f64> = x.iter().map(|v| v * 0.9).collect();
        assert!(ks_statistic(&shifted, |v| v.clamp(0.0, 1.0)) > ks_critical_value(x.len(), 0.01));
    }

    proptest! {
        #[test]
        fn roc_invariant_under_monotone_transform(
            raw in prop::collection::vec((-5.0f64..5.0, 0u8..2), 4..60)
        ) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let labels: Vec<u8> = raw.iter().map(|r| r.1).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let a = roc_from_scores(&scores, &labels).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| (0.7 * s).exp() + 3.0).collect();
            let b = roc_from_scores(&t, &labels).unwrap();
            let rates = |c: &RocCurve| c.points.iter().map(|p| (p.p_fa, p.p_d)).collect::<Vec<_>>();
            prop_assert_eq!(rates(&a), rates(&b));
            a.validate().unwrap();
        }

        #[test]
        fn auc_of_negated_scores_is_complement(
            raw in prop::collection::hash_set(-100_000i64..100_000, 4..60),
            flips in prop::collection::vec(0u8..2, 60)
        ) {
            let scores: Vec<f64> = raw.iter().map(|&v| v as f64 / 7.0).collect();
            let labels: Vec<u8> = flips[..scores.len()].to_vec();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = auc(&roc_from_scores(&scores, &labels).unwrap())
                + auc(&roc_from_scores(&neg, &labels).unwrap());
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn confusion_is_permutation_invariant(
            pairs in prop::collection::vec((0u8..2, 0u8..2), 1..50),
            seed in 0u64..100
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut stream(seed, Purpose::DataSplit, 0, 0));
            let split = |v: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { v.iter().copied().unzip() };
            let (p, l) = split(&pairs);
            let (ps, ls) = split(&shuffled);
            prop_assert_eq!(confusion(&p, &l).unwrap(), confusion(&ps, &ls).unwrap());
        }
    }
}
