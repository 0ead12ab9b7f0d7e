//! Per-user energy detection.
//!
//! Conventions: `n_samples` counts real degrees of freedom (`N = 2BT`), so a
//! window of complex baseband samples holds `N / 2` of them, and the noise
//! variance handed to [`threshold_for_pfa`] is the per-dimension variance
//! (half the complex noise power). Under H0 the statistic is then
//! `sigma^2 * chi2(N)`, with mean `N sigma^2` and standard deviation
//! `sqrt(2N) sigma^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub n_samples: usize,
    pub bandwidth_hz: Option<f64>,
    pub duration_s: Option<f64>,
}

impl DetectorConfig {
    pub fn from_samples(n_samples: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        Ok(Self {
            n_samples,
            bandwidth_hz: None,
            duration_s: None,
        })
    }

    /// `N = round(2 B T)`.
    pub fn from_time_bandwidth(bandwidth_hz: f64, duration_s: f64) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be > 0, got {bandwidth_hz}")));
        }
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::Config(format!("duration must be > 0, got {duration_s}")));
        }
        let n = (2.0 * bandwidth_hz * duration_s).round();
        if n < 1.0 || n > usize::MAX as f64 {
            return Err(Error::Config(format!(
                "time-bandwidth product 2BT = {} does not give a usable sample count",
                2.0 * bandwidth_hz * duration_s
            )));
        }
        Ok(Self {
            n_samples: n as usize,
            bandwidth_hz: Some(bandwidth_hz),
            duration_s: Some(duration_s),
        })
    }

    /// Complex baseband samples per sensing window (`N / 2`).
    pub fn complex_samples(&self) -> Result<usize> {
        if !self.n_samples.is_multiple_of(2) || self.n_samples < 2 {
            return Err(Error::Config(format!(
                "n_samples = {} must be even and >= 2 to map onto complex samples",
                self.n_samples
            )));
        }
        Ok(self.n_samples / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyStatistic {
    pub value: f64,
    pub user_index: usize,
    pub n_samples: usize,
}

/// `sum |y(n)|^2` over the window.
pub fn energy(samples: &[Complex]) -> Result<EnergyStatistic> {
    energy_for_user(0, samples)
}

pub fn energy_for_user(user_index: usize, samples: &[Complex]) -> Result<EnergyStatistic> {
    if samples.is_empty() {
        return Err(Error::Input("energy of an empty sample window".into()));
    }
    Ok(EnergyStatistic {
        value: samples.iter().map(|y| y.norm_sqr()).sum(),
        user_index,
        n_samples: samples.len(),
    })
}

/// Upper-tail probability of the standard normal.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)`.
///
/// Bisection on the monotone `Q`, run until the bracket is one or two ulps
/// wide, then the bracket end whose `Q` is closest to `p` is returned.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("Q^-1 requires p in (0, 1), got {p}")));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = q_function(mid);
        if q == p {
            return Ok(mid);
        }
        if q > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (q_function(lo) - p).abs() <= (q_function(hi) - p).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

fn check_pfa(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("target P_f must lie in (0, 1), got {p}")))
    }
}

fn check_snr(snr: f64) -> Result<()> {
    if snr >= 0.0 && snr.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("SNR must be finite and >= 0, got {snr}")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::Config("n_samples must be at least 1".into()))
    }
}

/// Threshold `λ = Q^-1(P_f) σ² √(2N) + N σ²` that meets the target false
/// alarm rate under the Gaussian approximation of the H0 statistic.
pub fn threshold_for_pfa(target_pfa: f64, noise_variance: f64, n_samples: usize) -> Result<f64> {
    check_pfa(target_pfa)?;
    check_n(n_samples)?;
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::Config(format!(
            "noise variance must be finite and > 0, got {noise_variance}"
        )));
    }
    let n = n_samples as f64;
    Ok(q_inverse(target_pfa)? * noise_variance * (2.0 * n).sqrt() + n * noise_variance)
}

/// Detection probability at a target false-alarm rate (Gaussian
/// approximation, deterministic signal):
///
/// `P_d = Q((Q^-1(P_f) - sqrt(N/2) SNR) / sqrt(1 + 2 SNR))`
pub fn pd_theoretical(target_pfa: f64, snr: f64, n_samples: usize) -> Result<f64> {
    check_pfa(target_pfa)?;
    check_snr(snr)?;
    check_n(n_samples)?;
    let n = n_samples as f64;
    let arg = (q_inverse(target_pfa)? - (n / 2.0).sqrt() * snr) / (1.0 + 2.0 * snr).sqrt();
    Ok(q_function(arg))
}

/// The detection-probability expression in its originally typeset form:
///
/// `Q((Q^-1(P_f) σ² √(2N) + N σ²) / (σ √(2N (1 + 2 SNR))))`
///
/// It lacks the H1 mean shift and so does not reduce to `P_f` at zero SNR.
/// Kept for comparison against [`pd_theoretical`]; not used for decisions.
pub fn pd_as_printed(target_pfa: f64, snr: f64, noise_sigma: f64, n_samples: usize) -> Result<f64> {
    check_pfa(target_pfa)?;
    check_snr(snr)?;
    check_n(n_samples)?;
    if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be > 0, got {noise_sigma}")));
    }
    let n = n_samples as f64;
    let s2 = noise_sigma * noise_sigma;
    let num = q_inverse(target_pfa)? * s2 * (2.0 * n).sqrt() + n * s2;
    let den = noise_sigma * (2.0 * n * (1.0 + 2.0 * snr)).sqrt();
    Ok(q_function(num / den))
}

/// 1 iff the statistic strictly exceeds the threshold; ties go to H0.
pub fn decide(statistic: &EnergyStatistic, threshold: f64) -> u8 {
    u8::from(statistic.value > threshold)
}

/// One point on the theoretical detection curve of a single user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOperatingPoint {
    pub p_fa: f64,
    pub p_d: f64,
    pub p_md: f64,
    pub threshold: f64,
    pub snr: f64,
    pub n_samples: usize,
    pub noise_variance: f64,
}

impl DetectionOperatingPoint {
    pub fn new(target_pfa: f64, snr: f64, n_samples: usize, noise_variance: f64) -> Result<Self> {
        let threshold = threshold_for_pfa(target_pfa, noise_variance, n_samples)?;
        let p_d = pd_theoretical(target_pfa, snr, n_samples)?;
        Ok(Self {
            p_fa: target_pfa,
            p_d,
            p_md: 1.0 - p_d,
            threshold,
            snr,
            n_samples,
            noise_variance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::signal::{generate_awgn, generate_qam, received_samples, Hypothesis, UserChannel};
    use proptest::prelude::*;

    /// Q(x) by Simpson quadrature of the normal density on [x, x + 40];
    /// independent of the erfc path.
    fn q_oracle(x: f64) -> f64 {
        let steps = 200_000;
        let h = 40.0 / steps as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(x) + pdf(x + 40.0);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(x + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn q_basic_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_inverse(0.5).unwrap(), 0.0);
        assert!((q_function(1.2816) - 0.1).abs() < 1e-4);
        for x in [-3.0, -0.7, 0.3, 1.2816, 2.5, 4.0] {
            let rel = (q_function(x) - q_oracle(x)).abs() / q_oracle(x);
            assert!(rel < 1e-10, "x = {x}: rel = {rel}");
        }
    }

    #[test]
    fn q_inverse_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(q_inverse(p), Err(Error::Domain(_))), "p = {p}");
        }
    }

    #[test]
    fn q_inverse_round_trip_over_tails() {
        let mut p = 1e-8;
        while p < 1.0 - 1e-8 {
            for q in [p, 1.0 - p] {
                let back = q_function(q_inverse(q).unwrap());
                assert!((back - q).abs() <= 1e-10 * q, "p = {q}: back = {back}");
            }
            p *= 1.7;
        }
    }

    proptest! {
        #[test]
        fn q_inverse_inverts_q(x in -5.0f64..5.0) {
            let back = q_inverse(q_function(x)).unwrap();
            prop_assert!((back - x).abs() < 1e-8);
        }

        #[test]
        fn energy_is_permutation_invariant(
            values in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let samples: Vec<Complex> = values.iter().map(|&(a, b)| Complex::new(a, b)).collect();
            let mut shuffled = samples.clone();
            shuffled.shuffle(&mut stream(seed, Purpose::DataSplit, 0, 0));
            let a = energy(&samples).unwrap().value;
            let b = energy(&shuffled).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn pd_is_monotone(pfa in 0.001f64..0.49, snr in 0.0f64..2.0, n in 10usize..4000) {
            let base = pd_theoretical(pfa, snr, n).unwrap();
            prop_assert!(pd_theoretical(pfa, snr + 0.01, n).unwrap() >= base);
            prop_assert!(pd_theoretical(pfa, snr, n + 10).unwrap() >= base);
            prop_assert!(base >= pfa - 1e-15);
        }
    }

    #[test]
    fn energy_examples() {
        let z = vec![Complex::new(0.0, 0.0); 3];
        assert_eq!(energy(&z).unwrap().value, 0.0);
        let u = [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(-1.0, 0.0)];
        let e = energy(&u).unwrap();
        assert_eq!(e.value, 3.0);
        assert_eq!(e.n_samples, 3);
        assert!(matches!(energy(&[]), Err(Error::Input(_))));

        let noise = generate_awgn(100_000, 2.0, &mut stream(1, Purpose::Noise, 0, 0)).unwrap();
        let per_sample = energy(&noise).unwrap().value / noise.len() as f64;
        assert!((per_sample - 2.0).abs() < 0.03 * 2.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_for_pfa(0.5, 1.0, 100).unwrap(), 100.0);
        let expected = q_inverse(0.1).unwrap() * 2000f64.sqrt() + 1000.0;
        let lambda = threshold_for_pfa(0.1, 1.0, 1000).unwrap();
        assert_eq!(lambda, expected);
        assert!((lambda - 1057.31).abs() < 0.01);
        let mut last = f64::NEG_INFINITY;
        for p in [0.9, 0.5, 0.1, 0.01, 0.001] {
            let l = threshold_for_pfa(p, 1.0, 1000).unwrap();
            assert!(l > last);
            last = l;
        }
        assert!(threshold_for_pfa(0.0, 1.0, 10).is_err());
        assert!(threshold_for_pfa(0.1, 0.0, 10).is_err());
        assert!(threshold_for_pfa(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn pd_examples() {
        for p in [0.01, 0.1, 0.3, 0.9] {
            let pd = pd_theoretical(p, 0.0, 777).unwrap();
            assert!((pd - p).abs() <= 4.0 * f64::EPSILON, "p = {p}, pd = {pd}");
        }
        let pd = pd_theoretical(0.1, 0.1, 1000).unwrap();
        let by_hand = q_oracle((1.2815515655446004 - 500f64.sqrt() * 0.1) / 1.2f64.sqrt());
        assert!((pd - by_hand).abs() < 1e-9);
        assert!((pd - 0.808).abs() < 1e-3);
        assert!(pd_theoretical(0.1, 1e6, 1000).unwrap() > 1.0 - 1e-12);
        assert!(pd_theoretical(0.1, -0.1, 1000).is_err());
    }

    #[test]
    fn printed_form_examples() {
        let n = 64;
        let pd = pd_as_printed(0.5, 0.0, 1.0, n).unwrap();
        assert!((pd - q_function((n as f64 / 2.0).sqrt())).abs() < 1e-15);
        // Does not collapse to P_f at zero SNR.
        let pd = pd_as_printed(0.1, 0.0, 1.0, 1000).unwrap();
        assert!(pd < 1e-100);
        let arg = (1.2815515655446004 * 2000f64.sqrt() + 1000.0) / 2000f64.sqrt();
        assert!((arg - 23.64).abs() < 0.01);
        for snr in [0.0, 0.5, 10.0] {
            let v = pd_as_printed(0.3, snr, 0.8, 10).unwrap();
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn decide_tie_goes_to_absent() {
        let s = |v| EnergyStatistic {
            value: v,
            user_index: 0,
            n_samples: 1,
        };
        assert_eq!(decide(&s(5.0), 4.0), 1);
        assert_eq!(decide(&s(4.0), 4.0), 0);
        assert_eq!(decide(&s(0.0), 0.0), 0);
    }

    #[test]
    fn time_bandwidth_product() {
        let c = DetectorConfig::from_time_bandwidth(100e3, 5e-3).unwrap();
        assert_eq!(c.n_samples, 1000);
        assert_eq!(c.complex_samples().unwrap(), 500);
        assert!(DetectorConfig::from_samples(999).unwrap().complex_samples().is_err());
    }

    #[test]
    fn operating_point_miss_probability() {
        let op = DetectionOperatingPoint::new(0.05, 0.2, 500, 1.0).unwrap();
        assert_eq!(op.p_md, 1.0 - op.p_d);
        assert!(op.p_d >= op.p_fa);
    }

    /// Empirical false alarm at the one cell where the Gaussian threshold is
    /// accurate enough to sit inside 3 binomial standard errors.
    #[test]
    fn empirical_false_alarm_rate() {
        let (n, pfa, trials) = (1000usize, 0.1, 100_000usize);
        let per_dim = 1.0;
        let lambda = threshold_for_pfa(pfa, per_dim, n).unwrap();
        let ch = UserChannel::from_snr(0.0, 2.0 * per_dim).unwrap();
        let sig = generate_qam(n / 2, 4, &mut stream(0, Purpose::Signal, 0, 0)).unwrap();
        let hits = (0..trials)
            .filter(|&t| {
                let mut r = stream(21, Purpose::Noise, t as u64, 0);
                let y = received_samples(Hypothesis::Absent, &sig, &ch, &mut r).unwrap();
                decide(&energy(&y).unwrap(), lambda) == 1
            })
            .count();
        let rate = hits as f64 / trials as f64;
        let se = (pfa * (1.0 - pfa) / trials as f64).sqrt();
        assert!((rate - pfa).abs() < 3.0 * se, "rate = {rate}");
    }
}
