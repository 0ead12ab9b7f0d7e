//! Primary-user signals, receiver noise and Rayleigh fading.
//!
//! Each secondary user observes, per sample `k`,
//!
//! ```text
//! H0: y(k) = n(k)
//! H1: y(k) = h * d(k) + n(k)
//! ```
//!
//! where `d` is the primary signal (unit average power), `h` the sensing
//! channel gain and `n ~ CN(0, sigma^2)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Number of oscillators per quadrature in the sum-of-sinusoids generator.
pub const FADING_OSCILLATORS: usize = 64;

/// Binary sensing hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// H0: the primary user is absent.
    Absent,
    /// H1: the primary user is present.
    Present,
}

impl Hypothesis {
    pub fn from_label(label: u8) -> Self {
        if label == 0 {
            Hypothesis::Absent
        } else {
            Hypothesis::Present
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Hypothesis::Absent => 0,
            Hypothesis::Present => 1,
        }
    }
}

/// Waveform model for the primary transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// 4-QAM with constant unit symbol power.
    Qam4,
    /// Circularly-symmetric complex Gaussian with unit power.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimarySignal {
    pub samples: Vec<Complex>,
    /// Constellation size, or 0 for the Gaussian waveform.
    pub modulation_order: u32,
}

impl PrimarySignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

/// Average of `|s|^2` over a sequence (0 for an empty one).
pub fn mean_power(samples: &[Complex]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// The four 4-QAM points `(±1 ± j)/√2`, indexed by two bits.
pub const QAM4_POINTS: [Complex; 4] = [
    Complex::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// `n` independent, uniformly drawn constellation points.
///
/// Only `order = 4` is supported.
pub fn generate_qam<R: Rng + ?Sized>(n: usize, order: u32, rng: &mut R) -> Result<PrimarySignal> {
    if order != 4 {
        return Err(Error::Config(format!(
            "unsupported modulation order {order}; only 4-QAM is implemented"
        )));
    }
    if n == 0 {
        return Err(Error::Config("signal length must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity(n);
    // 32 symbols per random word.
    while samples.len() < n {
        let mut word: u64 = rng.gen();
        for _ in 0..32.min(n - samples.len()) {
            samples.push(QAM4_POINTS[(word & 3) as usize]);
            word >>= 2;
        }
    }
    Ok(PrimarySignal {
        samples,
        modulation_order: 4,
    })
}

/// Unit-power complex Gaussian primary signal.
pub fn generate_gaussian_signal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PrimarySignal> {
    if n == 0 {
        return Err(Error::Config("signal length must be at least 1".into()));
    }
    Ok(PrimarySignal {
        samples: generate_awgn(n, 1.0, rng)?,
        modulation_order: 0,
    })
}

pub fn generate_signal<R: Rng + ?Sized>(kind: SignalKind, n: usize, rng: &mut R) -> Result<PrimarySignal> {
    match kind {
        SignalKind::Qam4 => generate_qam(n, 4, rng),
        SignalKind::Gaussian => generate_gaussian_signal(n, rng),
    }
}

/// I.i.d. `CN(0, variance)` samples; each of the real and imaginary parts
/// carries `variance / 2`.
pub fn generate_awgn<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Result<Vec<Complex>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Config(format!(
            "noise variance must be finite and >= 0, got {variance}"
        )));
    }
    if n == 0 {
        return Err(Error::Config("noise length must be at least 1".into()));
    }
    if variance == 0.0 {
        return Ok(vec![Complex::new(0.0, 0.0); n]);
    }
    let sd = (variance / 2.0).sqrt();
    Ok((0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(sd * re, sd * im)
        })
        .collect())
}

/// Sensing channel between the primary transmitter and one secondary user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    pub gain_h: Complex,
    pub noise_variance: f64,
    /// Linear SNR `|h|^2 / sigma^2` for a unit-power signal.
    pub snr: f64,
}

impl UserChannel {
    pub fn new(gain_h: Complex, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::Config(format!(
                "sensing noise variance must be finite and > 0, got {noise_variance}"
            )));
        }
        if !gain_h.re.is_finite() || !gain_h.im.is_finite() {
            return Err(Error::Config("sensing channel gain must be finite".into()));
        }
        Ok(Self {
            gain_h,
            noise_variance,
            snr: gain_h.norm_sqr() / noise_variance,
        })
    }

    /// Real, positive gain chosen to realize the given linear SNR.
    pub fn from_snr(snr: f64, noise_variance: f64) -> Result<Self> {
        if !(snr >= 0.0) || !snr.is_finite() {
            return Err(Error::Config(format!("SNR must be finite and >= 0, got {snr}")));
        }
        Self::new(Complex::new((snr * noise_variance).sqrt(), 0.0), noise_variance)
    }

    pub fn from_snr_db(snr_db: f64, noise_variance: f64) -> Result<Self> {
        Self::from_snr(db_to_linear(snr_db), noise_variance)
    }

    /// The same channel scaled by a (fading) factor.
    pub fn faded(&self, factor: Complex) -> Result<Self> {
        Self::new(self.gain_h * factor, self.noise_variance)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Received samples of one user under the given hypothesis.
pub fn received_samples<R: Rng + ?Sized>(
    hypothesis: Hypothesis,
    signal: &PrimarySignal,
    channel: &UserChannel,
    rng: &mut R,
) -> Result<Vec<Complex>> {
    if signal.is_empty() {
        return Err(Error::Input("primary signal is empty".into()));
    }
    let mut y = generate_awgn(signal.len(), channel.noise_variance, rng)?;
    if hypothesis == Hypothesis::Present {
        for (y, d) in y.iter_mut().zip(&signal.samples) {
            *y += channel.gain_h * d;
        }
    }
    Ok(y)
}

/// Clarke-model sum-of-sinusoids fading simulator.
///
/// Oscillator angles are spread evenly over a quarter circle with one random
/// offset, the in-phase and quadrature branches get independent random
/// phases. The time-averaged autocorrelation then follows `J0(2π f_d τ)`
/// closely for a handful of oscillators, and the gain can be evaluated at any
/// instant without stepping through the preceding samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SumOfSinusoids {
    max_doppler_hz: f64,
    /// Angular frequencies of the in-phase oscillators, rad/s.
    freq_i: Vec<f64>,
    freq_q: Vec<f64>,
    phase_i: Vec<f64>,
    phase_q: Vec<f64>,
}

impl SumOfSinusoids {
    pub fn new<R: Rng + ?Sized>(max_doppler_hz: f64, oscillators: usize, rng: &mut R) -> Result<Self> {
        if !(max_doppler_hz > 0.0) || !max_doppler_hz.is_finite() {
            return Err(Error::Config(format!(
                "maximum Doppler shift must be finite and > 0, got {max_doppler_hz}"
            )));
        }
        if oscillators == 0 {
            return Err(Error::Config("at least one oscillator is required".into()));
        }
        let m = oscillators as f64;
        let omega_d = 2.0 * PI * max_doppler_hz;
        let offset = rng.gen_range(-PI..PI);
        let mut freq_i = Vec::with_capacity(oscillators);
        let mut freq_q = Vec::with_capacity(oscillators);
        for n in 1..=oscillators {
            let alpha = (2.0 * PI * n as f64 - PI + offset) / (4.0 * m);
            freq_i.push(omega_d * alpha.cos());
            freq_q.push(omega_d * alpha.sin());
        }
        let phase_i = (0..oscillators).map(|_| rng.gen_range(-PI..PI)).collect();
        let phase_q = (0..oscillators).map(|_| rng.gen_range(-PI..PI)).collect();
        Ok(Self {
            max_doppler_hz,
            freq_i,
            freq_q,
            phase_i,
            phase_q,
        })
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.max_doppler_hz
    }

    /// Complex gain at time `t` seconds; unit mean power.
    pub fn gain_at(&self, t: f64) -> Complex {
        let mut re = 0.0;
        let mut im = 0.0;
        for (w, p) in self.freq_i.iter().zip(&self.phase_i) {
            re += (w * t + p).cos();
        }
        for (w, p) in self.freq_q.iter().zip(&self.phase_q) {
            im += (w * t + p).sin();
        }
        Complex::new(re, im) / (self.freq_i.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingProcess {
    pub gains: Vec<Complex>,
    pub max_doppler_hz: f64,
    pub sample_interval_s: f64,
}

impl FadingProcess {
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.gains)
    }

    pub fn envelope(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g.norm()).collect()
    }
}

/// `n` samples of a unit-power Rayleigh fading process at interval `T_s`.
pub fn generate_fading<R: Rng + ?Sized>(
    n: usize,
    max_doppler_hz: f64,
    sample_interval_s: f64,
    rng: &mut R,
) -> Result<FadingProcess> {
    if n == 0 {
        return Err(Error::Config("fading length must be at least 1".into()));
    }
    if !(sample_interval_s > 0.0) || !sample_interval_s.is_finite() {
        return Err(Error::Config(format!(
            "sample interval must be finite and > 0, got {sample_interval_s}"
        )));
    }
    let product = max_doppler_hz * sample_interval_s;
    if !(product < 0.5) {
        return Err(Error::Config(format!(
            "max_doppler_hz * sample_interval_s = {product} must be < 0.5"
        )));
    }
    let sim = SumOfSinusoids::new(max_doppler_hz, FADING_OSCILLATORS, rng)?;
    let gains = (0..n).map(|k| sim.gain_at(k as f64 * sample_interval_s)).collect();
    Ok(FadingProcess {
        gains,
        max_doppler_hz,
        sample_interval_s,
    })
}

/// Normalized real autocorrelation `Re E[g*(k) g(k+l)] / E|g|^2` for each lag.
pub fn autocorrelation(gains: &[Complex], lags: &[usize]) -> Vec<f64> {
    let power = mean_power(gains);
    lags.iter()
        .map(|&lag| {
            if lag >= gains.len() || power == 0.0 {
                return f64::NAN;
            }
            let count = gains.len() - lag;
            let acc: f64 = gains
                .iter()
                .zip(&gains[lag..])
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            acc / count as f64 / power
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn rng(seed: u64) -> crate::rng::SimRng {
        stream(seed, Purpose::Signal, 0, 0)
    }

    #[test]
    fn qam_points_are_unit_power() {
        let s = generate_qam(1000, 4, &mut rng(1)).unwrap();
        assert!(s.samples.iter().all(|x| QAM4_POINTS.contains(x)));
        for p in QAM4_POINTS {
            assert!((p.norm_sqr() - 1.0).abs() < 1e-15);
        }
        // All four points show up.
        for p in QAM4_POINTS {
            assert!(s.samples.contains(&p));
        }
    }

    #[test]
    fn qam_rejects_other_orders() {
        assert!(matches!(generate_qam(1, 8, &mut rng(1)), Err(Error::Config(_))));
        assert!(matches!(generate_qam(0, 4, &mut rng(1)), Err(Error::Config(_))));
    }

    #[test]
    fn qam_mean_power() {
        let s = generate_qam(100_000, 4, &mut rng(2)).unwrap();
        assert!((s.mean_power() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn awgn_zero_variance_is_zero() {
        let z = generate_awgn(3, 0.0, &mut rng(3)).unwrap();
        assert_eq!(z, vec![Complex::new(0.0, 0.0); 3]);
        assert!(generate_awgn(3, -1.0, &mut rng(3)).is_err());
    }

    #[test]
    fn awgn_moments() {
        let z = generate_awgn(100_000, 2.0, &mut rng(4)).unwrap();
        let n = z.len() as f64;
        let mean_re = z.iter().map(|c| c.re).sum::<f64>() / n;
        let var_re = z.iter().map(|c| (c.re - mean_re).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var_re - 1.0).abs() < 0.05, "var_re = {var_re}");

        let z = generate_awgn(100_000, 1.0, &mut rng(5)).unwrap();
        assert!((mean_power(&z) - 1.0).abs() < 0.02);
    }

    #[test]
    fn received_under_each_hypothesis() {
        let s = generate_qam(64, 4, &mut rng(6)).unwrap();
        let silent = UserChannel {
            gain_h: Complex::new(1.0, 0.0),
            noise_variance: 0.0,
            snr: f64::INFINITY,
        };
        let y0 = received_samples(Hypothesis::Absent, &s, &silent, &mut rng(7)).unwrap();
        assert!(y0.iter().all(|y| *y == Complex::new(0.0, 0.0)));
        let y1 = received_samples(Hypothesis::Present, &s, &silent, &mut rng(7)).unwrap();
        assert_eq!(y1, s.samples);
    }

    #[test]
    fn received_snr_at_zero_db() {
        let n = 100_000;
        let s = generate_qam(n, 4, &mut rng(8)).unwrap();
        let ch = UserChannel::new(Complex::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(ch.snr, 1.0);
        let y = received_samples(Hypothesis::Present, &s, &ch, &mut rng(9)).unwrap();
        let noise: Vec<Complex> = y.iter().zip(&s.samples).map(|(y, s)| y - s).collect();
        let snr = s.mean_power() / mean_power(&noise);
        assert!((snr - 1.0).abs() < 0.05, "snr = {snr}");
    }

    #[test]
    fn user_channel_snr_consistency() {
        let ch = UserChannel::from_snr_db(-10.0, 2.5).unwrap();
        let implied = ch.gain_h.norm_sqr() / ch.noise_variance;
        assert!((implied - ch.snr).abs() <= 1e-12 * ch.snr);
        assert!((ch.snr - 0.1).abs() < 1e-12);
        let faded = ch.faded(Complex::new(0.3, -0.4)).unwrap();
        assert!((faded.snr - 0.1 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_signal_rejected() {
        let s = PrimarySignal {
            samples: vec![],
            modulation_order: 4,
        };
        let ch = UserChannel::from_snr(1.0, 1.0).unwrap();
        assert!(matches!(
            received_samples(Hypothesis::Present, &s, &ch, &mut rng(1)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn fading_rejects_undersampling() {
        assert!(matches!(
            generate_fading(10, 100.0, 1e-2, &mut rng(1)),
            Err(Error::Config(_))
        ));
        assert!(generate_fading(10, 100.0, 1e-5, &mut rng(1)).is_ok());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_fading(1000, 100.0, 1e-5, &mut rng(11)).unwrap();
        let b = generate_fading(1000, 100.0, 1e-5, &mut rng(11)).unwrap();
        assert_eq!(a, b);
        let c = generate_awgn(100, 1.0, &mut rng(12)).unwrap();
        let d = generate_awgn(100, 1.0, &mut rng(12)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn autocorrelation_at_lag_zero_is_one() {
        let f = generate_fading(10_000, 100.0, 1e-5, &mut rng(13)).unwrap();
        let r = autocorrelation(&f.gains, &[0, 10]);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(r[1] < 1.0);
    }
}
