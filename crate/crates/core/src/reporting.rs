//! Reporting channel between each secondary user and the fusion center.
//!
//! A report `d` (energy statistic for soft fusion, decision bit for hard
//! fusion) arrives as `y = f d + eta`, with a fresh `f ~ CN(0, sigma_f^2)`
//! and `eta ~ CN(0, sigma_eta^2)` per report. Hard bits use on-off signaling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Complex;

/// Fading magnitude at or below which a report cannot be equalized.
pub const DEEP_FADE_FLOOR: f64 = 1e-9;

/// Equalized-value threshold for recovering an on-off keyed bit.
pub const HARD_BIT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportingChannel {
    pub fading_variance: f64,
    /// Zero is accepted and gives a noiseless link.
    pub noise_variance: f64,
    pub csi_known: bool,
}

impl ReportingChannel {
    pub fn new(fading_variance: f64, noise_variance: f64, csi_known: bool) -> Result<Self> {
        if !(fading_variance > 0.0 && fading_variance.is_finite()) {
            return Err(Error::Config(format!(
                "reporting fading variance must be finite and > 0, got {fading_variance}"
            )));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "reporting noise variance must be finite and >= 0, got {noise_variance}"
            )));
        }
        Ok(Self {
            fading_variance,
            noise_variance,
            csi_known,
        })
    }
}

/// What a user sends to the fusion center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Soft(f64),
    Hard(u8),
}

impl Payload {
    pub fn mode(&self) -> ReportMode {
        match self {
            Payload::Soft(_) => ReportMode::Soft,
            Payload::Hard(_) => ReportMode::Hard,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Payload::Soft(v) => v,
            Payload::Hard(b) => f64::from(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub mode: ReportMode,
    pub payload: f64,
    pub received: Complex,
    /// Present iff the fusion center has channel state for this report.
    pub fading_gain: Option<Complex>,
    pub user_index: usize,
}

fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(sd * re, sd * im)
}

pub fn transmit_report<R: Rng + ?Sized>(
    payload: Payload,
    user_index: usize,
    channel: &ReportingChannel,
    rng: &mut R,
) -> Result<Report> {
    match payload {
        Payload::Soft(v) if !(v >= 0.0 && v.is_finite()) => {
            return Err(Error::Input(format!("soft payload must be finite and >= 0, got {v}")));
        }
        Payload::Hard(b) if b > 1 => {
            return Err(Error::Input(format!("hard payload must be 0 or 1, got {b}")));
        }
        _ => {}
    }
    let f = complex_gaussian(channel.fading_variance, rng);
    // Draw noise even at zero variance so the stream layout does not depend on it.
    let eta = complex_gaussian(channel.noise_variance, rng);
    Ok(Report {
        mode: payload.mode(),
        payload: payload.value(),
        received: f * payload.value() + eta,
        fading_gain: channel.csi_known.then_some(f),
        user_index,
    })
}

/// Coherent estimate `Re(y conj(f) / |f|^2)` of the payload.
pub fn equalize(report: &Report) -> Result<f64> {
    let f = report
        .fading_gain
        .ok_or_else(|| Error::Usage("equalization needs channel state (csi_known = false)".into()))?;
    let magnitude = f.norm();
    if magnitude <= DEEP_FADE_FLOOR {
        return Err(Error::DeepFade { magnitude });
    }
    Ok((report.received * f.conj()).re / f.norm_sqr())
}

/// Bit estimate for a hard report.
///
/// With channel state: equalized value above 0.5, and a deep fade erases to 0.
/// Without it: on-off envelope detection, `|y| > 0.5`.
pub fn recover_hard_bit(report: &Report) -> Result<u8> {
    if report.mode != ReportMode::Hard {
        return Err(Error::Usage("recover_hard_bit called on a soft report".into()));
    }
    if report.fading_gain.is_none() {
        return Ok(u8::from(report.received.norm() > HARD_BIT_THRESHOLD));
    }
    match equalize(report) {
        Ok(v) => Ok(u8::from(v > HARD_BIT_THRESHOLD)),
        Err(Error::DeepFade { .. }) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Per-user feature at the fusion center: the equalized value when channel
/// state is known (0 on a deep fade), otherwise the envelope `|y|`.
pub fn fusion_feature(report: &Report) -> f64 {
    match report.fading_gain {
        Some(_) => equalize(report).unwrap_or(0.0),
        None => report.received.norm(),
    }
}
