//! Seeded Monte Carlo runs of the full sensing, reporting and fusion chain.
//!
//! Every random draw comes from a stream keyed by the seed, a purpose tag,
//! the trial index and the user index, so results do not depend on how
//! trials are scheduled across threads.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FuserSpec, ScenarioConfig};
use crate::detector::{decide, energy_for_user, threshold_for_pfa};
use crate::error::{Error, Result};
use crate::fusion::{
    adaline_predict, mlp_predict, train_mlp, train_nlms, AdaptiveFuser, FusionInput, MlpFuser, TrainingRecord,
};
use crate::metrics::{auc, confusion, error_histogram, roc_from_scores, ConfusionMatrix, ErrorHistogram, RocCurve};
use crate::reporting::{fusion_feature, recover_hard_bit, transmit_report, Payload, ReportMode, ReportingChannel};
use crate::rng::{stream, Purpose};
use crate::signal::{
    generate_signal, received_samples, Complex, Hypothesis, SumOfSinusoids, UserChannel, FADING_OSCILLATORS,
};

pub const SUMMARY_SCHEMA: &str = "cogsense.summary/1";
pub const FUSER_SCHEMA: &str = "cogsense.fusers/1";

/// Bins of the per-fuser error histogram.
pub const HISTOGRAM_BINS: usize = 20;

/// Everything the fusion center sees from one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub label: u8,
    pub energies: Vec<f64>,
    /// Local decisions made at each user.
    pub local_bits: Vec<u8>,
    /// Per-user features recovered at the fusion center.
    pub features: Vec<f64>,
    /// Per-user bits recovered at the fusion center.
    pub bits: Vec<u8>,
}

/// Fixed per-run quantities shared by all trials.
struct Scenario<'a> {
    config: &'a ScenarioConfig,
    threshold: f64,
    soft_norm: f64,
    channels: Vec<UserChannel>,
    fading: Option<Vec<SumOfSinusoids>>,
    reporting: ReportingChannel,
}

impl<'a> Scenario<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        config.validate()?;
        // Per-dimension noise variance sigma^2 / 2, N real degrees of freedom.
        let dim_var = config.noise_variance / 2.0;
        let threshold = threshold_for_pfa(config.target_pfa, dim_var, config.n_samples)?;
        let channels = config
            .snr_db
            .iter()
            .map(|&s| UserChannel::from_snr_db(s, config.noise_variance))
            .collect::<Result<Vec<_>>>()?;
        let fading = if config.sensing_fading {
            Some(
                (0..config.m_users)
                    .map(|u| {
                        SumOfSinusoids::new(
                            config.max_doppler_hz,
                            FADING_OSCILLATORS,
                            &mut stream(config.seed, Purpose::SensingFading, u as u64, 0),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            config,
            threshold,
            soft_norm: config.n_samples as f64 * dim_var,
            channels,
            fading,
            reporting: config.reporting_channel()?,
        })
    }

    fn trial(&self, trial: usize) -> Result<TrialOutcome> {
        let c = self.config;
        let seed = c.seed;
        let t = trial as u64;
        let label = u8::from(stream(seed, Purpose::Hypothesis, t, 0).gen::<bool>());
        let hypothesis = Hypothesis::from_label(label);
        let signal = generate_signal(c.signal, c.n_samples / 2, &mut stream(seed, Purpose::Signal, t, 0))?;

        let m = c.m_users;
        let mut out = TrialOutcome {
            trial,
            label,
            energies: Vec::with_capacity(m),
            local_bits: Vec::with_capacity(m),
            features: Vec::with_capacity(m),
            bits: Vec::with_capacity(m),
        };
        for (u, base) in self.channels.iter().enumerate() {
            let channel = match &self.fading {
                Some(f) => base.faded(f[u].gain_at(trial as f64 * c.sample_interval_s))?,
                None => *base,
            };
            let y = received_samples(hypothesis, &signal, &channel, &mut stream(seed, Purpose::Noise, t, u as u64))?;
            let stat = energy_for_user(u, &y)?;
            let local = decide(&stat, self.threshold);
            let payload = match c.report_mode {
                ReportMode::Hard => Payload::Hard(local),
                ReportMode::Soft => Payload::Soft(stat.value / self.soft_norm),
            };
            let report = transmit_report(payload, u, &self.reporting, &mut stream(seed, Purpose::Report, t, u as u64))?;
            let feature = fusion_feature(&report);
            let bit = match c.report_mode {
                ReportMode::Hard => recover_hard_bit(&report)?,
                ReportMode::Soft => u8::from(feature > self.threshold / self.soft_norm),
            };
            out.energies.push(stat.value);
            out.local_bits.push(local);
            out.features.push(feature);
            out.bits.push(bit);
        }
        Ok(out)
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

fn run_trials(scenario: &Scenario<'_>, range: std::ops::Range<usize>, threads: Option<usize>) -> Result<Vec<TrialOutcome>> {
    pool(threads)?.install(|| {
        range
            .into_par_iter()
            .map(|t| {
                scenario.trial(t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

/// Simulates every trial of `config` in trial order.
pub fn simulate_trials(config: &ScenarioConfig, threads: Option<usize>) -> Result<Vec<TrialOutcome>> {
    let scenario = Scenario::new(config)?;
    run_trials(&scenario, 0..config.trials, threads)
}

pub fn fusion_inputs(trials: &[TrialOutcome]) -> Vec<FusionInput> {
    trials
        .iter()
        .map(|t| FusionInput::new(&t.features, t.label, t.trial))
        .collect()
}

/// Adaptive fuser parameters fitted on the training trials of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedFusers {
    pub schema: String,
    pub config: ScenarioConfig,
    pub nlms: Option<AdaptiveFuser>,
    pub nlms_record: Option<TrainingRecord>,
    pub mlp: Option<MlpFuser>,
}

impl TrainedFusers {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fusers: Self = serde_json::from_str(&text)?;
        if fusers.schema != FUSER_SCHEMA {
            return Err(Error::Input(format!(
                "{}: schema `{}` is not {FUSER_SCHEMA}",
                path.display(),
                fusers.schema
            )));
        }
        Ok(fusers)
    }
}

fn fit(config: &ScenarioConfig, train: &[TrialOutcome]) -> Result<TrainedFusers> {
    let data = fusion_inputs(train);
    let mut fusers = TrainedFusers {
        schema: FUSER_SCHEMA.into(),
        config: config.clone(),
        nlms: None,
        nlms_record: None,
        mlp: None,
    };
    if config.fuser.contains(&FuserSpec::Nlms) {
        let (f, record) = train_nlms(&data, &config.nlms_params())?;
        log::info!("nlms trained on {} trials, {} updates", data.len(), f.update_count);
        fusers.nlms = Some(f);
        fusers.nlms_record = Some(record);
    }
    if config.fuser.contains(&FuserSpec::Mlp) {
        let f = train_mlp(&data, &config.mlp_params())?;
        log::info!(
            "mlp trained on {} trials, best epoch {} of {}",
            data.len(),
            f.training_record.best_epoch,
            f.training_record.stop_epoch
        );
        fusers.mlp = Some(f);
    }
    Ok(fusers)
}

/// Simulates the training trials only and fits the configured adaptive fusers.
pub fn train_fusers(config: &ScenarioConfig, threads: Option<usize>) -> Result<TrainedFusers> {
    let scenario = Scenario::new(config)?;
    let n_train = config.train_trials();
    if n_train == 0 {
        return Err(Error::Config(
            "`fuser`/`train_fraction`: no adaptive fuser or no training trials to fit".into(),
        ));
    }
    let train = run_trials(&scenario, 0..n_train, threads)?;
    fit(config, &train)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores. Never changes results.
    pub threads: Option<usize>,
    /// Previously trained adaptive fusers used instead of training.
    pub fusers: Option<TrainedFusers>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuserResult {
    pub fuser: FuserSpec,
    pub eval_trials: usize,
    /// `None` when the evaluation trials hold a single hypothesis.
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub detection_rate: Option<f64>,
    pub false_alarm_rate: Option<f64>,
    pub roc_file: String,
    pub roc_points: usize,
    pub training: Option<TrainingRecord>,
    pub error_histogram: Option<ErrorHistogram>,
    /// Score sweep behind `auc`; written to `roc_file`.
    #[serde(skip)]
    pub roc: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    /// Local energy threshold applied at every user.
    pub energy_threshold: f64,
    pub train_trials: usize,
    pub eval_trials: usize,
    /// Fraction of evaluation trials with the primary present.
    pub eval_prevalence: f64,
    pub fusers: Vec<FuserResult>,
    /// Not serialized, so that summaries compare byte for byte.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl RunSummary {
    pub fn fuser(&self, spec: FuserSpec) -> Option<&FuserResult> {
        self.fusers.iter().find(|f| f.fuser == spec)
    }
}

fn evaluate(
    spec: FuserSpec,
    eval: &[TrialOutcome],
    fusers: &TrainedFusers,
) -> Result<FuserResult> {
    let labels: Vec<u8> = eval.iter().map(|t| t.label).collect();
    let mut scores = Vec::with_capacity(eval.len());
    let mut bits = Vec::with_capacity(eval.len());
    let missing = |name: &str| Error::Usage(format!("no trained {name} fuser available"));
    let training = match spec {
        FuserSpec::Hard(rule) => {
            for t in eval {
                let b = rule.apply(&t.bits)?;
                scores.push(f64::from(b));
                bits.push(b);
            }
            None
        }
        FuserSpec::Nlms => {
            let f = fusers.nlms.as_ref().ok_or_else(|| missing("nlms"))?;
            for x in fusion_inputs(eval) {
                let (s, b) = adaline_predict(f, &x.features)?;
                scores.push(s);
                bits.push(b);
            }
            fusers.nlms_record.clone()
        }
        FuserSpec::Mlp => {
            let f = fusers.mlp.as_ref().ok_or_else(|| missing("mlp"))?;
            for t in eval {
                let (s, b) = mlp_predict(f, &t.features)?;
                scores.push(s);
                bits.push(b);
            }
            Some(f.training_record.clone())
        }
    };

    let both = labels.contains(&0) && labels.contains(&1);
    let roc = if both { roc_from_scores(&scores, &labels)? } else { RocCurve::default() };
    let cm = confusion(&bits, &labels)?;
    let error_histogram = if spec.is_adaptive() && !eval.is_empty() {
        let errors: Vec<f64> = labels.iter().zip(&scores).map(|(&d, s)| f64::from(d) - s).collect();
        Some(error_histogram(&errors, HISTOGRAM_BINS)?)
    } else {
        None
    };
    Ok(FuserResult {
        fuser: spec,
        eval_trials: eval.len(),
        auc: both.then(|| auc(&roc)),
        accuracy: cm.accuracy(),
        detection_rate: cm.detection_rate(),
        false_alarm_rate: cm.false_alarm_rate(),
        confusion: cm,
        roc_file: format!("roc_{}.csv", spec.file_stem()),
        roc_points: roc.len(),
        training,
        error_histogram,
        roc,
    })
}

/// Runs the configured scenario. Adaptive fusers are trained on the first
/// `train_fraction` of trials (or taken from `options.fusers`) and every
/// fuser is scored on the remaining trials.
pub fn run_experiment(config: &ScenarioConfig, options: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    let scenario = Scenario::new(config)?;
    let trials = run_trials(&scenario, 0..config.trials, options.threads)?;
    let n_train = config.train_trials();
    let (train, eval) = trials.split_at(n_train);
    log::info!("simulated {} trials ({} train, {} eval)", trials.len(), train.len(), eval.len());

    let fusers = match &options.fusers {
        Some(loaded) => {
            let dims = loaded
                .nlms
                .iter()
                .map(|f| f.weights.len() - 1)
                .chain(loaded.mlp.iter().map(|f| f.input_dim));
            for d in dims {
                if d != config.m_users {
                    return Err(Error::Usage(format!(
                        "loaded fuser expects {d} users, scenario has {}",
                        config.m_users
                    )));
                }
            }
            loaded.clone()
        }
        None if config.fuser.iter().any(FuserSpec::is_adaptive) => fit(config, train)?,
        None => TrainedFusers {
            schema: FUSER_SCHEMA.into(),
            config: config.clone(),
            nlms: None,
            nlms_record: None,
            mlp: None,
        },
    };

    let results = config
        .fuser
        .iter()
        .map(|&spec| evaluate(spec, eval, &fusers))
        .collect::<Result<Vec<_>>>()?;
    let positives = eval.iter().filter(|t| t.label == 1).count();
    let wall_clock_s = start.elapsed().as_secs_f64();
    log::info!("run finished in {wall_clock_s:.3} s");
    Ok(RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        seed: config.seed,
        config: config.clone(),
        energy_threshold: scenario.threshold,
        train_trials: train.len(),
        eval_trials: eval.len(),
        eval_prevalence: if eval.is_empty() { 0.0 } else { positives as f64 / eval.len() as f64 },
        fusers: results,
        wall_clock_s,
    })
}

/// Complex gain of user `user`'s sensing channel at trial `trial`, as used
/// when `sensing_fading` is on.
pub fn sensing_gain(config: &ScenarioConfig, user: usize, trial: usize) -> Result<Complex> {
    let sos = SumOfSinusoids::new(
        config.max_doppler_hz,
        FADING_OSCILLATORS,
        &mut stream(config.seed, Purpose::SensingFading, user as u64, 0),
    )?;
    Ok(sos.gain_at(trial as f64 * config.sample_interval_s))
}
