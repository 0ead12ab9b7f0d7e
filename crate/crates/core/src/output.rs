//! CSV and JSON files for a finished run.
//!
//! All files are rendered and checked in memory first, then written to
//! temporary names and renamed, so a failed emission leaves no partial
//! output behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiment::{FuserResult, RunSummary};
use crate::metrics::RocCurve;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `%g`-style rendering with 9 significant digits: fixed notation for
/// decimal exponents in `[-5, 9)`, scientific otherwise, trailing zeros
/// dropped.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("round trip of formatted float")
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64"));
            *v = serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("threshold,p_fa,p_d\n");
    for p in &curve.points {
        s.push_str(&format!("{},{},{}\n", format_sig(p.threshold), format_sig(p.p_fa), format_sig(p.p_d)));
    }
    s
}

pub fn confusion_csv(result: &FuserResult) -> String {
    let c = &result.confusion;
    let p = c.percentages();
    let mut s = String::from("cell,count,percent\n");
    for (name, count, pct) in [
        ("true_positive", c.true_positive, p.true_positive),
        ("false_positive", c.false_positive, p.false_positive),
        ("false_negative", c.false_negative, p.false_negative),
        ("true_negative", c.true_negative, p.true_negative),
    ] {
        s.push_str(&format!("{name},{count},{}\n", format_sig(pct)));
    }
    s
}

pub fn training_csv(result: &FuserResult) -> Option<String> {
    let record = result.training.as_ref()?;
    let mut s = String::from("epoch,train_mse,val_mse,test_mse,grad_norm\n");
    for e in &record.epochs {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch,
            format_sig(e.train_mse),
            opt(e.val_mse),
            opt(e.test_mse),
            format_sig(e.grad_norm)
        ));
    }
    Some(s)
}

pub fn summary_json(summary: &RunSummary) -> Result<String> {
    let mut v = serde_json::to_value(summary)?;
    round_json(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn check_rate(name: &str, x: Option<f64>) -> Result<()> {
    match x {
        Some(r) if !(0.0..=1.0).contains(&r) => Err(Error::Input(format!("{name} = {r} outside [0, 1]"))),
        _ => Ok(()),
    }
}

fn validate(summary: &RunSummary) -> Result<()> {
    if summary.fusers.is_empty() {
        return Err(Error::Input("summary holds no fuser results".into()));
    }
    for r in &summary.fusers {
        if r.eval_trials == 0 || r.confusion.total() == 0 {
            return Err(Error::Input(format!("fuser `{}` has no evaluation trials", r.fuser)));
        }
        if r.auc.is_some() {
            r.roc.validate()?;
        }
        for (name, x) in [
            ("auc", r.auc),
            ("accuracy", Some(r.accuracy)),
            ("detection_rate", r.detection_rate),
            ("false_alarm_rate", r.false_alarm_rate),
        ] {
            check_rate(name, x)?;
        }
    }
    Ok(())
}

/// Every file of a summary as `(file name, contents)`, in write order.
pub fn render_outputs(summary: &RunSummary) -> Result<Vec<(String, String)>> {
    validate(summary)?;
    let mut files = Vec::new();
    for r in &summary.fusers {
        let stem = r.fuser.file_stem();
        files.push((r.roc_file.clone(), roc_csv(&r.roc)));
        files.push((format!("confusion_{stem}.csv"), confusion_csv(r)));
        if let Some(t) = training_csv(r) {
            files.push((format!("training_{stem}.csv"), t));
        }
    }
    files.push(("summary.json".into(), summary_json(summary)?));
    Ok(files)
}

/// Writes the run's files into `out_dir`, creating it if needed, and
/// returns their paths.
pub fn emit_outputs(summary: &RunSummary, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    let files = render_outputs(summary)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut staged = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, contents) in &files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (i, (tmp, dst)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, dst) {
            cleanup(&staged[i..]);
            return Err(Error::io(dst.clone(), e));
        }
    }
    Ok(staged.into_iter().map(|(_, dst)| dst).collect())
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<RunSummary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FuserSpec, ScenarioConfig};
    use crate::experiment::{run_experiment, RunOptions};
    use crate::fusion::HardRule;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(123456789.4), "123456789");
        assert_eq!(format_sig(1234567891.0), "1.23456789e9");
        assert_eq!(format_sig(-2.5e-7), "-2.5e-7");
        assert_eq!(format_sig(1e-5), "0.00001");
        assert_eq!(format_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333);
    }

    fn summary() -> RunSummary {
        let c = ScenarioConfig {
            fuser: vec![FuserSpec::Hard(HardRule::Majority), FuserSpec::Nlms],
            ..ScenarioConfig::new(vec![-3.0; 3], 200, 5)
        };
        run_experiment(&c, &RunOptions::default()).unwrap()
    }

    #[test]
    fn roc_rows_are_distinct_scores_plus_two() {
        let s = summary();
        let files = render_outputs(&s).unwrap();
        let nlms = &s.fusers[1];
        let roc = &files.iter().find(|(n, _)| *n == nlms.roc_file).unwrap().1;
        let mut distinct: Vec<f64> = nlms.roc.points.iter().map(|p| p.threshold).collect();
        distinct.dedup();
        assert_eq!(roc.lines().count() - 1, distinct.len());
        assert_eq!(distinct.len(), nlms.roc_points);
        assert!(roc.lines().nth(1).unwrap().starts_with("inf,0,0"));
        assert!(roc.lines().last().unwrap().starts_with("-inf,1,1"));
    }

    #[test]
    fn emission_is_byte_identical() {
        let s = summary();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = emit_outputs(&s, a.path()).unwrap();
        emit_outputs(&s, b.path()).unwrap();
        for p in &fa {
            let name = p.file_name().unwrap();
            assert_eq!(fs::read(p).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        assert!(fa.iter().any(|p| p.ends_with("training_nlms.csv")));
        assert!(!fa.iter().any(|p| p.ends_with("training_majority.csv")));
        let back = load_summary(a.path().join("summary.json")).unwrap();
        assert_eq!(back.fusers.len(), 2);
        assert_eq!(summary_json(&back).unwrap(), fs::read_to_string(a.path().join("summary.json")).unwrap());
    }

    #[test]
    fn no_evaluation_trials_writes_nothing() {
        let mut s = summary();
        s.fusers[1].eval_trials = 0;
        s.fusers[1].confusion = Default::default();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(emit_outputs(&s, &out).is_err());
        assert!(!out.exists());
    }
}
