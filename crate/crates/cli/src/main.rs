use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cogsense::config::parse_fuser_list;
use cogsense::experiment::{run_experiment, train_fusers, RunOptions, RunSummary, TrainedFusers};
use cogsense::output::{emit_outputs, format_sig, load_summary};
use cogsense::signal::db_to_linear;
use cogsense::{pd_as_printed, pd_theoretical, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cogsense", version, about = "Cooperative spectrum sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write ROC, confusion, training and summary files.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Use fusers saved by `train` instead of training.
        #[arg(long, value_name = "FILE")]
        load_fuser: Option<PathBuf>,
    },
    /// Analytic detection probability over a false-alarm grid.
    Roc {
        /// `start:stop:count`, inclusive on both ends.
        #[arg(long, default_value = "0.01:0.99:99")]
        pfa_grid: String,
        /// Comma-separated SNRs in dB; `-inf` gives the zero-SNR curve.
        #[arg(long, default_value = "-10", allow_hyphen_values = true)]
        snr_db: String,
        /// Real sample count N = 2BT.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Add the as-printed expression as an extra column.
        #[arg(long)]
        printed: bool,
        /// Noise standard deviation used by the as-printed expression.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Output CSV file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the adaptive fusers on a scenario's training trials and save them.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Output JSON file.
        #[arg(long, default_value = "fusers.json")]
        out: PathBuf,
    },
    /// Print a saved summary.json.
    Report {
        summary: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file in `key = value` format.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the fuser list, e.g. `majority,nlms,mlp`.
    #[arg(long)]
    fusers: Option<String>,
    /// Worker threads (speed only, results do not change).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut config = ScenarioConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(list) = &self.fusers {
            config.fuser = parse_fuser_list(list)?;
        }
        config.validate()?;
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        Ok(config)
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else {
        bail!("--pfa-grid `{spec}`: expected start:stop:count");
    };
    let (a, b): (f64, f64) = (a.parse()?, b.parse()?);
    let n: usize = n.parse().with_context(|| format!("--pfa-grid count `{n}`"))?;
    if n == 0 || !(a > 0.0 && b < 1.0 && a <= b) {
        bail!("--pfa-grid `{spec}`: need 0 < start <= stop < 1 and count >= 1");
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn parse_snrs(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().with_context(|| format!("--snr-db value `{s}`"))
        })
        .collect()
}

fn roc_table(grid: &[f64], snrs: &[f64], n: usize, printed: bool, sigma: f64) -> Result<String> {
    let mut s = String::from("snr_db,p_fa,p_d");
    if printed {
        s.push_str(",p_d_printed");
    }
    s.push('\n');
    for &snr_db in snrs {
        let snr = db_to_linear(snr_db);
        for &p in grid {
            let pd = pd_theoretical(p, snr, n)?;
            s.push_str(&format!("{},{},{}", format_sig(snr_db), format_sig(p), format_sig(pd)));
            if printed {
                s.push_str(&format!(",{}", format_sig(pd_as_printed(p, snr, sigma, n)?)));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

fn print_report(summary: &RunSummary) {
    let c = &summary.config;
    println!(
        "seed {}  users {}  N {}  target P_f {}  trials {} ({} train, {} eval)",
        summary.seed, c.m_users, c.n_samples, c.target_pfa, c.trials, summary.train_trials, summary.eval_trials
    );
    println!("{:<12} {:>9} {:>9} {:>9} {:>9}", "fuser", "auc", "accuracy", "p_d", "p_fa");
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    for r in &summary.fusers {
        println!(
            "{:<12} {:>9} {:>9} {:>9} {:>9}",
            r.fuser.to_string(),
            cell(r.auc),
            cell(Some(r.accuracy)),
            cell(r.detection_rate),
            cell(r.false_alarm_rate)
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, out, load_fuser } => {
            let config = run.load()?;
            let fusers = load_fuser.as_ref().map(TrainedFusers::load).transpose()?;
            let options = RunOptions {
                threads: run.threads,
                fusers,
            };
            let summary = run_experiment(&config, &options)?;
            let files = emit_outputs(&summary, &out)?;
            log::info!("wrote {} files to {}", files.len(), out.display());
            print_report(&summary);
        }
        Command::Roc {
            pfa_grid,
            snr_db,
            n,
            printed,
            sigma,
            out,
        } => {
            let table = roc_table(&parse_grid(&pfa_grid)?, &parse_snrs(&snr_db)?, n, printed, sigma)?;
            match out {
                Some(path) => fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(table.as_bytes())?,
            }
        }
        Command::Train { run, out } => {
            let config = run.load()?;
            let fusers = train_fusers(&config, run.threads)?;
            fusers.save(&out)?;
            log::info!("saved fusers to {}", out.display());
        }
        Command::Report { summary } => print_report(&load_summary(&summary)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COGSENSE_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.01:0.99:99").unwrap();
        assert_eq!(g.len(), 99);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[98] - 0.99).abs() < 1e-15);
        assert_eq!(parse_grid("0.2:0.2:1").unwrap(), vec![0.2]);
        assert!(parse_grid("0:1:5").is_err());
        assert!(parse_grid("0.1:0.2").is_err());
    }

    #[test]
    fn zero_snr_rows_match_pfa() {
        let t = roc_table(&parse_grid("0.1:0.9:9").unwrap(), &[f64::NEG_INFINITY], 1000, true, 1.0).unwrap();
        for line in t.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0], "-inf");
            assert_eq!(cols[1], cols[2]);
            assert_ne!(cols[2], cols[3]);
        }
    }

    #[test]
    fn snr_list_accepts_negative_infinity() {
        assert_eq!(parse_snrs("-10, -inf").unwrap(), vec![-10.0, f64::NEG_INFINITY]);
        assert!(parse_snrs("loud").is_err());
    }
}
