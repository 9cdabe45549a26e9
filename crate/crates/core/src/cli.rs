//! `algtrend` command line: one binary, one subcommand per pipeline.
//!
//! Every output file is written to a temporary file in the output directory
//! and renamed into place, so a failed run leaves no partial files behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::backtest::{emit_report, walk_forward_detailed, BacktestConfig, ReportFormat};
use crate::error::{invalid, Result};
use crate::forecast::{ForecastConfig, Forecaster};
use crate::gbm::{
    compare_with_white_noise, oscillation_probability, simulate_paths, GbmParams, GENERATOR,
};
use crate::kernel::{build_kernel_bank, EstimatorSpec};
use crate::moments::moment_tracks;
use crate::series::{load_prices, ColumnSpec, PriceSeries};
use crate::trend::{mean_abs, oscillation_score, sliding_trend, OscillationConfig};

#[derive(Debug, Parser)]
#[command(
    name = "algtrend",
    version,
    about = "Trend / quick-fluctuation analysis of daily price series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Trend, derivatives and fluctuation of a price file, plus the oscillation score
    Decompose(Opts),
    /// Rolling std / skewness / kurtosis of the fluctuation
    Moments(Opts),
    /// Trend forecasts, confidence bands and position calls at every origin
    Forecast(Opts),
    /// Walk-forward scoring of the above/under-trend classifier
    Backtest(Opts),
    /// Geometric Brownian motion residual experiment
    Gbm(Opts),
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Price file (delimited text with a header row)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Date column name
    #[arg(long, default_value = "Date")]
    pub date_col: String,
    /// Price column name
    #[arg(long, default_value = "Close")]
    pub price_col: String,
    /// Trend window W [samples]
    #[arg(long, default_value_t = 21)]
    pub window: usize,
    /// Window of the price-forecast kernel [samples]
    #[arg(long, default_value_t = 61)]
    pub fast_window: usize,
    /// Polynomial degree N of both kernels
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Extra integration count kappa (>= 1)
    #[arg(long, default_value_t = 1)]
    pub smoothing: usize,
    /// Moment window M [samples; windows hold M + 1]
    #[arg(long, default_value_t = 100)]
    pub moment_window: usize,
    /// Forecast horizons [samples], comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub horizons: Vec<usize>,
    /// Confidence level of the forecast band, in (0, 1)
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Deadband as a multiple of the forecast std [dimensionless]
    #[arg(long, default_value_t = 0.02)]
    pub deadband_mult: f64,
    /// Shortest subwindow of the oscillation score [samples; default 10, or steps/10 for gbm]
    #[arg(long)]
    pub oscillation_min_window: Option<usize>,
    /// Oscillation threshold [fraction of the mean absolute price]
    #[arg(long, default_value_t = 0.05)]
    pub oscillation_threshold: f64,
    /// GBM drift mu [per unit time]
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    /// GBM volatility sigma [per sqrt(unit time)]
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// GBM initial price S0 [currency]
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    /// GBM horizon T [time units]
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// GBM grid steps
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// GBM ensemble size
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Threshold epsilon on |integral of the residual| [currency x time]
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Seed for all randomness
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of GBM paths to dump as text (0 = none)
    #[arg(long, default_value_t = 0)]
    pub dump_paths: usize,
}

impl Opts {
    fn columns(&self) -> ColumnSpec {
        ColumnSpec {
            date_col: self.date_col.clone(),
            price_col: self.price_col.clone(),
            ..ColumnSpec::default()
        }
    }

    fn series(&self) -> Result<PriceSeries> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| invalid("input", "--input is required for this subcommand"))?;
        load_prices(path, &self.columns())
    }

    fn slow_spec(&self) -> EstimatorSpec {
        EstimatorSpec::new(self.degree, self.window).with_smoothing(self.smoothing)
    }

    fn forecast_config(&self) -> ForecastConfig {
        ForecastConfig {
            slow: self.slow_spec(),
            fast: EstimatorSpec::new(self.degree, self.fast_window).with_smoothing(self.smoothing),
            moment_window: self.moment_window,
            level: self.level,
            deadband_mult: self.deadband_mult,
        }
    }

    fn oscillation(&self, default_min_window: usize) -> OscillationConfig {
        OscillationConfig {
            min_window: self.oscillation_min_window.unwrap_or(default_min_window),
            threshold: self.oscillation_threshold,
            ..OscillationConfig::default()
        }
    }

    fn gbm(&self) -> GbmParams {
        GbmParams {
            mu: self.mu,
            sigma: self.sigma,
            s0: self.s0,
            t_end: self.t_end,
            steps: self.steps,
            paths: self.paths,
            seed: self.seed,
        }
    }

    /// Flag checks that do not need any data.
    fn validate(&self, command: &Command) -> Result<()> {
        if !matches!(command, Command::Gbm(_)) && self.input.is_none() {
            return Err(invalid("input", "--input is required for this subcommand"));
        }
        match command {
            Command::Decompose(_) => self.slow_spec().validate()?,
            Command::Moments(_) => {
                self.slow_spec().validate()?;
                if self.moment_window < 1 {
                    return Err(invalid("moment_window", "M must be at least 1"));
                }
            }
            Command::Forecast(_) | Command::Backtest(_) => BacktestConfig {
                horizons: self.horizons.clone(),
                forecast: self.forecast_config(),
            }
            .validate()?,
            Command::Gbm(_) => {
                self.gbm().validate()?;
                if !(self.epsilon > 0.0) {
                    return Err(invalid("epsilon", "must be positive"));
                }
            }
        }
        if !(self.oscillation_threshold >= 0.0) {
            return Err(invalid("oscillation_threshold", "must be non-negative"));
        }
        Ok(())
    }
}

/// Files produced by a run plus what goes to standard output.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
}

impl Command {
    pub fn opts(&self) -> &Opts {
        match self {
            Command::Decompose(o)
            | Command::Moments(o)
            | Command::Forecast(o)
            | Command::Backtest(o)
            | Command::Gbm(o) => o,
        }
    }
}

fn date_cell(series: &PriceSeries, index: usize) -> String {
    series
        .date(index)
        .map(|d| d.to_string())
        .unwrap_or_default()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.into_inner().map_err(|e| e.into_error().into())
}

fn json_bytes(value: &serde_json::Value) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Compute every output of `command` without touching the filesystem
/// (apart from reading the input).
pub fn execute(command: &Command) -> Result<RunOutput> {
    let opts = command.opts();
    opts.validate(command)?;
    match command {
        Command::Decompose(_) => decompose(opts),
        Command::Moments(_) => moments(opts),
        Command::Forecast(_) => forecast(opts),
        Command::Backtest(_) => backtest(opts),
        Command::Gbm(_) => gbm(opts),
    }
}

fn decompose(opts: &Opts) -> Result<RunOutput> {
    let series = opts.series()?;
    let bank = build_kernel_bank(&opts.slow_spec())?;
    let dec = sliding_trend(&series, &bank)?;
    let rows = (0..dec.len()).map(|k| {
        let i = k + dec.warmup();
        vec![
            i.to_string(),
            date_cell(&series, i),
            dec.price()[k].to_string(),
            dec.trend()[k].to_string(),
            opt_cell(dec.d1().map(|d| d[k])),
            opt_cell(dec.d2().map(|d| d[k])),
            dec.fluctuation()[k].to_string(),
        ]
    });
    let table = csv_bytes(
        &["index", "date", "price", "trend", "d1", "d2", "fluctuation"],
        rows,
    )?;
    let osc = oscillation_score(
        dec.fluctuation(),
        &opts.oscillation(10),
        Some(mean_abs(dec.price())),
    )?;
    let summary = json!({
        "series": series.name(),
        "samples": series.len(),
        "warmup": dec.warmup(),
        "degree": opts.degree,
        "window": opts.window,
        "smoothing": opts.smoothing,
        "noise_gains": bank.noise_gains(),
        "oscillation": osc,
    });
    Ok(RunOutput {
        stdout: format!(
            "{}: {} samples, oscillation score {:.6} (threshold {}) -> {:?}\n",
            series.name(),
            series.len(),
            osc.score,
            osc.threshold,
            osc.verdict
        ),
        files: vec![
            ("decomposition.csv".into(), table),
            ("oscillation.json".into(), json_bytes(&summary)?),
        ],
    })
}

fn moments(opts: &Opts) -> Result<RunOutput> {
    let series = opts.series()?;
    let bank = build_kernel_bank(&opts.slow_spec())?;
    let dec = sliding_trend(&series, &bank)?;
    let track = moment_tracks(dec.fluctuation(), opts.moment_window)?.offset_by(dec.warmup());
    let rows = (0..track.len()).map(|k| {
        let i = k + track.start;
        vec![
            i.to_string(),
            date_cell(&series, i),
            track.std[k].to_string(),
            opt_cell(track.skew[k]),
            opt_cell(track.kurt[k]),
        ]
    });
    let table = csv_bytes(&["index", "date", "std", "skew", "kurt"], rows)?;
    let ratio = track.heteroscedasticity(track.start, track.last_index())?;
    Ok(RunOutput {
        stdout: format!(
            "{}: {} moment values, heteroscedasticity {}\n",
            series.name(),
            track.len(),
            ratio.map_or("undefined".to_string(), |r| format!("{r:.4}"))
        ),
        files: vec![("moments.csv".into(), table)],
    })
}

fn forecast(opts: &Opts) -> Result<RunOutput> {
    let series = opts.series()?;
    let fc = Forecaster::new(&series, &opts.forecast_config())?;
    let mut rows = Vec::new();
    for t in fc.first_origin()..=fc.last_origin() {
        for &h in &opts.horizons {
            let Ok(p) = fc.point(t, h) else { continue };
            rows.push(vec![
                t.to_string(),
                date_cell(&series, t),
                h.to_string(),
                p.trend_hat.to_string(),
                p.lo.to_string(),
                p.hi.to_string(),
                p.position.to_string(),
                p.price_hat.to_string(),
                p.std_hat.to_string(),
            ]);
        }
    }
    let count = rows.len();
    let table = csv_bytes(
        &[
            "index",
            "date",
            "horizon",
            "trend_hat",
            "lo",
            "hi",
            "position",
            "price_hat",
            "std_hat",
        ],
        rows,
    )?;
    Ok(RunOutput {
        stdout: format!(
            "{}: {count} forecasts (gaussian band, level {})\n",
            series.name(),
            opts.level
        ),
        files: vec![("forecast.csv".into(), table)],
    })
}

fn backtest(opts: &Opts) -> Result<RunOutput> {
    let series = opts.series()?;
    let config = BacktestConfig {
        horizons: opts.horizons.clone(),
        forecast: opts.forecast_config(),
    };
    let (report, records) = walk_forward_detailed(&series, &config)?;
    let rows = records.iter().map(|r| {
        vec![
            r.origin.to_string(),
            date_cell(&series, r.origin),
            r.horizon.to_string(),
            r.trend_hat.to_string(),
            r.price_hat.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.position.to_string(),
            r.realized_price.to_string(),
            r.realized_trend.to_string(),
            crate::forecast::Position::from(r.realized).to_string(),
        ]
    });
    let detail = csv_bytes(
        &[
            "index",
            "date",
            "horizon",
            "trend_hat",
            "price_hat",
            "lo",
            "hi",
            "position",
            "realized_price",
            "realized_trend",
            "realized",
        ],
        rows,
    )?;
    Ok(RunOutput {
        stdout: emit_report(&report, ReportFormat::Text),
        files: vec![
            (
                "backtest_report.json".into(),
                emit_report(&report, ReportFormat::Structured).into_bytes(),
            ),
            ("backtest_detail.csv".into(), detail),
        ],
    })
}

fn gbm(opts: &Opts) -> Result<RunOutput> {
    let params = opts.gbm();
    let stat = oscillation_probability(&params, opts.epsilon)?;
    let osc = opts.oscillation((params.steps / 10).max(1));
    let threshold = osc.threshold;
    let comparison = compare_with_white_noise(&params, 0, &osc)?;
    let verdict = stat.verdict_line(threshold);
    let (lo, hi) = stat.interval(1.959_963_984_540_054);
    let summary = json!({
        "params": params,
        "generator": GENERATOR,
        "epsilon": stat.epsilon,
        "p_hat": stat.p_hat,
        "stderr": stat.stderr,
        "paths": stat.paths,
        "ci95_lo": lo,
        "ci95_hi": hi,
        "oscillation_threshold": threshold,
        "verdict": verdict,
        "path0_comparison": comparison,
    });
    let mut files = vec![("gbm_stats.json".to_string(), json_bytes(&summary)?)];
    if opts.dump_paths > 0 {
        let dump = GbmParams {
            paths: opts.dump_paths.min(params.paths),
            ..params
        };
        let paths = simulate_paths(&dump)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..paths.len()).map(|i| format!("path{i}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..=dump.steps).map(|k| {
            let mut row = vec![dump.time(k).to_string()];
            row.extend(paths.iter().map(|p| p[k].to_string()));
            row
        });
        files.push(("gbm_paths.csv".into(), csv_bytes(&header_refs, rows)?));
    }
    Ok(RunOutput {
        stdout: format!(
            "{verdict}\npath 0 oscillation score {:.4}, matched white noise {:.4} (min window {})\n",
            comparison.gbm.score, comparison.white_noise.score, osc.min_window
        ),
        files,
    })
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

/// Run a parsed command: compute everything, then write the files.
pub fn run(cli: &Cli) -> Result<(Vec<PathBuf>, String)> {
    let output = execute(&cli.command)?;
    let dir = &cli.command.opts().out_dir;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        written.push(write_atomic(dir, name, bytes)?);
    }
    Ok((written, output.stdout))
}

/// Binary entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok((_, stdout)) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("algtrend").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let cli = parse(&["backtest", "--input", "x.csv"]);
        let o = cli.command.opts();
        assert_eq!(o.horizons, vec![1, 5]);
        assert_eq!(o.window, 21);
        assert_eq!(o.fast_window, 61);
        assert_eq!(o.moment_window, 100);
        assert_eq!(o.forecast_config(), ForecastConfig::default());
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(Cli::try_parse_from(["algtrend", "decompose", "--bogus", "1"]).is_err());
        assert!(Cli::try_parse_from(["algtrend"]).is_err());
    }

    #[test]
    fn missing_input_rejected_before_work() {
        let cli = parse(&["decompose"]);
        let err = execute(&cli.command).unwrap_err();
        assert!(err.to_string().contains("--input"), "{err}");
    }

    #[test]
    fn flags_validated() {
        let cli = parse(&["backtest", "--input", "x.csv", "--window", "3"]);
        assert!(execute(&cli.command)
            .unwrap_err()
            .to_string()
            .contains("underdetermined"));
        let cli = parse(&["gbm", "--epsilon", "0"]);
        assert!(execute(&cli.command).is_err());
        let cli = parse(&["forecast", "--input", "x.csv", "--level", "1.5"]);
        assert!(execute(&cli.command).is_err());
    }

    #[test]
    fn help_lists_defaults() {
        use clap::CommandFactory;
        let mut cmd = Cli::command();
        let help = cmd
            .find_subcommand_mut("backtest")
            .unwrap()
            .render_long_help()
            .to_string();
        for flag in [
            "--input",
            "--out-dir",
            "--date-col",
            "--price-col",
            "--window",
            "--fast-window",
            "--degree",
            "--smoothing",
            "--moment-window",
            "--horizons",
            "--level",
            "--deadband-mult",
            "--oscillation-min-window",
            "--oscillation-threshold",
            "--mu",
            "--sigma",
            "--s0",
            "--t-end",
            "--steps",
            "--paths",
            "--epsilon",
            "--seed",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
        assert!(help.contains("[default: 21]"));
        assert!(help.contains("[samples]"));
    }
}
