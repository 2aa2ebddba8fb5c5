//! Command-line driver.
//!
//! Every command reads its settings from flags, falling back to an optional
//! `key = value` config file (`--config`), falling back to defaults. Reports
//! are pretty-printed JSON, curves are `date,value` CSV, and a short summary
//! goes to standard output. Nothing time-dependent is written, so a seeded
//! invocation always produces the same bytes.
//!
//! Exit codes: 0 success, 2 usage or settings error, 3 unreadable or invalid
//! input, 4 failure while running.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{
    chain_periods, long_short_ratio, run_buy_and_hold, DelistingPolicy, EquityCurve, PortfolioSpec, Weighting,
};
use crate::error::Error;
use crate::marketdata::{ingest_csv, MarketDataset};
use crate::metrics::{period_returns, two_sample_t_pooled, Frequency, MetricsReport, RiskFreeSeries, TTest, TRADING_DAYS_PER_YEAR};
use crate::randomstrat::{percentile_score, run_ensemble, DurationModel, EnsembleReport, Metric, RandomStrategyConfig};
use crate::synthmarket::{calibrate_hazard, simulate_market, SynthConfig, SynthMetadata, EXIT_QUANTILES};
use crate::theory::{
    delta_bias, delta_bias_unhalved, expected_sample_utility, k_factor, mc_estimated_bias, mc_ew_vs_markowitz,
    omega_sigma_inv_omega, sharpe_sq_ew, sharpe_sq_star, BiasModel, BiasMonteCarlo, DiversificationMonteCarlo,
};
use crate::universe::{select_period_universe, Period, SelectionMode, UniverseSnapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// The eight ten-year periods 1927-1936 through 1997-2006.
pub const PAPER_DECADES: &str = include_str!("../configs/paper-decades.conf");

#[derive(Debug, Parser)]
#[command(name = "lookahead", version, about = "Look-ahead benchmark bias experiments")]
pub struct Cli {
    /// Master seed for every random draw [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving reports and series [default: lookahead-out]
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Plain-text `key = value` settings; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a price dataset and optionally export universe snapshots
    Ingest(IngestArgs),
    /// Generate a synthetic market with calibrated exits
    Synth(SynthArgs),
    /// Compare ex-ante and ex-post portfolios over one or more periods
    Backtest(BacktestArgs),
    /// Closed-form and Monte-Carlo estimation bias for a two-dataset model
    Theory(TheoryArgs),
    /// Rank a candidate strategy against random strategies on the same data
    RandomBench(RandomBenchArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Period START:END for snapshot export
    #[arg(long, value_parser = parse_period)]
    pub period: Option<Period>,
    /// Snapshot size [default: 500]
    #[arg(long)]
    pub top_n: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    /// Firms listed on the first day [default: 1000]
    #[arg(long)]
    pub firms: Option<usize>,
    /// Horizon in years [default: 80]
    #[arg(long)]
    pub years: Option<f64>,
    /// [default: 252]
    #[arg(long)]
    pub trading_days_per_year: Option<u32>,
    /// Annual log-price drift [default: 0.08]
    #[arg(long)]
    pub drift: Option<f64>,
    /// Annual volatility [default: 0.30]
    #[arg(long)]
    pub volatility: Option<f64>,
    /// New listings per year [default: 90]
    #[arg(long)]
    pub entry_rate: Option<f64>,
    /// 2-for-1 splits per firm-year [default: 0]
    #[arg(long)]
    pub split_rate: Option<f64>,
    /// First trading date [default: 1927-01-01]
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
    /// Dataset file name inside the output directory [default: dataset.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Period START:END, repeatable; periods must be ordered and disjoint
    #[arg(long, value_parser = parse_period)]
    pub period: Vec<Period>,
    /// Canned period list (only `paper-decades`)
    #[arg(long)]
    pub preset: Option<String>,
    /// Universe size [default: 500]
    #[arg(long)]
    pub top_n: Option<usize>,
    /// equal, value or price [default: equal]
    #[arg(long)]
    pub weighting: Option<Weighting>,
    /// cash_at_zero or redistribute [default: cash_at_zero]
    #[arg(long)]
    pub delisting_policy: Option<DelistingPolicy>,
    /// Return aggregation for the t-tests: daily, monthly or annual [default: annual]
    #[arg(long)]
    pub frequency: Option<Frequency>,
    /// Risk-free CSV `date,rate` with annual decimal rates
    #[arg(long)]
    pub risk_free: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Model file (gamma, T, N, mu1, sigma1, mu2, sigma2)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Monte-Carlo trials [default: 10000]
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RandomBenchArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Candidate metrics: a MetricsReport JSON or a `date,value` equity-curve CSV
    #[arg(long)]
    pub candidate: Option<PathBuf>,
    /// Period START:END
    #[arg(long, value_parser = parse_period)]
    pub period: Option<Period>,
    /// Universe size [default: 500]
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Universe selection: ex_ante or ex_post [default: ex_ante]
    #[arg(long)]
    pub mode: Option<String>,
    /// [default: 100]
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    /// Target mean invested fraction [default: 0.8]
    #[arg(long)]
    pub leverage: Option<f64>,
    /// Mean holding period in trading days [default: 9]
    #[arg(long)]
    pub holding_days: Option<f64>,
    /// [default: 20]
    #[arg(long)]
    pub positions_max: Option<usize>,
    /// geometric or fixed [default: geometric]
    #[arg(long)]
    pub duration: Option<DurationModel>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl Display) -> CliError {
    CliError { code: EXIT_USAGE, message: e.to_string() }
}

fn input(e: impl Display) -> CliError {
    CliError { code: EXIT_INPUT, message: e.to_string() }
}

fn runtime(e: impl Display) -> CliError {
    CliError { code: EXIT_RUNTIME, message: e.to_string() }
}

/// `START:END` (or `START..END`) with ISO dates.
pub fn parse_period(s: &str) -> std::result::Result<Period, String> {
    let (a, b) = s
        .split_once("..")
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| format!("expected START:END, found `{s}`"))?;
    let date = |x: &str| {
        NaiveDate::parse_from_str(x.trim(), "%Y-%m-%d").map_err(|e| format!("invalid date `{}`: {e}", x.trim()))
    };
    let p = Period::new(date(a)?, date(b)?);
    if p.start >= p.end {
        return Err(format!("period start {} is not before end {}", p.start, p.end));
    }
    Ok(p)
}

/// Settings read from a config file, consumed key by key so that leftovers
/// can be reported as unknown.
#[derive(Debug, Default)]
struct Settings {
    source: String,
    values: BTreeMap<String, Vec<String>>,
}

impl Settings {
    fn parse(source: &str, text: &str) -> CliResult<Self> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{source}:{}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_ascii_lowercase().replace('-', "_");
            values.entry(key).or_default().push(v.trim().to_string());
        }
        Ok(Self { source: source.to_string(), values })
    }

    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                Self::parse(&p.display().to_string(), &text)
            }
        }
    }

    fn convert<T: FromStr>(&self, key: &str, v: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        v.parse()
            .map_err(|e| usage(format!("{}: invalid value `{v}` for `{key}`: {e}", self.source)))
    }

    /// The flag if given, else the last value for `key` in the file.
    fn pick<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let stored = self.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match stored.as_ref().and_then(|v| v.last()) {
            Some(v) => self.convert(key, v).map(Some),
            None => Ok(None),
        }
    }

    fn pick_all<T: FromStr>(&mut self, key: &str, flags: Vec<T>) -> CliResult<Vec<T>>
    where
        T::Err: Display,
    {
        let stored = self.values.remove(key).unwrap_or_default();
        if !flags.is_empty() {
            return Ok(flags);
        }
        stored.iter().map(|v| self.convert(key, v)).collect()
    }

    fn finish(self) -> CliResult<()> {
        match self.values.keys().next() {
            Some(k) => Err(usage(format!("{}: unknown setting `{k}` for this command", self.source))),
            None => Ok(()),
        }
    }
}

struct PeriodArg(Period);

impl FromStr for PeriodArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_period(s).map(PeriodArg)
    }
}

struct Context {
    seed: u64,
    output_dir: PathBuf,
}

impl Context {
    fn prepare(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| runtime(format!("cannot create {}: {e}", self.output_dir.display())))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
    }

    fn write_curve(&self, name: &str, curve: &EquityCurve) -> CliResult<()> {
        curve.write_csv_file(self.path(name)).map_err(runtime)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let ctx = Context {
        seed: settings.pick("seed", cli.seed)?.unwrap_or(0),
        output_dir: settings
            .pick("output_dir", cli.output_dir)?
            .unwrap_or_else(|| PathBuf::from("lookahead-out")),
    };
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&ctx, settings, a),
        Command::Synth(a) => cmd_synth(&ctx, settings, a),
        Command::Backtest(a) => cmd_backtest(&ctx, settings, a),
        Command::Theory(a) => cmd_theory(&ctx, settings, a),
        Command::RandomBench(a) => cmd_random_bench(&ctx, settings, a),
    }
}

fn required<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required setting `--{name}`")))
}

fn load_dataset(path: &Path) -> CliResult<MarketDataset> {
    ingest_csv(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Moves requested calendar dates onto trading dates: the start forward,
/// the end backward.
pub fn snap_period(dataset: &MarketDataset, requested: Period) -> crate::Result<Period> {
    let start = dataset.first_date_on_or_after(requested.start);
    let end = dataset.last_date_on_or_before(requested.end);
    match (start, end) {
        (Some(s), Some(e)) if s < e => Ok(Period::new(s, e)),
        _ => Err(Error::PeriodOrder(format!(
            "period {}..{} contains fewer than two trading dates",
            requested.start, requested.end
        ))),
    }
}

#[derive(Serialize)]
struct IngestReport {
    data: String,
    n_securities: usize,
    total_bars: usize,
    n_trading_days: usize,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
}

#[derive(Serialize)]
struct SnapshotPair {
    ex_ante: UniverseSnapshot,
    ex_post: UniverseSnapshot,
}

fn cmd_ingest(ctx: &Context, mut s: Settings, a: IngestArgs) -> CliResult<()> {
    let data = required(s.pick("data", a.data)?, "data")?;
    let period = s.pick("period", a.period.map(PeriodArg))?.map(|p| p.0);
    let top_n = s.pick("top_n", a.top_n)?.unwrap_or(500);
    s.finish()?;
    let ds = load_dataset(&data)?;
    ctx.prepare()?;
    let cal = ds.calendar();
    let report = IngestReport {
        data: data.display().to_string(),
        n_securities: ds.len(),
        total_bars: ds.total_bars(),
        n_trading_days: cal.len(),
        first_date: cal.first().copied(),
        last_date: cal.last().copied(),
    };
    ctx.write_json("ingest_report.json", &report)?;
    println!(
        "{}: {} securities, {} bars, {} trading days",
        report.data, report.n_securities, report.total_bars, report.n_trading_days
    );
    if let Some(p) = period {
        let p = snap_period(&ds, p).map_err(usage)?;
        let pair = SnapshotPair {
            ex_ante: select_period_universe(&ds, p, top_n, SelectionMode::ExAnte).map_err(runtime)?,
            ex_post: select_period_universe(&ds, p, top_n, SelectionMode::ExPost).map_err(runtime)?,
        };
        println!(
            "snapshot {}..{}: ex-ante {} members, ex-post {} members ({} dropped as untradable at start)",
            p.start,
            p.end,
            pair.ex_ante.len(),
            pair.ex_post.len(),
            pair.ex_post.dropped_untradable
        );
        ctx.write_json("snapshot.json", &pair)?;
    }
    Ok(())
}

fn cmd_synth(ctx: &Context, mut s: Settings, a: SynthArgs) -> CliResult<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_firms_initial: s.pick("firms", a.firms)?.unwrap_or(d.n_firms_initial),
        horizon_years: s.pick("years", a.years)?.unwrap_or(d.horizon_years),
        trading_days_per_year: s
            .pick("trading_days_per_year", a.trading_days_per_year)?
            .unwrap_or(d.trading_days_per_year),
        annual_drift: s.pick("drift", a.drift)?.unwrap_or(d.annual_drift),
        annual_volatility: s.pick("volatility", a.volatility)?.unwrap_or(d.annual_volatility),
        entry_rate: s.pick("entry_rate", a.entry_rate)?.unwrap_or(d.entry_rate),
        split_rate: s.pick("split_rate", a.split_rate)?.unwrap_or(d.split_rate),
        start_date: s.pick("start_date", a.start_date)?.unwrap_or(d.start_date),
        seed: ctx.seed,
        ..d
    };
    let out = s.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("dataset.csv"));
    s.finish()?;
    cfg.validate().map_err(usage)?;
    let hazard = calibrate_hazard(&EXIT_QUANTILES).map_err(runtime)?;
    println!("calibrated hazard (piecewise constant, per year):");
    let mut lo = 0.0;
    for (b, r) in hazard.breakpoints.iter().zip(&hazard.rates) {
        println!("  [{lo}, {b}) years: {r}");
        lo = *b;
    }
    if let Some(r) = hazard.rates.get(hazard.breakpoints.len()) {
        println!("  [{lo}, inf) years: {r}");
    }
    let ds = simulate_market(&cfg, &hazard).map_err(runtime)?;
    ctx.prepare()?;
    let path = ctx.path(&out.to_string_lossy());
    ds.write_csv_file(&path).map_err(runtime)?;
    let meta = SynthMetadata {
        config: cfg,
        hazard,
        exit_quantiles: EXIT_QUANTILES.to_vec(),
        n_securities: ds.len(),
        n_trading_days: ds.calendar().len(),
    };
    meta.write_json(path.with_extension("meta.json")).map_err(runtime)?;
    println!(
        "wrote {} ({} securities, {} trading days, {} bars)",
        path.display(),
        ds.len(),
        ds.calendar().len(),
        ds.total_bars()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
struct BacktestSettings {
    top_n: usize,
    weighting: Weighting,
    delisting_policy: DelistingPolicy,
    frequency: Frequency,
}

#[derive(Debug, Serialize)]
struct PortfolioReport {
    universe_size: usize,
    dropped_untradable: usize,
    metrics: MetricsReport,
}

#[derive(Debug, Serialize)]
struct PeriodReport {
    index: usize,
    requested: Period,
    period: Period,
    ex_ante: PortfolioReport,
    ex_post: PortfolioReport,
    ratio: MetricsReport,
    /// Pooled t-test of ex-post against ex-ante period returns.
    t_test: Option<TTest>,
    t_test_note: Option<String>,
    n_test_returns: usize,
}

#[derive(Debug, Serialize)]
struct ChainedReport {
    ex_ante: MetricsReport,
    ex_post: MetricsReport,
    ratio: MetricsReport,
}

#[derive(Debug, Serialize)]
struct BacktestReport {
    data: String,
    risk_free: Option<String>,
    settings: BacktestSettings,
    periods: Vec<PeriodReport>,
    chained: ChainedReport,
}

struct PeriodOutcome {
    report: PeriodReport,
    ex_ante: EquityCurve,
    ex_post: EquityCurve,
    ratio: EquityCurve,
    universes: SnapshotPair,
}

fn rates_for(rf: Option<&RiskFreeSeries>, curve: &EquityCurve) -> crate::Result<Option<Vec<f64>>> {
    rf.map(|r| r.per_period_rates(curve.dates(), TRADING_DAYS_PER_YEAR)).transpose()
}

fn run_period(
    ds: &MarketDataset,
    cfg: BacktestSettings,
    rf: Option<&RiskFreeSeries>,
    index: usize,
    requested: Period,
    period: Period,
) -> crate::Result<PeriodOutcome> {
    let ante_u = select_period_universe(ds, period, cfg.top_n, SelectionMode::ExAnte)?;
    let post_u = select_period_universe(ds, period, cfg.top_n, SelectionMode::ExPost)?;
    let curve = |u: &UniverseSnapshot| {
        run_buy_and_hold(ds, &PortfolioSpec::new(u.clone(), cfg.weighting, cfg.delisting_policy), period)
    };
    let ante = curve(&ante_u)?;
    let post = curve(&post_u)?;
    let ratio = long_short_ratio(&post, &ante)?;
    let rates = rates_for(rf, &ante)?;
    let ppy = TRADING_DAYS_PER_YEAR;
    let metrics = |c: &EquityCurve| MetricsReport::from_curve(c, rates.as_deref(), ppy);
    let ante_returns: Vec<f64> = period_returns(&ante, cfg.frequency, rates.as_deref())?
        .into_iter()
        .map(|r| r.1)
        .collect();
    let post_returns: Vec<f64> = period_returns(&post, cfg.frequency, rates.as_deref())?
        .into_iter()
        .map(|r| r.1)
        .collect();
    let (t_test, t_test_note) = match two_sample_t_pooled(&post_returns, &ante_returns) {
        Ok(t) => (Some(t), None),
        Err(e @ (Error::ZeroVariance | Error::TooFewObservations { .. })) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let report = PeriodReport {
        index,
        requested,
        period,
        ex_ante: PortfolioReport {
            universe_size: ante_u.len(),
            dropped_untradable: ante_u.dropped_untradable,
            metrics: metrics(&ante)?,
        },
        ex_post: PortfolioReport {
            universe_size: post_u.len(),
            dropped_untradable: post_u.dropped_untradable,
            metrics: metrics(&post)?,
        },
        ratio: MetricsReport::from_curve(&ratio, None, ppy)?,
        t_test,
        t_test_note,
        n_test_returns: post_returns.len(),
    };
    Ok(PeriodOutcome {
        report,
        ex_ante: ante,
        ex_post: post,
        ratio,
        universes: SnapshotPair { ex_ante: ante_u, ex_post: post_u },
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn cmd_backtest(ctx: &Context, mut s: Settings, a: BacktestArgs) -> CliResult<()> {
    let data = required(s.pick("data", a.data)?, "data")?;
    let preset = s.pick("preset", a.preset)?;
    let flag_periods: Vec<PeriodArg> = a.period.into_iter().map(PeriodArg).collect();
    let mut periods: Vec<Period> = s.pick_all("period", flag_periods)?.into_iter().map(|p| p.0).collect();
    let top_n = s.pick("top_n", a.top_n)?;
    let weighting = s.pick("weighting", a.weighting)?;
    let delisting_policy = s.pick("delisting_policy", a.delisting_policy)?;
    let frequency = s.pick("frequency", a.frequency)?;
    let risk_free = s.pick("risk_free", a.risk_free)?;
    s.finish()?;

    let mut preset_settings = Settings::default();
    match preset.as_deref() {
        None => {}
        Some("paper-decades") => {
            preset_settings = Settings::parse("paper-decades", PAPER_DECADES)?;
            if periods.is_empty() {
                periods = preset_settings.pick_all("period", Vec::<PeriodArg>::new())?.into_iter().map(|p| p.0).collect();
            }
        }
        Some(other) => return Err(usage(format!("unknown preset `{other}` (expected paper-decades)"))),
    }
    let cfg = BacktestSettings {
        top_n: preset_settings.pick("top_n", top_n)?.unwrap_or(500),
        weighting: preset_settings.pick("weighting", weighting)?.unwrap_or(Weighting::Equal),
        delisting_policy: preset_settings
            .pick("delisting_policy", delisting_policy)?
            .unwrap_or_default(),
        frequency: preset_settings.pick("frequency", frequency)?.unwrap_or(Frequency::Annual),
    };
    if cfg.top_n == 0 {
        return Err(usage("top_n must be at least 1"));
    }
    if periods.is_empty() {
        return Err(usage("no periods given (use --period START:END or --preset paper-decades)"));
    }
    if let Some(w) = periods.windows(2).find(|w| w[1].start <= w[0].end) {
        return Err(usage(Error::PeriodOrder(format!(
            "{}..{} does not start after {}..{}",
            w[1].start, w[1].end, w[0].start, w[0].end
        ))));
    }

    let ds = load_dataset(&data)?;
    let rf = risk_free
        .as_ref()
        .map(|p| RiskFreeSeries::read_csv_file(p).map_err(|e| input(format!("{}: {e}", p.display()))))
        .transpose()?;
    let snapped = periods
        .iter()
        .map(|&p| snap_period(&ds, p).map(|q| (p, q)))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(usage)?;
    if let Some(w) = snapped.windows(2).find(|w| w[1].1.start <= w[0].1.end) {
        return Err(usage(Error::PeriodOrder(format!(
            "periods {}..{} and {}..{} share trading dates",
            w[0].0.start, w[0].0.end, w[1].0.start, w[1].0.end
        ))));
    }
    let outcomes = snapped
        .par_iter()
        .enumerate()
        .map(|(i, &(req, p))| run_period(&ds, cfg, rf.as_ref(), i + 1, req, p))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(runtime)?;

    let chain = |f: fn(&PeriodOutcome) -> &EquityCurve| {
        let curves: Vec<EquityCurve> = outcomes.iter().map(|o| f(o).clone()).collect();
        chain_periods(&curves)
    };
    let chained_ante = chain(|o| &o.ex_ante).map_err(runtime)?;
    let chained_post = chain(|o| &o.ex_post).map_err(runtime)?;
    let chained_ratio = chain(|o| &o.ratio).map_err(runtime)?;
    let chained_rates = rates_for(rf.as_ref(), &chained_ante).map_err(runtime)?;
    let chained = ChainedReport {
        ex_ante: MetricsReport::from_curve(&chained_ante, chained_rates.as_deref(), TRADING_DAYS_PER_YEAR)
            .map_err(runtime)?,
        ex_post: MetricsReport::from_curve(&chained_post, chained_rates.as_deref(), TRADING_DAYS_PER_YEAR)
            .map_err(runtime)?,
        ratio: MetricsReport::from_curve(&chained_ratio, None, TRADING_DAYS_PER_YEAR).map_err(runtime)?,
    };

    ctx.prepare()?;
    let mut table = String::from(
        "period,start,end,ex_ante_n,ex_post_n,ex_post_dropped,ex_ante_sharpe,ex_ante_cagr,ex_ante_max_drawdown,\
         ex_post_sharpe,ex_post_cagr,ex_post_max_drawdown,ratio_terminal,t_statistic,p_value,dof\n",
    );
    println!("period                    ante: sharpe   cagr    post: sharpe   cagr    ratio     t");
    for o in &outcomes {
        let r = &o.report;
        let tag = format!("period_{:02}", r.index);
        ctx.write_curve(&format!("{tag}_ex_ante.csv"), &o.ex_ante)?;
        ctx.write_curve(&format!("{tag}_ex_post.csv"), &o.ex_post)?;
        ctx.write_curve(&format!("{tag}_ratio.csv"), &o.ratio)?;
        ctx.write_json(&format!("{tag}_universes.json"), &o.universes)?;
        let (ea, ep) = (&r.ex_ante, &r.ex_post);
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.period.start,
            r.period.end,
            ea.universe_size,
            ep.universe_size,
            ep.dropped_untradable,
            opt(ea.metrics.sharpe_annualized),
            ea.metrics.cagr_continuous,
            ea.metrics.max_drawdown,
            opt(ep.metrics.sharpe_annualized),
            ep.metrics.cagr_continuous,
            ep.metrics.max_drawdown,
            o.ratio.terminal(),
            opt(r.t_test.map(|t| t.t_statistic)),
            opt(r.t_test.map(|t| t.p_value_two_sided)),
            opt(r.t_test.map(|t| t.dof)),
        )
        .unwrap();
        let fmt = |x: Option<f64>| x.map_or_else(|| "   n/a".to_string(), |v| format!("{v:6.3}"));
        println!(
            "{}..{}       {}  {:6.2}%        {}  {:6.2}%   {:7.4}  {}",
            r.period.start,
            r.period.end,
            fmt(ea.metrics.sharpe_annualized),
            100.0 * ea.metrics.cagr_continuous,
            fmt(ep.metrics.sharpe_annualized),
            100.0 * ep.metrics.cagr_continuous,
            o.ratio.terminal(),
            fmt(r.t_test.map(|t| t.t_statistic)),
        );
    }
    ctx.write_text("periods.csv", &table)?;
    ctx.write_curve("chained_ex_ante.csv", &chained_ante)?;
    ctx.write_curve("chained_ex_post.csv", &chained_post)?;
    ctx.write_curve("chained_ratio.csv", &chained_ratio)?;
    let report = BacktestReport {
        data: data.display().to_string(),
        risk_free: risk_free.map(|p| p.display().to_string()),
        settings: cfg,
        periods: outcomes.into_iter().map(|o| o.report).collect(),
        chained,
    };
    ctx.write_json("report.json", &report)?;
    println!("wrote report.json and series to {}", ctx.output_dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct DatasetTheory {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    sharpe_sq_star: f64,
    sharpe_sq_ew: f64,
    /// `ω*'Σ⁻¹ω*` for the optimal weights.
    omega_sigma_inv_omega: f64,
    optimal_utility: f64,
    expected_sample_utility: f64,
}

#[derive(Debug, Serialize)]
struct TheoryReport {
    gamma: f64,
    t: usize,
    n: usize,
    trials: usize,
    seed: u64,
    k: f64,
    delta: f64,
    delta_unhalved: f64,
    dataset_1: DatasetTheory,
    dataset_2: DatasetTheory,
    monte_carlo: BiasMonteCarlo,
    diversification_1: DiversificationMonteCarlo,
    diversification_2: DiversificationMonteCarlo,
}

fn dataset_theory(
    mu: &nalgebra::DVector<f64>,
    sigma: &nalgebra::DMatrix<f64>,
    model: &BiasModel,
) -> crate::Result<DatasetTheory> {
    let s2 = sharpe_sq_star(mu, sigma)?;
    Ok(DatasetTheory {
        mu: mu.iter().copied().collect(),
        sigma: sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        sharpe_sq_star: s2,
        sharpe_sq_ew: sharpe_sq_ew(mu, sigma)?,
        omega_sigma_inv_omega: omega_sigma_inv_omega(mu, sigma, model.gamma)?,
        optimal_utility: s2 / (2.0 * model.gamma),
        expected_sample_utility: expected_sample_utility(mu, sigma, model.gamma, model.t)?,
    })
}

fn cmd_theory(ctx: &Context, mut s: Settings, a: TheoryArgs) -> CliResult<()> {
    let model_path = required(s.pick("model", a.model)?, "model")?;
    let trials = s.pick("trials", a.trials)?.unwrap_or(10_000);
    s.finish()?;
    if trials == 0 {
        return Err(usage("trials must be at least 1"));
    }
    let model = BiasModel::from_file(&model_path).map_err(|e| input(format!("{}: {e}", model_path.display())))?;
    let k = k_factor(model.t, model.n).map_err(input)?;
    let delta = delta_bias(&model).map_err(input)?;
    let delta_unhalved = delta_bias_unhalved(&model).map_err(input)?;
    let d1 = dataset_theory(&model.mu1, &model.sigma1, &model).map_err(input)?;
    let d2 = dataset_theory(&model.mu2, &model.sigma2, &model).map_err(input)?;
    let mc = mc_estimated_bias(&model, trials, ctx.seed).map_err(runtime)?;
    let div1 = mc_ew_vs_markowitz(&model.mu1, &model.sigma1, model.t, model.gamma, trials, ctx.seed.wrapping_add(1))
        .map_err(runtime)?;
    let div2 = mc_ew_vs_markowitz(&model.mu2, &model.sigma2, model.t, model.gamma, trials, ctx.seed.wrapping_add(2))
        .map_err(runtime)?;

    println!("T = {}, N = {}, gamma = {}", model.t, model.n, model.gamma);
    println!("k = {k}");
    println!("Delta = {delta} (without the 1/2: {delta_unhalved})");
    for (i, d) in [&d1, &d2].into_iter().enumerate() {
        println!(
            "dataset {}: S*^2 = {}, S_EW^2 = {}, w*'Sigma^-1 w* = {}, E U(w_hat) = {}",
            i + 1,
            d.sharpe_sq_star,
            d.sharpe_sq_ew,
            d.omega_sigma_inv_omega,
            d.expected_sample_utility
        );
    }
    println!(
        "Monte-Carlo ({} trials, {} discarded): E U1 = {} ± {}, E U2 = {} ± {}",
        mc.trials,
        mc.discarded,
        mc.expected_utility_1.mean,
        mc.expected_utility_1.std_error,
        mc.expected_utility_2.mean,
        mc.expected_utility_2.std_error
    );
    println!(
        "Monte-Carlo Delta = {} ± {} (closed form {})",
        mc.delta.mean, mc.delta.std_error, mc.delta_closed_form
    );
    for (i, d) in [&div1, &div2].into_iter().enumerate() {
        println!(
            "dataset {}: out-of-sample Sharpe, Markowitz {} ± {}, equal weight {}, optimum {}",
            i + 1,
            d.markowitz_sharpe.mean,
            d.markowitz_sharpe.std_error,
            d.equal_weight_sharpe.mean,
            d.optimal_sharpe
        );
    }
    let report = TheoryReport {
        gamma: model.gamma,
        t: model.t,
        n: model.n,
        trials,
        seed: ctx.seed,
        k,
        delta,
        delta_unhalved,
        dataset_1: d1,
        dataset_2: d2,
        monte_carlo: mc,
        diversification_1: div1,
        diversification_2: div2,
    };
    ctx.prepare()?;
    ctx.write_json("theory_report.json", &report)
}

#[derive(Debug, Serialize)]
struct PercentileReport {
    candidate: MetricsReport,
    ensemble_size: usize,
    sharpe_percentile: Option<f64>,
    cagr_percentile: f64,
}

fn load_candidate(path: &Path) -> CliResult<MetricsReport> {
    if !path.is_file() {
        return Err(usage(format!("candidate file {} does not exist", path.display())));
    }
    let fail = |e: Error| input(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.into()))?;
        serde_json::from_str(&text).map_err(|e| fail(e.into()))
    } else {
        let curve = EquityCurve::read_csv_file("candidate", path).map_err(fail)?;
        MetricsReport::from_curve(&curve, None, TRADING_DAYS_PER_YEAR).map_err(fail)
    }
}

fn cmd_random_bench(ctx: &Context, mut s: Settings, a: RandomBenchArgs) -> CliResult<()> {
    let data = required(s.pick("data", a.data)?, "data")?;
    let candidate = required(s.pick("candidate", a.candidate)?, "candidate")?;
    let period = required(s.pick("period", a.period.map(PeriodArg))?, "period")?.0;
    let top_n = s.pick("top_n", a.top_n)?.unwrap_or(500);
    let mode = match s.pick("mode", a.mode)?.as_deref() {
        None | Some("ex_ante") => SelectionMode::ExAnte,
        Some("ex_post") => SelectionMode::ExPost,
        Some(other) => return Err(usage(format!("unknown mode `{other}` (expected ex_ante or ex_post)"))),
    };
    let ensemble_size = s.pick("ensemble_size", a.ensemble_size)?.unwrap_or(100);
    let leverage = s.pick("leverage", a.leverage)?;
    let holding_days = s.pick("holding_days", a.holding_days)?;
    let positions_max = s.pick("positions_max", a.positions_max)?;
    let duration = s.pick("duration", a.duration)?;
    s.finish()?;
    if top_n == 0 {
        return Err(usage("top_n must be at least 1"));
    }
    let candidate_report = load_candidate(&candidate)?;
    let ds = load_dataset(&data)?;
    let period = snap_period(&ds, period).map_err(usage)?;
    let universe = select_period_universe(&ds, period, top_n, mode).map_err(runtime)?;
    let defaults = RandomStrategyConfig::new(universe);
    let cfg = RandomStrategyConfig {
        target_mean_leverage: leverage.unwrap_or(defaults.target_mean_leverage),
        mean_holding_days: holding_days.unwrap_or(defaults.mean_holding_days),
        positions_max: positions_max.unwrap_or(defaults.positions_max),
        duration_model: duration.unwrap_or(defaults.duration_model),
        ensemble_size,
        master_seed: ctx.seed,
        ..defaults
    };
    cfg.validate().map_err(usage)?;
    let ensemble: EnsembleReport = run_ensemble(&ds, &cfg).map_err(runtime)?;
    let sharpe_percentile = match percentile_score(&candidate_report, &ensemble, Metric::Sharpe) {
        Ok(p) => Some(p),
        Err(Error::UndefinedSharpe | Error::EmptyUniverse(_)) => None,
        Err(e) => return Err(runtime(e)),
    };
    let cagr_percentile = percentile_score(&candidate_report, &ensemble, Metric::Cagr).map_err(runtime)?;

    ctx.prepare()?;
    let mut runs = String::from("run,sharpe,cagr,max_drawdown,n_trades,mean_leverage,mean_holding_days\n");
    for r in &ensemble.runs {
        writeln!(
            runs,
            "{},{},{},{},{},{},{}",
            r.run_index,
            opt(r.metrics.sharpe_annualized),
            r.metrics.cagr_continuous,
            r.metrics.max_drawdown,
            r.n_trades,
            r.realized_mean_leverage,
            r.realized_mean_holding_days
        )
        .unwrap();
    }
    ctx.write_text("ensemble_runs.csv", &runs)?;
    ctx.write_json("ensemble_report.json", &ensemble)?;
    let report = PercentileReport {
        candidate: candidate_report,
        ensemble_size: ensemble.runs.len(),
        sharpe_percentile,
        cagr_percentile,
    };
    ctx.write_json("percentile_report.json", &report)?;
    println!(
        "ensemble of {} random strategies: CAGR {:.4} ± {:.4}, Sharpe {:.4} ± {:.4}, invested {:.4}, holding {:.2} days",
        ensemble.runs.len(),
        ensemble.mean_cagr,
        ensemble.sd_cagr,
        ensemble.mean_sharpe,
        ensemble.sd_sharpe,
        ensemble.realized_mean_leverage,
        ensemble.realized_mean_holding_days
    );
    println!(
        "candidate percentile: Sharpe {}, CAGR {}",
        sharpe_percentile.map_or_else(|| "n/a".into(), |p| format!("{p:.1}")),
        format_args!("{cagr_percentile:.1}")
    );
    Ok(())
}
