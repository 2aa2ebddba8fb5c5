//! Constrained random long-only strategies.
//!
//! A random strategy buys randomly chosen universe members at the close,
//! holds each for a random number of days and sells at the close, while
//! keeping a target fraction of wealth invested. Because it shares every
//! bias of the dataset it runs on, an ensemble of such runs is a benchmark
//! against which a proposed strategy can be ranked.
//!
//! Mechanics per trading day:
//! 1. close positions whose holding period ended or whose security delists,
//! 2. while fewer than `round(leverage × positions_max)` positions are open,
//!    open new ones in names drawn uniformly from the unheld members, each
//!    sized at an equal share of the budget `leverage × wealth − invested`,
//! 3. mark to market; cash earns nothing.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use chrono::NaiveDate;

use crate::engine::{EquityCurve, PricePanel};
use crate::error::{Error, Result};
use crate::marketdata::{MarketDataset, SecurityId};
use crate::metrics::{MetricsReport, TRADING_DAYS_PER_YEAR};
use crate::rng::substream;
use crate::universe::UniverseSnapshot;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationModel {
    /// Memoryless: each day a position survives with probability `1 − 1/mean`.
    #[default]
    Geometric,
    /// Every position is held exactly `round(mean)` days.
    Fixed,
}

impl std::str::FromStr for DurationModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "fixed" => Ok(Self::Fixed),
            _ => Err(Error::Config(format!(
                "unknown duration model `{s}` (expected geometric or fixed)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomStrategyConfig {
    pub universe: UniverseSnapshot,
    /// Mean invested fraction of wealth, in `(0, 1]`.
    pub target_mean_leverage: f64,
    pub mean_holding_days: f64,
    pub positions_max: usize,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub duration_model: DurationModel,
}

impl RandomStrategyConfig {
    pub fn new(universe: UniverseSnapshot) -> Self {
        Self {
            universe,
            target_mean_leverage: 0.8,
            mean_holding_days: 9.0,
            positions_max: 20,
            ensemble_size: 10,
            master_seed: 0,
            duration_model: DurationModel::Geometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_mean_leverage > 0.0 && self.target_mean_leverage <= 1.0) {
            return Err(Error::Config(format!(
                "target_mean_leverage must be in (0, 1], got {}",
                self.target_mean_leverage
            )));
        }
        if !(self.mean_holding_days.is_finite() && self.mean_holding_days >= 1.0) {
            return Err(Error::Config(format!(
                "mean_holding_days must be at least 1, got {}",
                self.mean_holding_days
            )));
        }
        if self.positions_max == 0 {
            return Err(Error::Config("positions_max must be at least 1".into()));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if self.universe.is_empty() {
            return Err(Error::EmptyUniverse("random strategy universe is empty".into()));
        }
        Ok(())
    }

    /// Number of concurrent positions the strategy tries to hold.
    pub fn target_positions(&self) -> usize {
        ((self.target_mean_leverage * self.positions_max as f64).round() as usize).max(1)
    }

    fn draw_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.duration_model {
            DurationModel::Fixed => (self.mean_holding_days.round() as usize).max(1),
            DurationModel::Geometric => {
                let p = 1.0 / self.mean_holding_days;
                if p >= 1.0 {
                    return 1;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / (1.0 - p).ln()).floor() as usize
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub security_id: SecurityId,
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
    /// Adjusted closes.
    pub entry_price: f64,
    pub exit_price: f64,
    /// Wealth committed at entry.
    pub notional: f64,
    pub holding_days: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomRun {
    pub run_index: u64,
    pub trades: Vec<Trade>,
    pub curve: EquityCurve,
    /// Invested fraction after trading on each day except the last.
    pub invested_fraction: Vec<f64>,
    pub min_cash: f64,
}

impl RandomRun {
    pub fn realized_mean_leverage(&self) -> f64 {
        mean(&self.invested_fraction)
    }

    pub fn realized_mean_holding_days(&self) -> f64 {
        if self.trades.is_empty() {
            return 0.0;
        }
        self.trades.iter().map(|t| t.holding_days as f64).sum::<f64>() / self.trades.len() as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

struct Open {
    asset: usize,
    units: f64,
    entry_day: usize,
    exit_day: usize,
    notional: f64,
}

/// Simulates run `run_index`, fully determined by `(master_seed, run_index)`.
pub fn generate_random_run(dataset: &MarketDataset, config: &RandomStrategyConfig, run_index: u64) -> Result<RandomRun> {
    config.validate()?;
    let panel = PricePanel::build(dataset, config.universe.ids(), config.universe.period)?;
    simulate(&panel, config, run_index)
}

fn simulate(panel: &PricePanel, config: &RandomStrategyConfig, run_index: u64) -> Result<RandomRun> {
    let days = panel.n_days();
    if days < 2 {
        return Err(Error::Config("random strategy period needs at least two trading days".into()));
    }
    let mut rng = substream(config.master_seed, run_index);
    let target = config.target_positions();
    let leverage = config.target_mean_leverage;
    let mut held = vec![false; panel.n_assets()];
    let mut open: Vec<Open> = Vec::with_capacity(target);
    let mut trades = Vec::new();
    let mut cash = 1.0_f64;
    let mut min_cash = cash;
    let mut values = Vec::with_capacity(days);
    let mut invested_fraction = Vec::with_capacity(days - 1);
    let mut eligible = Vec::with_capacity(panel.n_assets());
    let dates = panel.dates();

    for t in 0..days {
        let price = |asset: usize| panel.price(asset, t).expect("open positions are listed");
        let mut k = 0;
        while k < open.len() {
            let pos = &open[k];
            if pos.exit_day == t || panel.last_day(pos.asset) == t || t + 1 == days {
                let pos = open.swap_remove(k);
                let exit_price = price(pos.asset);
                cash += pos.units * exit_price;
                held[pos.asset] = false;
                trades.push(Trade {
                    security_id: panel.id(pos.asset).to_string(),
                    entry_date: dates[pos.entry_day],
                    exit_date: dates[t],
                    entry_price: pos.notional / pos.units,
                    exit_price,
                    notional: pos.notional,
                    holding_days: t - pos.entry_day,
                });
            } else {
                k += 1;
            }
        }

        let mut invested: f64 = open.iter().map(|p| p.units * price(p.asset)).sum();
        if t + 1 < days && open.len() < target {
            let slots = target - open.len();
            let wealth = cash + invested;
            let budget = (leverage * wealth - invested).min(cash);
            if budget > 0.0 {
                eligible.clear();
                eligible.extend((0..panel.n_assets()).filter(|&a| !held[a] && panel.last_day(a) > t));
                let picks = slots.min(eligible.len());
                let size = budget / slots as f64;
                for i in index::sample(&mut rng, eligible.len(), picks) {
                    let asset = eligible[i];
                    let duration = config.draw_duration(&mut rng);
                    let p = price(asset);
                    open.push(Open {
                        asset,
                        units: size / p,
                        entry_day: t,
                        exit_day: (t + duration).min(days - 1),
                        notional: size,
                    });
                    held[asset] = true;
                    cash -= size;
                    invested += size;
                }
            }
        }
        min_cash = min_cash.min(cash);
        let value = cash + invested;
        values.push(value);
        if t + 1 < days {
            invested_fraction.push(invested / value);
        }
    }
    values[0] = 1.0;
    Ok(RandomRun {
        run_index,
        trades,
        curve: EquityCurve::new(format!("random_{run_index}"), dates.to_vec(), values)?,
        invested_fraction,
        min_cash,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_index: u64,
    pub metrics: MetricsReport,
    pub n_trades: usize,
    pub realized_mean_leverage: f64,
    pub realized_mean_holding_days: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: RandomStrategyConfig,
    pub runs: Vec<RunSummary>,
    pub mean_cagr: f64,
    pub sd_cagr: f64,
    /// Over runs with a defined Sharpe ratio.
    pub mean_sharpe: f64,
    pub sd_sharpe: f64,
    pub realized_mean_leverage: f64,
    pub realized_mean_holding_days: f64,
}

impl EnsembleReport {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| metric.of(&r.metrics))
            .collect()
    }
}

pub fn run_ensemble(dataset: &MarketDataset, config: &RandomStrategyConfig) -> Result<EnsembleReport> {
    config.validate()?;
    let panel = PricePanel::build(dataset, config.universe.ids(), config.universe.period)?;
    let runs = (0..config.ensemble_size as u64)
        .into_par_iter()
        .map(|i| {
            let run = simulate(&panel, config, i)?;
            Ok(RunSummary {
                run_index: i,
                metrics: MetricsReport::from_curve(&run.curve, None, TRADING_DAYS_PER_YEAR)?,
                n_trades: run.trades.len(),
                realized_mean_leverage: run.realized_mean_leverage(),
                realized_mean_holding_days: run.realized_mean_holding_days(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cagr: Vec<f64> = runs.iter().map(|r| r.metrics.cagr_continuous).collect();
    let sharpe: Vec<f64> = runs.iter().filter_map(|r| r.metrics.sharpe_annualized).collect();
    let lev: Vec<f64> = runs.iter().map(|r| r.realized_mean_leverage).collect();
    let dur: Vec<f64> = runs.iter().map(|r| r.realized_mean_holding_days).collect();
    Ok(EnsembleReport {
        config: config.clone(),
        mean_cagr: mean(&cagr),
        sd_cagr: sd(&cagr),
        mean_sharpe: mean(&sharpe),
        sd_sharpe: sd(&sharpe),
        realized_mean_leverage: mean(&lev),
        realized_mean_holding_days: mean(&dur),
        runs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sharpe,
    Cagr,
}

impl Metric {
    pub fn of(self, report: &MetricsReport) -> Option<f64> {
        match self {
            Metric::Sharpe => report.sharpe_annualized,
            Metric::Cagr => Some(report.cagr_continuous),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sharpe" => Ok(Self::Sharpe),
            "cagr" => Ok(Self::Cagr),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

/// Percentage of ensemble runs below the candidate, counting ties as half.
pub fn percentile_score(candidate: &MetricsReport, ensemble: &EnsembleReport, metric: Metric) -> Result<f64> {
    let value = metric.of(candidate).ok_or(Error::UndefinedSharpe)?;
    percentile_of(value, &ensemble.values(metric))
}

pub fn percentile_of(value: f64, sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyUniverse("ensemble has no runs to rank against".into()));
    }
    let below = sample.iter().filter(|x| **x < value).count() as f64;
    let ties = sample.iter().filter(|x| **x == value).count() as f64;
    Ok(100.0 * (below + 0.5 * ties) / sample.len() as f64)
}
