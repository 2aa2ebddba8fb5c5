//! Frictionless buy-and-hold simulation.
//!
//! Wealth 1 is allocated at the period start, converted into adjusted-share
//! holdings and then left alone. A member's last bar is its delisting: the
//! position is liquidated at that close and either kept as zero-interest
//! cash or reinvested across the survivors on the next trading day.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{MarketDataset, SecurityId};
use crate::universe::{Period, UniverseSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Equal,
    Value,
    Price,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelistingPolicy {
    #[default]
    CashAtZero,
    Redistribute,
}

impl std::str::FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Self::Equal),
            "value" => Ok(Self::Value),
            "price" => Ok(Self::Price),
            _ => Err(Error::Config(format!(
                "unknown weighting `{s}` (expected equal, value or price)"
            ))),
        }
    }
}

impl std::str::FromStr for DelistingPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cash_at_zero" | "cash-at-zero" | "cash" => Ok(Self::CashAtZero),
            "redistribute" => Ok(Self::Redistribute),
            _ => Err(Error::Config(format!(
                "unknown delisting policy `{s}` (expected cash_at_zero or redistribute)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioSpec {
    pub universe: UniverseSnapshot,
    pub weighting: Weighting,
    pub delisting_policy: DelistingPolicy,
}

impl PortfolioSpec {
    pub fn new(universe: UniverseSnapshot, weighting: Weighting, delisting_policy: DelistingPolicy) -> Self {
        Self {
            universe,
            weighting,
            delisting_policy,
        }
    }

    pub fn equal_weight(universe: UniverseSnapshot) -> Self {
        Self::new(universe, Weighting::Equal, DelistingPolicy::CashAtZero)
    }
}

/// Dated portfolio values starting at exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub label: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl EquityCurve {
    pub fn new(label: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.is_empty() || dates.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCurve(format!("dates not increasing at {}", w[1])));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonPositiveValue(dates[i]));
        }
        if values[0] != 1.0 {
            return Err(Error::InvalidCurve(format!(
                "first value must be 1, got {}",
                values[0]
            )));
        }
        Ok(Self {
            label: label.into(),
            dates,
            values,
        })
    }

    /// Rescales an arbitrary positive value series to start at 1.
    pub fn normalized(label: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let first = *values
            .first()
            .ok_or_else(|| Error::InvalidCurve("empty curve".into()))?;
        if !(first.is_finite() && first > 0.0) {
            return Err(Error::NonPositiveValue(dates[0]));
        }
        let mut values: Vec<f64> = values.into_iter().map(|v| v / first).collect();
        values[0] = 1.0;
        Self::new(label, dates, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.values.iter().copied())
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        *self.dates.last().unwrap()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn period(&self) -> Period {
        Period::new(self.first_date(), self.last_date())
    }

    /// Simple returns `v[t]/v[t-1] - 1`.
    pub fn returns(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "value"])?;
        for (d, v) in self.points() {
            w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    /// Reads a `date,value` file; values are normalized to start at 1.
    pub fn read_csv<R: Read>(label: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Parse { line, message };
            if row.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", row.len())));
            }
            dates.push(
                NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                    .map_err(|e| bad(format!("invalid date `{}`: {e}", &row[0])))?,
            );
            values.push(
                row[1]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("invalid value `{}`", &row[1])))?,
            );
        }
        Self::normalized(label, dates, values)
    }

    pub fn read_csv_file(label: &str, path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(label, BufReader::new(File::open(path)?))
    }
}

/// Adjusted closes of a set of securities on the trading grid of a period,
/// carried forward over missing bars. Shared by the buy-and-hold engine and
/// the random-strategy simulator.
#[derive(Clone, Debug)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    ids: Vec<SecurityId>,
    prices: Vec<Vec<f64>>,
    raw_start: Vec<f64>,
    last_index: Vec<usize>,
}

impl PricePanel {
    /// Every id must be listed on `period.start`, which must be a trading date.
    pub fn build<'a>(
        dataset: &MarketDataset,
        ids: impl IntoIterator<Item = &'a str>,
        period: Period,
    ) -> Result<Self> {
        dataset.require_date(period.start)?;
        dataset.require_date(period.end)?;
        let dates = dataset.dates_between(period.start, period.end).to_vec();
        let mut panel = Self {
            dates,
            ids: Vec::new(),
            prices: Vec::new(),
            raw_start: Vec::new(),
            last_index: Vec::new(),
        };
        for id in ids {
            let record = dataset.record(id)?;
            if !record.is_listed(period.start) {
                return Err(Error::Contract(format!(
                    "{id} has no price at period start {}",
                    period.start
                )));
            }
            let mut j = record
                .bar_index_on_or_before(period.start)
                .expect("listed at start");
            let bar_dates = record.dates();
            let mut prices = Vec::with_capacity(panel.dates.len());
            for &date in &panel.dates {
                if date > record.delisting_date() {
                    break;
                }
                while j + 1 < bar_dates.len() && bar_dates[j + 1] <= date {
                    j += 1;
                }
                prices.push(record.adjusted_close_at_index(j));
            }
            panel.ids.push(id.to_string());
            panel.raw_start.push(record.close(period.start)?);
            panel.last_index.push(prices.len() - 1);
            panel.prices.push(prices);
        }
        Ok(panel)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.ids.len()
    }

    pub fn id(&self, asset: usize) -> &str {
        &self.ids[asset]
    }

    /// Adjusted close of `asset` on grid day `day`; `None` after delisting.
    pub fn price(&self, asset: usize, day: usize) -> Option<f64> {
        self.prices[asset].get(day).copied()
    }

    pub fn raw_start_close(&self, asset: usize) -> f64 {
        self.raw_start[asset]
    }

    /// Last grid day on which `asset` is listed.
    pub fn last_day(&self, asset: usize) -> usize {
        self.last_index[asset]
    }

    /// True when the asset stops trading before the final grid day.
    pub fn delists_in_period(&self, asset: usize) -> bool {
        self.last_index[asset] + 1 < self.dates.len()
    }
}

pub fn run_buy_and_hold(dataset: &MarketDataset, spec: &PortfolioSpec, period: Period) -> Result<EquityCurve> {
    let universe = &spec.universe;
    if universe.is_empty() {
        return Err(Error::EmptyUniverse("portfolio has no members".into()));
    }
    let panel = PricePanel::build(dataset, universe.ids(), period)?;
    let n = panel.n_assets();

    let raw_weights: Vec<f64> = match spec.weighting {
        Weighting::Equal => vec![1.0; n],
        Weighting::Value => universe
            .ids()
            .map(|id| dataset.record(id)?.market_cap(period.start))
            .collect::<Result<_>>()?,
        Weighting::Price => (0..n).map(|i| panel.raw_start_close(i)).collect(),
    };
    let total: f64 = raw_weights.iter().sum();
    let mut holdings: Vec<f64> = raw_weights
        .iter()
        .enumerate()
        .map(|(i, w)| w / total / panel.price(i, 0).unwrap())
        .collect();
    let mut alive = vec![true; n];
    let mut cash = 0.0;
    let mut pending = 0.0;

    let days = panel.n_days();
    let mut values = Vec::with_capacity(days);
    for t in 0..days {
        if pending > 0.0 {
            let survivors: f64 = (0..n)
                .filter(|&i| alive[i])
                .map(|i| holdings[i] * panel.price(i, t).unwrap())
                .sum();
            if survivors > 0.0 {
                for i in (0..n).filter(|&i| alive[i]) {
                    let price = panel.price(i, t).unwrap();
                    let share = holdings[i] * price / survivors;
                    holdings[i] += pending * share / price;
                }
                cash -= pending;
                pending = 0.0;
            }
        }
        let mut value = cash;
        for i in (0..n).filter(|&i| alive[i]) {
            value += holdings[i] * panel.price(i, t).unwrap();
        }
        values.push(value);

        for i in 0..n {
            if alive[i] && panel.last_day(i) == t && panel.delists_in_period(i) {
                let proceeds = holdings[i] * panel.price(i, t).unwrap();
                alive[i] = false;
                holdings[i] = 0.0;
                cash += proceeds;
                if spec.delisting_policy == DelistingPolicy::Redistribute {
                    pending += proceeds;
                }
            }
        }
    }
    values[0] = 1.0;
    let label = format!("{}_{:?}", universe.mode, spec.weighting).to_lowercase();
    EquityCurve::new(label, panel.dates().to_vec(), values)
}

/// Pointwise `long / short`, renormalized to 1 on the first date.
pub fn long_short_ratio(long: &EquityCurve, short: &EquityCurve) -> Result<EquityCurve> {
    if long.dates != short.dates {
        return Err(Error::GridMismatch);
    }
    if let Some((d, _)) = short.points().find(|(_, v)| *v <= 0.0) {
        return Err(Error::NonPositiveValue(d));
    }
    let base = long.values[0] / short.values[0];
    let mut values: Vec<f64> = long
        .values
        .iter()
        .zip(&short.values)
        .map(|(l, s)| l / s / base)
        .collect();
    values[0] = 1.0;
    EquityCurve::new(
        format!("{}_over_{}", long.label, short.label),
        long.dates.clone(),
        values,
    )
}

/// Compounds consecutive period curves into one curve starting at 1.
pub fn chain_periods(curves: &[EquityCurve]) -> Result<EquityCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidCurve("no curves to chain".into()))?;
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut scale = 1.0;
    for (k, curve) in curves.iter().enumerate() {
        if let Some(&prev) = dates.last() {
            if curve.first_date() <= prev {
                return Err(Error::PeriodOrder(format!(
                    "curve {k} starts {} but the previous one ends {prev}",
                    curve.first_date()
                )));
            }
        }
        dates.extend_from_slice(&curve.dates);
        values.extend(curve.values.iter().map(|v| v * scale));
        scale = *values.last().unwrap();
    }
    EquityCurve::new(format!("{}_chained", first.label), dates, values)
}
