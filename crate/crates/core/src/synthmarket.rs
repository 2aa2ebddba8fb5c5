//! Synthetic CRSP-like markets.
//!
//! Firms follow independent geometric Brownian motions. Lifetimes come from
//! a piecewise-exponential hazard calibrated to dataset-wide exit quantiles
//! (by default a quarter of names gone after 3.3 years, three quarters
//! after 14 and 95% after 34). New firms arrive as a Poisson process.
//! Exits are independent of prices, so any gap between ex-ante and ex-post
//! universes comes purely from ranking on end-of-period capitalization.

use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Exp1, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{MarketDataset, SecurityRecord};
use crate::metrics::DAYS_PER_YEAR;
use crate::rng::substream;

/// `(years, cumulative fraction of names exited)`.
pub const EXIT_QUANTILES: [(f64, f64); 3] = [(3.3, 0.25), (14.0, 0.75), (34.0, 0.95)];

/// Piecewise-constant hazard: `rates[i]` applies on
/// `[breakpoints[i-1], breakpoints[i])` (with an implicit 0 before the first
/// breakpoint) and the last rate continues forever.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
}

impl HazardModel {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.len() != breakpoints.len() {
            return Err(Error::Config(format!(
                "{} hazard rates for {} breakpoints",
                rates.len(),
                breakpoints.len()
            )));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("hazard rates must be positive".into()));
        }
        if breakpoints[0] <= 0.0 || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("breakpoints must be positive and increasing".into()));
        }
        Ok(Self { breakpoints, rates })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![rate])
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        // (segment start, segment end, rate); the last segment is unbounded.
        let n = self.rates.len();
        (0..n).map(move |i| {
            let lo = if i == 0 { 0.0 } else { self.breakpoints[i - 1] };
            let hi = if i + 1 == n { f64::INFINITY } else { self.breakpoints[i] };
            (lo, hi, self.rates[i])
        })
    }

    pub fn cumulative_hazard(&self, years: f64) -> f64 {
        self.segments()
            .map(|(lo, hi, r)| r * (years.min(hi) - lo).max(0.0))
            .sum()
    }

    pub fn survival(&self, years: f64) -> f64 {
        (-self.cumulative_hazard(years)).exp()
    }

    /// Inverse of the cumulative hazard.
    pub fn lifetime_from_hazard(&self, target: f64) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, r) in self.segments() {
            let seg = r * (hi - lo);
            if acc + seg >= target {
                return lo + (target - acc) / r;
            }
            acc += seg;
        }
        unreachable!("last segment is unbounded")
    }

    pub fn sample_lifetime<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.lifetime_from_hazard(e)
    }
}

/// Solves for the piecewise-exponential rates that reproduce each
/// `(year, exit fraction)` pair exactly.
pub fn calibrate_hazard(quantiles: &[(f64, f64)]) -> Result<HazardModel> {
    if quantiles.is_empty() {
        return Err(Error::Config("no exit quantiles given".into()));
    }
    for (t, f) in quantiles {
        if !(*t > 0.0 && *f > 0.0 && *f < 1.0) {
            return Err(Error::Config(format!("invalid exit quantile ({t}, {f})")));
        }
    }
    if quantiles.windows(2).any(|w| w[0].0 >= w[1].0 || w[0].1 >= w[1].1) {
        return Err(Error::Config("exit quantiles must increase in both time and fraction".into()));
    }
    let mut rates = Vec::with_capacity(quantiles.len());
    let (mut t_prev, mut s_prev) = (0.0, 1.0_f64);
    for &(t, f) in quantiles {
        let s = 1.0 - f;
        rates.push((s_prev / s).ln() / (t - t_prev));
        t_prev = t;
        s_prev = s;
    }
    HazardModel::new(quantiles.iter().map(|q| q.0).collect(), rates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_firms_initial: usize,
    pub horizon_years: f64,
    pub trading_days_per_year: u32,
    pub annual_drift: f64,
    pub annual_volatility: f64,
    /// Log-normal parameters of the initial market cap.
    pub cap_log_mean: f64,
    pub cap_log_sd: f64,
    /// Log-normal parameters of the initial share price.
    pub price_log_mean: f64,
    pub price_log_sd: f64,
    /// Poisson arrival rate of new listings, firms per year.
    pub entry_rate: f64,
    /// Expected 2-for-1 splits per firm-year; 0 disables splits.
    pub split_rate: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_firms_initial: 1000,
            horizon_years: 80.0,
            trading_days_per_year: 252,
            annual_drift: 0.08,
            annual_volatility: 0.30,
            cap_log_mean: (5.0e8f64).ln(),
            cap_log_sd: 1.5,
            price_log_mean: 30f64.ln(),
            price_log_sd: 0.5,
            entry_rate: 90.0,
            split_rate: 0.0,
            start_date: NaiveDate::from_ymd_opt(1927, 1, 1).unwrap(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("horizon_years", self.horizon_years)?;
        // Zero volatility is allowed for deterministic control markets.
        if !(self.annual_volatility.is_finite() && self.annual_volatility >= 0.0) {
            return Err(Error::Config(format!(
                "annual_volatility must be non-negative, got {}",
                self.annual_volatility
            )));
        }
        if self.trading_days_per_year == 0 || self.trading_days_per_year > 260 {
            return Err(Error::Config("trading_days_per_year must be in 1..=260".into()));
        }
        if !(self.entry_rate.is_finite() && self.entry_rate >= 0.0) {
            return Err(Error::Config("entry_rate must be non-negative".into()));
        }
        if !(self.split_rate.is_finite() && self.split_rate >= 0.0) {
            return Err(Error::Config("split_rate must be non-negative".into()));
        }
        if self.cap_log_sd < 0.0 || self.price_log_sd < 0.0 {
            return Err(Error::Config("log-normal spreads must be non-negative".into()));
        }
        if self.n_firms_initial == 0 && self.entry_rate == 0.0 {
            return Err(Error::Config("market would contain no firms".into()));
        }
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        (self.horizon_years * f64::from(self.trading_days_per_year)).round() as usize
    }
}

/// `trading_days_per_year` weekdays per calendar year, evenly spaced, from
/// `start` onwards, `n` dates in total.
pub fn trading_calendar(start: NaiveDate, trading_days_per_year: u32, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut year = start.year();
    while out.len() < n {
        let mut weekdays = Vec::with_capacity(262);
        let mut d = NaiveDate::from_ymd_opt(year, 1, 1).unwrap().max(start);
        while d.year() == year {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                weekdays.push(d);
            }
            d = d + Days::new(1);
        }
        let m = weekdays.len();
        let k = trading_days_per_year as usize;
        if m <= k {
            out.extend(weekdays);
        } else {
            out.extend((0..k).map(|i| weekdays[i * m / k]));
        }
        year += 1;
    }
    out.truncate(n);
    out
}

#[derive(Clone, Copy, Debug)]
struct FirmSchedule {
    entry_day: usize,
}

fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates a market in the ingestion schema; identical `config.seed`
/// yields an identical dataset.
pub fn simulate_market(config: &SynthConfig, hazard: &HazardModel) -> Result<MarketDataset> {
    config.validate()?;
    let n_days = config.n_days();
    if n_days < 2 {
        return Err(Error::Config("horizon shorter than two trading days".into()));
    }
    let tdy = f64::from(config.trading_days_per_year);
    let calendar = trading_calendar(config.start_date, config.trading_days_per_year, n_days);

    let mut schedule: Vec<FirmSchedule> = (0..config.n_firms_initial)
        .map(|_| FirmSchedule { entry_day: 0 })
        .collect();
    if config.entry_rate > 0.0 {
        let mut rng = substream(config.seed, 0);
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            t += gap / config.entry_rate;
            let day = (t * tdy).ceil() as usize;
            if day >= n_days {
                break;
            }
            schedule.push(FirmSchedule { entry_day: day });
        }
    }

    let cap_dist = LogNormal::new(config.cap_log_mean, config.cap_log_sd)
        .map_err(|e| Error::Config(format!("cap distribution: {e}")))?;
    let price_dist = LogNormal::new(config.price_log_mean, config.price_log_sd)
        .map_err(|e| Error::Config(format!("price distribution: {e}")))?;
    let dt = 1.0 / tdy;
    let drift = (config.annual_drift - 0.5 * config.annual_volatility.powi(2)) * dt;
    let diffusion = config.annual_volatility * dt.sqrt();
    let split_prob = config.split_rate * dt;

    let records = schedule
        .par_iter()
        .enumerate()
        .map(|(k, firm)| {
            let mut rng = substream(config.seed, k as u64 + 1);
            let lifetime_days = hazard.sample_lifetime(&mut rng) * tdy;
            let last_day = if lifetime_days >= (n_days - firm.entry_day) as f64 {
                n_days - 1
            } else {
                firm.entry_day + lifetime_days.floor() as usize
            };
            let cap: f64 = cap_dist.sample(&mut rng);
            let mut price: f64 = price_dist.sample(&mut rng);
            let mut shares = (cap / price).round().max(1.0);

            let len = last_day - firm.entry_day + 1;
            let dates = calendar[firm.entry_day..=last_day].to_vec();
            let mut closes = Vec::with_capacity(len);
            let mut splits = Vec::new();
            let mut shares_obs = Vec::with_capacity(len / 20 + 2);
            for (i, &date) in dates.iter().enumerate() {
                if i > 0 {
                    price *= (drift + diffusion * sample_normal(&mut rng)).exp();
                }
                let mut observe = i == 0 || date.month() != dates[i - 1].month();
                if split_prob > 0.0 && i > 0 && rng.random::<f64>() < split_prob {
                    price /= 2.0;
                    shares *= 2.0;
                    splits.push((i, 2.0));
                    observe = true;
                }
                closes.push(price);
                if observe {
                    shares_obs.push((date, shares));
                }
            }
            SecurityRecord::from_columns(format!("F{k:06}"), dates, closes, splits, shares_obs)
        })
        .collect::<Result<Vec<_>>>()?;
    MarketDataset::from_records(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub config: SynthConfig,
    pub hazard: HazardModel,
    pub exit_quantiles: Vec<(f64, f64)>,
    pub n_securities: usize,
    pub n_trading_days: usize,
}

impl SynthMetadata {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Kaplan-Meier cumulative exit fraction at each horizon, from
/// `(lifetime in years, exited)` pairs; `exited == false` marks censoring.
pub fn survival_quantiles_from_lifetimes(lifetimes: &[(f64, bool)], horizons: &[f64]) -> Vec<f64> {
    let mut sorted = lifetimes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Product-limit steps: (time, survival just after time).
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut surv = 1.0;
    let mut at_risk = sorted.len();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let mut events = 0;
        let mut leaving = 0;
        while i < sorted.len() && sorted[i].0 == t {
            events += usize::from(sorted[i].1);
            leaving += 1;
            i += 1;
        }
        if events > 0 {
            surv *= 1.0 - events as f64 / at_risk as f64;
            steps.push((t, surv));
        }
        at_risk -= leaving;
    }
    horizons
        .iter()
        .map(|&h| {
            let k = steps.partition_point(|(t, _)| *t <= h);
            1.0 - k.checked_sub(1).map_or(1.0, |k| steps[k].1)
        })
        .collect()
}

/// Listed lifetimes of every security; those still trading on the last
/// calendar date are censored.
pub fn lifetimes(dataset: &MarketDataset) -> Vec<(f64, bool)> {
    let Some(&end) = dataset.calendar().last() else {
        return Vec::new();
    };
    dataset
        .securities()
        .map(|r| {
            let days = (r.delisting_date() - r.listing_date()).num_days() as f64;
            (days / DAYS_PER_YEAR, r.delisting_date() < end)
        })
        .collect()
}

pub fn survival_quantiles(dataset: &MarketDataset, horizons: &[f64]) -> Vec<f64> {
    survival_quantiles_from_lifetimes(&lifetimes(dataset), horizons)
}
