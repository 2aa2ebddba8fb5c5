//! Performance and risk statistics on equity curves.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::engine::EquityCurve;
use crate::error::{Error, Result};
use crate::universe::Period;

pub const TRADING_DAYS_PER_YEAR: u32 = 252;
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `None` when the return series has zero variance.
    pub sharpe_annualized: Option<f64>,
    pub cagr_continuous: f64,
    pub max_drawdown: f64,
    pub n_observations: usize,
    pub period: Period,
}

impl MetricsReport {
    pub fn from_curve(curve: &EquityCurve, risk_free: Option<&[f64]>, periods_per_year: u32) -> Result<Self> {
        if curve.len() < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                got: curve.len(),
            });
        }
        let sharpe_annualized = match sharpe(curve, risk_free, periods_per_year) {
            Ok(s) => Some(s),
            Err(Error::UndefinedSharpe) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            sharpe_annualized,
            cagr_continuous: cagr_continuous(curve)?,
            max_drawdown: max_drawdown(curve.values()),
            n_observations: curve.len(),
            period: curve.period(),
        })
    }
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Annualized Sharpe ratio of simple returns, sample standard deviation.
pub fn sharpe_of_returns(returns: &[f64], periods_per_year: u32) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: returns.len(),
        });
    }
    let (mean, sd) = mean_and_sd(returns);
    // Relative threshold: a constant return series leaves rounding-level spread.
    if sd <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) || sd == 0.0 {
        return Err(Error::UndefinedSharpe);
    }
    Ok(mean / sd * f64::from(periods_per_year).sqrt())
}

/// `risk_free`, when given, holds one per-period rate per return.
pub fn sharpe(curve: &EquityCurve, risk_free: Option<&[f64]>, periods_per_year: u32) -> Result<f64> {
    let mut returns = curve.returns();
    if let Some(rf) = risk_free {
        if rf.len() != returns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} risk-free rates for {} returns",
                rf.len(),
                returns.len()
            )));
        }
        for (r, f) in returns.iter_mut().zip(rf) {
            *r -= f;
        }
    }
    sharpe_of_returns(&returns, periods_per_year)
}

/// `ln(v_T / v_0)` per 365.25-day year.
pub fn cagr_continuous(curve: &EquityCurve) -> Result<f64> {
    let (v0, vt) = (curve.values()[0], curve.terminal());
    if vt <= 0.0 {
        return Err(Error::NonPositiveValue(curve.last_date()));
    }
    let days = (curve.last_date() - curve.first_date()).num_days();
    if days <= 0 {
        return Err(Error::InvalidCurve("curve spans no time".into()));
    }
    Ok((vt / v0).ln() / (days as f64 / DAYS_PER_YEAR))
}

/// Largest peak-to-valley decline relative to the running peak.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        if peak > 0.0 {
            worst = worst.max((peak - v) / peak);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value_two_sided: f64,
    pub dof: f64,
}

/// Student two-sample t-test with a pooled (common) variance.
pub fn two_sample_t_pooled(a: &[f64], b: &[f64]) -> Result<TTest> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::TooFewObservations { needed: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, sa) = mean_and_sd(a);
    let (mb, sb) = mean_and_sd(b);
    let dof = na + nb - 2.0;
    let pooled = ((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / dof;
    if pooled <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest {
        t_statistic: t,
        p_value_two_sided: student_t_two_sided_p(t, dof),
        dof,
    })
}

/// One-sample t-test of zero mean, used on paired differences.
pub fn paired_t(differences: &[f64]) -> Result<TTest> {
    if differences.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: differences.len(),
        });
    }
    let n = differences.len() as f64;
    let (mean, sd) = mean_and_sd(differences);
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (sd / n.sqrt());
    Ok(TTest {
        t_statistic: t,
        p_value_two_sided: student_t_two_sided_p(t, n - 1.0),
        dof: n - 1.0,
    })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(x, dof / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` by the modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // The fraction converges fast only below the mean; use symmetry otherwise.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - ln_front.exp() * beta_fraction(1.0 - x, b, a) / b;
    }
    ln_front.exp() * beta_fraction(x, a, b) / a
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Daily,
    Monthly,
    Annual,
}

impl std::str::FromStr for Frequency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "daily" => Ok(Self::Daily),
            "monthly" => Ok(Self::Monthly),
            "annual" | "yearly" => Ok(Self::Annual),
            _ => Err(Error::Config(format!(
                "unknown frequency `{s}` (expected daily, monthly or annual)"
            ))),
        }
    }
}

/// Returns aggregated to calendar buckets, measured between bucket-end
/// values (the first bucket starts at the first point). Per-period
/// risk-free rates are compounded over each bucket and subtracted.
pub fn period_returns(curve: &EquityCurve, frequency: Frequency, risk_free: Option<&[f64]>) -> Result<Vec<(NaiveDate, f64)>> {
    let n = curve.len();
    if let Some(rf) = risk_free {
        if rf.len() + 1 != n {
            return Err(Error::DimensionMismatch(format!(
                "{} risk-free rates for {} returns",
                rf.len(),
                n - 1
            )));
        }
    }
    let bucket = |d: NaiveDate| match frequency {
        Frequency::Daily => (d.year(), d.ordinal()),
        Frequency::Monthly => (d.year(), d.month()),
        Frequency::Annual => (d.year(), 1),
    };
    let dates = curve.dates();
    let values = curve.values();
    let mut out = Vec::new();
    let mut anchor = 0;
    let mut rf_growth = 1.0;
    for t in 1..n {
        rf_growth *= 1.0 + risk_free.map_or(0.0, |rf| rf[t - 1]);
        let closes_bucket = t + 1 == n || bucket(dates[t + 1]) != bucket(dates[t]);
        if closes_bucket {
            let r = values[t] / values[anchor] - 1.0 - (rf_growth - 1.0);
            out.push((dates[t], r));
            anchor = t;
            rf_growth = 1.0;
        }
    }
    Ok(out)
}

/// Annual interest-rate observations, forward-filled onto trading dates.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskFreeSeries {
    observations: Vec<(NaiveDate, f64)>,
}

impl RiskFreeSeries {
    pub fn new(mut observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        observations.sort_by_key(|o| o.0);
        if observations.is_empty() {
            return Err(Error::Config("empty risk-free series".into()));
        }
        if let Some(w) = observations.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Config(format!("duplicate risk-free date {}", w[0].0)));
        }
        Ok(Self { observations })
    }

    /// Two columns `date,rate` with a header; rates are annual decimals.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut obs = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Parse { line, message };
            if row.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", row.len())));
            }
            let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                .map_err(|e| bad(format!("invalid date `{}`: {e}", &row[0])))?;
            let rate: f64 = row[1]
                .parse()
                .map_err(|_| bad(format!("invalid rate `{}`", &row[1])))?;
            if !(rate.is_finite() && rate > -1.0) {
                return Err(bad(format!("rate {rate} out of range")));
            }
            obs.push((date, rate));
        }
        Self::new(obs)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn annual_rate(&self, date: NaiveDate) -> Option<f64> {
        let k = self.observations.partition_point(|(d, _)| *d <= date);
        k.checked_sub(1).map(|k| self.observations[k].1)
    }

    /// Per-period rate for each step `dates[t-1] -> dates[t]`, using the
    /// annual rate in force at the start of the step, de-compounded to
    /// `(1 + r)^(1/periods_per_year) - 1`.
    pub fn per_period_rates(&self, dates: &[NaiveDate], periods_per_year: u32) -> Result<Vec<f64>> {
        dates
            .windows(2)
            .map(|w| {
                let r = self.annual_rate(w[0]).ok_or_else(|| {
                    Error::Contract(format!("risk-free series has no rate on or before {}", w[0]))
                })?;
                Ok((1.0 + r).powf(1.0 / f64::from(periods_per_year)) - 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_from_returns(returns: &[f64]) -> EquityCurve {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let mut values = vec![1.0];
        for r in returns {
            values.push(values.last().unwrap() * (1.0 + r));
        }
        let dates = (0..values.len() as u64).map(|i| start + chrono::Days::new(i)).collect();
        EquityCurve::new("t", dates, values).unwrap()
    }

    #[test]
    fn alternating_returns_have_zero_sharpe() {
        let s = sharpe_of_returns(&[0.01, -0.01, 0.01, -0.01], 252).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn constant_return_sharpe_undefined() {
        let c = curve_from_returns(&[0.001; 50]);
        assert!(matches!(sharpe(&c, None, 252), Err(Error::UndefinedSharpe)));
        let report = MetricsReport::from_curve(&c, None, 252).unwrap();
        assert_eq!(report.sharpe_annualized, None);
    }

    #[test]
    fn risk_free_is_subtracted() {
        let c = curve_from_returns(&[0.02, 0.0, 0.02, 0.0]);
        let s = sharpe(&c, Some(&[0.01; 4]), 1).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(sharpe(&c, Some(&[0.01; 3]), 1).is_err());
    }

    #[test]
    fn cagr_cases() {
        let d0 = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let flat = EquityCurve::new("f", vec![d0, d0 + chrono::Days::new(100)], vec![1.0, 1.0]).unwrap();
        assert_eq!(cagr_continuous(&flat).unwrap(), 0.0);

        let year = chrono::Days::new(365);
        let one = EquityCurve::new("e", vec![d0, d0 + year], vec![1.0, std::f64::consts::E]).unwrap();
        assert!((cagr_continuous(&one).unwrap() - 365.25 / 365.0).abs() < 1e-12);

        // 731 days = 2 years of 365.25 days up to 0.5 day.
        let span = chrono::Days::new(1461);
        let four = EquityCurve::new("x", vec![d0, d0 + span], vec![1.0, 1.5]).unwrap();
        assert!((cagr_continuous(&four).unwrap() - 1.5f64.ln() / 4.0).abs() < 1e-15);

        let zero = EquityCurve::new("z", vec![d0, d0 + year], vec![1.0, 0.0]).unwrap();
        assert!(cagr_continuous(&zero).is_err());
    }

    #[test]
    fn drawdown_cases() {
        assert_eq!(max_drawdown(&[1.0, 1.1, 1.2, 1.3]), 0.0);
        assert!((max_drawdown(&[1.0, 1.2, 0.9, 1.1]) - 0.25).abs() < 1e-15);
        assert_eq!(max_drawdown(&[1.0]), 0.0);
    }

    #[test]
    fn t_test_identical_samples() {
        let t = two_sample_t_pooled(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.t_statistic, 0.0);
        assert!((t.p_value_two_sided - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_test_hand_computed() {
        let t = two_sample_t_pooled(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        assert!((t.t_statistic - (-2.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
        assert_eq!(t.dof, 4.0);
        // Two-sided p for t = -2.4495 with 4 dof.
        assert!((t.p_value_two_sided - 0.070_483_996_910_219_93).abs() < 1e-12);
    }

    #[test]
    fn t_test_errors() {
        assert!(matches!(
            two_sample_t_pooled(&[1.0], &[1.0, 2.0]),
            Err(Error::TooFewObservations { .. })
        ));
        assert!(matches!(
            two_sample_t_pooled(&[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn incomplete_beta_known_values() {
        assert!((regularized_incomplete_beta(0.5, 2.0, 2.0) - 0.5).abs() < 1e-14);
        // I_x(1, b) = 1 - (1-x)^b
        assert!((regularized_incomplete_beta(0.3, 1.0, 3.0) - (1.0 - 0.7f64.powi(3))).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn period_returns_bucket_by_calendar() {
        let dates: Vec<NaiveDate> = ["2000-12-28", "2000-12-29", "2001-01-02", "2001-06-01", "2001-12-31", "2002-01-02"]
            .iter()
            .map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap())
            .collect();
        let c = EquityCurve::new("c", dates, vec![1.0, 1.1, 1.2, 1.3, 1.32, 1.0]).unwrap();
        let annual = period_returns(&c, Frequency::Annual, None).unwrap();
        assert_eq!(annual.len(), 3);
        assert!((annual[0].1 - 0.1).abs() < 1e-15);
        assert!((annual[1].1 - (1.32 / 1.1 - 1.0)).abs() < 1e-15);
        assert!((annual[2].1 - (1.0 / 1.32 - 1.0)).abs() < 1e-15);
        assert_eq!(period_returns(&c, Frequency::Daily, None).unwrap().len(), 5);
        assert_eq!(period_returns(&c, Frequency::Monthly, None).unwrap().len(), 5);
    }

    #[test]
    fn risk_free_forward_fill() {
        let text = "date,rate\n2000-01-01,0.05\n2001-01-01,0.0\n";
        let rf = RiskFreeSeries::read_csv(text.as_bytes()).unwrap();
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let rates = rf
            .per_period_rates(&[d("2000-06-01"), d("2000-06-02"), d("2001-01-02")], 252)
            .unwrap();
        assert!((rates[0] - (1.05f64.powf(1.0 / 252.0) - 1.0)).abs() < 1e-16);
        assert!((rates[1] - rates[0]).abs() < 1e-18);
        assert!(rf.per_period_rates(&[d("1999-01-01"), d("2000-06-02")], 252).is_err());
    }
}
