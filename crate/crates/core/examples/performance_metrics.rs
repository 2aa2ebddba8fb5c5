// Sharpe ratio, continuously compounded return, drawdown and the pooled
// t-test on hand-made series.

use chrono::{Days, NaiveDate};
use lookahead::engine::EquityCurve;
use lookahead::metrics::{
    cagr_continuous, max_drawdown, sharpe, two_sample_t_pooled, RiskFreeSeries, TRADING_DAYS_PER_YEAR,
};
use lookahead::Result;

pub fn run_example() -> Result<()> {
    let d0 = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
    let values = [1.0, 1.02, 0.99, 1.05, 0.97, 1.03, 1.08, 1.04, 1.10];
    let dates = (0..values.len() as u64).map(|i| d0 + Days::new(i)).collect();
    let curve = EquityCurve::new("toy", dates, values.to_vec())?;

    println!("sharpe (rf = 0): {:.4}", sharpe(&curve, None, TRADING_DAYS_PER_YEAR)?);
    let rf = RiskFreeSeries::new(vec![(d0, 0.03)])?.per_period_rates(curve.dates(), TRADING_DAYS_PER_YEAR)?;
    println!("sharpe (rf = 3%): {:.4}", sharpe(&curve, Some(&rf), TRADING_DAYS_PER_YEAR)?);
    println!("cagr: {:.4}", cagr_continuous(&curve)?);
    println!("max drawdown: {:.4}", max_drawdown(curve.values()));

    let t = two_sample_t_pooled(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0, 5.0])?;
    println!("t = {:.6}, p = {:.6}, dof = {}", t.t_statistic, t.p_value_two_sided, t.dof);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
