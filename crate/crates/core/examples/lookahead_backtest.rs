// The core experiment on one window: equal-weight buy-and-hold of the
// top names ranked at the start (ex-ante) against those ranked at the end
// (ex-post), with metrics, the long-short ratio and a t-test.

use lookahead::engine::{long_short_ratio, run_buy_and_hold, PortfolioSpec};
use lookahead::metrics::{period_returns, two_sample_t_pooled, Frequency, MetricsReport, TRADING_DAYS_PER_YEAR};
use lookahead::synthmarket::{calibrate_hazard, simulate_market, SynthConfig, EXIT_QUANTILES};
use lookahead::universe::{select_period_universe, Period, SelectionMode};
use lookahead::Result;

pub fn run_example() -> Result<()> {
    let cfg = SynthConfig { horizon_years: 20.0, seed: 7, ..SynthConfig::default() };
    let ds = simulate_market(&cfg, &calibrate_hazard(&EXIT_QUANTILES)?)?;
    let cal = ds.calendar();
    // Six years starting ten years in, so the population has mixed ages.
    let period = Period::new(cal[10 * 252], cal[16 * 252 - 1]);

    let mut curves = Vec::new();
    for mode in [SelectionMode::ExAnte, SelectionMode::ExPost] {
        let universe = select_period_universe(&ds, period, 100, mode)?;
        let dropped = universe.dropped_untradable;
        let curve = run_buy_and_hold(&ds, &PortfolioSpec::equal_weight(universe), period)?;
        let m = MetricsReport::from_curve(&curve, None, TRADING_DAYS_PER_YEAR)?;
        println!(
            "{mode:>7}: sharpe {:.3} cagr {:.2}% max drawdown {:.2}% (dropped {dropped})",
            m.sharpe_annualized.unwrap_or(f64::NAN),
            100.0 * m.cagr_continuous,
            100.0 * m.max_drawdown
        );
        curves.push(curve);
    }
    let ratio = long_short_ratio(&curves[1], &curves[0])?;
    println!("ex-post / ex-ante at the end: {:.4}", ratio.terminal());

    let annual = |i: usize| -> Result<Vec<f64>> {
        Ok(period_returns(&curves[i], Frequency::Annual, None)?.into_iter().map(|r| r.1).collect())
    };
    let t = two_sample_t_pooled(&annual(1)?, &annual(0)?)?;
    println!("annual returns t = {:.3}, p = {:.4}", t.t_statistic, t.p_value_two_sided);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
