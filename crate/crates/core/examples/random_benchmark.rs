// Rank a strategy against random strategies run on the same (biased)
// universe: here the biased ex-post buy-and-hold itself is the candidate.

use lookahead::engine::{run_buy_and_hold, PortfolioSpec};
use lookahead::metrics::{MetricsReport, TRADING_DAYS_PER_YEAR};
use lookahead::randomstrat::{percentile_score, run_ensemble, Metric, RandomStrategyConfig};
use lookahead::synthmarket::{calibrate_hazard, simulate_market, SynthConfig, EXIT_QUANTILES};
use lookahead::universe::{select_period_universe, Period, SelectionMode};
use lookahead::Result;

pub fn run_example() -> Result<()> {
    let cfg = SynthConfig { n_firms_initial: 400, horizon_years: 6.0, entry_rate: 36.0, seed: 5, ..SynthConfig::default() };
    let ds = simulate_market(&cfg, &calibrate_hazard(&EXIT_QUANTILES)?)?;
    let cal = ds.calendar();
    let period = Period::new(cal[0], *cal.last().unwrap());

    let biased = select_period_universe(&ds, period, 100, SelectionMode::ExPost)?;
    let clean = select_period_universe(&ds, period, 100, SelectionMode::ExAnte)?;
    let curve = run_buy_and_hold(&ds, &PortfolioSpec::equal_weight(biased.clone()), period)?;
    let candidate = MetricsReport::from_curve(&curve, None, TRADING_DAYS_PER_YEAR)?;

    for (name, universe) in [("ex-post", biased), ("ex-ante", clean)] {
        let rs = RandomStrategyConfig { ensemble_size: 100, master_seed: 11, ..RandomStrategyConfig::new(universe) };
        let ens = run_ensemble(&ds, &rs)?;
        println!(
            "random strategies on the {name} universe: CAGR {:.2}% ± {:.2}%, invested {:.3}, holding {:.2} days",
            100.0 * ens.mean_cagr,
            100.0 * ens.sd_cagr,
            ens.realized_mean_leverage,
            ens.realized_mean_holding_days
        );
        println!(
            "  candidate percentile: CAGR {:.1}, Sharpe {:.1}",
            percentile_score(&candidate, &ens, Metric::Cagr)?,
            percentile_score(&candidate, &ens, Metric::Sharpe)?
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
