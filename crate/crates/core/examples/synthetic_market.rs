// Calibrate the exit hazard to the target exit quantiles, simulate a market and
// compare its Kaplan-Meier exit fractions with the targets.

use lookahead::synthmarket::{calibrate_hazard, simulate_market, survival_quantiles, SynthConfig, EXIT_QUANTILES};
use lookahead::Result;

pub fn run_example() -> Result<()> {
    let hazard = calibrate_hazard(&EXIT_QUANTILES)?;
    println!("hazard breakpoints {:?} rates {:?}", hazard.breakpoints, hazard.rates);

    let cfg = SynthConfig { seed: 42, ..SynthConfig::default() };
    let ds = simulate_market(&cfg, &hazard)?;
    println!(
        "{} firms over {} trading days ({} bars)",
        ds.len(),
        ds.calendar().len(),
        ds.total_bars()
    );
    let horizons: Vec<f64> = EXIT_QUANTILES.iter().map(|q| q.0).collect();
    for ((years, target), got) in EXIT_QUANTILES.iter().zip(survival_quantiles(&ds, &horizons)) {
        println!("exited after {years:>4} years: {got:.3} (target {target})");
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
