// Out-of-sample Sharpe ratio of estimated Markowitz weights against plain
// equal weights when the assets are statistically identical.

use lookahead::theory::mc_ew_vs_markowitz;
use lookahead::Result;
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> Result<()> {
    let n = 20;
    let mu = DVector::from_element(n, 0.01);
    let sigma = DMatrix::<f64>::identity(n, n) * 0.0025;
    for t in [30, 60, 240] {
        let r = mc_ew_vs_markowitz(&mu, &sigma, t, 3.0, 5_000, 1)?;
        println!(
            "T = {t:>3}: Markowitz {:.4} ± {:.4}, equal weight {:.4}, optimum {:.4}",
            r.markowitz_sharpe.mean, r.markowitz_sharpe.std_error, r.equal_weight_sharpe.mean, r.optimal_sharpe
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
