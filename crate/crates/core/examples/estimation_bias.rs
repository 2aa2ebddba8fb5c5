// Closed-form estimation bias of the plug-in Markowitz rule for a biased
// and a clean dataset, checked by Monte-Carlo.

use lookahead::theory::{delta_bias, expected_sample_utility, k_factor, mc_estimated_bias, sharpe_sq_star, BiasModel};
use lookahead::Result;

const MODEL: &str = "
gamma  = 2
T      = 60
N      = 3
mu1    = 0.04 0.05 0.06
sigma1 = 0.04 0.01 0.00; 0.01 0.05 0.01; 0.00 0.01 0.06
mu2    = 0.02 0.02 0.03
sigma2 = 0.04 0.01 0.00; 0.01 0.05 0.01; 0.00 0.01 0.06
";

pub fn run_example() -> Result<()> {
    let model = BiasModel::parse(MODEL)?;
    println!("k(120, 10) = {:.6}", k_factor(120, 10)?);
    println!("k({}, {}) = {:.6}", model.t, model.n, k_factor(model.t, model.n)?);
    for (name, mu, sigma) in [("biased", &model.mu1, &model.sigma1), ("clean", &model.mu2, &model.sigma2)] {
        println!(
            "{name:>6}: S*^2 = {:.4}, E U(plug-in) = {:.5}",
            sharpe_sq_star(mu, sigma)?,
            expected_sample_utility(mu, sigma, model.gamma, model.t)?
        );
    }
    let mc = mc_estimated_bias(&model, 20_000, 3)?;
    println!(
        "Delta: closed form {:.6}, Monte-Carlo {:.6} ± {:.6}",
        delta_bias(&model)?,
        mc.delta.mean,
        mc.delta.std_error
    );
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
