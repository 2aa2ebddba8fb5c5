// Bartlett-decomposition Wishart draws on independent seeded substreams,
// averaged in parallel.

use lookahead::rng::substream;
use lookahead::theory::WishartSampler;
use lookahead::Result;
use nalgebra::DMatrix;
use rayon::prelude::*;

pub fn run_example() -> Result<()> {
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.2, 0.4, 2.0, 0.5, 0.2, 0.5, 1.5]);
    let dof = 8;
    let sampler = WishartSampler::new(&sigma, dof)?;
    let draws = 20_000;
    let sum = (0..draws)
        .into_par_iter()
        .map(|i| sampler.sample(&mut substream(2024, i)))
        .reduce(|| DMatrix::zeros(3, 3), |a, b| a + b);
    println!("empirical mean / dof:{:.3}", sum / (draws as f64 * dof as f64));
    println!("scale matrix:{sigma:.3}");
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
