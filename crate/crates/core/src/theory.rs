//! Mean-variance estimation bias.
//!
//! With normally distributed excess returns, the plug-in Markowitz rule
//! `ω̂ = Σ̂⁻¹μ̂/γ` (sample covariance normalized by `1/T`) attains, under the
//! true parameters, an expected utility
//!
//! ```text
//! E U(ω̂) = [k·S*² − T·N·(T−2) / ((T−N−1)(T−N−2)(T−N−4))] / (2γ)
//! k      = T/(T−N−2) · (2 − T(T−2) / ((T−N−1)(T−N−4)))
//! ```
//!
//! where `S*² = μ'Σ⁻¹μ` is the squared maximal Sharpe ratio and
//! `U(ω*) = S*²/(2γ)`. Comparing a biased dataset "1" with a clean dataset
//! "2", the gap between the true utility difference and the expected
//! estimated one is therefore `Δ = (1−k)(S*₁² − S*₂²)/(2γ)`: the constant
//! term cancels and, because `k < 1`, Δ has the sign of `S*₁² − S*₂²`.
//!
//! Everything here is also checked by direct Monte-Carlo simulation.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};

#[derive(Clone, Debug, PartialEq)]
pub struct BiasModel {
    pub mu1: DVector<f64>,
    pub sigma1: DMatrix<f64>,
    pub mu2: DVector<f64>,
    pub sigma2: DMatrix<f64>,
    pub gamma: f64,
    pub t: usize,
    pub n: usize,
}

impl BiasModel {
    pub fn new(
        mu1: DVector<f64>,
        sigma1: DMatrix<f64>,
        mu2: DVector<f64>,
        sigma2: DMatrix<f64>,
        gamma: f64,
        t: usize,
    ) -> Result<Self> {
        let n = mu1.len();
        let model = Self {
            mu1,
            sigma1,
            mu2,
            sigma2,
            gamma,
            t,
            n,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.t <= self.n + 4 {
            return Err(Error::Domain(format!(
                "T must exceed N+4 (T = {}, N = {})",
                self.t, self.n
            )));
        }
        for (mu, sigma, k) in [(&self.mu1, &self.sigma1, 1), (&self.mu2, &self.sigma2, 2)] {
            if mu.len() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "mu{k} has length {} but N = {}",
                    mu.len(),
                    self.n
                )));
            }
            check_covariance(sigma, self.n)?;
        }
        Ok(())
    }

    /// The same model with datasets 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            mu1: self.mu2.clone(),
            sigma1: self.sigma2.clone(),
            mu2: self.mu1.clone(),
            sigma2: self.sigma1.clone(),
            ..self.clone()
        }
    }

    /// Parses the plain-text model format:
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// gamma  = 2
    /// T      = 60
    /// N      = 2
    /// mu1    = 0.02 0.03
    /// sigma1 = 0.04 0.01; 0.01 0.09
    /// mu2    = 0.01, 0.01
    /// sigma2 = 0.05 0; 0 0.08
    /// ```
    ///
    /// Matrix rows are separated by `;`, entries by whitespace or commas.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if fields.insert(key.clone(), (i as u64 + 1, value.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| Error::Config(format!("model file is missing `{key}`")))
        };
        let numbers = |line: u64, s: &str| -> Result<Vec<f64>> {
            s.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|p| !p.is_empty())
                .map(|p| {
                    p.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("invalid number `{p}`"),
                    })
                })
                .collect()
        };
        let scalar = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            match numbers(*line, v)?.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::Parse {
                    line: *line,
                    message: format!("`{key}` must be a single number"),
                }),
            }
        };
        let integer = |key: &str| -> Result<usize> {
            let x = scalar(key)?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::Domain(format!("`{key}` must be a non-negative integer, got {x}")));
            }
            Ok(x as usize)
        };
        let n = integer("n")?;
        let vector = |key: &str| -> Result<DVector<f64>> {
            let (line, v) = get(key)?;
            let xs = numbers(*line, v)?;
            if xs.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "`{key}` has {} entries but N = {n}",
                    xs.len()
                )));
            }
            Ok(DVector::from_vec(xs))
        };
        let matrix = |key: &str| -> Result<DMatrix<f64>> {
            let (line, v) = get(key)?;
            let rows = v.split(';').map(|r| numbers(*line, r)).collect::<Result<Vec<_>>>()?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch(format!("`{key}` must be {n}x{n}")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let model = Self {
            mu1: vector("mu1")?,
            sigma1: matrix("sigma1")?,
            mu2: vector("mu2")?,
            sigma2: matrix("sigma2")?,
            gamma: scalar("gamma")?,
            t: integer("t")?,
            n,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn check_covariance(sigma: &DMatrix<f64>, n: usize) -> Result<()> {
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{} but N = {n}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    factor(sigma).map(|_| ())
}

fn smallest_eigenvalue(sigma: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sigma.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factorization, reporting the smallest eigenvalue on failure.
fn factor(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch("covariance is not square".into()));
    }
    let chol = Cholesky::new(sigma.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: smallest_eigenvalue(sigma),
    })?;
    // Cholesky succeeds on numerically semidefinite input; reject a collapsed pivot.
    let l = chol.l_dirty();
    let diag_max = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let diag_min = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(diag_min > 1e-10 * diag_max) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: smallest_eigenvalue(sigma),
        });
    }
    Ok(chol)
}

fn check_len(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<()> {
    if mu.len() != sigma.nrows() || !sigma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {} but covariance is {}x{}",
            mu.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// `ω'μ − (γ/2)·ω'Σω`.
pub fn utility(omega: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>, gamma: f64) -> Result<f64> {
    check_len(mu, sigma)?;
    if omega.len() != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {} but mean has length {}",
            omega.len(),
            mu.len()
        )));
    }
    Ok(omega.dot(mu) - 0.5 * gamma * omega.dot(&(sigma * omega)))
}

/// Solves `Σω = μ/γ`.
pub fn markowitz_weights(mu: &DVector<f64>, sigma: &DMatrix<f64>, gamma: f64) -> Result<DVector<f64>> {
    check_len(mu, sigma)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(factor(sigma)?.solve(&(mu / gamma)))
}

/// `μ'Σ⁻¹μ`.
pub fn sharpe_sq_star(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    check_len(mu, sigma)?;
    let x = factor(sigma)?.solve(mu);
    Ok(mu.dot(&x).max(0.0))
}

/// `(1'μ)² / (1'Σ1)`, the squared Sharpe ratio of equal weights.
pub fn sharpe_sq_ew(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    check_len(mu, sigma)?;
    factor(sigma)?;
    Ok(mu.sum().powi(2) / sigma.sum())
}

/// `ω*'Σ⁻¹ω*`, the quadratic form as it is sometimes printed in place of
/// `μ'Σ⁻¹μ`; reported for comparison only.
pub fn omega_sigma_inv_omega(mu: &DVector<f64>, sigma: &DMatrix<f64>, gamma: f64) -> Result<f64> {
    let chol = factor(sigma)?;
    let omega = chol.solve(&(mu / gamma));
    Ok(omega.dot(&chol.solve(&omega)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEstimates {
    pub mu_hat: DVector<f64>,
    /// Normalized by `1/T`.
    pub sigma_hat: DMatrix<f64>,
    pub omega_hat: DVector<f64>,
}

/// Sample mean, `1/T` covariance and plug-in Markowitz weights of a `T×N`
/// return matrix (rows are periods).
pub fn sample_estimates(returns: &DMatrix<f64>, gamma: f64) -> Result<SampleEstimates> {
    let (t, n) = returns.shape();
    if n == 0 || t <= n {
        return Err(Error::Domain(format!("need T > N, got T = {t}, N = {n}")));
    }
    let mu_hat = DVector::from_fn(n, |j, _| returns.column(j).mean());
    let centered = DMatrix::from_fn(t, n, |i, j| returns[(i, j)] - mu_hat[j]);
    let sigma_hat = centered.transpose() * &centered / t as f64;
    let omega_hat = markowitz_weights(&mu_hat, &sigma_hat, gamma)?;
    Ok(SampleEstimates {
        mu_hat,
        sigma_hat,
        omega_hat,
    })
}

/// `T/(T−N−2) · (2 − T(T−2)/((T−N−1)(T−N−4)))`, defined for `T > N+4`.
pub fn k_factor(t: usize, n: usize) -> Result<f64> {
    if t <= n + 4 {
        return Err(Error::Domain(format!("T must exceed N+4 (T = {t}, N = {n})")));
    }
    let (t, n) = (t as f64, n as f64);
    Ok(t / (t - n - 2.0) * (2.0 - t * (t - 2.0) / ((t - n - 1.0) * (t - n - 4.0))))
}

/// Closed-form `E U(ω̂)` of the plug-in rule under the true parameters.
pub fn expected_sample_utility(mu: &DVector<f64>, sigma: &DMatrix<f64>, gamma: f64, t: usize) -> Result<f64> {
    let n = mu.len();
    let k = k_factor(t, n)?;
    let s2 = sharpe_sq_star(mu, sigma)?;
    let (tf, nf) = (t as f64, n as f64);
    let offset = tf * nf * (tf - 2.0) / ((tf - nf - 1.0) * (tf - nf - 2.0) * (tf - nf - 4.0));
    Ok((k * s2 - offset) / (2.0 * gamma))
}

/// `(1−k)(S*₁² − S*₂²)/(2γ)`.
pub fn delta_bias(model: &BiasModel) -> Result<f64> {
    model.validate()?;
    let k = k_factor(model.t, model.n)?;
    let gap = sharpe_sq_star(&model.mu1, &model.sigma1)? - sharpe_sq_star(&model.mu2, &model.sigma2)?;
    Ok((1.0 - k) * gap / (2.0 * model.gamma))
}

/// `(1/γ)(1−k)(S*₁² − S*₂²)`: twice [`delta_bias`], reported for reference.
pub fn delta_bias_unhalved(model: &BiasModel) -> Result<f64> {
    Ok(2.0 * delta_bias(model)?)
}

/// Wishart `W_N(Σ, dof)` sampler using the Bartlett decomposition.
#[derive(Clone, Debug)]
pub struct WishartSampler {
    scale_factor: DMatrix<f64>,
    chi: Vec<ChiSquared<f64>>,
}

impl WishartSampler {
    pub fn new(sigma: &DMatrix<f64>, dof: usize) -> Result<Self> {
        let n = sigma.nrows();
        if dof < n {
            return Err(Error::Domain(format!("Wishart dof {dof} is smaller than N = {n}")));
        }
        let scale_factor = factor(sigma)?.l();
        let chi = (0..n)
            .map(|i| ChiSquared::new((dof - i) as f64).expect("positive dof"))
            .collect();
        Ok(Self { scale_factor, chi })
    }

    pub fn dim(&self) -> usize {
        self.chi.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let la = &self.scale_factor * a;
        let w = &la * la.transpose();
        // Exact symmetry regardless of rounding in the product.
        DMatrix::from_fn(n, n, |i, j| if i >= j { w[(i, j)] } else { w[(j, i)] })
    }
}

pub fn sample_wishart(sigma: &DMatrix<f64>, dof: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = WishartSampler::new(sigma, dof)?;
    Ok(sampler.sample(&mut substream(seed, 0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

/// Draws `T` i.i.d. `N(μ, Σ)` rows and forms the `1/T` sample moments.
struct ReturnSampler {
    mu: Vec<f64>,
    l: DMatrix<f64>,
    t: usize,
}

impl ReturnSampler {
    fn new(mu: &DVector<f64>, sigma: &DMatrix<f64>, t: usize) -> Result<Self> {
        check_len(mu, sigma)?;
        Ok(Self {
            mu: mu.iter().copied().collect(),
            l: factor(sigma)?.l(),
            t,
        })
    }

    fn sample_moments(&self, rng: &mut SimRng) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.mu.len();
        let t = self.t;
        let mut rows = vec![0.0; t * n];
        let mut z = vec![0.0; n];
        for row in rows.chunks_exact_mut(n) {
            for zj in z.iter_mut() {
                *zj = rng.sample(StandardNormal);
            }
            for i in 0..n {
                let mut x = self.mu[i];
                for j in 0..=i {
                    x += self.l[(i, j)] * z[j];
                }
                row[i] = x;
            }
        }
        let mut mean = vec![0.0; n];
        for row in rows.chunks_exact(n) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= t as f64;
        }
        let mut cov = DMatrix::zeros(n, n);
        for row in rows.chunks_exact(n) {
            for i in 0..n {
                let di = row[i] - mean[i];
                for j in 0..=i {
                    cov[(i, j)] += di * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                let v = cov[(i, j)] / t as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        (DVector::from_vec(mean), cov)
    }

    fn plug_in_weights(&self, rng: &mut SimRng, gamma: f64) -> Option<DVector<f64>> {
        let (mu_hat, sigma_hat) = self.sample_moments(rng);
        markowitz_weights(&mu_hat, &sigma_hat, gamma).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasMonteCarlo {
    pub trials: usize,
    pub discarded: usize,
    pub expected_utility_1: McEstimate,
    pub expected_utility_2: McEstimate,
    /// `E U(ω̂₁) − E U(ω̂₂)`.
    pub estimated_gap: McEstimate,
    /// `U(ω*₁) − U(ω*₂)`.
    pub true_gap: f64,
    /// `true_gap − estimated_gap`.
    pub delta: McEstimate,
    pub delta_closed_form: f64,
}

/// Monte-Carlo estimate of the expected plug-in utilities of both datasets.
///
/// Trial `i` draws from substream `i` of `seed`, so the result is identical
/// for any thread count.
pub fn mc_estimated_bias(model: &BiasModel, trials: usize, seed: u64) -> Result<BiasMonteCarlo> {
    model.validate()?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let s1 = ReturnSampler::new(&model.mu1, &model.sigma1, model.t)?;
    let s2 = ReturnSampler::new(&model.mu2, &model.sigma2, model.t)?;
    let gamma = model.gamma;
    let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let w1 = s1.plug_in_weights(&mut rng, gamma);
            let w2 = s2.plug_in_weights(&mut rng, gamma);
            let u1 = utility(&w1?, &model.mu1, &model.sigma1, gamma).ok()?;
            let u2 = utility(&w2?, &model.mu2, &model.sigma2, gamma).ok()?;
            Some((u1, u2))
        })
        .collect();
    let kept: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::Domain("every trial had a singular sample covariance".into()));
    }
    let u1: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let u2: Vec<f64> = kept.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = kept.iter().map(|p| p.0 - p.1).collect();
    let true_gap = (sharpe_sq_star(&model.mu1, &model.sigma1)? - sharpe_sq_star(&model.mu2, &model.sigma2)?)
        / (2.0 * gamma);
    let estimated_gap = McEstimate::from_samples(&diff);
    Ok(BiasMonteCarlo {
        trials,
        discarded: trials - kept.len(),
        expected_utility_1: McEstimate::from_samples(&u1),
        expected_utility_2: McEstimate::from_samples(&u2),
        estimated_gap,
        true_gap,
        delta: McEstimate {
            mean: true_gap - estimated_gap.mean,
            std_error: estimated_gap.std_error,
        },
        delta_closed_form: delta_bias(model)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversificationMonteCarlo {
    pub trials: usize,
    pub discarded: usize,
    /// True Sharpe ratio of the plug-in Markowitz weights.
    pub markowitz_sharpe: McEstimate,
    /// True Sharpe ratio of equal weights (constant across trials).
    pub equal_weight_sharpe: McEstimate,
    /// `sqrt(S*²)`, the best attainable Sharpe ratio.
    pub optimal_sharpe: f64,
}

fn true_sharpe(omega: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Option<f64> {
    let var = omega.dot(&(sigma * omega));
    (var > 0.0).then(|| omega.dot(mu) / var.sqrt())
}

/// Out-of-sample Sharpe ratios of the plug-in Markowitz rule against naive
/// equal weighting, each estimated from a simulated history of length `t`.
pub fn mc_ew_vs_markowitz(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    t: usize,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<DiversificationMonteCarlo> {
    let n = mu.len();
    check_covariance(sigma, n)?;
    if t <= n {
        return Err(Error::Domain(format!("need T > N, got T = {t}, N = {n}")));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let sampler = ReturnSampler::new(mu, sigma, t)?;
    let ones = DVector::from_element(n, 1.0 / n as f64);
    let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let w = sampler.plug_in_weights(&mut rng, gamma)?;
            let m = true_sharpe(&w, mu, sigma)?;
            let e = true_sharpe(&ones, mu, sigma)?;
            Some((m, e))
        })
        .collect();
    let kept: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::Domain("every trial was degenerate".into()));
    }
    let m: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let e: Vec<f64> = kept.iter().map(|p| p.1).collect();
    Ok(DiversificationMonteCarlo {
        trials,
        discarded: trials - kept.len(),
        markowitz_sharpe: McEstimate::from_samples(&m),
        equal_weight_sharpe: McEstimate::from_samples(&e),
        optimal_sharpe: sharpe_sq_star(mu, sigma)?.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn utility_scalar_cases() {
        let mu = DVector::from_vec(vec![0.1]);
        let sigma = DMatrix::from_element(1, 1, 0.04);
        assert_eq!(utility(&DVector::zeros(1), &mu, &sigma, 2.0).unwrap(), 0.0);
        let u = utility(&DVector::from_vec(vec![1.0]), &mu, &sigma, 2.0).unwrap();
        assert!((u - 0.06).abs() < 1e-15);
        assert!(utility(&DVector::zeros(2), &mu, &sigma, 2.0).is_err());
    }

    #[test]
    fn markowitz_identity_and_homogeneity() {
        let mu = DVector::from_vec(vec![0.1, 0.2]);
        let w = markowitz_weights(&mu, &ident(2), 1.0).unwrap();
        assert!((w - &mu).amax() < 1e-15);
        let w2 = markowitz_weights(&mu, &ident(2), 2.0).unwrap();
        assert!((w2 * 2.0 - &mu).amax() < 1e-15);
    }

    #[test]
    fn indefinite_covariance_reports_eigenvalue() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match markowitz_weights(&DVector::zeros(2), &sigma, 1.0) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn squared_sharpe_cases() {
        let mu = DVector::from_vec(vec![0.3, 0.4]);
        assert!((sharpe_sq_star(&mu, &ident(2)).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(sharpe_sq_star(&DVector::zeros(2), &ident(2)).unwrap(), 0.0);
        assert_eq!(sharpe_sq_ew(&DVector::zeros(2), &ident(2)).unwrap(), 0.0);
        let mu1 = DVector::from_vec(vec![0.05]);
        let s1 = DMatrix::from_element(1, 1, 0.02);
        let ew = sharpe_sq_ew(&mu1, &s1).unwrap();
        assert!((ew - sharpe_sq_star(&mu1, &s1).unwrap()).abs() < 1e-15);
        assert!((ew - 0.125).abs() < 1e-15);
    }

    #[test]
    fn sample_estimates_hand_values() {
        let r = DMatrix::from_column_slice(3, 1, &[0.0, 0.1, 0.2]);
        let est = sample_estimates(&r, 1.0).unwrap();
        assert!((est.mu_hat[0] - 0.1).abs() < 1e-15);
        assert!((est.sigma_hat[(0, 0)] - 0.02 / 3.0).abs() < 1e-15);
        assert!((est.omega_hat[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_are_singular() {
        let r = DMatrix::from_fn(10, 3, |_, j| j as f64);
        assert!(matches!(
            sample_estimates(&r, 1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn k_factor_values() {
        let direct = 120.0 / 108.0 * (2.0 - 14160.0 / 11554.0);
        assert!((k_factor(120, 10).unwrap() - direct).abs() < 1e-12);
        assert!((k_factor(120, 10).unwrap() - 0.8605).abs() < 1e-4);
        assert!((k_factor(10_000, 10).unwrap() - 1.0).abs() < 0.01);
        assert!(k_factor(14, 10).is_err());
        assert!(k_factor(15, 10).is_ok());
    }

    fn diag_model(s1: f64, s2: f64, gamma: f64, t: usize, n: usize) -> BiasModel {
        // mu = s/sqrt(n) * 1 with identity covariance gives S*^2 = s^2.
        let mu = |s: f64| DVector::from_element(n, s / (n as f64).sqrt());
        BiasModel::new(mu(s1), ident(n), mu(s2), ident(n), gamma, t).unwrap()
    }

    #[test]
    fn delta_values() {
        let m = diag_model(0.5, 0.3, 1.0, 120, 10);
        let k = k_factor(120, 10).unwrap();
        let delta = delta_bias(&m).unwrap();
        assert!((delta - (1.0 - k) * 0.16 / 2.0).abs() < 1e-14);
        assert!((delta - 0.011_16).abs() < 1e-4);
        assert!((delta_bias_unhalved(&m).unwrap() - 0.0223).abs() < 1e-4);
        assert!(delta > 0.0);

        let sym = diag_model(0.4, 0.4, 3.0, 60, 5);
        assert_eq!(delta_bias(&sym).unwrap(), 0.0);
        let swapped = delta_bias(&m.swapped()).unwrap();
        assert!((swapped + delta).abs() < 1e-15);
    }

    #[test]
    fn model_validation() {
        let err = BiasModel::new(
            DVector::zeros(10),
            ident(10),
            DVector::zeros(10),
            ident(10),
            1.0,
            13,
        )
        .unwrap_err();
        assert!(err.to_string().contains("T must exceed N+4"));
        assert!(BiasModel::new(DVector::zeros(2), ident(2), DVector::zeros(2), ident(2), 0.0, 60).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(BiasModel::new(DVector::zeros(2), asym, DVector::zeros(2), ident(2), 1.0, 60).is_err());
    }

    #[test]
    fn model_file_parses() {
        let text = "\
# two assets
gamma = 2
T = 60
N = 2
mu1 = 0.02 0.03
sigma1 = 0.04 0.01; 0.01 0.09
mu2 = 0.01, 0.01
sigma2 = 0.05 0; 0 0.08
";
        let m = BiasModel::parse(text).unwrap();
        assert_eq!((m.t, m.n, m.gamma), (60, 2, 2.0));
        assert_eq!(m.sigma1[(1, 0)], 0.01);
        assert!(BiasModel::parse(&text.replace("T = 60", "T = 6")).is_err());
        assert!(BiasModel::parse(&text.replace("mu2 = 0.01, 0.01", "mu2 = 0.01")).is_err());
        assert!(BiasModel::parse(&text.replace("gamma = 2", "")).is_err());
    }

    #[test]
    fn wishart_draws_are_symmetric_psd() {
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let sampler = WishartSampler::new(&sigma, 5).unwrap();
        let mut rng = substream(3, 0);
        for _ in 0..200 {
            let w = sampler.sample(&mut rng);
            assert_eq!(w, w.transpose());
            assert!(smallest_eigenvalue(&w) > -1e-12);
        }
        assert!(WishartSampler::new(&sigma, 2).is_err());
        assert_eq!(sample_wishart(&sigma, 4, 9).unwrap(), sample_wishart(&sigma, 4, 9).unwrap());
    }

    #[test]
    fn equal_weight_sharpe_has_no_variance() {
        let mu = DVector::from_element(4, 0.05);
        let r = mc_ew_vs_markowitz(&mu, &ident(4), 30, 1.0, 50, 1).unwrap();
        assert!(r.equal_weight_sharpe.std_error < 1e-15);
        assert!((r.equal_weight_sharpe.mean - 0.1).abs() < 1e-12);
    }
}
