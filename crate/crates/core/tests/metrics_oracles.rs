mod common;

use common::{brute_drawdown, day, pooled_t_reference};
use lookahead::engine::EquityCurve;
use lookahead::metrics::{
    cagr_continuous, max_drawdown, paired_t, period_returns, regularized_incomplete_beta, sharpe, two_sample_t_pooled,
    Frequency, RiskFreeSeries,
};
use lookahead::rng::substream;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

fn curve(values: &[f64]) -> EquityCurve {
    EquityCurve::normalized("c", (0..values.len() as u64).map(day).collect(), values.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn drawdown_matches_brute_force(v in prop::collection::vec(0.01f64..100.0, 1..200)) {
        prop_assert_eq!(max_drawdown(&v), brute_drawdown(&v));
    }

    #[test]
    fn sharpe_matches_two_pass_formula(v in prop::collection::vec(0.5f64..2.0, 3..100)) {
        let c = curve(&v);
        let r: Vec<f64> = v.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let n = r.len() as f64;
        let m = r.iter().sum::<f64>() / n;
        let sd = (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let s = sharpe(&c, None, 252).unwrap();
        prop_assert!((s - m / sd * 252f64.sqrt()).abs() <= 1e-9 * s.abs().max(1.0));
    }

    #[test]
    fn t_test_matches_reference(a in prop::collection::vec(-5.0f64..5.0, 2..30), b in prop::collection::vec(-5.0f64..5.0, 2..30)) {
        let got = two_sample_t_pooled(&a, &b).unwrap();
        let (t, dof) = pooled_t_reference(&a, &b);
        prop_assert!((got.t_statistic - t).abs() <= 1e-10 * t.abs().max(1.0));
        let p = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, dof).unwrap().cdf(t.abs()));
        prop_assert!((got.p_value_two_sided - p).abs() <= 1e-10);
        let swapped = two_sample_t_pooled(&b, &a).unwrap();
        prop_assert_eq!(swapped.t_statistic, -got.t_statistic);
        prop_assert!((swapped.p_value_two_sided - got.p_value_two_sided).abs() <= 1e-15);
    }

    #[test]
    fn incomplete_beta_matches_statrs(x in 0.0f64..=1.0, a in 0.1f64..60.0, b in 0.1f64..60.0) {
        let ours = regularized_incomplete_beta(x, a, b);
        prop_assert!((ours - beta_reg(a, b, x)).abs() <= 1e-10);
    }
}

#[test]
fn p_values_are_calibrated_under_the_null() {
    let sims = 4000;
    let rejections = (0..sims)
        .filter(|&i| {
            let mut rng = substream(17, i);
            let a: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..11).map(|_| StandardNormal.sample(&mut rng)).collect();
            two_sample_t_pooled(&a, &b).unwrap().p_value_two_sided < 0.05
        })
        .count();
    let rate = rejections as f64 / sims as f64;
    assert!((rate - 0.05).abs() < 0.015, "rejection rate {rate}");
}

#[test]
fn paired_t_on_known_differences() {
    let t = paired_t(&[1.0, 2.0, 3.0]).unwrap();
    // mean 2, sd 1, n 3.
    assert!((t.t_statistic - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    assert_eq!(t.dof, 2.0);
}

#[test]
fn cagr_is_log_growth_per_year() {
    let d0 = day(0);
    let c = EquityCurve::new("c", vec![d0, d0 + chrono::Days::new(730)], vec![1.0, 1.21]).unwrap();
    let years = 730.0 / 365.25;
    assert!((cagr_continuous(&c).unwrap() - 1.21f64.ln() / years).abs() < 1e-15);
}

#[test]
fn risk_free_rates_deflate_period_returns() {
    let dates: Vec<_> = (0..400u64).map(day).collect();
    let values: Vec<f64> = (0..400).map(|i| 1.0005f64.powi(i)).collect();
    let c = EquityCurve::new("g", dates.clone(), values).unwrap();
    let rf = RiskFreeSeries::new(vec![(day(0), 0.05)]).unwrap();
    let rates = rf.per_period_rates(&dates, 252).unwrap();
    assert!((rates[0] - (1.05f64.powf(1.0 / 252.0) - 1.0)).abs() < 1e-16);
    let gross = period_returns(&c, Frequency::Annual, None).unwrap();
    let net = period_returns(&c, Frequency::Annual, Some(&rates)).unwrap();
    assert_eq!(gross.len(), 2);
    for ((d1, g), (d2, n)) in gross.iter().zip(&net) {
        assert_eq!(d1, d2);
        assert!(n < g);
    }
}
