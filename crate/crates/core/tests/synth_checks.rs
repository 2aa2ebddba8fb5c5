use lookahead::marketdata::ingest_reader;
use lookahead::synthmarket::{
    calibrate_hazard, lifetimes, simulate_market, survival_quantiles, survival_quantiles_from_lifetimes, HazardModel,
    SynthConfig, EXIT_QUANTILES,
};
use lookahead::universe::{select_period_universe, Period, SelectionMode};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_firms_initial: 60,
        horizon_years: 6.0,
        entry_rate: 8.0,
        split_rate: 0.2,
        seed,
        ..SynthConfig::default()
    }
}

fn hazard() -> HazardModel {
    calibrate_hazard(&EXIT_QUANTILES).unwrap()
}

#[test]
fn generated_data_round_trips_through_the_file_format() {
    let ds = simulate_market(&small(1), &hazard()).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let back = ingest_reader(buf.as_slice()).unwrap();
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(buf, again);
    assert_eq!(back.len(), ds.len());
    assert!(ds.securities().any(|r| (0..r.len()).any(|i| r.split_factor_at_index(i) != 1.0)));
}

#[test]
fn same_seed_same_bytes() {
    let bytes = |seed| {
        let mut buf = Vec::new();
        simulate_market(&small(seed), &hazard()).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(5), bytes(5));
    assert_ne!(bytes(5), bytes(6));
}

#[test]
fn flat_market_has_identical_universes() {
    let cfg = SynthConfig {
        n_firms_initial: 40,
        horizon_years: 3.0,
        annual_drift: 0.0,
        annual_volatility: 0.0,
        entry_rate: 0.0,
        ..SynthConfig::default()
    };
    let ds = simulate_market(&cfg, &HazardModel::constant(1e-12).unwrap()).unwrap();
    assert!(ds.securities().all(|r| r.closes().iter().all(|c| *c == r.closes()[0])));
    let cal = ds.calendar();
    let p = Period::new(cal[0], *cal.last().unwrap());
    let a = select_period_universe(&ds, p, 10, SelectionMode::ExAnte).unwrap();
    let b = select_period_universe(&ds, p, 10, SelectionMode::ExPost).unwrap();
    assert_eq!(a.members, b.members);
}

#[test]
fn negligible_hazard_means_no_exits() {
    let cfg = SynthConfig { n_firms_initial: 30, horizon_years: 5.0, entry_rate: 0.0, ..SynthConfig::default() };
    let ds = simulate_market(&cfg, &HazardModel::constant(1e-12).unwrap()).unwrap();
    assert_eq!(ds.len(), 30);
    let last = *ds.calendar().last().unwrap();
    assert!(ds.securities().all(|r| r.delisting_date() == last));
    assert_eq!(survival_quantiles(&ds, &[1.0, 4.0]), vec![0.0, 0.0]);
}

#[test]
fn survival_matches_direct_scan_when_uncensored() {
    // Every firm exits well before the horizon; only the last one to exit,
    // which ends the calendar, reads as censored. The product-limit
    // estimate then reduces to a plain count.
    let cfg = SynthConfig { n_firms_initial: 300, horizon_years: 30.0, entry_rate: 0.0, seed: 3, ..SynthConfig::default() };
    let ds = simulate_market(&cfg, &HazardModel::constant(2.0).unwrap()).unwrap();
    let lt = lifetimes(&ds);
    assert!(lt.iter().filter(|l| !l.1).count() <= 1);
    for h in [0.1, 0.5, 1.0, 2.0] {
        let direct = lt.iter().filter(|l| l.0 <= h).count() as f64 / lt.len() as f64;
        let km = survival_quantiles(&ds, &[h])[0];
        assert!((km - direct).abs() < 1e-12, "{h}: {km} vs {direct}");
    }
}

#[test]
fn kaplan_meier_small_cases() {
    let exact = [(1.0, true), (2.0, true), (3.0, true)];
    assert!((survival_quantiles_from_lifetimes(&exact, &[2.0])[0] - 2.0 / 3.0).abs() < 1e-15);
    let censored = [(1.0, true), (2.0, false), (3.0, true)];
    // S = 2/3 after t=1, the censored firm leaves the risk set, S = 0 at 3.
    let q = survival_quantiles_from_lifetimes(&censored, &[1.5, 3.0]);
    assert!((q[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((q[1] - 1.0).abs() < 1e-15);
}

#[test]
fn horizon_must_be_positive() {
    let cfg = SynthConfig { horizon_years: 0.0, ..SynthConfig::default() };
    assert!(cfg.validate().is_err());
    let cfg = SynthConfig { annual_volatility: -0.1, ..SynthConfig::default() };
    assert!(cfg.validate().is_err());
}
