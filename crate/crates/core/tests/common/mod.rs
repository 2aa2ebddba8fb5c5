#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use lookahead::marketdata::{Bar, MarketDataset, SecurityRecord};
use lookahead::universe::{Member, Period, SelectionMode, UniverseSnapshot};

pub fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + Days::new(i)
}

/// A record listed from grid day `first` with consecutive daily closes,
/// `splits` as `(bar index, factor)` and a single shares observation.
pub fn record(id: &str, first: u64, closes: &[f64], splits: &[(usize, f64)], shares: f64) -> SecurityRecord {
    let bars = closes
        .iter()
        .enumerate()
        .map(|(i, &close)| Bar {
            date: day(first + i as u64),
            close,
            split_factor: splits.iter().find(|s| s.0 == i).map_or(1.0, |s| s.1),
        })
        .collect();
    SecurityRecord::new(id, bars, vec![(day(first), shares)]).unwrap()
}

pub fn dataset(records: Vec<SecurityRecord>) -> MarketDataset {
    MarketDataset::from_records(records).unwrap()
}

/// A snapshot holding exactly `ids`, bypassing cap ranking.
pub fn snapshot(ids: &[&str], period: Period) -> UniverseSnapshot {
    UniverseSnapshot {
        as_of: period.start,
        mode: SelectionMode::ExAnte,
        n_requested: ids.len(),
        members: ids
            .iter()
            .enumerate()
            .map(|(i, id)| Member {
                security_id: id.to_string(),
                cap_rank: i + 1,
                market_cap: 1.0,
            })
            .collect(),
        period,
        dropped_untradable: 0,
    }
}

/// Three assets over five days; C delists after day 3 (grid index 2).
/// Returns the dataset, the period and the hand-computed ledger under
/// equal weights and cash at zero.
pub fn hand_ledger() -> (MarketDataset, Period, Vec<f64>) {
    let ds = dataset(vec![
        record("A", 0, &[10.0, 11.0, 12.0, 11.0, 13.0], &[], 1e6),
        record("B", 0, &[20.0, 18.0, 18.0, 21.0, 24.0], &[], 1e6),
        record("C", 0, &[5.0, 6.0, 4.0], &[], 1e6),
    ]);
    // Units held: A 1/30, B 1/60, C 1/15; C's 4/15 becomes cash on day 3.
    let expected = vec![
        1.0,
        11.0 / 30.0 + 18.0 / 60.0 + 6.0 / 15.0,
        12.0 / 30.0 + 18.0 / 60.0 + 4.0 / 15.0,
        11.0 / 30.0 + 21.0 / 60.0 + 4.0 / 15.0,
        13.0 / 30.0 + 24.0 / 60.0 + 4.0 / 15.0,
    ];
    (ds, Period::new(day(0), day(4)), expected)
}

/// Largest relative decline from a running peak, by checking every pair.
pub fn brute_drawdown(v: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..v.len() {
        for i in 0..=j {
            worst = worst.max((v[i] - v[j]) / v[i]);
        }
    }
    worst
}

/// Pooled two-sample t statistic written out from the textbook formula.
pub fn pooled_t_reference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ssa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    let dof = na + nb - 2.0;
    let sp2 = (ssa + ssb) / dof;
    ((ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt(), dof)
}
