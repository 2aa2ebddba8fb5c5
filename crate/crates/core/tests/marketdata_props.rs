mod common;

use common::{day, record};
use lookahead::marketdata::{ingest_reader, Bar, MarketDataset, SecurityRecord};
use lookahead::Error;
use proptest::prelude::*;

fn split_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..200.0, n),
            prop::collection::vec(prop::sample::select(vec![1.0, 1.0, 1.0, 2.0, 3.0, 0.5, 1.25]), n),
        )
    })
}

proptest! {
    /// Holding one share from bar i and accumulating split shares gives the
    /// same growth as the adjusted close series.
    #[test]
    fn adjusted_returns_match_share_count((closes, factors) in split_strategy()) {
        let splits: Vec<(usize, f64)> = factors.iter().enumerate().skip(1)
            .filter(|(_, f)| **f != 1.0).map(|(i, f)| (i, *f)).collect();
        let r = record("X", 0, &closes, &splits, 100.0);
        for i in 0..closes.len() {
            let mut count = 1.0;
            for j in i..closes.len() {
                if j > i {
                    count *= factors[j];
                }
                let held = count * closes[j] / closes[i];
                let adjusted = r.adjusted_close_at_index(j) / r.adjusted_close_at_index(i);
                prop_assert!((held - adjusted).abs() <= 1e-12 * held.max(1.0));
            }
        }
        // The final bar is never rescaled.
        let last = closes.len() - 1;
        prop_assert_eq!(r.adjusted_close_at_index(last), closes[last]);
    }

    #[test]
    fn active_universe_matches_scan(spans in prop::collection::vec((0u64..30, 1usize..30), 1..12), probe in 0u64..60) {
        let recs: Vec<SecurityRecord> = spans.iter().enumerate()
            .map(|(k, &(first, len))| record(&format!("S{k:02}"), first, &vec![10.0; len], &[], 5.0))
            .collect();
        let ds = MarketDataset::from_records(recs).unwrap();
        let date = day(probe);
        match ds.active_universe(date) {
            Ok(active) => {
                let brute: Vec<String> = spans.iter().enumerate()
                    .filter(|(_, &(first, len))| probe >= first && probe < first + len as u64)
                    .map(|(k, _)| format!("S{k:02}")).collect();
                let got: Vec<String> = active.iter().map(|s| s.to_string()).collect();
                prop_assert_eq!(got, brute);
            }
            Err(Error::UnknownDate(_)) => prop_assert!(!ds.calendar().contains(&date)),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn csv_round_trip(spans in prop::collection::vec((0u64..10, 1usize..15, 1.0f64..1e3), 1..6)) {
        let recs: Vec<SecurityRecord> = spans.iter().enumerate().map(|(k, &(first, len, p))| {
            let closes: Vec<f64> = (0..len).map(|i| p * (1.0 + 0.013 * i as f64)).collect();
            let splits = if len > 3 { vec![(2, 2.0)] } else { vec![] };
            record(&format!("R{k}"), first, &closes, &splits, 1234.5 + k as f64)
        }).collect();
        let ds = MarketDataset::from_records(recs).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = ingest_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(back.calendar(), ds.calendar());
        for (a, b) in ds.securities().zip(back.securities()) {
            prop_assert_eq!(a.id(), b.id());
            prop_assert_eq!(a.dates(), b.dates());
            prop_assert_eq!(a.closes(), b.closes());
            prop_assert_eq!(a.shares_outstanding(), b.shares_outstanding());
            let fa: Vec<f64> = (0..a.len()).map(|i| a.split_factor_at_index(i)).collect();
            let fb: Vec<f64> = (0..b.len()).map(|i| b.split_factor_at_index(i)).collect();
            prop_assert_eq!(fa, fb);
        }
    }
}

#[test]
fn market_cap_uses_forward_filled_shares() {
    let bars: Vec<Bar> = (0..4)
        .map(|i| Bar { date: day(i), close: 10.0 + i as f64, split_factor: 1.0 })
        .collect();
    let r = SecurityRecord::new("A", bars, vec![(day(1), 100.0), (day(3), 50.0)]).unwrap();
    assert!(matches!(r.market_cap(day(0)), Err(Error::CapUndefined { .. })));
    assert_eq!(r.market_cap(day(2)).unwrap(), 1200.0);
    assert_eq!(r.market_cap(day(3)).unwrap(), 650.0);
    assert!(matches!(r.market_cap(day(9)), Err(Error::NotListed { .. })));
}
