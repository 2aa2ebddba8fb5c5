mod common;

use common::{day, record};
use lookahead::marketdata::{MarketDataset, SecurityRecord};
use lookahead::universe::{select_period_universe, top_n_by_cap, Period, SelectionMode};
use proptest::prelude::*;

/// Securities with random spans, a constant share count and a price path.
fn market() -> impl Strategy<Value = MarketDataset> {
    prop::collection::vec((0u64..8, 3usize..25, 1.0f64..50.0, -0.05f64..0.05, 1u32..4), 2..25).prop_map(|v| {
        let recs: Vec<SecurityRecord> = v
            .iter()
            .enumerate()
            .map(|(k, &(first, len, p0, g, shares))| {
                let closes: Vec<f64> = (0..len).map(|i| p0 * (1.0 + g).powi(i as i32)).collect();
                record(&format!("S{k:02}"), first, &closes, &[], f64::from(shares) * 1000.0)
            })
            .collect();
        MarketDataset::from_records(recs).unwrap()
    })
}

proptest! {
    #[test]
    fn top_n_matches_full_sort(ds in market(), n in 1usize..30, probe in 0usize..40) {
        let cal = ds.calendar();
        let date = cal[probe % cal.len()];
        let mut all: Vec<(String, f64)> = ds.securities()
            .filter(|r| r.is_listed(date))
            .map(|r| (r.id().to_string(), r.market_cap(date).unwrap()))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(n);
        let snap = top_n_by_cap(&ds, date, n).unwrap();
        let got: Vec<(String, f64)> = snap.members.iter().map(|m| (m.security_id.clone(), m.market_cap)).collect();
        prop_assert_eq!(got, all);
        prop_assert!(snap.members.iter().enumerate().all(|(i, m)| m.cap_rank == i + 1));
    }

    /// Ex-post selection equals ranking at the end, then keeping names
    /// already trading at the start.
    #[test]
    fn ex_post_two_step(ds in market(), n in 1usize..15) {
        let cal = ds.calendar();
        let p = Period::new(cal[0], *cal.last().unwrap());
        let end_top = top_n_by_cap(&ds, p.end, n).unwrap();
        let expected: Vec<String> = end_top.members.iter()
            .filter(|m| ds.get(&m.security_id).unwrap().is_listed(p.start))
            .map(|m| m.security_id.clone()).collect();
        match select_period_universe(&ds, p, n, SelectionMode::ExPost) {
            Ok(snap) => {
                prop_assert_eq!(snap.ids().map(String::from).collect::<Vec<_>>(), expected.clone());
                prop_assert_eq!(snap.dropped_untradable, end_top.len() - expected.len());
            }
            Err(_) => prop_assert!(expected.is_empty()),
        }
    }

    /// Rewriting everything after the start date leaves the ex-ante
    /// universe unchanged.
    #[test]
    fn ex_ante_ignores_the_future(ds in market(), n in 1usize..15, bump in 0.1f64..10.0) {
        let cal = ds.calendar();
        let p = Period::new(cal[0], *cal.last().unwrap());
        let altered: Vec<SecurityRecord> = ds.securities().map(|r| {
            let closes: Vec<f64> = r.closes().iter().zip(r.dates())
                .map(|(c, d)| if *d > p.start { c * bump * (1.0 + r.id().len() as f64) } else { *c })
                .collect();
            SecurityRecord::from_columns(r.id(), r.dates().to_vec(), closes, vec![], r.shares_outstanding().to_vec()).unwrap()
        }).collect();
        let altered = MarketDataset::from_records(altered).unwrap();
        let a = select_period_universe(&ds, p, n, SelectionMode::ExAnte);
        let b = select_period_universe(&altered, p, n, SelectionMode::ExAnte);
        prop_assert_eq!(a.map(|s| s.members).ok(), b.map(|s| s.members).ok());
    }
}

#[test]
fn ties_break_by_id_every_time() {
    let recs: Vec<SecurityRecord> = ["D", "B", "E", "A", "C"]
        .iter()
        .map(|id| record(id, 0, &[10.0, 10.0], &[], 7.0))
        .collect();
    let ds = MarketDataset::from_records(recs).unwrap();
    let first = top_n_by_cap(&ds, day(0), 3).unwrap();
    assert_eq!(first.ids().collect::<Vec<_>>(), ["A", "B", "C"]);
    for _ in 0..100 {
        assert_eq!(top_n_by_cap(&ds, day(0), 3).unwrap(), first);
    }
}
