//! Constituent selection by market-cap rank.
//!
//! An *ex-ante* universe ranks at the start of a period and could have been
//! traded in real time. An *ex-post* universe ranks at the end of the period,
//! which is what a backtest does when it uses today's index membership list;
//! its members are then restricted to names that actually traded at the
//! start, and the number of names removed that way is recorded.

use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{MarketDataset, SecurityId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    ExAnte,
    ExPost,
}

impl std::fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMode::ExAnte => "ex_ante",
            SelectionMode::ExPost => "ex_post",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub security_id: SecurityId,
    pub cap_rank: usize,
    pub market_cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn years(&self) -> f64 {
        (self.end - self.start).num_days() as f64 / 365.25
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniverseSnapshot {
    pub as_of: NaiveDate,
    pub mode: SelectionMode,
    pub n_requested: usize,
    /// Descending market cap, ranks `1..=members.len()`.
    pub members: Vec<Member>,
    pub period: Period,
    /// Ex-post constituents removed because they did not trade at `period.start`.
    pub dropped_untradable: usize,
}

impl UniverseSnapshot {
    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.members.iter().map(|m| m.security_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Ranking order: larger cap first, equal caps by ascending security id.
pub fn tie_break(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

fn ranked(mut candidates: Vec<(&str, f64)>, n: usize) -> Vec<Member> {
    let cmp = |a: &(&str, f64), b: &(&str, f64)| tie_break(*a, *b);
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n, cmp);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(cmp);
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (id, cap))| Member {
            security_id: id.to_string(),
            cap_rank: i + 1,
            market_cap: cap,
        })
        .collect()
}

fn caps_at(dataset: &MarketDataset, date: NaiveDate) -> Vec<(&str, f64)> {
    dataset
        .securities()
        .filter(|r| r.is_listed(date))
        .filter_map(|r| r.market_cap(date).ok().map(|cap| (r.id(), cap)))
        .collect()
}

/// The `n` largest active securities on `date`, or all of them if fewer are
/// active.
pub fn top_n_by_cap(dataset: &MarketDataset, date: NaiveDate, n: usize) -> Result<UniverseSnapshot> {
    if n == 0 {
        return Err(Error::Config("top-n size must be at least 1".into()));
    }
    dataset.require_date(date)?;
    Ok(UniverseSnapshot {
        as_of: date,
        mode: SelectionMode::ExAnte,
        n_requested: n,
        members: ranked(caps_at(dataset, date), n),
        period: Period::new(date, date),
        dropped_untradable: 0,
    })
}

pub fn select_period_universe(
    dataset: &MarketDataset,
    period: Period,
    n: usize,
    mode: SelectionMode,
) -> Result<UniverseSnapshot> {
    if period.start >= period.end {
        return Err(Error::PeriodOrder(format!(
            "period start {} is not before end {}",
            period.start, period.end
        )));
    }
    dataset.require_date(period.start)?;
    dataset.require_date(period.end)?;
    let as_of = match mode {
        SelectionMode::ExAnte => period.start,
        SelectionMode::ExPost => period.end,
    };
    let mut snapshot = top_n_by_cap(dataset, as_of, n)?;
    snapshot.mode = mode;
    snapshot.period = period;
    if mode == SelectionMode::ExPost {
        let before = snapshot.members.len();
        snapshot.members.retain(|m| {
            dataset
                .get(&m.security_id)
                .is_some_and(|r| r.is_listed(period.start))
        });
        snapshot.dropped_untradable = before - snapshot.members.len();
        for (i, m) in snapshot.members.iter_mut().enumerate() {
            m.cap_rank = i + 1;
        }
    }
    if snapshot.members.is_empty() {
        return Err(Error::EmptyUniverse(format!(
            "{mode} selection for {}..{} has no tradable members",
            period.start, period.end
        )));
    }
    Ok(snapshot)
}
