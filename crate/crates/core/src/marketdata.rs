//! CRSP-style daily market data.
//!
//! Input rows carry `security_id,date,close,split_factor,shares_outstanding`.
//! Prices are raw closes; the split factor on a bar is the ratio applied on
//! that date (2.0 for a 2-for-1 split). Adjusted closes divide each raw close
//! by the product of all split factors recorded *after* it, so a fixed
//! adjusted-share holding is worth the same immediately before and after a
//! split.
//!
//! Shares outstanding arrive at a sparser (monthly) cadence and are
//! forward-filled. A missing daily bar inside the listed range carries the
//! last close forward. The last bar of a security is its delisting date.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub type SecurityId = String;

pub const CSV_HEADER: [&str; 5] = [
    "security_id",
    "date",
    "close",
    "split_factor",
    "shares_outstanding",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bar {
    pub date: NaiveDate,
    pub close: f64,
    pub split_factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct SplitEvent {
    bar: usize,
    factor: f64,
}

/// One listed firm.
///
/// Bars are stored column-wise with split factors kept sparsely (only the
/// bars whose factor differs from 1), which keeps multi-decade synthetic
/// markets compact.
#[derive(Clone, Debug, PartialEq)]
pub struct SecurityRecord {
    id: SecurityId,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    splits: Vec<SplitEvent>,
    // split_suffix[k] = product of splits[k..].factor; one longer than splits.
    split_suffix: Vec<f64>,
    shares: Vec<(NaiveDate, f64)>,
}

impl SecurityRecord {
    pub fn new(
        id: impl Into<SecurityId>,
        bars: Vec<Bar>,
        shares: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        let mut dates = Vec::with_capacity(bars.len());
        let mut closes = Vec::with_capacity(bars.len());
        let mut splits = Vec::new();
        for (i, bar) in bars.iter().enumerate() {
            dates.push(bar.date);
            closes.push(bar.close);
            if bar.split_factor != 1.0 {
                splits.push((i, bar.split_factor));
            }
        }
        Self::from_columns(id, dates, closes, splits, shares)
    }

    /// Builds a record from parallel date/close columns and a sparse list of
    /// `(bar index, split factor)` pairs.
    pub fn from_columns(
        id: impl Into<SecurityId>,
        dates: Vec<NaiveDate>,
        closes: Vec<f64>,
        splits: Vec<(usize, f64)>,
        shares: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |message: String| Error::InvalidRecord {
            security_id: id.clone(),
            message,
        };
        if dates.is_empty() {
            return Err(invalid("no bars".into()));
        }
        if dates.len() != closes.len() {
            return Err(invalid("date and close columns differ in length".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "bar dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some((i, c)) = closes
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(invalid(format!("non-positive close {c} on {}", dates[i])));
        }
        let mut events = Vec::with_capacity(splits.len());
        for (k, &(bar, factor)) in splits.iter().enumerate() {
            if bar >= dates.len() {
                return Err(invalid(format!("split at bar {bar} beyond last bar")));
            }
            if k > 0 && splits[k - 1].0 >= bar {
                return Err(invalid("split events not strictly increasing".into()));
            }
            if !(factor.is_finite() && factor > 0.0) {
                return Err(invalid(format!(
                    "non-positive split factor {factor} on {}",
                    dates[bar]
                )));
            }
            if factor != 1.0 {
                events.push(SplitEvent { bar, factor });
            }
        }
        if let Some(w) = shares.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(invalid(format!(
                "shares observations not strictly increasing at {}",
                w[1].0
            )));
        }
        if let Some((d, s)) = shares.iter().find(|(_, s)| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid(format!("non-positive shares outstanding {s} on {d}")));
        }
        if let Some((d, _)) = shares.iter().find(|(d, _)| dates.binary_search(d).is_err()) {
            return Err(invalid(format!("shares observation on {d} has no bar")));
        }
        let mut split_suffix = vec![1.0; events.len() + 1];
        for k in (0..events.len()).rev() {
            split_suffix[k] = split_suffix[k + 1] * events[k].factor;
        }
        Ok(Self {
            id,
            dates,
            closes,
            splits: events,
            split_suffix,
            shares,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn listing_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn delisting_date(&self) -> NaiveDate {
        *self.dates.last().expect("record has at least one bar")
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn shares_outstanding(&self) -> &[(NaiveDate, f64)] {
        &self.shares
    }

    pub fn split_factor_at_index(&self, i: usize) -> f64 {
        match self.splits.binary_search_by_key(&i, |s| s.bar) {
            Ok(k) => self.splits[k].factor,
            Err(_) => 1.0,
        }
    }

    pub fn bars(&self) -> impl Iterator<Item = Bar> + '_ {
        (0..self.len()).map(move |i| Bar {
            date: self.dates[i],
            close: self.closes[i],
            split_factor: self.split_factor_at_index(i),
        })
    }

    pub fn is_listed(&self, date: NaiveDate) -> bool {
        self.listing_date() <= date && date <= self.delisting_date()
    }

    /// Index of the last bar dated on or before `date`.
    pub fn bar_index_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        self.dates.partition_point(|d| *d <= date).checked_sub(1)
    }

    fn listed_index(&self, date: NaiveDate) -> Result<usize> {
        if !self.is_listed(date) {
            return Err(Error::NotListed {
                security_id: self.id.clone(),
                date,
            });
        }
        Ok(self
            .bar_index_on_or_before(date)
            .expect("listed date has a preceding bar"))
    }

    /// Raw close on `date`, carried forward over missing bars.
    pub fn close(&self, date: NaiveDate) -> Result<f64> {
        Ok(self.closes[self.listed_index(date)?])
    }

    /// Backward split-adjusted close of bar `i`.
    pub fn adjusted_close_at_index(&self, i: usize) -> f64 {
        let k = self.splits.partition_point(|s| s.bar <= i);
        self.closes[i] / self.split_suffix[k]
    }

    pub fn adjusted_close(&self, date: NaiveDate) -> Result<f64> {
        Ok(self.adjusted_close_at_index(self.listed_index(date)?))
    }

    /// Most recent shares-outstanding observation on or before `date`.
    pub fn shares_at(&self, date: NaiveDate) -> Option<f64> {
        let k = self.shares.partition_point(|(d, _)| *d <= date);
        k.checked_sub(1).map(|k| self.shares[k].1)
    }

    /// Raw close times forward-filled shares outstanding.
    pub fn market_cap(&self, date: NaiveDate) -> Result<f64> {
        let close = self.close(date)?;
        let shares = self.shares_at(date).ok_or_else(|| Error::CapUndefined {
            security_id: self.id.clone(),
            date,
        })?;
        Ok(close * shares)
    }
}

/// An immutable collection of securities plus the union of their trading
/// dates.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketDataset {
    securities: BTreeMap<SecurityId, SecurityRecord>,
    calendar: Vec<NaiveDate>,
}

impl MarketDataset {
    pub fn from_records(records: impl IntoIterator<Item = SecurityRecord>) -> Result<Self> {
        let mut securities = BTreeMap::new();
        for record in records {
            if securities.contains_key(record.id()) {
                return Err(Error::InvalidRecord {
                    security_id: record.id.clone(),
                    message: "duplicate security id".into(),
                });
            }
            securities.insert(record.id.clone(), record);
        }
        let calendar = union_calendar(securities.values());
        Ok(Self {
            securities,
            calendar,
        })
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.securities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.securities.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SecurityRecord> {
        self.securities.get(id)
    }

    pub fn record(&self, id: &str) -> Result<&SecurityRecord> {
        self.get(id)
            .ok_or_else(|| Error::UnknownSecurity(id.to_string()))
    }

    /// Securities in ascending id order.
    pub fn securities(&self) -> impl Iterator<Item = &SecurityRecord> + '_ {
        self.securities.values()
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        self.calendar.binary_search(&date).is_ok()
    }

    pub fn require_date(&self, date: NaiveDate) -> Result<usize> {
        self.calendar
            .binary_search(&date)
            .map_err(|_| Error::UnknownDate(date))
    }

    /// Calendar dates in `[start, end]`.
    pub fn dates_between(&self, start: NaiveDate, end: NaiveDate) -> &[NaiveDate] {
        let lo = self.calendar.partition_point(|d| *d < start);
        let hi = self.calendar.partition_point(|d| *d <= end);
        &self.calendar[lo..hi.max(lo)]
    }

    pub fn first_date_on_or_after(&self, date: NaiveDate) -> Option<NaiveDate> {
        let i = self.calendar.partition_point(|d| *d < date);
        self.calendar.get(i).copied()
    }

    pub fn last_date_on_or_before(&self, date: NaiveDate) -> Option<NaiveDate> {
        let i = self.calendar.partition_point(|d| *d <= date);
        i.checked_sub(1).map(|i| self.calendar[i])
    }

    /// Ids of securities listed on `date` with a defined market cap.
    pub fn active_universe(&self, date: NaiveDate) -> Result<Vec<&str>> {
        self.require_date(date)?;
        Ok(self
            .securities()
            .filter(|r| r.is_listed(date) && r.shares_at(date).is_some())
            .map(|r| r.id())
            .collect())
    }

    pub fn total_bars(&self) -> usize {
        self.securities().map(|r| r.len()).sum()
    }

    /// Serializes in the ingestion format, one row per (security, bar).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let mut row: [String; 5] = Default::default();
        for record in self.securities() {
            let mut shares = record.shares.iter().peekable();
            for (i, date) in record.dates.iter().enumerate() {
                row[0].clear();
                row[0].push_str(record.id());
                row[1] = date.format("%Y-%m-%d").to_string();
                row[2] = record.closes[i].to_string();
                row[3] = record.split_factor_at_index(i).to_string();
                row[4].clear();
                if let Some((d, s)) = shares.peek() {
                    if d == date {
                        row[4] = s.to_string();
                        shares.next();
                    }
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}

fn union_calendar<'a>(records: impl Iterator<Item = &'a SecurityRecord> + Clone) -> Vec<NaiveDate> {
    let (Some(lo), Some(hi)) = (
        records.clone().map(|r| r.listing_date()).min(),
        records.clone().map(|r| r.delisting_date()).max(),
    ) else {
        return Vec::new();
    };
    let span = (hi - lo).num_days() as usize + 1;
    let mut seen = vec![false; span];
    for r in records {
        for d in &r.dates {
            seen[(*d - lo).num_days() as usize] = true;
        }
    }
    seen.iter()
        .enumerate()
        .filter(|(_, s)| **s)
        .map(|(i, _)| lo + chrono::Days::new(i as u64))
        .collect()
}

#[derive(Default)]
struct RecordBuilder {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    splits: Vec<(usize, f64)>,
    shares: Vec<(NaiveDate, f64)>,
    last_line: u64,
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<MarketDataset> {
    ingest_reader(BufReader::new(File::open(path)?))
}

/// Parses and validates a dataset from any reader. Line numbers in errors
/// are 1-based and count the header as line 1.
pub fn ingest_reader<R: Read>(reader: R) -> Result<MarketDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut builders: HashMap<SecurityId, RecordBuilder> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != CSV_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(bad("empty security_id".into()));
        }
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| bad(format!("invalid date `{}`: {e}", &record[1])))?;
        let positive = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("invalid {name} `{field}`")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{name} must be strictly positive, got {v}")));
            }
            Ok(v)
        };
        let close = positive(&record[2], "close")?;
        let split = positive(&record[3], "split_factor")?;
        let shares = match &record[4] {
            "" => None,
            s => Some(positive(s, "shares_outstanding")?),
        };

        let b = builders.entry(id.to_string()).or_default();
        if let Some(&previous) = b.dates.last() {
            if date == previous {
                return Err(Error::DuplicateRow {
                    line,
                    security_id: id.to_string(),
                    date,
                });
            }
            if date < previous {
                return Err(Error::UnorderedRows {
                    line,
                    security_id: id.to_string(),
                    date,
                    previous,
                });
            }
        }
        if split != 1.0 {
            b.splits.push((b.dates.len(), split));
        }
        b.dates.push(date);
        b.closes.push(close);
        if let Some(s) = shares {
            b.shares.push((date, s));
        }
        b.last_line = line;
    }

    let mut ids: Vec<_> = builders.into_iter().collect();
    ids.sort_by(|a, b| a.0.cmp(&b.0));
    let records = ids
        .into_iter()
        .map(|(id, b)| SecurityRecord::from_columns(id, b.dates, b.closes, b.splits, b.shares))
        .collect::<Result<Vec<_>>>()?;
    MarketDataset::from_records(records)
}
