// Load a price file, inspect a security and take ex-ante / ex-post
// top-N snapshots of one period.

use lookahead::marketdata::ingest_csv;
use lookahead::universe::{select_period_universe, Period, SelectionMode};
use lookahead::Result;

const DATA: &str = "\
security_id,date,close,split_factor,shares_outstanding
AAA,2001-01-02,40,1,1000
AAA,2001-01-03,42,1,
AAA,2001-01-04,22,2,2000
AAA,2001-01-05,23,1,
BBB,2001-01-02,10,1,5000
BBB,2001-01-03,9,1,
BBB,2001-01-04,7,1,
CCC,2001-01-03,30,1,3000
CCC,2001-01-04,35,1,
CCC,2001-01-05,39,1,
DDD,2001-01-02,20,1,1500
DDD,2001-01-03,21,1,
DDD,2001-01-04,21,1,
DDD,2001-01-05,24,1,
";

pub fn run_example() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("lookahead-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("prices.csv");
    std::fs::write(&path, DATA)?;
    let ds = ingest_csv(&path)?;
    std::fs::remove_dir_all(&dir)?;

    println!("{} securities, calendar {:?}", ds.len(), ds.calendar());
    let aaa = ds.record("AAA")?;
    for (i, bar) in aaa.bars().enumerate() {
        println!(
            "AAA {} close {:>5} split {} adjusted {:>5}",
            bar.date,
            bar.close,
            bar.split_factor,
            aaa.adjusted_close_at_index(i)
        );
    }

    let start = ds.calendar()[0];
    let end = *ds.calendar().last().unwrap();
    println!("active on {start}: {:?}", ds.active_universe(start)?);
    let period = Period::new(start, end);
    for mode in [SelectionMode::ExAnte, SelectionMode::ExPost] {
        let snap = select_period_universe(&ds, period, 2, mode)?;
        let members: Vec<String> = snap
            .members
            .iter()
            .map(|m| format!("{}#{} cap {}", m.security_id, m.cap_rank, m.market_cap))
            .collect();
        println!("{mode} top 2 as of {}: {members:?}, dropped {}", snap.as_of, snap.dropped_untradable);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
