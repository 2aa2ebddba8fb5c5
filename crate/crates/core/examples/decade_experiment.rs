// The eight-decade experiment driven through the command-line entry point
// in-process: generate an 80-year market, run the paper-decades preset and
// print the per-period table.

use lookahead::cli;

pub fn run_example() -> lookahead::Result<()> {
    let dir = std::env::temp_dir().join(format!("lookahead-decades-{}", std::process::id()));
    let out = dir.to_string_lossy().into_owned();
    let code = cli::run(["lookahead", "--seed", "1", "--output-dir", &out, "synth"]);
    assert_eq!(code, cli::EXIT_OK);
    let data = dir.join("dataset.csv").to_string_lossy().into_owned();
    let bt = dir.join("decades").to_string_lossy().into_owned();
    let code = cli::run([
        "lookahead", "--output-dir", &bt, "backtest", "--data", &data, "--preset", "paper-decades", "--top-n", "100",
    ]);
    assert_eq!(code, cli::EXIT_OK);
    print!("{}", std::fs::read_to_string(dir.join("decades").join("periods.csv"))?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> lookahead::Result<()> {
    run_example()
}
