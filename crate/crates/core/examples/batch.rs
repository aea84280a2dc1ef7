//! Run every built-in scenario in parallel and write their trajectory CSVs.
//!
//! `cargo run --example batch -- out/` writes into `out/`; the default is a
//! temporary directory.

use urchin_sim::harness::{builtin_scenarios, run_batch, write_csv};

fn main() -> urchin_sim::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("urchin-batch"));
    std::fs::create_dir_all(&out).map_err(|e| urchin_sim::Error::Io { path: out.display().to_string(), reason: e.to_string() })?;
    let scenarios: Vec<_> = builtin_scenarios().into_values().collect();
    for (scenario, result) in scenarios.iter().zip(run_batch(&scenarios)) {
        let log = result?;
        let path = out.join(format!("{}.csv", scenario.name()));
        write_csv(&log, &path)?;
        let last = log.rows.last().expect("initial row");
        println!(
            "{:18} {:5} rows  final ({:+.3}, {:+.3}, {:.3})  {}",
            scenario.name(),
            log.rows.len(),
            last.position[0],
            last.position[1],
            last.position[2],
            path.display()
        );
    }
    Ok(())
}
