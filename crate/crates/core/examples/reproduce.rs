//! Runs one named reproduction scenario and prints its checks.
//!
//!     cargo run --example reproduce -- stark-table

use qdcascade::reproduce::{run_scenario, ReproduceOptions, SCENARIOS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "trion-correction".into());
    if !SCENARIOS.contains(&name.as_str()) {
        eprintln!("scenarios: {}", SCENARIOS.join(", "));
        std::process::exit(2);
    }
    let rep = run_scenario(&name, &ReproduceOptions { pulses: 1_000_000, seed: 1 })?;
    for c in &rep.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {:<40} {:>12.6} vs {:>12.6} (tol {:.1e})", c.name, c.measured, c.expected, c.tolerance);
    }
    println!("{}: {}", rep.scenario, if rep.passed { "passed" } else { "failed" });
    Ok(())
}
