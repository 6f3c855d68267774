//! A small repeated experiment with convergence files and a summary.
//!
//! Usage: cargo run --example experiment -- [out_dir]

use mobgo::bench::{read_convergence_csv, read_summary, run_experiment, ExperimentSpec, ProblemKind};
use mobgo::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "results/example".into());
    let mut spec = ExperimentSpec::new(ProblemKind::Linear, 1, Variant::Poi, 1, 3, 10, &out);
    spec.overrides.eta = Some(4);
    spec.overrides.max_evals = Some(14);

    let summary = run_experiment(&spec)?;
    println!("final HV per run: {:?}", summary.final_hv);
    println!("stats: {:?}", summary.hv);

    let rows = read_convergence_csv(&spec.csv_path(0))?;
    println!("\n{} (first run):", spec.csv_path(0).display());
    for r in &rows {
        println!("  iter {:>2} evals {:>2} hv {:.5} acq {:?}", r.iter, r.evals, r.hv, r.acq_value);
    }
    let again = read_summary(&spec.summary_path())?;
    println!("\nsummary file round-trips: {}", again == summary);
    Ok(())
}
