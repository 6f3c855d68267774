//! Batch optimization of ZDT1 in five dimensions with q-PoI best.
//!
//! Usage: cargo run --example zdt1_batch -- [seed]

use mobgo::bench::ProblemKind;
use mobgo::{run, EngineConfig, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let problem = ProblemKind::Zdt1.build(5)?;
    let config = EngineConfig::new(5, 2, Variant::Best, seed);
    println!("eta = {}, budget = {}, q = {}", config.eta, config.max_evals, config.q);

    let log = run(&problem, &config)?;
    for r in log.records.iter().step_by(5).chain(log.records.last()) {
        println!(
            "iter {:>3}  evals {:>3}  hv {:>9.4}  acq {:>10.3e}  {:>8.0} ms",
            r.iter,
            r.evals,
            r.hv,
            r.acq_value.unwrap_or(f64::NAN),
            r.wallclock_ms
        );
    }
    let front = log.final_archive();
    println!("final front has {} points, HV = {:.4}", front.len(), log.final_hv().unwrap_or(0.0));
    Ok(())
}
