//! The five exact two-point probabilities of improvement checked against
//! the Monte Carlo estimator on spherical fronts.

use mobgo::bench::{mc_tolerance, speed_batch, synthetic_front, FrontKind, SPEED_RADIUS};
use mobgo::{qpoi_exact_values, qpoi_monte_carlo, Variant};

fn main() -> mobgo::Result<()> {
    let n = 100_000;
    for kind in [FrontKind::Convex, FrontKind::Concave] {
        let batch = speed_batch(kind);
        for size in [10, 100] {
            let archive = synthetic_front(kind, size, SPEED_RADIUS)?;
            let exact = qpoi_exact_values(&batch, &archive)?;
            let mc = qpoi_monte_carlo(&batch, &archive, n, 7)?;
            println!("{kind:?} front, |P| = {size}");
            for v in [Variant::Best, Variant::All, Variant::Mean, Variant::One, Variant::Worst] {
                let (e, m) = (exact.get(v), mc.get(v));
                println!(
                    "  {v:<5}  exact {e:.6}  mc {m:.6}  |diff| {:.1e}  (tolerance {:.3})",
                    (e - m).abs(),
                    mc_tolerance(e, n)
                );
            }
        }
    }
    Ok(())
}
