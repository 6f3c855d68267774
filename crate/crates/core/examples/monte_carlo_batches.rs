//! The Monte Carlo estimator for batch shapes beyond the exact formulas:
//! three points and three objectives.

use mobgo::{qpoi_monte_carlo, BatchPrediction, ParetoArchive};

fn main() -> mobgo::Result<()> {
    let archive = ParetoArchive::from_points(3, [[1.0, 2.0, 3.0], [2.0, 1.0, 2.0], [3.0, 3.0, 1.0]]);
    let mean = vec![vec![1.5, 2.5, 0.8], vec![1.5, 0.9, 2.4], vec![2.2, 1.8, 2.0]];
    let cov = |s: f64, r: f64| {
        vec![
            vec![s * s, r * s * s, 0.0],
            vec![r * s * s, s * s, r * s * s],
            vec![0.0, r * s * s, s * s],
        ]
    };
    let batch = BatchPrediction::new(mean, vec![cov(0.8, 0.4), cov(0.6, -0.3), cov(1.0, 0.2)])?;
    for n in [1_000, 10_000, 100_000] {
        let v = qpoi_monte_carlo(&batch, &archive, n, 1)?;
        println!(
            "n = {n:>6}: best {:.4} all {:.4} mean {:.4} one {:.4} worst {:.4}",
            v.best, v.all, v.mean, v.one, v.worst
        );
    }
    Ok(())
}
