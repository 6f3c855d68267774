//! How the batch probabilities move with the correlation between the two
//! batch points.

use mobgo::{qpoi_exact_values, BatchPrediction, ParetoArchive};

fn main() -> mobgo::Result<()> {
    let archive = ParetoArchive::from_points(2, [[1.0, 2.5], [2.0, 1.5], [3.0, 1.0]]);
    let cases = [
        ("I", [[1.5, 2.7], [2.5, 1.7]]),
        ("II", [[1.25, 1.25], [2.5, 0.75]]),
        ("III", [[1.5, 2.0], [3.5, 1.5]]),
    ];
    for (name, points) in cases {
        // `points` lists batch points; the prediction wants objective rows.
        let mean = [[points[0][0], points[1][0]], [points[0][1], points[1][1]]];
        println!("case {name}: points {points:?}");
        println!("    rho     best      all     mean      one    worst");
        for k in -2..=2 {
            let rho = 0.45 * f64::from(k);
            let b = BatchPrediction::pair(mean, [[1.0, 3.0], [2.0, 2.0]], [rho, rho])?;
            let v = qpoi_exact_values(&b, &archive)?;
            println!(
                "  {rho:>5.2}  {:.5}  {:.5}  {:.5}  {:.5}  {:.5}",
                v.best, v.all, v.mean, v.one, v.worst
            );
        }
    }
    Ok(())
}
