//! CMA-ES on box-constrained test functions.

use mobgo::optim::maximize_reentrant;
use mobgo::{maximize, OptimizerBudget, SearchBox};

fn main() -> mobgo::Result<()> {
    // Negated Rosenbrock in 4-D; the maximum 0 is at (1, 1, 1, 1).
    let rosen = |x: &[f64]| -> mobgo::Result<f64> {
        Ok(-x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum::<f64>())
    };
    let bounds = SearchBox::new(vec![-2.0; 4], vec![2.0; 4])?;
    let budget = OptimizerBudget::with_max_evals(20_000, 3);
    let r = maximize(rosen, &bounds, &budget)?;
    println!("rosenbrock: value {:.3e} at {:.5?} after {} evaluations", r.value, r.argmax, r.evaluations);

    // A linear objective is maximized at a corner; samples are kept in the box.
    let corner = |x: &[f64]| -> mobgo::Result<f64> { Ok(x[0] - x[1] + 2.0 * x[2]) };
    let bounds = SearchBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 0.5])?;
    let r = maximize_reentrant(corner, &bounds, &OptimizerBudget::with_max_evals(3000, 1), 2)?;
    println!("linear: value {:.6} at {:.6?}", r.value, r.argmax);

    // The incumbent trace is nondecreasing.
    let first = r.trace.first().copied().unwrap_or(f64::NAN);
    println!("trace: {} generations, from {first:.4} to {:.4}", r.trace.len(), r.value);
    Ok(())
}
