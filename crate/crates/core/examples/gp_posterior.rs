//! Fitting Gaussian process surrogates and reading the joint posterior of
//! a batch, including the cross-covariance between batch points.

use mobgo::{fit, posterior_batch, SearchBox};

fn main() -> mobgo::Result<()> {
    let bounds = SearchBox::new(vec![0.0], vec![1.0])?;
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![f64::from(i) / 7.0]).collect();
    let f1: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
    let f2: Vec<f64> = x.iter().map(|v| (v[0] - 0.4).powi(2)).collect();

    let models = [fit(&x, &f1, &bounds)?, fit(&x, &f2, &bounds)?];
    for (i, m) in models.iter().enumerate() {
        println!(
            "f{}: theta {:.4}, sigma2 {:.4}, trend {:.4}, log-likelihood {:.3}",
            i + 1,
            m.kernel().theta[0],
            m.kernel().sigma2,
            m.trend(),
            m.log_likelihood()
        );
    }

    // Two close points are strongly correlated; a far one much less so.
    for pair in [[0.50, 0.52], [0.50, 0.95]] {
        let xq = vec![vec![pair[0]], vec![pair[1]]];
        let b = posterior_batch(&models, &xq)?;
        println!(
            "\nbatch {pair:?}: means f1 {:.4?} f2 {:.4?}",
            b.mean()[0],
            b.mean()[1]
        );
        println!(
            "  sd f1 {:.4?}, corr f1 {:.4}, corr f2 {:.4}",
            b.sd()[0],
            b.correlation(0, 0, 1),
            b.correlation(1, 0, 1)
        );
    }

    let at_data = posterior_batch(&models, &[x[3].clone()])?;
    println!("\nat a training input: mean {:.6} (data {:.6}), sd {:.2e}", at_data.mean()[0][0], f1[3], at_data.sd()[0][0]);
    Ok(())
}
