//! Bivariate normal distribution functions and rectangle probabilities.

use mobgo::prob::{orthant_closed_form, std_norm_cdf};
use mobgo::{bvn_cdf, gamma_rect, BivariateGaussian};

fn main() -> mobgo::Result<()> {
    println!("P(Z1 <= 0, Z2 <= 0) against 1/4 + asin(rho)/(2 pi):");
    for k in -4..=4 {
        let rho = f64::from(k) * 0.225;
        let g = BivariateGaussian::standard(rho)?;
        let p = bvn_cdf(0.0, 0.0, &g)?;
        println!("  rho {rho:>6.3}  cdf {p:.15}  closed form {:.15}", orthant_closed_form(rho));
    }

    let g = BivariateGaussian::from_sd([1.0, -0.5], [2.0, 0.7], 0.6)?;
    let p = gamma_rect(0.0, 2.0, -1.0, 0.0, &g)?;
    println!("\nP(0 < Y1 <= 2, -1 < Y2 <= 0) = {p:.12}");

    // Infinite limits reduce to the marginal.
    let marginal = bvn_cdf(1.5, f64::INFINITY, &g)?;
    println!("P(Y1 <= 1.5) = {marginal:.12} (Phi gives {:.12})", std_norm_cdf((1.5 - 1.0) / 2.0));

    // Perfect correlation is handled in closed form.
    let one = BivariateGaussian::standard(1.0)?;
    println!("rho = 1: F(0.3, -0.2) = {:.12} = Phi(-0.2)", one.cdf(0.3, -0.2));
    Ok(())
}
