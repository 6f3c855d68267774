//! Batch multi-objective Bayesian optimization with exact multi-point
//! probability of improvement.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`]: univariate and bivariate normal distribution functions.
//! * [`pareto`]: dominance, archives, stripe decomposition, hypervolume.
//! * [`gp`]: Gaussian process surrogates with joint batch posteriors.
//! * [`qpoi`]: exact and Monte Carlo multi-point probability of improvement.
//! * [`optim`]: CMA-ES for box-constrained maximization.
//! * [`engine`]: the optimization loop.
//! * [`bench`]: benchmark problems, experiments, timings and self-checks.

pub mod batch;
pub mod bench;
pub mod engine;
pub mod error;
pub mod gp;
pub mod optim;
pub mod pareto;
pub mod prob;
pub mod qpoi;

pub use batch::BatchPrediction;
pub use engine::{run, EngineConfig, IterationRecord, Problem, RunAbort, RunLog};
pub use error::{Error, Result};
pub use gp::{fit, fit_with, posterior_batch, FitOptions, SurrogateModel};
pub use optim::{maximize, OptimizerBudget, SearchBox};
pub use pareto::{dominates, hypervolume_2d, stripes, ParetoArchive};
pub use prob::{bvn_cdf, gamma_rect, BivariateGaussian};
pub use qpoi::{
    evaluate, poi_single, qpoi_exact, qpoi_exact_values, qpoi_monte_carlo, AcquisitionConfig, Mode, QpoiEvaluator,
    QpoiValues, Variant,
};
