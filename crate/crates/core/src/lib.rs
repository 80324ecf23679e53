//! Latent correlation measures for two-way contingency tables.
//!
//! The measures invert the closed-form relation between the power divergence
//! of a table from independence and the squared correlation of an underlying
//! bivariate normal distribution. The crate provides the divergences, the
//! Newton inversion, delta-method intervals, detectable-correlation
//! thresholds, classical baselines and the Monte-Carlo drivers used to study
//! them.
//!
//! ```
//! use latcorr::{ContingencyTable, Lambda, SolveConfig};
//!
//! let table = ContingencyTable::from_counts(&[vec![40, 10], vec![10, 40]]).unwrap();
//! let probs = table.to_probabilities().unwrap();
//! let fit = latcorr::rho_lambda(&probs, Lambda::PEARSON, &SolveConfig::default()).unwrap();
//! assert!((fit.rho - 0.514496).abs() < 1e-6);
//! ```

pub mod baselines;
pub mod divergence;
pub mod inference;
pub mod numerics;
pub mod simulation;
pub mod solver;
pub mod tables;

mod sum;

pub use baselines::{
    cox_snell_r2, cramers_v2, nagelkerke_r2, pearson_c, polychoric_two_step, u_total,
    BaselineError, PolychoricConfig, PolychoricEstimate,
};
pub use divergence::{
    kl_divergence, margin_entropy, pearson_divergence, power_divergence, DivergenceError,
    DivergenceValue, Lambda,
};
pub use inference::{
    asymptotic_variances, ci_fisher_z, ci_simple, detectable_threshold, grad_d, sigma2_d,
    AsymptoticVariances, CiMethod, ConfidenceInterval, Gradient, InferenceError, InferenceReport,
    Scale,
};
pub use numerics::{
    bvn_cdf, bvn_rect_prob, chi2_quantile, std_normal_cdf, std_normal_quantile, BvnParams,
    NumericsError,
};
pub use solver::{
    i_of_t, i_prime, initial_t, rho_closed_form, rho_lambda, solve_t, SolveConfig, SolveResult,
    SolverError,
};
pub use tables::{ContingencyTable, ProbabilityTable, TableError};
