use latcorr::{detectable_threshold, Lambda, SolveConfig};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub lambda: f64,
    pub alpha: f64,
    pub n: u64,
    pub df: u32,
    pub threshold: f64,
}

/// Detectable-correlation thresholds over the full grid, ordered by λ, α, n
/// and df.
pub fn threshold_grid(
    lambdas: &[Lambda],
    alphas: &[f64],
    ns: &[u64],
    dfs: &[u32],
) -> Result<Vec<ThresholdRow>, CliError> {
    if lambdas.is_empty() || alphas.is_empty() || ns.is_empty() || dfs.is_empty() {
        return Err(CliError::Validation(
            "threshold grids must be nonempty".into(),
        ));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::Validation(format!("alpha {a} is outside (0, 1)")));
    }
    if ns.contains(&0) {
        return Err(CliError::Validation("n must be at least 1".into()));
    }
    if dfs.contains(&0) {
        return Err(CliError::Validation("df must be at least 1".into()));
    }
    let cfg = SolveConfig::default();
    let mut rows = Vec::with_capacity(lambdas.len() * alphas.len() * ns.len() * dfs.len());
    for &lambda in lambdas {
        for &alpha in alphas {
            for &n in ns {
                for &df in dfs {
                    let threshold = detectable_threshold(alpha, n, df, lambda, &cfg)
                        .map_err(|e| CliError::Validation(e.to_string()))?;
                    rows.push(ThresholdRow {
                        lambda: lambda.value(),
                        alpha,
                        n,
                        df,
                        threshold,
                    });
                }
            }
        }
    }
    Ok(rows)
}
