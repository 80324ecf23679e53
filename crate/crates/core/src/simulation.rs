//! Latent bivariate-normal tables and the Monte-Carlo experiment drivers.
//!
//! Every replication draws from its own generator keyed by
//! `(seed, cell index, replication)`, so results do not depend on the number
//! of worker threads or on scheduling order.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{cramers_v2, polychoric_two_step, u_total, PolychoricConfig};
use crate::divergence::Lambda;
use crate::inference::{InferenceError, InferenceReport, Scale};
use crate::numerics::{rect_unchecked, std_normal_quantile, NumericsError};
use crate::solver::{rho_lambda, SolveConfig};
use crate::sum::compensated;
use crate::tables::{ContingencyTable, ProbabilityTable, TableError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("latent correlation {0} is outside (-1, 1)")]
    RhoOutOfRange(f64),
    #[error("need at least 2 categories per axis, got {0}")]
    TooFewCategories(usize),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Square latent design with equal marginal probabilities `1/r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentSpec {
    r: usize,
    rho: f64,
}

impl LatentSpec {
    pub fn new(r: usize, rho: f64) -> Result<Self, SimulationError> {
        if r < 2 {
            return Err(SimulationError::TooFewCategories(r));
        }
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(SimulationError::RhoOutOfRange(rho));
        }
        Ok(Self { r, rho })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `z_{k/r}` for `k = 0..=r`, with `z_0 = −∞` and `z_r = +∞`.
    pub fn thresholds(&self) -> Result<Vec<f64>, NumericsError> {
        let r = self.r;
        let mut z = Vec::with_capacity(r + 1);
        z.push(f64::NEG_INFINITY);
        for k in 1..r {
            // Invert the nearer tail; keeps the cuts exactly antisymmetric.
            z.push(if 2 * k <= r {
                std_normal_quantile(k as f64 / r as f64)?
            } else {
                -std_normal_quantile((r - k) as f64 / r as f64)?
            });
        }
        z.push(f64::INFINITY);
        Ok(z)
    }
}

/// Cell probabilities of the bivariate normal discretized at the `1/r`
/// quantiles on both axes.
pub fn latent_probability_table(spec: &LatentSpec) -> Result<ProbabilityTable, SimulationError> {
    let r = spec.r;
    let z = spec.thresholds()?;
    let mut p = vec![0.0; r * r];
    for i in 0..r {
        for j in i..r {
            let v = rect_unchecked(z[i], z[i + 1], z[j], z[j + 1], spec.rho);
            p[i * r + j] = v;
            p[j * r + i] = v;
        }
    }
    let total = compensated(p.iter().copied());
    for v in &mut p {
        *v /= total;
    }
    Ok(ProbabilityTable::unflatten(&p, r, r)?)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Random stream for one replication of one experiment cell.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, cell: u64, replication: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = splitmix64(seed) ^ splitmix64(cell.wrapping_add(0x5851_F42D_4C95_7F2D));
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(replication);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.random()
    }
}

/// Multinomial draw of `n` observations over the cells of `pt`, by
/// sequential binomial conditioning in row-major order.
pub fn sample_table(pt: &ProbabilityTable, n: u64, stream: &mut RngStream) -> ContingencyTable {
    let p = pt.flatten();
    let mut counts = vec![0u64; p.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == p.len() || pk >= mass {
            counts[k] = left;
            break;
        }
        let prob = (pk / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, prob)
            .expect("probability clamped to [0, 1]")
            .sample(&mut stream.0);
        counts[k] = draw;
        left -= draw;
        mass -= pk;
    }
    ContingencyTable::from_raw(pt.rows(), pt.cols(), counts)
}

/// What coverage is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageTarget {
    /// `ρ_(λ)` of the exact probability table.
    #[default]
    Measure,
    /// The latent correlation itself.
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rho_list: Vec<f64>,
    pub r_list: Vec<usize>,
    pub n_list: Vec<u64>,
    pub lambda_list: Vec<Lambda>,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Evaluate exact probability tables only; no sampling.
    pub exact: bool,
    pub target: CoverageTarget,
    /// Include the two-step polychoric baseline where it is optional.
    pub polychoric: bool,
    /// Worker cap; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub timing_reps: usize,
    pub timing_warmups: usize,
    pub solver: SolveConfig,
    pub polychoric_config: PolychoricConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rho_list: vec![0.2, 0.5, 0.8],
            r_list: vec![4, 6, 8],
            n_list: vec![3000, 5000, 10000],
            lambda_list: vec![
                Lambda::FREEMAN_TUKEY,
                Lambda::KL,
                Lambda::CRESSIE_READ,
                Lambda::PEARSON,
            ],
            reps: 200,
            seed: 20_240_101,
            alpha: 0.05,
            exact: false,
            target: CoverageTarget::Measure,
            polychoric: false,
            threads: None,
            timing_reps: 21,
            timing_warmups: 3,
            solver: SolveConfig::default(),
            polychoric_config: PolychoricConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Grids of the published experiments at desk-scale replication counts.
    pub fn defaults_for(experiment: Experiment) -> Self {
        let base = Self::default();
        match experiment {
            Experiment::Performance => Self {
                r_list: vec![10, 15, 25, 50],
                ..base
            },
            Experiment::Coverage => Self { reps: 2000, ..base },
            Experiment::Boundary => Self {
                rho_list: vec![0.9, 0.95, 0.99],
                r_list: vec![5, 10, 25, 50, 100],
                lambda_list: vec![Lambda::KL, Lambda::CRESSIE_READ, Lambda::PEARSON],
                ..base
            },
            Experiment::Runtime => Self {
                r_list: vec![10, 15, 25, 50],
                ..base
            },
        }
    }

    /// Empty grids are allowed and yield empty results.
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if let Some(rho) = self
            .rho_list
            .iter()
            .find(|r| !(r.is_finite() && r.abs() < 1.0))
        {
            return bad(format!("rho {rho} is outside (-1, 1)"));
        }
        if let Some(r) = self.r_list.iter().find(|&&r| r < 2) {
            return bad(format!("r = {r} needs at least 2 categories"));
        }
        if self.n_list.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} is outside (0, 1)", self.alpha));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.timing_reps == 0 {
            return bad("timing_reps must be at least 1".into());
        }
        self.solver
            .validate()
            .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
        self.polychoric_config
            .validate()
            .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    fn run_in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, SimulationError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| SimulationError::ThreadPool(e.to_string()))?;
        Ok(pool.install(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Performance,
    Coverage,
    Boundary,
    Runtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RhoLambda,
    Simple,
    FisherZ,
    CramersV2,
    UTotal,
    PolychoricTwoStep,
}

/// One output line: an experiment cell, a method and (where relevant) a λ.
/// Fields that do not apply to the experiment are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub rho: f64,
    pub r: usize,
    /// `None` for exact-table evaluations.
    pub n: Option<u64>,
    pub lambda: Option<f64>,
    pub method: Method,
    pub reps: usize,
    /// Replications that produced a usable value.
    pub used: usize,
    /// Replications skipped for zero cells at λ < 0.
    pub skipped: usize,
    /// Replications where the estimator failed or did not converge.
    pub failures: usize,
    /// Estimates on the boundary `t̂ < 1e-10` (coverage) or at the bracket
    /// end (polychoric).
    pub boundary: usize,
    /// Value on the exact probability table.
    pub exact_value: Option<f64>,
    /// Mean over converged replications.
    pub mean: Option<f64>,
    /// Mean including non-converged replications' final iterates.
    pub mean_all: Option<f64>,
    pub coverage: Option<f64>,
    pub target: Option<f64>,
    pub median_seconds: Option<f64>,
    /// Median polychoric time over this method's median time.
    pub speedup: Option<f64>,
}

impl ResultRow {
    fn new(experiment: Experiment, rho: f64, r: usize, method: Method) -> Self {
        Self {
            experiment,
            rho,
            r,
            n: None,
            lambda: None,
            method,
            reps: 0,
            used: 0,
            skipped: 0,
            failures: 0,
            boundary: 0,
            exact_value: None,
            mean: None,
            mean_all: None,
            coverage: None,
            target: None,
            median_seconds: None,
            speedup: None,
        }
    }

    fn with_lambda(mut self, lambda: Lambda) -> Self {
        self.lambda = Some(lambda.value());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    /// Total failed replications across rows.
    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

fn latent(rho: f64, r: usize) -> Result<ProbabilityTable, SimulationError> {
    latent_probability_table(&LatentSpec::new(r, rho)?)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut k) = (0.0, 0usize);
    for x in xs {
        sum += x;
        k += 1;
    }
    (k > 0).then(|| sum / k as f64)
}

/// Experiment cells in grid order `(ρ, r, n)`; the position is the cell index
/// keying the random streams.
fn sampled_cells(cfg: &ExperimentConfig) -> Vec<(u64, f64, usize, u64)> {
    let mut out = Vec::new();
    for &rho in &cfg.rho_list {
        for &r in &cfg.r_list {
            for &n in &cfg.n_list {
                out.push((out.len() as u64, rho, r, n));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Value { rho: f64, converged: bool },
    Skipped,
    Failed,
}

fn estimate(table: &ContingencyTable, lambda: Lambda, solver: &SolveConfig) -> Outcome {
    let Ok(pt) = table.to_probabilities() else {
        return Outcome::Failed;
    };
    if lambda.requires_positive_cells() && pt.zero_cells() > 0 {
        return Outcome::Skipped;
    }
    match rho_lambda(&pt, lambda, solver) {
        Ok(fit) => Outcome::Value {
            rho: fit.rho,
            converged: fit.converged,
        },
        Err(_) => Outcome::Failed,
    }
}

fn summarize(outcomes: &[Outcome], row: &mut ResultRow) {
    row.reps = outcomes.len();
    let mut used = Vec::new();
    let mut all = Vec::new();
    for o in outcomes {
        match *o {
            Outcome::Value { rho, converged } => {
                all.push(rho);
                if converged {
                    used.push(rho);
                } else {
                    row.failures += 1;
                }
            }
            Outcome::Skipped => row.skipped += 1,
            Outcome::Failed => row.failures += 1,
        }
    }
    row.used = used.len();
    row.mean = mean(used.into_iter());
    row.mean_all = mean(all.into_iter());
}

/// Mean of each measure over sampled tables, alongside its value on the exact
/// table. With `cfg.exact` only the exact values are produced.
pub fn run_performance(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimulationError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let kind = Experiment::Performance;
    if cfg.exact {
        for &rho in &cfg.rho_list {
            for &r in &cfg.r_list {
                let pt = latent(rho, r)?;
                for &lambda in &cfg.lambda_list {
                    let mut row =
                        ResultRow::new(kind, rho, r, Method::RhoLambda).with_lambda(lambda);
                    match rho_lambda(&pt, lambda, &cfg.solver) {
                        Ok(fit) => {
                            row.exact_value = Some(fit.rho);
                            row.failures = usize::from(!fit.converged);
                        }
                        Err(_) => row.failures = 1,
                    }
                    rows.push(row);
                }
                rows.extend(exact_baselines(kind, rho, r, &pt, cfg));
            }
        }
        return Ok(ExperimentResult {
            experiment: kind,
            rows,
        });
    }

    for (cell, rho, r, n) in sampled_cells(cfg) {
        let pt = latent(rho, r)?;
        let lambdas = &cfg.lambda_list;
        let per_rep: Vec<(Vec<Outcome>, Option<(f64, Option<f64>)>)> = cfg.run_in_pool(|| {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut stream = RngStream::new(cfg.seed, cell, rep);
                    let table = sample_table(&pt, n, &mut stream);
                    let outcomes = lambdas
                        .iter()
                        .map(|&l| estimate(&table, l, &cfg.solver))
                        .collect();
                    let base = table
                        .to_probabilities()
                        .ok()
                        .map(|s| (cramers_v2(&s), u_total(&s).ok()));
                    (outcomes, base)
                })
                .collect()
        })?;

        for (k, &lambda) in lambdas.iter().enumerate() {
            let mut row = ResultRow::new(kind, rho, r, Method::RhoLambda).with_lambda(lambda);
            row.n = Some(n);
            let outcomes: Vec<Outcome> = per_rep.iter().map(|(o, _)| o[k]).collect();
            summarize(&outcomes, &mut row);
            row.exact_value = rho_lambda(&pt, lambda, &cfg.solver).ok().map(|f| f.rho);
            rows.push(row);
        }
        let v2: Vec<Outcome> = per_rep
            .iter()
            .map(|(_, b)| match b {
                Some((v, _)) => Outcome::Value {
                    rho: *v,
                    converged: true,
                },
                None => Outcome::Failed,
            })
            .collect();
        let ut: Vec<Outcome> = per_rep
            .iter()
            .map(|(_, b)| match b {
                Some((_, Some(u))) => Outcome::Value {
                    rho: *u,
                    converged: true,
                },
                _ => Outcome::Failed,
            })
            .collect();
        for (method, outcomes, exact) in [
            (Method::CramersV2, v2, Some(cramers_v2(&pt))),
            (Method::UTotal, ut, u_total(&pt).ok()),
        ] {
            let mut row = ResultRow::new(kind, rho, r, method);
            row.n = Some(n);
            summarize(&outcomes, &mut row);
            row.exact_value = exact;
            rows.push(row);
        }
    }
    Ok(ExperimentResult {
        experiment: kind,
        rows,
    })
}

fn exact_baselines(
    kind: Experiment,
    rho: f64,
    r: usize,
    pt: &ProbabilityTable,
    cfg: &ExperimentConfig,
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let mut v2 = ResultRow::new(kind, rho, r, Method::CramersV2);
    v2.exact_value = Some(cramers_v2(pt));
    rows.push(v2);
    let mut ut = ResultRow::new(kind, rho, r, Method::UTotal);
    match u_total(pt) {
        Ok(u) => ut.exact_value = Some(u),
        Err(_) => ut.failures = 1,
    }
    rows.push(ut);
    if cfg.polychoric || kind == Experiment::Boundary {
        let mut row = ResultRow::new(kind, rho, r, Method::PolychoricTwoStep);
        match polychoric_two_step(pt, &cfg.polychoric_config) {
            Ok(est) => {
                row.exact_value = Some(est.rho);
                row.boundary = usize::from(est.at_boundary);
                row.failures = usize::from(!est.converged);
            }
            Err(_) => row.failures = 1,
        }
        rows.push(row);
    }
    rows
}

#[derive(Debug, Clone, Copy)]
enum CiOutcome {
    Covered(bool, bool),
    Boundary(bool, bool),
    Skipped,
    Failed,
}

fn coverage_outcome(
    table: &ContingencyTable,
    lambda: Lambda,
    target: f64,
    cfg: &ExperimentConfig,
) -> CiOutcome {
    let Ok(pt) = table.to_probabilities() else {
        return CiOutcome::Failed;
    };
    let report = match InferenceReport::new(&pt, table.total(), lambda, &cfg.solver) {
        Ok(r) => r,
        Err(InferenceError::ZeroCellNegativeLambda(..)) => return CiOutcome::Skipped,
        Err(_) => return CiOutcome::Failed,
    };
    if !report.fit.converged {
        return CiOutcome::Failed;
    }
    if report.is_boundary() {
        return CiOutcome::Boundary(false, false);
    }
    let simple = report
        .simple(cfg.alpha, Scale::Rho)
        .is_ok_and(|ci| ci.contains(target));
    match report.fisher_z(cfg.alpha) {
        Ok(ci) => CiOutcome::Covered(simple, ci.contains(target)),
        Err(InferenceError::BoundaryEstimate(_)) => CiOutcome::Boundary(simple, false),
        Err(_) => CiOutcome::Failed,
    }
}

/// Fraction of Simple (ρ scale) and Fisher's z intervals covering the target,
/// per `(ρ, r, n, λ)`. Boundary estimates count as non-covering and are also
/// tallied in `boundary`; skipped and failed replications are excluded from
/// the denominator.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimulationError> {
    cfg.validate()?;
    let kind = Experiment::Coverage;
    let mut rows = Vec::new();
    for (cell, rho, r, n) in sampled_cells(cfg) {
        let pt = latent(rho, r)?;
        let targets: Vec<Option<f64>> = cfg
            .lambda_list
            .iter()
            .map(|&l| match cfg.target {
                CoverageTarget::Measure => rho_lambda(&pt, l, &cfg.solver).ok().map(|f| f.rho),
                CoverageTarget::Latent => Some(rho),
            })
            .collect();
        let per_rep: Vec<Vec<CiOutcome>> = cfg.run_in_pool(|| {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut stream = RngStream::new(cfg.seed, cell, rep);
                    let table = sample_table(&pt, n, &mut stream);
                    cfg.lambda_list
                        .iter()
                        .zip(&targets)
                        .map(|(&l, target)| match target {
                            Some(t) => coverage_outcome(&table, l, *t, cfg),
                            None => CiOutcome::Failed,
                        })
                        .collect()
                })
                .collect()
        })?;

        for (k, &lambda) in cfg.lambda_list.iter().enumerate() {
            for (m, method) in [Method::Simple, Method::FisherZ].into_iter().enumerate() {
                let mut row = ResultRow::new(kind, rho, r, method).with_lambda(lambda);
                row.n = Some(n);
                row.reps = cfg.reps;
                row.target = targets[k];
                let mut covered = 0usize;
                for rep in &per_rep {
                    match rep[k] {
                        CiOutcome::Covered(s, f) => {
                            row.used += 1;
                            covered += usize::from(if m == 0 { s } else { f });
                        }
                        CiOutcome::Boundary(s, f) => {
                            row.used += 1;
                            row.boundary += 1;
                            covered += usize::from(if m == 0 { s } else { f });
                        }
                        CiOutcome::Skipped => row.skipped += 1,
                        CiOutcome::Failed => row.failures += 1,
                    }
                }
                row.coverage = (row.used > 0).then(|| covered as f64 / row.used as f64);
                rows.push(row);
            }
        }
    }
    Ok(ExperimentResult {
        experiment: kind,
        rows,
    })
}

/// Exact-table behaviour for correlations near one: each `ρ_(λ)` with its
/// convergence flag, the polychoric estimate with its boundary flag, and the
/// classical baselines. `n_list` is ignored.
pub fn run_boundary(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimulationError> {
    cfg.validate()?;
    let kind = Experiment::Boundary;
    let cells: Vec<(f64, usize)> = cfg
        .rho_list
        .iter()
        .flat_map(|&rho| cfg.r_list.iter().map(move |&r| (rho, r)))
        .collect();
    let per_cell: Vec<Result<Vec<ResultRow>, SimulationError>> = cfg.run_in_pool(|| {
        cells
            .par_iter()
            .map(|&(rho, r)| {
                let pt = latent(rho, r)?;
                let mut rows = Vec::new();
                for &lambda in &cfg.lambda_list {
                    let mut row =
                        ResultRow::new(kind, rho, r, Method::RhoLambda).with_lambda(lambda);
                    row.reps = 1;
                    match rho_lambda(&pt, lambda, &cfg.solver) {
                        Ok(fit) if fit.converged => {
                            row.used = 1;
                            row.exact_value = Some(fit.rho);
                        }
                        Ok(fit) => {
                            row.failures = 1;
                            row.exact_value = Some(fit.rho);
                        }
                        Err(_) => row.failures = 1,
                    }
                    rows.push(row);
                }
                for mut row in exact_baselines(kind, rho, r, &pt, cfg) {
                    row.reps = 1;
                    row.used = 1 - row.failures;
                    rows.push(row);
                }
                Ok(rows)
            })
            .collect()
    })?;
    let mut rows = Vec::new();
    for cell in per_cell {
        rows.extend(cell?);
    }
    Ok(ExperimentResult {
        experiment: kind,
        rows,
    })
}

/// Median wall-clock time of `f` over `reps` runs after `warmups` discarded
/// runs.
pub fn median_time<T>(mut f: impl FnMut() -> T, reps: usize, warmups: usize) -> Duration {
    for _ in 0..warmups {
        std::hint::black_box(f());
    }
    let mut times: Vec<Duration> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(f());
            start.elapsed()
        })
        .collect();
    times.sort();
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        (times[mid - 1] + times[mid]) / 2
    }
}

/// Timing of each `ρ_(λ)` (divergence plus inversion) against the two-step
/// polychoric estimator on exact tables. Runs sequentially on the calling
/// thread.
pub fn run_runtime(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimulationError> {
    cfg.validate()?;
    let kind = Experiment::Runtime;
    let mut rows = Vec::new();
    for &rho in &cfg.rho_list {
        for &r in &cfg.r_list {
            let pt = latent(rho, r)?;
            let poly = median_time(
                || polychoric_two_step(&pt, &cfg.polychoric_config),
                cfg.timing_reps,
                cfg.timing_warmups,
            )
            .as_secs_f64();
            for &lambda in &cfg.lambda_list {
                let secs = median_time(
                    || rho_lambda(&pt, lambda, &cfg.solver),
                    cfg.timing_reps,
                    cfg.timing_warmups,
                )
                .as_secs_f64();
                let mut row = ResultRow::new(kind, rho, r, Method::RhoLambda).with_lambda(lambda);
                row.reps = cfg.timing_reps;
                row.used = cfg.timing_reps;
                row.median_seconds = Some(secs);
                row.speedup = Some(poly / secs.max(1e-12));
                rows.push(row);
            }
            let mut row = ResultRow::new(kind, rho, r, Method::PolychoricTwoStep);
            row.reps = cfg.timing_reps;
            row.used = cfg.timing_reps;
            row.median_seconds = Some(poly);
            row.speedup = Some(1.0);
            rows.push(row);
        }
    }
    Ok(ExperimentResult {
        experiment: kind,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_split_is_uniform_at_zero() {
        let pt = latent(0.0, 2).unwrap();
        for &p in pt.flatten() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(7, 1, 2).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s = RngStream::new(7, 1, 2);
        let mut t = RngStream::new(7, 1, 3);
        let mut u = RngStream::new(7, 2, 2);
        let (x, y, z) = (s.next_u64(), t.next_u64(), u.next_u64());
        assert!(x != y && x != z && y != z);
    }

    #[test]
    fn sample_of_one() {
        let pt = latent(0.5, 3).unwrap();
        let t = sample_table(&pt, 1, &mut RngStream::new(1, 0, 0));
        assert_eq!(t.counts().iter().sum::<u64>(), 1);
        assert_eq!(t.counts().iter().filter(|&&c| c == 1).count(), 1);
    }

    #[test]
    fn empty_grid_gives_empty_result() {
        let cfg = ExperimentConfig {
            r_list: vec![],
            reps: 3,
            ..Default::default()
        };
        assert!(run_coverage(&cfg).unwrap().rows.is_empty());
    }

    #[test]
    fn median_of_single_run() {
        let d = median_time(|| 1 + 1, 1, 0);
        assert!(d < Duration::from_secs(1));
    }
}
