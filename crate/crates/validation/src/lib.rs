//! Published reference values used by the acceptance suite, plus paths to
//! the shipped data sets.

use std::path::{Path, PathBuf};

use latcorr::Lambda;
use serde::Deserialize;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Count tables shipped in the workspace `data/` directory.
pub fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn read<T: for<'de> Deserialize<'de>>(name: &str) -> Vec<T> {
    let path = fixtures().join(name);
    let mut reader =
        csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn lambda(token: &str) -> Lambda {
    token.parse().expect("fixture lambda")
}

/// One cell of a detectable-threshold table, printed to four decimals.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCell {
    pub lambda: Lambda,
    pub df: u32,
    pub n: u64,
    pub alpha: f64,
    pub threshold: f64,
}

pub fn threshold_cells() -> Vec<ThresholdCell> {
    #[derive(Deserialize)]
    struct Raw {
        lambda: String,
        df: u32,
        n: u64,
        alpha: f64,
        threshold: f64,
    }
    read::<Raw>("thresholds.csv")
        .into_iter()
        .map(|r| ThresholdCell {
            lambda: lambda(&r.lambda),
            df: r.df,
            n: r.n,
            alpha: r.alpha,
            threshold: r.threshold,
        })
        .collect()
}

/// Measures on exact latent tables, printed to five decimals.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ExactCell {
    pub rho: f64,
    pub r: usize,
    pub polychoric_ml: f64,
    pub polychoric: f64,
    pub rho_m1_2: f64,
    pub rho_0: f64,
    pub rho_2_3: f64,
    pub rho_1: f64,
}

impl ExactCell {
    /// `(λ, ρ_(λ))` pairs in column order.
    pub fn measures(&self) -> [(Lambda, f64); 4] {
        [
            (Lambda::FREEMAN_TUKEY, self.rho_m1_2),
            (Lambda::KL, self.rho_0),
            (Lambda::CRESSIE_READ, self.rho_2_3),
            (Lambda::PEARSON, self.rho_1),
        ]
    }
}

pub fn exact_cells() -> Vec<ExactCell> {
    read("exact_tables.csv")
}

/// Full-scale coverage of 95% intervals.
#[derive(Debug, Clone, Copy)]
pub struct CoverageCell {
    pub r: usize,
    pub rho: f64,
    pub n: u64,
    pub fisher: bool,
    pub lambda: Lambda,
    pub coverage: f64,
}

pub fn coverage_cells() -> Vec<CoverageCell> {
    #[derive(Deserialize)]
    struct Raw {
        r: usize,
        rho: f64,
        n: u64,
        method: String,
        lambda: String,
        coverage: f64,
    }
    read::<Raw>("coverage.csv")
        .into_iter()
        .map(|c| CoverageCell {
            r: c.r,
            rho: c.rho,
            n: c.n,
            fisher: match c.method.as_str() {
                "simple" => false,
                "fisher_z" => true,
                other => panic!("unknown method {other}"),
            },
            lambda: lambda(&c.lambda),
            coverage: c.coverage,
        })
        .collect()
}
