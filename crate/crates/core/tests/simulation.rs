use latcorr::simulation::*;
use latcorr::*;

fn latent(r: usize, rho: f64) -> ProbabilityTable {
    latent_probability_table(&LatentSpec::new(r, rho).unwrap()).unwrap()
}

fn lam(v: f64) -> Lambda {
    Lambda::new(v).unwrap()
}

#[test]
fn median_split_follows_sheppard() {
    let pt = latent(2, 0.5);
    let diag = 0.25 + 0.5f64.asin() / (2.0 * std::f64::consts::PI);
    assert!((pt.get(0, 0) - diag).abs() < 1e-15);
    assert!((pt.get(1, 1) - diag).abs() < 1e-15);
    assert!((pt.get(0, 1) - (0.5 - diag)).abs() < 1e-15);
}

#[test]
fn latent_tables_are_symmetric_with_uniform_margins() {
    for r in [2, 3, 7, 10, 25, 50, 100] {
        for rho in [-0.99, -0.4, 0.0, 0.3, 0.9, 0.99] {
            let pt = latent(r, rho);
            let u = 1.0 / r as f64;
            for k in 0..r {
                assert!((pt.row_margins()[k] - u).abs() < 1e-9, "r {r} rho {rho}");
                assert!((pt.col_margins()[k] - u).abs() < 1e-9, "r {r} rho {rho}");
            }
            for i in 0..r {
                for j in 0..r {
                    assert_eq!(pt.get(i, j), pt.get(j, i));
                }
            }
        }
    }
}

#[test]
fn spec_rejects_bad_inputs() {
    assert!(LatentSpec::new(1, 0.5).is_err());
    assert!(LatentSpec::new(5, 1.0).is_err());
    assert!(LatentSpec::new(5, f64::NAN).is_err());
}

#[test]
fn exact_table_values() {
    let cfg = SolveConfig::default();
    let r10 = rho_lambda(&latent(10, 0.2), Lambda::KL, &cfg).unwrap().rho;
    assert!((r10 - 0.19187).abs() < 5e-6);
    let r10 = rho_lambda(&latent(10, 0.5), Lambda::KL, &cfg).unwrap().rho;
    assert!((r10 - 0.48070).abs() < 5e-6);
    let r10 = rho_lambda(&latent(10, 0.8), Lambda::CRESSIE_READ, &cfg)
        .unwrap()
        .rho;
    assert!((r10 - 0.74410).abs() < 5e-6);
    let r50 = rho_lambda(&latent(50, 0.2), Lambda::PEARSON, &cfg)
        .unwrap()
        .rho;
    assert!((r50 - 0.19848).abs() < 5e-6);
}

#[test]
fn measures_increase_with_rho_and_approach_it_with_r() {
    let cfg = SolveConfig::default();
    for l in [-0.5, 0.0, 2.0 / 3.0, 1.0] {
        let mut prev = 0.0;
        for k in 1..=9 {
            let v = rho_lambda(&latent(6, k as f64 / 10.0), lam(l), &cfg)
                .unwrap()
                .rho;
            assert!(v > prev, "lambda {l}");
            prev = v;
        }
        for rho in [0.2, 0.5, 0.8] {
            let mut gap = f64::INFINITY;
            for r in [5, 10, 25, 50] {
                let v = rho_lambda(&latent(r, rho), lam(l), &cfg).unwrap().rho;
                assert!((rho - v).abs() < gap, "lambda {l} rho {rho} r {r}");
                gap = (rho - v).abs();
            }
        }
    }
}

#[test]
fn polychoric_recovers_latent_rho() {
    let cfg = PolychoricConfig::default();
    assert!(
        polychoric_two_step(&latent(6, 0.0), &cfg)
            .unwrap()
            .rho
            .abs()
            < 1e-6
    );
    for (r, rho) in [(10, 0.5), (25, 0.2), (10, 0.9), (12, 0.7)] {
        let est = polychoric_two_step(&latent(r, rho), &cfg).unwrap();
        assert!((est.rho - rho).abs() < 1e-4, "r {r} rho {rho}: {}", est.rho);
    }
}

#[test]
fn sampling_is_deterministic_and_exact_in_total() {
    let pt = latent(4, 0.5);
    let a = sample_table(&pt, 5000, &mut RngStream::new(11, 3, 9));
    let b = sample_table(&pt, 5000, &mut RngStream::new(11, 3, 9));
    assert_eq!(a, b);
    assert_eq!(a.total(), 5000);
    let c = sample_table(&pt, 5000, &mut RngStream::new(11, 3, 10));
    assert_ne!(a, c);
}

#[test]
fn large_sample_concentrates_around_cell_probabilities() {
    let pt = latent(4, 0.5);
    let n = 1_000_000u64;
    let mut inside = 0;
    let mut cells = 0;
    for rep in 0..5 {
        let t = sample_table(&pt, n, &mut RngStream::new(2024, 0, rep));
        for (k, &p) in pt.flatten().iter().enumerate() {
            let phat = t.counts()[k] as f64 / n as f64;
            cells += 1;
            if (phat - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt() {
                inside += 1;
            }
        }
    }
    assert!(
        inside as f64 >= 0.99 * cells as f64 - 1.0,
        "{inside} of {cells}"
    );
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        rho_list: vec![0.5],
        r_list: vec![4],
        n_list: vec![500],
        lambda_list: vec![Lambda::FREEMAN_TUKEY, Lambda::KL, Lambda::PEARSON],
        reps: 64,
        seed: 99,
        ..Default::default()
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let one = ExperimentConfig {
        threads: Some(1),
        ..small_config()
    };
    let four = ExperimentConfig {
        threads: Some(4),
        ..small_config()
    };
    assert_eq!(run_coverage(&one).unwrap(), run_coverage(&four).unwrap());
    assert_eq!(
        run_performance(&one).unwrap(),
        run_performance(&four).unwrap()
    );
}

#[test]
fn coverage_counts_reconcile() {
    let cfg = ExperimentConfig {
        rho_list: vec![0.2],
        r_list: vec![8],
        n_list: vec![200],
        ..small_config()
    };
    let res = run_coverage(&cfg).unwrap();
    assert_eq!(res.rows.len(), 3 * 2);
    for row in &res.rows {
        assert_eq!(row.used + row.skipped + row.failures, row.reps);
        assert_eq!(row.coverage.is_some(), row.used > 0);
        assert!(row.coverage.is_none_or(|c| (0.0..=1.0).contains(&c)));
        assert!(row.boundary <= row.used);
    }
    // Sparse 8 × 8 tables at n = 200 have zero cells; λ < 0 skips them.
    assert!(res.rows[0].skipped > 0);
}

#[test]
fn exact_performance_rows() {
    let cfg = ExperimentConfig {
        rho_list: vec![0.5, 0.0],
        r_list: vec![15],
        lambda_list: vec![Lambda::FREEMAN_TUKEY, Lambda::KL],
        exact: true,
        ..Default::default()
    };
    let res = run_performance(&cfg).unwrap();
    let ft = res
        .rows
        .iter()
        .find(|r| r.rho == 0.5 && r.lambda == Some(-0.5))
        .unwrap();
    assert!((ft.exact_value.unwrap() - 0.48861).abs() < 5e-6);
    for row in res.rows.iter().filter(|r| r.rho == 0.0) {
        assert!(row.exact_value.unwrap().abs() < 1e-7, "{row:?}");
    }
}

#[test]
fn sparse_tables_overestimate() {
    let cfg = ExperimentConfig {
        rho_list: vec![0.2],
        r_list: vec![8],
        n_list: vec![3000],
        lambda_list: vec![Lambda::KL],
        reps: 200,
        ..Default::default()
    };
    let res = run_performance(&cfg).unwrap();
    let row = &res.rows[0];
    assert_eq!(row.method, Method::RhoLambda);
    assert_eq!(row.used, 200);
    assert!(row.mean.unwrap() > 0.2);
}

#[test]
fn boundary_driver_near_one() {
    let cfg = ExperimentConfig {
        rho_list: vec![0.9, 0.99],
        r_list: vec![5, 50],
        lambda_list: vec![Lambda::KL, Lambda::CRESSIE_READ, Lambda::PEARSON],
        ..Default::default()
    };
    let res = run_boundary(&cfg).unwrap();
    let get = |rho: f64, r: usize, m: Method, l: Option<f64>| {
        res.rows
            .iter()
            .find(|x| x.rho == rho && x.r == r && x.method == m && x.lambda == l)
            .unwrap()
    };
    let poly = get(0.9, 50, Method::PolychoricTwoStep, None);
    assert!((poly.exact_value.unwrap() - 0.9).abs() < 1e-3);
    let kl = get(0.99, 5, Method::RhoLambda, Some(0.0));
    assert_eq!(kl.failures, 0);
    let v = kl.exact_value.unwrap();
    assert!((0.9..0.99).contains(&v), "{v}");
    assert!(res
        .rows
        .iter()
        .all(|r| r.method == Method::PolychoricTwoStep || r.failures == 0));
}

#[test]
fn runtime_with_single_repetition() {
    let cfg = ExperimentConfig {
        rho_list: vec![0.5],
        r_list: vec![10],
        lambda_list: vec![Lambda::KL],
        timing_reps: 1,
        timing_warmups: 0,
        ..Default::default()
    };
    let res = run_runtime(&cfg).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert!(res.rows.iter().all(|r| r.median_seconds.unwrap() >= 0.0));
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        ExperimentConfig {
            reps: 0,
            ..Default::default()
        },
        ExperimentConfig {
            rho_list: vec![1.0],
            ..Default::default()
        },
        ExperimentConfig {
            n_list: vec![0],
            ..Default::default()
        },
        ExperimentConfig {
            alpha: 1.5,
            ..Default::default()
        },
    ] {
        assert!(matches!(
            run_performance(&cfg),
            Err(SimulationError::InvalidConfig(_))
        ));
    }
}
