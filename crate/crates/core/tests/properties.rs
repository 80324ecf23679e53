use latcorr::inference::multinomial_quadratic_form;
use latcorr::*;
use proptest::prelude::*;

const GRID_LAMBDAS: [f64; 6] = [-1.0, -0.5, 0.0, 0.3, 2.0 / 3.0, 1.0];

fn lam(v: f64) -> Lambda {
    Lambda::new(v).unwrap()
}

fn t_grid() -> impl Iterator<Item = f64> {
    (0..=19).map(|k| k as f64 * 0.05)
}

/// Strictly positive tables of shape 2..=6 × 2..=6.
fn positive_table() -> impl Strategy<Value = ProbabilityTable> {
    (2usize..=6, 2usize..=6).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.01f64..1.0, r * c).prop_map(move |w| {
            let s: f64 = w.iter().sum();
            let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
            // Put the rounding residue on the largest cell so the sum is 1.
            let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            let rest: f64 = p
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, x)| x)
                .sum();
            p[k] = 1.0 - rest;
            ProbabilityTable::unflatten(&p, r, c).unwrap()
        })
    })
}

fn entropy_bound(pt: &ProbabilityTable) -> f64 {
    let h = margin_entropy(pt.row_margins()).min(margin_entropy(pt.col_margins()));
    -(-2.0 * h).exp_m1()
}

#[test]
fn divergence_map_is_increasing_with_positive_slope() {
    for l in GRID_LAMBDAS {
        let mut prev = -1.0;
        for t in t_grid() {
            let i = i_of_t(t, lam(l)).unwrap();
            assert!(i > prev, "lambda {l}, t {t}");
            assert!(i_prime(t, lam(l)).unwrap() > 0.0);
            prev = i;
        }
    }
}

#[test]
fn newton_round_trip() {
    let cfg = SolveConfig::default();
    for l in GRID_LAMBDAS {
        for t in t_grid() {
            let d = i_of_t(t, lam(l)).unwrap();
            let fit = solve_t(d, lam(l), &cfg).unwrap();
            assert!(fit.converged);
            assert!((fit.t - t).abs() <= 1e-8, "lambda {l}, t {t}: {}", fit.t);
            assert!(fit.residual <= 1e-10 * (1.0 + d));
            assert!((fit.rho * fit.rho - fit.t).abs() <= 1e-15);
        }
    }
}

#[test]
fn closed_forms_agree_with_newton() {
    let cfg = SolveConfig::default();
    for l in [Lambda::KL, Lambda::PEARSON] {
        for k in 0..=500 {
            let d = k as f64 * 0.01;
            let closed = rho_closed_form(d, l).unwrap();
            let newton = solve_t(d, l, &cfg).unwrap();
            assert!(newton.converged);
            assert!((closed - newton.rho).abs() <= 1e-9, "lambda {l} D {d}");
        }
    }
}

#[test]
fn derivative_matches_central_difference() {
    let (t, h) = (0.4, 1e-6);
    for l in GRID_LAMBDAS {
        let fd = (i_of_t(t + h, lam(l)).unwrap() - i_of_t(t - h, lam(l)).unwrap()) / (2.0 * h);
        assert!(
            (fd - i_prime(t, lam(l)).unwrap()).abs() < 1e-8,
            "lambda {l}"
        );
    }
}

#[test]
fn quadratic_expansion_error_is_cubic() {
    // I_λ(t) − t/2 − (3λ² − λ + 2) t²/8 = O(t³); the ratio to t³ settles.
    for l in GRID_LAMBDAS {
        let c2 = (3.0 * l * l - l + 2.0) / 8.0;
        let ratio = |t: f64| (i_of_t(t, lam(l)).unwrap() - 0.5 * t - c2 * t * t) / (t * t * t);
        let (a, b) = (ratio(1e-3), ratio(5e-4));
        assert!(a.abs() < 1.0, "lambda {l}: {a}");
        assert!(
            (a - b).abs() < 2e-3 * a.abs().max(1.0),
            "lambda {l}: {a} vs {b}"
        );
    }
}

#[test]
fn independence_gives_zero_variance_and_estimate() {
    let pt =
        ProbabilityTable::from_probabilities(&[vec![0.02, 0.08, 0.10], vec![0.08, 0.32, 0.40]])
            .unwrap();
    for l in [-0.5, 0.0, 2.0 / 3.0, 1.0] {
        assert!(sigma2_d(&pt, lam(l)).unwrap().abs() < 1e-15);
        let fit = rho_lambda(&pt, lam(l), &SolveConfig::default()).unwrap();
        assert!(fit.rho < 1e-7, "lambda {l}: {}", fit.rho);
    }
}

/// Directional derivative along `e_a − e_b`, which keeps the table on the
/// simplex.
fn tangent_fd(pt: &ProbabilityTable, l: Lambda, a: usize, b: usize) -> f64 {
    let h = 1e-6;
    let shifted = |s: f64| {
        let mut p = pt.flatten().to_vec();
        p[a] += s;
        p[b] -= s;
        let q = ProbabilityTable::unflatten(&p, pt.rows(), pt.cols()).unwrap();
        power_divergence(&q, l).unwrap().value
    };
    (shifted(h) - shifted(-h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn entropy_and_category_bounds(pt in positive_table()) {
        let cfg = SolveConfig::default();
        let t0 = rho_lambda(&pt, Lambda::KL, &cfg).unwrap().t;
        prop_assert!(t0 >= 0.0);
        prop_assert!(t0 <= entropy_bound(&pt) + 1e-10);
        let t1 = rho_lambda(&pt, Lambda::PEARSON, &cfg).unwrap().t;
        let m = pt.rows().min(pt.cols()) as f64;
        prop_assert!(t1 >= 0.0);
        prop_assert!(t1 <= 1.0 - 1.0 / m + 1e-12);
    }

    #[test]
    fn classical_identities(pt in positive_table()) {
        let cfg = SolveConfig::default();
        let rho1 = rho_lambda(&pt, Lambda::PEARSON, &cfg).unwrap().rho;
        prop_assert!((pearson_c(&pt) - rho1).abs() <= 1e-12);
        let t0 = rho_lambda(&pt, Lambda::KL, &cfg).unwrap().t;
        prop_assert!((cox_snell_r2(&pt) - t0).abs() <= 1e-12);
        let ng = nagelkerke_r2(&pt).unwrap();
        prop_assert!((0.0..=1.0).contains(&ng));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_tangent_differences(
        pt in positive_table(),
        li in 0usize..6,
        a in 0usize..36,
        b in 0usize..36,
    ) {
        let l = lam(GRID_LAMBDAS[li]);
        let len = pt.flatten().len();
        let (a, b) = (a % len, b % len);
        prop_assume!(a != b);
        let g = grad_d(&pt, l).unwrap().0;
        let analytic = g[a] - g[b];
        let fd = tangent_fd(&pt, l, a, b);
        let scale = analytic.abs().max(fd.abs()).max(1e-3);
        prop_assert!((analytic - fd).abs() <= 1e-6 * scale, "{} vs {}", analytic, fd);
    }

    #[test]
    fn variance_ignores_constant_shift(pt in positive_table(), li in 0usize..6, shift in -50.0f64..50.0) {
        let l = lam(GRID_LAMBDAS[li]);
        let g = grad_d(&pt, l).unwrap().0;
        let base = multinomial_quadratic_form(pt.flatten(), &g);
        let moved: Vec<f64> = g.iter().map(|x| x + shift).collect();
        let shifted = multinomial_quadratic_form(pt.flatten(), &moved);
        prop_assert!((base - shifted).abs() <= 1e-12 * base.abs().max(1e-300) + 1e-300,
            "{} vs {}", base, shifted);
        let s2 = sigma2_d(&pt, l).unwrap();
        prop_assert!((s2 - base).abs() <= 1e-9 * base.max(1e-12));
    }

    #[test]
    fn measures_ignore_relabelling(pt in positive_table(), seed in any::<u64>()) {
        let (r, c) = (pt.rows(), pt.cols());
        let perm = |n: usize, s: u64| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.rotate_left((s % n as u64) as usize);
            idx.swap(0, n - 1);
            idx
        };
        let (pr, pc) = (perm(r, seed), perm(c, seed >> 7));
        let mut p = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                p[i * c + j] = pt.get(pr[i], pc[j]);
            }
        }
        let permuted = ProbabilityTable::unflatten(&p, r, c).unwrap();
        let transposed = pt.transpose();
        let cfg = SolveConfig::default();
        for other in [&permuted, &transposed] {
            prop_assert!((cramers_v2(&pt) - cramers_v2(other)).abs() < 1e-12);
            prop_assert!((u_total(&pt).unwrap() - u_total(other).unwrap()).abs() < 1e-12);
            for l in [-0.5, 0.0, 2.0 / 3.0, 1.0] {
                let a = rho_lambda(&pt, lam(l), &cfg).unwrap().rho;
                let b = rho_lambda(other, lam(l), &cfg).unwrap().rho;
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn intervals_contain_estimate_and_nest(pt in positive_table(), n in 100u64..100_000) {
        let cfg = SolveConfig::default();
        for l in [-0.5, 0.0, 2.0 / 3.0, 1.0] {
            let report = InferenceReport::new(&pt, n, lam(l), &cfg).unwrap();
            prop_assume!(!report.is_boundary());
            let rho = report.fit.rho;
            let wide = report.simple(0.01, Scale::Rho).unwrap();
            let narrow = report.simple(0.05, Scale::Rho).unwrap();
            prop_assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
            prop_assert!(narrow.lower <= rho && rho <= narrow.upper);
            let fw = report.fisher_z(0.01).unwrap();
            let fz = report.fisher_z(0.05).unwrap();
            prop_assert!(fw.lower <= fz.lower && fz.upper <= fw.upper);
            prop_assert!(fz.lower <= rho && rho <= fz.upper);
            let v = report.variances;
            prop_assert!(v.sigma2_z.unwrap() >= v.sigma2_rho.unwrap());
        }
    }
}
