mod common;

use common::{mixed_spec, nb_logpmf_direct, poisson_logpmf_direct, rel_err};
use liketally::negbin::{
    aic, fit_negbin, fit_poisson, lr_overdispersion, nb_hessian, nb_loglik, nb_score, poisson_loglik, FitOptions,
};
use liketally::synth::generate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<u64>, DMatrix<f64>, Vec<f64>, f64) {
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.8..0.8)).collect();
    let alpha = rng.random_range(0.05..3.0);
    let y = (0..n).map(|_| rng.random_range(0..40u64)).collect();
    (y, x, beta, alpha)
}

#[test]
fn loglik_matches_gamma_function_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (y, x, beta, alpha) = random_instance(&mut rng, 30, 3);
        let mu = &x * DVector::from_column_slice(&beta);
        let direct: f64 = y
            .iter()
            .zip(mu.iter())
            .map(|(&yj, &e)| nb_logpmf_direct(yj, e.exp(), alpha))
            .sum();
        let ours = nb_loglik(&y, &x, &beta, alpha).unwrap();
        assert!(rel_err(ours, direct) < 1e-10, "{ours} vs {direct}");
    }
}

#[test]
fn pmf_sums_to_one() {
    let x = DMatrix::from_element(1, 1, 1.0);
    for &(mu, alpha) in &[(0.3, 0.1), (2.0, 0.5), (10.0, 1.0), (50.0, 2.0), (5.0, 1e-3)] {
        let mut total = 0.0;
        let mut y = 0u64;
        // stop once the remaining mass is provably negligible: past the mean
        // the pmf decays, so terms below 1e-18 over a long run are enough
        let mut small_run = 0;
        while small_run < 2000 {
            let term = nb_loglik(&[y], &x, &[f64::ln(mu)], alpha).unwrap().exp();
            total += term;
            if (y as f64) > mu && term < 1e-18 {
                small_run += 1;
            }
            y += 1;
        }
        assert!((total - 1.0).abs() < 1e-8, "mu {mu} alpha {alpha}: {total}");
    }
}

#[test]
fn poisson_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (y, x, beta, _) = random_instance(&mut rng, 15, 2);
        let nb = nb_loglik(&y, &x, &beta, 1e-8).unwrap();
        let pois = poisson_loglik(&y, &x, &beta).unwrap();
        assert!((nb - pois).abs() < 1e-4, "{nb} vs {pois}");
        let eta = &x * DVector::from_column_slice(&beta);
        let direct: f64 = y.iter().zip(eta.iter()).map(|(&v, e)| poisson_logpmf_direct(v, e.exp())).sum();
        assert!(rel_err(pois, direct) < 1e-12);
    }
}

#[test]
fn hessian_matches_finite_differences_of_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let (y, x, beta, alpha) = random_instance(&mut rng, 40, 3);
        let h = nb_hessian(&y, &x, &beta, alpha).unwrap();
        let p = beta.len();
        let step = 1e-5;
        for j in 0..=p {
            let shifted = |s: f64| {
                let mut b = beta.clone();
                let mut a = alpha;
                if j < p {
                    b[j] += s;
                } else {
                    a = alpha * s.exp();
                }
                nb_score(&y, &x, &b, a).unwrap()
            };
            let (up, down) = (shifted(step), shifted(-step));
            for i in 0..=p {
                let fd = (up[i] - down[i]) / (2.0 * step);
                let scale = h[(i, j)].abs().max(1.0);
                assert!((fd - h[(i, j)]).abs() / scale < 1e-6, "H[{i},{j}] {} vs fd {fd}", h[(i, j)]);
            }
        }
        assert!((&h - h.transpose()).amax() < 1e-9 * h.amax());
    }
}

#[test]
fn score_vanishes_at_optimum_and_hessian_is_negative_definite() {
    let spec = mixed_spec(3000, vec![1.0, 0.4, -0.3, 0.2, 0.5], 0.7, vec![0.3], 5);
    let (d, y) = generate(&spec).unwrap();
    let fit = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let g = nb_score(&y, &d.x, &fit.coefficients, fit.alpha).unwrap();
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(gmax < 1e-8 * fit.loglik.abs());
    assert!((gmax - fit.gradient_norm_at_opt).abs() < 1e-12 * fit.loglik.abs());
    let h = nb_hessian(&y, &d.x, &fit.coefficients, fit.alpha).unwrap();
    assert!((-h).cholesky().is_some());
    assert_eq!(fit.aic, aic(fit.n_params(), fit.loglik));
    assert_eq!(fit.aic, 2.0 * 6.0 - 2.0 * fit.loglik);
}

#[test]
fn poisson_recovers_intercept() {
    let spec = mixed_spec(20_000, vec![1.0, 0.0, 0.0, 0.0], 0.0, vec![], 21);
    let (d, y) = generate(&spec).unwrap();
    let x = d.x.columns(0, 1).into_owned();
    let fit = fit_poisson(&y, &x).unwrap();
    assert!(fit.converged);
    assert!((fit.coefficients[0] - 1.0).abs() < 0.05, "{:?}", fit.coefficients);
}

#[test]
fn negbin_recovers_three_coefficients() {
    let mut spec = mixed_spec(20_000, vec![1.0, 0.5, -0.3], 0.8, vec![], 22);
    spec.controls.truncate(2);
    let (d, y) = generate(&spec).unwrap();
    let fit = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    for (b, t) in fit.coefficients.iter().zip(&spec.beta) {
        assert!((b - t).abs() < 0.05, "{b} vs {t}");
    }
    assert!((fit.alpha - 0.8).abs() < 0.05, "alpha {}", fit.alpha);
}

#[test]
fn poisson_data_gives_vanishing_dispersion() {
    let spec = mixed_spec(5000, vec![1.2, 0.3, -0.2, 0.1], 0.0, vec![], 23);
    let (d, y) = generate(&spec).unwrap();
    let nb = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    let pois = fit_poisson(&y, &d.x).unwrap();
    assert!(nb.alpha < 0.01, "alpha {}", nb.alpha);
    assert!((nb.loglik - pois.loglik).abs() < 0.05);
    // the boundary is approached only to within the gradient tolerance
    assert!(nb.loglik >= pois.loglik - 1e-4, "{} vs {}", nb.loglik, pois.loglik);
}

#[test]
fn strong_overdispersion_is_detected() {
    let spec = mixed_spec(5000, vec![1.0, 0.3, -0.2, 0.1], 0.5, vec![], 24);
    let (d, y) = generate(&spec).unwrap();
    let nb = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    let pois = fit_poisson(&y, &d.x).unwrap();
    let lr = lr_overdispersion(&nb, &pois).unwrap();
    assert!(lr.p_value < 1e-6, "{lr:?}");
}

#[test]
fn fixture_fits_match_reference_implementation() {
    // Values from an independent NB2 maximum-likelihood implementation
    // (Newton iterations on the same design, refined to convergence).
    use liketally::pipeline::{Analysis, RunConfig};
    let mut cfg = RunConfig::new(std::env::temp_dir());
    cfg.tweets = Some(common::fixture("tweets.jsonl"));
    cfg.followers = Some(common::fixture("followers.csv"));
    let a = Analysis::load(&cfg).unwrap();
    let reference = [
        ("clinton", -175.427_272_190_243, 0.195_269_226_671),
        ("sanders", -194.900_072_106_769, 0.267_657_099_328),
        ("trump", -189.660_814_119_072, 0.147_515_701_323),
    ];
    for (cand, ll, alpha) in reference {
        let d = a.design(cand).unwrap();
        let fit = a.fit(&d, &FitOptions::default()).unwrap();
        assert!((fit.loglik - ll).abs() < 1e-6, "{cand}: {} vs {ll}", fit.loglik);
        assert!((fit.alpha - alpha).abs() < 1e-5, "{cand}: {} vs {alpha}", fit.alpha);
    }
}
