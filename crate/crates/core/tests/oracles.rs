mod common;

use common::*;
use credsel::distributions::{sample_gig, sample_inverse_gaussian, GigParams};
use credsel::path::{solve_path, weight_of, SelectionProblem};
use credsel::prior::InverseGammaPrior;
use credsel::rng::RngState;
use credsel::samplers::{gibbs_normal, summarize, GammaSpec, McmcConfig};
use credsel::tuning::{closed_form_from_moments, R2Target};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const DRAWS: usize = 1_000_000;

fn gig_draws(chi: f64, rho: f64, lambda0: f64, seed: u64) -> Vec<f64> {
    let params = GigParams::new(chi, rho, lambda0).unwrap();
    let mut r = RngState::new(seed).rng();
    (0..DRAWS).map(|_| sample_gig(&params, &mut r).unwrap()).collect()
}

fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
    let rel = (got - want).abs() / want.abs();
    assert!(rel < tol, "{what}: got {got}, oracle {want}, relative error {rel:.4}");
}

#[test]
fn quadrature_oracle_recovers_gamma_moments() {
    // χ = 0 is Ga(λ₀, ρ/2): mean 2λ₀/ρ, second moment λ₀(λ₀+1)(2/ρ)².
    let m1 = gig_moment(0.0, 2.0, 3.0, 1.0);
    let m2 = gig_moment(0.0, 2.0, 3.0, 2.0);
    assert!((m1 - 3.0).abs() < 1e-8);
    assert!((m2 - 12.0).abs() < 1e-7);
}

#[test]
fn gig_mean_for_negative_index() {
    let xs = gig_draws(1.0, 1.0, -0.5, 1);
    assert_rel(raw_moments(&xs).0, gig_moment(1.0, 1.0, -0.5, 1.0), 0.01, "giG(1,1,-0.5) mean");
}

#[test]
fn gig_two_moments_for_positive_index() {
    let xs = gig_draws(4.0, 1.0, 0.5, 2);
    let (m1, m2) = raw_moments(&xs);
    assert_rel(m1, gig_moment(4.0, 1.0, 0.5, 1.0), 0.01, "giG(4,1,0.5) mean");
    assert_rel(m2, gig_moment(4.0, 1.0, 0.5, 2.0), 0.01, "giG(4,1,0.5) second moment");
}

#[test]
fn gig_local_scale_regime() {
    // step (v) with a = 0.001: λ₀ = a − 1, χ = 2|β_j|/σ over several magnitudes
    for (k, chi) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let xs = gig_draws(chi, 1.0, 0.001 - 1.0, 10 + k as u64);
        let (m1, m2) = raw_moments(&xs);
        assert_rel(m1, gig_moment(chi, 1.0, -0.999, 1.0), 0.01, &format!("chi={chi} mean"));
        assert_rel(m2, gig_moment(chi, 1.0, -0.999, 2.0), 0.01, &format!("chi={chi} second moment"));
    }
}

#[test]
fn gig_global_scale_regime() {
    // step (iv) with p = 1000: λ₀ = pa − p for a in {1/2, 1/1000}
    let p = 1000.0;
    for (k, (a, chi)) in [(0.5, 4.0e5), (0.001, 3.0e6), (0.5, 50.0)].into_iter().enumerate() {
        let l0 = p * a - p;
        let xs = gig_draws(chi, 1.0, l0, 20 + k as u64);
        let (m1, m2) = raw_moments(&xs);
        assert_rel(m1, gig_moment(chi, 1.0, l0, 1.0), 0.01, &format!("lambda0={l0} chi={chi} mean"));
        assert_rel(m2, gig_moment(chi, 1.0, l0, 2.0), 0.01, &format!("lambda0={l0} chi={chi} second moment"));
    }
}

#[test]
fn inverse_gaussian_moments() {
    let mut r = RngState::new(30).rng();
    let xs: Vec<f64> = (0..DRAWS).map(|_| sample_inverse_gaussian(1.0, 1.0, &mut r).unwrap()).collect();
    assert!((raw_moments(&xs).0 - 1.0).abs() < 0.005);

    let xs: Vec<f64> = (0..DRAWS).map(|_| sample_inverse_gaussian(2.0, 1.0, &mut r).unwrap()).collect();
    let (m1, m2) = raw_moments(&xs);
    let want_var = inverse_gaussian_moment(2.0, 1.0, 2.0) - inverse_gaussian_moment(2.0, 1.0, 1.0).powi(2);
    assert_rel(m2 - m1 * m1, want_var, 0.02, "IG(2,1) variance");

    // step (iii): μ = σφτ/|β| spans many decades
    for mu in [1e-3, 0.2, 30.0] {
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_inverse_gaussian(mu, 1.0, &mut r).unwrap()).collect();
        let (m1, _) = raw_moments(&xs);
        assert_rel(m1, inverse_gaussian_moment(mu, 1.0, 1.0), 0.01, &format!("IG({mu},1) mean"));
        assert!(xs.iter().all(|x| x.is_finite() && *x > 0.0 && (1.0 / x).is_finite()));
    }
}

fn random_problem(p: usize, r: &mut impl Rng) -> (SelectionProblem, DMatrix<f64>) {
    let beta_hat = DVector::from_fn(p, |_, _| {
        let m = 0.2 + 1.8 * r.random::<f64>();
        if r.random::<bool>() { m } else { -m }
    });
    let sigma = random_spd(p, r);
    (SelectionProblem::new(beta_hat, &sigma).unwrap(), sigma)
}

fn kkt_holds(prob: &SelectionProblem, beta: &DVector<f64>, lambda: f64) -> bool {
    let q = prob.sigma_inv();
    let g = (&q * (&prob.beta_hat - beta)) * 2.0;
    (0..prob.p()).all(|j| {
        let bound = lambda * prob.weights[j];
        let tol = 1e-6 * bound.max(1.0);
        if beta[j] != 0.0 {
            (g[j] - bound * beta[j].signum()).abs() <= tol
        } else {
            g[j].abs() <= bound + tol
        }
    })
}

#[test]
fn path_matches_proximal_gradient() {
    let mut r = rng(40);
    for case in 0..100 {
        let p = 2 + case % 9;
        let (prob, sigma) = random_problem(p, &mut r);
        let path = solve_path(&prob, 1000).unwrap();
        assert!(path.complete);
        for s in &path.steps[1..] {
            assert!(kkt_holds(&prob, &path.coefficients_at(s.lambda), s.lambda), "case {case} knot {}", s.lambda);
        }
        let q = sigma.try_inverse().unwrap();
        let w: Vec<f64> = prob.beta_hat.iter().map(|&b| weight_of(b)).collect();
        let top = path.steps[1].lambda;
        for k in 1..=25 {
            let lambda = top * k as f64 / 26.0;
            let ours = path.coefficients_at(lambda);
            let oracle = fista(&q, &prob.beta_hat, &w, lambda, 20_000);
            let f_ours = weighted_objective(&q, &prob.beta_hat, &w, &ours, lambda);
            let f_oracle = weighted_objective(&q, &prob.beta_hat, &w, &oracle, lambda);
            assert!(
                (f_ours - f_oracle).abs() <= 1e-6 * f_oracle.abs().max(1.0),
                "case {case}, lambda {lambda}: path {f_ours} vs oracle {f_oracle}"
            );
        }
    }
}

#[test]
fn identity_path_matches_oracle_at_fifty_lambdas() {
    let beta_hat = DVector::from_vec(vec![1.0, 0.5, 0.1]);
    let prob = SelectionProblem::new(beta_hat.clone(), &DMatrix::identity(3, 3)).unwrap();
    let path = solve_path(&prob, 100).unwrap();
    assert_eq!(path.ordering, vec![0, 1, 2]);
    let w: Vec<f64> = beta_hat.iter().map(|&b| weight_of(b)).collect();
    let q = DMatrix::identity(3, 3);
    let top = path.steps[1].lambda;
    for k in 0..50 {
        let lambda = top * (k as f64 + 0.5) / 50.0;
        let oracle = fista(&q, &beta_hat, &w, lambda, 50_000);
        assert!((path.coefficients_at(lambda) - oracle).amax() < 1e-8);
    }
}

#[test]
fn ordering_invariant_to_common_scaling() {
    let mut r = rng(41);
    for _ in 0..20 {
        let (prob, sigma) = random_problem(6, &mut r);
        let scaled = SelectionProblem::new(prob.beta_hat.clone(), &(sigma * 7.5)).unwrap();
        assert_eq!(solve_path(&prob, 500).unwrap().ordering, solve_path(&scaled, 500).unwrap().ordering);
    }
}

#[test]
fn factor_reconstructs_precision() {
    let mut r = rng(42);
    let sigma = random_spd(5, &mut r);
    let prob = SelectionProblem::new(DVector::from_element(5, 1.0), &sigma).unwrap();
    assert!((prob.sigma_inv() * &sigma - DMatrix::identity(5, 5)).amax() < 1e-8);
}

#[test]
fn normal_sampler_matches_ridge_posterior() {
    let mut r = rng(43);
    let d = gaussian_design(50, 10, &[1.0, -0.5, 0.0, 0.0, 2.0, 0.0, 0.3, 0.0, 0.0, -1.0], 1.0, &mut r);
    let gamma = 3.0;
    let prior = InverseGammaPrior::default();
    let (mean, cov) = ridge_posterior(&d, gamma, prior.shape, prior.scale);
    let runs: Vec<DVector<f64>> = (0..20)
        .map(|s| {
            let cfg = McmcConfig::new(6000, 1000, 1, RngState::new(100 + s)).unwrap();
            let draws = gibbs_normal(&d, GammaSpec::Fixed(gamma), prior, &cfg).unwrap();
            let sm = summarize(&draws).unwrap();
            assert!((sm.beta_cov.clone() - &cov).amax() < 0.1 * cov.diagonal().amax());
            sm.beta_mean
        })
        .collect();
    let k = runs.len() as f64;
    let grand = runs.iter().fold(DVector::zeros(10), |acc, m| acc + m) / k;
    for j in 0..10 {
        let sd = (runs.iter().map(|m| (m[j] - grand[j]).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let se = sd / k.sqrt();
        assert!((grand[j] - mean[j]).abs() <= 3.0 * se, "coefficient {j}: {} vs {} (se {se})", grand[j], mean[j]);
    }
}

#[test]
fn closed_form_matches_bisection_on_unit_spectrum() {
    let t = R2Target::default();
    let cf = closed_form_from_moments(50.0, 50.0, t).unwrap();
    let roots = kl_roots(50.0, 50.0, 1.0, 1.0);
    assert_eq!(roots.len(), 1);
    assert!((cf.gamma - roots[0]).abs() < 1e-6);
}

#[test]
fn closed_form_matches_bisection_on_random_spectra() {
    let mut r = rng(44);
    let mut checked = 0;
    while checked < 50 {
        let p = 5 + r.random_range(0..200);
        let d: Vec<f64> = (0..p).map(|_| r.random::<f64>() * 3.0 + 0.01).collect();
        let (s, s2) = (d.iter().sum::<f64>(), d.iter().map(|v| v * v).sum::<f64>());
        let (a, b) = (0.5 + 3.0 * r.random::<f64>(), 0.5 + 3.0 * r.random::<f64>());
        let t = R2Target::new(a, b).unwrap();
        let roots = kl_roots(s, s2, a, b);
        let Ok(cf) = closed_form_from_moments(s, s2, t) else { continue };
        if roots.len() == 1 && !cf.fallback {
            assert!((cf.gamma - roots[0]).abs() <= 1e-6 * roots[0].max(1.0), "{} vs {}", cf.gamma, roots[0]);
            checked += 1;
        }
    }
}
