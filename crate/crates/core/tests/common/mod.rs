//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use credsel::data::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `ln ∫ exp(g(t)) dt` by the trapezoid rule on a window around the peak.
/// `g` must be smooth and unimodal on `[-400, 400]`.
pub fn log_integral(g: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = (-400.0, 400.0);
    let coarse = 0.01;
    let mut peak = (lo, f64::NEG_INFINITY);
    let mut t = lo;
    while t <= hi {
        let v = g(t);
        if v > peak.1 {
            peak = (t, v);
        }
        t += coarse;
    }
    // grow the window until the integrand is negligible
    let cut = peak.1 - 60.0;
    let mut left = peak.0;
    while left > lo && g(left) > cut {
        left -= coarse;
    }
    let mut right = peak.0;
    while right < hi && g(right) > cut {
        right += coarse;
    }
    let steps = 200_000;
    let h = (right - left) / steps as f64;
    let mut sum = 0.0;
    for i in 0..=steps {
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        sum += w * (g(left + h * i as f64) - peak.1).exp();
    }
    peak.1 + (sum * h).ln()
}

/// `E[Y^k]` for `Y ~ giG(χ, ρ, λ₀)`, density ∝ `y^(λ₀-1) exp{-(ρy + χ/y)/2}`.
pub fn gig_moment(chi: f64, rho: f64, lambda0: f64, k: f64) -> f64 {
    // substitute y = e^t, dy = y dt
    let g = |k: f64| move |t: f64| (lambda0 + k) * t - 0.5 * (rho * t.exp() + chi * (-t).exp());
    (log_integral(g(k)) - log_integral(g(0.0))).exp()
}

/// `E[Y^k]` for the inverse Gaussian with mean `mu` and shape `lambda0`.
pub fn inverse_gaussian_moment(mu: f64, lambda0: f64, k: f64) -> f64 {
    let g = |k: f64| {
        move |t: f64| {
            let y = t.exp();
            0.5 * (lambda0 / (2.0 * std::f64::consts::PI)).ln() - 1.5 * t - lambda0 * (y - mu).powi(2) / (2.0 * mu * mu * y)
                + t
                + k * t
        }
    };
    (log_integral(g(k)) - log_integral(g(0.0))).exp()
}

/// Sample mean and second raw moment.
pub fn raw_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m1 = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    (m1, m2)
}

/// `(β − β̂)ᵀQ(β − β̂) + λ Σ w_j |β_j|`
pub fn weighted_objective(q: &DMatrix<f64>, beta_hat: &DVector<f64>, w: &[f64], beta: &DVector<f64>, lambda: f64) -> f64 {
    let r = beta - beta_hat;
    let pen: f64 = beta.iter().zip(w).map(|(b, w)| w * b.abs()).sum();
    (r.transpose() * q * &r)[(0, 0)] + lambda * pen
}

/// Accelerated proximal gradient (FISTA with adaptive restart) for the
/// weighted objective above.
pub fn fista(q: &DMatrix<f64>, beta_hat: &DVector<f64>, w: &[f64], lambda: f64, iters: usize) -> DVector<f64> {
    let p = beta_hat.len();
    let lip = 2.0 * q.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lip;
    let prox = |v: DVector<f64>| {
        DVector::from_iterator(
            p,
            v.iter().zip(w).map(|(x, wj)| {
                let t = step * lambda * wj;
                x.signum() * (x.abs() - t).max(0.0)
            }),
        )
    };
    let obj = |b: &DVector<f64>| weighted_objective(q, beta_hat, w, b, lambda);
    let mut x = DVector::zeros(p);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut f_prev = obj(&x);
    for _ in 0..iters {
        let grad = q * (&y - beta_hat) * 2.0;
        let x_new = prox(&y - grad * step);
        let f_new = obj(&x_new);
        if f_new > f_prev {
            // restart momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;
        f_prev = f_new;
    }
    x
}

/// Random symmetric positive definite matrix with eigenvalues in roughly
/// `[0.3, 3]`.
pub fn random_spd(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let m = &a * a.transpose() / p as f64;
    m + DMatrix::identity(p, p) * 0.3
}

/// Marginal posterior mean and covariance of β under `β | σ² ~ N(0, σ²/γ I)`
/// and `σ² ~ IG(a₁, b₁)`: a multivariate t with
/// `E β = M⁻¹Xᵀy` and `Cov β = b*/(a* − 1) · M⁻¹`, `M = XᵀX + γI`.
pub fn ridge_posterior(d: &Dataset, gamma: f64, a1: f64, b1: f64) -> (DVector<f64>, DMatrix<f64>) {
    let p = d.p();
    let m = d.x().transpose() * d.x() + DMatrix::identity(p, p) * gamma;
    let m_inv = m.try_inverse().expect("ridge system is invertible");
    let xty = d.x().transpose() * d.y();
    let mean = &m_inv * &xty;
    let shape = a1 + d.n() as f64 / 2.0;
    let scale = b1 + (d.y().norm_squared() - xty.dot(&mean)) / 2.0;
    (mean, m_inv * (scale / (shape - 1.0)))
}

/// Root of `-b/γ + (a+b)/(S+γ) + 2(a+b)S₂/(S+γ)³` by a log-spaced sign scan
/// followed by plain bisection. Returns every root found.
pub fn kl_roots(s: f64, s2: f64, a: f64, b: f64) -> Vec<f64> {
    let f = |g: f64| -b / g + (a + b) / (s + g) + 2.0 * (a + b) * s2 / (s + g).powi(3);
    let mut roots = Vec::new();
    let n = 20_000;
    let (lo, hi) = ((s * 1e-6).ln(), (s * 1e6).ln());
    let mut prev = lo.exp();
    for i in 1..=n {
        let g = (lo + (hi - lo) * i as f64 / n as f64).exp();
        if f(prev).signum() != f(g).signum() {
            let (mut l, mut r) = (prev, g);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if f(l).signum() == f(mid).signum() {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        prev = g;
    }
    roots
}

/// Design with orthonormal columns scaled so that `XᵀX = n I`, plus a
/// response `y = Xβ + ε`.
pub fn orthogonal_design(n: usize, p: usize, beta: &[f64], noise: f64, rng: &mut impl Rng) -> Dataset {
    let raw = DMatrix::from_fn(n, p, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng));
    let q = raw.qr().q();
    let x = q.columns(0, p).into_owned() * (n as f64).sqrt();
    let b = DVector::from_column_slice(beta);
    let e = DVector::from_fn(n, |_, _| noise * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng));
    let y = &x * b + e;
    Dataset::new(x, y).unwrap()
}

/// Standard Gaussian `n × p` design with response `Xβ + ε`.
pub fn gaussian_design(n: usize, p: usize, beta: &[f64], noise: f64, rng: &mut impl Rng) -> Dataset {
    let x = DMatrix::from_fn(n, p, |_, _| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng));
    let b = DVector::from_column_slice(beta);
    let e = DVector::from_fn(n, |_, _| noise * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng));
    let y = &x * b + e;
    Dataset::new(x, y).unwrap()
}
