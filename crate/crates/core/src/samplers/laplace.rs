//! Bayesian-lasso sampler.
//!
//! The double exponential `β_j ~ DE(σ/λ)` is written as a scale mixture
//!
//! ```text
//! β_j | σ², t_j ~ N(0, σ² t_j),   t_j ~ Exp(λ²/2)
//! ```
//!
//! giving the full conditionals
//!
//! ```text
//! σ²      ~ IG(a₁ + (n+p)/2, b₁ + (RSS + Σ β_j²/t_j)/2)
//! β       ~ N(M⁻¹Xᵀy, σ²M⁻¹),  M = XᵀX + diag(1/t)
//! 1/t_j   ~ InvGaussian(√(λ²σ²/β_j²), λ²)
//! ```
//!
//! With the hyperprior `λ ~ Ga(shape, rate)` the conditional of `u = λ²` is
//! proportional to `u^{(shape+2p)/2 - 1} exp(-u Σt_j/2) exp(-rate √u)`. It is
//! updated by an independence Metropolis step proposing from the gamma part,
//! so the acceptance ratio is `exp(-rate (√u' - √u))`.

use rand::Rng as _;

use super::linear::BetaKernel;
use super::{DrawMatrix, McmcConfig};
use crate::data::Dataset;
use crate::distributions::{sample_gamma, sample_inverse_gamma, sample_inverse_gaussian, BETA_ABS_FLOOR};
use crate::error::{Error, Result};
use crate::prior::InverseGammaPrior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Fixed(f64),
    /// Gamma hyperprior on λ.
    Hyper { shape: f64, rate: f64 },
}

pub fn gibbs_laplace(
    d: &Dataset,
    lambda: LambdaSpec,
    sigma2_prior: InverseGammaPrior,
    cfg: &McmcConfig,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    sigma2_prior.validate()?;
    let mut lambda2 = match lambda {
        LambdaSpec::Fixed(l) if l > 0.0 && l.is_finite() => l * l,
        LambdaSpec::Hyper { shape, rate } if shape > 0.0 && rate > 0.0 => (shape / rate).powi(2),
        other => return Err(Error::InvalidParameter(format!("invalid lambda spec {other:?}"))),
    };
    let (n, p) = (d.n() as f64, d.p());
    let kernel = BetaKernel::new(d);
    let mut rng = cfg.seed.rng();
    let mut out = DrawMatrix::with_capacity(cfg.kept(), p, matches!(lambda, LambdaSpec::Hyper { .. }));

    let mut t = vec![1.0; p];
    let mut beta = kernel.posterior_mean_or_zero(&t);

    for iter in 0..cfg.n_iter {
        let quad: f64 = beta.iter().zip(&t).map(|(b, tj)| b * b / tj).sum();
        let sigma2 = sample_inverse_gamma(
            sigma2_prior.shape + (n + p as f64) / 2.0,
            sigma2_prior.scale + (kernel.rss(&beta) + quad) / 2.0,
            &mut rng,
        )?;
        beta = kernel.draw(&t, sigma2, &mut rng, iter)?;

        let sigma = sigma2.sqrt();
        let lambda_abs = lambda2.sqrt();
        for (tj, b) in t.iter_mut().zip(beta.iter()) {
            let mu = lambda_abs * sigma / b.abs().max(BETA_ABS_FLOOR);
            let inv = sample_inverse_gaussian(mu, lambda2, &mut rng)?;
            *tj = (1.0 / inv).clamp(f64::MIN_POSITIVE, f64::MAX);
        }
        if let LambdaSpec::Hyper { shape, rate } = lambda {
            let sum_t: f64 = t.iter().sum();
            let proposal = sample_gamma(shape / 2.0 + p as f64, sum_t / 2.0, &mut rng)?;
            let log_ratio = -rate * (proposal.sqrt() - lambda2.sqrt());
            if rng.random::<f64>().ln() < log_ratio {
                lambda2 = proposal;
            }
        }
        if cfg.keeps(iter) {
            let hyper = matches!(lambda, LambdaSpec::Hyper { .. }).then(|| lambda2.sqrt());
            out.record(cfg.slot(iter), &beta, sigma2, hyper);
        }
    }
    Ok(out)
}
