use nalgebra::DVector;

use super::linear::BetaKernel;
use super::{DrawMatrix, McmcConfig};
use crate::data::Dataset;
use crate::distributions::sample_inverse_gamma;
use crate::error::{Error, Result};
use crate::prior::InverseGammaPrior;

/// How γ (prior precision relative to error precision) is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    /// `β | σ² ~ N(0, σ²/γ I)`
    Fixed(f64),
    /// `β ~ N(0, σ_b² I)` independent of σ², `σ_b² ~ IG(shape, scale)`.
    Hyper { shape: f64, scale: f64 },
}

/// Gibbs sampler under the normal prior.
///
/// Fixed γ alternates `σ² | β ~ IG(a₁ + (n+p)/2, b₁ + (RSS + γ‖β‖²)/2)` and
/// `β | σ² ~ N((XᵀX+γI)⁻¹Xᵀy, σ²(XᵀX+γI)⁻¹)`. The hyper variant uses
/// `σ² | β ~ IG(a₁ + n/2, b₁ + RSS/2)`, `β | σ², σ_b² ~ N(M⁻¹Xᵀy, σ²M⁻¹)`
/// with `M = XᵀX + (σ²/σ_b²) I`, and `σ_b² | β ~ IG(shape + p/2, scale + ‖β‖²/2)`.
pub fn gibbs_normal(
    d: &Dataset,
    gamma: GammaSpec,
    sigma2_prior: InverseGammaPrior,
    cfg: &McmcConfig,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    sigma2_prior.validate()?;
    match gamma {
        GammaSpec::Fixed(g) if !(g > 0.0) => {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")))
        }
        GammaSpec::Hyper { shape, scale } if !(shape > 0.0 && scale > 0.0) => {
            return Err(Error::InvalidParameter("normal hyperprior needs positive shape/scale".into()))
        }
        _ => {}
    }
    let (n, p) = (d.n() as f64, d.p());
    let kernel = BetaKernel::new(d);
    let mut rng = cfg.seed.rng();
    let mut out = DrawMatrix::with_capacity(cfg.kept(), p, matches!(gamma, GammaSpec::Hyper { .. }));

    let mut prior_var = vec![1.0; p];
    let mut beta = kernel.posterior_mean_or_zero(&prior_var);
    let mut sigma_b2 = 1.0;

    for iter in 0..cfg.n_iter {
        let rss = kernel.rss(&beta);
        let beta_sq = beta.norm_squared();
        let sigma2 = match gamma {
            GammaSpec::Fixed(g) => sample_inverse_gamma(
                sigma2_prior.shape + (n + p as f64) / 2.0,
                sigma2_prior.scale + (rss + g * beta_sq) / 2.0,
                &mut rng,
            )?,
            GammaSpec::Hyper { .. } => sample_inverse_gamma(
                sigma2_prior.shape + n / 2.0,
                sigma2_prior.scale + rss / 2.0,
                &mut rng,
            )?,
        };
        let v = match gamma {
            GammaSpec::Fixed(g) => 1.0 / g,
            GammaSpec::Hyper { .. } => sigma_b2 / sigma2,
        };
        prior_var.iter_mut().for_each(|x| *x = v);
        beta = kernel.draw(&prior_var, sigma2, &mut rng, iter)?;
        if let GammaSpec::Hyper { shape, scale } = gamma {
            sigma_b2 = sample_inverse_gamma(
                shape + p as f64 / 2.0,
                scale + beta.norm_squared() / 2.0,
                &mut rng,
            )?;
        }
        if cfg.keeps(iter) {
            let hyper = matches!(gamma, GammaSpec::Hyper { .. }).then_some(sigma_b2);
            out.record(cfg.slot(iter), &beta, sigma2, hyper);
        }
    }
    Ok(out)
}

impl BetaKernel<'_> {
    /// Ridge-type starting point; zeros if the dense solve is unavailable.
    pub(crate) fn posterior_mean_or_zero(&self, prior_var: &[f64]) -> DVector<f64> {
        if self.uses_fast_route() {
            return DVector::zeros(self.p());
        }
        self.posterior_mean(prior_var)
            .unwrap_or_else(|_| DVector::zeros(self.p()))
    }
}
