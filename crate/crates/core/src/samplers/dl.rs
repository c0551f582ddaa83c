//! Dirichlet-Laplace sampler.
//!
//! Hierarchy: `β_j | σ², ψ, φ, τ ~ N(0, σ² ψ_j φ_j² τ²)`, `ψ_j ~ Exp(1/2)`,
//! `φ ~ Dir(a, …, a)`, `τ ~ Ga(pa, 1/2)`. Conditionals used by the sweep:
//!
//! ```text
//! σ²      ~ IG(a₁ + (n+p)/2, b₁ + (βᵀS⁻¹β + RSS)/2),   S = diag(ψ φ² τ²)
//! β       ~ N(M⁻¹Xᵀy, σ²M⁻¹),                          M = XᵀX + S⁻¹
//! 1/ψ_j   ~ InvGaussian(σ φ_j τ / |β_j|, 1)
//! τ       ~ giG(2 Σ|β_j|/(φ_j σ), 1, pa − p)
//! φ_j     = T_j / ΣT,   T_j ~ giG(2|β_j|/σ, 1, a − 1)
//! ```
//!
//! `τ | φ, β` and `φ | β` integrate ψ (and τ) out, so the latent scales form
//! one block `π(φ|β) π(τ|φ,β) π(ψ|φ,τ,β)` that is drawn in that order by
//! default.

use nalgebra::DVector;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::linear::BetaKernel;
use super::{DrawMatrix, McmcConfig};
use crate::data::Dataset;
use crate::distributions::{
    normalize_log_weights, sample_dirichlet_via_gig, sample_gig, sample_inverse_gamma, sample_inverse_gaussian,
    GigParams, BETA_ABS_FLOOR,
};
use crate::error::{Error, Result};
use crate::prior::{DlHyperGrid, InverseGammaPrior};
use crate::rng::Rng as ChainRng;

/// Product `φ_j τ` is floored here before it enters the prior variance.
const SCALE_FLOOR: f64 = 1e-12;

/// Order of the latent-scale updates within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DlSweepOrder {
    /// σ², β, then the block φ → τ → ψ.
    #[default]
    Blocked,
    /// σ², β, ψ, τ, φ.
    AsListed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlState {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub tau: f64,
    pub a: f64,
}

impl DlState {
    /// `ψ_j (φ_j τ)²`, the prior variance of β_j in units of σ².
    pub fn prior_variances(&self) -> Vec<f64> {
        self.psi
            .iter()
            .zip(&self.phi)
            .map(|(psi, phi)| {
                let s = (phi * self.tau).max(SCALE_FLOOR);
                psi * s * s
            })
            .collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let sum: f64 = self.phi.iter().sum();
        let positive = self.sigma2 > 0.0
            && self.tau > 0.0
            && self.psi.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.phi.iter().all(|&v| v > 0.0);
        if (sum - 1.0).abs() > 1e-12 || !positive || !self.sigma2.is_finite() || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "DL state violates invariants (sum phi = {sum}, sigma2 = {}, tau = {})",
                self.sigma2, self.tau
            )));
        }
        Ok(())
    }
}

/// A DL chain that can be stepped one sweep at a time.
pub struct DlChain<'a> {
    kernel: BetaKernel<'a>,
    sigma2_prior: InverseGammaPrior,
    order: DlSweepOrder,
    state: DlState,
    grid: Option<GridUpdate>,
    rng: ChainRng,
    iteration: usize,
}

struct GridUpdate {
    points: Vec<f64>,
    ln_gamma: Vec<f64>,
    mass: Vec<f64>,
}

impl<'a> DlChain<'a> {
    pub fn new(
        d: &'a Dataset,
        a: f64,
        sigma2_prior: InverseGammaPrior,
        cfg: &McmcConfig,
        order: DlSweepOrder,
    ) -> Result<Self> {
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::InvalidParameter(format!("DL concentration must lie in (0, 1/2], got {a}")));
        }
        sigma2_prior.validate()?;
        let p = d.p();
        let kernel = BetaKernel::new(d);
        let psi = vec![1.0; p];
        let phi = vec![1.0 / p as f64; p];
        let tau = p as f64;
        let mut state = DlState {
            beta: DVector::zeros(p),
            sigma2: 1.0,
            psi,
            phi,
            tau,
            a,
        };
        state.beta = kernel.posterior_mean_or_zero(&state.prior_variances());
        state.sigma2 = (kernel.rss(&state.beta) / d.n() as f64).max(1e-8);
        Ok(Self {
            kernel,
            sigma2_prior,
            order,
            state,
            grid: None,
            rng: cfg.seed.rng(),
            iteration: 0,
        })
    }

    pub fn with_grid(
        d: &'a Dataset,
        grid: &DlHyperGrid,
        sigma2_prior: InverseGammaPrior,
        cfg: &McmcConfig,
        order: DlSweepOrder,
    ) -> Result<Self> {
        grid.validate()?;
        let points = grid.points();
        let start = points[points.len() / 2];
        let mut chain = Self::new(d, start, sigma2_prior, cfg, order)?;
        let p = d.p() as f64;
        chain.grid = Some(GridUpdate {
            ln_gamma: points.iter().map(|&a| p * ln_gamma(a)).collect(),
            mass: vec![0.0; points.len()],
            points,
        });
        Ok(chain)
    }

    pub fn state(&self) -> &DlState {
        &self.state
    }

    /// Posterior mass over the grid from the latest sweep.
    pub fn grid_mass(&self) -> Option<&[f64]> {
        self.grid.as_ref().map(|g| g.mass.as_slice())
    }

    pub fn sweep(&mut self) -> Result<()> {
        let iter = self.iteration;
        self.draw_sigma2()?;
        let v = self.state.prior_variances();
        self.state.beta = self.kernel.draw(&v, self.state.sigma2, &mut self.rng, iter)?;
        match self.order {
            DlSweepOrder::Blocked => {
                self.draw_phi()?;
                self.draw_tau()?;
                self.draw_psi()?;
            }
            DlSweepOrder::AsListed => {
                self.draw_psi()?;
                self.draw_tau()?;
                self.draw_phi()?;
            }
        }
        self.draw_a()?;
        self.iteration += 1;
        Ok(())
    }

    fn draw_sigma2(&mut self) -> Result<()> {
        let s = &mut self.state;
        let v = s.prior_variances();
        let quad: f64 = s.beta.iter().zip(&v).map(|(b, vj)| b * b / vj).sum();
        let n = self.kernel.n() as f64;
        let p = self.kernel.p() as f64;
        s.sigma2 = sample_inverse_gamma(
            self.sigma2_prior.shape + (n + p) / 2.0,
            self.sigma2_prior.scale + (quad + self.kernel.rss(&s.beta)) / 2.0,
            &mut self.rng,
        )?;
        Ok(())
    }

    fn draw_psi(&mut self) -> Result<()> {
        let s = &mut self.state;
        let sigma = s.sigma2.sqrt();
        for j in 0..s.psi.len() {
            let scale = (s.phi[j] * s.tau).max(SCALE_FLOOR);
            let mu = sigma * scale / s.beta[j].abs().max(BETA_ABS_FLOOR);
            let inv = sample_inverse_gaussian(mu, 1.0, &mut self.rng)?;
            s.psi[j] = (1.0 / inv).clamp(f64::MIN_POSITIVE, f64::MAX);
        }
        Ok(())
    }

    fn draw_tau(&mut self) -> Result<()> {
        let s = &mut self.state;
        let p = s.phi.len() as f64;
        let sigma = s.sigma2.sqrt();
        let chi: f64 = s
            .beta
            .iter()
            .zip(&s.phi)
            .map(|(b, phi)| 2.0 * b.abs().max(BETA_ABS_FLOOR) / (phi * sigma))
            .sum();
        let chi = chi.min(f64::MAX);
        s.tau = sample_gig(&GigParams::new(chi, 1.0, p * s.a - p)?, &mut self.rng)?;
        Ok(())
    }

    fn draw_phi(&mut self) -> Result<()> {
        let s = &mut self.state;
        let abs: Vec<f64> = s.beta.iter().map(|b| b.abs()).collect();
        s.phi = sample_dirichlet_via_gig(&abs, s.sigma2.sqrt(), s.a, &mut self.rng)?;
        Ok(())
    }

    /// `ℓ(a) = a (Σ ln φ_j + p ln(τ/2)) − p lnΓ(a)` over the grid.
    fn draw_a(&mut self) -> Result<()> {
        let Some(grid) = self.grid.as_mut() else {
            return Ok(());
        };
        let s = &mut self.state;
        if grid.points.len() == 1 {
            grid.mass[0] = 1.0;
            return Ok(());
        }
        let p = s.phi.len() as f64;
        let slope: f64 = s.phi.iter().map(|f| f.ln()).sum::<f64>() + p * (s.tau / 2.0).ln();
        for (m, (&a, &lg)) in grid.mass.iter_mut().zip(grid.points.iter().zip(&grid.ln_gamma)) {
            *m = a * slope - lg;
        }
        normalize_log_weights(&mut grid.mass)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut pick = grid.points.len() - 1;
        for (i, m) in grid.mass.iter().enumerate() {
            acc += m;
            if u < acc {
                pick = i;
                break;
            }
        }
        s.a = grid.points[pick];
        Ok(())
    }
}

fn run_chain(mut chain: DlChain<'_>, cfg: &McmcConfig, p: usize) -> Result<DrawMatrix> {
    let hyper = chain.grid.is_some();
    let mut out = DrawMatrix::with_capacity(cfg.kept(), p, hyper);
    let mut mass_acc = chain.grid.as_ref().map(|g| vec![0.0; g.points.len()]);
    for iter in 0..cfg.n_iter {
        chain.sweep()?;
        if cfg.keeps(iter) {
            let s = chain.state();
            out.record(cfg.slot(iter), &s.beta, s.sigma2, hyper.then_some(s.a));
            if let (Some(acc), Some(m)) = (mass_acc.as_mut(), chain.grid_mass()) {
                acc.iter_mut().zip(m).for_each(|(x, y)| *x += y);
            }
        }
    }
    if let Some(mut acc) = mass_acc {
        let k = cfg.kept() as f64;
        acc.iter_mut().for_each(|x| *x /= k);
        out.grid_mass = Some(acc);
    }
    Ok(out)
}

pub fn gibbs_dl(
    d: &Dataset,
    a: f64,
    sigma2_prior: InverseGammaPrior,
    cfg: &McmcConfig,
    order: DlSweepOrder,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    run_chain(DlChain::new(d, a, sigma2_prior, cfg, order)?, cfg, d.p())
}

/// DL sampler with `a` drawn each sweep from its discrete full conditional.
/// `hyper` holds the `a` trace and `grid_mass` the averaged grid posterior.
pub fn gibbs_dl_hypergrid(
    d: &Dataset,
    grid: &DlHyperGrid,
    sigma2_prior: InverseGammaPrior,
    cfg: &McmcConfig,
    order: DlSweepOrder,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    run_chain(DlChain::with_grid(d, grid, sigma2_prior, cfg, order)?, cfg, d.p())
}
