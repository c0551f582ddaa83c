//! Gibbs samplers for the normal, Laplace and Dirichlet-Laplace priors.
//!
//! All samplers share one conditional for the coefficients: given per-column
//! prior variances `v` (in units of σ²),
//!
//! ```text
//! β | · ~ N(M⁻¹Xᵀy, σ² M⁻¹),   M = XᵀX + diag(1/v)
//! ```
//!
//! drawn either through a Cholesky factor of `M` or, when `p ≥ 4n`, through
//! the `O(n²p)` data-augmentation sampler of Bhattacharya, Chakraborty and
//! Mallick (2016), which only factorizes an `n × n` system.

mod dl;
mod laplace;
mod linear;
mod normal;
mod summary;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

pub use dl::{gibbs_dl, gibbs_dl_hypergrid, DlChain, DlState, DlSweepOrder};
pub use laplace::{gibbs_laplace, LambdaSpec};
pub use linear::{draw_coefficients, BetaKernel};
pub use normal::{gibbs_normal, GammaSpec};
pub use summary::{geweke_z, summarize, PosteriorSummary};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::prior::{PriorFamily, PriorSpec};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: RngState,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 15_000,
            n_burn: 5_000,
            thin: 1,
            seed: RngState::new(0),
        }
    }
}

impl McmcConfig {
    pub fn new(n_iter: usize, n_burn: usize, thin: usize, seed: RngState) -> Result<Self> {
        let cfg = Self {
            n_iter,
            n_burn,
            thin,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kept(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter || self.thin == 0 {
            return Err(Error::InvalidParameter(format!(
                "need n_burn < n_iter and thin >= 1 (n_iter={}, n_burn={}, thin={})",
                self.n_iter, self.n_burn, self.thin
            )));
        }
        if self.kept() < 100 {
            return Err(Error::InvalidParameter(format!(
                "only {} draws would be kept; need at least 100",
                self.kept()
            )));
        }
        Ok(())
    }

    /// Whether sweep `iter` (0-based) is retained.
    pub(crate) fn keeps(&self, iter: usize) -> bool {
        iter >= self.n_burn && (iter - self.n_burn) % self.thin == self.thin - 1 && self.slot(iter) < self.kept()
    }

    pub(crate) fn slot(&self, iter: usize) -> usize {
        (iter - self.n_burn) / self.thin
    }
}

/// Retained posterior draws: one row of β per kept sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    pub beta: DMatrix<f64>,
    pub sigma2: Vec<f64>,
    /// Hyperparameter trace when one is sampled (γ-scale σ_b², λ, or `a`).
    pub hyper: Option<Vec<f64>>,
    /// DL hyper-grid only: posterior mass over the grid, averaged over kept sweeps.
    pub grid_mass: Option<Vec<f64>>,
}

impl DrawMatrix {
    pub(crate) fn with_capacity(kept: usize, p: usize, has_hyper: bool) -> Self {
        Self {
            beta: DMatrix::zeros(kept, p),
            sigma2: Vec::with_capacity(kept),
            hyper: has_hyper.then(|| Vec::with_capacity(kept)),
            grid_mass: None,
        }
    }

    pub(crate) fn record(&mut self, slot: usize, beta: &DVector<f64>, sigma2: f64, hyper: Option<f64>) {
        self.beta.set_row(slot, &beta.transpose());
        self.sigma2.push(sigma2);
        if let (Some(h), Some(v)) = (self.hyper.as_mut(), hyper) {
            h.push(v);
        }
    }

    pub fn n_draws(&self) -> usize {
        self.beta.nrows()
    }

    pub fn p(&self) -> usize {
        self.beta.ncols()
    }

    /// Header `beta_1..beta_p,sigma2`, one row per kept sweep.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for j in 1..=self.p() {
            write!(out, "beta_{j},").unwrap();
        }
        out.push_str("sigma2\n");
        for i in 0..self.n_draws() {
            for j in 0..self.p() {
                write!(out, "{},", self.beta[(i, j)]).unwrap();
            }
            writeln!(out, "{}", self.sigma2[i]).unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Dispatch on the prior family.
pub fn run_sampler(d: &Dataset, spec: &PriorSpec, cfg: &McmcConfig) -> Result<DrawMatrix> {
    run_sampler_ordered(d, spec, cfg, DlSweepOrder::default())
}

/// As [`run_sampler`], with an explicit DL sweep order.
pub fn run_sampler_ordered(d: &Dataset, spec: &PriorSpec, cfg: &McmcConfig, order: DlSweepOrder) -> Result<DrawMatrix> {
    spec.validate()?;
    let s2 = spec.sigma2_prior;
    match spec.family {
        PriorFamily::NormalFixed { gamma } => gibbs_normal(d, GammaSpec::Fixed(gamma), s2, cfg),
        PriorFamily::NormalHyper { shape, scale } => gibbs_normal(d, GammaSpec::Hyper { shape, scale }, s2, cfg),
        PriorFamily::LaplaceFixed { lambda } => gibbs_laplace(d, LambdaSpec::Fixed(lambda), s2, cfg),
        PriorFamily::LaplaceHyper { shape, rate } => gibbs_laplace(d, LambdaSpec::Hyper { shape, rate }, s2, cfg),
        PriorFamily::DlFixed { a } => gibbs_dl(d, a, s2, cfg, order),
        PriorFamily::DlHyperGrid(grid) => gibbs_dl_hypergrid(d, &grid, s2, cfg, order),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(McmcConfig::new(1000, 500, 1, RngState::new(0)).is_ok());
        assert!(McmcConfig::new(1000, 1000, 1, RngState::new(0)).is_err());
        assert!(McmcConfig::new(1000, 0, 0, RngState::new(0)).is_err());
        assert!(McmcConfig::new(1000, 950, 1, RngState::new(0)).is_err());
        let d = McmcConfig::default();
        assert_eq!((d.n_iter, d.n_burn, d.thin, d.kept()), (15_000, 5_000, 1, 10_000));
    }

    #[test]
    fn thinning_slots() {
        let cfg = McmcConfig::new(1005, 300, 7, RngState::new(0)).unwrap();
        let kept: Vec<usize> = (0..cfg.n_iter).filter(|&i| cfg.keeps(i)).collect();
        assert_eq!(kept.len(), cfg.kept());
        assert_eq!(kept[0], 306);
        assert!(kept.iter().enumerate().all(|(k, &i)| cfg.slot(i) == k));
    }
}
