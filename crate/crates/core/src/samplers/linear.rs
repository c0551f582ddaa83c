use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::data::Dataset;
use crate::distributions::sample_std_normal;
use crate::error::{Error, Result};

/// Precomputed design quantities for the coefficient conditional.
pub struct BetaKernel<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    xtx: Option<DMatrix<f64>>,
    xty: DVector<f64>,
    fast: bool,
}

impl<'a> BetaKernel<'a> {
    pub fn new(d: &'a Dataset) -> Self {
        let (n, p) = (d.n(), d.p());
        let fast = p >= 4 * n;
        Self {
            x: d.x(),
            y: d.y(),
            xtx: (!fast).then(|| d.gram()),
            xty: d.x().tr_mul(d.y()),
            fast,
        }
    }

    /// Force the Cholesky route regardless of shape.
    pub fn dense(d: &'a Dataset) -> Self {
        Self {
            x: d.x(),
            y: d.y(),
            xtx: Some(d.gram()),
            xty: d.x().tr_mul(d.y()),
            fast: false,
        }
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn uses_fast_route(&self) -> bool {
        self.fast
    }

    /// `‖y - Xβ‖²`
    pub fn rss(&self, beta: &DVector<f64>) -> f64 {
        (self.y - self.x * beta).norm_squared()
    }

    /// Mean `M⁻¹Xᵀy` with `M = XᵀX + diag(1/v)` (dense route only).
    pub fn posterior_mean(&self, prior_var: &[f64]) -> Result<DVector<f64>> {
        let xtx = match &self.xtx {
            Some(m) => m.clone(),
            None => self.x.tr_mul(self.x),
        };
        let chol = factor_precision(xtx, prior_var, 0)?;
        Ok(chol.solve(&self.xty))
    }

    /// Draw `β ~ N(M⁻¹Xᵀy, σ² M⁻¹)`.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        prior_var: &[f64],
        sigma2: f64,
        rng: &mut R,
        iteration: usize,
    ) -> Result<DVector<f64>> {
        if self.fast {
            self.draw_fast(prior_var, sigma2, rng, iteration)
        } else {
            self.draw_dense(prior_var, sigma2, rng, iteration)
        }
    }

    fn draw_dense<R: Rng + ?Sized>(
        &self,
        prior_var: &[f64],
        sigma2: f64,
        rng: &mut R,
        iteration: usize,
    ) -> Result<DVector<f64>> {
        let xtx = self.xtx.as_ref().expect("dense route keeps XᵀX").clone();
        let chol = factor_precision(xtx, prior_var, iteration)?;
        let mut beta = chol.solve(&self.xty);
        let z = DVector::from_fn(self.p(), |_, _| sample_std_normal(rng));
        // Lᵀ w = z gives w ~ N(0, M⁻¹)
        let w = chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::Factorization {
                iteration,
                what: "triangular solve".into(),
            })?;
        beta.axpy(sigma2.sqrt(), &w, 1.0);
        Ok(beta)
    }

    fn draw_fast<R: Rng + ?Sized>(
        &self,
        prior_var: &[f64],
        sigma2: f64,
        rng: &mut R,
        iteration: usize,
    ) -> Result<DVector<f64>> {
        let (n, p) = (self.n(), self.p());
        let sigma = sigma2.sqrt();
        // u ~ N(0, σ² diag(v))
        let u = DVector::from_fn(p, |j, _| sigma * prior_var[j].sqrt() * sample_std_normal(rng));
        let delta = DVector::from_fn(n, |_, _| sample_std_normal(rng));
        let mut xs = self.x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col.scale_mut(prior_var[j].sqrt());
        }
        let mut system = &xs * xs.transpose();
        for i in 0..n {
            system[(i, i)] += 1.0;
        }
        let v = self.x * &u / sigma + delta;
        let rhs = self.y / sigma - v;
        let chol = Cholesky::new(system).ok_or_else(|| Error::Factorization {
            iteration,
            what: "n x n system of the fast sampler".into(),
        })?;
        let w = chol.solve(&rhs);
        let mut beta = self.x.tr_mul(&w);
        for j in 0..p {
            beta[j] = u[j] + sigma * prior_var[j] * beta[j];
        }
        Ok(beta)
    }
}

/// Cholesky of `XᵀX + diag(1/v)`, retrying once with `1e-10·trace/p` jitter.
fn factor_precision(
    mut m: DMatrix<f64>,
    prior_var: &[f64],
    iteration: usize,
) -> Result<Cholesky<f64, Dyn>> {
    let p = m.nrows();
    for j in 0..p {
        m[(j, j)] += 1.0 / prior_var[j];
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let jitter = 1e-10 * m.trace() / p as f64;
    for j in 0..p {
        m[(j, j)] += jitter;
    }
    Cholesky::new(m).ok_or_else(|| Error::Factorization {
        iteration,
        what: "X'X + S^-1 not positive definite after jitter".into(),
    })
}

/// One draw of β for the given prior variances; convenience wrapper.
pub fn draw_coefficients<R: Rng + ?Sized>(
    d: &Dataset,
    prior_var: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    BetaKernel::new(d).draw(prior_var, sigma2, rng, 0)
}
