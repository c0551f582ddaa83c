//! Choosing prior hyperparameters from a target distribution on R².
//!
//! With σ² = 1 a coefficient draw `η` from the prior induces
//!
//! ```text
//! R² = q / (1 + q),   q = ηᵀXᵀXη / n
//! ```
//!
//! The grid tuner simulates these draws for each candidate value and keeps
//! the one whose sample is closest to `Beta(a, b)` in Kolmogorov-Smirnov
//! distance. For the normal prior the Kullback-Leibler optimum has a closed
//! form in terms of `S = Σd_j` and `S₂ = Σd_j²`, the first two power sums of
//! the eigenvalues of `XᵀX/n`.
//!
//! Each grid point is simulated on its own substream, so candidates can be
//! evaluated in parallel and in any order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::data::{Dataset, EigenSpectrum};
use crate::distributions::{sample_exponential, sample_ln_gamma, sample_std_normal};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R2Target {
    pub a: f64,
    pub b: f64,
}

impl Default for R2Target {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl R2Target {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let t = Self { a, b };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "Beta target needs positive shapes, got ({}, {})",
                self.a, self.b
            )))
        }
    }

    fn distribution(&self) -> Result<Beta> {
        Beta::new(self.a, self.b).map_err(|e| Error::InvalidParameter(format!("Beta target: {e}")))
    }
}

/// Prior family whose single hyperparameter is being tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneFamily {
    /// γ in `η ~ N(0, 1/γ)`
    Normal,
    /// λ in `η ~ DE(1/λ)`
    Laplace,
    /// concentration `a`
    Dl,
}

impl TuneFamily {
    /// Rejects hyperparameters outside the family's range (`a` must lie in `(0, 1/2]`).
    pub fn check(&self, hyper: f64) -> Result<()> {
        let ok = match self {
            TuneFamily::Normal | TuneFamily::Laplace => hyper > 0.0 && hyper.is_finite(),
            TuneFamily::Dl => hyper > 0.0 && hyper <= 0.5,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{hyper} is not a valid {self:?} hyperparameter")))
        }
    }
}

pub const DEFAULT_N_DRAWS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub hyperparameter: f64,
    pub ks_statistic: f64,
    /// Every evaluated `(value, KS statistic)` in grid order.
    pub grid: Vec<(f64, f64)>,
}

impl TuneResult {
    /// Columns `hypervalue, ks_statistic, rank` (rank 1 = best).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ranks = ranks(&self.grid);
        let mut out = String::from("hypervalue,ks_statistic,rank\n");
        for ((v, ks), r) in self.grid.iter().zip(ranks) {
            writeln!(out, "{v},{ks},{r}").unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn ranks(grid: &[(f64, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..grid.len()).collect();
    idx.sort_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1).then(a.cmp(&b)));
    let mut r = vec![0; grid.len()];
    for (k, i) in idx.into_iter().enumerate() {
        r[i] = k + 1;
    }
    r
}

/// `n` points evenly spaced in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// 50-point log grid for the family on an `n × p` design.
pub fn default_grid(family: TuneFamily, n: usize, p: usize) -> Vec<f64> {
    match family {
        TuneFamily::Normal => log_grid(1e-2 * p as f64, 1e2 * p as f64, 50),
        TuneFamily::Laplace => log_grid(1e-2, 1e3, 50),
        TuneFamily::Dl => log_grid(1.0 / n.max(p) as f64, 0.5, 50),
    }
}

/// `q / (1 + q)`, kept strictly below 1 when `q` overwhelms the mantissa.
pub fn r2_from_quadratic(q: f64) -> f64 {
    (q / (1.0 + q)).min(1.0 - f64::EPSILON / 2.0)
}

/// `‖Xη_k‖²/n` for each column `η_k` of `eta`.
fn quadratic_forms(x: &DMatrix<f64>, eta: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    let xe = x * eta;
    xe.column_iter().map(|c| c.norm_squared() / n).collect()
}

/// Unit-scale draws: standard normal for the normal family, standard
/// Laplace for the Laplace family. Scaling by the hyperparameter happens on
/// the quadratic form, which is homogeneous of degree two in η.
fn unit_quadratic_forms(d: &Dataset, family: TuneFamily, n_draws: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let p = d.p();
    let mut eta = DMatrix::zeros(p, n_draws);
    for k in 0..n_draws {
        for j in 0..p {
            eta[(j, k)] = match family {
                TuneFamily::Normal => sample_std_normal(rng),
                TuneFamily::Laplace => laplace_unit(rng)?,
                TuneFamily::Dl => unreachable!(),
            };
        }
    }
    Ok(quadratic_forms(d.x(), &eta))
}

fn laplace_unit(rng: &mut impl Rng) -> Result<f64> {
    let e = sample_exponential(1.0, rng)?;
    Ok(if rng.random::<bool>() { e } else { -e })
}

/// `η_j ~ DE(T_j)` with `T_j = φ_jτ ~ Ga(a, 1/2)` independent, which is the
/// Dirichlet-Laplace hierarchy at σ = 1.
fn dl_quadratic_forms(d: &Dataset, a: f64, n_draws: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let p = d.p();
    let mut eta = DMatrix::zeros(p, n_draws);
    for k in 0..n_draws {
        for j in 0..p {
            let t = sample_ln_gamma(a, 0.5, rng)?.exp();
            eta[(j, k)] = t * laplace_unit(rng)?;
        }
    }
    Ok(quadratic_forms(d.x(), &eta))
}

fn scale_exponent(family: TuneFamily) -> i32 {
    match family {
        TuneFamily::Normal => 1,
        TuneFamily::Laplace => 2,
        TuneFamily::Dl => 0,
    }
}

fn r2_from_unit(unit: &[f64], family: TuneFamily, hyper: f64) -> Vec<f64> {
    let div = hyper.powi(scale_exponent(family));
    unit.iter().map(|q| r2_from_quadratic(q / div)).collect()
}

/// Prior-induced R² values at σ² = 1.
pub fn induced_r2_draws(
    d: &Dataset,
    family: TuneFamily,
    hyper: f64,
    n_draws: usize,
    rng: RngState,
) -> Result<Vec<f64>> {
    family.check(hyper)?;
    if n_draws < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 draws, got {n_draws}")));
    }
    let mut g = rng.rng();
    match family {
        TuneFamily::Dl => Ok(dl_quadratic_forms(d, hyper, n_draws, &mut g)?
            .into_iter()
            .map(r2_from_quadratic)
            .collect()),
        _ => Ok(r2_from_unit(&unit_quadratic_forms(d, family, n_draws, &mut g)?, family, hyper)),
    }
}

/// One-sample KS distance between the sample and `Beta(a, b)`.
pub fn ks_statistic(sample: &[f64], target: R2Target) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::InvalidParameter("KS statistic needs at least two values".into()));
    }
    let beta = target.distribution()?;
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = beta.cdf(x.clamp(0.0, 1.0));
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    Ok(d)
}

/// Grid value whose induced R² sample is closest to the target (ties go to
/// the earlier grid point). Grid point `i` draws from substream `i` of `rng`.
pub fn tune_by_grid(
    d: &Dataset,
    family: TuneFamily,
    grid: &[f64],
    target: R2Target,
    n_draws: usize,
    rng: RngState,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("tuning grid is empty".into()));
    }
    target.validate()?;
    let evaluated = grid
        .par_iter()
        .enumerate()
        .map(|(i, &h)| {
            let r2 = induced_r2_draws(d, family, h, n_draws, rng.derive(i as u64, Purpose::Tune, 0))?;
            Ok((h, ks_statistic(&r2, target)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (best, ks) = evaluated
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, (h, ks)| if ks < acc.1 { (h, ks) } else { acc });
    Ok(TuneResult {
        hyperparameter: best,
        ks_statistic: ks,
        grid: evaluated,
    })
}

/// Closed-form γ together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormGamma {
    pub gamma: f64,
    /// `B = A² − C³`; the cubic has one real root when `B ≥ 0`.
    pub discriminant: f64,
    /// Root found numerically because `B < 0`.
    pub fallback: bool,
}

/// Coefficients `(P, Q, R)` of `γ³ + Pγ² + Qγ + R = 0`.
pub fn cubic_coefficients(s: f64, s2: f64, target: R2Target) -> (f64, f64, f64) {
    let R2Target { a, b } = target;
    let p = (2.0 * a - b) * s / a;
    let q = 2.0 * (a + b) * s2 / a + (a - 2.0 * b) * s * s / a;
    let r = -b * s.powi(3) / a;
    (p, q, r)
}

/// Derivative of the approximate KL divergence with respect to γ.
pub fn kl_derivative(gamma: f64, s: f64, s2: f64, target: R2Target) -> f64 {
    let R2Target { a, b } = target;
    -b / gamma + (a + b) / (s + gamma) + 2.0 * (a + b) * s2 / (s + gamma).powi(3)
}

/// Approximate KL divergence up to an additive constant.
fn kl_value(gamma: f64, s: f64, s2: f64, target: R2Target) -> f64 {
    let R2Target { a, b } = target;
    -b * gamma.ln() + (a + b) * (s + gamma).ln() - (a + b) * s2 / (s + gamma).powi(2)
}

pub fn closed_form_gamma(spectrum: &EigenSpectrum, target: R2Target) -> Result<ClosedFormGamma> {
    closed_form_from_moments(spectrum.sum(), spectrum.sum_sq(), target)
}

/// Closed form from `S = Σd_j` and `S₂ = Σd_j²`.
pub fn closed_form_from_moments(s: f64, s2: f64, target: R2Target) -> Result<ClosedFormGamma> {
    target.validate()?;
    if !(s > 0.0 && s2 > 0.0 && s.is_finite() && s2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "spectrum must have positive finite power sums, got S = {s}, S2 = {s2}"
        )));
    }
    let (p, q, r) = cubic_coefficients(s, s2, target);
    let c = p * p / 9.0 - q / 3.0;
    let a = p * q / 6.0 - p.powi(3) / 27.0 - r / 2.0;
    let disc = a * a - c.powi(3);
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let gamma = (a + sq).cbrt() + (a - sq).cbrt() - p / 3.0;
        if gamma > 0.0 && gamma.is_finite() {
            return Ok(ClosedFormGamma {
                gamma,
                discriminant: disc,
                fallback: false,
            });
        }
    }
    let gamma = kl_minimizer(s, s2, target).ok_or(Error::NegativeDiscriminant { b: disc })?;
    Ok(ClosedFormGamma {
        gamma,
        discriminant: disc,
        fallback: true,
    })
}

/// Global minimizer of the approximate KL over γ > 0, from the sign changes
/// of its derivative on a fine log grid refined by bisection.
fn kl_minimizer(s: f64, s2: f64, target: R2Target) -> Option<f64> {
    let f = |g: f64| kl_derivative(g, s, s2, target);
    let grid = log_grid(s * 1e-8, s * 1e8, 4001);
    let mut best: Option<(f64, f64)> = None;
    for w in grid.windows(2) {
        if f(w[0]) < 0.0 && f(w[1]) >= 0.0 {
            let root = bisect(f, w[0], w[1]);
            let kl = kl_value(root, s, s2, target);
            if best.is_none_or(|(_, b)| kl < b) {
                best = Some((root, kl));
            }
        }
    }
    best.map(|(r, _)| r)
}

/// Root of `f` on `[lo, hi]` with `f(lo) < 0 ≤ f(hi)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(tr(XᵀX/n), ‖XᵀX/n‖_F²)`, computed through the smaller Gram matrix.
pub fn gram_moments(d: &Dataset) -> (f64, f64) {
    let n = d.n() as f64;
    let x = d.x();
    let g = if d.p() <= d.n() { x.tr_mul(x) } else { x * x.transpose() };
    let g = g / n;
    (g.trace(), g.norm_squared())
}

/// Closed-form γ on the observed design.
pub fn derived_gamma(d: &Dataset, target: R2Target) -> Result<f64> {
    let (s, s2) = gram_moments(d);
    Ok(closed_form_from_moments(s, s2, target)?.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_hand_cases() {
        let u = R2Target::default();
        assert!((ks_statistic(&[0.5; 10], u).unwrap() - 0.5).abs() < 1e-15);
        assert!((ks_statistic(&[0.25, 0.75], u).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singleton_grid() {
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let d = Dataset::new(x, nalgebra::DVector::zeros(10)).unwrap();
        let r = tune_by_grid(&d, TuneFamily::Normal, &[3.0], R2Target::default(), 200, RngState::new(1)).unwrap();
        assert_eq!(r.hyperparameter, 3.0);
        assert_eq!(r.grid.len(), 1);
    }

    #[test]
    fn ranks_break_ties_by_order() {
        assert_eq!(ranks(&[(1.0, 0.3), (2.0, 0.1), (3.0, 0.1)]), vec![3, 1, 2]);
    }

    #[test]
    fn cardano_root_solves_cubic() {
        let t = R2Target::default();
        let (s, s2) = (50.0, 50.0);
        let g = closed_form_from_moments(s, s2, t).unwrap();
        assert!(!g.fallback);
        let (p, q, r) = cubic_coefficients(s, s2, t);
        let res = g.gamma.powi(3) + p * g.gamma.powi(2) + q * g.gamma + r;
        assert!(res.abs() / r.abs().max(1.0) < 1e-10);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.5, 5000.0, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[49] - 5000.0).abs() < 1e-9);
    }
}
