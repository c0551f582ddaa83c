use nalgebra::{DMatrix, DVector};

use super::DrawMatrix;
use crate::error::{Error, Result};

/// Posterior mean and covariance of β estimated from retained draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub sigma2_mean: f64,
    pub n_draws: usize,
}

/// Column means and the sample covariance (denominator `k - 1`).
pub fn summarize(draws: &DrawMatrix) -> Result<PosteriorSummary> {
    let k = draws.n_draws();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 draws to summarize, got {k}")));
    }
    let b = &draws.beta;
    let mean = DVector::from_iterator(b.ncols(), b.column_iter().map(|c| c.sum() / k as f64));
    let mut centred = b.clone();
    for (mut col, m) in centred.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-m);
    }
    let cov = centred.tr_mul(&centred) / (k - 1) as f64;
    let sigma2_mean = draws.sigma2.iter().sum::<f64>() / draws.sigma2.len().max(1) as f64;
    Ok(PosteriorSummary {
        beta_mean: mean,
        beta_cov: cov,
        sigma2_mean,
        n_draws: k,
    })
}

/// Batch-means standard error of the mean of `x` with ~√n batches.
fn batch_se(x: &[f64]) -> f64 {
    let n = x.len();
    let n_batches = ((n as f64).sqrt() as usize).clamp(2, n);
    let size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

/// Geweke z-score comparing the first 10% with the last 50% of a trace,
/// using batch-means standard errors for each segment.
pub fn geweke_z(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < 40 {
        return Err(Error::InvalidParameter(format!("Geweke diagnostic needs at least 40 draws, got {n}")));
    }
    let first = &trace[..n / 10];
    let last = &trace[n - n / 2..];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let se2 = batch_se(first).powi(2) + batch_se(last).powi(2);
    let diff = mean(first) - mean(last);
    if se2 == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / se2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_std_normal;
    use crate::rng::RngState;

    fn matrix(beta: DMatrix<f64>) -> DrawMatrix {
        let k = beta.nrows();
        DrawMatrix {
            beta,
            sigma2: vec![1.0; k],
            hyper: None,
            grid_mass: None,
        }
    }

    #[test]
    fn identical_rows() {
        let d = matrix(DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 3.5, 1.0, -2.0, 3.5]));
        let s = summarize(&d).unwrap();
        assert_eq!(s.beta_mean.as_slice(), &[1.0, -2.0, 3.5]);
        assert_eq!(s.beta_cov, DMatrix::zeros(3, 3));
    }

    #[test]
    fn perfectly_anticorrelated() {
        let mut rng = RngState::new(3).rng();
        let col: Vec<f64> = (0..500).map(|_| sample_std_normal(&mut rng)).collect();
        let b = DMatrix::from_fn(500, 2, |i, j| if j == 0 { col[i] } else { -col[i] });
        let s = summarize(&matrix(b)).unwrap();
        let r = s.beta_cov[(0, 1)] / (s.beta_cov[(0, 0)] * s.beta_cov[(1, 1)]).sqrt();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn iid_normal_covariance() {
        let mut rng = RngState::new(11).rng();
        let b = DMatrix::from_fn(100_000, 3, |_, _| sample_std_normal(&mut rng));
        let s = summarize(&matrix(b)).unwrap();
        assert!((s.beta_cov.clone() - DMatrix::identity(3, 3)).amax() < 0.02);
    }

    #[test]
    fn geweke_on_iid_noise_is_small() {
        let mut rng = RngState::new(5).rng();
        let t: Vec<f64> = (0..10_000).map(|_| sample_std_normal(&mut rng)).collect();
        assert!(geweke_z(&t).unwrap().abs() < 4.0);
        let drift: Vec<f64> = (0..10_000).map(|i| i as f64 / 1000.0).collect();
        assert!(geweke_z(&drift).unwrap().abs() > 10.0);
    }
}
