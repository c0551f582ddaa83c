//! Synthetic data, ordering scores, screening and split-sample prediction.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::distributions::sample_std_normal;
use crate::error::{Error, Result};
use crate::path::ols_fit;
use crate::rng::{Purpose, RngState};

/// First zero block, signal block and the gap between the two signal blocks.
const LEAD: usize = 10;
const BLOCK: usize = 5;
const GAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub seed: RngState,
}

impl SimDesign {
    pub fn new(n: usize, p: usize, rho: f64, seed: RngState) -> Result<Self> {
        let d = Self {
            n,
            p,
            rho,
            sigma2: 1.0,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p < LEAD + 2 * BLOCK + GAP + 1 {
            return Err(Error::InvalidParameter(format!("p must be at least 41, got {}", self.p)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthPattern {
    pub beta0: DVector<f64>,
    /// 0-based indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
}

impl TruthPattern {
    /// Indices 10..15 and 35..40 (0-based) carry the given values.
    pub fn with_blocks(p: usize, b1: [f64; BLOCK], b2: [f64; BLOCK]) -> Self {
        let mut beta0 = DVector::zeros(p);
        let first = LEAD;
        let second = LEAD + BLOCK + GAP;
        for k in 0..BLOCK {
            beta0[first + k] = b1[k];
            beta0[second + k] = b2[k];
        }
        let support = (first..first + BLOCK).chain(second..second + BLOCK).collect();
        Self { beta0, support }
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    pub fn is_true(&self) -> Vec<bool> {
        let mut t = vec![false; self.p()];
        for &j in &self.support {
            t[j] = true;
        }
        t
    }
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Rows of X from the stationary AR(1) recursion
/// `x_1 = z_1`, `x_j = ρ x_{j−1} + √(1−ρ²) z_j`, so `corr(x_j, x_k) = ρ^|j−k|`;
/// `y = Xβ⁰ + ε`. The returned dataset is on the raw scale.
pub fn simulate(design: &SimDesign) -> Result<(Dataset, TruthPattern)> {
    design.validate()?;
    let SimDesign { n, p, rho, sigma2, seed } = *design;
    let mut rng = seed.rng();
    let mut b1 = [0.0; BLOCK];
    let mut b2 = [0.0; BLOCK];
    b1.iter_mut().for_each(|b| *b = uniform_open(&mut rng));
    b2.iter_mut().for_each(|b| *b = uniform_open(&mut rng));
    let truth = TruthPattern::with_blocks(p, b1, b2);

    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = sample_std_normal(&mut rng);
        x[(i, 0)] = prev;
        for j in 1..p {
            prev = rho * prev + innov * sample_std_normal(&mut rng);
            x[(i, j)] = prev;
        }
    }
    let sd = sigma2.sqrt();
    let mut y = &x * &truth.beta0;
    for v in y.iter_mut() {
        *v += sd * sample_std_normal(&mut rng);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok((Dataset::with_names(x, y, names)?, truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurves {
    /// `(FPR, TPR)` for models of size 0, 1, ….
    pub roc_points: Vec<(f64, f64)>,
    /// `(0, 1)` anchor followed by `(recall, precision)` for sizes 1, 2, ….
    pub prc_points: Vec<(f64, f64)>,
    pub roc_area: f64,
    pub prc_area: f64,
    /// The ordering did not rank every variable; areas cover only the
    /// achieved range.
    pub partial: bool,
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Curves for nested models along a full ordering of `0..p`.
pub fn score_ordering(ordering: &[usize], truth: &TruthPattern) -> Result<EvalCurves> {
    let p = truth.p();
    if ordering.len() != p {
        return Err(Error::NotAPermutation { p });
    }
    score_prefix(ordering, truth)
}

/// Curves for an ordering that ranks only its first `prefix.len()` variables.
pub fn score_prefix(prefix: &[usize], truth: &TruthPattern) -> Result<EvalCurves> {
    let p = truth.p();
    let mut seen = vec![false; p];
    for &j in prefix {
        if j >= p || seen[j] {
            return Err(Error::NotAPermutation { p });
        }
        seen[j] = true;
    }
    let is_true = truth.is_true();
    let n_true = truth.support.len() as f64;
    let n_false = p as f64 - n_true;
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut roc = vec![(0.0, 0.0)];
    let mut prc = vec![(0.0, 1.0)];
    for &j in prefix {
        if is_true[j] {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let tpr = if n_true > 0.0 { tp / n_true } else { 0.0 };
        let fpr = if n_false > 0.0 { fp / n_false } else { 0.0 };
        roc.push((fpr, tpr));
        prc.push((tpr, tp / (tp + fp)));
    }
    Ok(EvalCurves {
        roc_area: trapezoid(&roc),
        prc_area: trapezoid(&prc),
        roc_points: roc,
        prc_points: prc,
        partial: prefix.len() < p,
    })
}

/// Indices of the `keep` columns most correlated with y in absolute value,
/// strongest first. Constant columns count as uncorrelated.
pub fn screen_by_correlation(d: &Dataset, keep: usize) -> Result<Vec<usize>> {
    let p = d.p();
    if keep > p {
        return Err(Error::InvalidParameter(format!("cannot keep {keep} of {p} columns")));
    }
    let y = d.y();
    let yc = y.add_scalar(-y.mean());
    let yn = yc.norm();
    let score: Vec<f64> = (0..p)
        .map(|j| {
            let c = d.x().column(j);
            let cc = c.add_scalar(-c.mean());
            let den = cc.norm() * yn;
            if den > 0.0 {
                (cc.dot(&yc) / den).abs()
            } else {
                0.0
            }
        })
        .collect();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(keep);
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub mean_mspe: f64,
    pub se_mspe: f64,
    pub mean_size: f64,
    pub se_size: f64,
    pub n_ok: usize,
    /// `(split index, message)` for splits whose pipeline failed.
    pub failures: Vec<(usize, String)>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

/// Ordinary least squares with intercept on `cols` of the training rows,
/// evaluated on the test rows.
pub fn refit_and_predict(train: &Dataset, test: &Dataset, cols: &[usize]) -> Result<DVector<f64>> {
    let design = |d: &Dataset| {
        let mut m = DMatrix::from_element(d.n(), cols.len() + 1, 1.0);
        for (k, &j) in cols.iter().enumerate() {
            m.set_column(k + 1, &d.x().column(j));
        }
        m
    };
    let coef = ols_fit(&design(train), train.y()).ok_or_else(|| {
        Error::InvalidParameter(format!("refit on {} selected columns is rank deficient", cols.len()))
    })?;
    Ok(design(test) * coef)
}

/// Random train/test splits: the pipeline selects columns on the training
/// rows, then OLS with intercept on those columns predicts the test rows.
pub fn split_and_mspe<F>(
    d: &Dataset,
    train_n: usize,
    pipeline: F,
    n_splits: usize,
    rng: RngState,
) -> Result<SplitReport>
where
    F: Fn(&Dataset, RngState) -> Result<Vec<usize>> + Sync,
{
    let n = d.n();
    if train_n >= n || train_n < 2 || n_splits < 2 {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= train_n < n and n_splits >= 2 (train_n = {train_n}, n = {n}, n_splits = {n_splits})"
        )));
    }
    use rayon::prelude::*;
    let outcomes: Vec<Result<(f64, usize)>> = (0..n_splits)
        .into_par_iter()
        .map(|s| {
            let sub = rng.derive(s as u64, Purpose::Split, 0);
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut sub.rng());
            let (tr, te) = rows.split_at(train_n);
            let train = d.select_rows(tr)?;
            let test = d.select_rows(te)?;
            let cols = pipeline(&train, rng.derive(s as u64, Purpose::Split, 1))?;
            let pred = refit_and_predict(&train, &test, &cols)?;
            let mspe = (test.y() - pred).norm_squared() / test.n() as f64;
            Ok((mspe, cols.len()))
        })
        .collect();
    let mut mspe = Vec::new();
    let mut size = Vec::new();
    let mut failures = Vec::new();
    for (s, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((m, k)) => {
                mspe.push(m);
                size.push(k as f64);
            }
            Err(e) => failures.push((s, e.to_string())),
        }
    }
    if mspe.is_empty() {
        return Err(Error::InvalidParameter(format!("all {n_splits} splits failed")));
    }
    let (mean_mspe, se_mspe) = mean_se(&mspe);
    let (mean_size, se_size) = mean_se(&size);
    Ok(SplitReport {
        mean_mspe,
        se_mspe,
        mean_size,
        se_size,
        n_ok: mspe.len(),
        failures,
    })
}
