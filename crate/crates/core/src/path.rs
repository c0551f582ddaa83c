//! Solution paths of the penalized credible-region problem
//!
//! ```text
//! min_β (β − β̂)ᵀ Σ⁻¹ (β − β̂) + λ Σ_j w_j |β_j|,   w_j = min(|β̂_j|⁻², 1e12)
//! ```
//!
//! and of the ordinary lasso. Both are instances of the weighted problem
//! `½ βᵀQβ − c₀ᵀβ + μ Σ w_j|β_j|`, whose solution is piecewise linear in `μ`.
//! The homotopy below follows it from `μ = ∞` down to `μ = 0`, adding a
//! variable when its correlation `c = c₀ − Qβ` reaches `±μ w_j` and dropping
//! one when its coefficient crosses zero.
//!
//! Variable indices are 0-based in the API and 1-based in CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::samplers::PosteriorSummary;

pub const MAX_WEIGHT: f64 = 1e12;

/// Relative pivot below which a new active column counts as collinear.
const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    pub beta_hat: DVector<f64>,
    /// Lower-triangular `L` with `LᵀL = Σ⁻¹`.
    pub sigma_inv_chol: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl SelectionProblem {
    pub fn new(beta_hat: DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let p = beta_hat.len();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{} but the mean has length {p}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if beta_hat.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("posterior mean is not finite".into()));
        }
        let chol = match nalgebra::Cholesky::new(sigma.clone()) {
            Some(c) => c,
            None => {
                let mut m = sigma.clone();
                let jitter = 1e-10 * m.trace() / p as f64;
                for j in 0..p {
                    m[(j, j)] += jitter;
                }
                nalgebra::Cholesky::new(m).ok_or(Error::CovarianceNotFactorizable)?
            }
        };
        let l = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .ok_or(Error::CovarianceNotFactorizable)?;
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::CovarianceNotFactorizable);
        }
        let weights = beta_hat.iter().map(|b| weight_of(*b)).collect();
        Ok(Self {
            beta_hat,
            sigma_inv_chol: l,
            weights,
        })
    }

    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    /// `Σ⁻¹ = LᵀL`
    pub fn sigma_inv(&self) -> DMatrix<f64> {
        self.sigma_inv_chol.tr_mul(&self.sigma_inv_chol)
    }

    /// `(β − β̂)ᵀΣ⁻¹(β − β̂) + λ Σ w_j|β_j|`
    pub fn objective(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let r = &self.sigma_inv_chol * (beta - &self.beta_hat);
        let pen: f64 = beta.iter().zip(&self.weights).map(|(b, w)| w * b.abs()).sum();
        r.norm_squared() + lambda * pen
    }
}

pub fn weight_of(beta_hat: f64) -> f64 {
    let w = beta_hat.abs().powi(-2);
    if w.is_finite() {
        w.min(MAX_WEIGHT)
    } else {
        MAX_WEIGHT
    }
}

pub fn build_problem(s: &PosteriorSummary) -> Result<SelectionProblem> {
    SelectionProblem::new(s.beta_mean.clone(), &s.beta_cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEvent {
    Enter(usize),
    Drop(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    /// `None` for the λ = ∞ start and the λ = 0 end.
    pub event: Option<PathEvent>,
    pub lambda: f64,
    /// Active set after the event, in order of entry.
    pub active: Vec<usize>,
    /// Nonzero coefficients at this knot.
    pub coefficients: Vec<(usize, f64)>,
}

impl PathStep {
    pub fn entering(&self) -> Option<usize> {
        match self.event {
            Some(PathEvent::Enter(j)) => Some(j),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPath {
    pub p: usize,
    pub steps: Vec<PathStep>,
    /// Variables in order of first entry; shorter than `p` for a truncated path.
    pub ordering: Vec<usize>,
    /// Whether the path reached λ = 0.
    pub complete: bool,
}

impl SelectionPath {
    pub fn is_full_ordering(&self) -> bool {
        self.ordering.len() == self.p
    }

    /// Ordering extended with the variables that never entered, by
    /// decreasing `scores` (ties by index).
    pub fn ordering_with_fallback(&self, scores: &[f64]) -> Vec<usize> {
        let mut seen = vec![false; self.p];
        let mut out = self.ordering.clone();
        for &j in &out {
            seen[j] = true;
        }
        let mut rest: Vec<usize> = (0..self.p).filter(|&j| !seen[j]).collect();
        rest.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()).then(a.cmp(&b)));
        out.extend(rest);
        out
    }

    /// Dense coefficient vector at penalty `lambda`, interpolating between knots.
    pub fn coefficients_at(&self, lambda: f64) -> DVector<f64> {
        let dense = |s: &PathStep| {
            let mut v = DVector::zeros(self.p);
            for &(j, b) in &s.coefficients {
                v[j] = b;
            }
            v
        };
        if self.steps.len() < 2 || lambda >= self.steps[1].lambda {
            return DVector::zeros(self.p);
        }
        for w in self.steps.windows(2).skip(1) {
            let (hi, lo) = (&w[0], &w[1]);
            if lambda >= lo.lambda {
                let t = (hi.lambda - lambda) / (hi.lambda - lo.lambda);
                return dense(hi) * (1.0 - t) + dense(lo) * t;
            }
        }
        dense(self.steps.last().unwrap())
    }

    /// Columns `step, lambda, entering_index, active_size, coefficients`;
    /// the last field holds quoted `index:value` pairs.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("step,lambda,entering_index,active_size,coefficients\n");
        for (k, s) in self.steps.iter().enumerate() {
            let enter = s.entering().map(|j| (j + 1).to_string()).unwrap_or_default();
            let coefs: Vec<String> = s.coefficients.iter().map(|(j, b)| format!("{}:{}", j + 1, b)).collect();
            writeln!(out, "{k},{},{enter},{},\"{}\"", s.lambda, s.active.len(), coefs.join(" ")).unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Incrementally maintained Cholesky factor of `Q_AA`.
struct ActiveFactor {
    rows: Vec<Vec<f64>>,
}

impl ActiveFactor {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Append a column with off-diagonal block `q_a` and diagonal `q_jj`;
    /// `false` if it is (numerically) dependent on the current ones.
    fn push(&mut self, q_a: &[f64], q_jj: f64) -> bool {
        let l = self.forward(q_a);
        let d2 = q_jj - l.iter().map(|x| x * x).sum::<f64>();
        if !(d2 > PIVOT_TOL * q_jj.abs()) || !(q_jj > 0.0) {
            return false;
        }
        let mut row = l;
        row.push(d2.sqrt());
        self.rows.push(row);
        true
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(b.len() + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&x).map(|(a, b)| a * b).sum();
            x.push((b[i] - s) / row[i]);
        }
        x
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        let k = x.len();
        for i in (0..k).rev() {
            let mut s = x[i];
            for r in i + 1..k {
                s -= self.rows[r][i] * x[r];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }
}

/// Homotopy for `½βᵀQβ − c₀ᵀβ + μ Σ w_j|β_j|`; reported λ is `lambda_scale · μ`.
fn weighted_homotopy(
    q: &DMatrix<f64>,
    c0: &DVector<f64>,
    w: &[f64],
    lambda_scale: f64,
    max_steps: usize,
    max_active: usize,
) -> Result<SelectionPath> {
    let p = c0.len();
    let mut steps = vec![PathStep {
        event: None,
        lambda: f64::INFINITY,
        active: Vec::new(),
        coefficients: Vec::new(),
    }];
    let mut ordering = Vec::new();
    let mut entered = vec![false; p];
    let mut is_active = vec![false; p];
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut beta = DVector::<f64>::zeros(p);
    let mut factor = ActiveFactor::new();

    let mut mu = 0.0;
    let mut first = None;
    for j in 0..p {
        let r = c0[j].abs() / w[j];
        if r > mu {
            mu = r;
            first = Some(j);
        }
    }
    let Some(first) = first else {
        // c₀ = 0: the solution is zero for every λ.
        steps.push(PathStep {
            event: None,
            lambda: 0.0,
            active: Vec::new(),
            coefficients: Vec::new(),
        });
        return Ok(SelectionPath { p, steps, ordering, complete: true });
    };

    let mut pending = Some(PathEvent::Enter(first));
    let mut complete = false;
    let mut blocked: Option<usize> = None;

    while steps.len() < max_steps {
        match pending.take() {
            Some(PathEvent::Enter(j)) => {
                let q_a: Vec<f64> = active.iter().map(|&i| q[(i, j)]).collect();
                if !factor.push(&q_a, q[(j, j)]) {
                    break;
                }
                let c_j = c0[j] - q.row(j).dot(&beta.transpose());
                active.push(j);
                signs.push(if c_j >= 0.0 { 1.0 } else { -1.0 });
                is_active[j] = true;
                if !entered[j] {
                    entered[j] = true;
                    ordering.push(j);
                }
                steps.push(knot(Some(PathEvent::Enter(j)), lambda_scale * mu, &active, &beta));
                blocked = Some(j);
            }
            Some(PathEvent::Drop(j)) => {
                let pos = active.iter().position(|&i| i == j).unwrap();
                active.remove(pos);
                signs.remove(pos);
                is_active[j] = false;
                beta[j] = 0.0;
                factor = ActiveFactor::new();
                for (k, &i) in active.iter().enumerate() {
                    let q_a: Vec<f64> = active[..k].iter().map(|&r| q[(r, i)]).collect();
                    if !factor.push(&q_a, q[(i, i)]) {
                        return Err(Error::Factorization {
                            iteration: steps.len(),
                            what: "active Gram block after a drop".into(),
                        });
                    }
                }
                steps.push(knot(Some(PathEvent::Drop(j)), lambda_scale * mu, &active, &beta));
                blocked = Some(j);
            }
            None => {}
        }
        if active.len() >= max_active && max_active < p {
            break;
        }

        // β_A(μ − Δ) = β_A(μ) + Δ d_A with d_A = Q_AA⁻¹ (w_A s_A)
        let ws: Vec<f64> = active.iter().zip(&signs).map(|(&j, s)| w[j] * s).collect();
        let d = factor.solve(&ws);
        let mut qd = DVector::<f64>::zeros(p);
        for (&j, dj) in active.iter().zip(&d) {
            qd.axpy(*dj, &q.column(j), 1.0);
        }
        let mut c = c0.clone();
        for &j in &active {
            c.axpy(-beta[j], &q.column(j), 1.0);
        }

        let mut best = mu;
        let mut next = None;
        let eps = 1e-13 * mu.max(f64::MIN_POSITIVE);
        for (k, &j) in active.iter().enumerate() {
            if Some(j) == blocked || d[k] == 0.0 {
                continue;
            }
            let delta = -beta[j] / d[k];
            if delta > eps && delta < best {
                best = delta;
                next = Some(PathEvent::Drop(j));
            }
        }
        for j in 0..p {
            if is_active[j] || Some(j) == blocked {
                continue;
            }
            let a = qd[j];
            let mut cand = f64::INFINITY;
            for (num, den) in [(mu * w[j] - c[j], w[j] - a), (mu * w[j] + c[j], w[j] + a)] {
                if den > 0.0 {
                    let delta = num / den;
                    if delta > eps && delta < cand {
                        cand = delta;
                    }
                }
            }
            if cand < best {
                best = cand;
                next = Some(PathEvent::Enter(j));
            }
        }

        for (&j, dj) in active.iter().zip(&d) {
            beta[j] += best * dj;
        }
        mu -= best;
        blocked = None;
        match next {
            Some(ev) => {
                if let PathEvent::Drop(j) = ev {
                    beta[j] = 0.0;
                }
                pending = Some(ev);
            }
            None => {
                steps.push(knot(None, 0.0, &active, &beta));
                complete = true;
                break;
            }
        }
    }
    Ok(SelectionPath { p, steps, ordering, complete })
}

fn knot(event: Option<PathEvent>, lambda: f64, active: &[usize], beta: &DVector<f64>) -> PathStep {
    PathStep {
        event,
        lambda,
        active: active.to_vec(),
        coefficients: active.iter().map(|&j| (j, beta[j])).collect(),
    }
}

pub fn default_max_steps(n: usize, p: usize) -> usize {
    8 * n.min(p)
}

/// Full credible-region path; λ is on the scale of the objective above.
pub fn solve_path(prob: &SelectionProblem, max_steps: usize) -> Result<SelectionPath> {
    let q = prob.sigma_inv();
    let c0 = &q * &prob.beta_hat;
    weighted_homotopy(&q, &c0, &prob.weights, 2.0, max_steps, prob.p())
}

/// Lasso path of `½‖y − Xβ‖² + λ‖β‖₁`, stopped at `min(n, p)` active variables.
pub fn lasso_baseline(d: &Dataset, max_steps: usize) -> Result<SelectionPath> {
    let q = d.gram();
    let c0 = d.x().tr_mul(d.y());
    let w = vec![1.0; d.p()];
    weighted_homotopy(&q, &c0, &w, 1.0, max_steps, d.n().min(d.p()))
}

/// Model on the path with the smallest `n ln(RSS/n) + k ln n` among those
/// with fewer than `max_size` predictors; ties go to the smaller model.
pub fn select_bic(path: &SelectionPath, d: &Dataset, max_size: usize) -> Result<Vec<usize>> {
    let n = d.n();
    if max_size >= n {
        return Err(Error::InvalidParameter(format!("max_size {max_size} must be below n = {n}")));
    }
    let nf = n as f64;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for step in &path.steps {
        let k = step.active.len();
        if k >= max_size {
            continue;
        }
        let mut set = step.active.clone();
        set.sort_unstable();
        if seen.contains(&set) {
            continue;
        }
        seen.push(set.clone());
        let Some(rss) = ols_rss(d, &set) else { continue };
        let bic = nf * (rss / nf).ln() + k as f64 * nf.ln();
        let better = match &best {
            None => true,
            Some((b, s)) => bic < *b || (bic == *b && k < s.len()),
        };
        if better {
            best = Some((bic, set));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::NoEligibleModel { max_size })
}

/// Residual sum of squares of the least-squares fit on `cols` (QR).
pub fn ols_rss(d: &Dataset, cols: &[usize]) -> Option<f64> {
    if cols.is_empty() {
        return Some(d.y().norm_squared());
    }
    let xa = d.x().select_columns(cols);
    let coef = ols_fit(&xa, d.y())?;
    Some((d.y() - xa * coef).norm_squared())
}

pub(crate) fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * scale) {
        return None;
    }
    let qty = qr.q().tr_mul(y);
    r.solve_upper_triangular(&qty)
}
