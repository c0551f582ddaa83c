//! Prior specifications for the regression coefficients and the error
//! variance.

use crate::error::{ensure, Result};

/// Inverse-gamma prior `IG(shape, scale)` on σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InverseGammaPrior {
    fn default() -> Self {
        Self {
            shape: 0.001,
            scale: 0.001,
        }
    }
}

impl InverseGammaPrior {
    pub fn validate(&self) -> Result<()> {
        ensure(self.shape > 0.0 && self.scale > 0.0, || {
            format!("inverse-gamma prior needs positive shape and scale, got ({}, {})", self.shape, self.scale)
        })
    }
}

/// Discrete uniform prior on the DL concentration over `n_points` equally
/// spaced values in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlHyperGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl DlHyperGrid {
    /// `[1/max(n, p), 1/2]` with 1000 support points.
    pub fn default_for(n: usize, p: usize) -> Self {
        Self {
            lo: 1.0 / n.max(p) as f64,
            hi: 0.5,
            n_points: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lo > 0.0 && self.lo <= self.hi && self.hi <= 0.5, || {
            format!("DL grid needs 0 < lo <= hi <= 1/2, got [{}, {}]", self.lo, self.hi)
        })?;
        ensure(self.n_points >= 1, || "DL grid needs at least one point".into())?;
        ensure(self.n_points == 1 || self.lo < self.hi, || {
            "DL grid with several points needs lo < hi".into()
        })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.lo + step * i as f64).collect()
    }
}

/// Prior family on β together with how its hyperparameter is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorFamily {
    /// `β | σ² ~ N(0, σ²/γ I)`
    NormalFixed { gamma: f64 },
    /// `β ~ N(0, σ_b² I)` with `σ_b² ~ IG(shape, scale)`, not scaled by σ².
    NormalHyper { shape: f64, scale: f64 },
    /// `β_j ~ DE(σ/λ)`
    LaplaceFixed { lambda: f64 },
    /// `β_j ~ DE(σ/λ)` with `λ ~ Ga(shape, rate)`.
    LaplaceHyper { shape: f64, rate: f64 },
    /// Dirichlet-Laplace with concentration `a`.
    DlFixed { a: f64 },
    /// Dirichlet-Laplace with a discrete uniform prior on `a`.
    DlHyperGrid(DlHyperGrid),
}

impl PriorFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorFamily::NormalFixed { gamma } => {
                ensure(gamma > 0.0 && gamma.is_finite(), || format!("gamma must be positive, got {gamma}"))
            }
            PriorFamily::NormalHyper { shape, scale } => ensure(shape > 0.0 && scale > 0.0, || {
                format!("normal hyperprior needs positive shape/scale, got ({shape}, {scale})")
            }),
            PriorFamily::LaplaceFixed { lambda } => {
                ensure(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))
            }
            PriorFamily::LaplaceHyper { shape, rate } => ensure(shape > 0.0 && rate > 0.0, || {
                format!("Laplace hyperprior needs positive shape/rate, got ({shape}, {rate})")
            }),
            PriorFamily::DlFixed { a } => {
                ensure(a > 0.0 && a <= 0.5, || format!("DL concentration must lie in (0, 1/2], got {a}"))
            }
            PriorFamily::DlHyperGrid(g) => g.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub sigma2_prior: InverseGammaPrior,
}

impl PriorSpec {
    pub fn new(family: PriorFamily) -> Result<Self> {
        let spec = Self {
            family,
            sigma2_prior: InverseGammaPrior::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.sigma2_prior.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dl_bounds() {
        assert!(PriorFamily::DlFixed { a: 0.5 }.validate().is_ok());
        assert!(PriorFamily::DlFixed { a: 0.6 }.validate().is_err());
        assert!(PriorFamily::DlFixed { a: 0.0 }.validate().is_err());
    }

    #[test]
    fn grid_points_are_even() {
        let g = DlHyperGrid { lo: 0.1, hi: 0.5, n_points: 5 };
        let pts = g.points();
        assert_eq!(pts.len(), 5);
        assert!((pts[4] - 0.5).abs() < 1e-15);
        assert!((pts[1] - 0.2).abs() < 1e-15);
        assert!(DlHyperGrid { lo: 0.3, hi: 0.3, n_points: 1 }.validate().is_ok());
        assert!(DlHyperGrid { lo: 0.3, hi: 0.7, n_points: 4 }.validate().is_err());
    }

    #[test]
    fn default_sigma_prior() {
        let s = PriorSpec::new(PriorFamily::NormalFixed { gamma: 2.0 }).unwrap();
        assert_eq!(s.sigma2_prior, InverseGammaPrior { shape: 0.001, scale: 0.001 });
        assert!(PriorSpec::new(PriorFamily::NormalFixed { gamma: -1.0 }).is_err());
    }
}
