use rayon::prelude::*;

use super::{GridAxis, JointDensityGrid};
use crate::error::{HedgeError, Result};
use crate::numerics::{integrate, norm_cdf, norm_pdf};

/// Jointly normal (X, Y) with mean `mu` and covariance `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateNormalSpec {
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
}

impl BivariateNormalSpec {
    pub fn new(mu: [f64; 2], sigma: [[f64; 2]; 2]) -> Result<Self> {
        let finite = mu.iter().chain(sigma.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(HedgeError::InvalidSpec("mean and covariance must be finite".into()));
        }
        let [[sxx, sxy], [syx, syy]] = sigma;
        if (sxy - syx).abs() > 1e-12 * sxy.abs().max(syx.abs()).max(1.0) {
            return Err(HedgeError::InvalidSpec("covariance is not symmetric".into()));
        }
        if !(sxx > 0.0 && syy > 0.0) {
            return Err(HedgeError::InvalidSpec("marginal variances must be positive".into()));
        }
        let det = sxx * syy - sxy * sxy;
        if det < -1e-12 * sxx * syy {
            return Err(HedgeError::InvalidSpec(format!("covariance is not positive semidefinite (det = {det})")));
        }
        Ok(Self { mu, sigma })
    }

    /// Covariance built from standard deviations and a correlation.
    pub fn from_correlation(mu: [f64; 2], sd_x: f64, sd_y: f64, rho: f64) -> Result<Self> {
        if !(rho.abs() <= 1.0) {
            return Err(HedgeError::InvalidSpec(format!("correlation {rho} outside [-1, 1]")));
        }
        let cov = rho * sd_x * sd_y;
        Self::new(mu, [[sd_x * sd_x, cov], [cov, sd_y * sd_y]])
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn sigma(&self) -> [[f64; 2]; 2] {
        self.sigma
    }

    pub fn rho(&self) -> f64 {
        (self.sigma[0][1] / (self.sigma[0][0] * self.sigma[1][1]).sqrt()).clamp(-1.0, 1.0)
    }

    /// Spec of (Y, X).
    pub fn transposed(&self) -> Self {
        let [[a, b], [c, d]] = self.sigma;
        Self { mu: [self.mu[1], self.mu[0]], sigma: [[d, c], [b, a]] }
    }
}

/// `P(x0 ≤ X < x1, y0 ≤ Y < y1)`.
///
/// Integrates the x-density against the conditional normal probability of the
/// y-interval, so every value is nonnegative and no CDF differences cancel.
pub fn rectangle_probability(spec: &BivariateNormalSpec, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if !(x1 > x0 && y1 > y0) {
        return 0.0;
    }
    let [mx, my] = spec.mu;
    let sx = spec.sigma[0][0].sqrt();
    let sy = spec.sigma[1][1].sqrt();
    let rho = spec.rho();
    let slope = rho * sy / sx;
    let cond_sd = sy * (1.0 - rho * rho).max(0.0).sqrt();

    if cond_sd <= 1e-14 * sy {
        // Y is an affine function of X: integrate φ over {x : y0 ≤ m(x) < y1}.
        if slope == 0.0 {
            return 0.0;
        }
        let a = mx + (y0 - my) / slope;
        let b = mx + (y1 - my) / slope;
        let (lo, hi) = (a.min(b).max(x0), a.max(b).min(x1));
        if hi <= lo {
            return 0.0;
        }
        return (norm_cdf((hi - mx) / sx) - norm_cdf((lo - mx) / sx)).max(0.0);
    }

    let width = x1 - x0;
    let panels = 1.0 + (2.0 * width / sx).ceil() + (slope.abs() * width / cond_sd).ceil();
    let panels = panels.min(2_000.0) as usize;
    let integrand = |x: f64| {
        let m = my + slope * (x - mx);
        let inner = norm_cdf((y1 - m) / cond_sd) - norm_cdf((y0 - m) / cond_sd);
        norm_pdf((x - mx) / sx) / sx * inner
    };
    integrate(integrand, x0, x1, panels).max(0.0)
}

/// Rectangle-probability discretization of a bivariate normal on the square
/// `[-half_width, half_width]²` with cells of width `step`.
///
/// Grid points are cell centres. The probability outside the square is
/// reported through [`JointDensityGrid::truncated_mass`] and the cells are
/// renormalized to unit mass.
pub fn discretize_bivariate_normal(spec: &BivariateNormalSpec, half_width: f64, step: f64) -> Result<JointDensityGrid> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(HedgeError::InvalidSpec(format!("half_width must be positive, got {half_width}")));
    }
    if !(step > 0.0 && step < 2.0 * half_width) {
        return Err(HedgeError::InvalidSpec(format!("step must lie in (0, 2·half_width), got {step}")));
    }
    let cells = ((2.0 * half_width) / step + 1e-9).floor() as usize;
    let start = -0.5 * cells as f64 * step;
    let edges: Vec<f64> = (0..=cells).map(|k| start + step * k as f64).collect();
    let centres: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let axis = GridAxis::new(centres)?;

    let weights: Vec<f64> = (0..cells * cells)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / cells, k % cells);
            rectangle_probability(spec, edges[i], edges[i + 1], edges[j], edges[j + 1])
        })
        .collect();
    JointDensityGrid::from_weights(axis.clone(), axis, weights)
}
