//! Terminal laws of a leveraged ETF model in which the realized variance
//! `Y = Tσ²` is exponentially distributed and `X | Y = y ~ N(drift − y/2, y)`.

use rayon::prelude::*;

use super::{GridAxis, JointDensityGrid, MarginalDensity, MarketModel};
use crate::error::{HedgeError, Result};
use crate::numerics::{integrate, norm_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Subjective,
    RiskNeutral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetfMixtureSpec {
    /// Exponential rate of `Y` under ℙ.
    pub lambda_p: f64,
    /// Exponential rate of `Y` under ℙ̃.
    pub nu_q: f64,
    pub mu: f64,
    pub horizon: f64,
    /// Leverage ratio β.
    pub beta: f64,
}

impl LetfMixtureSpec {
    pub fn new(lambda_p: f64, nu_q: f64, mu: f64, horizon: f64, beta: f64) -> Result<Self> {
        if ![lambda_p, nu_q, mu, horizon, beta].iter().all(|v| v.is_finite()) {
            return Err(HedgeError::InvalidSpec("LETF parameters must be finite".into()));
        }
        if !(lambda_p > 0.0 && nu_q > 0.0 && horizon > 0.0) {
            return Err(HedgeError::InvalidSpec("LETF rates and horizon must be positive".into()));
        }
        Ok(Self { lambda_p, nu_q, mu, horizon, beta })
    }

    pub fn rate(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Subjective => self.lambda_p,
            Measure::RiskNeutral => self.nu_q,
        }
    }

    /// Centre of the x-law: μT under ℙ, 0 under ℙ̃.
    pub fn drift(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Subjective => self.mu * self.horizon,
            Measure::RiskNeutral => 0.0,
        }
    }

    /// Log-value of the LETF, `βx − β(β−1)y/2`.
    pub fn letf_log_value(&self, x: f64, y: f64) -> f64 {
        self.beta * x - 0.5 * self.beta * (self.beta - 1.0) * y
    }

    fn decay(&self, measure: Measure) -> f64 {
        0.5 * (8.0 * self.rate(measure) + 1.0).sqrt()
    }

    /// Closed-form density of X (the variance mixture integrated out).
    pub fn marginal_density(&self, measure: Measure, x: f64) -> f64 {
        let l = self.rate(measure);
        let a = self.decay(measure);
        let u = x - self.drift(measure);
        l / a * (-a * u.abs() - 0.5 * u).exp()
    }

    /// Exact probability of `lo ≤ X < hi`.
    pub fn marginal_cell_mass(&self, measure: Measure, lo: f64, hi: f64) -> f64 {
        let l = self.rate(measure);
        let a = self.decay(measure);
        let d = self.drift(measure);
        let (lo, hi) = (lo - d, hi - d);
        let mut mass = 0.0;
        if lo < 0.0 {
            let top = hi.min(0.0);
            mass += l / a * ((a - 0.5) * top).exp() * (1.0 - ((a - 0.5) * (lo - top)).exp()) / (a - 0.5);
        }
        if hi > 0.0 {
            let bottom = lo.max(0.0);
            mass += l / a * (-(a + 0.5) * bottom).exp() * (1.0 - (-(a + 0.5) * (hi - bottom)).exp()) / (a + 0.5);
        }
        mass.max(0.0)
    }

    /// Joint density `ℓe^{−ℓy} φ((x − drift + y/2)/√y)/√y`.
    pub fn joint_density(&self, measure: Measure, x: f64, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let l = self.rate(measure);
        let z = (x - self.drift(measure) + 0.5 * y) / y.sqrt();
        l * (-l * y).exp() * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * y).sqrt()
    }

    fn joint_cell_mass(&self, measure: Measure, (xlo, xhi): (f64, f64), (ylo, yhi): (f64, f64)) -> f64 {
        let l = self.rate(measure);
        let d = self.drift(measure);
        let ylo = ylo.max(0.0);
        let yhi = if yhi.is_finite() { yhi } else { ylo + 45.0 / l };
        if yhi <= ylo {
            return 0.0;
        }
        let cdf = |z: f64| {
            if z == f64::INFINITY {
                1.0
            } else if z == f64::NEG_INFINITY {
                0.0
            } else {
                norm_cdf(z)
            }
        };
        // y = t² removes the 1/√y behaviour at the origin
        let integrand = |t: f64| {
            let y = t * t;
            let inner = cdf((xhi - d + 0.5 * y) / t) - cdf((xlo - d + 0.5 * y) / t);
            2.0 * t * l * (-l * y).exp() * inner
        };
        integrate(integrand, ylo.sqrt(), yhi.sqrt(), 16).max(0.0)
    }
}

/// Subjective and risk-neutral x-marginals on `axis`, each renormalized.
pub fn letf_marginals(spec: &LetfMixtureSpec, axis: &GridAxis) -> Result<(MarginalDensity, MarginalDensity)> {
    let cells = |m: Measure| -> Vec<f64> {
        (0..axis.len())
            .map(|i| {
                let (lo, hi) = axis.cell_bounds(i);
                spec.marginal_cell_mass(m, lo, hi)
            })
            .collect()
    };
    let p = MarginalDensity::from_weights(axis.clone(), cells(Measure::Subjective))?;
    let pt = MarginalDensity::from_weights(axis.clone(), cells(Measure::RiskNeutral))?;
    Ok((p, pt))
}

/// Subjective joint law on the grid.
pub fn letf_joint(spec: &LetfMixtureSpec, axis_x: &GridAxis, axis_y: &GridAxis) -> Result<JointDensityGrid> {
    letf_joint_under(spec, Measure::Subjective, axis_x, axis_y)
}

/// Joint law under either measure; `axis_y` holds variance values and must be
/// strictly positive.
pub fn letf_joint_under(
    spec: &LetfMixtureSpec,
    measure: Measure,
    axis_x: &GridAxis,
    axis_y: &GridAxis,
) -> Result<JointDensityGrid> {
    if axis_y.first() <= 0.0 {
        return Err(HedgeError::InvalidAxis("variance axis must be strictly positive".into()));
    }
    let (nx, ny) = (axis_x.len(), axis_y.len());
    let weights: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|k| spec.joint_cell_mass(measure, axis_x.cell_bounds(k / ny), axis_y.cell_bounds(k % ny)))
        .collect();
    JointDensityGrid::from_weights(axis_x.clone(), axis_y.clone(), weights)
}

fn exponential_cell_masses(rate: f64, axis: &GridAxis) -> Vec<f64> {
    (0..axis.len())
        .map(|j| {
            let (lo, hi) = axis.cell_bounds(j);
            let lo = lo.max(0.0);
            ((-rate * lo).exp() - (-rate * hi).exp()).max(0.0)
        })
        .collect()
}

/// Market model with the subjective joint law and both risk-neutral
/// marginals (x from the closed form, y exponential with rate ν).
pub fn letf_model(spec: &LetfMixtureSpec, axis_x: &GridAxis, axis_y: &GridAxis) -> Result<MarketModel> {
    let joint = letf_joint(spec, axis_x, axis_y)?;
    let (_, pt_x) = letf_marginals(spec, axis_x)?;
    let pt_y = MarginalDensity::from_weights(axis_y.clone(), exponential_cell_masses(spec.nu_q, axis_y))?;
    MarketModel::new(joint, pt_x, pt_y)
}
