use super::{GridAxis, MarginalDensity};
use crate::error::{HedgeError, Result};

/// Clipped negative mass, relative to the positive mass, above which quotes
/// are flagged as non-convex.
pub const CLIP_WARNING_FRACTION: f64 = 1e-3;

/// Density extracted from a call curve by second differences in strike.
#[derive(Debug, Clone)]
pub struct ImpliedDensity {
    /// Clipped and renormalized cell masses on the interior strikes.
    pub density: MarginalDensity,
    /// Unclipped second differences `∂²C/∂K²` at the interior strikes.
    pub raw: Vec<f64>,
    /// Negative mass removed by clipping, divided by the retained mass.
    pub clipped_fraction: f64,
    pub non_convex_warning: bool,
    /// Signed mass before clipping and renormalization. Telescopes to the
    /// difference of the end slopes of the call curve.
    pub raw_mass: f64,
}

/// Risk-neutral cell masses from call quotes on an increasing strike grid.
///
/// Non-uniform spacing is handled by the three-point second difference; each
/// interior strike owns half of its two neighbouring intervals.
pub fn implied_density_from_calls(strikes: &[f64], call_prices: &[f64]) -> Result<ImpliedDensity> {
    if strikes.len() != call_prices.len() {
        return Err(HedgeError::ShapeMismatch(format!(
            "{} strikes but {} prices",
            strikes.len(),
            call_prices.len()
        )));
    }
    if strikes.len() < 3 {
        return Err(HedgeError::InsufficientData(format!(
            "need at least 3 strikes for a second difference, got {}",
            strikes.len()
        )));
    }
    GridAxis::new(strikes.to_vec())?;
    if let Some(k) = call_prices.iter().position(|c| !c.is_finite()) {
        return Err(HedgeError::InvalidDensity(format!("call price {k} is not finite")));
    }

    let n = strikes.len();
    let mut raw = Vec::with_capacity(n - 2);
    let mut weights = Vec::with_capacity(n - 2);
    let (mut positive, mut negative, mut raw_mass) = (0.0, 0.0, 0.0);
    for i in 1..n - 1 {
        let dl = strikes[i] - strikes[i - 1];
        let dr = strikes[i + 1] - strikes[i];
        let span = strikes[i + 1] - strikes[i - 1];
        let slope_l = (call_prices[i] - call_prices[i - 1]) / dl;
        let slope_r = (call_prices[i + 1] - call_prices[i]) / dr;
        let d2 = 2.0 * (slope_r - slope_l) / span;
        let mass = d2 * 0.5 * span;
        raw.push(d2);
        raw_mass += mass;
        if mass >= 0.0 {
            positive += mass;
            weights.push(mass);
        } else {
            negative -= mass;
            weights.push(0.0);
        }
    }
    if !(positive > 0.0) {
        return Err(HedgeError::InvalidDensity("call quotes imply no positive mass".into()));
    }
    let clipped_fraction = negative / positive;
    let axis = GridAxis::new(strikes[1..n - 1].to_vec())?;
    let density = MarginalDensity::from_weights(axis, weights)?;
    Ok(ImpliedDensity {
        density,
        raw,
        clipped_fraction,
        non_convex_warning: clipped_fraction >= CLIP_WARNING_FRACTION,
        raw_mass,
    })
}
