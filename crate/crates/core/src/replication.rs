//! Cash, forward and vanilla-option strips reproducing a hedge curve.
//!
//! The curve is read as the piecewise-linear interpolant of its grid values.
//! Such a function is cash plus a forward at the anchor κ plus a kink at
//! every grid point, and a kink of size `w` at strike K is `w` puts (below κ)
//! or `w` calls (above κ). A kink at κ itself is split evenly between a put
//! and a call. Beyond the grid the curve is extended with the curvature of
//! the outermost interior point, entered as half-weight options at the two
//! end strikes.

use crate::error::{HedgeError, Result};
use crate::market_model::{GridAxis, MarginalDensity};
use crate::payoff::HedgeCurve;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationPortfolio {
    pub kappa: f64,
    pub cash: f64,
    pub forward_units: f64,
    pub put_strikes: Vec<f64>,
    pub put_weights: Vec<f64>,
    pub call_strikes: Vec<f64>,
    pub call_weights: Vec<f64>,
    /// End-strike weights come from one-sided curvature estimates; the
    /// replication outside the grid is an extrapolation.
    pub one_sided_endpoints: bool,
}

impl ReplicationPortfolio {
    pub fn scaled(&self, s: f64) -> Self {
        let mul = |v: &[f64]| v.iter().map(|w| w * s).collect();
        Self {
            cash: self.cash * s,
            forward_units: self.forward_units * s,
            put_weights: mul(&self.put_weights),
            call_weights: mul(&self.call_weights),
            ..self.clone()
        }
    }

    pub fn total_option_notional(&self) -> f64 {
        self.put_weights.iter().chain(&self.call_weights).map(|w| w.abs()).sum()
    }
}

/// Risk-neutral mean rounded to the nearest grid point.
pub fn default_kappa(pt: &MarginalDensity) -> f64 {
    let axis = pt.axis();
    axis.points()[axis.nearest_index(pt.mean())]
}

fn slopes(axis: &GridAxis, v: &[f64]) -> Vec<f64> {
    let p = axis.points();
    (0..p.len() - 1).map(|k| (v[k + 1] - v[k]) / (p[k + 1] - p[k])).collect()
}

/// Splits `f` into cash, forward and option strips anchored at `kappa`.
pub fn decompose(f: &HedgeCurve, kappa: f64) -> Result<ReplicationPortfolio> {
    let axis = f.axis();
    let n = axis.len();
    if n < 3 {
        return Err(HedgeError::InsufficientData(format!("replication needs at least 3 grid points, got {n}")));
    }
    if !(kappa >= axis.first() && kappa <= axis.last()) {
        return Err(HedgeError::OutOfRange(format!(
            "kappa {kappa} outside the curve's axis [{}, {}]",
            axis.first(),
            axis.last()
        )));
    }
    let p = axis.points();
    let v = f.values();
    let s = slopes(axis, v);

    // kink sizes at every grid point, the end ones extrapolated
    let mut kinks = vec![0.0; n];
    for k in 1..n - 1 {
        kinks[k] = s[k] - s[k - 1];
    }
    kinks[0] = 0.5 * kinks[1] / (0.5 * (p[2] - p[0])) * (p[1] - p[0]);
    kinks[n - 1] = 0.5 * kinks[n - 2] / (0.5 * (p[n - 1] - p[n - 3])) * (p[n - 1] - p[n - 2]);

    // segment holding κ, or the grid point equal to it
    let at = p.iter().position(|&x| x == kappa);
    let (cash, forward_units) = match at {
        Some(k) => {
            let left = if k == 0 { s[0] - kinks[0] } else { s[k - 1] };
            let right = if k == n - 1 { s[n - 2] + kinks[n - 1] } else { s[k] };
            (v[k], 0.5 * (left + right))
        }
        None => {
            let k = p.partition_point(|&x| x < kappa) - 1;
            (v[k] + s[k] * (kappa - p[k]), s[k])
        }
    };

    let mut port = ReplicationPortfolio {
        kappa,
        cash,
        forward_units,
        put_strikes: Vec::new(),
        put_weights: Vec::new(),
        call_strikes: Vec::new(),
        call_weights: Vec::new(),
        one_sided_endpoints: true,
    };
    for k in 0..n {
        let (x, w) = (p[k], kinks[k]);
        if x < kappa {
            port.put_strikes.push(x);
            port.put_weights.push(w);
        } else if x > kappa {
            port.call_strikes.push(x);
            port.call_weights.push(w);
        } else {
            port.put_strikes.push(x);
            port.put_weights.push(0.5 * w);
            port.call_strikes.push(x);
            port.call_weights.push(0.5 * w);
        }
    }
    Ok(port)
}

/// Terminal value of the portfolio, using `C(κ) − P(κ) = terminal − κ` for
/// the forward.
pub fn reconstruct(port: &ReplicationPortfolio, terminal: f64) -> f64 {
    let puts: f64 = port.put_strikes.iter().zip(&port.put_weights).map(|(k, w)| w * (k - terminal).max(0.0)).sum();
    let calls: f64 = port.call_strikes.iter().zip(&port.call_weights).map(|(k, w)| w * (terminal - k).max(0.0)).sum();
    port.cash + port.forward_units * (terminal - port.kappa) + puts + calls
}
