//! Exponential-utility indifference price of ν units of a claim when the
//! buyer hedges statically with X-options.
//!
//! With `V(c, h)` the optimal expected utility at budget `c` after selling
//! `h`, the per-unit price p solves `V(c − pν, −νh) = V(c, 0)`. Under
//! exponential utility `V(c, h) = −exp(Ẽ L_h − γc)/γ` with
//! `L_h(x) = log((1/p̃_X(x)) Σ_y p(x, y) e^{γh(x, y)})`, which gives
//!
//! `γpν = Ẽ log(p_X/p̃_X) − Ẽ log((1/p̃_X) Σ_y p e^{−γνh})`
//!
//! independently of `c`.

use crate::error::{HedgeError, Result};
use crate::market_model::MarketModel;
use crate::payoff::PayoffSurface;
use crate::single_hedge::{log_partition_x, solve_exponential_single, BudgetSpec};
use crate::utility::Utility;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndifferenceQuote {
    /// Units bought (negative for a sale).
    pub nu: f64,
    /// Price per unit.
    pub price: f64,
    pub gamma: f64,
}

fn check(gamma: f64, nu: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HedgeError::InvalidSpec(format!("gamma must be positive, got {gamma}")));
    }
    if nu == 0.0 || !nu.is_finite() {
        return Err(HedgeError::InvalidSpec(format!("quantity must be finite and nonzero, got {nu}")));
    }
    Ok(())
}

fn mean_log_partition(model: &MarketModel, values: &[f64], gamma: f64) -> Result<f64> {
    let logs = log_partition_x(model, values, gamma)?;
    Ok(logs.iter().zip(model.pt_x().mass()).filter_map(|(l, w)| l.map(|l| w * l)).sum())
}

pub fn price_exponential(model: &MarketModel, h: &PayoffSurface, gamma: f64, nu: f64) -> Result<IndifferenceQuote> {
    check(gamma, nu)?;
    h.check_axes(model.axis_x(), model.axis_y())?;
    let zero = vec![0.0; h.values().len()];
    let short: Vec<f64> = h.values().iter().map(|v| -nu * v).collect();
    let without = mean_log_partition(model, &zero, gamma)?;
    let with = mean_log_partition(model, &short, gamma)?;
    let price = (without - with) / (gamma * nu);
    if !price.is_finite() {
        return Err(HedgeError::NoConvergence("indifference price is not representable".into()));
    }
    Ok(IndifferenceQuote { nu, price, gamma })
}

/// Gap between the two sides of the indifference equation at reference
/// budget `c`, in certainty-equivalent units. Each side is computed by the
/// single-asset exponential solver.
pub fn verify_indifference(
    model: &MarketModel,
    h: &PayoffSurface,
    gamma: f64,
    nu: f64,
    price: f64,
    c: f64,
) -> Result<f64> {
    check(gamma, nu)?;
    let u = Utility::exponential(gamma)?;
    let short = h.scaled(-nu);
    let zero = PayoffSurface::zeros(model.axis_x(), model.axis_y());
    let (_, with) = solve_exponential_single(model, &short, BudgetSpec::new(c - price * nu)?, &u)?;
    let (_, without) = solve_exponential_single(model, &zero, BudgetSpec::new(c)?, &u)?;
    let lhs = u.certainty_equivalent(with.expected_utility)?;
    let rhs = u.certainty_equivalent(without.expected_utility)?;
    Ok((lhs - rhs).abs())
}
