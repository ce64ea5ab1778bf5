//! Optimal hedge `f(X)` of a claim `h(X, Y)` when only X-options trade.
//!
//! The investor maximizes `E U(f(X) − h(X, Y))` under ℙ subject to
//! `Ẽ f(X) ≤ c`. Multipliers follow the sign convention of the first-order
//! condition `Σ_y p(x, y) U′(f(x) − h(x, y)) + λ p̃_X(x) = 0`, so λ ≤ 0.
//!
//! Points outside the risk-neutral support carry no probability under
//! either measure; their hedge value is set to the budget `c`.

use rayon::prelude::*;

use crate::error::{HedgeError, Result};
use crate::market_model::{MarginalDensity, MarketModel};
use crate::numerics::{bisect, log_weighted_sum_exp};
use crate::payoff::{HedgeCurve, PayoffSurface};
use crate::utility::Utility;

/// Bracket expansions allowed before a root search gives up.
const MAX_DOUBLINGS: usize = 1_000;
const MAX_OUTER_STEPS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSpec {
    pub c: f64,
}

impl BudgetSpec {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(HedgeError::InvalidSpec(format!("budget must be finite, got {c}")));
        }
        Ok(Self { c })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub lambda_star: f64,
    /// `Ẽ f` of the returned hedge (or `Ẽ f + Ẽ g` for a pair).
    pub budget_used: f64,
    pub foc_residual_sup: f64,
    pub expected_utility: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn require_shape(model: &MarketModel, h: &PayoffSurface) -> Result<()> {
    h.check_axes(model.axis_x(), model.axis_y())
}

/// `log((1/p̃_X(x)) Σ_y p(x, y) e^{γ v(x, y)})` on the risk-neutral support,
/// `None` elsewhere.
pub(crate) fn log_partition_x(model: &MarketModel, values: &[f64], gamma: f64) -> Result<Vec<Option<f64>>> {
    let joint = model.joint();
    let ny = model.ny();
    let pt = model.pt_x().mass();
    (0..model.nx())
        .map(|i| {
            if pt[i] <= 0.0 {
                return Ok(None);
            }
            let exps: Vec<f64> = values[i * ny..(i + 1) * ny].iter().map(|v| gamma * v).collect();
            let lse = log_weighted_sum_exp(joint.row(i), &exps);
            if lse == f64::NEG_INFINITY {
                return Err(HedgeError::Support(format!("no subjective mass at x-index {i} inside the pricing support")));
            }
            Ok(Some(lse - pt[i].ln()))
        })
        .collect()
}

/// `E U(f(X) − h(X, Y))` under ℙ.
pub fn expected_utility_single(model: &MarketModel, h: &PayoffSurface, f: &HedgeCurve, u: &Utility) -> Result<f64> {
    let joint = model.joint();
    let mut total = 0.0;
    for i in 0..model.nx() {
        for (j, &p) in joint.row(i).iter().enumerate() {
            if p > 0.0 {
                total += p * u.evaluate(f.values()[i] - h.at(i, j))?;
            }
        }
    }
    Ok(total)
}

/// Scaled sup-norm of the first-order condition,
/// `sup_x |Σ_y p U′(f − h) + λ p̃_X| / max(1, |λ|)`.
pub fn foc_residual_single(
    model: &MarketModel,
    h: &PayoffSurface,
    f: &HedgeCurve,
    u: &Utility,
    lambda_star: f64,
) -> Result<f64> {
    require_shape(model, h)?;
    if !f.axis().matches(model.axis_x()) {
        return Err(HedgeError::ShapeMismatch("hedge curve axis differs from model x-axis".into()));
    }
    let joint = model.joint();
    let pt = model.pt_x().mass();
    let mut worst: f64 = 0.0;
    for i in 0..model.nx() {
        if model.p_x()[i] <= 0.0 && pt[i] <= 0.0 {
            continue;
        }
        let mut s = 0.0;
        for (j, &p) in joint.row(i).iter().enumerate() {
            if p > 0.0 {
                let m = u
                    .marginal(f.values()[i] - h.at(i, j))
                    .map_err(|_| HedgeError::FocDomain { kind: u.kind(), index: i })?;
                s += p * m;
            }
        }
        worst = worst.max((s + lambda_star * pt[i]).abs());
    }
    Ok(worst / lambda_star.abs().max(1.0))
}

fn finish(
    model: &MarketModel,
    h: &PayoffSurface,
    values: Vec<f64>,
    u: &Utility,
    lambda_star: f64,
    iterations: usize,
) -> Result<(HedgeCurve, SolveReport)> {
    let curve = HedgeCurve::new(model.axis_x().clone(), values)?;
    let report = SolveReport {
        lambda_star,
        budget_used: model.pt_x().expectation(curve.values()),
        foc_residual_sup: foc_residual_single(model, h, &curve, u, lambda_star)?,
        expected_utility: expected_utility_single(model, h, &curve, u)?,
        iterations,
        converged: true,
    };
    Ok((curve, report))
}

/// Closed-form optimum for exponential utility,
/// `f(x) = c + L(x)/γ − Ẽ[L]/γ` with `L(x) = log((1/p̃_X) Σ_y p e^{γh})`.
pub fn solve_exponential_single(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    u: &Utility,
) -> Result<(HedgeCurve, SolveReport)> {
    let Utility::Exponential { gamma } = *u else {
        return Err(HedgeError::UnsupportedUtility(format!("exponential solver given {} utility", u.kind())));
    };
    require_shape(model, h)?;
    let logs = log_partition_x(model, h.values(), gamma)?;
    let pt = model.pt_x().mass();
    let mean: f64 = logs.iter().zip(pt).filter_map(|(l, w)| l.map(|l| w * l)).sum();
    let c = budget.c;
    let values = logs.iter().map(|l| l.map_or(c, |l| c + (l - mean) / gamma)).collect();
    let lambda_star = -(mean - gamma * c).exp();
    if !(lambda_star.is_finite() && lambda_star < 0.0) {
        return Err(HedgeError::NoConvergence(format!(
            "multiplier exp({}) is not representable; rescale the payoff or the budget",
            mean - gamma * c
        )));
    }
    finish(model, h, values, u, lambda_star, 0)
}

/// Direct evaluation of `Ĥ(x, f) = Σ_y p(x, y)(f − h(x, y))^{−γ}` for one
/// row of the grid. Returns `+inf` if `f` does not exceed every payoff with
/// positive mass.
pub fn power_transform_direct(p_row: &[f64], h_row: &[f64], f: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    for (&p, &hv) in p_row.iter().zip(h_row) {
        if p > 0.0 {
            let d = f - hv;
            if !(d > 0.0) {
                return f64::INFINITY;
            }
            total += p * d.powf(-gamma);
        }
    }
    total
}

struct PowerRow {
    top: f64,
    mass: Vec<f64>,
    /// `top − h(x, y)` on the positive-mass cells.
    gaps: Vec<f64>,
    log_pt: f64,
}

impl PowerRow {
    /// `log Ĥ(x, top + e^s)`.
    fn log_transform(&self, s: f64, gamma: f64) -> f64 {
        let t = s.exp();
        let exps: Vec<f64> = self.gaps.iter().map(|g| -gamma * (g + t).ln()).collect();
        log_weighted_sum_exp(&self.mass, &exps)
    }

    /// Excess `f − top` solving `Ĥ(x, f) = μ p̃_X(x)`.
    fn invert(&self, log_mu: f64, gamma: f64) -> Result<f64> {
        let target = log_mu + self.log_pt;
        let phi = |s: f64| self.log_transform(s, gamma) - target;
        let (lo, hi) = expand_bracket(phi, 0.0)?;
        Ok(bisect(phi, lo, hi, 0.0, false).exp())
    }
}

/// Bracket `[lo, hi]` around the root of a decreasing function by doubling
/// steps away from `start`.
fn expand_bracket<F: Fn(f64) -> f64>(phi: F, start: f64) -> Result<(f64, f64)> {
    let v0 = phi(start);
    if v0 == 0.0 {
        return Ok((start, start));
    }
    let dir = if v0 > 0.0 { 1.0 } else { -1.0 };
    let mut inner = start;
    let mut step = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let outer = inner + dir * step;
        let v = phi(outer);
        if v.is_nan() {
            break;
        }
        if (v > 0.0) != (v0 > 0.0) || v == 0.0 {
            return Ok(if dir > 0.0 { (inner, outer) } else { (outer, inner) });
        }
        inner = outer;
        step *= 2.0;
    }
    Err(HedgeError::NoConvergence(format!("root bracket not found after {MAX_DOUBLINGS} doublings from {start}")))
}

/// Optimum for power and logarithmic utility: pointwise inversion of the
/// decreasing map `f ↦ Ĥ(x, f)` nested in a search over `μ = −λ > 0`.
pub fn solve_power_single(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    u: &Utility,
) -> Result<(HedgeCurve, SolveReport)> {
    let gamma = match *u {
        Utility::Power { gamma } => gamma,
        Utility::Logarithmic => 1.0,
        _ => return Err(HedgeError::UnsupportedUtility(format!("power solver given {} utility", u.kind()))),
    };
    require_shape(model, h)?;
    let joint = model.joint();
    let pt = model.pt_x().mass();
    let mut support = Vec::new();
    let mut rows = Vec::new();
    for i in 0..model.nx() {
        if pt[i] <= 0.0 {
            continue;
        }
        let cells: Vec<(f64, f64)> =
            joint.row(i).iter().zip(h.row(i)).filter(|(p, _)| **p > 0.0).map(|(p, v)| (*p, *v)).collect();
        if cells.is_empty() {
            return Err(HedgeError::Support(format!("no subjective mass at x-index {i} inside the pricing support")));
        }
        let top = cells.iter().fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v));
        rows.push(PowerRow {
            top,
            mass: cells.iter().map(|(p, _)| *p).collect(),
            gaps: cells.iter().map(|(_, v)| top - v).collect(),
            log_pt: pt[i].ln(),
        });
        support.push(i);
    }
    let floor: f64 = support.iter().zip(&rows).map(|(&i, r)| pt[i] * r.top).sum();
    let excess = budget.c - floor;
    if !(excess > 0.0) {
        return Err(HedgeError::InfeasibleBudget(format!(
            "budget {} must exceed Ẽ[max_y h(X, y)] = {floor} for the hedge to dominate the claim",
            budget.c
        )));
    }

    let excesses = |log_mu: f64| -> Result<Vec<f64>> { rows.par_iter().map(|r| r.invert(log_mu, gamma)).collect() };
    let spent = |t: &[f64]| -> f64 { support.iter().zip(t).map(|(&i, t)| pt[i] * t).sum() };

    let mut evaluations = 0usize;
    let mut gap = |log_mu: f64| -> Result<f64> {
        evaluations += 1;
        Ok(spent(&excesses(log_mu)?) - excess)
    };
    // bracket on ln μ, doubling away from μ = 1
    let g0 = gap(0.0)?;
    let dir = if g0 > 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (0.0, 0.0);
    if g0 != 0.0 {
        let mut inner = 0.0;
        let mut step = 1.0;
        let mut found = false;
        for _ in 0..MAX_DOUBLINGS {
            let outer = inner + dir * step;
            let g = gap(outer)?;
            if (g > 0.0) != (g0 > 0.0) || g == 0.0 {
                (lo, hi) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };
                found = true;
                break;
            }
            inner = outer;
            step *= 2.0;
        }
        if !found {
            return Err(HedgeError::NoConvergence("multiplier bracket not found".into()));
        }
    }
    let tol = 1e-13 * budget.c.abs().max(1.0);
    let mut log_mu = 0.5 * (lo + hi);
    for _ in 0..MAX_OUTER_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        log_mu = mid;
        let g = gap(mid)?;
        if g.abs() <= tol {
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = excesses(log_mu)?;
    let mut values = vec![budget.c; model.nx()];
    for ((&i, r), t) in support.iter().zip(&rows).zip(&t) {
        values[i] = r.top + t;
    }
    finish(model, h, values, u, -log_mu.exp(), evaluations)
}

struct QuadraticParts {
    cond_mean: Vec<f64>,
    ratio: Vec<f64>,
    /// `Ẽ E[h | X]`.
    a: f64,
    /// `Ẽ (p̃_X / p_X)`.
    r: f64,
}

impl QuadraticParts {
    fn new(model: &MarketModel, h: &PayoffSurface) -> Result<Self> {
        require_shape(model, h)?;
        let pt = model.pt_x().mass();
        let px = model.p_x();
        let mut cond_mean = vec![0.0; model.nx()];
        let mut ratio = vec![0.0; model.nx()];
        for i in 0..model.nx() {
            if pt[i] <= 0.0 {
                continue;
            }
            if px[i] <= 0.0 {
                return Err(HedgeError::EquivalenceViolation(format!("p_X vanishes at x-index {i} where p̃_X > 0")));
            }
            let cond = model.conditional_given_x(i)?;
            cond_mean[i] = cond.iter().zip(h.row(i)).filter(|(q, _)| **q > 0.0).map(|(q, v)| q * v).sum();
            ratio[i] = pt[i] / px[i];
        }
        let a = model.pt_x().expectation(&cond_mean);
        let r = model.pt_x().expectation(&ratio);
        Ok(Self { cond_mean, ratio, a, r })
    }

    fn curve(&self, model: &MarketModel, gamma: f64, lambda: f64, c: f64) -> Vec<f64> {
        let pt = model.pt_x().mass();
        (0..model.nx())
            .map(|i| if pt[i] > 0.0 { self.cond_mean[i] + lambda * self.ratio[i] + gamma } else { c })
            .collect()
    }
}

/// Mean-variance optimum for `U(x) = γx − x²/2`.
///
/// If `Ẽ E[h|X] + γ ≤ c` the budget is slack: `λ = 0` and
/// `f = E[h|X] + γ`. Otherwise the budget binds and
/// `λ = (c − γ − Ẽ E[h|X]) / Ẽ(p̃_X/p_X)`.
pub fn solve_quadratic_single(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    u: &Utility,
) -> Result<(HedgeCurve, SolveReport)> {
    let Utility::Quadratic { gamma } = *u else {
        return Err(HedgeError::UnsupportedUtility(format!("quadratic solver given {} utility", u.kind())));
    };
    let parts = QuadraticParts::new(model, h)?;
    let lambda = if parts.a + gamma <= budget.c { 0.0 } else { (budget.c - gamma - parts.a) / parts.r };
    finish(model, h, parts.curve(model, gamma, lambda, budget.c), u, lambda, 0)
}

/// The binding-budget branch of the mean-variance solution applied
/// regardless of whether the budget binds. Returns the curve and its λ.
pub fn quadratic_binding_branch(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    gamma: f64,
) -> Result<(HedgeCurve, f64)> {
    let parts = QuadraticParts::new(model, h)?;
    let lambda = (budget.c - gamma - parts.a) / parts.r;
    Ok((HedgeCurve::new(model.axis_x().clone(), parts.curve(model, gamma, lambda, budget.c))?, lambda))
}

/// Optimum when the claim depends on X alone, so the market is complete:
/// `f(x) = [U′]⁻¹(−λ p̃(x)/p(x)) + h(x)` with λ set by the budget.
pub fn complete_market_optimizer(
    p: &MarginalDensity,
    pt: &MarginalDensity,
    u: &Utility,
    budget: BudgetSpec,
    h_x: &HedgeCurve,
) -> Result<(HedgeCurve, SolveReport)> {
    if !u.is_increasing() {
        return Err(HedgeError::UnsupportedUtility(format!("{} utility is not increasing", u.kind())));
    }
    if !p.axis().matches(pt.axis()) || !p.axis().matches(h_x.axis()) {
        return Err(HedgeError::ShapeMismatch("densities and claim must share one axis".into()));
    }
    let (pm, qm) = (p.mass(), pt.mass());
    if let Some(i) = pm.iter().zip(qm).position(|(a, b)| (*a > 0.0) != (*b > 0.0)) {
        return Err(HedgeError::EquivalenceViolation(format!("supports differ at index {i}")));
    }
    let support: Vec<usize> = (0..pm.len()).filter(|&i| qm[i] > 0.0).collect();
    let hv = h_x.values();
    let curve_at = |log_mu: f64| -> Result<Vec<f64>> {
        let mut values = hv.to_vec();
        for &i in &support {
            let m = (log_mu + (qm[i] / pm[i]).ln()).exp();
            values[i] = u.inverse_marginal(m)? + hv[i];
        }
        Ok(values)
    };
    let c = budget.c;
    let gap = |log_mu: f64| match curve_at(log_mu) {
        Ok(v) => pt.expectation(&v) - c,
        Err(_) => f64::NAN,
    };
    let (lo, hi) = expand_bracket(gap, 0.0).map_err(|_| {
        HedgeError::NoConvergence(format!(
            "no multiplier reaches budget {c}: the attainable budgets of {} utility do not include it",
            u.kind()
        ))
    })?;
    let log_mu = bisect(gap, lo, hi, 0.0, false);
    let values = curve_at(log_mu)?;
    let f = HedgeCurve::new(p.axis().clone(), values)?;
    let mu = log_mu.exp();
    let mut residual: f64 = 0.0;
    let mut eu = 0.0;
    for &i in &support {
        let m = u.marginal(f.values()[i] - hv[i])?;
        residual = residual.max((pm[i] * m - mu * qm[i]).abs());
        eu += pm[i] * u.evaluate(f.values()[i] - hv[i])?;
    }
    let report = SolveReport {
        lambda_star: -mu,
        budget_used: pt.expectation(f.values()),
        foc_residual_sup: residual / mu.max(1.0),
        expected_utility: eu,
        iterations: 0,
        converged: true,
    };
    Ok((f, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{GridAxis, JointDensityGrid};
    use crate::payoff::product_call;
    use proptest::prelude::*;

    fn three_state() -> (MarketModel, PayoffSurface) {
        let m = crate::market_model::tests::three_state();
        let h = product_call(m.axis_x(), m.axis_y()).unwrap();
        (m, h)
    }

    fn random_model(nx: usize, ny: usize, w: &[f64], q: &[f64]) -> MarketModel {
        let ax = GridAxis::uniform(0.0, 1.0, nx).unwrap();
        let ay = GridAxis::uniform(0.0, 1.0, ny).unwrap();
        let joint = JointDensityGrid::from_weights(ax.clone(), ay.clone(), w[..nx * ny].to_vec()).unwrap();
        let ptx = MarginalDensity::from_weights(ax, q[..nx].to_vec()).unwrap();
        let pty = joint.marginal_y();
        MarketModel::new(joint, ptx, pty).unwrap()
    }

    #[test]
    fn exponential_zero_claim_same_measures_is_flat() {
        let ax = GridAxis::uniform(0.0, 1.0, 4).unwrap();
        let ay = GridAxis::uniform(0.0, 1.0, 3).unwrap();
        let w: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let m = MarketModel::with_subjective_pricing(JointDensityGrid::from_weights(ax.clone(), ay.clone(), w).unwrap())
            .unwrap();
        let h = PayoffSurface::zeros(&ax, &ay);
        let u = Utility::exponential(0.7).unwrap();
        let (f, r) = solve_exponential_single(&m, &h, BudgetSpec::new(5.0).unwrap(), &u).unwrap();
        for v in f.values() {
            assert!((v - 5.0).abs() < 1e-14);
        }
        assert!(r.lambda_star < 0.0);
        assert!(r.foc_residual_sup < 1e-12);
    }

    #[test]
    fn exponential_three_state_budget_and_foc() {
        let (m, h) = three_state();
        let u = Utility::exponential(1.0).unwrap();
        let (_, r) = solve_exponential_single(&m, &h, BudgetSpec::new(1.8).unwrap(), &u).unwrap();
        assert!((r.budget_used - 1.8).abs() < 1e-12);
        assert!(r.foc_residual_sup < 1e-8);
    }

    #[test]
    fn exponential_handles_huge_payoffs() {
        let (m, h) = three_state();
        let big = h.scaled(1e4);
        let u = Utility::exponential(1.0).unwrap();
        let (f, r) = solve_exponential_single(&m, &big, BudgetSpec::new(2.4e4).unwrap(), &u).unwrap();
        assert!(f.values().iter().all(|v| v.is_finite()));
        assert!((r.budget_used - 2.4e4).abs() < 1e-8);
        assert!(r.lambda_star < 0.0 && r.lambda_star.is_finite());
        assert!(solve_exponential_single(&m, &big, BudgetSpec::new(4e4).unwrap(), &u).is_err());
    }

    #[test]
    fn wrong_utility_is_rejected() {
        let (m, h) = three_state();
        let b = BudgetSpec::new(1.0).unwrap();
        let q = Utility::quadratic(1.0).unwrap();
        assert!(matches!(solve_exponential_single(&m, &h, b, &q), Err(HedgeError::UnsupportedUtility(_))));
        assert!(matches!(solve_power_single(&m, &h, b, &q), Err(HedgeError::UnsupportedUtility(_))));
        let e = Utility::exponential(1.0).unwrap();
        assert!(matches!(solve_quadratic_single(&m, &h, b, &e), Err(HedgeError::UnsupportedUtility(_))));
    }

    #[test]
    fn log_utility_degenerate_y_is_flat() {
        let ax = GridAxis::uniform(0.0, 1.0, 5).unwrap();
        let ay = GridAxis::new(vec![0.0]).unwrap();
        let joint = JointDensityGrid::from_weights(ax.clone(), ay.clone(), vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        let m = MarketModel::with_subjective_pricing(joint).unwrap();
        let h = PayoffSurface::zeros(&ax, &ay);
        let (f, r) = solve_power_single(&m, &h, BudgetSpec::new(1.0).unwrap(), &Utility::Logarithmic).unwrap();
        for v in f.values() {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
        assert!((r.lambda_star + 1.0).abs() < 1e-10);
    }

    #[test]
    fn power_infeasible_budget() {
        let (m, h) = three_state();
        let u = Utility::power(2.0).unwrap();
        // Ẽ max h = 0.7 * 3 + 0.3 * 1
        let e = solve_power_single(&m, &h, BudgetSpec::new(2.39).unwrap(), &u).unwrap_err();
        assert!(matches!(e, HedgeError::InfeasibleBudget(_)));
        let (f, r) = solve_power_single(&m, &h, BudgetSpec::new(2.5).unwrap(), &u).unwrap();
        assert!(f.values()[0] > 3.0 && f.values()[1] > 1.0);
        assert!((r.budget_used - 2.5).abs() < 1e-10);
        assert!(r.lambda_star < 0.0);
        assert!(r.foc_residual_sup < 1e-8);
    }

    #[test]
    fn quadratic_two_state_example() {
        let ax = GridAxis::new(vec![0.0, 1.0]).unwrap();
        let ay = GridAxis::new(vec![0.0]).unwrap();
        let joint = JointDensityGrid::new(ax.clone(), ay.clone(), vec![0.5, 0.5]).unwrap();
        let m = MarketModel::with_subjective_pricing(joint).unwrap();
        let h = PayoffSurface::from_fn(&ax, &ay, |x, _| x).unwrap();
        let u = Utility::quadratic(0.0).unwrap();
        let (f, r) = solve_quadratic_single(&m, &h, BudgetSpec::new(0.0).unwrap(), &u).unwrap();
        assert!((r.lambda_star + 0.5).abs() < 1e-15);
        assert!((f.values()[0] + 0.5).abs() < 1e-15);
        assert!((f.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_slack_budget_gives_conditional_mean_plus_gamma() {
        let (m, h) = three_state();
        let u = Utility::quadratic(0.5).unwrap();
        let (f, r) = solve_quadratic_single(&m, &h, BudgetSpec::new(100.0).unwrap(), &u).unwrap();
        assert_eq!(r.lambda_star, 0.0);
        // E[h | X=1] = (0.2·0 + 0.5·3)/0.7, E[h | X=2] = 1
        assert!((f.values()[0] - (1.5 / 0.7 + 0.5)).abs() < 1e-14);
        assert!((f.values()[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn complete_market_trivial_cases() {
        let ax = GridAxis::uniform(-1.0, 0.5, 5).unwrap();
        let p = MarginalDensity::from_weights(ax.clone(), vec![1.0, 3.0, 4.0, 3.0, 1.0]).unwrap();
        let u = Utility::exponential(1.0).unwrap();
        let zero = HedgeCurve::constant(&ax, 0.0);
        let (f, r) = complete_market_optimizer(&p, &p, &u, BudgetSpec::new(0.0).unwrap(), &zero).unwrap();
        assert!(f.sup_distance(&zero) < 1e-12);
        assert!(r.foc_residual_sup < 1e-12);

        let hx = HedgeCurve::from_fn(&ax, |x| x * x - 0.3 * x).unwrap();
        let fair = p.expectation(hx.values());
        for u in [Utility::exponential(2.5).unwrap(), Utility::Logarithmic] {
            if !u.is_increasing() {
                continue;
            }
            let b = BudgetSpec::new(fair + if matches!(u, Utility::Logarithmic) { 1.0 } else { 0.0 }).unwrap();
            let (f, r) = complete_market_optimizer(&p, &p, &u, b, &hx).unwrap();
            let shift = b.c - fair;
            assert!(f.sup_distance(&hx.shifted(shift)) < 1e-10);
            assert!((r.budget_used - b.c).abs() < 1e-10);
        }
    }

    #[test]
    fn complete_market_power_below_fair_value_fails() {
        let ax = GridAxis::uniform(0.0, 1.0, 3).unwrap();
        let p = MarginalDensity::from_weights(ax.clone(), vec![1.0, 1.0, 1.0]).unwrap();
        let hx = HedgeCurve::constant(&ax, 2.0);
        let u = Utility::power(2.0).unwrap();
        let e = complete_market_optimizer(&p, &p, &u, BudgetSpec::new(1.5).unwrap(), &hx).unwrap_err();
        assert!(matches!(e, HedgeError::NoConvergence(_)));
    }

    #[test]
    fn perturbed_solution_has_positive_residual() {
        let (m, h) = three_state();
        let u = Utility::exponential(1.0).unwrap();
        let (f, r) = solve_exponential_single(&m, &h, BudgetSpec::new(1.8).unwrap(), &u).unwrap();
        assert!(foc_residual_single(&m, &h, &f, &u, r.lambda_star).unwrap() < 1e-10);
        let mut v = f.values().to_vec();
        v[1] += 0.01;
        let g = HedgeCurve::new(f.axis().clone(), v).unwrap();
        assert!(foc_residual_single(&m, &h, &g, &u, r.lambda_star).unwrap() > 1e-4);
    }

    #[test]
    fn foc_domain_error_names_index() {
        let (m, h) = three_state();
        let f = HedgeCurve::new(m.axis_x().clone(), vec![5.0, 0.5]).unwrap();
        let e = foc_residual_single(&m, &h, &f, &Utility::Logarithmic, -1.0).unwrap_err();
        assert_eq!(e, HedgeError::FocDomain { kind: "logarithmic", index: 1 });
    }

    proptest! {
        #[test]
        fn exponential_translation_covariance(
            w in prop::collection::vec(0.05f64..1.0, 12),
            q in prop::collection::vec(0.05f64..1.0, 4),
            hv in prop::collection::vec(-2.0f64..2.0, 12),
            c in -3.0f64..3.0, k in -5.0f64..5.0, gamma in 0.2f64..4.0,
        ) {
            let m = random_model(4, 3, &w, &q);
            let h = PayoffSurface::new(m.axis_x().clone(), m.axis_y().clone(), hv).unwrap();
            let u = Utility::exponential(gamma).unwrap();
            let (f0, r0) = solve_exponential_single(&m, &h, BudgetSpec::new(c).unwrap(), &u).unwrap();
            let (f1, _) = solve_exponential_single(&m, &h, BudgetSpec::new(c + k).unwrap(), &u).unwrap();
            prop_assert!(f1.sup_distance(&f0.shifted(k)) < 1e-12);
            prop_assert!((r0.budget_used - c).abs() < 1e-8);
        }

        #[test]
        fn optimum_beats_feasible_candidates(
            w in prop::collection::vec(0.05f64..1.0, 9),
            q in prop::collection::vec(0.05f64..1.0, 3),
            hv in prop::collection::vec(0.0f64..2.0, 9),
            z in prop::collection::vec(-1.0f64..1.0, 3),
            kind in 0usize..3,
        ) {
            let m = random_model(3, 3, &w, &q);
            let h = PayoffSurface::new(m.axis_x().clone(), m.axis_y().clone(), hv).unwrap();
            let c = 3.0;
            let b = BudgetSpec::new(c).unwrap();
            let (u, (f, r)) = match kind {
                0 => { let u = Utility::exponential(1.5).unwrap(); (u, solve_exponential_single(&m, &h, b, &u).unwrap()) }
                1 => { let u = Utility::power(2.0).unwrap(); (u, solve_power_single(&m, &h, b, &u).unwrap()) }
                _ => { let u = Utility::quadratic(1.0).unwrap(); (u, solve_quadratic_single(&m, &h, b, &u).unwrap()) }
            };
            // candidate: optimum plus a perturbation with zero risk-neutral cost
            let mean_z = m.pt_x().expectation(&z);
            let cand: Vec<f64> = f.values().iter().zip(&z).map(|(v, d)| v + 0.3 * (d - mean_z)).collect();
            let cand = HedgeCurve::new(f.axis().clone(), cand).unwrap();
            if let Ok(eu) = expected_utility_single(&m, &h, &cand, &u) {
                prop_assert!(r.expected_utility >= eu - 1e-12);
            }
            prop_assert!(r.foc_residual_sup <= 1e-8);
        }
    }
}
