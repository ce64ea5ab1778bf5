//! Joint hedges `f(X) + g(Y)` of a claim `h(X, Y)` when options on both
//! coordinates trade.
//!
//! For exponential utility the optimum is the limit of the entropic map
//! `𝓗 = 𝓗ʸ ∘ 𝓗ˣ` applied to `h − c`; each half step solves a single-asset
//! problem in closed form. For mean-variance utility the two first-order
//! conditions are iterated Gauss–Seidel style.
//!
//! Results depend on γ only, so the normalization of the exponential utility
//! (`−e^{−γx}` or `−e^{−γx}/γ`) does not matter.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{HedgeError, Result};
use crate::market_model::MarketModel;
use crate::numerics::log_weighted_sum_exp;
use crate::payoff::{HedgeCurve, PayoffSurface};
use crate::single_hedge::{log_partition_x, BudgetSpec, SolveReport};

/// Iterates of the entropic map share the payoff representation.
pub type StateSurface = PayoffSurface;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative tolerance on `Ẽ ξ = 0` accepted by [`h_operator`].
pub const CENTRED_TOL: f64 = 1e-8;

/// Who receives the budget left over after the scheme's internal
/// normalization `c = Ẽh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurplusTo {
    F,
    G,
    #[default]
    Split,
}

impl FromStr for SurplusTo {
    type Err = HedgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" => Ok(SurplusTo::F),
            "g" => Ok(SurplusTo::G),
            "split" => Ok(SurplusTo::Split),
            other => Err(HedgeError::InvalidSpec(format!("surplus target must be f, g or split, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPair {
    pub f: HedgeCurve,
    pub g: HedgeCurve,
    pub split_f: f64,
    pub split_g: f64,
}

impl AllocationPair {
    /// Moves cash between the legs, `(f + k, g − k)`, so that `Ẽf = split_f`.
    /// The hedge `f + g` is unchanged.
    pub fn regauge(&self, model: &MarketModel, split_f: f64) -> Self {
        let total = self.split_f + self.split_g;
        let k = split_f - model.pt_x().expectation(self.f.values());
        Self { f: self.f.shifted(k), g: self.g.shifted(-k), split_f, split_g: total - split_f }
    }

    /// `f(x) + g(y)` on the grid.
    pub fn sum_surface(&self) -> PayoffSurface {
        PayoffSurface::separable(&self.f, &self.g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iterations: usize,
    /// ℙ-weighted ℓ² distance between consecutive iterates, one entry per
    /// application of 𝓗.
    pub l2_residuals: Vec<f64>,
    /// `E U(−ξⁿ)` with `U = −e^{−γx}/γ`, starting with the initial iterate.
    /// May underflow to `-inf` for large payoffs.
    pub expected_utilities: Vec<f64>,
    /// Certainty equivalents of `expected_utilities`, computed in log space.
    pub certainty_equivalents: Vec<f64>,
    pub converged: bool,
    pub support_condition_met: bool,
    /// `Ẽh` under the product coupling, the budget the scheme runs at.
    pub internal_budget: f64,
}

impl IterationReport {
    pub fn final_residual(&self) -> f64 {
        self.l2_residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Nondecreasing certainty equivalents up to `tol · max(1, |CE|)`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.certainty_equivalents.windows(2).all(|w| w[1] >= w[0] - tol * w[0].abs().max(1.0))
    }
}

#[derive(Debug, Clone)]
pub struct BasketOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub surplus_to: SurplusTo,
    /// Starting allocation; `None` starts from the constant split `Ẽh/2`.
    /// A supplied pair is shifted so that `Ẽf + Ẽg = Ẽh`.
    pub initial: Option<(HedgeCurve, HedgeCurve)>,
}

impl Default for BasketOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, surplus_to: SurplusTo::Split, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCheck {
    pub met: bool,
    /// `(i, j)` cells inside the product of marginal supports with no
    /// subjective mass.
    pub zero_cells: Vec<(usize, usize)>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HedgeError::InvalidSpec(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn require_shape(model: &MarketModel, xi: &StateSurface) -> Result<()> {
    xi.check_axes(model.axis_x(), model.axis_y())
}

/// `γ 𝓔ʸ ξ` on the y-support, `None` elsewhere.
fn log_partition_y(model: &MarketModel, values: &[f64], gamma: f64) -> Result<Vec<Option<f64>>> {
    let joint = model.joint();
    let (nx, ny) = (model.nx(), model.ny());
    let pt = model.pt_y().mass();
    (0..ny)
        .into_par_iter()
        .map(|j| {
            if pt[j] <= 0.0 {
                return Ok(None);
            }
            let mass: Vec<f64> = (0..nx).map(|i| joint.at(i, j)).collect();
            let exps: Vec<f64> = (0..nx).map(|i| gamma * values[i * ny + j]).collect();
            let lse = log_weighted_sum_exp(&mass, &exps);
            if lse == f64::NEG_INFINITY {
                return Err(HedgeError::Support(format!("no subjective mass at y-index {j} inside the pricing support")));
            }
            Ok(Some(lse - pt[j].ln()))
        })
        .collect()
}

/// Entropic values divided by γ, and their risk-neutral mean.
fn scaled_with_mean(logs: Vec<Option<f64>>, pt: &[f64], gamma: f64) -> (Vec<Option<f64>>, f64) {
    let vals: Vec<Option<f64>> = logs.into_iter().map(|l| l.map(|l| l / gamma)).collect();
    let mean = vals.iter().zip(pt).filter_map(|(v, w)| v.map(|v| w * v)).sum();
    (vals, mean)
}

/// `𝓔ˣξ − Ẽ𝓔ˣξ`, zero off the support.
fn centred(vals: &[Option<f64>], mean: f64) -> Vec<f64> {
    vals.iter().map(|v| v.map_or(0.0, |v| v - mean)).collect()
}

fn fill_curve(axis: &crate::market_model::GridAxis, vals: Vec<Option<f64>>, mean: f64) -> Result<HedgeCurve> {
    HedgeCurve::new(axis.clone(), vals.into_iter().map(|v| v.unwrap_or(mean)).collect())
}

/// `(𝓔ˣξ)(x) = (1/γ) log((1/p̃_X(x)) Σ_y p(x, y) e^{γξ(x, y)})`.
///
/// Defined on the risk-neutral support; other points receive the
/// risk-neutral mean of the defined values.
pub fn entropic_x(model: &MarketModel, xi: &StateSurface, gamma: f64) -> Result<HedgeCurve> {
    check_gamma(gamma)?;
    require_shape(model, xi)?;
    let (vals, mean) = scaled_with_mean(log_partition_x(model, xi.values(), gamma)?, model.pt_x().mass(), gamma);
    fill_curve(model.axis_x(), vals, mean)
}

/// `(𝓔ʸξ)(y) = (1/γ) log((1/p̃_Y(y)) Σ_x p(x, y) e^{γξ(x, y)})`.
pub fn entropic_y(model: &MarketModel, xi: &StateSurface, gamma: f64) -> Result<HedgeCurve> {
    check_gamma(gamma)?;
    require_shape(model, xi)?;
    let (vals, mean) = scaled_with_mean(log_partition_y(model, xi.values(), gamma)?, model.pt_y().mass(), gamma);
    fill_curve(model.axis_y(), vals, mean)
}

/// Subtracts the centred x-increment in place and returns it.
fn step_x(model: &MarketModel, xi: &mut [f64], gamma: f64) -> Result<Vec<f64>> {
    let (vals, mean) = scaled_with_mean(log_partition_x(model, xi, gamma)?, model.pt_x().mass(), gamma);
    let inc = centred(&vals, mean);
    let ny = model.ny();
    for (i, d) in inc.iter().enumerate() {
        xi[i * ny..(i + 1) * ny].iter_mut().for_each(|v| *v -= d);
    }
    Ok(inc)
}

fn step_y(model: &MarketModel, xi: &mut [f64], gamma: f64) -> Result<Vec<f64>> {
    let (vals, mean) = scaled_with_mean(log_partition_y(model, xi, gamma)?, model.pt_y().mass(), gamma);
    let inc = centred(&vals, mean);
    for row in xi.chunks_mut(model.ny()) {
        row.iter_mut().zip(&inc).for_each(|(v, d)| *v -= d);
    }
    Ok(inc)
}

fn check_centred(model: &MarketModel, xi: &StateSurface) -> Result<()> {
    let mean = model.product_expectation(xi.values());
    if mean.abs() > CENTRED_TOL * xi.sup_norm().max(1.0) {
        return Err(HedgeError::NotCentered { mean });
    }
    Ok(())
}

/// `𝓗ξ = 𝓗ʸ(𝓗ˣξ)` with `𝓗ˣξ = ξ − (𝓔ˣξ − Ẽ𝓔ˣξ)` and likewise for y.
///
/// `ξ` must have zero mean under the product of the risk-neutral marginals.
pub fn h_operator(model: &MarketModel, xi: &StateSurface, gamma: f64) -> Result<StateSurface> {
    check_gamma(gamma)?;
    require_shape(model, xi)?;
    check_centred(model, xi)?;
    let mut out = xi.clone();
    step_x(model, out.values_mut(), gamma)?;
    step_y(model, out.values_mut(), gamma)?;
    Ok(out)
}

/// Full-support check on the product of the marginal supports.
pub fn check_support_condition(model: &MarketModel) -> SupportCheck {
    let joint = model.joint();
    let mut zero_cells = Vec::new();
    for (i, &px) in model.p_x().iter().enumerate() {
        if px <= 0.0 {
            continue;
        }
        for (j, &py) in model.p_y().iter().enumerate() {
            if py > 0.0 && joint.at(i, j) <= 0.0 {
                zero_cells.push((i, j));
            }
        }
    }
    SupportCheck { met: zero_cells.is_empty(), zero_cells }
}

/// `log Σ p e^{γξ}`; the certainty equivalent of `−ξ` is minus this over γ.
fn log_moment(model: &MarketModel, xi: &[f64], gamma: f64) -> f64 {
    let exps: Vec<f64> = xi.iter().map(|v| gamma * v).collect();
    log_weighted_sum_exp(model.joint().mass(), &exps)
}

/// `E U(f + g − h)` with `U = −e^{−γx}/γ`.
pub fn expected_utility_basket(model: &MarketModel, h: &PayoffSurface, pair: &AllocationPair, gamma: f64) -> f64 {
    let ny = model.ny();
    let xi: Vec<f64> = h
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v - pair.f.values()[k / ny] - pair.g.values()[k % ny])
        .collect();
    -log_moment(model, &xi, gamma).exp() / gamma
}

/// Watches the allocation legs for sustained growth while the hedge sum
/// settles, which signals a joint law off the full-support condition.
#[derive(Debug, Clone)]
pub struct DivergenceMonitor {
    threshold: f64,
    streak: usize,
    last_sup: f64,
    streak_residual: f64,
}

impl DivergenceMonitor {
    /// Consecutive increases needed before reporting divergence.
    pub const STREAK: usize = 100;
    /// Growth beyond this multiple of `max(‖h‖∞, 1)` counts as unbounded.
    pub const FACTOR: f64 = 1e6;

    pub fn new(h_sup: f64) -> Self {
        Self { threshold: Self::FACTOR * h_sup.max(1.0), streak: 0, last_sup: 0.0, streak_residual: f64::INFINITY }
    }

    pub fn observe(&mut self, sup: f64, residual: f64) -> Result<()> {
        if sup > self.last_sup {
            if self.streak == 0 {
                self.streak_residual = residual;
            }
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.last_sup = sup;
        if self.streak >= Self::STREAK && sup > self.threshold && residual <= self.streak_residual {
            return Err(HedgeError::AllocationUnbounded { sup_norm: sup });
        }
        Ok(())
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exponential-utility basket hedge with default options apart from the
/// tolerance and the iteration cap.
pub fn iterate_exponential_basket(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(AllocationPair, IterationReport)> {
    let opts = BasketOptions { tol, max_iter, ..BasketOptions::default() };
    iterate_exponential_basket_with(model, h, budget, gamma, &opts)
}

/// Runs `ξ⁰ = h − f⁰ − g⁰`, `ξⁿ⁺¹ = 𝓗ξⁿ`, accumulating the increments of
/// each half step into `f` and `g` so that `f + g = h − ξⁿ` throughout.
///
/// The scheme runs at the budget `Ẽh`; the difference to `c` is added
/// afterwards according to `opts.surplus_to`, which is optimal under
/// exponential utility. The legs are reported with `Ẽf` equal to half the
/// internal budget plus their share of the surplus.
pub fn iterate_exponential_basket_with(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    gamma: f64,
    opts: &BasketOptions,
) -> Result<(AllocationPair, IterationReport)> {
    check_gamma(gamma)?;
    require_shape(model, h)?;
    if !(opts.tol > 0.0) {
        return Err(HedgeError::InvalidSpec(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let (nx, ny) = (model.nx(), model.ny());
    let (ptx, pty) = (model.pt_x(), model.pt_y());
    let c_int = model.product_expectation(h.values());

    let (mut f, mut g) = match &opts.initial {
        None => (vec![0.5 * c_int; nx], vec![0.5 * c_int; ny]),
        Some((f0, g0)) => {
            if !f0.axis().matches(model.axis_x()) || !g0.axis().matches(model.axis_y()) {
                return Err(HedgeError::ShapeMismatch("initial allocation axes differ from the model".into()));
            }
            let shift = c_int - ptx.expectation(f0.values()) - pty.expectation(g0.values());
            (f0.values().to_vec(), g0.values().iter().map(|v| v + shift).collect())
        }
    };
    let mut xi: Vec<f64> = h.values().iter().enumerate().map(|(k, v)| v - f[k / ny] - g[k % ny]).collect();

    let support = check_support_condition(model);
    let mut report = IterationReport {
        iterations: 0,
        l2_residuals: Vec::new(),
        expected_utilities: Vec::new(),
        certainty_equivalents: Vec::new(),
        converged: false,
        support_condition_met: support.met,
        internal_budget: c_int,
    };
    let record = |report: &mut IterationReport, xi: &[f64]| {
        let lm = log_moment(model, xi, gamma);
        report.certainty_equivalents.push(-lm / gamma);
        report.expected_utilities.push(-lm.exp() / gamma);
    };
    record(&mut report, &xi);

    let joint = model.joint();
    let mut monitor = DivergenceMonitor::new(h.sup_norm());
    for n in 1..=opts.max_iter {
        let dx = step_x(model, &mut xi, gamma)?;
        let dy = step_y(model, &mut xi, gamma)?;
        f.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        g.iter_mut().zip(&dy).for_each(|(a, d)| *a += d);

        let mut sq = 0.0;
        for (k, &p) in joint.mass().iter().enumerate() {
            if p > 0.0 {
                let d = dx[k / ny] + dy[k % ny];
                sq += p * d * d;
            }
        }
        let residual = sq.sqrt();
        report.iterations = n;
        report.l2_residuals.push(residual);
        record(&mut report, &xi);
        monitor.observe(sup(&f).max(sup(&g)), residual)?;
        if residual < opts.tol {
            report.converged = true;
            break;
        }
    }

    let surplus = budget.c - c_int;
    let (share_f, share_g) = match opts.surplus_to {
        SurplusTo::F => (surplus, 0.0),
        SurplusTo::G => (0.0, surplus),
        SurplusTo::Split => (0.5 * surplus, 0.5 * surplus),
    };
    let split_f = 0.5 * c_int + share_f;
    let split_g = 0.5 * c_int + share_g;
    let kf = split_f - ptx.expectation(&f);
    let kg = split_g - pty.expectation(&g);
    let pair = AllocationPair {
        f: HedgeCurve::new(model.axis_x().clone(), f.iter().map(|v| v + kf).collect())?,
        g: HedgeCurve::new(model.axis_y().clone(), g.iter().map(|v| v + kg).collect())?,
        split_f,
        split_g,
    };
    Ok((pair, report))
}

/// Mean-variance basket hedge for `U(x) = γx − x²/2`.
///
/// Sweeps `f ← E[h − g | X] + λ p̃_X/p_X + γ`, then
/// `g ← E[h − f | Y] + λ p̃_Y/p_Y + γ`, and recentres so that `Ẽf = Ẽg`.
/// The first pass uses λ = 0. If that optimum costs more than `c`, the
/// sweeps are repeated with λ recomputed each time from the budget
/// equation. After two increases of the step size the updates are
/// averaged with the previous iterate.
pub fn solve_quadratic_basket(
    model: &MarketModel,
    h: &PayoffSurface,
    budget: BudgetSpec,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(AllocationPair, SolveReport)> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(HedgeError::InvalidSpec(format!("gamma must be nonnegative, got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(HedgeError::InvalidSpec(format!("tolerance must be positive, got {tol}")));
    }
    require_shape(model, h)?;
    let q = QuadraticBasket::new(model, h, gamma)?;

    let (mut f, mut g) = (vec![0.0; model.nx()], vec![0.0; model.ny()]);
    let (mut iterations, mut converged) = q.sweeps(&mut f, &mut g, None, tol, max_iter);
    let mut lambda = 0.0;
    let spent = q.ptx_mean(&f) + q.pty_mean(&g);
    if spent > budget.c {
        let (it, conv) = q.sweeps(&mut f, &mut g, Some(budget.c), tol, max_iter);
        iterations += it;
        converged = conv;
        lambda = q.budget_lambda(&f, &g, budget.c);
    }

    let split = 0.5 * (q.ptx_mean(&f) + q.pty_mean(&g));
    let pair = AllocationPair {
        f: HedgeCurve::new(model.axis_x().clone(), f)?,
        g: HedgeCurve::new(model.axis_y().clone(), g)?,
        split_f: split,
        split_g: split,
    };
    let report = SolveReport {
        lambda_star: lambda,
        budget_used: 2.0 * split,
        foc_residual_sup: q.foc_residual(&pair.f, &pair.g, lambda),
        expected_utility: q.expected_utility(&pair.f, &pair.g),
        iterations,
        converged,
    };
    Ok((pair, report))
}

struct QuadraticBasket<'a> {
    model: &'a MarketModel,
    h: &'a PayoffSurface,
    gamma: f64,
    ratio_x: Vec<f64>,
    ratio_y: Vec<f64>,
    /// `Ẽ(p̃_X/p_X) + Ẽ(p̃_Y/p_Y)`.
    ratio_total: f64,
}

impl<'a> QuadraticBasket<'a> {
    fn new(model: &'a MarketModel, h: &'a PayoffSurface, gamma: f64) -> Result<Self> {
        let ratio = |p: &[f64], pt: &[f64], name: &str| -> Result<Vec<f64>> {
            p.iter()
                .zip(pt)
                .enumerate()
                .map(|(k, (a, b))| {
                    if *b > 0.0 && *a <= 0.0 {
                        return Err(HedgeError::EquivalenceViolation(format!(
                            "subjective {name}-marginal vanishes at index {k}"
                        )));
                    }
                    Ok(if *b > 0.0 { b / a } else { 0.0 })
                })
                .collect()
        };
        let ratio_x = ratio(model.p_x(), model.pt_x().mass(), "x")?;
        let ratio_y = ratio(model.p_y(), model.pt_y().mass(), "y")?;
        let ratio_total = model.pt_x().expectation(&ratio_x) + model.pt_y().expectation(&ratio_y);
        Ok(Self { model, h, gamma, ratio_x, ratio_y, ratio_total })
    }

    fn ptx_mean(&self, f: &[f64]) -> f64 {
        self.model.pt_x().expectation(f)
    }

    fn pty_mean(&self, g: &[f64]) -> f64 {
        self.model.pt_y().expectation(g)
    }

    /// `E[h − g | X]`.
    fn cond_x(&self, g: &[f64]) -> Vec<f64> {
        let joint = self.model.joint();
        let px = self.model.p_x();
        (0..self.model.nx())
            .map(|i| {
                if px[i] <= 0.0 {
                    return 0.0;
                }
                let s: f64 =
                    joint.row(i).iter().zip(self.h.row(i)).zip(g).map(|((p, hv), gv)| p * (hv - gv)).sum();
                s / px[i]
            })
            .collect()
    }

    /// `E[h − f | Y]`.
    fn cond_y(&self, f: &[f64]) -> Vec<f64> {
        let joint = self.model.joint();
        let py = self.model.p_y();
        let mut acc = vec![0.0; self.model.ny()];
        for (i, fv) in f.iter().enumerate() {
            for (j, (p, hv)) in joint.row(i).iter().zip(self.h.row(i)).enumerate() {
                acc[j] += p * (hv - fv);
            }
        }
        acc.iter().zip(py).map(|(a, p)| if *p > 0.0 { a / p } else { 0.0 }).collect()
    }

    /// λ that makes the next sweep spend exactly `c`.
    fn budget_lambda(&self, f: &[f64], g: &[f64], c: f64) -> f64 {
        let a = self.ptx_mean(&self.cond_x(g));
        let b = self.pty_mean(&self.cond_y(f));
        (c - 2.0 * self.gamma - a - b) / self.ratio_total
    }

    /// Runs sweeps in place; returns the sweep count and convergence flag.
    fn sweeps(&self, f: &mut Vec<f64>, g: &mut Vec<f64>, budget: Option<f64>, tol: f64, max_iter: usize) -> (usize, bool) {
        let px = self.model.p_x();
        let py = self.model.p_y();
        let mut last_change = f64::INFINITY;
        let mut rises = 0;
        for n in 1..=max_iter {
            let lambda = budget.map_or(0.0, |c| self.budget_lambda(f, g, c));
            let a = self.cond_x(g);
            let mut f_new: Vec<f64> =
                a.iter().zip(&self.ratio_x).map(|(a, r)| a + lambda * r + self.gamma).collect();
            if rises >= 2 {
                f_new.iter_mut().zip(f.iter()).for_each(|(n, o)| *n = 0.5 * (*n + o));
            }
            let b = self.cond_y(&f_new);
            let mut g_new: Vec<f64> =
                b.iter().zip(&self.ratio_y).map(|(b, r)| b + lambda * r + self.gamma).collect();
            if rises >= 2 {
                g_new.iter_mut().zip(g.iter()).for_each(|(n, o)| *n = 0.5 * (*n + o));
            }
            let k = 0.5 * (self.pty_mean(&g_new) - self.ptx_mean(&f_new));
            f_new.iter_mut().for_each(|v| *v += k);
            g_new.iter_mut().for_each(|v| *v -= k);

            let dx: f64 = f_new.iter().zip(f.iter()).zip(px).map(|((a, b), p)| p * (a - b) * (a - b)).sum();
            let dy: f64 = g_new.iter().zip(g.iter()).zip(py).map(|((a, b), p)| p * (a - b) * (a - b)).sum();
            let change = (dx + dy).sqrt();
            *f = f_new;
            *g = g_new;
            if change < tol {
                return (n, true);
            }
            if change > last_change {
                rises += 1;
            }
            last_change = change;
        }
        (max_iter, false)
    }

    /// Largest scaled violation of either first-order condition.
    fn foc_residual(&self, f: &HedgeCurve, g: &HedgeCurve, lambda: f64) -> f64 {
        let (f, g) = (f.values(), g.values());
        let a = self.cond_x(g);
        let b = self.cond_y(f);
        let px = self.model.p_x();
        let py = self.model.p_y();
        let ptx = self.model.pt_x().mass();
        let pty = self.model.pt_y().mass();
        let rx = (0..f.len()).map(|i| (px[i] * (self.gamma - f[i] + a[i]) + lambda * ptx[i]).abs());
        let ry = (0..g.len()).map(|j| (py[j] * (self.gamma - g[j] + b[j]) + lambda * pty[j]).abs());
        rx.chain(ry).fold(0.0, f64::max) / lambda.abs().max(1.0)
    }

    fn expected_utility(&self, f: &HedgeCurve, g: &HedgeCurve) -> f64 {
        let ny = self.model.ny();
        let mut total = 0.0;
        for (k, (&p, &hv)) in self.model.joint().mass().iter().zip(self.h.values()).enumerate() {
            if p > 0.0 {
                let z = f.values()[k / ny] + g.values()[k % ny] - hv;
                total += p * (self.gamma * z - 0.5 * z * z);
            }
        }
        total
    }
}
