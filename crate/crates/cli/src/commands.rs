use std::path::Path;

use statichedge::basket_hedge::{
    iterate_exponential_basket_with, solve_quadratic_basket, BasketOptions, SurplusTo, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use statichedge::indifference::{price_exponential, verify_indifference};
use statichedge::io::{self, fmt_num};
use statichedge::market_model::{
    discretize_bivariate_normal, implied_density_from_calls, letf_model, BivariateNormalSpec, GridAxis, LetfMixtureSpec,
    MarketModel,
};
use statichedge::payoff::{basket_call, letf_linear, product_call, PayoffSurface};
use statichedge::replication::{decompose, default_kappa};
use statichedge::single_hedge::{
    solve_exponential_single, solve_power_single, solve_quadratic_single, BudgetSpec, SolveReport,
};
use statichedge::utility::Utility;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    HedgeSingle,
    HedgeBasket,
    Replicate,
    IndiffPrice,
    Discretize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::HedgeSingle => "hedge-single",
            Command::HedgeBasket => "hedge-basket",
            Command::Replicate => "replicate",
            Command::IndiffPrice => "indiff-price",
            Command::Discretize => "discretize",
        }
    }
}

/// Files to write, manifest entries and whether the solver converged.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<(String, String)>,
    pub converged: bool,
}

impl Outcome {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.note(key, fmt_num(value));
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> statichedge::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }
}

pub fn run(cmd: Command, cfg: &Config) -> Result<Outcome, CliError> {
    match cmd {
        Command::HedgeSingle => hedge_single(cfg),
        Command::HedgeBasket => hedge_basket(cfg),
        Command::Replicate => replicate(cfg),
        Command::IndiffPrice => indiff_price(cfg),
        Command::Discretize => discretize(cfg),
    }
}

fn with_path<T>(path: &Path, r: statichedge::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn uniform_axis(cfg: &Config, prefix: &str) -> Result<GridAxis, CliError> {
    let start = cfg.finite(&format!("{prefix}_start"))?;
    let step = cfg.finite(&format!("{prefix}_step"))?;
    let count: usize = cfg.get(&format!("{prefix}_count"))?;
    Ok(GridAxis::uniform(start, step, count)?)
}

struct Model {
    market: MarketModel,
    letf: Option<LetfMixtureSpec>,
}

fn letf_spec(cfg: &Config) -> Result<LetfMixtureSpec, CliError> {
    Ok(LetfMixtureSpec::new(
        cfg.finite("model.lambda_p")?,
        cfg.finite("model.nu_q")?,
        cfg.finite("model.mu")?,
        cfg.finite("model.horizon")?,
        cfg.finite("model.beta")?,
    )?)
}

fn normal_spec(cfg: &Config) -> Result<BivariateNormalSpec, CliError> {
    Ok(BivariateNormalSpec::from_correlation(
        [cfg.finite("model.mu_x")?, cfg.finite("model.mu_y")?],
        cfg.finite("model.sd_x")?,
        cfg.finite("model.sd_y")?,
        cfg.finite("model.rho")?,
    )?)
}

/// Exactly one source: keys belonging to another source are rejected.
fn reject_foreign_model_keys(cfg: &Config) -> Result<(), CliError> {
    let unused = cfg.unused("model.");
    if unused.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!("keys not used by this model source: {}", unused.join(", "))))
    }
}

fn build_model(cfg: &Config) -> Result<Model, CliError> {
    let source = cfg.str("model.source")?;
    let model = match source.as_str() {
        "grid" => {
            let path = cfg.path("model.joint")?;
            let joint = with_path(&path, io::read_joint_path(&path))?;
            match (cfg.has("model.pt_x"), cfg.has("model.pt_y")) {
                (false, false) => Model { market: MarketModel::with_subjective_pricing(joint)?, letf: None },
                (true, true) => {
                    let px = cfg.path("model.pt_x")?;
                    let py = cfg.path("model.pt_y")?;
                    let mx = with_path(&px, io::read_marginal_path(&px))?;
                    let my = with_path(&py, io::read_marginal_path(&py))?;
                    Model { market: MarketModel::new(joint, mx, my)?, letf: None }
                }
                _ => return Err(CliError::Input("model.pt_x and model.pt_y must be given together".into())),
            }
        }
        "bivariate-normal" => {
            let spec = normal_spec(cfg)?;
            let joint = discretize_bivariate_normal(&spec, cfg.finite("model.half_width")?, cfg.finite("model.step")?)?;
            Model { market: MarketModel::with_subjective_pricing(joint)?, letf: None }
        }
        "letf" => {
            let spec = letf_spec(cfg)?;
            let ax = uniform_axis(cfg, "model.x")?;
            let ay = uniform_axis(cfg, "model.y")?;
            Model { market: letf_model(&spec, &ax, &ay)?, letf: Some(spec) }
        }
        "calls" => return Err(CliError::Input("model.source = calls gives a single marginal; only discretize accepts it".into())),
        other => {
            return Err(CliError::Input(format!(
                "unknown model.source {other:?}; expected grid, bivariate-normal, letf or calls"
            )))
        }
    };
    reject_foreign_model_keys(cfg)?;
    Ok(model)
}

fn build_payoff(cfg: &Config, model: &Model) -> Result<PayoffSurface, CliError> {
    let (ax, ay) = (model.market.axis_x(), model.market.axis_y());
    let kind = cfg.str("payoff.kind")?;
    Ok(match kind.as_str() {
        "basket-call" => basket_call(ax, ay)?,
        "product-call" => product_call(ax, ay)?,
        "letf-linear" => {
            let spec = model
                .letf
                .as_ref()
                .ok_or_else(|| CliError::Input("payoff.kind = letf-linear needs model.source = letf".into()))?;
            letf_linear(spec, ax, ay)?
        }
        "file" => {
            let path = cfg.path("payoff.path")?;
            let h = with_path(&path, io::read_payoff_path(&path))?;
            if !h.axis_x().matches(ax) || !h.axis_y().matches(ay) {
                return Err(CliError::Input(format!("{}: payoff grid differs from the model grid", path.display())));
            }
            h
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown payoff.kind {other:?}; expected letf-linear, basket-call, product-call or file"
            )))
        }
    })
}

fn utility(cfg: &Config) -> Result<Utility, CliError> {
    let kind = cfg.str("utility.kind")?;
    if matches!(kind.as_str(), "logarithmic" | "log") {
        return Ok(Utility::from_kind(&kind, 1.0)?);
    }
    Ok(Utility::from_kind(&kind, cfg.finite("utility.gamma")?)?)
}

fn report_notes(out: &mut Outcome, rep: &SolveReport) {
    out.num("lambda_star", rep.lambda_star);
    out.num("budget_used", rep.budget_used);
    out.num("foc_residual_sup", rep.foc_residual_sup);
    out.num("expected_utility", rep.expected_utility);
    out.note("iterations", rep.iterations);
}

fn hedge_single(cfg: &Config) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let h = build_payoff(cfg, &model)?;
    let u = utility(cfg)?;
    let budget = BudgetSpec::new(cfg.finite("budget.c")?)?;
    let m = &model.market;
    let (f, rep) = match u {
        Utility::Exponential { .. } => solve_exponential_single(m, &h, budget, &u)?,
        Utility::Quadratic { .. } => solve_quadratic_single(m, &h, budget, &u)?,
        Utility::Power { .. } | Utility::Logarithmic => solve_power_single(m, &h, budget, &u)?,
    };
    let mut out = Outcome { converged: rep.converged, ..Outcome::default() };
    report_notes(&mut out, &rep);
    if let Ok(ce) = u.certainty_equivalent(rep.expected_utility) {
        out.num("certainty_equivalent", ce);
    }
    let comments = out.summary.clone();
    out.file("f.csv", |w| io::write_curve(w, ["x", "f"], &f, &comments))?;
    Ok(out)
}

fn hedge_basket(cfg: &Config) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let h = build_payoff(cfg, &model)?;
    let u = utility(cfg)?;
    let budget = BudgetSpec::new(cfg.finite("budget.c")?)?;
    let tol = cfg.get_or("solver.tol", DEFAULT_TOL)?;
    let max_iter = cfg.get_or("solver.max_iter", DEFAULT_MAX_ITER)?;
    let m = &model.market;
    let mut out = Outcome::default();
    let pair = match u {
        Utility::Exponential { gamma } => {
            let surplus: SurplusTo = cfg.str_or("solver.surplus_to", "split").parse()?;
            let opts = BasketOptions { tol, max_iter, surplus_to: surplus, initial: None };
            let (pair, rep) = iterate_exponential_basket_with(m, &h, budget, gamma, &opts)?;
            out.converged = rep.converged;
            out.note("iterations", rep.iterations);
            out.num("final_residual", rep.final_residual());
            out.num("expected_utility", *rep.expected_utilities.last().unwrap_or(&f64::NAN));
            out.num("certainty_equivalent", *rep.certainty_equivalents.last().unwrap_or(&f64::NAN));
            out.note("support_condition_met", rep.support_condition_met);
            out.num("internal_budget", rep.internal_budget);
            out.file("trace.csv", |w| io::write_trace(w, &rep))?;
            pair
        }
        Utility::Quadratic { gamma } => {
            let (pair, rep) = solve_quadratic_basket(m, &h, budget, gamma, tol, max_iter)?;
            out.converged = rep.converged;
            report_notes(&mut out, &rep);
            pair
        }
        other => {
            return Err(CliError::Input(format!(
                "hedge-basket supports exponential and quadratic utility, got {}",
                other.kind()
            )))
        }
    };
    // f + g is unchanged by moving cash between the legs
    let pair = match cfg.opt::<f64>("solver.split_f")? {
        Some(split_f) => pair.regauge(m, split_f),
        None => pair,
    };
    out.num("split_f", pair.split_f);
    out.num("split_g", pair.split_g);
    out.file("f.csv", |w| io::write_curve(w, ["x", "f"], &pair.f, &[]))?;
    out.file("g.csv", |w| io::write_curve(w, ["y", "g"], &pair.g, &[]))?;
    Ok(out)
}

fn indiff_price(cfg: &Config) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let h = build_payoff(cfg, &model)?;
    let Utility::Exponential { gamma } = utility(cfg)? else {
        return Err(CliError::Input("indiff-price needs utility.kind = exponential".into()));
    };
    let nu = cfg.finite("indiff.nu")?;
    let c = cfg.get_or("budget.c", 0.0)?;
    let quote = price_exponential(&model.market, &h, gamma, nu)?;
    let gap = verify_indifference(&model.market, &h, gamma, nu, quote.price, c)?;
    let mut out = Outcome { converged: true, ..Outcome::default() };
    out.num("price", quote.price);
    out.num("verification_gap", gap);
    out.file("quote.csv", |w| io::write_quote(w, &quote, gap))?;
    Ok(out)
}

fn replicate(cfg: &Config) -> Result<Outcome, CliError> {
    let path = cfg.path("replicate.curve")?;
    let header = cfg.str_or("replicate.header", "x,f");
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let [xcol, vcol] = cols[..] else {
        return Err(CliError::Input(format!("replicate.header must name two columns, got {header:?}")));
    };
    let curve = with_path(&path, io::read_curve_path(&path, [xcol, vcol]))?;
    let kappa = match cfg.opt::<f64>("replicate.kappa")? {
        Some(k) => k,
        None => {
            if !cfg.has("model.source") {
                return Err(CliError::Input("replicate needs replicate.kappa or a model to take it from".into()));
            }
            let model = build_model(cfg)?;
            let pt = if xcol == "y" { model.market.pt_y() } else { model.market.pt_x() };
            default_kappa(pt)
        }
    };
    let port = decompose(&curve, kappa)?;
    let mut out = Outcome { converged: true, ..Outcome::default() };
    out.num("kappa", port.kappa);
    out.num("cash", port.cash);
    out.num("forward_units", port.forward_units);
    out.num("total_option_notional", port.total_option_notional());
    out.note("one_sided_endpoints", port.one_sided_endpoints);
    out.file("portfolio.csv", |w| io::write_portfolio(w, &port))?;
    Ok(out)
}

fn discretize(cfg: &Config) -> Result<Outcome, CliError> {
    let mut out = Outcome { converged: true, ..Outcome::default() };
    if cfg.str("model.source")? == "calls" {
        let path = cfg.path("model.calls")?;
        reject_foreign_model_keys(cfg)?;
        let (strikes, prices) = with_path(&path, io::read_calls_path(&path))?;
        let d = implied_density_from_calls(&strikes, &prices)?;
        out.num("raw_mass", d.raw_mass);
        out.num("clipped_fraction", d.clipped_fraction);
        out.note("non_convex_warning", d.non_convex_warning);
        out.file("density.csv", |w| io::write_marginal(w, &d.density))?;
        return Ok(out);
    }
    let model = build_model(cfg)?;
    let m = &model.market;
    out.num("truncated_mass", m.joint().truncated_mass());
    out.file("joint.csv", |w| io::write_joint(w, m.joint()))?;
    out.file("pt_x.csv", |w| io::write_marginal(w, m.pt_x()))?;
    out.file("pt_y.csv", |w| io::write_marginal(w, m.pt_y()))?;
    Ok(out)
}
