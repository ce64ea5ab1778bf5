mod common;

use common::{random_model, random_surface};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statichedge::indifference::{price_exponential, verify_indifference};
use statichedge::market_model::GridAxis;
use statichedge::payoff::{HedgeCurve, PayoffSurface};
use statichedge::replication::{decompose, reconstruct};
use statichedge::single_hedge::{solve_exponential_single, BudgetSpec};
use statichedge::utility::Utility;

fn round_trip_error(f: fn(f64) -> f64, n: usize) -> f64 {
    let axis = GridAxis::uniform(0.0, 3.0 / (n - 1) as f64, n).unwrap();
    let curve = HedgeCurve::from_fn(&axis, f).unwrap();
    let port = decompose(&curve, 1.5).unwrap();
    (0..=4000)
        .map(|k| 0.05 + 2.9 * k as f64 / 4000.0)
        .map(|t| (reconstruct(&port, t) - f(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn round_trip_is_second_order() {
    let curves: [fn(f64) -> f64; 3] = [|x| x.sin() + 0.3 * x * x, |x| (-x).exp(), |x| (1.0 + x * x).ln()];
    for f in curves {
        let errs: Vec<f64> = [41, 81, 161, 321].iter().map(|&n| round_trip_error(f, n)).collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }
}

/// Price of a claim from the solver alone: under exponential utility the
/// certainty equivalent moves one-for-one with the budget.
fn price_from_solver(m: &statichedge::market_model::MarketModel, h: &PayoffSurface, gamma: f64, nu: f64, c: f64) -> f64 {
    let u = Utility::exponential(gamma).unwrap();
    let b = BudgetSpec::new(c).unwrap();
    let zero = PayoffSurface::zeros(m.axis_x(), m.axis_y());
    let (_, with) = solve_exponential_single(m, &h.scaled(-nu), b, &u).unwrap();
    let (_, without) = solve_exponential_single(m, &zero, b, &u).unwrap();
    let ce = |eu: f64| u.certainty_equivalent(eu).unwrap();
    (ce(with.expected_utility) - ce(without.expected_utility)) / nu
}

#[test]
fn quotes_satisfy_the_defining_equation() {
    let mut rng = StdRng::seed_from_u64(41);
    for _ in 0..20 {
        let (nx, ny) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let m = random_model(&mut rng, nx, ny);
        let h = random_surface(&mut rng, &m, 1.0);
        let gamma = rng.random_range(0.2..3.0);
        let nu = if rng.random_bool(0.5) { rng.random_range(0.2..3.0) } else { -rng.random_range(0.2..3.0) };
        let q = price_exponential(&m, &h, gamma, nu).unwrap();
        let c = rng.random_range(-2.0..2.0);
        assert!(verify_indifference(&m, &h, gamma, nu, q.price, c).unwrap() < 1e-8);
        let by_solver: Vec<f64> = [-3.0, 0.0, 4.5].iter().map(|&c| price_from_solver(&m, &h, gamma, nu, c)).collect();
        for p in &by_solver {
            assert!((p - by_solver[0]).abs() < 1e-10);
            assert!((p - q.price).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn selling_costs_more_than_buying_pays(seed in any::<u64>(), gamma in 0.2f64..3.0, nu in 0.2f64..3.0) {
        // the seller's ask is at least the buyer's bid
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_model(&mut rng, 4, 4);
        let h = random_surface(&mut rng, &m, 1.0);
        let bid = price_exponential(&m, &h, gamma, nu).unwrap().price;
        let ask = price_exponential(&m, &h, gamma, -nu).unwrap().price;
        prop_assert!(ask >= bid - 1e-12);
    }
}
