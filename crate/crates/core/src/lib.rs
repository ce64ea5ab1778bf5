//! Utility-optimal static hedging of two-asset claims with vanilla options.
//!
//! A claim `h(X, Y)` on two terminal log-prices is hedged with payoffs
//! `f(X)` (and `g(Y)`) bought at risk-neutral prices under a budget. The
//! crate provides closed-form and iterative optimizers, mean-variance
//! variants, call/put strip replication of the resulting curves and
//! exponential-utility indifference prices.
//!
//! ```
//! use statichedge::market_model::{GridAxis, JointDensityGrid, MarketModel};
//! use statichedge::payoff::product_call;
//! use statichedge::basket_hedge::iterate_exponential_basket;
//! use statichedge::single_hedge::BudgetSpec;
//!
//! let ax = GridAxis::new(vec![1.0, 2.0]).unwrap();
//! let ay = GridAxis::new(vec![1.0, 4.0]).unwrap();
//! let joint = JointDensityGrid::new(ax.clone(), ay.clone(), vec![0.2, 0.5, 0.3, 0.0]).unwrap();
//! let model = MarketModel::with_subjective_pricing(joint).unwrap();
//! let h = product_call(&ax, &ay).unwrap();
//! let (pair, report) =
//!     iterate_exponential_basket(&model, &h, BudgetSpec::new(1.8).unwrap(), 1.0, 1e-10, 100).unwrap();
//! assert!(report.converged);
//! assert!((pair.f.values()[0] + pair.g.values()[1] - 3.0).abs() < 1e-8);
//! ```

// `!(a > b)` is used on purpose so that NaN lands on the error path
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basket_hedge;
pub mod error;
pub mod indifference;
pub mod io;
pub mod market_model;
pub mod numerics;
pub mod payoff;
pub mod replication;
pub mod single_hedge;
pub mod utility;

pub use error::{HedgeError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
