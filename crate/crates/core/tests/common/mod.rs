//! Reference implementations used as oracles by the integration tests.
//!
//! Nothing here calls into the solvers: the optimizers are plain Newton
//! iterations on the KKT system of the discretized problem, and the
//! transform and density checks use their own quadrature.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;
use statichedge::market_model::{
    letf_joint_under, letf_model, GridAxis, JointDensityGrid, LetfMixtureSpec, MarginalDensity, MarketModel, Measure,
};
use statichedge::payoff::{letf_linear, PayoffSurface};

#[derive(Debug, Clone, Copy)]
pub enum Util {
    Exp(f64),
    /// γ = 1 is the logarithm.
    Power(f64),
    Quad(f64),
}

impl Util {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Util::Exp(g) => -(-g * x).exp() / g,
            Util::Power(1.0) => x.ln(),
            Util::Power(g) => x.powf(1.0 - g) / (1.0 - g),
            Util::Quad(g) => g * x - 0.5 * x * x,
        }
    }

    fn d1(&self, x: f64) -> f64 {
        match *self {
            Util::Exp(g) => (-g * x).exp(),
            Util::Power(g) => x.powf(-g),
            Util::Quad(g) => g - x,
        }
    }

    fn d2(&self, x: f64) -> f64 {
        match *self {
            Util::Exp(g) => -g * (-g * x).exp(),
            Util::Power(g) => -g * x.powf(-g - 1.0),
            Util::Quad(_) => -1.0,
        }
    }

    fn admissible(&self, x: f64) -> bool {
        match self {
            Util::Power(_) => x > 0.0,
            _ => x.is_finite(),
        }
    }
}

/// `max Σ_k p_k U((A v)_k − h_k)` subject to `a·v = c` (or `≤ c` for the
/// quadratic case), with `A` a 0/1 design matrix.
pub struct Problem {
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub design: DMatrix<f64>,
    pub price: DVector<f64>,
    pub c: f64,
    /// Number of f unknowns; any further unknowns belong to g.
    pub nx: usize,
}

pub struct Optimum {
    pub v: DVector<f64>,
    pub lambda: f64,
    pub objective: f64,
}

impl Problem {
    /// One unknown per x-point.
    pub fn single(model: &MarketModel, h: &PayoffSurface, c: f64) -> Self {
        let (nx, ny) = (model.nx(), model.ny());
        let mut design = DMatrix::zeros(nx * ny, nx);
        for i in 0..nx {
            for j in 0..ny {
                design[(i * ny + j, i)] = 1.0;
            }
        }
        Self {
            p: model.joint().mass().to_vec(),
            h: h.values().to_vec(),
            design,
            price: DVector::from_column_slice(model.pt_x().mass()),
            c,
            nx,
        }
    }

    /// Unknowns `f_0..f_{nx−1}, g_1..g_{ny−1}` with `g_0 = 0` fixing the gauge.
    pub fn basket(model: &MarketModel, h: &PayoffSurface, c: f64) -> Self {
        let (nx, ny) = (model.nx(), model.ny());
        let nv = nx + ny - 1;
        let mut design = DMatrix::zeros(nx * ny, nv);
        for i in 0..nx {
            for j in 0..ny {
                design[(i * ny + j, i)] = 1.0;
                if j > 0 {
                    design[(i * ny + j, nx + j - 1)] = 1.0;
                }
            }
        }
        let mut price = DVector::zeros(nv);
        price.rows_mut(0, nx).copy_from_slice(model.pt_x().mass());
        price.rows_mut(nx, ny - 1).copy_from_slice(&model.pt_y().mass()[1..]);
        Self { p: model.joint().mass().to_vec(), h: h.values().to_vec(), design, price, c, nx }
    }

    pub fn hedge(&self, v: &DVector<f64>) -> Vec<f64> {
        (&self.design * v).iter().copied().collect()
    }

    fn objective(&self, u: Util, v: &DVector<f64>) -> Option<f64> {
        let hedge = &self.design * v;
        let mut total = 0.0;
        for k in 0..self.p.len() {
            if self.p[k] > 0.0 {
                let x = hedge[k] - self.h[k];
                if !u.admissible(x) {
                    return None;
                }
                total += self.p[k] * u.value(x);
            }
        }
        Some(total)
    }

    fn derivatives(&self, u: Util, v: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let hedge = &self.design * v;
        let n = self.p.len();
        let mut w1 = DVector::zeros(n);
        let mut w2 = DVector::zeros(n);
        for k in 0..n {
            if self.p[k] > 0.0 {
                let x = hedge[k] - self.h[k];
                w1[k] = self.p[k] * u.d1(x);
                w2[k] = self.p[k] * u.d2(x);
            }
        }
        let grad = self.design.transpose() * w1;
        let scaled = DMatrix::from_fn(n, self.design.ncols(), |r, col| w2[r] * self.design[(r, col)]);
        (grad, self.design.transpose() * scaled)
    }

    /// Damped Newton from a feasible start. With `constrained` false the
    /// budget is ignored and the returned multiplier is 0.
    pub fn newton(&self, u: Util, start: DVector<f64>, constrained: bool) -> Optimum {
        let nv = start.len();
        let mut v = start;
        let mut obj = self.objective(u, &v).expect("start must be admissible");
        let mut lambda = 0.0;
        for _ in 0..500 {
            let (grad, hess) = self.derivatives(u, &v);
            let (dv, mu) = if constrained {
                let mut k = DMatrix::zeros(nv + 1, nv + 1);
                k.view_mut((0, 0), (nv, nv)).copy_from(&hess);
                k.view_mut((0, nv), (nv, 1)).copy_from(&self.price);
                k.view_mut((nv, 0), (1, nv)).copy_from(&self.price.transpose());
                let mut rhs = DVector::zeros(nv + 1);
                rhs.rows_mut(0, nv).copy_from(&(-&grad));
                rhs[nv] = self.c - self.price.dot(&v);
                let sol = k.lu().solve(&rhs).expect("KKT matrix is singular");
                (sol.rows(0, nv).into_owned(), sol[nv])
            } else {
                (hess.lu().solve(&(-&grad)).expect("Hessian is singular"), 0.0)
            };
            lambda = mu;
            let slope = grad.dot(&dv);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..80 {
                let trial = &v + t * &dv;
                if let Some(o) = self.objective(u, &trial) {
                    if o >= obj + 1e-4 * t * slope.max(0.0) {
                        accepted = Some((trial, o));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((next, o)) = accepted else { break };
            let step = (&next - &v).amax();
            v = next;
            obj = o;
            if step <= 1e-14 * (1.0 + v.amax()) {
                break;
            }
        }
        Optimum { v, lambda, objective: obj }
    }

    /// Quadratic utility with the inequality budget `a·v ≤ c`.
    pub fn quadratic(&self, gamma: f64) -> Optimum {
        let u = Util::Quad(gamma);
        let start = DVector::from_element(self.design.ncols(), 0.0);
        let free = self.newton(u, start.clone(), false);
        if self.price.dot(&free.v) <= self.c {
            return free;
        }
        self.newton(u, self.feasible_start(), true)
    }

    /// `f ≡ c` and `g ≡ 0`; feasible because the x-prices sum to one.
    pub fn feasible_start(&self) -> DVector<f64> {
        DVector::from_fn(self.design.ncols(), |k, _| if k < self.nx { self.c } else { 0.0 })
    }
}

/// Feasible start for power utility on the single problem: every f above
/// the largest payoff in its row by the same margin.
pub fn power_start(model: &MarketModel, h: &PayoffSurface, c: f64) -> Option<DVector<f64>> {
    let tops: Vec<f64> = (0..model.nx())
        .map(|i| {
            h.row(i)
                .iter()
                .zip(model.joint().row(i))
                .filter(|(_, p)| **p > 0.0)
                .fold(f64::NEG_INFINITY, |m, (v, _)| m.max(*v))
        })
        .collect();
    let cost: f64 = tops.iter().zip(model.pt_x().mass()).map(|(t, w)| t * w).sum();
    let margin = c - cost;
    (margin > 0.0).then(|| DVector::from_iterator(tops.len(), tops.iter().map(|t| t + margin)))
}

/// Axis with random positive spacing.
pub fn random_axis(rng: &mut StdRng, n: usize) -> GridAxis {
    let mut x = rng.random_range(-1.0..1.0);
    let pts = (0..n)
        .map(|_| {
            let v = x;
            x += rng.random_range(0.2..1.0);
            v
        })
        .collect();
    GridAxis::new(pts).unwrap()
}

fn random_weights(rng: &mut StdRng, n: usize, lo: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..1.0)).collect()
}

/// Model with full joint support and risk-neutral marginals unrelated to ℙ.
pub fn random_model(rng: &mut StdRng, nx: usize, ny: usize) -> MarketModel {
    let ax = random_axis(rng, nx);
    let ay = random_axis(rng, ny);
    let joint = JointDensityGrid::from_weights(ax.clone(), ay.clone(), random_weights(rng, nx * ny, 0.05)).unwrap();
    let ptx = MarginalDensity::from_weights(ax, random_weights(rng, nx, 0.05)).unwrap();
    let pty = MarginalDensity::from_weights(ay, random_weights(rng, ny, 0.05)).unwrap();
    MarketModel::new(joint, ptx, pty).unwrap()
}

pub fn random_surface(rng: &mut StdRng, model: &MarketModel, scale: f64) -> PayoffSurface {
    let v = (0..model.nx() * model.ny()).map(|_| rng.random_range(-scale..scale)).collect();
    PayoffSurface::new(model.axis_x().clone(), model.axis_y().clone(), v).unwrap()
}

/// `Σ_j p_j (f − h_j)^{−γ}` through `x^{−γ} = (1/(γΓ(γ))) ∫₀^∞ e^{−z^{1/γ} x} dz`,
/// integrated by the trapezoid rule in `s = log z`.
pub fn transform_by_z_quadrature(p: &[f64], h: &[f64], f: f64, gamma: f64) -> f64 {
    let top = p.iter().zip(h).filter(|(w, _)| **w > 0.0).fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v));
    let gap = f - top;
    assert!(gap > 0.0);
    let centre = -gamma * gap.ln();
    let lo = centre - 45.0;
    let hi = gamma * (80.0 / gap).ln() + 2.0;
    let step = 0.005 * gamma.min(1.0);
    let n = ((hi - lo) / step).ceil() as usize;
    let integrand = |s: f64| {
        let w = (s / gamma).exp();
        let inner: f64 = p.iter().zip(h).filter(|(q, _)| **q > 0.0).map(|(q, v)| q * (-w * (top - v)).exp()).sum();
        s.exp() * (-w * gap).exp() * inner
    };
    let mut total = 0.5 * (integrand(lo) + integrand(hi));
    for k in 1..n {
        total += integrand(lo + k as f64 * (hi - lo) / n as f64);
    }
    total * (hi - lo) / n as f64 / (gamma * statrs::function::gamma::gamma(gamma))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `Ẽ E[h | X]`.
pub fn conditional_mean_cost(model: &MarketModel, h: &PayoffSurface) -> f64 {
    (0..model.nx())
        .map(|i| {
            let row = model.joint().row(i);
            let px: f64 = row.iter().sum();
            let e: f64 = row.iter().zip(h.row(i)).map(|(p, v)| p * v).sum::<f64>() / px;
            model.pt_x().mass()[i] * e
        })
        .sum()
}

/// `Ẽ max_y h(X, y)`: power utility needs a budget above this.
pub fn top_cost(model: &MarketModel, h: &PayoffSurface) -> f64 {
    (0..model.nx())
        .map(|i| model.pt_x().mass()[i] * h.row(i).iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)))
        .sum()
}

/// LETF mean-variance instance: leverage 2, subjective rate 100, risk-neutral
/// rate 1/0.15², drift 0.1, one year, γ = 0, and the budget set to
/// `Ẽ E[h|X] + γ − |Ẽh|` with the last expectation under the risk-neutral
/// joint law.
pub fn letf_instance() -> (MarketModel, PayoffSurface, f64) {
    let spec = LetfMixtureSpec::new(100.0, 1.0 / 0.0225, 0.1, 1.0, 2.0).unwrap();
    let ax = GridAxis::uniform(-0.9, 0.06, 31).unwrap();
    let ay = GridAxis::uniform(0.003, 0.006, 20).unwrap();
    let m = letf_model(&spec, &ax, &ay).unwrap();
    let h = letf_linear(&spec, &ax, &ay).unwrap();
    let rn = letf_joint_under(&spec, Measure::RiskNeutral, &ax, &ay).unwrap();
    let c = conditional_mean_cost(&m, &h) - rn.expectation(h.values()).abs();
    (m, h, c)
}
