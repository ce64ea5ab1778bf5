//! Subjective joint law, risk-neutral marginals and their discretizations.
//!
//! All grids carry cell probabilities rather than density values, so every
//! expectation in the crate is a mass-weighted sum. A grid point is the
//! representative coordinate of its cell; cell boundaries are the midpoints
//! between neighbouring points, and the outermost cells extend half a spacing
//! beyond the end points.

mod bivariate;
mod implied;
mod letf;

pub use bivariate::{discretize_bivariate_normal, rectangle_probability, BivariateNormalSpec};
pub use implied::{implied_density_from_calls, ImpliedDensity, CLIP_WARNING_FRACTION};
pub use letf::{letf_joint, letf_joint_under, letf_marginals, letf_model, LetfMixtureSpec, Measure};

use crate::error::{HedgeError, Result};

/// Tolerance on the total mass of user-supplied densities before rejection.
pub const INPUT_MASS_TOLERANCE: f64 = 1e-6;
/// Tolerance on the total mass of every constructed density.
pub const UNIT_MASS_TOLERANCE: f64 = 1e-12;

const UNIFORM_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    points: Vec<f64>,
    step: Option<f64>,
}

impl GridAxis {
    /// Builds an axis from strictly increasing finite coordinates.
    ///
    /// A single point is accepted (its cell is the whole line); operations
    /// that need finite differences check the length themselves.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(HedgeError::InvalidAxis("axis has no points".into()));
        }
        if let Some(k) = points.iter().position(|v| !v.is_finite()) {
            return Err(HedgeError::InvalidAxis(format!("point {k} is not finite")));
        }
        if let Some(k) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(HedgeError::InvalidAxis(format!(
                "points must be strictly increasing (index {} -> {})",
                k,
                k + 1
            )));
        }
        let step = if points.len() >= 2 {
            let d0 = points[1] - points[0];
            let uniform = points
                .windows(2)
                .all(|w| ((w[1] - w[0]) - d0).abs() <= UNIFORM_REL_TOL * d0.abs().max(1e-300));
            uniform.then_some(d0)
        } else {
            None
        };
        Ok(Self { points, step })
    }

    /// `n` points `start, start + step, ...`.
    pub fn uniform(start: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(HedgeError::InvalidAxis(format!("step must be positive, got {step}")));
        }
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.step.is_some()
    }

    /// Spacing δ of a uniform axis.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Lower and upper boundary of the cell represented by point `i`.
    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let p = &self.points;
        let n = p.len();
        if n == 1 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let lo = if i == 0 { p[0] - 0.5 * (p[1] - p[0]) } else { 0.5 * (p[i - 1] + p[i]) };
        let hi = if i + 1 == n { p[n - 1] + 0.5 * (p[n - 1] - p[n - 2]) } else { 0.5 * (p[i] + p[i + 1]) };
        (lo, hi)
    }

    pub fn nearest_index(&self, v: f64) -> usize {
        let mut best = 0;
        for (k, &p) in self.points.iter().enumerate() {
            if (p - v).abs() < (self.points[best] - v).abs() {
                best = k;
            }
        }
        best
    }

    /// Same coordinates up to a relative tolerance of 1e-12.
    pub fn matches(&self, other: &GridAxis) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    }
}

fn check_masses(mass: &[f64], what: &str) -> Result<f64> {
    let mut total = 0.0;
    for (k, &m) in mass.iter().enumerate() {
        if !m.is_finite() {
            return Err(HedgeError::InvalidDensity(format!("{what}: entry {k} is not finite")));
        }
        if m < 0.0 {
            return Err(HedgeError::InvalidDensity(format!("{what}: entry {k} is negative ({m})")));
        }
        total += m;
    }
    if !(total > 0.0) {
        return Err(HedgeError::InvalidDensity(format!("{what}: total mass is zero")));
    }
    Ok(total)
}

/// Cell probabilities of a single coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDensity {
    axis: GridAxis,
    mass: Vec<f64>,
}

impl MarginalDensity {
    /// Accepts probabilities summing to one within [`INPUT_MASS_TOLERANCE`].
    pub fn new(axis: GridAxis, mass: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&axis, &mass)?;
        if (total - 1.0).abs() > INPUT_MASS_TOLERANCE {
            return Err(HedgeError::InvalidDensity(format!("marginal mass sums to {total}, expected 1")));
        }
        Ok(Self::normalized(axis, mass, total))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(axis: GridAxis, weights: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&axis, &weights)?;
        Ok(Self::normalized(axis, weights, total))
    }

    fn validate(axis: &GridAxis, mass: &[f64]) -> Result<f64> {
        if axis.len() != mass.len() {
            return Err(HedgeError::ShapeMismatch(format!(
                "axis has {} points but {} masses were given",
                axis.len(),
                mass.len()
            )));
        }
        check_masses(mass, "marginal")
    }

    fn normalized(axis: GridAxis, mut mass: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            mass.iter_mut().for_each(|m| *m /= total);
        }
        Self { axis, mass }
    }

    pub fn axis(&self) -> &GridAxis {
        &self.axis
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `Σ_i mass_i · values_i`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).filter(|(m, _)| **m > 0.0).map(|(m, v)| m * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(self.axis.points())
    }
}

/// Cell probabilities of the pair, row-major with x as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensityGrid {
    axis_x: GridAxis,
    axis_y: GridAxis,
    mass: Vec<f64>,
    truncated_mass: f64,
}

impl JointDensityGrid {
    /// Accepts probabilities summing to one within [`INPUT_MASS_TOLERANCE`].
    pub fn new(axis_x: GridAxis, axis_y: GridAxis, mass: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&axis_x, &axis_y, &mass)?;
        if (total - 1.0).abs() > INPUT_MASS_TOLERANCE {
            return Err(HedgeError::InvalidDensity(format!("joint mass sums to {total}, expected 1")));
        }
        Ok(Self::normalized(axis_x, axis_y, mass, total))
    }

    /// Normalizes nonnegative weights; `1 - Σ weights` is kept as the
    /// truncation deficit.
    pub fn from_weights(axis_x: GridAxis, axis_y: GridAxis, weights: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&axis_x, &axis_y, &weights)?;
        Ok(Self::normalized(axis_x, axis_y, weights, total))
    }

    fn validate(axis_x: &GridAxis, axis_y: &GridAxis, mass: &[f64]) -> Result<f64> {
        if axis_x.len() * axis_y.len() != mass.len() {
            return Err(HedgeError::ShapeMismatch(format!(
                "{}x{} grid needs {} masses, got {}",
                axis_x.len(),
                axis_y.len(),
                axis_x.len() * axis_y.len(),
                mass.len()
            )));
        }
        check_masses(mass, "joint")
    }

    fn normalized(axis_x: GridAxis, axis_y: GridAxis, mut mass: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            mass.iter_mut().for_each(|m| *m /= total);
        }
        Self { axis_x, axis_y, mass, truncated_mass: 1.0 - total }
    }

    /// Outer product of two marginals, with no renormalization.
    pub fn product(mx: &MarginalDensity, my: &MarginalDensity) -> Self {
        let mut mass = Vec::with_capacity(mx.len() * my.len());
        for &a in mx.mass() {
            for &b in my.mass() {
                mass.push(a * b);
            }
        }
        Self { axis_x: mx.axis().clone(), axis_y: my.axis().clone(), mass, truncated_mass: 0.0 }
    }

    pub fn axis_x(&self) -> &GridAxis {
        &self.axis_x
    }

    pub fn axis_y(&self) -> &GridAxis {
        &self.axis_y
    }

    pub fn nx(&self) -> usize {
        self.axis_x.len()
    }

    pub fn ny(&self) -> usize {
        self.axis_y.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.axis_y.len() + j]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.ny();
        &self.mass[i * ny..(i + 1) * ny]
    }

    /// Probability lost to truncation before renormalization (zero for
    /// user-supplied grids).
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn marginal_x_mass(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn marginal_y_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ny()];
        for i in 0..self.nx() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += m;
            }
        }
        out
    }

    pub fn marginal_x(&self) -> MarginalDensity {
        MarginalDensity { axis: self.axis_x.clone(), mass: self.marginal_x_mass() }
    }

    pub fn marginal_y(&self) -> MarginalDensity {
        MarginalDensity { axis: self.axis_y.clone(), mass: self.marginal_y_mass() }
    }

    pub fn transpose(&self) -> Self {
        let (nx, ny) = (self.nx(), self.ny());
        let mut mass = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                mass[j * nx + i] = self.at(i, j);
            }
        }
        Self { axis_x: self.axis_y.clone(), axis_y: self.axis_x.clone(), mass, truncated_mass: self.truncated_mass }
    }

    /// `Σ_{ij} mass_ij · values_ij` over positive-mass cells.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).filter(|(m, _)| **m > 0.0).map(|(m, v)| m * v).sum()
    }
}

/// Subjective joint law ℙ together with the risk-neutral marginals of ℙ̃.
#[derive(Debug, Clone)]
pub struct MarketModel {
    p_joint: JointDensityGrid,
    pt_x: MarginalDensity,
    pt_y: MarginalDensity,
    p_x: Vec<f64>,
    p_y: Vec<f64>,
    equivalence_mask: Vec<bool>,
}

impl MarketModel {
    /// Validates shared axes and equivalence of ℙ and ℙ̃ on each marginal
    /// (identical supports).
    pub fn new(p_joint: JointDensityGrid, pt_x: MarginalDensity, pt_y: MarginalDensity) -> Result<Self> {
        if !p_joint.axis_x().matches(pt_x.axis()) {
            return Err(HedgeError::ShapeMismatch("risk-neutral x-marginal axis differs from joint x-axis".into()));
        }
        if !p_joint.axis_y().matches(pt_y.axis()) {
            return Err(HedgeError::ShapeMismatch("risk-neutral y-marginal axis differs from joint y-axis".into()));
        }
        let p_x = p_joint.marginal_x_mass();
        let p_y = p_joint.marginal_y_mass();
        for (name, p, pt) in [("x", &p_x, pt_x.mass()), ("y", &p_y, pt_y.mass())] {
            if let Some(k) = p.iter().zip(pt).position(|(a, b)| (*a > 0.0) != (*b > 0.0)) {
                return Err(HedgeError::EquivalenceViolation(format!(
                    "{name}-index {k}: subjective mass {} vs risk-neutral mass {}",
                    p[k], pt[k]
                )));
            }
        }
        let equivalence_mask = p_joint.mass().iter().map(|m| *m > 0.0).collect();
        Ok(Self { p_joint, pt_x, pt_y, p_x, p_y, equivalence_mask })
    }

    /// Model with ℙ̃ = ℙ on both marginals.
    pub fn with_subjective_pricing(p_joint: JointDensityGrid) -> Result<Self> {
        let mx = p_joint.marginal_x();
        let my = p_joint.marginal_y();
        Self::new(p_joint, mx, my)
    }

    pub fn joint(&self) -> &JointDensityGrid {
        &self.p_joint
    }

    pub fn axis_x(&self) -> &GridAxis {
        self.p_joint.axis_x()
    }

    pub fn axis_y(&self) -> &GridAxis {
        self.p_joint.axis_y()
    }

    pub fn nx(&self) -> usize {
        self.p_joint.nx()
    }

    pub fn ny(&self) -> usize {
        self.p_joint.ny()
    }

    pub fn pt_x(&self) -> &MarginalDensity {
        &self.pt_x
    }

    pub fn pt_y(&self) -> &MarginalDensity {
        &self.pt_y
    }

    /// Subjective x-marginal masses.
    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn equivalence_mask(&self) -> &[bool] {
        &self.equivalence_mask
    }

    /// `p(·|X = x_i)` over the y-axis.
    pub fn conditional_given_x(&self, i: usize) -> Result<Vec<f64>> {
        let px = *self.p_x.get(i).ok_or_else(|| HedgeError::ShapeMismatch(format!("x-index {i} out of range")))?;
        if !(px > 0.0) {
            return Err(HedgeError::ConditioningOnNull { index: i });
        }
        Ok(self.p_joint.row(i).iter().map(|m| m / px).collect())
    }

    /// `p(·|Y = y_j)` over the x-axis.
    pub fn conditional_given_y(&self, j: usize) -> Result<Vec<f64>> {
        let py = *self.p_y.get(j).ok_or_else(|| HedgeError::ShapeMismatch(format!("y-index {j} out of range")))?;
        if !(py > 0.0) {
            return Err(HedgeError::ConditioningOnNull { index: j });
        }
        Ok((0..self.nx()).map(|i| self.p_joint.at(i, j) / py).collect())
    }

    /// Joint law with the risk-neutral marginals and independent coordinates,
    /// used to extend Ẽ to functions of both coordinates.
    pub fn rn_product_coupling(&self) -> JointDensityGrid {
        JointDensityGrid::product(&self.pt_x, &self.pt_y)
    }

    /// Ẽ of a surface under the product coupling.
    pub fn product_expectation(&self, values: &[f64]) -> f64 {
        let ny = self.ny();
        let mut total = 0.0;
        for (i, &ax) in self.pt_x.mass().iter().enumerate() {
            if ax == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for (j, &by) in self.pt_y.mass().iter().enumerate() {
                if by > 0.0 {
                    row += by * values[i * ny + j];
                }
            }
            total += ax * row;
        }
        total
    }

    /// Subjective expectation of a surface.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.p_joint.expectation(values)
    }
}
