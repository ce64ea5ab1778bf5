//! Payoff surfaces over the grid and hedge curves over one axis.

use crate::error::{HedgeError, Result};
use crate::market_model::{GridAxis, LetfMixtureSpec};

/// A function of both coordinates sampled at the grid points, row-major with
/// x as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSurface {
    axis_x: GridAxis,
    axis_y: GridAxis,
    values: Vec<f64>,
}

impl PayoffSurface {
    pub fn new(axis_x: GridAxis, axis_y: GridAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis_x.len() * axis_y.len() {
            return Err(HedgeError::ShapeMismatch(format!(
                "{}x{} surface needs {} values, got {}",
                axis_x.len(),
                axis_y.len(),
                axis_x.len() * axis_y.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(HedgeError::InvalidSpec(format!("surface value {k} is not finite")));
        }
        Ok(Self { axis_x, axis_y, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(axis_x: &GridAxis, axis_y: &GridAxis, h: F) -> Result<Self> {
        let mut values = Vec::with_capacity(axis_x.len() * axis_y.len());
        for &x in axis_x.points() {
            for &y in axis_y.points() {
                values.push(h(x, y));
            }
        }
        Self::new(axis_x.clone(), axis_y.clone(), values)
    }

    pub fn zeros(axis_x: &GridAxis, axis_y: &GridAxis) -> Self {
        Self { axis_x: axis_x.clone(), axis_y: axis_y.clone(), values: vec![0.0; axis_x.len() * axis_y.len()] }
    }

    /// `a(x) + b(y)`.
    pub fn separable(a: &HedgeCurve, b: &HedgeCurve) -> Self {
        let mut values = Vec::with_capacity(a.len() * b.len());
        for &ai in a.values() {
            for &bj in b.values() {
                values.push(ai + bj);
            }
        }
        Self { axis_x: a.axis().clone(), axis_y: b.axis().clone(), values }
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis_y.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.ny();
        &self.values[i * ny..(i + 1) * ny]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub(crate) fn check_axes(&self, axis_x: &GridAxis, axis_y: &GridAxis) -> Result<()> {
        if !self.axis_x.matches(axis_x) || !self.axis_y.matches(axis_y) {
            return Err(HedgeError::ShapeMismatch(format!(
                "payoff grid {}x{} does not match model grid {}x{}",
                self.nx(),
                self.ny(),
                axis_x.len(),
                axis_y.len()
            )));
        }
        Ok(())
    }
}

/// Payoff of a hedge written on one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeCurve {
    axis: GridAxis,
    values: Vec<f64>,
}

impl HedgeCurve {
    pub fn new(axis: GridAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.len() {
            return Err(HedgeError::ShapeMismatch(format!(
                "axis has {} points but the curve has {} values",
                axis.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(HedgeError::InvalidSpec(format!("curve value {k} is not finite")));
        }
        Ok(Self { axis, values })
    }

    pub fn constant(axis: &GridAxis, c: f64) -> Self {
        Self { axis: axis.clone(), values: vec![c; axis.len()] }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(axis: &GridAxis, f: F) -> Result<Self> {
        Self::new(axis.clone(), axis.points().iter().map(|&x| f(x)).collect())
    }

    pub fn axis(&self) -> &GridAxis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shifted(&self, k: f64) -> Self {
        Self { axis: self.axis.clone(), values: self.values.iter().map(|v| v + k).collect() }
    }

    pub fn sup_distance(&self, other: &HedgeCurve) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `βx − β(β−1)y/2`: the log-value of a β-leveraged ETF when x is the log
/// of the underlying and y its integrated variance.
pub fn letf_linear(spec: &LetfMixtureSpec, axis_x: &GridAxis, axis_y: &GridAxis) -> Result<PayoffSurface> {
    PayoffSurface::from_fn(axis_x, axis_y, |x, y| spec.letf_log_value(x, y))
}

/// `(e^{x+y} − 1)⁺`.
pub fn basket_call(axis_x: &GridAxis, axis_y: &GridAxis) -> Result<PayoffSurface> {
    PayoffSurface::from_fn(axis_x, axis_y, |x, y| ((x + y).exp() - 1.0).max(0.0))
}

/// `(xy − 1)⁺`.
pub fn product_call(axis_x: &GridAxis, axis_y: &GridAxis) -> Result<PayoffSurface> {
    PayoffSurface::from_fn(axis_x, axis_y, |x, y| (x * y - 1.0).max(0.0))
}
