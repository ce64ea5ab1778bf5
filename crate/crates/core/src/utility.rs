//! Utility functions with their first derivative and its inverse.
//!
//! The exponential utility is normalized as `−e^{−γx}/γ` throughout; scaling
//! by a positive constant changes no optimizer in the crate.

use crate::error::{HedgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `−e^{−γx}/γ`, γ > 0.
    Exponential { gamma: f64 },
    /// `x^{1−γ}/(1−γ)` on x > 0, γ > 0 and γ ≠ 1.
    Power { gamma: f64 },
    /// `log x` on x > 0.
    Logarithmic,
    /// `γx − x²/2`, γ ≥ 0. Not monotone.
    Quadratic { gamma: f64 },
}

impl Utility {
    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(HedgeError::InvalidSpec(format!("exponential utility needs gamma > 0, got {gamma}")));
        }
        Ok(Utility::Exponential { gamma })
    }

    /// Power utility; `gamma == 1` yields the logarithmic case.
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(HedgeError::InvalidSpec(format!("power utility needs gamma > 0, got {gamma}")));
        }
        if gamma == 1.0 {
            return Ok(Utility::Logarithmic);
        }
        Ok(Utility::Power { gamma })
    }

    pub fn quadratic(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(HedgeError::InvalidSpec(format!("quadratic utility needs gamma >= 0, got {gamma}")));
        }
        Ok(Utility::Quadratic { gamma })
    }

    /// Parses a kind name (`exponential`, `power`, `logarithmic`/`log`,
    /// `quadratic`) together with its risk parameter.
    pub fn from_kind(kind: &str, gamma: f64) -> Result<Self> {
        match kind.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Self::exponential(gamma),
            "power" => Self::power(gamma),
            "logarithmic" | "log" => Ok(Utility::Logarithmic),
            "quadratic" => Self::quadratic(gamma),
            other => Err(HedgeError::UnsupportedUtility(other.to_string())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Utility::Exponential { .. } => "exponential",
            Utility::Power { .. } => "power",
            Utility::Logarithmic => "logarithmic",
            Utility::Quadratic { .. } => "quadratic",
        }
    }

    /// Risk parameter; 1 for the logarithmic case.
    pub fn gamma(&self) -> f64 {
        match *self {
            Utility::Exponential { gamma } | Utility::Power { gamma } | Utility::Quadratic { gamma } => gamma,
            Utility::Logarithmic => 1.0,
        }
    }

    pub fn is_increasing(&self) -> bool {
        !matches!(self, Utility::Quadratic { .. })
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let positive_only = matches!(self, Utility::Power { .. } | Utility::Logarithmic);
        if x.is_nan() || (positive_only && !(x > 0.0)) {
            return Err(HedgeError::Domain { kind: self.kind(), value: x });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match *self {
            Utility::Exponential { gamma } => -(-gamma * x).exp() / gamma,
            Utility::Power { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
            Utility::Logarithmic => x.ln(),
            Utility::Quadratic { gamma } => gamma * x - 0.5 * x * x,
        })
    }

    /// `U′(x)`.
    pub fn marginal(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match *self {
            Utility::Exponential { gamma } => (-gamma * x).exp(),
            Utility::Power { gamma } => x.powf(-gamma),
            Utility::Logarithmic => 1.0 / x,
            Utility::Quadratic { gamma } => gamma - x,
        })
    }

    /// `[U′]⁻¹(m)`.
    pub fn inverse_marginal(&self, m: f64) -> Result<f64> {
        let positive_only = !matches!(self, Utility::Quadratic { .. });
        if m.is_nan() || (positive_only && !(m > 0.0 && m.is_finite())) {
            return Err(HedgeError::Range { kind: self.kind(), value: m });
        }
        Ok(match *self {
            Utility::Exponential { gamma } => -m.ln() / gamma,
            Utility::Power { gamma } => m.powf(-1.0 / gamma),
            Utility::Logarithmic => 1.0 / m,
            Utility::Quadratic { gamma } => gamma - m,
        })
    }

    /// Sure amount with the given utility, `U⁻¹(eu)`. The quadratic case
    /// uses the increasing branch `x ≤ γ`.
    pub fn certainty_equivalent(&self, eu: f64) -> Result<f64> {
        let bad = || HedgeError::Range { kind: self.kind(), value: eu };
        match *self {
            Utility::Exponential { gamma } => {
                if !(eu < 0.0) {
                    return Err(bad());
                }
                Ok(-(-gamma * eu).ln() / gamma)
            }
            Utility::Power { gamma } => {
                let base = (1.0 - gamma) * eu;
                if !(base > 0.0) {
                    return Err(bad());
                }
                Ok(base.powf(1.0 / (1.0 - gamma)))
            }
            Utility::Logarithmic => Ok(eu.exp()),
            Utility::Quadratic { gamma } => {
                let disc = gamma * gamma - 2.0 * eu;
                if !(disc >= 0.0) {
                    return Err(bad());
                }
                Ok(gamma - disc.sqrt())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(Utility::exponential(1.0).unwrap().evaluate(0.0).unwrap(), -1.0);
        assert_eq!(Utility::quadratic(0.0).unwrap().evaluate(2.0).unwrap(), -2.0);
        assert!((Utility::power(0.5).unwrap().evaluate(4.0).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(Utility::exponential(2.0).unwrap().marginal(0.0).unwrap(), 1.0);
        assert_eq!(Utility::quadratic(3.0).unwrap().marginal(1.0).unwrap(), 2.0);
        assert_eq!(Utility::exponential(1.0).unwrap().inverse_marginal(1.0).unwrap(), 0.0);
        assert_eq!(Utility::quadratic(0.0).unwrap().inverse_marginal(-3.0).unwrap(), 3.0);
        assert!((Utility::power(2.0).unwrap().inverse_marginal(0.25).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_and_range_errors() {
        let p = Utility::power(2.0).unwrap();
        assert_eq!(p.evaluate(-1.0), Err(HedgeError::Domain { kind: "power", value: -1.0 }));
        assert!(matches!(Utility::Logarithmic.marginal(0.0), Err(HedgeError::Domain { kind: "logarithmic", .. })));
        assert!(matches!(p.inverse_marginal(-0.5), Err(HedgeError::Range { .. })));
        assert!(matches!(Utility::exponential(1.0).unwrap().inverse_marginal(0.0), Err(HedgeError::Range { .. })));
        assert!(Utility::exponential(0.0).is_err());
        assert!(Utility::quadratic(-1.0).is_err());
        assert_eq!(Utility::power(1.0).unwrap(), Utility::Logarithmic);
        assert!(matches!(Utility::from_kind("cara", 1.0), Err(HedgeError::UnsupportedUtility(_))));
    }

    fn any_utility() -> impl Strategy<Value = Utility> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|g| Utility::Exponential { gamma: g }),
            (0.1f64..0.95).prop_map(|g| Utility::Power { gamma: g }),
            (1.05f64..4.0).prop_map(|g| Utility::Power { gamma: g }),
            Just(Utility::Logarithmic),
            (0.0f64..5.0).prop_map(|g| Utility::Quadratic { gamma: g }),
        ]
    }

    fn admissible(u: &Utility, t: f64) -> f64 {
        // maps t in [0,1) into a moderate part of the domain
        match u {
            Utility::Power { .. } | Utility::Logarithmic => 0.2 + 4.0 * t,
            _ => -2.0 + 4.0 * t,
        }
    }

    proptest! {
        #[test]
        fn marginal_matches_finite_difference(u in any_utility(), t in 0.0f64..1.0) {
            let x = admissible(&u, t);
            let h = 1e-6;
            let fd = (u.evaluate(x + h).unwrap() - u.evaluate(x - h).unwrap()) / (2.0 * h);
            let m = u.marginal(x).unwrap();
            prop_assert!((m - fd).abs() <= 1e-6 * m.abs().max(1.0));
        }

        #[test]
        fn inverse_marginal_round_trip(u in any_utility(), t in 0.0f64..1.0) {
            let x = admissible(&u, t);
            let back = u.inverse_marginal(u.marginal(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x.abs().max(1.0));
        }

        #[test]
        fn certainty_equivalent_inverts_evaluate(u in any_utility(), t in 0.0f64..1.0) {
            let mut x = admissible(&u, t);
            if let Utility::Quadratic { gamma } = u {
                x = x.min(gamma - 0.5);
            }
            let ce = u.certainty_equivalent(u.evaluate(x).unwrap()).unwrap();
            prop_assert!((ce - x).abs() <= 1e-9 * x.abs().max(1.0));
        }

        #[test]
        fn strictly_concave_and_decreasing_marginal(u in any_utility(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let (x, y) = (admissible(&u, a), admissible(&u, b));
            let mid = u.evaluate(0.5 * (x + y)).unwrap();
            let chord = 0.5 * (u.evaluate(x).unwrap() + u.evaluate(y).unwrap());
            prop_assert!(mid > chord);
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            prop_assert!(u.marginal(lo).unwrap() > u.marginal(hi).unwrap());
        }
    }
}
