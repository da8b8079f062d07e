//! Convex penalties with closed-form conjugates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Vector;

/// Relative tolerance when checking that `ξ` is the gradient at `z`.
const SUBGRADIENT_TOL: f64 = 1e-8;

/// `J(x) = ½‖x‖²` or `J(x) = (1/q) Σ |x_k|^q` with `q ∈ (1, 2]`.
///
/// Parses from and prints as `"quadratic"` or `"power:q"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Penalty {
    #[default]
    Quadratic,
    PowerNorm { q: f64 },
}

impl Penalty {
    pub fn power_norm(q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 2.0) {
            return invalid(format!("power-norm exponent must lie in (1, 2], got {q}"));
        }
        Ok(Self::PowerNorm { q })
    }

    /// Conjugate exponent `q* = q/(q−1)`.
    pub fn dual_exponent(&self) -> f64 {
        match *self {
            Self::Quadratic => 2.0,
            Self::PowerNorm { q } => q / (q - 1.0),
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match *self {
            Self::Quadratic => 0.5 * x.norm_squared(),
            Self::PowerNorm { q } => x.iter().map(|v| v.abs().powf(q)).sum::<f64>() / q,
        }
    }

    /// The gradient; at zero this is the minimal-norm subgradient `0`.
    pub fn subgradient(&self, x: &Vector) -> Vector {
        match *self {
            Self::Quadratic => x.clone(),
            Self::PowerNorm { q } => x.map(|v| v.signum() * v.abs().powf(q - 1.0)),
        }
    }

    /// `J*(p) = sup_x (⟨p, x⟩ − J(x))`.
    pub fn conjugate(&self, p: &Vector) -> f64 {
        match *self {
            Self::Quadratic => 0.5 * p.norm_squared(),
            Self::PowerNorm { .. } => {
                let qs = self.dual_exponent();
                p.iter().map(|v| v.abs().powf(qs)).sum::<f64>() / qs
            }
        }
    }

    /// `B_ξ(z, x) = J(x) − J(z) − ⟨ξ, x − z⟩` after checking `ξ ∈ ∂J(z)`.
    pub fn bregman(&self, x: &Vector, z: &Vector, xi: &Vector) -> Result<f64> {
        if x.len() != z.len() || xi.len() != z.len() {
            let found = if x.len() != z.len() { x.len() } else { xi.len() };
            return Err(Error::DimensionMismatch { expected: z.len(), found });
        }
        let g = self.subgradient(z);
        let violation = (xi - &g).norm() / g.norm().max(1.0);
        if violation > SUBGRADIENT_TOL {
            return Err(Error::NotASubgradient { violation });
        }
        Ok(self.bregman_unchecked(x, z))
    }

    /// Bregman distance with the gradient at `z`.
    pub fn bregman_at(&self, x: &Vector, z: &Vector) -> f64 {
        self.bregman_unchecked(x, z)
    }

    fn bregman_unchecked(&self, x: &Vector, z: &Vector) -> f64 {
        match *self {
            Self::Quadratic => 0.5 * (x - z).norm_squared(),
            // every component is a one-dimensional Bregman distance, hence
            // nonnegative; clamping removes rounding noise only
            Self::PowerNorm { q } => x
                .iter()
                .zip(z.iter())
                .map(|(&a, &b)| {
                    let xi = b.signum() * b.abs().powf(q - 1.0);
                    (a.abs().powf(q) / q - b.abs().powf(q) / q - xi * (a - b)).max(0.0)
                })
                .sum(),
        }
    }

    /// `dist(0, ∂J(x))`.
    pub fn remoteness(&self, x: &Vector) -> f64 {
        self.subgradient(x).norm()
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic => f.write_str("quadratic"),
            Self::PowerNorm { q } => write!(f, "power:{q}"),
        }
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "quadratic" {
            return Ok(Self::Quadratic);
        }
        match s.strip_prefix("power:") {
            Some(q) => match q.trim().parse::<f64>() {
                Ok(q) => Self::power_norm(q),
                Err(_) => invalid(format!("cannot parse power-norm exponent '{q}'")),
            },
            None => invalid(format!("unknown penalty '{s}', expected 'quadratic' or 'power:q'")),
        }
    }
}

impl TryFrom<String> for Penalty {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Penalty> for String {
    fn from(p: Penalty) -> Self {
        p.to_string()
    }
}
