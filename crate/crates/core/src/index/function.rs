use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Closed-form or sampled representation of an index function.
#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    /// `c * t^p`.
    PowerLaw { coefficient: f64, exponent: f64 },
    /// Piecewise-linear interpolant through `(abscissae[i], values[i])`,
    /// starting at `(0, 0)`.
    Tabulated { abscissae: Vec<f64>, values: Vec<f64> },
}

/// A monotone function `f: [0, r) -> [0, inf)` with `f(0) = 0`.
///
/// Power laws live on `[0, domain_upper)`, where `domain_upper` may be
/// infinite. Tabulated functions live on the closed interval spanned by their
/// table. The concavity flag is derived from the data at construction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexFunctionRecord", into = "IndexFunctionRecord")]
pub struct IndexFunction {
    form: Form,
    domain_upper: f64,
    concave: bool,
}

// relative slack when comparing adjacent divided differences
const CONCAVITY_SLACK: f64 = 1e-9;

impl IndexFunction {
    pub fn power_law(coefficient: f64, exponent: f64) -> Result<Self> {
        Self::power_law_on(coefficient, exponent, f64::INFINITY)
    }

    pub fn power_law_on(coefficient: f64, exponent: f64, domain_upper: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return invalid(format!("power-law coefficient must be positive, got {coefficient}"));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return invalid(format!("power-law exponent must be positive, got {exponent}"));
        }
        if domain_upper.is_nan() || domain_upper <= 0.0 {
            return invalid(format!("domain upper bound must be positive, got {domain_upper}"));
        }
        Ok(Self {
            form: Form::PowerLaw { coefficient, exponent },
            domain_upper,
            concave: exponent <= 1.0,
        })
    }

    /// Builds a tabulated function. A leading `(0, 0)` node is inserted when
    /// the first abscissa is positive.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        let mut abscissae = Vec::with_capacity(points.len() + 1);
        let mut values = Vec::with_capacity(points.len() + 1);
        if points.first().is_some_and(|&(t, _)| t > 0.0) {
            abscissae.push(0.0);
            values.push(0.0);
        }
        for &(t, v) in points {
            abscissae.push(t);
            values.push(v);
        }
        if abscissae.len() < 2 {
            return invalid("a tabulated index function needs at least one positive node");
        }
        if abscissae[0] != 0.0 || values[0] != 0.0 {
            return invalid("a tabulated index function must start at (0, 0)");
        }
        for i in 1..abscissae.len() {
            let (t0, t1) = (abscissae[i - 1], abscissae[i]);
            let (v0, v1) = (values[i - 1], values[i]);
            if !(t1.is_finite() && v1.is_finite()) {
                return invalid(format!("non-finite node ({t1}, {v1})"));
            }
            if t1 <= t0 {
                return invalid(format!("abscissae must be strictly increasing at index {i}"));
            }
            if v1 <= v0 {
                return invalid(format!("values must be strictly increasing at index {i} (t = {t1})"));
            }
        }
        let concave = slopes(&abscissae, &values)
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + CONCAVITY_SLACK));
        let domain_upper = *abscissae.last().unwrap();
        Ok(Self {
            form: Form::Tabulated { abscissae, values },
            domain_upper,
            concave,
        })
    }

    /// Tabulates `self` on the given positive, increasing grid.
    pub fn sample(&self, grid: &[f64]) -> Result<Self> {
        let points = grid
            .iter()
            .map(|&t| self.eval(t).map(|v| (t, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::tabulated(&points)
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn domain_upper(&self) -> f64 {
        self.domain_upper
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    /// `(coefficient, exponent)` when the function is a power law.
    pub fn as_power_law(&self) -> Option<(f64, f64)> {
        match self.form {
            Form::PowerLaw { coefficient, exponent } => Some((coefficient, exponent)),
            Form::Tabulated { .. } => None,
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.form, Form::Tabulated { .. })
    }

    /// Positive abscissae of a tabulated function (empty for power laws).
    pub fn nodes(&self) -> &[f64] {
        match &self.form {
            Form::Tabulated { abscissae, .. } => &abscissae[1..],
            Form::PowerLaw { .. } => &[],
        }
    }

    fn in_domain(&self, t: f64) -> bool {
        match self.form {
            Form::PowerLaw { .. } => t >= 0.0 && t < self.domain_upper,
            Form::Tabulated { .. } => t >= 0.0 && t <= self.domain_upper,
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(Error::Domain { value: t, upper: self.domain_upper })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.value(t))
    }

    /// Evaluation without the domain check; callers clamp to the domain.
    pub(crate) fn value(&self, t: f64) -> f64 {
        match &self.form {
            Form::PowerLaw { coefficient, exponent } => {
                if t == 0.0 {
                    0.0
                } else {
                    coefficient * t.powf(*exponent)
                }
            }
            Form::Tabulated { abscissae, values } => {
                let i = segment(abscissae, t);
                let (t0, t1) = (abscissae[i], abscissae[i + 1]);
                let (v0, v1) = (values[i], values[i + 1]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `f'(t)`. Power laws with exponent below one return `f64::INFINITY` at
    /// zero. Tabulated functions use the forward divided difference of the
    /// segment containing `t` (the last segment at the right end).
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match &self.form {
            Form::PowerLaw { coefficient, exponent } => {
                if t == 0.0 {
                    if *exponent < 1.0 {
                        f64::INFINITY
                    } else if *exponent == 1.0 {
                        *coefficient
                    } else {
                        0.0
                    }
                } else {
                    coefficient * exponent * t.powf(exponent - 1.0)
                }
            }
            Form::Tabulated { abscissae, values } => {
                let i = segment(abscissae, t);
                (values[i + 1] - values[i]) / (abscissae[i + 1] - abscissae[i])
            }
        })
    }

    /// `(f')^{-1}(z)` for concave `f`, a nonincreasing map of `z > 0`.
    ///
    /// Tabulated functions place each divided difference at the midpoint of
    /// its segment and interpolate linearly between those nodes.
    pub fn inverse_derivative(&self, z: f64) -> Result<f64> {
        if !(z.is_finite() && z > 0.0) {
            return invalid(format!("inverse derivative needs z > 0, got {z}"));
        }
        if !self.concave {
            return invalid("inverse derivative requires a concave index function");
        }
        match &self.form {
            Form::PowerLaw { coefficient, exponent } => {
                if *exponent == 1.0 {
                    return Err(Error::Degenerate(
                        "linear function has a constant derivative".into(),
                    ));
                }
                let t = (z / (coefficient * exponent)).powf(1.0 / (exponent - 1.0));
                if t >= self.domain_upper {
                    let lo = coefficient * exponent * self.domain_upper.powf(exponent - 1.0);
                    return Err(Error::OutOfRange { value: z, lo, hi: f64::INFINITY });
                }
                Ok(t)
            }
            Form::Tabulated { .. } => {
                let nodes = self.slope_nodes();
                let (s_hi, s_lo) = (nodes[0].0, nodes[nodes.len() - 1].0);
                if z > s_hi || z < s_lo {
                    return Err(Error::OutOfRange { value: z, lo: s_lo, hi: s_hi });
                }
                // slopes are nonincreasing along the nodes
                let j = nodes.partition_point(|&(s, _)| s > z);
                if j == 0 {
                    return Ok(nodes[0].1);
                }
                let (s0, m0) = nodes[j - 1];
                let (s1, m1) = nodes[j];
                if s0 == s1 {
                    return Ok(m0);
                }
                Ok(m0 + (m1 - m0) * (s0 - z) / (s0 - s1))
            }
        }
    }

    /// `(slope, midpoint)` pairs of a tabulated function; runs of equal
    /// slopes collapse onto their first node.
    pub(crate) fn slope_nodes(&self) -> Vec<(f64, f64)> {
        let Form::Tabulated { abscissae, values } = &self.form else {
            return Vec::new();
        };
        let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(abscissae.len());
        for (i, s) in slopes(abscissae, values).into_iter().enumerate() {
            let mid = 0.5 * (abscissae[i] + abscissae[i + 1]);
            if nodes.last().is_some_and(|&(prev, _)| s >= prev) {
                continue;
            }
            nodes.push((s, mid));
        }
        nodes
    }

    /// `f^{-1}(v)`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v.is_finite() && v >= 0.0) {
            return invalid(format!("inverse needs a finite nonnegative value, got {v}"));
        }
        match &self.form {
            Form::PowerLaw { coefficient, exponent } => {
                let t = (v / coefficient).powf(1.0 / exponent);
                if t >= self.domain_upper {
                    let hi = coefficient * self.domain_upper.powf(*exponent);
                    return Err(Error::OutOfRange { value: v, lo: 0.0, hi });
                }
                Ok(t)
            }
            Form::Tabulated { abscissae, values } => {
                let hi = *values.last().unwrap();
                if v > hi {
                    return Err(Error::OutOfRange { value: v, lo: 0.0, hi });
                }
                let i = segment(values, v);
                let (v0, v1) = (values[i], values[i + 1]);
                let (t0, t1) = (abscissae[i], abscissae[i + 1]);
                Ok(t0 + (t1 - t0) * (v - v0) / (v1 - v0))
            }
        }
    }

    /// Multiplies all values by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return invalid(format!("scale factor must be positive, got {factor}"));
        }
        match &self.form {
            Form::PowerLaw { coefficient, exponent } => {
                Self::power_law_on(coefficient * factor, *exponent, self.domain_upper)
            }
            Form::Tabulated { abscissae, values } => {
                let points: Vec<_> = abscissae
                    .iter()
                    .zip(values)
                    .map(|(&t, &v)| (t, v * factor))
                    .collect();
                Self::tabulated(&points)
            }
        }
    }
}

fn slopes(abscissae: &[f64], values: &[f64]) -> Vec<f64> {
    abscissae
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect()
}

/// Index `i` of the segment `[xs[i], xs[i+1])` containing `x`, clamped to the
/// first and last segments.
fn segment(xs: &[f64], x: f64) -> usize {
    let i = xs.partition_point(|&a| a <= x);
    i.saturating_sub(1).min(xs.len() - 2)
}

/// JSON record: `{form, c, p, domain_upper}` or `{form, points}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum IndexFunctionRecord {
    PowerLaw {
        c: f64,
        p: f64,
        /// `null` encodes an unbounded domain.
        #[serde(default)]
        domain_upper: Option<f64>,
    },
    Tabulated { points: Vec<[f64; 2]> },
}

impl TryFrom<IndexFunctionRecord> for IndexFunction {
    type Error = Error;

    fn try_from(record: IndexFunctionRecord) -> Result<Self> {
        match record {
            IndexFunctionRecord::PowerLaw { c, p, domain_upper } => {
                Self::power_law_on(c, p, domain_upper.unwrap_or(f64::INFINITY))
            }
            IndexFunctionRecord::Tabulated { points } => {
                let points: Vec<_> = points.into_iter().map(|[t, v]| (t, v)).collect();
                Self::tabulated(&points)
            }
        }
    }
}

impl From<IndexFunction> for IndexFunctionRecord {
    fn from(f: IndexFunction) -> Self {
        match f.form {
            Form::PowerLaw { coefficient, exponent } => IndexFunctionRecord::PowerLaw {
                c: coefficient,
                p: exponent,
                domain_upper: f.domain_upper.is_finite().then_some(f.domain_upper),
            },
            Form::Tabulated { abscissae, values } => IndexFunctionRecord::Tabulated {
                points: abscissae.into_iter().zip(values).map(|(t, v)| [t, v]).collect(),
            },
        }
    }
}
