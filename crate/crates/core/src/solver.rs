//! Exact Tikhonov minimizers and the dual certificate.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{vector_serde, NormWeights, Operator, Vector};
use crate::penalty::Penalty;

const SCALAR_TOL: f64 = 1e-13;
const SCALAR_MAX_ITER: usize = 200;

/// `min_x ½‖Ax − y‖² + α J(x)` together with optional ground truth.
#[derive(Debug, Clone)]
pub struct TikhonovProblem {
    pub operator: Operator,
    pub penalty: Penalty,
    pub y_obs: Vector,
    pub x_true: Option<Vector>,
    pub delta: f64,
    pub weights: Option<NormWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    #[serde(with = "vector_serde")]
    pub x_alpha: Vector,
    pub alpha: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub penalty_value: f64,
    /// `(y − A x_α)/α`.
    #[serde(with = "vector_serde")]
    pub dual_z: Vector,
}

impl TikhonovProblem {
    pub fn new(operator: Operator, penalty: Penalty, y_obs: Vector) -> Result<Self> {
        if y_obs.len() != operator.rows() {
            return Err(Error::DimensionMismatch { expected: operator.rows(), found: y_obs.len() });
        }
        Ok(Self { operator, penalty, y_obs, x_true: None, delta: 0.0, weights: None })
    }

    /// Exact data `y = A x†`, `δ = 0`.
    pub fn noise_free(operator: Operator, penalty: Penalty, x_true: Vector) -> Result<Self> {
        let y = operator.apply(&x_true)?;
        Self::new(operator, penalty, y)?.with_truth(x_true)
    }

    pub fn with_truth(mut self, x_true: Vector) -> Result<Self> {
        if x_true.len() != self.operator.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.operator.cols(),
                found: x_true.len(),
            });
        }
        self.x_true = Some(x_true);
        self.check_consistency()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return invalid(format!("noise level must be nonnegative, got {delta}"));
        }
        self.delta = delta;
        self.check_consistency()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: NormWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Same operator, penalty and truth with new data.
    pub fn with_data(&self, y_obs: Vector, delta: f64) -> Result<Self> {
        let mut p = Self::new(self.operator.clone(), self.penalty, y_obs)?;
        p.x_true = self.x_true.clone();
        p.weights = self.weights;
        p.with_delta(delta)
    }

    fn check_consistency(&self) -> Result<()> {
        if let (Some(x), 0.0) = (&self.x_true, self.delta) {
            let r = (self.operator.apply(x)? - &self.y_obs).norm();
            if r > 1e-12 * self.y_obs.norm().max(1.0) {
                return invalid(format!("delta = 0 but ‖A x† − y‖ = {r:e}"));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<&Vector> {
        self.x_true.as_ref().ok_or(Error::MissingTruth)
    }

    /// `T_α(x) = ½‖Ax − y‖² + α J(x)`.
    pub fn objective(&self, alpha: f64, x: &Vector) -> Result<f64> {
        let r = self.operator.apply(x)? - &self.y_obs;
        Ok(0.5 * r.norm_squared() + alpha * self.penalty.eval(x))
    }

    pub fn solve(&self, alpha: f64) -> Result<Solution> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return invalid(format!("regularization parameter must be positive, got {alpha}"));
        }
        let x = match (&self.operator, self.penalty) {
            (Operator::Diagonal { sigma }, Penalty::Quadratic) => {
                Vector::from_fn(sigma.len(), |k, _| {
                    sigma[k] * self.y_obs[k] / (sigma[k] * sigma[k] + alpha)
                })
            }
            (Operator::Dense { matrix, .. }, Penalty::Quadratic) => {
                let mut normal = matrix.tr_mul(matrix);
                normal += DMatrix::identity(matrix.ncols(), matrix.ncols()) * alpha;
                let rhs = matrix.tr_mul(&self.y_obs);
                Cholesky::new(normal)
                    .ok_or_else(|| Error::Degenerate("normal equations not positive definite".into()))?
                    .solve(&rhs)
            }
            (Operator::Diagonal { sigma }, Penalty::PowerNorm { q }) => {
                let mut x = Vector::zeros(sigma.len());
                for k in 0..sigma.len() {
                    x[k] = scalar_power_minimizer(sigma[k], self.y_obs[k], alpha, q)
                        .ok_or(Error::NonConvergence { component: k })?;
                }
                x
            }
            (Operator::Dense { .. }, Penalty::PowerNorm { .. }) => {
                return Err(Error::Unsupported(
                    "power-norm penalties need a diagonal operator".into(),
                ))
            }
        };
        self.solution_at(alpha, x)
    }

    fn solution_at(&self, alpha: f64, x_alpha: Vector) -> Result<Solution> {
        let r = &self.y_obs - self.operator.apply(&x_alpha)?;
        let residual_norm = r.norm();
        let penalty_value = self.penalty.eval(&x_alpha);
        Ok(Solution {
            objective: 0.5 * residual_norm * residual_norm + alpha * penalty_value,
            dual_z: r / alpha,
            x_alpha,
            alpha,
            residual_norm,
            penalty_value,
        })
    }

    /// `T_α(x_ref) − T_α(x_α)`, evaluated as
    /// `½‖A(x_ref − x_α)‖² + α B_{ξ_α}(x_α, x_ref)` to avoid cancellation.
    pub fn objective_gap(&self, sol: &Solution, x_ref: &Vector) -> Result<f64> {
        let d = x_ref - &sol.x_alpha;
        let ad = self.operator.apply(&d)?;
        Ok(0.5 * ad.norm_squared() + sol.alpha * self.penalty.bregman_at(x_ref, &sol.x_alpha))
    }

    /// `J*(A*z) − J*(x*) − ⟨x†, A*z − x*⟩ + (α/2)‖z‖²` with `x* = ∂J(x†)`.
    ///
    /// The first three terms form the Bregman distance of `J*` between `A*z`
    /// and `x*`, which is summed componentwise.
    pub fn dual_objective(&self, alpha: f64, z: &Vector) -> Result<f64> {
        let x_true = self.truth()?;
        let p = self.operator.adjoint_apply(z)?;
        let breg = match self.penalty {
            Penalty::Quadratic => 0.5 * (&p - x_true).norm_squared(),
            Penalty::PowerNorm { .. } => {
                let qs = self.penalty.dual_exponent();
                let xs = self.penalty.subgradient(x_true);
                p.iter()
                    .zip(xs.iter())
                    .zip(x_true.iter())
                    .map(|((&a, &b), &g)| {
                        (a.abs().powf(qs) / qs - b.abs().powf(qs) / qs - g * (a - b)).max(0.0)
                    })
                    .sum()
            }
        };
        Ok(breg + 0.5 * alpha * z.norm_squared())
    }

    /// `A*(A x − y) + α ∂J(x)`.
    pub fn gradient(&self, alpha: f64, x: &Vector) -> Result<Vector> {
        let r = self.operator.apply(x)? - &self.y_obs;
        Ok(self.operator.adjoint_apply(&r)? + self.penalty.subgradient(x) * alpha)
    }
}

/// Minimizes `½(σx − y)² + (α/q)|x|^q` by safeguarded Newton on the
/// stationarity equation.
fn scalar_power_minimizer(sigma: f64, y: f64, alpha: f64, q: f64) -> Option<f64> {
    let b = sigma * y;
    if b == 0.0 {
        return Some(0.0);
    }
    let a = sigma * sigma;
    let target = b.abs();
    // g(t) = a t − |b| + α t^{q−1} is increasing on t ≥ 0 with g(0) < 0
    let g = |t: f64| a * t - target + alpha * t.powf(q - 1.0);
    let dg = |t: f64| a + alpha * (q - 1.0) * t.powf(q - 2.0);
    let (mut lo, mut hi) = (0.0, target / a);
    let mut t = hi;
    for _ in 0..SCALAR_MAX_ITER {
        let gt = g(t);
        if gt.abs() <= SCALAR_TOL * target.max(f64::MIN_POSITIVE) {
            return Some(b.signum() * t);
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            return Some(b.signum() * t);
        }
        let newton = t - gt / dg(t);
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    None
}
