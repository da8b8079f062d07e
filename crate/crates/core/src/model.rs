//! Forward operators, weighted norms, source elements and data noise.

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vector = DVector<f64>;

/// Finite-dimensional linear map `A: R^m -> R^n`.
#[derive(Debug, Clone)]
pub enum Operator {
    /// `A = diag(σ)` with `σ_1 ≥ σ_2 ≥ … > 0`.
    Diagonal { sigma: Vector },
    Dense { matrix: DMatrix<f64>, svd: Box<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> },
}

impl Operator {
    pub fn diagonal(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return invalid("diagonal operator needs at least one singular value");
        }
        for (k, &s) in sigma.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return invalid(format!("singular value {k} must be positive, got {s}"));
            }
            if k > 0 && s > sigma[k - 1] {
                return invalid(format!("singular values must be nonincreasing at index {k}"));
            }
        }
        Ok(Self::Diagonal { sigma: Vector::from_vec(sigma) })
    }

    /// `σ_k = k^{-s}`, `k = 1..=n`.
    pub fn power_decay(n: usize, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return invalid(format!("decay exponent must be nonnegative, got {s}"));
        }
        Self::diagonal((1..=n).map(|k| (k as f64).powf(-s)).collect())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; n])
    }

    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.is_empty() {
            return invalid("dense operator needs a nonempty matrix");
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return invalid("dense operator has non-finite entries");
        }
        let svd = SVD::new(matrix.clone(), true, true);
        Ok(Self::Dense { matrix, svd: Box::new(svd) })
    }

    /// Dimension of the data space.
    pub fn rows(&self) -> usize {
        match self {
            Self::Diagonal { sigma } => sigma.len(),
            Self::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    /// Dimension of the solution space.
    pub fn cols(&self) -> usize {
        match self {
            Self::Diagonal { sigma } => sigma.len(),
            Self::Dense { matrix, .. } => matrix.ncols(),
        }
    }

    pub fn sigma(&self) -> Option<&Vector> {
        match self {
            Self::Diagonal { sigma } => Some(sigma),
            Self::Dense { .. } => None,
        }
    }

    pub fn singular_values(&self) -> Vector {
        match self {
            Self::Diagonal { sigma } => sigma.clone(),
            Self::Dense { svd, .. } => svd.singular_values.clone(),
        }
    }

    /// Smallest singular value is positive and there are at least as many
    /// rows as columns.
    pub fn is_injective(&self) -> bool {
        match self {
            Self::Diagonal { .. } => true,
            Self::Dense { matrix, svd } => {
                let sv = &svd.singular_values;
                let tol = sv.max() * f64::EPSILON * matrix.nrows().max(matrix.ncols()) as f64;
                matrix.nrows() >= matrix.ncols() && sv.iter().all(|&s| s > tol)
            }
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_len(self.cols(), x)?;
        Ok(match self {
            Self::Diagonal { sigma } => sigma.component_mul(x),
            Self::Dense { matrix, .. } => matrix * x,
        })
    }

    pub fn adjoint_apply(&self, y: &Vector) -> Result<Vector> {
        check_len(self.rows(), y)?;
        Ok(match self {
            Self::Diagonal { sigma } => sigma.component_mul(y),
            Self::Dense { matrix, .. } => matrix.tr_mul(y),
        })
    }

    /// `(A*A)^μ w`.
    pub fn power_astar_a(&self, mu: f64, w: &Vector) -> Result<Vector> {
        if !(mu.is_finite() && mu >= 0.0) {
            return invalid(format!("operator power needs mu >= 0, got {mu}"));
        }
        check_len(self.cols(), w)?;
        if mu == 0.0 {
            return Ok(w.clone());
        }
        Ok(match self {
            Self::Diagonal { sigma } => sigma.map(|s| s.powf(2.0 * mu)).component_mul(w),
            Self::Dense { svd, .. } => {
                let v_t = svd.v_t.as_ref().expect("SVD computed with V");
                let coeffs = (v_t * w).component_mul(&svd.singular_values.map(|s| s.powf(2.0 * mu)));
                v_t.tr_mul(&coeffs)
            }
        })
    }
}

fn check_len(expected: usize, v: &Vector) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found: v.len() })
    }
}

/// JSON form of an [`Operator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum OperatorRecord {
    Diagonal { singular_values: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
}

impl TryFrom<OperatorRecord> for Operator {
    type Error = Error;

    fn try_from(record: OperatorRecord) -> Result<Self> {
        match record {
            OperatorRecord::Diagonal { singular_values } => Self::diagonal(singular_values),
            OperatorRecord::Dense { rows } => {
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                if let Some(bad) = rows.iter().find(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
                }
                Self::dense(DMatrix::from_row_iterator(n, m, rows.into_iter().flatten()))
            }
        }
    }
}

impl From<&Operator> for OperatorRecord {
    fn from(op: &Operator) -> Self {
        match op {
            Operator::Diagonal { sigma } => {
                OperatorRecord::Diagonal { singular_values: sigma.iter().copied().collect() }
            }
            Operator::Dense { matrix, .. } => OperatorRecord::Dense {
                rows: matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            },
        }
    }
}

/// Weak norm `‖x‖_X² = Σ_k k^{-2b} x_k²`; `b = 0` is the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    pub b: f64,
}

impl NormWeights {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return invalid(format!("norm weight exponent must be nonnegative, got {b}"));
        }
        Ok(Self { b })
    }

    /// `k^{-b}` for `k = 1..=n`.
    pub fn weights(&self, n: usize) -> Vector {
        Vector::from_fn(n, |i, _| ((i + 1) as f64).powf(-self.b))
    }

    pub fn x_norm(&self, x: &Vector) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let w = ((i + 1) as f64).powf(-self.b);
                (w * v) * (w * v)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// How the noise direction is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Direction(Vector),
    /// Gaussian direction from a ChaCha8 generator on the given stream.
    Seeded { seed: u64, stream: u64 },
}

impl Noise {
    pub fn seeded(seed: u64) -> Self {
        Self::Seeded { seed, stream: 0 }
    }
}

pub fn gaussian_direction(n: usize, seed: u64, stream: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// `y^δ = y + δ d/‖d‖`, so `‖y − y^δ‖ = δ` up to rounding.
pub fn make_noisy(y: &Vector, delta: f64, noise: &Noise) -> Result<Vector> {
    if !(delta.is_finite() && delta >= 0.0) {
        return invalid(format!("noise level must be nonnegative, got {delta}"));
    }
    if delta == 0.0 {
        return Ok(y.clone());
    }
    let d = match noise {
        Noise::Direction(d) => {
            check_len(y.len(), d)?;
            d.clone()
        }
        Noise::Seeded { seed, stream } => gaussian_direction(y.len(), *seed, *stream),
    };
    let norm = d.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return invalid("noise direction must be a nonzero finite vector");
    }
    Ok(y + d * (delta / norm))
}

/// Unit-norm source elements `w` with alternating signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceProfile {
    /// `w_k = (−1)^{k+1}/√n`.
    #[default]
    Alternating,
    /// `w_k ∝ (−1)^{k+1} k^{−1/2}`, normalized.
    Harmonic,
}

impl SourceProfile {
    pub fn element(self, n: usize) -> Vector {
        let sign = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        let w = match self {
            Self::Alternating => Vector::from_fn(n, |i, _| sign(i)),
            Self::Harmonic => Vector::from_fn(n, |i, _| sign(i) / ((i + 1) as f64).sqrt()),
        };
        let norm = w.norm();
        w / norm
    }
}

/// Serde adapter that writes a [`Vector`] as a plain JSON array.
pub mod vector_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn diagonal_and_dense_actions() {
        let a = Operator::diagonal(vec![1.0, 0.5]).unwrap();
        assert_eq!(a.apply(&v(&[1.0, 1.0])).unwrap(), v(&[1.0, 0.5]));
        let id = Operator::identity(3).unwrap();
        assert_eq!(id.apply(&v(&[1.0, -2.0, 3.0])).unwrap(), v(&[1.0, -2.0, 3.0]));
        let p = Operator::dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(p.apply(&v(&[2.0, 3.0])).unwrap(), v(&[3.0, 2.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Operator::diagonal(vec![0.5, 1.0]).is_err());
        assert!(Operator::diagonal(vec![1.0, 0.0]).is_err());
        let a = Operator::identity(2).unwrap();
        assert_eq!(
            a.apply(&v(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(a.power_astar_a(-0.1, &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn operator_powers() {
        let a = Operator::diagonal(vec![1.0, 0.5]).unwrap();
        let w = v(&[1.0, 1.0]);
        assert_eq!(a.power_astar_a(0.0, &w).unwrap(), w);
        assert_eq!(a.power_astar_a(0.5, &w).unwrap(), v(&[1.0, 0.5]));
        assert_eq!(a.power_astar_a(1.0, &w).unwrap(), v(&[1.0, 0.25]));
    }

    #[test]
    fn dense_power_matches_diagonal() {
        let d = Operator::power_decay(4, 1.0).unwrap();
        let m = DMatrix::from_diagonal(d.sigma().unwrap());
        let dense = Operator::dense(m).unwrap();
        let w = v(&[0.3, -1.0, 2.0, 0.5]);
        let a = d.power_astar_a(0.3, &w).unwrap();
        let b = dense.power_astar_a(0.3, &w).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn weighted_norms() {
        assert_eq!(NormWeights::new(0.0).unwrap().x_norm(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(NormWeights::new(1.0).unwrap().x_norm(&v(&[0.0, 2.0])), 1.0);
        assert!(NormWeights::new(-1.0).is_err());
    }

    #[test]
    fn noise_has_exact_norm() {
        let y = v(&[1.0, 0.0]);
        assert_eq!(make_noisy(&y, 0.0, &Noise::seeded(3)).unwrap(), y);
        let yd = make_noisy(&y, 0.1, &Noise::Direction(v(&[0.0, 5.0]))).unwrap();
        assert_eq!(yd, v(&[1.0, 0.1]));
        assert!(make_noisy(&y, 0.1, &Noise::Direction(v(&[0.0, 0.0]))).is_err());
        // data of the same magnitude as the noise, so the subtraction is exact enough
        let y = Vector::from_element(50, 1e-4);
        for seed in 0..20 {
            let yd = make_noisy(&y, 1e-3, &Noise::seeded(seed)).unwrap();
            assert!(((yd - &y).norm() - 1e-3).abs() < 1e-3 * 1e-14);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let y = Vector::zeros(10);
        let n = Noise::Seeded { seed: 9, stream: 4 };
        assert_eq!(make_noisy(&y, 1.0, &n).unwrap(), make_noisy(&y, 1.0, &n).unwrap());
        assert_ne!(gaussian_direction(10, 9, 4), gaussian_direction(10, 9, 5));
    }

    #[test]
    fn source_elements_have_unit_norm() {
        for p in [SourceProfile::Alternating, SourceProfile::Harmonic] {
            let w = p.element(200);
            assert!((w.norm() - 1.0).abs() < 1e-14);
            assert!(w[0] > 0.0 && w[1] < 0.0);
        }
    }
}
