//! Measured regularity: J-rate, T-rate, distance function and variational
//! inequality fits along the noise-free regularization path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_envelope, PowerFit};
use crate::index::search::{log_grid, log_search, Goal};
use crate::index::{phi4_from_phi3, IndexFunction};
use crate::model::Vector;
use crate::penalty::Penalty;
use crate::solver::TikhonovProblem;

/// Quantile used for upper-envelope fits.
pub const ENVELOPE_QUANTILE: f64 = 0.99;
const MIN_VARIATIONAL_SAMPLES: usize = 10;
const ASCENT_ITERS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub abscissa: f64,
    pub value: f64,
}

/// 40 log-spaced values of α in `[1e-8, 1]`.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(1e-8, 1.0, 40)
}

fn require_noise_free(prob: &TikhonovProblem) -> Result<&Vector> {
    let x = prob.truth()?;
    if prob.delta != 0.0 {
        return invalid("rates along the path need noise-free data (delta = 0)");
    }
    Ok(x)
}

fn check_alphas(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return invalid("alpha grid must be nonempty with positive entries");
    }
    Ok(())
}

/// `J(x†) − J(x)`; for the quadratic penalty as `½⟨x† − x, x† + x⟩`.
pub fn penalty_decrease(penalty: &Penalty, x_true: &Vector, x: &Vector) -> f64 {
    match penalty {
        Penalty::Quadratic => 0.5 * (x_true - x).dot(&(x_true + x)),
        _ => penalty.eval(x_true) - penalty.eval(x),
    }
}

/// Signed samples of `J(x†) − J(x_α)`.
pub fn j_rate(prob: &TikhonovProblem, alpha_grid: &[f64]) -> Result<Vec<RateSample>> {
    let x_true = require_noise_free(prob)?;
    check_alphas(alpha_grid)?;
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            let s = prob.solve(alpha)?;
            Ok(RateSample {
                abscissa: alpha,
                value: penalty_decrease(&prob.penalty, x_true, &s.x_alpha),
            })
        })
        .collect()
}

/// Samples of `(T_α(x†) − T_α(x_α))/α`.
pub fn t_rate(prob: &TikhonovProblem, alpha_grid: &[f64]) -> Result<Vec<RateSample>> {
    let x_true = require_noise_free(prob)?;
    check_alphas(alpha_grid)?;
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            let s = prob.solve(alpha)?;
            Ok(RateSample { abscissa: alpha, value: prob.objective_gap(&s, x_true)? / alpha })
        })
        .collect()
}

/// `D(r) = sup_x (J(x†) − J(x) − r‖A(x − x†)‖)`.
///
/// The best of three lower bounds: a search along the Tikhonov path with data
/// `A x†` (where the supremum is attained for `r > 0`), the candidates `x = 0`
/// and `x = x†`, and projected supergradient ascent from `x†` followed by a
/// line search along its final direction.
pub fn distance_function(prob: &TikhonovProblem, r: f64) -> Result<f64> {
    let x_true = prob.truth()?;
    if !(r.is_finite() && r >= 0.0) {
        return invalid(format!("distance function needs r >= 0, got {r}"));
    }
    let j = &prob.penalty;
    let a = &prob.operator;
    let y = a.apply(x_true)?;
    let objective = |x: &Vector| -> Result<f64> {
        let fid = (a.apply(x)? - &y).norm();
        Ok(penalty_decrease(j, x_true, x) - r * fid)
    };
    if r == 0.0 {
        return Ok(j.eval(x_true));
    }

    let mut best = 0.0f64.max(objective(&Vector::zeros(x_true.len()))?);

    let exact = prob.with_data(y.clone(), 0.0)?;
    let along_path = |alpha: f64| -> f64 {
        exact.solve(alpha).and_then(|s| objective(&s.x_alpha)).unwrap_or(f64::NEG_INFINITY)
    };
    best = best.max(log_search(along_path, 1e-12, 1e12, Goal::Maximize).value);

    // supergradient ascent with diminishing normalized steps
    let scale = x_true.norm().max(1e-300);
    let mut x = x_true.clone();
    let mut best_x = x.clone();
    let mut best_ascent = 0.0;
    let mut dir = Vector::zeros(x.len());
    for k in 0..ASCENT_ITERS {
        let res = a.apply(&x)? - &y;
        let nres = res.norm();
        let mut g = -j.subgradient(&x);
        if nres > 0.0 {
            g -= a.adjoint_apply(&res)? * (r / nres);
        }
        let ng = g.norm();
        if ng == 0.0 {
            break;
        }
        dir = g / ng;
        x += &dir * (scale / (k as f64 + 1.0).sqrt());
        let v = objective(&x)?;
        if v > best_ascent {
            best_ascent = v;
            best_x = x.clone();
        }
    }
    let base = best_x.clone();
    let polish = |t: f64| objective(&(&base + &dir * (t - 1.0) * scale)).unwrap_or(f64::NEG_INFINITY);
    let line = log_search(polish, 1e-6, 2.0, Goal::Maximize).value;
    best = best.max(best_ascent).max(line);
    Ok(best)
}

/// `D(r)` with the upper bound `Φ4(r)` derived from a variational index
/// function `Φ3`.
pub fn distance_bracket(prob: &TikhonovProblem, r: f64, phi3: &IndexFunction) -> Result<(f64, f64)> {
    let lower = distance_function(prob, r)?;
    let psi4 = phi4_from_phi3(phi3)?;
    let upper = crate::index::distance_bound_at(&psi4, r)?;
    Ok((lower, upper))
}

/// Envelope fit of `J(x†) − J(x) ≤ Φ3(‖A(x − x†)‖)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalFit {
    pub fit: PowerFit,
    /// `(‖A(x − x†)‖, J(x†) − J(x))` with positive ordinate.
    pub pairs: Vec<(f64, f64)>,
}

/// Samples `x_α` on the grid plus `sample_count` perturbations
/// `x† + s (x_α − x†) + ε` and fits the 0.99-quantile upper envelope.
pub fn variational_fit(
    prob: &TikhonovProblem,
    alpha_grid: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<VariationalFit> {
    let x_true = require_noise_free(prob)?;
    check_alphas(alpha_grid)?;
    let path: Vec<Vector> = alpha_grid
        .par_iter()
        .map(|&a| prob.solve(a).map(|s| s.x_alpha))
        .collect::<Result<_>>()?;
    let mut candidates = path.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let d = &path[rng.random_range(0..path.len())] - x_true;
        let s: f64 = rng.random_range(0.5..1.5);
        let eps = 1e-3 * d.norm();
        let noise = Vector::from_fn(d.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let nn = noise.norm();
        let mut x = x_true + d * s;
        if nn > 0.0 {
            x += noise * (eps / nn);
        }
        candidates.push(x);
    }
    let mut pairs = Vec::with_capacity(candidates.len());
    for x in &candidates {
        let dist = prob.operator.apply(&(x - x_true))?.norm();
        let gain = penalty_decrease(&prob.penalty, x_true, x);
        if dist > 0.0 && gain > 0.0 {
            pairs.push((dist, gain));
        }
    }
    if pairs.len() < MIN_VARIATIONAL_SAMPLES {
        return Err(Error::InsufficientSamples {
            found: pairs.len(),
            required: MIN_VARIATIONAL_SAMPLES,
        });
    }
    let fit = fit_envelope(&pairs, ENVELOPE_QUANTILE)?;
    Ok(VariationalFit { fit, pairs })
}
