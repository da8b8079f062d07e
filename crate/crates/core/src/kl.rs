//! Kurdyka-Łojasiewicz inequalities for the Tikhonov functional.
//!
//! Exponent convention: a fitted slope `m` of `ln ΔT` against
//! `ln dist(0, ∂T_α(x†))` gives `φ(t) = t^{1−1/m}` and the Łojasiewicz
//! exponent `θ = 1/m`, so that `φ(t) = t^{1−θ}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_envelope, fit_power_law, PowerFit};
use crate::index::{IndexFunction, KLDescription};
use crate::model::{Operator, Vector};
use crate::regularity::ENVELOPE_QUANTILE;
use crate::solver::TikhonovProblem;

/// Gaps below this are dropped from fits: the minimizer is only accurate to
/// about machine precision.
pub const GAP_FLOOR: f64 = 1e-14;
/// Log-space residual above which a fit is flagged as not power-law.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;
/// Largest log-log slope in α of `∂φ(ΔT)·dist` still read as "bounded
/// below"; a clearly positive slope means the product vanishes as α → 0.
pub const DECAY_SLOPE_LIMIT: f64 = 0.1;

/// `‖A*(Ax − y) + α ∂J(x)‖`.
pub fn tikhonov_remoteness(prob: &TikhonovProblem, alpha: f64, x: &Vector) -> Result<f64> {
    Ok(prob.gradient(alpha, x)?.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSample {
    pub alpha: f64,
    /// `T_α(x†) − T_α(x_α)`.
    pub gap: f64,
    /// `dist(0, ∂T_α(x†))`.
    pub remoteness: f64,
}

fn path_samples(prob: &TikhonovProblem, alpha_grid: &[f64]) -> Result<Vec<KlSample>> {
    let x_true = prob.truth()?;
    if prob.delta != 0.0 {
        return invalid("KL samples need noise-free data (delta = 0)");
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return invalid("alpha grid must be nonempty with positive entries");
    }
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            let s = prob.solve(alpha)?;
            Ok(KlSample {
                alpha,
                gap: prob.objective_gap(&s, x_true)?,
                remoteness: tikhonov_remoteness(prob, alpha, x_true)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlVerification {
    pub holds: bool,
    /// Smallest `k` with `k ∂φ(ΔT) dist ≥ 1` on every sample.
    pub k: f64,
    /// Largest over smallest per-sample constant.
    pub k_ratio: f64,
    /// Log-log slope of `∂φ(ΔT)·dist` against α.
    pub decay_slope: f64,
    pub samples: Vec<KlSample>,
}

/// Checks `∂φ(ΔT)·dist(0, ∂T_α(x†)) ≥ 1/k` along the path.
///
/// `holds` requires a finite `k`, gaps that shrink with α, and a product that
/// does not decay to zero as α → 0 (slope at most [`DECAY_SLOPE_LIMIT`]).
pub fn kl_verify(
    prob: &TikhonovProblem,
    phi: &IndexFunction,
    alpha_grid: &[f64],
) -> Result<KlVerification> {
    if !phi.is_concave() {
        return invalid("KL function must be concave");
    }
    let samples: Vec<KlSample> =
        path_samples(prob, alpha_grid)?.into_iter().filter(|s| s.gap > 0.0).collect();
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { found: 0, required: 1 });
    }
    let mut ks = Vec::with_capacity(samples.len());
    let mut products = Vec::with_capacity(samples.len());
    for s in &samples {
        let prod = phi.derivative(s.gap)? * s.remoteness;
        products.push((s.alpha, prod));
        ks.push(1.0 / prod);
    }
    let k = ks.iter().copied().fold(0.0, f64::max);
    let k_min = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let decay_slope = if samples.len() >= 2 {
        fit_power_law(&products).map(|f| f.exponent).unwrap_or(f64::INFINITY)
    } else {
        0.0
    };
    let mut by_alpha = samples.clone();
    by_alpha.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let shrinking = by_alpha.windows(2).all(|w| w[0].gap <= w[1].gap);
    Ok(KlVerification {
        holds: k.is_finite() && k > 0.0 && shrinking && decay_slope <= DECAY_SLOPE_LIMIT,
        k,
        k_ratio: k / k_min,
        decay_slope,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLFit {
    /// Łojasiewicz exponent, `φ(t) = t^{1−θ}`.
    pub theta: f64,
    pub phi: IndexFunction,
    pub k: f64,
    /// Slope of `ln ΔT` against `ln dist`.
    pub slope: f64,
    pub residual: f64,
    /// Residual above [`FIT_RESIDUAL_LIMIT`].
    pub flagged: bool,
    pub verification: KlVerification,
    pub samples: Vec<KlSample>,
}

impl KLFit {
    /// The fit as a [`KLDescription`] carrying `‖∂J(x†)‖`.
    pub fn description(&self, prob: &TikhonovProblem) -> Result<KLDescription> {
        let norm = prob.penalty.remoteness(prob.truth()?);
        KLDescription::new(self.phi.clone(), self.k, norm)
    }
}

/// Fits `φ(t) = t^{1−1/m}` from the path samples with `ΔT > GAP_FLOOR` and
/// certifies `k` with [`kl_verify`].
pub fn kl_fit(prob: &TikhonovProblem, alpha_grid: &[f64]) -> Result<KLFit> {
    let samples: Vec<KlSample> = path_samples(prob, alpha_grid)?
        .into_iter()
        .filter(|s| s.gap > GAP_FLOOR && s.remoteness > 0.0)
        .collect();
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.remoteness, s.gap)).collect();
    let fit = fit_power_law(&pts)?;
    let m = fit.exponent;
    if !(m > 1.0) {
        return Err(Error::Degenerate(format!(
            "gap/remoteness slope {m} gives no concave KL function"
        )));
    }
    let phi = IndexFunction::power_law(1.0, 1.0 - 1.0 / m)?;
    let used: Vec<f64> = samples.iter().map(|s| s.alpha).collect();
    let verification = kl_verify(prob, &phi, &used)?;
    Ok(KLFit {
        theta: 1.0 / m,
        k: verification.k,
        phi,
        slope: m,
        residual: fit.residual,
        flagged: fit.residual > FIT_RESIDUAL_LIMIT,
        verification,
        samples,
    })
}

/// `‖x − x_α‖ ≤ k φ(T_α(x) − T_α(x_α))` at every test point, up to a relative
/// rounding slack of `1e-12`.
pub fn levelset_bound_check(
    prob: &TikhonovProblem,
    alpha: f64,
    phi: &IndexFunction,
    k: f64,
    test_points: &[Vector],
) -> Result<bool> {
    let s = prob.solve(alpha)?;
    for x in test_points {
        let gap = prob.objective_gap(&s, x)?;
        let lhs = (x - &s.x_alpha).norm();
        let rhs = k * phi.eval(gap)?;
        if lhs > rhs * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decay exponent `s` of `σ_k = k^{-s}`, if the operator has that form.
pub fn decay_exponent(op: &Operator) -> Option<f64> {
    let sigma = op.sigma()?;
    let n = sigma.len();
    if n < 2 || sigma[0] != 1.0 {
        return None;
    }
    let s = -sigma[n - 1].ln() / (n as f64).ln();
    let fits = sigma
        .iter()
        .enumerate()
        .all(|(i, &v)| (v - ((i + 1) as f64).powf(-s)).abs() <= 1e-12 * v);
    fits.then_some(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub gap: f64,
    /// `sup_z ⟨∇T_α(x), x − z⟩ / ‖x − z‖_X`.
    pub slope: f64,
    /// `ΔT^{1−a/2} / slope`.
    pub ratio: f64,
    /// Constant implied by the conditional stability estimate at this point.
    pub certified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    /// `a = b/s`.
    pub a: f64,
    pub holds: bool,
    /// Largest measured ratio.
    pub constant: f64,
    pub points: Vec<StabilityPoint>,
}

const SLOPE_DIRECTIONS: usize = 32;

/// KL inequality `(T_α(x) − T_α(x_α))^{1−a/2} ≤ C ‖∂T_α(x)‖_X` with the slope
/// taken in the weak norm.
///
/// The slope is the dual weighted gradient norm `‖W^{-1} ∇T_α(x)‖`, compared
/// against sampled directions. With `d = x − x_α` the stability estimate
/// `‖d‖_X ≤ ‖Ad‖^a ‖d‖^{1−a}` gives the certified constant
/// `2^{a/2−1} ‖d‖^{1−a}` for `a ≤ 1`; for `1 < a < 2` it gives
/// `2^{−1/2} ΔT^{(1−a)/2}`.
pub fn conditional_stability_kl(
    prob: &TikhonovProblem,
    alpha: f64,
    x_points: &[Vector],
    seed: u64,
) -> Result<StabilityCheck> {
    let weights = prob.weights.ok_or_else(|| {
        Error::InvalidArgument("conditional stability needs X-norm weights".into())
    })?;
    let s = decay_exponent(&prob.operator).ok_or_else(|| {
        Error::InvalidArgument("conditional stability needs sigma_k = k^{-s}".into())
    })?;
    if !matches!(prob.penalty, crate::penalty::Penalty::Quadratic) {
        return Err(Error::Unsupported("conditional stability uses the quadratic penalty".into()));
    }
    let a = weights.b / s;
    if !(a > 0.0 && a < 2.0) {
        return invalid(format!("stability exponent a = b/s must lie in (0, 2), got {a}"));
    }
    let sol = prob.solve(alpha)?;
    let n = prob.operator.cols();
    let w = weights.weights(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vector> = (0..SLOPE_DIRECTIONS)
        .map(|_| Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let mut points = Vec::with_capacity(x_points.len());
    for x in x_points {
        let g = prob.gradient(alpha, x)?;
        let analytic = g.component_div(&w).norm();
        let sampled = dirs
            .iter()
            .map(|d| g.dot(d) / weights.x_norm(d))
            .fold(0.0, f64::max);
        let slope = analytic.max(sampled);
        let gap = prob.objective_gap(&sol, x)?;
        let d = (x - &sol.x_alpha).norm();
        let certified = if a <= 1.0 {
            2f64.powf(a / 2.0 - 1.0) * d.powf(1.0 - a)
        } else {
            std::f64::consts::FRAC_1_SQRT_2 * gap.powf((1.0 - a) / 2.0)
        };
        let ratio = if gap == 0.0 { 0.0 } else { gap.powf(1.0 - a / 2.0) / slope };
        points.push(StabilityPoint { gap, slope, ratio, certified });
    }
    let holds = points.iter().all(|p| p.ratio.is_finite() && p.ratio <= p.certified * (1.0 + 1e-10));
    let constant = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(StabilityCheck { a, holds, constant, points })
}

/// KL exponents from the two routes under `x† = (A*A)^μ w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlExponentRoutes {
    /// `2μ/(2μ+1)` from `ΔT ∼ α^{2μ+1}` along the path.
    pub path: f64,
    /// `μ/(2μ+1)` from the interpolation inequality.
    pub interpolation: f64,
}

pub fn analytic_kl_exponents(mu: f64) -> KlExponentRoutes {
    KlExponentRoutes { path: 2.0 * mu / (2.0 * mu + 1.0), interpolation: mu / (2.0 * mu + 1.0) }
}

/// Interpolation-route exponent measured on source elements `d = (A*A)^μ w`:
/// half the envelope slope of `ln ‖d‖` against `ln ‖A d‖`, using the
/// eigenvectors and `random` unit vectors `w`.
pub fn interpolation_kl_exponent(
    op: &Operator,
    mu: f64,
    random: usize,
    seed: u64,
) -> Result<(f64, PowerFit)> {
    let n = op.cols();
    let mut ws: Vec<Vector> = (0..n)
        .map(|k| {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let w = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let nw = w.norm();
        ws.push(w / nw);
    }
    let mut pairs = Vec::with_capacity(ws.len());
    for w in &ws {
        let d = op.power_astar_a(mu, w)?;
        pairs.push((op.apply(&d)?.norm(), d.norm()));
    }
    let fit = fit_envelope(&pairs, ENVELOPE_QUANTILE)?;
    Ok((fit.exponent / 2.0, fit))
}
