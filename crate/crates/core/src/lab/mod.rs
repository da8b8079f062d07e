//! Noisy experiments: parameter choice, error measures, rate fits and the
//! uniform-constant checks of the rate bounds.

mod scenario;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, median, PowerFit};
use crate::index::{a_priori_alpha, kl_alpha_choice, IndexFunction, KLDescription};
use crate::model::{make_noisy, Noise, Operator, Vector};
use crate::regularity::penalty_decrease;
use crate::solver::TikhonovProblem;

pub use scenario::*;

/// Per-δ constants varying by this factor or more count as drift.
pub const DRIFT_LIMIT: f64 = 3.0;
/// δ points dropped at each end of the grid before fitting rates.
pub const TRIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ChoiceRule {
    /// `α = Θ^{-1}(δ/√2)` from a T-rate `Ψ2`.
    APriori { psi2: IndexFunction },
    /// `α = 1/∂φ(δ²)`.
    Kl { kl: KLDescription },
    /// `α = c δ^e`; `e = 0` gives a fixed α.
    PowerLaw { coefficient: f64, exponent: f64 },
}

impl ChoiceRule {
    pub fn alpha(&self, delta: f64) -> Result<f64> {
        let alpha = match self {
            Self::APriori { psi2 } => {
                if delta == 0.0 {
                    0.0
                } else {
                    a_priori_alpha(psi2, delta)?
                }
            }
            Self::Kl { kl } => {
                if delta == 0.0 {
                    0.0
                } else {
                    kl_alpha_choice(kl, delta)?.alpha
                }
            }
            Self::PowerLaw { coefficient, exponent } => {
                if *exponent == 0.0 {
                    *coefficient
                } else {
                    coefficient * delta.powf(*exponent)
                }
            }
        };
        if alpha.is_finite() && alpha > 0.0 {
            Ok(alpha)
        } else {
            invalid(format!("choice rule gave alpha = {alpha} at delta = {delta}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Seeded Gaussian direction, one stream per (δ, repetition).
    #[default]
    White,
    /// The single spectral mode with the largest error amplification
    /// `w_k σ_k/(σ_k² + α)`, signed to add to the approximation error.
    /// `w_k` are the X-norm weights when present. Diagonal operators only.
    WorstCase,
    Direction(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub deltas: Vec<f64>,
    pub rule: ChoiceRule,
    pub noise: NoiseModel,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub delta: f64,
    pub repetition: usize,
    pub alpha_used: f64,
    /// `B_ξ(x_α^δ, x†)` with `ξ ∈ ∂J(x_α^δ)`.
    pub bregman_error: f64,
    pub x_error_z: f64,
    pub x_error_x: Option<f64>,
    /// `|J(x†) − J(x_α^δ)|`.
    pub j_gap: f64,
    /// `‖A x_α^δ − A x†‖²`.
    pub residual_sq: f64,
    /// `|J(x†) − T_α^δ(x_α^δ)/α|`.
    pub tikhonov_gap: f64,
    /// `|T_α(x_α^δ) − T_α(x†)|` for the noise-free functional.
    pub tikhonov_difference: f64,
    pub seed: u64,
    pub stream: u64,
}

fn worst_case_direction(prob: &TikhonovProblem, alpha: f64) -> Result<Vector> {
    let Operator::Diagonal { sigma } = &prob.operator else {
        return Err(Error::Unsupported("worst-case noise needs a diagonal operator".into()));
    };
    let x_true = prob.truth()?;
    let n = sigma.len();
    let w = prob.weights.map(|w| w.weights(n)).unwrap_or_else(|| Vector::from_element(n, 1.0));
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..n {
        let amp = w[k] * sigma[k] / (sigma[k] * sigma[k] + alpha);
        if amp > best.1 {
            best = (k, amp);
        }
    }
    let k = best.0;
    // approximation error x_α − x† = −α x†/(σ² + α) in that mode
    let sign = if x_true[k] > 0.0 { -1.0 } else { 1.0 };
    let mut d = Vector::zeros(n);
    d[k] = sign;
    Ok(d)
}

/// Runs every (δ, repetition) pair. Base data are `A x†`; records come back
/// ordered by δ index, then repetition, independent of thread scheduling.
pub fn run_experiment(prob: &TikhonovProblem, plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    let x_true = prob.truth()?.clone();
    if plan.repetitions == 0 {
        return invalid("need at least one repetition");
    }
    if plan.deltas.iter().any(|&d| !(d.is_finite() && d >= 0.0)) {
        return invalid("noise levels must be finite and nonnegative");
    }
    let y = prob.operator.apply(&x_true)?;
    let reps = plan.repetitions;
    let jobs: Vec<(usize, usize)> =
        (0..plan.deltas.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();
    jobs.par_iter()
        .map(|&(i, r)| {
            let delta = plan.deltas[i];
            let stream = (i * reps + r) as u64;
            let alpha = plan.rule.alpha(delta)?;
            let noise = match &plan.noise {
                NoiseModel::White => Noise::Seeded { seed: plan.seed, stream },
                NoiseModel::WorstCase => Noise::Direction(worst_case_direction(prob, alpha)?),
                NoiseModel::Direction(d) => Noise::Direction(Vector::from_column_slice(d)),
            };
            let y_delta = make_noisy(&y, delta, &noise)?;
            let noisy = prob.with_data(y_delta, delta)?;
            let sol = noisy.solve(alpha)?;
            measure(prob, &noisy, &sol, delta, r, plan.seed, stream)
        })
        .collect()
}

fn measure(
    base: &TikhonovProblem,
    noisy: &TikhonovProblem,
    sol: &crate::solver::Solution,
    delta: f64,
    repetition: usize,
    seed: u64,
    stream: u64,
) -> Result<ExperimentRecord> {
    let x_true = base.truth()?;
    let j = &base.penalty;
    let x = &sol.x_alpha;
    let alpha = sol.alpha;
    let err = x - x_true;
    let residual_sq = base.operator.apply(&err)?.norm_squared();
    let j_decrease = penalty_decrease(j, x_true, x);
    // noise-free functional: T_α(x) − T_α(x†) = ½‖A(x − x†)‖² − α (J(x†) − J(x))
    let tikhonov_difference = (0.5 * residual_sq - alpha * j_decrease).abs();
    Ok(ExperimentRecord {
        delta,
        repetition,
        alpha_used: alpha,
        bregman_error: j.bregman_at(x_true, x),
        x_error_z: err.norm(),
        x_error_x: noisy.weights.map(|w| w.x_norm(&err)),
        j_gap: j_decrease.abs(),
        residual_sq,
        tikhonov_gap: (j.eval(x_true) - sol.objective / alpha).abs(),
        tikhonov_difference,
        seed,
        stream,
    })
}

/// `(δ, median over repetitions)` in increasing δ.
pub fn aggregate(records: &[ExperimentRecord], field: impl Fn(&ExperimentRecord) -> f64) -> Vec<(f64, f64)> {
    let mut deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    deltas
        .into_iter()
        .map(|d| {
            let vals: Vec<f64> = records.iter().filter(|r| r.delta == d).map(&field).collect();
            (d, median(&vals))
        })
        .collect()
}

/// Power-law fit of the per-δ medians after dropping `trim` points at each
/// end of the δ grid.
pub fn fit_rate(
    records: &[ExperimentRecord],
    field: impl Fn(&ExperimentRecord) -> f64,
    trim: usize,
) -> Result<PowerFit> {
    let agg: Vec<(f64, f64)> = aggregate(records, field).into_iter().filter(|p| p.0 > 0.0).collect();
    if agg.len() < 2 * trim + 2 {
        return Err(Error::InsufficientSamples { found: agg.len(), required: 2 * trim + 2 });
    }
    fit_power_law(&agg[trim..agg.len() - trim])
}

/// Smallest constants making one rate bound hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Over all records.
    pub constant: f64,
    /// `(δ, largest ratio over repetitions)`.
    pub per_delta: Vec<(f64, f64)>,
    /// Largest over smallest per-δ constant.
    pub drift: f64,
    pub drifting: bool,
}

impl BoundCheck {
    pub fn from_ratios(ratios: &[(f64, f64)]) -> Self {
        let mut deltas: Vec<f64> = ratios.iter().map(|r| r.0).collect();
        deltas.sort_by(f64::total_cmp);
        deltas.dedup();
        let per_delta: Vec<(f64, f64)> = deltas
            .into_iter()
            .map(|d| {
                let c = ratios.iter().filter(|r| r.0 == d).map(|r| r.1).fold(0.0, f64::max);
                (d, c)
            })
            .collect();
        let constant = per_delta.iter().map(|p| p.1).fold(0.0, f64::max);
        let smallest = per_delta.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let drift = if smallest > 0.0 { constant / smallest } else { f64::INFINITY };
        Self { constant, per_delta, drift, drifting: !(drift < DRIFT_LIMIT) }
    }
}

/// Uniform constants for the rate bounds at `alpha_used`:
///
/// * `bregman`: `B ≤ C (δ²/α + Ψ2(α))`
/// * `penalty`: `|J(x†) − J(x_α^δ)| ≤ C (Ψ2(α) + δ²/α)`
/// * `residual`: `‖A x_α^δ − A x†‖² ≤ C (α Ψ2(α) + δ²)`
/// * `tikhonov`: `|J(x†) − T_α^δ(x_α^δ)/α| ≤ C (Ψ2(α) + δ²/α)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub bregman: BoundCheck,
    pub penalty: BoundCheck,
    pub residual: BoundCheck,
    pub tikhonov: BoundCheck,
}

impl BoundsReport {
    pub fn any_drift(&self) -> bool {
        self.bregman.drifting || self.penalty.drifting || self.residual.drifting || self.tikhonov.drifting
    }
}

pub fn check_bounds(records: &[ExperimentRecord], psi2: &IndexFunction) -> Result<BoundsReport> {
    if records.is_empty() {
        return Err(Error::InsufficientSamples { found: 0, required: 1 });
    }
    let mut b = Vec::with_capacity(records.len());
    let mut p = Vec::with_capacity(records.len());
    let mut r = Vec::with_capacity(records.len());
    let mut t = Vec::with_capacity(records.len());
    for rec in records {
        let a = rec.alpha_used;
        let psi = psi2.eval(a)?;
        let d2 = rec.delta * rec.delta;
        let rhs_rate = psi + d2 / a;
        b.push((rec.delta, rec.bregman_error / rhs_rate));
        p.push((rec.delta, rec.j_gap / rhs_rate));
        r.push((rec.delta, rec.residual_sq / (a * psi + d2)));
        t.push((rec.delta, rec.tikhonov_gap / rhs_rate));
    }
    Ok(BoundsReport {
        bregman: BoundCheck::from_ratios(&b),
        penalty: BoundCheck::from_ratios(&p),
        residual: BoundCheck::from_ratios(&r),
        tikhonov: BoundCheck::from_ratios(&t),
    })
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}
