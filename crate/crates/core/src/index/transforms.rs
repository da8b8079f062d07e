//! Conversions between the index functions of the regularity ladder.
//!
//! Every transform has a closed-form route for power laws on an unbounded
//! domain and a numeric route (`*_numeric`) that evaluates the defining
//! supremum or infimum pointwise on a caller-supplied grid. The plain entry
//! points pick the closed form when available, otherwise they run the numeric
//! route on the input's table nodes, or on [`default_grid`] for bounded power
//! laws.
//!
//! The distance-function bound is stored in index form `Ψ4(u) = Φ4(1/u)` so
//! that it is increasing and vanishes at zero; see [`distance_bound_at`].

use serde::{Deserialize, Serialize};

use super::function::IndexFunction;
use super::search::{log_grid, log_search, Goal, LOG10_HI, LOG10_LO};
use crate::error::{invalid, Error, Result};

const DEFAULT_GRID_POINTS: usize = 241;

/// 241 log-spaced points on `[1e-12, 1e12]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(10f64.powf(LOG10_LO), 10f64.powf(LOG10_HI), DEFAULT_GRID_POINTS)
}

fn closed_form(f: &IndexFunction) -> Option<(f64, f64)> {
    if f.domain_upper().is_infinite() {
        f.as_power_law()
    } else {
        None
    }
}

fn route_grid(f: &IndexFunction) -> Vec<f64> {
    if f.is_tabulated() {
        f.nodes().to_vec()
    } else {
        default_grid()
    }
}

/// Searches `objective(f(t), t)` over the domain of `f`.
///
/// Returns `None` when the optimum sits on an artificial end of the search
/// interval, i.e. the true extremum is not attained inside `[1e-12, 1e12]`.
fn extremize(
    f: &IndexFunction,
    objective: impl Fn(f64, f64) -> f64,
    goal: Goal,
) -> Option<f64> {
    let lo = 10f64.powf(LOG10_LO);
    let cap = 10f64.powf(LOG10_HI);
    let upper = f.domain_upper();
    let (hi, hard_end) = if upper > cap {
        (cap, false)
    } else if f.is_tabulated() {
        (upper, true)
    } else {
        (upper * (1.0 - 1e-12), true)
    };
    if hi <= lo {
        return None;
    }
    let e = log_search(|t| objective(f.value(t), t), lo, hi, goal);
    if e.at_lower || (e.at_upper && !hard_end) || !e.value.is_finite() {
        return None;
    }
    Some(e.value)
}

/// Tabulates `(x, g(x))` on `grid`, keeping only points that extend a
/// strictly increasing positive sequence.
fn tabulate_points(
    grid: &[f64],
    g: impl Fn(f64) -> Option<f64>,
    what: &str,
) -> Result<IndexFunction> {
    check_grid(grid)?;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &x in grid {
        let Some(v) = g(x) else { continue };
        if !(v.is_finite() && v > 0.0) {
            continue;
        }
        if points.last().is_some_and(|&(_, prev)| v <= prev) {
            continue;
        }
        points.push((x, v));
    }
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{what}: fewer than two finite positive values on the grid"
        )));
    }
    IndexFunction::tabulated(&points)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return invalid("empty evaluation grid");
    }
    if grid.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return invalid("grid points must be positive and finite");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("grid must be strictly increasing");
    }
    Ok(())
}

/// `Ψ2(α) = sup_{t>0} (Φ3(t) − t²/(2α))`.
pub fn psi2_from_phi3(phi3: &IndexFunction) -> Result<IndexFunction> {
    match closed_form(phi3) {
        Some((c, kappa)) => {
            if kappa >= 2.0 {
                return Err(Error::Degenerate(format!(
                    "sup_t (c t^{kappa} - t^2/(2a)) is infinite for exponent >= 2"
                )));
            }
            let q = kappa / (2.0 - kappa);
            IndexFunction::power_law(c * (1.0 - kappa / 2.0) * (c * kappa).powf(q), q)
        }
        None => psi2_from_phi3_numeric(phi3, &route_grid(phi3)),
    }
}

pub fn psi2_from_phi3_numeric(phi3: &IndexFunction, grid: &[f64]) -> Result<IndexFunction> {
    tabulate_points(
        grid,
        |alpha| extremize(phi3, |v, t| v - t * t / (2.0 * alpha), Goal::Maximize),
        "psi2_from_phi3",
    )
}

/// `Φ3(s) = inf_{t>0} (Ψ2(t) + s²/(2t))`.
pub fn phi3_from_psi2(psi2: &IndexFunction) -> Result<IndexFunction> {
    match closed_form(psi2) {
        Some((c, q)) => {
            let e = q / (q + 1.0);
            IndexFunction::power_law(c * (1.0 + q) * (2.0 * q * c).powf(-e), 2.0 * e)
        }
        None => phi3_from_psi2_numeric(psi2, &route_grid(psi2)),
    }
}

pub fn phi3_from_psi2_numeric(psi2: &IndexFunction, grid: &[f64]) -> Result<IndexFunction> {
    tabulate_points(
        grid,
        |s| extremize(psi2, |v, t| v + s * s / (2.0 * t), Goal::Minimize),
        "phi3_from_psi2",
    )
}

/// Distance-function bound in index form, `Ψ4(u) = sup_{t>0} (Φ3(t) − t/u)`.
///
/// `Φ4(r) = Ψ4(1/r)` bounds `D(r)`. For `Φ3(t) = c t^κ` this needs `κ < 1`;
/// at `κ ≥ 1` the supremum is zero or infinite and the call is rejected.
pub fn phi4_from_phi3(phi3: &IndexFunction) -> Result<IndexFunction> {
    match closed_form(phi3) {
        Some((c, kappa)) => {
            if kappa >= 1.0 {
                return Err(Error::Degenerate(format!(
                    "sup_t (c t^{kappa} - r t) is 0 or infinite for exponent >= 1"
                )));
            }
            let e = 1.0 / (1.0 - kappa);
            IndexFunction::power_law((1.0 - kappa) / kappa * (c * kappa).powf(e), kappa * e)
        }
        None => phi4_from_phi3_numeric(phi3, &route_grid(phi3)),
    }
}

pub fn phi4_from_phi3_numeric(phi3: &IndexFunction, grid: &[f64]) -> Result<IndexFunction> {
    tabulate_points(
        grid,
        |u| extremize(phi3, |v, t| v - t / u, Goal::Maximize),
        "phi4_from_phi3",
    )
}

/// `Φ3(s) = inf_{r>0} (Φ4(r) + r s) = inf_{u>0} (Ψ4(u) + s/u)`.
pub fn phi3_from_phi4(psi4: &IndexFunction) -> Result<IndexFunction> {
    match closed_form(psi4) {
        Some((c, q)) => IndexFunction::power_law(
            (q + 1.0) / q * (q * c).powf(1.0 / (q + 1.0)),
            q / (q + 1.0),
        ),
        None => phi3_from_phi4_numeric(psi4, &route_grid(psi4)),
    }
}

pub fn phi3_from_phi4_numeric(psi4: &IndexFunction, grid: &[f64]) -> Result<IndexFunction> {
    tabulate_points(
        grid,
        |s| extremize(psi4, |v, u| v + s / u, Goal::Minimize),
        "phi3_from_phi4",
    )
}

/// `Φ4(r) = Ψ4(1/r)`; `r = 0` is rejected.
pub fn distance_bound_at(psi4: &IndexFunction, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return invalid(format!("distance bound needs r > 0, got {r}"));
    }
    psi4.eval(1.0 / r)
}

/// `Θ(α) = sqrt(α Ψ2(α))`.
pub fn companion(psi2: &IndexFunction) -> Result<IndexFunction> {
    match psi2.as_power_law() {
        Some((c, p)) => IndexFunction::power_law_on(c.sqrt(), (p + 1.0) / 2.0, psi2.domain_upper()),
        None => {
            let points: Vec<_> = psi2
                .nodes()
                .iter()
                .map(|&t| (t, (t * psi2.value(t)).sqrt()))
                .collect();
            IndexFunction::tabulated(&points)
        }
    }
}

/// `α* = Θ^{-1}(δ/√2)`.
pub fn a_priori_alpha(psi2: &IndexFunction, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return invalid(format!("a-priori choice needs delta > 0, got {delta}"));
    }
    companion(psi2)?.inverse(delta / std::f64::consts::SQRT_2)
}

/// Concave desingularization function with its KL constant and the
/// remoteness `‖∂J(x†)‖` of the penalty at the true solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLDescription {
    pub phi: IndexFunction,
    pub k: f64,
    pub subgradient_norm: f64,
}

impl KLDescription {
    pub fn new(phi: IndexFunction, k: f64, subgradient_norm: f64) -> Result<Self> {
        let kl = Self { phi, k, subgradient_norm };
        kl.validate()?;
        Ok(kl)
    }

    /// Checks concavity and that `z (∂φ)^{-1}(z)` is nonincreasing.
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return invalid(format!("KL constant must be positive, got {}", self.k));
        }
        if !(self.subgradient_norm.is_finite() && self.subgradient_norm >= 0.0) {
            return invalid(format!(
                "subgradient norm must be nonnegative, got {}",
                self.subgradient_norm
            ));
        }
        if !self.phi.is_concave() {
            return invalid("KL function must be concave");
        }
        match self.phi.as_power_law() {
            // z (∂φ)^{-1}(z) ∝ z^{p/(p-1)}
            Some((_, p)) if p >= 1.0 => Err(Error::Degenerate(
                "z (∂φ)^{-1}(z) does not decay for a linear KL function".into(),
            )),
            Some(_) => Ok(()),
            None => {
                // the chord from the origin has no meaningful midpoint
                let nodes = self.phi.slope_nodes();
                let bad = nodes[1.min(nodes.len())..]
                    .windows(2)
                    .any(|w| w[1].0 * w[1].1 < w[0].0 * w[0].1 * (1.0 - 1e-9));
                if bad {
                    invalid("z (∂φ)^{-1}(z) increases with z on the table")
                } else {
                    Ok(())
                }
            }
        }
    }

    fn scale(&self) -> Result<f64> {
        let kk = self.k * self.subgradient_norm;
        if kk > 0.0 {
            Ok(kk)
        } else {
            Err(Error::Degenerate("k ‖∂J(x†)‖ vanishes; x† minimizes J".into()))
        }
    }
}

/// `Ψ(t) = (1/t) (∂φ)^{-1}(1/(t k ‖∂J(x†)‖))`.
pub fn psi_from_kl(kl: &KLDescription) -> Result<IndexFunction> {
    kl.validate()?;
    let kk = kl.scale()?;
    match closed_form(&kl.phi) {
        Some((c, p)) => IndexFunction::power_law((c * p * kk).powf(1.0 / (1.0 - p)), p / (1.0 - p)),
        None if kl.phi.is_tabulated() => {
            // at t = 1/(z K) the value is z K (∂φ)^{-1}(z)
            let mut nodes = kl.phi.slope_nodes();
            nodes.reverse();
            let grid: Vec<f64> = nodes.iter().map(|&(s, _)| 1.0 / (s * kk)).collect();
            psi_from_kl_numeric(kl, &grid)
        }
        None => psi_from_kl_numeric(kl, &default_grid()),
    }
}

pub fn psi_from_kl_numeric(kl: &KLDescription, grid: &[f64]) -> Result<IndexFunction> {
    kl.validate()?;
    let kk = kl.scale()?;
    tabulate_points(
        grid,
        |t| kl.phi.inverse_derivative(1.0 / (t * kk)).ok().map(|m| m / t),
        "psi_from_kl",
    )
}

/// Builds `φ` with `(∂φ)^{-1}(z) = Θ̄(K z)`, `Θ̄(a) = Ψ(1/a)/a`, and `k = 1`.
pub fn kl_from_psi(psi: &IndexFunction, subgradient_norm: f64) -> Result<KLDescription> {
    if !(subgradient_norm.is_finite() && subgradient_norm > 0.0) {
        return invalid(format!("subgradient norm must be positive, got {subgradient_norm}"));
    }
    match closed_form(psi) {
        Some((c, q)) => {
            let phi = IndexFunction::power_law(
                (q + 1.0) / q * c.powf(1.0 / (q + 1.0)) / subgradient_norm,
                q / (q + 1.0),
            )?;
            KLDescription::new(phi, 1.0, subgradient_norm)
        }
        None => kl_from_psi_numeric(psi, subgradient_norm, &route_grid(psi)),
    }
}

/// Tabulates `∂φ` at `m = t Ψ(t)`, `∂φ(m) = 1/(K t)` for `t` in `grid`, and
/// integrates it segment by segment as a local power law.
pub fn kl_from_psi_numeric(
    psi: &IndexFunction,
    subgradient_norm: f64,
    grid: &[f64],
) -> Result<KLDescription> {
    if !(subgradient_norm.is_finite() && subgradient_norm > 0.0) {
        return invalid(format!("subgradient norm must be positive, got {subgradient_norm}"));
    }
    check_grid(grid)?;
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &t in grid {
        let Ok(v) = psi.eval(t) else { continue };
        let m = t * v;
        if !(m.is_finite() && m > 0.0) || nodes.last().is_some_and(|&(prev, _)| m <= prev) {
            continue;
        }
        nodes.push((m, 1.0 / (subgradient_norm * t)));
    }
    if nodes.len() < 2 {
        return Err(Error::Degenerate("kl_from_psi: fewer than two usable nodes".into()));
    }
    let beta = |a: (f64, f64), b: (f64, f64)| (b.1 / a.1).ln() / (b.0 / a.0).ln();
    let b0 = beta(nodes[0], nodes[1]);
    if b0 <= -1.0 {
        return Err(Error::Degenerate(
            "∂φ is not integrable at zero on the first segment".into(),
        ));
    }
    let mut acc = nodes[0].0 * nodes[0].1 / (b0 + 1.0);
    let mut points = vec![(nodes[0].0, acc)];
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let bt = beta(a, b);
        acc += if (bt + 1.0).abs() < 1e-12 {
            a.0 * a.1 * (b.0 / a.0).ln()
        } else {
            (b.0 * b.1 - a.0 * a.1) / (bt + 1.0)
        };
        points.push((b.0, acc));
    }
    KLDescription::new(IndexFunction::tabulated(&points)?, 1.0, subgradient_norm)
}

/// Parameter choice `α* = 1/∂φ(δ²)` with the concavity bound
/// `∂φ(δ²) δ² ≤ φ(δ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlAlphaChoice {
    pub alpha: f64,
    /// `∂φ(δ²) δ²`.
    pub rate_bound: f64,
    /// `φ(δ²)`.
    pub phi_value: f64,
}

pub fn kl_alpha_choice(kl: &KLDescription, delta: f64) -> Result<KlAlphaChoice> {
    if !(delta.is_finite() && delta > 0.0) {
        return invalid(format!("KL choice needs delta > 0, got {delta}"));
    }
    let t = delta * delta;
    let d = kl.phi.derivative(t)?;
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Degenerate(format!("∂φ(δ²) = {d} gives no admissible alpha")));
    }
    Ok(KlAlphaChoice { alpha: 1.0 / d, rate_bound: d * t, phi_value: kl.phi.eval(t)? })
}
