//! Power-law fits in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `value ≈ coefficient · abscissa^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// Least squares: largest absolute log-space deviation. Envelope: the
    /// upward shift of the quantile line needed to cover every sample.
    pub residual: f64,
    pub window: (f64, f64),
}

impl PowerFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coefficient * t.powf(self.exponent)
    }
}

const MIN_SAMPLES: usize = 2;

fn logs(points: &[(f64, f64)]) -> Result<(Vec<(f64, f64)>, (f64, f64))> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, v)| x > 0.0 && v > 0.0 && x.is_finite() && v.is_finite())
        .collect();
    if used.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { found: used.len(), required: MIN_SAMPLES });
    }
    let lo = used.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    Ok((used.into_iter().map(|(x, v)| (x.ln(), v.ln())).collect(), (lo, hi)))
}

/// Ordinary least squares on `(ln x, ln v)`; nonpositive samples are skipped.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit> {
    let (lp, window) = logs(points)?;
    let n = lp.len() as f64;
    let mx = lp.iter().map(|p| p.0).sum::<f64>() / n;
    let my = lp.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = lp.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = lp.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = lp
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerFit { exponent, coefficient: intercept.exp(), residual, window })
}

/// Upper envelope: `tau`-quantile regression in log space, then the
/// intercept is raised until every sample lies on or below the line.
pub fn fit_envelope(points: &[(f64, f64)], tau: f64) -> Result<PowerFit> {
    let (lp, window) = logs(points)?;
    let ls = fit_power_law(points)?.exponent;
    let (mut a, mut b) = (ls - 10.0 * (1.0 + ls.abs()), ls + 10.0 * (1.0 + ls.abs()));
    let profile = |slope: f64| {
        let r: Vec<f64> = lp.iter().map(|p| p.1 - slope * p.0).collect();
        let c = quantile(&r, tau);
        let loss: f64 = r
            .iter()
            .map(|&ri| {
                let u = ri - c;
                if u >= 0.0 {
                    tau * u
                } else {
                    (tau - 1.0) * u
                }
            })
            .sum();
        (loss, c)
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (profile(x1).0, profile(x2).0);
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = profile(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = profile(x2).0;
        }
    }
    let exponent = 0.5 * (a + b);
    let (_, c) = profile(exponent);
    let excess = lp
        .iter()
        .map(|p| p.1 - exponent * p.0 - c)
        .fold(0.0, f64::max);
    let shift = if excess > 0.0 { excess + 1e-12 } else { 0.0 };
    Ok(PowerFit { exponent, coefficient: (c + shift).exp(), residual: shift, window })
}

/// Linear-interpolated sample quantile, `tau ∈ [0, 1]`.
pub fn quantile(values: &[f64], tau: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = tau.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] + (v[i + 1] - v[i]) * (pos - i as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = (0..20).map(|i| {
            let x = 10f64.powf(-6.0 + 0.2 * i as f64);
            (x, 3.0 * x.powf(0.75))
        }).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 0.75).abs() < 1e-12);
        assert!((f.coefficient - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-12);
        assert_eq!(f.window, (1e-6, pts[19].0));
    }

    #[test]
    fn envelope_covers_all_samples() {
        let pts: Vec<_> = (1..200)
            .map(|i| {
                let x = i as f64 / 10.0;
                (x, x.powf(1.5) * (1.0 + 0.3 * (i as f64 * 1.7).sin()))
            })
            .collect();
        let f = fit_envelope(&pts, 0.99).unwrap();
        assert!(pts.iter().all(|&(x, v)| v <= f.eval(x)));
        assert!((f.exponent - 1.5).abs() < 0.1);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            fit_power_law(&[(1.0, 1.0), (2.0, -1.0)]),
            Err(Error::InsufficientSamples { found: 1, required: 2 })
        );
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
    }
}
