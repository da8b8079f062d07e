//! Declarative problem description read from TOML.

use std::path::{Path, PathBuf};

use klreg::index::search::log_grid;
use klreg::lab::NoiseModel;
use klreg::model::{NormWeights, Operator, OperatorRecord, SourceProfile, Vector};
use klreg::penalty::Penalty;
use klreg::solver::TikhonovProblem;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub operator: OperatorSpec,
    pub penalty: Penalty,
    pub source: SourceSpec,
    /// Observed data; when absent, `y = A x†` from the source.
    pub data: Option<DataSpec>,
    pub noise: NoiseSpec,
    pub rule: RuleSpec,
    pub grid: GridSpec,
    pub solve: SolveSpec,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `σ_k = k^{-s}`, `k = 1..=n`.
    PowerDecay { s: f64, n: usize },
    Diagonal { singular_values: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
    /// Whitespace- or comma-separated rows, one per line.
    MatrixFile { path: PathBuf },
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self::PowerDecay { s: 1.0, n: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSpec {
    /// `x† = (A*A)^μ w`.
    pub mu: f64,
    pub profile: SourceProfile,
    /// Explicit `x†`; overrides `mu` and `profile`.
    pub x_true: Option<Vec<f64>>,
    /// X-norm weight exponent `b`.
    pub weights_b: Option<f64>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self { mu: 0.25, profile: SourceProfile::Alternating, x_true: None, weights_b: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub y: Vec<f64>,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub delta_min: f64,
    pub delta_max: f64,
    pub count: usize,
    /// Explicit δ grid; overrides the log-spaced one.
    pub deltas: Option<Vec<f64>>,
    pub repetitions: usize,
    pub seed: u64,
    pub model: NoiseModel,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            delta_min: 1e-6,
            delta_max: 1e-2,
            count: 20,
            deltas: None,
            repetitions: 5,
            seed: 0,
            model: NoiseModel::WorstCase,
        }
    }
}

impl NoiseSpec {
    pub fn grid(&self) -> Vec<f64> {
        self.deltas.clone().unwrap_or_else(|| log_grid(self.delta_min, self.delta_max, self.count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// From the power law fitted to the measured T-rate.
    #[default]
    APriori,
    /// From the fitted KL function.
    Kl,
    PowerLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleSpec {
    pub kind: RuleKind,
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for RuleSpec {
    fn default() -> Self {
        Self { kind: RuleKind::APriori, coefficient: 1.0, exponent: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_count: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub r_count: usize,
    /// Perturbed samples for the variational fit.
    pub samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alpha_min: 1e-8,
            alpha_max: 1.0,
            alpha_count: 40,
            r_min: 1e-4,
            r_max: 1e4,
            r_count: 33,
            samples: 400,
        }
    }
}

impl GridSpec {
    pub fn alphas(&self) -> Vec<f64> {
        log_grid(self.alpha_min, self.alpha_max, self.alpha_count)
    }

    pub fn radii(&self) -> Vec<f64> {
        log_grid(self.r_min, self.r_max, self.r_count)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    pub alpha: f64,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self { alpha: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// CSV records; stdout when absent and the command emits only CSV.
    pub records: Option<PathBuf>,
    /// JSON summary; stdout when absent.
    pub summary: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<Config, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn usage(what: &'static str) -> impl Fn(klreg::Error) -> Failure {
    move |e| Failure::Usage(format!("{what}: {e}"))
}

impl Config {
    pub fn operator(&self) -> Result<Operator, Failure> {
        let op = match &self.operator {
            OperatorSpec::PowerDecay { s, n } => Operator::power_decay(*n, *s),
            OperatorSpec::Diagonal { singular_values } => {
                Operator::try_from(OperatorRecord::Diagonal { singular_values: singular_values.clone() })
            }
            OperatorSpec::Dense { rows } => Operator::try_from(OperatorRecord::Dense { rows: rows.clone() }),
            OperatorSpec::MatrixFile { path } => {
                Operator::try_from(OperatorRecord::Dense { rows: read_matrix(path)? })
            }
        };
        op.map_err(|e| Failure::Usage(format!("operator: {e}")))
    }

    /// The problem described by the config: observed data when `[data]` is
    /// given (with `x†` attached if the source names one), otherwise
    /// noise-free data from the source.
    pub fn problem(&self) -> Result<TikhonovProblem, Failure> {
        let op = self.operator()?;
        let explicit = self.source.x_true.as_ref().map(|v| Vector::from_column_slice(v));
        let mut prob = match &self.data {
            Some(d) => {
                let p = TikhonovProblem::new(op, self.penalty, Vector::from_column_slice(&d.y))
                    .and_then(|p| p.with_delta(d.delta))
                    .map_err(usage("data"))?;
                match explicit {
                    Some(x) => p.with_truth(x).map_err(usage("source"))?,
                    None => p,
                }
            }
            None => {
                let x = match explicit {
                    Some(x) => x,
                    None => {
                        let n = op.cols();
                        op.power_astar_a(self.source.mu, &self.source.profile.element(n)).map_err(usage("source"))?
                    }
                };
                TikhonovProblem::noise_free(op, self.penalty, x).map_err(usage("source"))?
            }
        };
        if let Some(b) = self.source.weights_b {
            prob = prob.with_weights(NormWeights::new(b).map_err(usage("source"))?);
        }
        Ok(prob)
    }
}
