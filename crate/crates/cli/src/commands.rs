use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use klreg::fit::{fit_power_law, PowerFit};
use klreg::index::{self, IndexFunction, KLDescription};
use klreg::kl::{kl_fit, kl_verify};
use klreg::lab::{
    check_bounds, fit_rate, run_cheng_yamamoto, run_experiment, run_source_condition, write_csv, ChengYamamotoRun,
    ChoiceRule, ExperimentPlan, SourceConditionRun, TRIM,
};
use klreg::penalty::Penalty;
use klreg::regularity::{distance_function, j_rate, t_rate, variational_fit};
use klreg::solver::TikhonovProblem;
use serde::Serialize;

use crate::config::{self, Config, OutputSpec, RuleKind};
use crate::{Cli, Command, Failure, RateKind, ScenarioCommand, TransformName};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    match cli.command {
        Command::Solve { alpha } => {
            if let Some(a) = alpha {
                cfg.solve.alpha = a;
            }
            solve(&cfg)
        }
        Command::Rates { kind } => rates(&cfg, kind),
        Command::Transforms { name, c, p, k, norm } => transform(name, c, p, k, norm),
        Command::Kl => kl(&cfg),
        Command::Experiment => experiment(&cfg),
        Command::Scenario(sc) => scenario(&cfg, sc),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(format!("json: {e}")))?;
    let mut out = sink(path)?;
    writeln!(out, "{text}").and_then(|_| out.flush()).map_err(|e| Failure::Usage(format!("write: {e}")))
}

fn emit_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), Failure> {
    write_csv(sink(path)?, rows)?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize, R: Serialize> {
    config: &'a C,
    #[serde(flatten)]
    result: R,
}

fn solve(cfg: &Config) -> Result<(), Failure> {
    let sol = cfg.problem()?.solve(cfg.solve.alpha)?;
    emit_json(cfg.output.summary.as_deref(), &Summary { config: cfg, result: sol })
}

#[derive(Serialize)]
struct VariationalRow {
    residual: f64,
    decrease: f64,
    envelope: f64,
}

#[derive(Serialize)]
struct DistanceRow {
    r: f64,
    distance: f64,
}

fn rates(cfg: &Config, kind: RateKind) -> Result<(), Failure> {
    let prob = cfg.problem()?;
    let alphas = cfg.grid.alphas();
    let out = cfg.output.records.as_deref();
    match kind {
        RateKind::J => emit_csv(out, &j_rate(&prob, &alphas)?),
        RateKind::T => emit_csv(out, &t_rate(&prob, &alphas)?),
        RateKind::Variational => {
            let vf = variational_fit(&prob, &alphas, cfg.grid.samples, cfg.noise.seed)?;
            let rows: Vec<VariationalRow> = vf
                .pairs
                .iter()
                .map(|&(t, g)| VariationalRow { residual: t, decrease: g, envelope: vf.fit.eval(t) })
                .collect();
            emit_csv(out, &rows)
        }
        RateKind::Distance => {
            let rows = cfg
                .grid
                .radii()
                .into_iter()
                .map(|r| Ok(DistanceRow { r, distance: distance_function(&prob, r)? }))
                .collect::<Result<Vec<_>, klreg::Error>>()?;
            emit_csv(out, &rows)
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum TransformOutput {
    Function(IndexFunction),
    Kl(KLDescription),
}

fn transform(name: TransformName, c: f64, p: f64, k: f64, norm: f64) -> Result<(), Failure> {
    let f = IndexFunction::power_law(c, p).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = match name {
        TransformName::Psi2FromPhi3 => TransformOutput::Function(index::psi2_from_phi3(&f)?),
        TransformName::Phi3FromPsi2 => TransformOutput::Function(index::phi3_from_psi2(&f)?),
        TransformName::Phi4FromPhi3 => TransformOutput::Function(index::phi4_from_phi3(&f)?),
        TransformName::Phi3FromPhi4 => TransformOutput::Function(index::phi3_from_phi4(&f)?),
        TransformName::Companion => TransformOutput::Function(index::companion(&f)?),
        TransformName::PsiFromKl => {
            let kl = KLDescription::new(f, k, norm).map_err(|e| Failure::Usage(e.to_string()))?;
            TransformOutput::Function(index::psi_from_kl(&kl)?)
        }
        TransformName::KlFromPsi => TransformOutput::Kl(index::kl_from_psi(&f, norm)?),
    };
    emit_json(None, &out)
}

#[derive(Serialize)]
struct KlOutput {
    fit: klreg::kl::KLFit,
    verification_on_grid: klreg::kl::KlVerification,
}

fn kl(cfg: &Config) -> Result<(), Failure> {
    let prob = cfg.problem()?;
    let alphas = cfg.grid.alphas();
    let fit = kl_fit(&prob, &alphas)?;
    let verification_on_grid = kl_verify(&prob, &fit.phi, &alphas)?;
    emit_json(cfg.output.summary.as_deref(), &Summary { config: cfg, result: KlOutput { fit, verification_on_grid } })
}

fn fitted_psi2(prob: &TikhonovProblem, cfg: &Config) -> Result<(IndexFunction, PowerFit), Failure> {
    let t: Vec<(f64, f64)> = t_rate(prob, &cfg.grid.alphas())?.iter().map(|s| (s.abscissa, s.value)).collect();
    let fit = fit_power_law(&t)?;
    Ok((IndexFunction::power_law(fit.coefficient, fit.exponent)?, fit))
}

#[derive(Serialize)]
struct ExperimentOutput {
    psi2_fit: PowerFit,
    rule: ChoiceRule,
    bregman_rate: PowerFit,
    z_error_rate: PowerFit,
    x_error_rate: Option<PowerFit>,
    bounds: klreg::lab::BoundsReport,
}

fn experiment(cfg: &Config) -> Result<(), Failure> {
    let prob = cfg.problem()?;
    if prob.delta != 0.0 {
        return Err(Failure::Usage("experiment adds its own noise; give a source, not noisy [data]".into()));
    }
    let (psi2, psi2_fit) = fitted_psi2(&prob, cfg)?;
    let rule = match cfg.rule.kind {
        RuleKind::APriori => ChoiceRule::APriori { psi2: psi2.clone() },
        RuleKind::Kl => ChoiceRule::Kl { kl: kl_fit(&prob, &cfg.grid.alphas())?.description(&prob)? },
        RuleKind::PowerLaw => {
            ChoiceRule::PowerLaw { coefficient: cfg.rule.coefficient, exponent: cfg.rule.exponent }
        }
    };
    let plan = ExperimentPlan {
        deltas: cfg.noise.grid(),
        rule: rule.clone(),
        noise: cfg.noise.model.clone(),
        repetitions: cfg.noise.repetitions,
        seed: cfg.noise.seed,
    };
    let records = run_experiment(&prob, &plan)?;
    let x_error_rate = if prob.weights.is_some() {
        Some(fit_rate(&records, |r| r.x_error_x.unwrap_or(f64::NAN), TRIM)?)
    } else {
        None
    };
    let result = ExperimentOutput {
        psi2_fit,
        rule,
        bregman_rate: fit_rate(&records, |r| r.bregman_error, TRIM)?,
        z_error_rate: fit_rate(&records, |r| r.x_error_z, TRIM)?,
        x_error_rate,
        bounds: check_bounds(&records, &psi2)?,
    };
    if let Some(path) = &cfg.output.records {
        emit_csv(Some(path), &records)?;
    }
    emit_json(cfg.output.summary.as_deref(), &Summary { config: cfg, result })
}

#[derive(Serialize)]
struct ScenarioOutput {
    report: klreg::lab::ScenarioReport,
}

fn finish_scenario<C: Serialize>(
    run: &C,
    output: &OutputSpec,
    report: klreg::lab::ScenarioReport,
    records: &[klreg::lab::ExperimentRecord],
) -> Result<(), Failure> {
    if let Some(path) = &output.records {
        emit_csv(Some(path), records)?;
    }
    let pass = report.pass;
    emit_json(output.summary.as_deref(), &Summary { config: run, result: ScenarioOutput { report } })?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Assertion)
    }
}

fn scenario(cfg: &Config, sc: ScenarioCommand) -> Result<(), Failure> {
    match sc {
        ScenarioCommand::SourceCondition { mu, s, n, penalty, profile, repetitions } => {
            let penalty: Penalty = penalty.parse().map_err(|e: klreg::Error| Failure::Usage(e.to_string()))?;
            let run = SourceConditionRun {
                mu,
                s,
                n,
                penalty,
                profile: profile.into(),
                repetitions,
                seed: cfg.noise.seed,
                ..SourceConditionRun::default()
            };
            let out = run_source_condition(&run).map_err(usage_if_invalid)?;
            finish_scenario(&run, &cfg.output, out.report, &out.records)
        }
        ScenarioCommand::ChengYamamoto { s, b, n, mu, profile, repetitions } => {
            let run = ChengYamamotoRun {
                s,
                b,
                n,
                mu,
                profile: profile.into(),
                repetitions,
                seed: cfg.noise.seed,
                ..ChengYamamotoRun::default()
            };
            let out = run_cheng_yamamoto(&run).map_err(usage_if_invalid)?;
            finish_scenario(&run, &cfg.output, out.report, &out.records)
        }
    }
}

fn usage_if_invalid(e: klreg::Error) -> Failure {
    match e {
        klreg::Error::InvalidArgument(msg) => Failure::Usage(msg),
        other => Failure::Numeric(other),
    }
}
