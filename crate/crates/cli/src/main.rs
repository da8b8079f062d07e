mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use klreg::model::SourceProfile;

#[derive(Parser, Debug)]
#[command(name = "klreg", version, about = "Tikhonov regularization lab")]
struct Cli {
    /// TOML problem description
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `noise.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One Tikhonov solve; prints the solution as JSON
    Solve {
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Regularity sweeps along the noise-free path, as CSV
    Rates {
        #[arg(long, value_enum, default_value_t = RateKind::T)]
        kind: RateKind,
    },
    /// Applies an index-function transform to `c t^p`
    Transforms {
        #[arg(value_enum)]
        name: TransformName,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        p: f64,
        /// KL constant, for psi-from-kl
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Subgradient norm at the true solution, for the KL transforms
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
    },
    /// Fits and verifies a KL function on the noise-free path
    Kl,
    /// Noisy experiment with rate fits and bound checks
    Experiment,
    /// Packaged scenarios; exit code 2 when a check fails
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand, Debug)]
enum ScenarioCommand {
    SourceCondition {
        #[arg(long, default_value_t = 0.25)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value = "quadratic")]
        penalty: String,
        #[arg(long, value_enum, default_value_t = Profile::Alternating)]
        profile: Profile,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
    ChengYamamoto {
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Source exponent of the true solution
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, value_enum, default_value_t = Profile::Alternating)]
        profile: Profile,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RateKind {
    /// J(x†) − J(x_α)
    J,
    /// (T_α(x†) − T_α(x_α))/α
    T,
    /// Variational pairs with their fitted envelope
    Variational,
    /// Distance function D(r)
    Distance,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TransformName {
    Psi2FromPhi3,
    Phi3FromPsi2,
    Phi4FromPhi3,
    Phi3FromPhi4,
    Companion,
    PsiFromKl,
    KlFromPsi,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Profile {
    Alternating,
    Harmonic,
}

impl From<Profile> for SourceProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Alternating => SourceProfile::Alternating,
            Profile::Harmonic => SourceProfile::Harmonic,
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or config; exit 1.
    Usage(String),
    /// The library rejected the computation; exit 1.
    Numeric(klreg::Error),
    /// A scenario ran but some check failed; exit 2.
    Assertion,
}

impl From<klreg::Error> for Failure {
    fn from(e: klreg::Error) -> Self {
        Self::Numeric(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion) => {
            eprintln!("scenario checks failed");
            ExitCode::from(2)
        }
    }
}
