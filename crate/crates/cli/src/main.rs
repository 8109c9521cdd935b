//! `fsub`: batch front end over the subtyping kernel.
//!
//! Exit codes: 0 derivable/success, 1 not derivable, 2 fuel exhausted,
//! 3 parse or validation error, 4 usage error. Results go to stdout,
//! one-line diagnostics to stderr. Environments and types are passed as
//! quoted strings or `@file` references; derivations are always file paths.
//! No environment variables are consulted, so identical invocations over
//! identical files produce byte-identical output.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fsub_core::checker::{check, CheckOutcome, Fuel};
use fsub_core::rules::{
    parse_derivation, serialize_derivation, validate_derivation, Derivation, SystemId,
};
use fsub_core::syntax::{parse_env, parse_type, Binding, ScopeMode, TyVarName, Type, TypeEnv};
use fsub_core::testkit::{differential_run, enumerate_oracle, permutation_run, GenConfig};
use fsub_core::transforms::{
    lax_to_strict, narrowing_original, narrowing_variant, orig_to_variant, reflexivity,
    transitivity_original, transitivity_variant, variant_to_orig, EnvSplit,
};

const GEN_MAX_TYPE_SIZE: usize = 6;
const GEN_MAX_ENV_LEN: usize = 3;

#[derive(Parser)]
#[command(name = "fsub", version, about = "Subtype checking and derivation transforms for F<:")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Rule system to work in.
    #[arg(long, global = true, value_enum, default_value_t = SystemArg::Original)]
    system: SystemArg,
    /// Scoping discipline.
    #[arg(long, global = true, value_enum, default_value_t = ScopingArg::Strict)]
    scoping: ScopingArg,
    /// Budget of rule expansions for checking.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Seed for the randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trial count for the randomized commands.
    #[arg(long, global = true, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    Original,
    Variant,
    VariantPlus,
}

impl From<SystemArg> for SystemId {
    fn from(v: SystemArg) -> SystemId {
        match v {
            SystemArg::Original => SystemId::Original,
            SystemArg::Variant => SystemId::Variant,
            SystemArg::VariantPlus => SystemId::VariantPlus,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopingArg {
    Strict,
    Lax,
}

impl From<ScopingArg> for ScopeMode {
    fn from(v: ScopingArg) -> ScopeMode {
        match v {
            ScopingArg::Strict => ScopeMode::Strict,
            ScopingArg::Lax => ScopeMode::Lax,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Sexp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direction {
    ToVariant,
    ToOriginal,
}

#[derive(Subcommand)]
enum Command {
    /// Decide ENV |- S <: T and print the outcome.
    Check { env: String, left: String, right: String },
    /// Decide ENV |- S <: T and print the derivation on success.
    Derive { env: String, left: String, right: String },
    /// Validate a derivation file against the chosen system and scoping.
    Validate { derivation: String },
    /// Compose two derivation files sharing a cut type.
    Transit { first: String, second: String },
    /// Narrow the pivot bound: ENV1, X <: Q, ENV2 with D over the whole
    /// environment and DP deriving ENV1 |- P <: Q.
    Narrow {
        env1: String,
        pivot: String,
        bound: String,
        env2: String,
        derivation: String,
        bound_derivation: String,
    },
    /// Translate a derivation file between the two systems.
    Translate {
        #[arg(value_enum)]
        direction: Direction,
        derivation: String,
    },
    /// Build the reflexive derivation ENV |- T <: T.
    Reflexivity { env: String, ty: String },
    /// Enumerate all derivations of ENV |- S <: T up to a height bound.
    Oracle {
        env: String,
        left: String,
        right: String,
        /// Height bound for the enumeration.
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Differential run of two systems over random instances.
    Fuzz {
        /// System compared against `--system`.
        #[arg(long, value_enum, default_value_t = SystemArg::Variant)]
        versus: SystemArg,
    },
    /// Compare derivability before and after permuting lax environments.
    Permute,
    /// Re-validate a lax derivation under strict scoping.
    LaxToStrict { derivation: String },
}

enum Failure {
    /// Exit 1 or 2: a non-derivable or fuel-exhausted outcome.
    Outcome(u8, String),
    /// Exit 3: parse or validation trouble.
    Invalid(String),
    /// Exit 4: the invocation itself is wrong.
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Outcome(code, _) => *code,
            Failure::Invalid(_) => 3,
            Failure::Usage(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Outcome(_, m) | Failure::Invalid(m) | Failure::Usage(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first_line = e.to_string().lines().next().unwrap_or("usage error").to_string();
            eprintln!("{first_line}");
            return ExitCode::from(4);
        }
    };
    match dispatch(&cli) {
        Ok((stdout, code)) => {
            print!("{stdout}");
            ExitCode::from(code)
        }
        Err(f) => {
            if !f.message().is_empty() {
                eprintln!("{}", f.message());
            }
            ExitCode::from(f.code())
        }
    }
}

/// Inline argument or `@file` reference.
fn read_arg(arg: &str) -> Result<String, Failure> {
    if let Some(path) = arg.strip_prefix('@') {
        fs::read_to_string(path)
            .map(|s| s.trim_end().to_string())
            .map_err(|e| Failure::Usage(format!("cannot read `{path}`: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn arg_env(arg: &str) -> Result<TypeEnv, Failure> {
    parse_env(&read_arg(arg)?).map_err(invalid)
}

fn arg_type(arg: &str) -> Result<Type, Failure> {
    parse_type(&read_arg(arg)?).map_err(invalid)
}

fn read_derivation(path: &str) -> Result<Derivation, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read `{path}`: {e}")))?;
    parse_derivation(&text).map_err(invalid)
}

fn render_derivation(d: &Derivation) -> String {
    let mut s = serialize_derivation(d);
    s.push('\n');
    s
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    let system: SystemId = cli.system.into();
    let mode: ScopeMode = cli.scoping.into();
    let fuel = Fuel::new(cli.fuel);
    match &cli.command {
        Command::Check { env, left, right } => {
            let env = arg_env(env)?;
            let s = arg_type(left)?;
            let t = arg_type(right)?;
            let outcome = check(system, mode, &env, &s, &t, fuel).map_err(invalid)?;
            match outcome {
                CheckOutcome::Derivable(d) => match cli.format {
                    FormatArg::Text => Ok(format!("{}\n", outcome.word())),
                    FormatArg::Sexp => Ok(render_derivation(&d)),
                },
                CheckOutcome::NotDerivable => {
                    Err(Failure::Outcome(1, String::new())).or(Ok(format!("{}\n", outcome.word())))
                        .and_then(|s: String| {
                            // Print the outcome, then exit 1.
                            print!("{s}");
                            Err(Failure::Outcome(1, String::new()))
                        })
                }
                CheckOutcome::FuelExhausted => {
                    print!("{}\n", outcome.word());
                    Err(Failure::Outcome(2, String::new()))
                }
            }
        }
        Command::Derive { env, left, right } => {
            let env = arg_env(env)?;
            let s = arg_type(left)?;
            let t = arg_type(right)?;
            match check(system, mode, &env, &s, &t, fuel).map_err(invalid)? {
                CheckOutcome::Derivable(d) => Ok(render_derivation(&d)),
                CheckOutcome::NotDerivable => {
                    Err(Failure::Outcome(1, "not-derivable".into()))
                }
                CheckOutcome::FuelExhausted => {
                    Err(Failure::Outcome(2, "fuel-exhausted".into()))
                }
            }
        }
        Command::Validate { derivation } => {
            let d = read_derivation(derivation)?;
            let report = validate_derivation(&d, system, mode);
            if report.ok() {
                match cli.format {
                    FormatArg::Text => Ok("valid\n".into()),
                    FormatArg::Sexp => Ok("(valid)\n".into()),
                }
            } else {
                Err(Failure::Invalid(report.to_string()))
            }
        }
        Command::Transit { first, second } => {
            let d1 = read_derivation(first)?;
            let d2 = read_derivation(second)?;
            let out = match system {
                SystemId::Original => transitivity_original(&d1, &d2, mode),
                SystemId::Variant => transitivity_variant(&d1, &d2, mode),
                SystemId::VariantPlus => {
                    return Err(Failure::Usage(
                        "transit supports --system original or variant".into(),
                    ))
                }
            }
            .map_err(invalid)?;
            Ok(render_derivation(&out))
        }
        Command::Narrow { env1, pivot, bound, env2, derivation, bound_derivation } => {
            let prefix = arg_env(env1)?;
            let name = TyVarName::new(&read_arg(pivot)?).map_err(invalid)?;
            let q = arg_type(bound)?;
            let suffix = arg_env(env2)?;
            let split = EnvSplit::new(prefix, Binding { name, bound: q }, suffix)
                .map_err(invalid)?;
            let d = read_derivation(derivation)?;
            let dp = read_derivation(bound_derivation)?;
            let out = match system {
                SystemId::Original => narrowing_original(&split, &d, &dp, mode),
                SystemId::Variant => narrowing_variant(&split, &d, &dp, mode),
                SystemId::VariantPlus => {
                    return Err(Failure::Usage(
                        "narrow supports --system original or variant".into(),
                    ))
                }
            }
            .map_err(invalid)?;
            Ok(render_derivation(&out))
        }
        Command::Translate { direction, derivation } => {
            let d = read_derivation(derivation)?;
            let out = match direction {
                Direction::ToVariant => orig_to_variant(&d, mode),
                Direction::ToOriginal => variant_to_orig(&d, mode),
            }
            .map_err(invalid)?;
            Ok(render_derivation(&out))
        }
        Command::Reflexivity { env, ty } => {
            let env = arg_env(env)?;
            let t = arg_type(ty)?;
            let out = reflexivity(&env, &t, mode).map_err(invalid)?;
            Ok(render_derivation(&out))
        }
        Command::Oracle { env, left, right, depth } => {
            let env = arg_env(env)?;
            let s = arg_type(left)?;
            let t = arg_type(right)?;
            let derivations = enumerate_oracle(system, mode, &env, &s, &t, *depth)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            match cli.format {
                FormatArg::Text => Ok(format!("derivations {}\n", derivations.len())),
                FormatArg::Sexp => {
                    let mut out = String::new();
                    for d in &derivations {
                        out.push_str(&render_derivation(d));
                    }
                    Ok(out)
                }
            }
        }
        Command::Fuzz { versus } => {
            let cfg = GenConfig::new(cli.seed, GEN_MAX_TYPE_SIZE, GEN_MAX_ENV_LEN, mode);
            let report = differential_run(&cfg, (system, (*versus).into()), fuel, cli.trials);
            let rendered = match cli.format {
                FormatArg::Text => report.render_text(),
                FormatArg::Sexp => format!("{}\n", report.render_sexp()),
            };
            if report.disagreements.is_empty() {
                Ok(rendered)
            } else {
                print!("{rendered}");
                Err(Failure::Outcome(1, format!("{} disagreement(s)", report.disagreements.len())))
            }
        }
        Command::Permute => {
            if mode != ScopeMode::Lax {
                return Err(Failure::Usage("permute requires --scoping lax".into()));
            }
            let cfg = GenConfig::new(cli.seed, GEN_MAX_TYPE_SIZE, GEN_MAX_ENV_LEN, mode);
            let report = permutation_run(&cfg, cli.trials, fuel)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let rendered = match cli.format {
                FormatArg::Text => report.render_text(),
                FormatArg::Sexp => format!("{}\n", report.render_sexp()),
            };
            if report.disagreements.is_empty() {
                Ok(rendered)
            } else {
                print!("{rendered}");
                Err(Failure::Outcome(1, format!("{} disagreement(s)", report.disagreements.len())))
            }
        }
        Command::LaxToStrict { derivation } => {
            let d = read_derivation(derivation)?;
            let out = lax_to_strict(&d, system).map_err(invalid)?;
            Ok(render_derivation(&out))
        }
    }
}
