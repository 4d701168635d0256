use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use cdrum_core::data::{from_conditional, to_conditional};
use cdrum_core::io::{dataset_to_string, declared_mode, parse_dataset, parse_domain};
use cdrum_core::{
    check_all, check_cdrum, check_si_cdrum, classify, eval_habit_logit, eval_learning_logit, identify_habit_logit, identify_learning_logit,
    matrix_sizes, mobius_inverse, oracle_agreement, perturb, random_mixture, recover_representation,
    sample_choices, stationary_distribution, test_cdrum_facet, test_cdrum_vertex, truncated_mobius,
    verify_representation, CdrumRepresentation, ChoiceSource, LogitParams, NumericMode, ObservationDomain,
    Omega, RandomJointChoiceRule, Rational, Scalar, TestOptions, Universe,
};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "cdrum", version, about = "Consumption-dependent random utility: tests, recovery and logit fits")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset JSON.
    #[arg(long)]
    input: PathBuf,

    /// Arithmetic to use; defaults to the mode the dataset declares.
    #[arg(long, value_enum)]
    numeric: Option<Numeric>,

    /// Absolute tolerance; 0 in rational mode and 1e-9 in float mode by default.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Numeric {
    Rational,
    Float,
}

impl From<Numeric> for NumericMode {
    fn from(n: Numeric) -> Self {
        match n {
            Numeric::Rational => NumericMode::Rational,
            Numeric::Float => NumericMode::Float,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Vertex,
    Facet,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Habit,
    Learning,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a dataset.
    Validate(DataArgs),
    /// Möbius table of a dataset.
    Mobius {
        #[command(flatten)]
        data: DataArgs,
        /// Truncate to the first DEPTH periods.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Check the CDRUM axioms.
    Check {
        #[command(flatten)]
        data: DataArgs,
        /// Also require choice set independence.
        #[arg(long)]
        state_independent: bool,
    },
    /// Recover a representation of a consistent dataset.
    Recover(DataArgs),
    /// Vertex-form or facet-form quadratic test.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "facet")]
        form: Form,
        /// Domain file listing the observed menu products.
        #[arg(long)]
        limited: Option<PathBuf>,
        /// Impose the extension rows at every menu.
        #[arg(long)]
        extension_everywhere: bool,
        /// Diagonal weights for the quadratic form, comma separated.
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        /// Report wall-clock time (makes the output nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Rows of the vertex and facet matrices for a universe of size N.
    Sizes {
        #[arg(long)]
        n: usize,
    },
    /// Identify logit parameters from a dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        model: Model,
        /// Label of the outside option.
        #[arg(long)]
        outside: String,
    },
    /// Long-run market shares of a habit-logit model.
    PredictLongrun {
        /// Parameter JSON as produced by `fit`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Classify a dataset as consumption dependent, learning, habit forming or variety seeking.
    Classify(DataArgs),
    /// Write a dataset: a random mixture, a perturbed or sampled version of it, or a model's rule.
    Simulate {
        /// Number of alternatives for random mixtures.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        periods: usize,
        /// Mixture components.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Representation or logit parameter JSON to simulate from instead of a random mixture.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Perturbation size, as a decimal.
        #[arg(long)]
        perturb: Option<f64>,
        /// Replace exact probabilities by frequencies over this many agents.
        #[arg(long)]
        agents: Option<usize>,
        /// Defaults to rational, or float for logit sources.
        #[arg(long, value_enum)]
        numeric: Option<Numeric>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Agreement of the axioms and both tests on seeded instances.
    Oracle {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
}

/// Exit code 1: the data fails a check or a test.
struct Rejected(Value);

enum Outcome {
    Pass(Value),
    Fail(Value),
    Text(String),
}

impl Outcome {
    fn verdict(ok: bool, v: Value) -> Self {
        if ok {
            Outcome::Pass(v)
        } else {
            Outcome::Fail(v)
        }
    }
}

fn mode_of(data: &DataArgs, text: &str) -> anyhow::Result<NumericMode> {
    Ok(match data.numeric {
        Some(n) => n.into(),
        None => declared_mode(text)?,
    })
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load<S: Scalar>(data: &DataArgs, text: &str) -> anyhow::Result<(RandomJointChoiceRule<S>, f64)> {
    let tol = data.tolerance.unwrap_or_else(S::default_tolerance);
    Ok((parse_dataset::<S>(text, tol)?, tol))
}

/// Runs `f` with the scalar type chosen by `--numeric` or the dataset.
macro_rules! dispatch {
    ($data:expr, $f:ident $(, $arg:expr)*) => {{
        let text = read(&$data.input)?;
        match mode_of($data, &text)? {
            NumericMode::Rational => $f::<Rational>($data, &text $(, $arg)*),
            NumericMode::Float => $f::<f64>($data, &text $(, $arg)*),
        }
    }};
}

fn validate<S: Scalar>(data: &DataArgs, text: &str) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    Ok(Outcome::Pass(json!({
        "valid": true,
        "numeric_mode": S::MODE.as_str(),
        "tolerance": tol,
        "alternatives": p.universe().labels(),
        "periods": p.periods(),
        "observations": p.domain().len(),
        "full_domain": p.is_full_domain(),
    })))
}

fn mobius<S: Scalar>(data: &DataArgs, text: &str, depth: Option<usize>) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    let q = match depth {
        Some(d) => truncated_mobius(&p, d, tol)?,
        None => mobius_inverse(&p)?,
    };
    let u = p.universe();
    let cells: Vec<Value> = q
        .cells()
        .into_iter()
        .map(|(menus, choices, v)| {
            json!({
                "menus": menus.0.iter().map(|&m| u.menu_labels(m)).collect::<Vec<_>>(),
                "choices": choices.iter().map(|&c| u.label(c)).collect::<Vec<_>>(),
                "q": v.format_prob(),
            })
        })
        .collect();
    Ok(Outcome::Pass(json!({"alternatives": u.labels(), "depth": q.depth(), "cells": cells})))
}

fn check<S: Scalar>(data: &DataArgs, text: &str, state_independent: bool) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    let cdrum = check_cdrum(&p, tol)?;
    let si = check_si_cdrum(&p, tol)?;
    let ok = if state_independent { si.holds } else { cdrum.holds };
    Ok(Outcome::verdict(
        ok,
        json!({
            "cdrum": cdrum.holds,
            "si_cdrum": si.holds,
            "tolerance": tol,
            "reports": check_all(&p, tol)?,
        }),
    ))
}

fn recover<S: Scalar>(data: &DataArgs, text: &str) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    let verdict = check_cdrum(&p, tol)?;
    if !verdict.holds {
        return Err(Rejected(json!({"cdrum": false, "reports": verdict.reports})).into());
    }
    let rep = recover_representation(&p, tol)?;
    let gap = verify_representation(&rep, &p)?;
    let mut out = rep.to_json();
    out["verification_gap"] = json!(gap);
    Ok(Outcome::Pass(out))
}

struct TestFlags<'a> {
    form: Form,
    limited: Option<&'a Path>,
    options: TestOptions,
    timing: bool,
}

fn test<S: Scalar>(data: &DataArgs, text: &str, flags: &TestFlags) -> anyhow::Result<Outcome> {
    let (mut p, _) = load::<S>(data, text)?;
    if let Some(path) = flags.limited {
        let domain: ObservationDomain = parse_domain(&read(path)?, p.universe())?;
        p = p.restrict(&domain)?;
    }
    let start = Instant::now();
    let result = match flags.form {
        Form::Vertex => test_cdrum_vertex(&p, &flags.options)?,
        Form::Facet => test_cdrum_facet(&p, &flags.options)?,
    };
    let elapsed = start.elapsed();
    let feasible = result.exact_feasible.unwrap_or(result.feasible);
    let mut out = json!({
        "form": match flags.form { Form::Vertex => "vertex", Form::Facet => "facet" },
        "numeric_mode": S::MODE.as_str(),
        "observed": p.domain().len(),
        "result": result,
        "feasible": feasible,
    });
    if flags.timing {
        out["elapsed_ms"] = json!(elapsed.as_secs_f64() * 1e3);
    }
    Ok(Outcome::verdict(feasible, out))
}

fn fit<S: Scalar>(data: &DataArgs, text: &str, model: Model, outside: &str) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    let outside = p.universe().index(outside)?;
    let ccs = to_conditional(&p.convert::<f64>(), tol.max(f64::default_tolerance()))?;
    let params = match model {
        Model::Habit => identify_habit_logit(&ccs, outside)?.to_json(),
        Model::Learning => identify_learning_logit(&ccs, outside)?.to_json(),
    };
    Ok(Outcome::Pass(params))
}

fn predict_longrun(path: &Path) -> anyhow::Result<Outcome> {
    let value: Value = serde_json::from_str(&read(path)?).context("parameter file is not JSON")?;
    let LogitParams::Habit(params) = LogitParams::from_json(&value)? else {
        bail!("long-run shares are defined for the habit model only");
    };
    let shares = stationary_distribution(&params);
    let by_label: serde_json::Map<String, Value> =
        params.universe().labels().iter().cloned().zip(shares.iter().map(|&s| json!(s))).collect();
    Ok(Outcome::Pass(json!({"model": "habit", "shares": by_label})))
}

fn classify_cmd<S: Scalar>(data: &DataArgs, text: &str) -> anyhow::Result<Outcome> {
    let (p, tol) = load::<S>(data, text)?;
    let ccs = to_conditional(&p, tol)?;
    Ok(Outcome::Pass(serde_json::to_value(classify(&ccs, tol))?))
}

struct SimulateArgs {
    n: usize,
    periods: usize,
    k: usize,
    seed: u64,
    perturb: Option<f64>,
    agents: Option<usize>,
    output: Option<PathBuf>,
}

/// Parsed `--from` file.
enum Source {
    Mixture,
    Logit(LogitParams),
    Representation(Value),
}

fn read_source(from: Option<&Path>) -> anyhow::Result<Source> {
    let Some(path) = from else { return Ok(Source::Mixture) };
    let v: Value = serde_json::from_str(&read(path)?).context("source file is not JSON")?;
    Ok(if v.get("model").is_some() { Source::Logit(LogitParams::from_json(&v)?) } else { Source::Representation(v) })
}

fn simulate<S: Scalar>(args: &SimulateArgs, source: &Source) -> anyhow::Result<Outcome> {
    let logit = match source {
        Source::Logit(params) => Some(params),
        _ => None,
    };
    if logit.is_some() && S::MODE == NumericMode::Rational {
        bail!("logit probabilities are not rational; use --numeric float");
    }
    let representation = match source {
        Source::Representation(v) => Some(CdrumRepresentation::<S>::from_json(v)?),
        _ => None,
    };
    let mut p: RandomJointChoiceRule<S> = match (&logit, &representation) {
        (Some(params), _) => {
            let domain = ObservationDomain::full(params.universe(), args.periods);
            let ccs = match params {
                LogitParams::Habit(h) => eval_habit_logit(h, &domain)?,
                LogitParams::Learning(l) => eval_learning_logit(l, &domain)?,
            };
            from_conditional(&ccs, f64::default_tolerance())?.convert()
        }
        (None, Some(rep)) => {
            cdrum_core::evaluate_representation(rep, &ObservationDomain::full(&rep.universe, rep.periods))?
        }
        (None, None) => random_mixture::<S>(&Universe::letters(args.n), args.periods, args.k, args.seed)?.rule,
    };
    if let Some(eps) = args.perturb {
        p = perturb(&p, eps, args.seed)?;
    }
    if let Some(agents) = args.agents {
        let domain = p.domain();
        p = match (&logit, &representation) {
            (Some(params), _) => sample_choices::<S>(&ChoiceSource::Logit(params), &domain, agents, args.seed)?,
            _ => {
                let rep = match representation {
                    Some(r) => r,
                    None => recover_representation(&p, S::default_tolerance())
                        .context("only consistent rules can be sampled")?,
                };
                sample_choices(&ChoiceSource::Representation(&rep), &domain, agents, args.seed)?
            }
        };
    }
    let text = dataset_to_string(&p);
    match &args.output {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            Ok(Outcome::Pass(json!({"written": path.display().to_string(), "observations": p.domain().len()})))
        }
        None => Ok(Outcome::Text(text)),
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match cli.command {
        Command::Validate(data) => dispatch!(&data, validate),
        Command::Mobius { data, depth } => dispatch!(&data, mobius, depth),
        Command::Check { data, state_independent } => dispatch!(&data, check, state_independent),
        Command::Recover(data) => dispatch!(&data, recover),
        Command::Test { data, form, limited, extension_everywhere, omega, timing } => {
            let omega = match omega {
                Some(w) => Omega::Diagonal(w),
                None => Omega::Identity,
            };
            let flags = TestFlags {
                form,
                limited: limited.as_deref(),
                options: TestOptions { omega, extension_everywhere },
                timing,
            };
            dispatch!(&data, test, &flags)
        }
        Command::Sizes { n } => {
            let (e, f) = matrix_sizes(n)?;
            Ok(Outcome::Pass(json!({"E_rows": e, "F_rows": f})))
        }
        Command::Fit { data, model, outside } => dispatch!(&data, fit, model, &outside),
        Command::PredictLongrun { input } => predict_longrun(&input),
        Command::Classify(data) => dispatch!(&data, classify_cmd),
        Command::Simulate { n, periods, k, seed, from, perturb, agents, numeric, output } => {
            let args = SimulateArgs { n, periods, k, seed, perturb, agents, output };
            let source = read_source(from.as_deref())?;
            let numeric = numeric.unwrap_or(match source {
                Source::Logit(_) => Numeric::Float,
                _ => Numeric::Rational,
            });
            match numeric {
                Numeric::Rational => simulate::<Rational>(&args, &source),
                Numeric::Float => simulate::<f64>(&args, &source),
            }
        }
        Command::Oracle { trials, seed, n } => {
            let report = oracle_agreement(trials, seed, &Universe::letters(n))?;
            Ok(Outcome::verdict(report.all_agree, serde_json::to_value(report)?))
        }
    }
}

/// Parses argv; usage errors also print the grammar of the subcommand involved.
fn parse_args() -> Result<Cli, ExitCode> {
    use clap::error::ErrorKind;
    Cli::try_parse().map_err(|e| {
        let _ = e.print();
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            return ExitCode::SUCCESS;
        }
        let mut root = Cli::command();
        let sub = std::env::args().skip(1).find(|a| !a.starts_with('-'));
        let usage = match sub.as_deref().and_then(|s| root.find_subcommand_mut(s)) {
            Some(cmd) => cmd.render_long_help(),
            None => root.render_long_help(),
        };
        eprintln!("\n{}", usage);
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let emit = |v: &Value| println!("{}", v);
    match run(cli) {
        Ok(Outcome::Pass(v)) => {
            emit(&v);
            ExitCode::SUCCESS
        }
        Ok(Outcome::Fail(v)) => {
            emit(&v);
            ExitCode::from(1)
        }
        Ok(Outcome::Text(t)) => {
            print!("{}", t);
            ExitCode::SUCCESS
        }
        Err(e) => match e.downcast::<Rejected>() {
            Ok(Rejected(v)) => {
                emit(&v);
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {:#}", e);
                ExitCode::from(2)
            }
        },
    }
}

impl std::fmt::Debug for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("data rejected")
    }
}

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("data rejected")
    }
}

impl std::error::Error for Rejected {}

