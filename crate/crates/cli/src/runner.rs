//! Command dispatch: scenario parsing, computation, report emission, and
//! exit-code mapping. Exit codes: 0 when every verdict holds (or a pure
//! computation succeeded), 1 when any verdict fails, 2 when the strongest
//! defect is an inconclusive verdict, 64 for usage and configuration
//! errors.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wde_core::conditions::{self, ConditionId};
use wde_core::inequalities::{self, parse_grid, InequalityId};
use wde_core::mc::{SampleSpec, Verdict};
use wde_core::moments::{gaussian_we, weighted_moments};
use wde_core::scenario::Scenario;
use wde_core::selftest::selftest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILS: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "wde",
    about = "Weighted Gaussian entropies and weighted determinant inequalities",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<String>,
    /// Monte Carlo sample budget.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Base seed; WDE_SEED overrides this default when the flag is absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Verdict band in standard errors.
    #[arg(long, default_value_t = 4.0)]
    zcrit: f64,
    /// Closed-form tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Output path (standard output when absent).
    #[arg(long)]
    out: Option<String>,
    /// Output format.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted entropy of the scenario model C under the scenario weight.
    Entropy {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Weighted mass and second-moment matrix for the scenario model C.
    Moments {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Evaluate one sufficient condition.
    Check {
        id: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Verify one inequality with its prerequisite conditions.
    Verify {
        id: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Verify one inequality across a grid of a scalar scenario parameter.
    Sweep {
        id: String,
        /// Parameter to sweep: lambda | r | t.
        #[arg(long)]
        axis: String,
        /// Grid: start:stop:step or a comma-separated list.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the built-in verification batteries.
    Selftest {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// List the condition and inequality registries.
    List,
}

/// Resolved configuration echoed into every report for auditability.
#[derive(Serialize)]
struct ResolvedConfig {
    command: String,
    scenario: Option<String>,
    samples: u64,
    seed: u64,
    zcrit: f64,
    tolerance: f64,
    format: String,
}

#[derive(Serialize)]
struct Report<R: Serialize> {
    config: ResolvedConfig,
    result: R,
}

pub fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if benign { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::List => {
            let listing = serde_json::json!({
                "conditions": conditions::list_conditions(),
                "inequalities": inequalities::ALL_INEQUALITIES
                    .iter()
                    .map(|id| serde_json::json!({
                        "id": id.as_str(),
                        "prerequisites": id
                            .prerequisites()
                            .iter()
                            .map(|c| c.as_str())
                            .collect::<Vec<_>>(),
                        "required": id.required_fields(),
                    }))
                    .collect::<Vec<_>>(),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&listing).expect("registry serializes")
            );
            Ok(EXIT_OK)
        }
        Command::Entropy { opts } => {
            let (sc, config) = load_scenario(&opts, "entropy")?;
            require(&sc, &["matrices.C", "wf"])?;
            let c = sc.pd("C").map_err(stringify)?;
            let w = sc.weight(c.dim()).map_err(stringify)?;
            let est = gaussian_we(&c, &w, &sc.spec).map_err(stringify)?;
            emit(
                &opts,
                Report {
                    config,
                    result: est,
                },
                None,
            )?;
            Ok(EXIT_OK)
        }
        Command::Moments { opts } => {
            let (sc, config) = load_scenario(&opts, "moments")?;
            require(&sc, &["matrices.C", "wf"])?;
            let c = sc.pd("C").map_err(stringify)?;
            let w = sc.weight(c.dim()).map_err(stringify)?;
            let m = weighted_moments(&c, &w, &sc.spec).map_err(stringify)?;
            emit(&opts, Report { config, result: m }, None)?;
            Ok(EXIT_OK)
        }
        Command::Check { id, opts } => {
            let cid = ConditionId::parse(&id).map_err(stringify)?;
            let (sc, config) = load_scenario(&opts, &format!("check {id}"))?;
            let info = conditions::list_conditions()
                .into_iter()
                .find(|i| i.id == cid.as_str())
                .expect("registered id");
            require(&sc, info.required)?;
            let report = conditions::check(cid, &sc).map_err(stringify)?;
            let code = verdict_code(report.verdict);
            emit(
                &opts,
                Report {
                    config,
                    result: report,
                },
                None,
            )?;
            Ok(code)
        }
        Command::Verify { id, opts } => {
            let iid = InequalityId::parse(&id).map_err(stringify)?;
            let (sc, config) = load_scenario(&opts, &format!("verify {id}"))?;
            require(&sc, iid.required_fields())?;
            let report = inequalities::verify(iid, &sc).map_err(stringify)?;
            let code = verdict_code(report.verdict);
            emit(
                &opts,
                Report {
                    config,
                    result: report,
                },
                None,
            )?;
            Ok(code)
        }
        Command::Sweep {
            id,
            axis,
            grid,
            opts,
        } => {
            let iid = InequalityId::parse(&id).map_err(stringify)?;
            let (sc, config) = load_scenario(&opts, &format!("sweep {id}"))?;
            // The swept parameter is supplied per grid point; everything
            // else must be present up front.
            let fields: Vec<&str> = iid
                .required_fields()
                .iter()
                .copied()
                .filter(|f| *f != axis.as_str())
                .collect();
            require(&sc, &fields)?;
            let grid = parse_grid(&grid).map_err(stringify)?;
            let report = inequalities::sweep(iid, &sc, &axis, &grid).map_err(stringify)?;
            // Any failing point dominates; otherwise an inconclusive one.
            let verdicts = || report.points.iter().map(|p| p.inequality_verdict);
            let code = if verdicts().any(|v| v == Verdict::Fails) {
                EXIT_FAILS
            } else if verdicts().any(|v| v == Verdict::Inconclusive) {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_OK
            };
            let csv = report.to_csv();
            emit(
                &opts,
                Report {
                    config,
                    result: report,
                },
                Some(csv),
            )?;
            Ok(code)
        }
        Command::Selftest { opts } => {
            let config = resolved_config(&opts, "selftest");
            let spec = sample_spec(&opts);
            let report = selftest::<f64>(&spec, opts.zcrit);
            let pass = report.pass;
            emit(
                &opts,
                Report {
                    config,
                    result: report,
                },
                None,
            )?;
            Ok(if pass { EXIT_OK } else { EXIT_FAILS })
        }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => EXIT_OK,
        Verdict::Fails => EXIT_FAILS,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn stringify(e: wde_core::Error) -> String {
    e.to_string()
}

fn resolve_seed(opts: &CommonOpts) -> u64 {
    if let Some(s) = opts.seed {
        return s;
    }
    if let Ok(v) = std::env::var("WDE_SEED") {
        if let Ok(s) = v.parse() {
            return s;
        }
    }
    0
}

fn sample_spec(opts: &CommonOpts) -> SampleSpec {
    SampleSpec::new(opts.samples, resolve_seed(opts))
}

fn resolved_config(opts: &CommonOpts, command: &str) -> ResolvedConfig {
    ResolvedConfig {
        command: command.into(),
        scenario: opts.scenario.clone(),
        samples: opts.samples,
        seed: resolve_seed(opts),
        zcrit: opts.zcrit,
        tolerance: opts.tol,
        format: opts.format.clone(),
    }
}

fn load_scenario(
    opts: &CommonOpts,
    command: &str,
) -> Result<(Scenario<f64>, ResolvedConfig), String> {
    let path = opts
        .scenario
        .as_ref()
        .ok_or_else(|| format!("{command} needs --scenario FILE"))?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let sc = Scenario::from_json_str(&text, sample_spec(opts), opts.zcrit, opts.tol)
        .map_err(|e| format!("{path}: {e}"))?;
    Ok((sc, resolved_config(opts, command)))
}

/// Fail fast on missing scenario fields before any computation starts.
fn require(sc: &Scenario<f64>, fields: &[&str]) -> Result<(), String> {
    for field in fields {
        let present = match *field {
            "lambda" => sc.lambda.is_some(),
            "p" => sc.p.is_some(),
            "r" => sc.r.is_some(),
            "wf" => true,
            other => match other.strip_prefix("matrices.") {
                Some(name) => sc.matrices.contains_key(name),
                None => true,
            },
        };
        if !present {
            return Err(format!("missing scenario field: {field}"));
        }
    }
    Ok(())
}

fn emit<R: Serialize>(
    opts: &CommonOpts,
    report: Report<R>,
    csv: Option<String>,
) -> Result<(), String> {
    let body = if opts.format == "csv" {
        match csv {
            Some(csv) => csv,
            None => return Err("csv output is only available for sweep".into()),
        }
    } else {
        let mut s = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        s.push('\n');
        s
    };
    match &opts.out {
        Some(path) => std::fs::write(path, body).map_err(|e| format!("{path}: {e}")),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}
