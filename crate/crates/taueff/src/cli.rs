//! Command-line front end. Structured results go to stdout, diagnostics
//! and error objects to stderr. Exit codes: 0 success (or criterion
//! satisfied), 1 criterion not satisfied or identification failure, 2
//! usage and input errors.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::criteria::{
    back_door, conditional_iv, find_strategies, single_door, theorem1_check, theorem2_check,
    DoubleRoleAssignment, LatentRole, RoleAssignment, RoleSpec, Strategy,
};
use crate::dsl::{format_f64, CovarianceDocument, GraphDocument};
use crate::error::IdentifyError;
use crate::fixtures;
use crate::graph::VertexId;
use crate::identify::{identify_tau_sq, Settings};

#[derive(Parser)]
#[command(
    name = "taueff",
    about = "Squared total effects through surrogate variables in linear SEMs",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Tolerance for zero tests on exact covariances.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Model-fit tolerance for sample covariances; passing this flag
    /// switches `identify` into the sample regime.
    #[arg(long, global = true)]
    sample_tol: Option<f64>,

    /// Sampling seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Sample size for `simulate`.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Emit the exact implied covariance instead of sampling.
    #[arg(long, global = true)]
    exact: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a graphical criterion and print its certificate.
    Check(CheckArgs),
    /// Identify the squared total effect from a covariance file.
    Identify(IdentifyArgs),
    /// Print the observed covariance of an annotated graph, exact or sampled.
    Simulate(SimulateArgs),
    /// List feasible strategies and role assignments for a pair.
    Strategies(StrategiesArgs),
    /// Run the built-in examples end-to-end through file round-trips.
    Selftest,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Criterion {
    Theorem1,
    Theorem2,
    BackDoor,
    SingleDoor,
    Civ,
}

#[derive(Args)]
struct RoleFlags {
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    w: Option<String>,
    /// Comma-separated covariate set (single instrument for civ).
    #[arg(long, value_delimiter = ',')]
    z: Vec<String>,
    /// Comma-separated covariate set.
    #[arg(long, value_delimiter = ',')]
    t: Vec<String>,
    /// The latent vertex plays the treatment role instead of the response.
    #[arg(long)]
    latent_treatment: bool,

    #[arg(long)]
    x1: Option<String>,
    #[arg(long)]
    x2: Option<String>,
    #[arg(long)]
    u1: Option<String>,
    #[arg(long)]
    w1: Option<String>,
    #[arg(long)]
    u2: Option<String>,
    #[arg(long)]
    w2: Option<String>,
    #[arg(long, value_delimiter = ',')]
    t1: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    t2: Vec<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    criterion: Criterion,
    #[command(flatten)]
    roles: RoleFlags,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    cov: PathBuf,
    #[arg(long)]
    strategy: String,
    #[command(flatten)]
    roles: RoleFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct StrategiesArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Bound on the size of each searched conditioning set.
    #[arg(long, default_value_t = 2)]
    max_set_size: usize,
}

/// Exit 2: bad input (usage, file, parse). Exit 1: the mathematics said no.
enum Failure {
    Input(String),
    Identification(IdentifyError),
    NotSatisfied,
}

impl From<IdentifyError> for Failure {
    fn from(e: IdentifyError) -> Self {
        Failure::Identification(e)
    }
}

#[derive(Serialize)]
struct ErrorObject {
    error: String,
    message: String,
}

fn emit_error(kind: &str, message: &str) {
    let obj = ErrorObject {
        error: kind.to_owned(),
        message: message.to_owned(),
    };
    eprintln!("{}", serde_json::to_string(&obj).expect("error serialization"));
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(Failure::NotSatisfied) => 1,
        Err(Failure::Identification(e)) => {
            emit_error(identify_error_kind(&e), &e.to_string());
            1
        }
        Err(Failure::Input(msg)) => {
            emit_error("input", &msg);
            2
        }
    }
}

fn identify_error_kind(e: &IdentifyError) -> &'static str {
    match e {
        IdentifyError::MalformedRoles(_) => "malformed-roles",
        IdentifyError::CriterionNotSatisfied(_) => "criterion-not-satisfied",
        IdentifyError::NotStandardized(_) => "not-standardized",
        IdentifyError::NonFactorizable => "non-factorizable",
        IdentifyError::NearZeroConcentration(_) => "near-zero-concentration",
        IdentifyError::ModelMisfit(_) => "model-misfit",
        IdentifyError::EmptyPivot(_) => "empty-pivot",
        IdentifyError::DegenerateDenominator(_) => "degenerate-denominator",
        IdentifyError::Graph(_) => "graph",
        IdentifyError::Cov(_) => "covariance",
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Check(args) => cmd_check(cli, args),
        Command::Identify(args) => cmd_identify(cli, args),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Strategies(args) => cmd_strategies(args),
        Command::Selftest => cmd_selftest(),
    }
}

fn read_graph(path: &Path) -> Result<GraphDocument, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    GraphDocument::parse(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_cov(path: &Path) -> Result<crate::cov::LabeledCovariance, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let doc = CovarianceDocument::parse_json(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    doc.to_cov()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn vertex(name: &str) -> Result<VertexId, Failure> {
    VertexId::new(name).map_err(|e| Failure::Input(e.to_string()))
}

fn vertex_set(names: &[String]) -> Result<BTreeSet<VertexId>, Failure> {
    names.iter().map(|n| vertex(n)).collect()
}

fn require<'a>(opt: &'a Option<String>, flag: &str) -> Result<&'a str, Failure> {
    opt.as_deref()
        .ok_or_else(|| Failure::Input(format!("missing required flag --{flag}")))
}

fn single_roles(flags: &RoleFlags) -> Result<RoleAssignment, Failure> {
    Ok(RoleAssignment {
        x: vertex(require(&flags.x, "x")?)?,
        y: vertex(require(&flags.y, "y")?)?,
        u: vertex(require(&flags.u, "u")?)?,
        w: vertex(require(&flags.w, "w")?)?,
        z: vertex_set(&flags.z)?,
        t: vertex_set(&flags.t)?,
        latent_role: if flags.latent_treatment {
            LatentRole::Treatment
        } else {
            LatentRole::Response
        },
    })
}

fn double_roles(flags: &RoleFlags) -> Result<DoubleRoleAssignment, Failure> {
    Ok(DoubleRoleAssignment {
        x1: vertex(require(&flags.x1, "x1")?)?,
        x2: vertex(require(&flags.x2, "x2")?)?,
        u1: vertex(require(&flags.u1, "u1")?)?,
        w1: vertex(require(&flags.w1, "w1")?)?,
        u2: vertex(require(&flags.u2, "u2")?)?,
        w2: vertex(require(&flags.w2, "w2")?)?,
        z: vertex_set(&flags.z)?,
        t1: vertex_set(&flags.t1)?,
        t2: vertex_set(&flags.t2)?,
    })
}

fn cmd_check(_cli: &Cli, args: &CheckArgs) -> Result<(), Failure> {
    let doc = read_graph(&args.graph)?;
    let g = &doc.diagram;
    let flags = &args.roles;
    let (satisfied, certificate_json) = match args.criterion {
        Criterion::Theorem1 => {
            let roles = single_roles(flags)?;
            let cert = theorem1_check(g, &roles)?;
            (
                cert.satisfied,
                serde_json::to_string_pretty(&cert).expect("certificate serialization"),
            )
        }
        Criterion::Theorem2 => {
            let roles = double_roles(flags)?;
            let cert = theorem2_check(g, &roles)?;
            (
                cert.satisfied,
                serde_json::to_string_pretty(&cert).expect("certificate serialization"),
            )
        }
        Criterion::BackDoor | Criterion::SingleDoor | Criterion::Civ => {
            let x = vertex(require(&flags.x, "x")?)?;
            let y = vertex(require(&flags.y, "y")?)?;
            let z = vertex_set(&flags.z)?;
            let sat = match args.criterion {
                Criterion::BackDoor => {
                    back_door(g, &x, &y, &z).map_err(IdentifyError::from)?
                }
                Criterion::SingleDoor => {
                    single_door(g, &x, &y, &z).map_err(IdentifyError::from)?
                }
                _ => {
                    if z.len() != 1 {
                        return Err(Failure::Input(
                            "civ needs exactly one instrument in --z".into(),
                        ));
                    }
                    let t = vertex_set(&flags.t)?;
                    conditional_iv(g, &x, &y, z.iter().next().unwrap(), &t)
                        .map_err(IdentifyError::from)?
                }
            };
            let obj = serde_json::json!({
                "criterion": match args.criterion {
                    Criterion::BackDoor => "back-door",
                    Criterion::SingleDoor => "single-door",
                    _ => "conditional-iv",
                },
                "satisfied": sat,
            });
            (sat, serde_json::to_string_pretty(&obj).expect("serialization"))
        }
    };
    println!("{}", if satisfied { "SATISFIED" } else { "NOT SATISFIED" });
    println!("{certificate_json}");
    if satisfied {
        Ok(())
    } else {
        Err(Failure::NotSatisfied)
    }
}

fn cmd_identify(cli: &Cli, args: &IdentifyArgs) -> Result<(), Failure> {
    let doc = read_graph(&args.graph)?;
    let cov = read_cov(&args.cov)?;
    let strategy: Strategy = args
        .strategy
        .parse()
        .map_err(|e: String| Failure::Input(e))?;
    let roles = match strategy {
        Strategy::DoubleLatent => RoleSpec::Double(double_roles(&args.roles)?),
        _ => RoleSpec::Single(single_roles(&args.roles)?),
    };
    // Sample regime: rescale the estimate to a correlation matrix first,
    // since the model's unit-variance convention only holds in expectation.
    let (cov, settings) = match cli.sample_tol {
        Some(s) if !cli.exact => {
            let corr = cov.to_correlation().map_err(IdentifyError::from)?;
            (corr, Settings::sampled(s))
        }
        _ => (
            cov,
            Settings {
                zero_tol: cli.tol,
                misfit_tol: cli.tol,
                ..Settings::exact()
            },
        ),
    };
    let result = identify_tau_sq(&cov, &doc.diagram, &roles, strategy, &settings)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("result serialization")
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), Failure> {
    let doc = read_graph(&args.graph)?;
    if !doc.is_fully_annotated() {
        return Err(Failure::Input(
            "simulation needs a coefficient on every edge".into(),
        ));
    }
    let sem = doc
        .to_sem()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let cov = if cli.exact {
        sem.observed_covariance()
    } else {
        let n = cli.n.ok_or_else(|| {
            Failure::Input("pass --exact or a sample size via --n".into())
        })?;
        sem.sample_covariance(n, cli.seed)
            .map_err(|e| Failure::Input(e.to_string()))?
    };
    print!("{}", CovarianceDocument::from_cov(&cov).to_json_string());
    Ok(())
}

#[derive(Serialize)]
struct StrategyListing {
    strategy: String,
    roles: RoleSpec,
}

fn cmd_strategies(args: &StrategiesArgs) -> Result<(), Failure> {
    let doc = read_graph(&args.graph)?;
    let x = vertex(&args.x)?;
    let y = vertex(&args.y)?;
    let found = find_strategies(&doc.diagram, &x, &y, args.max_set_size)?;
    let listing: Vec<StrategyListing> = found
        .into_iter()
        .map(|(s, roles)| StrategyListing {
            strategy: s.name().to_owned(),
            roles,
        })
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&listing).expect("listing serialization")
    );
    Ok(())
}

/// Round-trips every built-in example through files: print the graph,
/// reparse it, serialize the exact covariance, reload it, re-check the
/// criterion, identify, and compare against the stored truth. Output is
/// byte-deterministic.
fn cmd_selftest() -> Result<(), Failure> {
    let dir = std::env::temp_dir().join(format!("taueff-selftest-{}", std::process::id()));
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
    let result = selftest_in(&dir);
    let _ = fs::remove_dir_all(&dir);
    result
}

fn selftest_in(dir: &Path) -> Result<(), Failure> {
    let mut all_ok = true;
    for f in fixtures::all() {
        let graph_path = dir.join(format!("fixture_{}.pd", f.name));
        let cov_path = dir.join(format!("fixture_{}.json", f.name));
        let parsed = GraphDocument::parse(f.source)
            .map_err(|e| Failure::Input(format!("fixture {}: {e}", f.name)))?;
        fs::write(&graph_path, parsed.print())
            .map_err(|e| Failure::Input(e.to_string()))?;
        let cov_doc = CovarianceDocument::from_cov(&f.sem.observed_covariance());
        fs::write(&cov_path, cov_doc.to_json_string())
            .map_err(|e| Failure::Input(e.to_string()))?;

        let doc = read_graph(&graph_path)?;
        let cov = read_cov(&cov_path)?;

        let cert_ok = match &f.roles {
            RoleSpec::Single(r) => theorem1_check(&doc.diagram, r)?.satisfied,
            RoleSpec::Double(r) => theorem2_check(&doc.diagram, r)?.satisfied,
        };
        let res = identify_tau_sq(
            &cov,
            &doc.diagram,
            &f.roles,
            f.strategy,
            &Settings::exact(),
        )?;
        let tau_ok = (res.tau_squared - f.tau_squared).abs() < 1e-9;
        let zero_ok = res.diagnostics.zero_pattern_residual < 1e-8;
        let ok = cert_ok && tau_ok && zero_ok;
        all_ok &= ok;
        println!(
            "fixture {}: {} criterion={} tau_squared={} truth={} zero_pattern_residual<1e-8={}",
            f.name,
            if ok { "ok" } else { "FAILED" },
            if cert_ok { "satisfied" } else { "violated" },
            format_f64(res.tau_squared),
            format_f64(f.tau_squared),
            zero_ok,
        );
    }
    if all_ok {
        println!("selftest: all fixtures ok");
        Ok(())
    } else {
        Err(Failure::NotSatisfied)
    }
}
