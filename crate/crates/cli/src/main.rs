//! `quiverdt`: exact quiver DT invariants from attractor data.
//!
//! Exit codes: 0 success, 1 parse/usage error, 2 genericity failure,
//! 3 integrality failure, 4 engine error (degeneracy, disagreement).
//! Every error prints a single line `error[<kind>]: <reason>` to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use serde::Serialize;

use quiverdt::dt::{acyclic_attractor_table, omega_theta, DtError};
use quiverdt::io::load_quiver_file;
use quiverdt::oracle::{euler_char, stable_point_count, OracleError};
use quiverdt::quiver::{walls_and_chamber, DimVector, Quiver, StabilityPoint};
use quiverdt::rational::{fmt_rat, parse_rat};
use quiverdt::trees::{f_by_limit_tree, flow_computation};
use quiverdt::tropical::{
    balancing_check, family_dimension, limit_realization, plot_segments, realization_dot,
    tropical_count, RootMode,
    TropicalType,
};
use quiverdt::{Rat, RunConfig};

#[derive(Parser)]
#[command(name = "quiverdt", version, about = "Exact quiver DT invariants via attractor flow trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineOpts {
    /// Base seed for the deterministic perturbation generator.
    #[arg(long, env = "FLOWTREE_SEED", default_value_t = 1)]
    seed: u64,
    /// Perturbation bound B (coordinates perturbed by at most 1/B).
    #[arg(long, default_value_t = 1_000_000)]
    bound: u64,
    /// Seed retries per escalation level.
    #[arg(long, default_value_t = 8)]
    retries: u32,
    /// Bound escalations (each multiplies B by 100).
    #[arg(long, default_value_t = 3)]
    escalations: u32,
    /// Disable triple-seed verification.
    #[arg(long)]
    no_verify: bool,
}

impl EngineOpts {
    fn config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            bound: self.bound,
            seed_retries: self.retries,
            escalations: self.escalations,
            verify: !self.no_verify,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the DT invariant Omega_gamma^{+,theta}.
    Dt {
        #[arg(long)]
        quiver: PathBuf,
        /// Dimension vector, e.g. `1,1`.
        #[arg(long)]
        gamma: String,
        /// Stability parameter, rational coordinates, e.g. `1,-1` or `1/2,-1/2`.
        #[arg(long)]
        theta: String,
        /// Project theta onto gamma-perp instead of rejecting theta(gamma) != 0.
        #[arg(long)]
        project: bool,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// List contributing flow trees for a parts tuple.
    Trees {
        #[arg(long)]
        quiver: PathBuf,
        /// Semicolon-separated parts, e.g. `1,0;0,1;0,1`.
        #[arg(long)]
        parts: String,
        #[arg(long)]
        theta: String,
        /// Emit the contributing trees as DOT instead of JSON.
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// List wall normals and the chamber signs of theta.
    Walls {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        theta: String,
    },
    /// Finite-field point count and Euler characteristic.
    Oracle {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        theta: String,
    },
    /// Tropical realizations, balancing, family dimension.
    Tropical {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long)]
        parts: String,
        #[arg(long)]
        theta: String,
        /// Report only the family dimensions of the limit-tree types.
        #[arg(long)]
        dim: bool,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Figure data for realized trees.
    Render {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long)]
        parts: String,
        #[arg(long)]
        theta: String,
        #[arg(long, value_enum, default_value_t = RenderFormat::Plot)]
        format: RenderFormat,
        #[command(flatten)]
        engine: EngineOpts,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Dot,
    Plot,
}

enum CliError {
    Parse(String),
    Genericity(String),
    Integrality(String),
    Engine(String),
}

impl CliError {
    fn exit(&self) -> ExitCode {
        let (kind, msg, code) = match self {
            CliError::Parse(m) => ("parse", m, 1),
            CliError::Genericity(m) => ("genericity", m, 2),
            CliError::Integrality(m) => ("integrality", m, 3),
            CliError::Engine(m) => ("engine", m, 4),
        };
        eprintln!("error[{kind}]: {}", msg.replace('\n', " "));
        ExitCode::from(code)
    }
}

impl From<quiverdt::io::IoError> for CliError {
    fn from(e: quiverdt::io::IoError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<DtError> for CliError {
    fn from(e: DtError) -> Self {
        match e {
            DtError::NonGenericTheta(_) => CliError::Genericity(e.to_string()),
            DtError::Quiver(quiverdt::quiver::QuiverError::NotAStabilityParameter { .. }) => {
                CliError::Genericity(e.to_string())
            }
            DtError::IntegralityFailure { .. } => CliError::Integrality(e.to_string()),
            _ => CliError::Engine(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NonGenericTheta(_) => CliError::Genericity(e.to_string()),
            _ => CliError::Engine(e.to_string()),
        }
    }
}

impl From<quiverdt::trees::TreeError> for CliError {
    fn from(e: quiverdt::trees::TreeError) -> Self {
        CliError::Engine(e.to_string())
    }
}

impl From<quiverdt::tropical::TropicalError> for CliError {
    fn from(e: quiverdt::tropical::TropicalError) -> Self {
        CliError::Engine(e.to_string())
    }
}

impl From<quiverdt::quiver::QuiverError> for CliError {
    fn from(e: quiverdt::quiver::QuiverError) -> Self {
        CliError::Parse(e.to_string())
    }
}

fn parse_dim_vector(s: &str) -> Result<DimVector, CliError> {
    let coords: Result<Vec<i64>, _> = s.split(',').map(|c| c.trim().parse::<i64>()).collect();
    match coords {
        Ok(v) if !v.is_empty() => Ok(DimVector(v)),
        _ => Err(CliError::Parse(format!("invalid dimension vector `{s}`"))),
    }
}

fn parse_theta(s: &str) -> Result<StabilityPoint, CliError> {
    let coords: Result<Vec<Rat>, String> = s.split(',').map(|c| parse_rat(c.trim())).collect();
    match coords {
        Ok(v) if !v.is_empty() => Ok(StabilityPoint(v)),
        Ok(_) => Err(CliError::Parse(format!("invalid stability point `{s}`"))),
        Err(e) => Err(CliError::Parse(format!(
            "invalid stability point `{s}`: {e}"
        ))),
    }
}

fn parse_parts(s: &str) -> Result<Vec<DimVector>, CliError> {
    s.split(';').map(|p| parse_dim_vector(p.trim())).collect()
}

/// Project `theta` onto `gamma`-perp along the coordinate dual of `gamma`:
/// `theta - (theta(gamma) / sum gamma_i^2) * gamma`.
fn project_theta(theta: &StabilityPoint, gamma: &DimVector) -> StabilityPoint {
    let tg = theta.eval(gamma);
    if tg.is_zero() {
        return theta.clone();
    }
    let norm: i64 = (0..gamma.len()).map(|i| gamma[i] * gamma[i]).sum();
    let c = tg / Rat::from_integer(norm.into());
    StabilityPoint(
        theta
            .0
            .iter()
            .enumerate()
            .map(|(i, t)| t - &c * Rat::from_integer(gamma[i].into()))
            .collect(),
    )
}

fn fmt_rats(v: &[Rat]) -> Vec<String> {
    v.iter().map(fmt_rat).collect()
}

// --- JSON output shapes; field order is the documented key order ---

#[derive(Serialize)]
struct WallOut {
    normal: Vec<i64>,
    coinciding: Vec<Vec<i64>>,
}

#[derive(Serialize)]
struct WallsOut {
    gamma: Vec<i64>,
    theta: Vec<String>,
    walls: Vec<WallOut>,
    generic: bool,
    signs: Vec<i32>,
}

#[derive(Serialize)]
struct BreakdownOut {
    parts: Vec<Vec<i64>>,
    aut_order: String,
    f: String,
    attractor_product: String,
    contribution: String,
}

#[derive(Serialize)]
struct DtOut {
    gamma: Vec<i64>,
    theta: Vec<String>,
    omega: String,
    omega_bar: String,
    walls: Vec<WallOut>,
    signs: Vec<i32>,
    breakdown: Vec<BreakdownOut>,
    divisors: Vec<DivisorOut>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct DivisorOut {
    gamma: Vec<i64>,
    omega_bar: String,
}

#[derive(Serialize)]
struct TreeOut {
    tree: String,
    multiplicity: String,
    times: Vec<String>,
    points: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct GroupOut {
    limit_tree: String,
    sum: String,
}

#[derive(Serialize)]
struct TreesOut {
    parts: Vec<Vec<i64>>,
    theta: Vec<String>,
    seed: u64,
    bound: u64,
    total: String,
    contributions: Vec<TreeOut>,
    limit_groups: Vec<GroupOut>,
    unresolved: String,
}

#[derive(Serialize)]
struct OracleOut {
    gamma: Vec<i64>,
    theta: Vec<String>,
    polynomial: Vec<String>,
    rendered: String,
    euler: String,
}

#[derive(Serialize)]
struct TropicalTypeOut {
    limit_tree: String,
    sum: String,
    balanced: bool,
    family_dimension: usize,
}

#[derive(Serialize)]
struct TropicalOut {
    parts: Vec<Vec<i64>>,
    theta: Vec<String>,
    total: String,
    realizations: Vec<TreeOut>,
    types: Vec<TropicalTypeOut>,
    unresolved: String,
}

#[derive(Serialize)]
struct SegmentOut {
    from: Vec<String>,
    to: Option<Vec<String>>,
    dir: Option<Vec<String>>,
    label: String,
}

#[derive(Serialize)]
struct PlotOut {
    schema: String,
    tree: String,
    segments: Vec<SegmentOut>,
}

fn walls_out(q: &Quiver, g: &DimVector, theta: &StabilityPoint) -> Result<WallsOut, CliError> {
    let rep = walls_and_chamber(q, g, theta)?;
    Ok(WallsOut {
        gamma: g.0.clone(),
        theta: fmt_rats(&theta.0),
        walls: rep
            .walls
            .iter()
            .map(|w| WallOut {
                normal: w.key.clone(),
                coinciding: w.normals.iter().map(|n| n.0.clone()).collect(),
            })
            .collect(),
        generic: rep.generic,
        signs: rep.signs,
    })
}

fn emit_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Dt {
            quiver,
            gamma,
            theta,
            project,
            engine,
        } => {
            let file = load_quiver_file(&quiver)?;
            let g = parse_dim_vector(&gamma)?;
            let mut th = parse_theta(&theta)?;
            if project {
                th = project_theta(&th, &g);
            }
            let attractor = match file.attractor {
                Some(t) => t,
                None => acyclic_attractor_table(&file.quiver).map_err(|e| {
                    CliError::Parse(format!(
                        "quiver file has no attractor table and the acyclic default does not apply: {e}"
                    ))
                })?,
            };
            let rep = omega_theta(&file.quiver, &g, &th, &attractor, &engine.config())?;
            emit_json(&DtOut {
                gamma: rep.gamma.0.clone(),
                theta: fmt_rats(&rep.theta.0),
                omega: rep.omega.to_string(),
                omega_bar: fmt_rat(&rep.omega_bar),
                walls: rep
                    .chamber
                    .walls
                    .iter()
                    .map(|w| WallOut {
                        normal: w.key.clone(),
                        coinciding: w.normals.iter().map(|n| n.0.clone()).collect(),
                    })
                    .collect(),
                signs: rep.chamber.signs.clone(),
                breakdown: rep
                    .breakdown
                    .iter()
                    .map(|b| BreakdownOut {
                        parts: b
                            .decomposition
                            .labeled()
                            .iter()
                            .map(|p| p.0.clone())
                            .collect(),
                        aut_order: b.aut_order.to_string(),
                        f: b.f.to_string(),
                        attractor_product: fmt_rat(&b.attractor_product),
                        contribution: fmt_rat(&b.contribution),
                    })
                    .collect(),
                divisors: rep
                    .divisor_omega_bar
                    .iter()
                    .map(|(g, v)| DivisorOut {
                        gamma: g.0.clone(),
                        omega_bar: fmt_rat(v),
                    })
                    .collect(),
                notes: rep.notes.clone(),
            });
            Ok(())
        }
        Command::Trees {
            quiver,
            parts,
            theta,
            dot,
            engine,
        } => {
            let file = load_quiver_file(&quiver)?;
            let parts = parse_parts(&parts)?;
            let th = parse_theta(&theta)?;
            let cfg = engine.config();
            let comp = flow_computation(&file.quiver, &parts, &th, &cfg)?;
            if dot {
                for c in &comp.contributions {
                    print!("{}", c.tree.to_dot());
                }
                return Ok(());
            }
            let grouping = f_by_limit_tree(&file.quiver, &parts, &th, &cfg)?;
            emit_json(&TreesOut {
                parts: parts.iter().map(|p| p.0.clone()).collect(),
                theta: fmt_rats(&th.0),
                seed: comp.perturbation.seed,
                bound: comp.perturbation.bound,
                total: comp.total.to_string(),
                contributions: comp
                    .contributions
                    .iter()
                    .map(|c| TreeOut {
                        tree: c.tree.encode(),
                        multiplicity: c.multiplicity.to_string(),
                        times: fmt_rats(&c.flow.times),
                        points: c.flow.points.iter().map(|p| fmt_rats(p)).collect(),
                    })
                    .collect(),
                limit_groups: grouping
                    .groups
                    .iter()
                    .map(|(t, s)| GroupOut {
                        limit_tree: t.encode(),
                        sum: s.to_string(),
                    })
                    .collect(),
                unresolved: grouping.unresolved.to_string(),
            });
            Ok(())
        }
        Command::Walls {
            quiver,
            gamma,
            theta,
        } => {
            let file = load_quiver_file(&quiver)?;
            let g = parse_dim_vector(&gamma)?;
            let th = parse_theta(&theta)?;
            let out = walls_out(&file.quiver, &g, &th)?;
            emit_json(&out);
            Ok(())
        }
        Command::Oracle {
            quiver,
            gamma,
            theta,
        } => {
            let file = load_quiver_file(&quiver)?;
            let g = parse_dim_vector(&gamma)?;
            let th = parse_theta(&theta)?;
            let poly = stable_point_count(&file.quiver, &g, &th)?;
            let euler = euler_char(&file.quiver, &g, &th)?;
            emit_json(&OracleOut {
                gamma: g.0.clone(),
                theta: fmt_rats(&th.0),
                polynomial: poly.coeffs().iter().map(fmt_rat).collect(),
                rendered: poly.render(),
                euler: euler.to_string(),
            });
            Ok(())
        }
        Command::Tropical {
            quiver,
            parts,
            theta,
            dim,
            engine,
        } => {
            let file = load_quiver_file(&quiver)?;
            let parts = parse_parts(&parts)?;
            let th = parse_theta(&theta)?;
            let count = tropical_count(&file.quiver, &parts, &th, &engine.config())?;
            let mut types = Vec::new();
            for (limit, sum) in &count.by_limit_tree {
                let t = TropicalType::from_limit_tree(&file.quiver, limit, &parts)?;
                let balanced = balancing_check(&t).balanced;
                let fd = family_dimension(&file.quiver, &t, RootMode::FreeInPerp)?;
                types.push(TropicalTypeOut {
                    limit_tree: limit.encode(),
                    sum: sum.to_string(),
                    balanced,
                    family_dimension: fd,
                });
            }
            if dim {
                #[derive(Serialize)]
                struct DimOut {
                    types: Vec<TropicalTypeOut>,
                }
                emit_json(&DimOut { types });
                return Ok(());
            }
            emit_json(&TropicalOut {
                parts: parts.iter().map(|p| p.0.clone()).collect(),
                theta: fmt_rats(&th.0),
                total: count.total.to_string(),
                realizations: count
                    .realized
                    .iter()
                    .map(|r| TreeOut {
                        tree: r.tree.encode(),
                        multiplicity: r.multiplicity.to_string(),
                        times: fmt_rats(&r.realization.times),
                        points: r
                            .realization
                            .positions
                            .iter()
                            .map(|p| fmt_rats(p))
                            .collect(),
                    })
                    .collect(),
                types,
                unresolved: count.unresolved.to_string(),
            });
            Ok(())
        }
        Command::Render {
            quiver,
            parts,
            theta,
            format,
            engine,
        } => {
            let file = load_quiver_file(&quiver)?;
            let parts = parse_parts(&parts)?;
            let th = parse_theta(&theta)?;
            let count = tropical_count(&file.quiver, &parts, &th, &engine.config())?;
            // figures live in Q^d: each realized tree is drawn at its
            // unperturbed limit positions; trees without a resolved limit
            // are skipped
            match format {
                RenderFormat::Dot => {
                    for r in &count.realized {
                        let Some((_, positions)) =
                            limit_realization(&file.quiver, &r.tree, &parts, &th)
                        else {
                            continue;
                        };
                        print!("{}", realization_dot(&r.tree, &positions));
                    }
                }
                RenderFormat::Plot => {
                    let mut plots = Vec::new();
                    for r in &count.realized {
                        let Some((_, positions)) =
                            limit_realization(&file.quiver, &r.tree, &parts, &th)
                        else {
                            continue;
                        };
                        let segs = plot_segments(
                            &file.quiver,
                            &r.tree,
                            &parts,
                            &th,
                            &positions,
                        )?;
                        plots.push(PlotOut {
                            schema: "quiverdt-plot/1".to_string(),
                            tree: r.tree.encode(),
                            segments: segs
                                .iter()
                                .map(|s| SegmentOut {
                                    from: fmt_rats(&s.from),
                                    to: s.to.as_ref().map(|v| fmt_rats(v)),
                                    dir: s.dir.as_ref().map(|v| fmt_rats(v)),
                                    label: s.label.clone(),
                                })
                                .collect(),
                        });
                    }
                    emit_json(&plots);
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}
