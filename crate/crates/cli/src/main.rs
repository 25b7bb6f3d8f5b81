use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use heatlab::presets::{preset, NAMES};
use heatlab::{run_preset, run_single, write_profile_files, CheckSpec, CliError, IsoKind, SummaryRow, Target};
use heatlab_core::estimates::{
    DgConfig, DueConfig, MvConfig, PmvConfig, TailConfig, TcConfig, TwoStepConfig, UeConfig,
};
use heatlab_core::generators::GeneratorSpec;
use heatlab_core::io::{read_graph, write_graph};
use heatlab_core::isoperimetry::FamilyBudget;
use heatlab_core::kernel::{heat_kernel, heat_kernel_finite, killed_kernel, SanityConfig};
use heatlab_core::montecarlo::{simulate_exit, simulate_tail};
use heatlab_core::potential::exit_profile;
use heatlab_core::spectral::lambda_min;
use heatlab_core::{VertexId, WeightedGraph};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat kernels, exit times and estimate checks on weighted graphs")]
struct Cli {
    /// Input graph (JSON written by `heatlab gen`).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exponent of the weighted `E_q` family.
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    ball_factor: Option<usize>,
    /// Exit nonzero when any check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as JSON.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Row `p_n(x, ·)` of the heat kernel as CSV.
    Kernel {
        #[arg(long)]
        x: Option<VertexId>,
        #[arg(long)]
        n: usize,
        /// Kill the walk on leaving `B(x, R)`.
        #[arg(long)]
        radius: Option<usize>,
        /// Use the finite graph without the horizon guard.
        #[arg(long)]
        finite: bool,
    },
    /// Smallest Dirichlet eigenvalue of `B(x, R)`.
    Lambda {
        #[arg(long)]
        x: Option<VertexId>,
        #[arg(long)]
        radius: usize,
    },
    /// Exit-time profile `R ↦ E(x, R)` with the fitted exponent.
    Profile {
        #[arg(long)]
        x: Option<VertexId>,
        #[arg(long)]
        r_max: usize,
    },
    /// Monte Carlo estimates.
    Sim {
        #[command(subcommand)]
        what: Sim,
    },
    /// Run one check on the input graph.
    Verify {
        #[arg(long)]
        x: Option<VertexId>,
        /// Radius of the exit profiles used by the check.
        #[arg(long, default_value_t = 64)]
        profile_radius: usize,
        #[command(subcommand)]
        check: Verify,
    },
    /// Run a built-in experiment preset.
    RunPreset {
        /// One of lattice-z1, lattice-z2, vicsek, weighted-vicsek, paper-section-5.
        name: String,
    },
}

#[derive(Subcommand)]
enum Family {
    Lattice {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        side: usize,
    },
    Vicsek {
        #[arg(long)]
        level: usize,
    },
    WeightedVicsek {
        #[arg(long)]
        level: usize,
        /// Block weights, comma separated (default 2^i on block i).
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    StretchedVicsek {
        #[arg(long)]
        level: usize,
    },
}

#[derive(Subcommand)]
enum Sim {
    /// Mean exit time from `B(x, R)`.
    Exit {
        #[arg(long)]
        x: Option<VertexId>,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// `P_x(T_{B(x, R)} < n)`.
    Tail {
        #[arg(long)]
        x: Option<VertexId>,
        #[arg(long)]
        radius: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum IsoArg {
    E,
    Fk,
    Rho,
}

#[derive(Subcommand)]
enum Verify {
    P0,
    Volume {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<usize>,
    },
    Sanity,
    Iso {
        #[arg(long, value_enum)]
        kind: IsoArg,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 8)]
        max_exhaustive: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    Due {
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
        #[arg(long, default_value_t = 6.0)]
        band: f64,
        #[arg(long)]
        finite: bool,
    },
    Ue {
        /// Target distances from x.
        #[arg(long, value_delimiter = ',', required = true)]
        distances: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    Dg {
        #[arg(long)]
        ball_radius: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        distances: Vec<usize>,
    },
    Tail {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<usize>,
    },
    Pmv {
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 0.5)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
    },
    Mv {
        #[arg(long)]
        radius: usize,
    },
    Tc {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        y_samples: usize,
    },
    Lvv {
        #[arg(long, value_delimiter = ',', required = true)]
        distances: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        eps: Vec<f64>,
    },
    Twostep {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        sets: usize,
    },
}

impl Verify {
    fn spec(&self, seed: u64) -> CheckSpec {
        match self {
            Verify::P0 => CheckSpec::P0,
            Verify::Volume { radii } => CheckSpec::Volume { radii: radii.clone() },
            Verify::Sanity => CheckSpec::KernelSanity {
                graph: None,
                config: SanityConfig {
                    seed,
                    ..SanityConfig::default()
                },
            },
            Verify::Iso {
                kind,
                radius,
                max_exhaustive,
                samples,
            } => CheckSpec::Isoperimetry {
                kind: match kind {
                    IsoArg::E => IsoKind::E,
                    IsoArg::Fk => IsoKind::Fk,
                    IsoArg::Rho => IsoKind::Rho,
                },
                radius: *radius,
                budget: FamilyBudget {
                    max_exhaustive_size: *max_exhaustive,
                    samples: *samples,
                    seed,
                },
            },
            Verify::Due {
                n_min,
                n_max,
                band,
                finite,
            } => CheckSpec::Due {
                config: DueConfig {
                    n_min: *n_min,
                    n_max: *n_max,
                    band_limit: *band,
                    finite: *finite,
                },
            },
            Verify::Ue { distances, n } => CheckSpec::Ue {
                targets: distances.iter().map(|&d| Target::Distance(d)).collect(),
                n_grid: n.clone(),
                config: UeConfig::default(),
            },
            Verify::Dg { ball_radius, distances } => CheckSpec::Dg {
                ball_radius: *ball_radius,
                distances: distances.clone(),
                config: DgConfig::default(),
            },
            Verify::Tail { radii } => CheckSpec::ExitTail {
                radii: radii.clone(),
                config: TailConfig::default(),
            },
            Verify::Pmv { radius, c1, c2 } => CheckSpec::Pmv {
                radius: *radius,
                config: PmvConfig {
                    c1: *c1,
                    c2: *c2,
                    seed,
                    ..PmvConfig::default()
                },
            },
            Verify::Mv { radius } => CheckSpec::Mv {
                radius: *radius,
                config: MvConfig {
                    seed,
                    ..MvConfig::default()
                },
            },
            Verify::Tc { radii, y_samples } => CheckSpec::Tc {
                radii: radii.clone(),
                config: TcConfig {
                    y_samples: *y_samples,
                    ..TcConfig::default()
                },
            },
            Verify::Lvv { distances, n, eps } => CheckSpec::Lvv {
                targets: distances.iter().map(|&d| Target::Distance(d)).collect(),
                n_grid: n.clone(),
                eps_grid: eps.clone(),
            },
            Verify::Twostep { radii, sets } => CheckSpec::TwoStep {
                radii: radii.clone(),
                config: TwoStepConfig {
                    sets: *sets,
                    seed,
                    ..TwoStepConfig::default()
                },
            },
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<WeightedGraph> {
    let path = cli.graph.as_deref().context("this command needs --graph")?;
    read_graph(path).with_context(|| format!("reading {}", path.display()))
}

fn vertex(g: &WeightedGraph, x: Option<VertexId>) -> anyhow::Result<VertexId> {
    match x.or(g.root()) {
        Some(x) => Ok(x),
        None => bail!("graph has no root; pass --x"),
    }
}

fn print_row(row: &SummaryRow) {
    let status = if row.pass { "PASS" } else { "FAIL" };
    if row.error.is_empty() {
        println!("{status} {:<14} statistic={:.6e} {}", row.check, row.statistic, row.constants);
    } else {
        println!("ERROR {:<14} {}", row.check, row.error);
    }
}

fn output(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Returns whether every check passed.
fn run(cli: &Cli) -> anyhow::Result<bool> {
    let seed = cli.seed.unwrap_or(7);
    let q = cli.q.unwrap_or(1.0);
    let ball_factor = cli.ball_factor.unwrap_or(3);
    match &cli.command {
        Command::Gen { family } => {
            let spec = match family {
                Family::Lattice { dim, side } => GeneratorSpec::LatticeBox { dim: *dim, side: *side },
                Family::Vicsek { level } => GeneratorSpec::Vicsek { level: *level },
                Family::WeightedVicsek { level, weights } => GeneratorSpec::WeightedVicsek {
                    level: *level,
                    weights: weights.clone(),
                },
                Family::StretchedVicsek { level } => GeneratorSpec::StretchedVicsek { level: *level },
            };
            let g = spec.build()?;
            let out = cli.out.as_deref().context("gen needs --out")?;
            write_graph(&g, out)?;
            println!(
                "{} vertices, {} edges, safe radius {:?}",
                g.vertex_count(),
                g.edge_count(),
                g.meta().safe_radius
            );
        }
        Command::Kernel { x, n, radius, finite } => {
            let g = load(cli)?;
            let x = vertex(&g, *x)?;
            let k = match (radius, finite) {
                (Some(r), _) => killed_kernel(&g, &g.ball(x, *r), x, *n)?,
                (None, true) => heat_kernel_finite(&g, x, *n)?,
                (None, false) => heat_kernel(&g, x, *n)?,
            };
            let mut w = csv::Writer::from_writer(output(cli.out.as_deref())?);
            w.write_record(["y", "p_n", "P_n"])?;
            for (y, &p) in k.values.iter().enumerate() {
                if p != 0.0 {
                    w.write_record([y.to_string(), format!("{p:?}"), format!("{:?}", p * g.measure(y))])?;
                }
            }
            w.flush()?;
        }
        Command::Lambda { x, radius } => {
            let g = load(cli)?;
            let x = vertex(&g, *x)?;
            let l = lambda_min(&g, &g.ball(x, *radius))?;
            println!(
                "lambda={:?} interval=[{:?}, {:?}] residual={:.3e}",
                l.value, l.certified_interval.0, l.certified_interval.1, l.residual
            );
        }
        Command::Profile { x, r_max } => {
            let g = load(cli)?;
            let x = vertex(&g, *x)?;
            let p = exit_profile(&g, x, *r_max, q)?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_profile_files(dir, &p)?;
                }
                None => println!("{}", serde_json::to_string_pretty(&p)?),
            }
            println!("beta={:.6} beta_prime={:.6}", p.beta, p.beta_prime);
        }
        Command::Sim { what } => {
            let g = load(cli)?;
            let r = match what {
                Sim::Exit { x, radius, trials } => {
                    let x = vertex(&g, *x)?;
                    simulate_exit(&g, &g.ball(x, *radius), x, *trials, seed)?
                }
                Sim::Tail { x, radius, n, trials } => {
                    let x = vertex(&g, *x)?;
                    simulate_tail(&g, x, *radius, *n, *trials, seed)?
                }
            };
            println!("{}", serde_json::to_string(&r)?);
        }
        Command::Verify {
            x,
            profile_radius,
            check,
        } => {
            let g = load(cli)?;
            let x = vertex(&g, *x)?;
            let spec = check.spec(seed);
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", spec.label())));
            let row = run_single(&g, x, *profile_radius, q, ball_factor, &spec, &out)?;
            print_row(&row);
            return Ok(row.pass);
        }
        Command::RunPreset { name } => {
            let p = preset(name)?.with_overrides(cli.seed, cli.q, cli.ball_factor);
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(name));
            let outcome = run_preset(&p, &out)?;
            for row in &outcome.rows {
                print_row(row);
            }
            println!("wrote {}", out.display());
            return Ok(outcome.failures() == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.strict => ExitCode::from(3),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(CliError::UnknownPreset(..)) => {
                    eprintln!("known presets: {}", NAMES.join(", "));
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
