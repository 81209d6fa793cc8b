//! `kac`: simulate the Kac equation, solve it on the Fourier side, evaluate
//! the convergence bounds and run rate studies. See `exit.rs` for exit codes.

mod commands;
mod config;
mod exit;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, SampleFormat, SolveMethod};

#[derive(Parser, Debug)]
#[command(
    name = "kac",
    version,
    about = "Kac equation simulator, Fourier oracle and CLT rate checks"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON run configuration or a previous manifest; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for artifacts [default: $KAC_OUTPUT_DIR, else the current directory].
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// File stem for artifacts (default: the command name).
    #[arg(long, global = true)]
    name: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SimArgs {
    /// Initial law, e.g. `rademacher:1`, `two-point:0,2,0.5`, `empirical:data.txt`.
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    size: Option<usize>,
    /// Required: there is no entropy-seeded default.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest collision count accepted before failing.
    #[arg(long)]
    nu_cap: Option<u64>,
    #[arg(long)]
    chunk_size: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SolverArgs {
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    theta_nodes: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    wild_terms: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct BoundArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Berry–Esseen constant for the chosen delta.
    #[arg(long)]
    c_delta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw i.i.d. samples of V_t.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum)]
        format: Option<SampleFormat>,
    },
    /// Solve on the Fourier side by Wild series, RK4, or both.
    Solve {
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        method: Option<SolveMethod>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Catalan count, tree probabilities and depth moments for n leaves.
    TreeStats {
        #[arg(long)]
        n: Option<usize>,
        /// Monte Carlo trees to sample (needs --seed).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        x: Option<f64>,
    },
    /// Evaluate the convergence bounds at one or more times.
    Bounds {
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Also evaluate the tail bound for the largest leaf coefficient at this level.
        #[arg(long)]
        x: Option<f64>,
    },
    /// Kolmogorov distance to the Maxwellian along a time grid.
    RateStudy {
        #[arg(long)]
        law: Option<String>,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        nu_cap: Option<u64>,
        /// Scale of the reference Gaussian (default: the law's).
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Skip the SVG chart.
        #[arg(long)]
        no_svg: bool,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn label(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Solve { .. } => "solve",
            Command::TreeStats { .. } => "tree-stats",
            Command::Bounds { .. } => "bounds",
            Command::RateStudy { .. } => "rate-study",
            Command::Verify { .. } => "verify",
        }
    }

    fn flags(self) -> RunConfig {
        let mut cfg = RunConfig::default();
        let bound_fields = |cfg: &mut RunConfig, b: BoundArgs| {
            cfg.a = b.a;
            cfg.p = b.p;
            cfg.c = b.c;
            cfg.delta = b.delta;
            cfg.c_delta = b.c_delta;
        };
        match self {
            Command::Simulate { sim, format } => {
                cfg.law = sim.law;
                cfg.t = sim.t;
                cfg.size = sim.size;
                cfg.seed = sim.seed;
                cfg.nu_cap = sim.nu_cap;
                cfg.chunk_size = sim.chunk_size;
                cfg.format = format;
            }
            Command::Solve {
                law,
                t,
                t_grid,
                method,
                solver,
            } => {
                cfg.law = law;
                cfg.t = t;
                cfg.t_grid = t_grid;
                cfg.method = method;
                cfg.xi_max = solver.xi_max;
                cfg.n_points = solver.n_points;
                cfg.theta_nodes = solver.theta_nodes;
                cfg.step = solver.step;
                cfg.wild_terms = solver.wild_terms;
            }
            Command::TreeStats {
                n,
                samples,
                seed,
                x,
            } => {
                cfg.n = n;
                cfg.samples = samples;
                cfg.seed = seed;
                cfg.x = x;
            }
            Command::Bounds {
                law,
                t,
                t_grid,
                bounds,
                x,
            } => {
                cfg.law = law;
                cfg.t = t;
                cfg.t_grid = t_grid;
                cfg.x = x;
                bound_fields(&mut cfg, bounds);
            }
            Command::RateStudy {
                law,
                t_grid,
                size,
                seed,
                nu_cap,
                sigma,
                bounds,
                no_svg,
            } => {
                cfg.law = law;
                cfg.t_grid = t_grid;
                cfg.size = size;
                cfg.seed = seed;
                cfg.nu_cap = nu_cap;
                cfg.sigma = sigma;
                cfg.svg = no_svg.then_some(false);
                bound_fields(&mut cfg, bounds);
            }
            Command::Verify { seed, quick } => {
                cfg.seed = seed;
                cfg.quick = quick.then_some(true);
            }
        }
        cfg
    }
}

fn fail(report: exit::ErrorReport) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string(&report).unwrap_or_else(|_| report.message.clone())
    );
    ExitCode::from(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail(exit::ErrorReport {
                error: "internal",
                message: e.to_string(),
                exit_code: exit::INTERNAL,
            });
        }
    }
    let label = cli.command.label();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => return fail(exit::classify(&e)),
        },
        None => RunConfig::default(),
    };
    if let Some(cmd) = &cfg.command {
        if cmd != label {
            return fail(exit::ErrorReport {
                error: "invalid_argument",
                message: format!("config is for `{cmd}`, not `{label}`"),
                exit_code: exit::INVALID_ARGUMENT,
            });
        }
    }
    let mut flags = cli.command.flags();
    flags.command = Some(label.to_string());
    flags.output_dir = cli.output_dir;
    flags.name = cli.name;
    cfg.overlay(&flags);
    match commands::run(label, cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(exit::classify(&e)),
    }
}
