//! `sasaki`: batch driver for the verification suites.
//!
//! Every subcommand writes CSV tables and a JSON summary into `--out` and
//! exits 0 when its assertions hold, 1 when one fails and 2 on a bad
//! configuration. `--config` supplies `n`, `epsilon` and the curvature
//! profile; command flags override it.

mod grid;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use grid::Grid;
use sasaki::comparison::mcp_exponent;
use sasaki::config::{ProfileConfig, RunConfig};
use sasaki::models::Epsilon;
use sasaki::Error;
use suites::Outcome;

#[derive(Parser, Debug)]
#[command(name = "sasaki", version, about = "Comparison-geometry checks on Heisenberg Sasakian models")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed [default: config seed, else 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the command's tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure and curvature identities on the frame (tol 1e-10).
    Identities {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Integrate one geodesic from the origin; checks conservation (tol 1e-10).
    Geodesic {
        #[arg(long)]
        n: Option<usize>,
        /// Frame covector `h_X1..,h_Y1..,h_V` [default: 1,0,...,0,1].
        #[arg(long, allow_hyphen_values = true)]
        p: Option<Grid>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Riccati solution along a geodesic; checks the S22 lower bound (tol 1e-8).
    Riccati {
        #[arg(long)]
        n: Option<usize>,
        /// Horizontal speed.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Vertical momentum.
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, default_value = "0:0.95:0.05")]
        t: Grid,
    },
    /// PSD comparison against the closed-form model solution (tol 1e-6).
    Compare {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        b: f64,
        /// Split parameter in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value = "0.05:0.95:0.05")]
        t: Grid,
    },
    /// ODE residuals of the closed-form comparison solutions (tol 1e-7).
    ClosedForm {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.3)]
        a: f64,
        #[arg(long, default_value_t = 0.7)]
        eps: f64,
        #[arg(long, default_value_t = 0.8)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
    },
    /// Monte Carlo measure contraction of a unit box toward the origin (tol 0).
    Mcp {
        #[arg(long)]
        n: Option<usize>,
        /// Exponent [default: 2n+3 sub-Riemannian, else the computed exponent].
        #[arg(long = "N")]
        exponent: Option<u32>,
        #[arg(long, default_value = "0.1:0.9:0.1")]
        t: Grid,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        /// Distance of the box from the origin along x1.
        #[arg(long, default_value_t = 3.0)]
        offset: f64,
    },
    /// Blow-up of the trigonometric comparison solution against a r = 2 x0 (tol 0.005).
    BonnetMyers {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value = "8.5:9.5:0.05")]
        a_scan: Grid,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
    },
    /// Every suite at default settings, each in its own subdirectory.
    All,
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    seed: u64,
    tol: Option<f64>,
}

impl Context {
    fn with_n(&self, n: Option<usize>) -> sasaki::Result<RunConfig> {
        let mut cfg = self.config.clone();
        if let Some(n) = n {
            cfg.n = n;
        }
        cfg.model()?;
        Ok(cfg)
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn default_config() -> RunConfig {
    RunConfig { n: 1, epsilon: Epsilon::Sub, profile: ProfileConfig::default(), seed: None, tol: None }
}

fn run_command(ctx: &Context, command: &Command, out: &Path) -> sasaki::Result<Outcome> {
    match command {
        Command::Identities { n } => {
            let cfg = ctx.with_n(*n)?;
            suites::identities(out, cfg.n, ctx.seed, ctx.tol(1e-10))
        }
        Command::Geodesic { n, p, t_end, steps } => {
            let cfg = ctx.with_n(*n)?;
            let dim = 2 * cfg.n + 1;
            let covector = p.clone().map(|g| g.0).unwrap_or_else(|| {
                let mut v = vec![0.0; dim];
                v[0] = 1.0;
                v[dim - 1] = 1.0;
                v
            });
            let params = suites::GeodesicParams {
                model: cfg.model()?,
                covector,
                t_end: *t_end,
                steps: *steps,
                tol: ctx.tol(1e-10),
            };
            suites::geodesic(out, &params)
        }
        Command::Riccati { n, a, b, t } => {
            let cfg = ctx.with_n(*n)?;
            let params = suites::RiccatiParams {
                n: cfg.n,
                variant: cfg.epsilon,
                profile: cfg.curvature()?,
                a: *a,
                b: *b,
                grid: t.0.clone(),
                tol: ctx.tol(1e-8),
            };
            suites::riccati(out, &params)
        }
        Command::Compare { n, a, b, c, t } => {
            let cfg = ctx.with_n(*n)?;
            let params = suites::CompareParams {
                n: cfg.n,
                variant: cfg.epsilon,
                profile: cfg.curvature()?,
                a: *a,
                b: *b,
                c: *c,
                grid: t.0.clone(),
                tol: ctx.tol(1e-6),
            };
            suites::compare(out, &params)
        }
        Command::ClosedForm { n, a, eps, r, c } => {
            let cfg = ctx.with_n(*n)?;
            let params = suites::ClosedFormParams { n: cfg.n, a: *a, eps: *eps, r: *r, c: *c, tol: ctx.tol(1e-7) };
            suites::closed_form(out, &params)
        }
        Command::Mcp { n, exponent, t, samples, offset } => {
            let cfg = ctx.with_n(*n)?;
            let exponent = exponent.unwrap_or(match cfg.epsilon {
                Epsilon::Sub => 2 * cfg.n as u32 + 3,
                Epsilon::Value(_) => mcp_exponent(cfg.n).0,
            });
            let params = suites::McpParams {
                model: cfg.model()?,
                exponent,
                grid: t.0.clone(),
                samples: *samples,
                seed: ctx.seed,
                offset: *offset,
                tol: ctx.tol(0.0),
            };
            suites::mcp(out, &params)
        }
        Command::BonnetMyers { n, r, a_scan, c } => {
            let cfg = ctx.with_n(*n)?;
            let params =
                suites::BonnetMyersParams { n: cfg.n, r: *r, a_scan: a_scan.0.clone(), c: *c, band: ctx.tol(0.005) };
            suites::bonnet_myers(out, &params)
        }
        Command::All => unreachable!("handled by run_all"),
    }
}

fn all_commands() -> Vec<(&'static str, Command)> {
    let grid = |s: &str| s.parse::<Grid>().expect("built-in grid");
    vec![
        ("identities", Command::Identities { n: None }),
        ("geodesic", Command::Geodesic { n: None, p: None, t_end: 1.0, steps: 1000 }),
        ("riccati", Command::Riccati { n: None, a: 1.0, b: 0.5, t: grid("0:0.95:0.05") }),
        ("compare", Command::Compare { n: None, a: 1.0, b: 0.5, c: 0.5, t: grid("0.05:0.95:0.05") }),
        ("closed-form", Command::ClosedForm { n: None, a: 1.3, eps: 0.7, r: 0.8, c: 0.5 }),
        (
            "mcp",
            Command::Mcp { n: None, exponent: None, t: grid("0.1:0.9:0.1"), samples: 200_000, offset: 3.0 },
        ),
        ("bonnet-myers", Command::BonnetMyers { n: None, r: 1.0, a_scan: grid("8.5:9.5:0.05"), c: 0.5 }),
    ]
}

fn report(name: &str, outcome: &sasaki::Result<Outcome>, started: Instant) {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => println!("{} {name}: {} [{secs:.2}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail),
        Err(e) => eprintln!("ERROR {name}: {e}"),
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidParameter(_) | Error::VerticalOnly)
}

fn exit_code(results: &[sasaki::Result<Outcome>]) -> ExitCode {
    if results.iter().any(|r| matches!(r, Err(e) if is_config_error(e))) {
        ExitCode::from(2)
    } else if results.iter().all(|r| matches!(r, Ok(o) if o.pass)) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => default_config(),
    };
    if let Some(tol) = cli.tol {
        if !(tol >= 0.0) {
            eprintln!("error: --tol must be non-negative");
            return ExitCode::from(2);
        }
    }
    let ctx = Context { seed: cli.seed.or(config.seed).unwrap_or(42), tol: cli.tol.or(config.tol), out: cli.out, config };

    let results: Vec<sasaki::Result<Outcome>> = match &cli.command {
        Command::All => all_commands()
            .iter()
            .map(|(name, cmd)| {
                let started = Instant::now();
                let r = run_command(&ctx, cmd, &ctx.out.join(name));
                report(name, &r, started);
                r
            })
            .collect(),
        cmd => {
            let started = Instant::now();
            let r = run_command(&ctx, cmd, &ctx.out);
            report(command_name(cmd), &r, started);
            vec![r]
        }
    };
    exit_code(&results)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Identities { .. } => "identities",
        Command::Geodesic { .. } => "geodesic",
        Command::Riccati { .. } => "riccati",
        Command::Compare { .. } => "compare",
        Command::ClosedForm { .. } => "closed-form",
        Command::Mcp { .. } => "mcp",
        Command::BonnetMyers { .. } => "bonnet-myers",
        Command::All => "all",
    }
}
