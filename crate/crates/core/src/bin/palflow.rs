use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use palflow::ode::Method;
use palflow::registry::list_problems;
use palflow::run::{self, DualInit, Format, Mode, RunConfig};

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    };
}

#[derive(Parser)]
#[command(name = "palflow", version, about = "Primal-dual flow solver for constrained composite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in problems.
    List {
        /// Print the listing as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Integrate the flow on a problem and write the trajectory and a summary.
    Run(RunArgs),
    /// Parse a problem and check its gradients against finite differences.
    Validate {
        #[arg(long)]
        problem: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Registry name or path to a JSON problem file.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// One weight for all inequalities, or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Integration horizon; defaults to the problem's own (100 for most).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    /// rk4 (fixed step) or rk45 (adaptive).
    #[arg(long, default_value = "rk4")]
    method: Method,
    #[arg(long, default_value_t = 1e-9)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    /// Strictly decreasing comma-separated μ values; runs continuation.
    #[arg(long, value_delimiter = ',')]
    mu_schedule: Option<Vec<f64>>,
    /// centralized or distributed; defaults to the problem's own mode.
    #[arg(long)]
    mode: Option<Mode>,
    /// Output directory; PALFLOW_OUT takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    /// projected or as-given: treatment of the initial transformed multipliers in network runs.
    #[arg(long, default_value = "projected")]
    dual_init: DualInit,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::List { json } => {
            let entries = list_problems();
            if json {
                say!("{}", serde_json::to_string_pretty(&entries).expect("listing serializes"));
            } else {
                for e in entries {
                    let agents = e.agents.map(|a| format!(" N={a}")).unwrap_or_default();
                    let opt = e.known_optimum.map(|x| format!("{x:?}")).unwrap_or_else(|| "unknown".into());
                    say!(
                        "{:<26}{agents} n={} r={} s={} phi={} optimum={opt}\n    {}",
                        e.name,
                        e.n,
                        e.inequalities,
                        e.equalities,
                        e.phi,
                        e.description
                    );
                }
            }
            0
        }
        Command::Validate { problem } => match run::validate_problem(&problem) {
            Ok(report) => {
                say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                if report.passed {
                    0
                } else {
                    eprintln!("gradient check failed: worst relative error {:e}", report.max_gradient_error);
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run(a) => {
            let cfg = RunConfig {
                problem: a.problem,
                mu: a.mu,
                eta: a.eta,
                dt: a.dt,
                t_end: a.t_end,
                kkt_tol: a.kkt_tol,
                method: a.method,
                abs_tol: a.abs_tol,
                rel_tol: a.rel_tol,
                mu_schedule: a.mu_schedule,
                out_dir: run::resolve_out_dir(a.out),
                format: a.format,
                mode: a.mode,
                record_every: a.record_every,
                dual_init: a.dual_init,
            };
            match run::run(&cfg) {
                Ok((summary, code)) => {
                    say!(
                        "{}: {:?} after t = {:.3}, kkt = {:.3e}, x = {:?}",
                        summary.problem,
                        summary.stop_reason,
                        summary.rounds.iter().map(|r| r.t_final).sum::<f64>(),
                        summary.final_kkt.total,
                        summary.x_star
                    );
                    say!("wrote {}", cfg.out_dir.display());
                    code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
