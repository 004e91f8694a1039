use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use altq::experiments::{default_gamma_grid, default_refund_grid, parse_grid, rows_to_csv};
use altq::{
    run_sweep, simulate, solve, validate, AltqError, Method, ModelParams, SimConfig, Solution, Strategy,
    SweepFamily, SweepSpec, ValidatedParams,
};

#[derive(Parser)]
#[command(name = "altq", version, about = "Equilibrium analysis of a queue with alternating information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Qbd,
    Genfunc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gamma,
    Theta,
    Refund,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium strategy and measures for one parameter set.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "qbd")]
        method: MethodArg,
    },
    /// Equilibrium over a grid of one parameter, written as CSV.
    Sweep {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        config: PathBuf,
        /// `a:b:step`; defaults exist for the gamma and refund families.
        #[arg(long)]
        grid: Option<String>,
        /// Cycle length for the gamma family.
        #[arg(long = "B")]
        cycle: Option<f64>,
        /// Observable-period rate for the theta family.
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, value_enum, default_value = "qbd")]
        method: MethodArg,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the queue under a fixed joining probability.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Joining probability of hidden arrivals; the equilibrium value if omitted.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        events: u64,
        #[arg(long, default_value_t = 20)]
        reps: u32,
        #[arg(long, default_value_t = 0.1)]
        warmup: f64,
    },
}

fn load(path: &PathBuf) -> Result<ValidatedParams, AltqError> {
    let text = std::fs::read_to_string(path).map_err(|e| AltqError::Config(format!("{}: {e}", path.display())))?;
    validate(ModelParams::from_json(&text)?)
}

fn solution_json(sol: &Solution, method: Method) -> Value {
    let e = &sol.equilibrium;
    let m = &sol.measures;
    json!({
        "method": method.to_string(),
        "q_e": e.q_e,
        "case": e.case.as_str(),
        "n_e": e.n_e,
        "n_s": e.n_s,
        "residual": e.residual,
        "iterations": e.iterations,
        "fallbacks": e.fallbacks,
        "mu_e": m.mu_e,
        "a_e": m.a_e,
        "EN": m.en,
        "S_e": m.s_e,
    })
}

fn single_method(m: MethodArg) -> Result<Method, AltqError> {
    match m {
        MethodArg::Qbd => Ok(Method::Qbd),
        MethodArg::Genfunc => Ok(Method::Genfunc),
        MethodArg::Both => Err(AltqError::Config("--method both is only available for solve".into())),
    }
}

fn run(cli: Cli) -> Result<(), AltqError> {
    match cli.command {
        Command::Solve { config, method } => {
            let params = load(&config)?;
            let out = match method {
                MethodArg::Both => {
                    let a = solve(&params, Method::Qbd)?;
                    let b = solve(&params, Method::Genfunc)?;
                    json!({
                        "qbd": solution_json(&a, Method::Qbd),
                        "genfunc": solution_json(&b, Method::Genfunc),
                        "q_e_difference": (a.equilibrium.q_e - b.equilibrium.q_e).abs(),
                    })
                }
                m => {
                    let m = single_method(m)?;
                    solution_json(&solve(&params, m)?, m)
                }
            };
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Command::Sweep {
            family,
            config,
            grid,
            cycle,
            zeta,
            method,
            out,
        } => {
            let params = load(&config)?;
            let family = match family {
                FamilyArg::Gamma => SweepFamily::Gamma,
                FamilyArg::Theta => SweepFamily::Theta,
                FamilyArg::Refund => SweepFamily::Refund,
            };
            let grid = match (grid, family) {
                (Some(g), _) => parse_grid(&g)?,
                (None, SweepFamily::Gamma) => default_gamma_grid(),
                (None, SweepFamily::Refund) => default_refund_grid(),
                (None, SweepFamily::Theta) => {
                    return Err(AltqError::InvalidSweep("the theta family needs --grid".into()))
                }
            };
            let extra = match family {
                SweepFamily::Gamma => cycle,
                SweepFamily::Theta => zeta,
                SweepFamily::Refund => None,
            };
            let spec = SweepSpec {
                family,
                base: params.into_inner(),
                grid,
                extra,
            };
            let rows = run_sweep(&spec, single_method(method)?)?;
            let csv = rows_to_csv(&rows);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Simulate {
            config,
            q,
            seed,
            events,
            reps,
            warmup,
        } => {
            let params = load(&config)?;
            let q = match q {
                Some(q) => q,
                None => solve(&params, Method::Qbd)?.equilibrium.q_e,
            };
            let strategy = Strategy::for_params(&params, q)?;
            let cfg = SimConfig {
                seed,
                events,
                warmup_fraction: warmup,
                replications: reps,
            };
            let est = simulate(&params, &strategy, &cfg)?;
            let out = json!({
                "strategy": strategy,
                "estimates": est,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("ALTQ_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
