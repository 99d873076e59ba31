use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decprox_cli::config::{parse_config, ExperimentConfig};
use decprox_cli::experiment::{build_instance, resolve_all, run_experiment, total_wall_time};
use decprox_cli::output::{num, status_name, verdict_name};
use decprox_cli::CliError;

#[derive(Parser)]
#[command(name = "decprox", version, about = "Decentralized proximal gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm of a configuration and write CSV trajectories.
    Run { config: PathBuf },
    /// Print the spectral assumption report of each algorithm.
    Validate { config: PathBuf },
    /// Run the two-agent separate-regularizer counterexample.
    Counterexample {
        /// problem dimension (even)
        #[arg(long = "M", default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 20000)]
        iters: usize,
        #[arg(long, default_value_t = 10)]
        record_every: usize,
        #[arg(long, default_value = "counterexample_out")]
        output_dir: PathBuf,
    },
    /// Print theoretical rates for the resolved step-sizes without running.
    Rates { config: PathBuf },
}

fn execute(cfg: &ExperimentConfig) -> Result<ExitCode, CliError> {
    let report = run_experiment(cfg)?;
    println!("algorithm,mu,final_error,verdict,status");
    for o in &report.outcomes {
        println!(
            "{},{},{},{},{}",
            o.resolved.label,
            num(o.resolved.mu),
            num(o.record.final_error()),
            verdict_name(o.verdict.classification),
            status_name(&o.record.status)
        );
    }
    eprintln!("wrote {} ({:.2?} of compute)", cfg.output_dir.display(), total_wall_time(&report));
    Ok(if report.any_diverged() { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn validate(cfg: &ExperimentConfig) -> Result<ExitCode, CliError> {
    let inst = build_instance(cfg)?;
    println!("graph: K={} edges={} connected={}", inst.graph.k(), inst.graph.edge_count(), inst.graph.is_connected());
    println!("costs: nu={} delta={}", num(inst.costs.nu()), num(inst.costs.delta()));
    for r in resolve_all(cfg, &inst)? {
        let atc = r.theory_triple.algorithm.is_some_and(|id| id.is_atc());
        match &r.spectral {
            Some(s) => {
                let (name, ok) = if atc { ("assumption2", s.assumption2_ok) } else { ("assumption4", s.assumption4_ok) };
                println!(
                    "{}: sigma_max(C)={} sigma_min(B^2)={} {name}={ok}",
                    r.label,
                    num(s.sigma_max_c),
                    num(s.sigma_min_b_sq),
                );
                if !ok {
                    for msg in &s.diagnostics.messages {
                        println!("  {msg}");
                    }
                }
            }
            None => println!("{}: triple is malformed", r.label),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn rates(cfg: &ExperimentConfig) -> Result<ExitCode, CliError> {
    let inst = build_instance(cfg)?;
    println!("algorithm,theorem,mu,mu_bound,gamma,gamma_primal,gamma_dual,feasible");
    for r in resolve_all(cfg, &inst)? {
        match r.rate {
            Some(g) => println!(
                "{},{:?},{},{},{},{},{},{}",
                r.label,
                g.theorem,
                num(g.mu),
                num(g.mu_bound),
                num(g.gamma),
                num(g.gamma_primal),
                num(g.gamma_dual),
                g.feasible
            ),
            None => println!("{},,{},{},,,,", r.label, num(r.mu), num(r.mu_bound)),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => parse_config(&config).and_then(|c| execute(&c)),
        Command::Validate { config } => parse_config(&config).and_then(|c| validate(&c)),
        Command::Rates { config } => parse_config(&config).and_then(|c| rates(&c)),
        Command::Counterexample { m, iters, record_every, output_dir } => {
            if m < 2 || m % 2 != 0 || iters == 0 || record_every == 0 {
                Err(CliError::Config("--M must be even and at least 2; --iters and --record-every positive".into()))
            } else {
                let mut cfg = ExperimentConfig::counterexample_preset(m, iters);
                cfg.record_every = record_every;
                cfg.output_dir = output_dir;
                execute(&cfg)
            }
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
