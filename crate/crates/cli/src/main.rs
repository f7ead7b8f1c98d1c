use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonrecip_cli::commands::{cmd_design, cmd_reproduce_fig3, cmd_simulate, cmd_solve_lambda, cmd_sweep_lambda};
use nonrecip_cli::error::EXIT_FAILURE;
use nonrecip_cli::{CliError, CliResult, ScenarioConfig};
use nonrecip_core::ModelKind;

#[derive(Parser)]
#[command(name = "nonrecip", version, about = "Invariant-based circulator design and transmon-chain simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Without it the circulator defaults are used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and ensembles (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// ideal, single_excitation, full_qubit or full_three_level.
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Switch the Lindblad channels off.
    #[arg(long, global = true)]
    no_noise: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Pulse and drive tables plus the realised phase.
    Design,
    /// Find the λ giving a target phase.
    SolveLambda {
        #[arg(long, allow_hyphen_values = true)]
        target_phase_rad: Option<f64>,
    },
    /// Phase against λ on a uniform grid.
    SweepLambda {
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Propagate one basis transfer or the ensemble.
    Simulate {
        /// 100, 010, 001, A, M, B or `ensemble`.
        #[arg(long)]
        initial: Option<String>,
    },
    /// All six panels and a comparison summary.
    ReproduceFig3,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model `{s}`"))
}

fn scenario(cli: &Cli) -> CliResult<ScenarioConfig> {
    let mut cfg = match &cli.common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => match cli.command {
            Command::SolveLambda { .. } => ScenarioConfig::default(),
            _ => ScenarioConfig::circulator(),
        },
    };
    if let Some(m) = cli.common.model {
        cfg.model = m;
    }
    if cli.common.no_noise {
        cfg.noise = false;
    }
    if let Some(out) = &cli.common.out {
        cfg.out_dir = out.clone();
    }
    match &cli.command {
        Command::SweepLambda { lo, hi, n } => {
            cfg.sweep.lo = lo.unwrap_or(cfg.sweep.lo);
            cfg.sweep.hi = hi.unwrap_or(cfg.sweep.hi);
            cfg.sweep.n = n.unwrap_or(cfg.sweep.n);
        }
        Command::Simulate { initial: Some(i) } => cfg.initial = i.clone(),
        Command::SolveLambda {
            target_phase_rad: Some(p),
        } => {
            cfg.lambda = None;
            cfg.target_phase_rad = Some(*p);
        }
        _ => {}
    }
    if !matches!(cli.command, Command::SolveLambda { .. }) || cfg.target_phase_rad.is_some() {
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<String> {
    let cfg = scenario(cli)?;
    let out = cfg.out_dir.clone();
    let line = match &cli.command {
        Command::Design => {
            let s = cmd_design(&cfg, &out)?;
            format!("lambda {} theta_plus {} ({})", s.lambda.lambda, s.theta_plus_rad, s.label)
        }
        Command::SolveLambda { target_phase_rad } => {
            let s = cmd_solve_lambda(&cfg, *target_phase_rad, &out)?;
            format!("lambda {} theta_plus {} residual {:e}", s.solution.lambda, s.solution.theta_plus, s.solution.residual)
        }
        Command::SweepLambda { .. } => {
            let s = cmd_sweep_lambda(&cfg, &out)?;
            format!("{} points, decreasing: {}", s.n, s.monotonic_decreasing)
        }
        Command::Simulate { .. } => {
            let s = cmd_simulate(&cfg, &out)?;
            format!("{} noise={} step {} ns: fidelity {}", s.model, s.noise, s.step_ns, s.final_fidelity)
        }
        Command::ReproduceFig3 => {
            let s = cmd_reproduce_fig3(&cfg, &out)?;
            let mut lines: Vec<String> = s
                .comparisons
                .iter()
                .map(|c| {
                    let verdict = if c.pass { "PASS" } else { "FAIL" };
                    format!("{verdict} {} computed {:?} ({})", c.quantity, c.computed, c.rule)
                })
                .collect();
            lines.push(format!("model {} noise={}", s.model, s.noise));
            lines.join("\n")
        }
    };
    Ok(line)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.common.jobs).build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => Err(CliError::Config(format!("worker pool: {e}"))),
    };
    match result {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
