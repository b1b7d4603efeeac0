use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ale_capillary::geometry::{sobolev_norm, ReferenceCurve};
use ale_capillary::io::{load_config, run_to_directory, save_config};
use ale_capillary::smoothing::MollifierKernel;
use ale_capillary::timestepper::{seed_height, SeedCase, TerminalStatus};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Capillary free-boundary flow on a perturbed disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a config file.
    Run { config: PathBuf },
    /// Validate a config file and print derived parameters.
    Check { config: PathBuf },
    /// Run the built-in invariant checks.
    Selftest,
}

const CONFIG_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;

fn config_dir(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            match run_to_directory(&cfg, &config_dir(&config)) {
                Ok(m) => {
                    println!("status: {}", serde_json::to_string(&m.status).unwrap_or_default());
                    if let Some(msg) = &m.message {
                        println!("{msg}");
                    }
                    if m.status == TerminalStatus::Completed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(SOLVER_ERROR)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(SOLVER_ERROR)
                }
            }
        }
        Command::Check { config } => match load_config(&config) {
            Ok(cfg) => {
                print!("{}", save_config(&cfg));
                let curve = ReferenceCurve::unit_circle(cfg.n_theta);
                let len = (cfg.n_r + 1) * cfg.n_theta;
                println!("# nodes per component = {len}");
                println!("# linear unknowns = {}", 3 * len);
                println!("# steps = {}", cfg.steps_from(0.0));
                println!("# boundary regularization epsilon^2 = {}", cfg.epsilon * cfg.epsilon);
                if let Ok(k) = MollifierKernel::new(&curve, cfg.epsilon) {
                    println!("# mollifier taps = {}", k.taps().len());
                }
                if cfg.seed_case != SeedCase::CustomCsv {
                    let h = seed_height(&cfg);
                    println!("# initial |h|_H1.7 = {:.6e} (gate {})", sobolev_norm(&curve, &h.values, 1.7), cfg.varsigma);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::Selftest => {
            let checks = ale_capillary::selftest::run();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(SOLVER_ERROR)
            }
        }
    }
}
