use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use micellar_cli::gap::{spectral_gap, Spring};
use micellar_cli::{run, verify, Failure};

#[derive(Parser)]
#[command(name = "micellar", version, about = "Two-species reactive micro-macro polymer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML configuration file.
    Run { config: PathBuf },
    /// Print the spectral gap and lowest eigenvalues of the Fokker-Planck operator.
    #[command(group(ArgGroup::new("spring").required(true).args(["hookean", "fene"])))]
    Gap {
        /// Hookean stiffness H.
        #[arg(long)]
        hookean: Option<f64>,
        /// FENE strength k; needs --b0.
        #[arg(long, requires = "b0")]
        fene: Option<f64>,
        /// FENE maximal extension.
        #[arg(long)]
        b0: Option<f64>,
        /// Cells per configuration axis.
        #[arg(long, default_value_t = 64)]
        nq: usize,
        /// Configuration-space dimension.
        #[arg(long, default_value_t = 1)]
        dq: usize,
        /// Truncation radius of the Hookean box.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Run the structural identity suite.
    Verify {
        #[arg(long)]
        json: bool,
        /// Evaluate the coupling pairing with mismatched quadrature.
        #[arg(long)]
        inject_mismatch: bool,
    },
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("MICELLAR_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("MICELLAR_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let config = run::load_config(&config)?;
            let (dir, summary) = run::run(&config)?;
            let v = summary.invariants.violations;
            println!(
                "{} steps to t = {:.6}; free energy {:.6e}; violations: energy {}, reaction {}, equivalence {}; output in {}",
                summary.steps,
                summary.t_final,
                summary.free_energy_final,
                v.free_energy_increase,
                v.negative_reaction_dissipation,
                v.sobolev_equivalence,
                dir.display()
            );
            Ok(0)
        }
        Command::Gap { hookean, fene, b0, nq, dq, radius } => {
            let spring = match (hookean, fene, b0) {
                (Some(stiffness), _, _) => Spring::Hookean { stiffness },
                (None, Some(strength), Some(b0)) => Spring::Fene { strength, b0 },
                _ => return Err(Failure::Config("give --hookean H or --fene K --b0 B".into())),
            };
            let report = spectral_gap(spring, nq, dq, radius)?;
            println!("{}", serde_json::to_string(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
            Ok(0)
        }
        Command::Verify { json, inject_mismatch } => {
            let (ok, text) = verify::verify(json, inject_mismatch)?;
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("micellar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
