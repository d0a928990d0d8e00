use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topoman::{ExecMode, Scheme};
use topoman_cli::{cmd_compare, cmd_gen_trace, cmd_run, cmd_validate, Overrides};

#[derive(Parser)]
#[command(name = "topoman", version, about = "Resource-aware topology management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the scenario's topology and trace.
    Validate(Common),
    /// Simulate one scheme and write its series, event log and decisions.
    Run(Common),
    /// Simulate every scheme and write the comparison report.
    Compare(Common),
    /// Write the scenario's generated trace as JSON.
    GenTrace(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; falls back to the scenario's `out`, then TOPOMAN_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scheme: Option<Scheme>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, scheme: self.scheme }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Validate(c) => {
            let problems = cmd_validate(&c.scenario, &c.overrides())?;
            if problems.is_empty() {
                println!("{}: ok", c.scenario.display());
                return Ok(ExitCode::SUCCESS);
            }
            for p in &problems {
                eprintln!("{p}");
            }
            Ok(ExitCode::FAILURE)
        }
        Command::Run(c) => {
            let (result, written) = cmd_run(&c.scenario, &c.overrides())?;
            println!("{}: {} admitted, {} rejected", result.scheme, result.admitted(), result.rejected());
            for f in written.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(c) => {
            let (report, written) = cmd_compare(&c.scenario, &c.overrides(), ExecMode::default())?;
            for (scheme, m) in &report.scheme_means {
                println!("{scheme}: cpu {:.4} mem {:.4} overall {:.4}", m.cpu, m.mem, m.overall);
            }
            match report.proposed_below_baseline_average {
                Some(flag) => println!("proposed_below_baseline_average: {flag}"),
                None => println!("proposed_below_baseline_average: null"),
            }
            for f in written.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GenTrace(c) => {
            let (trace, written) = cmd_gen_trace(&c.scenario, &c.overrides())?;
            println!("generated {} requests", trace.len());
            for f in written.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
