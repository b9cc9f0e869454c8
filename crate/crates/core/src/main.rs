use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oslc_transport::harness::{self, load_config, run_scenario, Command, Overrides, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "oslc-transport",
    version,
    about = "Transport flows and solutions for one-sided Lipschitz fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Clone, Debug, Default)]
struct Flags {
    /// Nodes per axis, replacing the scenario's grid size.
    #[arg(long, global = true, value_name = "NX")]
    grid: Option<usize>,
    /// First mollification width of the schedule.
    #[arg(long, global = true)]
    eps0: Option<f64>,
    /// Cauchy tolerance between consecutive flows.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory, replacing the scenario's.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the OSLC pair sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Every diagnostic of the scenario, plus solution bundles.
    Run { config: PathBuf },
    /// OSLC, translation, and jump diagnostics of the field.
    OslcCheck { config: PathBuf },
    /// Transport flow, its bundle, and flow diagnostics.
    Flow { config: PathBuf },
    /// Reversible backward solution and its diagnostics.
    Backward { config: PathBuf },
    /// Forward duality solution and its diagnostics.
    Forward { config: PathBuf },
    /// Duality pairing of the forward and backward solutions.
    Pairing { config: PathBuf },
    /// Weak stability along an approximating sequence.
    Stability { config: PathBuf },
    /// Transport flows of the planar sgn example for several lambda.
    Nonuniqueness { config: PathBuf },
    /// Runs a built-in scenario.
    Demo { name: String },
}

fn prepare(config: ScenarioConfig, base: &Path, flags: &Flags) -> Result<Scenario, oslc_transport::Error> {
    let overrides = Overrides {
        grid: flags.grid,
        eps0: flags.eps0,
        tol: flags.tol,
        out: flags.out.clone(),
        seed: flags.seed,
    };
    Scenario::prepare(config, base, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, loaded) = match &cli.command {
        Cmd::Demo { name } => {
            if name != "sgn2d" {
                eprintln!("error: unknown demo {name:?} (available: sgn2d)");
                return ExitCode::from(2);
            }
            let config = serde_json::from_str::<ScenarioConfig>(harness::SGN2D_REFERENCE)
                .map_err(|e| oslc_transport::Error::InvalidArgument(e.to_string()));
            (Command::Run, config.map(|c| (c, PathBuf::from("."))))
        }
        Cmd::Run { config }
        | Cmd::OslcCheck { config }
        | Cmd::Flow { config }
        | Cmd::Backward { config }
        | Cmd::Forward { config }
        | Cmd::Pairing { config }
        | Cmd::Stability { config }
        | Cmd::Nonuniqueness { config } => {
            let command = match &cli.command {
                Cmd::Run { .. } => Command::Run,
                Cmd::OslcCheck { .. } => Command::OslcCheck,
                Cmd::Flow { .. } => Command::Flow,
                Cmd::Backward { .. } => Command::Backward,
                Cmd::Forward { .. } => Command::Forward,
                Cmd::Pairing { .. } => Command::Pairing,
                Cmd::Stability { .. } => Command::Stability,
                _ => Command::Nonuniqueness,
            };
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            (command, load_config(config).map(|c| (c, base)))
        }
    };
    let scenario = match loaded.and_then(|(c, base)| prepare(c, &base, &cli.flags)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let summary = match run_scenario(&scenario, command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for a in &summary.assertions {
        let mark = if a.passed { "pass" } else { "FAIL" };
        println!("{mark} {}: {:e} (threshold {:e})", a.name, a.value, a.threshold);
        if let (false, Some(d)) = (a.passed, &a.detail) {
            println!("     {d}");
        }
    }
    println!("report written to {}", scenario.out_dir.display());
    if summary.passed() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<&str> = summary.failures().map(|a| a.name.as_str()).collect();
        eprintln!("failed: {}", names.join(", "));
        ExitCode::from(1)
    }
}
