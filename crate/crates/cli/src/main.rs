mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ppcs_core::circuit::{PresetKind, TuneObjective};
use ppcs_core::Error;

use commands::{Inputs, TuneRequest};

/// Photon-pair source simulator.
#[derive(Parser)]
#[command(name = "ppcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (netlist plus settings sections).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario used when no file is given: chip_a, chip_b, two_chip_link.
    #[arg(long, conflicts_with = "scenario", value_parser = parse_preset)]
    preset: Option<PresetKind>,
    /// Parameter file (`key = value` lines), applied before `--set`.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Override one setting, e.g. `--set pump.power_mw=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Transmission spectra of output ports.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Port to evaluate; repeat for several. Defaults to every output.
        #[arg(long)]
        port: Vec<String>,
    },
    /// Pair and coincidence rates over a list of pump powers.
    PowerSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated on-chip pump powers in mW, ascending.
        #[arg(long = "powers-mw", value_delimiter = ',')]
        powers_mw: Vec<f64>,
    },
    /// Monte Carlo coincidence histogram and CAR.
    Coincidence {
        #[command(flatten)]
        common: Common,
    },
    /// Solve a heater current and write the tuned scenario.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Heated ring to tune.
        #[arg(long)]
        component: String,
        /// Target wavelength in nm; defaults to the pump.
        #[arg(long = "target-nm")]
        target_nm: Option<f64>,
        /// minimize_through or maximize_drop.
        #[arg(long, default_value = "minimize_through", value_parser = parse_objective)]
        objective: TuneObjective,
        /// Also report the transmission of this output port.
        #[arg(long)]
        port: Option<String>,
        /// File name of the tuned scenario inside `--out`.
        #[arg(long = "output-name", default_value = "tuned.ppcs")]
        output_name: String,
    },
    /// Solve the calibration anchors and write a parameter file.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Targets file (`key = value` lines); defaults apply to missing keys.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Write the built-in scenarios to disk.
    Presets {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_preset(s: &str) -> Result<PresetKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<TuneObjective, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn inputs(c: &Common) -> Inputs<'_> {
    Inputs {
        scenario: c.scenario.as_deref(),
        preset: c.preset,
        params: c.params.as_deref(),
        overrides: &c.set,
        seed: c.seed,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PPCS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("PPCS_THREADS must be a positive integer, got `{v}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum { common, port } => {
            let (cfg, info) = commands::load("spectrum", &inputs(&common))?;
            commands::spectrum(&cfg, &info, &port, &common.out)
        }
        Command::PowerSweep { common, powers_mw } => {
            let (cfg, info) = commands::load("power-sweep", &inputs(&common))?;
            commands::power_sweep(&cfg, &info, &powers_mw, &common.out)
        }
        Command::Coincidence { common } => {
            let (cfg, info) = commands::load("coincidence", &inputs(&common))?;
            commands::coincidence(&cfg, &info, &common.out)
        }
        Command::Tune { common, component, target_nm, objective, port, output_name } => {
            let (mut cfg, info) = commands::load("tune", &inputs(&common))?;
            let req = TuneRequest {
                component: &component,
                target_nm,
                objective,
                port: port.as_deref(),
                scenario_name: output_name,
            };
            commands::tune(&mut cfg, &info, &req, &common.out).map(|_| ())
        }
        Command::Calibrate { common, targets } => {
            let (cfg, info) = commands::load("calibrate", &inputs(&common))?;
            commands::run_calibration(&cfg, &info, targets.as_deref(), &common.out)
        }
        Command::Presets { out } => commands::write_presets(&out),
    }
}

/// 2 for configuration errors, 3 for physics and tuning errors, 4 for the
/// overflow guard.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Overflow(_)) => 4,
        Some(err) if err.is_config() => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
