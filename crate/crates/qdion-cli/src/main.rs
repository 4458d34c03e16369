//! Command-line driver: run scenarios, list presets, dump spectra, print
//! the transmission budget. Exit codes: 0 success, 1 validation/input
//! problems, 2 runtime failures.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use qdion::emitter::GridSpec;
use qdion::scenario::{self, Engine, Scenario};
use qdion::Error;

#[derive(Parser)]
#[command(
    name = "qdion",
    version,
    about = "Simulator of a photonic link between a driven quantum-dot photon source and a cavity-coupled trapped ion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled preset or a scenario file; writes CSV and JSON.
    Run {
        /// Preset name (see `presets list`) or path to a scenario TOML file.
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $QDION_OUT_DIR or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the Monte Carlo repetition count.
        #[arg(long)]
        reps: Option<u64>,
        /// Warn about unknown scenario keys instead of rejecting them.
        #[arg(long)]
        lenient: bool,
        /// Also write a simple SVG rendering of the sweep.
        #[arg(long)]
        svg: bool,
    },
    /// Inspect the bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
    /// Dump the emission spectrum for ad-hoc emitter settings.
    Spectrum {
        /// Normalized drive intensity I/I_sat.
        #[arg(long)]
        s: f64,
        /// Emitter detuning from the laser, MHz.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Grid points.
        #[arg(long, default_value_t = 4096)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Print the optical-path transmission budget.
    Budget {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List preset names with one-line descriptions.
    List,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("QDION_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(name_or_path: &str, lenient: bool) -> Result<Scenario, Error> {
    if scenario::preset_names().contains(&name_or_path) {
        return scenario::preset(name_or_path);
    }
    let path = Path::new(name_or_path);
    if lenient {
        let (sc, warnings) = scenario::load_scenario_lenient(path)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(sc)
    } else {
        scenario::load_scenario(path)
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            scenario: which,
            seed,
            out,
            reps,
            lenient,
            svg,
        } => {
            let mut sc = load(&which, lenient)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            if let Some(reps) = reps {
                sc.sequence.n_reps = reps;
            }
            let artifacts = scenario::run(&sc, &out_dir(out), svg)?;
            println!("{}", artifacts.headline);
            println!("wrote {}", artifacts.csv.display());
            println!("wrote {}", artifacts.json.display());
            if let Some(svg) = artifacts.svg {
                println!("wrote {}", svg.display());
            }
            Ok(())
        }
        Command::Presets {
            action: PresetsAction::List,
        } => {
            for (name, description) in scenario::preset_summaries() {
                println!("{name:<12} {description}");
            }
            Ok(())
        }
        Command::Spectrum {
            s,
            delta,
            points,
            out,
            svg,
        } => {
            let mut sc = scenario::preset("mollow_s11")?;
            sc.name = format!("spectrum_s{s}_d{delta}");
            sc.description = Some(format!("emission spectrum at s = {s}, delta = {delta} MHz"));
            sc.engine = Engine::Spectrum;
            sc.emitter.s = s;
            sc.emitter.delta = delta;
            sc.spectrum_grid = Some(GridSpec {
                points,
                half_span_mhz: None,
            });
            let artifacts = scenario::run(&sc, &out_dir(out), svg)?;
            println!("{}", artifacts.headline);
            println!("wrote {}", artifacts.csv.display());
            println!("wrote {}", artifacts.json.display());
            Ok(())
        }
        Command::Budget { out } => {
            let sc = scenario::preset("budget")?;
            let artifacts = scenario::run(&sc, &out_dir(out), false)?;
            let budget = sc.budget.clone().unwrap_or_default();
            let mut cumulative = 1.0;
            for stage in &budget.stages {
                cumulative *= stage.transmission;
                println!(
                    "{:<28} {:>5.2}   cumulative {:.5}",
                    stage.name, stage.transmission, cumulative
                );
            }
            println!("{}", artifacts.headline);
            println!("wrote {}", artifacts.csv.display());
            Ok(())
        }
    }
}
