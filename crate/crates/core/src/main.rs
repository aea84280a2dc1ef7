use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use urchin_sim::harness::{builtin, builtin_scenarios, load_scenario, run, write_csv, Scenario};
use urchin_sim::teleop::{serve, ServerConfig};
use urchin_sim::Error;

#[derive(Parser)]
#[command(name = "urchin-sim", version, about = "Spiny spherical robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file (or a built-in scenario name) and write its trajectory CSV.
    Run {
        scenario: String,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Serve the live simulation over websocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 30.0)]
        hz: f64,
        /// Initial scenario file or built-in name.
        #[arg(long, default_value = "stance")]
        scenario: String,
    },
    /// Print the 14 spine directions and their adjacency.
    Layout,
    /// Print the rack lock/unlock sequence.
    RackDemo {
        #[arg(long, default_value_t = 8)]
        links: usize,
    },
}

fn resolve(scenario: &str) -> Result<Scenario, Error> {
    if Path::new(scenario).exists() || scenario.ends_with(".json") {
        load_scenario(scenario)
    } else {
        builtin(scenario)
    }
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Diverged { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { scenario, out, dt, duration } => run_cmd(&scenario, out, dt, duration),
        Cmd::Serve { port, hz, scenario } => serve_cmd(port, hz, &scenario),
        Cmd::Layout => {
            print!("{}", urchin_sim::geometry::layout_table());
            Ok(())
        }
        Cmd::RackDemo { links } => urchin_sim::actuator::rack_sequence_table(links).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            exit_code(&e)
        }
    }
}

fn run_cmd(scenario: &str, out: Option<PathBuf>, dt: Option<f64>, duration: Option<f64>) -> Result<(), Error> {
    let mut s = resolve(scenario)?;
    if let Some(dt) = dt {
        s = s.with_dt(dt)?;
    }
    if let Some(d) = duration {
        s = s.with_duration(d)?;
    }
    info!("scenario:\n{}", s.echo());
    let log = run(&s)?;
    match &out {
        Some(path) => write_csv(&log, path)?,
        None => print!("{}", log.to_csv()),
    }
    if let Some(f) = &log.failure {
        return Err(Error::Diverged { time_s: f.t_s, quantity: f.message.clone() });
    }
    let last = log.rows.last().expect("at least the initial row");
    info!(
        "{}: {} rows, final position ({:.4}, {:.4}, {:.4}) m, phase {}",
        s.name(),
        log.rows.len(),
        last.position[0],
        last.position[1],
        last.position[2],
        last.phase
    );
    Ok(())
}

fn serve_cmd(port: u16, hz: f64, scenario: &str) -> Result<(), Error> {
    let initial = resolve(scenario)?;
    let mut cfg = ServerConfig::new(port, initial);
    cfg.broadcast_hz = hz;
    cfg.scenarios = builtin_scenarios();
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io { path: "tokio runtime".into(), reason: e.to_string() })?;
    rt.block_on(serve(cfg))
}
