//! `vdt`: fusion, simulation, teleoperation and thrust queries.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 runtime failure.

mod fuse;
mod manifest;
mod sim;
mod teleop;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "vdt", version, about = "Digital-twin tools for the KP-2 tilt-rotor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse HF and LF aerodynamic datasets into a database.
    Fuse(fuse::FuseArgs),
    /// Write seeded synthetic HF/LF datasets from the tool emulators.
    Emulate(fuse::EmulateArgs),
    /// Fly a mission file or the square pattern.
    Simulate(sim::SimulateArgs),
    /// Fly the cruise scenario under several databases and compare pitch.
    Compare(sim::CompareArgs),
    /// Run a digital/physical teleoperation session.
    Teleop(teleop::TeleopArgs),
    /// Maximum rotor thrust at an axial inflow speed.
    Thrust(sim::ThrustArgs),
}

/// Error classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Runtime(e) => e,
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub trait Classify<T> {
    fn or_input(self) -> Result<T, Failure>;
    fn or_runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn or_runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub fn input_error(msg: impl std::fmt::Display) -> Failure {
    Failure::Input(anyhow::anyhow!("{msg}"))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).or_runtime()?;
    fs::write(path, text + "\n")
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
        .or_runtime()
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> Outcome {
    let file = fs::File::create(path)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", path.display()))
        .or_runtime()?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).or_runtime()?;
        w.write_all(b"\n").or_runtime()?;
    }
    w.flush().or_runtime()
}

pub fn create_out_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))
        .or_input()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VDT_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fuse(a) => fuse::run_fuse(a),
        Command::Emulate(a) => fuse::run_emulate(a),
        Command::Simulate(a) => sim::run_simulate(a),
        Command::Compare(a) => sim::run_compare(a),
        Command::Teleop(a) => teleop::run_teleop(a),
        Command::Thrust(a) => sim::run_thrust(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
