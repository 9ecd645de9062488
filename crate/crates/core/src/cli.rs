//! Command-line front end.
//!
//! Exit codes: 0 success, 1 file I/O, 2 usage, 3 invalid config or gait,
//! 4 simulation failure, 5 kinematics.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{load_scenario, ConfigError};
use crate::export::{
    joint_rows, write_events_csv, write_joint_csv, write_series_csv, write_summary_json,
    write_sweep_csv, ExportError, SeriesRow,
};
use crate::gait::{compile_joint_table, validate, CompileError};
use crate::kinematics::{fk_leg, solve_leg, CupTarget, ElbowBranch, JointAngles, LegIkError};
use crate::simulator::{run_scenario, sweep_climb_angle, ScenarioConfig, SimError};

pub const CONFIG_ENV: &str = "CLIMBSIM_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "climbsim", version, about = "Suction-cup wall climber toolkit")]
pub struct Cli {
    /// Scenario file (TOML). Defaults are used when absent.
    #[arg(long, short, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint angles (deg) for a cup target in the leg frame.
    Ik {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        /// Wall clearance, mm.
        z: f64,
        /// Approach angle theta3 + theta4, deg.
        #[arg(allow_negative_numbers = true)]
        k: f64,
        #[arg(default_value = "plus")]
        branch: ElbowBranch,
    },
    /// Cup pose in the leg frame for joint angles in degrees.
    Fk {
        #[arg(allow_negative_numbers = true)]
        theta1: f64,
        #[arg(allow_negative_numbers = true)]
        theta2: f64,
        #[arg(allow_negative_numbers = true)]
        theta3: f64,
        #[arg(allow_negative_numbers = true)]
        theta4: f64,
    },
    /// Compile one gait cycle into a joint table CSV.
    Gait {
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run one climb scenario.
    Simulate {
        /// Writes <prefix>.summary.json, <prefix>.series.csv and <prefix>.events.csv.
        #[arg(long, short, default_value = "climbsim")]
        out: PathBuf,
        /// Overrides the configured climb angle, deg.
        #[arg(long, value_parser = climb_angle)]
        angle: Option<f64>,
    },
    /// Run the scenario at several climb angles.
    Sweep {
        /// Climb angles, deg, each in [0, 90].
        #[arg(required = true, value_parser = climb_angle)]
        angles: Vec<f64>,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Load and check the configuration, then print it with defaults filled in.
    ValidateConfig,
}

fn climb_angle(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=90.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("climb angle must be in [0, 90], got {v}"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("gait validation failed:\n{}", .0.join("\n"))]
    Gait(Vec<String>),
    #[error("{0}")]
    Simulation(String),
    #[error(transparent)]
    Kinematics(#[from] LegIkError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. }
            | CliError::Export(_)
            | CliError::Config(ConfigError::Io { .. }) => 1,
            CliError::Config(_) | CliError::Gait(_) => 3,
            CliError::Simulation(_) => 4,
            CliError::Kinematics(_) => 5,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { key, reason } => ConfigError::Invalid { key, reason }.into(),
            SimError::InvalidGait(v) => CliError::Gait(v.iter().map(ToString::to_string).collect()),
            SimError::Gait(g) => CliError::Gait(vec![g.to_string()]),
            other => CliError::Simulation(other.to_string()),
        }
    }
}

/// Fixed six-decimal formatting without a `-0.000000`.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn pose_line(label: &str, t: &CupTarget) -> String {
    format!(
        "{label} x={} y={} z={} k={}",
        fixed6(t.x),
        fixed6(t.y),
        fixed6(t.z),
        fixed6(t.k.to_degrees())
    )
}

/// Executes one command, printing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_scenario(cli.config.as_deref())?;
    let robot = &config.robot;
    let stdout_err = |source| CliError::Io {
        path: "stdout".into(),
        source,
    };
    match cli.command {
        Command::Ik { x, y, z, k, branch } => {
            let target = CupTarget {
                x,
                y,
                z,
                k: k.to_radians(),
            };
            let angles = solve_leg(&robot.geometry, &robot.limits, &target, branch)?;
            let deg = angles.as_array().map(|a| fixed6(a.to_degrees()));
            writeln!(out, "{}", deg.join(" ")).map_err(stdout_err)?;
            let back = fk_leg(&robot.geometry, &angles);
            writeln!(out, "{}", pose_line("fk", &back)).map_err(stdout_err)?;
        }
        Command::Fk {
            theta1,
            theta2,
            theta3,
            theta4,
        } => {
            let angles = JointAngles {
                theta1: theta1.to_radians(),
                theta2: theta2.to_radians(),
                theta3: theta3.to_radians(),
                theta4: theta4.to_radians(),
            };
            let pose = fk_leg(&robot.geometry, &angles);
            writeln!(out, "{}", pose_line("pose", &pose)).map_err(stdout_err)?;
        }
        Command::Gait { out: path } => {
            let gait = &config.gait;
            let script = gait.script(robot).map_err(SimError::from)?;
            let report = validate(&script, robot, &gait.stance, gait.pose);
            if !report.is_valid() {
                return Err(SimError::InvalidGait(report.violations).into());
            }
            let table = compile_joint_table(
                &script,
                robot,
                &gait.stance,
                gait.pose,
                &gait.profile,
                gait.samples_per_step,
            )
            .map_err(|e| match e {
                CompileError::Kinematics { source, .. } => CliError::Kinematics(source),
                other => CliError::Gait(vec![other.to_string()]),
            })?;
            let mut w = output(path.as_deref())?;
            write_joint_csv(&mut w, &joint_rows(&table))?;
            w.flush().map_err(stdout_err)?;
        }
        Command::Simulate { out: prefix, angle } => {
            let config = ScenarioConfig {
                climb_angle_deg: angle.unwrap_or(config.climb_angle_deg),
                ..config
            };
            let report = run_scenario(&config)?;
            let summary = &report.summary;

            let mut w = create(&with_suffix(&prefix, ".summary.json"))?;
            write_summary_json(&mut w, summary)?;
            let series: Vec<SeriesRow> = report.series.iter().map(SeriesRow::from).collect();
            let mut w = create(&with_suffix(&prefix, ".series.csv"))?;
            write_series_csv(&mut w, &series)?;
            let mut w = create(&with_suffix(&prefix, ".events.csv"))?;
            write_events_csv(&mut w, &report.events)?;
            drop(w);

            writeln!(
                out,
                "angle={} speed={} power={} completed={}",
                summary.climb_angle_deg,
                fixed6(summary.average_speed_mm_s),
                fixed6(summary.average_power_w),
                summary.completed
            )
            .map_err(stdout_err)?;
            if let Some(failure) = &summary.failure {
                return Err(CliError::Simulation(failure.message.clone()));
            }
        }
        Command::Sweep { angles, out: path } => {
            let rows = sweep_climb_angle(&config, &angles)?;
            let mut w = output(path.as_deref())?;
            write_sweep_csv(&mut w, &rows)?;
            w.flush().map_err(stdout_err)?;
            if !rows.iter().any(|r| r.completed) {
                return Err(CliError::Simulation("no climb angle completed".into()));
            }
        }
        Command::ValidateConfig => {
            let file = match &cli.config {
                Some(p) => crate::config::ConfigFile::load(p)?,
                None => Default::default(),
            };
            write!(out, "{}", file.to_toml()).map_err(stdout_err)?;
        }
    }
    Ok(())
}
