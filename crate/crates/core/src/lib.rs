//! Simulation toolkit for a four-legged suction-cup wall climber.
//!
//! * [`kinematics`] closed-form inverse/forward kinematics for one 4-DOF leg
//! * [`gait`] three-attached climbing gait: generation, validation, joint tables
//! * [`pneumatics`] pump/valve/cup state machine and holding capacity
//! * [`simulator`] fixed-tick scenario runner and climb-angle sweeps
//! * [`config`], [`export`] and [`cli`] file formats and the command line

pub mod cli;
pub mod config;
pub mod export;
pub mod gait;
pub mod kinematics;
pub mod pneumatics;
pub mod simulator;
