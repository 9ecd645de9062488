//! TOML scenario file.
//!
//! Every key is optional and falls back to the library default, so an empty
//! file is a complete scenario. Angles are in degrees, lengths in mm, times
//! in seconds and pressures in kPa (gauge). Unknown keys are rejected.
//!
//! ```toml
//! [geometry]
//! a1_mm = 100.0
//! a2_mm = 100.0
//! a3_mm = 100.0
//! a4_mm = 100.0
//!
//! [limits]
//! theta1_deg = [-90.0, 90.0]
//! theta2_deg = [0.0, 180.0]
//! theta3_deg = [-90.0, 90.0]
//! theta4_deg = [-90.0, 90.0]
//!
//! [legs]
//! yaw_deg = [45.0, 135.0, -135.0, -45.0]
//! hip_mm = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
//! branch = ["plus", "plus", "plus", "plus"]
//!
//! [gait]
//! stance_mm = [[80.0, 80.0], [-80.0, 80.0], [-80.0, -80.0], [80.0, -80.0]]
//! step_length_mm = 40.0
//! order = [1, 2, 3, 4]
//! advance = "continuous"        # or "after-cycle"
//! lift_mm = 20.0
//! swing_time_s = 0.5
//! advance_time_s = 0.5
//! wall_clearance_mm = 100.0
//! approach_deg = 60.0
//! samples_per_step = 10
//!
//! [adhesion]
//! cup_area_mm2 = 1963.0
//! vacuum_level_kpa = -50.0
//! attach_threshold_kpa = -30.0
//! dwell_time_s = 0.5
//! vent_time_s = 0.2
//! friction_coefficient = 0.5
//! leak_rate_kpa_s = 0.0
//! attach_timeout_s = 2.0
//!
//! [pneumatics]
//! pump_of_leg = ["a", "a", "b", "b"]
//!
//! [scenario]
//! climb_angle_deg = 0.0
//! mass_kg = 2.0
//! gravity_m_s2 = 9.81
//! cycles = 3
//! tick_s = 0.01
//! servo_base_power_w = 6.0
//! pump_power_w = 5.0
//! lift_efficiency = 0.25
//! slip_coefficient = 0.3
//! slip_max = 0.9
//! seed = 0
//!
//! [noise]
//! pressure_jitter_kpa = 0.0
//! leak_probability = 0.0
//! leak_rate_kpa_s = 0.0
//! ```
//!
//! Mass, power, pressure and slip values are calibration choices for a desk
//! scale robot, not measured figures.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{
    AdvanceMode, FootholdMap, LegMount, Micrometres, RobotModel, SwingProfile, WallPoint, WallPose,
    LEG_COUNT,
};
use crate::kinematics::{ElbowBranch, JointLimits, JointRange, LegGeometry};
use crate::pneumatics::{AdhesionModel, Pump};
use crate::simulator::{
    GaitSettings, NoiseConfig, PowerModel, ScenarioConfig, SimError, SlipModel,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { key, reason } => ConfigError::Invalid { key, reason },
            other => ConfigError::Invalid {
                key: "gait".into(),
                reason: other.to_string(),
            },
        }
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub a1_mm: f64,
    pub a2_mm: f64,
    pub a3_mm: f64,
    pub a4_mm: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = LegGeometry::default();
        Self {
            a1_mm: g.a1(),
            a2_mm: g.a2(),
            a3_mm: g.a3(),
            a4_mm: g.a4(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub theta1_deg: [f64; 2],
    pub theta2_deg: [f64; 2],
    pub theta3_deg: [f64; 2],
    pub theta4_deg: [f64; 2],
}

impl Default for LimitsSection {
    fn default() -> Self {
        let deg = |r: JointRange| [r.min.to_degrees(), r.max.to_degrees()];
        let l = JointLimits::default();
        Self {
            theta1_deg: deg(l.0[0]),
            theta2_deg: deg(l.0[1]),
            theta3_deg: deg(l.0[2]),
            theta4_deg: deg(l.0[3]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegsSection {
    pub yaw_deg: [f64; LEG_COUNT],
    pub hip_mm: [[f64; 2]; LEG_COUNT],
    pub branch: [ElbowBranch; LEG_COUNT],
}

impl Default for LegsSection {
    fn default() -> Self {
        let m = RobotModel::default().mounts;
        Self {
            yaw_deg: m.map(|m| m.yaw.to_degrees()),
            hip_mm: m.map(|m| [m.hip.0, m.hip.1]),
            branch: m.map(|m| m.branch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSection {
    pub stance_mm: [[f64; 2]; LEG_COUNT],
    pub step_length_mm: f64,
    pub order: Vec<u8>,
    pub advance: AdvanceMode,
    pub lift_mm: f64,
    pub swing_time_s: f64,
    pub advance_time_s: f64,
    pub wall_clearance_mm: f64,
    pub approach_deg: f64,
    pub samples_per_step: usize,
}

impl Default for GaitSection {
    fn default() -> Self {
        let g = GaitSettings::default();
        Self {
            stance_mm: g.stance.points.map(|p| {
                let (x, y) = p.to_mm();
                [x, y]
            }),
            step_length_mm: g.step_length.to_mm(),
            order: g.order,
            advance: g.mode,
            lift_mm: g.profile.lift,
            swing_time_s: g.profile.swing_time,
            advance_time_s: g.profile.advance_time,
            wall_clearance_mm: g.pose.z,
            approach_deg: g.pose.k.to_degrees(),
            samples_per_step: g.samples_per_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdhesionSection {
    pub cup_area_mm2: f64,
    pub vacuum_level_kpa: f64,
    pub attach_threshold_kpa: f64,
    pub dwell_time_s: f64,
    pub vent_time_s: f64,
    pub friction_coefficient: f64,
    pub leak_rate_kpa_s: f64,
    pub attach_timeout_s: f64,
}

impl Default for AdhesionSection {
    fn default() -> Self {
        let a = AdhesionModel::default();
        Self {
            cup_area_mm2: a.cup_area,
            vacuum_level_kpa: a.vacuum_level,
            attach_threshold_kpa: a.attach_threshold,
            dwell_time_s: a.dwell_time,
            vent_time_s: a.vent_time,
            friction_coefficient: a.friction_coefficient,
            leak_rate_kpa_s: a.leak_rate,
            attach_timeout_s: a.attach_timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PneumaticsSection {
    pub pump_of_leg: [Pump; LEG_COUNT],
}

impl Default for PneumaticsSection {
    fn default() -> Self {
        Self {
            pump_of_leg: ScenarioConfig::default().pump_assignment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub climb_angle_deg: f64,
    pub mass_kg: f64,
    pub gravity_m_s2: f64,
    pub cycles: usize,
    pub tick_s: f64,
    pub servo_base_power_w: f64,
    pub pump_power_w: f64,
    pub lift_efficiency: f64,
    pub slip_coefficient: f64,
    pub slip_max: f64,
    pub seed: u64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            climb_angle_deg: s.climb_angle_deg,
            mass_kg: s.robot_mass,
            gravity_m_s2: s.gravity,
            cycles: s.cycles,
            tick_s: s.tick,
            servo_base_power_w: s.power.servo_base_power,
            pump_power_w: s.power.pump_power,
            lift_efficiency: s.power.lift_efficiency,
            slip_coefficient: s.slip.coefficient,
            slip_max: s.slip.max,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub pressure_jitter_kpa: f64,
    pub leak_probability: f64,
    pub leak_rate_kpa_s: f64,
}

/// The file as written, before conversion to library types.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub geometry: GeometrySection,
    pub limits: LimitsSection,
    pub legs: LegsSection,
    pub gait: GaitSection,
    pub adhesion: AdhesionSection,
    pub pneumatics: PneumaticsSection,
    pub scenario: ScenarioSection,
    pub noise: NoiseSection,
}

impl std::str::FromStr for ConfigFile {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections always serialize")
    }

    /// Converts to a validated [`ScenarioConfig`].
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let g = &self.geometry;
        let geometry = LegGeometry::new(g.a1_mm, g.a2_mm, g.a3_mm, g.a4_mm)
            .map_err(|e| invalid(format!("geometry.{}_mm", e.name), e.to_string()))?;

        let l = &self.limits;
        let mut ranges = [JointRange::new(0.0, 0.0); 4];
        for (i, r) in [l.theta1_deg, l.theta2_deg, l.theta3_deg, l.theta4_deg]
            .into_iter()
            .enumerate()
        {
            let key = format!("limits.theta{}_deg", i + 1);
            if r.iter().any(|v| v.is_nan()) || r[0] > r[1] {
                return Err(invalid(key, format!("need min <= max, got {r:?}")));
            }
            ranges[i] = JointRange::new(r[0].to_radians(), r[1].to_radians());
        }

        let legs = &self.legs;
        let mut mounts = RobotModel::default().mounts;
        for (i, mount) in mounts.iter_mut().enumerate() {
            let (yaw, hip) = (legs.yaw_deg[i], legs.hip_mm[i]);
            if !yaw.is_finite() {
                return Err(invalid(
                    "legs.yaw_deg",
                    format!("leg {} yaw must be finite", i + 1),
                ));
            }
            if !hip.iter().all(|v| v.is_finite()) {
                return Err(invalid(
                    "legs.hip_mm",
                    format!("leg {} hip must be finite", i + 1),
                ));
            }
            *mount = LegMount {
                hip: (hip[0], hip[1]),
                yaw: yaw.to_radians(),
                branch: legs.branch[i],
            };
        }

        let gs = &self.gait;
        if !gs.stance_mm.iter().flatten().all(|v| v.is_finite()) {
            return Err(invalid("gait.stance_mm", "coordinates must be finite"));
        }
        if !gs.step_length_mm.is_finite() {
            return Err(invalid("gait.step_length_mm", "must be finite"));
        }
        let gait = GaitSettings {
            stance: FootholdMap::new(gs.stance_mm.map(|[x, y]| WallPoint::from_mm(x, y))),
            step_length: Micrometres::from_mm(gs.step_length_mm),
            order: gs.order.clone(),
            mode: gs.advance,
            pose: WallPose {
                z: gs.wall_clearance_mm,
                k: gs.approach_deg.to_radians(),
            },
            profile: SwingProfile {
                lift: gs.lift_mm,
                swing_time: gs.swing_time_s,
                advance_time: gs.advance_time_s,
            },
            samples_per_step: gs.samples_per_step,
        };

        let a = &self.adhesion;
        let s = &self.scenario;
        let n = &self.noise;
        let config = ScenarioConfig {
            climb_angle_deg: s.climb_angle_deg,
            robot_mass: s.mass_kg,
            gravity: s.gravity_m_s2,
            cycles: s.cycles,
            tick: s.tick_s,
            robot: RobotModel {
                geometry,
                limits: JointLimits(ranges),
                mounts,
            },
            gait,
            adhesion: AdhesionModel {
                cup_area: a.cup_area_mm2,
                vacuum_level: a.vacuum_level_kpa,
                attach_threshold: a.attach_threshold_kpa,
                dwell_time: a.dwell_time_s,
                vent_time: a.vent_time_s,
                friction_coefficient: a.friction_coefficient,
                leak_rate: a.leak_rate_kpa_s,
                attach_timeout: a.attach_timeout_s,
            },
            pump_assignment: self.pneumatics.pump_of_leg,
            power: PowerModel {
                servo_base_power: s.servo_base_power_w,
                pump_power: s.pump_power_w,
                lift_efficiency: s.lift_efficiency,
            },
            slip: SlipModel {
                coefficient: s.slip_coefficient,
                max: s.slip_max,
            },
            noise: NoiseConfig {
                pressure_jitter: n.pressure_jitter_kpa,
                leak_probability: n.leak_probability,
                leak_rate: n.leak_rate_kpa_s,
            },
            seed: s.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads and validates a scenario file; `None` gives the defaults.
pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    match path {
        Some(p) => ConfigFile::load(p)?.scenario(),
        None => ConfigFile::default().scenario(),
    }
}
