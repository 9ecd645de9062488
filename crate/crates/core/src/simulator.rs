//! Fixed-tick runner for the inclined test platform.
//!
//! Each gait step runs four phases: vent the swing leg, swing it, pull vacuum
//! until it attaches, then push the body up on all four cups. Every tick
//! records joint angles, cup state and electrical power. The platform
//! incline sets the tangential load `m g sin(angle)`. That load costs lift
//! power and makes the cups creep back during the push (slip).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{
    commanded_point, generate_cycle, validate, AdvanceMode, FootholdMap, GaitError, GaitScript,
    GaitStep, LegId, Micrometres, RobotModel, StepPhase, SwingProfile, Violation, WallPoint,
    WallPose, LEG_COUNT, MIN_ATTACHED,
};
use crate::kinematics::{JointAngles, LegIkError};
use crate::pneumatics::{AdhesionModel, EventKind, PneumaticEvent, PneumaticState, Pump, Valve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSettings {
    pub stance: FootholdMap,
    pub step_length: Micrometres,
    pub order: Vec<u8>,
    pub mode: AdvanceMode,
    pub pose: WallPose,
    pub profile: SwingProfile,
    pub samples_per_step: usize,
}

impl Default for GaitSettings {
    fn default() -> Self {
        Self {
            stance: FootholdMap::default(),
            step_length: Micrometres::from_mm(40.0),
            order: vec![1, 2, 3, 4],
            mode: AdvanceMode::Continuous,
            pose: WallPose::default(),
            profile: SwingProfile::default(),
            samples_per_step: 10,
        }
    }
}

impl GaitSettings {
    pub fn script(&self, robot: &RobotModel) -> Result<GaitScript, GaitError> {
        generate_cycle(
            robot,
            &self.stance,
            self.step_length,
            &self.order,
            self.mode,
            self.pose,
        )
    }
}

/// `slip = clamp(coefficient * load / capacity, 0, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipModel {
    pub coefficient: f64,
    pub max: f64,
}

impl Default for SlipModel {
    fn default() -> Self {
        Self {
            coefficient: 0.3,
            max: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// W, drawn at all times.
    pub servo_base_power: f64,
    /// W per running pump.
    pub pump_power: f64,
    /// Fraction of electrical power that ends up lifting the body.
    pub lift_efficiency: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            servo_base_power: 6.0,
            pump_power: 5.0,
            lift_efficiency: 0.25,
        }
    }
}

/// Optional disturbances, all off by default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Uniform per-tick cup pressure jitter amplitude, kPa.
    pub pressure_jitter: f64,
    /// Chance that an attach happens on a leaky patch of wall.
    pub leak_probability: f64,
    /// Leak added for such an attach, kPa/s.
    pub leak_rate: f64,
}

impl NoiseConfig {
    pub fn is_off(&self) -> bool {
        self.pressure_jitter == 0.0 && self.leak_probability == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub climb_angle_deg: f64,
    /// kg
    pub robot_mass: f64,
    /// m/s^2
    pub gravity: f64,
    pub cycles: usize,
    /// s
    pub tick: f64,
    pub robot: RobotModel,
    pub gait: GaitSettings,
    pub adhesion: AdhesionModel,
    pub pump_assignment: [Pump; LEG_COUNT],
    pub power: PowerModel,
    pub slip: SlipModel,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            climb_angle_deg: 0.0,
            robot_mass: 2.0,
            gravity: 9.81,
            cycles: 3,
            tick: 0.01,
            robot: RobotModel::default(),
            gait: GaitSettings::default(),
            adhesion: AdhesionModel::default(),
            pump_assignment: [Pump::A, Pump::A, Pump::B, Pump::B],
            power: PowerModel::default(),
            slip: SlipModel::default(),
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{key}: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error(transparent)]
    Gait(#[from] GaitError),
    #[error("gait script failed validation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidGait(Vec<Violation>),
    #[error("tick {tick} leg {leg}: {source}")]
    Kinematics {
        tick: u64,
        leg: LegId,
        source: LegIkError,
    },
    #[error("ZeroCapacity: tangential load {load} N with no holding capacity")]
    ZeroCapacity { load: f64 },
    #[error("no climb angles given")]
    EmptySweep,
    #[error("climb angle {0} deg outside [0, 90]")]
    AngleOutOfRange(f64),
}

fn invalid(key: &str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn check_angle(angle: f64) -> Result<(), SimError> {
    if (0.0..=90.0).contains(&angle) {
        Ok(())
    } else {
        Err(SimError::AngleOutOfRange(angle))
    }
}

impl ScenarioConfig {
    /// Checks every field against its invariant. Keys are named as in the
    /// config file.
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be > 0, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be >= 0, got {v}")))
            }
        };
        if !(0.0..=90.0).contains(&self.climb_angle_deg) {
            return Err(invalid(
                "scenario.climb_angle_deg",
                format!("must be in [0, 90], got {}", self.climb_angle_deg),
            ));
        }
        positive("scenario.mass_kg", self.robot_mass)?;
        positive("scenario.gravity_m_s2", self.gravity)?;
        positive("scenario.tick_s", self.tick)?;
        if self.cycles == 0 {
            return Err(invalid("scenario.cycles", "must be >= 1"));
        }
        non_negative("scenario.servo_base_power_w", self.power.servo_base_power)?;
        non_negative("scenario.pump_power_w", self.power.pump_power)?;
        if !(self.power.lift_efficiency > 0.0 && self.power.lift_efficiency <= 1.0) {
            return Err(invalid("scenario.lift_efficiency", "must be in (0, 1]"));
        }
        non_negative("scenario.slip_coefficient", self.slip.coefficient)?;
        if !(self.slip.max >= 0.0 && self.slip.max < 1.0) {
            return Err(invalid("scenario.slip_max", "must be in [0, 1)"));
        }
        non_negative("noise.pressure_jitter_kpa", self.noise.pressure_jitter)?;
        non_negative("noise.leak_rate_kpa_s", self.noise.leak_rate)?;
        if !(0.0..=1.0).contains(&self.noise.leak_probability) {
            return Err(invalid("noise.leak_probability", "must be in [0, 1]"));
        }
        self.adhesion
            .validate()
            .map_err(|e| invalid(&format!("adhesion.{}", e.field), e.reason))?;

        let gait = &self.gait;
        if gait.step_length.0 <= 0 {
            return Err(invalid(
                "gait.step_length_mm",
                format!("must be > 0, got {}", gait.step_length.to_mm()),
            ));
        }
        crate::gait::parse_order(&gait.order).map_err(|_| {
            invalid(
                "gait.order",
                format!("{:?} is not a permutation of 1..=4", gait.order),
            )
        })?;
        non_negative("gait.lift_mm", gait.profile.lift)?;
        positive("gait.swing_time_s", gait.profile.swing_time)?;
        positive("gait.advance_time_s", gait.profile.advance_time)?;
        non_negative("gait.wall_clearance_mm", gait.pose.z)?;
        if !gait.pose.k.is_finite() {
            return Err(invalid("gait.approach_deg", "must be finite"));
        }
        if gait.pose.z - gait.profile.lift < 0.0 {
            return Err(invalid(
                "gait.lift_mm",
                "must not exceed gait.wall_clearance_mm",
            ));
        }
        if gait.samples_per_step < 2 {
            return Err(invalid("gait.samples_per_step", "must be >= 2"));
        }
        if gait.stance.attached_count() != LEG_COUNT {
            return Err(invalid(
                "gait.stance_mm",
                "all four cups must start attached",
            ));
        }
        Ok(())
    }

    /// Tangential load along the platform, N.
    pub fn tangential_load(&self) -> f64 {
        self.robot_mass * self.gravity * self.climb_angle_deg.to_radians().sin()
    }
}

/// Fraction of a commanded body advance lost to cup creep.
pub fn slip_model(load: f64, capacity: f64, slip: &SlipModel) -> Result<f64, SimError> {
    if capacity <= 0.0 {
        return if load > 0.0 {
            Err(SimError::ZeroCapacity { load })
        } else {
            Ok(0.0)
        };
    }
    Ok((slip.coefficient * load / capacity).clamp(0.0, slip.max))
}

/// Electrical power at body speed `speed` (mm/s) with `active_pumps` running.
pub fn power_model(config: &ScenarioConfig, speed: f64, active_pumps: usize) -> f64 {
    let p = &config.power;
    let lift = config.tangential_load() * speed / 1000.0 / p.lift_efficiency;
    p.servo_base_power + active_pumps as f64 * p.pump_power + lift
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    AdhesionFailure,
    AttachTimeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub tick: u64,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// End of the tick, s.
    pub t: f64,
    /// World position of the body along the climb direction, mm.
    pub body_y: f64,
    pub angles: [JointAngles; LEG_COUNT],
    pub valves: [Valve; LEG_COUNT],
    pub pressures: [f64; LEG_COUNT],
    pub attached: [bool; LEG_COUNT],
    pub power: f64,
    pub slip_fraction: f64,
}

impl TickRecord {
    pub fn attached_count(&self) -> usize {
        self.attached.iter().filter(|a| **a).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub climb_angle_deg: f64,
    pub cycles: usize,
    pub ticks: u64,
    pub duration_s: f64,
    pub displacement_mm: f64,
    pub commanded_displacement_um: i64,
    pub average_speed_mm_s: f64,
    pub average_power_w: f64,
    pub energy_j: f64,
    pub slip_count: usize,
    pub min_attached: usize,
    pub completed: bool,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub summary: Summary,
    pub series: Vec<TickRecord>,
    pub events: Vec<PneumaticEvent>,
}

fn phase_ticks(duration: f64, tick: f64) -> u64 {
    ((duration / tick).round() as u64).max(1)
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    load: f64,
    pneu: PneumaticState,
    rng: Option<ChaCha8Rng>,
    tick: u64,
    body_y: f64,
    commanded: Micrometres,
    energy: f64,
    slip_count: usize,
    min_attached: usize,
    retry_left: bool,
    series: Vec<TickRecord>,
    events: Vec<PneumaticEvent>,
}

/// What the legs are doing during one tick.
struct Motion<'s> {
    points: &'s [WallPoint; LEG_COUNT],
    step: &'s GaitStep,
    phase: StepPhase,
    fraction: f64,
}

enum Outcome {
    Failed(Failure),
    Error(SimError),
}

impl From<SimError> for Outcome {
    fn from(e: SimError) -> Self {
        Outcome::Error(e)
    }
}

impl<'a> Run<'a> {
    fn now(&self) -> f64 {
        self.tick as f64 * self.cfg.tick
    }

    fn log(&mut self, leg: LegId, kind: EventKind, t: f64) {
        let cup = self.pneu.cup(leg);
        self.events.push(PneumaticEvent {
            t,
            leg,
            kind,
            valve: cup.valve,
            pressure: cup.pressure,
            attached: cup.attached,
        });
    }

    fn jitter(&mut self) {
        let amp = self.cfg.noise.pressure_jitter;
        if let (Some(rng), true) = (self.rng.as_mut(), amp > 0.0) {
            for leg in LegId::ALL {
                if self.pneu.cup(leg).valve == Valve::Suction {
                    let dp = rng.gen_range(-amp..=amp);
                    self.pneu.perturb(leg, dp);
                }
            }
        }
    }

    /// Advances one tick with the body moving `advance_mm` (commanded). With
    /// `check_hold` the tick fails when the load exceeds holding capacity.
    fn step_tick(
        &mut self,
        motion: &Motion<'_>,
        advance_mm: f64,
        check_hold: bool,
    ) -> Result<(), Outcome> {
        let cfg = self.cfg;
        let end = (self.tick + 1) as f64 * cfg.tick;
        for leg in self.pneu.advance(cfg.tick, &cfg.adhesion) {
            self.log(leg, EventKind::Attached, end);
        }
        self.jitter();

        let capacity = self.pneu.holding_capacity(&cfg.adhesion).tangential;
        let slip = if advance_mm > 0.0 {
            slip_model(self.load, capacity, &cfg.slip)?
        } else {
            0.0
        };
        let moved = advance_mm * (1.0 - slip);
        self.body_y += moved;
        let power = power_model(cfg, moved / cfg.tick, self.pneu.active_pumps());
        self.energy += power * cfg.tick;

        let mut angles = [JointAngles::default(); LEG_COUNT];
        for leg in LegId::ALL {
            let (x, y, z) = commanded_point(
                motion.points,
                motion.step,
                leg,
                motion.phase,
                motion.fraction,
                cfg.gait.pose,
                &cfg.gait.profile,
            );
            angles[leg.index()] =
                cfg.robot
                    .solve(leg, (x, y), z, cfg.gait.pose.k)
                    .map_err(|source| SimError::Kinematics {
                        tick: self.tick,
                        leg,
                        source,
                    })?;
        }

        let cups = self.pneu.cups;
        let record = TickRecord {
            tick: self.tick,
            t: end,
            body_y: self.body_y,
            angles,
            valves: cups.map(|c| c.valve),
            pressures: cups.map(|c| c.pressure),
            attached: cups.map(|c| c.attached),
            power,
            slip_fraction: slip,
        };
        self.min_attached = self.min_attached.min(record.attached_count());
        self.series.push(record);
        let tick = self.tick;
        self.tick += 1;

        if check_hold && self.load > capacity {
            return Err(Outcome::Failed(Failure {
                tick,
                kind: FailureKind::AdhesionFailure,
                message: format!(
                    "AdhesionFailure at tick {tick}: tangential load {:.3} N exceeds holding capacity {:.3} N with {} cups attached",
                    self.load,
                    capacity,
                    self.pneu.attached_count()
                ),
            }));
        }
        Ok(())
    }

    /// The single re-attach attempt after an adhesion failure: every cup in
    /// `on_wall` goes back to suction, the robot holds still for one dwell
    /// time, and the load is checked again.
    fn recover(
        &mut self,
        motion: &Motion<'_>,
        on_wall: &[LegId],
        failure: Failure,
    ) -> Result<(), Outcome> {
        if !std::mem::replace(&mut self.retry_left, false) {
            return Err(Outcome::Failed(failure));
        }
        for &leg in on_wall {
            if self.pneu.cup(leg).valve == Valve::Vent {
                self.pneu.open_suction(leg);
                self.log(leg, EventKind::ValveSuction, self.now());
            }
        }
        let cfg = self.cfg;
        for _ in 0..phase_ticks(cfg.adhesion.dwell_time, cfg.tick) {
            self.step_tick(motion, 0.0, false)?;
        }
        let capacity = self.pneu.holding_capacity(&cfg.adhesion).tangential;
        if self.load > capacity {
            let tick = self.tick - 1;
            return Err(Outcome::Failed(Failure {
                tick,
                kind: FailureKind::AdhesionFailure,
                message: format!(
                    "AdhesionFailure at tick {tick} after re-attach: tangential load {:.3} N exceeds holding capacity {:.3} N",
                    self.load, capacity
                ),
            }));
        }
        Ok(())
    }

    /// Runs `count` ticks of one phase. `motion_at` maps the phase fraction
    /// reached at the end of a tick to what the legs do. With `on_wall` set, an
    /// adhesion failure triggers [`Run::recover`] and the phase carries on;
    /// without it the failure is returned. Returns the largest slip seen.
    fn phase(
        &mut self,
        count: u64,
        motion_at: impl Fn(f64) -> (StepPhase, f64),
        base: (&[WallPoint; LEG_COUNT], &GaitStep),
        advance_per_tick: f64,
        on_wall: Option<&[LegId]>,
    ) -> Result<f64, Outcome> {
        let mut slip = 0.0f64;
        for i in 0..count {
            let (phase, fraction) = motion_at((i + 1) as f64 / count as f64);
            let motion = Motion {
                points: base.0,
                step: base.1,
                phase,
                fraction,
            };
            match (self.step_tick(&motion, advance_per_tick, true), on_wall) {
                (Ok(()), _) => {}
                (Err(Outcome::Failed(f)), Some(legs)) => self.recover(&motion, legs, f)?,
                (Err(e), _) => return Err(e),
            }
            slip = slip.max(self.series.last().map_or(0.0, |r| r.slip_fraction));
        }
        Ok(slip)
    }

    fn run_step(
        &mut self,
        points: &[WallPoint; LEG_COUNT],
        step: &GaitStep,
    ) -> Result<(), Outcome> {
        let cfg = self.cfg;
        let lifted: Vec<LegId> = step.swings.iter().map(|s| s.leg).collect();
        let on_wall: Vec<LegId> = LegId::ALL
            .into_iter()
            .filter(|l| !lifted.contains(l))
            .collect();
        let base = (points, step);
        let standing = |_| (StepPhase::Swing, 0.0);

        // release; a failed release re-attaches the swing leg and tries again
        loop {
            for &leg in &lifted {
                self.pneu.vent(leg);
                self.log(leg, EventKind::ValveVent, self.now());
            }
            let vent_ticks = phase_ticks(cfg.adhesion.vent_time, cfg.tick);
            match self.phase(vent_ticks, standing, base, 0.0, None) {
                Ok(_) => break,
                Err(Outcome::Failed(f)) => {
                    let motion = Motion {
                        points,
                        step,
                        phase: StepPhase::Swing,
                        fraction: 0.0,
                    };
                    self.recover(&motion, &LegId::ALL, f)?;
                }
                Err(e) => return Err(e),
            }
        }
        for &leg in &lifted {
            self.log(leg, EventKind::Vented, self.now());
        }

        let swing_ticks = phase_ticks(cfg.gait.profile.swing_time, cfg.tick);
        self.phase(
            swing_ticks,
            |f| (StepPhase::Swing, f),
            base,
            0.0,
            Some(&on_wall),
        )?;

        let hold = Motion {
            points,
            step,
            phase: StepPhase::Advance,
            fraction: 0.0,
        };
        self.attach(&lifted, &hold)?;

        let advance_ticks = phase_ticks(cfg.gait.profile.advance_time, cfg.tick);
        let per_tick = step.body_advance.to_mm() / advance_ticks as f64;
        let slip = self.phase(
            advance_ticks,
            |f| (StepPhase::Advance, f),
            base,
            per_tick,
            Some(&LegId::ALL),
        )?;
        if slip > 0.0 {
            self.slip_count += 1;
        }
        self.commanded = self.commanded + step.body_advance;
        Ok(())
    }

    /// Pulls vacuum on `legs` until all attach. A timeout vents and tries once
    /// more before giving up.
    fn attach(&mut self, legs: &[LegId], hold: &Motion<'_>) -> Result<(), Outcome> {
        let cfg = self.cfg;
        let dwell = phase_ticks(cfg.adhesion.dwell_time, cfg.tick);
        let timeout = phase_ticks(cfg.adhesion.attach_timeout, cfg.tick);
        let tick_holding = |run: &mut Self| match run.step_tick(hold, 0.0, true) {
            Err(Outcome::Failed(f)) => run.recover(hold, &[], f),
            other => other,
        };
        for attempt in 0..2 {
            for &leg in legs {
                let leaky = self
                    .rng
                    .as_mut()
                    .is_some_and(|rng| rng.gen_bool(cfg.noise.leak_probability));
                let leak = if leaky { cfg.noise.leak_rate } else { 0.0 };
                self.pneu.injected_leak[leg.index()] = leak;
                self.pneu.open_suction(leg);
                self.log(leg, EventKind::ValveSuction, self.now());
            }
            let mut elapsed = 0;
            while elapsed < timeout
                && (elapsed < dwell || legs.iter().any(|l| !self.pneu.cup(*l).attached))
            {
                tick_holding(self)?;
                elapsed += 1;
            }
            let stuck: Vec<LegId> = legs
                .iter()
                .copied()
                .filter(|l| !self.pneu.cup(*l).attached)
                .collect();
            let Some(&leg) = stuck.first() else {
                return Ok(());
            };
            if attempt == 1 {
                let tick = self.tick - 1;
                return Err(Outcome::Failed(Failure {
                    tick,
                    kind: FailureKind::AttachTimeout,
                    message: format!(
                        "AttachTimeout at tick {tick}: leg {leg} stuck at {:.3} kPa",
                        self.pneu.cup(leg).pressure
                    ),
                }));
            }
            for &leg in &stuck {
                self.pneu.vent(leg);
                self.log(leg, EventKind::ValveVent, self.now());
            }
            for _ in 0..phase_ticks(cfg.adhesion.vent_time, cfg.tick) {
                tick_holding(self)?;
            }
        }
        unreachable!("attach loop returns on its second attempt")
    }

    fn finish(self, failure: Option<Failure>) -> SimReport {
        let duration = self.tick as f64 * self.cfg.tick;
        let (speed, power) = if duration > 0.0 {
            (self.body_y / duration, self.energy / duration)
        } else {
            (0.0, 0.0)
        };
        SimReport {
            summary: Summary {
                climb_angle_deg: self.cfg.climb_angle_deg,
                cycles: self.cfg.cycles,
                ticks: self.tick,
                duration_s: duration,
                displacement_mm: self.body_y,
                commanded_displacement_um: self.commanded.0,
                average_speed_mm_s: speed,
                average_power_w: power,
                energy_j: self.energy,
                slip_count: self.slip_count,
                min_attached: self.min_attached,
                completed: failure.is_none(),
                failure,
            },
            series: self.series,
            events: self.events,
        }
    }
}

/// Runs one scenario. Runtime adhesion or attach failures end the run early
/// with `completed = false`; configuration and planning problems are errors.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimReport, SimError> {
    config.validate()?;
    let script = config.gait.script(&config.robot)?;
    let report = validate(
        &script,
        &config.robot,
        &config.gait.stance,
        config.gait.pose,
    );
    if !report.is_valid() {
        return Err(SimError::InvalidGait(report.violations));
    }

    let mut run = Run {
        cfg: config,
        load: config.tangential_load(),
        pneu: PneumaticState::all_attached(config.pump_assignment, &config.adhesion),
        rng: (!config.noise.is_off()).then(|| ChaCha8Rng::seed_from_u64(config.seed)),
        tick: 0,
        body_y: 0.0,
        commanded: Micrometres(0),
        energy: 0.0,
        slip_count: 0,
        min_attached: LEG_COUNT,
        retry_left: true,
        series: Vec::new(),
        events: Vec::new(),
    };

    for _ in 0..config.cycles {
        let mut points = config.gait.stance.points;
        for step in &script.steps {
            match run.run_step(&points, step) {
                Ok(()) => {}
                Err(Outcome::Failed(f)) => return Ok(run.finish(Some(f))),
                Err(Outcome::Error(e)) => return Err(e),
            }
            for swing in &step.swings {
                points[swing.leg.index()] = swing.foothold;
            }
            for p in points.iter_mut() {
                *p = p.raised(-step.body_advance);
            }
        }
    }
    debug_assert!(run.min_attached >= MIN_ATTACHED);
    Ok(run.finish(None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub angle_deg: f64,
    pub average_speed_mm_s: f64,
    pub average_power_w: f64,
    pub completed: bool,
}

/// Runs the base scenario at every angle. Angles run in parallel; rows come
/// back sorted by angle. A failed angle is flagged, not fatal.
pub fn sweep_climb_angle(base: &ScenarioConfig, angles: &[f64]) -> Result<Vec<SweepRow>, SimError> {
    if angles.is_empty() {
        return Err(SimError::EmptySweep);
    }
    for &a in angles {
        check_angle(a)?;
    }
    let mut rows: Vec<SweepRow> = angles
        .par_iter()
        .map(|&angle| {
            let config = ScenarioConfig {
                climb_angle_deg: angle,
                ..base.clone()
            };
            match run_scenario(&config) {
                Ok(report) => SweepRow {
                    angle_deg: angle,
                    average_speed_mm_s: report.summary.average_speed_mm_s,
                    average_power_w: report.summary.average_power_w,
                    completed: report.summary.completed,
                },
                Err(_) => SweepRow {
                    angle_deg: angle,
                    average_speed_mm_s: f64::NAN,
                    average_power_w: f64::NAN,
                    completed: false,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.angle_deg.total_cmp(&b.angle_deg));
    Ok(rows)
}
