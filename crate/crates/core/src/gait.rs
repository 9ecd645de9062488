//! Three-attached climbing gait.
//!
//! One leg at a time releases, swings one step length up the wall and
//! re-attaches while the other three hold. The body then advances on the
//! attached legs. Positions are kept in whole micrometres so that a cycle
//! closes exactly: after every leg has swung once, the body has moved by the
//! step length and the stance in the body frame is the one we started from.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    fk_leg, solve_leg, CupTarget, ElbowBranch, JointAngles, JointLimits, LegGeometry, LegIkError,
    ReasonCode,
};

/// Minimum number of cups on the wall at any instant.
pub const MIN_ATTACHED: usize = 3;

pub const LEG_COUNT: usize = 4;

/// Leg number, 1 to 4. Legs run counter-clockwise from front-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LegId(u8);

impl LegId {
    pub const ALL: [LegId; LEG_COUNT] = [LegId(1), LegId(2), LegId(3), LegId(4)];

    pub fn new(id: u8) -> Option<Self> {
        (1..=LEG_COUNT as u8).contains(&id).then_some(Self(id))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for LegId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        LegId::new(value).ok_or_else(|| format!("leg id {value} outside 1..=4"))
    }
}

impl From<LegId> for u8 {
    fn from(leg: LegId) -> u8 {
        leg.0
    }
}

impl fmt::Display for LegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Integer length in micrometres.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Micrometres(pub i64);

impl Micrometres {
    pub fn from_mm(mm: f64) -> Self {
        Self((mm * 1000.0).round() as i64)
    }

    pub fn to_mm(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl Add for Micrometres {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for Micrometres {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for Micrometres {
    type Output = Self;

    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl std::iter::Sum for Micrometres {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        Self(iter.map(|m| m.0).sum())
    }
}

/// A point on the wall plane in the body frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WallPoint {
    pub x: Micrometres,
    pub y: Micrometres,
}

impl WallPoint {
    pub fn from_mm(x: f64, y: f64) -> Self {
        Self {
            x: Micrometres::from_mm(x),
            y: Micrometres::from_mm(y),
        }
    }

    pub fn to_mm(self) -> (f64, f64) {
        (self.x.to_mm(), self.y.to_mm())
    }

    /// Shifted along the climb direction.
    pub fn raised(self, dy: Micrometres) -> Self {
        Self {
            x: self.x,
            y: self.y + dy,
        }
    }
}

/// Cup positions of all four legs in the body frame plus their attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootholdMap {
    pub points: [WallPoint; LEG_COUNT],
    pub attached: [bool; LEG_COUNT],
}

impl FootholdMap {
    pub fn new(points: [WallPoint; LEG_COUNT]) -> Self {
        Self {
            points,
            attached: [true; LEG_COUNT],
        }
    }

    /// Square stance with corners at `(+-half, +-half)`, leg 1 front-right.
    pub fn square(half_mm: f64) -> Self {
        Self::new([
            WallPoint::from_mm(half_mm, half_mm),
            WallPoint::from_mm(-half_mm, half_mm),
            WallPoint::from_mm(-half_mm, -half_mm),
            WallPoint::from_mm(half_mm, -half_mm),
        ])
    }

    pub fn point(&self, leg: LegId) -> WallPoint {
        self.points[leg.index()]
    }

    pub fn attached_count(&self) -> usize {
        self.attached.iter().filter(|a| **a).count()
    }
}

impl Default for FootholdMap {
    fn default() -> Self {
        Self::square(80.0)
    }
}

/// Where and how a leg is fixed to the body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegMount {
    /// Hip position in the body frame, mm.
    pub hip: (f64, f64),
    /// Direction of the leg frame's x axis in the body frame, rad.
    pub yaw: f64,
    pub branch: ElbowBranch,
}

/// Geometry, limits and mounting of all four legs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub geometry: LegGeometry,
    pub limits: JointLimits,
    pub mounts: [LegMount; LEG_COUNT],
}

impl Default for RobotModel {
    fn default() -> Self {
        let mount = |deg: f64| LegMount {
            hip: (0.0, 0.0),
            yaw: deg.to_radians(),
            branch: ElbowBranch::Plus,
        };
        Self {
            geometry: LegGeometry::default(),
            limits: JointLimits::default(),
            mounts: [mount(45.0), mount(135.0), mount(-135.0), mount(-45.0)],
        }
    }
}

impl RobotModel {
    /// Body-frame cup point to a target in the leg's own frame.
    pub fn leg_target(&self, leg: LegId, body: (f64, f64), z: f64, k: f64) -> CupTarget {
        let mount = &self.mounts[leg.index()];
        let (dx, dy) = (body.0 - mount.hip.0, body.1 - mount.hip.1);
        let (s, c) = mount.yaw.sin_cos();
        CupTarget {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            z,
            k,
        }
    }

    pub fn solve(
        &self,
        leg: LegId,
        body: (f64, f64),
        z: f64,
        k: f64,
    ) -> Result<JointAngles, LegIkError> {
        let target = self.leg_target(leg, body, z, k);
        solve_leg(
            &self.geometry,
            &self.limits,
            &target,
            self.mounts[leg.index()].branch,
        )
    }

    /// Forward kinematics back to the body frame: `(x, y, z, k)`.
    pub fn cup_pose(&self, leg: LegId, angles: &JointAngles) -> (f64, f64, f64, f64) {
        let local = fk_leg(&self.geometry, angles);
        let mount = &self.mounts[leg.index()];
        let (s, c) = mount.yaw.sin_cos();
        (
            c * local.x - s * local.y + mount.hip.0,
            s * local.x + c * local.y + mount.hip.1,
            local.z,
            local.k,
        )
    }
}

/// Clearance and approach angle held by attached cups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallPose {
    pub z: f64,
    pub k: f64,
}

impl Default for WallPose {
    fn default() -> Self {
        Self {
            z: 100.0,
            k: 60f64.to_radians(),
        }
    }
}

/// When the attached legs push the body up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvanceMode {
    /// A quarter of the step length after every swing.
    #[default]
    Continuous,
    /// The whole step length after the fourth swing.
    AfterCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swing {
    pub leg: LegId,
    pub foothold: WallPoint,
}

/// One step of a cycle. Generated steps carry exactly one swing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitStep {
    pub swings: Vec<Swing>,
    pub body_advance: Micrometres,
}

impl GaitStep {
    pub fn single(leg: LegId, foothold: WallPoint, body_advance: Micrometres) -> Self {
        Self {
            swings: vec![Swing { leg, foothold }],
            body_advance,
        }
    }

    pub fn is_swinging(&self, leg: LegId) -> bool {
        self.swings.iter().any(|s| s.leg == leg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitScript {
    pub steps: Vec<GaitStep>,
    pub step_length: Micrometres,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaitError {
    #[error("step length must be > 0, got {0} um")]
    NonPositiveStep(i64),
    #[error("BadOrder: {0:?} is not a permutation of 1..=4")]
    BadOrder(Vec<u8>),
    #[error("UnreachableFoothold: leg {leg} at step {step}: {source}")]
    UnreachableFoothold {
        leg: LegId,
        step: usize,
        source: LegIkError,
    },
    #[error("stance must start with all four cups attached")]
    DetachedStart,
}

/// Validates a swing order and turns it into leg ids.
pub fn parse_order(order: &[u8]) -> Result<[LegId; LEG_COUNT], GaitError> {
    let bad = || GaitError::BadOrder(order.to_vec());
    if order.len() != LEG_COUNT {
        return Err(bad());
    }
    let mut seen = [false; LEG_COUNT];
    let mut legs = [LegId(1); LEG_COUNT];
    for (slot, &id) in legs.iter_mut().zip(order) {
        let leg = LegId::new(id).ok_or_else(bad)?;
        if std::mem::replace(&mut seen[leg.index()], true) {
            return Err(bad());
        }
        *slot = leg;
    }
    Ok(legs)
}

/// Splits `total` into `parts` integer shares that sum back to `total`.
fn split_evenly(total: Micrometres, parts: usize) -> Vec<Micrometres> {
    let n = parts as i64;
    let (q, r) = (total.0.div_euclid(n), total.0.rem_euclid(n));
    (0..n).map(|i| Micrometres(q + i64::from(i < r))).collect()
}

/// Builds one climbing cycle: each leg in `order` swings `step_length` up the
/// wall, and the body advance per step follows `mode`.
pub fn generate_cycle(
    robot: &RobotModel,
    footholds: &FootholdMap,
    step_length: Micrometres,
    order: &[u8],
    mode: AdvanceMode,
    pose: WallPose,
) -> Result<GaitScript, GaitError> {
    if step_length.0 <= 0 {
        return Err(GaitError::NonPositiveStep(step_length.0));
    }
    let order = parse_order(order)?;
    if footholds.attached_count() != LEG_COUNT {
        return Err(GaitError::DetachedStart);
    }
    let advances = match mode {
        AdvanceMode::Continuous => split_evenly(step_length, LEG_COUNT),
        AdvanceMode::AfterCycle => {
            let mut a = vec![Micrometres(0); LEG_COUNT];
            a[LEG_COUNT - 1] = step_length;
            a
        }
    };

    let reach = |leg: LegId, step: usize, p: WallPoint| {
        robot
            .solve(leg, p.to_mm(), pose.z, pose.k)
            .map(|_| ())
            .map_err(|source| GaitError::UnreachableFoothold { leg, step, source })
    };
    for leg in LegId::ALL {
        reach(leg, 0, footholds.point(leg))?;
    }

    let mut points = footholds.points;
    let mut steps = Vec::with_capacity(LEG_COUNT);
    for (i, (&leg, &advance)) in order.iter().zip(&advances).enumerate() {
        let target = points[leg.index()].raised(step_length);
        reach(leg, i, target)?;
        points[leg.index()] = target;
        for p in points.iter_mut() {
            *p = p.raised(-advance);
        }
        for other in LegId::ALL {
            reach(other, i, points[other.index()])?;
        }
        steps.push(GaitStep::single(leg, target, advance));
    }
    Ok(GaitScript { steps, step_length })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    AttachedBelowMinimum {
        step: usize,
        attached: usize,
    },
    UnreachableFoothold {
        step: usize,
        leg: LegId,
        reason: ReasonCode,
    },
    NegativeAdvance {
        step: usize,
    },
    SwingCount {
        leg: LegId,
        count: usize,
    },
    AdvanceMismatch {
        expected: Micrometres,
        actual: Micrometres,
    },
    ClosureMismatch {
        leg: LegId,
        expected: WallPoint,
        actual: WallPoint,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AttachedBelowMinimum { step, attached } => {
                write!(f, "step {step}: attached={attached}")
            }
            Violation::UnreachableFoothold { step, leg, reason } => {
                write!(f, "step {step}: UnreachableFoothold leg {leg} ({reason})")
            }
            Violation::NegativeAdvance { step } => write!(f, "step {step}: negative body advance"),
            Violation::SwingCount { leg, count } => {
                write!(f, "leg {leg} swings {count} times per cycle")
            }
            Violation::AdvanceMismatch { expected, actual } => write!(
                f,
                "body advance {} um per cycle, expected {} um",
                actual.0, expected.0
            ),
            Violation::ClosureMismatch {
                leg,
                expected,
                actual,
            } => write!(
                f,
                "leg {leg} ends at ({}, {}) um, expected ({}, {}) um",
                actual.x.0, actual.y.0, expected.x.0, expected.y.0
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays a script symbolically and collects every rule it breaks.
pub fn validate(
    script: &GaitScript,
    robot: &RobotModel,
    footholds: &FootholdMap,
    pose: WallPose,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut points = footholds.points;
    let attached = footholds.attached;

    let check = |step: usize, leg: LegId, p: WallPoint, out: &mut Vec<Violation>| {
        if let Err(e) = robot.solve(leg, p.to_mm(), pose.z, pose.k) {
            out.push(Violation::UnreachableFoothold {
                step,
                leg,
                reason: e.code(),
            });
        }
    };

    let mut swing_counts = [0usize; LEG_COUNT];
    for (i, step) in script.steps.iter().enumerate() {
        let lifted = LegId::ALL
            .iter()
            .filter(|l| attached[l.index()] && step.is_swinging(**l))
            .count();
        let holding = footholds.attached_count() - lifted;
        if holding < MIN_ATTACHED {
            violations.push(Violation::AttachedBelowMinimum {
                step: i,
                attached: holding,
            });
        }
        if step.body_advance.0 < 0 {
            violations.push(Violation::NegativeAdvance { step: i });
        }
        for swing in &step.swings {
            swing_counts[swing.leg.index()] += 1;
            check(i, swing.leg, swing.foothold, &mut violations);
            points[swing.leg.index()] = swing.foothold;
        }
        for p in points.iter_mut() {
            *p = p.raised(-step.body_advance);
        }
        for leg in LegId::ALL {
            check(i, leg, points[leg.index()], &mut violations);
        }
    }

    for leg in LegId::ALL {
        let count = swing_counts[leg.index()];
        if count != 1 {
            violations.push(Violation::SwingCount { leg, count });
        }
    }
    let advanced: Micrometres = script.steps.iter().map(|s| s.body_advance).sum();
    if advanced != script.step_length {
        violations.push(Violation::AdvanceMismatch {
            expected: script.step_length,
            actual: advanced,
        });
    }
    for leg in LegId::ALL {
        let (expected, actual) = (footholds.point(leg), points[leg.index()]);
        if expected != actual {
            violations.push(Violation::ClosureMismatch {
                leg,
                expected,
                actual,
            });
        }
    }
    violations.dedup();
    ValidationReport { violations }
}

impl GaitScript {
    /// Replays `cycles` cycles in integer micrometres. Returns the commanded
    /// body displacement and the final body-frame stance.
    pub fn replay(&self, footholds: &FootholdMap, cycles: usize) -> (Micrometres, FootholdMap) {
        let mut map = *footholds;
        let mut travelled = Micrometres(0);
        for _ in 0..cycles {
            for step in &self.steps {
                for swing in &step.swings {
                    map.points[swing.leg.index()] = swing.foothold;
                }
                for p in map.points.iter_mut() {
                    *p = p.raised(-step.body_advance);
                }
                travelled = travelled + step.body_advance;
            }
        }
        (travelled, map)
    }
}

/// Swing shape and step timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingProfile {
    /// Peak cup lift off the wall during a swing, mm.
    pub lift: f64,
    pub swing_time: f64,
    pub advance_time: f64,
}

impl Default for SwingProfile {
    fn default() -> Self {
        Self {
            lift: 20.0,
            swing_time: 0.5,
            advance_time: 0.5,
        }
    }
}

impl SwingProfile {
    pub fn step_time(&self) -> f64 {
        self.swing_time + self.advance_time
    }

    /// Triangular lift: zero at both ends, `lift` halfway through.
    pub fn lift_at(&self, fraction: f64) -> f64 {
        self.lift * (1.0 - (2.0 * fraction - 1.0).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPhase {
    Swing,
    Advance,
}

/// Commanded body-frame cup pose `(x, y, z)` of `leg` at `fraction` (0..=1)
/// through `phase` of `step`, given the stance at the start of the step.
pub fn commanded_point(
    start: &[WallPoint; LEG_COUNT],
    step: &GaitStep,
    leg: LegId,
    phase: StepPhase,
    fraction: f64,
    pose: WallPose,
    profile: &SwingProfile,
) -> (f64, f64, f64) {
    let old = start[leg.index()].to_mm();
    let swing = step.swings.iter().find(|s| s.leg == leg);
    match (phase, swing) {
        (StepPhase::Swing, Some(s)) => {
            let new = s.foothold.to_mm();
            (
                old.0 + (new.0 - old.0) * fraction,
                old.1 + (new.1 - old.1) * fraction,
                pose.z - profile.lift_at(fraction),
            )
        }
        (StepPhase::Swing, None) => (old.0, old.1, pose.z),
        (StepPhase::Advance, _) => {
            let base = swing.map_or(old, |s| s.foothold.to_mm());
            (
                base.0,
                base.1 - step.body_advance.to_mm() * fraction,
                pose.z,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub t: f64,
    pub leg: LegId,
    pub angles: JointAngles,
    pub attached: bool,
    /// Body-frame `(x, y, z)` the angles were solved for.
    pub commanded: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub samples_per_step: usize,
    pub rows: Vec<JointRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("samples_per_step must be >= 2, got {0}")]
    TooFewSamples(usize),
    #[error("swing and advance times must be > 0")]
    BadTiming,
    #[error("script failed validation: {}", join(.0))]
    InvalidScript(Vec<Violation>),
    #[error("step {step} sample {sample} leg {leg}: {source}")]
    Kinematics {
        step: usize,
        sample: usize,
        leg: LegId,
        source: LegIkError,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Offline joint-angle table for one cycle, `samples_per_step` rows per leg
/// and step.
pub fn compile_joint_table(
    script: &GaitScript,
    robot: &RobotModel,
    footholds: &FootholdMap,
    pose: WallPose,
    profile: &SwingProfile,
    samples_per_step: usize,
) -> Result<JointTable, CompileError> {
    if samples_per_step < 2 {
        return Err(CompileError::TooFewSamples(samples_per_step));
    }
    if !(profile.swing_time > 0.0 && profile.advance_time > 0.0) {
        return Err(CompileError::BadTiming);
    }
    let report = validate(script, robot, footholds, pose);
    if !report.is_valid() {
        return Err(CompileError::InvalidScript(report.violations));
    }

    let step_time = profile.step_time();
    let mut rows = Vec::with_capacity(script.steps.len() * samples_per_step * LEG_COUNT);
    let mut points = footholds.points;
    for (i, step) in script.steps.iter().enumerate() {
        for s in 0..samples_per_step {
            let local = step_time * s as f64 / samples_per_step as f64;
            let (phase, fraction) = if local < profile.swing_time {
                (StepPhase::Swing, local / profile.swing_time)
            } else {
                (
                    StepPhase::Advance,
                    (local - profile.swing_time) / profile.advance_time,
                )
            };
            for leg in LegId::ALL {
                let p = commanded_point(&points, step, leg, phase, fraction, pose, profile);
                let angles = robot
                    .solve(leg, (p.0, p.1), p.2, pose.k)
                    .map_err(|source| CompileError::Kinematics {
                        step: i,
                        sample: s,
                        leg,
                        source,
                    })?;
                rows.push(JointRow {
                    t: i as f64 * step_time + local,
                    leg,
                    angles,
                    attached: !(phase == StepPhase::Swing && step.is_swinging(leg)),
                    commanded: p,
                });
            }
        }
        for swing in &step.swings {
            points[swing.leg.index()] = swing.foothold;
        }
        for p in points.iter_mut() {
            *p = p.raised(-step.body_advance);
        }
    }
    Ok(JointTable {
        samples_per_step,
        rows,
    })
}
