//! Closed-form leg kinematics.
//!
//! Each leg has four revolute joints split across two planes. Joints M1/M2
//! place the suction cup in the plane parallel to the wall (xy), joints M3/M4
//! hold the body-to-wall clearance `z` and the cup approach angle `k` in the
//! plane normal to the wall (zy). The two solvers never share inputs, so a
//! change of clearance cannot move the cup along the wall and vice versa.
//!
//! Lengths are millimetres and angles radians throughout. `+y` is the climb
//! direction.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on `|D| <= 1` and on the `asin` argument before a target is
/// declared unreachable. Values inside the slack are clamped.
pub const REACH_SLACK: f64 = 1e-12;

/// Rounding slack applied when comparing a solved angle against its limits.
pub const LIMIT_SLACK: f64 = 1e-12;

/// Link lengths of one leg. `a1`, `a2` act in the wall plane, `a3`, `a4`
/// normal to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegGeometry {
    a1: f64,
    a2: f64,
    a3: f64,
    a4: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("link length {name} must be finite and > 0, got {value}")]
pub struct GeometryError {
    pub name: &'static str,
    pub value: f64,
}

impl LegGeometry {
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<Self, GeometryError> {
        for (name, value) in [("a1", a1), ("a2", a2), ("a3", a3), ("a4", a4)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError { name, value });
            }
        }
        Ok(Self { a1, a2, a3, a4 })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn a3(&self) -> f64 {
        self.a3
    }

    pub fn a4(&self) -> f64 {
        self.a4
    }

    /// Inner and outer radius of the annulus the xy pair can reach.
    pub fn planar_annulus(&self) -> (f64, f64) {
        ((self.a1 - self.a2).abs(), self.a1 + self.a2)
    }
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            a1: 100.0,
            a2: 100.0,
            a3: 100.0,
            a4: 100.0,
        }
    }
}

/// The four joint values of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.theta3, self.theta4]
    }
}

/// Closed interval of admissible joint values, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
}

impl JointRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.min - LIMIT_SLACK && angle <= self.max + LIMIT_SLACK
    }
}

/// Per-joint limits, indexed by joint number minus one.
///
/// The default keeps M1, M3 and M4 inside `[-pi/2, pi/2]`. The elbow M2 gets
/// `[0, pi]`: same 180 degree servo travel, mounted so that the elbow can
/// fold past a right angle. With a symmetric elbow range no cup closer to the
/// hip than `sqrt(a1^2 + a2^2)` could be reached at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits(pub [JointRange; 4]);

impl JointLimits {
    pub fn unbounded() -> Self {
        Self([JointRange::new(f64::NEG_INFINITY, f64::INFINITY); 4])
    }

    pub fn range(&self, joint: usize) -> JointRange {
        self.0[joint - 1]
    }

    fn check(&self, joint: usize, angle: f64) -> Result<(), IkError> {
        let range = self.range(joint);
        if range.contains(angle) {
            Ok(())
        } else {
            Err(IkError::JointLimit {
                joint,
                angle,
                min: range.min,
                max: range.max,
            })
        }
    }
}

impl Default for JointLimits {
    fn default() -> Self {
        let servo = JointRange::new(-FRAC_PI_2, FRAC_PI_2);
        Self([servo, JointRange::new(0.0, PI), servo, servo])
    }
}

/// Sign choice for `sin(theta2) = +-sqrt(1 - D^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElbowBranch {
    #[default]
    Plus,
    Minus,
}

impl ElbowBranch {
    pub fn sign(self) -> f64 {
        match self {
            ElbowBranch::Plus => 1.0,
            ElbowBranch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ElbowBranch::Plus => ElbowBranch::Minus,
            ElbowBranch::Minus => ElbowBranch::Plus,
        }
    }
}

impl std::str::FromStr for ElbowBranch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(ElbowBranch::Plus),
            "minus" | "-" => Ok(ElbowBranch::Minus),
            other => Err(format!(
                "unknown elbow branch `{other}` (expected plus or minus)"
            )),
        }
    }
}

impl fmt::Display for ElbowBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElbowBranch::Plus => "plus",
            ElbowBranch::Minus => "minus",
        })
    }
}

/// Desired cup pose for one leg, expressed in the leg's own frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CupTarget {
    pub x: f64,
    pub y: f64,
    /// Wall clearance, measured from the body towards the wall.
    pub z: f64,
    /// Cup approach angle, `theta3 + theta4`.
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TargetError {
    #[error("target coordinates must be finite")]
    NonFinite,
    #[error("wall clearance z must be >= 0, got {0}")]
    NegativeClearance(f64),
}

impl CupTarget {
    pub fn new(x: f64, y: f64, z: f64, k: f64) -> Result<Self, TargetError> {
        if ![x, y, z, k].iter().all(|v| v.is_finite()) {
            return Err(TargetError::NonFinite);
        }
        if z < 0.0 {
            return Err(TargetError::NegativeClearance(z));
        }
        Ok(Self { x, y, z, k })
    }
}

/// Machine-readable failure reason, shared by the solvers and [`reachable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReasonCode {
    OutOfReach,
    DegenerateTarget,
    ZUnreachable,
    JointLimit,
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IkError {
    #[error("OutOfReach: radius {radius} mm outside [{min}, {max}]")]
    OutOfReach { radius: f64, min: f64, max: f64 },
    #[error("DegenerateTarget: cup target at the hip origin")]
    DegenerateTarget,
    #[error("ZUnreachable: asin argument {ratio} outside [-1, 1]")]
    ZUnreachable { ratio: f64 },
    #[error("JointLimit: theta{joint} = {angle} rad outside [{min}, {max}]")]
    JointLimit {
        joint: usize,
        angle: f64,
        min: f64,
        max: f64,
    },
}

impl IkError {
    pub fn code(&self) -> ReasonCode {
        match self {
            IkError::OutOfReach { .. } => ReasonCode::OutOfReach,
            IkError::DegenerateTarget => ReasonCode::DegenerateTarget,
            IkError::ZUnreachable { .. } => ReasonCode::ZUnreachable,
            IkError::JointLimit { .. } => ReasonCode::JointLimit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    Xy,
    Zy,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::Xy => "xy",
            Plane::Zy => "zy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source} ({plane} plane)")]
pub struct LegIkError {
    pub plane: Plane,
    pub source: IkError,
}

impl LegIkError {
    pub fn code(&self) -> ReasonCode {
        self.source.code()
    }
}

/// Solves the wall-plane pair (M1, M2) for a cup at `(x, y)`.
pub fn ik_planar_xy(
    geom: &LegGeometry,
    limits: &JointLimits,
    x: f64,
    y: f64,
    branch: ElbowBranch,
) -> Result<(f64, f64), IkError> {
    if x == 0.0 && y == 0.0 {
        return Err(IkError::DegenerateTarget);
    }
    let (a1, a2) = (geom.a1, geom.a2);
    let d = (x * x + y * y - a1 * a1 - a2 * a2) / (2.0 * a1 * a2);
    // written so that a NaN lands here too
    let within = d.abs() <= 1.0 + REACH_SLACK;
    if !within {
        let (min, max) = geom.planar_annulus();
        return Err(IkError::OutOfReach {
            radius: x.hypot(y),
            min,
            max,
        });
    }
    let cos2 = d.clamp(-1.0, 1.0);
    let sin2 = branch.sign() * (1.0 - cos2 * cos2).max(0.0).sqrt();
    let theta2 = sin2.atan2(cos2);
    let theta1 = y.atan2(x) - (a2 * sin2).atan2(a1 + a2 * cos2);

    limits.check(1, theta1)?;
    limits.check(2, theta2)?;
    Ok((theta1, theta2))
}

/// Solves the wall-normal pair (M3, M4) for clearance `z` and approach `k`.
///
/// `theta3` is the principal `asin` value and `theta3 + theta4 == k` holds in
/// floating point whenever some `theta3` within a few ulps of the principal
/// value makes the sum representable.
pub fn ik_normal_zy(
    geom: &LegGeometry,
    limits: &JointLimits,
    z: f64,
    k: f64,
) -> Result<(f64, f64), IkError> {
    let ratio = (z - geom.a4 * k.sin()) / geom.a3;
    let within = ratio.abs() <= 1.0 + REACH_SLACK;
    if !within {
        return Err(IkError::ZUnreachable { ratio });
    }
    let theta3 = close_approach_sum(ratio.clamp(-1.0, 1.0).asin(), k);
    let theta4 = k - theta3;

    limits.check(3, theta3)?;
    limits.check(4, theta4)?;
    Ok((theta3, theta4))
}

/// Largest ulp shift tried on `theta3` to make `theta3 + (k - theta3)` round
/// back to `k`.
const CLOSURE_SEARCH_ULPS: usize = 8;

fn close_approach_sum(theta3: f64, k: f64) -> f64 {
    let closes = |t: f64| t + (k - t) == k;
    if closes(theta3) {
        return theta3;
    }
    let (mut up, mut down) = (theta3, theta3);
    for _ in 0..CLOSURE_SEARCH_ULPS {
        up = up.next_up();
        down = down.next_down();
        if closes(up) {
            return up;
        }
        if closes(down) {
            return down;
        }
    }
    theta3
}

/// Solves all four joints for one cup target.
pub fn solve_leg(
    geom: &LegGeometry,
    limits: &JointLimits,
    target: &CupTarget,
    branch: ElbowBranch,
) -> Result<JointAngles, LegIkError> {
    let (theta1, theta2) =
        ik_planar_xy(geom, limits, target.x, target.y, branch).map_err(|source| LegIkError {
            plane: Plane::Xy,
            source,
        })?;
    let (theta3, theta4) =
        ik_normal_zy(geom, limits, target.z, target.k).map_err(|source| LegIkError {
            plane: Plane::Zy,
            source,
        })?;
    Ok(JointAngles {
        theta1,
        theta2,
        theta3,
        theta4,
    })
}

pub fn fk_planar_xy(geom: &LegGeometry, theta1: f64, theta2: f64) -> (f64, f64) {
    let elbow = theta1 + theta2;
    (
        geom.a1 * theta1.cos() + geom.a2 * elbow.cos(),
        geom.a1 * theta1.sin() + geom.a2 * elbow.sin(),
    )
}

pub fn fk_normal_z(geom: &LegGeometry, theta3: f64, theta4: f64) -> (f64, f64) {
    let k = theta3 + theta4;
    (geom.a3 * theta3.sin() + geom.a4 * k.sin(), k)
}

/// Forward kinematics of a full leg back to a cup target.
pub fn fk_leg(geom: &LegGeometry, angles: &JointAngles) -> CupTarget {
    let (x, y) = fk_planar_xy(geom, angles.theta1, angles.theta2);
    let (z, k) = fk_normal_z(geom, angles.theta3, angles.theta4);
    CupTarget { x, y, z, k }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reachability {
    /// Reachable; `branch` is the first elbow branch (plus before minus) that
    /// respects the joint limits.
    Reachable {
        branch: ElbowBranch,
    },
    Unreachable(ReasonCode),
}

impl Reachability {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Reachability::Reachable { .. })
    }

    pub fn reason(&self) -> Option<ReasonCode> {
        match self {
            Reachability::Reachable { .. } => None,
            Reachability::Unreachable(code) => Some(*code),
        }
    }
}

pub fn reachable(geom: &LegGeometry, limits: &JointLimits, target: &CupTarget) -> Reachability {
    let plus = ik_planar_xy(geom, limits, target.x, target.y, ElbowBranch::Plus);
    let branch = match plus {
        Ok(_) => ElbowBranch::Plus,
        Err(plus_err) => match ik_planar_xy(geom, limits, target.x, target.y, ElbowBranch::Minus) {
            Ok(_) => ElbowBranch::Minus,
            Err(_) => return Reachability::Unreachable(plus_err.code()),
        },
    };
    match ik_normal_zy(geom, limits, target.z, target.k) {
        Ok(_) => Reachability::Reachable { branch },
        Err(e) => Reachability::Unreachable(e.code()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom() -> LegGeometry {
        LegGeometry::default()
    }

    fn free() -> JointLimits {
        JointLimits::unbounded()
    }

    #[test]
    fn geometry_rejects_non_positive_links() {
        assert!(LegGeometry::new(100.0, 0.0, 100.0, 100.0).is_err());
        assert!(LegGeometry::new(100.0, 100.0, -1.0, 100.0).is_err());
        assert!(LegGeometry::new(f64::NAN, 100.0, 100.0, 100.0).is_err());
        let err = LegGeometry::new(100.0, 100.0, 100.0, 0.0).unwrap_err();
        assert_eq!(err.name, "a4");
    }

    #[test]
    fn fully_extended_arm() {
        let (t1, t2) = ik_planar_xy(&geom(), &free(), 200.0, 0.0, ElbowBranch::Plus).unwrap();
        assert_eq!((t1, t2), (0.0, 0.0));
    }

    #[test]
    fn right_angle_elbow_round_trips() {
        let (t1, t2) = ik_planar_xy(&geom(), &free(), 100.0, 100.0, ElbowBranch::Plus).unwrap();
        assert_abs_diff_eq!(t1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t2, FRAC_PI_2, epsilon = 1e-12);
        let (x, y) = fk_planar_xy(&geom(), t1, t2);
        assert_abs_diff_eq!(x, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn beyond_outer_radius_is_out_of_reach() {
        for branch in [ElbowBranch::Plus, ElbowBranch::Minus] {
            let err = ik_planar_xy(&geom(), &free(), 300.0, 0.0, branch).unwrap_err();
            assert_eq!(err.code(), ReasonCode::OutOfReach);
        }
    }

    #[test]
    fn inside_inner_radius_is_out_of_reach() {
        let g = LegGeometry::new(120.0, 80.0, 100.0, 100.0).unwrap();
        let err = ik_planar_xy(&g, &free(), 30.0, 0.0, ElbowBranch::Plus).unwrap_err();
        assert_eq!(err.code(), ReasonCode::OutOfReach);
    }

    #[test]
    fn origin_is_degenerate() {
        let err = ik_planar_xy(&geom(), &free(), 0.0, 0.0, ElbowBranch::Plus).unwrap_err();
        assert_eq!(err, IkError::DegenerateTarget);
    }

    #[test]
    fn works_behind_the_hip() {
        // quadrant-aware arctangent: x < 0 must not flip the solution
        let (t1, t2) = ik_planar_xy(&geom(), &free(), -120.0, 50.0, ElbowBranch::Plus).unwrap();
        let (x, y) = fk_planar_xy(&geom(), t1, t2);
        assert_abs_diff_eq!(x, -120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn full_fold_solves_at_pi() {
        let g = LegGeometry::new(120.0, 80.0, 100.0, 100.0).unwrap();
        let (t1, t2) = ik_planar_xy(&g, &free(), 0.0, 40.0, ElbowBranch::Plus).unwrap();
        assert_eq!(t2, PI);
        let (x, y) = fk_planar_xy(&g, t1, t2);
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y, 40.0, epsilon = 1e-9);
    }

    #[test]
    fn slightly_outside_annulus_is_clamped() {
        let x = 200.0 * (1.0 + 1e-14);
        let (_, t2) = ik_planar_xy(&geom(), &free(), x, 0.0, ElbowBranch::Plus).unwrap();
        assert_eq!(t2, 0.0);
        assert!(ik_planar_xy(&geom(), &free(), 200.0 + 1e-6, 0.0, ElbowBranch::Plus).is_err());
    }

    #[test]
    fn joint_limit_is_reported() {
        let err = ik_planar_xy(
            &geom(),
            &JointLimits::default(),
            100.0,
            100.0,
            ElbowBranch::Minus,
        )
        .unwrap_err();
        assert!(matches!(err, IkError::JointLimit { joint: 2, .. }));
    }

    #[test]
    fn normal_plane_examples() {
        let (t3, t4) = ik_normal_zy(&geom(), &free(), 100.0, FRAC_PI_2).unwrap();
        assert_eq!((t3, t4), (0.0, FRAC_PI_2));
        let (t3, t4) = ik_normal_zy(&geom(), &free(), 0.0, 0.0).unwrap();
        assert_eq!((t3, t4), (0.0, 0.0));
        let err = ik_normal_zy(&geom(), &free(), 250.0, FRAC_PI_2).unwrap_err();
        match err {
            IkError::ZUnreachable { ratio } => assert_abs_diff_eq!(ratio, 1.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_examples() {
        let g = geom();
        let close = |a: (f64, f64), b: (f64, f64)| {
            assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-9);
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-9);
        };
        close(fk_planar_xy(&g, 0.0, 0.0), (200.0, 0.0));
        close(fk_planar_xy(&g, FRAC_PI_2, 0.0), (0.0, 200.0));
        close(fk_planar_xy(&g, 0.0, PI), (0.0, 0.0));
        close(fk_normal_z(&g, 0.0, FRAC_PI_2), (100.0, FRAC_PI_2));
        close(fk_normal_z(&g, FRAC_PI_2, -FRAC_PI_2), (100.0, 0.0));
        close(fk_normal_z(&g, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn solve_leg_composes_planes() {
        let target = CupTarget::new(200.0, 0.0, 100.0, FRAC_PI_2).unwrap();
        let q = solve_leg(&geom(), &JointLimits::default(), &target, ElbowBranch::Plus).unwrap();
        assert_eq!(q.as_array(), [0.0, 0.0, 0.0, FRAC_PI_2]);

        let origin = CupTarget::new(0.0, 0.0, 100.0, FRAC_PI_2).unwrap();
        let err = solve_leg(&geom(), &free(), &origin, ElbowBranch::Plus).unwrap_err();
        assert_eq!(err.plane, Plane::Xy);
        assert_eq!(err.code(), ReasonCode::DegenerateTarget);

        let high = CupTarget::new(150.0, 0.0, 250.0, FRAC_PI_2).unwrap();
        let err = solve_leg(&geom(), &free(), &high, ElbowBranch::Plus).unwrap_err();
        assert_eq!(err.plane, Plane::Zy);
    }

    #[test]
    fn cup_target_rejects_negative_clearance() {
        assert_eq!(
            CupTarget::new(1.0, 1.0, -1.0, 0.0),
            Err(TargetError::NegativeClearance(-1.0))
        );
        assert_eq!(
            CupTarget::new(f64::NAN, 1.0, 1.0, 0.0),
            Err(TargetError::NonFinite)
        );
    }

    #[test]
    fn reachable_examples() {
        let limits = JointLimits::default();
        let ok = CupTarget::new(150.0, 0.0, 100.0, FRAC_PI_2).unwrap();
        assert!(reachable(&geom(), &limits, &ok).is_reachable());
        let far = CupTarget::new(300.0, 0.0, 100.0, FRAC_PI_2).unwrap();
        assert_eq!(
            reachable(&geom(), &limits, &far),
            Reachability::Unreachable(ReasonCode::OutOfReach)
        );
        let high = CupTarget::new(150.0, 0.0, 250.0, FRAC_PI_2).unwrap();
        assert_eq!(
            reachable(&geom(), &limits, &high).reason(),
            Some(ReasonCode::ZUnreachable)
        );
    }

    #[test]
    fn reachable_falls_back_to_minus_branch() {
        // plus branch would need theta1 below -pi/2 here
        let limits = JointLimits([
            JointRange::new(-FRAC_PI_2, FRAC_PI_2),
            JointRange::new(-PI, PI),
            JointRange::new(-FRAC_PI_2, FRAC_PI_2),
            JointRange::new(-FRAC_PI_2, FRAC_PI_2),
        ]);
        let t = CupTarget::new(10.0, -150.0, 100.0, FRAC_PI_2).unwrap();
        assert_eq!(
            reachable(&geom(), &limits, &t),
            Reachability::Reachable {
                branch: ElbowBranch::Minus
            }
        );
    }

    #[test]
    fn branch_parses() {
        assert_eq!("PLUS".parse::<ElbowBranch>().unwrap(), ElbowBranch::Plus);
        assert_eq!("minus".parse::<ElbowBranch>().unwrap(), ElbowBranch::Minus);
        assert!("up".parse::<ElbowBranch>().is_err());
    }

    proptest! {
        #[test]
        fn both_branches_reach_the_same_point(
            r in 1.0f64..199.0,
            phi in -PI..PI,
        ) {
            let (x, y) = (r * phi.cos(), r * phi.sin());
            let g = geom();
            let plus = ik_planar_xy(&g, &free(), x, y, ElbowBranch::Plus).unwrap();
            let minus = ik_planar_xy(&g, &free(), x, y, ElbowBranch::Minus).unwrap();
            prop_assert_eq!(plus.1, -minus.1);
            for (t1, t2) in [plus, minus] {
                let (fx, fy) = fk_planar_xy(&g, t1, t2);
                prop_assert!((fx - x).abs() < 1e-9 && (fy - y).abs() < 1e-9);
            }
        }

        #[test]
        fn normal_plane_holds_clearance(
            z in 0.0f64..150.0,
            k in -FRAC_PI_2..FRAC_PI_2,
        ) {
            let g = geom();
            if let Ok((t3, t4)) = ik_normal_zy(&g, &free(), z, k) {
                let (fz, _) = fk_normal_z(&g, t3, t4);
                prop_assert!((fz - z).abs() < 1e-9);
                prop_assert!(t3.abs() <= FRAC_PI_2);
            }
        }

        #[test]
        fn approach_sum_exact_when_theta3_is_small(
            k in 0.1f64..FRAC_PI_2,
            frac in -1.0f64..1.0,
        ) {
            // |theta3| <= |k| with theta4 on the same side: always representable
            let g = geom();
            let theta3 = frac.abs() * k * 0.5;
            let z = g.a3() * theta3.sin() + g.a4() * k.sin();
            let (t3, t4) = ik_normal_zy(&g, &free(), z, k).unwrap();
            prop_assert_eq!(t3 + t4, k);
        }

        #[test]
        fn planes_are_decoupled(
            x in 20.0f64..140.0,
            y in 20.0f64..140.0,
            z1 in 0.0f64..90.0,
            z2 in 0.0f64..90.0,
            k1 in 0.0f64..1.2,
            k2 in 0.0f64..1.2,
        ) {
            let g = geom();
            let a = solve_leg(&g, &free(), &CupTarget { x, y, z: z1, k: k1 }, ElbowBranch::Plus);
            let b = solve_leg(&g, &free(), &CupTarget { x, y, z: z2, k: k2 }, ElbowBranch::Plus);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert_eq!(a.theta1.to_bits(), b.theta1.to_bits());
                prop_assert_eq!(a.theta2.to_bits(), b.theta2.to_bits());
            }
        }
    }
}
