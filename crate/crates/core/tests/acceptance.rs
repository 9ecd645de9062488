//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use climbsim::gait::{validate, LegId, Micrometres};
use climbsim::kinematics::{
    fk_leg, fk_normal_z, ik_normal_zy, solve_leg, CupTarget, ElbowBranch, JointAngles, JointLimits,
    LegGeometry,
};
use climbsim::pneumatics::{AdhesionModel, PneumaticState, Pump, Valve};
use climbsim::simulator::{run_scenario, sweep_climb_angle, FailureKind, ScenarioConfig};

const SAMPLES: usize = 1000;
const TOL: f64 = 1e-9;

type Sampler = fn(&mut ChaCha8Rng, &LegGeometry) -> (f64, f64);
type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn pose_error(a: &CupTarget, b: &CupTarget) -> f64 {
    [a.x - b.x, a.y - b.y, a.z - b.z, a.k - b.k]
        .iter()
        .fold(0.0, |m, e| m.max(e.abs()))
}

/// Reachable wall-normal pair from joint angles inside the default limits.
fn sample_zk(rng: &mut ChaCha8Rng, geom: &LegGeometry) -> (f64, f64) {
    let theta3 = rng.gen_range(-FRAC_PI_2..=FRAC_PI_2);
    let theta4 = rng.gen_range(-FRAC_PI_2..=FRAC_PI_2);
    let (z, k) = fk_normal_z(geom, theta3, theta4);
    (z, k)
}

fn ik_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let geom = LegGeometry::default();
    let limits = JointLimits::unbounded();
    let (rmin, rmax) = geom.planar_annulus();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut check = |target: CupTarget, branch: ElbowBranch, geom: &LegGeometry| match solve_leg(
        geom, &limits, &target, branch,
    ) {
        Ok(angles) => worst = worst.max(pose_error(&fk_leg(geom, &angles), &target)),
        Err(_) => failures += 1,
    };
    for branch in [ElbowBranch::Plus, ElbowBranch::Minus] {
        for _ in 0..SAMPLES {
            let u: f64 = rng.gen();
            let r = (rmin * rmin + u * (rmax * rmax - rmin * rmin)).sqrt();
            let phi = rng.gen_range(-PI..PI);
            let (z, k) = sample_zk(&mut rng, &geom);
            check(
                CupTarget {
                    x: r * phi.cos(),
                    y: r * phi.sin(),
                    z,
                    k,
                },
                branch,
                &geom,
            );
        }
    }

    // |D| = 1: fully stretched and fully folded
    let folded = LegGeometry::new(120.0, 80.0, 100.0, 100.0).unwrap();
    let mut boundary = 0;
    for i in 0..16 {
        let phi = -PI + i as f64 * PI / 8.0;
        for branch in [ElbowBranch::Plus, ElbowBranch::Minus] {
            for (g, r) in [(&geom, 200.0), (&folded, 40.0), (&folded, 200.0)] {
                let target = CupTarget {
                    x: r * phi.cos(),
                    y: r * phi.sin(),
                    z: 100.0,
                    k: FRAC_PI_2,
                };
                check(target, branch, g);
                boundary += 1;
            }
        }
    }
    verdict(
        failures == 0 && worst <= TOL,
        format!(
            "{} interior targets per branch + {boundary} boundary targets, {failures} solve failures, max |fk(ik(t)) - t| = {worst:.3e}",
            SAMPLES
        ),
    )
}

/// Uniform `k`, then uniform non-negative `z` over what the default limits
/// can reach at that `k`.
fn sample_zk_uniform(rng: &mut ChaCha8Rng, geom: &LegGeometry) -> (f64, f64) {
    loop {
        let k = rng.gen_range(-PI..=PI);
        let lo = (k - FRAC_PI_2).max(-FRAC_PI_2);
        let hi = (k + FRAC_PI_2).min(FRAC_PI_2);
        let z_of = |t3: f64| geom.a3() * t3.sin() + geom.a4() * k.sin();
        let (z_lo, z_hi) = (z_of(lo).max(0.0), z_of(hi));
        if z_hi > z_lo {
            return (rng.gen_range(z_lo..=z_hi), k);
        }
    }
}

fn z_constraint() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let geom = LegGeometry::default();
    let limits = JointLimits::default();
    let mut pass = true;
    let mut notes = Vec::new();
    let samplers: [(&str, Sampler); 2] = [
        ("uniform (z, k)", sample_zk_uniform),
        ("from joint angles", sample_zk),
    ];
    for (label, sample) in samplers {
        let (mut worst, mut inexact, mut failures) = (0.0f64, 0, 0);
        for _ in 0..SAMPLES {
            let (z, k) = sample(&mut rng, &geom);
            match ik_normal_zy(&geom, &limits, z, k) {
                Ok((t3, t4)) => {
                    let (z_back, _) = fk_normal_z(&geom, t3, t4);
                    worst = worst.max((z_back - z).abs());
                    if t3 + t4 != k {
                        inexact += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        pass &= failures == 0 && worst <= TOL && inexact == 0;
        notes.push(format!(
            "{label}: {SAMPLES} pairs, {failures} solve failures, max z error {worst:.3e} mm, theta3 + theta4 != k in {inexact}"
        ));
    }
    verdict(pass, notes.join("; "))
}

fn decoupling() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let geom = LegGeometry::default();
    let limits = JointLimits::default();
    let branch = ElbowBranch::Plus;
    let sample_xy = |rng: &mut ChaCha8Rng| {
        let t1 = rng.gen_range(-1.2..1.2);
        let t2 = rng.gen_range(0.1..3.0);
        let p = fk_leg(
            &geom,
            &JointAngles {
                theta1: t1,
                theta2: t2,
                theta3: 0.0,
                theta4: 0.0,
            },
        );
        (p.x, p.y)
    };
    let mut broken = 0;
    for _ in 0..100 {
        let (x, y) = sample_xy(&mut rng);
        let (z, k) = sample_zk(&mut rng, &geom);
        let (x2, y2) = sample_xy(&mut rng);
        let (z2, k2) = sample_zk(&mut rng, &geom);
        let solve =
            |x, y, z, k| solve_leg(&geom, &limits, &CupTarget { x, y, z, k }, branch).unwrap();
        let base = solve(x, y, z, k);
        let moved_zk = solve(x, y, z2, k2);
        let moved_xy = solve(x2, y2, z, k);
        let bits = |a: f64| a.to_bits();
        if bits(base.theta1) != bits(moved_zk.theta1)
            || bits(base.theta2) != bits(moved_zk.theta2)
            || bits(base.theta3) != bits(moved_xy.theta3)
            || bits(base.theta4) != bits(moved_xy.theta4)
        {
            broken += 1;
        }
    }
    verdict(
        broken == 0,
        format!("100 cases, {broken} with cross-plane change"),
    )
}

fn gait_safety() -> Verdict {
    let cfg = ScenarioConfig {
        cycles: 10,
        ..ScenarioConfig::default()
    };
    let script = cfg.gait.script(&cfg.robot).unwrap();
    let violations = validate(&script, &cfg.robot, &cfg.gait.stance, cfg.gait.pose).violations;
    let report = run_scenario(&cfg).unwrap();
    let low = report
        .series
        .iter()
        .filter(|r| r.attached_count() < 3)
        .count();
    let min = report
        .series
        .iter()
        .map(|r| r.attached_count())
        .min()
        .unwrap_or(0);
    verdict(
        violations.is_empty() && low == 0 && report.summary.completed,
        format!(
            "{} ticks, min attached = {min}, ticks below 3 = {low}, script violations = {}, completed = {}",
            report.series.len(),
            violations.len(),
            report.summary.completed
        ),
    )
}

fn cycle_closure() -> Verdict {
    let base = ScenarioConfig::default();
    let script = base.gait.script(&base.robot).unwrap();
    let step = base.gait.step_length;
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [1usize, 5, 20] {
        let (moved, map) = script.replay(&base.gait.stance, n);
        let expected = Micrometres(step.0 * n as i64);
        let report = run_scenario(&ScenarioConfig {
            cycles: n,
            ..base.clone()
        })
        .unwrap();
        let sim = Micrometres(report.summary.commanded_displacement_um);
        let good = moved == expected && sim == expected && map == base.gait.stance;
        ok &= good;
        notes.push(format!(
            "N={n}: {} um (sim {} um){}",
            moved.0,
            sim.0,
            if map == base.gait.stance {
                ""
            } else {
                " stance differs"
            }
        ));
    }
    verdict(ok, format!("step {} um; {}", step.0, notes.join(", ")))
}

fn trend() -> Verdict {
    let angles = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];
    let rows = sweep_climb_angle(&ScenarioConfig::default(), &angles).unwrap();
    let speed: Vec<f64> = rows.iter().map(|r| r.average_speed_mm_s).collect();
    let power: Vec<f64> = rows.iter().map(|r| r.average_power_w).collect();
    let ok = rows.iter().all(|r| r.completed)
        && speed.windows(2).all(|w| w[1] <= w[0])
        && power.windows(2).all(|w| w[1] >= w[0])
        && speed[6] < speed[0]
        && power[6] > power[0];
    verdict(
        ok,
        format!(
            "speed {:.4} -> {:.4} mm/s, power {:.4} -> {:.4} W over 0..90 deg",
            speed[0], speed[6], power[0], power[6]
        ),
    )
}

#[derive(Debug, Clone)]
enum Op {
    Attach(u8),
    Detach(u8),
    Pump(bool, bool),
    Suction(u8),
    Vent(u8),
    Tick(u8),
    Jolt(u8, f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1u8..=4).prop_map(Op::Attach),
        (1u8..=4).prop_map(Op::Detach),
        (any::<bool>(), any::<bool>()).prop_map(|(a, b)| Op::Pump(a, b)),
        (1u8..=4).prop_map(Op::Suction),
        (1u8..=4).prop_map(Op::Vent),
        (1u8..=60).prop_map(Op::Tick),
        ((1u8..=4), -10.0f64..10.0).prop_map(|(l, d)| Op::Jolt(l, d)),
    ]
}

fn proptest_config() -> ProptestConfig {
    ProptestConfig {
        cases: SAMPLES as u32,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn pneumatic_protocol() -> Verdict {
    let leg = |l: u8| LegId::new(l).unwrap();
    let mut runner = TestRunner::new(proptest_config());
    let interleavings = runner.run(&prop::collection::vec(op(), 1..80), |ops| {
        let model = AdhesionModel::default();
        let mut state = PneumaticState::default();
        for op in ops {
            match op {
                Op::Attach(l) => {
                    if let Ok(s) = state.attach_sequence(leg(l), &model) {
                        state = s.state
                    }
                }
                Op::Detach(l) => {
                    if let Ok(s) = state.detach_sequence(leg(l), &model) {
                        state = s.state
                    }
                }
                Op::Pump(a, on) => {
                    state = state.set_pump(if a { Pump::A } else { Pump::B }, on).state
                }
                Op::Suction(l) => state.open_suction(leg(l)),
                Op::Vent(l) => state.vent(leg(l)),
                Op::Tick(n) => {
                    state.advance(f64::from(n) * 0.01, &model);
                }
                Op::Jolt(l, d) => state.perturb(leg(l), d),
            }
            for l in LegId::ALL {
                let cup = state.cup(l);
                if cup.attached {
                    prop_assert_eq!(cup.valve, Valve::Suction);
                    prop_assert!(state.is_pump_on(state.pump_of(l)));
                }
            }
        }
        Ok(())
    });

    let mut runner = TestRunner::new(proptest_config());
    let strategy = (-90.0f64..-20.0, 0.05f64..2.0, 2u32..200);
    let exponential = runner.run(&strategy, |(vacuum, dwell, ticks)| {
        let model = AdhesionModel {
            vacuum_level: vacuum,
            attach_threshold: vacuum * 0.6,
            dwell_time: dwell,
            attach_timeout: 10.0 * dwell,
            ..AdhesionModel::default()
        };
        let three_tau = 3.0 * model.time_constant();
        let closed = model.suction_pressure(0.0, three_tau, 0.0);
        let mut state = PneumaticState::default();
        state.open_suction(LegId::new(1).unwrap());
        for _ in 0..ticks {
            state.advance(three_tau / f64::from(ticks), &model);
        }
        let stepped = state.cup(LegId::new(1).unwrap()).pressure;
        prop_assert!((closed - vacuum).abs() <= 0.05 * vacuum.abs());
        prop_assert!(
            (stepped - closed).abs() <= 1e-9 * vacuum.abs(),
            "stepped {} closed {}",
            stepped,
            closed
        );
        let seq = PneumaticState::default()
            .attach_sequence(LegId::new(1).unwrap(), &model)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let attached = seq.state.cup(LegId::new(1).unwrap());
        prop_assert!(attached.attached);
        prop_assert!((attached.pressure - vacuum).abs() <= 0.05 * vacuum.abs());
        Ok(())
    });

    fn describe<T: std::fmt::Debug>(r: &Result<(), proptest::test_runner::TestError<T>>) -> String {
        match r {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        }
    }
    verdict(
        interleavings.is_ok() && exponential.is_ok(),
        format!(
            "{SAMPLES} interleavings: {}; {SAMPLES} exponential oracle cases: {}",
            describe(&interleavings),
            describe(&exponential)
        ),
    )
}

fn climbsim(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_climbsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("CLIMBSIM_CONFIG")
        .output()
        .expect("binary runs")
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noisy.toml");
    std::fs::write(
        &cfg,
        "[scenario]\nclimb_angle_deg = 45\nseed = 7\n[noise]\npressure_jitter_kpa = 0.5\nleak_probability = 0.3\nleak_rate_kpa_s = 20\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    for run in ["a", "b"] {
        let out = climbsim(&["-c", cfg, "simulate", "-o", run], dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = climbsim(
            &[
                "-c",
                cfg,
                "sweep",
                "0",
                "30",
                "60",
                "90",
                "-o",
                &format!("{run}.sweep.csv"),
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let mut same = 0;
    let files = ["summary.json", "series.csv", "events.csv", "sweep.csv"];
    for f in files {
        let a = std::fs::read(dir.path().join(format!("a.{f}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{f}"))).unwrap();
        same += usize::from(a == b && !a.is_empty());
    }
    verdict(
        same == files.len(),
        format!(
            "{same}/{} output files byte-identical across two runs (seeded noise on)",
            files.len()
        ),
    )
}

fn failure_mode() -> Verdict {
    let base = ScenarioConfig::default();
    let model = base.adhesion;
    let one = PneumaticState::all_attached(base.pump_assignment, &model)
        .holding_capacity(&model)
        .tangential
        / 4.0;
    let three = 3.0 * one;
    // 20% above what three cups hold at 90 degrees
    let mass = 1.2 * three / base.gravity;
    let cfg = ScenarioConfig {
        climb_angle_deg: 90.0,
        robot_mass: mass,
        ..base
    };
    let report = run_scenario(&cfg).unwrap();
    let failure = report.summary.failure.as_ref();
    let lib_ok = !report.summary.completed
        && failure.is_some_and(|f| f.kind == FailureKind::AdhesionFailure);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overload.toml");
    std::fs::write(
        &path,
        format!("[scenario]\nclimb_angle_deg = 90\nmass_kg = {mass}\n"),
    )
    .unwrap();
    let out = climbsim(
        &["-c", path.to_str().unwrap(), "simulate", "-o", "over"],
        dir.path(),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    let cli_ok = out.status.code() == Some(4) && stderr.contains("AdhesionFailure");
    verdict(
        lib_ok && cli_ok,
        format!(
            "3-cup capacity {three:.3} N, mass {mass:.4} kg -> load {:.3} N; {}; cli exit {:?}",
            cfg.tangential_load(),
            failure.map_or("no failure".to_string(), |f| f.message.clone()),
            out.status.code()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("IK round trip", ik_round_trip),
        ("wall-normal constraint", z_constraint),
        ("plane decoupling", decoupling),
        ("gait safety", gait_safety),
        ("cycle closure", cycle_closure),
        ("climb-angle trend", trend),
        ("pneumatic protocol", pneumatic_protocol),
        ("determinism", determinism),
        ("overload failure", failure_mode),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {} {} [{name}]: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
