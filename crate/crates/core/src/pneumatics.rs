//! Suction subsystem: two diaphragm pumps, one solenoid valve and one cup per
//! leg.
//!
//! Cup pressure is gauge pressure in kPa (negative under vacuum). With the
//! valve on suction and the pump running it relaxes exponentially towards
//! `vacuum_level + leak * tau` with `tau = dwell_time / 3`. Venting ramps it
//! linearly back to zero over `vent_time`. Valve switching is instantaneous.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{LegId, LEG_COUNT};

/// Pressure tolerance when comparing against the attach threshold.
const PRESSURE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valve {
    Suction,
    Vent,
}

impl fmt::Display for Valve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Valve::Suction => "suction",
            Valve::Vent => "vent",
        })
    }
}

impl std::str::FromStr for Valve {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suction" => Ok(Valve::Suction),
            "vent" => Ok(Valve::Vent),
            other => Err(format!("unknown valve state `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pump {
    A,
    B,
}

impl Pump {
    pub const ALL: [Pump; 2] = [Pump::A, Pump::B];

    pub fn index(self) -> usize {
        match self {
            Pump::A => 0,
            Pump::B => 1,
        }
    }
}

impl fmt::Display for Pump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pump::A => "A",
            Pump::B => "B",
        })
    }
}

/// Cup and pump parameters. None of these come from measurements; they are
/// calibration defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdhesionModel {
    /// mm^2
    pub cup_area: f64,
    /// Steady-state gauge pressure with no leak, kPa.
    pub vacuum_level: f64,
    /// A cup counts as attached at or below this pressure, kPa.
    pub attach_threshold: f64,
    pub dwell_time: f64,
    pub vent_time: f64,
    pub friction_coefficient: f64,
    /// Constant leak towards atmosphere, kPa/s.
    pub leak_rate: f64,
    /// Give up on an attach after this long, s.
    pub attach_timeout: f64,
}

impl Default for AdhesionModel {
    fn default() -> Self {
        Self {
            cup_area: 1963.0,
            vacuum_level: -50.0,
            attach_threshold: -30.0,
            dwell_time: 0.5,
            vent_time: 0.2,
            friction_coefficient: 0.5,
            leak_rate: 0.0,
            attach_timeout: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("adhesion.{field}: {reason}")]
pub struct AdhesionError {
    pub field: &'static str,
    pub reason: String,
}

impl AdhesionModel {
    pub fn validate(&self) -> Result<(), AdhesionError> {
        let fail = |field, reason: &str| {
            Err(AdhesionError {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.cup_area > 0.0 && self.cup_area.is_finite()) {
            return fail("cup_area_mm2", "must be > 0");
        }
        if !(self.vacuum_level < self.attach_threshold && self.attach_threshold < 0.0) {
            return fail(
                "attach_threshold_kpa",
                "need vacuum_level < attach_threshold < 0",
            );
        }
        for (field, t) in [
            ("dwell_time_s", self.dwell_time),
            ("vent_time_s", self.vent_time),
            ("attach_timeout_s", self.attach_timeout),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return fail(field, "must be > 0");
            }
        }
        if self.attach_timeout < self.dwell_time {
            return fail("attach_timeout_s", "must be >= dwell_time_s");
        }
        if !(self.friction_coefficient > 0.0 && self.friction_coefficient <= 2.0) {
            return fail("friction_coefficient", "must be in (0, 2]");
        }
        if !(self.leak_rate >= 0.0 && self.leak_rate.is_finite()) {
            return fail("leak_rate_kpa_s", "must be >= 0");
        }
        Ok(())
    }

    pub fn time_constant(&self) -> f64 {
        self.dwell_time / 3.0
    }

    /// Pressure the cup settles at under suction with `leak` kPa/s.
    pub fn equilibrium(&self, leak: f64) -> f64 {
        (self.vacuum_level + leak * self.time_constant()).min(0.0)
    }

    /// Cup pressure `t` seconds after suction starts from `p0`.
    pub fn suction_pressure(&self, p0: f64, t: f64, leak: f64) -> f64 {
        let eq = self.equilibrium(leak);
        eq + (p0 - eq) * (-t / self.time_constant()).exp()
    }

    /// Time for suction starting at `p0` to reach the attach threshold, if it
    /// ever does.
    pub fn time_to_threshold(&self, p0: f64, leak: f64) -> Option<f64> {
        if p0 <= self.attach_threshold {
            return Some(0.0);
        }
        let eq = self.equilibrium(leak);
        if eq >= self.attach_threshold {
            return None;
        }
        Some(self.time_constant() * ((p0 - eq) / (self.attach_threshold - eq)).ln())
    }

    /// Largest constant leak the pump can beat and still reach the threshold.
    pub fn leak_capacity(&self) -> f64 {
        (self.attach_threshold - self.vacuum_level) / self.time_constant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cup {
    pub valve: Valve,
    /// Gauge pressure, kPa, never above 0.
    pub pressure: f64,
    pub attached: bool,
    /// Time since the valve last switched, s.
    pub elapsed: f64,
    /// Pressure at the moment the valve last switched to vent.
    vent_from: f64,
}

impl Cup {
    fn vented() -> Self {
        Self {
            valve: Valve::Vent,
            pressure: 0.0,
            attached: false,
            elapsed: 0.0,
            vent_from: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PneumaticState {
    pub pump_on: [bool; 2],
    pub cups: [Cup; LEG_COUNT],
    pub assignment: [Pump; LEG_COUNT],
    /// Extra leak injected per cup on top of the model's, kPa/s.
    pub injected_leak: [f64; LEG_COUNT],
}

impl Default for PneumaticState {
    /// Pumps on, all valves venting; pump A feeds legs 1 and 2, pump B legs
    /// 3 and 4.
    fn default() -> Self {
        Self::new([Pump::A, Pump::A, Pump::B, Pump::B])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ValveSuction,
    ValveVent,
    Attached,
    Vented,
    /// The cup lost vacuum because its pump stopped.
    Released,
    PumpOn,
    PumpOff,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::ValveSuction,
        EventKind::ValveVent,
        EventKind::Attached,
        EventKind::Vented,
        EventKind::Released,
        EventKind::PumpOn,
        EventKind::PumpOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::ValveSuction => "valve_suction",
            EventKind::ValveVent => "valve_vent",
            EventKind::Attached => "attached",
            EventKind::Vented => "vented",
            EventKind::Released => "released",
            EventKind::PumpOn => "pump_on",
            EventKind::PumpOff => "pump_off",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event `{s}`"))
    }
}

/// One line of the pneumatic trace. `t` is seconds from the start of the
/// sequence that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PneumaticEvent {
    pub t: f64,
    pub leg: LegId,
    pub kind: EventKind,
    pub valve: Valve,
    pub pressure: f64,
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PneumaticError {
    #[error("PumpOff: pump {pump} feeding leg {leg} is off")]
    PumpOff { leg: LegId, pump: Pump },
    #[error("AttachTimeout: leg {leg} at {pressure:.3} kPa after {elapsed} s (settles at {equilibrium:.3} kPa)")]
    AttachTimeout {
        leg: LegId,
        pressure: f64,
        elapsed: f64,
        equilibrium: f64,
    },
    #[error("NotAttached: leg {leg}")]
    NotAttached { leg: LegId },
    #[error("leg {leg} valve is already on suction")]
    AlreadySuction { leg: LegId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub events: Vec<PneumaticEvent>,
    pub state: PneumaticState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldingCapacity {
    /// N
    pub normal: f64,
    /// N
    pub tangential: f64,
}

impl PneumaticState {
    pub fn new(assignment: [Pump; LEG_COUNT]) -> Self {
        Self {
            pump_on: [true; 2],
            cups: [Cup::vented(); LEG_COUNT],
            assignment,
            injected_leak: [0.0; LEG_COUNT],
        }
    }

    /// All cups on suction, settled at the vacuum level.
    pub fn all_attached(assignment: [Pump; LEG_COUNT], model: &AdhesionModel) -> Self {
        let mut state = Self::new(assignment);
        for cup in state.cups.iter_mut() {
            *cup = Cup {
                valve: Valve::Suction,
                pressure: model.equilibrium(model.leak_rate),
                attached: true,
                elapsed: model.dwell_time,
                vent_from: 0.0,
            };
        }
        state
    }

    pub fn cup(&self, leg: LegId) -> &Cup {
        &self.cups[leg.index()]
    }

    pub fn pump_of(&self, leg: LegId) -> Pump {
        self.assignment[leg.index()]
    }

    pub fn is_pump_on(&self, pump: Pump) -> bool {
        self.pump_on[pump.index()]
    }

    pub fn attached_count(&self) -> usize {
        self.cups.iter().filter(|c| c.attached).count()
    }

    pub fn active_pumps(&self) -> usize {
        self.pump_on.iter().filter(|p| **p).count()
    }

    /// `(valves on suction, legs assigned)` for one pump.
    pub fn pump_load(&self, pump: Pump) -> (usize, usize) {
        LegId::ALL
            .iter()
            .filter(|l| self.pump_of(**l) == pump)
            .fold((0, 0), |(on, assigned), l| {
                let suction = self.cup(*l).valve == Valve::Suction;
                (on + usize::from(suction), assigned + 1)
            })
    }

    fn leak(&self, leg: LegId, model: &AdhesionModel) -> f64 {
        model.leak_rate + self.injected_leak[leg.index()]
    }

    fn event(&self, t: f64, leg: LegId, kind: EventKind) -> PneumaticEvent {
        let cup = self.cup(leg);
        PneumaticEvent {
            t,
            leg,
            kind,
            valve: cup.valve,
            pressure: cup.pressure,
            attached: cup.attached,
        }
    }

    /// Valve to suction, hold for the dwell time, and attach once the cup is
    /// at or below the threshold.
    pub fn attach_sequence(
        &self,
        leg: LegId,
        model: &AdhesionModel,
    ) -> Result<Sequence, PneumaticError> {
        let pump = self.pump_of(leg);
        if !self.is_pump_on(pump) {
            return Err(PneumaticError::PumpOff { leg, pump });
        }
        if self.cup(leg).valve == Valve::Suction {
            return Err(PneumaticError::AlreadySuction { leg });
        }
        let mut state = *self;
        state.open_suction(leg);
        let mut events = vec![state.event(0.0, leg, EventKind::ValveSuction)];

        let leak = self.leak(leg, model);
        let p0 = state.cup(leg).pressure;
        let at = match model.time_to_threshold(p0, leak) {
            Some(t) if t <= model.dwell_time => model.dwell_time,
            Some(t) if t <= model.attach_timeout => t,
            _ => {
                return Err(PneumaticError::AttachTimeout {
                    leg,
                    pressure: model.suction_pressure(p0, model.attach_timeout, leak),
                    elapsed: model.attach_timeout,
                    equilibrium: model.equilibrium(leak),
                })
            }
        };
        let cup = &mut state.cups[leg.index()];
        cup.pressure = model
            .suction_pressure(p0, at, leak)
            .min(model.attach_threshold);
        cup.elapsed = at;
        cup.attached = true;
        events.push(state.event(at, leg, EventKind::Attached));
        Ok(Sequence { events, state })
    }

    /// Valve to vent; the cup counts as released at once and reaches
    /// atmospheric pressure after the vent time.
    pub fn detach_sequence(
        &self,
        leg: LegId,
        model: &AdhesionModel,
    ) -> Result<Sequence, PneumaticError> {
        if !self.cup(leg).attached {
            return Err(PneumaticError::NotAttached { leg });
        }
        let mut state = *self;
        state.vent(leg);
        let mut events = vec![state.event(0.0, leg, EventKind::ValveVent)];
        let cup = &mut state.cups[leg.index()];
        cup.pressure = 0.0;
        cup.elapsed = model.vent_time;
        events.push(state.event(model.vent_time, leg, EventKind::Vented));
        Ok(Sequence { events, state })
    }

    /// Switches a pump. Cups it feeds lose their attachment when it stops.
    pub fn set_pump(&self, pump: Pump, on: bool) -> Sequence {
        let mut state = *self;
        state.pump_on[pump.index()] = on;
        let mut events = Vec::new();
        for leg in LegId::ALL.into_iter().filter(|l| self.pump_of(*l) == pump) {
            let kind = if on {
                EventKind::PumpOn
            } else {
                EventKind::PumpOff
            };
            if !on && state.cups[leg.index()].attached {
                state.cups[leg.index()].attached = false;
                events.push(state.event(0.0, leg, EventKind::Released));
            } else {
                events.push(state.event(0.0, leg, kind));
            }
        }
        Sequence { events, state }
    }

    /// Instantaneous valve switch to suction. The cup attaches later, in
    /// [`PneumaticState::advance`].
    pub fn open_suction(&mut self, leg: LegId) {
        let cup = &mut self.cups[leg.index()];
        cup.valve = Valve::Suction;
        cup.elapsed = 0.0;
    }

    /// Instantaneous valve switch to vent.
    pub fn vent(&mut self, leg: LegId) {
        let cup = &mut self.cups[leg.index()];
        cup.valve = Valve::Vent;
        cup.attached = false;
        cup.elapsed = 0.0;
        cup.vent_from = cup.pressure;
    }

    /// Lets `dt` seconds pass. Returns the legs that attached during it.
    pub fn advance(&mut self, dt: f64, model: &AdhesionModel) -> Vec<LegId> {
        let mut newly = Vec::new();
        for leg in LegId::ALL {
            let pump_on = self.is_pump_on(self.pump_of(leg));
            let leak = self.leak(leg, model);
            let cup = &mut self.cups[leg.index()];
            cup.elapsed += dt;
            match (cup.valve, pump_on) {
                (Valve::Suction, true) => {
                    cup.pressure = model.suction_pressure(cup.pressure, dt, leak).min(0.0);
                    if !cup.attached
                        && cup.elapsed >= model.dwell_time - PRESSURE_EPS
                        && cup.pressure <= model.attach_threshold + PRESSURE_EPS
                    {
                        cup.attached = true;
                        newly.push(leg);
                    }
                }
                (Valve::Suction, false) => {
                    cup.attached = false;
                    cup.pressure *= (-dt / model.time_constant()).exp();
                }
                (Valve::Vent, _) => {
                    let left = (1.0 - cup.elapsed / model.vent_time).max(0.0);
                    cup.pressure = cup.vent_from * left;
                }
            }
        }
        newly
    }

    /// Adds a pressure disturbance to one cup, keeping it at or below 0.
    pub fn perturb(&mut self, leg: LegId, dp: f64) {
        let cup = &mut self.cups[leg.index()];
        cup.pressure = (cup.pressure + dp).min(0.0);
    }

    /// Normal force from vacuum across attached cups and the friction-limited
    /// tangential force it supports. kPa * mm^2 = mN.
    pub fn holding_capacity(&self, model: &AdhesionModel) -> HoldingCapacity {
        let normal: f64 = self
            .cups
            .iter()
            .filter(|c| c.attached)
            .map(|c| c.pressure.abs() * model.cup_area / 1000.0)
            .sum();
        HoldingCapacity {
            normal,
            tangential: model.friction_coefficient * normal,
        }
    }
}
