//! CSV and JSON artifacts, each with a parser that reads back exactly what
//! was written.
//!
//! CSV files have a mandatory header row, `.` decimals and LF line endings.
//! Floats use Rust's shortest round-trip formatting, so
//! `write(parse(write(x)))` is byte-identical to `write(x)`. Angles are
//! written in degrees.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{JointTable, LegId, LEG_COUNT};
use crate::pneumatics::{EventKind, PneumaticEvent, Valve};
use crate::simulator::{Summary, SweepRow, TickRecord};

pub const JOINT_HEADER: [&str; 7] = [
    "t_s",
    "leg",
    "theta1_deg",
    "theta2_deg",
    "theta3_deg",
    "theta4_deg",
    "attached",
];
pub const EVENT_HEADER: [&str; 6] = ["t_s", "leg", "event", "valve", "pressure_kpa", "attached"];
pub const SWEEP_HEADER: [&str; 4] = ["angle_deg", "avg_speed_mm_s", "avg_power_w", "completed"];
const SERIES_FIXED: [&str; 5] = ["tick", "t_s", "body_y_mm", "power_w", "slip_fraction"];
const SERIES_PER_LEG: [&str; 7] = [
    "theta1_deg",
    "theta2_deg",
    "theta3_deg",
    "theta4_deg",
    "valve",
    "pressure_kpa",
    "attached",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}, column `{column}`: {reason}")]
    Field {
        line: u64,
        column: String,
        reason: String,
    },
}

/// Column names of the wide per-tick series file.
pub fn series_header() -> Vec<String> {
    let mut h: Vec<String> = SERIES_FIXED.iter().map(|s| s.to_string()).collect();
    for leg in LegId::ALL {
        h.extend(SERIES_PER_LEG.iter().map(|c| format!("{c}_l{leg}")));
    }
    h
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn write_table<W, H, I>(out: W, header: &[H], rows: I) -> Result<(), ExportError>
where
    W: Write,
    H: AsRef<str>,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(out);
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Walks the fields of one record, parsing each with a located error.
struct Fields<'r> {
    record: &'r csv::StringRecord,
    header: &'r [String],
    line: u64,
    at: usize,
}

impl Fields<'_> {
    fn next<T: FromStr>(&mut self) -> Result<T, ExportError>
    where
        T::Err: std::fmt::Display,
    {
        let column = self.header[self.at].clone();
        let raw = self.record.get(self.at).unwrap_or_default();
        self.at += 1;
        raw.parse().map_err(|e: T::Err| ExportError::Field {
            line: self.line,
            column,
            reason: format!("`{raw}`: {e}"),
        })
    }

    fn leg(&mut self) -> Result<LegId, ExportError> {
        let line = self.line;
        let column = self.header[self.at].clone();
        let id: u8 = self.next()?;
        LegId::new(id).ok_or(ExportError::Field {
            line,
            column,
            reason: format!("leg {id} not in 1..=4"),
        })
    }
}

fn read_table<R, T>(
    input: R,
    header: &[String],
    mut parse: impl FnMut(&mut Fields<'_>) -> Result<T, ExportError>,
) -> Result<Vec<T>, ExportError>
where
    R: Read,
{
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let found = reader.headers()?.clone();
    if found.iter().ne(header.iter().map(String::as_str)) {
        return Err(ExportError::Header {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fields = Fields {
            record: &record,
            header,
            line,
            at: 0,
        };
        rows.push(parse(&mut fields)?);
    }
    Ok(rows)
}

fn owned(header: &[&str]) -> Vec<String> {
    header.iter().map(|s| s.to_string()).collect()
}

/// One line of the joint table file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCsvRow {
    pub t_s: f64,
    pub leg: LegId,
    pub theta_deg: [f64; 4],
    pub attached: bool,
}

pub fn joint_rows(table: &JointTable) -> Vec<JointCsvRow> {
    table
        .rows
        .iter()
        .map(|r| JointCsvRow {
            t_s: r.t,
            leg: r.leg,
            theta_deg: r.angles.as_array().map(f64::to_degrees),
            attached: r.attached,
        })
        .collect()
}

pub fn write_joint_csv<W: Write>(out: W, rows: &[JointCsvRow]) -> Result<(), ExportError> {
    write_table(
        out,
        &JOINT_HEADER,
        rows.iter().map(|r| {
            let mut v = vec![r.t_s.to_string(), r.leg.to_string()];
            v.extend(r.theta_deg.iter().map(f64::to_string));
            v.push(r.attached.to_string());
            v
        }),
    )
}

pub fn parse_joint_csv<R: Read>(input: R) -> Result<Vec<JointCsvRow>, ExportError> {
    read_table(input, &owned(&JOINT_HEADER), |f| {
        Ok(JointCsvRow {
            t_s: f.next()?,
            leg: f.leg()?,
            theta_deg: [f.next()?, f.next()?, f.next()?, f.next()?],
            attached: f.next()?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegSample {
    pub theta_deg: [f64; 4],
    pub valve: Valve,
    pub pressure_kpa: f64,
    pub attached: bool,
}

/// One line of the per-tick series file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub tick: u64,
    pub t_s: f64,
    pub body_y_mm: f64,
    pub power_w: f64,
    pub slip_fraction: f64,
    pub legs: [LegSample; LEG_COUNT],
}

impl From<&TickRecord> for SeriesRow {
    fn from(r: &TickRecord) -> Self {
        Self {
            tick: r.tick,
            t_s: r.t,
            body_y_mm: r.body_y,
            power_w: r.power,
            slip_fraction: r.slip_fraction,
            legs: std::array::from_fn(|i| LegSample {
                theta_deg: r.angles[i].as_array().map(f64::to_degrees),
                valve: r.valves[i],
                pressure_kpa: r.pressures[i],
                attached: r.attached[i],
            }),
        }
    }
}

pub fn write_series_csv<W: Write>(out: W, rows: &[SeriesRow]) -> Result<(), ExportError> {
    write_table(
        out,
        &series_header(),
        rows.iter().map(|r| {
            let mut v = vec![
                r.tick.to_string(),
                r.t_s.to_string(),
                r.body_y_mm.to_string(),
                r.power_w.to_string(),
                r.slip_fraction.to_string(),
            ];
            for leg in &r.legs {
                v.extend(leg.theta_deg.iter().map(f64::to_string));
                v.push(leg.valve.to_string());
                v.push(leg.pressure_kpa.to_string());
                v.push(leg.attached.to_string());
            }
            v
        }),
    )
}

pub fn parse_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>, ExportError> {
    read_table(input, &series_header(), |f| {
        let (tick, t_s, body_y_mm, power_w, slip_fraction) =
            (f.next()?, f.next()?, f.next()?, f.next()?, f.next()?);
        let mut legs = Vec::with_capacity(LEG_COUNT);
        for _ in 0..LEG_COUNT {
            legs.push(LegSample {
                theta_deg: [f.next()?, f.next()?, f.next()?, f.next()?],
                valve: f.next()?,
                pressure_kpa: f.next()?,
                attached: f.next()?,
            });
        }
        Ok(SeriesRow {
            tick,
            t_s,
            body_y_mm,
            power_w,
            slip_fraction,
            legs: legs.try_into().expect("one sample per leg"),
        })
    })
}

pub fn write_events_csv<W: Write>(out: W, events: &[PneumaticEvent]) -> Result<(), ExportError> {
    write_table(
        out,
        &EVENT_HEADER,
        events.iter().map(|e| {
            vec![
                e.t.to_string(),
                e.leg.to_string(),
                e.kind.to_string(),
                e.valve.to_string(),
                e.pressure.to_string(),
                e.attached.to_string(),
            ]
        }),
    )
}

pub fn parse_events_csv<R: Read>(input: R) -> Result<Vec<PneumaticEvent>, ExportError> {
    read_table(input, &owned(&EVENT_HEADER), |f| {
        Ok(PneumaticEvent {
            t: f.next()?,
            leg: f.leg()?,
            kind: f.next::<EventKind>()?,
            valve: f.next()?,
            pressure: f.next()?,
            attached: f.next()?,
        })
    })
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), ExportError> {
    write_table(
        out,
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.angle_deg.to_string(),
                r.average_speed_mm_s.to_string(),
                r.average_power_w.to_string(),
                r.completed.to_string(),
            ]
        }),
    )
}

pub fn parse_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, ExportError> {
    read_table(input, &owned(&SWEEP_HEADER), |f| {
        Ok(SweepRow {
            angle_deg: f.next()?,
            average_speed_mm_s: f.next()?,
            average_power_w: f.next()?,
            completed: f.next()?,
        })
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_summary_json<W: Write>(mut out: W, summary: &Summary) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn parse_summary_json<R: Read>(input: R) -> Result<Summary, ExportError> {
    Ok(serde_json::from_reader(input)?)
}
