//! Versioned CSV formats for run output.
//!
//! Three formats, each opened by a comment line naming format and version:
//!
//! * trace: one row per observation of a station's clock. Field presence
//!   encodes the row kind (see [`RowKind`]).
//! * positions: sampled dual-carriage positions, raw and sensor-quantized,
//!   in micrometers.
//! * the summary format lives in the summary module and reuses this header
//!   convention.
//!
//! All writers are deterministic: same rows in, same bytes out.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demonstrator::MotionSample;

pub const TRACE_HEADER: &str = "# tsn5g-syncsim trace v1";
pub const POSITIONS_HEADER: &str = "# tsn5g-syncsim positions v1";
pub const SUMMARY_HEADER: &str = "# tsn5g-syncsim summary v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("not a {expected} file: first line is `{found}`")]
    WrongHeader { expected: &'static str, found: String },
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// One trace observation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub scenario: String,
    pub ue_id: String,
    pub sim_time_ns: i64,
    pub sfn: Option<u16>,
    pub applied_offset_ns: Option<i64>,
    pub tuple_age_ns: Option<i64>,
    pub true_offset_ns: i64,
}

/// Row classification by field presence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Periodic observation, or the pre-correction snapshot written at a
    /// correction instant: only the true offset.
    Sample,
    /// A sync-protocol step: `applied_offset_ns` set, no frame number.
    Correction,
    /// A received tuple stepped the clock: frame number, applied offset and
    /// tuple age all set.
    TupleApplied,
    /// Tuple for a frame this station never observed: frame number only.
    NoMatchingSfn,
    /// Tuple matched a record older than the staleness window: frame number
    /// and age, no applied offset.
    StaleRecord,
}

impl TraceRow {
    pub fn kind(&self) -> RowKind {
        match (self.sfn, self.applied_offset_ns, self.tuple_age_ns) {
            (Some(_), Some(_), _) => RowKind::TupleApplied,
            (None, Some(_), _) => RowKind::Correction,
            (Some(_), None, Some(_)) => RowKind::StaleRecord,
            (Some(_), None, None) => RowKind::NoMatchingSfn,
            (None, None, _) => RowKind::Sample,
        }
    }
}

pub fn write_trace(rows: &[TraceRow]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row).expect("in-memory csv write cannot fail");
    }
    let body = String::from_utf8(wtr.into_inner().expect("no flush error on Vec"))
        .expect("csv output is utf-8");
    format!("{TRACE_HEADER}\n{body}")
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, TraceError> {
    let body = strip_header(text, TRACE_HEADER)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<TraceRow>().enumerate() {
        rows.push(rec.map_err(|e| TraceError::MalformedRow { row: i + 1, message: e.to_string() })?);
    }
    Ok(rows)
}

/// One parsed positions row, micrometers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionRow {
    pub t_ns: i64,
    pub s1_um: f64,
    pub s2_um: f64,
    pub ds_um: f64,
    pub s1_q_um: f64,
    pub s2_q_um: f64,
    pub ds_q_um: f64,
}

pub fn write_positions(samples: &[MotionSample]) -> String {
    let mut out = String::with_capacity(64 + samples.len() * 64);
    out.push_str(POSITIONS_HEADER);
    out.push('\n');
    out.push_str("t_ns,s1_um,s2_um,ds_um,s1_q_um,s2_q_um,ds_q_um\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            s.t_ns,
            s.s1_m * 1e6,
            s.s2_m * 1e6,
            s.ds_m * 1e6,
            s.s1_q_m * 1e6,
            s.s2_q_m * 1e6,
            s.ds_q_m * 1e6,
        );
    }
    out
}

pub fn parse_positions(text: &str) -> Result<Vec<PositionRow>, TraceError> {
    let body = strip_header(text, POSITIONS_HEADER)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<&str, TraceError> {
            rec.get(j).ok_or(TraceError::MalformedRow {
                row: i + 1,
                message: format!("missing column {j}"),
            })
        };
        let parse_i = |s: &str| {
            s.parse::<i64>().map_err(|e| TraceError::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })
        };
        let parse_f = |s: &str| {
            s.parse::<f64>().map_err(|e| TraceError::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })
        };
        rows.push(PositionRow {
            t_ns: parse_i(field(0)?)?,
            s1_um: parse_f(field(1)?)?,
            s2_um: parse_f(field(2)?)?,
            ds_um: parse_f(field(3)?)?,
            s1_q_um: parse_f(field(4)?)?,
            s2_q_um: parse_f(field(5)?)?,
            ds_q_um: parse_f(field(6)?)?,
        });
    }
    Ok(rows)
}

/// Split off and check the version comment line; returns the csv body.
pub fn strip_header<'t>(text: &'t str, expected: &'static str) -> Result<&'t str, TraceError> {
    match text.split_once('\n') {
        Some((first, rest)) if first.trim_end() == expected => Ok(rest),
        Some((first, _)) => {
            Err(TraceError::WrongHeader { expected, found: first.to_string() })
        }
        None => Err(TraceError::WrongHeader { expected, found: text.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> TraceRow {
        TraceRow {
            scenario: "sfn_anchored".into(),
            ue_id: "ue_a".into(),
            sim_time_ns: 10_000_000,
            sfn: None,
            applied_offset_ns: None,
            tuple_age_ns: None,
            true_offset_ns: -3_000_000,
        }
    }

    #[test]
    fn trace_round_trip() {
        let rows = vec![
            sample_row(),
            TraceRow {
                sfn: Some(17),
                applied_offset_ns: Some(3_000_000),
                tuple_age_ns: Some(2_000_000),
                true_offset_ns: 0,
                sim_time_ns: 20_000_000,
                ..sample_row()
            },
        ];
        let text = write_trace(&rows);
        assert!(text.starts_with("# tsn5g-syncsim trace v1\n"));
        assert!(text.contains(
            "scenario,ue_id,sim_time_ns,sfn,applied_offset_ns,tuple_age_ns,true_offset_ns"
        ));
        assert_eq!(parse_trace(&text).unwrap(), rows);
    }

    #[test]
    fn row_kinds_from_field_presence() {
        let mut r = sample_row();
        assert_eq!(r.kind(), RowKind::Sample);
        r.applied_offset_ns = Some(5);
        assert_eq!(r.kind(), RowKind::Correction);
        r.sfn = Some(3);
        assert_eq!(r.kind(), RowKind::TupleApplied);
        r.applied_offset_ns = None;
        r.tuple_age_ns = Some(9);
        assert_eq!(r.kind(), RowKind::StaleRecord);
        r.tuple_age_ns = None;
        assert_eq!(r.kind(), RowKind::NoMatchingSfn);
    }

    #[test]
    fn wrong_header_detected() {
        let err = parse_trace("# wrong\nscenario\n").unwrap_err();
        assert!(matches!(err, TraceError::WrongHeader { .. }));
    }

    #[test]
    fn malformed_row_reported_with_index() {
        let text = format!(
            "{TRACE_HEADER}\nscenario,ue_id,sim_time_ns,sfn,applied_offset_ns,tuple_age_ns,true_offset_ns\na,b,notanumber,,,,0\n"
        );
        let err = parse_trace(&text).unwrap_err();
        assert!(matches!(err, TraceError::MalformedRow { row: 1, .. }), "{err}");
    }

    #[test]
    fn positions_round_trip() {
        let samples = vec![crate::demonstrator::MotionSample {
            t_ns: 1_000,
            s1_m: 0.15,
            s2_m: 0.1498,
            ds_m: 0.0002,
            s1_q_m: 0.150146484375,
            s2_q_m: 0.14990234375,
            ds_q_m: 0.000244140625,
        }];
        let text = write_positions(&samples);
        assert!(text.starts_with("# tsn5g-syncsim positions v1\n"));
        let rows = parse_positions(&text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t_ns, 1_000);
        assert!((rows[0].s1_um - 150_000.0).abs() < 1e-9);
        assert!((rows[0].ds_q_um - 244.141).abs() < 1e-9);
    }

    #[test]
    fn write_is_deterministic() {
        let rows = vec![sample_row(); 10];
        assert_eq!(write_trace(&rows), write_trace(&rows));
    }
}
