//! Reduction of traces to per-station statistics and cross-run comparison.
//!
//! A summary is pure derived data: re-running the reduction on an emitted
//! trace CSV reproduces the emitted summary byte for byte. The steady-state
//! window of a station opens at its first applied correction; the
//! sub-millisecond requirement flag is judged on that window with a strict
//! 1 ms threshold.

use std::fmt::Write as _;

use thiserror::Error;

use crate::trace::{
    strip_header, PositionRow, RowKind, TraceError, TraceRow, SUMMARY_HEADER,
};

/// Strict upper bound for the requirement flag.
pub const REQUIREMENT_BOUND_NS: i64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("trace has no rows")]
    EmptyTrace,
    #[error("comparison needs at least two summaries, got {0}")]
    NeedTwoSummaries(usize),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    pub node: String,
    pub rows: u64,
    pub max_abs_true_offset_ns: i64,
    /// Peak |offset| from the first applied correction onward; absent if the
    /// station was never corrected.
    pub steady_max_abs_true_offset_ns: Option<i64>,
    pub mean_true_offset_ns: f64,
    pub stddev_true_offset_ns: f64,
    pub p99_abs_true_offset_ns: i64,
    pub corrections: u64,
    pub no_matching_sfn: u64,
    pub stale_records: u64,
    pub residence_flagged: u64,
    /// Steady-state peak strictly below 1 ms.
    pub meets_1ms: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSummary {
    pub ds_max_um: f64,
    pub ds_max_quantized_um: f64,
    pub recovered_dt_ns: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub nodes: Vec<NodeStats>,
    pub motion: Option<MotionSummary>,
}

/// Reduce trace rows to per-station statistics. Stations appear in first-
/// occurrence order.
pub fn summarize(rows: &[TraceRow]) -> Result<RunSummary, SummaryError> {
    if rows.is_empty() {
        return Err(SummaryError::EmptyTrace);
    }
    let scenario = rows[0].scenario.clone();
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !order.contains(&row.ue_id) {
            order.push(row.ue_id.clone());
        }
    }
    let nodes = order
        .iter()
        .map(|node| {
            let node_rows: Vec<&TraceRow> = rows.iter().filter(|r| &r.ue_id == node).collect();
            node_stats(node, &node_rows)
        })
        .collect();
    Ok(RunSummary { scenario, nodes, motion: None })
}

fn node_stats(node: &str, rows: &[&TraceRow]) -> NodeStats {
    let n = rows.len() as u64;
    let mut max_abs = 0i64;
    let mut sum = 0i128;
    let mut corrections = 0u64;
    let mut no_matching = 0u64;
    let mut stale = 0u64;
    let mut first_correction: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        max_abs = max_abs.max(r.true_offset_ns.abs());
        sum += r.true_offset_ns as i128;
        match r.kind() {
            RowKind::Correction | RowKind::TupleApplied => {
                corrections += 1;
                first_correction.get_or_insert(i);
            }
            RowKind::NoMatchingSfn => no_matching += 1,
            RowKind::StaleRecord => stale += 1,
            RowKind::Sample => {}
        }
    }
    let mean = sum as f64 / n as f64;
    let var = rows
        .iter()
        .map(|r| {
            let d = r.true_offset_ns as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n as f64;

    let mut abs_sorted: Vec<i64> = rows.iter().map(|r| r.true_offset_ns.abs()).collect();
    abs_sorted.sort_unstable();
    let p99_idx = ((0.99 * n as f64).ceil() as usize).saturating_sub(1);
    let p99 = abs_sorted[p99_idx.min(abs_sorted.len() - 1)];

    let steady = first_correction.map(|start| {
        rows[start..].iter().map(|r| r.true_offset_ns.abs()).max().unwrap_or(0)
    });

    NodeStats {
        node: node.to_string(),
        rows: n,
        max_abs_true_offset_ns: max_abs,
        steady_max_abs_true_offset_ns: steady,
        mean_true_offset_ns: mean,
        stddev_true_offset_ns: var.sqrt(),
        p99_abs_true_offset_ns: p99,
        corrections,
        no_matching_sfn: no_matching,
        stale_records: stale,
        residence_flagged: 0,
        meets_1ms: steady.is_some_and(|s| s < REQUIREMENT_BOUND_NS),
    }
}

/// Reduce a positions trace to the peak-gap summary. `v_max` converts the
/// peak back into a start-time skew.
pub fn summarize_positions(rows: &[PositionRow], v_max_m_s: f64) -> MotionSummary {
    let ds_max_um = rows.iter().map(|r| r.ds_um.abs()).fold(0.0f64, f64::max);
    let ds_q_um = rows.iter().map(|r| r.ds_q_um.abs()).fold(0.0f64, f64::max);
    MotionSummary {
        ds_max_um,
        ds_max_quantized_um: ds_q_um,
        recovered_dt_ns: ((ds_max_um * 1e-6 / v_max_m_s) * 1e9).round() as i64,
    }
}

const SUMMARY_COLUMNS: &str = "scenario,node,rows,max_abs_true_offset_ns,\
steady_max_abs_true_offset_ns,mean_true_offset_ns,stddev_true_offset_ns,\
p99_abs_true_offset_ns,corrections,no_matching_sfn,stale_records,\
residence_flagged,meets_1ms,ds_max_um,ds_max_quantized_um,recovered_dt_ns";

/// Special `node` value carrying the per-run motion columns.
pub const MOTION_NODE: &str = "carriage_pair";

pub fn write_summary(summary: &RunSummary) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    out.push_str(SUMMARY_COLUMNS);
    out.push('\n');
    for s in &summary.nodes {
        let steady = s
            .steady_max_abs_true_offset_ns
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{:.3},{},{},{},{},{},{},,,",
            summary.scenario,
            s.node,
            s.rows,
            s.max_abs_true_offset_ns,
            steady,
            s.mean_true_offset_ns,
            s.stddev_true_offset_ns,
            s.p99_abs_true_offset_ns,
            s.corrections,
            s.no_matching_sfn,
            s.stale_records,
            s.residence_flagged,
            s.meets_1ms,
        );
    }
    if let Some(m) = &summary.motion {
        let _ = writeln!(
            out,
            "{},{MOTION_NODE},,,,,,,,,,,,{:.3},{:.3},{}",
            summary.scenario, m.ds_max_um, m.ds_max_quantized_um, m.recovered_dt_ns,
        );
    }
    out
}

pub fn parse_summary(text: &str) -> Result<RunSummary, SummaryError> {
    let body = strip_header(text, SUMMARY_HEADER).map_err(TraceError::from)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut scenario = String::new();
    let mut nodes = Vec::new();
    let mut motion = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(TraceError::from)?;
        let bad = |message: String| {
            SummaryError::Trace(TraceError::MalformedRow { row: i + 1, message })
        };
        let get = |j: usize| rec.get(j).unwrap_or("").to_string();
        scenario = get(0);
        let node = get(1);
        if node == MOTION_NODE {
            motion = Some(MotionSummary {
                ds_max_um: get(13).parse().map_err(|e| bad(format!("ds_max_um: {e}")))?,
                ds_max_quantized_um: get(14)
                    .parse()
                    .map_err(|e| bad(format!("ds_max_quantized_um: {e}")))?,
                recovered_dt_ns: get(15)
                    .parse()
                    .map_err(|e| bad(format!("recovered_dt_ns: {e}")))?,
            });
            continue;
        }
        let parse_u = |j: usize, name: &str| {
            get(j).parse::<u64>().map_err(|e| bad(format!("{name}: {e}")))
        };
        let parse_i = |j: usize, name: &str| {
            get(j).parse::<i64>().map_err(|e| bad(format!("{name}: {e}")))
        };
        let parse_f = |j: usize, name: &str| {
            get(j).parse::<f64>().map_err(|e| bad(format!("{name}: {e}")))
        };
        let steady_txt = get(4);
        nodes.push(NodeStats {
            node,
            rows: parse_u(2, "rows")?,
            max_abs_true_offset_ns: parse_i(3, "max_abs")?,
            steady_max_abs_true_offset_ns: if steady_txt.is_empty() {
                None
            } else {
                Some(steady_txt.parse().map_err(|e| bad(format!("steady_max: {e}")))?)
            },
            mean_true_offset_ns: parse_f(5, "mean")?,
            stddev_true_offset_ns: parse_f(6, "stddev")?,
            p99_abs_true_offset_ns: parse_i(7, "p99")?,
            corrections: parse_u(8, "corrections")?,
            no_matching_sfn: parse_u(9, "no_matching_sfn")?,
            stale_records: parse_u(10, "stale_records")?,
            residence_flagged: parse_u(11, "residence_flagged")?,
            meets_1ms: get(12) == "true",
        });
    }
    if nodes.is_empty() && motion.is_none() {
        return Err(SummaryError::EmptyTrace);
    }
    Ok(RunSummary { scenario, nodes, motion })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub worst_node: String,
    pub worst_steady_max_ns: Option<i64>,
    pub worst_max_abs_ns: i64,
    pub ds_max_um: Option<f64>,
    pub meets_1ms: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

/// Align several run summaries for side-by-side reading. Requires at least
/// two inputs.
pub fn compare(summaries: &[RunSummary]) -> Result<Comparison, SummaryError> {
    if summaries.len() < 2 {
        return Err(SummaryError::NeedTwoSummaries(summaries.len()));
    }
    let rows = summaries
        .iter()
        .map(|s| {
            let worst = s
                .nodes
                .iter()
                .max_by_key(|n| n.steady_max_abs_true_offset_ns.unwrap_or(n.max_abs_true_offset_ns));
            let (worst_node, steady, max_abs, meets) = match worst {
                Some(n) => (
                    n.node.clone(),
                    n.steady_max_abs_true_offset_ns,
                    n.max_abs_true_offset_ns,
                    s.nodes.iter().all(|n| n.meets_1ms),
                ),
                None => (String::new(), None, 0, false),
            };
            ComparisonRow {
                scenario: s.scenario.clone(),
                worst_node,
                worst_steady_max_ns: steady,
                worst_max_abs_ns: max_abs,
                ds_max_um: s.motion.map(|m| m.ds_max_um),
                meets_1ms: meets,
            }
        })
        .collect();
    Ok(Comparison { rows })
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,worst_node,worst_steady_max_abs_ns,worst_max_abs_ns,ds_max_um,meets_1ms\n",
        );
        for r in &self.rows {
            let steady = r.worst_steady_max_ns.map(|v| v.to_string()).unwrap_or_default();
            let ds = r.ds_max_um.map(|v| format!("{v:.3}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario, r.worst_node, steady, r.worst_max_abs_ns, ds, r.meets_1ms
            );
        }
        out
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:<10} {:>20} {:>16} {:>12}  {}",
            "scenario", "worst node", "steady max |off| ns", "max |off| ns", "ds_max um", "<1ms"
        );
        for r in &self.rows {
            let steady = r
                .worst_steady_max_ns
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into());
            let ds = r.ds_max_um.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<18} {:<10} {:>20} {:>16} {:>12}  {}",
                r.scenario,
                r.worst_node,
                steady,
                r.worst_max_abs_ns,
                ds,
                if r.meets_1ms { "yes" } else { "NO" }
            );
        }
        out
    }
}
