//! Browser-facing operations, each returning a JSON string so the page needs
//! no binding glue beyond `JSON.parse`. Errors come back as
//! `{"error": "..."}`. The functions are plain Rust so they test on the host;
//! the wasm exports are thin wrappers in [`bindings`].

use serde::Serialize;

use syncsim::config::{RunConfig, ScenarioKind};
use syncsim::demonstrator::{sample_runs, CarriageRun, MotionProfile, SensorModel};
use syncsim::netsim::stream_rng;
use syncsim::scenario::run_scenario_capture;
use syncsim::summary::compare;
use syncsim::trace::{RowKind, TraceRow};

#[cfg(target_arch = "wasm32")]
mod bindings;

const MAX_DURATION_S: f64 = 30.0;

#[derive(Serialize)]
struct ErrorOut<'m> {
    error: &'m str,
}

fn err_json(message: &str) -> String {
    serde_json::to_string(&ErrorOut { error: message }).expect("error serializes")
}

fn ok_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| err_json(&e.to_string()))
}

fn checked_duration(duration_s: f64) -> Result<f64, String> {
    if !(duration_s > 0.0 && duration_s <= MAX_DURATION_S) {
        return Err(format!(
            "duration must be in (0, {MAX_DURATION_S}] seconds, got {duration_s}"
        ));
    }
    Ok(duration_s)
}

#[derive(Serialize)]
struct StationOut {
    name: String,
    max_abs_ns: i64,
    steady_max_ns: Option<i64>,
    corrections: u64,
    /// `[t_ms, offset_us]` pairs, decimated for drawing.
    points: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct TraceOut {
    scenario: String,
    seed: u64,
    duration_s: f64,
    stations: Vec<StationOut>,
}

struct PlotPoint {
    t_ms: f64,
    v_us: f64,
    /// Correction rows and their same-instant pre-correction samples carry
    /// the sawtooth shape; decimation spares them first.
    key: bool,
}

fn decimate(points: Vec<PlotPoint>, max_points: usize) -> Vec<(f64, f64)> {
    if points.len() <= max_points {
        return points.into_iter().map(|p| (p.t_ms, p.v_us)).collect();
    }
    let n_key = points.iter().filter(|p| p.key).count();
    let n_plain = points.len() - n_key;
    let plain_budget = max_points.saturating_sub(n_key).max(max_points / 4).max(1);
    let stride = n_plain.div_ceil(plain_budget).max(1);
    let mut plain_seen = 0usize;
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(max_points + n_key);
    for p in &points {
        let keep = if p.key {
            true
        } else {
            plain_seen += 1;
            (plain_seen - 1) % stride == 0
        };
        if keep {
            kept.push((p.t_ms, p.v_us));
        }
    }
    if kept.len() > max_points {
        let stride2 = kept.len().div_ceil(max_points);
        let last = kept.len() - 1;
        kept = kept
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % stride2 == 0 || *i == last)
            .map(|(_, p)| p)
            .collect();
    }
    kept
}

fn station_points(rows: &[&TraceRow], max_points: usize) -> Vec<(f64, f64)> {
    let plot: Vec<PlotPoint> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let paired_sample = rows.get(i + 1).is_some_and(|n| {
                n.sim_time_ns == r.sim_time_ns && n.kind() != RowKind::Sample
            });
            PlotPoint {
                t_ms: r.sim_time_ns as f64 * 1e-6,
                v_us: r.true_offset_ns as f64 * 1e-3,
                key: r.kind() != RowKind::Sample || paired_sample,
            }
        })
        .collect();
    decimate(plot, max_points)
}

/// Offset-against-time series for every traced station of one scenario run.
pub fn offset_trace_json(scenario: &str, seed: u64, duration_s: f64, max_points: usize) -> String {
    let kind: ScenarioKind = match scenario.parse() {
        Ok(k) => k,
        Err(_) => {
            return err_json(&format!(
                "unknown scenario {scenario:?}; expected wireline_gptp, \
                 ptp_over_wireless or sfn_anchored"
            ))
        }
    };
    let duration_s = match checked_duration(duration_s) {
        Ok(d) => d,
        Err(e) => return err_json(&e),
    };
    let max_points = max_points.clamp(16, 20_000);

    let mut cfg = RunConfig::default_for(kind);
    cfg.seed = seed;
    cfg.duration_s = duration_s;
    cfg.demonstrator.enabled = false;
    let run = match run_scenario_capture(&cfg) {
        Ok(r) => r,
        Err(e) => return err_json(&e.to_string()),
    };

    let stations = run
        .summary
        .nodes
        .iter()
        .map(|n| {
            let rows: Vec<&TraceRow> =
                run.rows.iter().filter(|r| r.ue_id == n.node).collect();
            StationOut {
                name: n.node.clone(),
                max_abs_ns: n.max_abs_true_offset_ns,
                steady_max_ns: n.steady_max_abs_true_offset_ns,
                corrections: n.corrections,
                points: station_points(&rows, max_points),
            }
        })
        .collect();
    ok_json(&TraceOut { scenario: kind.as_str().to_string(), seed, duration_s, stations })
}

#[derive(Serialize)]
struct ComparisonRowOut {
    scenario: String,
    worst_node: String,
    steady_max_ns: Option<i64>,
    max_abs_ns: i64,
    meets_1ms: bool,
}

#[derive(Serialize)]
struct ComparisonStationOut {
    scenario: String,
    name: String,
    max_abs_ns: i64,
    steady_max_ns: Option<i64>,
    corrections: u64,
    p99_abs_ns: i64,
}

#[derive(Serialize)]
struct ComparisonOut {
    seed: u64,
    duration_s: f64,
    rows: Vec<ComparisonRowOut>,
    stations: Vec<ComparisonStationOut>,
}

/// Direct PTP over the wireless link against the frame-anchored scheme,
/// same seed and duration.
pub fn scheme_comparison_json(seed: u64, duration_s: f64) -> String {
    let duration_s = match checked_duration(duration_s) {
        Ok(d) => d,
        Err(e) => return err_json(&e),
    };
    let mut summaries = Vec::with_capacity(2);
    for kind in [ScenarioKind::PtpOverWireless, ScenarioKind::SfnAnchored] {
        let mut cfg = RunConfig::default_for(kind);
        cfg.seed = seed;
        cfg.duration_s = duration_s;
        cfg.demonstrator.enabled = false;
        match run_scenario_capture(&cfg) {
            Ok(run) => summaries.push(run.summary),
            Err(e) => return err_json(&e.to_string()),
        }
    }
    let cmp = match compare(&summaries) {
        Ok(c) => c,
        Err(e) => return err_json(&e.to_string()),
    };
    let rows = cmp
        .rows
        .iter()
        .map(|r| ComparisonRowOut {
            scenario: r.scenario.clone(),
            worst_node: r.worst_node.clone(),
            steady_max_ns: r.worst_steady_max_ns,
            max_abs_ns: r.worst_max_abs_ns,
            meets_1ms: r.meets_1ms,
        })
        .collect();
    let stations = summaries
        .iter()
        .flat_map(|s| {
            s.nodes.iter().map(|n| ComparisonStationOut {
                scenario: s.scenario.clone(),
                name: n.node.clone(),
                max_abs_ns: n.max_abs_true_offset_ns,
                steady_max_ns: n.steady_max_abs_true_offset_ns,
                corrections: n.corrections,
                p99_abs_ns: n.p99_abs_true_offset_ns,
            })
        })
        .collect();
    ok_json(&ComparisonOut { seed, duration_s, rows, stations })
}

#[derive(Serialize)]
struct CarriageOut {
    commanded_dt_us: f64,
    ds_max_um: f64,
    ds_max_quantized_um: f64,
    recovered_dt_us: f64,
    t_at_max_ms: f64,
    in_cruise: bool,
    total_time_s: f64,
    /// `[t_ms, gap_um]` pairs of the ideal gap, decimated for drawing.
    points: Vec<(f64, f64)>,
}

/// Two identical trapezoidal strokes started `start_skew_us` apart: the
/// position gap over time plus the peak-gap statistics.
pub fn carriage_gap_json(
    start_skew_us: f64,
    v_max_m_s: f64,
    a_max_m_s2: f64,
    stroke_m: f64,
    grid_us: f64,
) -> String {
    if !(start_skew_us.is_finite() && start_skew_us.abs() <= 1_000_000.0) {
        return err_json("start skew must be finite and at most 1 s");
    }
    if !(grid_us >= 0.1 && grid_us <= 100_000.0) {
        return err_json("sampling grid must be in [0.1, 100000] us");
    }
    let profile = match MotionProfile::new(v_max_m_s, a_max_m_s2, stroke_m) {
        Ok(p) => p,
        Err(e) => return err_json(&e.to_string()),
    };
    let skew_ns = (start_skew_us * 1_000.0).round() as i64;
    let grid_ns = ((grid_us * 1_000.0).round() as i64).max(1);
    let run1 = CarriageRun { profile, actual_start_true_ns: 0 };
    let run2 = CarriageRun { profile, actual_start_true_ns: skew_ns };
    let mut rng = stream_rng(0, 101);
    let (samples, stats) = sample_runs(&run1, &run2, &SensorModel::ideal(), grid_ns, &mut rng);

    let points = decimate(
        samples
            .iter()
            .map(|s| PlotPoint {
                t_ms: s.t_ns as f64 * 1e-6,
                v_us: s.ds_m * 1e6,
                key: false,
            })
            .collect(),
        4_000,
    );
    ok_json(&CarriageOut {
        commanded_dt_us: start_skew_us,
        ds_max_um: stats.ds_max_m * 1e6,
        ds_max_quantized_um: stats.ds_max_quantized_m * 1e6,
        recovered_dt_us: stats.recovered_dt_s * 1e6,
        t_at_max_ms: stats.t_at_max_ns as f64 * 1e-6,
        in_cruise: stats.max_in_cruise_overlap,
        total_time_s: profile.total_time_s(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).expect("valid json")
    }

    #[test]
    fn offset_trace_reports_all_stations() {
        let v = parse(&offset_trace_json("sfn_anchored", 5, 3.0, 500));
        assert!(v.get("error").is_none(), "{v}");
        let stations = v["stations"].as_array().unwrap();
        let names: Vec<&str> =
            stations.iter().map(|s| s["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["reference", "ue_a", "ue_b"]);
        for s in stations {
            let points = s["points"].as_array().unwrap();
            assert!(!points.is_empty() && points.len() <= 700, "{}", points.len());
            let times: Vec<f64> =
                points.iter().map(|p| p[0].as_f64().unwrap()).collect();
            assert!(times.windows(2).all(|w| w[0] <= w[1]), "time not sorted");
            assert!(s["steady_max_ns"].as_i64().unwrap() < 1_000_000);
        }
    }

    #[test]
    fn offset_trace_rejects_bad_input() {
        assert!(parse(&offset_trace_json("nope", 1, 3.0, 500))["error"]
            .as_str()
            .unwrap()
            .contains("unknown scenario"));
        assert!(parse(&offset_trace_json("sfn_anchored", 1, 0.0, 500))["error"]
            .as_str()
            .unwrap()
            .contains("duration"));
    }

    #[test]
    fn comparison_orders_the_schemes() {
        let v = parse(&scheme_comparison_json(5, 3.0));
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["scenario"], "ptp_over_wireless");
        assert_eq!(rows[1]["scenario"], "sfn_anchored");
        assert_eq!(rows[0]["meets_1ms"], false);
        assert_eq!(rows[1]["meets_1ms"], true);
        let direct = rows[0]["steady_max_ns"].as_i64().unwrap();
        let anchored = rows[1]["steady_max_ns"].as_i64().unwrap();
        assert!(anchored < direct);
        assert_eq!(v["stations"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn carriage_gap_matches_closed_form() {
        let v = parse(&carriage_gap_json(550.0, 4.0, 30.0, 1.0, 1.0));
        assert!(v.get("error").is_none(), "{v}");
        let ds = v["ds_max_um"].as_f64().unwrap();
        assert!((ds - 2_200.0).abs() <= 4.0, "{ds}");
        let dt = v["recovered_dt_us"].as_f64().unwrap();
        assert!((dt - 550.0).abs() <= 1.0, "{dt}");
        assert_eq!(v["in_cruise"], true);
        assert!(v["points"].as_array().unwrap().len() <= 4_000);
    }

    #[test]
    fn carriage_gap_rejects_infeasible_profiles() {
        let v = parse(&carriage_gap_json(100.0, 10.0, 1.0, 0.5, 100.0));
        assert!(v["error"].as_str().unwrap().contains("trapezoid"), "{v}");
    }

    #[test]
    fn outputs_are_deterministic() {
        assert_eq!(
            offset_trace_json("ptp_over_wireless", 9, 2.0, 300),
            offset_trace_json("ptp_over_wireless", 9, 2.0, 300)
        );
        assert_eq!(scheme_comparison_json(9, 2.0), scheme_comparison_json(9, 2.0));
    }
}
