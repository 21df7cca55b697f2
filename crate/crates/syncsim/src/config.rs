//! Run configuration: TOML file, strict keys, CLI overrides on top.
//!
//! Every knob has a default, so the empty string is a valid config for any
//! scenario once `scenario` is chosen. Unknown keys are rejected with their
//! full field path; semantic violations (drift bounds, infeasible motion
//! profiles, a jitter-shaped link where the reference station must sit on a
//! wire) are reported the same way.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::clock::{SimulatedClock, DRIFT_PPM_LIMIT};
use crate::demonstrator::MotionProfile;
use crate::netsim::LinkModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(path: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    WirelineGptp,
    PtpOverWireless,
    SfnAnchored,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::WirelineGptp => "wireline_gptp",
            ScenarioKind::PtpOverWireless => "ptp_over_wireless",
            ScenarioKind::SfnAnchored => "sfn_anchored",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wireline_gptp" => Ok(ScenarioKind::WirelineGptp),
            "ptp_over_wireless" => Ok(ScenarioKind::PtpOverWireless),
            "sfn_anchored" => Ok(ScenarioKind::SfnAnchored),
            other => Err(format!(
                "unknown scenario `{other}` (expected wireline_gptp, ptp_over_wireless or sfn_anchored)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockConfig {
    pub offset_ns: i64,
    pub drift_ppm: f64,
    pub granularity_ns: i64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig { offset_ns: 0, drift_ppm: 0.0, granularity_ns: 1 }
    }
}

impl ClockConfig {
    pub const fn new(offset_ns: i64, drift_ppm: f64, granularity_ns: i64) -> Self {
        ClockConfig { offset_ns, drift_ppm, granularity_ns }
    }

    pub fn build(&self, path: &str) -> Result<SimulatedClock, ConfigError> {
        SimulatedClock::new(self.offset_ns, self.drift_ppm, self.granularity_ns)
            .map_err(|e| invalid(path, e))
    }
}

/// Per-station clock parameters. A station absent from the file gets its
/// scenario default.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClocksConfig {
    pub gm: Option<ClockConfig>,
    pub bridge: Option<ClockConfig>,
    pub node_a: Option<ClockConfig>,
    pub node_b: Option<ClockConfig>,
    pub slave: Option<ClockConfig>,
    pub reference: Option<ClockConfig>,
    pub ue_a: Option<ClockConfig>,
    pub ue_b: Option<ClockConfig>,
}

/// Per-link delay models. Each scenario reads only the slots it wires up.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinksConfig {
    pub gm_bridge: Option<LinkModel>,
    pub bridge_node_a: Option<LinkModel>,
    pub bridge_node_b: Option<LinkModel>,
    pub wireless: Option<LinkModel>,
    pub reference: Option<LinkModel>,
    pub tuple_delivery: Option<LinkModel>,
}

pub fn default_wire() -> LinkModel {
    LinkModel::Constant { d_ns: 5_000 }
}

pub fn default_wireless() -> LinkModel {
    LinkModel::Asymmetric {
        up: Box::new(LinkModel::Normal {
            mean_ns: 6_000_000,
            sigma_ns: 2_000_000,
            floor_ns: 500_000,
        }),
        down: Box::new(LinkModel::Normal {
            mean_ns: 2_000_000,
            sigma_ns: 1_000_000,
            floor_ns: 500_000,
        }),
    }
}

pub fn default_tuple_delivery() -> LinkModel {
    LinkModel::Normal { mean_ns: 2_000_000, sigma_ns: 1_000_000, floor_ns: 500_000 }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GptpConfig {
    pub sync_interval_ns: i64,
    pub pdelay_interval_ns: i64,
    pub ratio_window: usize,
    /// Responder turnaround between request ingress and reply egress.
    pub turnaround_ns: i64,
    /// True transit time of a relayed Sync through the bridge.
    pub bridge_residence_ns: i64,
}

impl Default for GptpConfig {
    fn default() -> Self {
        GptpConfig {
            sync_interval_ns: 31_250_000,
            pdelay_interval_ns: 1_000_000_000,
            ratio_window: 4,
            turnaround_ns: 10_000,
            bridge_residence_ns: 5_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationOffsets {
    pub reference: i64,
    pub ue_a: i64,
    pub ue_b: i64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfnConfig {
    /// Publish a tuple every N-th frame.
    pub decimation: u16,
    pub staleness_ns: i64,
    pub store_capacity: usize,
    /// Reserved: the wire format identifies a pairing by frame number only,
    /// so subframe-level pairing cannot be transported. Must stay `false`.
    pub pair_per_subframe: bool,
    pub observation_offsets_ns: ObservationOffsets,
}

impl Default for SfnConfig {
    fn default() -> Self {
        SfnConfig {
            decimation: 1,
            staleness_ns: crate::sfnsync::DEFAULT_STALENESS_NS,
            store_capacity: crate::sfnsync::DEFAULT_STORE_CAPACITY,
            pair_per_subframe: false,
            observation_offsets_ns: ObservationOffsets::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Ideal,
    Standard,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemonstratorConfig {
    pub enabled: bool,
    /// Commanded start, in each carriage's own corrected local time.
    pub start_time_ns: i64,
    /// Position sampling grid in true time.
    pub grid_ns: i64,
    pub sensor: SensorKind,
    pub v_max: f64,
    pub a_max: f64,
    pub stroke_m: f64,
}

impl Default for DemonstratorConfig {
    fn default() -> Self {
        DemonstratorConfig {
            enabled: true,
            start_time_ns: 2_000_000_000,
            grid_ns: 100_000,
            sensor: SensorKind::Standard,
            v_max: 4.0,
            a_max: 30.0,
            stroke_m: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub sample_interval_ns: i64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { sample_interval_ns: 10_000_000 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub gptp: GptpConfig,
    #[serde(default)]
    pub clocks: ClocksConfig,
    #[serde(default)]
    pub links: LinksConfig,
    #[serde(default)]
    pub sfn: SfnConfig,
    #[serde(default)]
    pub demonstrator: DemonstratorConfig,
    #[serde(default)]
    pub trace: TraceConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_duration() -> f64 {
    10.0
}

/// Values a CLI layer may force over the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioKind>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
}

impl RunConfig {
    pub fn default_for(scenario: ScenarioKind) -> Self {
        RunConfig {
            scenario,
            seed: default_seed(),
            duration_s: default_duration(),
            gptp: GptpConfig::default(),
            clocks: ClocksConfig::default(),
            links: LinksConfig::default(),
            sfn: SfnConfig::default(),
            demonstrator: DemonstratorConfig::default(),
            trace: TraceConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| ConfigError::Parse { path: String::new(), message: e.to_string() })?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            ConfigError::Parse { path: e.path().to_string(), message: e.inner().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.scenario {
            self.scenario = s;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = o.duration_s {
            self.duration_s = d;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be a positive number of seconds"));
        }
        if self.gptp.sync_interval_ns <= 0 {
            return Err(invalid("gptp.sync_interval_ns", "must be > 0"));
        }
        if self.gptp.pdelay_interval_ns <= 0 {
            return Err(invalid("gptp.pdelay_interval_ns", "must be > 0"));
        }
        if self.gptp.ratio_window == 0 {
            return Err(invalid("gptp.ratio_window", "must be >= 1"));
        }
        if self.gptp.turnaround_ns < 0 {
            return Err(invalid("gptp.turnaround_ns", "must be >= 0"));
        }
        if self.gptp.bridge_residence_ns < 0 {
            return Err(invalid("gptp.bridge_residence_ns", "must be >= 0"));
        }

        for (path, clock) in self.clock_entries() {
            if let Some(c) = clock {
                if !c.drift_ppm.is_finite() || c.drift_ppm.abs() > DRIFT_PPM_LIMIT {
                    return Err(invalid(
                        &format!("clocks.{path}.drift_ppm"),
                        format!("must be within ±{DRIFT_PPM_LIMIT} ppm"),
                    ));
                }
                if c.granularity_ns < 1 {
                    return Err(invalid(
                        &format!("clocks.{path}.granularity_ns"),
                        "must be >= 1 ns",
                    ));
                }
            }
        }

        for (path, link) in self.link_entries() {
            if let Some(model) = link {
                model.validate().map_err(|e| invalid(&format!("links.{path}"), e))?;
            }
        }

        if self.sfn.decimation == 0 {
            return Err(invalid("sfn.decimation", "must be >= 1"));
        }
        if self.sfn.staleness_ns <= 0 {
            return Err(invalid("sfn.staleness_ns", "must be > 0"));
        }
        if self.sfn.store_capacity == 0 {
            return Err(invalid("sfn.store_capacity", "must be >= 1"));
        }
        let obs = self.sfn.observation_offsets_ns;
        for (path, value) in [
            ("reference", obs.reference),
            ("ue_a", obs.ue_a),
            ("ue_b", obs.ue_b),
        ] {
            if value < 0 {
                return Err(invalid(
                    &format!("sfn.observation_offsets_ns.{path}"),
                    "must be >= 0 (a propagation delay)",
                ));
            }
        }
        if self.sfn.pair_per_subframe {
            return Err(invalid(
                "sfn.pair_per_subframe",
                "unsupported: the 15-byte tuple message carries a frame number only, \
                 so subframe-level pairings cannot be published",
            ));
        }

        if self.scenario == ScenarioKind::SfnAnchored {
            if let Some(model) = &self.links.reference {
                let wireline =
                    matches!(model, LinkModel::Constant { .. } | LinkModel::Uniform { .. });
                if !wireline {
                    return Err(invalid(
                        "links.reference",
                        "the reference station must sit on a wireline link \
                         (constant or uniform delay model)",
                    ));
                }
            }
        }

        if self.demonstrator.enabled {
            let d = &self.demonstrator;
            MotionProfile::new(d.v_max, d.a_max, d.stroke_m)
                .map_err(|e| invalid("demonstrator", e))?;
            if d.grid_ns <= 0 {
                return Err(invalid("demonstrator.grid_ns", "must be > 0"));
            }
            if d.start_time_ns < 0 {
                return Err(invalid("demonstrator.start_time_ns", "must be >= 0"));
            }
        }

        if self.trace.sample_interval_ns <= 0 {
            return Err(invalid("trace.sample_interval_ns", "must be > 0"));
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> i64 {
        (self.duration_s * 1e9).round() as i64
    }

    fn clock_entries(&self) -> [(&'static str, Option<ClockConfig>); 8] {
        let c = &self.clocks;
        [
            ("gm", c.gm),
            ("bridge", c.bridge),
            ("node_a", c.node_a),
            ("node_b", c.node_b),
            ("slave", c.slave),
            ("reference", c.reference),
            ("ue_a", c.ue_a),
            ("ue_b", c.ue_b),
        ]
    }

    fn link_entries(&self) -> [(&'static str, Option<&LinkModel>); 6] {
        let l = &self.links;
        [
            ("gm_bridge", l.gm_bridge.as_ref()),
            ("bridge_node_a", l.bridge_node_a.as_ref()),
            ("bridge_node_b", l.bridge_node_b.as_ref()),
            ("wireless", l.wireless.as_ref()),
            ("reference", l.reference.as_ref()),
            ("tuple_delivery", l.tuple_delivery.as_ref()),
        ]
    }
}
