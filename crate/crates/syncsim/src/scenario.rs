//! Topology assembly and the event loop for the three built-in scenarios.
//!
//! `wireline_gptp`: grandmaster -> bridge -> two end stations, everything on
//! constant-delay wire. `ptp_over_wireless`: grandmaster -> one slave across
//! a jittery asymmetric link. `sfn_anchored`: grandmaster -> wireline
//! reference station (gPTP), a gNB broadcasting frame boundaries to the
//! reference and two UEs, and published (SFN, time) tuples correcting the UE
//! clocks over an arbitrary delivery link.
//!
//! The reference station publishes only after its own first gPTP correction:
//! before that it has no trustworthy network time to pair frames with.
//!
//! Every correction appends two trace rows at the same instant, a plain
//! sample carrying the pre-correction offset followed by the correction row
//! with the post-correction offset, so traces capture the sawtooth peaks
//! exactly.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::clock::{SimTime, SimulatedClock};
use crate::config::{
    default_tuple_delivery, default_wire, default_wireless, ClockConfig, ConfigError, RunConfig,
    ScenarioKind, SensorKind,
};
use crate::demonstrator::{
    sample_runs, CarriageRun, MotionProfile, MotionStats, SensorModel,
};
use crate::gptp::{
    ingress_rewrite, residence_rewrite, GptpMessage, GptpPayload, PdelayInitiator,
    PdelayResponder, SlavePort, SyncCompletion, SyncMaster,
};
use crate::netsim::{
    stream_rng, Delivery, Direction, Link, NetsimError, NodeId, Simulator,
};
use crate::pubsub::{self, MESSAGE_LEN};
use crate::radioframe::{broadcast_frame, GnbBroadcaster, SfnCounter, FRAME_NS};
use crate::sfnsync::{ue_on_tuple, ReferencePublisher, SfnStore, TupleOutcome};
use crate::summary::{summarize, write_summary, MotionSummary, RunSummary, SummaryError};
use crate::trace::{write_positions, write_trace, TraceRow};

const GM: NodeId = 0;
/// Pseudo-node receiving the periodic trace-sampling event.
const SAMPLER: NodeId = 100;
/// PRNG stream for the position sensor, outside the 2*link_id space.
const SENSOR_STREAM: u64 = 101;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(
        "carriage at {node} never saw its clock reach the commanded start \
         {target_ns} ns before the run ended"
    )]
    StartNotReached { node: String, target_ns: i64 },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything one run produces, kept in memory.
#[derive(Debug)]
pub struct CapturedRun {
    pub rows: Vec<TraceRow>,
    pub trace_csv: String,
    pub positions_csv: Option<String>,
    pub motion: Option<MotionStats>,
    pub summary: RunSummary,
    pub summary_csv: String,
}

/// Files written by [`run_scenario`].
pub struct RunPaths {
    pub trace: PathBuf,
    pub positions: Option<PathBuf>,
    pub summary: PathBuf,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    SyncEgress,
    SyncIngress(GptpMessage),
    FollowUpIngress(GptpMessage),
    RelayEgress { seq_id: u16 },
    PdelayKick,
    PdelayReqIngress { from: NodeId, msg: GptpMessage },
    PdelayReplyEgress { to: NodeId },
    PdelayRespIngress(GptpMessage),
    PdelayRespFuIngress(GptpMessage),
    FrameBoundary,
    FrameObserve(SfnCounter),
    TupleDeliver([u8; MESSAGE_LEN]),
    Sample,
}

struct Station {
    name: &'static str,
    clock: SimulatedClock,
    traced: bool,
    /// Clock state history: each entry rules from its instant until the next
    /// entry. Index 0 is the initial state at t = 0.
    history: Vec<(SimTime, SimulatedClock)>,
}

impl Station {
    fn new(name: &'static str, clock: SimulatedClock, traced: bool) -> Self {
        Station { name, clock, traced, history: vec![(SimTime::ZERO, clock)] }
    }

    fn step(&mut self, delta_ns: i64, now: SimTime) {
        self.clock.step_adjust(delta_ns, now);
        self.history.push((now, self.clock));
    }
}

struct MasterRole {
    master: SyncMaster,
    downstream: Vec<NodeId>,
}

/// A station with an upstream time source. The pure relay has no port: it
/// forwards time without disciplining its own clock.
struct SlaveRole {
    upstream: NodeId,
    port: Option<SlavePort>,
    init: PdelayInitiator,
}

struct RelayState {
    in_local: i64,
    out_local: Option<i64>,
    held_fu: Option<GptpMessage>,
}

struct RelayRole {
    node: NodeId,
    downstream: Vec<NodeId>,
    seqs: HashMap<u16, RelayState>,
}

struct World {
    scenario: String,
    stations: Vec<Station>,
    /// Physical links keyed (upstream node, downstream node).
    links: HashMap<(NodeId, NodeId), Link>,
    master: Option<MasterRole>,
    slaves: HashMap<NodeId, SlaveRole>,
    responders: HashMap<(NodeId, NodeId), PdelayResponder>,
    relay: Option<RelayRole>,
    gnb: Option<(NodeId, GnbBroadcaster)>,
    observers: Vec<(NodeId, i64)>,
    publisher: Option<(NodeId, ReferencePublisher)>,
    publisher_armed: bool,
    tuple_links: Vec<(NodeId, Link)>,
    stores: HashMap<NodeId, SfnStore>,
    staleness_ns: i64,
    pdelay_interval_ns: i64,
    turnaround_ns: i64,
    bridge_residence_ns: i64,
    sample_interval_ns: i64,
    rows: Vec<TraceRow>,
    failed: Option<NetsimError>,
}

fn clock_or(explicit: Option<ClockConfig>, fallback: ClockConfig, path: &str) -> Result<SimulatedClock, ConfigError> {
    explicit.unwrap_or(fallback).build(path)
}

fn build_world(cfg: &RunConfig) -> Result<(World, Simulator<Event>), ScenarioError> {
    let seed = cfg.seed;
    let mut sim: Simulator<Event> = Simulator::new();
    let mut world = World {
        scenario: cfg.scenario.as_str().to_string(),
        stations: Vec::new(),
        links: HashMap::new(),
        master: None,
        slaves: HashMap::new(),
        responders: HashMap::new(),
        relay: None,
        gnb: None,
        observers: Vec::new(),
        publisher: None,
        publisher_armed: false,
        tuple_links: Vec::new(),
        stores: HashMap::new(),
        staleness_ns: cfg.sfn.staleness_ns,
        pdelay_interval_ns: cfg.gptp.pdelay_interval_ns,
        turnaround_ns: cfg.gptp.turnaround_ns,
        bridge_residence_ns: cfg.gptp.bridge_residence_ns,
        sample_interval_ns: cfg.trace.sample_interval_ns,
        rows: Vec::new(),
        failed: None,
    };

    let gm_clock = clock_or(cfg.clocks.gm, ClockConfig::new(0, 0.0, 1), "clocks.gm")?;
    world.stations.push(Station::new("gm", gm_clock, false));

    let window = cfg.gptp.ratio_window;
    let new_init = |granularity_ns: i64| {
        PdelayInitiator::new(window, granularity_ns).expect("window validated >= 1")
    };
    let initiators: Vec<NodeId>;

    match cfg.scenario {
        ScenarioKind::WirelineGptp => {
            const BRIDGE: NodeId = 1;
            const NODE_A: NodeId = 2;
            const NODE_B: NodeId = 3;
            let bridge = clock_or(
                cfg.clocks.bridge,
                ClockConfig::new(1_500_000, -5.0, 8),
                "clocks.bridge",
            )?;
            let node_a = clock_or(
                cfg.clocks.node_a,
                ClockConfig::new(-3_000_000, 10.0, 8),
                "clocks.node_a",
            )?;
            let node_b = clock_or(
                cfg.clocks.node_b,
                ClockConfig::new(2_000_000, -10.0, 8),
                "clocks.node_b",
            )?;
            world.stations.push(Station::new("bridge", bridge, false));
            world.stations.push(Station::new("node_a", node_a, true));
            world.stations.push(Station::new("node_b", node_b, true));

            let wire = |slot: &Option<crate::netsim::LinkModel>, id: u64| {
                Link::new(slot.clone().unwrap_or_else(default_wire), seed, id)
                    .expect("link model validated")
            };
            world.links.insert((GM, BRIDGE), wire(&cfg.links.gm_bridge, 0));
            world.links.insert((BRIDGE, NODE_A), wire(&cfg.links.bridge_node_a, 1));
            world.links.insert((BRIDGE, NODE_B), wire(&cfg.links.bridge_node_b, 2));

            world.master = Some(MasterRole {
                master: SyncMaster::new(cfg.gptp.sync_interval_ns).expect("interval validated"),
                downstream: vec![BRIDGE],
            });
            world.slaves.insert(
                BRIDGE,
                SlaveRole {
                    upstream: GM,
                    port: None,
                    init: new_init(bridge.granularity_ns()),
                },
            );
            world.slaves.insert(
                NODE_A,
                SlaveRole {
                    upstream: BRIDGE,
                    port: Some(SlavePort::new()),
                    init: new_init(node_a.granularity_ns()),
                },
            );
            world.slaves.insert(
                NODE_B,
                SlaveRole {
                    upstream: BRIDGE,
                    port: Some(SlavePort::new()),
                    init: new_init(node_b.granularity_ns()),
                },
            );
            world.relay = Some(RelayRole {
                node: BRIDGE,
                downstream: vec![NODE_A, NODE_B],
                seqs: HashMap::new(),
            });
            initiators = vec![BRIDGE, NODE_A, NODE_B];
        }
        ScenarioKind::PtpOverWireless => {
            const SLAVE: NodeId = 1;
            let slave = clock_or(
                cfg.clocks.slave,
                ClockConfig::new(-3_000_000, 10.0, 8),
                "clocks.slave",
            )?;
            world.stations.push(Station::new("slave", slave, true));
            let model = cfg.links.wireless.clone().unwrap_or_else(default_wireless);
            world
                .links
                .insert((GM, SLAVE), Link::new(model, seed, 0).expect("link model validated"));
            world.master = Some(MasterRole {
                master: SyncMaster::new(cfg.gptp.sync_interval_ns).expect("interval validated"),
                downstream: vec![SLAVE],
            });
            world.slaves.insert(
                SLAVE,
                SlaveRole {
                    upstream: GM,
                    port: Some(SlavePort::new()),
                    init: new_init(slave.granularity_ns()),
                },
            );
            initiators = vec![SLAVE];
        }
        ScenarioKind::SfnAnchored => {
            const REFERENCE: NodeId = 1;
            const UE_A: NodeId = 2;
            const UE_B: NodeId = 3;
            const GNB: NodeId = 4;
            let reference = clock_or(
                cfg.clocks.reference,
                ClockConfig::new(-2_000_000, 10.0, 8),
                "clocks.reference",
            )?;
            let ue_a = clock_or(
                cfg.clocks.ue_a,
                ClockConfig::new(-3_000_000, 10.0, 8),
                "clocks.ue_a",
            )?;
            let ue_b = clock_or(
                cfg.clocks.ue_b,
                ClockConfig::new(2_000_000, -10.0, 8),
                "clocks.ue_b",
            )?;
            world.stations.push(Station::new("reference", reference, true));
            world.stations.push(Station::new("ue_a", ue_a, true));
            world.stations.push(Station::new("ue_b", ue_b, true));

            let ref_model = cfg.links.reference.clone().unwrap_or_else(default_wire);
            world
                .links
                .insert((GM, REFERENCE), Link::new(ref_model, seed, 0).expect("validated"));
            world.master = Some(MasterRole {
                master: SyncMaster::new(cfg.gptp.sync_interval_ns).expect("interval validated"),
                downstream: vec![REFERENCE],
            });
            world.slaves.insert(
                REFERENCE,
                SlaveRole {
                    upstream: GM,
                    port: Some(SlavePort::new()),
                    init: new_init(reference.granularity_ns()),
                },
            );
            initiators = vec![REFERENCE];

            world.gnb = Some((GNB, GnbBroadcaster::new(SfnCounter::default())));
            let obs = cfg.sfn.observation_offsets_ns;
            world.observers = vec![
                (REFERENCE, obs.reference),
                (UE_A, obs.ue_a),
                (UE_B, obs.ue_b),
            ];
            world.publisher = Some((
                REFERENCE,
                ReferencePublisher::new(cfg.sfn.decimation).expect("decimation validated"),
            ));
            let tuple_model = cfg.links.tuple_delivery.clone().unwrap_or_else(default_tuple_delivery);
            world.tuple_links = vec![
                (UE_A, Link::new(tuple_model.clone(), seed, 3).expect("validated")),
                (UE_B, Link::new(tuple_model, seed, 4).expect("validated")),
            ];
            world
                .stores
                .insert(UE_A, SfnStore::new(cfg.sfn.store_capacity).expect("capacity validated"));
            world
                .stores
                .insert(UE_B, SfnStore::new(cfg.sfn.store_capacity).expect("capacity validated"));
            sim.schedule(SimTime::ZERO, GNB, Event::FrameBoundary)?;
        }
    }

    for node in initiators {
        sim.schedule(SimTime::ZERO, node, Event::PdelayKick)?;
    }
    sim.schedule(SimTime::from_ns(cfg.gptp.sync_interval_ns), GM, Event::SyncEgress)?;
    sim.schedule(SimTime::ZERO, SAMPLER, Event::Sample)?;
    Ok((world, sim))
}

impl World {
    fn true_offset_of(&self, s: NodeId, now: SimTime) -> i64 {
        self.stations[s as usize]
            .clock
            .true_offset(&self.stations[GM as usize].clock, now)
    }

    fn base_row(&self, s: NodeId, now: SimTime, true_offset_ns: i64) -> TraceRow {
        TraceRow {
            scenario: self.scenario.clone(),
            ue_id: self.stations[s as usize].name.to_string(),
            sim_time_ns: now.ns(),
            sfn: None,
            applied_offset_ns: None,
            tuple_age_ns: None,
            true_offset_ns,
        }
    }

    fn send_link(
        &mut self,
        sim: &mut Simulator<Event>,
        up: NodeId,
        down: NodeId,
        dir: Direction,
        to: NodeId,
        ev: Event,
    ) -> Result<(), NetsimError> {
        let link = self.links.get_mut(&(up, down)).expect("link wired at build time");
        let delay = link.sample(dir);
        sim.schedule_in(delay, to, ev)
    }

    /// Non-provisional completions step the station clock by the negated
    /// measured offset and append the pre/post row pair.
    fn apply_sync_completion(&mut self, s: NodeId, c: SyncCompletion, now: SimTime) {
        if c.provisional {
            return;
        }
        let pre = self.true_offset_of(s, now);
        self.rows.push(self.base_row(s, now, pre));
        let delta = -c.offset_ns;
        self.stations[s as usize].step(delta, now);
        if delta != 0 {
            // The step just invalidated any peer-delay span in progress.
            if let Some(role) = self.slaves.get_mut(&s) {
                role.init.flush_after_step();
            }
        }
        let post = self.true_offset_of(s, now);
        let mut row = self.base_row(s, now, post);
        row.applied_offset_ns = Some(delta);
        self.rows.push(row);
        if self.publisher.as_ref().is_some_and(|(p, _)| *p == s) {
            self.publisher_armed = true;
        }
    }

    fn forward_follow_up(
        &mut self,
        sim: &mut Simulator<Event>,
        bridge: NodeId,
        mut fu: GptpMessage,
        in_local: i64,
        out_local: i64,
    ) -> Result<(), NetsimError> {
        let role = self.slaves.get(&bridge).expect("relay has an upstream role");
        let upstream_delay = role.init.estimate().map(|e| e.delay_ns).unwrap_or(0);
        let nrr = role.init.rate_ratio();
        ingress_rewrite(&mut fu, upstream_delay, nrr);
        residence_rewrite(&mut fu, out_local - in_local);
        let downstream = self.relay.as_ref().expect("relay role").downstream.clone();
        for d in downstream {
            self.send_link(sim, bridge, d, Direction::Down, d, Event::FollowUpIngress(fu))?;
        }
        Ok(())
    }

    fn handle(
        &mut self,
        sim: &mut Simulator<Event>,
        d: Delivery<Event>,
    ) -> Result<(), NetsimError> {
        let now = d.at;
        let s = d.to;
        match d.msg {
            Event::SyncEgress => {
                let reading = self.stations[GM as usize].clock.read(now);
                let m = self.master.as_mut().expect("master scheduled only when built");
                let (sync, fu, next_in) = m.master.emit(reading);
                let downstream = m.downstream.clone();
                for dn in downstream {
                    self.send_link(sim, GM, dn, Direction::Down, dn, Event::SyncIngress(sync))?;
                    self.send_link(sim, GM, dn, Direction::Down, dn, Event::FollowUpIngress(fu))?;
                }
                sim.schedule_in(next_in, GM, Event::SyncEgress)?;
            }
            Event::SyncIngress(msg) => {
                if self.relay.as_ref().is_some_and(|r| r.node == s) {
                    let in_local = self.stations[s as usize].clock.read(now);
                    let relay = self.relay.as_mut().expect("checked");
                    relay.seqs.insert(
                        msg.seq_id,
                        RelayState { in_local, out_local: None, held_fu: None },
                    );
                    sim.schedule_in(
                        self.bridge_residence_ns,
                        s,
                        Event::RelayEgress { seq_id: msg.seq_id },
                    )?;
                } else {
                    let ingress = self.stations[s as usize].clock.read(now);
                    let completion = {
                        let role = self.slaves.get_mut(&s).expect("sync sent to a slave");
                        let est = role.init.estimate();
                        role.port
                            .as_mut()
                            .expect("non-relay slave has a port")
                            .on_sync(msg.seq_id, ingress, est)
                    };
                    if let Some(c) = completion {
                        self.apply_sync_completion(s, c, now);
                    }
                }
            }
            Event::RelayEgress { seq_id } => {
                let out_local = self.stations[s as usize].clock.read(now);
                let (downstream, held, in_local) = {
                    let relay = self.relay.as_mut().expect("relay egress on relay node");
                    let st = relay.seqs.get_mut(&seq_id).expect("sync ingress recorded");
                    st.out_local = Some(out_local);
                    (relay.downstream.clone(), st.held_fu.take(), st.in_local)
                };
                for dn in downstream {
                    self.send_link(
                        sim,
                        s,
                        dn,
                        Direction::Down,
                        dn,
                        Event::SyncIngress(GptpMessage::new(GptpPayload::Sync, seq_id)),
                    )?;
                }
                if let Some(fu) = held {
                    self.relay.as_mut().expect("relay").seqs.remove(&seq_id);
                    self.forward_follow_up(sim, s, fu, in_local, out_local)?;
                }
            }
            Event::FollowUpIngress(msg) => {
                if self.relay.as_ref().is_some_and(|r| r.node == s) {
                    let ready = {
                        let relay = self.relay.as_mut().expect("checked");
                        match relay.seqs.get_mut(&msg.seq_id) {
                            // Residence still running: hold until Sync egress.
                            Some(st) if st.out_local.is_none() => {
                                st.held_fu = Some(msg);
                                None
                            }
                            Some(st) => {
                                let pair = (st.in_local, st.out_local.expect("checked"));
                                relay.seqs.remove(&msg.seq_id);
                                Some(pair)
                            }
                            // Unknown sequence (Sync lost): nothing to anchor to.
                            None => None,
                        }
                    };
                    if let Some((in_local, out_local)) = ready {
                        self.forward_follow_up(sim, s, msg, in_local, out_local)?;
                    }
                } else {
                    let completion = {
                        let role = self.slaves.get_mut(&s).expect("follow-up sent to a slave");
                        let est = role.init.estimate();
                        // A pairing that failed for good is dropped, exactly
                        // like a lost frame.
                        role.port
                            .as_mut()
                            .expect("non-relay slave has a port")
                            .on_follow_up(&msg, est)
                            .unwrap_or(None)
                    };
                    if let Some(c) = completion {
                        self.apply_sync_completion(s, c, now);
                    }
                }
            }
            Event::PdelayKick => {
                let t1 = self.stations[s as usize].clock.read(now);
                let (req, up) = {
                    let role = self.slaves.get_mut(&s).expect("kick sent to an initiator");
                    (role.init.start_exchange(t1), role.upstream)
                };
                self.send_link(
                    sim,
                    up,
                    s,
                    Direction::Up,
                    up,
                    Event::PdelayReqIngress { from: s, msg: req },
                )?;
                sim.schedule_in(self.pdelay_interval_ns, s, Event::PdelayKick)?;
            }
            Event::PdelayReqIngress { from, msg } => {
                let t2 = self.stations[s as usize].clock.read(now);
                self.responders.entry((s, from)).or_default().on_req(&msg, t2);
                sim.schedule_in(self.turnaround_ns, s, Event::PdelayReplyEgress { to: from })?;
            }
            Event::PdelayReplyEgress { to } => {
                let t3 = self.stations[s as usize].clock.read(now);
                let replies = self
                    .responders
                    .get_mut(&(s, to))
                    .and_then(|r| r.emit_replies(t3));
                if let Some((resp, fu)) = replies {
                    self.send_link(sim, s, to, Direction::Down, to, Event::PdelayRespIngress(resp))?;
                    self.send_link(
                        sim,
                        s,
                        to,
                        Direction::Down,
                        to,
                        Event::PdelayRespFuIngress(fu),
                    )?;
                }
            }
            Event::PdelayRespIngress(msg) => {
                let t4 = self.stations[s as usize].clock.read(now);
                if let Some(role) = self.slaves.get_mut(&s) {
                    role.init.on_resp(&msg, t4);
                }
            }
            Event::PdelayRespFuIngress(msg) => {
                if let Some(role) = self.slaves.get_mut(&s) {
                    role.init.on_resp_follow_up(&msg);
                }
            }
            Event::FrameBoundary => {
                let (gid, gnb) = self.gnb.as_mut().expect("frame boundary on gnb");
                broadcast_frame(sim, gnb, &self.observers, Event::FrameObserve)?;
                sim.schedule_in(FRAME_NS, *gid, Event::FrameBoundary)?;
            }
            Event::FrameObserve(counter) => {
                let reading = self.stations[s as usize].clock.read(now);
                let publishes = self.publisher.as_ref().is_some_and(|(p, _)| *p == s);
                if publishes && self.publisher_armed {
                    let tuple = self
                        .publisher
                        .as_ref()
                        .expect("checked")
                        .1
                        .on_sfn(counter.sfn(), reading);
                    if let Some(tuple) = tuple {
                        let bytes = pubsub::encode(tuple);
                        pubsub::multicast_publish(
                            sim,
                            bytes,
                            &mut self.tuple_links,
                            Event::TupleDeliver,
                        )?;
                    }
                }
                if let Some(store) = self.stores.get_mut(&s) {
                    store.record(counter.sfn(), reading, now);
                }
            }
            Event::TupleDeliver(bytes) => {
                let Ok(tuple) = pubsub::decode(&bytes) else {
                    return Ok(());
                };
                let mut clock = self.stations[s as usize].clock;
                let outcome = {
                    let store = self.stores.get_mut(&s).expect("tuple sent to a UE");
                    ue_on_tuple(store, tuple, &mut clock, now, self.staleness_ns)
                };
                match outcome {
                    TupleOutcome::Applied { sfn, offset_ns, tuple_age_ns } => {
                        let pre = self.true_offset_of(s, now);
                        self.rows.push(self.base_row(s, now, pre));
                        self.stations[s as usize].clock = clock;
                        self.stations[s as usize].history.push((now, clock));
                        let post = self.true_offset_of(s, now);
                        let mut row = self.base_row(s, now, post);
                        row.sfn = Some(sfn);
                        row.applied_offset_ns = Some(offset_ns);
                        row.tuple_age_ns = Some(tuple_age_ns);
                        self.rows.push(row);
                    }
                    TupleOutcome::NoMatchingSfn { sfn } => {
                        let cur = self.true_offset_of(s, now);
                        let mut row = self.base_row(s, now, cur);
                        row.sfn = Some(sfn);
                        self.rows.push(row);
                    }
                    TupleOutcome::StaleRecord { sfn, tuple_age_ns } => {
                        let cur = self.true_offset_of(s, now);
                        let mut row = self.base_row(s, now, cur);
                        row.sfn = Some(sfn);
                        row.tuple_age_ns = Some(tuple_age_ns);
                        self.rows.push(row);
                    }
                }
            }
            Event::Sample => {
                for idx in 0..self.stations.len() {
                    if self.stations[idx].traced {
                        let off = self.true_offset_of(idx as NodeId, now);
                        let row = self.base_row(idx as NodeId, now, off);
                        self.rows.push(row);
                    }
                }
                sim.schedule_in(self.sample_interval_ns, SAMPLER, Event::Sample)?;
            }
        }
        Ok(())
    }
}

/// True instant at which a stepped clock first reads `target_local_ns`,
/// walking the adjustment history in order.
fn start_crossing(history: &[(SimTime, SimulatedClock)], target_local_ns: i64) -> i64 {
    for (i, (seg_start, clk)) in history.iter().enumerate() {
        let cross = clk.when_reads_at_least(target_local_ns).ns();
        let candidate = cross.max(seg_start.ns());
        let seg_end = history.get(i + 1).map(|(t, _)| t.ns()).unwrap_or(i64::MAX);
        if candidate < seg_end {
            return candidate;
        }
    }
    unreachable!("final history segment is unbounded");
}

fn carriage_pair(kind: ScenarioKind) -> (&'static str, &'static str) {
    match kind {
        ScenarioKind::WirelineGptp => ("node_a", "node_b"),
        ScenarioKind::PtpOverWireless => ("gm", "slave"),
        ScenarioKind::SfnAnchored => ("ue_a", "ue_b"),
    }
}

fn carriage_run(
    world: &World,
    name: &str,
    profile: MotionProfile,
    start_local_ns: i64,
    duration: SimTime,
) -> Result<CarriageRun, ScenarioError> {
    let station = world
        .stations
        .iter()
        .find(|st| st.name == name)
        .expect("carriage pair names are scenario stations");
    let trigger = start_crossing(&station.history, start_local_ns);
    // Beyond the run the history is extrapolation: corrections that would
    // have happened are missing, so the mapping cannot be trusted.
    if trigger > duration.ns() {
        return Err(ScenarioError::StartNotReached {
            node: name.to_string(),
            target_ns: start_local_ns,
        });
    }
    Ok(CarriageRun { profile, actual_start_true_ns: trigger })
}

/// Execute one configured run and keep every artifact in memory.
pub fn run_scenario_capture(cfg: &RunConfig) -> Result<CapturedRun, ScenarioError> {
    cfg.validate()?;
    let duration = SimTime::from_ns(cfg.duration_ns());
    let (mut world, mut sim) = build_world(cfg)?;
    sim.run_until(duration, |sim, d| {
        if world.failed.is_none() {
            if let Err(e) = world.handle(sim, d) {
                world.failed = Some(e);
            }
        }
    });
    if let Some(e) = world.failed.take() {
        return Err(e.into());
    }

    let mut summary = summarize(&world.rows)?;
    let mut positions_csv = None;
    let mut motion = None;
    if cfg.demonstrator.enabled {
        let dem = &cfg.demonstrator;
        let profile =
            MotionProfile::new(dem.v_max, dem.a_max, dem.stroke_m).expect("profile validated");
        let (n1, n2) = carriage_pair(cfg.scenario);
        let run1 = carriage_run(&world, n1, profile, dem.start_time_ns, duration)?;
        let run2 = carriage_run(&world, n2, profile, dem.start_time_ns, duration)?;
        let sensor = match dem.sensor {
            SensorKind::Ideal => SensorModel::ideal(),
            SensorKind::Standard => SensorModel::standard(),
        };
        let mut rng = stream_rng(cfg.seed, SENSOR_STREAM);
        let (samples, stats) = sample_runs(&run1, &run2, &sensor, dem.grid_ns, &mut rng);
        positions_csv = Some(write_positions(&samples));
        summary.motion = Some(MotionSummary {
            ds_max_um: stats.ds_max_m * 1e6,
            ds_max_quantized_um: stats.ds_max_quantized_m * 1e6,
            recovered_dt_ns: (stats.recovered_dt_s * 1e9).round() as i64,
        });
        motion = Some(stats);
    }

    let summary_csv = write_summary(&summary);
    Ok(CapturedRun {
        trace_csv: write_trace(&world.rows),
        rows: world.rows,
        positions_csv,
        motion,
        summary,
        summary_csv,
    })
}

/// Execute one configured run and write `trace.csv`, `summary.csv` and (when
/// the demonstrator is enabled) `positions.csv` under `out_dir`.
pub fn run_scenario(cfg: &RunConfig, out_dir: &Path) -> Result<(CapturedRun, RunPaths), ScenarioError> {
    let captured = run_scenario_capture(cfg)?;
    let io_err = |path: &Path, source| ScenarioError::Io { path: path.to_path_buf(), source };
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let trace = out_dir.join("trace.csv");
    fs::write(&trace, &captured.trace_csv).map_err(|e| io_err(&trace, e))?;
    let summary = out_dir.join("summary.csv");
    fs::write(&summary, &captured.summary_csv).map_err(|e| io_err(&summary, e))?;
    let positions = match &captured.positions_csv {
        Some(text) => {
            let p = out_dir.join("positions.csv");
            fs::write(&p, text).map_err(|e| io_err(&p, e))?;
            Some(p)
        }
        None => None,
    };
    Ok((captured, RunPaths { trace, positions, summary }))
}
