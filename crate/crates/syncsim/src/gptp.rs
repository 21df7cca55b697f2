//! Two-step PTP time distribution: Sync/FollowUp emission, peer-delay
//! measurement, offset computation, and the correction-field rewrites a
//! relay applies in transit.
//!
//! All participants are pure state machines fed by simulator events; local
//! timestamps are taken by the caller (who owns the clocks) and passed in.
//! The grandmaster is fixed by configuration; there is no best-master
//! election.

use std::collections::VecDeque;

use thiserror::Error;

use crate::ratio::RateRatio;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GptpError {
    #[error("follow-up seq {seq_id} has no pending sync")]
    UnmatchedFollowUp { seq_id: u16 },
    #[error("sync interval must be > 0, got {0}")]
    InvalidInterval(i64),
    #[error("rate-ratio window must be >= 1")]
    InvalidWindow,
}

/// Payload of one protocol message; per-type timestamps live in the variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GptpPayload {
    Sync,
    FollowUp { precise_origin_ns: i64 },
    PdelayReq,
    PdelayResp { t2_ns: i64 },
    PdelayRespFollowUp { t3_ns: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GptpMessage {
    pub payload: GptpPayload,
    pub seq_id: u16,
    /// Accumulated path corrections (link delays, residence times) in
    /// grandmaster time.
    pub correction_ns: i64,
    /// Grandmaster frequency over the frequency of the last node that
    /// rewrote the message.
    pub cumulative_rate_ratio: RateRatio,
    /// Ingress timestamp attached inside a translator span; absent on the
    /// open network.
    pub suffix_tsi_ns: Option<i64>,
}

impl GptpMessage {
    pub fn new(payload: GptpPayload, seq_id: u16) -> Self {
        GptpMessage {
            payload,
            seq_id,
            correction_ns: 0,
            cumulative_rate_ratio: RateRatio::ONE,
            suffix_tsi_ns: None,
        }
    }
}

/// The four peer-delay timestamps plus the frequency ratio used to cancel
/// the responder's turnaround time. t1/t4 are requester-local, t2/t3
/// responder-local.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdelayRecord {
    pub t1: i64,
    pub t2: i64,
    pub t3: i64,
    pub t4: i64,
    pub neighbor_rate_ratio: RateRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkDelayEstimate {
    pub delay_ns: i64,
    /// Pre-clamp delay fell below minus one timestamp granularity: the four
    /// timestamps are mutually inconsistent.
    pub suspect: bool,
}

/// `delay = ((t4 - t1) - ratio * (t3 - t2)) / 2`, rounded once to the
/// nearest nanosecond, clamped at zero.
pub fn compute_link_delay(rec: &PdelayRecord, granularity_ns: i64) -> LinkDelayEstimate {
    let round_trip = (rec.t4 - rec.t1) as i128;
    let turnaround = (rec.t3 - rec.t2) as i128;
    let (num, den) = rec.neighbor_rate_ratio.parts();
    // (round_trip * den - turnaround * num) / (2 * den), rounded half away
    // from zero in one step.
    let numer = round_trip * den - turnaround * num;
    let denom = 2 * den;
    let raw = if numer >= 0 {
        (numer + denom / 2) / denom
    } else {
        -((-numer + denom / 2) / denom)
    } as i64;
    LinkDelayEstimate { delay_ns: raw.max(0), suspect: raw < -granularity_ns }
}

/// Offset of the slave relative to the grandmaster, as observed from one
/// completed Sync/FollowUp: `ingress_local - (origin + correction + delay)`.
/// The caller corrects by stepping its clock by the negated offset.
pub fn sync_offset(
    precise_origin_ns: i64,
    correction_ns: i64,
    link_delay_ns: i64,
    ingress_local_ns: i64,
) -> i64 {
    ingress_local_ns - (precise_origin_ns + correction_ns + link_delay_ns)
}

/// Relay ingress rewrite: fold the upstream link delay into the correction
/// field in grandmaster time (using the ratio carried by the message), then
/// fold this node's neighbor ratio into the cumulative ratio.
pub fn ingress_rewrite(msg: &mut GptpMessage, upstream_delay_ns: i64, neighbor_ratio: RateRatio) {
    msg.correction_ns += msg.cumulative_rate_ratio.scale_round(upstream_delay_ns);
    msg.cumulative_rate_ratio = msg.cumulative_rate_ratio.mul(neighbor_ratio);
}

/// Relay egress rewrite: fold a locally measured residence time into the
/// correction field in grandmaster time.
pub fn residence_rewrite(msg: &mut GptpMessage, residence_local_ns: i64) {
    msg.correction_ns += msg.cumulative_rate_ratio.scale_round(residence_local_ns);
}

/// Grandmaster sync source: emits two-step pairs at a fixed interval.
#[derive(Debug)]
pub struct SyncMaster {
    interval_ns: i64,
    next_seq: u16,
}

impl SyncMaster {
    pub fn new(interval_ns: i64) -> Result<Self, GptpError> {
        if interval_ns <= 0 {
            return Err(GptpError::InvalidInterval(interval_ns));
        }
        Ok(SyncMaster { interval_ns, next_seq: 0 })
    }

    pub fn interval_ns(&self) -> i64 {
        self.interval_ns
    }

    /// Emit one Sync plus its FollowUp carrying the grandmaster egress
    /// reading. Returns the pair and the delay until the next emission.
    pub fn emit(&mut self, gm_egress_reading_ns: i64) -> (GptpMessage, GptpMessage, i64) {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let sync = GptpMessage::new(GptpPayload::Sync, seq);
        let follow_up = GptpMessage::new(
            GptpPayload::FollowUp { precise_origin_ns: gm_egress_reading_ns },
            seq,
        );
        (sync, follow_up, self.interval_ns)
    }
}

/// A completed Sync/FollowUp pair, ready for clock correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncCompletion {
    pub seq_id: u16,
    pub offset_ns: i64,
    /// True when computed before any completed peer-delay exchange (link
    /// delay taken as 0).
    pub provisional: bool,
}

const PORT_QUEUE_CAP: usize = 8;

/// Slave-side sync port: pairs Sync ingress stamps with FollowUp payloads by
/// sequence id, tolerating reordered arrival.
#[derive(Debug, Default)]
pub struct SlavePort {
    syncs: VecDeque<(u16, i64)>,
    followups: VecDeque<(u16, GptpMessage)>,
    newest_sync_seq: Option<u16>,
}

impl SlavePort {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a Sync ingress stamp. Completes immediately if the FollowUp
    /// overtook the Sync in transit.
    pub fn on_sync(
        &mut self,
        seq_id: u16,
        ingress_local_ns: i64,
        delay: Option<LinkDelayEstimate>,
    ) -> Option<SyncCompletion> {
        self.newest_sync_seq = Some(seq_id);
        if let Some(pos) = self.followups.iter().position(|(s, _)| *s == seq_id) {
            let (_, msg) = self.followups.remove(pos).expect("position valid");
            return Some(Self::complete(seq_id, ingress_local_ns, &msg, delay));
        }
        if self.syncs.len() == PORT_QUEUE_CAP {
            self.syncs.pop_front();
        }
        self.syncs.push_back((seq_id, ingress_local_ns));
        None
    }

    /// Register a FollowUp. `Ok(None)` means its Sync has not arrived yet.
    pub fn on_follow_up(
        &mut self,
        msg: &GptpMessage,
        delay: Option<LinkDelayEstimate>,
    ) -> Result<Option<SyncCompletion>, GptpError> {
        debug_assert!(matches!(msg.payload, GptpPayload::FollowUp { .. }));
        let seq_id = msg.seq_id;
        if let Some(pos) = self.syncs.iter().position(|(s, _)| *s == seq_id) {
            let (_, ingress) = self.syncs.remove(pos).expect("position valid");
            return Ok(Some(Self::complete(seq_id, ingress, msg, delay)));
        }
        // The matching Sync has come and gone (consumed or evicted): pairing
        // has failed for good, not merely not-yet.
        if let Some(newest) = self.newest_sync_seq {
            let behind = newest.wrapping_sub(seq_id);
            if behind != 0 && behind < u16::MAX / 2 {
                return Err(GptpError::UnmatchedFollowUp { seq_id });
            }
        }
        if self.followups.len() == PORT_QUEUE_CAP {
            self.followups.pop_front();
        }
        self.followups.push_back((seq_id, *msg));
        Ok(None)
    }

    fn complete(
        seq_id: u16,
        ingress_local_ns: i64,
        follow_up: &GptpMessage,
        delay: Option<LinkDelayEstimate>,
    ) -> SyncCompletion {
        let GptpPayload::FollowUp { precise_origin_ns } = follow_up.payload else {
            unreachable!("checked by caller");
        };
        let delay_ns = delay.map(|d| d.delay_ns).unwrap_or(0);
        SyncCompletion {
            seq_id,
            offset_ns: sync_offset(
                precise_origin_ns,
                follow_up.correction_ns,
                delay_ns,
                ingress_local_ns,
            ),
            provisional: delay.is_none(),
        }
    }
}

/// Requester side of the peer-delay exchange. One exchange may be in flight
/// at a time; the neighbor rate ratio is the elapsed responder time over the
/// elapsed requester time across a window of completed exchanges.
#[derive(Debug)]
pub struct PdelayInitiator {
    next_seq: u16,
    window: usize,
    granularity_ns: i64,
    pending: Option<Pending>,
    history: VecDeque<(i64, i64)>,
    ratio: RateRatio,
    estimate: Option<LinkDelayEstimate>,
}

#[derive(Debug)]
struct Pending {
    seq_id: u16,
    t1: i64,
    t2: Option<i64>,
    t3: Option<i64>,
    t4: Option<i64>,
}

impl PdelayInitiator {
    pub fn new(window: usize, granularity_ns: i64) -> Result<Self, GptpError> {
        if window == 0 {
            return Err(GptpError::InvalidWindow);
        }
        Ok(PdelayInitiator {
            next_seq: 0,
            window,
            granularity_ns,
            pending: None,
            history: VecDeque::with_capacity(window + 1),
            ratio: RateRatio::ONE,
            estimate: None,
        })
    }

    /// Latest completed link-delay measurement.
    pub fn estimate(&self) -> Option<LinkDelayEstimate> {
        self.estimate
    }

    /// Current neighbor rate ratio (responder over requester frequency);
    /// exactly one until the window has filled.
    pub fn rate_ratio(&self) -> RateRatio {
        self.ratio
    }

    /// Forget the in-flight exchange and the rate window. Call after the
    /// local clock has been stepped: an elapsed-time span crossing the
    /// discontinuity measures the step, not the frequency. The ratio itself
    /// survives, a step does not change either oscillator.
    pub fn flush_after_step(&mut self) {
        self.pending = None;
        self.history.clear();
    }

    /// Begin an exchange; `t1_local_ns` is the request egress stamp. A still
    /// pending exchange is abandoned.
    pub fn start_exchange(&mut self, t1_local_ns: i64) -> GptpMessage {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.pending = Some(Pending { seq_id: seq, t1: t1_local_ns, t2: None, t3: None, t4: None });
        GptpMessage::new(GptpPayload::PdelayReq, seq)
    }

    /// Response ingress: `t4_local_ns` is this side's ingress stamp, the
    /// message carries the responder's `t2`.
    pub fn on_resp(&mut self, msg: &GptpMessage, t4_local_ns: i64) -> Option<PdelayRecord> {
        let GptpPayload::PdelayResp { t2_ns } = msg.payload else { return None };
        let p = self.pending.as_mut()?;
        if p.seq_id != msg.seq_id {
            return None;
        }
        p.t2 = Some(t2_ns);
        p.t4 = Some(t4_local_ns);
        self.try_complete()
    }

    /// Response follow-up carrying the responder's egress stamp `t3`.
    pub fn on_resp_follow_up(&mut self, msg: &GptpMessage) -> Option<PdelayRecord> {
        let GptpPayload::PdelayRespFollowUp { t3_ns } = msg.payload else { return None };
        let p = self.pending.as_mut()?;
        if p.seq_id != msg.seq_id {
            return None;
        }
        p.t3 = Some(t3_ns);
        self.try_complete()
    }

    fn try_complete(&mut self) -> Option<PdelayRecord> {
        let p = self.pending.as_ref()?;
        let (Some(t2), Some(t3), Some(t4)) = (p.t2, p.t3, p.t4) else {
            return None;
        };
        let t1 = p.t1;
        self.pending = None;

        if self.history.len() == self.window {
            let (t3_old, t4_old) = *self.history.front().expect("window nonempty");
            if let Some(r) = RateRatio::from_counts(t3 - t3_old, t4 - t4_old) {
                self.ratio = r;
            }
            self.history.pop_front();
        }
        self.history.push_back((t3, t4));

        let rec = PdelayRecord { t1, t2, t3, t4, neighbor_rate_ratio: self.ratio };
        self.estimate = Some(compute_link_delay(&rec, self.granularity_ns));
        Some(rec)
    }
}

/// Responder side: stamps the request ingress, then releases both replies at
/// its egress instant.
#[derive(Debug, Default)]
pub struct PdelayResponder {
    pending: Option<(u16, i64)>,
}

impl PdelayResponder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_req(&mut self, msg: &GptpMessage, t2_local_ns: i64) {
        debug_assert!(matches!(msg.payload, GptpPayload::PdelayReq));
        self.pending = Some((msg.seq_id, t2_local_ns));
    }

    /// Called at reply egress; `t3_local_ns` is the egress stamp. Returns
    /// the response and its follow-up.
    pub fn emit_replies(&mut self, t3_local_ns: i64) -> Option<(GptpMessage, GptpMessage)> {
        let (seq, t2) = self.pending.take()?;
        let resp = GptpMessage::new(GptpPayload::PdelayResp { t2_ns: t2 }, seq);
        let fu = GptpMessage::new(GptpPayload::PdelayRespFollowUp { t3_ns: t3_local_ns }, seq);
        Some((resp, fu))
    }
}
