//! Frame-anchored clock correction.
//!
//! A wireline reference station, already synchronized over PTP, pairs each
//! radio frame number with its network-time reading and publishes the pair.
//! Every receiver keeps its own (frame number, local reading) records; when a
//! published pair arrives it corrects its clock by
//!
//! `t_corrected = t_ref[sfn] - t_local[sfn] + t_local[now]`
//!
//! The frame boundary is a common-view event, so the correction is exact no
//! matter how long the pair took to arrive; the transport delay only bounds
//! how much local drift accumulates before the correction lands.

use std::collections::VecDeque;

use thiserror::Error;

use crate::clock::{SimTime, SimulatedClock};
use crate::radioframe::SFN_COUNT;

/// Half the 10.24 s frame-number period: records older than this are
/// ambiguous after a counter wrap and must not be used.
pub const DEFAULT_STALENESS_NS: i64 = 5_120_000_000;

pub const DEFAULT_STORE_CAPACITY: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SfnSyncError {
    #[error("sfn {0} out of range (max 1023)")]
    SfnOutOfRange(u16),
    #[error("publish decimation must be >= 1")]
    BadDecimation,
    #[error("store capacity must be >= 1")]
    BadCapacity,
}

/// A published (frame number, reference reading) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncTuple {
    pub sfn: u16,
    pub t_tsn_ns: i64,
}

impl SyncTuple {
    pub fn new(sfn: u16, t_tsn_ns: i64) -> Result<Self, SfnSyncError> {
        if sfn >= SFN_COUNT {
            return Err(SfnSyncError::SfnOutOfRange(sfn));
        }
        Ok(SyncTuple { sfn, t_tsn_ns })
    }
}

/// One locally observed frame boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalSfnRecord {
    pub sfn: u16,
    pub t_ue_ns: i64,
    pub observed_at: SimTime,
}

/// Bounded ring of local frame observations. On a frame-number collision
/// (possible after the 10.24 s wrap) the newest record wins.
#[derive(Debug)]
pub struct SfnStore {
    records: VecDeque<LocalSfnRecord>,
    capacity: usize,
}

impl SfnStore {
    pub fn new(capacity: usize) -> Result<Self, SfnSyncError> {
        if capacity == 0 {
            return Err(SfnSyncError::BadCapacity);
        }
        Ok(SfnStore { records: VecDeque::with_capacity(capacity), capacity })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record the local reading taken at a frame boundary.
    pub fn record(&mut self, sfn: u16, t_ue_ns: i64, observed_at: SimTime) {
        self.records.retain(|r| r.sfn != sfn);
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(LocalSfnRecord { sfn, t_ue_ns, observed_at });
    }

    pub fn get(&self, sfn: u16) -> Option<LocalSfnRecord> {
        self.records.iter().rev().find(|r| r.sfn == sfn).copied()
    }

    /// Re-express every stored reading after the local clock was stepped by
    /// `delta_ns`. Without this, a record taken before a correction would mix
    /// timescales with readings taken after it.
    pub fn rebase(&mut self, delta_ns: i64) {
        for r in &mut self.records {
            r.t_ue_ns += delta_ns;
        }
    }
}

/// Reference-side publisher policy: emit a tuple every `decimation`-th frame.
#[derive(Clone, Copy, Debug)]
pub struct ReferencePublisher {
    decimation: u16,
}

impl ReferencePublisher {
    pub fn new(decimation: u16) -> Result<Self, SfnSyncError> {
        if decimation == 0 {
            return Err(SfnSyncError::BadDecimation);
        }
        Ok(ReferencePublisher { decimation })
    }

    /// The tuple to publish for this frame, or `None` on decimated frames.
    pub fn on_sfn(&self, sfn: u16, ref_reading_ns: i64) -> Option<SyncTuple> {
        if sfn >= SFN_COUNT || sfn % self.decimation != 0 {
            return None;
        }
        Some(SyncTuple { sfn, t_tsn_ns: ref_reading_ns })
    }
}

/// What a received tuple did to the receiver's clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TupleOutcome {
    /// Clock stepped by `offset_ns`; `tuple_age_ns` is how long after the
    /// local observation the tuple arrived.
    Applied { sfn: u16, offset_ns: i64, tuple_age_ns: i64 },
    /// No local record for that frame number (boundary missed).
    NoMatchingSfn { sfn: u16 },
    /// The matching record predates the staleness window; applying it could
    /// alias a wrapped frame number.
    StaleRecord { sfn: u16, tuple_age_ns: i64 },
}

/// Apply one received tuple to the receiver's clock.
///
/// On success the clock is stepped so its reading becomes
/// `t_local[now] + (tuple.t_tsn_ns - t_local[sfn])`, and the store is
/// rebased onto the corrected timescale.
pub fn ue_on_tuple(
    store: &mut SfnStore,
    tuple: SyncTuple,
    clock: &mut SimulatedClock,
    now: SimTime,
    staleness_ns: i64,
) -> TupleOutcome {
    let Some(record) = store.get(tuple.sfn) else {
        return TupleOutcome::NoMatchingSfn { sfn: tuple.sfn };
    };
    let age = now - record.observed_at;
    if age > staleness_ns {
        return TupleOutcome::StaleRecord { sfn: tuple.sfn, tuple_age_ns: age };
    }
    let offset = tuple.t_tsn_ns - record.t_ue_ns;
    clock.step_adjust(offset, now);
    store.rebase(offset);
    TupleOutcome::Applied { sfn: tuple.sfn, offset_ns: offset, tuple_age_ns: age }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_correction_example() {
        // Local record 99_999_200_000 for frame 17; reference says that
        // boundary was 100_000_000_000; local clock currently reads
        // 100_005_000_000. Corrected reading: 100_005_800_000.
        let now = SimTime::from_ns(100_000_000_000);
        let mut clock = SimulatedClock::with_drift_ppb(5_000_000, 0, 1).unwrap();
        assert_eq!(clock.read(now), 100_005_000_000);
        let mut store = SfnStore::new(8).unwrap();
        store.record(17, 99_999_200_000, SimTime::from_ns(99_994_200_000));
        let tuple = SyncTuple::new(17, 100_000_000_000).unwrap();
        let out = ue_on_tuple(&mut store, tuple, &mut clock, now, DEFAULT_STALENESS_NS);
        assert_eq!(
            out,
            TupleOutcome::Applied { sfn: 17, offset_ns: 800_000, tuple_age_ns: 5_800_000 }
        );
        assert_eq!(clock.read(now), 100_005_800_000);
    }

    #[test]
    fn unseen_sfn_leaves_clock_alone() {
        let mut clock = SimulatedClock::with_drift_ppb(123, 0, 1).unwrap();
        let before = clock;
        let mut store = SfnStore::new(8).unwrap();
        let tuple = SyncTuple::new(5, 1_000).unwrap();
        let out = ue_on_tuple(&mut store, tuple, &mut clock, SimTime::from_ns(10), 1_000_000);
        assert_eq!(out, TupleOutcome::NoMatchingSfn { sfn: 5 });
        assert_eq!(clock, before);
    }

    #[test]
    fn zero_error_world_is_noop() {
        let now = SimTime::from_ns(50_000_000);
        let mut clock = SimulatedClock::ideal();
        let mut store = SfnStore::new(8).unwrap();
        store.record(3, 30_000_000, SimTime::from_ns(30_000_000));
        let tuple = SyncTuple::new(3, 30_000_000).unwrap();
        let out = ue_on_tuple(&mut store, tuple, &mut clock, now, DEFAULT_STALENESS_NS);
        assert_eq!(out, TupleOutcome::Applied { sfn: 3, offset_ns: 0, tuple_age_ns: 20_000_000 });
        assert_eq!(clock.read(now), 50_000_000);
    }

    #[test]
    fn stale_record_skipped() {
        let mut clock = SimulatedClock::ideal();
        let before = clock;
        let mut store = SfnStore::new(8).unwrap();
        store.record(9, 0, SimTime::ZERO);
        let now = SimTime::from_ns(DEFAULT_STALENESS_NS + 1);
        let tuple = SyncTuple::new(9, 42).unwrap();
        let out = ue_on_tuple(&mut store, tuple, &mut clock, now, DEFAULT_STALENESS_NS);
        assert_eq!(
            out,
            TupleOutcome::StaleRecord { sfn: 9, tuple_age_ns: DEFAULT_STALENESS_NS + 1 }
        );
        assert_eq!(clock, before);
    }

    #[test]
    fn store_evicts_oldest_beyond_capacity() {
        let mut store = SfnStore::new(2).unwrap();
        store.record(1, 10, SimTime::from_ns(1));
        store.record(2, 20, SimTime::from_ns(2));
        store.record(3, 30, SimTime::from_ns(3));
        assert_eq!(store.len(), 2);
        assert!(store.get(1).is_none());
        assert_eq!(store.get(2).unwrap().t_ue_ns, 20);
        assert_eq!(store.get(3).unwrap().t_ue_ns, 30);
    }

    #[test]
    fn collision_keeps_newest() {
        let mut store = SfnStore::new(4).unwrap();
        store.record(7, 100, SimTime::from_ns(100));
        store.record(7, 10_240_000_100, SimTime::from_ns(10_240_000_100));
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(7).unwrap().t_ue_ns, 10_240_000_100);
    }

    #[test]
    fn rebase_makes_sequential_corrections_idempotent() {
        // A receiver 3 ms behind, no drift. Both frame boundaries were
        // recorded before the first tuple arrives; after the first correction
        // the second tuple must contribute nothing.
        let mut clock = SimulatedClock::with_drift_ppb(-3_000_000, 0, 1).unwrap();
        let mut store = SfnStore::new(8).unwrap();
        let b1 = SimTime::from_ns(10_000_000);
        let b2 = SimTime::from_ns(20_000_000);
        store.record(1, clock.read(b1), b1);
        store.record(2, clock.read(b2), b2);

        let now1 = SimTime::from_ns(25_000_000);
        let t1 = SyncTuple::new(1, 10_000_000).unwrap();
        match ue_on_tuple(&mut store, t1, &mut clock, now1, DEFAULT_STALENESS_NS) {
            TupleOutcome::Applied { offset_ns, .. } => assert_eq!(offset_ns, 3_000_000),
            other => panic!("unexpected outcome {other:?}"),
        }

        let now2 = SimTime::from_ns(30_000_000);
        let t2 = SyncTuple::new(2, 20_000_000).unwrap();
        match ue_on_tuple(&mut store, t2, &mut clock, now2, DEFAULT_STALENESS_NS) {
            TupleOutcome::Applied { offset_ns, .. } => assert_eq!(offset_ns, 0),
            other => panic!("unexpected outcome {other:?}"),
        }
        assert_eq!(clock.read(now2), 30_000_000);
    }

    #[test]
    fn publisher_decimation() {
        let p = ReferencePublisher::new(4).unwrap();
        assert!(p.on_sfn(0, 1).is_some());
        assert!(p.on_sfn(1, 1).is_none());
        assert!(p.on_sfn(4, 1).is_some());
        assert!(p.on_sfn(17, 1).is_none());
        assert_eq!(p.on_sfn(8, 12_345).unwrap(), SyncTuple { sfn: 8, t_tsn_ns: 12_345 });
    }

    #[test]
    fn tuple_rejects_bad_sfn() {
        assert_eq!(SyncTuple::new(1024, 0).unwrap_err(), SfnSyncError::SfnOutOfRange(1024));
    }

    proptest! {
        #[test]
        fn correction_formula_exact(
            t_tsn_sfn in -1_000_000_000_000i64..1_000_000_000_000,
            t_ue_sfn in -1_000_000_000_000i64..1_000_000_000_000,
            now_ns in 0i64..1_000_000_000_000,
            local_err in -1_000_000_000i64..1_000_000_000,
            sfn in 0u16..1024,
        ) {
            // Zero-drift clock reading t_ue_current at `now`.
            let mut clock = SimulatedClock::with_drift_ppb(local_err, 0, 1).unwrap();
            let now = SimTime::from_ns(now_ns);
            let t_ue_current = clock.read(now);
            let mut store = SfnStore::new(4).unwrap();
            store.record(sfn, t_ue_sfn, now);
            let tuple = SyncTuple { sfn, t_tsn_ns: t_tsn_sfn };
            let out = ue_on_tuple(&mut store, tuple, &mut clock, now, DEFAULT_STALENESS_NS);
            prop_assert_eq!(out, TupleOutcome::Applied {
                sfn,
                offset_ns: t_tsn_sfn - t_ue_sfn,
                tuple_age_ns: 0,
            });
            prop_assert_eq!(clock.read(now), t_tsn_sfn - t_ue_sfn + t_ue_current);
        }

        #[test]
        fn store_never_exceeds_capacity(
            cap in 1usize..16,
            inserts in proptest::collection::vec((0u16..1024, any::<i64>()), 0..64),
        ) {
            let mut store = SfnStore::new(cap).unwrap();
            for (i, (sfn, val)) in inserts.iter().enumerate() {
                store.record(*sfn, *val, SimTime::from_ns(i as i64));
                prop_assert!(store.len() <= cap);
            }
        }
    }
}
