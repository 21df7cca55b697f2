//! The cellular system acting as a time-aware relay.
//!
//! A downlink PTP message enters at the network-side adapter, crosses the
//! user plane, and leaves at the device-side adapter. The network side stamps
//! the ingress instant (TSi) into the message suffix and folds the upstream
//! link delay into the correction field; the device side stamps egress (TSe),
//! folds the residence time TSe - TSi into the correction field scaled by the
//! carried rate ratio, and strips the suffix. Both adapters read the same
//! internal clock, so the residence term cancels any offset that clock has
//! from grandmaster time.

use thiserror::Error;

use crate::clock::{SimTime, SimulatedClock};
use crate::gptp::{ingress_rewrite, GptpMessage};
use crate::ratio::RateRatio;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslatorError {
    #[error("message already carries an ingress stamp (suffix {0})")]
    DoubleIngress(i64),
    #[error("egress without an ingress stamp")]
    MissingTsi,
    #[error("egress reading {tse} precedes ingress stamp {tsi}")]
    NegativeResidence { tsi: i64, tse: i64 },
}

/// What the network-side ingress did to a message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IngressAudit {
    pub tsi_ns: i64,
    pub correction_delta_ns: i64,
    pub ratio_before: RateRatio,
    pub ratio_after: RateRatio,
}

/// What the device-side egress did to a message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgressAudit {
    pub tsi_ns: i64,
    pub tse_ns: i64,
    pub residence_ns: i64,
    pub correction_delta_ns: i64,
    pub ratio_used: RateRatio,
    /// Residence exceeded the configured bound. Flagged, never dropped.
    pub over_bound: bool,
}

/// The shared internal time base plus the two adapters.
#[derive(Clone, Copy, Debug)]
pub struct FivegSystem {
    clock: SimulatedClock,
    /// Device-side reading error relative to the shared clock; 0 models
    /// ideal internal sync.
    dstt_offset_ns: i64,
    /// Residence-time conformance bound; crossings are flagged in the audit.
    residence_bound_ns: Option<i64>,
}

impl FivegSystem {
    pub fn new(clock: SimulatedClock) -> Self {
        FivegSystem { clock, dstt_offset_ns: 0, residence_bound_ns: None }
    }

    pub fn with_dstt_offset(mut self, offset_ns: i64) -> Self {
        self.dstt_offset_ns = offset_ns;
        self
    }

    pub fn with_residence_bound(mut self, bound_ns: i64) -> Self {
        self.residence_bound_ns = Some(bound_ns);
        self
    }

    pub fn clock(&self) -> &SimulatedClock {
        &self.clock
    }

    pub fn clock_mut(&mut self) -> &mut SimulatedClock {
        &mut self.clock
    }

    /// Network-side ingress: correction gains the upstream link delay in
    /// grandmaster time, the cumulative ratio gains this adapter's neighbor
    /// ratio, and the ingress stamp is attached.
    pub fn nw_tt_ingress(
        &self,
        msg: &mut GptpMessage,
        upstream_delay_ns: i64,
        neighbor_ratio: RateRatio,
        now: SimTime,
    ) -> Result<IngressAudit, TranslatorError> {
        if let Some(tsi) = msg.suffix_tsi_ns {
            return Err(TranslatorError::DoubleIngress(tsi));
        }
        let ratio_before = msg.cumulative_rate_ratio;
        let corr_before = msg.correction_ns;
        ingress_rewrite(msg, upstream_delay_ns, neighbor_ratio);
        let tsi = self.clock.read(now);
        msg.suffix_tsi_ns = Some(tsi);
        Ok(IngressAudit {
            tsi_ns: tsi,
            correction_delta_ns: msg.correction_ns - corr_before,
            ratio_before,
            ratio_after: msg.cumulative_rate_ratio,
        })
    }

    /// Device-side egress: correction gains the residence time scaled by the
    /// ratio the message carries at egress; the ingress stamp is removed.
    pub fn ds_tt_egress(
        &self,
        msg: &mut GptpMessage,
        now: SimTime,
    ) -> Result<EgressAudit, TranslatorError> {
        let Some(tsi) = msg.suffix_tsi_ns else {
            return Err(TranslatorError::MissingTsi);
        };
        let tse = self.clock.read(now) + self.dstt_offset_ns;
        if tse < tsi {
            return Err(TranslatorError::NegativeResidence { tsi, tse });
        }
        let residence = tse - tsi;
        let ratio = msg.cumulative_rate_ratio;
        let corr_before = msg.correction_ns;
        msg.correction_ns += ratio.scale_round(residence);
        msg.suffix_tsi_ns = None;
        Ok(EgressAudit {
            tsi_ns: tsi,
            tse_ns: tse,
            residence_ns: residence,
            correction_delta_ns: msg.correction_ns - corr_before,
            ratio_used: ratio,
            over_bound: self.residence_bound_ns.is_some_and(|b| residence > b),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gptp::{sync_offset, GptpPayload};
    use proptest::prelude::*;

    fn sync_msg() -> GptpMessage {
        GptpMessage::new(GptpPayload::Sync, 0)
    }

    fn system_at(offset_ns: i64) -> FivegSystem {
        FivegSystem::new(SimulatedClock::with_drift_ppb(offset_ns, 0, 1).unwrap())
    }

    #[test]
    fn ingress_unity_ratio() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        let audit = sys
            .nw_tt_ingress(&mut msg, 8_000, RateRatio::ONE, SimTime::from_ns(1_000))
            .unwrap();
        assert_eq!(msg.correction_ns, 8_000);
        assert_eq!(audit.correction_delta_ns, 8_000);
        assert_eq!(msg.suffix_tsi_ns, Some(1_000));
    }

    #[test]
    fn ingress_scales_by_carried_ratio() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        msg.cumulative_rate_ratio = RateRatio::from_counts(10_001, 10_000).unwrap();
        sys.nw_tt_ingress(&mut msg, 1_000_000, RateRatio::ONE, SimTime::ZERO).unwrap();
        assert_eq!(msg.correction_ns, 1_000_100);
    }

    #[test]
    fn ingress_stamps_local_reading() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        let audit = sys
            .nw_tt_ingress(&mut msg, 0, RateRatio::ONE, SimTime::from_ns(1_000_000_000))
            .unwrap();
        assert_eq!(audit.tsi_ns, 1_000_000_000);
    }

    #[test]
    fn double_ingress_rejected() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        sys.nw_tt_ingress(&mut msg, 0, RateRatio::ONE, SimTime::ZERO).unwrap();
        assert_eq!(
            sys.nw_tt_ingress(&mut msg, 0, RateRatio::ONE, SimTime::ZERO),
            Err(TranslatorError::DoubleIngress(0))
        );
    }

    #[test]
    fn egress_adds_residence_and_strips_suffix() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        msg.suffix_tsi_ns = Some(1_000_000_000);
        let audit = sys.ds_tt_egress(&mut msg, SimTime::from_ns(1_004_000_000)).unwrap();
        assert_eq!(msg.correction_ns, 4_000_000);
        assert_eq!(msg.suffix_tsi_ns, None);
        assert_eq!(audit.residence_ns, 4_000_000);
        assert!(!audit.over_bound);
    }

    #[test]
    fn zero_residence_leaves_correction() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        msg.correction_ns = 77;
        msg.suffix_tsi_ns = Some(500);
        sys.ds_tt_egress(&mut msg, SimTime::from_ns(500)).unwrap();
        assert_eq!(msg.correction_ns, 77);
    }

    #[test]
    fn egress_scales_residence_by_ratio() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        msg.cumulative_rate_ratio = RateRatio::from_counts(10_001, 10_000).unwrap();
        msg.suffix_tsi_ns = Some(0);
        let audit = sys.ds_tt_egress(&mut msg, SimTime::from_ns(4_000_000)).unwrap();
        assert_eq!(msg.correction_ns, 4_000_400);
        assert_eq!(audit.correction_delta_ns, 4_000_400);
    }

    #[test]
    fn egress_without_ingress_rejected() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        assert_eq!(sys.ds_tt_egress(&mut msg, SimTime::ZERO), Err(TranslatorError::MissingTsi));
    }

    #[test]
    fn negative_residence_rejected() {
        let sys = system_at(0);
        let mut msg = sync_msg();
        msg.suffix_tsi_ns = Some(1_000);
        assert_eq!(
            sys.ds_tt_egress(&mut msg, SimTime::from_ns(500)),
            Err(TranslatorError::NegativeResidence { tsi: 1_000, tse: 500 })
        );
    }

    #[test]
    fn residence_bound_flags_but_processes() {
        let sys = system_at(0).with_residence_bound(1_000_000);
        let mut msg = sync_msg();
        msg.suffix_tsi_ns = Some(0);
        let audit = sys.ds_tt_egress(&mut msg, SimTime::from_ns(2_000_000)).unwrap();
        assert!(audit.over_bound);
        assert_eq!(msg.correction_ns, 2_000_000);
    }

    #[test]
    fn internal_offset_cancels_in_residence() {
        // The internal clock is 7 s off grandmaster time; the residence is
        // still measured exactly because both stamps share the error.
        let sys = system_at(7_000_000_000);
        let mut msg = sync_msg();
        sys.nw_tt_ingress(&mut msg, 0, RateRatio::ONE, SimTime::from_ns(100)).unwrap();
        let audit = sys.ds_tt_egress(&mut msg, SimTime::from_ns(5_000_100)).unwrap();
        assert_eq!(audit.residence_ns, 5_000_000);
    }

    #[test]
    fn transparent_path_yields_zero_offset() {
        // Zero-drift world: grandmaster origin o, wire d1 into the system,
        // residence r inside, wire d2 to the slave. The slave's ingress
        // stamp sits at o + d1 + r + d2; with the rewritten correction and
        // its own measured d2 the offset must be exactly 0 for any r.
        let (origin, d1, d2) = (50_000_000_000i64, 8_000i64, 5_000i64);
        for r in [1_000_000i64, 20_000_000, 100_000_000] {
            let sys = system_at(-3_000_000);
            let mut msg = GptpMessage::new(
                GptpPayload::FollowUp { precise_origin_ns: origin },
                7,
            );
            let t_ingress = SimTime::from_ns(origin + d1);
            sys.nw_tt_ingress(&mut msg, d1, RateRatio::ONE, t_ingress).unwrap();
            let t_egress = SimTime::from_ns(origin + d1 + r);
            sys.ds_tt_egress(&mut msg, t_egress).unwrap();
            let GptpPayload::FollowUp { precise_origin_ns } = msg.payload else { unreachable!() };
            let slave_ingress = origin + d1 + r + d2;
            assert_eq!(
                sync_offset(precise_origin_ns, msg.correction_ns, d2, slave_ingress),
                0,
                "residence {r}"
            );
        }
    }

    proptest! {
        #[test]
        fn correction_delta_decomposes_exactly(
            delay in 0i64..10_000_000,
            residence in 0i64..100_000_000,
            num in 999_000_000i64..1_001_000_000,
            fiveg_offset in -1_000_000_000i64..1_000_000_000,
            t_in in 0i64..1_000_000_000,
        ) {
            let sys = system_at(fiveg_offset);
            let mut msg = sync_msg();
            msg.cumulative_rate_ratio = RateRatio::from_counts(num, 1_000_000_000).unwrap();
            let corr0 = msg.correction_ns;
            let ing = sys
                .nw_tt_ingress(&mut msg, delay, RateRatio::ONE, SimTime::from_ns(t_in))
                .unwrap();
            let eg = sys
                .ds_tt_egress(&mut msg, SimTime::from_ns(t_in + residence))
                .unwrap();
            prop_assert_eq!(eg.residence_ns, residence);
            prop_assert_eq!(
                msg.correction_ns - corr0,
                ing.ratio_before.scale_round(delay) + eg.ratio_used.scale_round(residence)
            );
            prop_assert!(msg.suffix_tsi_ns.is_none());
        }
    }
}
