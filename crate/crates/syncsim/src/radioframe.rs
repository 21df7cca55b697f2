//! Radio frame counting and the SFN bit split.
//!
//! The system frame number is a 10-bit counter, 0..=1023, advancing once per
//! 10 ms frame; each frame holds ten 1 ms subframes. Over the air the SFN is
//! split: the 6 most significant bits ride in the MIB, the 4 least
//! significant bits in the PBCH payload. The whole counter space repeats
//! every 10.24 s.

use thiserror::Error;

use crate::netsim::{NetsimError, NodeId, Simulator};

pub const SUBFRAME_NS: i64 = 1_000_000;
pub const FRAME_NS: i64 = 10_000_000;
pub const SFN_COUNT: u16 = 1024;
/// Full counter period: 1024 frames of 10 ms.
pub const SFN_PERIOD_NS: i64 = SFN_COUNT as i64 * FRAME_NS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RadioframeError {
    #[error("sfn {0} out of range (max 1023)")]
    SfnOutOfRange(u16),
    #[error("encoded sfn fields out of range: mib {mib} (max 63), pbch {pbch} (max 15)")]
    FieldOutOfRange { mib: u8, pbch: u8 },
}

/// Frame counter state: which frame, and which subframe within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SfnCounter {
    sfn: u16,
    subframe: u8,
}

impl SfnCounter {
    pub fn new(sfn: u16, subframe: u8) -> Result<Self, RadioframeError> {
        if sfn >= SFN_COUNT {
            return Err(RadioframeError::SfnOutOfRange(sfn));
        }
        // Reuse the field error for a bad subframe index.
        if subframe >= 10 {
            return Err(RadioframeError::FieldOutOfRange { mib: 0, pbch: subframe });
        }
        Ok(SfnCounter { sfn, subframe })
    }

    pub fn sfn(self) -> u16 {
        self.sfn
    }

    pub fn subframe(self) -> u8 {
        self.subframe
    }

    /// Advance one subframe; subframe 9 wraps to 0 and carries into the SFN,
    /// SFN 1023 wraps to 0.
    pub fn tick(self) -> SfnCounter {
        if self.subframe == 9 {
            SfnCounter { sfn: (self.sfn + 1) % SFN_COUNT, subframe: 0 }
        } else {
            SfnCounter { sfn: self.sfn, subframe: self.subframe + 1 }
        }
    }

    /// Advance one full frame (ten subframes).
    pub fn advance_frame(self) -> SfnCounter {
        SfnCounter { sfn: (self.sfn + 1) % SFN_COUNT, subframe: self.subframe }
    }
}

/// Split an SFN into its broadcast fields: 6 MSB for the MIB, 4 LSB for the
/// PBCH payload.
pub fn encode_sfn(sfn: u16) -> Result<(u8, u8), RadioframeError> {
    if sfn >= SFN_COUNT {
        return Err(RadioframeError::SfnOutOfRange(sfn));
    }
    Ok(((sfn >> 4) as u8, (sfn & 0xF) as u8))
}

/// Reassemble an SFN from its broadcast fields.
pub fn decode_sfn(mib_msb6: u8, pbch_lsb4: u8) -> Result<u16, RadioframeError> {
    if mib_msb6 >= 64 || pbch_lsb4 >= 16 {
        return Err(RadioframeError::FieldOutOfRange { mib: mib_msb6, pbch: pbch_lsb4 });
    }
    Ok(((mib_msb6 as u16) << 4) | pbch_lsb4 as u16)
}

/// The gNB side of the common-view broadcast: nothing but the frame counter.
#[derive(Clone, Copy, Debug)]
pub struct GnbBroadcaster {
    counter: SfnCounter,
}

impl GnbBroadcaster {
    pub fn new(start: SfnCounter) -> Self {
        GnbBroadcaster { counter: start }
    }

    pub fn counter(&self) -> SfnCounter {
        self.counter
    }

    /// The counter for the frame boundary happening now; internally advances
    /// to the next frame.
    pub fn emit(&mut self) -> SfnCounter {
        let current = self.counter;
        self.counter = self.counter.advance_frame();
        current
    }
}

/// Deliver one frame boundary to every attached station.
///
/// Each `(node, observation_offset_ns)` pair gets an event at
/// `now + observation_offset_ns` carrying the current counter; the offset
/// stands in for per-station propagation or decode skew (0 = ideal common
/// view). The caller schedules the next boundary at `now + FRAME_NS`.
pub fn broadcast_frame<M>(
    sim: &mut Simulator<M>,
    gnb: &mut GnbBroadcaster,
    observers: &[(NodeId, i64)],
    mut observe_msg: impl FnMut(SfnCounter) -> M,
) -> Result<SfnCounter, NetsimError> {
    let counter = gnb.emit();
    for &(node, offset_ns) in observers {
        sim.schedule_in(offset_ns, node, observe_msg(counter))?;
    }
    Ok(counter)
}
