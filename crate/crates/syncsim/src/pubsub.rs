//! Wire codec and multicast distribution for sync tuples.
//!
//! The published message is a fixed 15-byte frame, a stripped-down publish/
//! subscribe NetworkMessage carrying exactly one DataSetMessage with two
//! fields:
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x54 0x53 ("TS")
//! 2       1     version, 0x01
//! 3       1     flags, 0x00
//! 4       1     DataSetMessage header: field count, 0x01
//! 5       2     sfn, u16 little-endian, <= 1023
//! 7       8     t_tsn_ns, i64 little-endian
//! ```
//!
//! `decode` is total: any byte slice yields either a tuple or a specific
//! error, never a panic.

use thiserror::Error;

use crate::netsim::{Direction, Link, NetsimError, NodeId, Simulator};
use crate::radioframe::SFN_COUNT;
use crate::sfnsync::SyncTuple;

pub const MESSAGE_LEN: usize = 15;

const MAGIC: [u8; 2] = [0x54, 0x53];
const VERSION: u8 = 0x01;
const FLAGS: u8 = 0x00;
const FIELD_COUNT: u8 = 0x01;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("message is {0} bytes, expected {MESSAGE_LEN}")]
    BadLength(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version 0x{0:02x}")]
    BadVersion(u8),
    #[error("unsupported flags 0x{0:02x}")]
    BadFlags(u8),
    #[error("DataSetMessage field count 0x{0:02x}, expected 0x01")]
    BadFieldCount(u8),
    #[error("sfn field {0} out of range (max 1023)")]
    SfnOutOfRange(u16),
}

pub fn encode(tuple: SyncTuple) -> [u8; MESSAGE_LEN] {
    let mut out = [0u8; MESSAGE_LEN];
    out[0..2].copy_from_slice(&MAGIC);
    out[2] = VERSION;
    out[3] = FLAGS;
    out[4] = FIELD_COUNT;
    out[5..7].copy_from_slice(&tuple.sfn.to_le_bytes());
    out[7..15].copy_from_slice(&tuple.t_tsn_ns.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<SyncTuple, DecodeError> {
    if bytes.len() != MESSAGE_LEN {
        return Err(DecodeError::BadLength(bytes.len()));
    }
    if bytes[0..2] != MAGIC {
        return Err(DecodeError::BadMagic([bytes[0], bytes[1]]));
    }
    if bytes[2] != VERSION {
        return Err(DecodeError::BadVersion(bytes[2]));
    }
    if bytes[3] != FLAGS {
        return Err(DecodeError::BadFlags(bytes[3]));
    }
    if bytes[4] != FIELD_COUNT {
        return Err(DecodeError::BadFieldCount(bytes[4]));
    }
    let sfn = u16::from_le_bytes([bytes[5], bytes[6]]);
    if sfn >= SFN_COUNT {
        return Err(DecodeError::SfnOutOfRange(sfn));
    }
    let t_tsn_ns = i64::from_le_bytes(bytes[7..15].try_into().expect("8-byte slice"));
    Ok(SyncTuple { sfn, t_tsn_ns })
}

/// Deliver one encoded message to every subscriber, each with its own
/// independently drawn downlink delay. Returns the number of deliveries
/// (always the subscriber count).
pub fn multicast_publish<M>(
    sim: &mut Simulator<M>,
    msg: [u8; MESSAGE_LEN],
    group: &mut [(NodeId, Link)],
    mut deliver_msg: impl FnMut([u8; MESSAGE_LEN]) -> M,
) -> Result<usize, NetsimError> {
    for (node, link) in group.iter_mut() {
        let delay = link.sample(Direction::Down);
        sim.schedule_in(delay, *node, deliver_msg(msg))?;
    }
    Ok(group.len())
}
