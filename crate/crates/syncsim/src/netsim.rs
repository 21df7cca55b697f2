//! Deterministic discrete-event scheduler and link delay models.
//!
//! One global queue, one logical timeline. Events fire in `(fire_at, seq)`
//! lexicographic order where `seq` is the insertion counter, so ties resolve
//! by insertion order and a run is fully reproducible. Nodes are passive:
//! all behavior lives in the handler closure passed to [`Simulator::run_until`].
//!
//! Randomness comes from ChaCha12 in counter mode. Each link owns two
//! independent streams (one per direction) derived from the scenario seed and
//! the link id, so adding a link never perturbs another link's draws.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::SimTime;

pub type NodeId = u32;

/// The portable simulation PRNG: ChaCha12, 64-bit seed, 64-bit stream id.
pub type SimRng = ChaCha12Rng;

/// An independent PRNG stream. Streams with the same seed but different ids
/// never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetsimError {
    #[error("cannot schedule at {fire_at:?}, simulation time is already {now:?}")]
    SchedulingInPast { fire_at: SimTime, now: SimTime },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkModelError {
    #[error("constant delay must be >= 0, got {0}")]
    NegativeConstant(i64),
    #[error("uniform range invalid: min {min} max {max} (need 0 <= min <= max)")]
    BadUniformRange { min: i64, max: i64 },
    #[error("normal model invalid: sigma {sigma} floor {floor} (need sigma >= 0, floor >= 0)")]
    BadNormal { sigma: i64, floor: i64 },
}

/// Message direction over a link. `Up` is toward the network/grandmaster
/// side, `Down` is toward the device side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Per-link one-way delay distribution. Every sample is non-negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkModel {
    Constant { d_ns: i64 },
    Uniform { min_ns: i64, max_ns: i64 },
    Normal { mean_ns: i64, sigma_ns: i64, floor_ns: i64 },
    Asymmetric { up: Box<LinkModel>, down: Box<LinkModel> },
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), LinkModelError> {
        match self {
            LinkModel::Constant { d_ns } if *d_ns < 0 => {
                Err(LinkModelError::NegativeConstant(*d_ns))
            }
            LinkModel::Uniform { min_ns, max_ns } if *min_ns < 0 || *max_ns < *min_ns => {
                Err(LinkModelError::BadUniformRange { min: *min_ns, max: *max_ns })
            }
            LinkModel::Normal { sigma_ns, floor_ns, .. } if *sigma_ns < 0 || *floor_ns < 0 => {
                Err(LinkModelError::BadNormal { sigma: *sigma_ns, floor: *floor_ns })
            }
            LinkModel::Asymmetric { up, down } => {
                up.validate()?;
                down.validate()
            }
            _ => Ok(()),
        }
    }

    /// Draw one delay. Normal samples are rounded to the nearest ns and
    /// clamped at `floor_ns`; a zero-sigma Normal degenerates to
    /// `max(mean, floor)` without consuming randomness.
    pub fn sample_delay(&self, direction: Direction, rng: &mut SimRng) -> i64 {
        match self {
            LinkModel::Constant { d_ns } => *d_ns,
            LinkModel::Uniform { min_ns, max_ns } => rng.random_range(*min_ns..=*max_ns),
            LinkModel::Normal { mean_ns, sigma_ns, floor_ns } => {
                if *sigma_ns == 0 {
                    return (*mean_ns).max(*floor_ns);
                }
                let dist = Normal::new(*mean_ns as f64, *sigma_ns as f64)
                    .expect("validated: sigma > 0 and finite");
                (dist.sample(rng).round() as i64).max(*floor_ns)
            }
            LinkModel::Asymmetric { up, down } => match direction {
                Direction::Up => up.sample_delay(direction, rng),
                Direction::Down => down.sample_delay(direction, rng),
            },
        }
    }
}

/// A bidirectional link with its own pair of PRNG streams.
#[derive(Debug)]
pub struct Link {
    model: LinkModel,
    up_rng: SimRng,
    down_rng: SimRng,
}

impl Link {
    /// `link_id` selects the stream pair `(2*id, 2*id + 1)` under `seed`.
    pub fn new(model: LinkModel, seed: u64, link_id: u64) -> Result<Link, LinkModelError> {
        model.validate()?;
        Ok(Link {
            model,
            up_rng: stream_rng(seed, 2 * link_id),
            down_rng: stream_rng(seed, 2 * link_id + 1),
        })
    }

    pub fn sample(&mut self, direction: Direction) -> i64 {
        let rng = match direction {
            Direction::Up => &mut self.up_rng,
            Direction::Down => &mut self.down_rng,
        };
        self.model.sample_delay(direction, rng)
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }
}

/// A delivered event, handed to the run loop's handler.
#[derive(Debug)]
pub struct Delivery<M> {
    pub at: SimTime,
    pub to: NodeId,
    pub msg: M,
}

struct Entry<M> {
    fire_at: SimTime,
    seq: u64,
    to: NodeId,
    msg: M,
}

// Ordering ignores the payload: (fire_at, seq) is a total order because seq
// is unique.
impl<M> PartialEq for Entry<M> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<M> Eq for Entry<M> {}
impl<M> PartialOrd for Entry<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<M> Ord for Entry<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the earliest first.
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// The event queue and simulation clock.
pub struct Simulator<M> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<M>>,
}

impl<M> Default for Simulator<M> {
    fn default() -> Self {
        Self::new()
    }
}

impl<M> Simulator<M> {
    pub fn new() -> Self {
        Simulator {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, to: NodeId, msg: M) -> Result<(), NetsimError> {
        if fire_at < self.now {
            return Err(NetsimError::SchedulingInPast { fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry { fire_at, seq, to, msg });
        Ok(())
    }

    /// Schedule `delay_ns` after the current time. Negative delays are
    /// rejected the same way as scheduling in the past.
    pub fn schedule_in(&mut self, delay_ns: i64, to: NodeId, msg: M) -> Result<(), NetsimError> {
        self.schedule(self.now + delay_ns, to, msg)
    }

    /// Fire every event with `fire_at <= t_end` in deterministic order,
    /// including events the handler schedules along the way, then advance the
    /// clock to `t_end`. The handler never observes a time earlier than the
    /// event's `fire_at`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, Delivery<M>),
    {
        while let Some(head) = self.queue.peek() {
            if head.fire_at > t_end {
                break;
            }
            let entry = self.queue.pop().expect("peeked entry present");
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            handler(
                self,
                Delivery { at: entry.fire_at, to: entry.to, msg: entry.msg },
            );
        }
        if t_end > self.now {
            self.now = t_end;
        }
    }
}
