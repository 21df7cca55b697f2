//! Simulated device clocks read against the global simulation timeline.
//!
//! A [`SimulatedClock`] models a local oscillator with a phase offset, a
//! constant frequency error and a timestamp quantization step. Readings are
//! computed in integer nanoseconds with 128-bit intermediates, so a given
//! clock state produces bit-identical timestamps on every platform.

use std::fmt;
use std::ops::{Add, Sub};

use thiserror::Error;

/// Fixed-point scale for drift arithmetic: drift is stored in parts per
/// billion, i.e. nanoseconds gained per second of true time.
const SCALE: i128 = 1_000_000_000;

/// Largest accepted |drift| in parts per million.
pub const DRIFT_PPM_LIMIT: f64 = 1000.0;

/// Nanoseconds of true simulation time.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ns(ns: i64) -> Self {
        SimTime(ns)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime((secs * 1e9).round() as i64)
    }

    pub fn ns(self) -> i64 {
        self.0
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `time + delay_ns`
impl Add<i64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: i64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

/// Elapsed nanoseconds between two instants.
impl Sub for SimTime {
    type Output = i64;
    fn sub(self, rhs: SimTime) -> i64 {
        self.0 - rhs.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClockError {
    #[error("drift {0} ppm exceeds the ±{DRIFT_PPM_LIMIT} ppm bound")]
    DriftOutOfRange(f64),
    #[error("granularity must be >= 1 ns, got {0}")]
    BadGranularity(i64),
}

/// A local clock with phase offset, constant frequency error and read
/// granularity.
///
/// `read(now) = quantize(offset + (1 + drift_ppm * 1e-6) * now, granularity)`
/// where quantization truncates toward negative infinity. Drift is held as an
/// integer in parts per billion, giving 0.001 ppm resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulatedClock {
    offset_ns: i64,
    drift_ppb: i64,
    granularity_ns: i64,
    last_adjust: SimTime,
}

impl SimulatedClock {
    pub fn new(offset_ns: i64, drift_ppm: f64, granularity_ns: i64) -> Result<Self, ClockError> {
        if !drift_ppm.is_finite() || drift_ppm.abs() > DRIFT_PPM_LIMIT {
            return Err(ClockError::DriftOutOfRange(drift_ppm));
        }
        Self::with_drift_ppb(offset_ns, (drift_ppm * 1000.0).round() as i64, granularity_ns)
    }

    pub fn with_drift_ppb(
        offset_ns: i64,
        drift_ppb: i64,
        granularity_ns: i64,
    ) -> Result<Self, ClockError> {
        if drift_ppb.abs() > (DRIFT_PPM_LIMIT * 1000.0) as i64 {
            return Err(ClockError::DriftOutOfRange(drift_ppb as f64 / 1000.0));
        }
        if granularity_ns < 1 {
            return Err(ClockError::BadGranularity(granularity_ns));
        }
        Ok(SimulatedClock {
            offset_ns,
            drift_ppb,
            granularity_ns,
            last_adjust: SimTime::ZERO,
        })
    }

    /// A perfect clock: zero offset, zero drift, 1 ns reads.
    pub fn ideal() -> Self {
        SimulatedClock {
            offset_ns: 0,
            drift_ppb: 0,
            granularity_ns: 1,
            last_adjust: SimTime::ZERO,
        }
    }

    pub fn offset_ns(&self) -> i64 {
        self.offset_ns
    }

    pub fn drift_ppb(&self) -> i64 {
        self.drift_ppb
    }

    pub fn granularity_ns(&self) -> i64 {
        self.granularity_ns
    }

    pub fn last_adjust(&self) -> SimTime {
        self.last_adjust
    }

    /// Unquantized reading scaled by 1e9 (exact).
    fn raw_scaled(&self, now: SimTime) -> i128 {
        (self.offset_ns as i128 + now.ns() as i128) * SCALE
            + now.ns() as i128 * self.drift_ppb as i128
    }

    /// The clock's local timestamp at true time `now`.
    pub fn read(&self, now: SimTime) -> i64 {
        let lattice = SCALE * self.granularity_ns as i128;
        (self.raw_scaled(now).div_euclid(lattice) * self.granularity_ns as i128) as i64
    }

    /// Step the phase by `delta_ns`. Drift is unchanged; for deltas that are a
    /// multiple of the granularity the post-step reading is exactly the old
    /// reading plus `delta_ns`, otherwise it lands within one quantization
    /// step of that.
    pub fn step_adjust(&mut self, delta_ns: i64, now: SimTime) {
        self.offset_ns += delta_ns;
        self.last_adjust = now;
    }

    /// Ground-truth synchronization error: this clock's reading minus the
    /// reference clock's reading at the same true instant.
    pub fn true_offset(&self, reference: &SimulatedClock, now: SimTime) -> i64 {
        self.read(now) - reference.read(now)
    }

    /// Earliest true time at which the clock reads at least `target_local_ns`.
    pub fn when_reads_at_least(&self, target_local_ns: i64) -> SimTime {
        let g = self.granularity_ns as i128;
        // Readings are multiples of g; the first reading >= target is the
        // target rounded up onto the lattice.
        let target_lattice = ceil_div(target_local_ns as i128, g) * g;
        let numer = (target_lattice - self.offset_ns as i128) * SCALE;
        let denom = SCALE + self.drift_ppb as i128;
        SimTime::from_ns(ceil_div(numer, denom) as i64)
    }
}

/// ceil(a / b) for b > 0.
pub(crate) fn ceil_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    -((-a).div_euclid(b))
}
