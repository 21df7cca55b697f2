//! Dual-carriage motion model: clock error made visible as distance.
//!
//! Two linear carriages execute the same trapezoidal stroke, each triggered
//! when its own corrected clock reads the commanded start time. Residual
//! clock error between the two stations becomes a start-time skew, and while
//! both carriages cruise the position gap is exactly `v_max * skew`, so the
//! peak gap recovers the skew. An optional sensor model quantizes positions
//! the way a triangulating laser sensor plus a 12-bit ADC would.

use rand::Rng;
use thiserror::Error;

use crate::netsim::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum DemonstratorError {
    #[error(
        "no trapezoid: v_max {v_max} m/s, a_max {a_max} m/s², stroke {stroke_m} m \
         (need all > 0 and v_max²/a_max <= stroke)"
    )]
    ProfileInfeasible { v_max: f64, a_max: f64, stroke_m: f64 },
}

/// Symmetric trapezoidal velocity profile over a fixed stroke.
#[derive(Clone, Copy, Debug)]
pub struct MotionProfile {
    v_max: f64,
    a_max: f64,
    stroke_m: f64,
    t_acc: f64,
    total: f64,
}

impl MotionProfile {
    pub fn new(v_max: f64, a_max: f64, stroke_m: f64) -> Result<Self, DemonstratorError> {
        let bad = !(v_max > 0.0 && a_max > 0.0 && stroke_m > 0.0)
            || v_max * v_max / a_max > stroke_m;
        if bad {
            return Err(DemonstratorError::ProfileInfeasible { v_max, a_max, stroke_m });
        }
        Ok(MotionProfile {
            v_max,
            a_max,
            stroke_m,
            t_acc: v_max / a_max,
            total: stroke_m / v_max + v_max / a_max,
        })
    }

    /// The reference rig: 4 m/s, 30 m/s², 1 m stroke.
    pub fn standard() -> Self {
        Self::new(4.0, 30.0, 1.0).expect("reference profile is feasible")
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn stroke_m(&self) -> f64 {
        self.stroke_m
    }

    /// Ramp duration, also the decel duration.
    pub fn accel_time_s(&self) -> f64 {
        self.t_acc
    }

    /// Stroke completion time: `stroke/v_max + v_max/a_max`.
    pub fn total_time_s(&self) -> f64 {
        self.total
    }

    /// Cruise window `[t_acc, total - t_acc]` relative to the start.
    pub fn cruise_interval_s(&self) -> (f64, f64) {
        (self.t_acc, self.total - self.t_acc)
    }

    /// Position in meters, `tau` seconds after the start. Clamped to 0
    /// before the start and to the stroke after completion.
    pub fn position(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if tau <= self.t_acc {
            0.5 * self.a_max * tau * tau
        } else if tau <= self.total - self.t_acc {
            self.v_max * self.v_max / (2.0 * self.a_max) + self.v_max * (tau - self.t_acc)
        } else if tau < self.total {
            let remaining = self.total - tau;
            self.stroke_m - 0.5 * self.a_max * remaining * remaining
        } else {
            self.stroke_m
        }
    }
}

/// One carriage's executed stroke, anchored at the true instant its local
/// clock crossed the commanded start time.
#[derive(Clone, Copy, Debug)]
pub struct CarriageRun {
    pub profile: MotionProfile,
    pub actual_start_true_ns: i64,
}

impl CarriageRun {
    pub fn position_at(&self, t_true_ns: i64) -> f64 {
        self.profile.position((t_true_ns - self.actual_start_true_ns) as f64 * 1e-9)
    }
}

/// Position gap `s1 - s2` at one true instant.
pub fn delta_s(run1: &CarriageRun, run2: &CarriageRun, t_true_ns: i64) -> f64 {
    run1.position_at(t_true_ns) - run2.position_at(t_true_ns)
}

/// Start-time skew recovered from the peak cruise-phase gap:
/// `dt = ds_max / v_max`.
pub fn recover_dt_s(ds_max_m: f64, v_max: f64) -> f64 {
    assert!(v_max > 0.0);
    ds_max_m / v_max
}

/// Triangulating distance sensor: position-dependent resolution plus an ADC
/// grid over the full stroke.
#[derive(Clone, Copy, Debug)]
pub struct SensorModel {
    pub near_resolution_um: f64,
    pub far_resolution_um: f64,
    pub adc_bits: u32,
    pub enabled: bool,
}

impl SensorModel {
    /// Pass-through: reading equals true position.
    pub fn ideal() -> Self {
        SensorModel { near_resolution_um: 0.0, far_resolution_um: 0.0, adc_bits: 0, enabled: false }
    }

    /// The reference sensor: 3 um near, 63 um far, 12-bit ADC.
    pub fn standard() -> Self {
        SensorModel { near_resolution_um: 3.0, far_resolution_um: 63.0, adc_bits: 12, enabled: true }
    }

    /// Optical resolution in meters at a position, linear between the near
    /// and far endpoints of the stroke.
    pub fn resolution_at_m(&self, position_m: f64, stroke_m: f64) -> f64 {
        let frac = (position_m / stroke_m).clamp(0.0, 1.0);
        (self.near_resolution_um + (self.far_resolution_um - self.near_resolution_um) * frac) * 1e-6
    }

    /// One reading: true position, noise within plus/minus half the local
    /// resolution, snapped first to the resolution step and then to the ADC
    /// grid, clamped to the stroke.
    pub fn measure(&self, true_position_m: f64, stroke_m: f64, rng: &mut SimRng) -> f64 {
        if !self.enabled {
            return true_position_m;
        }
        let res = self.resolution_at_m(true_position_m, stroke_m);
        let noisy = true_position_m + rng.random_range(-0.5 * res..=0.5 * res);
        let on_res_grid = if res > 0.0 { (noisy / res).round() * res } else { noisy };
        let adc_step = stroke_m / f64::from(1u32 << self.adc_bits);
        let on_adc_grid = (on_res_grid / adc_step).round() * adc_step;
        on_adc_grid.clamp(0.0, stroke_m)
    }

    pub fn adc_step_m(&self, stroke_m: f64) -> f64 {
        stroke_m / f64::from(1u32 << self.adc_bits)
    }
}

/// One row of a sampled dual-carriage trace. Raw columns are exact model
/// positions; `_q` columns went through the sensor.
#[derive(Clone, Copy, Debug)]
pub struct MotionSample {
    pub t_ns: i64,
    pub s1_m: f64,
    pub s2_m: f64,
    pub ds_m: f64,
    pub s1_q_m: f64,
    pub s2_q_m: f64,
    pub ds_q_m: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct MotionStats {
    /// Peak |s1 - s2| over the sampled grid, ideal positions.
    pub ds_max_m: f64,
    /// Peak |s1_q - s2_q| with the sensor applied.
    pub ds_max_quantized_m: f64,
    /// Grid instant of the ideal peak.
    pub t_at_max_ns: i64,
    /// `ds_max / v_max`.
    pub recovered_dt_s: f64,
    /// The peak lies inside both carriages' cruise windows (vacuous when the
    /// gap is identically zero).
    pub max_in_cruise_overlap: bool,
}

/// Sample both runs on a fixed true-time grid and reduce to the peak-gap
/// statistics.
pub fn sample_runs(
    run1: &CarriageRun,
    run2: &CarriageRun,
    sensor: &SensorModel,
    grid_ns: i64,
    rng: &mut SimRng,
) -> (Vec<MotionSample>, MotionStats) {
    assert!(grid_ns > 0, "sampling grid must be positive");
    let start = run1.actual_start_true_ns.min(run2.actual_start_true_ns);
    let total_ns = (run1.profile.total_time_s() * 1e9).ceil() as i64;
    let end = run1.actual_start_true_ns.max(run2.actual_start_true_ns) + total_ns;

    let stroke = run1.profile.stroke_m();
    let mut samples = Vec::with_capacity(((end - start) / grid_ns + 2) as usize);
    let mut ds_max = 0.0f64;
    let mut ds_q_max = 0.0f64;
    let mut t_at_max = start;
    let mut t = start;
    while t <= end {
        let s1 = run1.position_at(t);
        let s2 = run2.position_at(t);
        let ds = s1 - s2;
        let s1_q = sensor.measure(s1, stroke, rng);
        let s2_q = sensor.measure(s2, stroke, rng);
        let ds_q = s1_q - s2_q;
        if ds.abs() > ds_max {
            ds_max = ds.abs();
            t_at_max = t;
        }
        ds_q_max = ds_q_max.max(ds_q.abs());
        samples.push(MotionSample { t_ns: t, s1_m: s1, s2_m: s2, ds_m: ds, s1_q_m: s1_q, s2_q_m: s2_q, ds_q_m: ds_q });
        t += grid_ns;
    }

    let (c_lo, c_hi) = run1.profile.cruise_interval_s();
    let overlap_lo =
        run1.actual_start_true_ns.max(run2.actual_start_true_ns) + (c_lo * 1e9).round() as i64;
    let overlap_hi =
        run1.actual_start_true_ns.min(run2.actual_start_true_ns) + (c_hi * 1e9).round() as i64;
    let max_in_cruise_overlap =
        ds_max == 0.0 || (t_at_max >= overlap_lo && t_at_max <= overlap_hi);

    let stats = MotionStats {
        ds_max_m: ds_max,
        ds_max_quantized_m: ds_q_max,
        t_at_max_ns: t_at_max,
        recovered_dt_s: recover_dt_s(ds_max, run1.profile.v_max()),
        max_in_cruise_overlap,
    };
    (samples, stats)
}
