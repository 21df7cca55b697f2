//! Exact rational frequency ratios.
//!
//! Rate ratios are carried as reduced integer fractions rather than floats so
//! that correction-field arithmetic is reproducible to the nanosecond across
//! platforms. A ratio measured from two timestamp differences stays exact, and
//! products of ratios stay exact until the components would overflow, at which
//! point the fraction is renormalized to a 62-bit denominator.

use std::fmt;

/// Components are renormalized once either exceeds this bound, keeping
/// multiplication overflow-free in i128.
const RENORM_LIMIT: i128 = 1 << 62;

/// A frequency ratio `num / den` with `den > 0`, stored reduced.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct RateRatio {
    num: i128,
    den: i128,
}

impl RateRatio {
    pub const ONE: RateRatio = RateRatio { num: 1, den: 1 };

    /// Build from an elapsed-time pair: `num` nanoseconds of one clock per
    /// `den` nanoseconds of another. `den` must be positive.
    pub fn from_counts(num: i64, den: i64) -> Option<RateRatio> {
        if den <= 0 {
            return None;
        }
        Some(RateRatio::reduced(num as i128, den as i128))
    }

    fn reduced(num: i128, den: i128) -> RateRatio {
        debug_assert!(den > 0);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs());
        let mut r = RateRatio {
            num: num / g as i128,
            den: den / g as i128,
        };
        if r.num.abs() >= RENORM_LIMIT || r.den >= RENORM_LIMIT {
            r = r.renormalized();
        }
        r
    }

    /// Shrink the fraction onto a 62-bit lattice. Loses at most 2^-62
    /// relative precision, which is far below a nanosecond over any
    /// representable interval.
    fn renormalized(self) -> RateRatio {
        let shift = {
            let mag = self.num.unsigned_abs().max(self.den.unsigned_abs());
            let mut s = 0u32;
            while (mag >> s) >= RENORM_LIMIT as u128 {
                s += 1;
            }
            s
        };
        if shift == 0 {
            return self;
        }
        let den = (self.den >> shift).max(1);
        let num = round_div(self.num, 1 << shift);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs());
        RateRatio {
            num: num / g as i128,
            den: den / g as i128,
        }
    }

    /// Exact product of two ratios.
    pub fn mul(self, other: RateRatio) -> RateRatio {
        // Cross-reduce before multiplying to delay renormalization.
        let g1 = gcd(self.num.unsigned_abs(), other.den.unsigned_abs()) as i128;
        let g2 = gcd(other.num.unsigned_abs(), self.den.unsigned_abs()) as i128;
        RateRatio::reduced(
            (self.num / g1) * (other.num / g2),
            (self.den / g2) * (other.den / g1),
        )
    }

    /// `round(value * num / den)`, half away from zero.
    pub fn scale_round(self, value_ns: i64) -> i64 {
        round_div(value_ns as i128 * self.num, self.den) as i64
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `(numerator, denominator)`, reduced, denominator positive.
    pub fn parts(self) -> (i128, i128) {
        (self.num, self.den)
    }

    /// Deviation from unity in parts per billion, rounded.
    pub fn ppb_from_one(self) -> i64 {
        round_div((self.num - self.den) * 1_000_000_000, self.den) as i64
    }
}

impl Default for RateRatio {
    fn default() -> Self {
        RateRatio::ONE
    }
}

impl fmt::Debug for RateRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// `round(a / b)` for b > 0, half away from zero.
fn round_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    if a >= 0 {
        (a + b / 2) / b
    } else {
        -((-a + b / 2) / b)
    }
}
