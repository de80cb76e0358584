//! Sign + log-magnitude reals.
//!
//! Quantities such as `e^{(n+1)(1+2^{n+1})}` overflow `f64` long before the
//! windows we scan, so every magnitude is carried as a natural logarithm.
//! The logarithm itself is stored as a double-double ([`Dd`]) so that adding
//! an O(1) constant to a log of size ~10^20 is not rounded away, and exact
//! products of per-step factors are accumulated with [`ExactSum`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const INFINITY: Dd = Dd {
        hi: f64::INFINITY,
        lo: 0.0,
    };
    pub const NEG_INFINITY: Dd = Dd {
        hi: f64::NEG_INFINITY,
        lo: 0.0,
    };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact sum of two doubles.
    pub fn from_sum(a: f64, b: f64) -> Dd {
        if !(a.is_finite() && b.is_finite()) {
            return Dd::new(a + b);
        }
        let (s, e) = two_sum(a, b);
        Dd { hi: s, lo: e }
    }

    /// Rebuild from stored components (normalizes).
    pub fn from_parts(hi: f64, lo: f64) -> Dd {
        Dd::from_sum(hi, lo)
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Sign of `self - other` evaluated in double-double precision.
    pub fn total_cmp(self, other: Dd) -> Ordering {
        let d = self - other;
        if d.hi.is_nan() {
            // inf - inf
            return self.hi.total_cmp(&other.hi);
        }
        let v = if d.hi != 0.0 { d.hi } else { d.lo };
        v.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, o: Dd) -> Dd {
        if !(self.hi.is_finite() && o.hi.is_finite()) {
            return Dd::new(self.hi + o.hi);
        }
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;

    fn add(self, o: f64) -> Dd {
        self + Dd::new(o)
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;

    fn sub(self, o: f64) -> Dd {
        self + Dd::new(-o)
    }
}

/// Exact running sum of doubles (Shewchuk's non-overlapping partials).
///
/// Per-step log factors of the closed-form systems cancel in large
/// alternating pairs; this accumulator keeps every low-order bit.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            self.special += x;
            return;
        }
        let mut x = x;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn add_dd(&mut self, x: Dd) {
        self.add(x.hi);
        if x.lo != 0.0 {
            self.add(x.lo);
        }
    }

    pub fn value(&self) -> Dd {
        if self.special != 0.0 || self.special.is_nan() {
            return Dd::new(self.special);
        }
        self.partials
            .iter()
            .fold(Dd::ZERO, |acc, &p| acc + Dd::new(p))
    }
}

/// Real number `sign · e^{logmag}`; `sign == 0` iff the value is exactly zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar {
    sign: i8,
    logmag: Dd,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        sign: 0,
        logmag: Dd::NEG_INFINITY,
    };
    pub const ONE: LogScalar = LogScalar {
        sign: 1,
        logmag: Dd::ZERO,
    };
    pub const INFINITY: LogScalar = LogScalar {
        sign: 1,
        logmag: Dd::INFINITY,
    };

    /// `sign · e^{logmag}`. A `-inf` log magnitude collapses to zero.
    pub fn from_log(sign: i8, logmag: Dd) -> Self {
        if sign == 0 || logmag.hi == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogScalar {
            sign: sign.signum(),
            logmag,
        }
    }

    /// `e^{x}`.
    pub fn exp(x: f64) -> Self {
        Self::from_log(1, Dd::new(x))
    }

    pub fn exp_dd(x: Dd) -> Self {
        Self::from_log(1, x)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else if x.is_infinite() {
            LogScalar {
                sign: x.signum() as i8,
                logmag: Dd::INFINITY,
            }
        } else {
            LogScalar {
                sign: if x > 0.0 { 1 } else { -1 },
                logmag: Dd::new(x.abs().ln()),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => s as f64 * self.logmag.to_f64().exp(),
        }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn ln(self) -> Dd {
        if self.sign == 0 {
            Dd::NEG_INFINITY
        } else {
            self.logmag
        }
    }

    pub fn ln_f64(self) -> f64 {
        self.ln().to_f64()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_infinite(self) -> bool {
        self.sign != 0 && self.logmag.hi == f64::INFINITY
    }

    pub fn abs(self) -> Self {
        LogScalar {
            sign: self.sign.abs(),
            logmag: self.logmag,
        }
    }

    pub fn recip(self) -> Self {
        match self.sign {
            0 => Self::INFINITY,
            s => LogScalar {
                sign: s,
                logmag: -self.logmag,
            },
        }
    }

    /// Multiply by `e^{t}`.
    pub fn scale_exp(self, t: f64) -> Self {
        if self.sign == 0 {
            return self;
        }
        LogScalar {
            sign: self.sign,
            logmag: self.logmag + t,
        }
    }

    pub fn powf(self, p: f64) -> Self {
        match self.sign {
            0 => Self::ZERO,
            _ => LogScalar {
                sign: 1,
                logmag: Dd::new(self.logmag.hi * p) + self.logmag.lo * p,
            },
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `ln|self| - ln|other|` in double-double precision.
    pub fn log_ratio(self, other: Self) -> f64 {
        (self.ln() - other.ln()).to_f64()
    }

    /// Same sign and `|ln a - ln b| <= tol · max(1, |ln a|)`.
    pub fn log_close(self, other: Self, tol: f64) -> bool {
        if self.sign != other.sign {
            return false;
        }
        if self.sign == 0 {
            return true;
        }
        let (a, b) = (self.logmag, other.logmag);
        if !(a.is_finite() && b.is_finite()) {
            return a.hi == b.hi;
        }
        (a - b).to_f64().abs() <= tol * a.to_f64().abs().max(1.0)
    }

    /// Sum of an iterator in log-domain.
    pub fn sum<I: IntoIterator<Item = LogScalar>>(iter: I) -> Self {
        iter.into_iter().fold(Self::ZERO, |a, b| a + b)
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;

    fn mul(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 || rhs.sign == 0 {
            return LogScalar::ZERO;
        }
        LogScalar {
            sign: self.sign * rhs.sign,
            logmag: self.logmag + rhs.logmag,
        }
    }
}

impl Div for LogScalar {
    type Output = LogScalar;

    fn div(self, rhs: LogScalar) -> LogScalar {
        self * rhs.recip()
    }
}

impl Neg for LogScalar {
    type Output = LogScalar;

    fn neg(self) -> LogScalar {
        LogScalar {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }
}

impl Add for LogScalar {
    type Output = LogScalar;

    fn add(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.logmag.total_cmp(rhs.logmag) == Ordering::Less {
            (rhs, self)
        } else {
            (self, rhs)
        };
        if big.logmag.hi == f64::INFINITY {
            return big;
        }
        let delta = (small.logmag - big.logmag).to_f64();
        if big.sign == small.sign {
            LogScalar {
                sign: big.sign,
                logmag: big.logmag + delta.exp().ln_1p(),
            }
        } else if delta == 0.0 {
            LogScalar::ZERO
        } else {
            LogScalar {
                sign: big.sign,
                logmag: big.logmag + (-delta.exp_m1()).ln(),
            }
        }
    }
}

impl Sub for LogScalar {
    type Output = LogScalar;

    fn sub(self, rhs: LogScalar) -> LogScalar {
        self + (-rhs)
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let ord = match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.logmag.total_cmp(other.logmag),
                _ => other.logmag.total_cmp(self.logmag),
            },
            o => o,
        };
        Some(ord)
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "e^{}", self.logmag.to_f64()),
            _ => write!(f, "-e^{}", self.logmag.to_f64()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LogMagRepr {
    Num(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct LogScalarRepr {
    sign: i8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    logmag: Option<LogMagRepr>,
    #[serde(skip_serializing_if = "is_zero_f64", default)]
    logmag_lo: f64,
}

fn is_zero_f64(x: &f64) -> bool {
    *x == 0.0
}

impl Serialize for LogScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = if self.sign == 0 {
            LogScalarRepr {
                sign: 0,
                logmag: None,
                logmag_lo: 0.0,
            }
        } else if self.logmag.hi.is_infinite() {
            LogScalarRepr {
                sign: self.sign,
                logmag: Some(LogMagRepr::Text("inf".into())),
                logmag_lo: 0.0,
            }
        } else {
            LogScalarRepr {
                sign: self.sign,
                logmag: Some(LogMagRepr::Num(self.logmag.hi)),
                logmag_lo: self.logmag.lo,
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LogScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = LogScalarRepr::deserialize(d)?;
        if !(-1..=1).contains(&repr.sign) {
            return Err(D::Error::custom("sign must be -1, 0 or 1"));
        }
        if repr.sign == 0 {
            return Ok(LogScalar::ZERO);
        }
        let logmag = match repr.logmag {
            Some(LogMagRepr::Num(x)) => Dd::from_parts(x, repr.logmag_lo),
            Some(LogMagRepr::Text(t)) if t == "inf" => Dd::INFINITY,
            Some(LogMagRepr::Text(t)) => {
                return Err(D::Error::custom(format!("bad logmag `{t}`")))
            }
            None => return Err(D::Error::custom("nonzero LogScalar needs logmag")),
        };
        Ok(LogScalar::from_log(repr.sign, logmag))
    }
}
