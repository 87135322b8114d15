//! Binary floating point on top of `num-bigint`, with directed rounding.
//!
//! A value is `mant · 2^exp` with `|mant| < 2^prec` after rounding. Every
//! operation takes a [`Round`] mode so that interval endpoints can be pushed
//! outward; the `std::ops` impls round to nearest at the larger operand
//! precision.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rational::Rational;

pub const DEFAULT_PRECISION: u32 = 256;

/// Environment variable overriding the working precision in bits.
pub const PRECISION_ENV: &str = "KOLMO_PRECISION";

/// Working precision from `KOLMO_PRECISION`, or [`DEFAULT_PRECISION`].
pub fn precision_from_env() -> u32 {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&p| p >= 16)
        .unwrap_or(DEFAULT_PRECISION)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    /// Toward negative infinity.
    Down,
    /// Toward positive infinity.
    Up,
    /// To nearest, ties to even.
    Nearest,
}

#[derive(Clone)]
pub struct BigFloat {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

impl BigFloat {
    pub fn zero(prec: u32) -> Self {
        Self { mant: BigInt::zero(), exp: 0, prec }
    }

    pub fn from_int(n: i64, prec: u32) -> Self {
        Self::from_parts(BigInt::from(n), 0, prec, Round::Nearest)
    }

    /// `mant · 2^exp`, rounded to `prec` bits.
    pub fn from_parts(mant: BigInt, exp: i64, prec: u32, mode: Round) -> Self {
        let (mant, exp) = round_mantissa(mant, exp, prec, mode);
        Self { mant, exp, prec }
    }

    pub fn from_rational(r: &Rational, prec: u32, mode: Round) -> Self {
        divide_integers(r.numer(), r.denom(), 0, prec, mode)
    }

    /// `2^(k/n)` rounded in the given direction.
    pub fn pow2_frac(k: u32, n: u32, prec: u32, mode: Round) -> Self {
        assert!(n > 0, "root index must be positive");
        let guard = prec as u64 + 2;
        let radicand = BigUint::one() << (k as u64 + n as u64 * guard);
        let root = radicand.nth_root(n);
        let exact = root.pow(n) == radicand;
        let mut mant = BigInt::from_biguint(Sign::Plus, root);
        let mut exp = -(guard as i64);
        if !exact {
            mant = (mant << 1u32) + 1;
            exp -= 1;
        }
        Self::from_parts(mant, exp, prec, mode)
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn with_precision(&self, prec: u32, mode: Round) -> Self {
        Self::from_parts(self.mant.clone(), self.exp, prec, mode)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn signum(&self) -> i8 {
        match self.mant.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Self { mant: self.mant.abs(), exp: self.exp, prec: self.prec }
    }

    /// Exact value as a rational.
    pub fn to_rational(&self) -> Rational {
        if self.exp >= 0 {
            Rational::from_integer(&self.mant << self.exp as u64)
        } else {
            Rational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.mant.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = &self.mant >> shift as u64;
        let (sign, digits) = top.to_u64_digits();
        let mag = digits.first().copied().unwrap_or(0) as f64;
        let v = mag * 2f64.powi((self.exp + shift).clamp(-1100, 1100) as i32);
        if sign == Sign::Minus {
            -v
        } else {
            v
        }
    }

    /// Position just above the most significant bit; `None` for zero.
    fn top(&self) -> Option<i64> {
        (!self.mant.is_zero()).then(|| self.mant.bits() as i64 + self.exp)
    }

    pub fn add_round(&self, other: &Self, prec: u32, mode: Round) -> Self {
        let (Some(ta), Some(tb)) = (self.top(), other.top()) else {
            let nz = if self.is_zero() { other } else { self };
            return Self::from_parts(nz.mant.clone(), nz.exp, prec, mode);
        };
        // An operand far below the rounding position only matters through its
        // sign; replace it with a sticky unit so alignment stays cheap.
        let cutoff = ta.max(tb) - prec as i64 - 4;
        let sticky = |x: &Self, t: i64| -> (BigInt, i64) {
            if t < cutoff {
                (BigInt::from(x.signum()), cutoff - 1)
            } else {
                (x.mant.clone(), x.exp)
            }
        };
        let (ma, ea) = sticky(self, ta);
        let (mb, eb) = sticky(other, tb);
        let e = ea.min(eb);
        let sum = (ma << (ea - e) as u64) + (mb << (eb - e) as u64);
        Self::from_parts(sum, e, prec, mode)
    }

    pub fn sub_round(&self, other: &Self, prec: u32, mode: Round) -> Self {
        self.add_round(&-other, prec, mode)
    }

    pub fn mul_round(&self, other: &Self, prec: u32, mode: Round) -> Self {
        Self::from_parts(&self.mant * &other.mant, self.exp + other.exp, prec, mode)
    }

    /// Panics when `other` is zero.
    pub fn div_round(&self, other: &Self, prec: u32, mode: Round) -> Self {
        assert!(!other.is_zero(), "BigFloat division by zero");
        divide_integers(&self.mant, &other.mant, self.exp - other.exp, prec, mode)
    }

    pub fn mul_rational(&self, r: &Rational, prec: u32, mode: Round) -> Self {
        // Exact numerator product, then a single rounded division.
        divide_integers(&(&self.mant * r.numer()), r.denom(), self.exp, prec, mode)
    }

    pub fn max_prec(&self, other: &Self) -> u32 {
        self.prec.max(other.prec)
    }

    /// Decimal rendering with `digits` significant digits (for reports).
    pub fn to_decimal_string(&self, digits: usize) -> String {
        if self.is_zero() {
            return "0".into();
        }
        format!("{:.*e}", digits.saturating_sub(1), self.to_f64())
    }
}

/// `(n / d) · 2^exp` rounded to `prec` bits.
fn divide_integers(n: &BigInt, d: &BigInt, exp: i64, prec: u32, mode: Round) -> BigFloat {
    assert!(!d.is_zero(), "division by zero");
    if n.is_zero() {
        return BigFloat::zero(prec);
    }
    let shift = (prec as i64 + d.bits() as i64 - n.bits() as i64 + 2).max(0) as u64;
    let (quot, rem) = (n << shift).div_mod_floor(d);
    let (mant, e) = if rem.is_zero() {
        (quot, exp - shift as i64)
    } else {
        // Sticky bit: the true quotient lies strictly between quot and quot + 1.
        ((quot << 1u32) + 1, exp - shift as i64 - 1)
    };
    BigFloat::from_parts(mant, e, prec, mode)
}

fn round_mantissa(mant: BigInt, exp: i64, prec: u32, mode: Round) -> (BigInt, i64) {
    if mant.is_zero() {
        return (mant, 0);
    }
    let bits = mant.bits();
    if bits <= prec as u64 {
        return (mant, exp);
    }
    let shift = bits - prec as u64;
    // Arithmetic shift rounds toward negative infinity.
    let floor = &mant >> shift;
    let rem = &mant - (&floor << shift);
    let rounded = if rem.is_zero() {
        floor
    } else {
        match mode {
            Round::Down => floor,
            Round::Up => floor + 1,
            Round::Nearest => {
                let half = BigInt::one() << (shift - 1);
                match (rem).cmp(&half) {
                    Ordering::Greater => floor + 1,
                    Ordering::Less => floor,
                    Ordering::Equal => {
                        if floor.is_odd() {
                            floor + 1
                        } else {
                            floor
                        }
                    }
                }
            }
        }
    };
    (rounded, exp + shift as i64)
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BigFloat {}

impl Ord for BigFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb || sa == 0 {
            return sa.cmp(&sb);
        }
        let (ta, tb) = (self.top().unwrap(), other.top().unwrap());
        if ta != tb {
            let mag = ta.cmp(&tb);
            return if sa > 0 { mag } else { mag.reverse() };
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - e) as u64;
        let b = &other.mant << (other.exp - e) as u64;
        a.cmp(&b)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigFloat({:e})", self.to_f64())
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string(17))
    }
}

impl<'a> Add<&'a BigFloat> for &'a BigFloat {
    type Output = BigFloat;
    fn add(self, o: &BigFloat) -> BigFloat {
        self.add_round(o, self.max_prec(o), Round::Nearest)
    }
}

impl<'a> Sub<&'a BigFloat> for &'a BigFloat {
    type Output = BigFloat;
    fn sub(self, o: &BigFloat) -> BigFloat {
        self.sub_round(o, self.max_prec(o), Round::Nearest)
    }
}

impl<'a> Mul<&'a BigFloat> for &'a BigFloat {
    type Output = BigFloat;
    fn mul(self, o: &BigFloat) -> BigFloat {
        self.mul_round(o, self.max_prec(o), Round::Nearest)
    }
}

impl<'a> Div<&'a BigFloat> for &'a BigFloat {
    type Output = BigFloat;
    fn div(self, o: &BigFloat) -> BigFloat {
        self.div_round(o, self.max_prec(o), Round::Nearest)
    }
}

impl Neg for &BigFloat {
    type Output = BigFloat;
    fn neg(self) -> BigFloat {
        BigFloat { mant: -&self.mant, exp: self.exp, prec: self.prec }
    }
}

/// Closed interval `[lo, hi]` with outward-rounded endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigFloat,
    pub hi: BigFloat,
}

impl Interval {
    pub fn point(x: BigFloat) -> Self {
        Self { lo: x.clone(), hi: x }
    }

    pub fn from_rational(r: &Rational, prec: u32) -> Self {
        Self {
            lo: BigFloat::from_rational(r, prec, Round::Down),
            hi: BigFloat::from_rational(r, prec, Round::Up),
        }
    }

    pub fn pow2_frac(k: u32, n: u32, prec: u32) -> Self {
        Self {
            lo: BigFloat::pow2_frac(k, n, prec, Round::Down),
            hi: BigFloat::pow2_frac(k, n, prec, Round::Up),
        }
    }

    pub fn add(&self, o: &Self, prec: u32) -> Self {
        Self {
            lo: self.lo.add_round(&o.lo, prec, Round::Down),
            hi: self.hi.add_round(&o.hi, prec, Round::Up),
        }
    }

    pub fn mul(&self, o: &Self, prec: u32) -> Self {
        let lows = [
            self.lo.mul_round(&o.lo, prec, Round::Down),
            self.lo.mul_round(&o.hi, prec, Round::Down),
            self.hi.mul_round(&o.lo, prec, Round::Down),
            self.hi.mul_round(&o.hi, prec, Round::Down),
        ];
        let highs = [
            self.lo.mul_round(&o.lo, prec, Round::Up),
            self.lo.mul_round(&o.hi, prec, Round::Up),
            self.hi.mul_round(&o.lo, prec, Round::Up),
            self.hi.mul_round(&o.hi, prec, Round::Up),
        ];
        Self {
            lo: lows.into_iter().min().unwrap(),
            hi: highs.into_iter().max().unwrap(),
        }
    }

    /// Widens both ends by `r >= 0`.
    pub fn widen(&self, r: &BigFloat, prec: u32) -> Self {
        Self {
            lo: self.lo.sub_round(r, prec, Round::Down),
            hi: self.hi.add_round(r, prec, Round::Up),
        }
    }

    pub fn contains_rational(&self, r: &Rational) -> bool {
        self.lo.to_rational() <= *r && *r <= self.hi.to_rational()
    }

    pub fn width(&self, prec: u32) -> BigFloat {
        self.hi.sub_round(&self.lo, prec, Round::Up)
    }

    /// Centre of the interval, rounded to nearest.
    pub fn midpoint(&self, prec: u32) -> BigFloat {
        let sum = self.lo.add_round(&self.hi, prec + 1, Round::Nearest);
        sum.mul_rational(&Rational::new(1.into(), 2.into()), prec, Round::Nearest)
    }

    /// Product with an exact rational.
    pub fn scale(&self, r: &Rational, prec: u32) -> Self {
        let (a, b) = if r.is_negative() { (&self.hi, &self.lo) } else { (&self.lo, &self.hi) };
        Self { lo: a.mul_rational(r, prec, Round::Down), hi: b.mul_rational(r, prec, Round::Up) }
    }
}
