use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Signed, Zero};

use super::rational::{format_rational, Rational};

/// Exact element `a + b·√2` of the field Q(√2).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadraticNumber {
    pub a: Rational,
    pub b: Rational,
}

impl QuadraticNumber {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        Self { a, b: Rational::zero() }
    }

    pub fn sqrt2() -> Self {
        Self { a: Rational::zero(), b: Rational::from_integer(1.into()) }
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Galois conjugate `a - b·√2`.
    pub fn conjugate(&self) -> Self {
        Self { a: self.a.clone(), b: -&self.b }
    }

    /// Field norm `a² - 2b²`.
    pub fn norm(&self) -> Rational {
        &self.a * &self.a - Rational::from_integer(2.into()) * &self.b * &self.b
    }

    pub fn abs(&self) -> Self {
        if quad_sign(self) < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        super::rational::to_f64(&self.a) + std::f64::consts::SQRT_2 * super::rational::to_f64(&self.b)
    }
}

/// Exact sign of `a + b·√2`.
pub fn quad_sign(x: &QuadraticNumber) -> i8 {
    let sa = signum(&x.a);
    let sb = signum(&x.b);
    if sa == sb || sb == 0 {
        return sa;
    }
    if sa == 0 {
        return sb;
    }
    // Opposite signs: the larger of a² and 2b² decides.
    let a2 = &x.a * &x.a;
    let b2 = Rational::from_integer(2.into()) * &x.b * &x.b;
    match a2.cmp(&b2) {
        Ordering::Greater => sa,
        Ordering::Less => sb,
        Ordering::Equal => unreachable!("√2 is irrational"),
    }
}

fn signum(r: &Rational) -> i8 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

impl Ord for QuadraticNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        quad_sign(&(self - other)).cmp(&0)
    }
}

impl PartialOrd for QuadraticNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn short(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format_rational(r)
    }
}

/// `1/2`, `√2/4`, `3 - 2·√2` and the like.
impl fmt::Display for QuadraticNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one = Rational::from_integer(1.into());
        let radical = |b: &Rational| {
            if *b == one {
                "√2".to_string()
            } else if b.is_integer() {
                format!("{}·√2", b.numer())
            } else if b.numer() == one.numer() {
                format!("√2/{}", b.denom())
            } else {
                format!("{}·√2", format_rational(b))
            }
        };
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => f.write_str(&short(&self.a)),
            (true, false) if self.b.is_negative() => write!(f, "-{}", radical(&-&self.b)),
            (true, false) => f.write_str(&radical(&self.b)),
            (false, false) => {
                let sign = if self.b.is_negative() { '-' } else { '+' };
                write!(f, "{} {sign} {}", short(&self.a), radical(&self.b.abs()))
            }
        }
    }
}

impl<'a> Add<&'a QuadraticNumber> for &'a QuadraticNumber {
    type Output = QuadraticNumber;
    fn add(self, o: &QuadraticNumber) -> QuadraticNumber {
        QuadraticNumber { a: &self.a + &o.a, b: &self.b + &o.b }
    }
}

impl<'a> Sub<&'a QuadraticNumber> for &'a QuadraticNumber {
    type Output = QuadraticNumber;
    fn sub(self, o: &QuadraticNumber) -> QuadraticNumber {
        QuadraticNumber { a: &self.a - &o.a, b: &self.b - &o.b }
    }
}

impl<'a> Mul<&'a QuadraticNumber> for &'a QuadraticNumber {
    type Output = QuadraticNumber;
    fn mul(self, o: &QuadraticNumber) -> QuadraticNumber {
        let two = Rational::from_integer(2.into());
        QuadraticNumber {
            a: &self.a * &o.a + two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }
}

impl<'a> Div<&'a QuadraticNumber> for &'a QuadraticNumber {
    type Output = QuadraticNumber;
    /// Panics on division by zero, like the rational division it wraps.
    fn div(self, o: &QuadraticNumber) -> QuadraticNumber {
        let n = o.norm();
        let num = self * &o.conjugate();
        QuadraticNumber { a: num.a / &n, b: num.b / n }
    }
}

impl Neg for &QuadraticNumber {
    type Output = QuadraticNumber;
    fn neg(self) -> QuadraticNumber {
        QuadraticNumber { a: -&self.a, b: -&self.b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::q;
    use proptest::prelude::*;

    #[test]
    fn display_forms() {
        assert_eq!(qn((1, 2), (0, 1)).to_string(), "1/2");
        assert_eq!(qn((0, 1), (1, 4)).to_string(), "√2/4");
        assert_eq!(qn((3, 1), (-2, 1)).to_string(), "3 - 2·√2");
        assert_eq!(qn((0, 1), (-3, 5)).to_string(), "-3/5·√2");
        assert_eq!(qn((0, 1), (1, 1)).to_string(), "√2");
    }

    fn qn(a: (i64, i64), b: (i64, i64)) -> QuadraticNumber {
        QuadraticNumber::new(q(a.0, a.1), q(b.0, b.1))
    }

    #[test]
    fn sign_examples() {
        assert_eq!(quad_sign(&QuadraticNumber::zero()), 0);
        // √2 - 1 > 0
        assert_eq!(quad_sign(&qn((-1, 1), (1, 1))), 1);
        // 3 - 2√2 > 0 since 9 > 8
        assert_eq!(quad_sign(&qn((3, 1), (-2, 1))), 1);
        assert_eq!(quad_sign(&qn((-3, 1), (2, 1))), -1);
        assert_eq!(quad_sign(&qn((7, 5), (-1, 1))), -1);
    }

    #[test]
    fn sqrt2_squared_is_two() {
        let s = QuadraticNumber::sqrt2();
        assert_eq!(&s * &s, QuadraticNumber::rational(q(2, 1)));
        assert_eq!(&QuadraticNumber::rational(q(1, 1)) / &s, qn((0, 1), (1, 2)));
    }

    fn arb_quad() -> impl Strategy<Value = QuadraticNumber> {
        (-500i64..500, 1i64..50, -500i64..500, 1i64..50).prop_map(|(a, da, b, db)| qn((a, da), (b, db)))
    }

    proptest! {
        #[test]
        fn sign_is_multiplicative(x in arb_quad(), y in arb_quad()) {
            prop_assert_eq!(quad_sign(&(&x * &y)), quad_sign(&x) * quad_sign(&y));
        }

        #[test]
        fn rational_sign_agrees(a in -1000i64..1000, d in 1i64..100) {
            let r = q(a, d);
            prop_assert_eq!(quad_sign(&QuadraticNumber::rational(r.clone())), signum(&r));
        }

        #[test]
        fn zero_iff_both_parts_zero(x in arb_quad()) {
            prop_assert_eq!(quad_sign(&x) == 0, x.a.is_zero() && x.b.is_zero());
        }

        #[test]
        fn sign_matches_float_when_well_separated(x in arb_quad()) {
            let f = x.to_f64();
            prop_assume!(f.abs() > 1e-9);
            prop_assert_eq!(quad_sign(&x), if f > 0.0 { 1 } else { -1 });
        }

        #[test]
        fn division_inverts_multiplication(x in arb_quad(), y in arb_quad()) {
            prop_assume!(!y.is_zero());
            prop_assert_eq!(&(&x * &y) / &y, x);
        }
    }
}
