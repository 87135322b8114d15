//! Exact scalars: rationals, the quadratic field Q(√2), and a directed-rounding
//! binary float for the places where irrational weights enter.

mod bigfloat;
mod quadratic;
mod rational;

pub use bigfloat::{precision_from_env, BigFloat, Interval, Round, DEFAULT_PRECISION, PRECISION_ENV};
pub use quadratic::{quad_sign, QuadraticNumber};
pub(crate) use rational::q;
pub use rational::{
    as_integer, format_rational, from_int, parse_rational, pow2_neg, rat, serde_extended, serde_rational,
    slope_cap, to_decimal, to_f64, Rational,
};
