//! Continuous piecewise-linear functions: ψ_j, the outer functions χ^q_r and
//! the staircase candidates of the counterexample.

use std::fmt::Debug;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, to_decimal, BigFloat, QuadraticNumber, Rational};
use crate::town::RefinementState;

/// The field operations a knot coordinate needs.
pub trait Scalar: Clone + Ord + Debug {
    fn zero_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn divide(&self, o: &Self) -> Self;
    fn magnitude(&self) -> Self;
}

impl Scalar for Rational {
    fn zero_like(&self) -> Self {
        Rational::zero()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn divide(&self, o: &Self) -> Self {
        self / o
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
}

impl Scalar for QuadraticNumber {
    fn zero_like(&self) -> Self {
        QuadraticNumber::zero()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn divide(&self, o: &Self) -> Self {
        self / o
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
}

impl Scalar for BigFloat {
    fn zero_like(&self) -> Self {
        BigFloat::zero(self.precision())
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn divide(&self, o: &Self) -> Self {
        self / o
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
}

/// Continuous piecewise-linear function given by knots with strictly
/// increasing abscissae, constant beyond the outermost knots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseLinear<S> {
    knots: Vec<(S, S)>,
}

impl<S: Scalar> PiecewiseLinear<S> {
    pub fn new(knots: Vec<(S, S)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("piecewise-linear function needs at least one knot".into()));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("knot abscissae must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    pub fn constant(x: S, y: S) -> Self {
        Self { knots: vec![(x, y)] }
    }

    pub fn knots(&self) -> &[(S, S)] {
        &self.knots
    }

    pub fn domain(&self) -> (&S, &S) {
        (&self.knots[0].0, &self.knots[self.knots.len() - 1].0)
    }

    pub fn eval(&self, x: &S) -> S {
        let k = &self.knots;
        let idx = k.partition_point(|(kx, _)| kx <= x);
        if idx == 0 {
            return k[0].1.clone();
        }
        if idx == k.len() {
            return k[k.len() - 1].1.clone();
        }
        let (x0, y0) = &k[idx - 1];
        if x == x0 {
            return y0.clone();
        }
        let (x1, y1) = &k[idx];
        let t = x.minus(x0).divide(&x1.minus(x0));
        y0.plus(&y1.minus(y0).times(&t))
    }

    /// Largest absolute segment slope.
    pub fn lipschitz_constant(&self) -> S {
        let zero = self.knots[0].1.zero_like();
        self.knots
            .windows(2)
            .map(|w| w[1].1.minus(&w[0].1).divide(&w[1].0.minus(&w[0].0)).magnitude())
            .fold(zero, |acc, s| acc.max(s))
    }

    /// Sup-norm of `self - other`, attained on the merged knot set.
    pub fn sup_diff(&self, other: &Self) -> S {
        let mut xs: Vec<&S> = self.knots.iter().chain(other.knots.iter()).map(|(x, _)| x).collect();
        xs.sort();
        xs.dedup();
        let zero = self.knots[0].1.zero_like();
        xs.into_iter()
            .map(|x| self.eval(x).minus(&other.eval(x)).magnitude())
            .fold(zero, |acc, d| acc.max(d))
    }

    /// Pointwise sum, exact on the merged knot set.
    pub fn add(&self, other: &Self) -> Self {
        let mut xs: Vec<&S> = self.knots.iter().chain(other.knots.iter()).map(|(x, _)| x).collect();
        xs.sort();
        xs.dedup();
        let knots = xs.into_iter().map(|x| (x.clone(), self.eval(x).plus(&other.eval(x)))).collect();
        Self { knots }
    }

    /// True when the knot values never decrease.
    pub fn is_monotone(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn map_values(&self, f: impl Fn(&S) -> S) -> Self {
        Self { knots: self.knots.iter().map(|(x, y)| (x.clone(), f(y))).collect() }
    }
}

impl PiecewiseLinear<Rational> {
    /// ψ_j: plateau value on each town, linear across the gaps.
    pub fn from_state(state: &RefinementState) -> Self {
        let knots = state
            .towns
            .iter()
            .flat_map(|t| [(t.start.clone(), t.value.clone()), (t.end.clone(), t.value.clone())])
            .collect();
        Self { knots }
    }

    /// `samples` uniformly spaced points over the domain as `x,psi` CSV.
    pub fn to_csv(&self, samples: usize, digits: usize) -> String {
        let (lo, hi) = self.domain();
        let mut out = String::from("x,psi\n");
        let steps = samples.max(2) - 1;
        for k in 0..=steps {
            let x = lo + (hi - lo) * Rational::new(k.into(), steps.into());
            let y = self.eval(&x);
            out.push_str(&format!("{},{}\n", to_decimal(&x, digits), to_decimal(&y, digits)));
        }
        out
    }

    pub fn to_knot_dump(&self) -> KnotDump {
        KnotDump {
            knots: self.knots.iter().map(|(x, y)| [format_rational(x), format_rational(y)]).collect(),
        }
    }
}

impl PiecewiseLinear<BigFloat> {
    pub fn from_rational(f: &PiecewiseLinear<Rational>, prec: u32) -> Self {
        let conv = |r: &Rational| BigFloat::from_rational(r, prec, crate::exact::Round::Nearest);
        Self { knots: f.knots.iter().map(|(x, y)| (conv(x), conv(y))).collect() }
    }

    pub fn to_knot_dump(&self) -> KnotDump {
        KnotDump {
            knots: self.knots.iter().map(|(x, y)| [x.to_decimal_string(40), y.to_decimal_string(40)]).collect(),
        }
    }
}

/// Exact knot list as JSON: `{"knots": [["x", "y"], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotDump {
    pub knots: Vec<[String; 2]>,
}
