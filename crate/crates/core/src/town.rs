//! Towns (closed intervals carrying a plateau value of ψ_j), the refinement
//! state that holds them, and the coverage queries over the 2n+1 shifted
//! families.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, from_int, q, serde_rational, slope_cap, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Root,
    SplitLeft,
    SplitRight,
    Plug,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Root => "root",
            Origin::SplitLeft => "split-left",
            Origin::SplitRight => "split-right",
            Origin::Plug => "plug",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Town {
    #[serde(with = "serde_rational")]
    pub start: Rational,
    #[serde(with = "serde_rational")]
    pub end: Rational,
    #[serde(with = "serde_rational")]
    pub value: Rational,
    pub origin: Origin,
    pub birth_level: usize,
}

impl Town {
    pub fn new(start: Rational, end: Rational, value: Rational, origin: Origin, birth_level: usize) -> Self {
        Self { start, end, value, origin, birth_level }
    }

    pub fn len(&self) -> Rational {
        &self.end - &self.start
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.start <= *x && *x <= self.end
    }

    pub fn midpoint(&self) -> Rational {
        (&self.start + &self.end) / from_int(2)
    }
}

/// ψ_j as data: the ordered town list at level `level`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementState {
    pub n: usize,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    pub level: usize,
    pub towns: Vec<Town>,
}

/// Closed shifted copy of a town, `[start + qε, end + qε]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedInterval {
    pub start: Rational,
    pub end: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Town(usize),
    /// Strictly between towns `i` and `i + 1`.
    Hole(usize, usize),
    Outside,
}

/// Default shift ε = 1/(2n+1).
pub fn default_epsilon(n: usize) -> Rational {
    q(1, 2 * n as i64 + 1)
}

pub fn validate_parameters(n: usize, epsilon: &Rational) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    let max = q(1, 2 * n as i64);
    if !epsilon.is_positive() || *epsilon > max {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/{}], got {}",
            2 * n,
            format_rational(epsilon)
        )));
    }
    Ok(())
}

impl RefinementState {
    /// Level 0: one town `[-1, 1]` with ψ_0 ≡ 0.
    pub fn root(n: usize, epsilon: Rational) -> Result<Self> {
        validate_parameters(n, &epsilon)?;
        Ok(Self {
            n,
            epsilon,
            level: 0,
            towns: vec![Town::new(from_int(-1), from_int(1), Rational::zero(), Origin::Root, 0)],
        })
    }

    /// Slope cap `1 - 2^-level`.
    pub fn slope_cap(&self) -> Rational {
        slope_cap(self.level)
    }

    /// Number of shifted families, 2n+1.
    pub fn families(&self) -> usize {
        2 * self.n + 1
    }

    pub fn shift(&self, q: i64) -> Rational {
        &self.epsilon * from_int(q)
    }

    pub fn shifted_view(&self, q: i64) -> Result<Vec<ShiftedInterval>> {
        let max = 2 * self.n as i64;
        if !(0..=max).contains(&q) {
            return Err(Error::ShiftOutOfRange { q, max });
        }
        let s = self.shift(q);
        Ok(self
            .towns
            .iter()
            .map(|t| ShiftedInterval { start: &t.start + &s, end: &t.end + &s })
            .collect())
    }

    /// Classifies `x` against the base town system (closed towns, open holes).
    pub fn locate(&self, x: &Rational) -> Location {
        let idx = self.towns.partition_point(|t| t.start <= *x);
        if idx == 0 {
            return Location::Outside;
        }
        let i = idx - 1;
        if *x <= self.towns[i].end {
            Location::Town(i)
        } else if i + 1 < self.towns.len() {
            Location::Hole(i, i + 1)
        } else {
            Location::Outside
        }
    }

    /// Number of families `q ∈ {0..2n}` with `x - qε` inside some town.
    pub fn coverage_count(&self, x: &Rational) -> usize {
        (0..self.families() as i64)
            .filter(|&q| matches!(self.locate(&(x - self.shift(q))), Location::Town(_)))
            .count()
    }

    /// Exact minimum of [`coverage_count`](Self::coverage_count) over `[0, 1]`.
    ///
    /// Sweeps the arrangement of all shifted endpoints clipped to `[0, 1]`,
    /// evaluating every arrangement point and every open cell between
    /// consecutive points.
    pub fn min_coverage(&self) -> usize {
        coverage_profile(self).into_iter().min().unwrap_or(0)
    }

    /// Most families simultaneously in a gap at any `x ∈ [0, 1]`.
    pub fn max_family_gaps(&self) -> usize {
        self.families() - self.min_coverage()
    }

    pub fn max_diameter(&self) -> Rational {
        self.towns.iter().map(Town::len).max().unwrap_or_else(Rational::zero)
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<()> {
        validate_parameters(self.n, &self.epsilon)?;
        let bad = |msg: String| Err(Error::InvalidState(msg));
        if self.towns.is_empty() {
            return bad("no towns".into());
        }
        let (lo, hi) = (from_int(-1), Rational::one());
        for (i, t) in self.towns.iter().enumerate() {
            if t.start >= t.end {
                return bad(format!("town {i} is degenerate"));
            }
            if t.start < lo || t.end > hi {
                return bad(format!("town {i} leaves [-1, 1]"));
            }
        }
        let cap = self.slope_cap();
        for (i, w) in self.towns.windows(2).enumerate() {
            if w[0].end >= w[1].start {
                return bad(format!("towns {i} and {} overlap or are unsorted", i + 1));
            }
            if w[0].value >= w[1].value {
                return bad(format!("values of towns {i} and {} are not strictly increasing", i + 1));
            }
            let slope = (&w[1].value - &w[0].value) / (&w[1].start - &w[0].end);
            if slope > cap {
                return bad(format!("slope between towns {i} and {} exceeds 1 - 2^-{}", i + 1, self.level));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(s)?;
        Ok(state)
    }
}

/// Coverage counts at every arrangement point and open cell of `[0, 1]`,
/// interleaved point, cell, point, ..., point.
pub(crate) fn coverage_profile(state: &RefinementState) -> Vec<usize> {
    let (zero, one) = (Rational::zero(), Rational::one());
    let mut clipped = Vec::new();
    for qi in 0..state.families() as i64 {
        let s = state.shift(qi);
        for t in &state.towns {
            let a = (&t.start + &s).max(zero.clone());
            let b = (&t.end + &s).min(one.clone());
            if a <= b {
                clipped.push((a, b));
            }
        }
    }
    let mut points: Vec<Rational> = vec![zero, one];
    for (a, b) in &clipped {
        points.push(a.clone());
        points.push(b.clone());
    }
    points.sort();
    points.dedup();
    // Slot 2k is point k, slot 2k+1 the open cell (point k, point k+1).
    let slots = 2 * points.len() - 1;
    let mut diff = vec![0i64; slots + 1];
    for (a, b) in &clipped {
        let ia = points.binary_search(a).expect("endpoint is an arrangement point");
        let ib = points.binary_search(b).expect("endpoint is an arrangement point");
        diff[2 * ia] += 1;
        diff[2 * ib + 1] -= 1;
    }
    let mut out = Vec::with_capacity(slots);
    let mut acc = 0i64;
    for d in diff.iter().take(slots) {
        acc += d;
        out.push(acc as usize);
    }
    out
}
