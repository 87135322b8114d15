//! The embedding `Ψ^q(x) = Σ_p λ_p ψ(x_p - qε)` of the unit cube and the
//! iterative construction of the outer functions `χ^q`.
//!
//! Family `q` covers `x ∈ [0,1]` with the translated towns `t + qε`, so the
//! inner function is read at `x - qε ∈ [-qε, 1 - qε] ⊂ [-1, 1]`.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, from_int, parse_rational, to_decimal, BigFloat, Interval, Rational, Round};
use crate::function::{KnotDump, PiecewiseLinear};
use crate::town::{validate_parameters, Location, RefinementState};
use crate::verify::{check_cube_separation, Verdict};

pub const DEFAULT_GRID: usize = 101;

/// Cube systems larger than this are refused rather than enumerated.
pub const DEFAULT_CUBE_LIMIT: u128 = 4_000_000;

/// Inner function, weights and shift that together define every `Ψ^q`.
#[derive(Clone, Debug)]
pub struct Embedding {
    n: usize,
    epsilon: Rational,
    lambdas: Vec<Interval>,
    /// Set when the weights are rational, so images can be compared exactly.
    exact_lambdas: Option<Vec<Rational>>,
    psi: PiecewiseLinear<Rational>,
    tail_bound: BigFloat,
    prec: u32,
}

impl Embedding {
    /// Weights `λ_p = 2^((p-1)/n)` and a zero tail bound: `psi` itself is the
    /// inner function being represented.
    pub fn new(n: usize, epsilon: Rational, psi: PiecewiseLinear<Rational>, prec: u32) -> Result<Self> {
        validate_parameters(n, &epsilon)?;
        let lambdas = (0..n).map(|p| Interval::pow2_frac(p as u32, n as u32, prec)).collect();
        Ok(Self { n, epsilon, lambdas, exact_lambdas: None, psi, tail_bound: BigFloat::zero(prec), prec })
    }

    pub fn from_state(state: &RefinementState, prec: u32) -> Result<Self> {
        Self::new(state.n, state.epsilon.clone(), PiecewiseLinear::from_state(state), prec)
    }

    pub fn with_lambdas(mut self, lambdas: Vec<Interval>) -> Result<Self> {
        if lambdas.len() != self.n {
            return Err(Error::InvalidParameter(format!("expected {} weights, got {}", self.n, lambdas.len())));
        }
        if lambdas.iter().any(|l| l.lo.signum() <= 0) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        self.lambdas = lambdas;
        self.exact_lambdas = None;
        Ok(self)
    }

    pub fn with_rational_lambdas(self, lambdas: Vec<Rational>) -> Result<Self> {
        let prec = self.prec;
        let mut e = self.with_lambdas(lambdas.iter().map(|l| Interval::from_rational(l, prec)).collect())?;
        e.exact_lambdas = Some(lambdas);
        Ok(e)
    }

    /// Treat `psi` as an approximation of a limit within `tail` in sup norm.
    pub fn with_tail_bound(mut self, tail: BigFloat) -> Self {
        self.tail_bound = tail;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn lambdas(&self) -> &[Interval] {
        &self.lambdas
    }

    pub fn psi(&self) -> &PiecewiseLinear<Rational> {
        &self.psi
    }

    pub fn tail_bound(&self) -> &BigFloat {
        &self.tail_bound
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn families(&self) -> usize {
        2 * self.n + 1
    }

    fn shift(&self, q: usize) -> Rational {
        &self.epsilon * from_int(q as i64)
    }

    fn check_family(&self, q: usize) -> Result<()> {
        if q >= self.families() {
            return Err(Error::ShiftOutOfRange { q: q as i64, max: 2 * self.n as i64 });
        }
        Ok(())
    }

    /// `Σ_p λ_p ψ(x_p - qε)` enclosed in an interval.
    pub fn big_psi(&self, q: usize, x: &[Rational]) -> Result<Interval> {
        self.check_family(q)?;
        if x.len() != self.n {
            return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {}", x.len(), self.n)));
        }
        let shift = self.shift(q);
        let mut acc = Interval::point(BigFloat::zero(self.prec));
        for (lambda, xp) in self.lambdas.iter().zip(x) {
            acc = acc.add(&lambda.scale(&self.psi.eval(&(xp - &shift)), self.prec), self.prec);
        }
        Ok(acc)
    }

    /// Upper bound on `‖λ‖₁`.
    pub fn lambda_norm(&self) -> BigFloat {
        self.lambdas
            .iter()
            .fold(BigFloat::zero(self.prec), |acc, l| acc.add_round(&l.hi, self.prec, Round::Up))
    }

    /// Amount every cube image is widened by: `n · ‖λ‖₁ · tail`.
    pub fn widening(&self) -> BigFloat {
        let n = BigFloat::from_int(self.n as i64, self.prec);
        self.lambda_norm()
            .mul_round(&n, self.prec, Round::Up)
            .mul_round(&self.tail_bound, self.prec, Round::Up)
    }

    /// Level-`state.level` towns of family `q`, clipped to `[0, 1]`.
    pub fn cube_system(&self, q: usize, state: &RefinementState) -> Result<CubeSystem> {
        self.check_family(q)?;
        let shift = self.shift(q);
        let (zero, one) = (Rational::zero(), Rational::one());
        let sides = state
            .towns
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                let lo = (&t.start + &shift).max(zero.clone());
                let hi = (&t.end + &shift).min(one.clone());
                (lo <= hi).then(|| {
                    let psi_lo = self.psi.eval(&(&lo - &shift));
                    let psi_hi = self.psi.eval(&(&hi - &shift));
                    CubeSide { town: i, lo, hi, psi_lo, psi_hi }
                })
            })
            .collect();
        Ok(CubeSystem { q, level: state.level, n: self.n, sides })
    }

    /// `Ψ^q` of one cube: monotone, so the image runs from the lower to the upper corner.
    pub fn cube_image(&self, system: &CubeSystem, cube: &[usize]) -> CubeImage {
        let zero = Interval::point(BigFloat::zero(self.prec));
        let (mut start, mut end) = (zero.clone(), zero);
        for (lambda, &i) in self.lambdas.iter().zip(cube) {
            let side = &system.sides[i];
            start = start.add(&lambda.scale(&side.psi_lo, self.prec), self.prec);
            end = end.add(&lambda.scale(&side.psi_hi, self.prec), self.prec);
        }
        let exact = self.exact_lambdas.as_ref().map(|ls| {
            ls.iter().zip(cube).fold((Rational::zero(), Rational::zero()), |(a, b), (l, &i)| {
                let side = &system.sides[i];
                (a + l * &side.psi_lo, b + l * &side.psi_hi)
            })
        });
        CubeImage { start, end, exact }
    }

    /// Images of every cube of `system`, in odometer order of the side indices.
    pub fn cube_images(&self, system: &CubeSystem, limit: u128) -> Result<Vec<CubeImage>> {
        let count = system.count();
        if count > limit {
            return Err(Error::CubeLimit { level: system.level, cubes: count, limit });
        }
        // Per-coordinate contributions are shared by many cubes.
        let contrib: Vec<Vec<(Interval, Interval)>> = self
            .lambdas
            .iter()
            .map(|l| {
                system
                    .sides
                    .iter()
                    .map(|s| (l.scale(&s.psi_lo, self.prec), l.scale(&s.psi_hi, self.prec)))
                    .collect()
            })
            .collect();
        let mut images = Vec::with_capacity(count as usize);
        system.for_each_cube(|cube| {
            let mut it = cube.iter().enumerate();
            let (p0, &i0) = it.next().expect("n >= 1");
            let (mut start, mut end) = contrib[p0][i0].clone();
            for (p, &i) in it {
                start = start.add(&contrib[p][i].0, self.prec);
                end = end.add(&contrib[p][i].1, self.prec);
            }
            let exact = self.exact_lambdas.as_ref().map(|ls| {
                ls.iter().zip(cube).fold((Rational::zero(), Rational::zero()), |(a, b), (l, &i)| {
                    let side = &system.sides[i];
                    (a + l * &side.psi_lo, b + l * &side.psi_hi)
                })
            });
            images.push(CubeImage { start, end, exact });
        });
        Ok(images)
    }
}

/// One clipped town of a family, in cube coordinates, with the inner
/// function's values at its ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeSide {
    pub town: usize,
    pub lo: Rational,
    pub hi: Rational,
    pub psi_lo: Rational,
    pub psi_hi: Rational,
}

impl CubeSide {
    pub fn center(&self) -> Rational {
        (&self.lo + &self.hi) / from_int(2)
    }
}

/// All `n`-fold products of the clipped towns of one family.
#[derive(Clone, Debug)]
pub struct CubeSystem {
    pub q: usize,
    pub level: usize,
    pub n: usize,
    pub sides: Vec<CubeSide>,
}

impl CubeSystem {
    pub fn count(&self) -> u128 {
        (self.sides.len() as u128).saturating_pow(self.n as u32)
    }

    pub fn for_each_cube(&self, mut f: impl FnMut(&[usize])) {
        let m = self.sides.len();
        if m == 0 {
            return;
        }
        let mut idx = vec![0usize; self.n];
        loop {
            f(&idx);
            let mut p = self.n;
            loop {
                if p == 0 {
                    return;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < m {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    /// Longest side, an upper bound on every cube's edge length.
    pub fn max_side(&self) -> Rational {
        self.sides.iter().map(|s| &s.hi - &s.lo).max().unwrap_or_else(Rational::zero)
    }
}

/// Image interval `[start, end]` of a cube, each end enclosed in an interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeImage {
    pub start: Interval,
    pub end: Interval,
    /// Exact ends, available for rational weights.
    pub exact: Option<(Rational, Rational)>,
}

impl CubeImage {
    /// Certainly contains the image after widening by `w`.
    pub fn outer(&self, w: &BigFloat, prec: u32) -> (BigFloat, BigFloat) {
        (self.start.lo.sub_round(w, prec, Round::Down), self.end.hi.add_round(w, prec, Round::Up))
    }

    /// Certainly contained in the image, whatever the limit within `w`; `None` when empty.
    pub fn inner(&self, w: &BigFloat, prec: u32) -> Option<(BigFloat, BigFloat)> {
        let lo = self.start.hi.add_round(w, prec, Round::Up);
        let hi = self.end.lo.sub_round(w, prec, Round::Down);
        (lo <= hi).then_some((lo, hi))
    }
}

/// Smallest number of families whose cube system contains a point of `[0,1]^n`.
pub fn min_cube_coverage(state: &RefinementState) -> usize {
    let families = state.families();
    let mut points: Vec<Rational> = vec![Rational::zero(), Rational::one()];
    for q in 0..families as i64 {
        let shift = state.shift(q);
        for t in &state.towns {
            for e in [&t.start + &shift, &t.end + &shift] {
                if e >= Rational::zero() && e <= Rational::one() {
                    points.push(e);
                }
            }
        }
    }
    points.sort();
    points.dedup();
    let mids: Vec<Rational> = points.windows(2).map(|w| (&w[0] + &w[1]) / from_int(2)).collect();
    let mut masks: Vec<u64> = points
        .iter()
        .chain(&mids)
        .map(|x| {
            (0..families).fold(0u64, |m, q| match state.locate(&(x - state.shift(q as i64))) {
                Location::Town(_) => m,
                _ => m | (1 << q),
            })
        })
        .collect();
    masks.sort_unstable();
    masks.dedup();
    // Each coordinate sits at one point and removes that point's uncovered families.
    let mut best = 0u32;
    let mut unions = vec![0u64];
    for _ in 0..state.n {
        unions = unions.iter().flat_map(|u| masks.iter().map(move |m| u | m)).collect();
        unions.sort_unstable();
        unions.dedup();
    }
    for u in unions {
        best = best.max(u.count_ones());
    }
    families - best as usize
}

/// Share of the residual each family's outer function absorbs per round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `1/(2n+1)`: all families together reproduce the residual at a cube
    /// centre, so constants are exact after one round. Points seen by only
    /// `n+1` families get no contraction guarantee.
    Partition,
    /// `1/(n+1)`: the classical choice. The `n+1` families that see a point
    /// absorb its whole residual, which makes each round contract.
    #[default]
    Kolmogorov,
}

impl Weighting {
    pub fn divisor(self, n: usize) -> i64 {
        match self {
            Weighting::Partition => 2 * n as i64 + 1,
            Weighting::Kolmogorov => n as i64 + 1,
        }
    }
}

/// Built-in test functions on `[0,1]^n`, evaluated exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetFunction {
    Constant(Rational),
    Sum,
    Product,
    /// `1 / (1 + 25 |x|²)`.
    Runge,
}

impl TargetFunction {
    pub fn eval(&self, x: &[Rational]) -> Rational {
        match self {
            TargetFunction::Constant(c) => c.clone(),
            TargetFunction::Sum => x.iter().sum(),
            TargetFunction::Product => x.iter().product(),
            TargetFunction::Runge => {
                let r2: Rational = x.iter().map(|v| v * v).sum();
                Rational::one() / (Rational::one() + from_int(25) * r2)
            }
        }
    }

    /// Bound `L` with `|f(x) - f(y)| ≤ L·|x - y|₂` on the unit cube.
    pub fn lipschitz(&self, n: usize) -> Rational {
        match self {
            TargetFunction::Constant(_) => Rational::zero(),
            TargetFunction::Sum | TargetFunction::Product => from_int(n as i64),
            // max of 50r/(1+25r²)² is 3.2476 at r² = 1/75
            TargetFunction::Runge => Rational::new(13.into(), 4.into()),
        }
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(TargetFunction::Sum),
            "product" => Ok(TargetFunction::Product),
            "runge2d" => Ok(TargetFunction::Runge),
            other => match other.strip_prefix("const:") {
                Some(c) => Ok(TargetFunction::Constant(parse_rational(c)?)),
                None => Err(Error::Parse(format!("unknown function '{other}' (const:c, sum, product, runge2d)"))),
            },
        }
    }
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFunction::Constant(c) => write!(f, "const:{}", format_rational(c)),
            TargetFunction::Sum => f.write_str("sum"),
            TargetFunction::Product => f.write_str("product"),
            TargetFunction::Runge => f.write_str("runge2d"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OuterOptions {
    pub weighting: Weighting,
    /// Points per axis of the error grid.
    pub grid: usize,
    pub cube_limit: u128,
    /// Use this level every round, skipping the oscillation bound. Its cube
    /// images must still separate.
    pub pinned_level: Option<usize>,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self { weighting: Weighting::default(), grid: DEFAULT_GRID, cube_limit: DEFAULT_CUBE_LIMIT, pinned_level: None }
    }
}

/// Outer functions after `round` rounds, with the grid estimate `m` of the
/// remaining sup error.
#[derive(Clone, Debug)]
pub struct OuterState {
    pub round: usize,
    pub chi: Vec<PiecewiseLinear<BigFloat>>,
    pub m: BigFloat,
    pub level: Option<usize>,
}

impl OuterState {
    /// All `χ ≡ 0`, so the error is the grid maximum of `|f|`.
    pub fn initial(f: &TargetFunction, e: &Embedding, opts: &OuterOptions) -> Self {
        let zero = BigFloat::zero(e.prec);
        let chi = vec![PiecewiseLinear::constant(zero.clone(), zero); e.families()];
        let m = measure_error(f, e, &chi, opts.grid);
        Self { round: 0, chi, m, level: None }
    }

    pub fn to_knot_dumps(&self) -> Vec<KnotDump> {
        self.chi.iter().map(|c| c.to_knot_dump()).collect()
    }
}

/// Per-round summary.
#[derive(Clone, Debug)]
pub struct RoundRecord {
    pub round: usize,
    pub level: Option<usize>,
    pub m: BigFloat,
    /// `max_q ‖χ^q_r - χ^q_{r-1}‖∞`.
    pub max_increment: BigFloat,
    /// Fewest families whose cubes contain any point, at the chosen level.
    pub cube_coverage: Option<usize>,
}

/// `Σ_q χ^q(Ψ^q(x))`.
pub fn kr_eval(e: &Embedding, chi: &[PiecewiseLinear<BigFloat>], x: &[Rational]) -> Result<BigFloat> {
    let mut total = BigFloat::zero(e.prec);
    for (q, c) in chi.iter().enumerate() {
        let y = e.big_psi(q, x)?.midpoint(e.prec);
        total = total.add_round(&c.eval(&y), e.prec, Round::Nearest);
    }
    Ok(total)
}

/// Maximum of `|f - Σ_q χ^q ∘ Ψ^q|` over a uniform grid with `grid` points per axis.
pub fn measure_error(f: &TargetFunction, e: &Embedding, chi: &[PiecewiseLinear<BigFloat>], grid: usize) -> BigFloat {
    let steps = grid.max(2) - 1;
    let axis: Vec<Rational> = (0..=steps).map(|i| Rational::new(i.into(), steps.into())).collect();
    // contrib[q][p][i] = λ_p ψ(axis_i - qε)
    let contrib: Vec<Vec<Vec<Interval>>> = (0..e.families())
        .map(|q| {
            let shift = e.shift(q);
            e.lambdas
                .iter()
                .map(|l| axis.iter().map(|x| l.scale(&e.psi.eval(&(x - &shift)), e.prec)).collect())
                .collect()
        })
        .collect();
    let system = CubeSystem {
        q: 0,
        level: 0,
        n: e.n,
        sides: axis
            .iter()
            .map(|x| CubeSide { town: 0, lo: x.clone(), hi: x.clone(), psi_lo: Rational::zero(), psi_hi: Rational::zero() })
            .collect(),
    };
    let mut worst = BigFloat::zero(e.prec);
    system.for_each_cube(|idx| {
        let x: Vec<Rational> = idx.iter().map(|&i| axis[i].clone()).collect();
        let mut approx = BigFloat::zero(e.prec);
        for (q, c) in chi.iter().enumerate() {
            let y = sum_point(&contrib[q], idx, e.prec);
            approx = approx.add_round(&c.eval(&y), e.prec, Round::Nearest);
        }
        let exact = BigFloat::from_rational(&f.eval(&x), e.prec, Round::Nearest);
        let err = exact.sub_round(&approx, e.prec, Round::Nearest).abs();
        if err > worst {
            worst = err;
        }
    });
    worst
}

fn sum_point(contrib: &[Vec<Interval>], idx: &[usize], prec: u32) -> BigFloat {
    let mut acc = contrib[0][idx[0]].clone();
    for (p, &i) in idx.iter().enumerate().skip(1) {
        acc = acc.add(&contrib[p][i], prec);
    }
    acc.midpoint(prec)
}

/// Smallest level whose cubes are fine enough for `f` at error `m` and whose
/// images are certainly separated.
pub fn select_level(
    f: &TargetFunction,
    e: &Embedding,
    states: &[RefinementState],
    m: &BigFloat,
    opts: &OuterOptions,
) -> Result<usize> {
    if let Some(level) = opts.pinned_level {
        let state = states
            .iter()
            .find(|s| s.level == level)
            .ok_or_else(|| Error::InvalidParameter(format!("pinned level {level} was not built")))?;
        let sep = check_cube_separation(e, state, opts.cube_limit)?;
        if sep.verdict != Verdict::Pass {
            return Err(Error::BuildDeeper(format!("cube images not separated at pinned level {level} {}", sep.verdict)));
        }
        return Ok(level);
    }
    let n = e.n;
    let target = m.to_rational() / from_int(2 * n as i64 + 2);
    let lip = f.lipschitz(n);
    let mut skipped = Vec::new();
    for state in states {
        // (L·D)²·n ≤ target² avoids the square root.
        let d = state.max_diameter();
        let lhs = &lip * &lip * &d * &d * from_int(n as i64);
        if lhs > &target * &target {
            continue;
        }
        let sep = check_cube_separation(e, state, opts.cube_limit)?;
        if sep.verdict == Verdict::Pass {
            return Ok(state.level);
        }
        skipped.push(format!("level {} {}", state.level, sep.verdict));
    }
    let deepest = states.last().map(|s| s.level).unwrap_or(0);
    Err(Error::BuildDeeper(if skipped.is_empty() {
        format!("no level up to {deepest} has cubes small enough for error {}", m.to_decimal_string(6))
    } else {
        format!("cube images not separated at {}", skipped.join(", "))
    }))
}

/// One round: pick the level, add a constant share of the residual at each
/// cube centre on that cube's image, interpolate linearly between images.
pub fn outer_round(
    f: &TargetFunction,
    e: &Embedding,
    states: &[RefinementState],
    prev: &OuterState,
    opts: &OuterOptions,
) -> Result<(OuterState, RoundRecord)> {
    let prec = e.prec;
    if prev.m.is_zero() {
        let next = OuterState { round: prev.round + 1, ..prev.clone() };
        let record = RoundRecord {
            round: next.round,
            level: None,
            m: next.m.clone(),
            max_increment: BigFloat::zero(prec),
            cube_coverage: None,
        };
        return Ok((next, record));
    }
    let level = select_level(f, e, states, &prev.m, opts)?;
    let state = states.iter().find(|s| s.level == level).expect("selected level exists");
    let weight = Rational::new(1.into(), opts.weighting.divisor(e.n).into());
    let cap = prev.m.mul_rational(&Rational::new(1.into(), (e.n as i64 + 1).into()), prec, Round::Down);

    let mut chi = Vec::with_capacity(e.families());
    let mut max_increment = BigFloat::zero(prec);
    for q in 0..e.families() {
        let system = e.cube_system(q, state)?;
        let images = e.cube_images(&system, opts.cube_limit)?;
        let centres = centre_contributions(e, &system);
        let mut knots: Vec<(BigFloat, BigFloat)> = Vec::with_capacity(2 * images.len());
        let mut k = 0usize;
        system.for_each_cube(|cube| {
            let xi: Vec<Rational> = cube.iter().map(|&i| system.sides[i].center()).collect();
            let mut previous = BigFloat::zero(prec);
            for (qq, c) in prev.chi.iter().enumerate() {
                let y = sum_point(&centres[qq], cube, prec);
                previous = previous.add_round(&c.eval(&y), prec, Round::Nearest);
            }
            let target = BigFloat::from_rational(&f.eval(&xi), prec, Round::Nearest);
            let residual = target.sub_round(&previous, prec, Round::Nearest);
            let mut inc = residual.mul_rational(&weight, prec, Round::Nearest);
            if inc > cap {
                inc = cap.clone();
            } else if inc < -&cap {
                inc = -&cap;
            }
            let img = &images[k];
            let lo = img.start.midpoint(prec);
            let hi = img.end.midpoint(prec);
            let wide = hi > lo;
            knots.push((lo, inc.clone()));
            if wide {
                knots.push((hi, inc));
            }
            k += 1;
        });
        knots.sort_by(|a, b| a.0.cmp(&b.0));
        let increment = PiecewiseLinear::new(knots)?;
        let size = increment.knots().iter().map(|(_, v)| v.abs()).max().unwrap_or_else(|| BigFloat::zero(prec));
        if size > max_increment {
            max_increment = size;
        }
        chi.push(prev.chi[q].add(&increment));
    }
    let m = measure_error(f, e, &chi, opts.grid);
    let next = OuterState { round: prev.round + 1, chi, m: m.clone(), level: Some(level) };
    let record = RoundRecord {
        round: next.round,
        level: Some(level),
        m,
        max_increment,
        cube_coverage: Some(min_cube_coverage(state)),
    };
    Ok((next, record))
}

/// `centres[q'][p][i] = λ_p ψ(centre_i - q'ε)` for the sides of `system`.
fn centre_contributions(e: &Embedding, system: &CubeSystem) -> Vec<Vec<Vec<Interval>>> {
    (0..e.families())
        .map(|qq| {
            let shift = e.shift(qq);
            e.lambdas
                .iter()
                .map(|l| system.sides.iter().map(|s| l.scale(&e.psi.eval(&(s.center() - &shift)), e.prec)).collect())
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub initial: OuterState,
    pub records: Vec<RoundRecord>,
    pub state: OuterState,
}

impl Decomposition {
    /// `round,level,m` rows; round 0 is the starting error with no level.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("round,level,m\n");
        out.push_str(&format!("0,,{}\n", to_decimal(&self.initial.m.to_rational(), digits)));
        for r in &self.records {
            let level = r.level.map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.round, level, to_decimal(&r.m.to_rational(), digits)));
        }
        out
    }
}

/// Runs `rounds` outer rounds from `χ ≡ 0`. `states` are the refinement levels
/// available for cubes; `e` normally wraps the deepest of them.
pub fn decompose(
    f: &TargetFunction,
    e: &Embedding,
    states: &[RefinementState],
    rounds: usize,
    opts: &OuterOptions,
) -> Result<Decomposition> {
    let initial = OuterState::initial(f, e, opts);
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let (next, record) = outer_round(f, e, states, &state, opts)?;
        state = next;
        records.push(record);
    }
    Ok(Decomposition { initial, records, state })
}
