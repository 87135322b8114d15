//! The linear candidate `ψ^{p,q}(x) = α_p (x + qε)` with base-γ staircase
//! approximations. Every finite-level grid condition holds for it, yet the limit
//! `Ψ^0(x) = x_1 + √2 x_2` maps points of different boxes to the same value.
//! Everything here is exact in Q(√2), so only `n = 2` is supported.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{format_rational, from_int, QuadraticNumber, Rational};
use crate::function::PiecewiseLinear;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCandidate {
    pub n: usize,
    pub gamma: u32,
    pub epsilon: Rational,
    pub alphas: Vec<QuadraticNumber>,
}

impl LinearCandidate {
    /// `α = (1, √2)` for `n = 2`.
    pub fn new(gamma: u32, epsilon: Rational) -> Result<Self> {
        let c = Self {
            n: 2,
            gamma,
            epsilon,
            alphas: vec![QuadraticNumber::rational(Rational::one()), QuadraticNumber::sqrt2()],
        };
        c.validate()?;
        Ok(c)
    }

    /// γ = 10 and ε = 1/50.
    pub fn standard() -> Self {
        Self::new(10, Rational::new(1.into(), 50.into())).expect("standard candidate is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 2 || self.alphas.len() != 2 {
            return Err(Error::InvalidParameter("the linear candidate is only exact for n = 2".into()));
        }
        let g = from_int(self.gamma as i64);
        if self.gamma < 2 * self.n as u32 + 2 {
            return Err(Error::InvalidParameter(format!("gamma {} must be at least {}", self.gamma, 2 * self.n + 2)));
        }
        if !(self.epsilon > Rational::one() / (&g * &g) && self.epsilon < Rational::one() / &g) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} must lie strictly between 1/gamma^2 and 1/gamma",
                format_rational(&self.epsilon)
            )));
        }
        if !rationally_independent(&self.alphas) {
            return Err(Error::InvalidParameter("alphas must be rationally independent".into()));
        }
        Ok(())
    }

    fn gamma_pow(&self, k: u32) -> Rational {
        from_int(self.gamma as i64).pow(k as i32)
    }

    /// Length `(γ² - 1)/γ^{k+2}` of a level-`k` interval.
    pub fn interval_length(&self, k: u32) -> Rational {
        let g = from_int(self.gamma as i64);
        (&g * &g - Rational::one()) / self.gamma_pow(k + 2)
    }

    fn shift(&self, q: usize) -> Rational {
        &self.epsilon * from_int(q as i64)
    }

    /// `max_p α_p`.
    pub fn alpha_hat(&self) -> QuadraticNumber {
        self.alphas.iter().max().cloned().expect("alphas are non-empty")
    }

    /// `λ^{p,q}_{k,i} = α_p (i/γ^k + qε)`, with `p` counted from 1.
    pub fn lambda(&self, k: u32, p: usize, q: usize, i: i64) -> QuadraticNumber {
        let x = from_int(i) / self.gamma_pow(k) + self.shift(q);
        &self.alphas[p - 1] * &QuadraticNumber::rational(x)
    }

    /// The limit `Ψ^q(x) = Σ α_p (x_p + qε)`.
    pub fn big_psi(&self, q: usize, x: &[QuadraticNumber]) -> QuadraticNumber {
        let s = QuadraticNumber::rational(self.shift(q));
        self.alphas.iter().zip(x).fold(QuadraticNumber::zero(), |acc, (a, xp)| &acc + &(a * &(xp + &s)))
    }
}

fn rationally_independent(alphas: &[QuadraticNumber]) -> bool {
    match alphas {
        [a] => !a.is_zero(),
        [a, b] => !(&a.a * &b.b - &a.b * &b.a).is_zero(),
        _ => false,
    }
}

/// `A^q[d] ∩ [0,1]` for the grid point `d = i/γ^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadInterval {
    pub d: Rational,
    pub lo: Rational,
    pub hi: Rational,
}

impl BadInterval {
    pub fn contains(&self, x: &QuadraticNumber) -> bool {
        QuadraticNumber::rational(self.lo.clone()) <= *x && *x <= QuadraticNumber::rational(self.hi.clone())
    }
}

/// All level-`k` intervals of family `q` that meet `[0,1]`, left to right.
pub fn bad_intervals(c: &LinearCandidate, k: u32, q: usize) -> Result<Vec<BadInterval>> {
    if k == 0 || q > 2 * c.n {
        return Err(Error::InvalidParameter(format!("need k >= 1 and q <= {}, got k = {k}, q = {q}", 2 * c.n)));
    }
    let step = c.gamma_pow(k);
    let len = c.interval_length(k);
    let shift = c.shift(q);
    let (zero, one) = (Rational::zero(), Rational::one());
    // Smallest i whose interval can still reach 0.
    let first = ((-&shift - &len) * &step).floor().to_integer();
    let last = ((&one - &shift) * &step).ceil().to_integer();
    let mut out = Vec::new();
    let mut i = first;
    while i <= last {
        let d = Rational::from_integer(i.clone()) / &step;
        let lo = &d + &shift;
        let hi = &lo + &len;
        if hi >= zero && lo <= one {
            out.push(BadInterval { d, lo: lo.max(zero.clone()), hi: hi.min(one.clone()) });
        }
        i += 1;
    }
    Ok(out)
}

/// Least number of families `q` whose level-`k` intervals contain a point of
/// `[0,1]`, found by an exact sweep over endpoints and the cells between them.
pub fn min_family_coverage(c: &LinearCandidate, k: u32) -> Result<usize> {
    let families: Vec<Vec<BadInterval>> = (0..=2 * c.n).map(|q| bad_intervals(c, k, q)).collect::<Result<_>>()?;
    let mut xs: Vec<Rational> = families.iter().flatten().flat_map(|iv| [iv.lo.clone(), iv.hi.clone()]).collect();
    xs.push(Rational::zero());
    xs.push(Rational::one());
    xs.sort();
    xs.dedup();
    let mut probes = xs.clone();
    probes.extend(xs.windows(2).map(|w| (&w[0] + &w[1]) / from_int(2)));
    let covered = |x: &Rational| {
        families
            .iter()
            .filter(|ivs| {
                let i = ivs.partition_point(|iv| iv.hi < *x);
                i < ivs.len() && ivs[i].lo <= *x
            })
            .count()
    };
    Ok(probes.iter().map(covered).min().unwrap_or(0))
}

/// True when each level-`(k+1)` interval sits inside some level-`k` interval
/// together with the gap that follows it.
pub fn intervals_refine(c: &LinearCandidate, k: u32, q: usize) -> Result<bool> {
    let coarse = bad_intervals(c, k, q)?;
    let fine = bad_intervals(c, k + 1, q)?;
    let span = Rational::one() / c.gamma_pow(k);
    let shift = c.shift(q);
    Ok(fine.iter().all(|f| {
        coarse.iter().any(|g| {
            let start = &g.d + &shift;
            start <= f.lo && f.hi <= &start + &span
        })
    }))
}

/// The staircase `ψ^{p,q}_k`: value `α_p (d + qε)` on `A^q[d]`, linear across
/// gaps. `p` is counted from 1.
pub fn bad_psi_level(c: &LinearCandidate, k: u32, p: usize, q: usize) -> Result<PiecewiseLinear<QuadraticNumber>> {
    if p == 0 || p > c.n {
        return Err(Error::InvalidParameter(format!("p must be in 1..={}, got {p}", c.n)));
    }
    let alpha = &c.alphas[p - 1];
    let shift = c.shift(q);
    let mut knots: Vec<(QuadraticNumber, QuadraticNumber)> = Vec::new();
    for iv in bad_intervals(c, k, q)? {
        let value = alpha * &QuadraticNumber::rational(&iv.d + &shift);
        knots.push((QuadraticNumber::rational(iv.lo.clone()), value.clone()));
        if iv.hi > iv.lo {
            knots.push((QuadraticNumber::rational(iv.hi), value));
        }
    }
    PiecewiseLinear::new(knots)
}

/// `sup_{x∈[0,1]} |ψ^{p,q}_k(x) - g(x)|` for an affine `g(x) = α_p (x + s)`.
fn staircase_error(c: &LinearCandidate, k: u32, p: usize, q: usize, s: &Rational) -> Result<QuadraticNumber> {
    let f = bad_psi_level(c, k, p, q)?;
    let alpha = &c.alphas[p - 1];
    let mut xs: Vec<QuadraticNumber> = f.knots().iter().map(|(x, _)| x.clone()).collect();
    xs.push(QuadraticNumber::zero());
    xs.push(QuadraticNumber::rational(Rational::one()));
    let s = QuadraticNumber::rational(s.clone());
    Ok(xs
        .iter()
        .map(|x| (&f.eval(x) - &(alpha * &(x + &s))).abs())
        .max()
        .expect("at least two probe points"))
}

/// Distance from the staircase to the candidate `α_p (x + qε)`.
pub fn bad_psi_error(c: &LinearCandidate, k: u32, p: usize, q: usize) -> Result<QuadraticNumber> {
    staircase_error(c, k, p, q, &c.shift(q))
}

/// Distance from the staircase to `α_p x`, the function the shifted
/// staircases actually approach.
pub fn bad_psi_drift(c: &LinearCandidate, k: u32, p: usize, q: usize) -> Result<QuadraticNumber> {
    staircase_error(c, k, p, q, &Rational::zero())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadLemmaRow {
    pub k: u32,
    /// Consecutive grid values differ by exactly `α_p/γ^k`, which is at most `α̂/2^k`.
    pub spacing: bool,
    /// Level-`k+1` values between grid points `i` and `i+1` stay within `ε_k - ε_{k+1}` above `λ_{k,i}`.
    pub sandwich: bool,
    /// `Ψ^q` is injective on `{i/γ^k}^n` for every family.
    pub injective: bool,
    /// Grid points compared per family.
    pub grid_points: usize,
}

impl BadLemmaRow {
    pub fn passed(&self) -> bool {
        self.spacing && self.sandwich && self.injective
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadLemmaReport {
    pub rows: Vec<BadLemmaRow>,
}

impl BadLemmaReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(BadLemmaRow::passed)
    }
}

/// Exact check of the three grid conditions for `k = 1..=k_max`.
pub fn check_bad_lemmas(c: &LinearCandidate, k_max: u32) -> BadLemmaReport {
    let rows = (1..=k_max).map(|k| check_level(c, k)).collect();
    BadLemmaReport { rows }
}

fn check_level(c: &LinearCandidate, k: u32) -> BadLemmaRow {
    let top = (c.gamma as i64).pow(k);
    let g = c.gamma as i64;
    let alpha_hat = c.alpha_hat();
    let eps = |k: u32| &alpha_hat * &QuadraticNumber::rational(Rational::one() / c.gamma_pow(k));
    let halving = &alpha_hat * &QuadraticNumber::rational(Rational::new(1.into(), (1i64 << k).into()));
    let budget = &eps(k) - &eps(k + 1);
    let zero = QuadraticNumber::zero();
    let mut spacing = true;
    let mut sandwich = true;
    for p in 1..=c.n {
        let step = &c.alphas[p - 1] * &QuadraticNumber::rational(Rational::one() / c.gamma_pow(k));
        for q in 0..=2 * c.n {
            for i in 0..top {
                let (a, b) = (c.lambda(k, p, q, i), c.lambda(k, p, q, i + 1));
                let diff = &b - &a;
                spacing &= diff > zero && diff == step && diff <= halving;
                for j in 1..g {
                    let d = &c.lambda(k + 1, p, q, g * i + j) - &a;
                    sandwich &= zero <= d && d <= budget;
                }
            }
        }
    }
    let injective = (0..=2 * c.n).all(|q| grid_injective(c, k, q));
    BadLemmaRow { k, spacing, sandwich, injective, grid_points: ((top + 1) * (top + 1)) as usize }
}

/// Distinctness of all grid values, by sorting them exactly and comparing
/// neighbours.
fn grid_injective(c: &LinearCandidate, k: u32, q: usize) -> bool {
    let top = (c.gamma as i64).pow(k);
    let mut values = Vec::with_capacity(((top + 1) * (top + 1)) as usize);
    for i1 in 0..=top {
        for i2 in 0..=top {
            values.push(&c.lambda(k, 1, q, i1) + &c.lambda(k, 2, q, i2));
        }
    }
    values.sort();
    values.windows(2).all(|w| w[0] != w[1])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollisionWitness {
    pub x1: [QuadraticNumber; 2],
    pub x2: [QuadraticNumber; 2],
    pub value1: QuadraticNumber,
    pub value2: QuadraticNumber,
    pub same_box: bool,
}

impl CollisionWitness {
    pub fn collides(&self) -> bool {
        self.value1 == self.value2 && !self.same_box
    }
}

/// `x1 = (0, √2/4)` and `x2 = (1/2, 0)` under the limit `Ψ^0`, with their
/// level-1 boxes compared coordinate by coordinate.
pub fn collision_witness(c: &LinearCandidate) -> Result<CollisionWitness> {
    let r = |a: i64, b: i64| QuadraticNumber::rational(Rational::new(a.into(), b.into()));
    let x1 = [r(0, 1), QuadraticNumber::new(Rational::zero(), Rational::new(1.into(), 4.into()))];
    let x2 = [r(1, 2), r(0, 1)];
    let intervals = bad_intervals(c, 1, 0)?;
    let locate = |x: &QuadraticNumber| intervals.iter().position(|iv| iv.contains(x));
    let box1: Vec<Option<usize>> = x1.iter().map(locate).collect();
    let box2: Vec<Option<usize>> = x2.iter().map(locate).collect();
    let same_box = box1.iter().all(Option::is_some) && box1 == box2;
    Ok(CollisionWitness { value1: c.big_psi(0, &x1), value2: c.big_psi(0, &x2), x1, x2, same_box })
}

/// Finite-level grid conditions next to the limit collision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Juxtaposition {
    pub lemmas: BadLemmaReport,
    pub witness: CollisionWitness,
}

impl Juxtaposition {
    /// Every finite level passes while the limit still collides.
    pub fn holds(&self) -> bool {
        self.lemmas.passed() && self.witness.collides()
    }
}

pub fn juxtaposition(c: &LinearCandidate, k_max: u32) -> Result<Juxtaposition> {
    Ok(Juxtaposition { lemmas: check_bad_lemmas(c, k_max), witness: collision_witness(c)? })
}

impl fmt::Display for Juxtaposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "k  grid_points  spacing  sandwich  injective")?;
        for r in &self.lemmas.rows {
            writeln!(
                f,
                "{:<2} {:>11}  {:<7}  {:<8}  {}",
                r.k,
                r.grid_points,
                mark(r.spacing),
                mark(r.sandwich),
                mark(r.injective)
            )?;
        }
        let w = &self.witness;
        writeln!(f, "Psi0({}, {}) = {}", w.x1[0], w.x1[1], w.value1)?;
        writeln!(f, "Psi0({}, {}) = {}", w.x2[0], w.x2[1], w.value2)?;
        writeln!(f, "same level-1 box: {}", w.same_box)?;
        write!(f, "limit collision: {}", if w.collides() { "yes" } else { "no" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn c() -> LinearCandidate {
        LinearCandidate::standard()
    }

    fn qn(a: i64, b: i64) -> QuadraticNumber {
        QuadraticNumber::rational(q(a, b))
    }

    #[test]
    fn candidate_validation() {
        assert!(LinearCandidate::new(5, q(1, 50)).is_err());
        assert!(LinearCandidate::new(10, q(1, 100)).is_err());
        assert!(LinearCandidate::new(10, q(1, 10)).is_err());
        assert!(LinearCandidate::new(10, q(1, 20)).is_ok());
        let mut bad = c();
        bad.alphas[1] = qn(3, 1);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn level_one_intervals() {
        let ivs = bad_intervals(&c(), 1, 0).unwrap();
        assert_eq!(ivs[1], BadInterval { d: q(1, 10), lo: q(1, 10), hi: q(199, 1000) });
        assert_eq!(&ivs[2].lo - &ivs[1].hi, q(1, 1000));
        assert!(ivs.iter().all(|iv| iv.hi <= q(1, 1)));
        // The last interval starts at 1 and is clipped to a point.
        assert_eq!(ivs.last().unwrap().lo, q(1, 1));
        assert_eq!(ivs.last().unwrap().hi, q(1, 1));
    }

    #[test]
    fn shifted_intervals_clip_at_zero() {
        let ivs = bad_intervals(&c(), 1, 3).unwrap();
        assert_eq!(ivs[0], BadInterval { d: q(-1, 10), lo: q(0, 1), hi: q(-1, 10) + q(3, 50) + q(99, 1000) });
    }

    #[test]
    fn level_one_coverage() {
        // Every point misses at most one family.
        assert_eq!(min_family_coverage(&c(), 1).unwrap(), 4);
    }

    #[test]
    fn coarse_epsilon_aligns_level_two_gaps() {
        // qε is a multiple of 1/γ² when ε = 1/50, so all five families share gaps.
        assert_eq!(min_family_coverage(&c(), 2).unwrap(), 0);
        let finer = LinearCandidate::new(10, q(1, 47)).unwrap();
        assert_eq!(min_family_coverage(&finer, 2).unwrap(), 4);
    }

    #[test]
    fn intervals_refine_with_their_gaps() {
        for qq in 0..5 {
            assert!(intervals_refine(&c(), 1, qq).unwrap());
            assert!(intervals_refine(&c(), 2, qq).unwrap());
        }
    }

    #[test]
    fn staircase_plateaus() {
        let f = bad_psi_level(&c(), 1, 1, 0).unwrap();
        assert_eq!(f.eval(&qn(1, 20)), qn(0, 1));
        let g = bad_psi_level(&c(), 1, 2, 0).unwrap();
        assert_eq!(g.eval(&qn(3, 20)), QuadraticNumber::new(q(0, 1), q(1, 10)));
        assert!(g.is_monotone());
        assert!(bad_psi_level(&c(), 1, 3, 0).is_err());
    }

    #[test]
    fn staircase_converges_to_linear() {
        for p in 1..=2 {
            let errs: Vec<QuadraticNumber> = (1..=3).map(|k| bad_psi_error(&c(), k, p, 0).unwrap()).collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2]);
            // Bounded by α_p times the step 1/γ^k.
            for (k, e) in errs.iter().enumerate() {
                let bound = &c().alphas[p - 1] * &qn(1, 10i64.pow(k as u32 + 1));
                assert!(*e <= bound);
            }
        }
    }

    #[test]
    fn shifted_staircase_approaches_unshifted_line() {
        let c = c();
        let drift: Vec<QuadraticNumber> = (1..=3).map(|k| bad_psi_drift(&c, k, 2, 2).unwrap()).collect();
        assert!(drift[0] > drift[1] && drift[1] > drift[2]);
        // Against α_p (x + qε) the error stays near α_p qε.
        let offset = &c.alphas[1] * &QuadraticNumber::rational(q(2, 50));
        assert!(bad_psi_error(&c, 3, 2, 2).unwrap() >= &offset - &drift[2]);
    }

    #[test]
    fn spacing_example() {
        let c = c();
        assert_eq!(&c.lambda(1, 2, 0, 1) - &c.lambda(1, 2, 0, 0), QuadraticNumber::new(q(0, 1), q(1, 10)));
        // λ_{2,9} - λ_{1,0} = 9α_p/100, within ε_1 - ε_2 = 9√2/100.
        let d = &c.lambda(2, 2, 0, 9) - &c.lambda(1, 2, 0, 0);
        assert_eq!(d, QuadraticNumber::new(q(0, 1), q(9, 100)));
    }

    #[test]
    fn grid_lemmas_hold() {
        let r = check_bad_lemmas(&c(), 2);
        assert_eq!(r.rows.len(), 2);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.rows[0].grid_points, 121);
    }

    #[test]
    fn injectivity_matches_pairwise_comparison() {
        let c = c();
        for qq in [0, 4] {
            let pts: Vec<QuadraticNumber> = (0..=10)
                .flat_map(|i| (0..=10).map(move |j| (i, j)))
                .map(|(i, j)| &c.lambda(1, 1, qq, i) + &c.lambda(1, 2, qq, j))
                .collect();
            let pairwise = (0..pts.len()).all(|a| (a + 1..pts.len()).all(|b| pts[a] != pts[b]));
            assert_eq!(pairwise, grid_injective(&c, 1, qq));
            assert!(pairwise);
        }
    }

    #[test]
    fn dependent_alphas_break_injectivity() {
        let mut c = c();
        c.alphas[1] = qn(2, 1);
        assert!(!grid_injective(&c, 1, 0));
    }

    #[test]
    fn collision() {
        let w = collision_witness(&c()).unwrap();
        assert_eq!(w.value1, qn(1, 2));
        assert_eq!(w.value2, qn(1, 2));
        assert!(!w.same_box);
        assert!(w.collides());
    }

    #[test]
    fn report_lists_levels_and_collision() {
        let j = juxtaposition(&c(), 1).unwrap();
        assert!(j.holds());
        let text = j.to_string();
        assert!(text.contains("limit collision: yes"));
        assert_eq!(text.lines().count(), 6);
    }
}
