//! Mechanical checks of a built level: shrinking towns, coverage by the
//! shifted families, separated plateaus, the slope cap, and disjointness of
//! cube images under the embedding.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::{format_rational, q, serde_rational, slope_cap, BigFloat, Rational, Round};
use crate::function::PiecewiseLinear;
use crate::outer::{CubeImage, Embedding};
use crate::town::RefinementState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckItem {
    Structure,
    Diameter,
    Coverage,
    Monotone,
    ImageSeparation,
    SlopeCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub item: CheckItem,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub level: usize,
    #[serde(with = "serde_rational")]
    pub max_diameter: Rational,
    #[serde(with = "serde_rational")]
    pub diameter_envelope: Rational,
    pub min_coverage: usize,
    /// Most families with a gap at one point of `[0, 1]`.
    pub max_family_gaps: usize,
    pub monotone: bool,
    #[serde(with = "serde_rational")]
    pub lipschitz: Rational,
    pub slope_cap_ok: bool,
    pub image_separation_ok: bool,
    /// Smallest difference of consecutive plateau values; absent with one town.
    #[serde(with = "crate::exact::serde_extended")]
    pub min_image_gap: Option<Rational>,
    pub failures: Vec<Failure>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `max(2·(3/4)^j, (1/2)^j)`.
pub fn diameter_envelope(level: usize) -> Rational {
    let a = q(2, 1) * num_traits::pow(q(3, 4), level);
    let b = num_traits::pow(q(1, 2), level);
    a.max(b)
}

pub fn check_criterion(state: &RefinementState) -> VerificationReport {
    let mut failures = Vec::new();
    let mut fail = |item, detail: String| failures.push(Failure { item, detail });

    if let Err(e) = state.validate() {
        fail(CheckItem::Structure, e.to_string());
    }

    let max_diameter = state.max_diameter();
    let diameter_envelope = diameter_envelope(state.level);
    if max_diameter > diameter_envelope {
        fail(
            CheckItem::Diameter,
            format!("max diameter {} above {}", format_rational(&max_diameter), format_rational(&diameter_envelope)),
        );
    }

    let min_coverage = state.min_coverage();
    if min_coverage < 2 * state.n {
        fail(CheckItem::Coverage, format!("some point of [0,1] lies in only {min_coverage} families"));
    }

    let psi = PiecewiseLinear::from_state(state);
    let monotone = psi.is_monotone();
    if !monotone {
        fail(CheckItem::Monotone, "plateau values decrease somewhere".into());
    }

    let mut image_separation_ok = true;
    let mut min_image_gap: Option<Rational> = None;
    for (i, w) in state.towns.windows(2).enumerate() {
        let gap = &w[1].value - &w[0].value;
        if !gap.is_positive() {
            image_separation_ok = false;
            fail(
                CheckItem::ImageSeparation,
                format!("towns {} and {} have values {} and {}", i, i + 1, format_rational(&w[0].value), format_rational(&w[1].value)),
            );
        }
        min_image_gap = Some(min_image_gap.map_or(gap.clone(), |m| m.min(gap)));
    }

    // Two routes to the slope cap: the kernel's Lipschitz constant, and the
    // slope of every linear piece between consecutive towns.
    let cap = slope_cap(state.level);
    let lipschitz = psi.lipschitz_constant();
    let by_kernel = lipschitz <= cap;
    let mut by_gaps = true;
    for w in state.towns.windows(2) {
        let run = &w[1].start - &w[0].end;
        if run.is_positive() {
            let slope = (&w[1].value - &w[0].value) / run;
            if slope.abs() > cap {
                by_gaps = false;
                fail(
                    CheckItem::SlopeCap,
                    format!(
                        "slope {} on ({}, {}) exceeds {}",
                        format_rational(&slope),
                        format_rational(&w[0].end),
                        format_rational(&w[1].start),
                        format_rational(&cap)
                    ),
                );
            }
        }
    }
    if by_kernel != by_gaps {
        fail(CheckItem::SlopeCap, "Lipschitz constant and gap slopes disagree".into());
    }

    VerificationReport {
        level: state.level,
        max_diameter,
        diameter_envelope,
        min_coverage,
        max_family_gaps: state.max_family_gaps(),
        monotone,
        lipschitz,
        slope_cap_ok: by_kernel && by_gaps,
        image_separation_ok,
        min_image_gap,
        failures,
    }
}

/// Sup-norm distances between consecutive levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergenceReport {
    /// `sup_diffs[k] = ‖ψ_{k+1} - ψ_k‖∞`.
    pub sup_diffs: Vec<Rational>,
    /// `sup_diffs[k+1] / sup_diffs[k]`, absent when the denominator vanishes.
    pub ratios: Vec<Option<Rational>>,
    pub max_ratio: Option<Rational>,
    pub total: Rational,
}

impl ConvergenceReport {
    /// Geometric extrapolation of the remaining distance to the limit, using
    /// the largest of the last `window` ratios. `None` when that ratio is not below one.
    pub fn tail_estimate(&self, window: usize) -> Option<Rational> {
        let last = self.sup_diffs.last()?;
        if last.is_zero() {
            return Some(Rational::zero());
        }
        let start = self.ratios.len().saturating_sub(window);
        let r = self.ratios[start..].iter().flatten().max()?.clone();
        (r < Rational::one()).then(|| last * &r / (Rational::one() - &r))
    }
}

pub fn check_convergence(states: &[RefinementState]) -> ConvergenceReport {
    let psis: Vec<_> = states.iter().map(PiecewiseLinear::from_state).collect();
    let sup_diffs: Vec<Rational> = psis.windows(2).map(|w| w[1].sup_diff(&w[0])).collect();
    let ratios: Vec<Option<Rational>> = sup_diffs
        .windows(2)
        .map(|w| (!w[0].is_zero()).then(|| &w[1] / &w[0]))
        .collect();
    let max_ratio = ratios.iter().flatten().max().cloned();
    let total = sup_diffs.iter().sum();
    ConvergenceReport { sup_diffs, ratios, max_ratio, total }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Widened images are pairwise disjoint.
    Pass,
    /// Widened images meet, but no overlap survives shrinking by the same amount.
    Inconclusive,
    /// Two images overlap for every function within the tail bound.
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ImageSeparation {
    pub verdict: Verdict,
    /// Smallest distance between a widened image and the union of those
    /// starting before it; negative on overlap.
    pub min_gap: Option<BigFloat>,
}

/// Overlap test for closed intervals on a line: sort by left end and compare
/// each left end with the largest right end seen so far.
pub fn separate_images(images: &[CubeImage], widening: &BigFloat, prec: u32) -> ImageSeparation {
    let mut outer: Vec<(BigFloat, BigFloat)> = images.iter().map(|im| im.outer(widening, prec)).collect();
    outer.sort_by(|a, b| a.0.cmp(&b.0));
    let mut min_gap: Option<BigFloat> = None;
    let mut reach: Option<&BigFloat> = None;
    for (lo, hi) in &outer {
        if let Some(r) = reach {
            let gap = lo.sub_round(r, prec, Round::Down);
            if min_gap.as_ref().is_none_or(|m| gap < *m) {
                min_gap = Some(gap);
            }
        }
        if reach.is_none_or(|r| hi > r) {
            reach = Some(hi);
        }
    }
    let disjoint = min_gap.as_ref().is_none_or(|g| g.signum() > 0);
    if disjoint {
        return ImageSeparation { verdict: Verdict::Pass, min_gap };
    }
    if let Some(exact) = images.iter().map(|im| im.exact.clone()).collect::<Option<Vec<_>>>() {
        let w = widening.to_rational();
        let mut inner: Vec<(Rational, Rational)> =
            exact.into_iter().map(|(a, b)| (a + &w, b - &w)).filter(|(a, b)| a <= b).collect();
        inner.sort();
        let mut reach: Option<&Rational> = None;
        let overlap = inner.iter().any(|(lo, hi)| {
            let hit = reach.is_some_and(|r| lo <= r);
            if reach.is_none_or(|r| hi > r) {
                reach = Some(hi);
            }
            hit
        });
        let verdict = if overlap { Verdict::Fail } else { Verdict::Inconclusive };
        return ImageSeparation { verdict, min_gap };
    }
    let mut inner: Vec<(BigFloat, BigFloat)> = images.iter().filter_map(|im| im.inner(widening, prec)).collect();
    inner.sort_by(|a, b| a.0.cmp(&b.0));
    let mut reach: Option<&BigFloat> = None;
    let mut certain_overlap = false;
    for (lo, hi) in &inner {
        if reach.is_some_and(|r| lo <= r) {
            certain_overlap = true;
            break;
        }
        if reach.is_none_or(|r| hi > r) {
            reach = Some(hi);
        }
    }
    let verdict = if certain_overlap { Verdict::Fail } else { Verdict::Inconclusive };
    ImageSeparation { verdict, min_gap }
}

#[derive(Clone, Debug)]
pub struct CubeSeparation {
    pub level: usize,
    pub verdict: Verdict,
    pub min_gap: Option<BigFloat>,
    pub images: usize,
    pub widening: BigFloat,
    /// Verdict of each family `q = 0..2n`.
    pub families: Vec<Verdict>,
}

/// Disjointness of `Ψ^q`-images of the level-`state.level` cubes, family by
/// family, for the embedding's inner function widened by its tail bound.
pub fn check_cube_separation(e: &Embedding, state: &RefinementState, cube_limit: u128) -> Result<CubeSeparation> {
    let prec = e.precision();
    let widening = e.widening();
    let mut families = Vec::with_capacity(e.families());
    let mut min_gap: Option<BigFloat> = None;
    let mut images = 0;
    for qq in 0..e.families() {
        let system = e.cube_system(qq, state)?;
        let imgs = e.cube_images(&system, cube_limit)?;
        images += imgs.len();
        let sep = separate_images(&imgs, &widening, prec);
        if let Some(g) = sep.min_gap {
            if min_gap.as_ref().is_none_or(|m| g < *m) {
                min_gap = Some(g);
            }
        }
        families.push(sep.verdict);
    }
    let verdict = if families.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if families.contains(&Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(CubeSeparation { level: state.level, verdict, min_gap, images, widening, families })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::from_int;
    use crate::inner::build;
    use crate::outer::DEFAULT_CUBE_LIMIT;
    use crate::town::{Origin, Town};

    const PREC: u32 = 128;

    fn states(levels: usize) -> Vec<RefinementState> {
        build(2, q(1, 5), levels).unwrap()
    }

    #[test]
    fn level_one_passes_everything() {
        let r = check_criterion(&states(1)[1]);
        assert!(r.passed(), "{:?}", r.failures);
        assert_eq!(r.min_coverage, 4);
        assert_eq!(r.max_family_gaps, 1);
        assert_eq!(r.max_diameter, q(14, 15));
        assert_eq!(r.lipschitz, q(1, 2));
        assert_eq!(r.min_image_gap, Some(q(1, 15)));
    }

    #[test]
    fn root_passes_vacuously() {
        let r = check_criterion(&states(0)[0]);
        assert!(r.passed());
        assert_eq!(r.min_image_gap, None);
        assert_eq!(r.lipschitz, q(0, 1));
    }

    #[test]
    fn equal_plateaus_are_reported() {
        let mut s = states(1)[1].clone();
        s.towns[1].value = s.towns[0].value.clone();
        let r = check_criterion(&s);
        assert!(!r.image_separation_ok);
        assert!(r.monotone);
        let f = r.failures.iter().find(|f| f.item == CheckItem::ImageSeparation).unwrap();
        assert!(f.detail.contains("towns 0 and 1"));
    }

    #[test]
    fn steep_gap_is_reported_by_both_routes() {
        let mut s = states(1)[1].clone();
        s.towns[1].value = q(1, 5);
        let r = check_criterion(&s);
        assert!(!r.slope_cap_ok);
        assert!(r.failures.iter().any(|f| f.item == CheckItem::SlopeCap && f.detail.contains("slope 3/2")));
        assert!(!r.failures.iter().any(|f| f.detail.contains("disagree")));
    }

    #[test]
    fn coarse_towns_break_the_envelope() {
        let mut s = states(0)[0].clone();
        s.level = 3;
        let r = check_criterion(&s);
        assert!(r.failures.iter().any(|f| f.item == CheckItem::Diameter));
        assert_eq!(diameter_envelope(3), q(27, 32));
        assert_eq!(diameter_envelope(11), q(2, 1) * num_traits::pow(q(3, 4), 11));
    }

    #[test]
    fn convergence_first_step() {
        let c = check_convergence(&states(1));
        assert_eq!(c.sup_diffs, vec![q(1, 15)]);
        assert!(c.ratios.is_empty());
        assert_eq!(c.total, q(1, 15));
    }

    #[test]
    fn convergence_of_a_stalled_build_is_zero() {
        let mut s = states(0)[0].clone();
        s.towns = vec![Town::new(from_int(-1), from_int(1), q(0, 1), Origin::Root, 0)];
        s.level = 7;
        let frozen = vec![s.clone(), RefinementState { level: 8, ..s.clone() }, RefinementState { level: 9, ..s }];
        let c = check_convergence(&frozen);
        assert_eq!(c.sup_diffs, vec![q(0, 1), q(0, 1)]);
        assert_eq!(c.ratios, vec![None]);
        assert_eq!(c.tail_estimate(3), Some(q(0, 1)));
    }

    #[test]
    fn sup_diffs_bound_distance_to_deepest_level() {
        let s = states(6);
        let c = check_convergence(&s);
        let deepest = PiecewiseLinear::from_state(&s[6]);
        for j in 0..6 {
            let tail: Rational = c.sup_diffs[j..].iter().sum();
            assert!(deepest.sup_diff(&PiecewiseLinear::from_state(&s[j])) <= tail);
        }
    }

    #[test]
    fn level_one_cubes_separate() {
        let s = states(1);
        let e = Embedding::from_state(&s[1], PREC).unwrap();
        let sep = check_cube_separation(&e, &s[1], DEFAULT_CUBE_LIMIT).unwrap();
        assert_eq!(sep.verdict, Verdict::Pass);
        assert!(sep.min_gap.unwrap().signum() > 0);
    }

    #[test]
    fn dependent_weights_collide() {
        let s = states(1);
        let e = Embedding::from_state(&s[1], PREC).unwrap().with_rational_lambdas(vec![q(1, 1), q(1, 1)]).unwrap();
        let sep = check_cube_separation(&e, &s[1], DEFAULT_CUBE_LIMIT).unwrap();
        assert_eq!(sep.verdict, Verdict::Fail);
        // Family 0 sees a single cube; family 2 sees both mixed cubes land on 1/15.
        assert_eq!(sep.families[0], Verdict::Pass);
        assert_eq!(sep.families[2], Verdict::Fail);
    }

    #[test]
    fn wide_tail_is_inconclusive() {
        let s = states(1);
        let tail = BigFloat::from_rational(&q(1, 10), PREC, Round::Up);
        let e = Embedding::from_state(&s[1], PREC).unwrap().with_tail_bound(tail);
        let sep = check_cube_separation(&e, &s[1], DEFAULT_CUBE_LIMIT).unwrap();
        assert_eq!(sep.verdict, Verdict::Inconclusive);
    }

    /// Brute-force oracle: all pairs of rational images, no sorting.
    #[test]
    fn sweep_matches_all_pairs() {
        let s = states(3);
        let e = Embedding::from_state(&s[3], PREC).unwrap();
        for level in 0..=3 {
            for qq in 0..5 {
                let sys = e.cube_system(qq, &s[level]).unwrap();
                let imgs = e.cube_images(&sys, DEFAULT_CUBE_LIMIT).unwrap();
                let sweep = separate_images(&imgs, &BigFloat::zero(PREC), PREC).verdict;
                let mut exact = Vec::new();
                sys.for_each_cube(|c| {
                    let lo: f64 = c.iter().zip([1.0, 2f64.sqrt()]).map(|(&i, l)| l * crate::exact::to_f64(&sys.sides[i].psi_lo)).sum();
                    let hi: f64 = c.iter().zip([1.0, 2f64.sqrt()]).map(|(&i, l)| l * crate::exact::to_f64(&sys.sides[i].psi_hi)).sum();
                    exact.push((lo, hi));
                });
                let mut overlap = false;
                for a in 0..exact.len() {
                    for b in a + 1..exact.len() {
                        let (x, y) = (exact[a], exact[b]);
                        if x.0.max(y.0) <= x.1.min(y.1) + 1e-12 {
                            overlap = true;
                        }
                    }
                }
                assert_eq!(sweep == Verdict::Pass, !overlap, "level {level} q {qq}");
            }
        }
    }
}
