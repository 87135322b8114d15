use num_traits::{One, Zero};

use kolmo_core::exact::parse_rational;
use kolmo_core::{build, refine, PiecewiseLinear, Rational, RefinementState};

fn r(s: &str) -> Rational {
    parse_rational(s).unwrap()
}

fn standard(levels: usize) -> Vec<RefinementState> {
    build(2, r("1/5"), levels).unwrap()
}

/// Linear scan over the towns, independent of the binary search in `locate`.
fn covered(state: &RefinementState, x: &Rational) -> bool {
    state.towns.iter().any(|t| t.start <= *x && *x <= t.end)
}

/// Every shifted endpoint that lands in `[0, 1]`, plus the midpoints between
/// neighbours, so each cell of the arrangement gets sampled.
fn arrangement_samples(state: &RefinementState) -> Vec<Rational> {
    let mut pts = vec![Rational::zero(), Rational::one()];
    for q in 0..state.families() as i64 {
        let s = state.shift(q);
        for t in &state.towns {
            for e in [&t.start, &t.end] {
                let p = e + &s;
                if p >= Rational::zero() && p <= Rational::one() {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort();
    pts.dedup();
    let mids: Vec<Rational> = pts.windows(2).map(|w| (&w[0] + &w[1]) / Rational::from_integer(2.into())).collect();
    pts.extend(mids);
    pts
}

#[test]
fn first_level_splits_at_the_origin() {
    let s = &standard(1)[1];
    assert_eq!(s.towns.len(), 2);
    assert_eq!((&s.towns[0].start, &s.towns[0].end, &s.towns[0].value), (&r("-1"), &r("-1/15"), &r("0")));
    assert_eq!((&s.towns[1].start, &s.towns[1].end, &s.towns[1].value), (&r("1/15"), &r("1"), &r("1/15")));
}

#[test]
fn coverage_matches_a_brute_force_count() {
    for s in standard(5) {
        let counts: Vec<usize> = arrangement_samples(&s)
            .iter()
            .map(|x| (0..s.families() as i64).filter(|&q| covered(&s, &(x - s.shift(q)))).count())
            .collect();
        let brute = *counts.iter().min().unwrap();
        assert_eq!(brute, s.min_coverage(), "level {}", s.level);
        assert!(brute > s.n, "level {}", s.level);
    }
}

#[test]
fn psi_is_constant_on_towns_and_monotone_between() {
    for s in standard(6) {
        let psi = PiecewiseLinear::from_state(&s);
        for t in &s.towns {
            assert_eq!(psi.eval(&t.start), t.value);
            assert_eq!(psi.eval(&t.midpoint()), t.value);
            assert_eq!(psi.eval(&t.end), t.value);
        }
        let lattice: Vec<Rational> = (-400..=400).map(|k| Rational::new(k.into(), 400.into())).collect();
        let ys: Vec<Rational> = lattice.iter().map(|x| psi.eval(x)).collect();
        assert!(ys.windows(2).all(|w| w[0] <= w[1]), "level {}", s.level);
    }
}

#[test]
fn states_survive_json_round_trips() {
    for s in standard(4) {
        let back = RefinementState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        back.validate().unwrap();
    }
}

#[test]
fn refining_a_reloaded_state_continues_the_build() {
    let states = standard(4);
    let reloaded = RefinementState::from_json(&states[3].to_json().unwrap()).unwrap();
    assert_eq!(refine(&reloaded).unwrap(), states[4]);
}

#[test]
fn plugged_holes_shrink_every_level() {
    let states = standard(6);
    for w in states.windows(2) {
        let holes = |s: &RefinementState| -> Rational {
            s.towns.windows(2).map(|p| &p[1].start - &p[0].end).max().unwrap_or_else(Rational::zero)
        };
        if w[0].towns.len() > 1 {
            assert!(holes(&w[1]) <= holes(&w[0]), "level {}", w[1].level);
        }
    }
}
