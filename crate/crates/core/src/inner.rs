//! One refinement level of the Lipschitz inner function: select the towns to
//! break, pick (possibly perturbed) break points, plug every hole that a
//! shifted break point falls into, then cut a gap around each break point.
//!
//! All geometry is exact rational arithmetic. The stages run in that fixed
//! order: every plug of a level is inserted before any gap is cut, so the
//! level does not depend on the order in which towns are visited.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, from_int, q, serde_extended, serde_rational, slope_cap, Rational};
use crate::town::{validate_parameters, Location, Origin, RefinementState, Town};

/// Tunables of the refinement. The defaults reproduce the published choices.
#[derive(Clone, Debug)]
pub struct RefineOptions {
    /// Towns of length at least `theta^(j+1)` are broken when building level `j+1`.
    pub theta: Rational,
    /// Weight on the distance to town endpoints.
    pub alpha: Rational,
    /// Weight on the distance to other shifted break points.
    pub beta: Rational,
    /// Perturbation steps tried: `len/16 · 2^-k` for `k < max_halvings`, both signs.
    pub max_halvings: u32,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { theta: q(1, 2), alpha: q(2, 3), beta: q(1, 3), max_halvings: 24 }
    }
}

/// A shifted copy `p - qε` of break point `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedPoint {
    #[serde(with = "serde_rational")]
    pub p: Rational,
    pub q: i64,
    #[serde(with = "serde_rational")]
    pub point: Rational,
}

/// Open interval between two consecutive towns that receives plugs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hole {
    /// Index of the town just below the hole.
    pub left_index: usize,
    pub left_end: Rational,
    pub right_end: Rational,
    /// Sorted by `point`, all strictly inside the hole.
    pub shifted_points: Vec<ShiftedPoint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlugSolution {
    pub hole: Hole,
    pub nu: usize,
    /// `(a_i, b_i)` for each plug.
    pub endpoints: Vec<(Rational, Rational)>,
    /// Plateau value `f_i = ψ_j(p̂_i)` of each plug.
    pub values: Vec<Rational>,
    pub m_hat: Rational,
}

impl PlugSolution {
    pub fn towns(&self, birth_level: usize) -> Vec<Town> {
        self.endpoints
            .iter()
            .zip(&self.values)
            .map(|((a, b), v)| Town::new(a.clone(), b.clone(), v.clone(), Origin::Plug, birth_level))
            .collect()
    }
}

/// How one town is broken. `None` stands for an empty minimum (+∞).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakPlan {
    #[serde(with = "serde_rational")]
    pub town_start: Rational,
    #[serde(with = "serde_rational")]
    pub p: Rational,
    /// Smallest distance from a covered copy of `p` to its town's left end.
    #[serde(with = "serde_extended")]
    pub rho_plus: Option<Rational>,
    /// Smallest distance from a covered copy of `p` to its town's right end.
    #[serde(with = "serde_extended")]
    pub rho_minus: Option<Rational>,
    #[serde(with = "serde_extended")]
    pub delta_plus: Option<Rational>,
    #[serde(with = "serde_extended")]
    pub delta_minus: Option<Rational>,
    #[serde(with = "serde_rational")]
    pub rho: Rational,
    #[serde(with = "serde_rational")]
    pub eta: Rational,
}

/// Everything decided while building one level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelAudit {
    pub level: usize,
    pub breaks: Vec<BreakPlan>,
    pub plugs: Vec<PlugSolution>,
}

#[derive(Serialize)]
struct BreakRecord<'a> {
    level: usize,
    kind: &'static str,
    #[serde(flatten)]
    plan: &'a BreakPlan,
}

#[derive(Serialize)]
struct PlugRecord {
    level: usize,
    kind: &'static str,
    hole: [String; 2],
    nu: usize,
    endpoints: Vec<[String; 2]>,
    values: Vec<String>,
}

impl LevelAudit {
    /// One JSON object per line: plug solutions first, then breaks.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for plug in &self.plugs {
            let rec = PlugRecord {
                level: self.level,
                kind: "plug",
                hole: [format_rational(&plug.hole.left_end), format_rational(&plug.hole.right_end)],
                nu: plug.nu,
                endpoints: plug.endpoints.iter().map(|(a, b)| [format_rational(a), format_rational(b)]).collect(),
                values: plug.values.iter().map(format_rational).collect(),
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        for plan in &self.breaks {
            out.push_str(&serde_json::to_string(&BreakRecord { level: self.level, kind: "break", plan })?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn shift_range(n: usize) -> std::ops::RangeInclusive<i64> {
    let m = 2 * n as i64;
    -m..=m
}

fn in_base_domain(x: &Rational) -> bool {
    *x >= from_int(-1) && *x <= Rational::one()
}

/// Indices of towns with length at least `theta^(level+1)`.
pub fn select_breakables(state: &RefinementState, opts: &RefineOptions) -> Vec<usize> {
    let threshold = num_traits::pow(opts.theta.clone(), state.level + 1);
    state
        .towns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.len() >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Candidate break points for `town`: the midpoint, then perturbations of
/// `len/16, len/32, ...`, first away from the origin, then toward it.
fn candidate_breakpoints(town: &Town, opts: &RefineOptions) -> impl Iterator<Item = Rational> {
    let mid = town.midpoint();
    let sign = if mid.is_negative() { from_int(-1) } else { Rational::one() };
    let len = town.len();
    let steps = (0..opts.max_halvings).flat_map(move |k| {
        let step = &len / Rational::from_integer(num_bigint::BigInt::from(16) << k);
        let away = &sign * &step;
        [away.clone(), -away]
    });
    std::iter::once(Rational::zero()).chain(steps).map(move |d| &mid + d)
}

/// Whether `p` (a candidate for town `idx`) collides with an existing town
/// endpoint or with a shifted copy of an already fixed break point.
fn has_conflict(state: &RefinementState, idx: usize, p: &Rational, fixed_copies: &BTreeSet<Rational>) -> bool {
    let town = &state.towns[idx];
    if *p <= town.start || *p >= town.end {
        return true;
    }
    for qi in shift_range(state.n) {
        let c = p - state.shift(qi);
        if fixed_copies.contains(&c) {
            return true;
        }
        if let Location::Town(i) = state.locate(&c) {
            let t = &state.towns[i];
            if c == t.start || c == t.end {
                return true;
            }
        }
    }
    false
}

/// Break point for town `idx` given the break points already fixed on this
/// level. Conflicts: a shifted copy landing on a town endpoint (which would
/// also make ρ vanish), or on a shifted copy of a fixed break point.
pub fn choose_breakpoint(
    state: &RefinementState,
    idx: usize,
    fixed: &[Rational],
    opts: &RefineOptions,
) -> Result<Rational> {
    let copies = copy_set(state, fixed);
    choose_with_copies(state, idx, &copies, opts)
}

fn copy_set(state: &RefinementState, points: &[Rational]) -> BTreeSet<Rational> {
    points.iter().flat_map(|p| shift_range(state.n).map(move |qi| p - state.shift(qi))).collect()
}

fn choose_with_copies(
    state: &RefinementState,
    idx: usize,
    copies: &BTreeSet<Rational>,
    opts: &RefineOptions,
) -> Result<Rational> {
    let town = &state.towns[idx];
    candidate_breakpoints(town, opts)
        .find(|p| !has_conflict(state, idx, p, copies))
        .ok_or_else(|| Error::PerturbationExhausted {
            level: state.level + 1,
            start: format_rational(&town.start),
            end: format_rational(&town.end),
        })
}

/// Break points for `indices`, resolved in order of town position so the
/// result does not depend on the order of `indices`.
pub fn choose_breakpoints(state: &RefinementState, indices: &[usize], opts: &RefineOptions) -> Result<Vec<Rational>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut copies = BTreeSet::new();
    let mut chosen = Vec::with_capacity(sorted.len());
    for idx in sorted {
        let p = choose_with_copies(state, idx, &copies, opts)?;
        copies.extend(shift_range(state.n).map(|qi| &p - state.shift(qi)));
        chosen.push((idx, p));
    }
    // Report in the caller's order.
    Ok(indices
        .iter()
        .map(|i| chosen.iter().find(|(j, _)| j == i).map(|(_, p)| p.clone()).unwrap())
        .collect())
}

/// Holes of the base system hit by a shifted break point `p - qε`,
/// `q ∈ {-2n..2n}`, restricted to copies inside `[-1, 1]`.
pub fn find_holes(state: &RefinementState, breakpoints: &[Rational]) -> Vec<Hole> {
    let mut holes: Vec<Hole> = Vec::new();
    for p in breakpoints {
        for qi in shift_range(state.n) {
            let c = p - state.shift(qi);
            if !in_base_domain(&c) {
                continue;
            }
            if let Location::Hole(i, j) = state.locate(&c) {
                let sp = ShiftedPoint { p: p.clone(), q: qi, point: c };
                match holes.iter_mut().find(|h| h.left_index == i) {
                    Some(h) => h.shifted_points.push(sp),
                    None => holes.push(Hole {
                        left_index: i,
                        left_end: state.towns[i].end.clone(),
                        right_end: state.towns[j].start.clone(),
                        shifted_points: vec![sp],
                    }),
                }
            }
        }
    }
    holes.sort_by_key(|h| h.left_index);
    for h in &mut holes {
        h.shifted_points.sort_by(|a, b| a.point.cmp(&b.point));
        h.shifted_points.dedup_by(|a, b| a.point == b.point);
    }
    holes
}

/// Exact Gauss-Jordan elimination for a small dense system.
pub fn solve_dense(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("system must be square".into()));
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularSystem)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for k in col..n {
            a[col][k] = &a[col][k] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for k in col..n {
                    let delta = &factor * &a[col][k];
                    a[r][k] -= delta;
                }
                let delta = &factor * &b[col];
                b[r] -= delta;
            }
        }
    }
    Ok(b)
}

/// The plug system `Cx = z` in its published row order: ν+1 slope rows, then
/// ν-1 symmetry rows, over `x = (a_1, b_1, ..., a_ν, b_ν)`.
///
/// `f` holds `f_0..f_{ν+1}` and `points` the shifted break points `p̂_1..p̂_ν`.
pub fn plug_system(
    left_end: &Rational,
    right_end: &Rational,
    points: &[Rational],
    f: &[Rational],
    m_hat: &Rational,
) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let nu = points.len();
    let dim = 2 * nu;
    let zero_row = || vec![Rational::zero(); dim];
    let (mut c, mut z) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    // Slope rows: m̂ (a_i - b_{i-1}) = f_i - f_{i-1}, i = 1..ν+1.
    for i in 1..=nu + 1 {
        let mut row = zero_row();
        let mut rhs = &f[i] - &f[i - 1];
        if i <= nu {
            row[2 * (i - 1)] = m_hat.clone();
        } else {
            rhs -= m_hat * right_end;
        }
        if i >= 2 {
            row[2 * (i - 2) + 1] = -m_hat;
        } else {
            rhs += m_hat * left_end;
        }
        c.push(row);
        z.push(rhs);
    }
    // Symmetry rows: b_i + a_{i+1} = p̂_i + p̂_{i+1}, i = 1..ν-1.
    for i in 1..nu {
        let mut row = zero_row();
        row[2 * (i - 1) + 1] = Rational::one();
        row[2 * i] = Rational::one();
        c.push(row);
        z.push(&points[i - 1] + &points[i]);
    }
    (c, z)
}

/// Solves the plug system block by block. After permuting rows, the unknowns
/// decouple into `{a_1}`, the pairs `{b_i, a_{i+1}}` and `{b_ν}`.
fn solve_plug_blocks(c: &[Vec<Rational>], z: &[Rational], nu: usize) -> Result<Vec<Rational>> {
    let mut x = vec![Rational::zero(); 2 * nu];
    // {a_1}: slope row 0.
    x[0] = solve_dense(vec![vec![c[0][0].clone()]], vec![z[0].clone()])?[0].clone();
    // {b_i, a_{i+1}}: slope row i and symmetry row ν+i.
    for i in 1..nu {
        let (vb, va) = (2 * (i - 1) + 1, 2 * i);
        let rows = [i, nu + i];
        let a = rows.iter().map(|&r| vec![c[r][vb].clone(), c[r][va].clone()]).collect();
        let b = rows.iter().map(|&r| z[r].clone()).collect();
        let sol = solve_dense(a, b)?;
        x[vb] = sol[0].clone();
        x[va] = sol[1].clone();
    }
    // {b_ν}: slope row ν.
    let last = 2 * nu - 1;
    x[last] = solve_dense(vec![vec![c[nu][last].clone()]], vec![z[nu].clone()])?[0].clone();
    Ok(x)
}

/// Plugs for `hole`: one closed town around each shifted break point, with
/// ψ_{j+1} rising at slope `m_hat` between consecutive plugs.
pub fn solve_plugs(hole: &Hole, state: &RefinementState, m_hat: &Rational) -> Result<PlugSolution> {
    let nu = hole.shifted_points.len();
    if nu == 0 {
        return Err(Error::InvalidParameter("hole carries no shifted points".into()));
    }
    let left = &state.towns[hole.left_index];
    let right = &state.towns[hole.left_index + 1];
    let (b0, a_end) = (&hole.left_end, &hole.right_end);
    let width = a_end - b0;
    let interp = |x: &Rational| &left.value + (&right.value - &left.value) * (x - b0) / &width;
    let points: Vec<Rational> = hole.shifted_points.iter().map(|s| s.point.clone()).collect();
    let mut f = Vec::with_capacity(nu + 2);
    f.push(left.value.clone());
    f.extend(points.iter().map(interp));
    f.push(right.value.clone());

    let (c, z) = plug_system(b0, a_end, &points, &f, m_hat);
    let x = solve_plug_blocks(&c, &z, nu)?;
    let endpoints: Vec<(Rational, Rational)> = x.chunks(2).map(|w| (w[0].clone(), w[1].clone())).collect();

    let fail = |detail: String| Error::PlugOrdering {
        level: state.level + 1,
        left: format_rational(b0),
        right: format_rational(a_end),
        detail,
    };
    let mut prev_end = b0.clone();
    for (i, ((a, b), p)) in endpoints.iter().zip(&points).enumerate() {
        if !(prev_end < *a && *a < *p && *p < *b) {
            return Err(fail(format!("plug {} = [{}, {}] around {}", i + 1, format_rational(a), format_rational(b), format_rational(p))));
        }
        prev_end = b.clone();
    }
    if prev_end >= *a_end {
        return Err(fail("last plug reaches the right town".into()));
    }
    Ok(PlugSolution { hole: hole.clone(), nu, endpoints, values: f[1..=nu].to_vec(), m_hat: m_hat.clone() })
}

/// Sorted shifted copies of every break point of the level.
#[derive(Clone, Debug)]
pub struct CopyIndex {
    sorted: Vec<Rational>,
}

impl CopyIndex {
    pub fn new(n: usize, epsilon: &Rational, breakpoints: &[Rational]) -> Self {
        let mut sorted: Vec<Rational> = breakpoints
            .iter()
            .flat_map(|p| shift_range(n).map(move |qi| p - epsilon * from_int(qi)))
            .collect();
        sorted.sort();
        Self { sorted }
    }

    /// Distances from `c` to the nearest strictly smaller and strictly larger copies.
    fn neighbours(&self, c: &Rational) -> (Option<Rational>, Option<Rational>) {
        let lo = self.sorted.partition_point(|x| x < c);
        let hi = self.sorted.partition_point(|x| x <= c);
        let below = lo.checked_sub(1).map(|i| c - &self.sorted[i]);
        let above = self.sorted.get(hi).map(|x| x - c);
        (below, above)
    }
}

fn min_opt(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Gap around break point `p` of town `idx` in the plugged system.
///
/// Copies inside `[-1, 1]` must lie in a town; those just outside constrain
/// ρ through the outermost town so that the visible part of the shifted gap
/// stays covered.
pub fn create_gap(
    plugged: &RefinementState,
    idx: usize,
    p: &Rational,
    copies: &CopyIndex,
    opts: &RefineOptions,
) -> Result<(BreakPlan, Town, Town)> {
    let level = plugged.level + 1;
    let (mut rho_plus, mut rho_minus) = (None, None);
    let (mut delta_plus, mut delta_minus) = (None, None);
    let first = &plugged.towns[0];
    let last = &plugged.towns[plugged.towns.len() - 1];
    for qi in shift_range(plugged.n) {
        let c = p - plugged.shift(qi);
        let (below, above) = copies.neighbours(&c);
        delta_plus = min_opt(delta_plus, below);
        delta_minus = min_opt(delta_minus, above);
        if c > Rational::one() {
            rho_plus = min_opt(rho_plus, Some(&c - &last.start));
        } else if c < from_int(-1) {
            rho_minus = min_opt(rho_minus, Some(&first.end - &c));
        } else {
            match plugged.locate(&c) {
                Location::Town(i) => {
                    let t = &plugged.towns[i];
                    rho_plus = min_opt(rho_plus, Some(&c - &t.start));
                    rho_minus = min_opt(rho_minus, Some(&t.end - &c));
                }
                _ => {
                    return Err(Error::UncoveredCopy {
                        level,
                        p: format_rational(p),
                        q: qi,
                        point: format_rational(&c),
                    })
                }
            }
        }
    }
    let terms = [
        rho_plus.as_ref().map(|r| &opts.alpha * r),
        rho_minus.as_ref().map(|r| &opts.alpha * r),
        delta_plus.as_ref().map(|d| &opts.beta * d),
        delta_minus.as_ref().map(|d| &opts.beta * d),
    ];
    let rho = terms.into_iter().flatten().min().ok_or_else(|| Error::DegenerateGap {
        level,
        p: format_rational(p),
        rho: "inf".into(),
    })?;
    if !rho.is_positive() {
        return Err(Error::DegenerateGap { level, p: format_rational(p), rho: format_rational(&rho) });
    }
    let town = &plugged.towns[idx];
    let eta = match plugged.towns.get(idx + 1) {
        Some(next) => rho.clone().min((&next.value - &town.value) / from_int(2)),
        None => rho.clone(),
    };
    let left = Town::new(town.start.clone(), p - &rho, town.value.clone(), Origin::SplitLeft, level);
    let right = Town::new(p + &rho, town.end.clone(), &town.value + &eta, Origin::SplitRight, level);
    let plan = BreakPlan {
        town_start: town.start.clone(),
        p: p.clone(),
        rho_plus,
        rho_minus,
        delta_plus,
        delta_minus,
        rho,
        eta,
    };
    Ok((plan, left, right))
}

/// Builds level `j+1` from level `j`.
pub fn refine(state: &RefinementState) -> Result<RefinementState> {
    refine_with_audit(state, &RefineOptions::default()).map(|(s, _)| s)
}

pub fn refine_with_audit(state: &RefinementState, opts: &RefineOptions) -> Result<(RefinementState, LevelAudit)> {
    let order = select_breakables(state, opts);
    refine_with_order(state, opts, &order)
}

/// Like [`refine_with_audit`], visiting the breakable towns in `order` (a
/// permutation of [`select_breakables`]). The result does not depend on it.
pub fn refine_with_order(
    state: &RefinementState,
    opts: &RefineOptions,
    order: &[usize],
) -> Result<(RefinementState, LevelAudit)> {
    let mut expected = select_breakables(state, opts);
    let mut given = order.to_vec();
    given.sort_unstable();
    expected.sort_unstable();
    if given != expected {
        return Err(Error::InvalidParameter("order must be a permutation of the breakable towns".into()));
    }
    let level = state.level + 1;
    let m_hat = slope_cap(level);

    let breakpoints = choose_breakpoints(state, order, opts)?;

    let holes = find_holes(state, &breakpoints);
    let plugs = holes.iter().map(|h| solve_plugs(h, state, &m_hat)).collect::<Result<Vec<_>>>()?;

    let mut towns = state.towns.clone();
    for plug in &plugs {
        towns.extend(plug.towns(level));
    }
    towns.sort_by(|a, b| a.start.cmp(&b.start));
    let plugged = RefinementState { towns, ..state.clone() };

    let copies = CopyIndex::new(state.n, &state.epsilon, &breakpoints);
    let mut replaced: Vec<Option<(Town, Town)>> = vec![None; plugged.towns.len()];
    let mut breaks = Vec::with_capacity(order.len());
    for (&orig, p) in order.iter().zip(&breakpoints) {
        let start = &state.towns[orig].start;
        let idx = plugged.towns.binary_search_by(|t| t.start.cmp(start)).expect("broken town survives plugging");
        let (plan, left, right) = create_gap(&plugged, idx, p, &copies, opts)?;
        replaced[idx] = Some((left, right));
        breaks.push(plan);
    }
    breaks.sort_by(|a, b| a.p.cmp(&b.p));

    let mut towns = Vec::with_capacity(plugged.towns.len() + breaks.len());
    for (t, r) in plugged.towns.into_iter().zip(replaced) {
        match r {
            Some((left, right)) => {
                towns.push(left);
                towns.push(right);
            }
            None => towns.push(t),
        }
    }
    let next = RefinementState { n: state.n, epsilon: state.epsilon.clone(), level, towns };
    Ok((next, LevelAudit { level, breaks, plugs }))
}

/// States for levels `0..=levels`.
pub fn build(n: usize, epsilon: Rational, levels: usize) -> Result<Vec<RefinementState>> {
    build_with_audit(n, epsilon, levels, &RefineOptions::default()).map(|(s, _)| s)
}

pub fn build_with_audit(
    n: usize,
    epsilon: Rational,
    levels: usize,
    opts: &RefineOptions,
) -> Result<(Vec<RefinementState>, Vec<LevelAudit>)> {
    validate_parameters(n, &epsilon)?;
    let mut states = vec![RefinementState::root(n, epsilon)?];
    let mut audits = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (next, audit) = refine_with_audit(states.last().unwrap(), opts)?;
        states.push(next);
        audits.push(audit);
    }
    Ok((states, audits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root() -> RefinementState {
        RefinementState::root(2, q(1, 5)).unwrap()
    }

    fn level1() -> RefinementState {
        refine(&root()).unwrap()
    }

    #[test]
    fn first_level_matches_hand_trace() {
        let (s, audit) = refine_with_audit(&root(), &RefineOptions::default()).unwrap();
        let summary: Vec<_> = s.towns.iter().map(|t| (t.start.clone(), t.end.clone(), t.value.clone())).collect();
        assert_eq!(
            summary,
            vec![(from_int(-1), q(-1, 15), q(0, 1)), (q(1, 15), from_int(1), q(1, 15))]
        );
        assert!(audit.plugs.is_empty());
        let plan = &audit.breaks[0];
        assert_eq!(plan.p, q(0, 1));
        assert_eq!(plan.rho_plus, Some(q(1, 5)));
        assert_eq!(plan.rho_minus, Some(q(1, 5)));
        assert_eq!(plan.delta_plus, Some(q(1, 5)));
        assert_eq!(plan.delta_minus, Some(q(1, 5)));
        assert_eq!(plan.rho, q(1, 15));
        assert_eq!(plan.eta, q(1, 15));
        assert_eq!(s.towns[0].origin, Origin::SplitLeft);
        assert_eq!(s.towns[1].origin, Origin::SplitRight);
    }

    #[test]
    fn select_breakables_examples() {
        let o = RefineOptions::default();
        assert_eq!(select_breakables(&root(), &o), vec![0]);
        assert_eq!(select_breakables(&level1(), &o), vec![0, 1]);
        let mut tiny = level1();
        tiny.level = 5;
        tiny.towns = vec![Town::new(q(0, 1), q(1, 100), q(0, 1), Origin::Plug, 5)];
        assert!(select_breakables(&tiny, &o).is_empty());
    }

    #[test]
    fn breakpoints_examples() {
        let o = RefineOptions::default();
        assert_eq!(choose_breakpoint(&root(), 0, &[], &o).unwrap(), q(0, 1));
        let s = level1();
        // 8/15 - 3/5 = -1/15 is a town endpoint; the first step away from 0 clears it.
        assert_eq!(choose_breakpoint(&s, 1, &[], &o).unwrap(), q(71, 120));
        assert_eq!(choose_breakpoint(&s, 0, &[], &o).unwrap(), q(-71, 120));
        assert_eq!(choose_breakpoints(&s, &[1, 0], &o).unwrap(), vec![q(71, 120), q(-71, 120)]);
        for p in [q(71, 120), q(-71, 120)] {
            for qi in -4..=4 {
                let c = &p - q(qi, 5);
                assert!(s.towns.iter().all(|t| t.start != c && t.end != c));
            }
        }
    }

    #[test]
    fn conflicting_fixed_copy_forces_perturbation() {
        let o = RefineOptions::default();
        let s = root();
        // A fixed break point exactly 2ε away from the midpoint collides.
        let p = choose_breakpoint(&s, 0, &[q(2, 5)], &o).unwrap();
        assert_ne!(p, q(0, 1));
        assert_eq!(p, q(1, 8));
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let o = RefineOptions { max_halvings: 0, ..RefineOptions::default() };
        assert!(matches!(choose_breakpoint(&level1(), 1, &[], &o), Err(Error::PerturbationExhausted { .. })));
    }

    #[test]
    fn find_holes_examples() {
        assert!(find_holes(&root(), &[q(0, 1)]).is_empty());
        let holes = find_holes(&level1(), &[q(71, 120), q(-71, 120)]);
        assert_eq!(holes.len(), 1);
        let h = &holes[0];
        assert_eq!((h.left_end.clone(), h.right_end.clone()), (q(-1, 15), q(1, 15)));
        let pts: Vec<_> = h.shifted_points.iter().map(|s| (s.p.clone(), s.q, s.point.clone())).collect();
        assert_eq!(pts, vec![(q(71, 120), 3, q(-1, 120)), (q(-71, 120), -3, q(1, 120))]);
        // A break point whose copies all land inside towns contributes nothing.
        assert!(find_holes(&level1(), &[q(1, 2)]).is_empty());
    }

    fn synthetic_hole(points: &[Rational], right_value: Rational) -> (Hole, RefinementState) {
        let state = RefinementState {
            n: 2,
            epsilon: q(1, 5),
            level: 1,
            towns: vec![
                Town::new(from_int(-1), q(0, 1), q(0, 1), Origin::SplitLeft, 1),
                Town::new(q(1, 1), q(1, 1) + q(1, 2), right_value, Origin::SplitRight, 1),
            ],
        };
        let hole = Hole {
            left_index: 0,
            left_end: q(0, 1),
            right_end: q(1, 1),
            shifted_points: points.iter().map(|p| ShiftedPoint { p: p.clone(), q: 0, point: p.clone() }).collect(),
        };
        (hole, state)
    }

    #[test]
    fn single_plug_matches_hand_solution() {
        let (hole, state) = synthetic_hole(&[q(2, 5)], q(1, 2));
        let sol = solve_plugs(&hole, &state, &q(3, 4)).unwrap();
        assert_eq!(sol.endpoints, vec![(q(4, 15), q(3, 5))]);
        assert_eq!(sol.values, vec![q(1, 5)]);
    }

    #[test]
    fn double_plug_matches_hand_solution() {
        let (hole, state) = synthetic_hole(&[q(1, 3), q(2, 3)], q(1, 2));
        let sol = solve_plugs(&hole, &state, &q(3, 4)).unwrap();
        assert_eq!(sol.endpoints, vec![(q(2, 9), q(7, 18)), (q(11, 18), q(7, 9))]);
        assert_eq!(sol.values, vec![q(1, 6), q(1, 3)]);
        assert_eq!(&sol.endpoints[0].1 - q(1, 3), q(2, 3) - &sol.endpoints[1].0);
        assert_eq!(&sol.endpoints[0].1 - q(1, 3), q(1, 18));
    }

    #[test]
    fn centred_plug_is_symmetric() {
        let (hole, state) = synthetic_hole(&[q(1, 2)], q(1, 2));
        let sol = solve_plugs(&hole, &state, &q(3, 4)).unwrap();
        let (a, b) = &sol.endpoints[0];
        assert_eq!(q(1, 2) - a, b - q(1, 2));
    }

    /// Oracle: plug the block solution back into every row of the full
    /// system, and compare with a dense solve of the unpermuted matrix.
    #[test]
    fn block_solution_satisfies_full_system() {
        let pts = [q(1, 7), q(2, 5), q(3, 5), q(9, 10)];
        let (hole, state) = synthetic_hole(&pts, q(1, 3));
        let m_hat = q(7, 8);
        let sol = solve_plugs(&hole, &state, &m_hat).unwrap();
        let x: Vec<Rational> = sol.endpoints.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        let mut f = vec![q(0, 1)];
        f.extend(sol.values.iter().cloned());
        f.push(q(1, 3));
        let (c, z) = plug_system(&q(0, 1), &q(1, 1), &pts, &f, &m_hat);
        for (row, rhs) in c.iter().zip(&z) {
            let lhs: Rational = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert_eq!(&lhs, rhs);
        }
        assert_eq!(solve_dense(c, z).unwrap(), x);
    }

    #[test]
    fn dense_solver_detects_singularity() {
        let a = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert!(matches!(solve_dense(a, vec![q(1, 1), q(2, 1)]), Err(Error::SingularSystem)));
    }

    #[test]
    fn second_level_has_two_plugs_in_the_central_gap() {
        let (s2, audit) = refine_with_audit(&level1(), &RefineOptions::default()).unwrap();
        assert_eq!(s2.towns.len(), 6);
        let plugs: Vec<_> = s2.towns.iter().filter(|t| t.origin == Origin::Plug).collect();
        assert_eq!(plugs.len(), 2);
        assert_eq!((plugs[0].start.clone(), plugs[0].end.clone()), (q(-1, 36), q(-1, 180)));
        assert_eq!((plugs[1].start.clone(), plugs[1].end.clone()), (q(1, 180), q(1, 36)));
        assert_eq!(plugs[0].value, q(7, 240));
        assert_eq!(plugs[1].value, q(3, 80));
        for t in &plugs {
            assert!(t.start > q(-1, 15) && t.end < q(1, 15));
        }
        assert_eq!(audit.plugs.len(), 1);
        assert_eq!(audit.plugs[0].nu, 2);
        for b in &audit.breaks {
            let delta = b.delta_plus.clone().unwrap().min(b.delta_minus.clone().unwrap());
            assert_eq!(delta, q(1, 60));
            assert_eq!(b.rho, q(1, 540));
        }
        s2.validate().unwrap();
        assert_eq!(s2.min_coverage(), 4);
    }

    #[test]
    fn no_breakable_towns_only_bumps_level() {
        let mut s = level1();
        s.level = 5;
        s.towns = vec![
            Town::new(q(0, 1), q(1, 100), q(0, 1), Origin::Plug, 5),
            Town::new(q(1, 50), q(3, 100), q(1, 10), Origin::Plug, 5),
        ];
        let next = refine(&s).unwrap();
        assert_eq!(next.level, 6);
        assert_eq!(next.towns, s.towns);
    }

    #[test]
    fn two_close_breaks_get_disjoint_gaps() {
        // β = 1/3: half-widths at most Δ/3 each, so closures cannot meet.
        let delta = q(1, 50);
        assert!(q(2, 3) * &delta < delta);
        let s = build(2, q(1, 5), 4).unwrap();
        let (_, audit) = refine_with_audit(&s[4], &RefineOptions::default()).unwrap();
        let mut gaps: Vec<(Rational, Rational)> = Vec::new();
        for b in &audit.breaks {
            for qi in -4..=4 {
                let c = &b.p - q(qi, 5);
                gaps.push((&c - &b.rho, &c + &b.rho));
            }
        }
        gaps.sort();
        for w in gaps.windows(2) {
            assert!(w[0].1 < w[1].0, "shifted gap closures overlap");
        }
    }

    #[test]
    fn audit_lines_are_json() {
        let (_, audit) = refine_with_audit(&level1(), &RefineOptions::default()).unwrap();
        let lines = audit.to_json_lines().unwrap();
        let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "plug");
        assert_eq!(first["nu"], 2);
        assert_eq!(first["hole"][0], "-1/15");
        let last: serde_json::Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
        assert_eq!(last["kind"], "break");
        assert_eq!(last["rho"], "1/540");
        assert_eq!(lines.lines().count(), 3);
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(build(2, q(1, 3), 1).is_err());
        assert!(build(1, q(1, 5), 1).is_err());
        assert_eq!(build(2, q(1, 5), 0).unwrap().len(), 1);
        let b = build(2, q(1, 5), 1).unwrap();
        assert_eq!(b[1], level1());
    }
}
