//! Static SVG figures: shifted town families per level, and the graph of ψ.

use std::fmt::Write;

use kolmo_core::exact::to_f64;
use kolmo_core::{PiecewiseLinear, RefinementState};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 60.0;
const ROW: f64 = 12.0;
const BLOCK_GAP: f64 = 28.0;

fn header(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h:.0}\" viewBox=\"0 0 {w} {h:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w = WIDTH + 2.0 * MARGIN,
        h = height
    )
}

/// Maps `[0, 1]` onto the drawing width.
fn sx(x: f64) -> f64 {
    MARGIN + x.clamp(0.0, 1.0) * WIDTH
}

/// One block per state with a row of bars for each shift `q = 0..2n`, showing
/// the towns `t - qε` that meet `[0, 1]`.
pub fn town_bars(states: &[RefinementState]) -> String {
    let block = |s: &RefinementState| (s.families() as f64 + 1.0) * ROW + BLOCK_GAP;
    let height = states.iter().map(block).sum::<f64>() + MARGIN;
    let mut out = header(height);
    let mut y = MARGIN / 2.0;
    for s in states {
        let eps = to_f64(&s.epsilon);
        writeln!(out, "<text x=\"4\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\">level {}</text>", y + ROW, s.level)
            .unwrap();
        for q in 0..s.families() {
            let row_y = y + (q as f64 + 1.0) * ROW;
            writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" font-family=\"sans-serif\" text-anchor=\"end\">q={q}</text>",
                MARGIN - 6.0,
                row_y + ROW * 0.6
            )
            .unwrap();
            let shift = q as f64 * eps;
            for t in &s.towns {
                let (a, b) = (to_f64(&t.start) - shift, to_f64(&t.end) - shift);
                if b < 0.0 || a > 1.0 {
                    continue;
                }
                let (x0, x1) = (sx(a), sx(b));
                writeln!(
                    out,
                    "<rect x=\"{x0:.2}\" y=\"{:.1}\" width=\"{:.2}\" height=\"{:.1}\" fill=\"#2b6cb0\"/>",
                    row_y + 2.0,
                    (x1 - x0).max(0.5),
                    ROW - 4.0
                )
                .unwrap();
            }
        }
        y += block(s);
    }
    out.push_str("</svg>\n");
    out
}

/// Polyline through the knots of ψ over its domain `[-1, 1]`.
pub fn graph(state: &RefinementState) -> String {
    let psi = PiecewiseLinear::from_state(state);
    let height = WIDTH * 0.6 + 2.0 * MARGIN;
    let plot_h = WIDTH * 0.6;
    let knots: Vec<(f64, f64)> = psi.knots().iter().map(|(x, y)| (to_f64(x), to_f64(y))).collect();
    let (ymin, ymax) = knots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    let span = if ymax > ymin { ymax - ymin } else { 1.0 };
    let px = |x: f64| MARGIN + (x + 1.0) / 2.0 * WIDTH;
    let py = |y: f64| MARGIN + plot_h - (y - ymin) / span * plot_h;
    let mut out = header(height);
    writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{WIDTH}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#999\"/>"
    )
    .unwrap();
    let points: Vec<String> = knots.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    writeln!(out, "<polyline fill=\"none\" stroke=\"#c53030\" stroke-width=\"1\" points=\"{}\"/>", points.join(" ")).unwrap();
    writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">psi after {} levels, {} towns</text>",
        MARGIN - 10.0,
        state.level,
        state.towns.len()
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use kolmo_core::build;
    use kolmo_core::exact::parse_rational;

    #[test]
    fn one_row_per_family_and_level() {
        let states = build(2, parse_rational("1/5").unwrap(), 2).unwrap();
        let svg = town_bars(&states[1..]);
        assert_eq!(svg.matches(">q=").count(), 10);
        assert_eq!(svg.matches(">level ").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn graph_has_one_point_per_knot() {
        let states = build(2, parse_rational("1/5").unwrap(), 1).unwrap();
        let svg = graph(&states[1]);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 4);
    }
}
