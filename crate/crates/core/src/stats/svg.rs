//! Standalone SVG rendering of critical-difference diagrams.
//!
//! Rank 1 sits at the left end of the axis. Algorithms in the better half are
//! labelled on the left, the rest on the right. Each group of
//! indistinguishable algorithms is one thick bar (`class="group-bar"`) under
//! the axis; singleton groups get no bar.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::CdLayout;

const MARGIN: f64 = 160.0;
const RANK_STEP: f64 = 70.0;
const AXIS_Y: f64 = 60.0;
const BAR_GAP: f64 = 9.0;
const LABEL_GAP: f64 = 22.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Geometry {
    k: usize,
    span: f64,
    width: f64,
}

impl Geometry {
    fn new(k: usize) -> Self {
        let span = RANK_STEP * (k.max(2) - 1) as f64;
        Geometry {
            k,
            span,
            width: 2.0 * MARGIN + span,
        }
    }

    fn x(&self, rank: f64) -> f64 {
        if self.k <= 1 {
            MARGIN + self.span / 2.0
        } else {
            MARGIN + (rank - 1.0) / (self.k - 1) as f64 * self.span
        }
    }
}

/// Renders `layout` to an SVG string. Output depends only on the layout.
pub fn cd_svg_string(layout: &CdLayout) -> String {
    let g = Geometry::new(layout.k);
    let bars: Vec<(f64, f64)> = layout
        .groups
        .iter()
        .filter(|grp| grp.len() > 1)
        .map(|grp| {
            let ranks: Vec<f64> = grp.iter().filter_map(|n| layout.position(n)).collect();
            let lo = ranks.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let labels_top = AXIS_Y + 20.0 + BAR_GAP * bars.len() as f64;
    let n = layout.algorithm_positions.len();
    let left_count = n.div_ceil(2);
    let rows = left_count.max(n - left_count);
    let height = labels_top + LABEL_GAP * rows as f64 + 20.0;

    let mut s = String::new();
    // writes into a String cannot fail
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}" font-family="sans-serif" font-size="12">"#,
        g.width, height, g.width, height
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="white"/>"#,
        g.width, height
    );

    // critical difference ruler
    let cd_end = g.x(1.0 + layout.critical_difference);
    let _ = writeln!(
        s,
        r#"<line class="cd-ruler" x1="{:.2}" y1="18.00" x2="{:.2}" y2="18.00" stroke="black" stroke-width="2"/>"#,
        g.x(1.0),
        cd_end
    );
    let _ = writeln!(
        s,
        r#"<text class="cd-label" x="{:.2}" y="12.00" text-anchor="middle">CD = {:.3}</text>"#,
        (g.x(1.0) + cd_end) / 2.0,
        layout.critical_difference
    );

    // axis and ticks
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.2}" y1="{AXIS_Y:.2}" x2="{:.2}" y2="{AXIS_Y:.2}" stroke="black" stroke-width="1"/>"#,
        g.x(1.0),
        g.x(layout.k.max(1) as f64)
    );
    for r in 1..=layout.k.max(1) {
        let x = g.x(r as f64);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{AXIS_Y:.2}" stroke="black" stroke-width="1"/>"#,
            AXIS_Y - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text class="tick-label" x="{x:.2}" y="{:.2}" text-anchor="middle">{r}</text>"#,
            AXIS_Y - 10.0
        );
    }

    // algorithms: marker on the axis, elbow connector, label
    for (i, (name, rank)) in layout.algorithm_positions.iter().enumerate() {
        let x = g.x(*rank);
        let (row, left) = if i < left_count {
            (i, true)
        } else {
            (n - 1 - i, false)
        };
        let y = labels_top + LABEL_GAP * row as f64;
        let (end_x, text_x, anchor) = if left {
            (MARGIN - 10.0, MARGIN - 14.0, "end")
        } else {
            (g.width - MARGIN + 10.0, g.width - MARGIN + 14.0, "start")
        };
        let _ = writeln!(
            s,
            r#"<polyline class="connector" points="{x:.2},{AXIS_Y:.2} {x:.2},{y:.2} {end_x:.2},{y:.2}" fill="none" stroke="gray" stroke-width="1"/>"#
        );
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{x:.2}" cy="{AXIS_Y:.2}" r="3" fill="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text class="algorithm" x="{text_x:.2}" y="{:.2}" text-anchor="{anchor}">{} ({rank:.2})</text>"#,
            y + 4.0,
            escape(name)
        );
    }

    for (j, (lo, hi)) in bars.iter().enumerate() {
        let y = AXIS_Y + 14.0 + BAR_GAP * j as f64;
        let _ = writeln!(
            s,
            r#"<line class="group-bar" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="4" stroke-linecap="round"/>"#,
            g.x(*lo) - 4.0,
            g.x(*hi) + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_cd_svg<W: Write>(layout: &CdLayout, mut out: W) -> io::Result<()> {
    out.write_all(cd_svg_string(layout).as_bytes())
}
