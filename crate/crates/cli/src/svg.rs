//! Static SVG heatmaps of SVP rates over the `(n, d)` grid.
//!
//! Columns are the distinct `n` values and rows the distinct `d` values of
//! the selection, `d` increasing upwards. Overlay curves are mapped through
//! the same index axes, interpolating linearly between neighbouring grid
//! values, so a curve through a grid point passes through that cell's centre.
//!
//! Colour map (rate → fill), linear in RGB between stops:
//!
//! | rate | fill      |
//! |------|-----------|
//! | 0.00 | `#f7fbff` |
//! | 0.25 | `#c6dbef` |
//! | 0.50 | `#6baed6` |
//! | 0.75 | `#2171b5` |
//! | 1.00 | `#08306b` |

use std::fmt::Write;

use svplab::CellSummary;

pub const COLOR_STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [0xf7, 0xfb, 0xff]),
    (0.25, [0xc6, 0xdb, 0xef]),
    (0.5, [0x6b, 0xae, 0xd6]),
    (0.75, [0x21, 0x71, 0xb5]),
    (1.0, [0x08, 0x30, 0x6b]),
];

const OVERLAY_COLOR: &str = "#d62728";
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const LEGEND_WIDTH: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeatmapError {
    EmptySelection,
}

impl std::fmt::Display for HeatmapError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no summaries match the selection")
    }
}

impl std::error::Error for HeatmapError {}

/// Curve `d = f(n)` drawn over the heatmap.
pub struct Overlay {
    pub label: String,
    pub curve: Box<dyn Fn(f64) -> f64>,
}

impl Overlay {
    /// The `d = 2 n ln n` boundary.
    pub fn threshold() -> Self {
        Overlay { label: "2n ln n".into(), curve: Box::new(|n| 2.0 * n * n.ln()) }
    }
}

pub struct HeatmapSpec {
    pub title: String,
    pub cell_width: f64,
    pub cell_height: f64,
    pub overlays: Vec<Overlay>,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self { title: String::new(), cell_width: 28.0, cell_height: 14.0, overlays: vec![Overlay::threshold()] }
    }
}

/// Fill colour for a rate in `[0, 1]`.
pub fn color_for(rate: f64) -> String {
    let r = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    let k = COLOR_STOPS.windows(2).position(|w| r <= w[1].0).unwrap_or(COLOR_STOPS.len() - 2);
    let ((r0, c0), (r1, c1)) = (COLOR_STOPS[k], COLOR_STOPS[k + 1]);
    let t = (r - r0) / (r1 - r0);
    let mix = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
}

/// Piecewise-linear position of `v` on an axis whose grid values sit at
/// integer indices; extrapolates past the ends.
fn axis_position(grid: &[usize], v: f64) -> f64 {
    if grid.len() == 1 {
        return 0.0;
    }
    let k = grid.windows(2).position(|w| v <= w[1] as f64).unwrap_or(grid.len() - 2);
    let (a, b) = (grid[k] as f64, grid[k + 1] as f64);
    k as f64 + (v - a) / (b - a)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_heatmap_svg(summaries: &[CellSummary], spec: &HeatmapSpec) -> Result<String, HeatmapError> {
    if summaries.is_empty() {
        return Err(HeatmapError::EmptySelection);
    }
    let mut ns: Vec<usize> = summaries.iter().map(|s| s.cell.n).collect();
    let mut ds: Vec<usize> = summaries.iter().map(|s| s.cell.d).collect();
    ns.sort_unstable();
    ns.dedup();
    ds.sort_unstable();
    ds.dedup();
    let (cw, ch) = (spec.cell_width, spec.cell_height);
    let plot_w = cw * ns.len() as f64;
    let plot_h = ch * ds.len() as f64;
    let width = MARGIN_LEFT + plot_w + LEGEND_WIDTH;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;
    // centre of column/row index
    let px = |i: f64| MARGIN_LEFT + (i + 0.5) * cw;
    let py = |j: f64| MARGIN_TOP + plot_h - (j + 0.5) * ch;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot"><rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}"/></clipPath></defs>"#
    );
    if !spec.title.is_empty() {
        let _ = writeln!(out, r#"<text x="{:.2}" y="20" font-size="13">{}</text>"#, MARGIN_LEFT, escape(&spec.title));
    }
    let _ = writeln!(out, r#"<g id="cells">"#);
    for s in summaries {
        let i = ns.binary_search(&s.cell.n).unwrap_or(0) as f64;
        let j = ds.binary_search(&s.cell.d).unwrap_or(0) as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"><title>n={} d={} rate={}</title></rect>"#,
            px(i) - cw / 2.0,
            py(j) - ch / 2.0,
            color_for(s.rate),
            s.cell.n,
            s.cell.d,
            s.rate
        );
    }
    let _ = writeln!(out, "</g>");

    for (k, overlay) in spec.overlays.iter().enumerate() {
        let mut points = Vec::new();
        for w in 0..ns.len() {
            let steps = if w + 1 < ns.len() { 8 } else { 1 };
            for s in 0..steps {
                let n = if steps == 1 {
                    ns[w] as f64
                } else {
                    ns[w] as f64 + (ns[w + 1] - ns[w]) as f64 * s as f64 / steps as f64
                };
                let d = (overlay.curve)(n);
                if n.is_finite() && d.is_finite() {
                    points.push(format!("{:.2},{:.2}", px(axis_position(&ns, n)), py(axis_position(&ds, d))));
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<polyline clip-path="url(#plot)" fill="none" stroke="{OVERLAY_COLOR}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(&overlay.label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{OVERLAY_COLOR}">{}</text>"#,
            MARGIN_LEFT + plot_w + 10.0,
            MARGIN_TOP + plot_h - 10.0 - 14.0 * k as f64,
            escape(&overlay.label)
        );
    }

    // axes
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(out, r##"<g id="axes" stroke="#333333" fill="none">"##);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/>"#, x0 + plot_w);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{MARGIN_TOP:.2}" x2="{x0:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, "</g>");
    let xstride = ns.len().div_ceil(12).max(1);
    for (i, n) in ns.iter().enumerate().step_by(xstride) {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#, px(i as f64), y0 + 14.0);
    }
    let ystride = ds.len().div_ceil(12).max(1);
    for (j, d) in ds.iter().enumerate().step_by(ystride) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{d}</text>"#,
            x0 - 4.0,
            py(j as f64) + 3.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">n</text>"#,
        x0 + plot_w / 2.0,
        y0 + 34.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.2})">d</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // legend: one swatch per tenth of rate
    let lx = MARGIN_LEFT + plot_w + 10.0;
    let swatch = 12.0;
    let _ = writeln!(out, r#"<g id="legend">"#);
    for k in 0..=10 {
        let rate = k as f64 / 10.0;
        let y = MARGIN_TOP + (10 - k) as f64 * swatch;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{y:.2}" width="{swatch:.2}" height="{swatch:.2}" fill="{}"/>"#,
            color_for(rate)
        );
        if k % 5 == 0 {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{rate:.1}</text>"#, lx + swatch + 4.0, y + 9.0);
        }
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}
