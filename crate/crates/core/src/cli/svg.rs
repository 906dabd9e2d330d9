//! Standalone SVG charts: signed bars, line series and a text table.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const POSITIVE: &str = "#d62728";
const NEGATIVE: &str = "#1f77b4";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

/// Maps `[lo, hi]` onto the plot's vertical extent.
struct YScale {
    lo: f64,
    hi: f64,
}

impl YScale {
    fn new(lo: f64, hi: f64) -> Self {
        if hi - lo < 1e-12 {
            YScale { lo: lo - 1.0, hi: hi + 1.0 }
        } else {
            YScale { lo, hi }
        }
    }

    fn y(&self, v: f64) -> f64 {
        let plot = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + plot * (self.hi - v) / (self.hi - self.lo)
    }

    fn axis(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{:.1}" stroke="black"/>"#,
            HEIGHT - MARGIN_BOTTOM
        );
        for i in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
                MARGIN_LEFT,
                WIDTH - MARGIN_RIGHT
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
                MARGIN_LEFT - 6.0,
                y + 4.0
            );
        }
    }
}

fn axis_label(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

/// Signed bars around zero: positive values red, negative blue.
pub fn signed_bar_chart(title: &str, labels: &[String], values: &[f64], y_label: &str) -> String {
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, title);
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let extent = finite.fold(0.0f64, |m, v| m.max(v.abs()));
    let extent = if extent > 0.0 { extent * 1.1 } else { 0.01 };
    let scale = YScale::new(-extent, extent);
    scale.axis(&mut out);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot = plot_w / values.len().max(1) as f64;
    let zero = scale.y(0.0);
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let v = if v.is_finite() { v } else { 0.0 };
        let top = scale.y(v.max(0.0));
        let h = (scale.y(v.min(0.0)) - top).abs();
        let fill = if v >= 0.0 { POSITIVE } else { NEGATIVE };
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{top:.1}" width="{w:.1}" height="{h:.1}" fill="{fill}"><title>{}: {v:.5}</title></rect>"#,
            escape(label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + w / 2.0,
            HEIGHT - MARGIN_BOTTOM + 16.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT}" y1="{zero:.1}" x2="{:.1}" y2="{zero:.1}" stroke="black"/>"#,
        WIDTH - MARGIN_RIGHT
    );
    axis_label(&mut out, "class", y_label);
    let lx = WIDTH - MARGIN_RIGHT + 12.0;
    for (i, (color, text)) in [(POSITIVE, "overestimated"), (NEGATIVE, "underestimated")].iter().enumerate() {
        let y = MARGIN_TOP + 20.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{lx:.1}" y="{y:.1}" width="12" height="12" fill="{color}"/>"#);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{text}</text>"#, lx + 18.0, y + 10.0);
    }
    out.push_str("</svg>\n");
    out
}

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, title);
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.1.is_finite());
    let (x_lo, x_hi) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi.max(x_lo + 1.0)) } else { (0.0, 1.0) };
    let y_lo = pts().fold(0.0f64, |m, p| m.min(p.1));
    let y_hi = pts().fold(1.0f64, |m, p| m.max(p.1));
    let scale = YScale::new(y_lo, y_hi);
    scale.axis(&mut out);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let x_of = |x: f64| MARGIN_LEFT + plot_w * (x - x_lo) / (x_hi - x_lo);
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    );
    for i in 0..=4 {
        let x = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.0}</text>"#,
            x_of(x),
            HEIGHT - MARGIN_BOTTOM + 16.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", x_of(x), scale.y(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{points}"><title>{}</title></polyline>"#,
            escape(&s.name)
        );
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let ly = MARGIN_TOP + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
            ly + 6.0,
            lx + 14.0,
            ly + 6.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 20.0, ly + 10.0, escape(&s.name));
    }
    axis_label(&mut out, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

/// Renders a grid of text cells. The first row is the header.
pub fn table(title: &str, rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<f64> = (0..cols)
        .map(|c| {
            let chars = rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0);
            (chars as f64 * 7.5 + 24.0).max(60.0)
        })
        .collect();
    let row_h = 24.0;
    let width = widths.iter().sum::<f64>() + 20.0;
    let height = MARGIN_TOP + row_h * rows.len() as f64 + 10.0;
    let mut out = String::new();
    open(&mut out, width.max(240.0), height, title);
    for (r, row) in rows.iter().enumerate() {
        let y = MARGIN_TOP + row_h * r as f64;
        if r == 0 {
            let _ = writeln!(
                out,
                r##"<rect x="10" y="{y:.1}" width="{:.1}" height="{row_h}" fill="#eeeeee"/>"##,
                widths.iter().sum::<f64>()
            );
        }
        let mut x = 10.0;
        for (c, cell) in row.iter().enumerate() {
            let weight = if r == 0 || c == 0 { "bold" } else { "normal" };
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-weight="{weight}">{}</text>"#,
                x + 8.0,
                y + 16.0,
                escape(cell)
            );
            x += widths[c];
        }
    }
    out.push_str("</svg>\n");
    out
}
