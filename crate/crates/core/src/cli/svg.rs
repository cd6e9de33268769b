//! Minimal static SVG line plots and success maps.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Self { label: label.into(), xs, ys, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// One panel of a line figure.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl LinePlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions covering `[lo, hi]` with a 1-2-5 step.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|k| k * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn panel(out: &mut String, plot: &LinePlot, top: f64) {
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let y0 = top + MARGIN_TOP;
    let y1 = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    let (xlo, xhi) = bounds(plot.series.iter().flat_map(|s| s.xs.iter().copied()));
    let (ylo, yhi) = bounds(plot.series.iter().flat_map(|s| s.ys.iter().copied()));
    let sx = |x: f64| left + (x - xlo) / (xhi - xlo) * (right - left);
    let sy = |y: f64| y1 - (y - ylo) / (yhi - ylo) * (y1 - y0);

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        top + 20.0,
        escape(&plot.title)
    );
    for t in ticks(xlo, xhi) {
        let x = sx(t);
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#e6e6e6"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            y1 + 15.0,
            fmt_tick(t)
        );
    }
    for t in ticks(ylo, yhi) {
        let y = sy(t);
        let _ = writeln!(out, r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#e6e6e6"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{left:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        y1 - y0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        y1 + 34.0,
        escape(&plot.x_label)
    );
    let ym = (y0 + y1) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="16" y="{ym:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {ym:.1})">{}</text>"#,
        escape(&plot.y_label)
    );
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&x, &y) in s.xs.iter().zip(&s.ys) {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
            pen_down = true;
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.trim_end());
        let ly = y0 + 12.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            right + 10.0,
            right + 30.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            right + 35.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
}

fn open(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Stacks the panels vertically into one document.
pub fn render(panels: &[LinePlot]) -> String {
    let mut out = open(PANEL_HEIGHT * panels.len().max(1) as f64);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// One labelled grid of pass/fail cells; `cells[row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessMap {
    pub title: String,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub cells: Vec<Vec<bool>>,
}

/// Places the maps side by side.
pub fn render_maps(maps: &[SuccessMap]) -> String {
    let cell = 44.0;
    let pad = 80.0;
    let map_width = |m: &SuccessMap| pad + cell * m.cols.len() as f64 + 30.0;
    let total_w: f64 = maps.iter().map(map_width).sum::<f64>().max(200.0);
    let max_rows = maps.iter().map(|m| m.rows.len()).max().unwrap_or(0) as f64;
    let total_h = 60.0 + cell * max_rows + 60.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w}\" height=\"{total_h}\" viewBox=\"0 0 {total_w} {total_h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let mut x0 = 0.0;
    for m in maps {
        let left = x0 + pad;
        let top = 50.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
            left + cell * m.cols.len() as f64 / 2.0,
            escape(&m.title)
        );
        for (r, row) in m.cells.iter().enumerate() {
            let y = top + cell * r as f64;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
                left - 6.0,
                y + cell / 2.0 + 4.0,
                fmt_tick(m.rows[r])
            );
            for (c, ok) in row.iter().enumerate() {
                let x = left + cell * c as f64;
                let fill = if *ok { "#7fc97f" } else { "#f0027f" };
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/>"#
                );
            }
        }
        let bottom = top + cell * m.rows.len() as f64;
        for (c, v) in m.cols.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
                left + cell * c as f64 + cell / 2.0,
                bottom + 15.0,
                fmt_tick(*v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            left + cell * m.cols.len() as f64 / 2.0,
            bottom + 36.0,
            escape(&m.col_label)
        );
        let ym = top + cell * m.rows.len() as f64 / 2.0;
        let xl = left - 48.0;
        let _ = writeln!(
            out,
            r#"<text x="{xl:.1}" y="{ym:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {xl:.1} {ym:.1})">{}</text>"#,
            escape(&m.row_label)
        );
        x0 += map_width(m);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(-0.13, 3.2);
        assert_eq!(t.first().copied(), Some(0.0));
        assert!(t.iter().all(|v| (-0.13..=3.2).contains(v)));
        assert!(t.len() >= 3 && t.len() <= 8);
    }

    #[test]
    fn render_is_deterministic_and_closed() {
        let p = LinePlot::new("a < b", "t", "y").with(Series::new("s", vec![0.0, 1.0, 2.0], vec![1.0, f64::NAN, 3.0]));
        let a = render(std::slice::from_ref(&p));
        assert_eq!(a, render(&[p]));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a &lt; b"));
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn maps_draw_one_rect_per_cell() {
        let m = SuccessMap {
            title: "x".into(),
            row_label: "m".into(),
            col_label: "l".into(),
            rows: vec![1.0, 2.0],
            cols: vec![6.0, 7.0, 8.0],
            cells: vec![vec![true, false, true], vec![true, true, true]],
        };
        let s = render_maps(&[m]);
        assert_eq!(s.matches("<rect x=").count(), 6);
    }
}
